//! Best-bound branch and bound on a deterministic step clock.
//!
//! One step is one processed node (an LP solve). Nodes discarded by bound
//! before their LP is solved do not advance the clock. Every incumbent is
//! stamped with the step of the node that produced it, so steps run from 1 to
//! `step_limit` and the interval `[0, 1)` always precedes the first incumbent.

mod dive;

pub use dive::dive_heuristic;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::instance::{Assignment, MilpInstance, VarKind, FEAS_TOL};
use crate::lp::{solve_lp_with_bounds, LpError, LpResult, LpStatus};

/// Binary variable fixings: variable index to value (`true` = 1).
pub type BinaryFixings = BTreeMap<usize, bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeuristicEmphasis {
    /// Dive only at the root node.
    #[default]
    Off,
    /// Dive at every node.
    Aggressive,
}

impl fmt::Display for HeuristicEmphasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicEmphasis::Off => "off",
            HeuristicEmphasis::Aggressive => "aggressive",
        })
    }
}

impl FromStr for HeuristicEmphasis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(HeuristicEmphasis::Off),
            "aggressive" => Ok(HeuristicEmphasis::Aggressive),
            other => Err(format!("unknown emphasis `{other}` (expected off|aggressive)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Node budget.
    pub step_limit: u64,
    pub heuristic_emphasis: HeuristicEmphasis,
    pub collect_pool: bool,
    pub pool_size: usize,
    /// Recorded with the run for provenance. The search itself draws no
    /// random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step_limit: 10_000,
            heuristic_emphasis: HeuristicEmphasis::Off,
            collect_pool: false,
            pool_size: 10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_step_limit(step_limit: u64) -> Self {
        SolverConfig {
            step_limit,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.step_limit < 1 {
            return Err(SolverError::InvalidConfig("step_limit must be >= 1".into()));
        }
        if self.collect_pool && self.pool_size < 1 {
            return Err(SolverError::InvalidConfig(
                "pool_size must be >= 1 when collecting".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncumbentEvent {
    pub step: u64,
    pub objective: f64,
    pub values: Vec<f64>,
}

/// Improving incumbents in discovery order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncumbentTrajectory {
    pub events: Vec<IncumbentEvent>,
    pub terminal_step: u64,
    pub proved_optimal: bool,
}

impl IncumbentTrajectory {
    pub fn best(&self) -> Option<&IncumbentEvent> {
        self.events.last()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.best().map(|e| e.objective)
    }

    pub fn first_incumbent_step(&self) -> Option<u64> {
        self.events.first().map(|e| e.step)
    }

    /// `(step, objective)` pairs.
    pub fn points(&self) -> Vec<(u64, f64)> {
        self.events.iter().map(|e| (e.step, e.objective)).collect()
    }
}

/// Distinct feasible solutions, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPool {
    pub instance_name: String,
    pub entries: Vec<Assignment>,
}

impl SolutionPool {
    pub fn new(instance_name: impl Into<String>) -> Self {
        SolutionPool {
            instance_name: instance_name.into(),
            entries: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Inserts keeping the pool sorted by `(objective, values)` and at most
    /// `capacity` long. Duplicate value vectors are ignored.
    pub fn insert(&mut self, solution: Assignment, capacity: usize) {
        if self.entries.iter().any(|e| e.values == solution.values) {
            return;
        }
        let pos = self
            .entries
            .partition_point(|e| pool_order(e, &solution) == Ordering::Less);
        if pos >= capacity {
            return;
        }
        self.entries.insert(pos, solution);
        self.entries.truncate(capacity);
    }
}

fn pool_order(a: &Assignment, b: &Assignment) -> Ordering {
    a.objective.total_cmp(&b.objective).then_with(|| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("subproblem is infeasible under the given fixings")]
    InfeasibleSubproblem,
    #[error("invalid fixing on variable {var}: {reason}")]
    InvalidFixing { var: usize, reason: String },
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

struct Node {
    bound: f64,
    id: u64,
    bounds: Vec<(f64, f64)>,
    lp: Option<LpResult>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    config: &'a SolverConfig,
    trajectory: IncumbentTrajectory,
    pool: SolutionPool,
    incumbent: f64,
}

impl Search<'_> {
    fn prune_level(&self) -> f64 {
        if self.incumbent.is_finite() {
            self.incumbent - 1e-9 * (1.0 + self.incumbent.abs())
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, step: u64, solution: Assignment) {
        if solution.objective < self.prune_level() {
            self.incumbent = solution.objective;
            let event = IncumbentEvent {
                step,
                objective: solution.objective,
                values: solution.values.clone(),
            };
            match self.trajectory.events.last_mut() {
                Some(last) if last.step == step => *last = event,
                _ => self.trajectory.events.push(event),
            }
        }
        if self.config.collect_pool {
            self.pool.insert(solution, self.config.pool_size);
        }
    }
}

/// Solves `instance` with the given binary fixings.
///
/// Returns [`SolverError::InfeasibleSubproblem`] when the root relaxation is
/// infeasible or the tree is exhausted without an integer-feasible point. If
/// the budget runs out first, the trajectory may simply be empty.
pub fn solve(
    instance: &MilpInstance,
    fixings: &BinaryFixings,
    config: &SolverConfig,
) -> Result<(IncumbentTrajectory, SolutionPool), SolverError> {
    config.validate()?;
    let mut root_bounds: Vec<(f64, f64)> =
        instance.vars().iter().map(|v| (v.lb, v.ub)).collect();
    for (&var, &value) in fixings {
        let kind = instance.vars().get(var).map(|v| v.kind);
        if kind != Some(VarKind::Binary) {
            return Err(SolverError::InvalidFixing {
                var,
                reason: "only binary variables can be fixed".into(),
            });
        }
        let v = if value { 1.0 } else { 0.0 };
        root_bounds[var] = (v, v);
    }

    let root_lp = solve_lp_with_bounds(instance, &root_bounds)?;
    if root_lp.status == LpStatus::Infeasible {
        return Err(SolverError::InfeasibleSubproblem);
    }

    let mut search = Search {
        config,
        trajectory: IncumbentTrajectory::default(),
        pool: SolutionPool::new(instance.name()),
        incumbent: f64::INFINITY,
    };
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        bounds: root_bounds,
        lp: Some(root_lp),
    });
    let mut next_id = 1;
    let mut steps = 0u64;
    let mut saw_unbounded = false;

    while let Some(mut node) = heap.pop() {
        if node.bound >= search.prune_level() {
            continue;
        }
        if steps >= config.step_limit {
            heap.push(node);
            break;
        }
        steps += 1;

        let lp = match node.lp.take() {
            Some(lp) => lp,
            None => solve_lp_with_bounds(instance, &node.bounds)?,
        };
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // No finite relaxation point to branch on; the subtree is
                // dropped and optimality can no longer be claimed.
                saw_unbounded = true;
                continue;
            }
            LpStatus::Optimal => {}
        }
        if lp.objective >= search.prune_level() {
            continue;
        }

        let x = &lp.primal_values;
        let branch = instance
            .vars()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind.is_integral())
            .map(|(j, _)| (j, (x[j] - x[j].round()).abs()))
            .filter(|&(_, f)| f > FEAS_TOL)
            .fold(None, |acc: Option<(usize, f64)>, (j, f)| match acc {
                Some((_, best)) if best >= f => acc,
                _ => Some((j, f)),
            });

        let Some((j, _)) = branch else {
            let values: Vec<f64> = instance
                .vars()
                .iter()
                .zip(x)
                .map(|(v, &xj)| if v.kind.is_integral() { xj.round() } else { xj })
                .collect();
            if instance.is_feasible(&values) {
                search.offer(steps, Assignment::new(instance, values));
            }
            continue;
        };

        if steps == 1 || config.heuristic_emphasis == HeuristicEmphasis::Aggressive {
            if let Some(sol) = dive::dive_with_bounds(instance, &node.bounds, x) {
                search.offer(steps, sol);
            }
        }

        let (lb, ub) = node.bounds[j];
        let mut down = node.bounds.clone();
        down[j] = (lb, x[j].floor());
        let mut up = node.bounds;
        up[j] = (x[j].ceil(), ub);
        for bounds in [down, up] {
            heap.push(Node {
                bound: lp.objective,
                id: next_id,
                bounds,
                lp: None,
            });
            next_id += 1;
        }
    }

    let exhausted = heap.iter().all(|n| n.bound >= search.prune_level());
    if exhausted && !saw_unbounded && search.trajectory.events.is_empty() {
        return Err(SolverError::InfeasibleSubproblem);
    }
    search.trajectory.terminal_step = steps;
    search.trajectory.proved_optimal =
        exhausted && !saw_unbounded && !search.trajectory.events.is_empty();
    Ok((search.trajectory, search.pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{brute_force_solve, generate_covering, generate_knapsack};

    fn cfg(limit: u64) -> SolverConfig {
        SolverConfig::with_step_limit(limit)
    }

    #[test]
    fn knapsack_matches_oracle() {
        let inst = generate_knapsack(1, 3, 1);
        let (traj, _) = solve(&inst, &BinaryFixings::new(), &cfg(10_000)).unwrap();
        assert!(traj.proved_optimal);
        let oracle = brute_force_solve(&inst).unwrap();
        assert!((traj.final_objective().unwrap() - oracle.objective).abs() < 1e-6);
    }

    #[test]
    fn contradictory_fixings() {
        let inst = generate_knapsack(1, 3, 1);
        let all: BinaryFixings = (0..3).map(|j| (j, true)).collect();
        assert!(!inst.is_feasible(&[1.0; 3]));
        assert_eq!(
            solve(&inst, &all, &cfg(100)).unwrap_err(),
            SolverError::InfeasibleSubproblem
        );
    }

    #[test]
    fn fully_fixed_at_optimum() {
        let inst = generate_knapsack(5, 6, 2);
        let oracle = brute_force_solve(&inst).unwrap();
        let fix: BinaryFixings = oracle
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| (j, v > 0.5))
            .collect();
        let (traj, _) = solve(&inst, &fix, &cfg(100)).unwrap();
        assert_eq!(traj.events.len(), 1);
        assert_eq!(traj.events[0].objective, oracle.objective);
        assert!(traj.proved_optimal);
    }

    #[test]
    fn rejects_non_binary_fixing() {
        let inst = generate_knapsack(1, 3, 1);
        let fix = BinaryFixings::from([(7, true)]);
        assert!(matches!(
            solve(&inst, &fix, &cfg(10)),
            Err(SolverError::InvalidFixing { var: 7, .. })
        ));
    }

    #[test]
    fn trajectory_is_monotone() {
        for seed in 0..10 {
            let inst = generate_covering(seed, 18, 8);
            let config = SolverConfig {
                heuristic_emphasis: HeuristicEmphasis::Aggressive,
                ..cfg(10_000)
            };
            let (traj, _) = solve(&inst, &BinaryFixings::new(), &config).unwrap();
            for w in traj.events.windows(2) {
                assert!(w[0].step < w[1].step);
                assert!(w[0].objective > w[1].objective);
            }
            for e in &traj.events {
                assert!(inst.is_feasible(&e.values));
                assert!(e.step >= 1 && e.step <= traj.terminal_step);
            }
        }
    }

    #[test]
    fn pool_is_sorted_distinct_and_bounded() {
        let inst = generate_covering(2, 14, 6);
        let config = SolverConfig {
            heuristic_emphasis: HeuristicEmphasis::Aggressive,
            collect_pool: true,
            pool_size: 5,
            ..cfg(10_000)
        };
        let (traj, pool) = solve(&inst, &BinaryFixings::new(), &config).unwrap();
        assert!(!pool.is_empty() && pool.len() <= 5);
        for w in pool.entries.windows(2) {
            assert!(w[0].objective <= w[1].objective);
            assert_ne!(w[0].values, w[1].values);
        }
        for e in &pool.entries {
            assert!(inst.is_feasible(&e.values));
        }
        assert_eq!(pool.entries[0].objective, traj.final_objective().unwrap());
    }

    #[test]
    fn budget_exhaustion_is_not_an_error() {
        let inst = generate_covering(9, 30, 12);
        let (traj, _) = solve(&inst, &BinaryFixings::new(), &cfg(1)).unwrap();
        assert_eq!(traj.terminal_step, 1);
        assert!(!traj.proved_optimal);
    }

    #[test]
    fn zero_step_limit_is_invalid() {
        let inst = generate_covering(9, 5, 2);
        assert!(matches!(
            solve(&inst, &BinaryFixings::new(), &cfg(0)),
            Err(SolverError::InvalidConfig(_))
        ));
    }

    #[test]
    fn general_integers() {
        // max 3x + 2y  s.t. 2x + 2y <= 9, x <= 3.5 (x, y integer >= 0): x=3, y=1 -> -11
        use crate::instance::{ConstraintDef, VarDef};
        let inst = MilpInstance::new(
            "int",
            vec![
                VarDef::integer("x", 0.0, 10.0, -3.0),
                VarDef::integer("y", 0.0, 10.0, -2.0),
            ],
            vec![
                ConstraintDef::new("a", vec![(0, 2.0), (1, 2.0)], 9.0),
                ConstraintDef::new("b", vec![(0, 1.0)], 3.5),
            ],
        )
        .unwrap();
        let (traj, _) = solve(&inst, &BinaryFixings::new(), &cfg(1000)).unwrap();
        assert!(traj.proved_optimal);
        assert_eq!(traj.final_objective(), Some(-11.0));
    }
}
