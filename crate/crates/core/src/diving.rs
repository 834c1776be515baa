//! Confidence-threshold fixing, the fix / solve / fall back pipeline, and
//! threshold grid search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::bnb::{solve, BinaryFixings, IncumbentTrajectory, SolverConfig, SolverError};
use crate::eval::{mean, primal_integral, EvalConfig, EvalError};
use crate::gcnn::{GcnnError, GcnnModel};
use crate::graph::encode;
use crate::instance::MilpInstance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivingError {
    #[error("threshold {0} outside (0.5, 1]")]
    InvalidThreshold(f64),
    #[error("probability {value} at position {index} outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("empty threshold grid")]
    EmptyGrid,
    #[error(transparent)]
    Model(#[from] GcnnError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Default grid: 0.55 to 0.95 in steps of 0.05, then 0.99 and 1.0.
pub fn default_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (11..=19).map(|k| (k * 5) as f64 / 100.0).collect();
    grid.extend([0.99, 1.0]);
    grid
}

/// Fix to 1 when `p >= one`, to 0 when `p <= 1 - zero`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Symmetric(f64),
    Asymmetric { one: f64, zero: f64 },
}

impl ThresholdRule {
    fn cuts(self) -> (f64, f64) {
        match self {
            ThresholdRule::Symmetric(t) => (t, t),
            ThresholdRule::Asymmetric { one, zero } => (one, zero),
        }
    }

    pub fn validate(self) -> Result<(), DivingError> {
        let (one, zero) = self.cuts();
        for t in [one, zero] {
            if !(t > 0.5 && t <= 1.0) {
                return Err(DivingError::InvalidThreshold(t));
            }
        }
        Ok(())
    }

    /// The symmetric threshold, or the cut for fixing to one.
    pub fn threshold(self) -> f64 {
        self.cuts().0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialAssignment {
    /// Position in the probability vector to fixed value.
    pub fixings: BTreeMap<usize, bool>,
    pub threshold: f64,
    /// `|fixings| / probs.len()`, 0 for an empty vector.
    pub coverage: f64,
    pub confidences: Vec<f64>,
}

impl PartialAssignment {
    /// Translates positions among the binary variables into instance
    /// variable indices.
    pub fn to_var_fixings(&self, binary_indices: &[usize]) -> BinaryFixings {
        self.fixings
            .iter()
            .map(|(&k, &v)| (binary_indices[k], v))
            .collect()
    }
}

pub fn fix_by_threshold(probs: &[f64], t: f64) -> Result<PartialAssignment, DivingError> {
    fix_with_rule(probs, ThresholdRule::Symmetric(t))
}

pub fn fix_with_rule(probs: &[f64], rule: ThresholdRule) -> Result<PartialAssignment, DivingError> {
    rule.validate()?;
    let (one, zero) = rule.cuts();
    let mut fixings = BTreeMap::new();
    for (index, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(DivingError::InvalidProbability { index, value: p });
        }
        if p >= one {
            fixings.insert(index, true);
        } else if p <= 1.0 - zero {
            fixings.insert(index, false);
        }
    }
    let coverage = if probs.is_empty() {
        0.0
    } else {
        fixings.len() as f64 / probs.len() as f64
    };
    Ok(PartialAssignment {
        fixings,
        threshold: one,
        coverage,
        confidences: probs.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiveOutcome {
    /// The solver accepted the fixed subproblem.
    pub fixed_feasible: bool,
    /// The fixed subproblem was infeasible and the unfixed problem was
    /// solved instead.
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiveResult {
    /// Trajectory of the run that produced the answer: the fixed run, or the
    /// fallback run alone.
    pub trajectory: IncumbentTrajectory,
    pub outcome: DiveOutcome,
    pub partial: PartialAssignment,
}

/// Predicts, fixes at threshold `t`, solves, and falls back to the unfixed
/// problem with the same budget when the fixed one is infeasible.
pub fn dive_and_solve(
    instance: &MilpInstance,
    model: &GcnnModel,
    t: f64,
    config: &SolverConfig,
) -> Result<DiveResult, DivingError> {
    ThresholdRule::Symmetric(t).validate()?;
    let probs = model.forward(&encode(instance))?;
    dive_and_solve_with_probs(instance, &probs, ThresholdRule::Symmetric(t), config)
}

/// As [`dive_and_solve`] with precomputed probabilities over the binary
/// variables of `instance`.
pub fn dive_and_solve_with_probs(
    instance: &MilpInstance,
    probs: &[f64],
    rule: ThresholdRule,
    config: &SolverConfig,
) -> Result<DiveResult, DivingError> {
    let binary = instance.binary_indices();
    if probs.len() != binary.len() {
        return Err(GcnnError::ShapeMismatch(format!(
            "{} probabilities for {} binary variables",
            probs.len(),
            binary.len()
        ))
        .into());
    }
    let partial = fix_with_rule(probs, rule)?;
    let fixings = partial.to_var_fixings(&binary);
    match solve(instance, &fixings, config) {
        Ok((trajectory, _)) => Ok(DiveResult {
            trajectory,
            outcome: DiveOutcome {
                fixed_feasible: true,
                fell_back: false,
            },
            partial,
        }),
        Err(SolverError::InfeasibleSubproblem) => {
            let (trajectory, _) = solve(instance, &BTreeMap::new(), config)?;
            Ok(DiveResult {
                trajectory,
                outcome: DiveOutcome {
                    fixed_feasible: false,
                    fell_back: true,
                },
                partial,
            })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub t: f64,
    pub coverage: f64,
    pub feasibility_rate: f64,
    pub mean_primal_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// Sorted by `t`.
    pub rows: Vec<ThresholdRow>,
    /// Minimum mean primal integral; ties go to the larger threshold.
    pub best_t: f64,
}

impl ThresholdReport {
    pub fn best_row(&self) -> &ThresholdRow {
        self.rows
            .iter()
            .find(|r| r.t == self.best_t)
            .expect("best_t comes from the rows")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,coverage,feasibility_rate,mean_primal_integral\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.t, r.coverage, r.feasibility_rate, r.mean_primal_integral
            );
        }
        let _ = writeln!(out, "BEST t={}", self.best_t);
        out
    }
}

/// Per-instance model probabilities, computed once and shared across the
/// grid.
pub fn predict_all(
    instances: &[MilpInstance],
    model: &GcnnModel,
) -> Result<Vec<Vec<f64>>, DivingError> {
    instances
        .par_iter()
        .map(|inst| Ok(model.forward(&encode(inst))?))
        .collect()
}

/// Scores every threshold of `grid` on every instance. The reference for
/// each instance is shared by all thresholds (see
/// [`EvalConfig::for_instance`]).
pub fn grid_search(
    instances: &[MilpInstance],
    model: &GcnnModel,
    grid: &[f64],
    config: &SolverConfig,
) -> Result<ThresholdReport, DivingError> {
    let probs = predict_all(instances, model)?;
    grid_search_with_probs(instances, &probs, grid, config)
}

pub fn grid_search_with_probs(
    instances: &[MilpInstance],
    probs: &[Vec<f64>],
    grid: &[f64],
    config: &SolverConfig,
) -> Result<ThresholdReport, DivingError> {
    if grid.is_empty() {
        return Err(DivingError::EmptyGrid);
    }
    for &t in grid {
        ThresholdRule::Symmetric(t).validate()?;
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..instances.len()).map(move |i| (g, i)))
        .collect();
    let results: Vec<DiveResult> = cells
        .par_iter()
        .map(|&(g, i)| {
            dive_and_solve_with_probs(
                &instances[i],
                &probs[i],
                ThresholdRule::Symmetric(grid[g]),
                config,
            )
        })
        .collect::<Result<_, _>>()?;

    let n = instances.len();
    let eval_configs: Vec<EvalConfig> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let observed: Vec<f64> = (0..grid.len())
                .filter_map(|g| results[g * n + i].trajectory.final_objective())
                .collect();
            EvalConfig::for_instance(inst, config.step_limit, &observed)
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for (g, &t) in grid.iter().enumerate() {
        let cell = &results[g * n..(g + 1) * n];
        let mut pis = Vec::with_capacity(n);
        for (r, cfg) in cell.iter().zip(&eval_configs) {
            pis.push(primal_integral(&r.trajectory, cfg)?);
        }
        let coverage: Vec<f64> = cell.iter().map(|r| r.partial.coverage).collect();
        let feasible = cell.iter().filter(|r| !r.outcome.fell_back).count();
        rows.push(ThresholdRow {
            t,
            coverage: mean(&coverage),
            feasibility_rate: if n == 0 { 0.0 } else { feasible as f64 / n as f64 },
            mean_primal_integral: mean(&pis),
        });
    }
    let best_t = rows
        .iter()
        .fold(None::<&ThresholdRow>, |best, r| match best {
            Some(b) if b.mean_primal_integral < r.mean_primal_integral => Some(b),
            _ => Some(r),
        })
        .map(|r| r.t)
        .expect("grid is nonempty");
    Ok(ThresholdReport { rows, best_t })
}
