//! Primal integral scoring and method comparison.

mod plot;

pub use plot::plot_primal_bound;

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::bnb::IncumbentTrajectory;
use crate::instance::{brute_force_solve, MilpInstance, ORACLE_MAX_VARS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("incumbent at step {step} lies beyond the horizon {horizon}")]
    EventBeyondHorizon { step: u64, horizon: u64 },
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error("method `{method}` failed on `{instance}`: {message}")]
    MethodFailed {
        instance: String,
        method: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Proven optimum from exhaustive enumeration.
    Optimal,
    /// Best objective seen across all compared runs.
    BestKnown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Horizon `T` in solver steps.
    pub step_limit: u64,
    pub reference_objective: f64,
    pub reference_kind: ReferenceKind,
    /// Primal bound charged before the first incumbent.
    pub no_incumbent_value: f64,
}

impl EvalConfig {
    /// Reference from the oracle when the instance is small and all-binary,
    /// otherwise the best of `observed`. The no-incumbent bound is the worst
    /// objective over the variable box.
    pub fn for_instance(instance: &MilpInstance, step_limit: u64, observed: &[f64]) -> Self {
        let best_seen = observed.iter().copied().fold(f64::INFINITY, f64::min);
        let worst_seen = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let oracle = (instance.all_binary() && instance.num_vars() <= ORACLE_MAX_VARS)
            .then(|| brute_force_solve(instance).ok())
            .flatten();
        let (reference_objective, reference_kind) = match oracle {
            Some(opt) => (opt.objective, ReferenceKind::Optimal),
            None => (best_seen, ReferenceKind::BestKnown),
        };
        let mut no_incumbent_value = instance.box_worst_objective();
        if !no_incumbent_value.is_finite() {
            no_incumbent_value = if worst_seen.is_finite() { worst_seen } else { 0.0 };
        }
        let reference_objective = if reference_objective.is_finite() {
            reference_objective
        } else {
            no_incumbent_value
        };
        EvalConfig {
            step_limit,
            reference_objective,
            reference_kind,
            no_incumbent_value: no_incumbent_value.max(reference_objective),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.step_limit < 1 {
            return Err(EvalError::InvalidConfig("step_limit must be at least 1".into()));
        }
        if !self.reference_objective.is_finite() || !self.no_incumbent_value.is_finite() {
            return Err(EvalError::InvalidConfig("reference values must be finite".into()));
        }
        if self.no_incumbent_value < self.reference_objective {
            return Err(EvalError::InvalidConfig(format!(
                "no_incumbent_value {} is below reference {}",
                self.no_incumbent_value, self.reference_objective
            )));
        }
        Ok(())
    }
}

/// Area between the step-function primal bound and the reference over
/// `[0, T]`. The bound holds `no_incumbent_value` until the first event and
/// then each event's objective until the next.
pub fn primal_integral(traj: &IncumbentTrajectory, cfg: &EvalConfig) -> Result<f64, EvalError> {
    cfg.validate()?;
    let horizon = cfg.step_limit;
    let mut area = 0.0;
    let mut since = 0u64;
    let mut bound = cfg.no_incumbent_value;
    for e in &traj.events {
        if e.step > horizon {
            return Err(EvalError::EventBeyondHorizon {
                step: e.step,
                horizon,
            });
        }
        area += (bound - cfg.reference_objective) * (e.step - since) as f64;
        since = e.step;
        bound = e.objective;
    }
    area += (bound - cfg.reference_objective) * (horizon - since) as f64;
    Ok(area)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub instance: String,
    pub method: String,
    pub primal_integral: f64,
    /// Always `-primal_integral`.
    pub cumulative_reward: f64,
    pub first_incumbent_step: Option<u64>,
    pub final_objective: Option<f64>,
}

impl EvalRow {
    pub fn new(
        instance: &str,
        method: &str,
        traj: &IncumbentTrajectory,
        cfg: &EvalConfig,
    ) -> Result<Self, EvalError> {
        let pi = primal_integral(traj, cfg)?;
        Ok(EvalRow {
            instance: instance.to_string(),
            method: method.to_string(),
            primal_integral: pi,
            cumulative_reward: -pi,
            first_incumbent_step: traj.first_incumbent_step(),
            final_objective: traj.final_objective(),
        })
    }
}

pub const ROWS_CSV_HEADER: &str =
    "instance,method,primal_integral,cumulative_reward,first_incumbent_step,final_objective";

pub fn rows_to_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(ROWS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let first = r.first_incumbent_step.map(|s| s.to_string()).unwrap_or_default();
        let fin = r.final_objective.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{first},{fin}",
            r.instance, r.method, r.primal_integral, r.cumulative_reward
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub mean_primal_integral: f64,
    pub mean_cumulative_reward: f64,
}

pub fn summary_to_csv(summary: &[MethodSummary]) -> String {
    let mut out = String::from("method,mean_primal_integral,mean_cumulative_reward\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{}",
            s.method, s.mean_primal_integral, s.mean_cumulative_reward
        );
    }
    out
}

type RunFn<'a> = dyn Fn(&MilpInstance) -> Result<IncumbentTrajectory, String> + Sync + 'a;

/// A labelled way of solving an instance.
pub struct Method<'a> {
    pub label: String,
    run: Box<RunFn<'a>>,
}

impl<'a> Method<'a> {
    pub fn new(
        label: impl Into<String>,
        run: impl Fn(&MilpInstance) -> Result<IncumbentTrajectory, String> + Sync + 'a,
    ) -> Self {
        Method {
            label: label.into(),
            run: Box::new(run),
        }
    }

    pub fn run(&self, instance: &MilpInstance) -> Result<IncumbentTrajectory, String> {
        (self.run)(instance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Ordered by instance, then method.
    pub rows: Vec<EvalRow>,
    /// One entry per method, in input order.
    pub summary: Vec<MethodSummary>,
    /// One config per instance.
    pub configs: Vec<EvalConfig>,
    /// `trajectories[i][m]` for instance `i` and method `m`.
    pub trajectories: Vec<Vec<IncumbentTrajectory>>,
}

/// Runs every method on every instance under the same step budget and
/// scores the trajectories against a shared per-instance reference.
///
/// Cells run on the current rayon pool; results do not depend on completion
/// order.
pub fn compare(
    instances: &[MilpInstance],
    methods: &[Method<'_>],
    step_limit: u64,
) -> Result<Comparison, EvalError> {
    let cells: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..methods.len()).map(move |m| (i, m)))
        .collect();
    let results: Vec<Result<IncumbentTrajectory, EvalError>> = cells
        .par_iter()
        .map(|&(i, m)| {
            methods[m]
                .run(&instances[i])
                .map_err(|message| EvalError::MethodFailed {
                    instance: instances[i].name().to_string(),
                    method: methods[m].label.clone(),
                    message,
                })
        })
        .collect();

    let mut trajectories: Vec<Vec<IncumbentTrajectory>> = Vec::with_capacity(instances.len());
    let mut it = results.into_iter();
    for _ in instances {
        let mut row = Vec::with_capacity(methods.len());
        for _ in methods {
            row.push(it.next().expect("one result per cell")?);
        }
        trajectories.push(row);
    }

    let configs: Vec<EvalConfig> = instances
        .par_iter()
        .zip(&trajectories)
        .map(|(inst, trajs)| {
            let observed: Vec<f64> = trajs.iter().filter_map(|t| t.final_objective()).collect();
            EvalConfig::for_instance(inst, step_limit, &observed)
        })
        .collect();

    let mut rows = Vec::with_capacity(cells.len());
    for ((inst, trajs), cfg) in instances.iter().zip(&trajectories).zip(&configs) {
        for (method, traj) in methods.iter().zip(trajs) {
            rows.push(EvalRow::new(inst.name(), &method.label, traj, cfg)?);
        }
    }

    let summary = methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let pis: Vec<f64> = rows
                .iter()
                .skip(m)
                .step_by(methods.len().max(1))
                .map(|r| r.primal_integral)
                .collect();
            let mean = mean(&pis);
            MethodSummary {
                method: method.label.clone(),
                mean_primal_integral: mean,
                mean_cumulative_reward: -mean,
            }
        })
        .collect();

    Ok(Comparison {
        rows,
        summary,
        configs,
        trajectories,
    })
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
