//! Weighted binary cross-entropy over pooled solutions.
//!
//! For graph `i` with targets `t` and per-node weights `w_tj`, the summed
//! term is `S_i = sum_t sum_j w_tj * -log p~(y_tj)` with `p~` the clamped
//! probability of the observed bit. Mini-batch mode averages `S_i / N_i`
//! over graphs; full-batch mode divides `sum_i S_i` by `sum_i N_i`, where
//! `N_i` is the number of binary variables of graph `i`.

use std::fmt;
use std::str::FromStr;

use super::{backward::backward_into, forward_cached, sigmoid, GcnnError, GcnnModel, GcnnParams};
use crate::bnb::SolutionPool;
use crate::graph::BipartiteGraph;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// logarithm; the gradient is zero where the clamp is active.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    #[default]
    Minibatch,
    Fullbatch,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Minibatch => "minibatch",
            LossMode::Fullbatch => "fullbatch",
        })
    }
}

impl FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minibatch" => Ok(LossMode::Minibatch),
            "fullbatch" => Ok(LossMode::Fullbatch),
            other => Err(format!(
                "unknown loss mode `{other}` (expected minibatch|fullbatch)"
            )),
        }
    }
}

/// One labelled solution restricted to the binary variables of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    /// 0/1 label per binary variable, in variable order.
    pub values: Vec<f64>,
    /// Non-negative weight per binary variable.
    pub weights: Vec<f64>,
}

impl Target {
    /// Same weight on every node.
    pub fn uniform(values: Vec<f64>, weight: f64) -> Self {
        let weights = vec![weight; values.len()];
        Target { values, weights }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub name: String,
    pub graph: BipartiteGraph,
    pub targets: Vec<Target>,
}

impl TrainingExample {
    /// Labels from every pooled solution, weighted by `scheme`.
    pub fn from_pool(graph: BipartiteGraph, pool: &SolutionPool, scheme: WeightScheme) -> Self {
        let binary = graph.binary_indices();
        let weights = compute_solution_weights(pool, scheme);
        let targets = pool
            .entries
            .iter()
            .zip(weights)
            .map(|(sol, w)| {
                Target::uniform(
                    binary.iter().map(|&j| sol.values[j].round()).collect(),
                    w,
                )
            })
            .collect();
        TrainingExample {
            name: pool.instance_name.clone(),
            graph,
            targets,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingBatch<'a> {
    pub examples: Vec<&'a TrainingExample>,
}

impl<'a> TrainingBatch<'a> {
    pub fn new(examples: impl IntoIterator<Item = &'a TrainingExample>) -> Self {
        TrainingBatch {
            examples: examples.into_iter().collect(),
        }
    }

    /// Number of graphs.
    pub fn num_graphs(&self) -> usize {
        self.examples.len()
    }

    /// Total binary variable count over all graphs.
    pub fn num_nodes(&self) -> usize {
        self.examples.iter().map(|e| e.graph.num_binary()).sum()
    }

    /// Checks label shapes, `{0, 1}` labels and non-negative finite weights.
    pub fn validate(&self) -> Result<(), GcnnError> {
        if self.examples.is_empty() {
            return Err(GcnnError::InvalidBatch("empty batch".into()));
        }
        for ex in &self.examples {
            let nb = ex.graph.num_binary();
            for (t, target) in ex.targets.iter().enumerate() {
                let at = || format!("{} target {t}", ex.name);
                if target.values.len() != nb || target.weights.len() != nb {
                    return Err(GcnnError::InvalidBatch(format!(
                        "{}: expected {nb} labels and weights, got {} and {}",
                        at(),
                        target.values.len(),
                        target.weights.len()
                    )));
                }
                if let Some(v) = target.values.iter().find(|&&v| v != 0.0 && v != 1.0) {
                    return Err(GcnnError::InvalidBatch(format!(
                        "{}: label {v} is not 0 or 1",
                        at()
                    )));
                }
                if let Some(w) = target
                    .weights
                    .iter()
                    .find(|&&w| !w.is_finite() || w < 0.0)
                {
                    return Err(GcnnError::InvalidBatch(format!(
                        "{}: weight {w} is negative or not finite",
                        at()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    /// `1/K` for each of the `K` pooled solutions.
    Uniform,
    /// Softmax of `-s_k / temperature`, where `s_k` is the objective
    /// min-max normalised over the pool (0 = best).
    Softmax { temperature: f64 },
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Softmax { temperature: 1.0 }
    }
}

/// Per-solution weights summing to one; better objectives weigh more.
pub fn compute_solution_weights(pool: &SolutionPool, scheme: WeightScheme) -> Vec<f64> {
    let k = pool.entries.len();
    if k == 0 {
        return Vec::new();
    }
    match scheme {
        WeightScheme::Uniform => vec![1.0 / k as f64; k],
        WeightScheme::Softmax { temperature } => {
            let (lo, hi) = pool
                .entries
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                    (lo.min(e.objective), hi.max(e.objective))
                });
            let span = hi - lo;
            let raw: Vec<f64> = pool
                .entries
                .iter()
                .map(|e| {
                    let s = if span > 0.0 {
                        (e.objective - lo) / span
                    } else {
                        0.0
                    };
                    (-s / temperature).exp()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        }
    }
}

/// Loss value and parameter gradient.
pub fn loss(
    model: &GcnnModel,
    batch: &TrainingBatch<'_>,
    mode: LossMode,
) -> Result<(f64, GcnnParams), GcnnError> {
    batch.validate()?;
    for ex in &batch.examples {
        model.check_graph(&ex.graph)?;
    }
    let n_graphs = batch.num_graphs() as f64;
    let n_nodes = batch.num_nodes() as f64;

    let mut total = 0.0;
    let mut grad = model.params.zeros_like();
    for ex in &batch.examples {
        let nb = ex.graph.num_binary();
        if nb == 0 {
            continue;
        }
        let coef = match mode {
            LossMode::Minibatch => 1.0 / (n_graphs * nb as f64),
            LossMode::Fullbatch => 1.0 / n_nodes,
        };
        let cache = forward_cached(&model.params, &ex.graph);
        let probs: Vec<f64> = cache.logits.iter().map(|&z| sigmoid(z)).collect();
        let mut sum = 0.0;
        let mut d_logits = vec![0.0; nb];
        for target in &ex.targets {
            for k in 0..nb {
                let w = target.weights[k];
                if w == 0.0 {
                    continue;
                }
                let p = probs[k];
                let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                let y = target.values[k];
                let observed = if y == 1.0 { pc } else { 1.0 - pc };
                sum -= w * observed.ln();
                if pc == p {
                    d_logits[k] += w * (p - y);
                }
            }
        }
        total += coef * sum;
        for d in &mut d_logits {
            *d *= coef;
        }
        backward_into(&model.params, &ex.graph, &cache, &d_logits, &mut grad);
    }
    Ok((total, grad))
}

pub fn loss_minibatch(
    model: &GcnnModel,
    batch: &TrainingBatch<'_>,
) -> Result<(f64, GcnnParams), GcnnError> {
    loss(model, batch, LossMode::Minibatch)
}

pub fn loss_fullbatch(
    model: &GcnnModel,
    batch: &TrainingBatch<'_>,
) -> Result<(f64, GcnnParams), GcnnError> {
    loss(model, batch, LossMode::Fullbatch)
}
