//! Seeded instance families. All coefficients are integers in `[1, 100]` so
//! objective arithmetic in the exhaustive oracle stays exact.

use rand::seq::index::sample;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConstraintDef, MilpInstance, VarDef};

fn coef(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1..=100u32) as f64
}

/// Multi-dimensional 0/1 knapsack written as `min -v^T x  s.t.  W x <= cap`.
///
/// Each capacity is half the total weight of its dimension (at least the
/// heaviest item), so the all-ones vector is infeasible whenever `n_items > 1`
/// unless weights are degenerate.
///
/// Panics if `n_items` or `n_dims` is zero.
pub fn generate_knapsack(seed: u64, n_items: usize, n_dims: usize) -> MilpInstance {
    assert!(n_items >= 1, "knapsack needs at least one item");
    assert!(n_dims >= 1, "knapsack needs at least one dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = (0..n_items)
        .map(|j| VarDef::binary(format!("x{j}"), -coef(&mut rng)))
        .collect();
    let rows = (0..n_dims)
        .map(|d| {
            let weights: Vec<f64> = (0..n_items).map(|_| coef(&mut rng)).collect();
            let total: f64 = weights.iter().sum();
            let heaviest = weights.iter().cloned().fold(0.0, f64::max);
            let cap = (total / 2.0).floor().max(heaviest);
            ConstraintDef::new(format!("cap{d}"), weights.into_iter().enumerate().collect(), cap)
        })
        .collect();
    MilpInstance::new(format!("knapsack_s{seed}_n{n_items}_d{n_dims}"), vars, rows)
        .expect("generated knapsack is valid")
}

/// Weighted multi-cover: `min c^T x  s.t.  sum_{j in S_r} a_rj x_j >= d_r`,
/// stored as negated `<=` rows.
///
/// Variable `j` always belongs to row `j mod n_rows` so every variable is
/// covered by at least one row. Each row additionally draws a random subset of
/// the remaining variables. The demand `d_r` is between 25% and 60% of the row's
/// total coefficient mass, so the all-ones vector satisfies every row.
///
/// Panics unless `n_vars >= n_rows >= 1`.
pub fn generate_covering(seed: u64, n_vars: usize, n_rows: usize) -> MilpInstance {
    assert!(n_rows >= 1, "covering needs at least one row");
    assert!(n_vars >= n_rows, "covering needs n_vars >= n_rows");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = (0..n_vars)
        .map(|j| VarDef::binary(format!("x{j}"), coef(&mut rng)))
        .collect();

    let max_extra = (n_vars / 3).max(1);
    let rows = (0..n_rows)
        .map(|r| {
            let mut members: Vec<usize> = (r..n_vars).step_by(n_rows).collect();
            let others: Vec<usize> = (0..n_vars).filter(|j| j % n_rows != r).collect();
            let extra = rng.random_range(1..=max_extra).min(others.len());
            members.extend(sample(&mut rng, others.len(), extra).into_iter().map(|k| others[k]));
            members.sort_unstable();
            let terms: Vec<(usize, f64)> = members.iter().map(|&j| (j, coef(&mut rng))).collect();
            let mass: f64 = terms.iter().map(|&(_, a)| a).sum();
            let frac = rng.random_range(0.25..0.6);
            let demand = (mass * frac).ceil().max(1.0);
            let negated = terms.into_iter().map(|(j, a)| (j, -a)).collect();
            ConstraintDef::new(format!("cover{r}"), negated, -demand)
        })
        .collect();
    MilpInstance::new(format!("covering_s{seed}_n{n_vars}_m{n_rows}"), vars, rows)
        .expect("generated covering instance is valid")
}
