//! Fractional diving from an LP point.

use std::collections::BTreeMap;

use crate::instance::{Assignment, MilpInstance, FEAS_TOL};
use crate::lp::solve_lp_with_bounds;

/// Rounds toward a feasible integral point by repeatedly fixing the least
/// fractional integer variable and re-solving the relaxation.
///
/// The preferred rounding direction follows the objective sign (down when
/// `c_j > 0`, up when `c_j < 0`, nearest when `c_j = 0`); if the relaxation
/// becomes infeasible the opposite direction is tried once before giving up.
/// Returns `None` when no feasible point is reached.
pub fn dive_heuristic(
    instance: &MilpInstance,
    lp_values: &[f64],
    fixings: &BTreeMap<usize, f64>,
) -> Option<Assignment> {
    let mut bounds: Vec<(f64, f64)> = instance.vars().iter().map(|v| (v.lb, v.ub)).collect();
    for (&j, &v) in fixings {
        if j < bounds.len() {
            bounds[j] = (v, v);
        }
    }
    dive_with_bounds(instance, &bounds, lp_values)
}

pub(crate) fn dive_with_bounds(
    instance: &MilpInstance,
    bounds: &[(f64, f64)],
    lp_values: &[f64],
) -> Option<Assignment> {
    if lp_values.len() != instance.num_vars() {
        return None;
    }
    let mut bounds = bounds.to_vec();
    let mut x = lp_values.to_vec();
    let max_rounds = instance.num_integral() + 1;

    for _ in 0..=max_rounds {
        let pick = instance
            .vars()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind.is_integral())
            .map(|(j, _)| (j, (x[j] - x[j].round()).abs()))
            .filter(|&(_, f)| f > FEAS_TOL)
            .fold(None, |acc: Option<(usize, f64)>, (j, f)| match acc {
                Some((_, best)) if best <= f => acc,
                _ => Some((j, f)),
            });

        let Some((j, _)) = pick else {
            let values: Vec<f64> = instance
                .vars()
                .iter()
                .zip(&x)
                .map(|(v, &xj)| if v.kind.is_integral() { xj.round() } else { xj })
                .collect();
            return instance
                .is_feasible(&values)
                .then(|| Assignment::new(instance, values));
        };

        let down = x[j].floor();
        let up = x[j].ceil();
        let c = instance.vars()[j].obj;
        let prefer_down = c > 0.0 || (c == 0.0 && x[j] - down <= up - x[j]);
        let order = if prefer_down { [down, up] } else { [up, down] };

        let mut moved = false;
        for target in order {
            let (lb, ub) = bounds[j];
            if target < lb - FEAS_TOL || target > ub + FEAS_TOL {
                continue;
            }
            bounds[j] = (target, target);
            match solve_lp_with_bounds(instance, &bounds) {
                Ok(r) if r.is_optimal() => {
                    x = r.primal_values;
                    moved = true;
                    break;
                }
                _ => bounds[j] = (lb, ub),
            }
        }
        if !moved {
            return None;
        }
    }
    None
}
