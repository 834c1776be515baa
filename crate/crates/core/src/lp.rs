//! Dense two-phase primal simplex for LP relaxations.
//!
//! Variables are mapped onto nonnegative columns (shifted by a finite lower
//! bound, mirrored from a finite upper bound, or split when free); fixed
//! variables are substituted out. Finite upper bounds on shifted columns
//! become explicit rows. Pricing is Dantzig's rule until 1000 degenerate
//! pivots have been seen, then Bland's rule for the rest of the solve.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::instance::MilpInstance;

pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Column entries at or below this are treated as zero by the ratio test.
const MIN_PIVOT: f64 = 1e-9;
const RATIO_EPS: f64 = 1e-12;
const BLAND_AFTER_DEGENERATE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of an LP solve. `primal_values` is empty unless the status is
/// optimal; `objective` is `+inf` for infeasible and `-inf` for unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    pub primal_values: Vec<f64>,
}

impl LpResult {
    fn infeasible() -> Self {
        LpResult {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            primal_values: Vec::new(),
        }
    }

    fn unbounded() -> Self {
        LpResult {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            primal_values: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("simplex did not converge within {pivots} pivots")]
    NumericalBreakdown { pivots: usize },
    #[error("fixing x{var} = {value} lies outside the variable bounds")]
    FixingOutOfBounds { var: usize, value: f64 },
    #[error("expected {expected} bound pairs, got {got}")]
    BoundsLength { expected: usize, got: usize },
}

/// LP relaxation of `instance` with each `(var, value)` fixing imposed as
/// `lb = ub = value`.
pub fn solve_lp(
    instance: &MilpInstance,
    fixings: &BTreeMap<usize, f64>,
) -> Result<LpResult, LpError> {
    let mut bounds: Vec<(f64, f64)> = instance.vars().iter().map(|v| (v.lb, v.ub)).collect();
    for (&var, &value) in fixings {
        let (lb, ub) = bounds
            .get(var)
            .copied()
            .ok_or(LpError::FixingOutOfBounds { var, value })?;
        if !(value >= lb - 1e-9 && value <= ub + 1e-9) {
            return Err(LpError::FixingOutOfBounds { var, value });
        }
        bounds[var] = (value, value);
    }
    solve_lp_with_bounds(instance, &bounds)
}

/// LP relaxation with the variable bounds replaced by `bounds`.
pub fn solve_lp_with_bounds(
    instance: &MilpInstance,
    bounds: &[(f64, f64)],
) -> Result<LpResult, LpError> {
    let n = instance.num_vars();
    if bounds.len() != n {
        return Err(LpError::BoundsLength {
            expected: n,
            got: bounds.len(),
        });
    }
    if bounds.iter().any(|&(l, u)| l > u) {
        return Ok(LpResult::infeasible());
    }

    // Column mapping.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(l, u) in bounds {
        let map = if l == u {
            ColMap::Fixed(l)
        } else if l.is_finite() {
            let col = ncols;
            ncols += 1;
            if u.is_finite() {
                bound_rows.push((col, u - l));
            }
            ColMap::Shift { lb: l, col }
        } else if u.is_finite() {
            ncols += 1;
            ColMap::Mirror { ub: u, col: ncols - 1 }
        } else {
            ncols += 2;
            ColMap::Free { pos: ncols - 2 }
        };
        maps.push(map);
    }

    let mut obj_const = 0.0;
    let mut cost = vec![0.0; ncols];
    for (v, map) in instance.vars().iter().zip(&maps) {
        map.scatter(v.obj, &mut cost, &mut obj_const);
    }

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in instance.constraints() {
        let mut row = vec![0.0; ncols];
        let mut shift = 0.0;
        for &(j, a) in &c.terms {
            maps[j].scatter(a, &mut row, &mut shift);
        }
        let rhs = c.rhs - shift;
        if row.iter().all(|&a| a == 0.0) {
            if rhs < -FEASIBILITY_TOL * (1.0 + c.rhs.abs()) {
                return Ok(LpResult::infeasible());
            }
            continue;
        }
        rows.push((row, rhs));
    }
    for (col, width) in bound_rows {
        let mut row = vec![0.0; ncols];
        row[col] = 1.0;
        rows.push((row, width));
    }

    let y = match Tableau::solve(&cost, &rows)? {
        Solved::Optimal(y) => y,
        Solved::Infeasible => return Ok(LpResult::infeasible()),
        Solved::Unbounded => return Ok(LpResult::unbounded()),
    };

    let primal_values: Vec<f64> = maps
        .iter()
        .zip(bounds)
        .map(|(map, &(l, u))| map.value(&y).clamp(l, u))
        .collect();
    let objective = instance.objective(&primal_values);
    Ok(LpResult {
        status: LpStatus::Optimal,
        objective,
        primal_values,
    })
}

#[derive(Debug, Clone, Copy)]
enum ColMap {
    Fixed(f64),
    /// `x = lb + y`
    Shift { lb: f64, col: usize },
    /// `x = ub - y`
    Mirror { ub: f64, col: usize },
    /// `x = y[pos] - y[pos + 1]`
    Free { pos: usize },
}

impl ColMap {
    fn scatter(&self, a: f64, row: &mut [f64], constant: &mut f64) {
        match *self {
            ColMap::Fixed(v) => *constant += a * v,
            ColMap::Shift { lb, col } => {
                *constant += a * lb;
                row[col] += a;
            }
            ColMap::Mirror { ub, col } => {
                *constant += a * ub;
                row[col] -= a;
            }
            ColMap::Free { pos } => {
                row[pos] += a;
                row[pos + 1] -= a;
            }
        }
    }

    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            ColMap::Fixed(v) => v,
            ColMap::Shift { lb, col } => lb + y[col],
            ColMap::Mirror { ub, col } => ub - y[col],
            ColMap::Free { pos } => y[pos] - y[pos + 1],
        }
    }
}

enum Solved {
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

enum Phase {
    Optimal,
    Unbounded,
}

/// Dense tableau for `min c^T y  s.t.  A y <= b, y >= 0`.
struct Tableau {
    /// Row-major `m x width`; the last column is the right-hand side.
    t: Vec<f64>,
    /// Reduced costs; the last entry is minus the objective value.
    z: Vec<f64>,
    basis: Vec<usize>,
    m: usize,
    width: usize,
    /// Columns `< enterable` may enter the basis.
    enterable: usize,
    bland: bool,
    degenerate: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn solve(cost: &[f64], rows: &[(Vec<f64>, f64)]) -> Result<Solved, LpError> {
        let ny = cost.len();
        let m = rows.len();
        let n_art = rows.iter().filter(|(_, b)| *b < 0.0).count();
        let width = ny + m + n_art + 1;
        let rhs_col = width - 1;
        let mut t = vec![0.0; m * width];
        let mut basis = Vec::with_capacity(m);
        let mut next_art = ny + m;
        for (i, (a, b)) in rows.iter().enumerate() {
            let r = &mut t[i * width..(i + 1) * width];
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            for (dst, &src) in r.iter_mut().zip(a) {
                *dst = sign * src;
            }
            r[ny + i] = sign;
            r[rhs_col] = sign * b;
            if *b < 0.0 {
                r[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(ny + i);
            }
        }

        let mut tab = Tableau {
            t,
            z: vec![0.0; width],
            basis,
            m,
            width,
            enterable: ny + m + n_art,
            bland: false,
            degenerate: 0,
            pivots: 0,
            max_pivots: 50 * (m + width) + 1000,
        };

        if n_art > 0 {
            // Phase 1: minimize the sum of artificials.
            let mut phase1 = vec![0.0; ny + m + n_art];
            for c in phase1.iter_mut().skip(ny + m) {
                *c = 1.0;
            }
            tab.price(&phase1);
            tab.enterable = ny + m;
            // Artificials never re-enter, but they start basic so pricing
            // over the structural and slack columns is enough.
            tab.run()?;
            let scale = rows.iter().fold(1.0f64, |s, (_, b)| s.max(b.abs()));
            if -tab.z[rhs_col] > FEASIBILITY_TOL * scale {
                return Ok(Solved::Infeasible);
            }
            tab.drive_out_artificials(ny + m);
        }

        let mut phase2 = cost.to_vec();
        phase2.resize(ny + m + n_art, 0.0);
        tab.price(&phase2);
        tab.enterable = ny + m;
        match tab.run()? {
            Phase::Unbounded => Ok(Solved::Unbounded),
            Phase::Optimal => {
                let mut y = vec![0.0; ny];
                for (i, &b) in tab.basis.iter().enumerate() {
                    if b < ny {
                        y[b] = tab.t[i * width + rhs_col].max(0.0);
                    }
                }
                Ok(Solved::Optimal(y))
            }
        }
    }

    /// Recomputes reduced costs for `cost` under the current basis.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        self.z.iter_mut().for_each(|v| *v = 0.0);
        self.z[..cost.len()].copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * w..(i + 1) * w];
            for (zj, &tij) in self.z.iter_mut().zip(row) {
                *zj -= cb * tij;
            }
        }
    }

    fn run(&mut self) -> Result<Phase, LpError> {
        let w = self.width;
        let rhs_col = w - 1;
        loop {
            let Some(e) = self.entering() else {
                return Ok(Phase::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i * w + e];
                if a <= MIN_PIVOT {
                    continue;
                }
                let ratio = self.t[i * w + rhs_col].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= RATIO_EPS * (1.0 + best.abs());
                        let better = if tie {
                            if self.bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                let ar = self.t[r * w + e];
                                a > ar || (a == ar && self.basis[i] < self.basis[r])
                            }
                        } else {
                            ratio < best
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Ok(Phase::Unbounded);
            };
            if ratio <= RATIO_EPS {
                self.degenerate += 1;
                if self.degenerate >= BLAND_AFTER_DEGENERATE {
                    self.bland = true;
                }
            }
            self.pivot(r, e);
            self.pivots += 1;
            if self.pivots > self.max_pivots {
                return Err(LpError::NumericalBreakdown {
                    pivots: self.pivots,
                });
            }
        }
    }

    fn entering(&self) -> Option<usize> {
        let candidates = self.z[..self.enterable]
            .iter()
            .enumerate()
            .filter(|(_, &d)| d < -OPTIMALITY_TOL);
        if self.bland {
            candidates.map(|(j, _)| j).next()
        } else {
            candidates
                .fold(None, |acc: Option<(usize, f64)>, (j, &d)| match acc {
                    Some((_, best)) if best <= d => acc,
                    _ => Some((j, d)),
                })
                .map(|(j, _)| j)
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.t[r * w + e];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + e];
            if f == 0.0 {
                continue;
            }
            for (dst, &src) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                *dst -= f * src;
            }
            self.t[i * w + e] = 0.0;
        }
        let f = self.z[e];
        if f != 0.0 {
            for (dst, &src) in self.z.iter_mut().zip(&pivot_row) {
                *dst -= f * src;
            }
            self.z[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Pivots zero-level artificials out of the basis where possible. Rows
    /// with no usable pivot are redundant and stay inert.
    fn drive_out_artificials(&mut self, first_art: usize) {
        let w = self.width;
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let row = &self.t[r * w..r * w + first_art];
            let best = row
                .iter()
                .enumerate()
                .filter(|(_, a)| a.abs() > 1e-9)
                .fold(None, |acc: Option<(usize, f64)>, (j, a)| match acc {
                    Some((_, b)) if b >= a.abs() => acc,
                    _ => Some((j, a.abs())),
                });
            if let Some((e, _)) = best {
                self.pivot(r, e);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ConstraintDef, MilpInstance, VarDef};

    fn two_var() -> MilpInstance {
        MilpInstance::new(
            "lp",
            vec![
                VarDef::continuous("x1", 0.0, 1.0, -1.0),
                VarDef::continuous("x2", 0.0, 1.0, -1.0),
            ],
            vec![ConstraintDef::new("r", vec![(0, 1.0), (1, 1.0)], 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_row() {
        let r = solve_lp(&two_var(), &BTreeMap::new()).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_vertex() {
        let fix = BTreeMap::from([(0, 1.0)]);
        let r = solve_lp(&two_var(), &fix).unwrap();
        assert!((r.objective + 1.0).abs() < 1e-12);
        assert_eq!(r.primal_values, vec![1.0, 0.0]);
    }

    #[test]
    fn fixing_out_of_bounds() {
        let fix = BTreeMap::from([(1, 2.0)]);
        assert!(matches!(
            solve_lp(&two_var(), &fix),
            Err(LpError::FixingOutOfBounds { var: 1, .. })
        ));
    }

    #[test]
    fn infeasible_rows() {
        // x >= 2 with x in [0, 1].
        let inst = MilpInstance::new(
            "inf",
            vec![VarDef::continuous("x", 0.0, 1.0, 1.0)],
            vec![ConstraintDef::new("r", vec![(0, -1.0)], -2.0)],
        )
        .unwrap();
        assert_eq!(
            solve_lp(&inst, &BTreeMap::new()).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn fully_fixed_infeasible() {
        let fix = BTreeMap::from([(0, 1.0), (1, 1.0)]);
        assert_eq!(
            solve_lp(&two_var(), &fix).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn unbounded_free_variable() {
        let inst = MilpInstance::new(
            "unb",
            vec![
                VarDef::continuous("x", f64::NEG_INFINITY, f64::INFINITY, 1.0),
                VarDef::continuous("y", 0.0, 1.0, 0.0),
            ],
            vec![ConstraintDef::new("r", vec![(0, 1.0), (1, 1.0)], 3.0)],
        )
        .unwrap();
        assert_eq!(
            solve_lp(&inst, &BTreeMap::new()).unwrap().status,
            LpStatus::Unbounded
        );
    }

    #[test]
    fn mirrored_and_free_columns() {
        // min x - y  s.t. x + y >= 1, y - x <= 10, x <= 5, y <= 2 (both unbounded
        // below). y = 2 and x = -1 from the cover row, so the optimum is -3.
        let inst = MilpInstance::new(
            "mix",
            vec![
                VarDef::continuous("x", f64::NEG_INFINITY, 5.0, 1.0),
                VarDef::continuous("y", f64::NEG_INFINITY, 2.0, -1.0),
            ],
            vec![
                ConstraintDef::new("a", vec![(0, -1.0), (1, -1.0)], -1.0),
                ConstraintDef::new("b", vec![(0, -1.0), (1, 1.0)], 10.0),
            ],
        )
        .unwrap();
        let r = solve_lp(&inst, &BTreeMap::new()).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 3.0).abs() < 1e-9, "{}", r.objective);
        assert!(inst.max_violation(&r.primal_values) < 1e-7);
    }

    #[test]
    fn equality_rows_via_artificials() {
        // x + y = 1, min 2x + y  ->  x=0, y=1
        let inst = MilpInstance::new(
            "eq",
            vec![
                VarDef::continuous("x", 0.0, f64::INFINITY, 2.0),
                VarDef::continuous("y", 0.0, f64::INFINITY, 1.0),
            ],
            vec![
                ConstraintDef::new("le", vec![(0, 1.0), (1, 1.0)], 1.0),
                ConstraintDef::new("ge", vec![(0, -1.0), (1, -1.0)], -1.0),
            ],
        )
        .unwrap();
        let r = solve_lp(&inst, &BTreeMap::new()).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-12);
        assert!((r.primal_values[1] - 1.0).abs() < 1e-12);
    }
}
