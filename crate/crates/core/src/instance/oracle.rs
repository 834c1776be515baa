use thiserror::Error;

use super::{Assignment, MilpInstance};

pub const ORACLE_MAX_VARS: usize = 24;

const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle supports at most {ORACLE_MAX_VARS} variables, instance has {0}")]
    OracleTooLarge(usize),
    #[error("oracle requires an all-binary instance")]
    NotAllBinary,
    #[error("no binary assignment satisfies every constraint")]
    Infeasible,
}

/// Exhaustive minimum over `{0,1}^n`.
///
/// Assignments are visited in lexicographic order (variable 0 most
/// significant) and only a strictly better objective replaces the incumbent,
/// so ties resolve to the lexicographically smallest vector.
pub fn brute_force_solve(instance: &MilpInstance) -> Result<Assignment, OracleError> {
    let n = instance.num_vars();
    if n > ORACLE_MAX_VARS {
        return Err(OracleError::OracleTooLarge(n));
    }
    if !instance.all_binary() {
        return Err(OracleError::NotAllBinary);
    }

    // Column view: for each variable, the rows it touches.
    let m = instance.num_constraints();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, c) in instance.constraints().iter().enumerate() {
        for &(j, a) in &c.terms {
            columns[j].push((i, a));
        }
    }
    let rhs: Vec<f64> = instance.constraints().iter().map(|c| c.rhs).collect();
    let obj: Vec<f64> = instance.vars().iter().map(|v| v.obj).collect();

    // Bit (n - 1 - j) of the mask holds x_j, so increasing masks are
    // lexicographically increasing vectors.
    let bit = |j: usize| 1u32 << (n - 1 - j);
    let mut activity = vec![0.0; m];
    let mut value = 0.0;
    let mut prev: u32 = 0;
    let mut best: Option<(f64, u32)> = None;
    let total: u64 = 1u64 << n;

    for mask in 0..total as u32 {
        let mut flipped = prev ^ mask;
        while flipped != 0 {
            let b = flipped.trailing_zeros() as usize;
            flipped &= flipped - 1;
            let j = n - 1 - b;
            let sign = if mask & bit(j) != 0 { 1.0 } else { -1.0 };
            value += sign * obj[j];
            for &(i, a) in &columns[j] {
                activity[i] += sign * a;
            }
        }
        prev = mask;
        if activity.iter().zip(&rhs).any(|(a, b)| *a > *b + ROW_TOL) {
            continue;
        }
        if best.is_none_or(|(b, _)| value < b - ROW_TOL) {
            best = Some((value, mask));
        }
    }

    let (_, mask) = best.ok_or(OracleError::Infeasible)?;
    let values: Vec<f64> = (0..n)
        .map(|j| if mask & bit(j) != 0 { 1.0 } else { 0.0 })
        .collect();
    Ok(Assignment::new(instance, values))
}

#[cfg(test)]
mod tests {
    use super::super::{ConstraintDef, VarDef};
    use super::*;

    fn small_knapsack() -> MilpInstance {
        MilpInstance::new(
            "k",
            vec![
                VarDef::binary("x1", -5.0),
                VarDef::binary("x2", -4.0),
                VarDef::binary("x3", -3.0),
            ],
            vec![ConstraintDef::new("c", vec![(0, 2.0), (1, 3.0), (2, 1.0)], 5.0)],
        )
        .unwrap()
    }

    #[test]
    fn worked_knapsack() {
        let sol = brute_force_solve(&small_knapsack()).unwrap();
        assert_eq!(sol.values, vec![1.0, 1.0, 0.0]);
        assert_eq!(sol.objective, -9.0);
    }

    #[test]
    fn separable_minimum_is_zero() {
        let inst = MilpInstance::new(
            "z",
            vec![VarDef::binary("a", 1.0), VarDef::binary("b", 0.0)],
            vec![],
        )
        .unwrap();
        let sol = brute_force_solve(&inst).unwrap();
        assert_eq!(sol.values, vec![0.0, 0.0]);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn empty_feasible_set() {
        let inst = MilpInstance::new(
            "inf",
            vec![VarDef::binary("x1", 1.0)],
            vec![ConstraintDef::new("c", vec![(0, 1.0)], -1.0)],
        )
        .unwrap();
        assert_eq!(brute_force_solve(&inst), Err(OracleError::Infeasible));
    }

    #[test]
    fn ties_resolve_lexicographically() {
        // x0 + x1 >= 1 with equal costs: (0,1) and (1,0) tie, (0,1) is smaller.
        let inst = MilpInstance::new(
            "tie",
            vec![VarDef::binary("a", 1.0), VarDef::binary("b", 1.0)],
            vec![ConstraintDef::new("c", vec![(0, -1.0), (1, -1.0)], -1.0)],
        )
        .unwrap();
        assert_eq!(brute_force_solve(&inst).unwrap().values, vec![0.0, 1.0]);
    }

    #[test]
    fn too_large() {
        let vars = (0..25).map(|j| VarDef::binary(format!("x{j}"), 1.0)).collect();
        let inst = MilpInstance::new("big", vars, vec![]).unwrap();
        assert_eq!(brute_force_solve(&inst), Err(OracleError::OracleTooLarge(25)));
    }

    #[test]
    fn matches_naive_enumeration() {
        use crate::instance::generate_knapsack;
        let inst = generate_knapsack(11, 9, 2);
        let sol = brute_force_solve(&inst).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << 9) {
            let x: Vec<f64> = (0..9).map(|j| ((mask >> j) & 1) as f64).collect();
            if inst.is_feasible(&x) {
                best = best.min(inst.objective(&x));
            }
        }
        assert_eq!(sol.objective, best);
    }
}
