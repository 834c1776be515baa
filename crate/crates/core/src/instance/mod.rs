//! MILP instances in canonical `min c^T x  s.t.  A x <= b` form.
//!
//! Every constraint is stored as a `<=` row. `>=` rows are negated and `=`
//! rows are split into two opposite `<=` rows when an instance is parsed.

mod format;
mod generate;
mod oracle;

pub use format::{
    parse_instance, parse_solution, parse_solutions, serialize_instance, serialize_solution,
    serialize_solutions, ParseError,
};
pub use generate::{generate_covering, generate_knapsack};
pub use oracle::{brute_force_solve, OracleError, ORACLE_MAX_VARS};

use std::fmt;

use thiserror::Error;

/// Tolerance used for integrality and row feasibility of MIP solutions.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Binary => "binary",
            VarKind::Integer => "integer",
            VarKind::Continuous => "continuous",
        }
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDef {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    /// Objective coefficient.
    pub obj: f64,
}

impl VarDef {
    pub fn binary(name: impl Into<String>, obj: f64) -> Self {
        VarDef {
            name: name.into(),
            kind: VarKind::Binary,
            lb: 0.0,
            ub: 1.0,
            obj,
        }
    }

    pub fn integer(name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> Self {
        VarDef {
            name: name.into(),
            kind: VarKind::Integer,
            lb,
            ub,
            obj,
        }
    }

    pub fn continuous(name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> Self {
        VarDef {
            name: name.into(),
            kind: VarKind::Continuous,
            lb,
            ub,
            obj,
        }
    }
}

/// A canonical `sum(terms) <= rhs` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDef {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl ConstraintDef {
    pub fn new(name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        ConstraintDef {
            name: name.into(),
            terms,
            rhs,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance has no variables")]
    NoVariables,
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: String, message: impl Into<String>) -> InstanceError {
    InstanceError::Invalid {
        path,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    name: String,
    vars: Vec<VarDef>,
    constraints: Vec<ConstraintDef>,
}

impl MilpInstance {
    /// Builds a validated instance. Zero coefficients are dropped from rows.
    pub fn new(
        name: impl Into<String>,
        vars: Vec<VarDef>,
        mut constraints: Vec<ConstraintDef>,
    ) -> Result<Self, InstanceError> {
        if vars.is_empty() {
            return Err(InstanceError::NoVariables);
        }
        for (j, v) in vars.iter().enumerate() {
            let path = format!("vars[{j}]({})", v.name);
            if v.lb.is_nan() || v.ub.is_nan() || !v.obj.is_finite() {
                return Err(invalid(path, "bounds and objective must be numbers"));
            }
            if v.lb > v.ub {
                return Err(invalid(path, format!("lb {} > ub {}", v.lb, v.ub)));
            }
            if v.kind == VarKind::Binary && (v.lb != 0.0 || v.ub != 1.0) {
                return Err(invalid(path, "binary variables must have bounds [0, 1]"));
            }
        }
        let n = vars.len();
        let mut seen = vec![usize::MAX; n];
        for (i, c) in constraints.iter_mut().enumerate() {
            let path = format!("constraints[{i}]({})", c.name);
            if !c.rhs.is_finite() {
                return Err(invalid(path, "rhs must be finite"));
            }
            for (k, &(j, a)) in c.terms.iter().enumerate() {
                let tpath = format!("{path}.terms[{k}]");
                if j >= n {
                    return Err(invalid(
                        tpath,
                        format!("variable index {j} out of range for {n} variables"),
                    ));
                }
                if !a.is_finite() {
                    return Err(invalid(tpath, "coefficient must be finite"));
                }
                if seen[j] == i {
                    return Err(invalid(tpath, format!("duplicate variable index {j}")));
                }
                seen[j] = i;
            }
            c.terms.retain(|&(_, a)| a != 0.0);
        }
        Ok(MilpInstance {
            name: name.into(),
            vars,
            constraints,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn constraints(&self) -> &[ConstraintDef] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Number of integer or binary variables.
    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn all_binary(&self) -> bool {
        self.vars.iter().all(|v| v.kind == VarKind::Binary)
    }

    pub fn nnz(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.obj * x).sum()
    }

    /// Largest bound, row or integrality violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind.is_integral() {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.activity(values) - c.rhs);
        }
        worst
    }

    pub fn is_feasible(&self, values: &[f64]) -> bool {
        values.len() == self.vars.len() && self.max_violation(values) <= FEAS_TOL
    }

    /// Worst objective value attainable inside the variable box, i.e. the sum
    /// over variables of `max(c_j lb_j, c_j ub_j)`. Infinite when the box is
    /// unbounded in the worsening direction.
    pub fn box_worst_objective(&self) -> f64 {
        self.vars
            .iter()
            .map(|v| {
                if v.obj == 0.0 {
                    0.0
                } else if v.obj > 0.0 {
                    v.obj * v.ub
                } else {
                    v.obj * v.lb
                }
            })
            .sum()
    }

    /// Returns a copy with variables reordered so that new variable `k` is old
    /// variable `perm[k]`.
    pub fn permute_vars(&self, perm: &[usize]) -> MilpInstance {
        assert_eq!(perm.len(), self.vars.len());
        let mut inverse = vec![0; perm.len()];
        for (k, &old) in perm.iter().enumerate() {
            inverse[old] = k;
        }
        let vars = perm.iter().map(|&old| self.vars[old].clone()).collect();
        let constraints = self
            .constraints
            .iter()
            .map(|c| ConstraintDef {
                name: c.name.clone(),
                terms: c.terms.iter().map(|&(j, a)| (inverse[j], a)).collect(),
                rhs: c.rhs,
            })
            .collect();
        MilpInstance {
            name: self.name.clone(),
            vars,
            constraints,
        }
    }
}

/// A full assignment of values to the variables of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<f64>,
    pub objective: f64,
}

impl Assignment {
    pub fn new(instance: &MilpInstance, values: Vec<f64>) -> Self {
        let objective = instance.objective(&values);
        Assignment { values, objective }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        let err = MilpInstance::new("t", vec![VarDef::continuous("y", 2.0, 1.0, 0.0)], vec![])
            .unwrap_err();
        assert!(err.to_string().contains("vars[0](y)"), "{err}");
    }

    #[test]
    fn rejects_non_unit_binary() {
        let mut v = VarDef::binary("x", 1.0);
        v.ub = 2.0;
        assert!(MilpInstance::new("t", vec![v], vec![]).is_err());
    }

    #[test]
    fn rejects_duplicate_term() {
        let vars = vec![VarDef::binary("a", 1.0), VarDef::binary("b", 1.0)];
        let rows = vec![ConstraintDef::new("r", vec![(0, 1.0), (0, 2.0)], 1.0)];
        let err = MilpInstance::new("t", vars, rows).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn empty_instance_is_rejected() {
        assert_eq!(
            MilpInstance::new("t", vec![], vec![]).unwrap_err(),
            InstanceError::NoVariables
        );
    }

    #[test]
    fn feasibility_and_objective() {
        let vars = vec![VarDef::binary("a", -5.0), VarDef::binary("b", -4.0)];
        let rows = vec![ConstraintDef::new("r", vec![(0, 2.0), (1, 3.0)], 4.0)];
        let inst = MilpInstance::new("t", vars, rows).unwrap();
        assert!(inst.is_feasible(&[1.0, 0.0]));
        assert!(!inst.is_feasible(&[1.0, 1.0]));
        assert!(!inst.is_feasible(&[0.5, 0.0]));
        assert_eq!(inst.objective(&[1.0, 1.0]), -9.0);
        assert_eq!(inst.box_worst_objective(), 0.0);
    }

    #[test]
    fn permutation_moves_indices() {
        let vars = vec![VarDef::binary("a", 1.0), VarDef::binary("b", 2.0)];
        let rows = vec![ConstraintDef::new("r", vec![(0, 3.0)], 1.0)];
        let inst = MilpInstance::new("t", vars, rows).unwrap();
        let p = inst.permute_vars(&[1, 0]);
        assert_eq!(p.vars()[0].name, "b");
        assert_eq!(p.constraints()[0].terms, vec![(1, 3.0)]);
    }
}
