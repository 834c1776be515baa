//! Bipartite variable/constraint encoding of an instance.
//!
//! Variable features: `[c_j / max|c|, is_binary, lb, ub, root LP value]`, with
//! bounds divided by the largest finite bound magnitude (at least 1) and
//! infinite bounds mapped to -1 / +1. Constraint features:
//! `[b_i / max(max|b|, 1), degree_i / n]`. Edge feature: `a_ij / max_k |a_ik|`.
//! All features land in `[-1, 1]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::instance::{MilpInstance, VarKind};
use crate::lp::solve_lp;
use crate::matrix::Matrix;

pub const VAR_FEATURES: usize = 5;
pub const CON_FEATURES: usize = 2;

const DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderOptions {
    /// Include the root LP relaxation value as a variable feature (zero when
    /// disabled or when the LP has no optimal solution).
    pub root_lp: bool,
}

impl Default for EncoderOptions {
    fn default() -> Self {
        EncoderOptions { root_lp: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub con: usize,
    pub var: usize,
    pub feat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub var_feats: Matrix,
    pub con_feats: Matrix,
    pub edges: Vec<Edge>,
    pub binary_mask: Vec<bool>,
}

impl BipartiteGraph {
    pub fn num_vars(&self) -> usize {
        self.var_feats.rows()
    }

    pub fn num_cons(&self) -> usize {
        self.con_feats.rows()
    }

    pub fn num_binary(&self) -> usize {
        self.binary_mask.iter().filter(|&&b| b).count()
    }

    /// Variable indices of the binary nodes, in order.
    pub fn binary_indices(&self) -> Vec<usize> {
        self.binary_mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect()
    }

    /// Debug dump as three CSV tables: variable nodes, constraint nodes, edges.
    pub fn to_csv_tables(&self) -> (String, String, String) {
        let mut vars = String::from("var,obj,is_binary,lb,ub,lp_value,binary_mask\n");
        for j in 0..self.num_vars() {
            let _ = write!(vars, "{j}");
            for f in self.var_feats.row(j) {
                let _ = write!(vars, ",{f}");
            }
            let _ = writeln!(vars, ",{}", u8::from(self.binary_mask[j]));
        }
        let mut cons = String::from("con,rhs,degree\n");
        for i in 0..self.num_cons() {
            let _ = write!(cons, "{i}");
            for f in self.con_feats.row(i) {
                let _ = write!(cons, ",{f}");
            }
            cons.push('\n');
        }
        let mut edges = String::from("con,var,coef\n");
        for e in &self.edges {
            let _ = writeln!(edges, "{},{},{}", e.con, e.var, e.feat);
        }
        (vars, cons, edges)
    }
}

pub fn encode(instance: &MilpInstance) -> BipartiteGraph {
    encode_with(instance, EncoderOptions::default())
}

pub fn encode_with(instance: &MilpInstance, options: EncoderOptions) -> BipartiteGraph {
    let n = instance.num_vars();
    let m = instance.num_constraints();
    let vars = instance.vars();

    let obj_scale = vars
        .iter()
        .fold(0.0f64, |s, v| s.max(v.obj.abs()))
        .max(DENOM_FLOOR);
    let bound_scale = vars
        .iter()
        .flat_map(|v| [v.lb, v.ub])
        .filter(|b| b.is_finite())
        .fold(1.0f64, |s, b| s.max(b.abs()));
    let norm_bound = |b: f64| {
        if b.is_finite() {
            b / bound_scale
        } else {
            b.signum()
        }
    };

    let lp_values = if options.root_lp {
        match solve_lp(instance, &BTreeMap::new()) {
            Ok(r) if r.is_optimal() => {
                let scale = r
                    .primal_values
                    .iter()
                    .fold(1.0f64, |s, x| s.max(x.abs()));
                r.primal_values.iter().map(|x| x / scale).collect()
            }
            _ => vec![0.0; n],
        }
    } else {
        vec![0.0; n]
    };

    let mut var_feats = Matrix::zeros(n, VAR_FEATURES);
    for (j, v) in vars.iter().enumerate() {
        let row = var_feats.row_mut(j);
        row[0] = v.obj / obj_scale;
        row[1] = if v.kind == VarKind::Binary { 1.0 } else { 0.0 };
        row[2] = norm_bound(v.lb);
        row[3] = norm_bound(v.ub);
        row[4] = lp_values[j];
    }

    let rhs_scale = instance
        .constraints()
        .iter()
        .fold(1.0f64, |s, c| s.max(c.rhs.abs()));
    let mut con_feats = Matrix::zeros(m, CON_FEATURES);
    let mut edges = Vec::with_capacity(instance.nnz());
    for (i, c) in instance.constraints().iter().enumerate() {
        let row = con_feats.row_mut(i);
        row[0] = c.rhs / rhs_scale;
        row[1] = c.terms.len() as f64 / n as f64;
        let coef_scale = c
            .terms
            .iter()
            .fold(0.0f64, |s, &(_, a)| s.max(a.abs()))
            .max(DENOM_FLOOR);
        edges.extend(c.terms.iter().map(|&(j, a)| Edge {
            con: i,
            var: j,
            feat: a / coef_scale,
        }));
    }

    BipartiteGraph {
        var_feats,
        con_feats,
        edges,
        binary_mask: vars.iter().map(|v| v.kind == VarKind::Binary).collect(),
    }
}
