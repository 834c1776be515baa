//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use ctnd::gcnn::{loss, GcnnModel, GcnnParams, LossMode, Target, TrainingBatch, TrainingExample};
use ctnd::graph::{encode, BipartiteGraph};
use ctnd::instance::{generate_covering, generate_knapsack, ConstraintDef, MilpInstance, VarDef};
use ctnd::matrix::Matrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pure-binary instance with `m` random `<=` rows. Roughly half of the rows
/// are built around a random point so that most draws are feasible.
pub fn random_binary_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MilpInstance {
    let vars = (0..n)
        .map(|j| VarDef::binary(format!("x{j}"), rng.random_range(-10..=10) as f64))
        .collect();
    let anchor: Vec<f64> = (0..n).map(|_| rng.random_range(0..=1) as f64).collect();
    let cons = (0..m)
        .map(|i| {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.6) {
                    terms.push((j, rng.random_range(-5..=5) as f64));
                }
            }
            let at_anchor: f64 = terms.iter().map(|&(j, a)| a * anchor[j]).sum();
            let rhs = if rng.random_bool(0.5) {
                at_anchor + rng.random_range(0..=3) as f64
            } else {
                rng.random_range(-6..=8) as f64
            };
            ConstraintDef::new(format!("c{i}"), terms, rhs)
        })
        .collect();
    MilpInstance::new("rand", vars, cons).unwrap()
}

/// Mixed instance with binary, general integer and continuous variables,
/// all with finite bounds.
pub fn random_mixed_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MilpInstance {
    let vars = (0..n)
        .map(|j| {
            let obj = rng.random_range(-10..=10) as f64;
            match rng.random_range(0..3) {
                0 => VarDef::binary(format!("b{j}"), obj),
                1 => VarDef::integer(format!("i{j}"), 0.0, rng.random_range(1..=4) as f64, obj),
                _ => VarDef::continuous(
                    format!("c{j}"),
                    -rng.random_range(0.0..2.0),
                    rng.random_range(0.0..3.0),
                    obj,
                ),
            }
        })
        .collect();
    let cons = (0..m)
        .map(|i| {
            let mut terms = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.5) {
                    terms.push((j, rng.random_range(-4.0..4.0)));
                }
            }
            ConstraintDef::new(format!("r{i}"), terms, rng.random_range(-2.0..6.0))
        })
        .collect();
    MilpInstance::new("mixed", vars, cons).unwrap()
}

/// A generated or random instance of one of several shapes, for model tests.
pub fn random_model_instance(rng: &mut ChaCha8Rng) -> MilpInstance {
    let seed = rng.random_range(0..1_000_000u64);
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(3..=12);
            generate_covering(seed, n, rng.random_range(1..=n))
        }
        1 => generate_knapsack(seed, rng.random_range(2..=10), rng.random_range(1..=3)),
        _ => {
            let (n, m) = (rng.random_range(1..=8), rng.random_range(0..=5));
            random_mixed_instance(rng, n, m)
        }
    }
}

/// LP minimum over a bounded polyhedron by enumerating every basic solution.
/// Variables must have finite bounds. `None` means infeasible.
pub fn lp_vertex_oracle(instance: &MilpInstance) -> Option<f64> {
    let n = instance.num_vars();
    let mut g: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    for c in instance.constraints() {
        let mut row = vec![0.0; n];
        for &(j, a) in &c.terms {
            row[j] = a;
        }
        g.push(row);
        h.push(c.rhs);
    }
    for (j, v) in instance.vars().iter().enumerate() {
        assert!(v.lb.is_finite() && v.ub.is_finite());
        let mut lo = vec![0.0; n];
        lo[j] = -1.0;
        g.push(lo);
        h.push(-v.lb);
        let mut hi = vec![0.0; n];
        hi[j] = 1.0;
        g.push(hi);
        h.push(v.ub);
    }
    let cost: Vec<f64> = instance.vars().iter().map(|v| v.obj).collect();
    let mut best: Option<f64> = None;
    for subset in combinations(g.len(), n) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&r| g[r].clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&r| h[r]).collect();
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        let feasible = g.iter().zip(&h).all(|(row, &rhs)| {
            let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
            lhs <= rhs + 1e-9 * (1.0 + rhs.abs())
        });
        if feasible {
            let obj: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(obj, |b| b.min(obj)));
        }
    }
    best
}

fn combinations(total: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, total: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..total {
            if total - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, total, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, total, k, &mut Vec::new(), &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot_row = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / pivot_row[col];
            for (dst, src) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn affine(w: &Matrix, b: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|k| b.get(0, k) + (0..w.cols()).map(|c| w.get(k, c) * x[c]).sum::<f64>())
        .collect()
}

fn relu(v: Vec<f64>, pattern: &mut Vec<bool>) -> Vec<f64> {
    pattern.extend(v.iter().map(|&x| x > 0.0));
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// Straight-line forward pass written from the architecture description.
/// Probabilities are clamped to `[1e-7, 1 - 1e-7]`, the documented output
/// range. Returns the binary-variable probabilities and the on/off pattern of every
/// ReLU, in evaluation order.
pub fn reference_forward(p: &GcnnParams, g: &BipartiteGraph) -> (Vec<f64>, Vec<bool>) {
    let mut pattern = Vec::new();
    let hv0: Vec<Vec<f64>> = (0..g.num_vars())
        .map(|j| {
            let pre = affine(&p.var_embed.weight, &p.var_embed.bias, g.var_feats.row(j));
            relu(pre, &mut pattern)
        })
        .collect();
    let hc0: Vec<Vec<f64>> = (0..g.num_cons())
        .map(|i| {
            let pre = affine(&p.con_embed.weight, &p.con_embed.bias, g.con_feats.row(i));
            relu(pre, &mut pattern)
        })
        .collect();
    let h = p.head.weight.cols();

    // Messages into constraints.
    let mut sums = vec![vec![0.0; h]; g.num_cons()];
    let mut counts = vec![0usize; g.num_cons()];
    for e in &g.edges {
        let input: Vec<f64> = hc0[e.con]
            .iter()
            .chain(&hv0[e.var])
            .copied()
            .chain([e.feat])
            .collect();
        let m = relu(
            affine(&p.conv_v2c.msg.weight, &p.conv_v2c.msg.bias, &input),
            &mut pattern,
        );
        for k in 0..h {
            sums[e.con][k] += m[k];
        }
        counts[e.con] += 1;
    }
    let hc1: Vec<Vec<f64>> = (0..g.num_cons())
        .map(|i| {
            let agg: Vec<f64> = sums[i]
                .iter()
                .map(|s| if counts[i] == 0 { 0.0 } else { s / counts[i] as f64 })
                .collect();
            let input: Vec<f64> = hc0[i].iter().chain(&agg).copied().collect();
            relu(
                affine(&p.conv_v2c.upd.weight, &p.conv_v2c.upd.bias, &input),
                &mut pattern,
            )
        })
        .collect();

    // Messages into variables.
    let mut sums = vec![vec![0.0; h]; g.num_vars()];
    let mut counts = vec![0usize; g.num_vars()];
    for e in &g.edges {
        let input: Vec<f64> = hv0[e.var]
            .iter()
            .chain(&hc1[e.con])
            .copied()
            .chain([e.feat])
            .collect();
        let m = relu(
            affine(&p.conv_c2v.msg.weight, &p.conv_c2v.msg.bias, &input),
            &mut pattern,
        );
        for k in 0..h {
            sums[e.var][k] += m[k];
        }
        counts[e.var] += 1;
    }
    let mut probs = Vec::new();
    for j in 0..g.num_vars() {
        let agg: Vec<f64> = sums[j]
            .iter()
            .map(|s| if counts[j] == 0 { 0.0 } else { s / counts[j] as f64 })
            .collect();
        let input: Vec<f64> = hv0[j].iter().chain(&agg).copied().collect();
        let hv1 = relu(
            affine(&p.conv_c2v.upd.weight, &p.conv_c2v.upd.bias, &input),
            &mut pattern,
        );
        if g.binary_mask[j] {
            let z = affine(&p.head.weight, &p.head.bias, &hv1)[0];
            probs.push((1.0 / (1.0 + (-z).exp())).clamp(1e-7, 1.0 - 1e-7));
        }
    }
    (probs, pattern)
}

/// Random training example over `instance` with `n_targets` random labels
/// and weights.
pub fn random_example(rng: &mut ChaCha8Rng, instance: &MilpInstance, n_targets: usize) -> TrainingExample {
    let graph = encode(instance);
    let nb = graph.num_binary();
    let targets = (0..n_targets)
        .map(|_| Target {
            values: (0..nb).map(|_| rng.random_range(0..=1) as f64).collect(),
            weights: (0..nb).map(|_| rng.random_range(0.0..1.0)).collect(),
        })
        .collect();
    TrainingExample {
        name: instance.name().to_string(),
        graph,
        targets,
    }
}

pub struct FdReport {
    pub worst_rel_err: f64,
    pub checked: usize,
    /// Parameters whose stencil crosses a ReLU kink, where the loss is not
    /// differentiable and central differences are meaningless.
    pub skipped_kinks: usize,
}

/// Central-difference check of the loss gradient over every parameter.
pub fn fd_check(model: &GcnnModel, examples: &[TrainingExample], mode: LossMode) -> FdReport {
    let eps = 1e-5;
    let batch = TrainingBatch::new(examples);
    let (_, grad) = loss(model, &batch, mode).unwrap();
    let patterns = |p: &GcnnParams| -> Vec<Vec<bool>> {
        examples
            .iter()
            .map(|e| reference_forward(p, &e.graph).1)
            .collect()
    };
    let base = patterns(&model.params);
    let eval = |p: &GcnnParams| {
        let m = GcnnModel {
            params: p.clone(),
            version: model.version,
        };
        loss(&m, &batch, mode).unwrap().0
    };
    let mut report = FdReport {
        worst_rel_err: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for b in 0..14 {
        for k in 0..model.params.blocks()[b].data().len() {
            let mut plus = model.params.clone();
            plus.blocks_mut()[b].data_mut()[k] += eps;
            let mut minus = model.params.clone();
            minus.blocks_mut()[b].data_mut()[k] -= eps;
            if patterns(&plus) != base || patterns(&minus) != base {
                report.skipped_kinks += 1;
                continue;
            }
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * eps);
            let an = grad.blocks()[b].data()[k];
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            report.worst_rel_err = report.worst_rel_err.max(err);
            report.checked += 1;
        }
    }
    report
}

/// Trajectory from `(step, objective)` pairs.
pub fn trajectory(points: &[(u64, f64)], terminal_step: u64) -> ctnd::bnb::IncumbentTrajectory {
    ctnd::bnb::IncumbentTrajectory {
        events: points
            .iter()
            .map(|&(step, objective)| ctnd::bnb::IncumbentEvent {
                step,
                objective,
                values: Vec::new(),
            })
            .collect(),
        terminal_step,
        proved_optimal: false,
    }
}

/// MILP minimum by enumerating every integral assignment and solving the
/// remaining continuous LP with [`lp_vertex_oracle`]. Bounds must be finite.
pub fn milp_enumeration_oracle(instance: &MilpInstance) -> Option<f64> {
    let vars = instance.vars();
    let integral: Vec<usize> = (0..vars.len()).filter(|&j| vars[j].kind.is_integral()).collect();
    let continuous: Vec<usize> = (0..vars.len()).filter(|&j| !vars[j].kind.is_integral()).collect();
    let ranges: Vec<(i64, i64)> = integral
        .iter()
        .map(|&j| (vars[j].lb.ceil() as i64, vars[j].ub.floor() as i64))
        .collect();
    if ranges.iter().any(|&(l, u)| l > u) {
        return None;
    }
    let mut point: Vec<i64> = ranges.iter().map(|&(l, _)| l).collect();
    let mut best: Option<f64> = None;
    loop {
        let mut fixed = vec![0.0; vars.len()];
        for (k, &j) in integral.iter().enumerate() {
            fixed[j] = point[k] as f64;
        }
        let fixed_obj: f64 = integral.iter().map(|&j| vars[j].obj * fixed[j]).sum();
        let value = if continuous.is_empty() {
            instance.is_feasible(&fixed).then_some(fixed_obj)
        } else {
            let mut pos = vec![usize::MAX; vars.len()];
            for (k, &j) in continuous.iter().enumerate() {
                pos[j] = k;
            }
            let sub_vars = continuous.iter().map(|&j| vars[j].clone()).collect();
            let sub_cons = instance
                .constraints()
                .iter()
                .map(|c| {
                    let shift: f64 = c
                        .terms
                        .iter()
                        .filter(|&&(j, _)| pos[j] == usize::MAX)
                        .map(|&(j, a)| a * fixed[j])
                        .sum();
                    let terms = c
                        .terms
                        .iter()
                        .filter(|&&(j, _)| pos[j] != usize::MAX)
                        .map(|&(j, a)| (pos[j], a))
                        .collect();
                    ConstraintDef::new(c.name.clone(), terms, c.rhs - shift)
                })
                .collect();
            let sub = MilpInstance::new("sub", sub_vars, sub_cons).unwrap();
            lp_vertex_oracle(&sub).map(|v| v + fixed_obj)
        };
        if let Some(v) = value {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == point.len() {
                return best;
            }
            if point[k] < ranges[k].1 {
                point[k] += 1;
                break;
            }
            point[k] = ranges[k].0;
            k += 1;
        }
    }
}
