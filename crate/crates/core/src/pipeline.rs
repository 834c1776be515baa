//! File-based pipeline: generate, collect, train, gridsearch, evaluate.
//!
//! Layout under the output directory:
//!
//! ```text
//! instances/{train,val,test}_NNNN.milp
//! pools/train_NNNN.sol   pools/skipped.txt
//! model.txt              loss_curve.csv
//! threshold_report.csv
//! eval.csv               eval_summary.csv     plots/<stem>.svg
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bnb::{solve, SolverError};
use crate::config::{ConfigError, Family, PipelineConfig};
use crate::diving::{dive_and_solve_with_probs, grid_search, predict_all, DivingError, ThresholdReport, ThresholdRule};
use crate::eval::{compare, plot_primal_bound, rows_to_csv, summary_to_csv, Comparison, EvalError, Method};
use crate::gcnn::{load_model, train, GcnnError, GcnnModel, ModelFormatError, TrainingExample};
use crate::graph::encode;
use crate::instance::{
    generate_covering, generate_knapsack, parse_instance, parse_solutions, serialize_instance,
    serialize_solutions, MilpInstance,
};

pub const MODEL_FILE: &str = "model.txt";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";
pub const REPORT_FILE: &str = "threshold_report.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const EVAL_SUMMARY_FILE: &str = "eval_summary.csv";
pub const SKIP_MANIFEST: &str = "skipped.txt";

const MAX_SPLIT_SIZE: usize = 100_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("empty dataset: no {0} instances")]
    EmptyDataset(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    ModelFile {
        path: PathBuf,
        source: ModelFormatError,
    },
    #[error(transparent)]
    Model(#[from] GcnnError),
    #[error(transparent)]
    Diving(#[from] DivingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl PipelineError {
    /// Errors caused by the invocation rather than by the run.
    pub fn is_usage(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to a temporary sibling of `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn with_pool<T: Send>(
    jobs: usize,
    f: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?
        .install(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn index(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    fn count(self, cfg: &PipelineConfig) -> usize {
        match self {
            Split::Train => cfg.count,
            Split::Val => cfg.val_count,
            Split::Test => cfg.test_count,
        }
    }
}

pub fn instances_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.outdir.join("instances")
}

pub fn pools_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.outdir.join("pools")
}

fn instance_path(cfg: &PipelineConfig, split: Split, k: usize) -> PathBuf {
    instances_dir(cfg).join(format!("{}_{k:04}.milp", split.as_str()))
}

/// Generator seed of instance `k` of `split`; distinct for every
/// `(seed, split, k)` with `k < 100000`.
pub fn instance_seed(seed: u64, split: Split, k: usize) -> u64 {
    seed.wrapping_mul(1_000_000)
        .wrapping_add(split.index() * MAX_SPLIT_SIZE as u64 + k as u64)
}

pub fn generate_one(cfg: &PipelineConfig, split: Split, k: usize) -> MilpInstance {
    let seed = instance_seed(cfg.seed, split, k);
    match cfg.family {
        Family::Covering => generate_covering(seed, cfg.n_vars, cfg.n_rows),
        Family::Knapsack => generate_knapsack(seed, cfg.n_vars, cfg.n_rows),
    }
}

/// Writes every split. Stale `.milp` files in the instance directory are
/// removed first so the directory holds exactly this dataset.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    cfg.validate()?;
    if cfg.count == 0 {
        return Err(PipelineError::EmptyDataset("train"));
    }
    for split in [Split::Train, Split::Val, Split::Test] {
        if split.count(cfg) > MAX_SPLIT_SIZE {
            return Err(ConfigError::Invalid(format!(
                "at most {MAX_SPLIT_SIZE} instances per split"
            ))
            .into());
        }
    }
    let dir = instances_dir(cfg);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let path = entry.map_err(io_err(&dir))?.path();
        if path.extension().is_some_and(|e| e == "milp") {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    let mut written = Vec::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        for k in 0..split.count(cfg) {
            let path = instance_path(cfg, split, k);
            write_atomic(&path, &serialize_instance(&generate_one(cfg, split, k)))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Instances of `split` as `(file stem, instance)`, sorted by file name.
pub fn load_split(
    cfg: &PipelineConfig,
    split: Split,
) -> Result<Vec<(String, MilpInstance)>, PipelineError> {
    let dir = instances_dir(cfg);
    let prefix = format!("{}_", split.as_str());
    let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|e| e == "milp")
                    && p.file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with(&prefix))
            })
            .collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(&dir)(e)),
    };
    paths.sort();
    if paths.is_empty() {
        return Err(PipelineError::EmptyDataset(split.as_str()));
    }
    paths
        .iter()
        .map(|p| {
            let inst = parse_instance(&read(p)?).map_err(|e| PipelineError::Parse {
                path: p.clone(),
                message: e.to_string(),
            })?;
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            Ok((stem, inst))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectSummary {
    pub pools_written: usize,
    /// `(file stem, reason)` for every instance without training targets.
    pub skipped: Vec<(String, String)>,
}

/// Solves every training instance with pool collection on and writes one
/// pool file each. Instances whose pool is empty, or whose solve fails, are
/// listed in the skip manifest; the run continues past them.
pub fn cmd_collect(cfg: &PipelineConfig) -> Result<CollectSummary, PipelineError> {
    cfg.validate()?;
    let instances = load_split(cfg, Split::Train)?;
    let solver = cfg.collect_config();
    let dir = pools_dir(cfg);
    with_pool(cfg.jobs, || {
        let outcomes: Vec<Result<Option<String>, PipelineError>> = instances
            .par_iter()
            .map(|(stem, inst)| {
                let (text, skip) = match solve(inst, &BTreeMap::new(), &solver) {
                    Ok((_, pool)) if pool.is_empty() => (String::new(), Some("empty pool".into())),
                    Ok((_, pool)) => (serialize_solutions(inst, &pool.entries), None),
                    Err(e) => (String::new(), Some(e.to_string())),
                };
                write_atomic(&dir.join(format!("{stem}.sol")), &text)?;
                Ok(skip)
            })
            .collect();
        let mut skipped = Vec::new();
        for ((stem, _), outcome) in instances.iter().zip(outcomes) {
            if let Some(reason) = outcome? {
                skipped.push((stem.clone(), reason));
            }
        }
        let mut manifest = String::new();
        for (stem, reason) in &skipped {
            let _ = writeln!(manifest, "{stem}\t{reason}");
        }
        write_atomic(&dir.join(SKIP_MANIFEST), &manifest)?;
        Ok(CollectSummary {
            pools_written: instances.len(),
            skipped,
        })
    })
}

/// Training examples from the training split and its pools; instances with
/// empty pools are left out.
pub fn load_training_set(cfg: &PipelineConfig) -> Result<Vec<TrainingExample>, PipelineError> {
    let instances = load_split(cfg, Split::Train)?;
    let dir = pools_dir(cfg);
    let scheme = cfg.weight_scheme();
    let mut examples = Vec::new();
    for (stem, inst) in &instances {
        let path = dir.join(format!("{stem}.sol"));
        let entries = parse_solutions(&read(&path)?, inst).map_err(|e| PipelineError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if entries.is_empty() {
            continue;
        }
        let mut pool = crate::bnb::SolutionPool::new(inst.name());
        pool.entries = entries;
        examples.push(TrainingExample::from_pool(encode(inst), &pool, scheme));
    }
    if examples.is_empty() {
        return Err(PipelineError::EmptyDataset("pooled training"));
    }
    Ok(examples)
}

pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{l}", e + 1);
    }
    out
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<(GcnnModel, Vec<f64>), PipelineError> {
    cfg.validate()?;
    let examples = with_pool(cfg.jobs, || load_training_set(cfg))?;
    let init = GcnnModel::new(cfg.hidden, cfg.seed);
    let (model, curve) = train(&init, &examples, &cfg.train_config())?;
    write_atomic(&cfg.outdir.join(MODEL_FILE), &model.to_text())?;
    write_atomic(&cfg.outdir.join(LOSS_CURVE_FILE), &loss_curve_csv(&curve))?;
    Ok((model, curve))
}

fn load_trained_model(cfg: &PipelineConfig) -> Result<GcnnModel, PipelineError> {
    let path = cfg.outdir.join(MODEL_FILE);
    load_model(&path).map_err(|source| PipelineError::ModelFile { path, source })
}

pub fn cmd_gridsearch(cfg: &PipelineConfig) -> Result<ThresholdReport, PipelineError> {
    cfg.validate()?;
    let model = load_trained_model(cfg)?;
    let instances: Vec<MilpInstance> = load_split(cfg, Split::Val)?
        .into_iter()
        .map(|(_, i)| i)
        .collect();
    let report = with_pool(cfg.jobs, || {
        Ok(grid_search(&instances, &model, &cfg.grid, &cfg.solver_config())?)
    })?;
    write_atomic(&cfg.outdir.join(REPORT_FILE), &report.to_csv())?;
    Ok(report)
}

/// Reads the `BEST t=<..>` trailer of a threshold report.
pub fn parse_best_threshold(text: &str) -> Option<f64> {
    text.lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix("BEST t="))
        .and_then(|v| v.parse().ok())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub threshold: f64,
    pub comparison: Comparison,
}

pub const PLAIN_LABEL: &str = "plain";

pub fn diving_label(t: f64) -> String {
    format!("diving@{t}")
}

/// Plain solve against diving at the configured threshold, or at the grid
/// search's best threshold when none is configured.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    cfg.validate()?;
    let threshold = match cfg.threshold {
        Some(t) => t,
        None => {
            let path = cfg.outdir.join(REPORT_FILE);
            parse_best_threshold(&read(&path)?).ok_or_else(|| PipelineError::Parse {
                path,
                message: "missing `BEST t=` line".into(),
            })?
        }
    };
    ThresholdRule::Symmetric(threshold)
        .validate()
        .map_err(PipelineError::from)?;
    let model = load_trained_model(cfg)?;
    let split = load_split(cfg, Split::Test)?;
    let (stems, instances): (Vec<String>, Vec<MilpInstance>) = split.into_iter().unzip();
    let solver = cfg.solver_config();

    let comparison = with_pool(cfg.jobs, || {
        let probs = predict_all(&instances, &model)?;
        let by_name: BTreeMap<&str, &Vec<f64>> = instances
            .iter()
            .map(|i| i.name())
            .zip(&probs)
            .collect();
        let plain = |inst: &MilpInstance| {
            solve(inst, &BTreeMap::new(), &solver)
                .map(|r| r.0)
                .map_err(|e| e.to_string())
        };
        let diving = |inst: &MilpInstance| {
            dive_and_solve_with_probs(
                inst,
                by_name[inst.name()],
                ThresholdRule::Symmetric(threshold),
                &solver,
            )
            .map(|r| r.trajectory)
            .map_err(|e| e.to_string())
        };
        let methods = [
            Method::new(PLAIN_LABEL, plain),
            Method::new(diving_label(threshold), diving),
        ];
        Ok(compare(&instances, &methods, cfg.step_limit)?)
    })?;

    write_atomic(&cfg.outdir.join(EVAL_FILE), &rows_to_csv(&comparison.rows))?;
    write_atomic(
        &cfg.outdir.join(EVAL_SUMMARY_FILE),
        &summary_to_csv(&comparison.summary),
    )?;
    if cfg.plots {
        let label = diving_label(threshold);
        for ((stem, trajs), ecfg) in stems
            .iter()
            .zip(&comparison.trajectories)
            .zip(&comparison.configs)
        {
            let svg = plot_primal_bound(&[(PLAIN_LABEL, &trajs[0]), (&label, &trajs[1])], ecfg);
            write_atomic(&cfg.outdir.join("plots").join(format!("{stem}.svg")), &svg)?;
        }
    }
    Ok(Evaluation {
        threshold,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> PipelineConfig {
        PipelineConfig {
            count: 5,
            val_count: 0,
            test_count: 0,
            n_vars: 10,
            n_rows: 4,
            outdir: dir.to_path_buf(),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn generate_counts_and_rerun_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let first = cmd_generate(&c).unwrap();
        assert_eq!(first.len(), 5);
        assert_eq!(fs::read_dir(instances_dir(&c)).unwrap().count(), 5);
        let bytes: Vec<String> = first.iter().map(|p| fs::read_to_string(p).unwrap()).collect();
        cmd_generate(&c).unwrap();
        let again: Vec<String> = first.iter().map(|p| fs::read_to_string(p).unwrap()).collect();
        assert_eq!(bytes, again);
    }

    #[test]
    fn generate_rejects_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let c = PipelineConfig {
            count: 0,
            ..cfg(dir.path())
        };
        let err = cmd_generate(&c).unwrap_err();
        assert!(err.to_string().starts_with("empty dataset"));
    }

    #[test]
    fn collect_with_tiny_budget_lists_skips() {
        let dir = tempfile::tempdir().unwrap();
        let c = PipelineConfig {
            collect_step_limit: 1,
            collect_emphasis: crate::bnb::HeuristicEmphasis::Off,
            ..cfg(dir.path())
        };
        cmd_generate(&c).unwrap();
        let summary = cmd_collect(&c).unwrap();
        assert_eq!(summary.pools_written, 5);
        let manifest = fs::read_to_string(pools_dir(&c).join(SKIP_MANIFEST)).unwrap();
        assert_eq!(manifest.lines().count(), summary.skipped.len());
        for (stem, _) in &summary.skipped {
            assert_eq!(
                fs::read_to_string(pools_dir(&c).join(format!("{stem}.sol"))).unwrap(),
                ""
            );
        }
    }

    #[test]
    fn collect_without_instances_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            cmd_collect(&cfg(dir.path())),
            Err(PipelineError::EmptyDataset("train"))
        ));
    }

    #[test]
    fn best_threshold_trailer() {
        assert_eq!(parse_best_threshold("t,coverage\n0.8,1,1,2\nBEST t=0.8\n"), Some(0.8));
        assert_eq!(parse_best_threshold("t\n"), None);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, "x").unwrap();
        write_atomic(&p, "y").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "y");
        assert_eq!(fs::read_dir(dir.path().join("a")).unwrap().count(), 1);
    }
}
