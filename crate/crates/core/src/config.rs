//! `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors. Every key has a default, so an empty file is a valid config.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::bnb::{HeuristicEmphasis, SolverConfig};
use crate::diving::{default_grid, ThresholdRule};
use crate::gcnn::{LossMode, TrainConfig, WeightScheme};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Read { path: String, reason: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Covering,
    Knapsack,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Covering => "covering",
            Family::Knapsack => "knapsack",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "covering" => Ok(Family::Covering),
            "knapsack" => Ok(Family::Knapsack),
            other => Err(format!("unknown family `{other}` (expected covering|knapsack)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub family: Family,
    /// Training instances.
    pub count: usize,
    /// Validation instances used by the threshold grid search.
    pub val_count: usize,
    /// Held-out instances used by the evaluation.
    pub test_count: usize,
    pub n_vars: usize,
    /// Covering rows, or knapsack dimensions.
    pub n_rows: usize,
    pub seed: u64,

    pub step_limit: u64,
    pub emphasis: HeuristicEmphasis,
    pub collect_step_limit: u64,
    pub collect_emphasis: HeuristicEmphasis,
    pub pool_size: usize,

    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss_mode: LossMode,
    pub uniform_weights: bool,
    pub temperature: f64,

    pub grid: Vec<f64>,
    /// Overrides the grid-search result in `evaluate`.
    pub threshold: Option<f64>,
    pub plots: bool,
    pub jobs: usize,
    pub outdir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            family: Family::Covering,
            count: 20,
            val_count: 5,
            test_count: 5,
            n_vars: 24,
            n_rows: 12,
            seed: 0,
            step_limit: 300,
            emphasis: HeuristicEmphasis::Off,
            collect_step_limit: 2000,
            collect_emphasis: HeuristicEmphasis::Aggressive,
            pool_size: 10,
            hidden: 16,
            epochs: 30,
            batch_size: 8,
            learning_rate: 0.05,
            momentum: 0.9,
            loss_mode: LossMode::Minibatch,
            uniform_weights: false,
            temperature: 1.0,
            grid: default_grid(),
            threshold: None,
            plots: false,
            jobs: 1,
            outdir: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError::Syntax {
        line,
        message: format!("bad value for `{key}`: {e}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Syntax {
            line,
            message: format!("bad value for `{key}`: expected true or false"),
        }),
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{trimmed}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "family" => cfg.family = parse_value(line, key, value)?,
                "count" => cfg.count = parse_value(line, key, value)?,
                "val_count" => cfg.val_count = parse_value(line, key, value)?,
                "test_count" => cfg.test_count = parse_value(line, key, value)?,
                "n_vars" => cfg.n_vars = parse_value(line, key, value)?,
                "n_rows" => cfg.n_rows = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "step_limit" => cfg.step_limit = parse_value(line, key, value)?,
                "emphasis" => cfg.emphasis = parse_value(line, key, value)?,
                "collect_step_limit" => cfg.collect_step_limit = parse_value(line, key, value)?,
                "collect_emphasis" => cfg.collect_emphasis = parse_value(line, key, value)?,
                "pool_size" => cfg.pool_size = parse_value(line, key, value)?,
                "hidden" => cfg.hidden = parse_value(line, key, value)?,
                "epochs" => cfg.epochs = parse_value(line, key, value)?,
                "batch_size" => cfg.batch_size = parse_value(line, key, value)?,
                "learning_rate" => cfg.learning_rate = parse_value(line, key, value)?,
                "momentum" => cfg.momentum = parse_value(line, key, value)?,
                "loss_mode" => cfg.loss_mode = parse_value(line, key, value)?,
                "uniform_weights" => cfg.uniform_weights = parse_bool(line, key, value)?,
                "temperature" => cfg.temperature = parse_value(line, key, value)?,
                "grid" => {
                    cfg.grid = value
                        .split(',')
                        .map(|t| parse_value(line, key, t.trim()))
                        .collect::<Result<_, _>>()?
                }
                "threshold" => cfg.threshold = Some(parse_value(line, key, value)?),
                "plots" => cfg.plots = parse_bool(line, key, value)?,
                "jobs" => cfg.jobs = parse_value(line, key, value)?,
                "outdir" => cfg.outdir = PathBuf::from(value),
                other => {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Checks everything except the dataset counts, which each subcommand
    /// checks for the split it reads.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.n_vars == 0 || self.n_rows == 0 {
            return invalid("n_vars and n_rows must be positive".into());
        }
        if self.family == Family::Covering && self.n_rows > self.n_vars {
            return invalid("covering needs n_rows <= n_vars".into());
        }
        if self.step_limit == 0 || self.collect_step_limit == 0 {
            return invalid("step limits must be positive".into());
        }
        if self.pool_size == 0 {
            return invalid("pool_size must be positive".into());
        }
        if self.hidden == 0 {
            return invalid("hidden must be positive".into());
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return invalid("temperature must be positive".into());
        }
        if self.jobs == 0 {
            return invalid("jobs must be positive".into());
        }
        if self.grid.is_empty() {
            return invalid("grid must not be empty".into());
        }
        for &t in self.grid.iter().chain(&self.threshold) {
            if ThresholdRule::Symmetric(t).validate().is_err() {
                return invalid(format!("threshold {t} outside (0.5, 1]"));
            }
        }
        self.train_config()
            .validate()
            .or_else(|e| invalid(e.to_string()))
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            step_limit: self.step_limit,
            heuristic_emphasis: self.emphasis,
            collect_pool: false,
            pool_size: self.pool_size,
            seed: self.seed,
        }
    }

    pub fn collect_config(&self) -> SolverConfig {
        SolverConfig {
            step_limit: self.collect_step_limit,
            heuristic_emphasis: self.collect_emphasis,
            collect_pool: true,
            pool_size: self.pool_size,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            loss_mode: self.loss_mode,
            seed: self.seed,
        }
    }

    pub fn weight_scheme(&self) -> WeightScheme {
        if self.uniform_weights {
            WeightScheme::Uniform
        } else {
            WeightScheme::Softmax {
                temperature: self.temperature,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn parses_keys() {
        let cfg = PipelineConfig::parse(
            "# comment\nfamily = knapsack\ncount=7\n grid = 0.6, 0.9 ,1\nthreshold = 0.8\n\
             loss_mode = fullbatch\nemphasis = aggressive\nplots = true\noutdir = /tmp/x\n",
        )
        .unwrap();
        assert_eq!(cfg.family, Family::Knapsack);
        assert_eq!(cfg.count, 7);
        assert_eq!(cfg.grid, vec![0.6, 0.9, 1.0]);
        assert_eq!(cfg.threshold, Some(0.8));
        assert_eq!(cfg.loss_mode, LossMode::Fullbatch);
        assert_eq!(cfg.emphasis, HeuristicEmphasis::Aggressive);
        assert!(cfg.plots);
        assert_eq!(cfg.outdir, PathBuf::from("/tmp/x"));
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            PipelineConfig::parse("count = 3\nbogus = 1\n"),
            Err(ConfigError::Syntax {
                line: 2,
                message: "unknown key `bogus`".into()
            })
        );
        assert!(matches!(
            PipelineConfig::parse("\n\ncount = -3"),
            Err(ConfigError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("count"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn validation() {
        let bad = PipelineConfig {
            grid: vec![0.4],
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            n_rows: 30,
            n_vars: 10,
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
        PipelineConfig::default().validate().unwrap();
    }
}
