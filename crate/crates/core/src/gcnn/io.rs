//! Plain-text model files.
//!
//! ```text
//! ctnd-gcnn version 1
//! hidden 16
//! var_features 5
//! con_features 2
//! block var_embed.weight 16 5
//! <one line of space-separated values per row>
//! ...
//! end
//! ```
//!
//! Values use the shortest exponent form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{GcnnModel, GcnnParams, BLOCK_NAMES, FORMAT_VERSION};

const MAGIC: &str = "ctnd-gcnn";

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported model version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
}

impl GcnnModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} version {}", self.version);
        let _ = writeln!(out, "hidden {}", self.hidden());
        let _ = writeln!(out, "var_features {}", self.var_features());
        let _ = writeln!(out, "con_features {}", self.con_features());
        for (name, block) in BLOCK_NAMES.iter().zip(self.params.blocks()) {
            let _ = writeln!(out, "block {name} {} {}", block.rows(), block.cols());
            for r in 0..block.rows() {
                let row: Vec<String> = block.row(r).iter().map(|v| format!("{v:e}")).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelFormatError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| ModelFormatError::Syntax {
                line: text.lines().count() + 1,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let syntax = |line: usize, message: String| ModelFormatError::Syntax { line, message };

        let (ln, header) = next("header")?;
        let version = match header.split_whitespace().collect::<Vec<_>>()[..] {
            [MAGIC, "version", v] => v
                .parse::<u32>()
                .map_err(|_| syntax(ln, format!("bad version `{v}`")))?,
            _ => return Err(syntax(ln, format!("expected `{MAGIC} version <n>`"))),
        };
        if version != FORMAT_VERSION {
            return Err(ModelFormatError::UnsupportedVersion(version));
        }

        let mut dims = [0usize; 3];
        for (slot, key) in dims.iter_mut().zip(["hidden", "var_features", "con_features"]) {
            let (ln, line) = next(key)?;
            *slot = match line.split_whitespace().collect::<Vec<_>>()[..] {
                [k, v] if k == key => v
                    .parse()
                    .map_err(|_| syntax(ln, format!("bad {key} `{v}`")))?,
                _ => return Err(syntax(ln, format!("expected `{key} <n>`"))),
            };
        }
        let [hidden, var_features, con_features] = dims;
        if hidden == 0 {
            return Err(syntax(ln, "hidden size must be positive".into()));
        }

        let mut params = GcnnParams::zeros(hidden, var_features, con_features);
        for (name, block) in BLOCK_NAMES.iter().zip(params.blocks_mut()) {
            let (ln, line) = next(name)?;
            let expected = format!("block {name} {} {}", block.rows(), block.cols());
            if line.split_whitespace().collect::<Vec<_>>().join(" ") != expected {
                return Err(syntax(ln, format!("expected `{expected}`, found `{line}`")));
            }
            for r in 0..block.rows() {
                let (ln, line) = next("matrix row")?;
                let values: Vec<&str> = line.split_whitespace().collect();
                if values.len() != block.cols() {
                    return Err(syntax(
                        ln,
                        format!("expected {} values, found {}", block.cols(), values.len()),
                    ));
                }
                for (dst, tok) in block.row_mut(r).iter_mut().zip(values) {
                    *dst = tok
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| syntax(ln, format!("bad value `{tok}`")))?;
                }
            }
        }
        let (ln, line) = next("end")?;
        if line != "end" {
            return Err(syntax(ln, format!("expected `end`, found `{line}`")));
        }
        if let Some((ln, line)) = lines.next() {
            return Err(syntax(ln, format!("trailing content `{line}`")));
        }
        Ok(GcnnModel { params, version })
    }
}

pub fn save_model(model: &GcnnModel, path: &Path) -> Result<(), ModelFormatError> {
    fs::write(path, model.to_text())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<GcnnModel, ModelFormatError> {
    GcnnModel::from_text(&fs::read_to_string(path)?)
}
