//! Flat `key = value` model files.
//!
//! ```text
//! # Table 1 setting
//! spectrum = sigma1
//! M = 200
//! N = 200
//! radius = chi
//! seed = 7
//! ```
//!
//! `spectrum` is a builtin name or a path to a spectrum file (relative
//! paths resolve against the config file's directory).

use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub spectrum: Option<String>,
    pub phi: Option<f64>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub radius: Option<String>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    pub alpha: Option<f64>,
    /// Directory of the file, for relative spectrum paths.
    pub base: Option<PathBuf>,
}

fn value<T: std::str::FromStr>(key: &str, raw: &str, line: usize) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: invalid value `{raw}` for `{key}`")))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ConfigFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {line_no}: expected `key = value`")))?;
            let (key, val) = (key.trim(), val.trim());
            match key {
                "spectrum" => cfg.spectrum = Some(val.to_string()),
                "phi" => cfg.phi = Some(value(key, val, line_no)?),
                "M" => cfg.m = Some(value(key, val, line_no)?),
                "N" => cfg.n = Some(value(key, val, line_no)?),
                "radius" => cfg.radius = Some(val.to_string()),
                "seed" => cfg.seed = Some(value(key, val, line_no)?),
                "reps" => cfg.reps = Some(value(key, val, line_no)?),
                "workers" => cfg.workers = Some(value(key, val, line_no)?),
                "alpha" => cfg.alpha = Some(value(key, val, line_no)?),
                other => return Err(CliError::Usage(format!("config line {line_no}: unknown key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }
}
