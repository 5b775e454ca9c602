//! Resolved run configuration: run-level keys plus every hyperparameter.
//!
//! Precedence, lowest to highest: built-in defaults, `--config` file,
//! explicit command-line flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use busgcl::training::{parse_config_lines, Hyperparams};

use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.txt";
pub const DEFAULT_CUTOFFS: [usize; 2] = [20, 40];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// Skip the first line of the interaction file.
    pub header: bool,
    pub cutoffs: Vec<usize>,
    pub hp: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { data: None, header: false, cutoffs: DEFAULT_CUTOFFS.to_vec(), hp: Hyperparams::default() }
    }
}

pub fn parse_cutoffs(text: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.parse::<usize>() {
            Ok(n) if n > 0 => out.push(n),
            _ => return Err(CliError::Usage(format!("invalid cutoff `{part}` (expected positive integers like 20,40)"))),
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("at least one cutoff is required".into()));
    }
    Ok(out)
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    value.parse().map_err(|_| CliError::Usage(format!("{key}: expected true or false, got `{value}`")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "header" => self.header = parse_bool(key, value)?,
            "cutoffs" => self.cutoffs = parse_cutoffs(value)?,
            _ => self.hp.set(key, value).map_err(CliError::from_config)?,
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (key, value) in parse_config_lines(text).map_err(CliError::from_config)? {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| busgcl::Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.data {
            writeln!(out, "data = {}", d.display()).unwrap();
        }
        writeln!(out, "header = {}", self.header).unwrap();
        let cutoffs: Vec<String> = self.cutoffs.iter().map(|n| n.to_string()).collect();
        writeln!(out, "cutoffs = {}", cutoffs.join(",")).unwrap();
        out.push_str(&self.hp.to_config_text());
        out
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, self.to_text()).map_err(|e| busgcl::Error::io(&path, e))?;
        Ok(())
    }

    pub fn data_path(&self) -> CliResult<&Path> {
        self.data.as_deref().ok_or_else(|| CliError::Usage("no dataset given (use --data or `data = ...` in the config)".into()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.hp.validate().map_err(CliError::from_config)
    }
}
