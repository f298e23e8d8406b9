//! Run configuration: a TOML file whose values are overridden by flags.

use std::path::{Path, PathBuf};

use chandis::ksvm::InputPolicy;
use chandis::vardisc::Strategy;
use serde::{Deserialize, Serialize};

/// Every experiment knob. Absent values fall back to per-subcommand defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub no_timing: Option<bool>,

    pub channel_a: Option<String>,
    pub channel_b: Option<String>,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
    pub strategy: Option<Strategy>,
    pub p: Option<usize>,
    pub r: Option<usize>,
    pub l: Option<usize>,
    pub restarts: Option<usize>,
    pub pass: Option<String>,
    pub warm_start: Option<bool>,

    pub ansatz: Option<String>,
    pub alphas: Option<Vec<f64>>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,

    pub intervals: Option<String>,
    pub neg: Option<Vec<[f64; 2]>>,
    pub pos: Option<Vec<[f64; 2]>>,
    pub input: Option<InputPolicy>,
    pub n_copies: Option<u32>,
    pub c: Option<f64>,

    pub layers: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub diamond_restarts: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Values set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: &RunConfig) -> RunConfig {
        overlay!(
            self, flags, subcommand, seed, output_dir, no_timing, channel_a, channel_b, alpha0, alpha1, strategy,
            p, r, l, restarts, pass, warm_start, ansatz, alphas, n_train, n_test, intervals, neg, pos, input,
            n_copies, c, layers, runs, diamond_restarts
        );
        self
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
}
