//! Command-line surface: a positional command, `--config`, and one flag per
//! configuration key.

use std::path::PathBuf;

use clap::Parser;

use crate::config::{Command, RunConfig};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "fracbn", version, about = "Sign-changing solutions of the fractional Brezis-Nirenberg problem on a ball")]
pub struct Cli {
    /// Command to run; overrides `command` from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub radius: Option<String>,
    #[arg(long)]
    pub lambda_frac: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long)]
    pub lambda_fracs: Option<String>,
    #[arg(long)]
    pub s_list: Option<String>,
    #[arg(long)]
    pub elements: Option<String>,
    #[arg(long)]
    pub gamma_inner: Option<String>,
    #[arg(long)]
    pub gamma_outer: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub newton_switch: Option<String>,
    #[arg(long)]
    pub restarts: Option<String>,
    /// tower, oscillatory or single_bubble.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub multistart: bool,
    #[arg(long)]
    pub dump_matrices: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Cli {
    fn flags(&self) -> Vec<(&'static str, &str)> {
        let pairs: [(&'static str, &Option<String>); 15] = [
            ("n", &self.n),
            ("s", &self.s),
            ("radius", &self.radius),
            ("lambda_frac", &self.lambda_frac),
            ("lambda_fracs", &self.lambda_fracs),
            ("s_list", &self.s_list),
            ("elements", &self.elements),
            ("gamma_inner", &self.gamma_inner),
            ("gamma_outer", &self.gamma_outer),
            ("tol", &self.tol),
            ("max_iters", &self.max_iters),
            ("newton_switch", &self.newton_switch),
            ("restarts", &self.restarts),
            ("init", &self.init),
            ("seed", &self.seed),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(c) = self.command {
            cfg.command = c;
        }
        for (k, v) in self.flags() {
            cfg.set(k, v)?;
        }
        if self.multistart {
            cfg.multistart = true;
        }
        if self.dump_matrices {
            cfg.dump_matrices = true;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        Ok(cfg)
    }

    /// Output directory to use even when the configuration is unusable.
    pub fn fallback_out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| RunConfig::default().out_dir)
    }
}
