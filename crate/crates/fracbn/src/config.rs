//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma-separated.
//! Command-line flags use the same keys with `-` for `_` and are applied
//! after the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fracbn_core::solver::InitKind;
use serde::Serialize;

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    SweepLambda,
    SweepS,
    Extend,
    Constants,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepLambda => "sweep-lambda",
            Command::SweepS => "sweep-s",
            Command::Extend => "extend",
            Command::Constants => "constants",
            Command::Report => "report",
        }
    }

    fn solves(&self) -> bool {
        matches!(self, Command::Solve | Command::SweepLambda | Command::SweepS | Command::Extend)
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "solve" => Ok(Command::Solve),
            "sweep-lambda" | "sweep_lambda" => Ok(Command::SweepLambda),
            "sweep-s" | "sweep_s" => Ok(Command::SweepS),
            "extend" => Ok(Command::Extend),
            "constants" => Ok(Command::Constants),
            "report" => Ok(Command::Report),
            other => Err(format!("unknown command '{other}'")),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const KEYS: &[&str] = &[
    "command",
    "n",
    "s",
    "radius",
    "lambda_frac",
    "lambda_fracs",
    "s_list",
    "elements",
    "gamma_inner",
    "gamma_outer",
    "tol",
    "max_iters",
    "newton_switch",
    "restarts",
    "init",
    "seed",
    "multistart",
    "dump_matrices",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: u32,
    pub s: f64,
    pub radius: f64,
    pub lambda_frac: f64,
    pub lambda_fracs: Vec<f64>,
    pub s_list: Vec<f64>,
    pub elements: usize,
    pub gamma_inner: f64,
    pub gamma_outer: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub newton_switch: f64,
    pub restarts: usize,
    #[serde(serialize_with = "init_name")]
    pub init: InitKind,
    pub seed: u64,
    pub multistart: bool,
    pub dump_matrices: bool,
    pub out_dir: PathBuf,
}

fn init_name<S: serde::Serializer>(k: &InitKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(k.name())
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Solve,
            n: 7,
            s: 0.75,
            radius: 1.0,
            lambda_frac: 0.1,
            lambda_fracs: vec![0.3, 0.2, 0.1, 0.05],
            s_list: vec![0.75, 0.85, 0.95],
            elements: 256,
            gamma_inner: 4.0,
            gamma_outer: 2.0,
            tol: 1e-8,
            max_iters: 3000,
            newton_switch: 1e-3,
            restarts: 3,
            init: InitKind::Tower,
            seed: 1,
            multistart: false,
            dump_matrices: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| RunError::Validation(format!("bad value '{value}' for {key}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "command" => self.command = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "s" => self.s = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "lambda_frac" => self.lambda_frac = parse(key, value)?,
            "lambda_fracs" => self.lambda_fracs = parse_list(key, value)?,
            "s_list" => self.s_list = parse_list(key, value)?,
            "elements" => self.elements = parse(key, value)?,
            "gamma_inner" => self.gamma_inner = parse(key, value)?,
            "gamma_outer" => self.gamma_outer = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "newton_switch" => self.newton_switch = parse(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            "init" => self.init = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "multistart" => self.multistart = parse(key, value)?,
            "dump_matrices" => self.dump_matrices = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(RunError::Validation(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; all unknown keys are reported together.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut unknown = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(RunError::Validation(format!("line {}: expected key = value", lineno + 1)));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                unknown.push(key.to_string());
                continue;
            }
            self.set(key, value)?;
        }
        if !unknown.is_empty() {
            return Err(RunError::Validation(format!("unknown keys: {}", unknown.join(", "))));
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Checks module preconditions before dispatch.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunError::Validation(m));
        if self.n < 1 {
            return bad("n must be positive".into());
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("s = {} must lie in (0, 1)", self.s));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius = {} must be positive", self.radius));
        }
        if self.command.solves() {
            let orders: Vec<f64> = if self.command == Command::SweepS {
                self.s_list.clone()
            } else {
                vec![self.s]
            };
            for s in orders {
                if !(s > 0.0 && s < 1.0) {
                    return bad(format!("s = {s} must lie in (0, 1)"));
                }
                if self.n as f64 <= 6.0 * s {
                    return bad(format!(
                        "the nodal solver needs n > 6s, got n = {}, s = {s}",
                        self.n
                    ));
                }
            }
            let fracs: Vec<f64> = if self.command == Command::SweepLambda {
                self.lambda_fracs.clone()
            } else {
                vec![self.lambda_frac]
            };
            if fracs.is_empty() || fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                return bad("lambda fractions must lie in (0, 1)".into());
            }
            if self.command == Command::SweepLambda && fracs.windows(2).any(|w| w[1] >= w[0]) {
                return bad("lambda_fracs must decrease strictly".into());
            }
            if self.command == Command::SweepS && self.s_list.is_empty() {
                return bad("s_list is empty".into());
            }
            if self.elements < 16 {
                return bad(format!("elements = {} is below the minimum 16", self.elements));
            }
            if !(self.gamma_inner >= 1.0 && self.gamma_outer >= 1.0) {
                return bad("grading exponents must be >= 1".into());
            }
            if !(self.tol > 0.0) || self.max_iters == 0 {
                return bad("tol must be positive and max_iters nonzero".into());
            }
        }
        Ok(())
    }

    /// Resolved configuration in file syntax.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        line("command", self.command.name().into());
        line("n", self.n.to_string());
        line("s", self.s.to_string());
        line("radius", self.radius.to_string());
        line("lambda_frac", self.lambda_frac.to_string());
        line("lambda_fracs", list(&self.lambda_fracs));
        line("s_list", list(&self.s_list));
        line("elements", self.elements.to_string());
        line("gamma_inner", self.gamma_inner.to_string());
        line("gamma_outer", self.gamma_outer.to_string());
        line("tol", self.tol.to_string());
        line("max_iters", self.max_iters.to_string());
        line("newton_switch", self.newton_switch.to_string());
        line("restarts", self.restarts.to_string());
        line("init", self.init.name().into());
        line("seed", self.seed.to_string());
        line("multistart", self.multistart.to_string());
        line("dump_matrices", self.dump_matrices.to_string());
        line("out_dir", self.out_dir.display().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut c = RunConfig::default();
        c.apply_text("n = 9\ns = 0.6 # order\nlambda_fracs = 0.4, 0.1\ninit = oscillatory\n").unwrap();
        assert_eq!(c.n, 9);
        assert_eq!(c.lambda_fracs, vec![0.4, 0.1]);
        assert_eq!(c.init, InitKind::Oscillatory);
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_keys_listed_together() {
        let err = RunConfig::default().apply_text("foo = 1\nn = 7\nbar = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("foo") && msg.contains("bar"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn solver_precondition_checked() {
        let mut c = RunConfig::default();
        c.s = 0.9;
        c.n = 5;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("n > 6s"), "{msg}");
        c.command = Command::Constants;
        assert!(c.validate().is_ok());
    }
}
