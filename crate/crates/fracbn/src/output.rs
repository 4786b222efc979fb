//! Serializable views of core results and the CSV/JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fracbn_core::lab::{SStep, SweepRecord, TrendCheck, Verdict};
use fracbn_core::nehari::{EnergyReport, Norms};
use fracbn_core::{FormMatrices, RadialFn};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct NormsJson {
    pub gagliardo: f64,
    pub l2: f64,
    pub lcrit: f64,
}

impl From<Norms> for NormsJson {
    fn from(n: Norms) -> Self {
        NormsJson {
            gagliardo: n.gagliardo,
            l2: n.l2,
            lcrit: n.lcrit,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnergyJson {
    pub energy: f64,
    pub quotient: Option<f64>,
    pub gagliardo: f64,
    pub l2: f64,
    pub lcrit: f64,
    pub eta: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub plus: NormsJson,
    pub minus: NormsJson,
    pub c_n: Option<f64>,
    pub c_m: Option<f64>,
}

impl From<&EnergyReport> for EnergyJson {
    fn from(r: &EnergyReport) -> Self {
        EnergyJson {
            energy: r.energy,
            quotient: r.quotient,
            gagliardo: r.gagliardo,
            l2: r.l2,
            lcrit: r.lcrit,
            eta: r.eta,
            f_plus: r.f_plus,
            f_minus: r.f_minus,
            plus: r.plus.into(),
            minus: r.minus.into(),
            c_n: r.c_n_ref,
            c_m: r.c_m,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrendJson {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub verdict: &'static str,
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Skipped => "skipped",
    }
}

impl From<&TrendCheck> for TrendJson {
    fn from(t: &TrendCheck) -> Self {
        TrendJson {
            name: t.name,
            values: t.values.clone(),
            verdict: verdict_name(t.verdict),
        }
    }
}

/// One row of `sweep.csv`; converts back into a [`SweepRecord`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub lambda_frac: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub t_lambda: f64,
    pub r_lambda: f64,
    pub tau_lambda: f64,
    pub q: f64,
    pub sigma: f64,
    pub energy: f64,
    pub gagliardo: f64,
    pub l2: f64,
    pub lcrit: f64,
    pub eta: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub norm_plus: f64,
    pub l2_plus: f64,
    pub lcrit_plus: f64,
    pub norm_minus: f64,
    pub l2_minus: f64,
    pub lcrit_minus: f64,
    pub c_n: Option<f64>,
    pub sign_count: usize,
    pub origin_value: f64,
    pub boundary_ratio_max: f64,
    pub residual: f64,
    pub converged: bool,
    pub window_ok: Option<bool>,
    pub error: Option<String>,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        let e = &r.energies;
        SweepRow {
            lambda: r.lambda,
            lambda_frac: r.lambda_frac,
            m_plus: r.m_plus,
            m_minus: r.m_minus,
            t_lambda: r.t_lambda,
            r_lambda: r.r_lambda,
            tau_lambda: r.tau_lambda,
            q: r.q_ratio,
            sigma: r.sigma,
            energy: e.energy,
            gagliardo: e.gagliardo,
            l2: e.l2,
            lcrit: e.lcrit,
            eta: e.eta,
            f_plus: e.f_plus,
            f_minus: e.f_minus,
            norm_plus: e.plus.gagliardo,
            l2_plus: e.plus.l2,
            lcrit_plus: e.plus.lcrit,
            norm_minus: e.minus.gagliardo,
            l2_minus: e.minus.l2,
            lcrit_minus: e.minus.lcrit,
            c_n: e.c_n_ref,
            sign_count: r.sign_count,
            origin_value: r.origin_value,
            boundary_ratio_max: r.boundary_ratio_max,
            residual: r.residual,
            converged: r.converged,
            window_ok: r.window_ok,
            error: r.error.clone(),
        }
    }
}

impl From<&SweepRow> for SweepRecord {
    fn from(w: &SweepRow) -> Self {
        let norms = |g, l2, lc| Norms {
            gagliardo: g,
            l2,
            lcrit: lc,
        };
        SweepRecord {
            lambda: w.lambda,
            lambda_frac: w.lambda_frac,
            m_plus: w.m_plus,
            m_minus: w.m_minus,
            t_lambda: w.t_lambda,
            r_lambda: w.r_lambda,
            tau_lambda: w.tau_lambda,
            q_ratio: w.q,
            sigma: w.sigma,
            energies: EnergyReport {
                energy: w.energy,
                quotient: None,
                gagliardo: w.gagliardo,
                l2: w.l2,
                lcrit: w.lcrit,
                eta: w.eta,
                f_plus: w.f_plus,
                f_minus: w.f_minus,
                plus: norms(w.norm_plus, w.l2_plus, w.lcrit_plus),
                minus: norms(w.norm_minus, w.l2_minus, w.lcrit_minus),
                c_n_ref: w.c_n,
                c_m: None,
            },
            sign_count: w.sign_count,
            origin_value: w.origin_value,
            boundary_ratio_max: w.boundary_ratio_max,
            residual: w.residual,
            converged: w.converged,
            window_ok: w.window_ok,
            error: w.error.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SStepRow {
    pub s: f64,
    pub lambda: f64,
    pub sign_count: usize,
    pub energy: f64,
    pub normalized_energy: f64,
    pub jump: bool,
    pub converged: bool,
    pub error: Option<String>,
}

impl From<&SStep> for SStepRow {
    fn from(s: &SStep) -> Self {
        SStepRow {
            s: s.s,
            lambda: s.lambda,
            sign_count: s.sign_count,
            energy: s.report.map(|r| r.energy).unwrap_or(f64::NAN),
            normalized_energy: s.normalized_energy,
            jump: s.jump,
            converged: s.converged,
            error: s.error.clone(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let file = File::open(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let rows: std::result::Result<Vec<SweepRow>, _> = r.deserialize().collect();
    Ok(rows?)
}

#[derive(Serialize)]
struct Sample {
    r: f64,
    u: f64,
}

/// `solution.csv`: nodal values (r, u).
pub fn write_solution(path: &Path, u: &RadialFn) -> Result<()> {
    let rows: Vec<Sample> = u
        .grid
        .nodes()
        .iter()
        .zip(&u.values)
        .map(|(&r, &u)| Sample { r, u })
        .collect();
    write_rows(path, &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Row-major dense dump: a header line `N,n,s,R`, its values, then N rows.
pub fn write_matrix(path: &Path, forms: &FormMatrices, which: &str) -> Result<()> {
    let m = match which {
        "stiffness" => &forms.stiffness,
        _ => &forms.mass,
    };
    let io = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = create(path)?;
    let p = &forms.params;
    writeln!(w, "N,n,s,R").map_err(io)?;
    writeln!(w, "{},{},{},{}", m.nrows(), p.n, p.s, p.radius).map_err(io)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

#[derive(Debug, Default, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: Option<crate::config::RunConfig>,
    pub versions: Versions,
    pub wall_times: Vec<(String, f64)>,
    pub status: String,
    pub exit_code: i32,
    pub message: Option<String>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub fracbn: &'static str,
    pub rustc_target: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            fracbn: env!("CARGO_PKG_VERSION"),
            rustc_target: std::env::consts::ARCH,
        }
    }
}
