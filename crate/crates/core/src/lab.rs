//! Sweeps in λ and s and the asymptotic observables extracted from them.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::FormMatrices;
use crate::constants::Params;
use crate::error::{bail, Error, Result};
use crate::grid::RadialFn;
use crate::nehari::EnergyReport;
use crate::profile::theory_mu;
use crate::solver::{level_of, make_initial, minimize, sign_changes, sobolev_lambda, InitKind, Levels, NodalSolution, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub lambda: f64,
    pub lambda_frac: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    /// Last argmax of u⁺.
    pub t_lambda: f64,
    /// First node; NaN when u does not change sign.
    pub r_lambda: f64,
    /// Last argmin of u.
    pub tau_lambda: f64,
    /// M₊ / M₋
    pub q_ratio: f64,
    /// M₊^β r_λ
    pub sigma: f64,
    pub energies: EnergyReport,
    pub sign_count: usize,
    pub origin_value: f64,
    /// max |u(r)| / (R - r)^s over the outer fifth of the ball.
    pub boundary_ratio_max: f64,
    pub residual: f64,
    pub converged: bool,
    pub window_ok: Option<bool>,
    /// Solver failure message for flagged records.
    pub error: Option<String>,
}

/// Extracts the observables of one solution; argmax/argmin ties go to the
/// largest radius.
pub fn record_of(sol: &NodalSolution, params: &Params, lambda_frac: f64, zero_tol: f64) -> SweepRecord {
    let u = &sol.u;
    let nodes = u.grid.nodes();
    let (mut m_plus, mut t_lambda) = (0.0, 0.0);
    let (mut m_minus, mut tau_lambda) = (0.0, 0.0);
    for (&r, &v) in nodes.iter().zip(&u.values) {
        if v >= m_plus && v > 0.0 {
            m_plus = v;
            t_lambda = r;
        }
        if -v >= m_minus && v < 0.0 {
            m_minus = -v;
            tau_lambda = r;
        }
    }
    let (sign_count, crossings) = sign_changes(u, zero_tol);
    let r_lambda = crossings.first().copied().unwrap_or(f64::NAN);
    let radius = params.radius;
    let boundary_ratio_max = nodes
        .iter()
        .zip(&u.values)
        .filter(|(&r, _)| r < radius && radius - r <= 0.2 * radius)
        .fold(0.0f64, |m, (&r, &v)| m.max(v.abs() / (radius - r).powf(params.s)));
    SweepRecord {
        lambda: params.lambda,
        lambda_frac,
        m_plus,
        m_minus,
        t_lambda,
        r_lambda,
        tau_lambda,
        q_ratio: m_plus / m_minus,
        sigma: m_plus.powf(params.beta()) * r_lambda,
        energies: sol.report,
        sign_count,
        origin_value: u.values[0],
        boundary_ratio_max,
        residual: sol.residual_norm,
        converged: sol.converged,
        window_ok: sol.window_ok,
        error: None,
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub record: SweepRecord,
    pub solution: Option<NodalSolution>,
}

fn failed_record(params: &Params, lambda_frac: f64, err: &Error) -> SweepRecord {
    let nan = f64::NAN;
    SweepRecord {
        lambda: params.lambda,
        lambda_frac,
        m_plus: nan,
        m_minus: nan,
        t_lambda: nan,
        r_lambda: nan,
        tau_lambda: nan,
        q_ratio: nan,
        sigma: nan,
        energies: EnergyReport {
            energy: nan,
            quotient: None,
            gagliardo: nan,
            l2: nan,
            lcrit: nan,
            eta: nan,
            f_plus: nan,
            f_minus: nan,
            plus: Default::default(),
            minus: Default::default(),
            c_n_ref: None,
            c_m: None,
        },
        sign_count: 0,
        origin_value: nan,
        boundary_ratio_max: nan,
        residual: nan,
        converged: false,
        window_ok: None,
        error: Some(alloc::format!("{err}")),
    }
}

/// Reference levels at one λ: c_N from the discrete S_{s,λ}, and the bubble
/// level from the supplied S_s.
pub fn levels_at(params: &Params, forms: &FormMatrices, s_sobolev: f64) -> Result<Levels> {
    let sl = sobolev_lambda(params, forms, 1e-13, 20_000)?;
    Ok(Levels {
        c_n: level_of(params, sl.value),
        bubble: level_of(params, s_sobolev),
    })
}

/// λ-sweep over decreasing fractions of λ₁, warm-started from the previous
/// solution (the first solve starts from `init`, or a tower).
pub fn sweep_lambda(
    base: &Params,
    forms: &FormMatrices,
    fracs: &[f64],
    opts: &SolverOptions,
    s_sobolev: Option<f64>,
    init: Option<RadialFn>,
) -> Result<Vec<SweepPoint>> {
    base.require_nodal_regime()?;
    if fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        bail!(Parameter, "lambda fractions must lie in (0, 1)");
    }
    if fracs.windows(2).any(|w| !(w[1] < w[0])) {
        bail!(Parameter, "lambda fractions must decrease strictly");
    }
    let mut start = init;
    let mut out = Vec::with_capacity(fracs.len());
    for &frac in fracs {
        let params = base.with_lambda(frac * forms.lambda1);
        let mut o = *opts;
        if let Some(ss) = s_sobolev {
            o.levels = levels_at(&params, forms, ss).ok();
        }
        let guess = match &start {
            Some(u) => u.clone(),
            None => make_initial(InitKind::Tower, &params, forms)?,
        };
        match minimize(&params, forms, &guess, &o) {
            Ok(sol) => {
                let record = record_of(&sol, &params, frac, o.zero_tol);
                if sol.converged {
                    start = Some(sol.u.clone());
                }
                out.push(SweepPoint {
                    record,
                    solution: Some(sol),
                });
            }
            Err(e) => out.push(SweepPoint {
                record: failed_record(&params, frac, &e),
                solution: None,
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// Not monotone; limits hold only along subsequences, so this is not a
    /// refutation.
    Inconclusive,
    /// Too few usable points.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub direction: Direction,
    pub verdict: Verdict,
}

pub const MIN_TREND_POINTS: usize = 3;

pub fn trend(name: &'static str, values: Vec<f64>, direction: Direction) -> TrendCheck {
    let verdict = if values.len() < MIN_TREND_POINTS || values.iter().any(|v| !v.is_finite()) {
        Verdict::Skipped
    } else {
        let ok = values.windows(2).all(|w| match direction {
            Direction::Increasing => w[1] > w[0],
            Direction::Decreasing => w[1] < w[0],
        });
        if ok {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        }
    };
    TrendCheck {
        name,
        values,
        direction,
        verdict,
    }
}

/// Records that enter trend checks: converged with exactly one sign change.
pub fn one_node_records(records: &[SweepRecord]) -> Vec<&SweepRecord> {
    records.iter().filter(|r| r.converged && r.sign_count == 1).collect()
}

/// M± ↑, r_λ and τ_λ ↓, Q and σ ↑, η ↓ as λ decreases.
pub fn sweep_trends(records: &[SweepRecord]) -> Vec<TrendCheck> {
    use Direction::*;
    let rs = one_node_records(records);
    let col = |f: fn(&SweepRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
    alloc::vec![
        trend("M_plus", col(|r| r.m_plus), Increasing),
        trend("M_minus", col(|r| r.m_minus), Increasing),
        trend("r_lambda", col(|r| r.r_lambda), Decreasing),
        trend("tau_lambda", col(|r| r.tau_lambda), Decreasing),
        trend("Q", col(|r| r.q_ratio), Increasing),
        trend("sigma", col(|r| r.sigma), Increasing),
        trend("eta", col(|r| r.energies.eta), Decreasing),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLimits {
    /// S_s^{n/2s}
    pub target: f64,
    pub lambdas: Vec<f64>,
    pub checks: Vec<TrendCheck>,
}

/// Gaps of the part norms to S_s^{n/2s}, λ|u±|²₂, η, and the nodal level to
/// 2(s/n)S_s^{n/2s}, each expected to decrease along the sweep.
pub fn energy_limits_check(records: &[SweepRecord], params: &Params, s_sobolev: f64) -> EnergyLimits {
    use Direction::Decreasing;
    let target = s_sobolev.powf(params.nf() / (2.0 * params.s));
    let two_bubbles = 2.0 * level_of(params, s_sobolev);
    let rs = one_node_records(records);
    let col = |f: &dyn Fn(&SweepRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
    let gap = |v: f64| (v - target).abs();
    EnergyLimits {
        target,
        lambdas: col(&|r| r.lambda),
        checks: alloc::vec![
            trend("gap_norm_plus", col(&|r| gap(r.energies.plus.gagliardo)), Decreasing),
            trend("gap_norm_minus", col(&|r| gap(r.energies.minus.gagliardo)), Decreasing),
            trend("gap_lcrit_plus", col(&|r| gap(r.energies.plus.lcrit)), Decreasing),
            trend("gap_lcrit_minus", col(&|r| gap(r.energies.minus.lcrit)), Decreasing),
            trend("lambda_l2_plus", col(&|r| r.lambda * r.energies.plus.l2), Decreasing),
            trend("lambda_l2_minus", col(&|r| r.lambda * r.energies.minus.l2), Decreasing),
            trend("eta", col(&|r| r.energies.eta), Decreasing),
            trend("gap_c_m", col(&|r| (r.energies.energy - two_bubbles).abs()), Decreasing),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// The compact reaches beyond M₊^β R.
    pub truncated: bool,
}

/// ũ(x) = u⁺(x / M₊^β) / M₊ sampled at `points` uniform radii on [0, extent].
pub fn rescale_positive(record: &SweepRecord, u: &RadialFn, params: &Params, extent: f64, points: usize) -> Result<Rescaled> {
    if !(record.m_plus > 0.0) || record.sign_count == 0 {
        bail!(Domain, "rescaling needs a nodal record with a positive part");
    }
    if points < 2 || !(extent > 0.0) {
        bail!(Config, "rescaling needs at least two points on a positive extent");
    }
    let scale = record.m_plus.powf(params.beta());
    let radii: Vec<f64> = (0..points).map(|k| extent * k as f64 / (points - 1) as f64).collect();
    let values = radii.iter().map(|&x| u.eval(x / scale).max(0.0) / record.m_plus).collect();
    Ok(Rescaled {
        radii,
        values,
        truncated: extent > scale * params.radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleFit {
    pub mu_hat: f64,
    pub sup_error: f64,
    pub theory_mu: f64,
    pub converged: bool,
}

/// (1 + (r/μ)²)^{-(n-2s)/2}, the limit profile normalized to 1 at 0.
pub fn normalized_bubble(params: &Params, mu: f64, r: f64) -> f64 {
    let x = r / mu;
    (1.0 + x * x).powf(-0.5 * params.bubble_decay())
}

/// Least-squares fit of μ in the normalized bubble, by golden-section search
/// in ln μ after a coarse scan.
pub fn bubble_fit(rescaled: &Rescaled, params: &Params, s_sobolev: f64, bubble_mass: f64) -> Result<BubbleFit> {
    let peak = rescaled.values.iter().fold(0.0f64, |m, v| m.max(*v));
    if (peak - 1.0).abs() > 1e-9 {
        bail!(Domain, "bubble fit needs input with maximum 1 (got {peak})");
    }
    let mu_th = theory_mu(params, s_sobolev, bubble_mass);
    let cost = |ln_mu: f64| {
        let mu = ln_mu.exp();
        rescaled
            .radii
            .iter()
            .zip(&rescaled.values)
            .map(|(&r, &v)| {
                let d = v - normalized_bubble(params, mu, r);
                d * d
            })
            .sum::<f64>()
    };
    let (lo, hi) = ((mu_th * 1e-3).ln(), (mu_th * 1e3).ln());
    let steps = 240;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|k| lo + h * k as f64)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap_or(lo);
    let (mut a, mut b) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut iters = 0;
    while b - a > 1e-12 && iters < 200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        iters += 1;
    }
    let mu_hat = (0.5 * (a + b)).exp();
    let sup_error = rescaled
        .radii
        .iter()
        .zip(&rescaled.values)
        .fold(0.0f64, |m, (&r, &v)| m.max((v - normalized_bubble(params, mu_hat, r)).abs()));
    let interior = best > lo + h && best < hi - h;
    Ok(BubbleFit {
        mu_hat,
        sup_error,
        theory_mu: mu_th,
        converged: interior && b - a <= 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginReport {
    pub values: Vec<f64>,
    pub min_abs: f64,
    pub max_abs: f64,
    /// |u(0)| decreases strictly and ends below half its first value.
    pub decaying: bool,
    /// min |u(0)| > 0 with no decaying trend; `None` for a single record.
    pub nonvanishing: Option<bool>,
    /// min |u(0)| > 0.5 · max |u(0)|; `None` for a single record.
    pub proxy: Option<bool>,
}

pub fn origin_check(records: &[SweepRecord]) -> OriginReport {
    let values: Vec<f64> = records.iter().filter(|r| r.converged).map(|r| r.origin_value).collect();
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let min_abs = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_abs = abs.iter().copied().fold(0.0, f64::max);
    let decaying = abs.len() >= 2 && abs.windows(2).all(|w| w[1] < w[0]) && abs[abs.len() - 1] < 0.5 * abs[0];
    let many = abs.len() >= 2;
    OriginReport {
        min_abs,
        max_abs,
        decaying,
        nonvanishing: many.then_some(min_abs > 0.0 && !decaying),
        proxy: many.then_some(min_abs > 0.5 * max_abs),
        values,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroStructure {
    pub ok: bool,
    /// Radii in (0, R) where |u| is negligible away from every node.
    pub stray: Vec<f64>,
    pub nodes: Vec<f64>,
    pub origin_value: f64,
}

/// Negligible values of u inside (0, R) must sit within one mesh cell of a
/// sign change. Smallness is judged on u/δ^s with δ = (R - r)/R, since u
/// vanishes like δ^s at the boundary.
pub fn zero_structure_check(u: &RadialFn, s: f64, zero_tol: f64) -> ZeroStructure {
    let (_, nodes) = sign_changes(u, zero_tol);
    let grid = u.grid.nodes();
    let radius = u.grid.radius();
    let cut = zero_tol * u.sup_norm();
    let mut stray = Vec::new();
    for i in 1..grid.len() - 1 {
        let delta = ((radius - grid[i]) / radius).min(1.0);
        if u.values[i].abs() > cut * delta.powf(s) {
            continue;
        }
        let cell = (grid[i] - grid[i - 1]).max(grid[i + 1] - grid[i]);
        if !nodes.iter().any(|z| (z - grid[i]).abs() <= cell) {
            stray.push(grid[i]);
        }
    }
    ZeroStructure {
        ok: stray.is_empty(),
        stray,
        nodes,
        origin_value: u.values[0],
    }
}

#[derive(Debug, Clone)]
pub struct SStep {
    pub s: f64,
    pub lambda: f64,
    pub sign_count: usize,
    pub report: Option<EnergyReport>,
    pub converged: bool,
    /// I / ((s/n) S_s^{n/2s}); the bubble level moves with s, so continuity
    /// is judged on this ratio.
    pub normalized_energy: f64,
    /// Normalized energy jumped by > 10% from the previous step.
    pub jump: bool,
    pub error: Option<String>,
    pub solution: Option<RadialFn>,
}

/// Continuation in s at fixed λ/λ₁(s). `setup` returns the forms and S_s for
/// each s; the previous solution is interpolated onto the next grid.
pub fn sweep_s<F>(base: &Params, s_list: &[f64], lambda_frac: f64, opts: &SolverOptions, mut setup: F) -> Result<Vec<SStep>>
where
    F: FnMut(&Params) -> Result<(FormMatrices, f64)>,
{
    if !(lambda_frac > 0.0 && lambda_frac < 1.0) {
        bail!(Parameter, "lambda fraction must lie in (0, 1)");
    }
    let mut out: Vec<SStep> = Vec::with_capacity(s_list.len());
    let mut prev: Option<RadialFn> = None;
    for &s in s_list {
        let p0 = base.with_s(s);
        p0.require_nodal_regime()?;
        let (forms, s_sob) = setup(&p0)?;
        let params = p0.with_lambda(lambda_frac * forms.lambda1);
        let bubble = level_of(&params, s_sob);
        let guess = match &prev {
            Some(u) => RadialFn::from_fn(forms.grid.clone(), |r| u.eval(r)),
            None => make_initial(InitKind::Tower, &params, &forms)?,
        };
        let result = minimize(&params, &forms, &guess, opts);
        let step = match result {
            Ok(sol) => {
                let normalized = sol.report.energy / bubble;
                let jump = out
                    .last()
                    .map(|p| p.normalized_energy.is_finite() && (normalized - p.normalized_energy).abs() > 0.1 * p.normalized_energy)
                    .unwrap_or(false);
                if sol.converged {
                    prev = Some(sol.u.clone());
                }
                SStep {
                    s,
                    lambda: params.lambda,
                    sign_count: sign_changes(&sol.u, opts.zero_tol).0,
                    report: Some(sol.report),
                    converged: sol.converged,
                    normalized_energy: normalized,
                    jump,
                    error: None,
                    solution: Some(sol.u),
                }
            }
            Err(e) => SStep {
                s,
                lambda: params.lambda,
                sign_count: 0,
                report: None,
                converged: false,
                normalized_energy: f64::NAN,
                jump: false,
                error: Some(alloc::format!("{e}")),
                solution: None,
            },
        };
        out.push(step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_verdicts() {
        assert_eq!(trend("x", alloc::vec![1.0, 2.0, 3.0], Direction::Increasing).verdict, Verdict::Pass);
        assert_eq!(trend("x", alloc::vec![1.0, 3.0, 2.0], Direction::Increasing).verdict, Verdict::Inconclusive);
        assert_eq!(trend("x", alloc::vec![1.0, 2.0], Direction::Increasing).verdict, Verdict::Skipped);
        assert_eq!(trend("x", alloc::vec![3.0, 2.0, f64::NAN], Direction::Decreasing).verdict, Verdict::Skipped);
    }
}
