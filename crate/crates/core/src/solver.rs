//! Constrained minimization on the (nodal) Nehari set.
//!
//! Each step takes the stiffness-preconditioned gradient g = K⁻¹ ∇I(u),
//! backtracks on the energy of the re-projected point, and once the
//! residual is small hands over to Newton on the full Euler-Lagrange system.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::FormMatrices;
use crate::constants::{k_strauss, Params};
use crate::error::{bail, Error, Result};
use crate::grid::RadialFn;
use crate::nehari::{energy, nehari_project, nodal_nehari_project, EnergyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Tower,
    Oscillatory,
    SingleBubble,
}

impl core::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tower" => Ok(InitKind::Tower),
            "oscillatory" => Ok(InitKind::Oscillatory),
            "single_bubble" | "single-bubble" => Ok(InitKind::SingleBubble),
            other => Err(Error::Config(alloc::format!("unknown init kind '{other}'"))),
        }
    }
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Tower => "tower",
            InitKind::Oscillatory => "oscillatory",
            InitKind::SingleBubble => "single_bubble",
        }
    }
}

/// Reference levels for the energy window 2c_N < I < c_N + (s/n) S_s^{n/2s}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levels {
    /// (s/n) S_{s,λ}^{n/2s}
    pub c_n: f64,
    /// (s/n) S_s^{n/2s}
    pub bubble: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Preconditioned residual target, relative to ‖u‖_s.
    pub tol: f64,
    pub max_iters: usize,
    /// Residual below which Newton on the full system is attempted.
    pub newton_switch: f64,
    pub zero_tol: f64,
    pub seed: u64,
    /// Re-seeded restarts after the iterate collapses to one sign.
    pub restarts: usize,
    pub levels: Option<Levels>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iters: 3000,
            newton_switch: 1e-3,
            zero_tol: 1e-10,
            seed: 1,
            restarts: 3,
            levels: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodalSolution {
    pub u: RadialFn,
    pub report: EnergyReport,
    /// Sign-change radii.
    pub nodes: Vec<f64>,
    /// ‖K⁻¹∇I(u)‖_s / ‖u‖_s
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `Some(inside)` when reference levels were supplied.
    pub window_ok: Option<bool>,
    /// sup (r^{(n-2s)/2}|u|)² / (K_{n,s} ‖u‖²_s), for s > 1/2.
    pub strauss_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

/// Counts sign changes between consecutive non-negligible nodal values and
/// returns the interpolated crossing radii.
pub fn sign_changes(u: &RadialFn, zero_tol: f64) -> (usize, Vec<f64>) {
    let cut = zero_tol * u.sup_norm();
    let nodes = u.grid.nodes();
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (i, &v) in u.values.iter().enumerate() {
        if v.abs() <= cut {
            continue;
        }
        if let Some(j) = last {
            let w = u.values[j];
            if (w > 0.0) != (v > 0.0) {
                // crossing on the segment between the two significant nodes
                let t = w / (w - v);
                out.push(nodes[j] + t * (nodes[i] - nodes[j]));
            }
        }
        last = Some(i);
    }
    (out.len(), out)
}

/// (1 + (r/μ)²)^{-(n-2s)/2}
fn unit_bubble(params: &Params, mu: f64, r: f64) -> f64 {
    let x = r / mu;
    (1.0 + x * x).powf(-0.5 * params.bubble_decay())
}

fn cutoff(params: &Params, r: f64) -> f64 {
    let x = r / params.radius;
    if x >= 1.0 {
        0.0
    } else {
        (1.0 - x * x).powf(params.s)
    }
}

/// Initial guesses. The tower is projected onto the nodal Nehari set, the
/// other two are returned as constructed.
pub fn make_initial(kind: InitKind, params: &Params, forms: &FormMatrices) -> Result<RadialFn> {
    initial_with(kind, params, forms, 0.05, 0.4, 0.6)
}

fn initial_with(kind: InitKind, params: &Params, forms: &FormMatrices, narrow: f64, wide: f64, depth: f64) -> Result<RadialFn> {
    let grid = forms.grid.clone();
    let big_r = params.radius;
    match kind {
        InitKind::Tower => {
            let u = RadialFn::from_fn(grid, |r| {
                (unit_bubble(params, narrow * big_r, r) - depth * unit_bubble(params, wide * big_r, r)) * cutoff(params, r)
            });
            Ok(nodal_nehari_project(&u, params, forms)?.u)
        }
        InitKind::Oscillatory => Ok(RadialFn::from_fn(grid, |r| {
            (1.5 * core::f64::consts::PI * r / big_r).cos()
        })),
        InitKind::SingleBubble => Ok(RadialFn::from_fn(grid, |r| {
            unit_bubble(params, narrow * big_r, r) * cutoff(params, r)
        })),
    }
}

fn seeded_tower(params: &Params, forms: &FormMatrices, rng: &mut ChaCha8Rng) -> Result<RadialFn> {
    let narrow = 0.05 * rng.gen_range(-0.7f64..0.7).exp();
    let wide = 0.4 * rng.gen_range(-0.4f64..0.4).exp();
    let depth = rng.gen_range(0.3..0.8);
    initial_with(InitKind::Tower, params, forms, narrow, wide, depth)
}

/// The three starts used by multistart runs: tower, oscillatory, and a
/// seeded tower variant.
pub fn multistart_inits(params: &Params, forms: &FormMatrices, seed: u64) -> Result<Vec<RadialFn>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(alloc::vec![
        make_initial(InitKind::Tower, params, forms)?,
        make_initial(InitKind::Oscillatory, params, forms)?,
        seeded_tower(params, forms, &mut rng)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Constraint {
    Nehari,
    Nodal,
}

fn project(c: Constraint, u: &RadialFn, params: &Params, forms: &FormMatrices) -> Result<RadialFn> {
    match c {
        Constraint::Nehari => Ok(nehari_project(u, params, forms)?.1),
        Constraint::Nodal => Ok(nodal_nehari_project(u, params, forms)?.u),
    }
}

/// ∇I on the unknowns: K u - λ ∇(½|u|²₂) - ∇(|u|^q_q / q).
pub fn gradient(u: &RadialFn, params: &Params, forms: &FormMatrices) -> Vec<f64> {
    let q = params.crit_exp();
    let mut g = forms.stiffness_apply(u.unknowns());
    let g2 = forms.lp_grad(&u.values, 2.0);
    let gq = forms.lp_grad(&u.values, q);
    for ((gi, a), b) in g.iter_mut().zip(&g2).zip(&gq) {
        *gi -= params.lambda * a + b;
    }
    g
}

/// Preconditioned residual ‖K⁻¹∇I‖_s / ‖u‖_s and the direction K⁻¹∇I.
pub fn preconditioned_residual(u: &RadialFn, params: &Params, forms: &FormMatrices) -> (f64, Vec<f64>) {
    let grad = gradient(u, params, forms);
    let dir = forms.stiffness_solve(&grad);
    let num: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let den = forms.gagliardo_norm(u);
    ((num.max(0.0) / den).sqrt(), dir)
}

pub fn energy_value(u: &RadialFn, params: &Params, forms: &FormMatrices) -> f64 {
    let q = params.crit_exp();
    let quad = forms.gagliardo_norm(u) - params.lambda * forms.lp_pow(&u.values, 2.0);
    0.5 * quad - forms.lp_pow(&u.values, q) / q
}

/// Hessian of I on the unknowns.
pub fn hessian(u: &RadialFn, params: &Params, forms: &FormMatrices) -> DMatrix<f64> {
    let q = params.crit_exp();
    let n = forms.unknowns();
    let mut jac: DMatrix<f64> = forms.stiffness.clone();
    let (d2, o2) = forms.lp_hessian(&u.values, 2.0);
    let (dq, oq) = forms.lp_hessian(&u.values, q);
    for i in 0..n {
        jac[(i, i)] -= params.lambda * d2[i] + dq[i];
        if i + 1 < n {
            let o = params.lambda * o2[i] + oq[i];
            jac[(i, i + 1)] -= o;
            jac[(i + 1, i)] -= o;
        }
    }
    jac
}

/// Newton direction for ∇I(u) = 0 with the exact Jacobian.
fn newton_direction(u: &RadialFn, params: &Params, forms: &FormMatrices) -> Option<Vec<f64>> {
    let grad = gradient(u, params, forms);
    let delta = hessian(u, params, forms).lu().solve(&DVector::from_column_slice(&grad))?;
    if delta.iter().all(|v| v.is_finite()) {
        Some(delta.as_slice().to_vec())
    } else {
        None
    }
}

struct Descent {
    u: RadialFn,
    residual: f64,
    iterations: usize,
    warnings: Vec<String>,
}

fn descend(c: Constraint, init: &RadialFn, params: &Params, forms: &FormMatrices, opts: &SolverOptions) -> Result<Descent> {
    let mut u = project(c, init, params, forms)?;
    let mut e = energy_value(&u, params, forms);
    let mut tau = 0.5;
    let mut warnings = Vec::new();
    let mut switch = opts.newton_switch;
    let (mut res, mut dir) = preconditioned_residual(&u, params, forms);
    let mut it = 0;
    while it < opts.max_iters && res > opts.tol {
        it += 1;
        if res < switch {
            if let Some(polished) = polish(c, &u, params, forms, opts) {
                let (r2, d2) = preconditioned_residual(&polished, params, forms);
                if r2 < res && same_sign_pattern(&u, &polished, opts.zero_tol) {
                    u = polished;
                    res = r2;
                    dir = d2;
                    e = energy_value(&u, params, forms);
                    continue;
                }
            }
            // Newton left the basin; keep descending and try again later
            switch *= 0.1;
        }
        // Armijo on the re-projected point; K-norm² of the step direction
        let slope = res * res * forms.gagliardo_norm(&u);
        let mut accepted = false;
        while tau > 1e-12 {
            let trial: Vec<f64> = u.unknowns().iter().zip(&dir).map(|(a, d)| a - tau * d).collect();
            let trial = RadialFn::from_unknowns(u.grid.clone(), &trial);
            match project(c, &trial, params, forms) {
                Ok(v) => {
                    let ev = energy_value(&v, params, forms);
                    if ev <= e - 1e-4 * tau * slope {
                        debug_assert!(ev <= e);
                        u = v;
                        e = ev;
                        accepted = true;
                        break;
                    }
                }
                Err(Error::Domain(_)) | Err(Error::Projection(_)) => {}
                Err(other) => return Err(other),
            }
            tau *= 0.5;
        }
        if !accepted {
            warnings.push(alloc::format!("line search stalled at iteration {it}"));
            break;
        }
        tau = (tau * 2.0).min(1.0);
        (res, dir) = preconditioned_residual(&u, params, forms);
    }
    Ok(Descent {
        u,
        residual: res,
        iterations: it,
        warnings,
    })
}

fn same_sign_pattern(a: &RadialFn, b: &RadialFn, zero_tol: f64) -> bool {
    sign_changes(a, zero_tol).0 == sign_changes(b, zero_tol).0
}

/// Damped Newton on the Euler-Lagrange system (merit: the preconditioned
/// residual) followed by a final projection; `None` if no step helps.
fn polish(c: Constraint, u: &RadialFn, params: &Params, forms: &FormMatrices, opts: &SolverOptions) -> Option<RadialFn> {
    let mut v = u.clone();
    let mut res = preconditioned_residual(&v, params, forms).0;
    let mut improved = false;
    for _ in 0..60 {
        let delta = newton_direction(&v, params, forms)?;
        let mut t = 1.0;
        let mut step = None;
        while t > 1e-4 {
            let next: Vec<f64> = v.unknowns().iter().zip(&delta).map(|(a, d)| a - t * d).collect();
            let next = RadialFn::from_unknowns(v.grid.clone(), &next);
            let r = preconditioned_residual(&next, params, forms).0;
            if r < (1.0 - 1e-4 * t) * res {
                step = Some((next, r));
                break;
            }
            t *= 0.5;
        }
        let Some((next, r)) = step else { break };
        v = next;
        res = r;
        improved = true;
        if res < 0.01 * opts.tol {
            break;
        }
    }
    if !improved {
        return None;
    }
    project(c, &v, params, forms).ok()
}

fn strauss_ratio(u: &RadialFn, params: &Params, gagliardo: f64) -> Option<f64> {
    let k = k_strauss(params.n, params.s).ok()?;
    let e = 0.5 * params.bubble_decay();
    let sup = u
        .grid
        .nodes()
        .iter()
        .zip(&u.values)
        .fold(0.0f64, |m, (r, v)| m.max(r.powf(e) * v.abs()));
    Some(sup * sup / (k * gagliardo))
}

fn finish(c: Constraint, d: Descent, params: &Params, forms: &FormMatrices, opts: &SolverOptions) -> Result<NodalSolution> {
    let mut report = energy(&d.u, params, forms)?;
    let mut warnings = d.warnings;
    let window_ok = opts.levels.map(|lv| {
        report = report.with_reference(lv.c_n);
        match c {
            Constraint::Nodal => report.energy > 2.0 * lv.c_n && report.energy < lv.c_n + lv.bubble,
            Constraint::Nehari => report.energy <= lv.bubble,
        }
    });
    if window_ok == Some(false) {
        warnings.push(alloc::format!("energy {} outside the expected window", report.energy));
    }
    let (_, nodes) = sign_changes(&d.u, opts.zero_tol);
    Ok(NodalSolution {
        strauss_ratio: strauss_ratio(&d.u, params, report.gagliardo),
        nodes,
        report,
        residual_norm: d.residual,
        iterations: d.iterations,
        converged: d.residual <= opts.tol,
        window_ok,
        warnings,
        u: d.u,
    })
}

fn check_setup(params: &Params, forms: &FormMatrices) -> Result<()> {
    if params.n != forms.params.n || params.s != forms.params.s || params.radius != forms.params.radius {
        bail!(Config, "params do not match the assembled forms");
    }
    if !(params.lambda > 0.0 && params.lambda < forms.lambda1) {
        bail!(
            Parameter,
            "lambda = {} must lie in (0, {}) (first eigenvalue)",
            params.lambda,
            forms.lambda1
        );
    }
    Ok(())
}

/// Least-energy search on the nodal Nehari set from `init`.
pub fn minimize(params: &Params, forms: &FormMatrices, init: &RadialFn, opts: &SolverOptions) -> Result<NodalSolution> {
    params.require_nodal_regime()?;
    check_setup(params, forms)?;
    if init.is_zero() {
        bail!(Domain, "initial guess is identically zero");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = init.clone();
    for attempt in 0..=opts.restarts {
        match descend(Constraint::Nodal, &start, params, forms, opts) {
            Ok(d) => {
                let mut sol = finish(Constraint::Nodal, d, params, forms, opts)?;
                if attempt > 0 {
                    sol.warnings.push(alloc::format!("restarted {attempt} time(s) after collapse"));
                }
                return Ok(sol);
            }
            Err(Error::Domain(_)) | Err(Error::Projection(_)) if attempt < opts.restarts => {
                start = seeded_tower(params, forms, &mut rng)?;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("restart loop returns on its last attempt")
}

/// Minimization on the Nehari set: converges to a positive solution from a
/// one-signed start.
pub fn minimize_positive(params: &Params, forms: &FormMatrices, init: &RadialFn, opts: &SolverOptions) -> Result<NodalSolution> {
    check_setup(params, forms)?;
    if init.is_zero() {
        bail!(Domain, "initial guess is identically zero");
    }
    let d = descend(Constraint::Nehari, init, params, forms, opts)?;
    finish(Constraint::Nehari, d, params, forms, opts)
}

/// Lowest-energy converged solution among several runs.
pub fn pick_best(runs: Vec<Result<NodalSolution>>) -> Result<NodalSolution> {
    let mut best: Option<NodalSolution> = None;
    let mut last_err = None;
    for r in runs {
        match r {
            Ok(sol) => {
                let better = match &best {
                    None => true,
                    Some(b) => (sol.converged && !b.converged) || (sol.converged == b.converged && sol.report.energy < b.report.energy),
                };
                if better {
                    best = Some(sol);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Config("no runs".into())),
    }
}

/// Sequential multistart over [`multistart_inits`].
pub fn multistart(params: &Params, forms: &FormMatrices, opts: &SolverOptions) -> Result<NodalSolution> {
    let inits = multistart_inits(params, forms, opts.seed)?;
    pick_best(inits.iter().map(|u| minimize(params, forms, u, opts)).collect())
}

#[derive(Debug, Clone)]
pub struct SobolevLambda {
    /// min J over the discrete space.
    pub value: f64,
    /// Positive minimizer normalized to |v|_{2*} = 1.
    pub minimizer: RadialFn,
    pub iterations: usize,
}

/// S_{s,λ} by nonlinear inverse iteration v ← (K - λM)⁻¹ M v^{q-1},
/// normalized in L^{2*}. Independent of the Nehari descent.
pub fn sobolev_lambda(params: &Params, forms: &FormMatrices, tol: f64, max_iters: usize) -> Result<SobolevLambda> {
    check_setup(params, forms)?;
    let q = params.crit_exp();
    let n = forms.unknowns();
    let a = &forms.stiffness - &forms.mass * params.lambda;
    let chol = match a.clone().cholesky() {
        Some(c) => c,
        None => bail!(Parameter, "K - lambda M is not positive definite"),
    };
    let start = make_initial(InitKind::SingleBubble, params, forms)?;
    let mut v = start.values.clone();
    let quotient = |v: &[f64]| -> f64 {
        let x = DVector::from_column_slice(&v[..n]);
        let num = x.dot(&(&a * &x));
        num / forms.lp_pow(v, q).powf(2.0 / q)
    };
    let mut j = quotient(&v);
    for it in 1..=max_iters {
        let rhs = forms.lp_grad(&v, q);
        let w = chol.solve(&DVector::from_column_slice(&rhs));
        v[..n].copy_from_slice(w.as_slice());
        let norm = forms.lp_pow(&v, q).powf(1.0 / q);
        v.iter_mut().for_each(|x| *x /= norm);
        let jn = quotient(&v);
        let change = (j - jn).abs() / jn;
        j = jn;
        if change < tol {
            return Ok(SobolevLambda {
                value: j,
                minimizer: RadialFn::from_unknowns(forms.grid.clone(), &v[..n]),
                iterations: it,
            });
        }
    }
    Err(Error::Convergence {
        what: "nonlinear inverse iteration for S_{s,lambda}".into(),
        iterations: max_iters,
        residual: j,
    })
}

/// (s/n) S^{n/2s}
pub fn level_of(params: &Params, s_value: f64) -> f64 {
    params.s / params.nf() * s_value.powf(params.nf() / (2.0 * params.s))
}
