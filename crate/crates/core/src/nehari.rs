//! Energy functional, interaction term η, and the Nehari / nodal Nehari
//! projections on the discrete forms.
//!
//! With the lumped mass every L^p term splits exactly over the nodal parts
//! u = u⁺ - u⁻, so for w = αu⁺ - βu⁻
//!
//! ```text
//! I(w) = ½(α² A₊ + β² A₋) + 2αβη - (α^q B₊ + β^q B₋)/q
//! ```
//!
//! with A± = ‖u±‖²_s - λ|u±|²₂, B± = |u±|^q_q, q = 2*.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::FormMatrices;
use crate::constants::Params;
use crate::error::{bail, Error, Result};
use crate::grid::RadialFn;

/// The three norms of one function (squared / to the power q).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    /// ‖u‖²_s
    pub gagliardo: f64,
    /// |u|²₂
    pub l2: f64,
    /// |u|^{2*}_{2*}
    pub lcrit: f64,
}

impl Norms {
    /// ‖u‖²_s - λ|u|²₂
    pub fn quadratic(&self, lambda: f64) -> f64 {
        self.gagliardo - lambda * self.l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// I(u)
    pub energy: f64,
    /// J(u); `None` for u ≡ 0.
    pub quotient: Option<f64>,
    pub gagliardo: f64,
    pub l2: f64,
    pub lcrit: f64,
    pub eta: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub plus: Norms,
    pub minus: Norms,
    /// (s/n) S_{s,λ}^{n/2s} when known.
    pub c_n_ref: Option<f64>,
    /// Energy of u as a nodal level (set for sign-changing u on M).
    pub c_m: Option<f64>,
}

impl EnergyReport {
    pub fn with_reference(mut self, c_n: f64) -> Self {
        self.c_n_ref = Some(c_n);
        self
    }
}

/// Split of u into nodal parts with the η coupling.
#[derive(Debug, Clone)]
pub struct Parts {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub plus_norms: Norms,
    pub minus_norms: Norms,
    pub eta: f64,
}

fn norms_of(values: &[f64], k_values: &[f64], forms: &FormMatrices, q: f64) -> Norms {
    let n = forms.unknowns();
    let gagliardo = values[..n].iter().zip(k_values).map(|(a, b)| a * b).sum();
    Norms {
        gagliardo,
        l2: forms.lp_pow(values, 2.0),
        lcrit: forms.lp_pow(values, q),
    }
}

pub fn split_parts(u: &RadialFn, params: &Params, forms: &FormMatrices) -> Parts {
    let q = params.crit_exp();
    let plus: Vec<f64> = u.values.iter().map(|v| v.max(0.0)).collect();
    let minus: Vec<f64> = u.values.iter().map(|v| (-v).max(0.0)).collect();
    let n = forms.unknowns();
    let kp = forms.stiffness_apply(&plus[..n]);
    let km = forms.stiffness_apply(&minus[..n]);
    let cross: f64 = minus[..n].iter().zip(&kp).map(|(a, b)| a * b).sum();
    Parts {
        plus_norms: norms_of(&plus, &kp, forms, q),
        minus_norms: norms_of(&minus, &km, forms, q),
        plus,
        minus,
        // (u⁺, u⁻)_s = -2η; η ≥ 0 for the exact form
        eta: (-0.5 * cross).max(0.0),
    }
}

/// η(u) = -½ (u⁺, u⁻)_s, clamped at 0.
pub fn eta(u: &RadialFn, forms: &FormMatrices) -> f64 {
    let n = forms.unknowns();
    let plus: Vec<f64> = u.unknowns().iter().map(|v| v.max(0.0)).collect();
    let minus: Vec<f64> = u.unknowns().iter().map(|v| (-v).max(0.0)).collect();
    if plus.iter().all(|&v| v == 0.0) || minus.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let kp = forms.stiffness_apply(&plus);
    let cross: f64 = minus[..n].iter().zip(&kp).map(|(a, b)| a * b).sum();
    (-0.5 * cross).max(0.0)
}

fn check_lambda(params: &Params, forms: &FormMatrices) -> Result<()> {
    if !(params.lambda < forms.lambda1) {
        bail!(
            Parameter,
            "lambda = {} must lie below the first eigenvalue {}",
            params.lambda,
            forms.lambda1
        );
    }
    Ok(())
}

fn f_ratio(norms: &Norms, eta: f64, lambda: f64) -> f64 {
    if norms.lcrit == 0.0 {
        0.0
    } else {
        (norms.lcrit - 2.0 * eta) / norms.quadratic(lambda)
    }
}

/// I, J, norms, η and f± of u.
pub fn energy(u: &RadialFn, params: &Params, forms: &FormMatrices) -> Result<EnergyReport> {
    check_lambda(params, forms)?;
    let q = params.crit_exp();
    let parts = split_parts(u, params, forms);
    let (p, m) = (parts.plus_norms, parts.minus_norms);
    let gagliardo = p.gagliardo + m.gagliardo + 4.0 * parts.eta;
    let l2 = p.l2 + m.l2;
    let lcrit = p.lcrit + m.lcrit;
    let quad = gagliardo - params.lambda * l2;
    let energy = 0.5 * quad - lcrit / q;
    let quotient = if lcrit > 0.0 {
        Some(quad / lcrit.powf(2.0 / q))
    } else {
        None
    };
    let f_plus = f_ratio(&p, parts.eta, params.lambda);
    let f_minus = f_ratio(&m, parts.eta, params.lambda);
    let sign_changing = p.lcrit > 0.0 && m.lcrit > 0.0;
    Ok(EnergyReport {
        energy,
        quotient,
        gagliardo,
        l2,
        lcrit,
        eta: parts.eta,
        f_plus,
        f_minus,
        plus: p,
        minus: m,
        c_n_ref: None,
        c_m: if sign_changing { Some(energy) } else { None },
    })
}

/// Scales u onto the Nehari set: t = [(‖u‖²_s - λ|u|²₂)/|u|^q_q]^{1/(q-2)}.
pub fn nehari_project(u: &RadialFn, params: &Params, forms: &FormMatrices) -> Result<(f64, RadialFn)> {
    check_lambda(params, forms)?;
    let q = params.crit_exp();
    let num = forms.gagliardo_norm(u) - params.lambda * forms.lp_pow(&u.values, 2.0);
    let den = forms.lp_pow(&u.values, q);
    if !(num > 0.0) || !(den > 0.0) {
        bail!(Projection, "Nehari projection needs a positive quadratic part and nonzero u");
    }
    let t = (num / den).powf(1.0 / (q - 2.0));
    Ok((t, u.scaled(t)))
}

#[derive(Debug, Clone)]
pub struct NodalProjection {
    pub alpha: f64,
    pub beta: f64,
    pub u: RadialFn,
    /// max |f± - 1| at (α, β)
    pub residual: f64,
    pub iterations: usize,
}

/// Coefficients of the 2×2 system for fixed parts.
#[derive(Debug, Clone, Copy)]
pub struct NodalSystem {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub eta: f64,
    pub q: f64,
}

impl NodalSystem {
    pub fn from_parts(parts: &Parts, lambda: f64, q: f64) -> Self {
        NodalSystem {
            a_plus: parts.plus_norms.quadratic(lambda),
            a_minus: parts.minus_norms.quadratic(lambda),
            b_plus: parts.plus_norms.lcrit,
            b_minus: parts.minus_norms.lcrit,
            eta: parts.eta,
            q,
        }
    }

    /// f±(αu⁺ - βu⁻) - 1.
    pub fn residual(&self, alpha: f64, beta: f64) -> [f64; 2] {
        let c = self.q - 2.0;
        [
            (alpha.powf(c) * self.b_plus - 2.0 * self.eta * beta / alpha) / self.a_plus - 1.0,
            (beta.powf(c) * self.b_minus - 2.0 * self.eta * alpha / beta) / self.a_minus - 1.0,
        ]
    }

    /// I(αu⁺ - βu⁻).
    pub fn energy(&self, alpha: f64, beta: f64) -> f64 {
        0.5 * (alpha * alpha * self.a_plus + beta * beta * self.a_minus) + 2.0 * alpha * beta * self.eta
            - (alpha.powf(self.q) * self.b_plus + beta.powf(self.q) * self.b_minus) / self.q
    }

    /// Scalar Nehari values of the two parts ignoring the coupling.
    pub fn decoupled(&self) -> (f64, f64) {
        let c = self.q - 2.0;
        ((self.a_plus / self.b_plus).powf(1.0 / c), (self.a_minus / self.b_minus).powf(1.0 / c))
    }

    /// Newton in (ln α, ln β) from the decoupled guess, with seeded restarts.
    pub fn solve(&self, tol: f64, max_iters: usize, restarts: usize) -> Result<(f64, f64, f64, usize)> {
        let (a0, b0) = self.decoupled();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e65_6861_7269);
        let mut best = f64::INFINITY;
        let mut total = 0;
        for attempt in 0..=restarts {
            let (mut x, mut y) = (a0.ln(), b0.ln());
            if attempt > 0 {
                x += rng.gen_range(-2.0..2.0);
                y += rng.gen_range(-2.0..2.0);
            }
            let (res, its, xy) = self.newton(x, y, tol, max_iters);
            total += its;
            if res < tol {
                return Ok((xy.0.exp(), xy.1.exp(), res, total));
            }
            best = best.min(res);
        }
        Err(Error::Convergence {
            what: "nodal Nehari system".into(),
            iterations: total,
            residual: best,
        })
    }

    fn newton(&self, mut x: f64, mut y: f64, tol: f64, max_iters: usize) -> (f64, usize, (f64, f64)) {
        let c = self.q - 2.0;
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let mut r = self.residual(x.exp(), y.exp());
        for it in 0..max_iters {
            let res = norm(r);
            if !res.is_finite() {
                return (f64::INFINITY, it, (x, y));
            }
            if res < tol {
                return (res, it, (x, y));
            }
            let ea = (c * x).exp() * self.b_plus / self.a_plus;
            let eb = (c * y).exp() * self.b_minus / self.a_minus;
            let cp = 2.0 * self.eta * (y - x).exp() / self.a_plus;
            let cm = 2.0 * self.eta * (x - y).exp() / self.a_minus;
            let j = [[c * ea + cp, -cp], [-cm, c * eb + cm]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det.abs() > 0.0) {
                return (res, it, (x, y));
            }
            let dx = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let dy = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            // damp until the residual decreases
            let mut t = 1.0;
            loop {
                let (nx, ny) = (x + t * dx, y + t * dy);
                let nr = self.residual(nx.exp(), ny.exp());
                if norm(nr) < res || t < 1e-6 {
                    x = nx;
                    y = ny;
                    r = nr;
                    break;
                }
                t *= 0.5;
            }
        }
        (norm(r), max_iters, (x, y))
    }
}

pub const NEWTON_TOL: f64 = 1e-13;

/// Returns α, β > 0 with αu⁺ - βu⁻ on the nodal Nehari set.
pub fn nodal_nehari_project(u: &RadialFn, params: &Params, forms: &FormMatrices) -> Result<NodalProjection> {
    check_lambda(params, forms)?;
    let parts = split_parts(u, params, forms);
    if parts.plus_norms.lcrit == 0.0 || parts.minus_norms.lcrit == 0.0 {
        bail!(Domain, "nodal projection needs a sign-changing function");
    }
    let sys = NodalSystem::from_parts(&parts, params.lambda, params.crit_exp());
    if !(sys.a_plus > 0.0 && sys.a_minus > 0.0) {
        bail!(Projection, "quadratic part of u± is not positive");
    }
    let (alpha, beta, residual, iterations) = sys.solve(NEWTON_TOL, 100, 20).map_err(|e| match e {
        Error::Convergence { residual, .. } => {
            Error::Projection(alloc::format!("Newton for (alpha, beta) failed, residual {residual:e}"))
        }
        other => other,
    })?;
    let values = parts
        .plus
        .iter()
        .zip(&parts.minus)
        .map(|(p, m)| alpha * p - beta * m)
        .collect();
    Ok(NodalProjection {
        alpha,
        beta,
        u: RadialFn {
            grid: u.grid.clone(),
            values,
        },
        residual,
        iterations,
    })
}
