//! Problem parameters and the closed-form Γ-ratio constants.

use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{bail, Result};
use crate::special::{gamma, sphere_measure};

/// Problem data for (-Δ)^s u = λu + |u|^{2*-2}u in B_R, u = 0 outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub n: u32,
    pub s: f64,
    pub radius: f64,
    pub lambda: f64,
}

impl Params {
    pub fn new(n: u32, s: f64, radius: f64, lambda: f64) -> Result<Self> {
        let p = Params {
            n,
            s,
            radius,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            bail!(Parameter, "dimension n = {} must be at least 2", self.n);
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            bail!(Parameter, "order s = {} must lie in (0, 1)", self.s);
        }
        if self.nf() <= 2.0 * self.s {
            bail!(Parameter, "need n > 2s");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            bail!(Parameter, "radius must be positive, got {}", self.radius);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!(Parameter, "lambda must be non-negative, got {}", self.lambda);
        }
        Ok(())
    }

    /// Existence of radial sign-changing solutions needs n > 6s.
    pub fn require_nodal_regime(&self) -> Result<()> {
        self.validate()?;
        if self.nf() <= 6.0 * self.s {
            bail!(
                Parameter,
                "sign-changing radial solver requires n > 6s (n = {}, s = {})",
                self.n,
                self.s
            );
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Params { lambda, ..*self }
    }

    pub fn with_s(&self, s: f64) -> Self {
        Params { s, ..*self }
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Params { radius, ..*self }
    }

    #[inline]
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Critical exponent 2*_s = 2n/(n-2s).
    pub fn crit_exp(&self) -> f64 {
        2.0 * self.nf() / (self.nf() - 2.0 * self.s)
    }

    /// β = 2/(n-2s), the concentration exponent.
    pub fn beta(&self) -> f64 {
        2.0 / (self.nf() - 2.0 * self.s)
    }

    /// Decay exponent n-2s of the standard bubble.
    pub fn bubble_decay(&self) -> f64 {
        self.nf() - 2.0 * self.s
    }
}

/// C_{n,s} = 2^{2s} Γ(n/2 + s) / (π^{n/2} |Γ(-s)|).
pub fn c_ns(n: u32, s: f64) -> Result<f64> {
    check_order(s)?;
    if n < 1 {
        bail!(Domain, "dimension must be positive");
    }
    let nf = n as f64;
    Ok(2f64.powf(2.0 * s) * gamma(0.5 * nf + s)? / (PI.powf(0.5 * nf) * gamma(-s)?.abs()))
}

/// d_s = (2^{2s}/2) Γ(s)/Γ(1-s), the extension energy constant.
pub fn d_s(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(0.5 * 2f64.powf(2.0 * s) * gamma(s)? / gamma(1.0 - s)?)
}

/// p_{n,s} = Γ((n+2s)/2) / (π^{n/2} Γ(s)), normalizing the Poisson kernel.
pub fn p_ns(n: u32, s: f64) -> Result<f64> {
    check_order(s)?;
    if n < 1 {
        bail!(Domain, "dimension must be positive");
    }
    let nf = n as f64;
    Ok(gamma(0.5 * (nf + 2.0 * s))? / (PI.powf(0.5 * nf) * gamma(s)?))
}

/// Radial Strauss constant K_{n,s}; only defined for s ∈ (1/2, 1), n ≥ 2.
pub fn k_strauss(n: u32, s: f64) -> Result<f64> {
    check_order(s)?;
    if s <= 0.5 {
        bail!(Domain, "the radial Strauss inequality fails for s <= 1/2 (s = {s})");
    }
    if n < 2 {
        bail!(Domain, "Strauss constant needs n >= 2");
    }
    let nf = n as f64;
    let num = gamma(2.0 * s - 1.0)? * gamma(0.5 * (nf - 2.0 * s))? * gamma(0.5 * nf)?;
    let den = 2f64.powf(2.0 * s)
        * PI.powf(0.5 * nf)
        * gamma(s)?.powi(2)
        * gamma(0.5 * (nf - 2.0 * (1.0 - s)))?;
    Ok(num / den)
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        bail!(Domain, "fractional order s = {s} outside (0, 1)");
    }
    Ok(())
}

/// All Γ-ratio constants for one (n, s), plus the numerically computed S_s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsTable {
    pub n: u32,
    pub s: f64,
    pub c_ns: f64,
    pub d_s: f64,
    pub p_ns: f64,
    /// `None` when s ≤ 1/2.
    pub k_strauss: Option<f64>,
    pub s_sobolev: f64,
    /// |S^{n-1}|
    pub omega_n: f64,
}

impl ConstantsTable {
    /// Builds the table; `s_sobolev` comes from the bubble quotient quadrature.
    pub fn new(n: u32, s: f64, s_sobolev: f64) -> Result<Self> {
        Ok(ConstantsTable {
            n,
            s,
            c_ns: c_ns(n, s)?,
            d_s: d_s(s)?,
            p_ns: p_ns(n, s)?,
            k_strauss: k_strauss(n, s).ok(),
            s_sobolev,
            omega_n: sphere_measure(n),
        })
    }

    /// Energy of one bubble, (s/n) S_s^{n/2s}.
    pub fn bubble_energy(&self) -> f64 {
        let nf = self.n as f64;
        self.s / nf * self.s_sobolev.powf(nf / (2.0 * self.s))
    }

    /// S_s^{n/2s} = ‖U‖²_s = |U|^{2*}_{2*}.
    pub fn bubble_norm_sq(&self) -> f64 {
        self.s_sobolev.powf(self.n as f64 / (2.0 * self.s))
    }
}
