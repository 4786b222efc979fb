//! Standard bubbles, the Sobolev constant S_s from the bubble quotient, and
//! the pointwise s-Laplacian of closed-form radial profiles.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::assembly::{GagliardoQuadrature, RadialProfile};
use crate::constants::Params;
use crate::error::{bail, Result};
use crate::quad::{GaussLegendre, GradedRule};

/// (μ² + r²)^{-(n-2s)/2} scaled by `amplitude`.
#[derive(Debug, Clone, Copy)]
pub struct BubbleProfile {
    pub mu: f64,
    pub amplitude: f64,
    /// (n - 2s)/2
    pub half_decay: f64,
}

impl BubbleProfile {
    /// The unnormalized profile u(x) = (1 + |x/μ|²)^{-(n-2s)/2}.
    pub fn unit(n: u32, s: f64, mu: f64) -> Self {
        let half_decay = 0.5 * (n as f64 - 2.0 * s);
        BubbleProfile {
            mu,
            amplitude: mu.powf(2.0 * half_decay),
            half_decay,
        }
    }
}

impl RadialProfile for BubbleProfile {
    fn value(&self, r: f64) -> f64 {
        self.amplitude * (self.mu * self.mu + r * r).powf(-self.half_decay)
    }

    fn diff(&self, r: f64, d: f64) -> f64 {
        // (μ²+(r+d)²) = (μ²+r²)(1 + d(2r+d)/(μ²+r²))
        let base = self.mu * self.mu + r * r;
        let rel = d * (2.0 * r + d) / base;
        self.value(r) * (-self.half_decay * rel.ln_1p()).exp_m1()
    }
}

/// Standard bubble U_{0,μ} = k_μ (μ² + r²)^{-(n-2s)/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bubble {
    pub mu: f64,
    /// Always 0 in the radial setting.
    pub center_radius: f64,
    pub k: f64,
}

impl Bubble {
    /// k_μ = [S_s^{n/2s} μ^n / ∫(1+|x|²)^{-n}]^{1/2*}.
    pub fn standard(params: &Params, mu: f64, s_sobolev: f64, bubble_mass: f64) -> Result<Self> {
        if !(mu > 0.0) {
            bail!(Domain, "bubble scale must be positive, got {mu}");
        }
        let nf = params.nf();
        let base = s_sobolev.powf(nf / (2.0 * params.s)) * mu.powf(nf) / bubble_mass;
        Ok(Bubble {
            mu,
            center_radius: 0.0,
            k: base.powf(1.0 / params.crit_exp()),
        })
    }

    pub fn profile(&self, params: &Params) -> BubbleProfile {
        BubbleProfile {
            mu: self.mu,
            amplitude: self.k,
            half_decay: 0.5 * params.bubble_decay(),
        }
    }
}

/// k_μ (μ² + r²)^{-(n-2s)/2}.
pub fn bubble_value(b: &Bubble, r: f64, params: &Params) -> f64 {
    b.k * (b.mu * b.mu + r * r).powf(-0.5 * params.bubble_decay())
}

#[derive(Debug, Clone, Copy)]
pub struct SobolevOptions {
    /// Uniform panels on the inner interval [0, inner_radius].
    pub panels: usize,
    pub inner_radius: f64,
    /// Scale of the profile whose quotient is evaluated.
    pub mu: f64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        SobolevOptions {
            panels: 64,
            inner_radius: 4.0,
            mu: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SobolevEstimate {
    pub s_sobolev: f64,
    /// ‖u‖²_s of the unnormalized profile.
    pub seminorm: f64,
    /// |u|^{2*}_{2*} of the unnormalized profile.
    pub lcrit_pow: f64,
    /// ∫_{ℝⁿ} (1+|x|²)^{-n} dx
    pub bubble_mass: f64,
}

/// Panel breakpoints: uniform on [0, inner], then doubling out to a radius
/// where the neglected far field is below 1e-14 relative.
pub fn profile_panels(n: u32, s: f64, panels: usize, inner: f64) -> Vec<f64> {
    let decay = (n as f64 - 2.0 * s).min(2.0 * s).min(n as f64);
    let outer = (inner * 1e14f64.powf(1.0 / decay)).min(1e60);
    let mut p: Vec<f64> = (0..=panels).map(|i| inner * i as f64 / panels as f64).collect();
    let mut r = inner;
    while r < outer {
        r *= 2.0;
        p.push(r);
    }
    p
}

/// S_s = ‖u‖²_s / |u|²_{2*} for u = (1+|x/μ|²)^{-(n-2s)/2}.
pub fn sobolev_constant(params: &Params, opts: &SobolevOptions) -> Result<SobolevEstimate> {
    let quad = GagliardoQuadrature::new(params.n, params.s)?;
    sobolev_with(&quad, params, opts)
}

pub fn sobolev_with(quad: &GagliardoQuadrature, params: &Params, opts: &SobolevOptions) -> Result<SobolevEstimate> {
    if opts.panels < 4 || !(opts.inner_radius > 0.0) || !(opts.mu > 0.0) {
        bail!(Config, "invalid Sobolev quadrature options");
    }
    let panels = profile_panels(params.n, params.s, opts.panels, opts.inner_radius);
    let u = BubbleProfile::unit(params.n, params.s, opts.mu);
    let seminorm = quad.profile_seminorm(&u, &panels);
    let p = params.crit_exp();
    let lcrit_pow = quad.profile_lp_pow(&u, &panels, p);
    // ∫(1+|x|²)^{-n}: |u|^{2*} at μ = 1 is exactly this integral
    let unit = BubbleProfile::unit(params.n, params.s, 1.0);
    let bubble_mass = quad.profile_lp_pow(&unit, &panels, p);
    let s_sobolev = seminorm / lcrit_pow.powf(2.0 / p);
    if !(s_sobolev.is_finite() && s_sobolev > 0.0) {
        return Err(crate::error::Error::Tolerance {
            what: "Sobolev quotient quadrature".into(),
            residual: s_sobolev,
        });
    }
    Ok(SobolevEstimate {
        s_sobolev,
        seminorm,
        lcrit_pow,
        bubble_mass,
    })
}

/// Bounds (1 - λ/λ₁) S_s ≤ S_{s,λ} ≤ S_s.
pub fn sobolev_sandwich(s_sobolev: f64, lambda: f64, lambda1: f64) -> (f64, f64) {
    ((1.0 - lambda / lambda1) * s_sobolev, s_sobolev)
}

/// S_s^{1/2s} (∫(1+|x|²)^{-n})^{-1/n}, the scale of the normalized limit
/// profile with U(0) = 1.
pub fn theory_mu(params: &Params, s_sobolev: f64, bubble_mass: f64) -> f64 {
    s_sobolev.powf(1.0 / (2.0 * params.s)) * bubble_mass.powf(-1.0 / params.nf())
}

/// (-Δ)^s f(r) = C ∫_0^∞ (f(r) - f(ρ)) k(r, ρ) ρ^{n-1} dρ (principal value)
/// for a closed-form radial profile decaying at infinity.
pub fn fractional_laplacian<P: RadialProfile>(quad: &GagliardoQuadrature, f: &P, r: f64, outer: f64) -> f64 {
    let s = quad.s;
    let g12 = GaussLegendre::new(12);
    let p = quad.n as i32 - 1;
    let fr = f.value(r);
    let mut acc = 0.0;
    let far_start;
    if r == 0.0 {
        // k(0, ρ) = ω_n ρ^{-n-2s}; integrand ~ ρ^{1-2s} near 0
        let rule = GradedRule::standard(1.0 - 2.0 * s);
        let h = 1.0f64.min(outer);
        for (rho, w) in rule.mapped(0.0, h) {
            acc += w * (-f.diff(0.0, rho)) * quad.omega_n * rho.powf(-1.0 - 2.0 * s);
        }
        far_start = h;
    } else {
        // symmetric window [r - δ, r + δ] folded onto t ∈ (0, δ)
        let delta = 0.5 * r;
        let rule = GradedRule::standard(1.0 - 2.0 * s);
        for (t, w) in rule.mapped(0.0, delta) {
            let up = -f.diff(r, t) * quad.kernel.eval_gap(r + t, t) * (r + t).powi(p);
            let down = -f.diff(r, -t) * quad.kernel.eval_gap(r, t) * (r - t).powi(p);
            acc += w * (up + down);
        }
        // [0, r - δ]: smooth
        let lo = r - delta;
        let pieces = 4;
        for i in 0..pieces {
            let a = lo * i as f64 / pieces as f64;
            let b = lo * (i + 1) as f64 / pieces as f64;
            for (rho, w) in g12.mapped(a, b) {
                acc += w * (fr - f.value(rho)) * quad.kernel.eval_gap(r, r - rho) * rho.powi(p);
            }
        }
        far_start = r + delta;
    }
    // [far_start, outer] with doubling panels, then the analytic tail with f(ρ) ≈ 0
    let mut a = far_start;
    let mut width = far_start - r;
    while a < outer {
        let b = (a + width).min(outer);
        for (rho, w) in g12.mapped(a, b) {
            let k = quad.kernel.eval_gap(rho, rho - r);
            acc += w * (fr - f.value(rho)) * k * rho.powi(p);
        }
        a = b;
        width *= 2.0;
    }
    acc += fr * quad.tail_weight(r, outer - r, outer);
    quad.c_ns * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_scaling_identity() {
        let p = Params::new(7, 0.75, 1.0, 0.0).unwrap();
        let b1 = Bubble::standard(&p, 1.0, 10.0, 2.0).unwrap();
        let b2 = Bubble::standard(&p, 2.5, 10.0, 2.0).unwrap();
        let e = 0.5 * p.bubble_decay();
        for r in [0.0, 0.3, 1.7, 9.0] {
            let lhs = bubble_value(&b2, r, &p);
            let rhs = 2.5f64.powf(-e) * bubble_value(&b1, r / 2.5, &p);
            assert!(((lhs - rhs) / rhs).abs() < 1e-14);
        }
        assert!(((b2.k / b1.k) - 2.5f64.powf(e)).abs() < 1e-13);
    }

    #[test]
    fn profile_diff_matches_plain_difference() {
        let u = BubbleProfile::unit(5, 0.4, 0.7);
        for (r, d) in [(0.3, 0.2), (2.0, -0.5), (0.0, 1.0)] {
            let plain = u.value(r + d) - u.value(r);
            assert!((u.diff(r, d) - plain).abs() < 1e-15);
        }
    }
}
