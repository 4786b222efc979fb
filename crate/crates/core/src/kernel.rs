//! Sphere-averaged Riesz kernel for radial functions.
//!
//! For radial u the double integral over ℝⁿ×ℝⁿ reduces to (r, ρ) with the
//! kernel
//!
//! ```text
//! k(r, ρ) = ∫_{S^{n-1}} |r e₁ - ρ ω|^{-(n+2s)} dω
//!         = |S^{n-2}| · max(r,ρ)^{-(n+2s)} · g(min/max)
//! g(t)    = ∫_0^π (1 - 2t cos θ + t²)^{-ν} sin^{n-2} θ dθ,   ν = (n+2s)/2.
//! ```
//!
//! g blows up like (1-t²)^{-1-2s} at the diagonal. The factor
//! h(w) = g(t)·w^{1+2s}, w = 1-t², is bounded and continuous on [0, 1]; it is
//! tabulated on dyadic panels [2^{-k-1}, 2^{-k}] with degree-16 Chebyshev
//! interpolants, so the singular part is carried exactly by w^{-1-2s}.
//!
//! The same g serves the Poisson kernel of the extension since
//! y² + |r e₁ - ρ ω|² = a²(1 - 2t cos θ + t²) for suitable a, t.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{bail, Result};
use crate::quad::GaussLegendre;
use crate::special::sphere_measure;

const PANELS: usize = 52;
const DEGREE: usize = 16;
const W_MIN: f64 = 2.220_446_049_250_313e-16; // 2^-52

#[derive(Debug, Clone)]
pub struct AngularKernel {
    pub n: u32,
    pub s: f64,
    nu: f64,
    /// |S^{n-2}|
    omega_sub: f64,
    coeffs: Vec<[f64; DEGREE + 1]>,
    h_floor: f64,
    gauss: GaussLegendre,
}

impl AngularKernel {
    pub fn new(n: u32, s: f64) -> Result<Self> {
        if n < 2 {
            bail!(Domain, "angular kernel needs n >= 2");
        }
        if !(s > 0.0 && s < 1.0) {
            bail!(Domain, "order s = {s} outside (0, 1)");
        }
        let mut k = AngularKernel {
            n,
            s,
            nu: 0.5 * (n as f64 + 2.0 * s),
            omega_sub: sphere_measure(n - 1),
            coeffs: Vec::with_capacity(PANELS),
            h_floor: 0.0,
            gauss: GaussLegendre::new(20),
        };
        let mut samples = [0.0; DEGREE + 1];
        let mut hi = 1.0;
        for _ in 0..PANELS {
            let lo = 0.5 * hi;
            for (j, v) in samples.iter_mut().enumerate() {
                let x = cheb_node(j);
                *v = k.h_direct(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
            }
            k.coeffs.push(cheb_coefficients(&samples));
            hi = lo;
        }
        k.h_floor = k.h_direct(W_MIN);
        Ok(k)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// |S^{n-2}|, the measure of the sphere of polar directions.
    pub fn omega_sub(&self) -> f64 {
        self.omega_sub
    }

    /// h(w) = g(t)·w^{1+2s} by direct geometric-panel quadrature in θ.
    pub fn h_direct(&self, w: f64) -> f64 {
        let t = (1.0 - w).max(0.0).sqrt();
        let a = w / (1.0 + t); // 1 - t without cancellation
        let c = 4.0 * t / (a * a);
        let nu = self.nu;
        let pw = self.n as i32 - 2;
        let integrand = |th: f64| {
            let sh = (0.5 * th).sin();
            (1.0 + c * sh * sh).powf(-nu) * th.sin().powi(pw)
        };
        // panels [0, θ₀], [θ₀, 2θ₀], [2θ₀, 4θ₀], ... clipped at π
        let theta0 = a.min(PI);
        let mut total = self.gauss.integrate(integrand, 0.0, theta0);
        let mut lo = theta0;
        while lo < PI {
            let hi = (2.0 * lo).min(PI);
            total += self.gauss.integrate(integrand, lo, hi);
            lo = hi;
        }
        let log_scale = (1.0 + 2.0 * self.s) * w.ln() - 2.0 * nu * a.ln();
        total * log_scale.exp()
    }

    /// Tabulated h(w) for w ∈ (0, 1].
    pub fn h(&self, w: f64) -> f64 {
        if w < W_MIN {
            return self.h_floor;
        }
        let w = w.min(1.0);
        let exp = ((w.to_bits() >> 52) & 0x7ff) as i64 - 1023;
        let k = (-exp - 1).clamp(0, PANELS as i64 - 1) as usize;
        let hi = (-(k as f64)).exp2();
        let lo = 0.5 * hi;
        let x = (2.0 * w - lo - hi) / (hi - lo);
        clenshaw(&self.coeffs[k], x)
    }

    /// g(t) from the table, with w = 1 - t² supplied directly.
    #[inline]
    pub fn g_from_w(&self, w: f64) -> f64 {
        self.h(w) * w.powf(-1.0 - 2.0 * self.s)
    }

    /// k(r, ρ) given max(r, ρ) and the gap |r - ρ| computed by the caller.
    #[inline]
    pub fn eval_gap(&self, rmax: f64, gap: f64) -> f64 {
        let w = gap * (2.0 * rmax - gap) / (rmax * rmax);
        let ln = -(2.0 * self.nu) * rmax.ln() - (1.0 + 2.0 * self.s) * w.ln();
        self.omega_sub * self.h(w) * ln.exp()
    }

    /// gap²·k(r, ρ)·(r ρ)^{n-1} given both radii and the gap, formed in log
    /// space; finite on the whole range the element-pair rules visit.
    #[inline]
    pub fn eval_regularized(&self, rmax: f64, gap: f64, rmin: f64) -> f64 {
        let lg = gap.ln();
        let lr = rmax.ln();
        let w = gap * (2.0 * rmax - gap) / (rmax * rmax);
        let ln_w = lg + (2.0 * rmax - gap).ln() - 2.0 * lr;
        let ln = -(2.0 * self.nu) * lr - (1.0 + 2.0 * self.s) * ln_w
            + (self.n as f64 - 1.0) * (rmin.ln() + lr)
            + 2.0 * lg;
        self.omega_sub * self.h(w) * ln.exp()
    }

    /// k(r, ρ); `None` on the diagonal r = ρ, where the kernel is not
    /// integrable pointwise and only element-pair quadrature applies.
    pub fn eval(&self, r: f64, rho: f64) -> Option<f64> {
        if r == rho {
            return None;
        }
        let (lo, hi) = if r < rho { (r, rho) } else { (rho, r) };
        Some(self.eval_gap(hi, hi - lo))
    }

    /// k(r, ρ) by direct angular quadrature without the table.
    pub fn eval_direct(&self, r: f64, rho: f64) -> Option<f64> {
        if r == rho {
            return None;
        }
        let (lo, hi) = if r < rho { (r, rho) } else { (rho, r) };
        let w = (hi - lo) * (hi + lo) / (hi * hi);
        Some(self.omega_sub * hi.powf(-2.0 * self.nu) * self.h_direct(w) * w.powf(-1.0 - 2.0 * self.s))
    }

    /// ∫_{S^{n-1}} (y² + |r e₁ - ρ ω|²)^{-ν} dω for y > 0.
    pub fn shifted(&self, r: f64, rho: f64, y: f64) -> f64 {
        let dm = (y * y + (r - rho) * (r - rho)).sqrt();
        let dp = (y * y + (r + rho) * (r + rho)).sqrt();
        let a = 0.5 * (dm + dp);
        let w = dm * dp / (a * a);
        let ln = -(2.0 * self.nu) * a.ln() - (1.0 + 2.0 * self.s) * w.ln();
        self.omega_sub * self.h(w) * ln.exp()
    }

    /// Leading diagonal constant: k(r, ρ) ≈ c · r^{1-n} |r-ρ|^{-1-2s}.
    pub fn diagonal_constant(&self) -> f64 {
        self.omega_sub * self.h(0.0) * 2f64.powf(-1.0 - 2.0 * self.s)
    }
}

fn cheb_node(j: usize) -> f64 {
    (PI * (2.0 * j as f64 + 1.0) / (2.0 * (DEGREE as f64 + 1.0))).cos()
}

fn cheb_coefficients(samples: &[f64; DEGREE + 1]) -> [f64; DEGREE + 1] {
    let m = (DEGREE + 1) as f64;
    let mut c = [0.0; DEGREE + 1];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in samples.iter().enumerate() {
            acc += v * (PI * k as f64 * (2.0 * j as f64 + 1.0) / (2.0 * m)).cos();
        }
        *ck = 2.0 * acc / m;
    }
    c[0] *= 0.5;
    c
}

fn clenshaw(c: &[f64; DEGREE + 1], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}
