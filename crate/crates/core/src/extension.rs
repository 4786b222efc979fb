//! Caffarelli–Silvestre extension of radial functions.
//!
//! W(r, y) = ∫ P(r, ρ, y) u(ρ) ρ^{n-1} dρ with the sphere-averaged Poisson
//! kernel P(r, ρ, y) = p_{n,s} y^{2s} ∫_{S^{n-1}} (y² + |r e₁ - ρω|²)^{-ν} dω.
//! Fields live on an (r, y) tensor grid with y graded geometrically toward 0.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::constants::{d_s, p_ns, Params};
use crate::error::{bail, Result};
use crate::grid::{RadialFn, RadialGrid};
use crate::kernel::AngularKernel;
use crate::quad::GaussLegendre;
use crate::special::sphere_measure;

#[derive(Debug, Clone)]
pub struct PoissonKernel {
    angular: AngularKernel,
    p: f64,
    s: f64,
    n: u32,
    /// |S^{n-1}|
    omega: f64,
    gauss: GaussLegendre,
}

impl PoissonKernel {
    pub fn new(n: u32, s: f64) -> Result<Self> {
        Ok(PoissonKernel {
            angular: AngularKernel::new(n, s)?,
            p: p_ns(n, s)?,
            s,
            n,
            omega: sphere_measure(n),
            gauss: GaussLegendre::new(10),
        })
    }

    pub fn eval(&self, r: f64, rho: f64, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            bail!(Domain, "Poisson kernel needs y > 0, got {y}");
        }
        Ok(self.value(r, rho, y))
    }

    #[inline]
    fn value(&self, r: f64, rho: f64, y: f64) -> f64 {
        self.p * y.powf(2.0 * self.s) * self.angular.shifted(r, rho, y)
    }

    /// ∫_a^b P(r, ρ, y) f(ρ) ρ^{n-1} dρ for f smooth on [a, b]. Panels
    /// double in width away from r so the peak of width y is resolved.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, r: f64, y: f64, a: f64, b: f64) -> f64 {
        let pw = self.n as i32 - 1;
        let g = |rho: f64| self.value(r, rho, y) * f(rho) * rho.powi(pw);
        let len = b - a;
        let dist = if r < a { a - r } else if r > b { r - b } else { 0.0 };
        if len <= y || dist >= 2.0 * len {
            return self.gauss.integrate(g, a, b);
        }
        let c = r.clamp(a, b);
        let mut total = 0.0;
        let mut width = y;
        let mut lo = c;
        while lo < b {
            let hi = (c + width).min(b);
            total += self.gauss.integrate(&g, lo, hi);
            lo = hi;
            width *= 2.0;
        }
        let mut width = y;
        let mut hi = c;
        while hi > a {
            let lo = (c - width).max(a);
            total += self.gauss.integrate(&g, lo, hi);
            hi = lo;
            width *= 2.0;
        }
        total
    }

    /// ∫_lo^∞ P(r, ρ, y) ρ^{n-1} dρ.
    pub fn tail(&self, r: f64, y: f64, lo: f64) -> f64 {
        let far = 1e4 * (r + y + lo);
        let body = self.integrate(|_| 1.0, r, y, lo, far);
        // P ρ^{n-1} ~ p y^{2s} |S^{n-1}| ρ^{-1-2s} for ρ ≫ r, y
        body + self.p * y.powf(2.0 * self.s) * self.omega * far.powf(-2.0 * self.s) / (2.0 * self.s)
    }

    /// Total kernel mass; 1 for every r and y > 0.
    pub fn mass(&self, r: f64, y: f64) -> f64 {
        self.tail(r, y, 0.0)
    }

    /// W(r, y) for a piecewise-linear u.
    pub fn extend_point(&self, u: &RadialFn, r: f64, y: f64) -> f64 {
        let nodes = u.grid.nodes();
        let mut total = 0.0;
        for e in 0..u.grid.elements() {
            let (a, b) = (nodes[e], nodes[e + 1]);
            let (ua, ub) = (u.values[e], u.values[e + 1]);
            if ua == 0.0 && ub == 0.0 {
                continue;
            }
            let lin = |rho: f64| ua + (ub - ua) * (rho - a) / (b - a);
            total += self.integrate(lin, r, y, a, b);
        }
        total
    }

    /// W(r, y) - u(r), computed without cancellation for small y.
    pub fn deviation(&self, u: &RadialFn, r: f64, y: f64) -> f64 {
        let nodes = u.grid.nodes();
        let u0 = u.eval(r);
        let mut total = 0.0;
        for e in 0..u.grid.elements() {
            let (a, b) = (nodes[e], nodes[e + 1]);
            let (ua, ub) = (u.values[e], u.values[e + 1]);
            let lin = |rho: f64| ua + (ub - ua) * (rho - a) / (b - a) - u0;
            total += self.integrate(lin, r, y, a, b);
        }
        total - u0 * self.tail(r, y, u.grid.radius())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionOptions {
    /// Outer radius of the box, in units of R.
    pub r_max: f64,
    /// Smallest y level, in units of R.
    pub y_min: f64,
    pub y_ratio: f64,
    /// Largest y level, in units of R.
    pub y_max: f64,
    /// Grid nodes in (R, r_max·R].
    pub exterior_nodes: usize,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            r_max: 4.0,
            y_min: 1e-3,
            y_ratio: 1.3,
            y_max: 5.0,
            exterior_nodes: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionGrid {
    pub r_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
}

impl ExtensionGrid {
    /// Source nodes on [0, R], quadratically graded nodes out to r_max·R,
    /// geometric y levels.
    pub fn build(source: &RadialGrid, opts: &ExtensionOptions) -> Result<Self> {
        if !(opts.r_max > 1.0 && opts.y_min > 0.0 && opts.y_max > opts.y_min && opts.y_ratio > 1.0) {
            bail!(Config, "invalid extension box {opts:?}");
        }
        let radius = source.radius();
        let mut r_nodes = source.nodes().to_vec();
        let m = opts.exterior_nodes.max(2);
        for k in 1..=m {
            let t = k as f64 / m as f64;
            r_nodes.push(radius + (opts.r_max - 1.0) * radius * t * t);
        }
        let mut y_nodes = Vec::new();
        let mut y = opts.y_min * radius;
        let top = opts.y_max * radius;
        while y < top * (1.0 - 1e-12) {
            y_nodes.push(y);
            y *= opts.y_ratio;
        }
        y_nodes.push(top);
        Ok(ExtensionGrid { r_nodes, y_nodes })
    }

    /// Midpoints inserted in r; y ratio replaced by its square root.
    pub fn refined(&self) -> Self {
        let mut r_nodes = Vec::with_capacity(2 * self.r_nodes.len());
        for w in self.r_nodes.windows(2) {
            r_nodes.push(w[0]);
            r_nodes.push(0.5 * (w[0] + w[1]));
        }
        r_nodes.push(self.r_nodes[self.r_nodes.len() - 1]);
        let mut y_nodes = Vec::with_capacity(2 * self.y_nodes.len());
        for w in self.y_nodes.windows(2) {
            y_nodes.push(w[0]);
            y_nodes.push((w[0] * w[1]).sqrt());
        }
        y_nodes.push(self.y_nodes[self.y_nodes.len() - 1]);
        ExtensionGrid { r_nodes, y_nodes }
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionField {
    pub grid: ExtensionGrid,
    /// W(r_i, y_j) at index i·ny + j.
    pub values: Vec<f64>,
    pub params: Params,
    pub source: RadialFn,
}

impl ExtensionField {
    /// Assembles a field from columns W(r_i, ·), one per r node.
    pub fn from_columns(grid: ExtensionGrid, columns: Vec<Vec<f64>>, params: Params, source: RadialFn) -> Result<Self> {
        let ny = grid.y_nodes.len();
        if columns.len() != grid.r_nodes.len() || columns.iter().any(|c| c.len() != ny) {
            bail!(Config, "extension columns do not match the grid");
        }
        Ok(ExtensionField {
            grid,
            values: columns.concat(),
            params,
            source,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.y_nodes.len() + j]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flood-fill threshold 1e-6·‖W‖_∞.
    pub fn default_zero_tol(&self) -> f64 {
        1e-6 * self.sup_norm()
    }
}

pub fn extend_column(kernel: &PoissonKernel, u: &RadialFn, r: f64, y_nodes: &[f64]) -> Vec<f64> {
    y_nodes.iter().map(|&y| kernel.extend_point(u, r, y)).collect()
}

pub fn extend(u: &RadialFn, grid: ExtensionGrid, params: &Params) -> Result<ExtensionField> {
    let kernel = PoissonKernel::new(params.n, params.s)?;
    let columns = grid
        .r_nodes
        .iter()
        .map(|&r| extend_column(&kernel, u, r, &grid.y_nodes))
        .collect();
    ExtensionField::from_columns(grid, columns, *params, u.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionEnergy {
    /// Box integral plus the strip 0 < y < y₁.
    pub value: f64,
    pub strip: f64,
    /// Far-field estimate outside the box.
    pub remainder: f64,
}

impl ExtensionEnergy {
    pub fn total(&self) -> f64 {
        self.value + self.remainder
    }
}

/// d_s ∬ y^{1-2s} |∇W|² over the half-space, radial measure included.
pub fn extension_energy(field: &ExtensionField) -> Result<ExtensionEnergy> {
    let (rn, yn) = (&field.grid.r_nodes, &field.grid.y_nodes);
    if rn.len() < 3 || yn.len() < 3 {
        bail!(Config, "extension grid too coarse for the gradient stencil");
    }
    let s = field.params.s;
    let n = field.params.n;
    let nf = n as f64;
    let scale = d_s(s)? * sphere_measure(n);
    let ey = 2.0 - 2.0 * s;
    let w = |i: usize, j: usize| field.at(i, j);

    let mut bulk = 0.0;
    for i in 0..rn.len() - 1 {
        let hr = rn[i + 1] - rn[i];
        let ir = (rn[i + 1].powf(nf) - rn[i].powf(nf)) / nf;
        for j in 0..yn.len() - 1 {
            let hy = yn[j + 1] - yn[j];
            let iy = (yn[j + 1].powf(ey) - yn[j].powf(ey)) / ey;
            let wr = (w(i + 1, j) - w(i, j) + w(i + 1, j + 1) - w(i, j + 1)) / (2.0 * hr);
            let wy = (w(i, j + 1) - w(i, j) + w(i + 1, j + 1) - w(i + 1, j)) / (2.0 * hy);
            bulk += (wr * wr + wy * wy) * ir * iy;
        }
    }

    // below y₁: W_r ≈ u', and ∂_y W ∝ y^{2s-1}
    let (y0, y1) = (yn[0], yn[1]);
    let ym = (y0 * y1).sqrt();
    let mut strip = 0.0;
    for i in 0..rn.len() - 1 {
        let hr = rn[i + 1] - rn[i];
        let ir = (rn[i + 1].powf(nf) - rn[i].powf(nf)) / nf;
        let wr = (w(i + 1, 0) - w(i, 0)) / hr;
        let g = 0.5 * (w(i, 1) - w(i, 0) + w(i + 1, 1) - w(i + 1, 0)) / (y1 - y0);
        let c = g / ym.powf(2.0 * s - 1.0);
        strip += (wr * wr * y0.powf(ey) / ey + c * c * y0.powf(2.0 * s) / (2.0 * s)) * ir;
    }

    let remainder = far_field_energy(field)?;
    Ok(ExtensionEnergy {
        value: scale * (bulk + strip),
        strip: scale * strip,
        remainder,
    })
}

/// Energy of the monopole term p_{n,s} m y^{2s} |z|^{-n-2s}, m = ∫u, outside
/// the box [0, r_max] × (0, y_max].
fn far_field_energy(field: &ExtensionField) -> Result<f64> {
    let params = &field.params;
    let (s, n) = (params.s, params.n);
    let nf = n as f64;
    let gauss = GaussLegendre::new(12);
    let u = &field.source;
    let nodes = u.grid.nodes();
    let mut mass = 0.0;
    for e in 0..u.grid.elements() {
        let (a, b) = (nodes[e], nodes[e + 1]);
        let (ua, ub) = (u.values[e], u.values[e + 1]);
        mass += gauss.integrate(|r| (ua + (ub - ua) * (r - a) / (b - a)) * r.powf(nf - 1.0), a, b);
    }
    let amp = p_ns(n, s)? * sphere_measure(n) * mass;
    let k = nf + 2.0 * s;
    let density = |r: f64, y: f64| {
        let z2 = r * r + y * y;
        let base = amp * z2.powf(-0.5 * k);
        let wr = -k * base * y.powf(2.0 * s) * r / z2;
        let wy = base * (2.0 * s * y.powf(2.0 * s - 1.0) - k * y.powf(2.0 * s + 1.0) / z2);
        y.powf(1.0 - 2.0 * s) * (wr * wr + wy * wy) * r.powf(nf - 1.0)
    };
    let rmax = field.grid.r_nodes[field.grid.r_nodes.len() - 1];
    let ymax = field.grid.y_nodes[field.grid.y_nodes.len() - 1];
    let far = 1e3 * (rmax + ymax);
    let panels = |lo: f64, hi: f64| {
        let mut cuts = vec![lo];
        let mut x = if lo > 0.0 { lo } else { 1e-8 * hi };
        if lo == 0.0 {
            cuts.push(x);
        }
        while x < hi {
            x = (2.0 * x).min(hi);
            cuts.push(x);
        }
        cuts
    };
    let integrate_2d = |rc: &[f64], yc: &[f64]| {
        let mut total = 0.0;
        for rw in rc.windows(2) {
            for (r, wr) in gauss.mapped(rw[0], rw[1]) {
                for yw in yc.windows(2) {
                    total += wr * gauss.integrate(|y| density(r, y), yw[0], yw[1]);
                }
            }
        }
        total
    };
    let side = integrate_2d(&panels(rmax, far), &panels(0.0, ymax));
    let top = integrate_2d(&panels(0.0, far), &panels(ymax, far));
    Ok(d_s(s)? * sphere_measure(n) * (side + top))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannTrace {
    pub radii: Vec<f64>,
    /// -d_s lim y^{1-2s} ∂_y W at each radius.
    pub values: Vec<f64>,
    /// Estimates from the two smallest level pairs disagree by > 5%.
    pub low_confidence: Vec<bool>,
}

/// Neumann trace at the source element midpoints inside (0, R).
///
/// W - u = c₁y^{2s} + c₂y² + … near y = 0, and the trace is -2s·d_s·c₁. c₁
/// is solved from the two smallest y levels, and again from the next pair
/// as a stability check.
pub fn neumann_trace(field: &ExtensionField) -> Result<NeumannTrace> {
    let yn = &field.grid.y_nodes;
    if yn.len() < 3 {
        bail!(Config, "Neumann trace needs three y levels");
    }
    let params = &field.params;
    let s = params.s;
    let kernel = PoissonKernel::new(params.n, s)?;
    let scale = -2.0 * s * d_s(s)?;
    let u = &field.source;
    let nodes = u.grid.nodes();
    let solve = |d: [f64; 2], y: [f64; 2]| {
        let (a0, b0) = (y[0].powf(2.0 * s), y[0] * y[0]);
        let (a1, b1) = (y[1].powf(2.0 * s), y[1] * y[1]);
        (d[0] * b1 - d[1] * b0) / (a0 * b1 - a1 * b0)
    };
    let mut out = NeumannTrace {
        radii: Vec::new(),
        values: Vec::new(),
        low_confidence: Vec::new(),
    };
    for e in 0..u.grid.elements() {
        let r = 0.5 * (nodes[e] + nodes[e + 1]);
        let d: Vec<f64> = yn[..3].iter().map(|&y| kernel.deviation(u, r, y)).collect();
        let first = scale * solve([d[0], d[1]], [yn[0], yn[1]]);
        let second = scale * solve([d[1], d[2]], [yn[1], yn[2]]);
        let spread = (first - second).abs();
        out.radii.push(r);
        out.values.push(first);
        out.low_confidence.push(spread > 0.05 * first.abs().max(second.abs()));
    }
    Ok(out)
}

/// Connected components (4-neighbourhood) of {W > tol} and {W < -tol}.
pub fn nodal_regions(field: &ExtensionField, zero_tol: f64) -> usize {
    let nr = field.grid.r_nodes.len();
    let ny = field.grid.y_nodes.len();
    let sign = |k: usize| {
        let v = field.values[k];
        if v > zero_tol {
            1i8
        } else if v < -zero_tol {
            -1
        } else {
            0
        }
    };
    let mut seen = vec![false; nr * ny];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..nr * ny {
        let sg = sign(start);
        if seen[start] || sg == 0 {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = (k / ny, k % ny);
            let mut visit = |m: usize| {
                if !seen[m] && sign(m) == sg {
                    seen[m] = true;
                    stack.push(m);
                }
            };
            if i > 0 {
                visit(k - ny);
            }
            if i + 1 < nr {
                visit(k + ny);
            }
            if j > 0 {
                visit(k - 1);
            }
            if j + 1 < ny {
                visit(k + 1);
            }
        }
    }
    count
}

/// True when W keeps one sign (ignoring |W| ≤ tol) for r_i > radius on the
/// lowest `levels` y levels.
pub fn outer_sign_consistent(field: &ExtensionField, radius: f64, levels: usize, zero_tol: f64) -> bool {
    let ny = field.grid.y_nodes.len();
    let (mut pos, mut neg) = (false, false);
    for (i, &r) in field.grid.r_nodes.iter().enumerate() {
        if r <= radius {
            continue;
        }
        for j in 0..levels.min(ny) {
            let v = field.at(i, j);
            pos |= v > zero_tol;
            neg |= v < -zero_tol;
        }
    }
    !(pos && neg)
}
