//! Radialized Gagliardo form: element-pair quadrature, exterior tail weight,
//! and the assembled stiffness/mass data for the hat basis.
//!
//! For radial u, v vanishing outside B_R,
//!
//! ```text
//! (u, v)_s = (C ω_n / 2) ∬_{[0,R]²} (u(r)-u(ρ))(v(r)-v(ρ)) k(r,ρ) r^{n-1} ρ^{n-1}
//!          +  C ω_n ∫_0^R u v T(r) r^{n-1},       T(r) = ∫_R^∞ k(r,ρ) ρ^{n-1} dρ
//! ```
//!
//! where k is the sphere-averaged kernel of [`crate::kernel`]. The diagonal
//! singularity is handled per element pair: same-element pairs in (ρ, r-ρ)
//! coordinates with a graded rule in r-ρ, touching pairs by a corner Duffy
//! split, separated pairs by tensor Gauss rules whose order follows the gap.

use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::constants::{c_ns, Params};
use crate::error::{bail, Result};
use crate::grid::{RadialFn, RadialGrid};
use crate::kernel::AngularKernel;
use crate::quad::{GaussLegendre, GradedRule};
use crate::special::{beta_fn, sphere_measure};

/// Quadrature node for a pair of panels P ≤ Q, with r ∈ P, ρ ∈ Q and r ≤ ρ.
#[derive(Debug, Clone, Copy)]
pub struct PairPoint {
    pub r: f64,
    pub rho: f64,
    /// b_P - r
    pub x: f64,
    /// ρ - a_Q
    pub y: f64,
    /// ρ - r, computed without cancellation.
    pub gap: f64,
    /// Includes gap², the kernel, r^{n-1} ρ^{n-1}, Jacobians and the symmetry
    /// factor; integrands enter as F / gap².
    pub w: f64,
}

// Re-express local offsets of points generated on sub-panels relative to
// the enclosing pair.
fn shift_local(points: &mut [PairPoint], dx: f64, dy: f64) {
    for pt in points {
        pt.x += dx;
        pt.y += dy;
    }
}

/// Radial function known in closed form, for quadrature of its seminorm.
pub trait RadialProfile {
    fn value(&self, r: f64) -> f64;

    /// f(r + d) - f(r). The default switches to a centered derivative for
    /// tiny |d|, where the plain difference cancels; profiles with a
    /// closed-form difference should override it.
    fn diff(&self, r: f64, d: f64) -> f64 {
        let scale = r.abs().max(1e-3);
        if d.abs() < 1e-7 * scale {
            let h = 1e-4 * scale;
            let lo = (r - h).max(0.0);
            let slope = (self.value(r + h) - self.value(lo)) / (r + h - lo);
            return slope * d;
        }
        self.value(r + d) - self.value(r)
    }
}

/// Quadrature machinery for the radialized Gagliardo form at fixed (n, s).
#[derive(Debug, Clone)]
pub struct GagliardoQuadrature {
    pub kernel: AngularKernel,
    pub n: u32,
    pub s: f64,
    pub c_ns: f64,
    pub omega_n: f64,
    same: GradedRule,
    corner: GradedRule,
    origin: GradedRule,
    edge: GradedRule,
    g12: GaussLegendre,
    g10: GaussLegendre,
    g6: GaussLegendre,
    g4: GaussLegendre,
    tail_series: Vec<f64>,
}

impl GagliardoQuadrature {
    pub fn new(n: u32, s: f64) -> Result<Self> {
        let kernel = AngularKernel::new(n, s)?;
        let nf = n as f64;
        // coefficients of g(t) = B Σ c_m t^{2m} for the far tail
        let b = beta_fn(0.5 * (nf - 1.0), 0.5)?;
        let nu = kernel.nu();
        let mut tail_series = Vec::with_capacity(40);
        let mut c = b;
        for m in 0..40 {
            tail_series.push(c);
            let mf = m as f64;
            c *= (nu + mf) * (1.0 + s + mf) / ((0.5 * nf + mf) * (mf + 1.0));
        }
        Ok(GagliardoQuadrature {
            n,
            s,
            c_ns: c_ns(n, s)?,
            omega_n: sphere_measure(n),
            same: GradedRule::standard(1.0 - 2.0 * s),
            corner: GradedRule::standard(2.0 - 2.0 * s),
            origin: GradedRule::standard(0.0),
            edge: GradedRule::standard(2.0 - 2.0 * s),
            g12: GaussLegendre::new(12),
            g10: GaussLegendre::new(10),
            g6: GaussLegendre::new(6),
            g4: GaussLegendre::new(4),
            tail_series,
            kernel,
        })
    }

    /// Quadrature points for ∬_{P×Q} F k r^{n-1}ρ^{n-1} (plus the mirrored
    /// Q×P block when P ≠ Q) for integrands F symmetric under r ↔ ρ that
    /// vanish quadratically on the diagonal. Requires P = Q, P touching Q
    /// from the left, or P entirely left of Q.
    pub fn pair_points(&self, p: (f64, f64), q: (f64, f64), out: &mut Vec<PairPoint>) {
        out.clear();
        if p == q {
            self.same_points(p, out);
        } else if p.1 == q.0 {
            self.touching_points(p, q, out);
        } else {
            debug_assert!(p.1 < q.0);
            self.far_points(p, q, 2.0, out);
        }
    }

    fn same_points(&self, (a, b): (f64, f64), out: &mut Vec<PairPoint>) {
        let h = b - a;
        for (d, wd) in self.same.mapped(0.0, h) {
            let len = h - d;
            if len <= 0.0 {
                continue;
            }
            let inner: &mut dyn Iterator<Item = (f64, f64)> = if a == 0.0 {
                &mut self.origin.mapped(0.0, len)
            } else {
                &mut self.g12.mapped(a, a + len)
            };
            for (t, wt) in inner {
                let rho = t + d;
                let k = self.kernel.eval_regularized(rho, d, t);
                out.push(PairPoint {
                    r: t,
                    rho,
                    x: b - t,
                    y: rho - a,
                    gap: d,
                    w: 2.0 * wd * wt * k,
                });
            }
        }
    }

    fn touching_points(&self, (a, b): (f64, f64), (_, c): (f64, f64), out: &mut Vec<PairPoint>) {
        let hp = b - a;
        let hq = c - b;
        // the Duffy rule in v loses accuracy for very unequal panels: peel
        // off an equal-size touching piece and treat the rest as separated
        if hq > 2.0 * hp {
            self.touching_points((a, b), (b, b + hp), out);
            let start = out.len();
            self.far_points((a, b), (b + hp, c), 2.0, out);
            shift_local(&mut out[start..], 0.0, hp);
            return;
        }
        if hp > 2.0 * hq {
            self.touching_points((b - hq, b), (b, c), out);
            let start = out.len();
            self.far_points((a, b - hq), (b, c), 2.0, out);
            shift_local(&mut out[start..], hq, 0.0);
            return;
        }
        for (u, wu) in self.corner.mapped(0.0, 1.0) {
            for (v, wv) in self.g12.mapped(0.0, 1.0) {
                let jac = hp * hq * u * wu * wv;
                for (x, y) in [(hp * u, hq * u * v), (hp * u * v, hq * u)] {
                    let r = b - x;
                    let rho = b + y;
                    let gap = x + y;
                    let k = self.kernel.eval_regularized(rho, gap, r);
                    out.push(PairPoint {
                        r,
                        rho,
                        x,
                        y,
                        gap,
                        w: 2.0 * jac * k,
                    });
                }
            }
        }
    }

    fn far_points(&self, p: (f64, f64), q: (f64, f64), factor: f64, out: &mut Vec<PairPoint>) {
        let hp = p.1 - p.0;
        let hq = q.1 - q.0;
        let gap = q.0 - p.1;
        let ratio = gap / hp.max(hq);
        if ratio < 1.0 {
            // split the larger panel until the gap dominates
            let start = out.len();
            if hp >= hq {
                let m = 0.5 * (p.0 + p.1);
                self.far_points((p.0, m), q, factor, out);
                shift_local(&mut out[start..], p.1 - m, 0.0);
                self.far_points((m, p.1), q, factor, out);
            } else {
                let m = 0.5 * (q.0 + q.1);
                self.far_points(p, (q.0, m), factor, out);
                let mid = out.len();
                self.far_points(p, (m, q.1), factor, out);
                shift_local(&mut out[mid..], 0.0, m - q.0);
            }
            return;
        }
        let rule = if ratio >= 8.0 {
            &self.g4
        } else if ratio >= 3.0 {
            &self.g6
        } else {
            &self.g10
        };
        for (r, wr) in rule.mapped(p.0, p.1) {
            for (rho, wq) in rule.mapped(q.0, q.1) {
                let g = rho - r;
                let k = self.kernel.eval_regularized(rho, g, r);
                out.push(PairPoint {
                    r,
                    rho,
                    x: p.1 - r,
                    y: rho - q.0,
                    gap: g,
                    w: factor * wr * wq * k,
                });
            }
        }
    }

    /// T(r) = ∫_R^∞ k(r, ρ) ρ^{n-1} dρ for 0 ≤ r < R, with `dist` = R - r
    /// supplied by the caller to keep the near-boundary gap exact.
    pub fn tail_weight(&self, r: f64, dist: f64, radius: f64) -> f64 {
        let far = 4.0 * radius;
        let p = self.n as i32 - 1;
        let mut total = 0.0;
        // geometric panels in ρ - R starting at the distance to the singularity
        let mut lo = 0.0;
        let mut width = dist;
        while radius + lo < far {
            let hi = (lo + width).min(far - radius);
            for (x, w) in self.g12.mapped(lo, hi) {
                let rho = radius + x;
                total += w * self.kernel.eval_gap(rho, x + dist) * rho.powi(p);
            }
            lo = hi;
            width *= 2.0;
        }
        // beyond 4R: k ρ^{n-1} = |S^{n-2}| ρ^{-1-2s} Σ c_m (r/ρ)^{2m}
        let q = (r / far) * (r / far);
        let mut qm = 1.0;
        let mut series = 0.0;
        for (m, c) in self.tail_series.iter().enumerate() {
            let term = c * qm / (2.0 * self.s + 2.0 * m as f64);
            series += term;
            if term < 1e-17 * series {
                break;
            }
            qm *= q;
        }
        total + self.kernel.omega_sub() * far.powf(-2.0 * self.s) * series
    }

    /// ∫_a^b F(r) T(r) r^{n-1} dr on one element; `at_edge` grades toward b = R.
    fn tail_points(&self, (a, b): (f64, f64), radius: f64, at_edge: bool, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let p = self.n as i32 - 1;
        if at_edge {
            let h = b - a;
            for (x, w) in self.edge.mapped(0.0, h) {
                let dist = (radius - b) + x;
                let r = b - x;
                out.push((r, w * self.tail_weight(r, dist, radius) * r.powi(p)));
            }
        } else {
            for (r, w) in self.g12.mapped(a, b) {
                out.push((r, w * self.tail_weight(r, radius - r, radius) * r.powi(p)));
            }
        }
    }

    /// ‖f‖²_s for a closed-form radial profile, integrating over [0, L]² on
    /// the given panel breakpoints (0 = p₀ < … < p_m = L) and treating f as
    /// zero beyond L.
    pub fn profile_seminorm<P: RadialProfile>(&self, f: &P, panels: &[f64]) -> f64 {
        let m = panels.len() - 1;
        let big_l = panels[m];
        let mut pts = Vec::new();
        let mut inner = 0.0;
        for i in 0..m {
            let p = (panels[i], panels[i + 1]);
            for j in i..m {
                let q = (panels[j], panels[j + 1]);
                self.pair_points(p, q, &mut pts);
                for pt in &pts {
                    let d = f.diff(pt.r, pt.gap) / pt.gap;
                    inner += pt.w * d * d;
                }
            }
        }
        let mut strip = 0.0;
        let mut tpts = Vec::new();
        for i in 0..m {
            self.tail_points((panels[i], panels[i + 1]), big_l, i == m - 1, &mut tpts);
            for &(r, w) in &tpts {
                let v = f.value(r);
                strip += w * v * v;
            }
        }
        self.c_ns * self.omega_n * (0.5 * inner + strip)
    }

    /// ∫_0^L |f|^p r^{n-1} dr · ω_n over the panels.
    pub fn profile_lp_pow<P: RadialProfile>(&self, f: &P, panels: &[f64], p: f64) -> f64 {
        let e = self.n as i32 - 1;
        let mut acc = 0.0;
        for w in panels.windows(2) {
            for (r, wr) in self.g12.mapped(w[0], w[1]) {
                acc += wr * f.value(r).abs().powf(p) * r.powi(e);
            }
        }
        self.omega_n * acc
    }
}

/// Assembled discrete forms on the hat basis of a grid.
///
/// L^p quantities are integrated element by element over the interpolants
/// of the nodal parts, |u|_p^p := ∫|u⁺_h|^p + ∫|u⁻_h|^p with u± taken
/// nodewise. The nodal parts then split every L^p term exactly, and a
/// function resolved by a single element is not over-weighted the way a
/// lumped (nodal) rule over-weights it.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub grid: Arc<RadialGrid>,
    pub params: Params,
    pub c_ns: f64,
    pub omega_n: f64,
    /// N×N, rows/columns indexed by the unknowns r₀ … r_{N-1}.
    pub stiffness: DMatrix<f64>,
    /// Consistent mass matrix ω_n ∫ φ_i φ_j r^{n-1}, N×N tridiagonal.
    pub mass: DMatrix<f64>,
    /// Per element, `LP_POINTS` pairs (t, ω_n w r^{n-1}) with t ∈ [0, 1]
    /// the local coordinate.
    pub lp_points: Vec<[f64; 2]>,
    /// First eigenvalue of K v = λ M v, computed at assembly.
    pub lambda1: f64,
    chol: Cholesky<f64, Dyn>,
    mass_chol: Cholesky<f64, Dyn>,
}

pub const LP_POINTS: usize = 12;

/// Assembles stiffness and mass for the hat basis of `grid`.
pub fn assemble_forms(grid: &Arc<RadialGrid>, params: &Params) -> Result<FormMatrices> {
    params.validate()?;
    if grid.n != params.n {
        bail!(Config, "grid dimension {} differs from n = {}", grid.n, params.n);
    }
    let quad = GagliardoQuadrature::new(params.n, params.s)?;
    assemble_with(&quad, grid, params)
}

pub fn assemble_with(quad: &GagliardoQuadrature, grid: &Arc<RadialGrid>, params: &Params) -> Result<FormMatrices> {
    let nodes = grid.nodes();
    let ne = grid.elements();
    let radius = grid.radius();
    let mut k = DMatrix::<f64>::zeros(ne, ne);
    let mut pts = Vec::new();
    let half = 0.5 * quad.c_ns * quad.omega_n;

    for e in 0..ne {
        let p = grid.element(e);
        let hp = p.1 - p.0;
        for f in e..ne {
            let q = grid.element(f);
            let hq = q.1 - q.0;
            quad.pair_points(p, q, &mut pts);
            // local unknowns: e, e+1 on P and f, f+1 on Q (duplicates merge)
            let idx = [e, e + 1, f, f + 1];
            let mut local = [[0.0f64; 4]; 4];
            for pt in &pts {
                // differences φ(r) - φ(ρ) divided by the gap
                let d = if e == f {
                    [1.0 / hp, -1.0 / hp, 0.0, 0.0]
                } else if f == e + 1 {
                    // shared node e+1 carried in slot 1
                    let (a, b) = (pt.x / hp, pt.y / hq);
                    [a / pt.gap, (b - a) / pt.gap, 0.0, -b / pt.gap]
                } else {
                    let (a, b) = (pt.x / hp, pt.y / hq);
                    [a / pt.gap, (1.0 - a) / pt.gap, -(1.0 - b) / pt.gap, -b / pt.gap]
                };
                for a in 0..4 {
                    if d[a] == 0.0 {
                        continue;
                    }
                    let wa = pt.w * d[a];
                    for b in 0..4 {
                        local[a][b] += wa * d[b];
                    }
                }
            }
            for a in 0..4 {
                let ia = idx[a];
                if ia >= ne {
                    continue;
                }
                for b in 0..4 {
                    let ib = idx[b];
                    if ib >= ne {
                        continue;
                    }
                    k[(ia, ib)] += half * local[a][b];
                }
            }
        }
    }

    // exterior strips
    let mut tpts = Vec::new();
    for e in 0..ne {
        let (a, b) = grid.element(e);
        let h = b - a;
        quad.tail_points((a, b), radius, e == ne - 1, &mut tpts);
        let mut local = [[0.0f64; 2]; 2];
        for &(r, w) in &tpts {
            if !w.is_finite() {
                bail!(Assembly, "exterior tail weight not finite at r = {r}");
            }
            let phi = [(b - r) / h, (r - a) / h];
            for i in 0..2 {
                for j in 0..2 {
                    local[i][j] += w * phi[i] * phi[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                if e + i < ne && e + j < ne {
                    k[(e + i, e + j)] += quad.c_ns * quad.omega_n * local[i][j];
                }
            }
        }
    }

    // enforce exact symmetry (only upper pairs were integrated, both halves filled)
    for i in 0..ne {
        for j in (i + 1)..ne {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if (0..ne).any(|i| !(k[(i, i)] > 0.0) || !k[(i, i)].is_finite()) {
        bail!(Assembly, "stiffness diagonal not positive");
    }

    let lp_points = element_points(quad, nodes);
    let mass = consistent_mass(&lp_points, ne);
    let chol = match k.clone().cholesky() {
        Some(c) => c,
        None => bail!(Assembly, "stiffness matrix is not positive definite"),
    };
    let mass_chol = match mass.clone().cholesky() {
        Some(c) => c,
        None => bail!(Assembly, "mass matrix is not positive definite"),
    };
    let mut forms = FormMatrices {
        grid: grid.clone(),
        params: params.with_radius(radius),
        c_ns: quad.c_ns,
        omega_n: quad.omega_n,
        stiffness: k,
        mass,
        lp_points,
        lambda1: f64::NAN,
        chol,
        mass_chol,
    };
    forms.lambda1 = crate::eigen::first_eigenvalue(&forms)?;
    Ok(forms)
}

fn element_points(quad: &GagliardoQuadrature, nodes: &[f64]) -> Vec<[f64; 2]> {
    let p = quad.n as i32 - 1;
    let mut out = Vec::with_capacity((nodes.len() - 1) * LP_POINTS);
    for e in 0..nodes.len() - 1 {
        let (a, b) = (nodes[e], nodes[e + 1]);
        for (t, w) in quad.g12.mapped(0.0, 1.0) {
            let r = a + t * (b - a);
            out.push([t, quad.omega_n * w * (b - a) * r.powi(p)]);
        }
    }
    out
}

fn consistent_mass(points: &[[f64; 2]], ne: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(ne, ne);
    for (e, chunk) in points.chunks(LP_POINTS).enumerate() {
        for &[t, w] in chunk {
            let phi = [1.0 - t, t];
            for i in 0..2 {
                for j in 0..2 {
                    if e + i < ne && e + j < ne {
                        m[(e + i, e + j)] += w * phi[i] * phi[j];
                    }
                }
            }
        }
    }
    m
}

impl FormMatrices {
    pub fn unknowns(&self) -> usize {
        self.stiffness.nrows()
    }

    /// (u, v)_s for unknown vectors of length N.
    pub fn form_vec(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.unknowns();
        let mut acc = 0.0;
        for j in 0..n {
            if v[j] == 0.0 {
                continue;
            }
            let col = self.stiffness.column(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * u[i];
            }
            acc += s * v[j];
        }
        acc
    }

    pub fn form(&self, u: &RadialFn, v: &RadialFn) -> f64 {
        self.form_vec(u.unknowns(), v.unknowns())
    }

    /// ‖u‖²_s = uᵀ K u.
    pub fn gagliardo_norm(&self, u: &RadialFn) -> f64 {
        self.form(u, u)
    }

    /// K u for a vector of unknowns.
    pub fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(u);
        (&self.stiffness * x).as_slice().to_vec()
    }

    /// K⁻¹ b via the Cholesky factor computed at assembly.
    pub fn stiffness_solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.chol.solve(&DVector::from_column_slice(b));
        x.as_slice().to_vec()
    }

    /// uᵀ M v.
    pub fn l2_inner(&self, u: &RadialFn, v: &RadialFn) -> f64 {
        let mv = self.mass_apply(v.unknowns());
        u.unknowns().iter().zip(&mv).map(|(a, b)| a * b).sum()
    }

    pub fn mass_apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.mass * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// M⁻¹ b.
    pub fn mass_solve(&self, b: &[f64]) -> Vec<f64> {
        self.mass_chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()
    }

    /// |u|_p^p over the nodal parts; `values` holds all N + 1 nodal values.
    pub fn lp_pow(&self, values: &[f64], p: f64) -> f64 {
        let mut acc = 0.0;
        for (e, chunk) in self.lp_points.chunks(LP_POINTS).enumerate() {
            let (a, b) = (values[e], values[e + 1]);
            let (pa, pb, ma, mb) = (a.max(0.0), b.max(0.0), (-a).max(0.0), (-b).max(0.0));
            let plus = pa > 0.0 || pb > 0.0;
            let minus = ma > 0.0 || mb > 0.0;
            for &[t, w] in chunk {
                if plus {
                    acc += w * (pa + t * (pb - pa)).powf(p);
                }
                if minus {
                    acc += w * (ma + t * (mb - ma)).powf(p);
                }
            }
        }
        acc
    }

    /// Gradient of (1/p)|u|_p^p with respect to the N unknowns.
    pub fn lp_grad(&self, values: &[f64], p: f64) -> Vec<f64> {
        let n = self.unknowns();
        let mut g = alloc::vec![0.0; n];
        for (e, chunk) in self.lp_points.chunks(LP_POINTS).enumerate() {
            let (a, b) = (values[e], values[e + 1]);
            let (pa, pb, ma, mb) = (a.max(0.0), b.max(0.0), (-a).max(0.0), (-b).max(0.0));
            for &[t, w] in chunk {
                let phi = [1.0 - t, t];
                let pv = pa + t * (pb - pa);
                let mv = ma + t * (mb - ma);
                for (k, &u) in [a, b].iter().enumerate() {
                    let i = e + k;
                    if i >= n {
                        continue;
                    }
                    if u > 0.0 {
                        g[i] += w * pv.powf(p - 1.0) * phi[k];
                    } else if u < 0.0 {
                        g[i] -= w * mv.powf(p - 1.0) * phi[k];
                    }
                }
            }
        }
        g
    }

    /// Hessian of (1/p)|u|_p^p; tridiagonal, returned as (diagonal, superdiagonal).
    pub fn lp_hessian(&self, values: &[f64], p: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.unknowns();
        let mut diag = alloc::vec![0.0; n];
        let mut off = alloc::vec![0.0; n.saturating_sub(1)];
        for (e, chunk) in self.lp_points.chunks(LP_POINTS).enumerate() {
            let (a, b) = (values[e], values[e + 1]);
            let (pa, pb, ma, mb) = (a.max(0.0), b.max(0.0), (-a).max(0.0), (-b).max(0.0));
            for &[t, w] in chunk {
                let phi = [1.0 - t, t];
                let pv = pa + t * (pb - pa);
                let mv = ma + t * (mb - ma);
                let sign = [a.partial_cmp(&0.0), b.partial_cmp(&0.0)];
                for k in 0..2 {
                    for l in k..2 {
                        let (i, j) = (e + k, e + l);
                        if j >= n || sign[k] != sign[l] {
                            continue;
                        }
                        let v = match sign[k] {
                            Some(core::cmp::Ordering::Greater) => pv,
                            Some(core::cmp::Ordering::Less) => mv,
                            _ => continue,
                        };
                        let h = (p - 1.0) * w * v.powf(p - 2.0) * phi[k] * phi[l];
                        if i == j {
                            diag[i] += h;
                        } else {
                            off[i] += h;
                        }
                    }
                }
            }
        }
        (diag, off)
    }

    pub fn lp_norm(&self, u: &RadialFn, p: f64) -> f64 {
        self.lp_pow(&u.values, p).powf(1.0 / p)
    }

    /// M⁻¹ K u, the discrete Riesz representative of (-Δ)^s u.
    pub fn apply_operator(&self, u: &RadialFn) -> Result<RadialFn> {
        let ku = self.stiffness_apply(u.unknowns());
        let out = self.mass_solve(&ku);
        if out.iter().any(|v| !v.is_finite()) {
            bail!(Assembly, "mass solve produced non-finite values");
        }
        Ok(RadialFn::from_unknowns(self.grid.clone(), &out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;

    #[test]
    fn tail_weight_at_origin_is_closed_form() {
        let q = GagliardoQuadrature::new(5, 0.3).unwrap();
        let t = q.tail_weight(0.0, 2.0, 2.0);
        let exact = sphere_measure(5) * 2f64.powf(-0.6) / 0.6;
        assert!(((t - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn tail_weight_matches_adaptive_integral() {
        let q = GagliardoQuadrature::new(3, 0.6).unwrap();
        let r = 0.7;
        let t = q.tail_weight(r, 0.3, 1.0);
        // independent: ρ = 1 + z/(1-z) maps [0,1) to [1,∞)
        let f = |z: f64| {
            let rho = 1.0 + z / (1.0 - z);
            q.kernel.eval_direct(r, rho).unwrap() * rho * rho / ((1.0 - z) * (1.0 - z))
        };
        let oracle = adaptive(f, 0.0, 1.0 - 1e-12, 1e-12, 0.0, 4000);
        assert!(((t - oracle.value) / oracle.value).abs() < 1e-8, "{t} vs {}", oracle.value);
    }

    #[test]
    fn element_points_integrate_polynomials() {
        let p = Params::new(4, 0.5, 2.0, 0.0).unwrap();
        let g = RadialGrid::build(&p, 32, 2.0, 2.0).unwrap();
        let q = GagliardoQuadrature::new(4, 0.5).unwrap();
        let pts = element_points(&q, g.nodes());
        let total: f64 = pts.iter().map(|x| x[1]).sum();
        let exact = sphere_measure(4) * 2f64.powi(4) / 4.0;
        assert!(((total - exact) / exact).abs() < 1e-13);
        // the mass matrix reproduces ∫ r² r³ for the interpolant of r² up to O(h²)
        let m = consistent_mass(&pts, 32);
        let v: Vec<f64> = g.nodes()[..32].iter().map(|r| r * r).collect();
        let ones = alloc::vec![1.0; 32];
        let mv = &m * DVector::from_column_slice(&v);
        let approx: f64 = mv.iter().zip(&ones).map(|(a, b)| a * b).sum();
        let exact = sphere_measure(4) * 2f64.powi(6) / 6.0;
        assert!(((approx - exact) / exact).abs() < 0.05);
    }
}
