//! Quadrature oracles written independently of the library: Gauss-Legendre
//! nodes and Γ come from external crates, everything else is computed here
//! from the defining integrals.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use statrs::function::gamma::gamma;

pub struct Rule {
    pts: Vec<(f64, f64)>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let g = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
        Rule {
            pts: g.into_node_weight_pairs().into_vec(),
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self.pts.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>()
    }

    /// ∫ over the interval between `end` and `other`, with panels halving
    /// toward `end` (`levels` of them, plus the last sliver).
    pub fn toward(&self, end: f64, other: f64, levels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut far = other;
        for _ in 0..levels {
            let near = end + 0.5 * (far - end);
            acc += self.integrate(near, far, &mut f);
            far = near;
        }
        acc += self.integrate(end, far, &mut f);
        if other < end {
            -acc
        } else {
            acc
        }
    }
}

/// |S^{k-1}|, the area of the unit sphere in ℝ^k.
pub fn sphere(k: u32) -> f64 {
    2.0 * PI.powf(k as f64 / 2.0) / gamma(k as f64 / 2.0)
}

pub fn c_ns(n: u32, s: f64) -> f64 {
    s * 4f64.powf(s) * gamma(0.5 * n as f64 + s) / (PI.powf(0.5 * n as f64) * gamma(1.0 - s))
}

pub struct Oracle {
    pub n: u32,
    pub s: f64,
    pub c_ns: f64,
    rule: Rule,
    sin_moment: f64,
}

impl Oracle {
    pub fn new(n: u32, s: f64) -> Self {
        assert!(n >= 2);
        Oracle {
            n,
            s,
            c_ns: c_ns(n, s),
            rule: Rule::new(16),
            sin_moment: PI.sqrt() * gamma(0.5 * (n as f64 - 1.0)) / gamma(0.5 * n as f64),
        }
    }

    fn m(&self) -> f64 {
        0.5 * (self.n as f64 + 2.0 * self.s)
    }

    /// ∫_0^π ((r-ρ)² + 4rρ sin²(t/2))^{-(n+2s)/2} sin^{n-2}t dt
    pub fn theta_integral(&self, r: f64, rho: f64) -> f64 {
        self.theta_with_gap(r, rho, (r - rho).abs())
    }

    /// Same, with |r - ρ| supplied by the caller where forming it would
    /// cancel.
    fn theta_with_gap(&self, r: f64, rho: f64, gap: f64) -> f64 {
        let a = gap * gap;
        let b = 4.0 * r * rho;
        let m = self.m();
        if b == 0.0 {
            return a.powf(-m) * self.sin_moment;
        }
        let p = self.n as i32 - 2;
        let f = |t: f64| {
            let h = (0.5 * t).sin();
            (a + b * h * h).powf(-m) * t.sin().powi(p)
        };
        let delta = gap / (r * rho).sqrt();
        let mut lo = 0.0;
        let mut hi = delta.min(PI);
        let mut acc = 0.0;
        loop {
            acc += self.rule.integrate(lo, hi, f);
            if hi >= PI {
                break acc;
            }
            lo = hi;
            hi = (2.0 * hi).min(PI);
        }
    }

    /// ∫_{S^{n-1}}∫_{S^{n-1}} |rθ - ρφ|^{-n-2s} dθ dφ
    pub fn kernel(&self, r: f64, rho: f64) -> f64 {
        sphere(self.n) * sphere(self.n - 1) * self.theta_integral(r, rho)
    }

    /// ∫_{|y|>R} |x - y|^{-n-2s} dy for |x| = r < R.
    pub fn exterior_weight(&self, r: f64, radius: f64) -> f64 {
        let far = 1e4 * radius;
        let dist = radius - r;
        let g = |rho: f64| rho.powi(self.n as i32 - 1) * sphere(self.n - 1) * self.theta_integral(r, rho);
        let mut acc = 0.0;
        let mut lo = radius;
        let mut w = dist;
        while lo < far {
            let hi = (lo + w).min(far);
            acc += self.rule.integrate(lo, hi, g);
            lo = hi;
            w *= 2.0;
        }
        acc + sphere(self.n) * far.powf(-2.0 * self.s) / (2.0 * self.s)
    }

    fn weight(&self, r: f64, rho: f64) -> f64 {
        self.weight_with_gap(r, rho, (r - rho).abs())
    }

    fn weight_with_gap(&self, r: f64, rho: f64, gap: f64) -> f64 {
        let k = self.n as i32 - 1;
        r.powi(k) * rho.powi(k) * sphere(self.n) * sphere(self.n - 1) * self.theta_with_gap(r, rho, gap)
    }

    /// (u, v)_s = (c/2)∫∫ (u(x)-u(y))(v(x)-v(y))|x-y|^{-n-2s} for hat
    /// expansions on `nodes` (values include the zero at R).
    pub fn bilinear(&self, nodes: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let ne = nodes.len() - 1;
        let zero_on = |w: &[f64], e: usize, f: usize| [e, e + 1, f, f + 1].iter().all(|&i| w[i] == 0.0);
        let mut interior = 0.0;
        for e in 0..ne {
            for f in e..ne {
                if zero_on(u, e, f) || zero_on(v, e, f) {
                    continue;
                }
                let val = match f - e {
                    0 => self.diagonal_block(nodes, u, v, e),
                    1 => self.corner_block(nodes, u, v, e),
                    _ => self.separated_block(nodes, u, v, e, f),
                };
                interior += if e == f { val } else { 2.0 * val };
            }
        }
        let radius = nodes[ne];
        let mut tail = 0.0;
        for e in 0..ne {
            if u[e] == 0.0 && u[e + 1] == 0.0 || v[e] == 0.0 && v[e + 1] == 0.0 {
                continue;
            }
            let (a, b) = (nodes[e], nodes[e + 1]);
            let g = |r: f64| {
                lin(nodes, u, e, r) * lin(nodes, v, e, r) * self.exterior_weight(r, radius) * r.powi(self.n as i32 - 1) * sphere(self.n)
            };
            tail += if e + 1 == ne {
                self.rule.toward(b, a, 24, g)
            } else {
                self.rule.integrate(a, b, g)
            };
        }
        self.c_ns * (0.5 * interior + tail)
    }

    /// ∫∫_{e×e}: (u(r)-u(ρ))(v(r)-v(ρ)) = u'v'(r-ρ)², twice the half below
    /// the diagonal; d = r - ρ = L τ^p with p = 1/(2-2s) flattens d^{1-2s}.
    fn diagonal_block(&self, nodes: &[f64], u: &[f64], v: &[f64], e: usize) -> f64 {
        let (a, b) = (nodes[e], nodes[e + 1]);
        let h = b - a;
        let slope = (u[e + 1] - u[e]) * (v[e + 1] - v[e]) / (h * h);
        let p = 1.0 / (2.0 - 2.0 * self.s);
        let inner = |r: f64| {
            let l = r - a;
            self.rule.toward(0.0, 1.0, 4, |tau| {
                let d = l * tau.powf(p);
                let jac = l * p * tau.powf(p - 1.0);
                d * d * self.weight_with_gap(r, r - d, d) * jac
            })
        };
        2.0 * slope * self.rule.toward(a, b, 24, inner)
    }

    /// Elements e and e+1 meeting at b; Duffy split at the shared corner.
    fn corner_block(&self, nodes: &[f64], u: &[f64], v: &[f64], e: usize) -> f64 {
        let (a, b, c) = (nodes[e], nodes[e + 1], nodes[e + 2]);
        let (hx, hy) = (b - a, c - b);
        let g = |x: f64, y: f64| {
            let (r, rho) = (b - x, b + y);
            let du = lin(nodes, u, e, r) - lin(nodes, u, e + 1, rho);
            let dv = lin(nodes, v, e, r) - lin(nodes, v, e + 1, rho);
            du * dv * self.weight(r, rho)
        };
        // x ∈ [0, hx], y = x (hy/hx) w  and  y ∈ [0, hy], x = y (hx/hy) w
        let lower = self.rule.toward(0.0, hx, 30, |x| {
            let k = x * hy / hx;
            self.rule.integrate(0.0, 1.0, |w| g(x, k * w) * k)
        });
        let upper = self.rule.toward(0.0, hy, 30, |y| {
            let k = y * hx / hy;
            self.rule.integrate(0.0, 1.0, |w| g(k * w, y) * k)
        });
        lower + upper
    }

    fn separated_block(&self, nodes: &[f64], u: &[f64], v: &[f64], e: usize, f: usize) -> f64 {
        let (a, b) = (nodes[e], nodes[e + 1]);
        let (c, d) = (nodes[f], nodes[f + 1]);
        let gap = c - b;
        let lx = ((b - a) / gap).log2().ceil().max(0.0) as usize + 1;
        let ly = ((d - c) / gap).log2().ceil().max(0.0) as usize + 1;
        self.rule.toward(b, a, lx, |r| {
            self.rule.toward(c, d, ly, |rho| {
                let du = lin(nodes, u, e, r) - lin(nodes, u, f, rho);
                let dv = lin(nodes, v, e, r) - lin(nodes, v, f, rho);
                du * dv * self.weight(r, rho)
            })
        })
    }

    /// (-Δ)^s f at |x| = r by spherical means. `diff(r², Δ)` must return
    /// f at squared radius r² + Δ minus f at r², without cancellation.
    pub fn fractional_laplacian(&self, diff: impl Fn(f64, f64) -> f64, r: f64, scale: f64) -> f64 {
        let p = self.n as i32 - 2;
        let r2 = r * r;
        let mean_gap = |rho: f64| {
            let g = |t: f64| diff(r2, rho * rho + 2.0 * r * rho * t.cos()) * t.sin().powi(p);
            let mut acc = 0.0;
            for k in 0..4 {
                acc += self.rule.integrate(PI * k as f64 / 4.0, PI * (k + 1) as f64 / 4.0, g);
            }
            -acc / self.sin_moment
        };
        let f = |rho: f64| rho.powf(-1.0 - 2.0 * self.s) * mean_gap(rho);
        let start = 0.25 * scale;
        let mut acc = self.rule.toward(0.0, start, 40, f);
        let far = 1e8 * scale.max(r);
        let mut lo = start;
        while lo < far {
            let hi = 2.0 * lo;
            acc += self.rule.integrate(lo, hi, f);
            lo = hi;
        }
        // the remainder beyond `far` is O(far^{-2s})
        self.c_ns * sphere(self.n) * acc
    }
}

/// Hat expansion restricted to element e, evaluated at r ∈ [r_e, r_{e+1}].
pub fn lin(nodes: &[f64], w: &[f64], e: usize, r: f64) -> f64 {
    let t = (r - nodes[e]) / (nodes[e + 1] - nodes[e]);
    w[e] + (w[e + 1] - w[e]) * t
}

/// Connected components of the strict-sign sets on an nr×ny grid
/// (row-major by r), by union-find over 4-neighbours.
pub fn union_find_regions(values: &[f64], nr: usize, ny: usize, tol: f64) -> usize {
    let mut parent: Vec<usize> = (0..values.len()).collect();
    fn root(p: &mut [usize], mut k: usize) -> usize {
        while p[k] != k {
            p[k] = p[p[k]];
            k = p[k];
        }
        k
    }
    let sign = |v: f64| if v > tol { 1 } else if v < -tol { -1 } else { 0 };
    for i in 0..nr {
        for j in 0..ny {
            let k = i * ny + j;
            let sk = sign(values[k]);
            if sk == 0 {
                continue;
            }
            for m in [(i + 1 < nr).then(|| k + ny), (j + 1 < ny).then(|| k + 1)].into_iter().flatten() {
                if sign(values[m]) == sk {
                    let (a, b) = (root(&mut parent, k), root(&mut parent, m));
                    parent[a] = b;
                }
            }
        }
    }
    (0..values.len())
        .filter(|&k| sign(values[k]) != 0 && root(&mut parent, k) == k)
        .count()
}
