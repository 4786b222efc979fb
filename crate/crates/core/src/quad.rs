//! One-dimensional quadrature rules: Gauss-Legendre, geometrically graded
//! composite rules for endpoint singularities, and adaptive Gauss-Kronrod.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "Gauss-Legendre needs at least one point");
        let mut nodes = alloc::vec![0.0; m];
        let mut weights = alloc::vec![0.0; m];
        let mf = m as f64;
        for i in 0..(m + 1) / 2 {
            // Tricomi initial guess, then Newton on P_m
            let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Points and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let mf = m as f64;
    let d = mf * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Jacobi rule for ∫_0^1 x^a g(x) dx, a > -1, by Golub-Welsch.
/// Returns (node, weight) with the weight already including x^a.
pub fn gauss_jacobi_unit(m: usize, a: f64) -> Vec<(f64, f64)> {
    assert!(a > -1.0 && m >= 1);
    // monic recurrence for (1-x)^0 (1+x)^a on [-1, 1]
    let (al, be) = (0.0, a);
    let mut t = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        let s = 2.0 * kf + al + be;
        t[(k, k)] = if k == 0 {
            (be - al) / (al + be + 2.0)
        } else {
            (be * be - al * al) / (s * (s + 2.0))
        };
        if k + 1 < m {
            let j = kf + 1.0;
            let sj = 2.0 * j + al + be;
            let b2 = 4.0 * j * (j + al) * (j + be) * (j + al + be) / (sj * sj * (sj + 1.0) * (sj - 1.0));
            t[(k, k + 1)] = b2.sqrt();
            t[(k + 1, k)] = b2.sqrt();
        }
    }
    // μ₀ = ∫_{-1}^{1} (1+x)^a dx = 2^{a+1}/(a+1); mapped to [0, 1] this is 1/(a+1)
    let mu0 = 1.0 / (a + 1.0);
    let eig = SymmetricEigen::new(t);
    let mut out: Vec<(f64, f64)> = (0..m)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (0.5 * (eig.eigenvalues[j] + 1.0), mu0 * v0 * v0)
        })
        .collect();
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// Composite rule on [0, 1] with panels [σ^{k+1}, σ^k] refined geometrically
/// toward 0, for integrands behaving like x^a·(smooth) with a > -1. The
/// innermost panel [0, σ^L] uses a Gauss-Jacobi rule for the weight x^a, so
/// its nodes stay representable even when a is close to -1.
#[derive(Debug, Clone)]
pub struct GradedRule {
    pub points: Vec<(f64, f64)>,
}

impl GradedRule {
    pub fn new(ratio: f64, levels: usize, gauss: &GaussLegendre, exponent: f64) -> Self {
        assert!(exponent > -1.0, "graded rule needs an integrable endpoint singularity");
        let mut points = Vec::with_capacity((levels + 1) * gauss.len());
        let mut hi = 1.0;
        for _ in 0..levels {
            let lo = hi * ratio;
            points.extend(gauss.mapped(lo, hi));
            hi = lo;
        }
        for (x, w) in gauss_jacobi_unit(gauss.len(), exponent) {
            // caller supplies x^a g(x); divide the weight by x^a
            points.push((hi * x, hi * w * x.powf(-exponent)));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        GradedRule { points }
    }

    /// σ = 1/4, 20 levels, 12-point panels.
    pub fn standard(exponent: f64) -> Self {
        Self::new(0.25, 20, &GaussLegendre::new(12), exponent)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points and weights mapped to [a, b] with the refinement at `a`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.points.iter().map(move |&(x, w)| (a + h * x, h * w))
    }
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss-Kronrod (G7/K15) on [a, b] with bisection.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Integral {
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    intervals.push((a, b, v, e));
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) && intervals.len() < max_intervals {
        // split the interval with the largest error estimate
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, it)| if it.3 > acc.1 { (i, it.3) } else { acc });
        let (lo, hi, v0, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // re-sum to limit cancellation drift
    let value: f64 = intervals.iter().map(|it| it.2).sum();
    let error: f64 = intervals.iter().map(|it| it.3).sum();
    Integral {
        value,
        error,
        converged: error <= abs_tol.max(rel_tol * value.abs()),
    }
}
