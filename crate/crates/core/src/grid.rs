//! Graded radial grids on [0, R] and piecewise-linear radial functions.

use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::constants::Params;
use crate::error::{bail, Result};

pub const MIN_ELEMENTS: usize = 16;

/// Nodes 0 = r₀ < r₁ < … < r_N = R. Functions on the grid vanish for r ≥ R.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    pub gamma_inner: f64,
    pub gamma_outer: f64,
    /// Gauss points per element for one-dimensional element integrals.
    pub quad_points: usize,
    pub n: u32,
}

impl RadialGrid {
    /// Two-sided graded mesh: for ξ = i/N ≤ 1/2 the node is R·(2ξ)^{γ_in}/2,
    /// mirrored with γ_out on the outer half. γ = 1 on both sides is uniform.
    pub fn build(params: &Params, elements: usize, gamma_inner: f64, gamma_outer: f64) -> Result<Self> {
        if elements < MIN_ELEMENTS {
            bail!(Config, "grid needs at least {MIN_ELEMENTS} elements, got {elements}");
        }
        if !(gamma_inner >= 1.0 && gamma_outer >= 1.0) {
            bail!(Config, "grading exponents must be >= 1 (got {gamma_inner}, {gamma_outer})");
        }
        let r = params.radius;
        let nf = elements as f64;
        let mut nodes = Vec::with_capacity(elements + 1);
        for i in 0..=elements {
            let xi = i as f64 / nf;
            let x = if 2 * i <= elements {
                0.5 * (2.0 * xi).powf(gamma_inner)
            } else {
                1.0 - 0.5 * (2.0 * (1.0 - xi)).powf(gamma_outer)
            };
            nodes.push(r * x);
        }
        nodes[0] = 0.0;
        nodes[elements] = r;
        Ok(RadialGrid {
            nodes,
            gamma_inner,
            gamma_outer,
            quad_points: 12,
            n: params.n,
        })
    }

    /// Grid from explicit nodes, which must start at 0 and increase strictly.
    pub fn from_nodes(n: u32, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            bail!(Config, "grid needs at least two elements");
        }
        if nodes[0] != 0.0 {
            bail!(Config, "first node must be the origin");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(Config, "grid nodes must increase strictly");
        }
        Ok(RadialGrid {
            nodes,
            gamma_inner: f64::NAN,
            gamma_outer: f64::NAN,
            quad_points: 12,
            n,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of elements N; there are N unknowns (the node at R is fixed to 0).
    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn radius(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Same grid scaled by t > 0.
    pub fn dilate(&self, t: f64) -> Self {
        RadialGrid {
            nodes: self.nodes.iter().map(|r| r * t).collect(),
            ..self.clone()
        }
    }

    /// Element containing r (the last element for r ≥ R).
    pub fn locate(&self, r: f64) -> usize {
        let n = self.elements();
        match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }
}

/// Radial function given by nodal values with linear interpolation in r.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFn {
    pub grid: Arc<RadialGrid>,
    /// N + 1 values; the last one is the boundary value 0.
    pub values: Vec<f64>,
}

impl RadialFn {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes.len() {
            bail!(
                Config,
                "expected {} nodal values, got {}",
                grid.nodes.len(),
                values.len()
            );
        }
        if values[values.len() - 1] != 0.0 {
            bail!(Config, "radial function must vanish at r = R");
        }
        Ok(RadialFn { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = alloc::vec![0.0; grid.nodes.len()];
        RadialFn { grid, values }
    }

    /// Samples f at the nodes and sets the boundary value to 0.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Self {
        let mut values: Vec<f64> = grid.nodes.iter().map(|&r| f(r)).collect();
        let last = values.len() - 1;
        values[last] = 0.0;
        RadialFn { grid, values }
    }

    /// Builds from the N interior unknowns.
    pub fn from_unknowns(grid: Arc<RadialGrid>, unknowns: &[f64]) -> Self {
        let mut values = unknowns.to_vec();
        values.push(0.0);
        debug_assert_eq!(values.len(), grid.nodes.len());
        RadialFn { grid, values }
    }

    pub fn unknowns(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }

    /// Piecewise-linear interpolant; 0 for r ≥ R.
    pub fn eval(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        if r >= self.grid.radius() || r < 0.0 {
            return 0.0;
        }
        let e = self.grid.locate(r);
        let (a, b) = (nodes[e], nodes[e + 1]);
        let t = (r - a) / (b - a);
        self.values[e] * (1.0 - t) + self.values[e + 1] * t
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// u⁻ = max(-u, 0), so that u = u⁺ - u⁻.
    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        RadialFn {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// αu⁺ - βv⁻ assembled nodewise from two one-signed functions.
    pub fn combine(alpha: f64, plus: &RadialFn, beta: f64, minus: &RadialFn) -> Self {
        RadialFn {
            grid: plus.grid.clone(),
            values: plus
                .values
                .iter()
                .zip(minus.values.iter())
                .map(|(p, m)| alpha * p - beta * m)
                .collect(),
        }
    }
}
