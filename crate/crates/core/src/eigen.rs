//! First Dirichlet eigenvalue of the discrete s-Laplacian by inverse iteration.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::assembly::FormMatrices;
use crate::error::Result;
use crate::grid::RadialFn;

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Normalized to |v|₂ = 1 and v(0) > 0.
    pub vector: RadialFn,
    pub iterations: usize,
}

/// Smallest λ with K v = λ M v, by inverse power iteration with the
/// Cholesky factor of K. Stops when the Rayleigh quotient changes by less
/// than `rel_tol` relative.
pub fn first_eigenpair(forms: &FormMatrices, rel_tol: f64, max_iters: usize) -> Result<Eigenpair> {
    let n = forms.unknowns();
    // start from a positive bump; the ground state is one-signed
    let nodes = forms.grid.nodes();
    let radius = forms.grid.radius();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 - (nodes[i] / radius).powi(2)).collect();
    normalize(&mut v, forms);
    let mut lambda = rayleigh(forms, &v);
    for it in 1..=max_iters {
        let rhs = forms.mass_apply(&v);
        let mut next = forms.stiffness_solve(&rhs);
        normalize(&mut next, forms);
        let new_lambda = rayleigh(forms, &next);
        let change = (new_lambda - lambda).abs() / new_lambda.abs();
        v = next;
        lambda = new_lambda;
        if change < rel_tol {
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(Eigenpair {
                value: lambda,
                vector: RadialFn::from_unknowns(forms.grid.clone(), &v),
                iterations: it,
            });
        }
    }
    Err(crate::error::Error::Convergence {
        what: "inverse iteration for the first eigenvalue".into(),
        iterations: max_iters,
        residual: lambda,
    })
}

/// λ_{1,s} of the discrete problem with relative tolerance 1e-10.
pub fn first_eigenvalue(forms: &FormMatrices) -> Result<f64> {
    Ok(first_eigenpair(forms, 1e-12, 500)?.value)
}

fn mass_norm_sq(forms: &FormMatrices, v: &[f64]) -> f64 {
    forms.mass_apply(v).iter().zip(v).map(|(a, b)| a * b).sum()
}

fn normalize(v: &mut [f64], forms: &FormMatrices) {
    let norm = mass_norm_sq(forms, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

fn rayleigh(forms: &FormMatrices, v: &[f64]) -> f64 {
    let num = forms.form_vec(v, v);
    let den = mass_norm_sq(forms, v);
    num / den
}
