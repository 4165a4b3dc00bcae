//! Pointwise reaction terms and the full method-of-lines right-hand side.

use rayon::prelude::*;

use crate::stencil::laplacian_into;
use crate::types::{BoundaryKind, Field2D, GridSpec, ModelParams, SimState};

/// Time derivative of a [`SimState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub d_normal: Field2D,
    pub d_tumor: Field2D,
    pub d_acid: Field2D,
}

impl StateDerivative {
    pub fn zeros(n: usize) -> Self {
        StateDerivative {
            d_normal: Field2D::zeros(n),
            d_tumor: Field2D::zeros(n),
            d_acid: Field2D::zeros(n),
        }
    }
}

/// Reaction terms at one point: returns `(dN, dA, dH)`.
///
/// ```text
/// dN = r_N − μ_N N − β₁ N A − α_H γ_H N H
/// dA = r_A A (1 − A/k_A) − (μ_A + ε_A) A − β₃ N A
/// dH = ν A − τ_H H − γ_H N H
/// ```
#[inline]
pub fn reaction_rhs(n: f64, a: f64, h: f64, p: &ModelParams) -> (f64, f64, f64) {
    let dn = p.r_n - p.mu_n * n - p.beta_1 * n * a - p.alpha_h * p.gamma_h * n * h;
    let da = p.r_a * a * (1.0 - a / p.k_a) - (p.mu_a + p.eps_a) * a - p.beta_3 * n * a;
    let dh = p.nu * a - p.tau_h * h - p.gamma_h * n * h;
    (dn, da, dh)
}

/// Reaction plus diffusion for the whole grid.
pub fn full_rhs(s: &SimState, p: &ModelParams, grid: &GridSpec) -> StateDerivative {
    let mut out = StateDerivative::zeros(grid.nodes());
    full_rhs_into(s, p, grid, &mut out);
    out
}

/// Allocation-free variant of [`full_rhs`].
///
/// Under `DirichletZero` the derivatives of A and H on boundary nodes are
/// exactly zero; N keeps its reaction derivative there.
pub fn full_rhs_into(s: &SimState, p: &ModelParams, grid: &GridSpec, out: &mut StateDerivative) {
    let n = grid.nodes();
    laplacian_into(&s.tumor, grid, out.d_tumor.values_mut());
    laplacian_into(&s.acid, grid, out.d_acid.values_mut());
    let dirichlet = grid.boundary() == BoundaryKind::DirichletZero;

    out.d_normal
        .values_mut()
        .par_chunks_mut(n)
        .zip(out.d_tumor.values_mut().par_chunks_mut(n))
        .zip(out.d_acid.values_mut().par_chunks_mut(n))
        .enumerate()
        .with_min_len(8)
        .for_each(|(i, ((dn_row, da_row), dh_row))| {
            let n_row = s.normal.row(i);
            let a_row = s.tumor.row(i);
            let h_row = s.acid.row(i);
            let edge_row = i == 0 || i == n - 1;
            for j in 0..n {
                let (dn, da, dh) = reaction_rhs(n_row[j], a_row[j], h_row[j], p);
                dn_row[j] = dn;
                if dirichlet && (edge_row || j == 0 || j == n - 1) {
                    da_row[j] = 0.0;
                    dh_row[j] = 0.0;
                } else {
                    da_row[j] = p.xi_a * da_row[j] + da;
                    dh_row[j] = p.xi_h * dh_row[j] + dh;
                }
            }
        });
}
