//! Jacobi-preconditioned conjugate gradients for the deviation-field systems
//! `(2λ₂L + ρ_s diag(x_j²) + ρ_z I) δ = b`, optionally restricted to the
//! degree-weight centered subspace `{δ : 1_𝒞ᵀDδ = 0}`.
//!
//! The restricted solve is the null-space projected PCG: residuals are projected with
//! the preconditioner-weighted projector, so every iterate stays feasible and the
//! result minimises the quadratic over the subspace rather than projecting an
//! unconstrained solution after the fact.

use nalgebra::DVector;

use crate::graph::SpatialGraph;
use crate::sparse::CsrMatrix;

/// `shift·I + diag(diag_weights) + laplacian_scale·L`.
pub struct FieldSystem<'a> {
    pub laplacian: &'a CsrMatrix,
    pub laplacian_scale: f64,
    pub diag_weights: &'a [f64],
    pub shift: f64,
}

impl FieldSystem<'_> {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        if self.laplacian_scale != 0.0 {
            self.laplacian.matvec_into(x, out);
            for v in out.iter_mut() {
                *v *= self.laplacian_scale;
            }
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..x.len() {
            out[i] += (self.shift + self.diag_weights[i]) * x[i];
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let ld = self.laplacian.diagonal();
        (0..self.diag_weights.len())
            .map(|i| self.shift + self.diag_weights[i] + self.laplacian_scale * ld[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` (or its restriction to the centered subspace when `constraint` is
/// given) starting from `x`, which is overwritten. A warm start outside the subspace is
/// projected first.
pub fn solve(
    system: &FieldSystem<'_>,
    b: &DVector<f64>,
    x: &mut DVector<f64>,
    constraint: Option<&SpatialGraph>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let jacobi = system.diagonal();
    let inv_diag: Vec<f64> = jacobi.iter().map(|d| 1.0 / d).collect();

    let projector = constraint.map(|g| PreconditionedProjector::new(g, &inv_diag));
    if let Some(g) = constraint {
        g.project_orthogonal_in_place(x);
    }

    let feasible_norm = |v: &DVector<f64>| match constraint {
        Some(g) => {
            let mut w = v.clone();
            g.project_orthogonal_in_place(&mut w);
            w.norm()
        }
        None => v.norm(),
    };

    let b_norm = feasible_norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    // r = A x − b
    let mut ax = DVector::zeros(n);
    system.apply(x.as_slice(), ax.as_mut_slice());
    let mut r = &ax - b;
    let mut g = precondition(&mut r, &inv_diag, projector.as_ref());
    let mut rg = r.dot(&g);
    let mut p = -&g;
    let mut ap = DVector::zeros(n);

    let mut rel = feasible_norm(&r) / b_norm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        system.apply(p.as_slice(), ap.as_mut_slice());
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let step = rg / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(step, &ap, 1.0);
        g = precondition(&mut r, &inv_diag, projector.as_ref());
        let rg_new = r.dot(&g);
        let beta = rg_new / rg;
        rg = rg_new;
        p *= beta;
        p -= &g;
        it += 1;
        rel = feasible_norm(&r) / b_norm;
    }
    CgOutcome {
        iterations: it,
        relative_residual: rel,
        converged: rel <= tol,
    }
}

// g = J⁻¹(r − Cμ) with μ chosen so that Cᵀg = 0, C = [D1_𝒞]. The columns of C have
// disjoint supports, so CᵀJ⁻¹C is diagonal. r is replaced by r − Cμ: the C-part of the
// residual is the multiplier and does not decay, and leaving it in causes cancellation
// that slowly pushes the iterates off the subspace.
struct PreconditionedProjector<'a> {
    graph: &'a SpatialGraph,
    denom: Vec<f64>,
}

impl<'a> PreconditionedProjector<'a> {
    fn new(graph: &'a SpatialGraph, inv_diag: &[f64]) -> Self {
        let mut denom = vec![0.0; graph.n_components()];
        for (i, &c) in graph.components().iter().enumerate() {
            let d = graph.degrees()[i];
            denom[c] += d * d * inv_diag[i];
        }
        Self { graph, denom }
    }
}

fn precondition(
    r: &mut DVector<f64>,
    inv_diag: &[f64],
    projector: Option<&PreconditionedProjector<'_>>,
) -> DVector<f64> {
    match projector {
        None => DVector::from_fn(r.len(), |i, _| r[i] * inv_diag[i]),
        Some(pp) => {
            let comps = pp.graph.components();
            let deg = pp.graph.degrees();
            let mut num = vec![0.0; pp.denom.len()];
            for i in 0..r.len() {
                num[comps[i]] += deg[i] * r[i] * inv_diag[i];
            }
            let mu: Vec<f64> = num.iter().zip(&pp.denom).map(|(a, b)| a / b).collect();
            for i in 0..r.len() {
                r[i] -= mu[comps[i]] * deg[i];
            }
            DVector::from_fn(r.len(), |i, _| r[i] * inv_diag[i])
        }
    }
}
