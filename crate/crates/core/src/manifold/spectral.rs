//! Low-spectrum information: the Poincaré constant λ₁ and the discrete
//! harmonic 1-form space.

use crate::error::Result;
use crate::linalg::{smallest_eigenpairs, EigenOptions};

use super::DecOperators;

/// First nonzero scalar eigenvalue and the harmonic 1-form space.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// First nonzero eigenvalue of the scalar Laplacian (Poincaré constant).
    pub lambda1: f64,
    /// Dimension of the kernel of the 1-form Hodge Laplacian.
    pub harmonic_dim: usize,
    /// ★1-orthonormal basis of the harmonic space (edge forms).
    pub harmonic_basis: Vec<Vec<f64>>,
    pub lambda1_sweeps: usize,
    pub harmonic_sweeps: usize,
}

/// Computes λ₁ from an eigensolve of the scalar Laplacian restricted to
/// zero-average functions, and the harmonic 1-form space from the low end of
/// the 1-form Hodge Laplacian spectrum.
pub fn poincare_constant(dec: &DecOperators) -> Result<SpectralInfo> {
    let l0 = &dec.scalar_laplacian;
    let star0 = dec.star0.clone();
    let total: f64 = star0.iter().sum();
    let mean_project = move |v: &mut [f64]| {
        let m: f64 = v.iter().zip(&star0).map(|(x, w)| x * w).sum::<f64>() / total;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let scalar = smallest_eigenpairs(
        &|x: &[f64], y: &mut [f64]| l0.matvec(x, y),
        &l0.diagonal(),
        &dec.star0,
        Some(&mean_project),
        None,
        &EigenOptions {
            k: 2,
            shift: 0.0,
            seed: 0x5eed_0001,
            tol: 1e-10,
            residual_tol: None,
            max_sweeps: 300,
        },
    )?;
    let lambda1 = scalar.values[0];

    // kernel counting only needs the near-zero eigenvalues separated from
    // the O(λ₁) cluster; a tight tolerance would chase the discretization
    // splitting of that cluster (≈ h² relative) for thousands of sweeps
    let l1 = &dec.hodge_laplacian_1;
    let k = (dec.mesh.betti1_hint + 2).min(dec.mesh.edge_count());
    let shift = (0.5 * lambda1).max(0.05);
    let one_forms = smallest_eigenpairs(
        &|x: &[f64], y: &mut [f64]| l1.matvec(x, y),
        &l1.diagonal(),
        &dec.star1,
        None,
        None,
        &EigenOptions {
            k,
            shift,
            seed: 0x5eed_0002,
            tol: 1e-3,
            residual_tol: None,
            max_sweeps: 300,
        },
    )?;
    let scale = one_forms
        .values
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(lambda1);
    let kernel_tol = 1e-8 * scale;
    let harmonic_dim = one_forms.values.iter().filter(|&&v| v < kernel_tol).count();
    // polish the kernel block alone with a residual gate so the basis
    // vectors are accurate enough for Hodge projections
    let harmonic_basis = if harmonic_dim > 0 {
        let polished = smallest_eigenpairs(
            &|x: &[f64], y: &mut [f64]| l1.matvec(x, y),
            &l1.diagonal(),
            &dec.star1,
            None,
            Some(&one_forms.vectors[..harmonic_dim]),
            &EigenOptions {
                k: harmonic_dim,
                shift,
                seed: 0x5eed_0003,
                tol: 1e-10,
                residual_tol: Some(1e-10),
                max_sweeps: 300,
            },
        )?;
        polished.vectors
    } else {
        Vec::new()
    };

    Ok(SpectralInfo {
        lambda1,
        harmonic_dim,
        harmonic_basis,
        lambda1_sweeps: scalar.sweeps,
        harmonic_sweeps: one_forms.sweeps,
    })
}
