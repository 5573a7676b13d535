//! Spectral oracles on the model geometries: analytic eigenvalues and
//! harmonic-space dimensions, plus refinement monotonicity.

use std::sync::Arc;

use glmm_core::manifold::{assemble_dec, build_model, poincare_constant, ModelGeometry};

#[test]
fn torus_lambda1_approaches_one() {
    // side-2π flat torus: first nonzero eigenvalue is exactly 1
    let mut errs = Vec::new();
    for m in [32u32, 64] {
        let mesh = Arc::new(build_model(ModelGeometry::FlatTorus2d { grid: m }).unwrap());
        let dec = assemble_dec(&mesh).unwrap();
        let s = poincare_constant(&dec).unwrap();
        assert!(s.lambda1 > 0.0);
        errs.push((s.lambda1 - 1.0).abs());
    }
    assert!(errs[1] < 0.02, "λ₁ at m=64 off by {}", errs[1]);
    assert!(errs[1] < errs[0], "refinement did not improve λ₁");
}

#[test]
fn sphere_lambda1_approaches_two() {
    let mut errs = Vec::new();
    for k in [3u32, 4] {
        let mesh = Arc::new(build_model(ModelGeometry::UnitSphere { refinement: k }).unwrap());
        let dec = assemble_dec(&mesh).unwrap();
        let s = poincare_constant(&dec).unwrap();
        errs.push((s.lambda1 - 2.0).abs() / 2.0);
    }
    assert!(errs[1] < 0.02, "sphere λ₁ at k=4 off by {}", errs[1]);
    assert!(errs[1] < errs[0]);
}

#[test]
fn harmonic_dimensions_match_betti_hints() {
    for (model, expected) in [
        (ModelGeometry::UnitSphere { refinement: 2 }, 0usize),
        (ModelGeometry::FlatTorus2d { grid: 16 }, 2),
        (ModelGeometry::FlatTorus3d { grid: 8 }, 3),
    ] {
        let mesh = Arc::new(build_model(model).unwrap());
        let dec = assemble_dec(&mesh).unwrap();
        let s = poincare_constant(&dec).unwrap();
        assert_eq!(
            s.harmonic_dim, expected,
            "harmonic dimension on {}",
            mesh.model.name()
        );
        assert_eq!(s.harmonic_dim, mesh.betti1_hint);
        assert_eq!(s.harmonic_basis.len(), expected);
    }
}

#[test]
fn torus3d_lambda1_positive_and_near_one() {
    let mesh = Arc::new(build_model(ModelGeometry::FlatTorus3d { grid: 16 }).unwrap());
    let dec = assemble_dec(&mesh).unwrap();
    let s = poincare_constant(&dec).unwrap();
    assert!((s.lambda1 - 1.0).abs() < 0.05, "T³ λ₁ = {}", s.lambda1);
}
