//! Shared fixtures for the benchmark targets.

use std::sync::Arc;

use glmm_core::manifold::{assemble_dec, build_model, ModelGeometry};
use glmm_core::{DecOperators, MeshManifold};

/// A torus mesh with assembled operators at benchmark scale.
pub fn torus_fixture(m: u32) -> (Arc<MeshManifold>, DecOperators) {
    let mesh = Arc::new(build_model(ModelGeometry::FlatTorus2d { grid: m }).expect("mesh"));
    let dec = assemble_dec(&mesh).expect("dec");
    (mesh, dec)
}

/// A sphere mesh with assembled operators at benchmark scale.
pub fn sphere_fixture(k: u32) -> (Arc<MeshManifold>, DecOperators) {
    let mesh = Arc::new(build_model(ModelGeometry::UnitSphere { refinement: k }).expect("mesh"));
    let dec = assemble_dec(&mesh).expect("dec");
    (mesh, dec)
}
