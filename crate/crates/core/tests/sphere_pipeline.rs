//! End-to-end checks on sphere critical points at desk scale: winding of the
//! modified current around a vortex, the trivial-cohomology side of the
//! Hodge dichotomy, and the refinement behavior of the inner-variation
//! residuals.

use std::sync::Arc;

use glmm_core::concentration::{
    hodge_decompose, modified_current, winding_number, zero_clusters,
};
use glmm_core::energy::stress_energy;
use glmm_core::manifold::{assemble_dec, build_model, poincare_constant, ModelGeometry};
use glmm_core::minmax::{min_max_once, FlowConfig, MinMaxResult};
use glmm_core::sweep::build_sweep_map;
use glmm_core::{DecOperators, MeshManifold};

fn sphere_saddle(k: u32, eps: f64) -> (Arc<MeshManifold>, DecOperators, MinMaxResult) {
    let mesh = Arc::new(build_model(ModelGeometry::UnitSphere { refinement: k }).unwrap());
    let dec = assemble_dec(&mesh).unwrap();
    let sweep = build_sweep_map(&dec, 11).unwrap();
    let cfg = FlowConfig {
        max_iters: 600,
        ..FlowConfig::default()
    };
    let r = min_max_once(&dec, &sweep, eps, (3, 8), &cfg, 1e-9, 300).unwrap();
    (mesh, dec, r)
}

#[test]
fn sphere_hodge_has_no_harmonic_part_and_integer_winding() {
    let (mesh, dec, r) = sphere_saddle(3, 0.15);
    assert!(r.nontrivial);
    let spectral = poincare_constant(&dec).unwrap();
    assert_eq!(spectral.harmonic_dim, 0);
    let parts = hodge_decompose(&dec, &spectral, &r.refined).unwrap();
    assert!(
        parts.harmonic_l2 <= 1e-8 * parts.gamma_l2,
        "harmonic part {} vs gamma {}",
        parts.harmonic_l2,
        parts.gamma_l2
    );
    assert!(parts.residual_l2 <= 1e-8 * parts.gamma_l2);

    // winding of γ around a zero cluster is quantized only when the region
    // boundary stays where |u|² ≥ 3/4 (γ is closed there); pick the test
    // radius accordingly
    let clusters = zero_clusters(&dec, &r.refined);
    assert!(!clusters.is_empty(), "refined sphere saddle has no zeros");
    let gamma = modified_current(&dec, &r.refined);
    let h = mesh.max_edge_length();
    let mut tested = 0;
    let mut nonzero = 0;
    for c in &clusters {
        let dist = mesh.graph_distances(c.representative, None);
        let radius = [0.3, 0.4, 0.5, 0.6].into_iter().find(|&radius| {
            (0..mesh.vertex_count())
                .filter(|&v| dist[v] > radius && dist[v] <= radius + 2.0 * h)
                .all(|v| {
                    let z = r.refined.values[v];
                    z[0] * z[0] + z[1] * z[1] >= 0.75
                })
        });
        let Some(radius) = radius else { continue };
        let region: Vec<usize> = (0..mesh.cell_count())
            .filter(|&f| mesh.faces[f].iter().all(|&v| dist[v] <= radius))
            .collect();
        let w = winding_number(&dec, &gamma, &region);
        let nearest = w.round();
        assert!(
            (w - nearest).abs() <= 0.05,
            "winding {w} not within 0.05 of an integer"
        );
        tested += 1;
        if nearest.abs() > 0.5 {
            nonzero += 1;
        }
    }
    assert!(tested >= 1, "no cluster admitted an admissible test radius");
    assert!(nonzero >= 1, "no cluster carries winding");
}

#[test]
fn stress_residuals_decrease_under_refinement() {
    // rotations pair to exactly zero (antisymmetric gradient against the
    // symmetric tensor) and the saddle often pins to symmetric positions
    // where conformal fields cancel too; a generic tangent field probes the
    // stationarity defect honestly
    let generic_tangent = |mesh: &MeshManifold| -> glmm_core::energy::VectorField {
        (0..mesh.vertex_count())
            .map(|v| {
                let p = mesh.position(v);
                let w = [
                    (3.0 * p[2]).sin() + 0.2,
                    (2.0 * p[0]).cos() - 0.1,
                    p[1].sin() + 0.5,
                ];
                let wn = w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
                vec![w[0] - wn * p[0], w[1] - wn * p[1], w[2] - wn * p[2]]
            })
            .collect()
    };
    let mut norms = Vec::new();
    for k in [2u32, 3] {
        let (mesh, dec, r) = sphere_saddle(k, 0.25);
        assert!(r.nontrivial);
        let s = stress_energy(&dec, &r.refined, &[generic_tangent(&mesh)]);
        norms.push(s.residuals[0].abs());
    }
    assert!(
        norms[1] < norms[0],
        "stress residuals did not decrease: {norms:?}"
    );
}
