//! Ginzburg-Landau min-max on discrete closed manifolds.
//!
//! The crate builds model geometries (round sphere, flat 2- and 3-tori) with
//! discrete exterior calculus operators, evaluates the Ginzburg-Landau energy
//! and its exact discrete gradient, constructs admissible two-parameter sweep
//! families from a planar vortex profile pulled back through a projected
//! embedding, locates mountain-pass critical points by flowing a family down
//! and Newton-refining its max slice, and computes the energy-concentration
//! diagnostics (prejacobian, Hodge decomposition, ball densities,
//! eta-ellipticity) on the refined fields.

pub mod concentration;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod minmax;
pub mod sweep;

pub use concentration::{
    ConcentrationReport, DensityProfile, DiagnosticsOptions, EllipticityFlags, HodgeParts,
    PreJacobian,
};
pub use energy::{ComplexField, EnergyReport, Potential, StressEnergy};
pub use error::{Error, Result};
pub use manifold::{DecOperators, MeshManifold, ModelGeometry, SpectralInfo};
pub use minmax::{FlowConfig, FlowHistory, MinMaxResult, SweepTable};
pub use sweep::{DiskFamily, SweepMap};

/// Formats a float with 17 significant digits, enough for bit-faithful
/// round-trips through the plain-text artifact formats.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
