//! Energy-concentration diagnostics on critical fields: the prejacobian and
//! its divergence, the pointwise gradient bound, sublevel-set volumes, the
//! discrete Hodge decomposition of the modified current, ball-density
//! profiles of the normalized energy measure, and the eta-ellipticity scan.

use std::io::{BufRead, Write as IoWrite};
use std::sync::Arc;

use rayon::prelude::*;

use crate::energy::{
    c2_add, c2_cross, c2_dot, c2_norm, c2_norm2, c2_scale, c2_sub, vertex_energy_measure,
    ComplexField, StressEnergy,
};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::linalg::{cg_solve, CgStop};
use crate::manifold::{DecOperators, SpectralInfo};

/// The prejacobian edge form ju = u¹du² − u²du¹ and its derived residuals.
#[derive(Debug, Clone)]
pub struct PreJacobian {
    /// Edge form: ju on edge (a → b) is the cross product u_a × u_b, which
    /// is exactly the midpoint rule ⟨ū, du⟩-rotated form.
    pub ju: Vec<f64>,
    /// ‖d* ju‖ in the vertex inner product; small only at critical points.
    pub divergence_residual: f64,
    /// Curl two-form d(ju).
    pub curl: Vec<f64>,
    pub curl_l2: f64,
}

/// Computes the prejacobian via averaged vertex values.
pub fn prejacobian(dec: &DecOperators, u: &ComplexField) -> PreJacobian {
    let mesh = &dec.mesh;
    let ju: Vec<f64> = mesh
        .edges
        .iter()
        .map(|&[a, b]| c2_cross(u.values[a], u.values[b]))
        .collect();
    let dstar = dec.codifferential1(&ju);
    let divergence_residual = dec.norm0(&dstar);
    let curl = dec.exterior_derivative1(&ju);
    let curl_l2 = dec.norm2(&curl);
    PreJacobian {
        ju,
        divergence_residual,
        curl,
        curl_l2,
    }
}

/// Max relative defect of the pointwise splitting
/// |u|²|du|² = |ju|² + |u|²|d|u||² in its per-edge midpoint form, which is
/// the Lagrange identity |ū|²|du|² = (ū × du)² + ⟨ū, du⟩²; exact to rounding.
pub fn pointwise_identity_defect(u: &ComplexField) -> f64 {
    let mut worst = 0.0f64;
    for &[a, b] in &u.mesh.edges {
        let mid = c2_scale(0.5, c2_add(u.values[a], u.values[b]));
        let du = c2_sub(u.values[b], u.values[a]);
        let lhs = c2_norm2(mid) * c2_norm2(du);
        let rhs = c2_cross(mid, du).powi(2) + c2_dot(mid, du).powi(2);
        let defect = (lhs - rhs).abs() / lhs.max(1.0);
        worst = worst.max(defect);
    }
    worst
}

/// Signed integral of an edge form along a closed vertex loop.
pub fn loop_integral(dec: &DecOperators, form: &[f64], vertices: &[usize]) -> Result<f64> {
    let mesh = &dec.mesh;
    let mut acc = 0.0;
    for i in 0..vertices.len() {
        let a = vertices[i];
        let b = vertices[(i + 1) % vertices.len()];
        let (e, _) = mesh.vertex_edges[a]
            .iter()
            .find(|&&(_, w)| w == b)
            .copied()
            .ok_or_else(|| {
                Error::Validation(format!("loop vertices {a} → {b} are not adjacent"))
            })?;
        let sign = if mesh.edges[e][0] == a { 1.0 } else { -1.0 };
        acc += sign * form[e];
    }
    Ok(acc)
}

/// ∮ γ / 2π around the boundary of a face region, via the exact discrete
/// Stokes identity (sum of dγ over the region).
pub fn winding_number(dec: &DecOperators, gamma: &[f64], faces: &[usize]) -> f64 {
    let dg = dec.exterior_derivative1(gamma);
    let total: f64 = faces.iter().map(|&f| dg[f]).sum();
    total / (2.0 * std::f64::consts::PI)
}

/// The C² cutoff profile: 1 on [0, ½], 1/t on [¾, 1], joined on [½, ¾] by a
/// plateau-shaped derivative (smoothstep rise to a plateau, cubic dive into
/// the 1/t branch) keeping |f′| ≤ 2 — the max is ≈ 1.85 on the plateau.
pub struct CutoffProfile;

const CUT_A: f64 = 0.04; // rise width (in t units of the transition)
const CUT_C: f64 = 0.05; // dive width
const CUT_B: f64 = 0.25 - CUT_C; // plateau end

fn cutoff_plateau() -> f64 {
    // solves ∫ f′ over the transition = 1/3 exactly
    let numer = 1.0 / 3.0 + CUT_C * (8.0 / 9.0 + 32.0 * CUT_C / 81.0);
    let denom = CUT_B - CUT_A / 2.0 + CUT_C / 2.0;
    numer / denom
}

impl CutoffProfile {
    pub fn eval(t: f64) -> f64 {
        if t <= 0.5 {
            return 1.0;
        }
        if t >= 0.75 {
            return 1.0 / t;
        }
        let p = cutoff_plateau();
        let tau = t - 0.5;
        if tau <= CUT_A {
            let x = tau / CUT_A;
            // ∫ P·smoothstep = P·a·(x³ − x⁴/2)
            1.0 + p * CUT_A * (x * x * x - 0.5 * x * x * x * x)
        } else if tau <= CUT_B {
            1.0 + p * CUT_A / 2.0 + p * (tau - CUT_A)
        } else {
            let f_b = 1.0 + p * CUT_A / 2.0 + p * (CUT_B - CUT_A);
            let x = (tau - CUT_B) / CUT_C;
            let end_slope = 128.0 / 27.0 * CUT_C;
            // ∫ of the Hermite cubic h with h(0)=P, h′(0)=0, h(1)=−16/9,
            // h′(1)=end_slope
            let int_h = p * x + (-16.0 / 9.0 - p) * (x * x * x - 0.5 * x * x * x * x)
                + end_slope * (0.25 * x * x * x * x - x * x * x / 3.0);
            f_b + CUT_C * int_h
        }
    }

    pub fn derivative(t: f64) -> f64 {
        if t <= 0.5 {
            return 0.0;
        }
        if t >= 0.75 {
            return -1.0 / (t * t);
        }
        let p = cutoff_plateau();
        let tau = t - 0.5;
        if tau <= CUT_A {
            let x = tau / CUT_A;
            p * (3.0 * x * x - 2.0 * x * x * x)
        } else if tau <= CUT_B {
            p
        } else {
            let x = (tau - CUT_B) / CUT_C;
            let end_slope = 128.0 / 27.0 * CUT_C;
            p + (-16.0 / 9.0 - p) * (3.0 * x * x - 2.0 * x * x * x)
                + end_slope * (x * x * x - x * x)
        }
    }

    /// f extended beyond t = 1 by the same 1/t branch (fields with |u| > 1
    /// only arise in adversarial inputs).
    pub fn eval_clamped(t: f64) -> f64 {
        if t > 1.0 {
            1.0 / t
        } else {
            Self::eval(t.max(0.0))
        }
    }
}

/// The modified current γ = f(|u|²)·ju as an edge form (midpoint |u|²).
pub fn modified_current(dec: &DecOperators, u: &ComplexField) -> Vec<f64> {
    let mesh = &dec.mesh;
    mesh.edges
        .iter()
        .map(|&[a, b]| {
            let mid = c2_scale(0.5, c2_add(u.values[a], u.values[b]));
            let t = c2_norm2(mid);
            CutoffProfile::eval_clamped(t) * c2_cross(u.values[a], u.values[b])
        })
        .collect()
}

/// Hodge split γ = dθ + d*ξ + h of the modified current.
#[derive(Debug, Clone)]
pub struct HodgeParts {
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub xi: Vec<f64>,
    pub dtheta: Vec<f64>,
    pub dxi: Vec<f64>,
    /// Projection of γ onto the discrete harmonic space.
    pub harmonic: Vec<f64>,
    pub gamma_l2: f64,
    pub dtheta_l2: f64,
    pub dxi_l2: f64,
    pub harmonic_l2: f64,
    /// ‖γ − dθ − d*ξ − h‖ (solver-tolerance small by discrete exactness).
    pub residual_l2: f64,
    /// ∫ |dθ|².
    pub dtheta_sq: f64,
    pub theta_iterations: usize,
    pub xi_iterations: usize,
}

/// Solves the two potential problems (0-form Poisson for θ, 2-form Hodge
/// Laplacian for ξ), projects onto the harmonic basis, and reports the
/// decomposition residual.
pub fn hodge_decompose(
    dec: &DecOperators,
    spectral: &SpectralInfo,
    u: &ComplexField,
) -> Result<HodgeParts> {
    let gamma = modified_current(dec, u);
    hodge_decompose_form(dec, spectral, &gamma)
}

/// Hodge decomposition of an arbitrary edge form.
pub fn hodge_decompose_form(
    dec: &DecOperators,
    spectral: &SpectralInfo,
    gamma: &[f64],
) -> Result<HodgeParts> {
    let mesh = &dec.mesh;
    let nv = mesh.vertex_count();
    let nf = mesh.face_count();

    // θ: L0 θ = d0ᵀ ★1 γ (consistent: the right side has zero mean)
    let weighted: Vec<f64> = gamma.iter().zip(&dec.star1).map(|(g, w)| g * w).collect();
    let rhs0 = dec.d0.apply_transpose(&weighted);
    let mut theta = vec![0.0; nv];
    let l0 = &dec.scalar_laplacian;
    let out0 = cg_solve(
        &|x: &[f64], y: &mut [f64]| l0.matvec(x, y),
        &rhs0,
        &mut theta,
        Some(&l0.diagonal()),
        1e-12,
        40 * nv,
    );
    // normalize the free constant to the zero-mean representative
    let total: f64 = dec.star0.iter().sum();
    let mean: f64 = theta.iter().zip(&dec.star0).map(|(t, m)| t * m).sum::<f64>() / total;
    theta.iter_mut().for_each(|t| *t -= mean);
    if out0.stop != CgStop::Converged && out0.relative_residual > 1e-9 {
        return Err(Error::LinearSolver {
            iterations: out0.iterations,
            residual: out0.relative_residual,
        });
    }

    // ξ: L2 ξ = ★2 d1 γ (singular but consistent; kernel components are
    // harmonic 2-forms, annihilated by d*)
    let dgamma = dec.exterior_derivative1(gamma);
    let mut xi = vec![0.0; nf];
    let gamma_scale = dec.norm1(gamma) / mesh.min_edge_length().max(f64::MIN_POSITIVE);
    let mut xi_iterations = 0;
    if dec.norm2(&dgamma) > 1e-12 * gamma_scale.max(1e-300) {
        let l2 = dec.assemble_l2();
        let rhs2: Vec<f64> = dgamma.iter().zip(&dec.star2).map(|(g, w)| g * w).collect();
        let out2 = cg_solve(
            &|x: &[f64], y: &mut [f64]| l2.matvec(x, y),
            &rhs2,
            &mut xi,
            Some(&l2.diagonal()),
            1e-12,
            40 * nf,
        );
        if out2.stop != CgStop::Converged && out2.relative_residual > 1e-9 {
            return Err(Error::LinearSolver {
                iterations: out2.iterations,
                residual: out2.relative_residual,
            });
        }
        xi_iterations = out2.iterations;
    }

    let dtheta = dec.exterior_derivative0(&theta);
    let dxi = dec.codifferential2(&xi);
    let mut harmonic = vec![0.0; gamma.len()];
    for basis in &spectral.harmonic_basis {
        let coef = dec.ip1(gamma, basis);
        for (h, b) in harmonic.iter_mut().zip(basis) {
            *h += coef * b;
        }
    }
    let residual: Vec<f64> = (0..gamma.len())
        .map(|e| gamma[e] - dtheta[e] - dxi[e] - harmonic[e])
        .collect();

    Ok(HodgeParts {
        gamma_l2: dec.norm1(gamma),
        dtheta_l2: dec.norm1(&dtheta),
        dxi_l2: dec.norm1(&dxi),
        harmonic_l2: dec.norm1(&harmonic),
        residual_l2: dec.norm1(&residual),
        dtheta_sq: dec.ip1(&dtheta, &dtheta),
        gamma: gamma.to_vec(),
        theta,
        xi,
        dtheta,
        dxi,
        harmonic,
        theta_iterations: out0.iterations,
        xi_iterations,
    })
}

/// One row of the dθ-subcriticality table.
#[derive(Debug, Clone, Copy)]
pub struct DThetaRow {
    pub epsilon: f64,
    pub abs_log_eps: f64,
    pub dtheta_sq: f64,
    /// ∫|dθ|² / |log ε|^{1/2} — the bounded quantity.
    pub ratio_sqrt: f64,
    /// ∫|dθ|² / |log ε| — the vanishing trend.
    pub ratio_linear: f64,
}

/// Tabulates ∫|dθ_ε|² against the |log ε| scalings across a sweep of Hodge
/// parts; needs at least 3 ε values.
pub fn dtheta_subcritical(sweep: &[(f64, f64)]) -> Result<Vec<DThetaRow>> {
    if sweep.len() < 3 {
        return Err(Error::Validation(format!(
            "dθ subcriticality needs ≥ 3 ε values, got {}",
            sweep.len()
        )));
    }
    Ok(sweep
        .iter()
        .map(|&(epsilon, dtheta_sq)| {
            let l = epsilon.ln().abs();
            DThetaRow {
                epsilon,
                abs_log_eps: l,
                dtheta_sq,
                ratio_sqrt: dtheta_sq / l.sqrt(),
                ratio_linear: dtheta_sq / l,
            }
        })
        .collect())
}

/// One row of the sublevel-volume table.
#[derive(Debug, Clone, Copy)]
pub struct SublevelRow {
    pub t: f64,
    pub volume: f64,
    /// volume·(1−t)²/ε², the fitted constant of the core-volume bound.
    pub c_fit: f64,
}

/// Measures |{|u|² ≤ t}| for each threshold.
pub fn sublevel_volume(dec: &DecOperators, u: &ComplexField, t_list: &[f64]) -> Result<Vec<SublevelRow>> {
    if t_list.iter().any(|&t| !(0.0..1.0).contains(&t)) {
        return Err(Error::Validation("sublevel thresholds must lie in [0, 1)".into()));
    }
    let eps2 = u.epsilon * u.epsilon;
    Ok(t_list
        .iter()
        .map(|&t| {
            let volume: f64 = u
                .values
                .iter()
                .zip(&dec.star0)
                .filter(|(v, _)| c2_norm2(**v) <= t)
                .map(|(_, m)| m)
                .sum();
            SublevelRow {
                t,
                volume,
                c_fit: volume * (1.0 - t) * (1.0 - t) / eps2,
            }
        })
        .collect())
}

/// Pointwise gradient-bound check: per-cell defect
/// max(0, |du|² − (1/ε² + A)(1 − |u|²)).
#[derive(Debug, Clone)]
pub struct BochnerReport {
    pub a_const: f64,
    pub max_defect: f64,
    pub violating_fraction: f64,
    pub defects: Vec<f64>,
}

pub fn bochner_check(dec: &DecOperators, u: &ComplexField, a_const: f64) -> BochnerReport {
    let mesh = &dec.mesh;
    let bound_coeff = 1.0 / (u.epsilon * u.epsilon) + a_const;
    let defects: Vec<f64> = (0..mesh.cell_count())
        .map(|c| {
            let grad = &dec.cell_grads[c];
            let verts = mesh.cell(c);
            let g0 = grad.gradient(&verts.iter().map(|&v| u.values[v][0]).collect::<Vec<_>>());
            let g1 = grad.gradient(&verts.iter().map(|&v| u.values[v][1]).collect::<Vec<_>>());
            let du2: f64 =
                g0.iter().map(|x| x * x).sum::<f64>() + g1.iter().map(|x| x * x).sum::<f64>();
            let mod2: f64 =
                verts.iter().map(|&v| c2_norm2(u.values[v])).sum::<f64>() / verts.len() as f64;
            (du2 - bound_coeff * (1.0 - mod2)).max(0.0)
        })
        .collect();
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    let violating = defects.iter().filter(|&&d| d > 0.0).count();
    BochnerReport {
        a_const,
        max_defect,
        violating_fraction: violating as f64 / defects.len().max(1) as f64,
        defects,
    }
}

/// A connected cluster of low-|u| vertices.
#[derive(Debug, Clone)]
pub struct ZeroCluster {
    pub vertices: Vec<usize>,
    /// Vertex of minimal |u| (ties broken by index).
    pub representative: usize,
    pub min_modulus: f64,
}

/// Detects zero clusters: vertices with |u|² < ¼, grouped by adjacency.
pub fn zero_clusters(dec: &DecOperators, u: &ComplexField) -> Vec<ZeroCluster> {
    let mesh = &dec.mesh;
    let nv = mesh.vertex_count();
    let low: Vec<bool> = u.values.iter().map(|&v| c2_norm2(v) < 0.25).collect();
    let mut seen = vec![false; nv];
    let mut clusters = Vec::new();
    for start in 0..nv {
        if !low[start] || seen[start] {
            continue;
        }
        let mut queue = vec![start];
        seen[start] = true;
        let mut members = Vec::new();
        while let Some(v) = queue.pop() {
            members.push(v);
            for &(_, w) in &mesh.vertex_edges[v] {
                if low[w] && !seen[w] {
                    seen[w] = true;
                    queue.push(w);
                }
            }
        }
        members.sort_unstable();
        let representative = members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                c2_norm(u.values[a])
                    .partial_cmp(&c2_norm(u.values[b]))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        let min_modulus = c2_norm(u.values[representative]);
        clusters.push(ZeroCluster {
            vertices: members,
            representative,
            min_modulus,
        });
    }
    clusters
}

/// Where a density profile is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    ZeroCluster,
    Control,
}

impl ProfileKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProfileKind::ZeroCluster => "cluster",
            ProfileKind::Control => "control",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "cluster" => Ok(ProfileKind::ZeroCluster),
            "control" => Ok(ProfileKind::Control),
            other => Err(Error::Validation(format!("unknown profile kind '{other}'"))),
        }
    }
}

/// Normalized ball masses μ(B_r)/(ω_{n−2} r^{n−2}) around one center, where
/// μ = e_ε dv / |log ε| and balls are shortest-path (Dijkstra) balls.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub center: usize,
    pub kind: ProfileKind,
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    pub values: Vec<f64>,
}

/// Volume of the unit (n−2)-ball: 1 for n = 2, 2 for n = 3.
fn omega_codim2(dim: usize) -> f64 {
    match dim {
        2 => 1.0,
        _ => 2.0,
    }
}

pub fn density_profile(
    dec: &DecOperators,
    u: &ComplexField,
    center: usize,
    radii: &[f64],
    kind: ProfileKind,
) -> Result<DensityProfile> {
    let mesh = &dec.mesh;
    if center >= mesh.vertex_count() {
        return Err(Error::Validation(format!("center vertex {center} out of range")));
    }
    let h = mesh.max_edge_length();
    if radii.iter().any(|&r| r < 3.0 * h) {
        return Err(Error::Resolution(format!(
            "density radius below the resolution floor 3h = {:.4}",
            3.0 * h
        )));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let log_eps = u.epsilon.ln().abs().max(f64::MIN_POSITIVE);
    let mu = vertex_energy_measure(dec, u);
    let rmax = radii.last().copied().unwrap_or(0.0);
    let dist = mesh.graph_distances(center, Some(rmax));
    let n = mesh.dim;
    let mut masses = Vec::with_capacity(radii.len());
    let mut values = Vec::with_capacity(radii.len());
    for &r in &radii {
        let mass: f64 = mu
            .iter()
            .zip(&dist)
            .filter(|(_, d)| **d <= r)
            .map(|(m, _)| m)
            .sum::<f64>()
            / log_eps;
        masses.push(mass);
        values.push(mass / (omega_codim2(n) * r.powi(n as i32 - 2)));
    }
    Ok(DensityProfile {
        center,
        kind,
        radii,
        masses,
        values,
    })
}

/// Per-vertex eta-ellipticity flags at radius δ₀.
#[derive(Debug, Clone)]
pub struct EllipticityFlags {
    pub eta0: f64,
    pub delta0: f64,
    /// |u|² threshold of the implication (7/8 unless reconfigured).
    pub modulus_sq_threshold: f64,
    /// Vertices whose ball energy is below the smallness threshold.
    pub low_energy: Vec<bool>,
    pub low_energy_count: usize,
    /// Flagged vertices failing the |u|² lower bound.
    pub violations: usize,
}

/// Scans every vertex: r^{2−n}∫_{B_r}e_ε ≤ η₀|log(ε/r)| at r = δ₀ marks it
/// low-energy; the cross-check counts flagged vertices with |u|² below the
/// threshold. A falsifiable diagnostic, not an identity.
pub fn eta_ellipticity_scan(
    dec: &DecOperators,
    u: &ComplexField,
    eta0: f64,
    delta0: f64,
    modulus_sq_threshold: f64,
) -> Result<EllipticityFlags> {
    if u.epsilon >= delta0 {
        return Err(Error::Validation(format!(
            "eta-ellipticity needs ε < δ₀ (ε = {}, δ₀ = {delta0})",
            u.epsilon
        )));
    }
    let mesh = &dec.mesh;
    let nv = mesh.vertex_count();
    let energy_v = vertex_energy_measure(dec, u); // raw, not normalized
    let n = mesh.dim as i32;
    let threshold = delta0.powi(n - 2) * eta0 * (u.epsilon / delta0).ln().abs();
    let low_energy: Vec<bool> = (0..nv)
        .into_par_iter()
        .map(|v| {
            let dist = mesh.graph_distances(v, Some(delta0));
            let ball: f64 = energy_v
                .iter()
                .zip(&dist)
                .filter(|(_, d)| **d <= delta0)
                .map(|(m, _)| m)
                .sum();
            ball <= threshold
        })
        .collect();
    let low_energy_count = low_energy.iter().filter(|&&b| b).count();
    let violations = low_energy
        .iter()
        .zip(&u.values)
        .filter(|(flag, v)| **flag && c2_norm2(**v) < modulus_sq_threshold)
        .count();
    Ok(EllipticityFlags {
        eta0,
        delta0,
        modulus_sq_threshold,
        low_energy,
        low_energy_count,
        violations,
    })
}

/// Diagnostic toggles and constants.
#[derive(Debug, Clone)]
pub struct DiagnosticsOptions {
    pub hodge: bool,
    pub density: bool,
    pub ellipticity: bool,
    pub bochner: bool,
    pub stress: bool,
    pub eta0: f64,
    pub delta0: f64,
    pub modulus_sq_threshold: f64,
    /// Ball radii for the density profiles; derived from the mesh scale when
    /// empty.
    pub density_radii: Vec<f64>,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            hodge: true,
            density: true,
            ellipticity: true,
            bochner: true,
            stress: false,
            eta0: 0.01,
            delta0: 0.5,
            modulus_sq_threshold: 7.0 / 8.0,
            density_radii: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HodgeSummary {
    pub gamma_l2: f64,
    pub dtheta_l2: f64,
    pub dxi_l2: f64,
    pub harmonic_l2: f64,
    pub residual_l2: f64,
    pub dtheta_sq: f64,
}

#[derive(Debug, Clone)]
pub struct BochnerSummary {
    pub a_const: f64,
    pub max_defect: f64,
    pub violating_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ClusterSummary {
    pub representative: usize,
    pub size: usize,
    pub min_modulus: f64,
}

#[derive(Debug, Clone)]
pub struct EllipticitySummary {
    pub eta0: f64,
    pub delta0: f64,
    pub modulus_sq_threshold: f64,
    pub low_energy_count: usize,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct StressSummary {
    pub residuals: Vec<f64>,
    pub trace_defect: f64,
}

/// The persisted summary of all concentration diagnostics on one field.
#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub epsilon: f64,
    pub mesh_checksum: u64,
    pub h_mesh: f64,
    pub div_residual: f64,
    pub curl_l2: f64,
    pub identity_defect: f64,
    pub bochner: Option<BochnerSummary>,
    pub sublevel: Vec<SublevelRow>,
    pub hodge: Option<HodgeSummary>,
    pub zero_clusters: Vec<ClusterSummary>,
    pub density: Vec<DensityProfile>,
    pub ellipticity: Option<EllipticitySummary>,
    pub stress: Option<StressSummary>,
    /// Paths (relative to the report) of persisted form files.
    pub form_files: Vec<String>,
}

/// Runs the enabled diagnostics on a field and assembles the report; the
/// rich Hodge parts are also returned when computed.
pub fn analyze_field(
    dec: &DecOperators,
    spectral: &SpectralInfo,
    u: &ComplexField,
    stress: Option<&StressEnergy>,
    opts: &DiagnosticsOptions,
) -> Result<(ConcentrationReport, Option<HodgeParts>)> {
    let mesh = &dec.mesh;
    let h = mesh.max_edge_length();
    let pj = prejacobian(dec, u);
    let identity_defect = pointwise_identity_defect(u);

    let bochner = opts
        .bochner
        .then(|| bochner_check(dec, u, mesh.ricci_neg_max))
        .map(|b| BochnerSummary {
            a_const: b.a_const,
            max_defect: b.max_defect,
            violating_fraction: b.violating_fraction,
        });

    let sublevel = sublevel_volume(dec, u, &[0.25, 0.5, 0.75, 0.9])?;

    let (hodge_summary, hodge_parts) = if opts.hodge {
        let parts = hodge_decompose(dec, spectral, u)?;
        (
            Some(HodgeSummary {
                gamma_l2: parts.gamma_l2,
                dtheta_l2: parts.dtheta_l2,
                dxi_l2: parts.dxi_l2,
                harmonic_l2: parts.harmonic_l2,
                residual_l2: parts.residual_l2,
                dtheta_sq: parts.dtheta_sq,
            }),
            Some(parts),
        )
    } else {
        (None, None)
    };

    let clusters = zero_clusters(dec, u);
    let cluster_summaries: Vec<ClusterSummary> = clusters
        .iter()
        .map(|c| ClusterSummary {
            representative: c.representative,
            size: c.vertices.len(),
            min_modulus: c.min_modulus,
        })
        .collect();

    let mut profiles = Vec::new();
    if opts.density && !clusters.is_empty() {
        let radii = if opts.density_radii.is_empty() {
            default_density_radii(h, opts.delta0)
        } else {
            opts.density_radii.clone()
        };
        if !radii.is_empty() {
            for c in &clusters {
                profiles.push(density_profile(
                    dec,
                    u,
                    c.representative,
                    &radii,
                    ProfileKind::ZeroCluster,
                )?);
            }
            if let Some(control) = control_vertex(dec, &clusters) {
                profiles.push(density_profile(
                    dec,
                    u,
                    control,
                    &radii,
                    ProfileKind::Control,
                )?);
            }
        }
    }

    let ellipticity = if opts.ellipticity && u.epsilon < opts.delta0 {
        let flags = eta_ellipticity_scan(dec, u, opts.eta0, opts.delta0, opts.modulus_sq_threshold)?;
        Some(EllipticitySummary {
            eta0: flags.eta0,
            delta0: flags.delta0,
            modulus_sq_threshold: flags.modulus_sq_threshold,
            low_energy_count: flags.low_energy_count,
            violations: flags.violations,
        })
    } else {
        None
    };

    let stress_summary = stress.map(|s| StressSummary {
        residuals: s.residuals.clone(),
        trace_defect: s.trace_defect,
    });

    Ok((
        ConcentrationReport {
            epsilon: u.epsilon,
            mesh_checksum: mesh.checksum(),
            h_mesh: h,
            div_residual: pj.divergence_residual,
            curl_l2: pj.curl_l2,
            identity_defect,
            bochner,
            sublevel,
            hodge: hodge_summary,
            zero_clusters: cluster_summaries,
            density: profiles,
            ellipticity,
            stress: stress_summary,
            form_files: Vec::new(),
        },
        hodge_parts,
    ))
}

/// Radii from 3h up to max(δ₀, 6h), six points.
fn default_density_radii(h: f64, delta0: f64) -> Vec<f64> {
    let lo = 3.0 * h;
    let hi = delta0.max(6.0 * h);
    if hi <= lo {
        return vec![lo];
    }
    (0..6)
        .map(|i| lo + (hi - lo) * i as f64 / 5.0)
        .collect()
}

/// Vertex maximizing the minimal distance to all zero-cluster
/// representatives.
pub fn control_vertex(dec: &DecOperators, clusters: &[ZeroCluster]) -> Option<usize> {
    if clusters.is_empty() {
        return None;
    }
    let mesh = &dec.mesh;
    let mut min_dist = vec![f64::INFINITY; mesh.vertex_count()];
    for c in clusters {
        let d = mesh.graph_distances(c.representative, None);
        for (md, dv) in min_dist.iter_mut().zip(&d) {
            *md = md.min(*dv);
        }
    }
    min_dist
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
}

// --- report persistence ---

pub fn write_report<W: IoWrite>(report: &ConcentrationReport, out: &mut W) -> Result<()> {
    writeln!(out, "glreport 1")?;
    writeln!(out, "eps {}", fmt_f64(report.epsilon))?;
    writeln!(out, "mesh {:016x}", report.mesh_checksum)?;
    writeln!(out, "h_mesh {}", fmt_f64(report.h_mesh))?;
    writeln!(out, "[prejacobian]")?;
    writeln!(out, "div_residual {}", fmt_f64(report.div_residual))?;
    writeln!(out, "curl_l2 {}", fmt_f64(report.curl_l2))?;
    writeln!(out, "identity_defect {}", fmt_f64(report.identity_defect))?;
    if let Some(b) = &report.bochner {
        writeln!(out, "[bochner]")?;
        writeln!(out, "a_const {}", fmt_f64(b.a_const))?;
        writeln!(out, "max_defect {}", fmt_f64(b.max_defect))?;
        writeln!(out, "violating_fraction {}", fmt_f64(b.violating_fraction))?;
    }
    writeln!(out, "[sublevel]")?;
    writeln!(out, "rows {}", report.sublevel.len())?;
    for r in &report.sublevel {
        writeln!(out, "{} {} {}", fmt_f64(r.t), fmt_f64(r.volume), fmt_f64(r.c_fit))?;
    }
    if let Some(hg) = &report.hodge {
        writeln!(out, "[hodge]")?;
        writeln!(out, "gamma_l2 {}", fmt_f64(hg.gamma_l2))?;
        writeln!(out, "dtheta_l2 {}", fmt_f64(hg.dtheta_l2))?;
        writeln!(out, "dxi_l2 {}", fmt_f64(hg.dxi_l2))?;
        writeln!(out, "harmonic_l2 {}", fmt_f64(hg.harmonic_l2))?;
        writeln!(out, "residual_l2 {}", fmt_f64(hg.residual_l2))?;
        writeln!(out, "dtheta_sq {}", fmt_f64(hg.dtheta_sq))?;
    }
    writeln!(out, "[zeros]")?;
    writeln!(out, "clusters {}", report.zero_clusters.len())?;
    for c in &report.zero_clusters {
        writeln!(
            out,
            "cluster {} {} {}",
            c.representative,
            c.size,
            fmt_f64(c.min_modulus)
        )?;
    }
    writeln!(out, "[density]")?;
    writeln!(out, "profiles {}", report.density.len())?;
    for p in &report.density {
        writeln!(out, "profile {} {} rows {}", p.center, p.kind.label(), p.radii.len())?;
        for i in 0..p.radii.len() {
            writeln!(
                out,
                "{} {} {}",
                fmt_f64(p.radii[i]),
                fmt_f64(p.masses[i]),
                fmt_f64(p.values[i])
            )?;
        }
    }
    if let Some(e) = &report.ellipticity {
        writeln!(out, "[ellipticity]")?;
        writeln!(out, "eta0 {}", fmt_f64(e.eta0))?;
        writeln!(out, "delta0 {}", fmt_f64(e.delta0))?;
        writeln!(out, "modulus_sq_threshold {}", fmt_f64(e.modulus_sq_threshold))?;
        writeln!(out, "low_energy_count {}", e.low_energy_count)?;
        writeln!(out, "violations {}", e.violations)?;
    }
    if let Some(s) = &report.stress {
        writeln!(out, "[stress]")?;
        writeln!(out, "trace_defect {}", fmt_f64(s.trace_defect))?;
        writeln!(out, "residuals {}", s.residuals.len())?;
        for r in &s.residuals {
            writeln!(out, "{}", fmt_f64(*r))?;
        }
    }
    writeln!(out, "[forms]")?;
    writeln!(out, "files {}", report.form_files.len())?;
    for f in &report.form_files {
        writeln!(out, "{f}")?;
    }
    Ok(())
}

pub fn read_report<R: BufRead>(reader: R, label: &str) -> Result<ConcentrationReport> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut i = 0usize;
    let err = |i: usize, m: &str| Error::parse(label, i + 1, m);
    let take = |i: &mut usize| -> Result<&String> {
        let line = lines.get(*i).ok_or_else(|| err(*i, "unexpected end of report"))?;
        *i += 1;
        Ok(line)
    };
    let kv_f64 = |i: &mut usize, key: &str| -> Result<f64> {
        let line = lines.get(*i).ok_or_else(|| err(*i, "unexpected end of report"))?;
        *i += 1;
        line.strip_prefix(key)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(*i - 1, &format!("expected '{key} <float>'")))
    };
    let kv_usize = |i: &mut usize, key: &str| -> Result<usize> {
        let line = lines.get(*i).ok_or_else(|| err(*i, "unexpected end of report"))?;
        *i += 1;
        line.strip_prefix(key)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(*i - 1, &format!("expected '{key} <int>'")))
    };

    if take(&mut i)?.trim() != "glreport 1" {
        return Err(err(0, "not a glreport file"));
    }
    let epsilon = kv_f64(&mut i, "eps")?;
    let mesh_line = take(&mut i)?;
    let mesh_checksum = mesh_line
        .strip_prefix("mesh ")
        .and_then(|s| u64::from_str_radix(s.trim(), 16).ok())
        .ok_or_else(|| err(i - 1, "bad mesh line"))?;
    let h_mesh = kv_f64(&mut i, "h_mesh")?;
    if take(&mut i)?.trim() != "[prejacobian]" {
        return Err(err(i - 1, "expected [prejacobian]"));
    }
    let div_residual = kv_f64(&mut i, "div_residual")?;
    let curl_l2 = kv_f64(&mut i, "curl_l2")?;
    let identity_defect = kv_f64(&mut i, "identity_defect")?;

    let mut report = ConcentrationReport {
        epsilon,
        mesh_checksum,
        h_mesh,
        div_residual,
        curl_l2,
        identity_defect,
        bochner: None,
        sublevel: Vec::new(),
        hodge: None,
        zero_clusters: Vec::new(),
        density: Vec::new(),
        ellipticity: None,
        stress: None,
        form_files: Vec::new(),
    };

    while i < lines.len() {
        let section = take(&mut i)?.trim().to_string();
        match section.as_str() {
            "[bochner]" => {
                report.bochner = Some(BochnerSummary {
                    a_const: kv_f64(&mut i, "a_const")?,
                    max_defect: kv_f64(&mut i, "max_defect")?,
                    violating_fraction: kv_f64(&mut i, "violating_fraction")?,
                });
            }
            "[sublevel]" => {
                let rows = kv_usize(&mut i, "rows")?;
                for _ in 0..rows {
                    let line = take(&mut i)?;
                    let v: Vec<f64> = line
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| err(i - 1, "bad sublevel row")))
                        .collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(err(i - 1, "sublevel row needs 3 columns"));
                    }
                    report.sublevel.push(SublevelRow {
                        t: v[0],
                        volume: v[1],
                        c_fit: v[2],
                    });
                }
            }
            "[hodge]" => {
                report.hodge = Some(HodgeSummary {
                    gamma_l2: kv_f64(&mut i, "gamma_l2")?,
                    dtheta_l2: kv_f64(&mut i, "dtheta_l2")?,
                    dxi_l2: kv_f64(&mut i, "dxi_l2")?,
                    harmonic_l2: kv_f64(&mut i, "harmonic_l2")?,
                    residual_l2: kv_f64(&mut i, "residual_l2")?,
                    dtheta_sq: kv_f64(&mut i, "dtheta_sq")?,
                });
            }
            "[zeros]" => {
                let n = kv_usize(&mut i, "clusters")?;
                for _ in 0..n {
                    let line = take(&mut i)?;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    if toks.len() != 4 || toks[0] != "cluster" {
                        return Err(err(i - 1, "bad cluster line"));
                    }
                    report.zero_clusters.push(ClusterSummary {
                        representative: toks[1].parse().map_err(|_| err(i - 1, "bad cluster"))?,
                        size: toks[2].parse().map_err(|_| err(i - 1, "bad cluster"))?,
                        min_modulus: toks[3].parse().map_err(|_| err(i - 1, "bad cluster"))?,
                    });
                }
            }
            "[density]" => {
                let n = kv_usize(&mut i, "profiles")?;
                for _ in 0..n {
                    let head = take(&mut i)?;
                    let toks: Vec<&str> = head.split_whitespace().collect();
                    if toks.len() != 5 || toks[0] != "profile" || toks[3] != "rows" {
                        return Err(err(i - 1, "bad profile header"));
                    }
                    let center: usize = toks[1].parse().map_err(|_| err(i - 1, "bad center"))?;
                    let kind = ProfileKind::from_label(toks[2])?;
                    let rows: usize = toks[4].parse().map_err(|_| err(i - 1, "bad rows"))?;
                    let mut radii = Vec::new();
                    let mut masses = Vec::new();
                    let mut values = Vec::new();
                    for _ in 0..rows {
                        let line = take(&mut i)?;
                        let v: Vec<f64> = line
                            .split_whitespace()
                            .map(|t| t.parse().map_err(|_| err(i - 1, "bad profile row")))
                            .collect::<Result<_>>()?;
                        if v.len() != 3 {
                            return Err(err(i - 1, "profile row needs 3 columns"));
                        }
                        radii.push(v[0]);
                        masses.push(v[1]);
                        values.push(v[2]);
                    }
                    report.density.push(DensityProfile {
                        center,
                        kind,
                        radii,
                        masses,
                        values,
                    });
                }
            }
            "[ellipticity]" => {
                report.ellipticity = Some(EllipticitySummary {
                    eta0: kv_f64(&mut i, "eta0")?,
                    delta0: kv_f64(&mut i, "delta0")?,
                    modulus_sq_threshold: kv_f64(&mut i, "modulus_sq_threshold")?,
                    low_energy_count: kv_usize(&mut i, "low_energy_count")?,
                    violations: kv_usize(&mut i, "violations")?,
                });
            }
            "[stress]" => {
                let trace_defect = kv_f64(&mut i, "trace_defect")?;
                let n = kv_usize(&mut i, "residuals")?;
                let mut residuals = Vec::with_capacity(n);
                for _ in 0..n {
                    let line = take(&mut i)?;
                    residuals.push(
                        line.trim()
                            .parse()
                            .map_err(|_| err(i - 1, "bad stress residual"))?,
                    );
                }
                report.stress = Some(StressSummary {
                    residuals,
                    trace_defect,
                });
            }
            "[forms]" => {
                let n = kv_usize(&mut i, "files")?;
                for _ in 0..n {
                    report.form_files.push(take(&mut i)?.trim().to_string());
                }
            }
            other => {
                return Err(err(i - 1, &format!("unknown section '{other}'")));
            }
        }
    }
    Ok(report)
}

/// Persists a scalar form (vertex function, edge form, or face form) with
/// provenance.
pub fn write_form<W: IoWrite>(
    values: &[f64],
    kind: &str,
    epsilon: f64,
    mesh: &Arc<crate::manifold::MeshManifold>,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "glform 1")?;
    writeln!(out, "kind {kind}")?;
    writeln!(out, "eps {}", fmt_f64(epsilon))?;
    writeln!(out, "mesh {:016x}", mesh.checksum())?;
    writeln!(out, "entries {}", values.len())?;
    for v in values {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::plane_wave_solution;
    use crate::manifold::{assemble_dec, build_model, poincare_constant, MeshManifold, ModelGeometry};
    use crate::minmax::refine_to_critical;
    use crate::sweep::{build_family, build_sweep_map};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn torus(m: u32) -> (Arc<MeshManifold>, DecOperators) {
        let mesh = Arc::new(build_model(ModelGeometry::FlatTorus2d { grid: m }).unwrap());
        let dec = assemble_dec(&mesh).unwrap();
        (mesh, dec)
    }

    #[test]
    fn prejacobian_of_constant_vanishes() {
        let (mesh, dec) = torus(8);
        let u = ComplexField::constant(mesh, 0.2, [0.6, 0.8]).unwrap();
        let pj = prejacobian(&dec, &u);
        assert!(pj.ju.iter().all(|&x| x == 0.0));
        assert_eq!(pj.divergence_residual, 0.0);
        assert_eq!(pj.curl_l2, 0.0);
    }

    #[test]
    fn prejacobian_loop_integral_measures_winding() {
        let m = 32usize;
        let (mesh, dec) = torus(m as u32);
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let eps = 0.05;
        for k in [1i32, 2] {
            let u = plane_wave_solution(&mesh, k, eps).unwrap();
            let pj = prejacobian(&dec, &u);
            // x-generating loop: vertices (i, 0)
            let loop_verts: Vec<usize> = (0..m).collect();
            let circ = loop_integral(&dec, &pj.ju, &loop_verts).unwrap();
            // independent oracle: each x-edge carries ju = ρ² sin(kh)
            let rho2 = 1.0 - (k as f64 * eps).powi(2);
            let exact_discrete = m as f64 * rho2 * (k as f64 * h).sin();
            assert!((circ - exact_discrete).abs() < 1e-10);
            // and the discrete sum approaches 2πk under refinement (O(h²))
            let expected = 2.0 * std::f64::consts::PI * k as f64;
            assert!(
                (circ - expected).abs() < 0.05 * expected,
                "k={k}: ∮ju = {circ}, expected ≈ {expected}"
            );
            // the cutoff-corrected current winds to an integer within 0.05
            let gamma = modified_current(&dec, &u);
            let w =
                loop_integral(&dec, &gamma, &loop_verts).unwrap() / (2.0 * std::f64::consts::PI);
            assert!((w - k as f64).abs() < 0.05, "γ winding {w} vs {k}");
        }
    }

    #[test]
    fn divergence_residual_small_at_critical_points() {
        let (mesh, dec) = torus(16);
        let u0 = plane_wave_solution(&mesh, 1, 0.05).unwrap();
        let tol = 1e-10;
        let (refined, _) = refine_to_critical(&dec, &u0, tol, 100).unwrap();
        let pj = prejacobian(&dec, &refined);
        assert!(
            pj.divergence_residual <= 10.0 * tol,
            "‖d*ju‖ = {} exceeds 10×tol",
            pj.divergence_residual
        );
    }

    #[test]
    fn pointwise_identity_holds_to_rounding() {
        let (mesh, _dec) = torus(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let values: Vec<[f64; 2]> = (0..mesh.vertex_count())
                .map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)])
                .collect();
            let u = ComplexField::new(Arc::clone(&mesh), 0.3, values).unwrap();
            assert!(pointwise_identity_defect(&u) < 1e-13);
        }
    }

    #[test]
    fn cutoff_profile_matches_prescription() {
        // branch values
        assert_eq!(CutoffProfile::eval(0.3), 1.0);
        assert_eq!(CutoffProfile::eval(0.5), 1.0);
        assert!((CutoffProfile::eval(0.75) - 4.0 / 3.0).abs() < 1e-12);
        assert!((CutoffProfile::eval(0.9) - 1.0 / 0.9).abs() < 1e-15);
        assert_eq!(CutoffProfile::eval(1.0), 1.0);
        // |f′| ≤ 2 on a dense sample, f within [1, 2]
        let mut max_slope = 0.0f64;
        for i in 0..=100_000 {
            let t = i as f64 / 100_000.0;
            let f = CutoffProfile::eval(t);
            assert!((1.0..=2.0).contains(&f), "f({t}) = {f} out of [1,2]");
            max_slope = max_slope.max(CutoffProfile::derivative(t).abs());
        }
        assert!(max_slope <= 2.0, "max |f′| = {max_slope}");
        // derivative is continuous (C¹ junctions), finite-difference check
        for t0 in [0.5, 0.5 + CUT_A, 0.5 + CUT_B, 0.75] {
            let d = 1e-7;
            let fd = (CutoffProfile::eval(t0 + d) - CutoffProfile::eval(t0 - d)) / (2.0 * d);
            let mean_deriv =
                0.5 * (CutoffProfile::derivative(t0 - d) + CutoffProfile::derivative(t0 + d));
            assert!(
                (fd - mean_deriv).abs() < 1e-5,
                "junction {t0}: fd {fd} vs {mean_deriv}"
            );
        }
    }

    #[test]
    fn bochner_plane_wave_within_rounding() {
        let (mesh, dec) = torus(32);
        let u = plane_wave_solution(&mesh, 1, 0.05).unwrap();
        let rep = bochner_check(&dec, &u, 0.0);
        // analytically the defect is negative (−k⁴ε²); the discrete gradient
        // only shrinks it, so the clipped defect must vanish
        assert!(
            rep.max_defect <= 1e-9,
            "plane-wave defect {} should vanish",
            rep.max_defect
        );
        assert!(rep.violating_fraction <= 1e-12);
        // constant fields have zero defect
        let c = ComplexField::constant(Arc::clone(&mesh), 0.05, [1.0, 0.0]).unwrap();
        assert_eq!(bochner_check(&dec, &c, 0.0).max_defect, 0.0);
        // random fields may violate; the check only reports
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<[f64; 2]> = (0..mesh.vertex_count())
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let r = ComplexField::new(Arc::clone(&mesh), 0.05, values).unwrap();
        let rep = bochner_check(&dec, &r, 0.0);
        assert!(rep.max_defect.is_finite());
    }

    #[test]
    fn sublevel_volumes_monotone() {
        let (mesh, dec) = torus(16);
        let unit = ComplexField::constant(Arc::clone(&mesh), 0.1, [0.0, 1.0]).unwrap();
        let rows = sublevel_volume(&dec, &unit, &[0.25, 0.5, 0.9]).unwrap();
        assert!(rows.iter().all(|r| r.volume == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<[f64; 2]> = (0..mesh.vertex_count())
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let u = ComplexField::new(Arc::clone(&mesh), 0.1, values).unwrap();
        let rows = sublevel_volume(&dec, &u, &[0.2, 0.5, 0.8, 0.95]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].volume >= w[0].volume, "sublevel volumes not nested");
        }
        assert!(sublevel_volume(&dec, &u, &[1.0]).is_err());
    }

    #[test]
    fn hodge_recovers_synthetic_exact_part() {
        let mesh = Arc::new(build_model(ModelGeometry::UnitSphere { refinement: 2 }).unwrap());
        let dec = assemble_dec(&mesh).unwrap();
        let spectral = poincare_constant(&dec).unwrap();
        assert_eq!(spectral.harmonic_dim, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut theta0: Vec<f64> = (0..mesh.vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean: f64 = theta0.iter().zip(&dec.star0).map(|(t, m)| t * m).sum::<f64>()
            / dec.star0.iter().sum::<f64>();
        theta0.iter_mut().for_each(|t| *t -= mean);
        let gamma = dec.exterior_derivative0(&theta0);
        let parts = hodge_decompose_form(&dec, &spectral, &gamma).unwrap();
        let scale = parts.gamma_l2.max(1.0);
        // recovered exact part matches dθ₀, coexact and harmonic parts vanish
        let diff: Vec<f64> = parts
            .dtheta
            .iter()
            .zip(&gamma)
            .map(|(a, b)| a - b)
            .collect();
        assert!(dec.norm1(&diff) <= 1e-8 * scale);
        assert!(parts.dxi_l2 <= 1e-8 * scale);
        assert!(parts.harmonic_l2 <= 1e-12 * scale);
        assert!(parts.residual_l2 <= 1e-8 * scale);
    }

    #[test]
    fn hodge_of_plane_wave_is_harmonic_dominated() {
        let (mesh, dec) = torus(16);
        let spectral = poincare_constant(&dec).unwrap();
        assert_eq!(spectral.harmonic_dim, 2);
        let u = plane_wave_solution(&mesh, 1, 0.05).unwrap();
        let parts = hodge_decompose(&dec, &spectral, &u).unwrap();
        assert!(
            parts.harmonic_l2 >= 0.9 * parts.gamma_l2,
            "harmonic part {} vs γ {}",
            parts.harmonic_l2,
            parts.gamma_l2
        );
        assert!(parts.residual_l2 <= 1e-8 * parts.gamma_l2);
        assert!(parts.dtheta_l2 <= 0.05 * parts.gamma_l2);
        assert!(parts.dxi_l2 <= 0.05 * parts.gamma_l2);
    }

    #[test]
    fn dtheta_table_needs_three_epsilons() {
        assert!(dtheta_subcritical(&[(0.2, 1.0), (0.1, 1.0)]).is_err());
        let rows = dtheta_subcritical(&[(0.2, 1.0), (0.1, 1.1), (0.05, 1.2)]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].ratio_sqrt - 1.0 / (0.2f64.ln().abs().sqrt())).abs() < 1e-12);
    }

    #[test]
    fn density_profile_center_vs_control() {
        // raw swept fields have cores of slope 1/ε, so vertex-level zero
        // detection needs h ≲ ε; a 192-grid resolves ε = 0.05
        let (mesh, dec) = torus(192);
        let sweep = build_sweep_map(&dec, 5).unwrap();
        let h = mesh.max_edge_length();
        let radii: Vec<f64> = vec![3.0 * h, 0.3, 0.5];
        let mut center_vals = Vec::new();
        let mut control_vals = Vec::new();
        for eps in [0.1, 0.05] {
            let fam = build_family(&dec, &sweep, eps, (2, 4)).unwrap();
            let u = &fam.nodes[0].field; // center node v_ε∘f
            let clusters = zero_clusters(&dec, u);
            assert!(!clusters.is_empty(), "swept field should have zeros");
            let rep = clusters[0].representative;
            let p = density_profile(&dec, u, rep, &radii, ProfileKind::ZeroCluster).unwrap();
            // masses monotone in r
            for w in p.masses.windows(2) {
                assert!(w[1] >= w[0]);
            }
            // the planar vortex contributes π·log(r/ε) + core ≈ 13π/12, all
            // normalized by |log ε|: bounded below by 1 once the ball
            // contains the core (all radii here exceed 3h ≈ 2ε at ε = 0.05)
            if eps <= 0.05 {
                for v in &p.values {
                    assert!(*v >= 1.0, "center density {v} at ε = {eps}");
                }
            }
            center_vals.push(p.values[0]);
            let control = control_vertex(&dec, &clusters).unwrap();
            let q = density_profile(&dec, u, control, &radii, ProfileKind::Control).unwrap();
            control_vals.push(q.values[2]);
        }
        // the far control point carries less mass than a vortex center, and
        // decreasingly so as ε shrinks
        for (c, f) in center_vals.iter().zip(&control_vals) {
            assert!(f < c, "control {f} not below center {c}");
        }
        assert!(control_vals[1] <= control_vals[0] + 1e-9);
        // constant fields have identically zero profiles
        let unit = ComplexField::constant(Arc::clone(&mesh), 0.05, [1.0, 0.0]).unwrap();
        let p = density_profile(&dec, &unit, 0, &radii, ProfileKind::Control).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        // radius below 3h is rejected
        assert!(density_profile(&dec, &unit, 0, &[2.0 * h], ProfileKind::Control).is_err());
    }

    #[test]
    fn eta_scan_no_violations_on_calibrated_fields() {
        let (mesh, dec) = torus(16);
        // unit constant: every vertex is low-energy and |u|² = 1
        let unit = ComplexField::constant(Arc::clone(&mesh), 0.1, [1.0, 0.0]).unwrap();
        let flags = eta_ellipticity_scan(&dec, &unit, 0.01, 0.5, 7.0 / 8.0).unwrap();
        assert_eq!(flags.low_energy_count, mesh.vertex_count());
        assert_eq!(flags.violations, 0);
        // refined plane wave: |u|² = 1 − ε² ≥ 7/8 everywhere
        let u0 = plane_wave_solution(&mesh, 1, 0.05).unwrap();
        let (refined, _) = refine_to_critical(&dec, &u0, 1e-10, 50).unwrap();
        let flags = eta_ellipticity_scan(&dec, &refined, 0.01, 0.5, 7.0 / 8.0).unwrap();
        assert_eq!(flags.violations, 0);
        // ε ≥ δ₀ is rejected
        assert!(eta_ellipticity_scan(&dec, &unit, 0.01, 0.05, 7.0 / 8.0).is_err());
    }

    #[test]
    fn report_roundtrip() {
        let (mesh, dec) = torus(16);
        let spectral = poincare_constant(&dec).unwrap();
        let sweep = build_sweep_map(&dec, 5).unwrap();
        let fam = build_family(&dec, &sweep, 0.3, (2, 4)).unwrap();
        let u = &fam.nodes[0].field;
        let opts = DiagnosticsOptions {
            density_radii: vec![3.0 * mesh.max_edge_length()],
            ..DiagnosticsOptions::default()
        };
        let (report, parts) = analyze_field(&dec, &spectral, u, None, &opts).unwrap();
        assert!(parts.is_some());
        let mut buf = Vec::new();
        write_report(&report, &mut buf).unwrap();
        let back = read_report(std::io::Cursor::new(&buf), "mem").unwrap();
        assert_eq!(back.epsilon, report.epsilon);
        assert_eq!(back.mesh_checksum, report.mesh_checksum);
        assert_eq!(back.div_residual, report.div_residual);
        assert_eq!(back.sublevel.len(), report.sublevel.len());
        assert_eq!(back.density.len(), report.density.len());
        assert_eq!(
            back.hodge.as_ref().map(|h| h.residual_l2),
            report.hodge.as_ref().map(|h| h.residual_l2)
        );
    }
}
