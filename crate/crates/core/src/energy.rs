//! The Ginzburg-Landau functional and its exact discrete derivatives.
//!
//! Quadrature is piecewise linear with a mass-lumped potential term, so the
//! assembled `gradient` is exactly the derivative of `energy`; the descent
//! flow and the Newton refiner both rely on that. The discrete energy of a
//! field u with core scale ε is
//!
//! ```text
//! E_ε(u) = ½ Σ_e ★1_e |u_head − u_tail|² + ε⁻² Σ_v ★0_v W(u_v)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::linalg::Csr;
use crate::manifold::{DecOperators, MeshManifold, ModelGeometry};

/// Per-vertex value of a complex (R²-valued) field.
pub type C2 = [f64; 2];

#[inline]
pub fn c2_add(a: C2, b: C2) -> C2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn c2_sub(a: C2, b: C2) -> C2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn c2_scale(t: f64, a: C2) -> C2 {
    [t * a[0], t * a[1]]
}

#[inline]
pub fn c2_dot(a: C2, b: C2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn c2_cross(a: C2, b: C2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn c2_norm2(a: C2) -> f64 {
    c2_dot(a, a)
}

#[inline]
pub fn c2_norm(a: C2) -> f64 {
    c2_norm2(a).sqrt()
}

/// The potential W: the quartic ¼(1−|z|²)² for |z| < 2, continued by
/// 9/4 + 6·tanh(|z|−2) for |z| ≥ 2. The continuation matches value and slope
/// at |z| = 2, stays ≥ 2, and keeps |DW| ≤ 6 globally.
pub struct Potential;

impl Potential {
    /// Global bound on |DW| (attained at |z| = 2).
    pub const GRADIENT_BOUND: f64 = 6.0;

    pub fn eval(z: C2) -> f64 {
        let r2 = c2_norm2(z);
        if r2 < 4.0 {
            let t = 1.0 - r2;
            0.25 * t * t
        } else {
            2.25 + 6.0 * (r2.sqrt() - 2.0).tanh()
        }
    }

    pub fn gradient(z: C2) -> C2 {
        let r2 = c2_norm2(z);
        if r2 < 4.0 {
            c2_scale(-(1.0 - r2), z)
        } else {
            let r = r2.sqrt();
            let s = 1.0 / (r - 2.0).cosh();
            c2_scale(6.0 * s * s / r, z)
        }
    }

    pub fn value_and_gradient(z: C2) -> (f64, C2) {
        (Self::eval(z), Self::gradient(z))
    }

    /// 2×2 Hessian of W.
    pub fn hessian(z: C2) -> [[f64; 2]; 2] {
        let r2 = c2_norm2(z);
        if r2 < 4.0 {
            let t = 1.0 - r2;
            [
                [-t + 2.0 * z[0] * z[0], 2.0 * z[0] * z[1]],
                [2.0 * z[0] * z[1], -t + 2.0 * z[1] * z[1]],
            ]
        } else {
            let r = r2.sqrt();
            let u = r - 2.0;
            let sech2 = {
                let c = u.cosh();
                1.0 / (c * c)
            };
            let gp = 6.0 * sech2; // radial first derivative
            let gpp = -12.0 * sech2 * u.tanh(); // radial second derivative
            let e = [z[0] / r, z[1] / r];
            let mut h = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    h[i][j] = gpp * e[i] * e[j] + gp / r * (id - e[i] * e[j]);
                }
            }
            h
        }
    }
}

/// A per-vertex R²-valued field with its core scale ε.
#[derive(Debug, Clone)]
pub struct ComplexField {
    pub mesh: Arc<MeshManifold>,
    pub epsilon: f64,
    pub values: Vec<C2>,
}

impl ComplexField {
    pub fn new(mesh: Arc<MeshManifold>, epsilon: f64, values: Vec<C2>) -> Result<ComplexField> {
        if !(epsilon > 0.0) {
            return Err(Error::Validation(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if values.len() != mesh.vertex_count() {
            return Err(Error::Validation(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        if values.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Validation("field has non-finite entries".into()));
        }
        Ok(ComplexField {
            mesh,
            epsilon,
            values,
        })
    }

    pub fn constant(mesh: Arc<MeshManifold>, epsilon: f64, z: C2) -> Result<ComplexField> {
        let n = mesh.vertex_count();
        ComplexField::new(mesh, epsilon, vec![z; n])
    }

    pub fn abs_log_eps(&self) -> f64 {
        self.epsilon.ln().abs()
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|&v| c2_norm(v)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|&v| c2_norm(v)).fold(0.0, f64::max)
    }

    /// Volume-weighted spatial average.
    pub fn mean(&self, dec: &DecOperators) -> C2 {
        let mut acc = [0.0, 0.0];
        for (v, w) in self.values.iter().zip(&dec.star0) {
            acc[0] += v[0] * w;
            acc[1] += v[1] * w;
        }
        let vol: f64 = dec.star0.iter().sum();
        [acc[0] / vol, acc[1] / vol]
    }

    /// Applies the nearest-point retraction onto the closed unit disk.
    /// Never increases the energy.
    pub fn truncate_to_disk(&mut self) {
        for v in self.values.iter_mut() {
            let n = c2_norm(*v);
            if n > 1.0 {
                *v = c2_scale(1.0 / n, *v);
            }
        }
    }

    pub fn truncated(&self) -> ComplexField {
        let mut out = self.clone();
        out.truncate_to_disk();
        out
    }
}

/// Energy split of one field.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub total: f64,
    pub dirichlet: f64,
    pub potential: f64,
    /// total / |log ε|.
    pub normalized: f64,
    /// Per-cell energy density e_ε (edge-split Dirichlet + lumped potential,
    /// divided by the cell volume); sums back to `total` against volumes.
    pub cell_density: Vec<f64>,
}

/// Total energy, Dirichlet/potential split, and the per-cell density.
pub fn energy(dec: &DecOperators, u: &ComplexField) -> EnergyReport {
    let mesh = &dec.mesh;
    let inv_eps2 = 1.0 / (u.epsilon * u.epsilon);
    let mut dirichlet = 0.0;
    let mut edge_energy = vec![0.0; mesh.edge_count()];
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let d = c2_sub(u.values[b], u.values[a]);
        let val = 0.5 * c2_norm2(d);
        edge_energy[e] = val;
        dirichlet += dec.star1[e] * val;
    }
    let w_vals: Vec<f64> = u.values.iter().map(|&z| Potential::eval(z)).collect();
    let mut potential = 0.0;
    for (wv, m) in w_vals.iter().zip(&dec.star0) {
        potential += m * wv * inv_eps2;
    }
    let total = dirichlet + potential;

    let arity = mesh.cell_arity as f64;
    let mut cell_density = vec![0.0; mesh.cell_count()];
    for c in 0..mesh.cell_count() {
        let mut acc = 0.0;
        for &(e, share) in &dec.cell_edge_shares[c] {
            acc += share * edge_energy[e];
        }
        let vol = mesh.cell_volumes[c];
        let pot: f64 = mesh.cell(c).iter().map(|&v| w_vals[v]).sum::<f64>() / arity;
        cell_density[c] = acc / vol + pot * inv_eps2;
    }

    EnergyReport {
        total,
        dirichlet,
        potential,
        normalized: total / u.abs_log_eps().max(f64::MIN_POSITIVE),
        cell_density,
    }
}

/// Total energy only (hot path for line searches).
pub fn energy_value(dec: &DecOperators, u: &ComplexField) -> f64 {
    let mesh = &dec.mesh;
    let inv_eps2 = 1.0 / (u.epsilon * u.epsilon);
    let mut acc = 0.0;
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let d = c2_sub(u.values[b], u.values[a]);
        acc += 0.5 * dec.star1[e] * c2_norm2(d);
    }
    for (v, m) in u.values.iter().zip(&dec.star0) {
        acc += m * Potential::eval(*v) * inv_eps2;
    }
    acc
}

/// Applies a scalar CSR operator componentwise to an R²-valued field.
pub(crate) fn apply_scalar_op_c2(op: &Csr, x: &[C2], y: &mut [C2]) {
    for r in 0..op.nrows() {
        let mut acc = [0.0, 0.0];
        for (c, v) in op.row(r) {
            acc[0] += v * x[c][0];
            acc[1] += v * x[c][1];
        }
        y[r] = acc;
    }
}

/// Exact gradient cofield of the discrete energy:
/// g_v = (L u)_v + ε⁻² ★0_v DW(u_v).
pub fn gradient(dec: &DecOperators, u: &ComplexField) -> Vec<C2> {
    let mut g = vec![[0.0, 0.0]; u.values.len()];
    gradient_into(dec, u, &mut g);
    g
}

pub fn gradient_into(dec: &DecOperators, u: &ComplexField, g: &mut [C2]) {
    let inv_eps2 = 1.0 / (u.epsilon * u.epsilon);
    apply_scalar_op_c2(&dec.scalar_laplacian, &u.values, g);
    for (i, (gv, uv)) in g.iter_mut().zip(&u.values).enumerate() {
        let dw = Potential::gradient(*uv);
        let m = dec.star0[i] * inv_eps2;
        gv[0] += m * dw[0];
        gv[1] += m * dw[1];
    }
}

/// Mass-inverse-weighted norm of the gradient cofield: the L² norm of the
/// discrete Ginzburg-Landau equation residual, used as the convergence
/// measure of the refiner.
pub fn gl_residual(dec: &DecOperators, u: &ComplexField) -> f64 {
    let g = gradient(dec, u);
    residual_norm(dec, &g)
}

pub(crate) fn residual_norm(dec: &DecOperators, g: &[C2]) -> f64 {
    g.iter()
        .zip(&dec.star0)
        .map(|(gv, m)| c2_norm2(*gv) / m)
        .sum::<f64>()
        .sqrt()
}

/// Per-vertex energy measure (edge Dirichlet split half to each endpoint,
/// plus the lumped potential). Sums to the total energy; ball masses for the
/// density diagnostics are vertex sums of this measure.
pub fn vertex_energy_measure(dec: &DecOperators, u: &ComplexField) -> Vec<f64> {
    let mesh = &dec.mesh;
    let inv_eps2 = 1.0 / (u.epsilon * u.epsilon);
    let mut mu = vec![0.0; mesh.vertex_count()];
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let d = c2_sub(u.values[b], u.values[a]);
        let val = 0.25 * dec.star1[e] * c2_norm2(d);
        mu[a] += val;
        mu[b] += val;
    }
    for ((m, uv), w) in mu.iter_mut().zip(&u.values).zip(&dec.star0) {
        *m += w * Potential::eval(*uv) * inv_eps2;
    }
    mu
}

/// The exact discrete solutions on coordinate tori: u = √(1−k²ε²)·e^{ikx}.
/// Requires k²ε² < 1 and a periodic model mesh.
pub fn plane_wave_solution(mesh: &Arc<MeshManifold>, k: i32, epsilon: f64) -> Result<ComplexField> {
    if mesh.period.is_none() {
        return Err(Error::Validation(
            "plane-wave solutions need a periodic mesh".into(),
        ));
    }
    let kk = k as f64;
    let amp2 = 1.0 - kk * kk * epsilon * epsilon;
    if amp2 <= 0.0 {
        return Err(Error::Validation(format!(
            "k²ε² = {} ≥ 1: no plane-wave solution",
            kk * kk * epsilon * epsilon
        )));
    }
    let amp = amp2.sqrt();
    let values: Vec<C2> = (0..mesh.vertex_count())
        .map(|v| {
            let x = mesh.position(v)[0];
            [amp * (kk * x).cos(), amp * (kk * x).sin()]
        })
        .collect();
    ComplexField::new(Arc::clone(mesh), epsilon, values)
}

/// A tangent vector field, one vector per vertex in the mesh coordinate
/// system (ambient R³ on the sphere, intrinsic Rⁿ on the tori).
pub type VectorField = Vec<Vec<f64>>;

/// Per-cell stress-energy tensor T = e·Id − du*du (in the cell frame) and
/// the inner-variation residuals ∫⟨T, ∇X⟩ over a basis of test fields.
#[derive(Debug, Clone)]
pub struct StressEnergy {
    pub frame_dim: usize,
    /// Row-major frame_dim × frame_dim tensor per cell.
    pub tensors: Vec<Vec<f64>>,
    /// Pointwise energy density from the per-cell Jacobian quadrature
    /// (the normalization of T for the diagnostic tensor P = T / e).
    pub cell_energy_density: Vec<f64>,
    /// ∫⟨T, ∇X_i⟩ for each test field.
    pub residuals: Vec<f64>,
    /// max over cells of |trace T − (n·e − |du|²)|; an algebraic identity,
    /// so this is rounding noise.
    pub trace_defect: f64,
}

impl StressEnergy {
    /// P = Id − du*du/e, the stress tensor normalized by the energy density.
    pub fn normalized_tensor(&self, cell: usize) -> Vec<f64> {
        let e = self.cell_energy_density[cell];
        self.tensors[cell].iter().map(|t| t / e).collect()
    }
}

/// Evaluates the stress-energy tensor and its first-variation residuals.
/// The residuals vanish only in the continuum: at discrete critical points
/// they are O(h²) diagnostics, not identities.
pub fn stress_energy(
    dec: &DecOperators,
    u: &ComplexField,
    test_fields: &[VectorField],
) -> StressEnergy {
    let mesh = &dec.mesh;
    let nc = mesh.cell_count();
    let inv_eps2 = 1.0 / (u.epsilon * u.epsilon);
    let mut tensors = Vec::with_capacity(nc);
    let mut density = Vec::with_capacity(nc);
    let mut residuals = vec![0.0; test_fields.len()];
    let mut trace_defect = 0.0f64;

    for c in 0..nc {
        let grad = &dec.cell_grads[c];
        let fd = grad.frame_dim();
        let verts = mesh.cell(c);
        let comp0: Vec<f64> = verts.iter().map(|&v| u.values[v][0]).collect();
        let comp1: Vec<f64> = verts.iter().map(|&v| u.values[v][1]).collect();
        let g0 = grad.gradient(&comp0);
        let g1 = grad.gradient(&comp1);
        let du2: f64 =
            g0.iter().map(|x| x * x).sum::<f64>() + g1.iter().map(|x| x * x).sum::<f64>();
        let wbar: f64 = verts
            .iter()
            .map(|&v| Potential::eval(u.values[v]))
            .sum::<f64>()
            / verts.len() as f64;
        let e_c = 0.5 * du2 + wbar * inv_eps2;

        let mut t = vec![0.0; fd * fd];
        for a in 0..fd {
            for b in 0..fd {
                let mut v = -(g0[a] * g0[b] + g1[a] * g1[b]);
                if a == b {
                    v += e_c;
                }
                t[a * fd + b] = v;
            }
        }
        let trace: f64 = (0..fd).map(|a| t[a * fd + a]).sum();
        trace_defect = trace_defect.max((trace - (fd as f64 * e_c - du2)).abs());

        for (i, field) in test_fields.iter().enumerate() {
            // ∇X in the cell frame: columns are gradients of the frame
            // components of X
            let xf: Vec<Vec<f64>> = verts.iter().map(|&v| grad.to_frame(&field[v])).collect();
            let mut pairing = 0.0;
            for b in 0..fd {
                let col: Vec<f64> = xf.iter().map(|x| x[b]).collect();
                let gb = grad.gradient(&col);
                for a in 0..fd {
                    pairing += t[a * fd + b] * gb[a];
                }
            }
            residuals[i] += mesh.cell_volumes[c] * pairing;
        }

        tensors.push(t);
        density.push(e_c);
    }

    StressEnergy {
        frame_dim: if nc > 0 { dec.cell_grads[0].frame_dim() } else { 0 },
        tensors,
        cell_energy_density: density,
        residuals,
        trace_defect,
    }
}

/// A default basis of test vector fields for the inner-variation residuals:
/// rotations and conformal gradients on the sphere, coordinate sinusoids on
/// the tori.
pub fn default_test_fields(mesh: &MeshManifold) -> Vec<VectorField> {
    let nv = mesh.vertex_count();
    match mesh.model {
        ModelGeometry::UnitSphere { .. } => {
            let mut fields = Vec::new();
            for axis in 0..3 {
                let mut a = [0.0; 3];
                a[axis] = 1.0;
                // rotation a × x
                fields.push(
                    (0..nv)
                        .map(|v| {
                            let p = mesh.position(v);
                            vec![
                                a[1] * p[2] - a[2] * p[1],
                                a[2] * p[0] - a[0] * p[2],
                                a[0] * p[1] - a[1] * p[0],
                            ]
                        })
                        .collect(),
                );
                // conformal gradient of ⟨a, x⟩
                fields.push(
                    (0..nv)
                        .map(|v| {
                            let p = mesh.position(v);
                            let ax = a[0] * p[0] + a[1] * p[1] + a[2] * p[2];
                            vec![a[0] - ax * p[0], a[1] - ax * p[1], a[2] - ax * p[2]]
                        })
                        .collect(),
                );
            }
            fields
        }
        _ => {
            let n = mesh.dim;
            let mut fields = Vec::new();
            for axis in 0..n {
                fields.push(
                    (0..nv)
                        .map(|v| {
                            let p = mesh.position(v);
                            let mut x = vec![0.0; n];
                            x[axis] = p[axis].sin();
                            x
                        })
                        .collect(),
                );
                fields.push(
                    (0..nv)
                        .map(|v| {
                            let p = mesh.position(v);
                            let mut x = vec![0.0; n];
                            x[axis] = p[(axis + 1) % n].cos();
                            x
                        })
                        .collect(),
                );
            }
            fields
        }
    }
}

/// Writes a field: header with ε and the mesh checksum, then one `re im`
/// line per vertex at 17 significant digits.
pub fn write_field<W: Write>(u: &ComplexField, out: &mut W) -> Result<()> {
    writeln!(out, "glfield 1")?;
    writeln!(out, "eps {}", fmt_f64(u.epsilon))?;
    writeln!(out, "mesh {:016x}", u.mesh.checksum())?;
    writeln!(out, "vertices {}", u.values.len())?;
    for v in &u.values {
        writeln!(out, "{} {}", fmt_f64(v[0]), fmt_f64(v[1]))?;
    }
    Ok(())
}

pub fn save_field(u: &ComplexField, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field(u, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Reads a field against a known mesh; the stored checksum must match.
pub fn read_field<R: BufRead>(
    reader: R,
    mesh: &Arc<MeshManifold>,
    label: &str,
) -> Result<ComplexField> {
    let mut lines = reader.lines();
    let mut line_no = 0usize;
    let mut next = |expect: &str| -> Result<String> {
        line_no += 1;
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::Io(e)),
            None => Err(Error::parse(label, line_no, format!("missing {expect}"))),
        }
    };
    let magic = next("magic")?;
    if magic.trim() != "glfield 1" {
        return Err(Error::parse(label, 1, "not a glfield file"));
    }
    let eps_line = next("eps")?;
    let eps: f64 = eps_line
        .strip_prefix("eps ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(label, 2, "bad eps line"))?;
    let mesh_line = next("mesh")?;
    let stored = mesh_line
        .strip_prefix("mesh ")
        .and_then(|s| u64::from_str_radix(s.trim(), 16).ok())
        .ok_or_else(|| Error::parse(label, 3, "bad mesh line"))?;
    if stored != mesh.checksum() {
        return Err(Error::MeshMismatch(format!(
            "field was written for mesh {stored:016x}, not {:016x}",
            mesh.checksum()
        )));
    }
    let count_line = next("vertices")?;
    let count: usize = count_line
        .strip_prefix("vertices ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(label, 4, "bad vertices line"))?;
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let line = next("field value")?;
        let mut parts = line.split_whitespace();
        let re: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(label, 5 + i, "bad re"))?;
        let im: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(label, 5 + i, "bad im"))?;
        values.push([re, im]);
    }
    ComplexField::new(Arc::clone(mesh), eps, values)
}

pub fn load_field(path: &Path, mesh: &Arc<MeshManifold>) -> Result<ComplexField> {
    let file = File::open(path)?;
    read_field(BufReader::new(file), mesh, &path.display().to_string())
}
