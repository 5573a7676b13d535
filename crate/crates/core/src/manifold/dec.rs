//! Discrete exterior calculus operators.
//!
//! One-forms live on edges (lowest-order convention), so d1∘d0 = 0 holds
//! combinatorially and the Hodge decomposition of an edge form is exact at
//! the discrete level. Hodge stars are diagonal: cotangent weights on
//! triangle meshes, tensor-product weights on the periodic grids. The
//! codifferential is the exact adjoint of d in the assembled inner products
//! by construction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Csr;

use super::{MeshManifold, ModelGeometry};

/// Per-cell linear-interpolation gradient: for a scalar field φ on the cell's
/// vertices, ∇φ in the cell frame is Σᵥ φ(v)·coeffs[v].
#[derive(Debug, Clone)]
pub struct CellGradient {
    /// Orthonormal frame rows, each of length `coord_dim`.
    pub frame: Vec<Vec<f64>>,
    /// One coefficient vector (length = frame rows) per cell vertex.
    pub coeffs: Vec<Vec<f64>>,
}

impl CellGradient {
    pub fn frame_dim(&self) -> usize {
        self.frame.len()
    }

    /// Gradient of vertex values in frame coordinates.
    pub fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let fd = self.frame_dim();
        let mut g = vec![0.0; fd];
        for (c, &v) in self.coeffs.iter().zip(values) {
            for d in 0..fd {
                g[d] += c[d] * v;
            }
        }
        g
    }

    /// Projects an ambient vector onto the frame coordinates.
    pub fn to_frame(&self, ambient: &[f64]) -> Vec<f64> {
        self.frame
            .iter()
            .map(|row| row.iter().zip(ambient).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Assembled DEC operators for one mesh. Immutable after assembly.
#[derive(Debug, Clone)]
pub struct DecOperators {
    pub mesh: Arc<MeshManifold>,
    /// Vertex functions → edge forms, |E| × |V|.
    pub d0: Csr,
    /// Edge forms → face forms, |F| × |E|.
    pub d1: Csr,
    /// Face forms → cube forms (3-d meshes only).
    pub d2: Option<Csr>,
    /// Diagonal Hodge star on 0-forms (vertex dual volumes).
    pub star0: Vec<f64>,
    /// Diagonal Hodge star on 1-forms (edge weights).
    pub star1: Vec<f64>,
    /// Diagonal Hodge star on 2-forms.
    pub star2: Vec<f64>,
    /// Diagonal Hodge star on 3-forms (3-d meshes only).
    pub star3: Option<Vec<f64>>,
    /// L0 = d0ᵀ★1 d0; the scalar Laplacian is ★0⁻¹ L0.
    pub scalar_laplacian: Csr,
    /// L1 = ★1 d0 ★0⁻¹ d0ᵀ ★1 + d1ᵀ★2 d1; Δ_H on 1-forms is ★1⁻¹ L1.
    pub hodge_laplacian_1: Csr,
    /// Per-cell interpolation gradients.
    pub cell_grads: Vec<CellGradient>,
    /// Per-cell (edge id, weight share) lists splitting the edge Dirichlet
    /// weights among incident cells; shares of one edge sum to ★1.
    pub cell_edge_shares: Vec<Vec<(usize, f64)>>,
}

/// Assembles the DEC operators for a mesh.
pub fn assemble_dec(mesh: &Arc<MeshManifold>) -> Result<DecOperators> {
    let nv = mesh.vertex_count();
    let ne = mesh.edge_count();
    let nf = mesh.face_count();
    let nc = mesh.cell_count();

    let vol_scale = mesh.cell_volumes.iter().copied().fold(0.0, f64::max);
    for (c, &v) in mesh.cell_volumes.iter().enumerate() {
        if v < 1e-12 * vol_scale {
            return Err(Error::DegenerateCell { cell: c, volume: v });
        }
    }

    // --- incidence matrices ---
    let mut t0 = Vec::with_capacity(2 * ne);
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        t0.push((e, a, -1.0));
        t0.push((e, b, 1.0));
    }
    let d0 = Csr::from_triplets(ne, nv, t0);

    let mut t1 = Vec::new();
    for (f, fe) in mesh.face_edges.iter().enumerate() {
        for &(e, s) in fe {
            t1.push((f, e, s as f64));
        }
    }
    let d1 = Csr::from_triplets(nf, ne, t1);

    let d2 = if mesh.dim == 3 {
        let mut t2 = Vec::new();
        for (c, bnd) in mesh.cell_faces.iter().enumerate() {
            for &(f, s) in bnd {
                t2.push((c, f, s as f64));
            }
        }
        Some(Csr::from_triplets(nc, nf, t2))
    } else {
        None
    };

    // --- Hodge stars ---
    let mut star0 = vec![0.0; nv];
    for c in 0..nc {
        let share = mesh.cell_volumes[c] / mesh.cell_arity as f64;
        for &v in mesh.cell(c) {
            star0[v] += share;
        }
    }

    let is_simplicial = mesh.cell_arity == 3;
    let star1: Vec<f64> = match mesh.model {
        ModelGeometry::UnitSphere { .. } => cotan_weights(mesh),
        ModelGeometry::FlatTorus2d { .. } => vec![1.0; ne],
        ModelGeometry::FlatTorus3d { .. } => mesh.edge_lengths.clone(),
    };
    for (e, &w) in star1.iter().enumerate() {
        if !(w > 0.0) {
            return Err(Error::MeshInvalid(format!(
                "nonpositive 1-form weight {w:.3e} on edge {e}"
            )));
        }
    }

    let star2: Vec<f64> = match mesh.dim {
        2 => mesh.face_areas.iter().map(|a| 1.0 / a).collect(),
        _ => mesh.face_areas.iter().map(|a| 1.0 / a.sqrt()).collect(),
    };
    let star3 = (mesh.dim == 3).then(|| mesh.cell_volumes.iter().map(|v| 1.0 / v).collect());

    // --- L0 = d0ᵀ ★1 d0 ---
    let mut tl0 = Vec::with_capacity(4 * ne);
    for (e, &[a, b]) in mesh.edges.iter().enumerate() {
        let w = star1[e];
        tl0.push((a, a, w));
        tl0.push((b, b, w));
        tl0.push((a, b, -w));
        tl0.push((b, a, -w));
    }
    let scalar_laplacian = Csr::from_triplets(nv, nv, tl0);

    // --- L1 = ★1 d0 ★0⁻¹ d0ᵀ ★1 + d1ᵀ ★2 d1 ---
    let mut tl1 = Vec::new();
    for (f, fe) in mesh.face_edges.iter().enumerate() {
        let w = star2[f];
        for &(ei, si) in fe {
            for &(ej, sj) in fe {
                tl1.push((ei, ej, w * si as f64 * sj as f64));
            }
        }
    }
    for v in 0..nv {
        let inv_m = 1.0 / star0[v];
        let inc = &mesh.vertex_edges[v];
        for &(ei, _) in inc {
            let si = if mesh.edges[ei][1] == v { 1.0 } else { -1.0 };
            for &(ej, _) in inc {
                let sj = if mesh.edges[ej][1] == v { 1.0 } else { -1.0 };
                tl1.push((ei, ej, inv_m * si * sj * star1[ei] * star1[ej]));
            }
        }
    }
    let hodge_laplacian_1 = Csr::from_triplets(ne, ne, tl1);

    // --- per-cell gradients and Dirichlet shares ---
    let mut cell_grads = Vec::with_capacity(nc);
    let mut cell_edge_shares = Vec::with_capacity(nc);
    for c in 0..nc {
        cell_grads.push(cell_gradient(mesh, c));
        cell_edge_shares.push(edge_shares(mesh, c, is_simplicial, &star1));
    }

    Ok(DecOperators {
        mesh: Arc::clone(mesh),
        d0,
        d1,
        d2,
        star0,
        star1,
        star2,
        star3,
        scalar_laplacian,
        hodge_laplacian_1,
        cell_grads,
        cell_edge_shares,
    })
}

fn cotan_weights(mesh: &MeshManifold) -> Vec<f64> {
    let mut w = vec![0.0; mesh.edge_count()];
    for (e, inc) in mesh.edge_faces.iter().enumerate() {
        let [a, b] = mesh.edges[e];
        for &(f, _) in inc {
            let o = *mesh.faces[f]
                .iter()
                .find(|&&v| v != a && v != b)
                .expect("triangle face has an opposite vertex");
            let oa = mesh.delta(o, a);
            let ob = mesh.delta(o, b);
            let dot: f64 = oa.iter().zip(&ob).map(|(x, y)| x * y).sum();
            let cr = [
                oa[1] * ob[2] - oa[2] * ob[1],
                oa[2] * ob[0] - oa[0] * ob[2],
                oa[0] * ob[1] - oa[1] * ob[0],
            ];
            let cross = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
            w[e] += 0.5 * dot / cross;
        }
    }
    w
}

fn cell_gradient(mesh: &MeshManifold, c: usize) -> CellGradient {
    let verts = mesh.cell(c);
    match mesh.cell_arity {
        3 => {
            let e1 = mesh.delta(verts[0], verts[1]);
            let e2 = mesh.delta(verts[0], verts[2]);
            let n1 = norm(&e1);
            let t1: Vec<f64> = e1.iter().map(|x| x / n1).collect();
            let d = dotv(&e2, &t1);
            let mut t2: Vec<f64> = e2.iter().zip(&t1).map(|(x, t)| x - d * t).collect();
            let n2 = norm(&t2);
            t2.iter_mut().for_each(|x| *x /= n2);
            // E = [[|e1|, 0], [e2·t1, e2·t2]]; gradient coeffs are rows of E⁻ᵀ
            let a = n1;
            let b = d;
            let cc = n2;
            let c1 = vec![1.0 / a, -b / (a * cc)];
            let c2 = vec![0.0, 1.0 / cc];
            let c0 = vec![-c1[0] - c2[0], -c1[1] - c2[1]];
            CellGradient {
                frame: vec![t1, t2],
                coeffs: vec![c0, c1, c2],
            }
        }
        4 => {
            let h = norm(&mesh.delta(verts[0], verts[1]));
            let s = 1.0 / (2.0 * h);
            CellGradient {
                frame: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                coeffs: vec![
                    vec![-s, -s],
                    vec![s, -s],
                    vec![s, s],
                    vec![-s, s],
                ],
            }
        }
        _ => {
            let h = norm(&mesh.delta(verts[0], verts[1]));
            let s = 1.0 / (4.0 * h);
            // vertex order [000 100 110 010 001 101 111 011]
            let bits = [
                [0, 0, 0],
                [1, 0, 0],
                [1, 1, 0],
                [0, 1, 0],
                [0, 0, 1],
                [1, 0, 1],
                [1, 1, 1],
                [0, 1, 1],
            ];
            let coeffs = bits
                .iter()
                .map(|b| {
                    (0..3)
                        .map(|d| if b[d] == 1 { s } else { -s })
                        .collect::<Vec<f64>>()
                })
                .collect();
            CellGradient {
                frame: vec![
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                ],
                coeffs,
            }
        }
    }
}

fn edge_shares(
    mesh: &MeshManifold,
    c: usize,
    is_simplicial: bool,
    star1: &[f64],
) -> Vec<(usize, f64)> {
    if is_simplicial {
        // per-cell cotangent contribution: ½ cot of the angle opposite each edge
        let verts = mesh.cell(c);
        let mut shares = Vec::with_capacity(3);
        for i in 0..3 {
            let a = verts[(i + 1) % 3];
            let b = verts[(i + 2) % 3];
            let o = verts[i];
            let e = edge_id(mesh, a, b);
            let oa = mesh.delta(o, a);
            let ob = mesh.delta(o, b);
            let dot = dotv(&oa, &ob);
            let cr = [
                oa[1] * ob[2] - oa[2] * ob[1],
                oa[2] * ob[0] - oa[0] * ob[2],
                oa[0] * ob[1] - oa[1] * ob[0],
            ];
            let cross = (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
            shares.push((e, 0.5 * dot / cross));
        }
        shares
    } else if mesh.cell_arity == 4 {
        let verts = mesh.cell(c);
        (0..4)
            .map(|i| {
                let e = edge_id(mesh, verts[i], verts[(i + 1) % 4]);
                (e, 0.5 * star1[e])
            })
            .collect()
    } else {
        // cube: 12 unique edges over its 6 faces, each edge in 4 cubes
        let mut es: Vec<usize> = mesh.cell_faces[c]
            .iter()
            .flat_map(|&(f, _)| mesh.face_edges[f].iter().map(|&(e, _)| e))
            .collect();
        es.sort_unstable();
        es.dedup();
        es.into_iter().map(|e| (e, 0.25 * star1[e])).collect()
    }
}

fn edge_id(mesh: &MeshManifold, a: usize, b: usize) -> usize {
    mesh.vertex_edges[a]
        .iter()
        .find(|&&(_, w)| w == b)
        .map(|&(e, _)| e)
        .expect("edge exists")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DecOperators {
    /// ⟨a, b⟩ in the 0-form inner product.
    pub fn ip0(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.star0).map(|((x, y), w)| x * y * w).sum()
    }

    /// ⟨a, b⟩ in the 1-form inner product.
    pub fn ip1(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.star1).map(|((x, y), w)| x * y * w).sum()
    }

    /// ⟨a, b⟩ in the 2-form inner product.
    pub fn ip2(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.star2).map(|((x, y), w)| x * y * w).sum()
    }

    pub fn norm0(&self, a: &[f64]) -> f64 {
        self.ip0(a, a).sqrt()
    }

    pub fn norm1(&self, a: &[f64]) -> f64 {
        self.ip1(a, a).sqrt()
    }

    pub fn norm2(&self, a: &[f64]) -> f64 {
        self.ip2(a, a).sqrt()
    }

    /// d of a vertex function.
    pub fn exterior_derivative0(&self, f: &[f64]) -> Vec<f64> {
        self.d0.apply(f)
    }

    /// d of an edge form.
    pub fn exterior_derivative1(&self, w: &[f64]) -> Vec<f64> {
        self.d1.apply(w)
    }

    /// d* of an edge form: ★0⁻¹ d0ᵀ ★1 ω.
    pub fn codifferential1(&self, w: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = w.iter().zip(&self.star1).map(|(x, s)| x * s).collect();
        let mut out = self.d0.apply_transpose(&weighted);
        for (o, s) in out.iter_mut().zip(&self.star0) {
            *o /= s;
        }
        out
    }

    /// d* of a face form: ★1⁻¹ d1ᵀ ★2 ω.
    pub fn codifferential2(&self, w: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = w.iter().zip(&self.star2).map(|(x, s)| x * s).collect();
        let mut out = self.d1.apply_transpose(&weighted);
        for (o, s) in out.iter_mut().zip(&self.star1) {
            *o /= s;
        }
        out
    }

    /// Total mesh volume.
    pub fn volume(&self) -> f64 {
        self.star0.iter().sum()
    }

    /// L2 = ★2 d1 ★1⁻¹ d1ᵀ ★2 (+ d2ᵀ★3 d2 in 3-d); the 2-form Hodge
    /// Laplacian is ★2⁻¹ L2. Assembled on demand for the Hodge solves.
    pub fn assemble_l2(&self) -> Csr {
        let mesh = &self.mesh;
        let nf = mesh.face_count();
        let mut t = Vec::new();
        for (e, inc) in mesh.edge_faces.iter().enumerate() {
            let inv_w = 1.0 / self.star1[e];
            for &(fi, si) in inc {
                for &(fj, sj) in inc {
                    t.push((
                        fi,
                        fj,
                        inv_w * si as f64 * sj as f64 * self.star2[fi] * self.star2[fj],
                    ));
                }
            }
        }
        if let (Some(d2), Some(star3)) = (&self.d2, &self.star3) {
            for c in 0..mesh.cell_count() {
                let row: Vec<(usize, f64)> = d2.row(c).collect();
                for &(fi, si) in &row {
                    for &(fj, sj) in &row {
                        t.push((fi, fj, si * sj * star3[c]));
                    }
                }
            }
        }
        Csr::from_triplets(nf, nf, t)
    }
}
