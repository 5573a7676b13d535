//! Discretized closed manifolds and their metric-aware calculus.
//!
//! Three model geometries are supported: the unit round sphere (triangulated
//! by iterated icosahedral subdivision) and flat square/cubic tori of side 2π
//! (periodic quad/hex grids). All derived combinatorics (edges, faces, duals)
//! are rebuilt deterministically from the vertex/cell data, so a mesh
//! re-imported from its text form is operationally identical.

mod build;
mod dec;
mod io;
mod spectral;

pub use build::build_model;
pub use dec::{assemble_dec, CellGradient, DecOperators};
pub use io::{export_mesh, import_mesh, read_mesh, write_mesh};
pub use spectral::{poincare_constant, SpectralInfo};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Model geometry selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelGeometry {
    /// Unit round sphere, icosahedral subdivision level `refinement`.
    UnitSphere { refinement: u32 },
    /// Flat square torus of side 2π on an m × m periodic grid.
    FlatTorus2d { grid: u32 },
    /// Flat cubic torus of side 2π on an m × m × m periodic grid.
    FlatTorus3d { grid: u32 },
}

impl ModelGeometry {
    pub fn name(&self) -> &'static str {
        match self {
            ModelGeometry::UnitSphere { .. } => "unit_sphere",
            ModelGeometry::FlatTorus2d { .. } => "flat_torus_2d",
            ModelGeometry::FlatTorus3d { .. } => "flat_torus_3d",
        }
    }

    pub fn parameter(&self) -> u32 {
        match *self {
            ModelGeometry::UnitSphere { refinement } => refinement,
            ModelGeometry::FlatTorus2d { grid } => grid,
            ModelGeometry::FlatTorus3d { grid } => grid,
        }
    }

    /// Volume of the smooth model geometry.
    pub fn analytic_volume(&self) -> f64 {
        match self {
            ModelGeometry::UnitSphere { .. } => 2.0 * TWO_PI,
            ModelGeometry::FlatTorus2d { .. } => TWO_PI * TWO_PI,
            ModelGeometry::FlatTorus3d { .. } => TWO_PI * TWO_PI * TWO_PI,
        }
    }

    pub fn from_name(name: &str, parameter: u32) -> Result<Self> {
        match name {
            "unit_sphere" => Ok(ModelGeometry::UnitSphere {
                refinement: parameter,
            }),
            "flat_torus_2d" => Ok(ModelGeometry::FlatTorus2d { grid: parameter }),
            "flat_torus_3d" => Ok(ModelGeometry::FlatTorus3d { grid: parameter }),
            other => Err(Error::Validation(format!("unknown model '{other}'"))),
        }
    }
}

/// A closed discretized manifold with its combinatorial complex.
///
/// `positions` are intrinsic coordinates: ambient R³ points for the sphere,
/// `[0, 2π)ⁿ` grid coordinates for the tori (with `period = Some(2π)`).
#[derive(Debug, Clone)]
pub struct MeshManifold {
    pub model: ModelGeometry,
    /// Manifold dimension n (2 or 3).
    pub dim: usize,
    /// Components per vertex position.
    pub coord_dim: usize,
    /// Side length of the periodic box, if any.
    pub period: Option<f64>,
    /// Flat vertex positions, `coord_dim` per vertex.
    pub positions: Vec<f64>,
    /// Vertices per top-dimensional cell (3 = triangle, 4 = quad, 8 = hex).
    pub cell_arity: usize,
    /// Flat cell-vertex indices, `cell_arity` per cell.
    pub cells: Vec<usize>,
    /// Declared first Betti number of the discretization.
    pub betti1_hint: usize,
    /// Max of the negative part of Ricci (the constant A); 0 for all models.
    pub ricci_neg_max: f64,

    // --- derived, deterministic from the data above ---
    /// Unique edges, tail < head.
    pub edges: Vec<[usize; 2]>,
    pub edge_lengths: Vec<f64>,
    /// 2-cells as oriented vertex loops (triangles or quads).
    pub faces: Vec<Vec<usize>>,
    /// Per face: (edge id, ±1) for the oriented boundary.
    pub face_edges: Vec<Vec<(usize, i8)>>,
    pub face_areas: Vec<f64>,
    /// Per 3-cell (hex meshes only): (face id, ±1) for the oriented boundary.
    pub cell_faces: Vec<Vec<(usize, i8)>>,
    /// Top-dimensional cell measures.
    pub cell_volumes: Vec<f64>,
    /// Per vertex: (edge id, neighbor vertex).
    pub vertex_edges: Vec<Vec<(usize, usize)>>,
    /// Per vertex: ids of incident top-dimensional cells.
    pub vertex_cells: Vec<Vec<usize>>,
    /// Per edge: (face id, ±1 orientation of the edge in that face).
    pub edge_faces: Vec<Vec<(usize, i8)>>,
}

impl MeshManifold {
    pub fn vertex_count(&self) -> usize {
        self.positions.len() / self.coord_dim
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len() / self.cell_arity
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn position(&self, v: usize) -> &[f64] {
        &self.positions[v * self.coord_dim..(v + 1) * self.coord_dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * self.cell_arity..(c + 1) * self.cell_arity]
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edge_lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edge_lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Displacement from vertex `a` to vertex `b`, respecting periodic wrap.
    pub fn delta(&self, a: usize, b: usize) -> Vec<f64> {
        let pa = self.position(a);
        let pb = self.position(b);
        let mut d: Vec<f64> = pb.iter().zip(pa).map(|(x, y)| x - y).collect();
        if let Some(period) = self.period {
            for x in d.iter_mut() {
                if *x > period / 2.0 {
                    *x -= period;
                } else if *x <= -period / 2.0 {
                    *x += period;
                }
            }
        }
        d
    }

    /// Dimension of the isometric ambient embedding used by sweep maps:
    /// R³ for the sphere, R⁴ / R⁶ (products of unit circles) for the tori.
    pub fn embedding_dim(&self) -> usize {
        match self.model {
            ModelGeometry::UnitSphere { .. } => 3,
            ModelGeometry::FlatTorus2d { .. } => 4,
            ModelGeometry::FlatTorus3d { .. } => 6,
        }
    }

    /// Ambient embedding of a vertex.
    pub fn embed_vertex(&self, v: usize) -> Vec<f64> {
        let p = self.position(v);
        match self.model {
            ModelGeometry::UnitSphere { .. } => p.to_vec(),
            _ => {
                let mut out = Vec::with_capacity(2 * p.len());
                for &x in p {
                    out.push(x.cos());
                    out.push(x.sin());
                }
                out
            }
        }
    }

    /// Shortest-path (edge-weighted Dijkstra) distances from `source` to all
    /// vertices; entries beyond `cutoff` are left at infinity.
    pub fn graph_distances(&self, source: usize, cutoff: Option<f64>) -> Vec<f64> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0
                    .partial_cmp(&other.0)
                    .unwrap()
                    .then(self.1.cmp(&other.1))
            }
        }

        let n = self.vertex_count();
        let limit = cutoff.unwrap_or(f64::INFINITY);
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Item(0.0, source)));
        while let Some(Reverse(Item(d, v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(e, w) in &self.vertex_edges[v] {
                let nd = d + self.edge_lengths[e];
                if nd < dist[w] && nd <= limit {
                    dist[w] = nd;
                    heap.push(Reverse(Item(nd, w)));
                }
            }
        }
        dist
    }

    /// FNV-1a hash over the defining data; used to tie persisted fields to
    /// the mesh they were computed on.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.dim as u64);
        h.write_u64(self.coord_dim as u64);
        h.write_u64(self.cell_arity as u64);
        h.write_u64(self.betti1_hint as u64);
        h.write_f64(self.ricci_neg_max);
        h.write_f64(self.period.unwrap_or(0.0));
        for &x in &self.positions {
            h.write_f64(x);
        }
        for &c in &self.cells {
            h.write_u64(c as u64);
        }
        h.finish()
    }

    /// Rebuilds all derived tables from (positions, cells) and validates the
    /// closed-manifold invariants. This is the single construction path used
    /// by both the model builders and the importer.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        model: ModelGeometry,
        dim: usize,
        coord_dim: usize,
        period: Option<f64>,
        positions: Vec<f64>,
        cell_arity: usize,
        cells: Vec<usize>,
        betti1_hint: usize,
        ricci_neg_max: f64,
    ) -> Result<MeshManifold> {
        if dim != 2 && dim != 3 {
            return Err(Error::MeshInvalid(format!("unsupported dimension {dim}")));
        }
        if positions.is_empty() || positions.len() % coord_dim != 0 {
            return Err(Error::MeshInvalid("vertex block size mismatch".into()));
        }
        if cells.is_empty() || cells.len() % cell_arity != 0 {
            return Err(Error::MeshInvalid("cell block size mismatch".into()));
        }
        let nv = positions.len() / coord_dim;
        if cells.iter().any(|&v| v >= nv) {
            return Err(Error::MeshInvalid("cell references missing vertex".into()));
        }
        let mut mesh = MeshManifold {
            model,
            dim,
            coord_dim,
            period,
            positions,
            cell_arity,
            cells,
            betti1_hint,
            ricci_neg_max,
            edges: Vec::new(),
            edge_lengths: Vec::new(),
            faces: Vec::new(),
            face_edges: Vec::new(),
            face_areas: Vec::new(),
            cell_faces: Vec::new(),
            cell_volumes: Vec::new(),
            vertex_edges: Vec::new(),
            vertex_cells: Vec::new(),
            edge_faces: Vec::new(),
        };
        mesh.build_derived()?;
        mesh.validate()?;
        Ok(mesh)
    }

    fn build_derived(&mut self) -> Result<()> {
        // 2-cells: the cells themselves in 2d, cube boundary squares in 3d.
        match (self.dim, self.cell_arity) {
            (2, 3) | (2, 4) => {
                self.faces = (0..self.cell_count()).map(|c| self.cell(c).to_vec()).collect();
            }
            (3, 8) => self.build_hex_faces()?,
            (d, a) => {
                return Err(Error::MeshInvalid(format!(
                    "unsupported cell arity {a} in dimension {d}"
                )))
            }
        }

        // edges from the face loops, ids in first-encounter order
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut face_edges = Vec::with_capacity(self.faces.len());
        for loop_ in &self.faces {
            let mut fe = Vec::with_capacity(loop_.len());
            for i in 0..loop_.len() {
                let a = loop_[i];
                let b = loop_[(i + 1) % loop_.len()];
                if a == b {
                    return Err(Error::MeshInvalid("degenerate face loop".into()));
                }
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                fe.push((id, if a < b { 1i8 } else { -1i8 }));
            }
            face_edges.push(fe);
        }
        self.edges = edges;
        self.face_edges = face_edges;
        self.edge_lengths = self
            .edges
            .iter()
            .map(|&[a, b]| norm_of(&self.delta(a, b)))
            .collect();

        // metric measures
        self.face_areas = (0..self.faces.len()).map(|f| self.face_area(f)).collect();
        self.cell_volumes = match self.dim {
            2 => self.face_areas.clone(),
            _ => (0..self.cell_count()).map(|c| self.hex_volume(c)).collect(),
        };

        // adjacency tables
        let nv = self.vertex_count();
        let mut vertex_edges = vec![Vec::new(); nv];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            vertex_edges[a].push((e, b));
            vertex_edges[b].push((e, a));
        }
        self.vertex_edges = vertex_edges;

        let mut vertex_cells = vec![Vec::new(); nv];
        for c in 0..self.cell_count() {
            for &v in self.cell(c) {
                vertex_cells[v].push(c);
            }
        }
        self.vertex_cells = vertex_cells;

        let mut edge_faces = vec![Vec::new(); self.edges.len()];
        for (f, fe) in self.face_edges.iter().enumerate() {
            for &(e, s) in fe {
                edge_faces[e].push((f, s));
            }
        }
        self.edge_faces = edge_faces;
        Ok(())
    }

    /// Builds the square 2-cells of a hex mesh and the oriented cube
    /// boundaries referencing them.
    fn build_hex_faces(&mut self) -> Result<()> {
        // local faces of the hex [v000 v100 v110 v010 v001 v101 v111 v011],
        // all oriented outward
        const HEX_FACES: [[usize; 4]; 6] = [
            [0, 3, 2, 1], // z-
            [4, 5, 6, 7], // z+
            [0, 1, 5, 4], // y-
            [3, 7, 6, 2], // y+
            [0, 4, 7, 3], // x-
            [1, 2, 6, 5], // x+
        ];
        let mut face_ids: HashMap<[usize; 4], usize> = HashMap::new();
        let mut faces: Vec<Vec<usize>> = Vec::new();
        let mut cell_faces = Vec::with_capacity(self.cell_count());
        for c in 0..self.cell_count() {
            let verts = self.cell(c).to_vec();
            let mut bnd = Vec::with_capacity(6);
            for pattern in HEX_FACES {
                let loop_: Vec<usize> = pattern.iter().map(|&i| verts[i]).collect();
                let mut key: [usize; 4] = [loop_[0], loop_[1], loop_[2], loop_[3]];
                key.sort_unstable();
                let id = *face_ids.entry(key).or_insert_with(|| {
                    faces.push(loop_.clone());
                    faces.len() - 1
                });
                let sign = loop_sign(&faces[id], &loop_).ok_or_else(|| {
                    Error::MeshInvalid(format!("incoherent face loop at cell {c}"))
                })?;
                bnd.push((id, sign));
            }
            cell_faces.push(bnd);
        }
        self.faces = faces;
        self.cell_faces = cell_faces;
        Ok(())
    }

    fn face_area(&self, f: usize) -> f64 {
        let loop_ = &self.faces[f];
        match loop_.len() {
            3 => {
                let e1 = self.delta(loop_[0], loop_[1]);
                let e2 = self.delta(loop_[0], loop_[2]);
                0.5 * cross_norm(&e1, &e2)
            }
            4 => {
                let e1 = self.delta(loop_[0], loop_[1]);
                let e2 = self.delta(loop_[0], loop_[3]);
                cross_norm(&e1, &e2)
            }
            _ => unreachable!(),
        }
    }

    fn hex_volume(&self, c: usize) -> f64 {
        let verts = self.cell(c);
        let e1 = self.delta(verts[0], verts[1]);
        let e2 = self.delta(verts[0], verts[3]);
        let e3 = self.delta(verts[0], verts[4]);
        (e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) - e1[1] * (e2[0] * e3[2] - e2[2] * e3[0])
            + e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]))
            .abs()
    }

    /// Closed-manifold and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        for (c, &v) in self.cell_volumes.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::DegenerateCell { cell: c, volume: v });
            }
        }
        if self.positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::MeshInvalid("non-finite vertex position".into()));
        }
        if self.ricci_neg_max < 0.0 {
            return Err(Error::MeshInvalid("ricci_neg_max must be nonnegative".into()));
        }
        match self.dim {
            2 => {
                // every edge must bound exactly two faces, with opposite
                // orientations (closed, orientable)
                for (e, inc) in self.edge_faces.iter().enumerate() {
                    if inc.len() != 2 {
                        return Err(Error::MeshInvalid(format!(
                            "edge {e} bounds {} faces; mesh has boundary or is non-manifold",
                            inc.len()
                        )));
                    }
                    if inc[0].1 + inc[1].1 != 0 {
                        return Err(Error::MeshInvalid(format!(
                            "edge {e} has incoherent face orientations"
                        )));
                    }
                }
            }
            _ => {
                let mut face_cells = vec![Vec::new(); self.faces.len()];
                for (c, bnd) in self.cell_faces.iter().enumerate() {
                    for &(f, s) in bnd {
                        face_cells[f].push((c, s));
                    }
                }
                for (f, inc) in face_cells.iter().enumerate() {
                    if inc.len() != 2 || inc[0].1 + inc[1].1 != 0 {
                        return Err(Error::MeshInvalid(format!(
                            "face {f} is not shared coherently by two cells"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Orientation of `candidate` relative to `stored` (same cyclic loop → +1,
/// reversed → −1, different vertex set → None).
fn loop_sign(stored: &[usize], candidate: &[usize]) -> Option<i8> {
    let n = stored.len();
    if candidate.len() != n {
        return None;
    }
    for shift in 0..n {
        if (0..n).all(|i| candidate[i] == stored[(i + shift) % n]) {
            return Some(1);
        }
        if (0..n).all(|i| candidate[i] == stored[(shift + n - i) % n]) {
            return Some(-1);
        }
    }
    None
}

fn norm_of(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// |a × b| for vectors of dimension 2 or 3.
fn cross_norm(a: &[f64], b: &[f64]) -> f64 {
    match a.len() {
        2 => (a[0] * b[1] - a[1] * b[0]).abs(),
        3 => {
            let c = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            norm_of(&c)
        }
        _ => unreachable!(),
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(0xcbf29ce484222325)
    }
    fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn write_u64(&mut self, x: u64) {
        self.write_bytes(&x.to_le_bytes());
    }
    fn write_f64(&mut self, x: f64) {
        self.write_bytes(&x.to_bits().to_le_bytes());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}
