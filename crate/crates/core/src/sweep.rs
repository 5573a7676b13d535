//! Admissible two-parameter families of fields swept from a planar vortex.
//!
//! A sweep map f: M → R² with per-cell Jacobian bounded below and bounded
//! fiber measure pulls the translated planar vortex profile back to the
//! manifold; the resulting disk-parametrized family pins its boundary nodes
//! to constants and carries max-node energy growing like |log ε|.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{
    c2_norm, c2_norm2, c2_sub, energy_value, read_field, write_field, ComplexField, C2,
};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::manifold::{DecOperators, MeshManifold};

/// The planar vortex profile: z/|z| outside the core, z/ε inside.
pub fn model_vortex(z: C2, epsilon: f64) -> C2 {
    let r = c2_norm(z);
    if r > epsilon {
        [z[0] / r, z[1] / r]
    } else {
        [z[0] / epsilon, z[1] / epsilon]
    }
}

const GL8_NODES: [f64; 4] = [
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

fn gauss8<F: Fn(f64) -> f64>(a: f64, b: f64, f: &F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(&GL8_WEIGHTS) {
        acc += w * (f(mid + half * x) + f(mid - half * x));
    }
    acc * half
}

/// Energy of the planar vortex profile over the disk of radius `r_outer`,
/// by radial quadrature of the exact density: 1/ε² + ¼(1−r²/ε²)²/ε² inside
/// the core, 1/(2r²) outside. Grows like π·log(R/ε).
pub fn vortex_disk_energy(epsilon: f64, r_outer: f64, quadrature_n: usize) -> Result<f64> {
    if !(epsilon > 0.0) || epsilon > r_outer {
        return Err(Error::Validation(format!(
            "need 0 < ε ≤ R, got ε = {epsilon}, R = {r_outer}"
        )));
    }
    if quadrature_n < 8 {
        return Err(Error::Resolution(format!(
            "quadrature_n = {quadrature_n} too small (min 8)"
        )));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let inv_eps2 = 1.0 / (epsilon * epsilon);
    let inner_density = |r: f64| {
        let s = 1.0 - r * r * inv_eps2;
        tau * r * (inv_eps2 + 0.25 * s * s * inv_eps2)
    };
    let outer_density = |r: f64| tau * r * 0.5 / (r * r);

    let mut total = 0.0;
    for k in 0..quadrature_n {
        let a = epsilon * k as f64 / quadrature_n as f64;
        let b = epsilon * (k + 1) as f64 / quadrature_n as f64;
        total += gauss8(a, b, &inner_density);
    }
    if r_outer > epsilon {
        // geometric panels resolve the 1/r² decay across decades
        let ratio = r_outer / epsilon;
        for k in 0..quadrature_n {
            let a = epsilon * ratio.powf(k as f64 / quadrature_n as f64);
            let b = epsilon * ratio.powf((k + 1) as f64 / quadrature_n as f64);
            total += gauss8(a, b, &outer_density);
        }
    }
    Ok(total)
}

/// A Lipschitz map M → R² from projecting the ambient embedding onto a
/// 2-plane, with its recorded rank margins and fiber-measure bound.
#[derive(Debug, Clone)]
pub struct SweepMap {
    pub mesh: Arc<MeshManifold>,
    /// Seed that produced the plane (0 for explicitly given planes).
    pub seed: u64,
    /// Orthonormal basis of the projection plane in embedding coordinates.
    pub plane: [Vec<f64>; 2],
    /// Per-vertex value of f.
    pub values: Vec<C2>,
    /// min over cells of |Jf|.
    pub jmin: f64,
    /// min over cells of the smaller singular value of df.
    pub sigma_min: f64,
    /// max sampled fiber (n−2)-measure.
    pub fiber_bound: f64,
    /// Plane draws consumed before the rank checks passed.
    pub attempts: u32,
}

/// Relative floor on the per-cell singular values of df.
const RANK_TOL: f64 = 1e-6;

impl SweepMap {
    /// Builds the projection of the mesh embedding onto the plane spanned by
    /// `a1`, `a2` (orthonormalized here) and records the rank margins.
    pub fn from_plane(dec: &DecOperators, a1: &[f64], a2: &[f64], seed: u64) -> Result<SweepMap> {
        let mesh = &dec.mesh;
        let dim = mesh.embedding_dim();
        if a1.len() != dim || a2.len() != dim {
            return Err(Error::Validation(format!(
                "plane vectors must have embedding dimension {dim}"
            )));
        }
        let n1 = norm(a1);
        if n1 < 1e-12 {
            return Err(Error::Validation("degenerate plane vector".into()));
        }
        let q1: Vec<f64> = a1.iter().map(|x| x / n1).collect();
        let d = dot(a2, &q1);
        let mut q2: Vec<f64> = a2.iter().zip(&q1).map(|(x, q)| x - d * q).collect();
        let n2 = norm(&q2);
        if n2 < 1e-12 {
            return Err(Error::Validation("plane vectors are parallel".into()));
        }
        q2.iter_mut().for_each(|x| *x /= n2);

        let values: Vec<C2> = (0..mesh.vertex_count())
            .map(|v| {
                let e = mesh.embed_vertex(v);
                [dot(&e, &q1), dot(&e, &q2)]
            })
            .collect();

        // per-cell singular values of df and |Jf|
        let mut jmin = f64::INFINITY;
        let mut sigma_min = f64::INFINITY;
        for c in 0..mesh.cell_count() {
            let (j, s2) = cell_jacobian(dec, c, &values);
            jmin = jmin.min(j);
            sigma_min = sigma_min.min(s2);
        }
        let fiber_bound = sample_fiber_measures(dec, &values, 12, 0.7);

        Ok(SweepMap {
            mesh: Arc::clone(mesh),
            seed,
            plane: [q1, q2],
            values,
            jmin,
            sigma_min,
            fiber_bound,
            attempts: 1,
        })
    }

    /// True when every cell passes the rank-2 margin and every edge the
    /// rank-1 margin.
    pub fn admissible(&self) -> bool {
        if self.sigma_min < RANK_TOL {
            return false;
        }
        self.mesh.edges.iter().enumerate().all(|(e, &[a, b])| {
            let d = c2_sub(self.values[b], self.values[a]);
            c2_norm(d) >= RANK_TOL * self.mesh.edge_lengths[e]
        })
    }

    /// Diameter of the image f(M).
    pub fn image_diameter(&self) -> f64 {
        let (lo, hi) = bounding_box(&self.values);
        let dx = hi[0] - lo[0];
        let dy = hi[1] - lo[1];
        (dx * dx + dy * dy).sqrt()
    }
}

/// |Jf| and the smaller singular value of df on one cell.
fn cell_jacobian(dec: &DecOperators, c: usize, values: &[C2]) -> (f64, f64) {
    let grad = &dec.cell_grads[c];
    let verts = dec.mesh.cell(c);
    let f0: Vec<f64> = verts.iter().map(|&v| values[v][0]).collect();
    let f1: Vec<f64> = verts.iter().map(|&v| values[v][1]).collect();
    let g0 = grad.gradient(&f0);
    let g1 = grad.gradient(&f1);
    let a = dot(&g0, &g0);
    let b = dot(&g0, &g1);
    let d = dot(&g1, &g1);
    let det = (a * d - b * b).max(0.0);
    let tr = a + d;
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let s2 = (0.5 * tr - disc).max(0.0).sqrt();
    (det.sqrt(), s2)
}

fn bounding_box(values: &[C2]) -> (C2, C2) {
    let mut lo = [f64::INFINITY, f64::INFINITY];
    let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
    for v in values {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (lo, hi)
}

/// Estimates sup_z H^{n−2}(f⁻¹(z)) on a sample grid: each covering cell
/// contributes vol·|Jf|/area(f(cell)), which is exactly 1 for affine images.
pub(crate) fn sample_fiber_measures(
    dec: &DecOperators,
    values: &[C2],
    samples_per_axis: usize,
    shrink: f64,
) -> f64 {
    let mesh = &dec.mesh;
    let (lo, hi) = bounding_box(values);
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let half = [
        0.5 * shrink * (hi[0] - lo[0]),
        0.5 * shrink * (hi[1] - lo[1]),
    ];
    // per-cell image hulls
    let hulls: Vec<(Vec<C2>, f64, f64)> = (0..mesh.cell_count())
        .map(|c| {
            let pts: Vec<C2> = mesh.cell(c).iter().map(|&v| values[v]).collect();
            let hull = convex_hull(&pts);
            let area = polygon_area(&hull);
            let (j, _) = cell_jacobian(dec, c, values);
            (hull, area, j * mesh.cell_volumes[c])
        })
        .collect();
    // cell-centered samples with a small irrational offset, so the grid
    // avoids vertex images and symmetry axes of the model meshes
    let jitter = 0.061803398875;
    let mut worst = 0.0f64;
    for iy in 0..samples_per_axis {
        for ix in 0..samples_per_axis {
            let fx = (2.0 * (ix as f64 + 0.5 + jitter) / samples_per_axis as f64) - 1.0;
            let fy = (2.0 * (iy as f64 + 0.5 + jitter) / samples_per_axis as f64) - 1.0;
            let z = [center[0] + fx * half[0], center[1] + fy * half[1]];
            worst = worst.max(fiber_measure_at(&hulls, z));
        }
    }
    worst
}

fn fiber_measure_at(hulls: &[(Vec<C2>, f64, f64)], z: C2) -> f64 {
    let mut measure = 0.0;
    for (hull, area, weight) in hulls {
        if *area > 1e-300 && point_in_hull(z, hull) {
            measure += weight / area;
        }
    }
    measure
}

/// True when `z` lies in the piecewise-linear image of the map.
pub fn image_covers_point(dec: &DecOperators, values: &[C2], z: C2) -> bool {
    let mesh = &dec.mesh;
    (0..mesh.cell_count()).any(|c| {
        let pts: Vec<C2> = mesh.cell(c).iter().map(|&v| values[v]).collect();
        let hull = convex_hull(&pts);
        polygon_area(&hull) > 1e-300 && point_in_hull(z, &hull)
    })
}

/// Andrew's monotone chain; input point count is tiny (≤ 8).
fn convex_hull(pts: &[C2]) -> Vec<C2> {
    let mut p: Vec<C2> = pts.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: C2, a: C2, b: C2| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<C2> = Vec::new();
    for &pt in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], pt) <= 0.0 {
            lower.pop();
        }
        lower.push(pt);
    }
    let mut upper: Vec<C2> = Vec::new();
    for &pt in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], pt) <= 0.0 {
            upper.pop();
        }
        upper.push(pt);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(hull: &[C2]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc.abs()
}

fn point_in_hull(z: C2, hull: &[C2]) -> bool {
    if hull.len() < 3 {
        return false;
    }
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let cross = (b[0] - a[0]) * (z[1] - a[1]) - (b[1] - a[1]) * (z[0] - a[0]);
        if cross < 0.0 {
            return false;
        }
    }
    true
}

/// Draws seeded random planes until the rank checks pass (at most 64 draws).
pub fn build_sweep_map(dec: &DecOperators, seed: u64) -> Result<SweepMap> {
    let dim = dec.mesh.embedding_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=64u32 {
        let a1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a2: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let candidate = match SweepMap::from_plane(dec, &a1, &a2, seed) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if candidate.admissible() {
            let mut m = candidate;
            m.attempts = attempt;
            return Ok(m);
        }
    }
    Err(Error::RankDeficient { attempts: 64 })
}

/// One parameter node of a disk family.
#[derive(Debug, Clone)]
pub struct FamilyNode {
    pub y: C2,
    pub boundary: bool,
    pub field: ComplexField,
}

/// A discrete member of the admissible family class: a polar grid over the
/// closed unit disk, one field per node, boundary nodes pinned to constants.
#[derive(Debug, Clone)]
pub struct DiskFamily {
    pub mesh: Arc<MeshManifold>,
    pub epsilon: f64,
    pub n_r: usize,
    pub n_t: usize,
    pub sweep_seed: u64,
    pub clamp_radius: f64,
    pub nodes: Vec<FamilyNode>,
    pub max_node_energy: f64,
    /// max_node_energy / |log ε|.
    pub log_eps_ratio: f64,
    /// Max H¹ distance between adjacent parameter nodes.
    pub continuity_modulus: f64,
}

impl DiskFamily {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Index pairs of adjacent parameter nodes (radial + angular + center).
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let id = |ring: usize, t: usize| 1 + (ring - 1) * self.n_t + (t % self.n_t);
        for t in 0..self.n_t {
            pairs.push((0, id(1, t)));
        }
        for ring in 1..=self.n_r {
            for t in 0..self.n_t {
                pairs.push((id(ring, t), id(ring, t + 1)));
                if ring < self.n_r {
                    pairs.push((id(ring, t), id(ring + 1, t)));
                }
            }
        }
        pairs
    }

    /// Exact boundary pinning check (family-class membership).
    pub fn check_admissible(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.boundary {
                let y = node.y;
                if (c2_norm(y) - 1.0).abs() > 1e-12 {
                    return Err(Error::NotInGamma(format!(
                        "boundary node {i} has |y| = {}",
                        c2_norm(y)
                    )));
                }
                if node.field.values.iter().any(|&v| v != y) {
                    return Err(Error::NotInGamma(format!(
                        "boundary node {i} is not the constant field y"
                    )));
                }
            }
        }
        if self.nodes.is_empty() || self.nodes[0].boundary {
            return Err(Error::NotInGamma("family has no interior nodes".into()));
        }
        Ok(())
    }

    /// Degree-obstruction witness: min over nodes of |∫ F(y)| / vol. The map
    /// y ↦ mean F(y) is the identity on the boundary ring, so it must hit 0
    /// inside up to grid resolution.
    pub fn degree_witness(&self, dec: &DecOperators) -> f64 {
        self.nodes
            .iter()
            .map(|n| c2_norm(n.field.mean(dec)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy_node(&self, dec: &DecOperators) -> (usize, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let e = energy_value(dec, &n.field);
            if e > best.1 {
                best = (i, e);
            }
        }
        best
    }
}

/// Builds the swept family F(y) = v_{y,ε}∘f on a polar parameter grid with
/// `n_r` rings and `n_t` angles; the outer ring is pinned to constants.
/// Translates are clamped at 10× the image diameter, beyond which the
/// composed field is already constant on f(M) to numerical accuracy.
pub fn build_family(
    dec: &DecOperators,
    sweep: &SweepMap,
    epsilon: f64,
    grid: (usize, usize),
) -> Result<DiskFamily> {
    let (n_r, n_t) = grid;
    if n_r < 2 || n_t < 4 {
        return Err(Error::Validation(format!(
            "family grid ({n_r}, {n_t}) too small (need n_r ≥ 2, n_t ≥ 4)"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Validation("epsilon must be positive".into()));
    }
    if !Arc::ptr_eq(&dec.mesh, &sweep.mesh) && dec.mesh.checksum() != sweep.mesh.checksum() {
        return Err(Error::MeshMismatch(
            "sweep map and operators use different meshes".into(),
        ));
    }
    let mesh = &dec.mesh;
    let clamp_radius = 10.0 * sweep.image_diameter();

    // parameter nodes: center, then ring-major polar grid
    let mut params: Vec<(C2, bool)> = vec![([0.0, 0.0], false)];
    for ring in 1..=n_r {
        let r = ring as f64 / n_r as f64;
        for t in 0..n_t {
            let th = 2.0 * std::f64::consts::PI * t as f64 / n_t as f64;
            params.push(([r * th.cos(), r * th.sin()], ring == n_r));
        }
    }

    let nodes: Vec<FamilyNode> = params
        .par_iter()
        .map(|&(y, boundary)| {
            let field = if boundary {
                ComplexField::constant(Arc::clone(mesh), epsilon, y)
                    .expect("boundary constant field")
            } else {
                let denom = 1.0 - c2_norm(y);
                let mut w = [y[0] / denom, y[1] / denom];
                let wn = c2_norm(w);
                if wn > clamp_radius {
                    w = [w[0] * clamp_radius / wn, w[1] * clamp_radius / wn];
                }
                let values: Vec<C2> = sweep
                    .values
                    .iter()
                    .map(|&f| model_vortex([f[0] + w[0], f[1] + w[1]], epsilon))
                    .collect();
                ComplexField::new(Arc::clone(mesh), epsilon, values).expect("family field")
            };
            FamilyNode { y, boundary, field }
        })
        .collect();

    let mut family = DiskFamily {
        mesh: Arc::clone(mesh),
        epsilon,
        n_r,
        n_t,
        sweep_seed: sweep.seed,
        clamp_radius,
        nodes,
        max_node_energy: 0.0,
        log_eps_ratio: 0.0,
        continuity_modulus: 0.0,
    };
    family.max_node_energy = family
        .nodes
        .par_iter()
        .map(|n| energy_value(dec, &n.field))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    family.log_eps_ratio = family.max_node_energy / epsilon.ln().abs().max(f64::MIN_POSITIVE);
    family.continuity_modulus = family
        .adjacent_pairs()
        .par_iter()
        .map(|&(i, j)| h1_distance(dec, &family.nodes[i].field, &family.nodes[j].field))
        .reduce(|| 0.0, f64::max);
    Ok(family)
}

/// Full H¹ distance between two fields on the same mesh.
pub fn h1_distance(dec: &DecOperators, a: &ComplexField, b: &ComplexField) -> f64 {
    let mut acc = 0.0;
    for (i, (va, vb)) in a.values.iter().zip(&b.values).enumerate() {
        acc += dec.star0[i] * c2_norm2(c2_sub(*va, *vb));
    }
    for (e, &[p, q]) in dec.mesh.edges.iter().enumerate() {
        let da = c2_sub(a.values[q], a.values[p]);
        let db = c2_sub(b.values[q], b.values[p]);
        acc += dec.star1[e] * c2_norm2(c2_sub(da, db));
    }
    acc.sqrt()
}

/// Persists a family: an index file plus (optionally) one field file per
/// node under `dir/fields/`.
pub fn save_family(
    family: &DiskFamily,
    dec: &DecOperators,
    dir: &Path,
    write_fields: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    if write_fields {
        fs::create_dir_all(dir.join("fields"))?;
    }
    let mut index = BufWriter::new(File::create(dir.join("family.txt"))?);
    writeln!(index, "glfamily 1")?;
    writeln!(index, "eps {}", fmt_f64(family.epsilon))?;
    writeln!(index, "mesh {:016x}", family.mesh.checksum())?;
    writeln!(index, "sweep_seed {}", family.sweep_seed)?;
    writeln!(index, "n_r {}", family.n_r)?;
    writeln!(index, "n_t {}", family.n_t)?;
    writeln!(index, "clamp_radius {}", fmt_f64(family.clamp_radius))?;
    writeln!(index, "max_node_energy {}", fmt_f64(family.max_node_energy))?;
    writeln!(index, "log_eps_ratio {}", fmt_f64(family.log_eps_ratio))?;
    writeln!(
        index,
        "continuity_modulus {}",
        fmt_f64(family.continuity_modulus)
    )?;
    writeln!(index, "fields_saved {}", if write_fields { 1 } else { 0 })?;
    writeln!(index, "nodes {}", family.nodes.len())?;
    for (i, node) in family.nodes.iter().enumerate() {
        let e = energy_value(dec, &node.field);
        writeln!(
            index,
            "node {} y {} {} boundary {} energy {}",
            i,
            fmt_f64(node.y[0]),
            fmt_f64(node.y[1]),
            if node.boundary { 1 } else { 0 },
            fmt_f64(e)
        )?;
        if write_fields {
            let path = dir.join("fields").join(format!("node_{i:05}.txt"));
            let mut out = BufWriter::new(File::create(path)?);
            write_field(&node.field, &mut out)?;
        }
    }
    index.flush()?;
    Ok(())
}

/// Loads a family previously saved with its fields.
pub fn load_family(dir: &Path, mesh: &Arc<MeshManifold>) -> Result<DiskFamily> {
    let path = dir.join("family.txt");
    let label = path.display().to_string();
    let file = BufReader::new(File::open(&path)?);
    let all_lines: Vec<String> = file.lines().collect::<std::io::Result<_>>()?;
    let mut cursor = 0usize;
    let mut next = || -> Result<String> {
        let i = cursor;
        cursor += 1;
        all_lines
            .get(i)
            .cloned()
            .ok_or_else(|| Error::parse(&label, i + 1, "unexpected end of file"))
    };
    let magic = next()?;
    if magic.trim() != "glfamily 1" {
        return Err(Error::parse(&label, 1, "not a glfamily file"));
    }
    let mut kv = |key: &str| -> Result<String> {
        let line = next()?;
        line.strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::parse(&label, 0, format!("expected '{key} ...'")))
    };
    let eps: f64 = kv("eps")?
        .parse()
        .map_err(|_| Error::parse(&label, 2, "bad eps"))?;
    let stored_mesh = u64::from_str_radix(&kv("mesh")?, 16)
        .map_err(|_| Error::parse(&label, 3, "bad mesh checksum"))?;
    if stored_mesh != mesh.checksum() {
        return Err(Error::MeshMismatch("family written for another mesh".into()));
    }
    let sweep_seed: u64 = kv("sweep_seed")?.parse().unwrap_or(0);
    let n_r: usize = kv("n_r")?
        .parse()
        .map_err(|_| Error::parse(&label, 5, "bad n_r"))?;
    let n_t: usize = kv("n_t")?
        .parse()
        .map_err(|_| Error::parse(&label, 6, "bad n_t"))?;
    let clamp_radius: f64 = kv("clamp_radius")?.parse().unwrap_or(0.0);
    let max_node_energy: f64 = kv("max_node_energy")?.parse().unwrap_or(f64::NAN);
    let log_eps_ratio: f64 = kv("log_eps_ratio")?.parse().unwrap_or(f64::NAN);
    let continuity_modulus: f64 = kv("continuity_modulus")?.parse().unwrap_or(f64::NAN);
    let fields_saved: u32 = kv("fields_saved")?.parse().unwrap_or(0);
    if fields_saved == 0 {
        return Err(Error::Validation(
            "family index has no persisted fields to load".into(),
        ));
    }
    let count: usize = kv("nodes")?
        .parse()
        .map_err(|_| Error::parse(&label, 9, "bad nodes"))?;
    let mut nodes = Vec::with_capacity(count);
    for i in 0..count {
        let line = next()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 8 || toks[0] != "node" {
            return Err(Error::parse(&label, 13 + i, "bad node line"));
        }
        let y: C2 = [
            toks[3]
                .parse()
                .map_err(|_| Error::parse(&label, 13 + i, "bad y"))?,
            toks[4]
                .parse()
                .map_err(|_| Error::parse(&label, 13 + i, "bad y"))?,
        ];
        let boundary = toks[6] == "1";
        let fpath = dir.join("fields").join(format!("node_{i:05}.txt"));
        let field = read_field(
            BufReader::new(File::open(&fpath)?),
            mesh,
            &fpath.display().to_string(),
        )?;
        nodes.push(FamilyNode { y, boundary, field });
    }
    Ok(DiskFamily {
        mesh: Arc::clone(mesh),
        epsilon: eps,
        n_r,
        n_t,
        sweep_seed,
        clamp_radius,
        nodes,
        max_node_energy,
        log_eps_ratio,
        continuity_modulus,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
