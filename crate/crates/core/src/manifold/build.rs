//! Model geometry builders.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::{MeshManifold, ModelGeometry, TWO_PI};

/// Builds one of the model geometries as a closed mesh.
///
/// The sphere is an iterated icosahedral subdivision projected to radius 1;
/// the tori are uniform periodic grids of side 2π. Grids below 8 vertices per
/// side are rejected as unusable resolution.
pub fn build_model(model: ModelGeometry) -> Result<MeshManifold> {
    match model {
        ModelGeometry::UnitSphere { refinement } => {
            if refinement > 8 {
                return Err(Error::Validation(format!(
                    "sphere refinement {refinement} too large (max 8)"
                )));
            }
            build_sphere(refinement)
        }
        ModelGeometry::FlatTorus2d { grid } => {
            if grid < 8 {
                return Err(Error::Validation(format!(
                    "torus grid {grid} too small (min 8)"
                )));
            }
            build_torus_2d(grid)
        }
        ModelGeometry::FlatTorus3d { grid } => {
            if grid < 8 {
                return Err(Error::Validation(format!(
                    "torus grid {grid} too small (min 8)"
                )));
            }
            build_torus_3d(grid)
        }
    }
}

fn build_sphere(refinement: u32) -> Result<MeshManifold> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    #[rustfmt::skip]
    let raw = [
        [-1.0,  t,  0.0], [ 1.0,  t,  0.0], [-1.0, -t,  0.0], [ 1.0, -t,  0.0],
        [ 0.0, -1.0,  t], [ 0.0,  1.0,  t], [ 0.0, -1.0, -t], [ 0.0,  1.0, -t],
        [  t,  0.0, -1.0], [  t,  0.0,  1.0], [ -t,  0.0, -1.0], [ -t,  0.0,  1.0],
    ];
    #[rustfmt::skip]
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let mut verts: Vec<[f64; 3]> = raw.iter().map(|p| normalize(*p)).collect();

    for _ in 0..refinement {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(&mut verts, &mut midpoint, a, b);
            let bc = mid(&mut verts, &mut midpoint, b, c);
            let ca = mid(&mut verts, &mut midpoint, c, a);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    let positions: Vec<f64> = verts.iter().flat_map(|p| p.iter().copied()).collect();
    let cells: Vec<usize> = faces.iter().flat_map(|f| f.iter().copied()).collect();
    MeshManifold::from_parts(
        ModelGeometry::UnitSphere { refinement },
        2,
        3,
        None,
        positions,
        3,
        cells,
        0,
        0.0,
    )
}

fn mid(
    verts: &mut Vec<[f64; 3]>,
    cache: &mut HashMap<(usize, usize), usize>,
    a: usize,
    b: usize,
) -> usize {
    let key = (a.min(b), a.max(b));
    if let Some(&id) = cache.get(&key) {
        return id;
    }
    let pa = verts[a];
    let pb = verts[b];
    let m = normalize([
        0.5 * (pa[0] + pb[0]),
        0.5 * (pa[1] + pb[1]),
        0.5 * (pa[2] + pb[2]),
    ]);
    verts.push(m);
    let id = verts.len() - 1;
    cache.insert(key, id);
    id
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn build_torus_2d(m: u32) -> Result<MeshManifold> {
    let m = m as usize;
    let h = TWO_PI / m as f64;
    let idx = |i: usize, j: usize| (i % m) + m * (j % m);
    // vertex order matches idx(): i fastest
    let mut positions = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            positions.push(i as f64 * h);
            positions.push(j as f64 * h);
        }
    }
    let mut cells = Vec::with_capacity(4 * m * m);
    for j in 0..m {
        for i in 0..m {
            cells.extend_from_slice(&[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    MeshManifold::from_parts(
        ModelGeometry::FlatTorus2d { grid: m as u32 },
        2,
        2,
        Some(TWO_PI),
        positions,
        4,
        cells,
        2,
        0.0,
    )
}

fn build_torus_3d(m: u32) -> Result<MeshManifold> {
    let m = m as usize;
    let h = TWO_PI / m as f64;
    let idx = |i: usize, j: usize, k: usize| (i % m) + m * ((j % m) + m * (k % m));
    let mut positions = Vec::with_capacity(3 * m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                positions.push(i as f64 * h);
                positions.push(j as f64 * h);
                positions.push(k as f64 * h);
            }
        }
    }
    let mut cells = Vec::with_capacity(8 * m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                cells.extend_from_slice(&[
                    idx(i, j, k),
                    idx(i + 1, j, k),
                    idx(i + 1, j + 1, k),
                    idx(i, j + 1, k),
                    idx(i, j, k + 1),
                    idx(i + 1, j, k + 1),
                    idx(i + 1, j + 1, k + 1),
                    idx(i, j + 1, k + 1),
                ]);
            }
        }
    }
    MeshManifold::from_parts(
        ModelGeometry::FlatTorus3d { grid: m as u32 },
        3,
        3,
        Some(TWO_PI),
        positions,
        8,
        cells,
        3,
        0.0,
    )
}
