//! Sparse symmetric linear algebra for the assembly and solver layers.
//!
//! Everything here works against matrix-free operators (closures); the only
//! concrete sparse type is a CSR matrix built from triplets. Mass matrices in
//! this crate are diagonal, so generalized eigenproblems reduce to diagonal
//! scalings.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with `f64` entries.
#[derive(Debug, Clone)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds a CSR matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in &triplets {
            debug_assert!(r < nrows && c < ncols);
            if let (Some(&last_c), true) = (col_idx.last(), row_ptr[r + 1] > 0) {
                // same row as the previous entry?
                if row_ptr[r + 1] == col_idx.len() && last_c == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            // close out rows up to r
            col_idx.push(c);
            vals.push(v);
            row_ptr[r + 1] = col_idx.len();
        }
        // make row_ptr cumulative for empty rows
        for r in 1..=nrows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y = Aᵀ x
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.vals[k] * xr;
            }
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.matvec_transpose(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows.min(self.ncols)];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] += self.vals[k];
                }
            }
        }
        d
    }

    /// Iterates over the entries of one row as (col, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Why a conjugate-gradient run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStop {
    Converged,
    MaxIterations,
    /// The operator exhibited a direction of nonpositive curvature; the
    /// iterate so far is returned (used by the saddle refiner to trigger a
    /// Levenberg shift).
    NegativeCurvature,
    Breakdown,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub stop: CgStop,
    pub iterations: usize,
    /// Final relative residual ‖b − Ax‖ / ‖b‖.
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// (semi)definite systems. Singular systems must be consistent: Krylov
/// iterates then stay in the orthogonal complement of the kernel on their
/// own, so no explicit projection is applied.
pub fn cg_solve(
    apply_a: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    precond_diag: Option<&[f64]>,
    rel_tol: f64,
    max_iters: usize,
) -> CgOutcome {
    let n = b.len();
    let norm_b = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply_a(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        z.clear();
        match precond_diag {
            Some(d) => z.extend(r.iter().zip(d).map(|(ri, di)| ri / di.max(f64::MIN_POSITIVE))),
            None => z.extend_from_slice(r),
        }
    };
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p_dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / norm_b;
    if res <= rel_tol {
        return CgOutcome {
            stop: CgStop::Converged,
            iterations: 0,
            relative_residual: res,
        };
    }
    for it in 1..=max_iters {
        apply_a(&p_dir, &mut ax);
        let pap = dot(&p_dir, &ax);
        if pap <= 0.0 {
            return CgOutcome {
                stop: if pap.abs() < 1e-300 {
                    CgStop::Breakdown
                } else {
                    CgStop::NegativeCurvature
                },
                iterations: it,
                relative_residual: res,
            };
        }
        let alpha = rz / pap;
        axpy(alpha, &p_dir, x);
        axpy(-alpha, &ax, &mut r);
        res = norm(&r) / norm_b;
        if res <= rel_tol {
            return CgOutcome {
                stop: CgStop::Converged,
                iterations: it,
                relative_residual: res,
            };
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p_dir[i] = z[i] + beta * p_dir[i];
        }
    }
    CgOutcome {
        stop: CgStop::MaxIterations,
        iterations: max_iters,
        relative_residual: res,
    }
}

/// MINRES for symmetric (possibly indefinite, possibly singular-consistent)
/// systems. Returns the iterate and its relative residual.
pub fn minres(
    apply_a: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> (Vec<f64>, CgOutcome) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return (
            x,
            CgOutcome {
                stop: CgStop::Converged,
                iterations: 0,
                relative_residual: 0.0,
            },
        );
    }
    let mut q_prev = vec![0.0; n];
    let mut q: Vec<f64> = b.iter().map(|v| v / beta1).collect();
    let mut beta = beta1;
    let (mut c_2, mut c_1) = (1.0f64, 1.0f64);
    let (mut s_2, mut s_1) = (0.0f64, 0.0f64);
    let mut d_2 = vec![0.0; n];
    let mut d_1 = vec![0.0; n];
    let mut eta = beta1;
    let mut v = vec![0.0; n];
    for it in 1..=max_iters {
        apply_a(&q, &mut v);
        axpy(-beta, &q_prev, &mut v);
        let alpha = dot(&q, &v);
        axpy(-alpha, &q, &mut v);
        let beta_next = norm(&v);

        let delta = c_1 * alpha - c_2 * s_1 * beta;
        let rho1 = (delta * delta + beta_next * beta_next).sqrt();
        let rho2 = s_1 * alpha + c_2 * c_1 * beta;
        let rho3 = s_2 * beta;
        if rho1 < 1e-300 {
            return (
                x,
                CgOutcome {
                    stop: CgStop::Breakdown,
                    iterations: it,
                    relative_residual: eta.abs() / beta1,
                },
            );
        }
        let c = delta / rho1;
        let s = beta_next / rho1;
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = (q[i] - rho3 * d_2[i] - rho2 * d_1[i]) / rho1;
        }
        axpy(c * eta, &d, &mut x);
        eta = -s * eta;
        let rel = eta.abs() / beta1;
        if rel <= rel_tol {
            return (
                x,
                CgOutcome {
                    stop: CgStop::Converged,
                    iterations: it,
                    relative_residual: rel,
                },
            );
        }
        if beta_next < 1e-300 {
            // invariant subspace exhausted
            return (
                x,
                CgOutcome {
                    stop: CgStop::Converged,
                    iterations: it,
                    relative_residual: rel,
                },
            );
        }
        d_2 = d_1;
        d_1 = d;
        q_prev = std::mem::replace(&mut q, v.iter().map(|y| y / beta_next).collect());
        beta = beta_next;
        c_2 = c_1;
        c_1 = c;
        s_2 = s_1;
        s_1 = s;
    }
    let rel = eta.abs() / beta1;
    (
        x,
        CgOutcome {
            stop: CgStop::MaxIterations,
            iterations: max_iters,
            relative_residual: rel,
        },
    )
}

/// Result of an iterative eigensolve.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending eigenvalue estimates.
    pub values: Vec<f64>,
    /// Matching eigenvectors, B-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
    pub max_residual: f64,
}

fn b_dot(b_diag: &[f64], x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).zip(b_diag).map(|((xi, yi), bi)| xi * yi * bi).sum()
}

/// Modified Gram-Schmidt in the diag(b) inner product. Returns false if a
/// column collapsed.
fn b_orthonormalize(b_diag: &[f64], cols: &mut [Vec<f64>]) -> bool {
    for j in 0..cols.len() {
        // two passes of MGS for stability
        for _ in 0..2 {
            for i in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let proj = b_dot(b_diag, &head[i], &tail[0]);
                axpy(-proj, &head[i], &mut tail[0]);
            }
        }
        let nrm = b_dot(b_diag, &cols[j], &cols[j]).sqrt();
        if nrm < 1e-300 {
            return false;
        }
        scale(1.0 / nrm, &mut cols[j]);
    }
    true
}

fn symmetric_eigen_sorted(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = mat.symmetric_eigen();
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(k, k);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    (values, vectors)
}

/// Options for the block inverse-iteration eigensolver.
#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Number of eigenpairs.
    pub k: usize,
    /// Positive shift keeping the inner solves definite when A + shift·B is
    /// only positive semidefinite (A itself may be indefinite as long as the
    /// shifted operator is definite).
    pub shift: f64,
    pub seed: u64,
    /// Relative eigenvalue-stability tolerance (the convergence criterion).
    pub tol: f64,
    /// When set, additionally require the scaled eigenpair residuals to drop
    /// below this value (needed when the eigenvectors themselves are used).
    pub residual_tol: Option<f64>,
    pub max_sweeps: usize,
}

/// Smallest `k` eigenpairs of A x = λ diag(b) x by shifted block inverse
/// iteration with Rayleigh-Ritz extraction. `a_diag` is the diagonal of A,
/// used to precondition the inner solves; `initial` seeds the block.
pub fn smallest_eigenpairs(
    apply_a: &dyn Fn(&[f64], &mut [f64]),
    a_diag: &[f64],
    b_diag: &[f64],
    project: Option<&dyn Fn(&mut [f64])>,
    initial: Option<&[Vec<f64>]>,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = b_diag.len();
    let k = opts.k;
    let shift = opts.shift;
    let tol = opts.tol;
    let max_sweeps = opts.max_sweeps;
    assert!(k >= 1 && k <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = match initial {
        Some(cols) if cols.len() == k => cols.to_vec(),
        _ => (0..k)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    };
    if let Some(p) = project {
        for col in basis.iter_mut() {
            p(col);
        }
    }
    if !b_orthonormalize(b_diag, &mut basis) {
        return Err(Error::EigenSolver {
            iterations: 0,
            residual: f64::NAN,
        });
    }

    let apply_shifted = |x: &[f64], y: &mut [f64]| {
        apply_a(x, y);
        for i in 0..x.len() {
            y[i] += shift * b_diag[i] * x[i];
        }
    };
    let precond: Vec<f64> = a_diag
        .iter()
        .zip(b_diag)
        .map(|(a, b)| a + shift * b)
        .collect();
    let inner_tol = (tol * 1e-3).clamp(1e-13, 1e-8);

    let mut values = vec![f64::INFINITY; k];
    let mut max_residual = f64::INFINITY;
    let mut stable_sweeps = 0usize;
    for sweep in 1..=max_sweeps {
        // inverse iteration step
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(k);
        for col in &basis {
            let rhs: Vec<f64> = col.iter().zip(b_diag).map(|(x, b)| x * b).collect();
            let mut y = col.clone();
            let out = cg_solve(
                &apply_shifted,
                &rhs,
                &mut y,
                Some(&precond),
                inner_tol,
                20 * n,
            );
            if out.stop == CgStop::Breakdown {
                return Err(Error::LinearSolver {
                    iterations: out.iterations,
                    residual: out.relative_residual,
                });
            }
            if let Some(p) = project {
                p(&mut y);
            }
            next.push(y);
        }
        if !b_orthonormalize(b_diag, &mut next) {
            return Err(Error::EigenSolver {
                iterations: sweep,
                residual: f64::NAN,
            });
        }
        // Rayleigh-Ritz on the block
        let ay: Vec<Vec<f64>> = next
            .iter()
            .map(|col| {
                let mut out = vec![0.0; n];
                apply_a(col, &mut out);
                out
            })
            .collect();
        let mut small = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = dot(&next[i], &ay[j]);
                small[(i, j)] = v;
                small[(j, i)] = v;
            }
        }
        let (ritz, rot) = symmetric_eigen_sorted(small);
        let mut rotated: Vec<Vec<f64>> = Vec::with_capacity(k);
        for j in 0..k {
            let mut col = vec![0.0; n];
            for i in 0..k {
                axpy(rot[(i, j)], &next[i], &mut col);
            }
            rotated.push(col);
        }
        // convergence: eigenvalue stabilization + residual norms
        let mut worst = 0.0f64;
        for j in 0..k {
            let mut ax = vec![0.0; n];
            apply_a(&rotated[j], &mut ax);
            let mut r = 0.0;
            let mut sc = 0.0;
            for i in 0..n {
                let bi = b_diag[i] * rotated[j][i];
                let ri = ax[i] - ritz[j] * bi;
                r += ri * ri / b_diag[i].max(f64::MIN_POSITIVE);
                sc += (ax[i] * ax[i]) / b_diag[i].max(f64::MIN_POSITIVE);
            }
            let denom = sc.sqrt().max(shift);
            worst = worst.max(r.sqrt() / denom);
        }
        let stable = values
            .iter()
            .zip(&ritz)
            .all(|(old, new)| (old - new).abs() <= tol * (new.abs() + shift));
        stable_sweeps = if stable { stable_sweeps + 1 } else { 0 };
        values = ritz;
        basis = rotated;
        max_residual = worst;
        // Ritz values stabilizing across sweeps is the default criterion;
        // individual vector residuals may stay large inside near-degenerate
        // clusters even though every spanned vector is a fine eigenvector.
        let residual_ok = opts.residual_tol.map_or(true, |r| worst <= r);
        if stable_sweeps >= 3 && residual_ok {
            return Ok(EigenResult {
                values,
                vectors: basis,
                sweeps: sweep,
                max_residual,
            });
        }
    }
    Err(Error::EigenSolver {
        iterations: max_sweeps,
        residual: max_residual,
    })
}

/// Ritz values of the pencil (A, diag(b)) from `steps` Lanczos iterations
/// with full reorthogonalization, in ascending order. Used for Morse-index
/// estimates where only extreme eigenvalues are needed.
pub fn lanczos_ritz_values(
    apply_a: &dyn Fn(&[f64], &mut [f64]),
    b_diag: &[f64],
    steps: usize,
    seed: u64,
) -> Vec<f64> {
    // Work on the symmetrized operator B^{-1/2} A B^{-1/2}.
    let n = b_diag.len();
    let sqrt_b: Vec<f64> = b_diag.iter().map(|b| b.sqrt()).collect();
    let apply_sym = |z: &[f64], out: &mut Vec<f64>| {
        let x: Vec<f64> = z.iter().zip(&sqrt_b).map(|(zi, s)| zi / s).collect();
        let mut y = vec![0.0; n];
        apply_a(&x, &mut y);
        out.clear();
        out.extend(y.iter().zip(&sqrt_b).map(|(yi, s)| yi / s));
    };
    let m = steps.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);
    q.push(v);
    let mut alphas = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(n);
    for j in 0..m {
        apply_sym(&q[j], &mut w);
        let alpha = dot(&q[j], &w);
        alphas.push(alpha);
        axpy(-alpha, &q[j], &mut w);
        if j > 0 {
            let beta_prev = betas[j - 1];
            axpy(-beta_prev, &q[j - 1], &mut w);
        }
        // full reorthogonalization
        for qi in &q {
            let c = dot(qi, &w);
            axpy(-c, qi, &mut w);
        }
        let beta = norm(&w);
        if j + 1 == m || beta < 1e-13 {
            break;
        }
        betas.push(beta);
        let mut next = w.clone();
        scale(1.0 / beta, &mut next);
        q.push(next);
    }
    let t = alphas.len();
    let mut tri = DMatrix::zeros(t, t);
    for i in 0..t {
        tri[(i, i)] = alphas[i];
        if i + 1 < t {
            tri[(i, i + 1)] = betas[i];
            tri[(i + 1, i)] = betas[i];
        }
    }
    let (vals, _) = symmetric_eigen_sorted(tri);
    vals
}

/// Least-squares fit y ≈ slope·x + intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        // periodic 1-D Laplacian
        let mut t = Vec::new();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            t.push((i, i, 2.0));
            t.push((i, prev, -1.0));
            t.push((i, next, -1.0));
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn cg_solves_shifted_laplacian() {
        let n = 64;
        let a = laplacian_1d(n);
        let apply = |x: &[f64], y: &mut [f64]| {
            a.matvec(x, y);
            for i in 0..n {
                y[i] += 0.5 * x[i];
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = vec![0.0; n];
        let out = cg_solve(&apply, &b, &mut x, None, 1e-12, 10 * n);
        assert_eq!(out.stop, CgStop::Converged);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "residual {err}");
    }

    #[test]
    fn smallest_eigenpairs_periodic_laplacian() {
        let n = 128;
        let a = laplacian_1d(n);
        let apply = |x: &[f64], y: &mut [f64]| a.matvec(x, y);
        let b = vec![1.0; n];
        let mean_project = |v: &mut [f64]| {
            let m: f64 = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
        };
        let res = smallest_eigenpairs(
            &apply,
            &a.diagonal(),
            &b,
            Some(&mean_project),
            None,
            &EigenOptions {
                k: 3,
                shift: 0.1,
                seed: 7,
                tol: 1e-7,
                residual_tol: Some(1e-7),
                max_sweeps: 200,
            },
        )
        .unwrap();
        // analytic: 2 - 2 cos(2πk/n), k = 1 (double) then k = 2
        let lam1 = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((res.values[0] - lam1).abs() < 1e-6 * lam1.max(1.0));
        assert!((res.values[1] - lam1).abs() < 1e-6 * lam1.max(1.0));
    }

    #[test]
    fn lanczos_counts_simple_negatives() {
        // diagonal matrix with simple spectrum: -3 + 0.25 i
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| -3.0 + 0.25 * i as f64).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = diag[i] * x[i];
            }
        };
        let b = vec![1.0; n];
        let vals = lanczos_ritz_values(&apply, &b, n, 3);
        let negatives = vals.iter().filter(|v| **v < -1e-12).count();
        assert_eq!(negatives, 12);
    }

    #[test]
    fn minres_solves_indefinite_diagonal() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { -(i as f64) - 1.0 } else { i as f64 + 0.5 }).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = diag[i] * x[i];
            }
        };
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
        let (x, out) = minres(&apply, &b, 1e-12, 10 * n);
        assert_eq!(out.stop, CgStop::Converged);
        for i in 0..n {
            assert!((x[i] - b[i] / diag[i]).abs() < 1e-9, "component {i}");
        }
    }

    #[test]
    fn minres_handles_singular_consistent() {
        // diagonal with a zero eigenvalue; rhs orthogonal to the kernel
        let n = 20;
        let diag: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { i as f64 - 5.3 }).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = diag[i] * x[i];
            }
        };
        let mut b = vec![0.4; n];
        b[0] = 0.0;
        let (x, out) = minres(&apply, &b, 1e-11, 10 * n);
        assert_eq!(out.stop, CgStop::Converged);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "residual {err}");
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.25 * x - 0.5).collect();
        let (s, c) = linear_fit(&xs, &ys);
        assert!((s - 3.25).abs() < 1e-12);
        assert!((c + 0.5).abs() < 1e-12);
    }
}
