//! Mountain-pass search: pull a family down the energy landscape, refine its
//! max slice to a discrete critical point, and sweep over ε.
//!
//! The flow applies simultaneous per-node descent with backtracking line
//! search (each node's energy is non-increasing, hence so is the max). The
//! refiner is a damped Newton iteration on the gradient with a Levenberg
//! shift that escalates whenever conjugate gradients detects nonpositive
//! curvature; large shifts degenerate into safeguarded gradient steps, so no
//! separate fallback is needed.

use std::io::Write as IoWrite;
use std::time::Instant;

use rayon::prelude::*;

use crate::energy::{
    c2_add, c2_norm2, c2_scale, energy_value, gradient, residual_norm, ComplexField, Potential, C2,
};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::linalg::{lanczos_ritz_values, linear_fit, smallest_eigenpairs, EigenOptions};
use crate::manifold::DecOperators;
use crate::sweep::{build_family, DiskFamily, SweepMap};

/// Descent-flow policy.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Initial per-node step scale.
    pub step: f64,
    /// Backtracking line search (guarantees a non-increasing max energy).
    pub line_search: bool,
    /// Apply the nearest-point retraction onto the unit disk each step.
    pub truncate: bool,
    pub max_iters: usize,
    /// Stopping window length (≥ 10).
    pub window: usize,
    /// Relative max-energy decrease over the window below which to stop.
    pub rel_decrease: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step: 0.1,
            line_search: true,
            truncate: true,
            max_iters: 2000,
            window: 20,
            rel_decrease: 1e-8,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::Validation("flow step must be positive".into()));
        }
        if self.window < 10 {
            return Err(Error::Validation(format!(
                "flow window {} too short (min 10)",
                self.window
            )));
        }
        Ok(())
    }
}

/// Per-iteration record of the flow.
#[derive(Debug, Clone)]
pub struct FlowHistory {
    /// Max-node energy per iteration, starting with the initial family.
    pub max_energy: Vec<f64>,
    pub iterations: usize,
    /// Line search failed at the max node (near-criticality signal).
    pub stagnated: bool,
    /// The window rule fired.
    pub converged: bool,
}

impl FlowHistory {
    pub fn is_non_increasing(&self) -> bool {
        self.max_energy
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
    }
}

/// Flows every interior node of a family down the energy landscape;
/// boundary nodes are energy-0 constants and are left bit-identical.
pub fn pull_down(
    dec: &DecOperators,
    family: &DiskFamily,
    cfg: &FlowConfig,
) -> Result<(DiskFamily, FlowHistory)> {
    cfg.validate()?;
    family.check_admissible()?;
    let mut flowed = family.clone();
    let n_nodes = flowed.nodes.len();
    let mut steps = vec![cfg.step; n_nodes];
    let mut energies: Vec<f64> = flowed
        .nodes
        .par_iter()
        .map(|n| energy_value(dec, &n.field))
        .collect();
    let mut history = vec![max_with_index(&energies).1];
    let mut stagnated = false;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        let stalled: Vec<bool> = flowed
            .nodes
            .par_iter_mut()
            .zip(steps.par_iter_mut())
            .zip(energies.par_iter_mut())
            .map(|((node, step), e_cur)| {
                if node.boundary {
                    return false;
                }
                descend_node(dec, &mut node.field, step, e_cur, cfg)
            })
            .collect();
        iterations = iter;
        let (argmax, emax) = max_with_index(&energies);
        history.push(emax);
        if stalled[argmax] {
            stagnated = true;
            break;
        }
        if iter >= cfg.window {
            let before = history[history.len() - 1 - cfg.window];
            let now = history[history.len() - 1];
            if before - now <= cfg.rel_decrease * before.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }

    flowed.max_node_energy = max_with_index(&energies).1;
    flowed.log_eps_ratio =
        flowed.max_node_energy / flowed.epsilon.ln().abs().max(f64::MIN_POSITIVE);
    Ok((
        flowed,
        FlowHistory {
            max_energy: history,
            iterations,
            stagnated,
            converged,
        },
    ))
}

/// One descent update of one node. Returns true when the line search could
/// not find a decreasing step ≥ 1e-14.
fn descend_node(
    dec: &DecOperators,
    field: &mut ComplexField,
    step: &mut f64,
    e_cur: &mut f64,
    cfg: &FlowConfig,
) -> bool {
    let g = gradient(dec, field);
    // descent direction: −★0⁻¹ g (the L² gradient), with derivative −gg
    let gg: f64 = g
        .iter()
        .zip(&dec.star0)
        .map(|(gv, m)| c2_norm2(*gv) / m)
        .sum();
    if gg == 0.0 {
        return false;
    }
    let dir: Vec<C2> = g
        .iter()
        .zip(&dec.star0)
        .map(|(gv, m)| c2_scale(-1.0 / m, *gv))
        .collect();
    if !cfg.line_search {
        for (v, d) in field.values.iter_mut().zip(&dir) {
            *v = c2_add(*v, c2_scale(cfg.step, *d));
        }
        if cfg.truncate {
            field.truncate_to_disk();
        }
        *e_cur = energy_value(dec, field);
        return false;
    }
    let mut t = *step;
    while t >= 1e-14 {
        let mut candidate = field.clone();
        for (v, d) in candidate.values.iter_mut().zip(&dir) {
            *v = c2_add(*v, c2_scale(t, *d));
        }
        if cfg.truncate {
            candidate.truncate_to_disk();
        }
        let e_new = energy_value(dec, &candidate);
        if e_new <= *e_cur - 1e-4 * t * gg {
            *field = candidate;
            *e_cur = e_new;
            *step = (t * 2.0).min(1e3);
            return false;
        }
        t *= 0.5;
    }
    true
}

fn max_with_index(values: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Levenberg-shifted Newton refinement outcome.
#[derive(Debug, Clone)]
pub struct RefineInfo {
    pub iterations: usize,
    pub residual: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub shift_escalations: usize,
}

struct HessianBlocks {
    blocks: Vec<[[f64; 2]; 2]>,
}

fn hessian_blocks(dec: &DecOperators, u: &ComplexField) -> HessianBlocks {
    let inv_eps2 = 1.0 / (u.epsilon * u.epsilon);
    let blocks = u
        .values
        .iter()
        .enumerate()
        .map(|(v, z)| {
            let h = Potential::hessian(*z);
            let m = dec.star0[v] * inv_eps2;
            [[m * h[0][0], m * h[0][1]], [m * h[1][0], m * h[1][1]]]
        })
        .collect();
    HessianBlocks { blocks }
}

/// y = (L + blocks + σ★0) x on interleaved components.
fn apply_hessian_flat(
    dec: &DecOperators,
    blocks: &HessianBlocks,
    sigma: f64,
    x: &[f64],
    y: &mut [f64],
) {
    let n = dec.mesh.vertex_count();
    debug_assert_eq!(x.len(), 2 * n);
    let l = &dec.scalar_laplacian;
    for r in 0..n {
        let mut acc0 = 0.0;
        let mut acc1 = 0.0;
        for (c, v) in l.row(r) {
            acc0 += v * x[2 * c];
            acc1 += v * x[2 * c + 1];
        }
        let b = &blocks.blocks[r];
        let x0 = x[2 * r];
        let x1 = x[2 * r + 1];
        let m = dec.star0[r];
        y[2 * r] = acc0 + b[0][0] * x0 + b[0][1] * x1 + sigma * m * x0;
        y[2 * r + 1] = acc1 + b[1][0] * x0 + b[1][1] * x1 + sigma * m * x1;
    }
}

fn hessian_diag_flat(dec: &DecOperators, blocks: &HessianBlocks, sigma: f64) -> Vec<f64> {
    let n = dec.mesh.vertex_count();
    let ldiag = dec.scalar_laplacian.diagonal();
    let mut d = vec![0.0; 2 * n];
    for v in 0..n {
        let b = &blocks.blocks[v];
        let m = dec.star0[v];
        d[2 * v] = (ldiag[v] + b[0][0] + sigma * m).abs().max(1e-300);
        d[2 * v + 1] = (ldiag[v] + b[1][1] + sigma * m).abs().max(1e-300);
    }
    d
}

/// Refines a field to a discrete critical point: damped Newton with a
/// Levenberg shift escalated on indefiniteness, accepting steps that reduce
/// the residual norm. The result's energy may differ from the input's
/// (saddle refinement can move energy); both are reported.
pub fn refine_to_critical(
    dec: &DecOperators,
    u0: &ComplexField,
    tol: f64,
    max_newton: usize,
) -> Result<(ComplexField, RefineInfo)> {
    if u0.max_modulus() > 1.0 + 1e-9 {
        return Err(Error::Validation(format!(
            "refine requires ‖u‖_∞ ≤ 1, got {}",
            u0.max_modulus()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let n = dec.mesh.vertex_count();
    let initial_energy = energy_value(dec, u0);
    let mut u = u0.clone();
    let mut g = gradient(dec, &u);
    let mut res = residual_norm(dec, &g);
    let mut escalations = 0usize;
    let sqrt_m: Vec<f64> = dec.star0.iter().map(|m| m.sqrt()).collect();

    let try_step = |u: &ComplexField, delta: &[f64], t: f64| -> (ComplexField, Vec<C2>, f64) {
        let mut candidate = u.clone();
        for (i, v) in candidate.values.iter_mut().enumerate() {
            v[0] += t * delta[2 * i];
            v[1] += t * delta[2 * i + 1];
        }
        if candidate.max_modulus() > 1.0 {
            candidate.truncate_to_disk();
        }
        let g_new = gradient(dec, &candidate);
        let res_new = residual_norm(dec, &g_new);
        (candidate, g_new, res_new)
    };

    let mut iterations = 0usize;
    while res > tol && iterations < max_newton {
        iterations += 1;
        let blocks = hessian_blocks(dec, &u);

        // Newton system H δ = −g, solved in mass-symmetrized coordinates
        // B z = −★0^{-1/2} g with B = ★0^{-1/2} H ★0^{-1/2}; MINRES handles
        // the indefiniteness (saddle) and the exact phase zero mode (the
        // right-hand side is orthogonal to it). A loose forcing tolerance
        // keeps each solve cheap and leaves the soft near-null modes of the
        // critical orbit unresolved, which regularizes the step.
        let rhs: Vec<f64> = g
            .iter()
            .zip(&sqrt_m)
            .flat_map(|(gv, s)| [-gv[0] / s, -gv[1] / s])
            .collect();
        let apply_b = |z: &[f64], out: &mut [f64]| {
            let x: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(i, zi)| zi / sqrt_m[i / 2])
                .collect();
            let mut y = vec![0.0; 2 * n];
            apply_hessian_flat(dec, &blocks, 0.0, &x, &mut y);
            for (i, o) in out.iter_mut().enumerate() {
                *o = y[i] / sqrt_m[i / 2];
            }
        };
        let (z, _solve_out) = crate::linalg::minres(&apply_b, &rhs, 1e-4, (4 * n).min(4000));
        let delta: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, zi)| zi / sqrt_m[i / 2])
            .collect();

        // backtracking on the residual norm
        let mut accepted = false;
        {
            let mut t = 1.0f64;
            while t >= 1e-8 {
                let (candidate, g_new, res_new) = try_step(&u, &delta, t);
                if res_new <= (1.0 - 1e-3 * t) * res {
                    u = candidate;
                    g = g_new;
                    res = res_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            // guaranteed-progress fallback: steepest descent on
            // Φ = ½‖g‖²_{★0⁻¹}, whose gradient is H ★0⁻¹ g
            let minv_g: Vec<f64> = g
                .iter()
                .zip(&dec.star0)
                .flat_map(|(gv, m)| [gv[0] / m, gv[1] / m])
                .collect();
            let mut grad_phi = vec![0.0; 2 * n];
            apply_hessian_flat(dec, &blocks, 0.0, &minv_g, &mut grad_phi);
            let slope: f64 = grad_phi
                .chunks_exact(2)
                .zip(&dec.star0)
                .map(|(gp, m)| (gp[0] * gp[0] + gp[1] * gp[1]) / m)
                .sum();
            if slope <= 0.0 {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: res,
                });
            }
            let dir: Vec<f64> = grad_phi
                .chunks_exact(2)
                .zip(&dec.star0)
                .flat_map(|(gp, m)| [-gp[0] / m, -gp[1] / m])
                .collect();
            let phi = 0.5 * res * res;
            let mut t = (phi / slope).min(1.0);
            let mut ok = false;
            while t >= 1e-16 {
                let (candidate, g_new, res_new) = try_step(&u, &dir, t);
                if 0.5 * res_new * res_new <= phi - 1e-4 * t * slope {
                    u = candidate;
                    g = g_new;
                    res = res_new;
                    escalations += 1;
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if !ok {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: res,
                });
            }
        }
    }

    if res > tol {
        return Err(Error::NonConvergence {
            iterations,
            residual: res,
        });
    }
    let final_energy = energy_value(dec, &u);
    Ok((
        u,
        RefineInfo {
            iterations,
            residual: res,
            initial_energy,
            final_energy,
            shift_escalations: escalations,
        },
    ))
}

/// Lowest eigenvalues of the second variation at `u` in the ★0 inner
/// product. Subspace iteration with an adaptive Levenberg shift; falls back
/// to Lanczos Ritz values if the block iteration stalls.
pub fn second_variation_spectrum(dec: &DecOperators, u: &ComplexField, k: usize) -> Vec<f64> {
    let n = dec.mesh.vertex_count();
    let k = k.min(2 * n);
    let blocks = hessian_blocks(dec, u);
    let apply = |x: &[f64], y: &mut [f64]| apply_hessian_flat(dec, &blocks, 0.0, x, y);
    let m_flat: Vec<f64> = dec.star0.iter().flat_map(|&m| [m, m]).collect();

    let probe = lanczos_ritz_values(&apply, &m_flat, 120.min(2 * n), 0x5eed_0010);
    let lam_min = probe.first().copied().unwrap_or(0.0);
    let lam_max = probe.last().copied().unwrap_or(1.0);
    let sigma = 1.5 * (-lam_min).max(0.0) + 1e-3 * lam_max.abs().max(1e-12);

    let diag = hessian_diag_flat(dec, &blocks, 0.0);
    let opts = EigenOptions {
        k,
        shift: sigma,
        seed: 0x5eed_0011,
        tol: 1e-4,
        residual_tol: None,
        max_sweeps: 40,
    };
    match smallest_eigenpairs(&apply, &diag, &m_flat, None, None, &opts) {
        Ok(r) => r.values,
        Err(_) => probe.into_iter().take(k).collect(),
    }
}

/// Count of negative second-variation eigenvalues among the `k` lowest.
pub fn morse_index_estimate(dec: &DecOperators, u: &ComplexField, k: usize) -> (usize, Vec<f64>) {
    let values = second_variation_spectrum(dec, u, k);
    let scale = values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()))
        .max(1e-300);
    let count = values.iter().filter(|&&v| v < -1e-8 * scale).count();
    (count, values)
}

/// Where the refiner's initial slice came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementProvenance {
    /// Max slice of the fully flowed family.
    FlowedMaxSlice { flow_iterations: usize },
    /// Max slice of a partial flow (fallback when the full flow collapsed
    /// onto a trivial configuration).
    PartialFlowSlice { flow_iterations: usize },
}

impl RefinementProvenance {
    pub fn label(&self) -> String {
        match self {
            RefinementProvenance::FlowedMaxSlice { flow_iterations } => {
                format!("flowed_max_slice:{flow_iterations}")
            }
            RefinementProvenance::PartialFlowSlice { flow_iterations } => {
                format!("partial_flow_slice:{flow_iterations}")
            }
        }
    }
}

/// One ε's min-max outcome.
#[derive(Debug, Clone)]
pub struct MinMaxResult {
    pub epsilon: f64,
    pub abs_log_eps: f64,
    /// Max-node energy after the flow (upper estimate of the min-max value).
    pub c_eps_estimate: f64,
    pub history: FlowHistory,
    pub max_node_index: usize,
    pub refined: ComplexField,
    pub refined_energy: f64,
    pub refined_residual: f64,
    pub refine_iterations: usize,
    pub morse_index: usize,
    pub lowest_eigenvalues: Vec<f64>,
    pub min_modulus: f64,
    /// E_ε(refined) is bounded away from zero.
    pub nontrivial: bool,
    pub provenance: RefinementProvenance,
    pub wall_seconds: f64,
}

/// Runs the full min-max pipeline for one ε: build the swept family, pull it
/// down, refine the max slice.
pub fn min_max_once(
    dec: &DecOperators,
    sweep_map: &SweepMap,
    epsilon: f64,
    grid: (usize, usize),
    flow_cfg: &FlowConfig,
    refine_tol: f64,
    max_newton: usize,
) -> Result<MinMaxResult> {
    let start = Instant::now();
    let family = build_family(dec, sweep_map, epsilon, grid)?;

    let refine_from = |slice: &ComplexField| -> Result<(ComplexField, RefineInfo)> {
        let mut start_field = slice.clone();
        if start_field.max_modulus() > 1.0 {
            start_field.truncate_to_disk();
        }
        refine_to_critical(dec, &start_field, refine_tol, max_newton)
    };

    // flow-then-refine ladder: if the refiner cannot converge from the max
    // slice, keep flowing with a tightened stopping rule and retry
    let (mut flowed, mut history) = pull_down(dec, &family, flow_cfg)?;
    let mut round_cfg = flow_cfg.clone();
    let mut outcome = None;
    for round in 0..4 {
        let (idx, c) = flowed.max_energy_node(dec);
        match refine_from(&flowed.nodes[idx].field) {
            Ok(pair) => {
                outcome = Some((idx, c, pair));
                break;
            }
            Err(e) => {
                if round == 3 {
                    return Err(e);
                }
                round_cfg.rel_decrease /= 100.0;
                round_cfg.max_iters += round_cfg.max_iters / 2;
                let (f2, h2) = pull_down(dec, &flowed, &round_cfg)?;
                flowed = f2;
                history.max_energy.extend(h2.max_energy.iter().skip(1).copied());
                history.iterations += h2.iterations;
                history.stagnated = h2.stagnated;
                history.converged = h2.converged;
            }
        }
    }
    let (max_idx, c_eps, (mut refined, mut info)) =
        outcome.expect("refinement ladder returns or errors");
    let mut provenance = RefinementProvenance::FlowedMaxSlice {
        flow_iterations: history.iterations,
    };
    // If the refiner slid off the saddle to a near-constant, retry from a
    // partially flowed slice which sits higher on the ridge.
    if info.final_energy < 0.01 * c_eps.max(f64::MIN_POSITIVE) {
        let mut partial_cfg = flow_cfg.clone();
        partial_cfg.max_iters = (flow_cfg.max_iters / 4).max(1);
        let (partial, partial_hist) = pull_down(dec, &family, &partial_cfg)?;
        let (pidx, _) = partial.max_energy_node(dec);
        if let Ok((r2, i2)) = refine_from(&partial.nodes[pidx].field) {
            if i2.final_energy > info.final_energy {
                refined = r2;
                info = i2;
                provenance = RefinementProvenance::PartialFlowSlice {
                    flow_iterations: partial_hist.iterations,
                };
            }
        }
    }

    let (morse_index, lowest) = morse_index_estimate(dec, &refined, 20);
    let min_modulus = refined.min_modulus();
    let refined_energy = info.final_energy;
    Ok(MinMaxResult {
        epsilon,
        abs_log_eps: epsilon.ln().abs(),
        c_eps_estimate: c_eps,
        history,
        max_node_index: max_idx,
        refined,
        refined_energy,
        refined_residual: info.residual,
        refine_iterations: info.iterations,
        morse_index,
        lowest_eigenvalues: lowest,
        min_modulus,
        nontrivial: refined_energy > 1e-6,
        provenance,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Results of an ε-sweep plus the fitted affine law c_ε ≈ C₁|log ε| + C₂.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<MinMaxResult>,
    pub fit_c1: f64,
    pub fit_c2: f64,
}

/// Runs the pipeline for a decreasing list of ε values. Each ε must stay
/// above the mesh floor h/4 (the vortex core is unresolvable below it).
pub fn cepsilon_sweep(
    dec: &DecOperators,
    sweep_map: &SweepMap,
    eps_list: &[f64],
    grid: (usize, usize),
    flow_cfg: &FlowConfig,
    refine_tol: f64,
    max_newton: usize,
) -> Result<SweepTable> {
    if eps_list.is_empty() {
        return Err(Error::Validation("empty epsilon list".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Validation("epsilon list must be decreasing".into()));
    }
    let floor = dec.mesh.max_edge_length() / 4.0;
    for &eps in eps_list {
        if eps <= floor {
            return Err(Error::Resolution(format!(
                "ε = {eps} at or below the mesh floor h/4 = {floor:.4}"
            )));
        }
    }
    let rows: Vec<MinMaxResult> = eps_list
        .iter()
        .map(|&eps| min_max_once(dec, sweep_map, eps, grid, flow_cfg, refine_tol, max_newton))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.abs_log_eps).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.c_eps_estimate).collect();
    let (fit_c1, fit_c2) = if rows.len() >= 2 {
        linear_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SweepTable {
        rows,
        fit_c1,
        fit_c2,
    })
}

/// Columnar text form of the sweep results (schema-version comment, header
/// row, one line per ε).
pub fn write_sweep_table<W: IoWrite>(table: &SweepTable, out: &mut W) -> Result<()> {
    writeln!(out, "# glsweep 1")?;
    writeln!(
        out,
        "eps abs_log_eps c_eps refined_energy residual min_abs_u morse_index wall_time_s"
    )?;
    for r in &table.rows {
        writeln!(
            out,
            "{} {} {} {} {} {} {} {:.3}",
            fmt_f64(r.epsilon),
            fmt_f64(r.abs_log_eps),
            fmt_f64(r.c_eps_estimate),
            fmt_f64(r.refined_energy),
            fmt_f64(r.refined_residual),
            fmt_f64(r.min_modulus),
            r.morse_index,
            r.wall_seconds
        )?;
    }
    Ok(())
}
