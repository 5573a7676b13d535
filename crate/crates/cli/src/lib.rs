//! End-to-end experiment driver: build geometry, construct the swept family,
//! run the min-max sweep, refine, run diagnostics, and emit all tables and
//! persisted artifacts into one directory.
//!
//! Configuration is a single TOML file (one source of truth); the only
//! environment override is `GLMM_OUT` for the output directory. Two runs of
//! the same config produce byte-identical summary tables; wall-clock timings
//! live only in `sweep.txt`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use glmm_core::concentration::{
    analyze_field, dtheta_subcritical, read_report, write_form, write_report, ConcentrationReport,
    DiagnosticsOptions,
};
use glmm_core::energy::{
    default_test_fields, energy_value, gl_residual, load_field, save_field, stress_energy,
};
use glmm_core::fmt_f64;
use glmm_core::manifold::{
    assemble_dec, build_model, export_mesh, import_mesh, poincare_constant, ModelGeometry,
};
use glmm_core::minmax::{min_max_once, write_sweep_table, FlowConfig, MinMaxResult, SweepTable};
use glmm_core::sweep::{build_sweep_map, save_family, vortex_disk_energy, SweepMap};
use glmm_core::SpectralInfo;

/// How a command failed, for exit-code mapping (1 = validation, 2 = compute,
/// 3 = verification).
#[derive(Debug)]
pub enum CliFailure {
    Validation(String),
    Compute { stage: String, message: String },
    Verification(String),
}

impl std::fmt::Display for CliFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliFailure::Validation(m) => write!(f, "validation: {m}"),
            CliFailure::Compute { stage, message } => write!(f, "compute [{stage}]: {message}"),
            CliFailure::Verification(m) => write!(f, "verification: {m}"),
        }
    }
}

impl std::error::Error for CliFailure {}

impl CliFailure {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliFailure::Validation(_) => 1,
            CliFailure::Compute { .. } => 2,
            CliFailure::Verification(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliFailure>;

fn compute_err(stage: &str, e: impl std::fmt::Display) -> CliFailure {
    CliFailure::Compute {
        stage: stage.to_string(),
        message: e.to_string(),
    }
}

// --- configuration ---

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub geometry: GeometrySection,
    pub family: FamilySection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// unit_sphere | flat_torus_2d | flat_torus_3d
    pub model: String,
    /// Subdivision level (sphere) or grid size (tori).
    pub parameter: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub epsilons: Vec<f64>,
    pub n_r: usize,
    pub n_t: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub step: f64,
    pub line_search: bool,
    pub truncate: bool,
    pub max_iters: usize,
    pub window: usize,
    pub rel_decrease: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = FlowConfig::default();
        FlowSection {
            step: d.step,
            line_search: d.line_search,
            truncate: d.truncate,
            max_iters: d.max_iters,
            window: d.window,
            rel_decrease: d.rel_decrease,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    pub tolerance: f64,
    pub max_newton: usize,
}

impl Default for RefineSection {
    fn default() -> Self {
        RefineSection {
            tolerance: 1e-8,
            max_newton: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub hodge: bool,
    pub density: bool,
    pub ellipticity: bool,
    pub bochner: bool,
    pub stress_energy: bool,
    pub eta0: f64,
    pub delta0: f64,
    pub save_forms: bool,
    pub save_family_fields: bool,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let d = DiagnosticsOptions::default();
        DiagnosticsSection {
            hodge: d.hodge,
            density: d.density,
            ellipticity: d.ellipticity,
            bochner: d.bochner,
            stress_energy: d.stress,
            eta0: d.eta0,
            delta0: d.delta0,
            save_forms: false,
            save_family_fields: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Worker threads for the per-ε pipelines; 0 = library default.
    #[serde(default)]
    pub workers: usize,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> CliResult<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliFailure::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliFailure::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |m: String| Err(CliFailure::Validation(m));
        if self.schema_version != 1 {
            return fail(format!("unsupported schema_version {}", self.schema_version));
        }
        self.model()?;
        if self.family.epsilons.is_empty() {
            return fail("family.epsilons is empty".into());
        }
        if self.family.epsilons.iter().any(|&e| !(e > 0.0)) {
            return fail("family.epsilons must be positive".into());
        }
        if self.family.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return fail("family.epsilons must be strictly decreasing".into());
        }
        if self.family.n_r < 2 || self.family.n_t < 4 {
            return fail(format!(
                "family grid ({}, {}) too small",
                self.family.n_r, self.family.n_t
            ));
        }
        if !(self.flow.step > 0.0) {
            return fail("flow.step must be positive".into());
        }
        if self.flow.window < 10 {
            return fail("flow.window must be at least 10".into());
        }
        if !(self.refine.tolerance > 0.0) {
            return fail("refine.tolerance must be positive".into());
        }
        if !(self.diagnostics.eta0 > 0.0) || !(self.diagnostics.delta0 > 0.0) {
            return fail("diagnostics.eta0 and delta0 must be positive".into());
        }
        if self.output.dir.is_empty() {
            return fail("output.dir is empty".into());
        }
        Ok(())
    }

    pub fn model(&self) -> CliResult<ModelGeometry> {
        ModelGeometry::from_name(&self.geometry.model, self.geometry.parameter)
            .map_err(|e| CliFailure::Validation(e.to_string()))
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            step: self.flow.step,
            line_search: self.flow.line_search,
            truncate: self.flow.truncate,
            max_iters: self.flow.max_iters,
            window: self.flow.window,
            rel_decrease: self.flow.rel_decrease,
        }
    }

    pub fn diagnostics_options(&self) -> DiagnosticsOptions {
        DiagnosticsOptions {
            hodge: self.diagnostics.hodge,
            density: self.diagnostics.density,
            ellipticity: self.diagnostics.ellipticity,
            bochner: self.diagnostics.bochner,
            stress: self.diagnostics.stress_energy,
            eta0: self.diagnostics.eta0,
            delta0: self.diagnostics.delta0,
            ..DiagnosticsOptions::default()
        }
    }

    /// Output directory, honoring the GLMM_OUT override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var("GLMM_OUT") {
            Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from(&self.output.dir),
        }
    }
}

// --- run ---

struct Artifacts {
    dir: PathBuf,
    manifest: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> CliResult<Artifacts> {
        fs::create_dir_all(dir).map_err(|e| compute_err("create-output", e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            manifest: Vec::new(),
        })
    }

    fn file(&mut self, rel: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| compute_err("create-output", e))?;
        }
        self.manifest.push(rel.to_string());
        Ok(BufWriter::new(
            File::create(&path).map_err(|e| compute_err("write-artifact", e))?,
        ))
    }

    fn finish(mut self) -> CliResult<PathBuf> {
        self.manifest.push("MANIFEST.txt".to_string());
        let mut out = BufWriter::new(
            File::create(self.dir.join("MANIFEST.txt"))
                .map_err(|e| compute_err("write-manifest", e))?,
        );
        for line in &self.manifest {
            writeln!(out, "{line}").map_err(|e| compute_err("write-manifest", e))?;
        }
        out.flush().map_err(|e| compute_err("write-manifest", e))?;
        Ok(self.dir)
    }

    fn mark_failed(&self, stage: &str, message: &str) {
        let _ = fs::write(
            self.dir.join("FAILED"),
            format!("stage {stage}\n{message}\n"),
        );
    }
}

/// Runs the full pipeline described by the config. Deterministic for a fixed
/// (config, seed): identical summary tables on identical platforms.
pub fn run(config: &RunConfig) -> CliResult<PathBuf> {
    config.validate()?;
    let dir = config.output_dir();
    let mut artifacts = Artifacts::create(&dir)?;
    match run_stages(config, &mut artifacts) {
        Ok(()) => artifacts.finish(),
        Err(e) => {
            let (stage, message) = match &e {
                CliFailure::Compute { stage, message } => (stage.clone(), message.clone()),
                other => ("validation".to_string(), other.to_string()),
            };
            artifacts.mark_failed(&stage, &message);
            Err(e)
        }
    }
}

fn run_stages(config: &RunConfig, artifacts: &mut Artifacts) -> CliResult<()> {
    // config copy: the one source of truth for verify
    {
        let mut f = artifacts.file("config.toml")?;
        f.write_all(config.to_toml_string().as_bytes())
            .map_err(|e| compute_err("write-config", e))?;
    }

    // geometry
    let model = config.model()?;
    let mesh = Arc::new(build_model(model).map_err(|e| compute_err("build-model", e))?);
    export_mesh(&mesh, &artifacts.dir.join("mesh.txt")).map_err(|e| compute_err("export-mesh", e))?;
    artifacts.manifest.push("mesh.txt".to_string());
    let dec = assemble_dec(&mesh).map_err(|e| compute_err("assemble-dec", e))?;
    let spectral = poincare_constant(&dec).map_err(|e| compute_err("spectral", e))?;
    {
        let mut f = artifacts.file("spectral.txt")?;
        writeln!(f, "glspectral 1").map_err(|e| compute_err("write-spectral", e))?;
        writeln!(f, "lambda1 {}", fmt_f64(spectral.lambda1))
            .map_err(|e| compute_err("write-spectral", e))?;
        writeln!(f, "harmonic_dim {}", spectral.harmonic_dim)
            .map_err(|e| compute_err("write-spectral", e))?;
    }

    // sweep map
    let sweep = build_sweep_map(&dec, config.family.seed).map_err(|e| compute_err("sweep-map", e))?;
    write_sweep_map(&sweep, artifacts)?;

    // per-ε pipelines (optionally on a bounded worker pool)
    let grid = (config.family.n_r, config.family.n_t);
    let flow_cfg = config.flow_config();
    let opts = config.diagnostics_options();
    let eps_list = config.family.epsilons.clone();
    let floor = mesh.max_edge_length() / 4.0;
    for &eps in &eps_list {
        if eps <= floor {
            return Err(CliFailure::Validation(format!(
                "ε = {eps} at or below the mesh floor h/4 = {floor:.4}"
            )));
        }
    }

    let run_one = |eps: f64| -> CliResult<EpsilonOutcome> {
        let result = min_max_once(
            &dec,
            &sweep,
            eps,
            grid,
            &flow_cfg,
            config.refine.tolerance,
            config.refine.max_newton,
        )
        .map_err(|e| compute_err("min-max", e))?;
        let stress = config.diagnostics.stress_energy.then(|| {
            let fields = default_test_fields(&mesh);
            stress_energy(&dec, &result.refined, &fields)
        });
        let (report, _) = analyze_field(&dec, &spectral, &result.refined, stress.as_ref(), &opts)
            .map_err(|e| compute_err("diagnostics", e))?;
        Ok(EpsilonOutcome { result, report })
    };

    let outcomes: Vec<CliResult<EpsilonOutcome>> = if config.output.workers == 1 {
        eps_list.iter().map(|&e| run_one(e)).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.output.workers)
            .build()
            .map_err(|e| compute_err("thread-pool", e))?;
        pool.install(|| eps_list.par_iter().map(|&e| run_one(e)).collect())
    };
    let mut results = Vec::new();
    let mut reports = Vec::new();
    for outcome in outcomes {
        let o = outcome?;
        results.push(o.result);
        reports.push(o.report);
    }

    // persist per-ε artifacts (serialized writes, deterministically ordered)
    for (i, (result, report)) in results.iter_mut().zip(reports.iter_mut()).enumerate() {
        let family = glmm_core::sweep::build_family(&dec, &sweep, result.epsilon, grid)
            .map_err(|e| compute_err("family", e))?;
        let fam_dir = artifacts.dir.join(format!("family_eps{i}"));
        save_family(&family, &dec, &fam_dir, config.diagnostics.save_family_fields)
            .map_err(|e| compute_err("save-family", e))?;
        artifacts
            .manifest
            .push(format!("family_eps{i}/family.txt"));

        save_field(&result.refined, &artifacts.dir.join(format!("crit_eps{i}.txt")))
            .map_err(|e| compute_err("save-field", e))?;
        artifacts.manifest.push(format!("crit_eps{i}.txt"));

        {
            let mut f = artifacts.file(&format!("hist_eps{i}.txt"))?;
            writeln!(f, "# glhist 1").map_err(|e| compute_err("write-hist", e))?;
            writeln!(f, "# max-node energy per flow iteration")
                .map_err(|e| compute_err("write-hist", e))?;
            for v in &result.history.max_energy {
                writeln!(f, "{}", fmt_f64(*v)).map_err(|e| compute_err("write-hist", e))?;
            }
        }
        {
            let mut f = artifacts.file(&format!("minmax_eps{i}.txt"))?;
            write_minmax_file(&mut f, result).map_err(|e| compute_err("write-minmax", e))?;
        }

        if config.diagnostics.save_forms && config.diagnostics.hodge {
            let parts = glmm_core::concentration::hodge_decompose(&dec, &spectral, &result.refined)
                .map_err(|e| compute_err("hodge-forms", e))?;
            for (name, kind, values) in [
                ("gamma", "edge", &parts.gamma),
                ("theta", "vertex", &parts.theta),
                ("xi", "face", &parts.xi),
            ] {
                let rel = format!("forms/eps{i}_{name}.txt");
                let mut f = artifacts.file(&rel)?;
                write_form(values, kind, result.epsilon, &mesh, &mut f)
                    .map_err(|e| compute_err("write-form", e))?;
                report.form_files.push(rel);
            }
        }
        {
            let mut f = artifacts.file(&format!("report_eps{i}.txt"))?;
            write_report(report, &mut f).map_err(|e| compute_err("write-report", e))?;
        }
    }

    // dθ subcriticality table across the sweep
    if config.diagnostics.hodge && results.len() >= 3 {
        let pairs: Vec<(f64, f64)> = results
            .iter()
            .zip(&reports)
            .map(|(r, rep)| (r.epsilon, rep.hodge.as_ref().map(|h| h.dtheta_sq).unwrap_or(0.0)))
            .collect();
        let rows = dtheta_subcritical(&pairs).map_err(|e| compute_err("dtheta", e))?;
        let mut f = artifacts.file("dtheta.txt")?;
        writeln!(f, "# gldtheta 1").map_err(|e| compute_err("write-dtheta", e))?;
        writeln!(f, "eps abs_log_eps dtheta_sq ratio_sqrt ratio_linear")
            .map_err(|e| compute_err("write-dtheta", e))?;
        for r in rows {
            writeln!(
                f,
                "{} {} {} {} {}",
                fmt_f64(r.epsilon),
                fmt_f64(r.abs_log_eps),
                fmt_f64(r.dtheta_sq),
                fmt_f64(r.ratio_sqrt),
                fmt_f64(r.ratio_linear)
            )
            .map_err(|e| compute_err("write-dtheta", e))?;
        }
    }

    // sweep table (wall times live here) and the deterministic summary
    let table = assemble_table(results);
    {
        let mut f = artifacts.file("sweep.txt")?;
        write_sweep_table(&table, &mut f).map_err(|e| compute_err("write-sweep", e))?;
    }
    {
        let mut f = artifacts.file("summary.txt")?;
        write_summary(&mut f, config, &spectral, &table).map_err(|e| compute_err("write-summary", e))?;
    }
    Ok(())
}

struct EpsilonOutcome {
    result: MinMaxResult,
    report: ConcentrationReport,
}

fn assemble_table(rows: Vec<MinMaxResult>) -> SweepTable {
    let xs: Vec<f64> = rows.iter().map(|r| r.abs_log_eps).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.c_eps_estimate).collect();
    let (fit_c1, fit_c2) = if rows.len() >= 2 {
        glmm_core::linalg::linear_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN)
    };
    SweepTable {
        rows,
        fit_c1,
        fit_c2,
    }
}

fn write_minmax_file<W: Write>(out: &mut W, r: &MinMaxResult) -> std::io::Result<()> {
    writeln!(out, "glminmax 1")?;
    writeln!(out, "eps {}", fmt_f64(r.epsilon))?;
    writeln!(out, "abs_log_eps {}", fmt_f64(r.abs_log_eps))?;
    writeln!(out, "c_eps {}", fmt_f64(r.c_eps_estimate))?;
    writeln!(out, "refined_energy {}", fmt_f64(r.refined_energy))?;
    writeln!(out, "residual {}", fmt_f64(r.refined_residual))?;
    writeln!(out, "min_abs_u {}", fmt_f64(r.min_modulus))?;
    writeln!(out, "nontrivial {}", if r.nontrivial { 1 } else { 0 })?;
    writeln!(out, "morse_index {}", r.morse_index)?;
    writeln!(out, "max_node_index {}", r.max_node_index)?;
    writeln!(out, "provenance {}", r.provenance.label())?;
    writeln!(out, "flow_iterations {}", r.history.iterations)?;
    writeln!(out, "flow_stagnated {}", if r.history.stagnated { 1 } else { 0 })?;
    writeln!(out, "flow_converged {}", if r.history.converged { 1 } else { 0 })?;
    writeln!(out, "refine_iterations {}", r.refine_iterations)?;
    writeln!(out, "eigenvalues {}", r.lowest_eigenvalues.len())?;
    for v in &r.lowest_eigenvalues {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

fn write_summary<W: Write>(
    out: &mut W,
    config: &RunConfig,
    spectral: &SpectralInfo,
    table: &SweepTable,
) -> std::io::Result<()> {
    writeln!(out, "# glsummary 1")?;
    writeln!(
        out,
        "# model {} {}",
        config.geometry.model, config.geometry.parameter
    )?;
    writeln!(out, "# seed {}", config.family.seed)?;
    writeln!(out, "# lambda1 {}", fmt_f64(spectral.lambda1))?;
    writeln!(out, "# harmonic_dim {}", spectral.harmonic_dim)?;
    writeln!(out, "# fit_c1 {}", fmt_f64(table.fit_c1))?;
    writeln!(out, "# fit_c2 {}", fmt_f64(table.fit_c2))?;
    writeln!(
        out,
        "eps abs_log_eps c_eps refined_energy normalized_energy residual min_abs_u morse_index provenance"
    )?;
    for r in &table.rows {
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            fmt_f64(r.epsilon),
            fmt_f64(r.abs_log_eps),
            fmt_f64(r.c_eps_estimate),
            fmt_f64(r.refined_energy),
            fmt_f64(r.refined_energy / r.abs_log_eps),
            fmt_f64(r.refined_residual),
            fmt_f64(r.min_modulus),
            r.morse_index,
            r.provenance.label()
        )?;
    }
    Ok(())
}

fn write_sweep_map(sweep: &SweepMap, artifacts: &mut Artifacts) -> CliResult<()> {
    let mut f = artifacts.file("sweepmap.txt")?;
    let werr = |e: std::io::Error| compute_err("write-sweepmap", e);
    writeln!(f, "glsweepmap 1").map_err(werr)?;
    writeln!(f, "seed {}", sweep.seed).map_err(werr)?;
    writeln!(f, "attempts {}", sweep.attempts).map_err(werr)?;
    writeln!(f, "jmin {}", fmt_f64(sweep.jmin)).map_err(werr)?;
    writeln!(f, "sigma_min {}", fmt_f64(sweep.sigma_min)).map_err(werr)?;
    writeln!(f, "fiber_bound {}", fmt_f64(sweep.fiber_bound)).map_err(werr)?;
    for (i, q) in sweep.plane.iter().enumerate() {
        let comps: Vec<String> = q.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(f, "plane{} {}", i + 1, comps.join(" ")).map_err(werr)?;
    }
    writeln!(f, "vertices {}", sweep.values.len()).map_err(werr)?;
    for v in &sweep.values {
        writeln!(f, "{} {}", fmt_f64(v[0]), fmt_f64(v[1])).map_err(werr)?;
    }
    Ok(())
}

// --- standalone commands ---

/// Parses a model spec like "unit_sphere:3", "torus2d:32", "sphere:4".
pub fn parse_model_spec(spec: &str) -> CliResult<ModelGeometry> {
    let (name, param) = spec
        .split_once(':')
        .ok_or_else(|| CliFailure::Validation(format!("model spec '{spec}' needs <name>:<n>")))?;
    let parameter: u32 = param
        .parse()
        .map_err(|_| CliFailure::Validation(format!("bad model parameter '{param}'")))?;
    let canonical = match name {
        "sphere" | "unit_sphere" => "unit_sphere",
        "torus2d" | "flat_torus_2d" => "flat_torus_2d",
        "torus3d" | "flat_torus_3d" => "flat_torus_3d",
        other => other,
    };
    ModelGeometry::from_name(canonical, parameter).map_err(|e| CliFailure::Validation(e.to_string()))
}

/// `mesh` verb: build a model mesh and export it.
pub fn mesh_cmd(spec: &str, out: &Path) -> CliResult<String> {
    let model = parse_model_spec(spec)?;
    let mesh = build_model(model).map_err(|e| CliFailure::Validation(e.to_string()))?;
    export_mesh(&mesh, out).map_err(|e| compute_err("export-mesh", e))?;
    Ok(format!(
        "{} vertices={} cells={} volume={:.6} checksum={:016x}",
        mesh.model.name(),
        mesh.vertex_count(),
        mesh.cell_count(),
        mesh.total_volume(),
        mesh.checksum()
    ))
}

/// `vortex-law` verb: integrate the planar vortex energy over the unit disk
/// for each ε and fit the log law. Returns (rows, slope, intercept).
pub fn vortex_law(
    eps_list: &[f64],
    radius: f64,
    quadrature_n: usize,
) -> CliResult<(Vec<(f64, f64)>, f64, f64)> {
    if eps_list.len() < 2 {
        return Err(CliFailure::Validation(
            "vortex-law needs at least two epsilons".into(),
        ));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let e = vortex_disk_energy(eps, radius, quadrature_n)
            .map_err(|e| CliFailure::Validation(e.to_string()))?;
        rows.push((eps, e));
    }
    let xs: Vec<f64> = rows.iter().map(|(e, _)| (radius / e).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|&(_, v)| v).collect();
    let (slope, intercept) = glmm_core::linalg::linear_fit(&xs, &ys);
    Ok((rows, slope, intercept))
}

// --- verify ---

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        out.push_str(&format!(
            "verify: {}/{} checks passed\n",
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        ));
        out
    }
}

/// Re-checks persisted invariants of a completed run from its files alone
/// (no solver reruns: only parses, direct evaluations, and recomputed
/// residuals of saved fields).
pub fn verify(dir: &Path) -> CliResult<VerifyReport> {
    let mut report = VerifyReport::default();

    // fail fast on a FAILED marker
    let failed = dir.join("FAILED");
    if failed.exists() {
        let content = fs::read_to_string(&failed).unwrap_or_default();
        let stage = content
            .lines()
            .next()
            .unwrap_or("stage unknown")
            .to_string();
        report.push("failed_marker", false, format!("run failed at {stage}"));
        return Ok(report);
    }
    report.push("failed_marker", true, "absent");

    // config
    let config = match RunConfig::load(&dir.join("config.toml")) {
        Ok(c) => {
            report.push("config", true, "parsed and valid");
            c
        }
        Err(e) => {
            report.push("config", false, e.to_string());
            return Ok(report);
        }
    };

    // manifest completeness
    match fs::read_to_string(dir.join("MANIFEST.txt")) {
        Ok(manifest) => {
            let missing: Vec<String> = manifest
                .lines()
                .filter(|l| !l.trim().is_empty() && !dir.join(l.trim()).exists())
                .map(|l| l.to_string())
                .collect();
            report.push(
                "manifest",
                missing.is_empty(),
                if missing.is_empty() {
                    "all listed files present".to_string()
                } else {
                    format!("missing: {}", missing.join(", "))
                },
            );
        }
        Err(e) => report.push("manifest", false, format!("MANIFEST.txt: {e}")),
    }

    // mesh invariants
    let mesh = match import_mesh(&dir.join("mesh.txt")) {
        Ok(m) => {
            let vol = m.total_volume();
            let expected = m.model.analytic_volume();
            let ok = (vol - expected).abs() <= 0.1 * expected;
            report.push(
                "mesh",
                ok,
                format!("closed, volume {vol:.4} vs analytic {expected:.4}"),
            );
            Some(Arc::new(m))
        }
        Err(e) => {
            report.push("mesh", false, e.to_string());
            None
        }
    };

    let summary = parse_summary(&dir.join("summary.txt"));
    match &summary {
        Ok(rows) => report.push("summary", true, format!("{} rows", rows.len())),
        Err(e) => report.push("summary", false, e.clone()),
    }

    let dec = mesh.as_ref().map(|m| assemble_dec(m).ok()).flatten();

    if let (Ok(rows), Some(mesh), Some(dec)) = (&summary, &mesh, &dec) {
        let tol = config.refine.tolerance;
        for (i, row) in rows.iter().enumerate() {
            let label = format!("eps[{i}]");
            // residual tolerance from the table itself
            report.push(
                &format!("residual_within_tolerance.{label}"),
                row.residual <= tol,
                format!("{} ≤ {}", row.residual, tol),
            );

            // flow history monotone
            match parse_history(&dir.join(format!("hist_eps{i}.txt"))) {
                Ok(hist) => {
                    let mono = hist
                        .windows(2)
                        .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
                    report.push(
                        &format!("history_monotone.{label}"),
                        mono,
                        format!("{} iterations", hist.len()),
                    );
                }
                Err(e) => report.push(&format!("history_monotone.{label}"), false, e),
            }

            // recompute energy/residual/min|u| from the persisted field
            match load_field(&dir.join(format!("crit_eps{i}.txt")), mesh) {
                Ok(field) => {
                    let e = energy_value(dec, &field);
                    let r = gl_residual(dec, &field);
                    let m = field.min_modulus();
                    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-12);
                    report.push(
                        &format!("field_energy_matches.{label}"),
                        close(e, row.refined_energy),
                        format!("recomputed {e} vs table {}", row.refined_energy),
                    );
                    report.push(
                        &format!("field_residual_matches.{label}"),
                        close(r, row.residual) || (r <= tol && row.residual <= tol),
                        format!("recomputed {r} vs table {}", row.residual),
                    );
                    report.push(
                        &format!("field_min_modulus_matches.{label}"),
                        close(m, row.min_modulus),
                        format!("recomputed {m} vs table {}", row.min_modulus),
                    );
                }
                Err(e) => report.push(&format!("field_energy_matches.{label}"), false, e.to_string()),
            }

            // concentration report invariants
            match File::open(dir.join(format!("report_eps{i}.txt")))
                .map_err(|e| e.to_string())
                .and_then(|f| {
                    read_report(BufReader::new(f), &format!("report_eps{i}.txt"))
                        .map_err(|e| e.to_string())
                }) {
                Ok(rep) => {
                    report.push(
                        &format!("report_mesh_matches.{label}"),
                        rep.mesh_checksum == mesh.checksum(),
                        "mesh checksum",
                    );
                    report.push(
                        &format!("divergence_free.{label}"),
                        rep.div_residual <= 10.0 * tol,
                        format!("‖d*ju‖ = {} ≤ 10×{tol}", rep.div_residual),
                    );
                    if let Some(h) = &rep.hodge {
                        report.push(
                            &format!("hodge_exactness.{label}"),
                            h.residual_l2 <= 1e-6 * h.gamma_l2.max(1e-12),
                            format!("residual {} vs γ {}", h.residual_l2, h.gamma_l2),
                        );
                        if mesh.betti1_hint == 0 {
                            report.push(
                                &format!("harmonic_vanishes.{label}"),
                                h.harmonic_l2 <= 1e-8 * h.gamma_l2.max(1e-12),
                                format!("‖h‖ = {}", h.harmonic_l2),
                            );
                        }
                    }
                    let mono = rep
                        .density
                        .iter()
                        .all(|p| p.masses.windows(2).all(|w| w[1] >= w[0] - 1e-12));
                    report.push(
                        &format!("density_monotone.{label}"),
                        mono,
                        format!("{} profiles", rep.density.len()),
                    );
                }
                Err(e) => report.push(&format!("report_parses.{label}"), false, e),
            }

            // boundary pinning from the family index
            match parse_family_boundary(&dir.join(format!("family_eps{i}/family.txt"))) {
                Ok((boundary_nodes, max_boundary_energy)) => {
                    report.push(
                        &format!("boundary_pinned.{label}"),
                        boundary_nodes > 0 && max_boundary_energy == 0.0,
                        format!("{boundary_nodes} boundary nodes, max energy {max_boundary_energy}"),
                    );
                }
                Err(e) => report.push(&format!("boundary_pinned.{label}"), false, e),
            }
        }
    }

    Ok(report)
}

#[derive(Debug, Clone)]
struct SummaryRow {
    epsilon: f64,
    refined_energy: f64,
    residual: f64,
    min_modulus: f64,
}

fn parse_summary(path: &Path) -> Result<Vec<SummaryRow>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("eps ") || line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 9 {
            return Err(format!("summary row has {} columns", toks.len()));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| format!("bad float '{s}'"));
        rows.push(SummaryRow {
            epsilon: f(toks[0])?,
            refined_energy: f(toks[3])?,
            residual: f(toks[5])?,
            min_modulus: f(toks[6])?,
        });
    }
    if rows.is_empty() {
        return Err("summary has no rows".into());
    }
    let _ = rows.iter().map(|r| r.epsilon).collect::<Vec<_>>();
    Ok(rows)
}

fn parse_history(path: &Path) -> Result<Vec<f64>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        out.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad history value '{line}'"))?,
        );
    }
    if out.is_empty() {
        return Err("empty history".into());
    }
    Ok(out)
}

/// Returns (boundary node count, max boundary node energy) from an index.
fn parse_family_boundary(path: &Path) -> Result<(usize, f64), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut count = 0usize;
    let mut max_energy = 0.0f64;
    for line in text.lines() {
        if !line.starts_with("node ") {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        // node <i> y <y1> <y2> boundary <b> energy <e>
        if toks.len() < 9 {
            return Err(format!("bad node line '{line}'"));
        }
        if toks[6] == "1" {
            count += 1;
            let e: f64 = toks[8].parse().map_err(|_| "bad node energy".to_string())?;
            max_energy = max_energy.max(e);
        }
    }
    Ok((count, max_energy))
}

// re-exported for tests and the binary
pub use glmm_core as core;
