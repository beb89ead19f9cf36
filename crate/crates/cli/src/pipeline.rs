//! The five pipeline commands and their on-disk artifact layout.
//!
//! Phases communicate only through files in the output directory:
//!
//! ```text
//! out/
//!   measurement.ntd    difference operator of the simulated body
//!   measurement.csv    same entries, one row per line
//!   measurement.json   context, hashes, norms, realized noise size
//!   truth.json         the inclusions that produced the measurement
//!   mesh.vtk           simulation mesh with the true moduli as cell data
//!   bank.ntd           one test operator per grid cube
//!   grid.json          the cube grid the bank was built for
//!   result.json/.csv   per-cube decisions
//!   result.vtk         decisions as a voxel grid
//!   timings.json       per-phase wall clock seconds
//! ```
//!
//! `cmd_reconstruct` deliberately touches no mesh and runs no solver: it
//! reads matrices, compares hashes, and decides. All writes go through a
//! temp file in the target directory followed by a rename, so a crash can
//! not leave a half-written artifact behind.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use monorec_core::checks::{self, BatteryConfig};
use monorec_core::elasticity::material_with_inclusions;
use monorec_core::frechet::{build_solution_bank, frechet_matrix};
use monorec_core::geometry::BoxRegion;
use monorec_core::matio::{self, MatrixMeta};
use monorec_core::mesh::{build_test_cubes, TestCubeGrid, TestGridSpec};
use monorec_core::monotest::{
    classify_against_truth, linearized_test, standard_test, Method, ReconstructionResult,
    TruthReport,
};
use monorec_core::ntd::{
    add_noise, difference_measurement, perturbation_norm, DifferenceRoute, OperatorMatrix,
    TestOperatorBank,
};
use monorec_core::vtk::{write_grid_vtk, write_mesh_vtk, CellScalars};
use monorec_core::{CoreError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::context::{
    bank_context, context_hash, context_json, measurement_context, mismatch_error, parse_stored,
    BankContext, InclusionContext, MeasurementContext,
};

/// Artifact paths inside one output directory.
pub struct Workspace {
    out: PathBuf,
}

impl Workspace {
    pub fn new(out: &Path) -> Self {
        Self { out: out.to_path_buf() }
    }

    fn ensure_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }

    pub fn measurement_matrix(&self) -> PathBuf {
        self.out.join("measurement.ntd")
    }
    pub fn measurement_csv(&self) -> PathBuf {
        self.out.join("measurement.csv")
    }
    pub fn measurement_summary(&self) -> PathBuf {
        self.out.join("measurement.json")
    }
    pub fn truth(&self) -> PathBuf {
        self.out.join("truth.json")
    }
    pub fn mesh_vtk(&self) -> PathBuf {
        self.out.join("mesh.vtk")
    }
    pub fn bank(&self) -> PathBuf {
        self.out.join("bank.ntd")
    }
    pub fn grid(&self) -> PathBuf {
        self.out.join("grid.json")
    }
    pub fn result_json(&self) -> PathBuf {
        self.out.join("result.json")
    }
    pub fn result_csv(&self) -> PathBuf {
        self.out.join("result.csv")
    }
    pub fn result_vtk(&self) -> PathBuf {
        self.out.join("result.vtk")
    }
    pub fn timings(&self) -> PathBuf {
        self.out.join("timings.json")
    }
}

/// Reconstruction threshold when neither the config nor the command line
/// pins one and the measurement is noiseless: this fraction of the
/// measurement's spectral norm absorbs the discretization mismatch between
/// the fine simulation mesh and the coarse offline mesh.
pub const DEFAULT_DELTA_REL: f64 = 5e-4;

fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.as_file().write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CoreError::Io(e.error))?;
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::config(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    write_text_atomic(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CoreError::ArtifactMismatch(format!("{} is corrupt: {e}", path.display())))
}

fn round_ms(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

/// Wall clock per phase, accumulated across commands in `timings.json`.
/// Monotonic clock, millisecond resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online_seconds: Option<f64>,
}

impl PhaseTimings {
    fn load_or_default(path: &Path) -> PhaseTimings {
        if path.exists() {
            read_json(path).unwrap_or_default()
        } else {
            PhaseTimings::default()
        }
    }

    fn store(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }
}

fn update_timings(ws: &Workspace, method: &str, update: impl FnOnce(&mut PhaseTimings)) -> Result<()> {
    let path = ws.timings();
    let mut t = PhaseTimings::load_or_default(&path);
    t.method = Some(method.to_string());
    update(&mut t);
    t.store(&path)
}

fn run_pool<T: Send>(
    workers: Option<usize>,
    work: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        // num_threads(0) means "pick automatically" in rayon as well, so 0
        // behaves like the flag being absent.
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CoreError::config(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Sidecar describing the measurement artifact for humans and downstream
/// tooling. The matrix file itself stays the single source of truth for the
/// entries; this file adds derived scalars that would otherwise need an
/// eigensolve to recover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementSummary {
    pub context_hash: String,
    pub context: MeasurementContext,
    pub load_count: usize,
    pub spectral_norm: f64,
    pub relative_asymmetry: f64,
    /// Spectral norm of the realized noise matrix, None for clean data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_noise_norm: Option<f64>,
}

/// The inclusions a simulated measurement was produced from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub inclusions: Vec<InclusionContext>,
}

/// Serialized cube grid, written by the offline phase and consumed verbatim
/// by reconstruction so the online phase never recomputes geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub context_hash: String,
    pub dimension: usize,
    pub domain_min: Vec<f64>,
    pub domain_max: Vec<f64>,
    pub spec: TestGridSpec,
    pub cube_min: Vec<Vec<f64>>,
    pub cube_max: Vec<Vec<f64>>,
}

fn grid_file(grid: &TestCubeGrid, context_hash: &str) -> GridFile {
    let dim = grid.dimension;
    GridFile {
        context_hash: context_hash.to_string(),
        dimension: dim,
        domain_min: grid.domain.min[..dim].to_vec(),
        domain_max: grid.domain.max[..dim].to_vec(),
        spec: grid.spec.clone(),
        cube_min: grid.cubes.iter().map(|c| c.min[..dim].to_vec()).collect(),
        cube_max: grid.cubes.iter().map(|c| c.max[..dim].to_vec()).collect(),
    }
}

fn expand3(coords: &[f64], dim: usize, what: &str) -> Result<[f64; 3]> {
    if coords.len() != dim {
        return Err(CoreError::ArtifactMismatch(format!(
            "{what} has {} coordinates for dimension {dim}",
            coords.len()
        )));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(coords);
    Ok(out)
}

fn grid_from_file(file: &GridFile) -> Result<TestCubeGrid> {
    let dim = file.dimension;
    if dim != 2 && dim != 3 {
        return Err(CoreError::ArtifactMismatch(format!("grid file has dimension {dim}")));
    }
    if file.cube_min.len() != file.cube_max.len() {
        return Err(CoreError::ArtifactMismatch(
            "grid file cube_min and cube_max lengths disagree".to_string(),
        ));
    }
    let domain = BoxRegion::new(
        expand3(&file.domain_min, dim, "grid domain min")?,
        expand3(&file.domain_max, dim, "grid domain max")?,
    )?;
    let cubes = file
        .cube_min
        .iter()
        .zip(&file.cube_max)
        .enumerate()
        .map(|(k, (lo, hi))| {
            BoxRegion::new(
                expand3(lo, dim, &format!("grid cube {k} min"))?,
                expand3(hi, dim, &format!("grid cube {k} max"))?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestCubeGrid { spec: file.spec.clone(), domain, dimension: dim, cubes })
}

/// Simulate the measurement: solve the background and perturbed problems on
/// the fine mesh and store their difference operator, optionally noisy.
pub fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    noise_level: Option<f64>,
    noise_seed: Option<u64>,
) -> Result<()> {
    let ws = Workspace::new(out);
    ws.ensure_dir()?;
    let started = Instant::now();

    let inclusions = cfg.truth_inclusions()?;
    if inclusions.is_empty() {
        eprintln!(
            "warning: no inclusions configured; the measurement is the background \
             against itself and carries no signal beyond noise"
        );
    }
    let noise = cfg.noise(noise_level, noise_seed);
    let ctx = measurement_context(cfg, noise.as_ref())?;
    let hash = context_hash(&ctx)?;

    let mesh = cfg.measurement_mesh()?;
    let layout = cfg.layout()?;
    let m = &cfg.material;
    let clean = difference_measurement(
        &mesh,
        m.lambda0,
        m.mu0,
        &inclusions,
        cfg.fraction_depth(),
        DifferenceRoute::Coupled,
    )?;
    let (matrix, measured_noise_norm) = match &noise {
        Some(spec) => {
            let noisy = add_noise(&clean, spec)?;
            let norm = perturbation_norm(&clean, &noisy)?;
            (noisy, Some(norm))
        }
        None => (clean, None),
    };

    let meta = MatrixMeta {
        load_system_id: layout.system_id(),
        mesh_hash: hash.clone(),
        alpha: None,
        beta: None,
        direction: None,
        noise,
        comment: Some(context_json(&ctx)?),
    };
    matio::write_matrix(&ws.measurement_matrix(), &matrix, &meta)?;
    matio::export_csv(&ws.measurement_csv(), &matrix)?;

    let summary = MeasurementSummary {
        context_hash: hash.clone(),
        context: ctx.clone(),
        load_count: matrix.dim(),
        spectral_norm: matrix.spectral_norm(),
        relative_asymmetry: matrix.relative_asymmetry(),
        measured_noise_norm,
    };
    write_json_atomic(&ws.measurement_summary(), &summary)?;
    write_json_atomic(&ws.truth(), &TruthFile { inclusions: ctx.inclusions.clone() })?;

    let material =
        material_with_inclusions(&mesh, m.lambda0, m.mu0, &inclusions, cfg.fraction_depth())?;
    write_mesh_vtk(
        &ws.mesh_vtk(),
        &mesh,
        &[
            CellScalars { name: "lambda", values: material.lambda_slice() },
            CellScalars { name: "mu", values: material.mu_slice() },
        ],
        None,
    )?;

    let elapsed = round_ms(started.elapsed().as_secs_f64());
    update_timings(&ws, cfg.method()?.name(), |t| t.direct_seconds = Some(elapsed))?;

    println!(
        "measurement: {} loads, spectral norm {:.6e}, asymmetry {:.3e}{}",
        matrix.dim(),
        summary.spectral_norm,
        summary.relative_asymmetry,
        match measured_noise_norm {
            Some(n) => format!(", noise norm {n:.6e}"),
            None => ", noiseless".to_string(),
        }
    );
    println!("simulate phase finished in {elapsed:.3} s, artifacts in {}", out.display());
    Ok(())
}

fn bank_is_current(ws: &Workspace, hash: &str) -> bool {
    if !ws.bank().exists() || !ws.grid().exists() {
        return false;
    }
    let stored_grid: std::result::Result<GridFile, _> = read_json(&ws.grid());
    match (matio::read_bank(&ws.bank()), stored_grid) {
        (Ok((_, meta)), Ok(grid)) => meta.mesh_hash == hash && grid.context_hash == hash,
        _ => false,
    }
}

/// Build the per-cube test operator bank on the coarse offline mesh. Skips
/// the solves when the stored bank already matches the configuration.
pub fn cmd_offline(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<()> {
    let ws = Workspace::new(out);
    ws.ensure_dir()?;

    let ctx = bank_context(cfg)?;
    let hash = context_hash(&ctx)?;
    if bank_is_current(&ws, &hash) {
        println!("offline bank already matches this configuration (hash {hash}), nothing to do");
        return Ok(());
    }

    let started = Instant::now();
    let mesh = cfg.offline_mesh()?;
    let grid = build_test_cubes(&cfg.domain_box()?, cfg.dimension(), &cfg.grid_spec()?)?;
    let (alpha, beta) = cfg.contrasts()?;
    let direction = cfg.direction()?;
    let depth = cfg.fraction_depth();
    let method = cfg.method()?;
    let m = &cfg.material;

    let operators: Vec<OperatorMatrix> = run_pool(workers, || match method {
        Method::Standard => {
            let bank = TestOperatorBank::prepare(&mesh, m.lambda0, m.mu0)?;
            grid.cubes
                .par_iter()
                .map(|cube| bank.operator(cube, alpha, beta, direction, depth))
                .collect()
        }
        Method::Linearized => {
            let bank = build_solution_bank(&mesh, m.lambda0, m.mu0)?;
            grid.cubes
                .par_iter()
                .map(|cube| frechet_matrix(&bank, cube, alpha, beta, depth))
                .collect()
        }
    })?;

    let meta = MatrixMeta {
        load_system_id: cfg.layout()?.system_id(),
        mesh_hash: hash.clone(),
        alpha: Some(alpha),
        beta: Some(beta),
        direction: Some(direction),
        noise: None,
        comment: Some(context_json(&ctx)?),
    };
    matio::write_bank(&ws.bank(), &operators, &meta)?;
    write_json_atomic(&ws.grid(), &grid_file(&grid, &hash))?;

    let elapsed = round_ms(started.elapsed().as_secs_f64());
    update_timings(&ws, method.name(), |t| t.offline_seconds = Some(elapsed))?;

    println!(
        "offline bank: {} {} operators, contrasts alpha {alpha:.6e} beta {beta:.6e}, hash {hash}",
        operators.len(),
        method.name(),
    );
    println!("offline phase finished in {elapsed:.3} s, artifacts in {}", out.display());
    Ok(())
}

/// Where the reconstruction threshold came from, recorded in the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaSource {
    /// --delta on the command line.
    Flag,
    /// test.delta in the config.
    Config,
    /// The realized noise norm recorded by the simulate phase.
    Noise,
    /// DEFAULT_DELTA_REL times the measurement's spectral norm.
    Default,
}

/// Everything reconstruction decided, in one file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub measurement_hash: String,
    pub bank_hash: String,
    pub delta_source: DeltaSource,
    pub inside_count: usize,
    #[serde(flatten)]
    pub result: ReconstructionResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthReport>,
}

fn resolve_delta(
    cfg: &RunConfig,
    flag: Option<f64>,
    summary: Option<&MeasurementSummary>,
    measurement: &OperatorMatrix,
) -> Result<(f64, DeltaSource)> {
    if let Some(d) = flag {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(CoreError::invalid(format!("--delta must be finite and >= 0, got {d}")));
        }
        return Ok((d, DeltaSource::Flag));
    }
    if let Some(d) = cfg.test.delta {
        return Ok((d, DeltaSource::Config));
    }
    if let Some(norm) = summary.and_then(|s| s.measured_noise_norm) {
        return Ok((norm, DeltaSource::Noise));
    }
    Ok((DEFAULT_DELTA_REL * measurement.spectral_norm(), DeltaSource::Default))
}

/// Classify every grid cube against the measurement. Pure linear algebra
/// over stored artifacts; refuses mismatched ones with a field-level diff.
pub fn cmd_reconstruct(
    cfg: &RunConfig,
    out: &Path,
    delta_flag: Option<f64>,
    measurement_path: Option<&Path>,
    bank_path: Option<&Path>,
) -> Result<()> {
    let ws = Workspace::new(out);
    ws.ensure_dir()?;
    let started = Instant::now();

    let measurement_file =
        measurement_path.map(Path::to_path_buf).unwrap_or_else(|| ws.measurement_matrix());
    let bank_file = bank_path.map(Path::to_path_buf).unwrap_or_else(|| ws.bank());
    let grid_path = bank_file.with_file_name("grid.json");

    let (measurement, m_meta) = matio::read_matrix(&measurement_file)?;
    let (operators, b_meta) = matio::read_bank(&bank_file)?;

    // Identity checks before any numbers: each stored context must equal the
    // one this config would produce right now. The measurement's noise
    // fields are taken from the artifact since simulate-time flags may have
    // overridden the config; everything physical must match exactly.
    let stored_m: MeasurementContext =
        parse_stored("measurement artifact", m_meta.comment.as_deref())?;
    let noise = m_meta.noise;
    let mut expected_m = measurement_context(cfg, noise.as_ref())?;
    expected_m.noise_level = stored_m.noise_level;
    expected_m.noise_seed = stored_m.noise_seed;
    if stored_m != expected_m {
        return Err(mismatch_error("the measurement artifact", &stored_m, &expected_m));
    }

    let stored_b: BankContext = parse_stored("offline bank", b_meta.comment.as_deref())?;
    let expected_b = bank_context(cfg)?;
    if stored_b != expected_b {
        return Err(mismatch_error("the offline bank", &stored_b, &expected_b));
    }
    let bank_hash = context_hash(&stored_b)?;
    let measurement_hash = context_hash(&stored_m)?;

    if m_meta.load_system_id != b_meta.load_system_id {
        return Err(CoreError::ArtifactMismatch(format!(
            "measurement and bank use different load systems ({} vs {})",
            m_meta.load_system_id, b_meta.load_system_id
        )));
    }

    let grid_stored: GridFile = read_json(&grid_path)?;
    if grid_stored.context_hash != bank_hash {
        return Err(CoreError::ArtifactMismatch(format!(
            "grid file {} belongs to bank hash {}, expected {}",
            grid_path.display(),
            grid_stored.context_hash,
            bank_hash
        )));
    }
    let grid = grid_from_file(&grid_stored)?;
    if grid.len() != operators.len() {
        return Err(CoreError::ArtifactMismatch(format!(
            "grid has {} cubes but the bank stores {} operators",
            grid.len(),
            operators.len()
        )));
    }

    let summary_path = measurement_file.with_extension("json");
    let summary: Option<MeasurementSummary> =
        if summary_path.exists() { Some(read_json(&summary_path)?) } else { None };
    let (delta, delta_source) = resolve_delta(cfg, delta_flag, summary.as_ref(), &measurement)?;

    let method = cfg.method()?;
    let direction = cfg.direction()?;
    let mut result = match method {
        Method::Standard => standard_test(&measurement, &operators, delta, direction)?,
        Method::Linearized => linearized_test(&measurement, &operators, delta, direction)?,
    };
    // The decision routine sees only matrices; the noise that shaped the
    // measurement is part of the record.
    result.noise = noise;

    let truth_path = measurement_file.with_file_name("truth.json");
    let truth = if truth_path.exists() {
        let file: TruthFile = read_json(&truth_path)?;
        let dim = grid.dimension;
        let boxes = file
            .inclusions
            .iter()
            .enumerate()
            .map(|(k, inc)| {
                BoxRegion::new(
                    expand3(&inc.min, dim, &format!("truth inclusion {k} min"))?,
                    expand3(&inc.max, dim, &format!("truth inclusion {k} max"))?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Some(classify_against_truth(&result, &grid, &boxes)?)
    } else {
        None
    };

    let inside_count = result.inside_count();
    let file = ResultFile {
        measurement_hash,
        bank_hash,
        delta_source,
        inside_count,
        result,
        truth,
    };
    write_json_atomic(&ws.result_json(), &file)?;

    let mut csv = String::from("cube_index,ix,iy,iz,min_eigenvalue,inside\n");
    for outcome in &file.result.outcomes {
        let [ix, iy, iz] = grid.indices(outcome.cube_index);
        csv.push_str(&format!(
            "{},{ix},{iy},{iz},{:.17e},{}\n",
            outcome.cube_index,
            outcome.min_eigenvalue,
            u8::from(outcome.inside)
        ));
    }
    write_text_atomic(&ws.result_csv(), &csv)?;

    let eigenvalues: Vec<f64> = file.result.outcomes.iter().map(|o| o.min_eigenvalue).collect();
    let inside: Vec<f64> =
        file.result.outcomes.iter().map(|o| f64::from(u8::from(o.inside))).collect();
    write_grid_vtk(
        &ws.result_vtk(),
        &grid,
        &[
            CellScalars { name: "min_eigenvalue", values: &eigenvalues },
            CellScalars { name: "inside", values: &inside },
        ],
    )?;

    let elapsed = round_ms(started.elapsed().as_secs_f64());
    update_timings(&ws, method.name(), |t| t.online_seconds = Some(elapsed))?;

    println!(
        "reconstruction: {inside_count} of {} cubes inside, delta {delta:.6e} ({})",
        file.result.outcomes.len(),
        match delta_source {
            DeltaSource::Flag => "from --delta",
            DeltaSource::Config => "from config",
            DeltaSource::Noise => "from recorded noise norm",
            DeltaSource::Default => "default fraction of the measurement norm",
        }
    );
    if let Some(t) = &file.truth {
        println!(
            "against truth: recall {:.3} ({} of {} contained cubes), {} false positives",
            t.recall_inside,
            t.detected_inside_count,
            t.inside_truth_count,
            t.false_positives.len()
        );
    }
    println!("online phase finished in {elapsed:.3} s, artifacts in {}", out.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direct_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offline_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    online_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ReportFile {
    rows: Vec<ReportRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |s| format!("{s:.3}"))
}

/// Tabulate phase timings from one or more runs.
pub fn cmd_report(timing_paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    if timing_paths.is_empty() {
        return Err(CoreError::config("report needs at least one timings file"));
    }
    let mut rows = Vec::new();
    for path in timing_paths {
        let t: PhaseTimings = read_json(path)?;
        rows.push(ReportRow {
            source: path.display().to_string(),
            method: t.method,
            direct_seconds: t.direct_seconds,
            offline_seconds: t.offline_seconds,
            online_seconds: t.online_seconds,
        });
    }

    let width = rows.iter().map(|r| r.source.len()).max().unwrap_or(6).max(6);
    println!("{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}", "source", "method", "direct", "offline", "online");
    for r in &rows {
        println!(
            "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
            r.source,
            r.method.as_deref().unwrap_or("-"),
            cell(r.direct_seconds),
            cell(r.offline_seconds),
            cell(r.online_seconds),
        );
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("report.json");
        write_json_atomic(&path, &ReportFile { rows })?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

/// Run the numerical verification battery, optionally on the materials of a
/// config file instead of the built-in ones.
pub fn cmd_verify(cfg: Option<&RunConfig>, seed: Option<u64>) -> Result<()> {
    let mut battery = BatteryConfig::default();
    if let Some(cfg) = cfg {
        let m = &cfg.material;
        if !(m.lambda1 > m.lambda0 && m.mu1 > m.mu0) {
            return Err(CoreError::config(
                "the verification battery needs lambda1 > lambda0 and mu1 > mu0; \
                 run it without --config to use the built-in materials",
            ));
        }
        battery.dimension = cfg.dimension();
        battery.lambda0 = m.lambda0;
        battery.mu0 = m.mu0;
        battery.lambda1 = m.lambda1;
        battery.mu1 = m.mu1;
        battery.depth = cfg.fraction_depth();
    }
    if let Some(s) = seed {
        battery.seed = s;
    }

    let started = Instant::now();
    let outcomes = checks::run_battery(&battery)?;
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let elapsed = round_ms(started.elapsed().as_secs_f64());
    if failed > 0 {
        return Err(CoreError::numerical(format!(
            "{failed} of {} verification checks failed after {elapsed:.3} s",
            outcomes.len()
        )));
    }
    println!("all {} verification checks passed in {elapsed:.3} s", outcomes.len());
    Ok(())
}
