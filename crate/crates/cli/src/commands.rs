//! The four batch modes and their artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qns_core::diagnostics::{
    close_ledgers, energy, fit_mv_constant, write_csv, DiagnosticsConfig, DiagnosticsRecord,
    UF_NAMES,
};
use qns_core::dynamics::{run, to_effective, to_primitive, Formulation, Model, State};
use qns_core::fields::snapshot::{read_snapshot, write_snapshot, SnapshotHeader};
use qns_core::fields::{integrate, PeriodicGrid};
use qns_core::tensors::div_k_form_c;
use qns_core::verify::{
    check_bohm, check_form_k, check_pf_closed_forms, check_stin, check_transform_identities,
    check_weak_form, default_test_functions, format_table, IdentityReport,
};
use qns_core::{ModelParams, QnsError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] QnsError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("assertion failed: {name}: {detail}")]
    Assertion { name: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Core(_) | CliError::Io { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| io_err(path)(std::io::Error::other(e)))?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn csv_to(path: &Path, provenance: &str, dim: usize, records: &[DiagnosticsRecord]) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_csv(&mut w, provenance, dim, records)?;
    w.flush().map_err(io_err(path))
}

/// Per-step maxima gathered while integrating.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepMonitors {
    pub energy0: f64,
    /// Largest `E(t_{n+1}) - E(t_n)` over all steps (negative when strictly dissipative).
    pub max_energy_increase: f64,
    /// Largest `|M(t) - M(0)| / M(0)`.
    pub max_rel_mass_drift: f64,
    /// Largest `|∫ div K|` over components and steps.
    pub max_div_k_integral: f64,
}

/// What a single integration should record besides the diagnostics.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Evaluate [`StepMonitors`] after every step.
    pub step_monitors: bool,
    /// Write snapshots into this directory at the snapshot cadence.
    pub snapshot_dir: Option<PathBuf>,
    /// Keep the states taken at the snapshot cadence in memory.
    pub keep_snapshots: bool,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: ModelParams,
    pub formulation: Formulation,
    pub records: Vec<DiagnosticsRecord>,
    pub monitors: Option<StepMonitors>,
    pub snapshots: Vec<State>,
    pub snapshot_files: Vec<PathBuf>,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub final_state: State,
}

impl Simulation {
    /// Largest value of each uniform-bound monitor over the records.
    pub fn uf_maxima(&self) -> [f64; 8] {
        let mut m = [f64::NEG_INFINITY; 8];
        for r in &self.records {
            for (a, &b) in m.iter_mut().zip(&r.uf) {
                *a = a.max(b);
            }
        }
        m
    }
}

fn diag_config(cfg: &RunConfig, model: &Model, formulation: Formulation) -> DiagnosticsConfig {
    let mut d = DiagnosticsConfig::for_model(model);
    d.bd_c = cfg.run.bd_c.unwrap_or(match formulation {
        Formulation::Primitive => model.mu(),
        Formulation::Effective(c) => c,
    });
    if let Some(delta) = cfg.run.moment_delta {
        d.moment_delta = delta;
    }
    d
}

fn snapshot_header(state: &State, params: &ModelParams, provenance: &str) -> SnapshotHeader {
    let grid = state.grid();
    let mut fields = vec!["rho".to_string()];
    for axis in ["x", "y", "z"].iter().take(grid.dim()) {
        fields.push(format!("mom_{axis}"));
    }
    SnapshotHeader {
        dim: grid.dim(),
        n: grid.n(),
        length: grid.length(),
        time: state.time,
        params: *params,
        formulation: state.formulation.name().to_string(),
        c: state.formulation.c(),
        fields,
        extra: vec![("config".to_string(), provenance.to_string())],
    }
}

fn save_snapshot(path: &Path, state: &State, params: &ModelParams, provenance: &str) -> Result<(), CliError> {
    let header = snapshot_header(state, params, provenance);
    let mut data: Vec<&[f64]> = vec![state.rho.values()];
    data.extend(state.mom.comps().iter().map(|c| c.values()));
    let mut w = create(path)?;
    write_snapshot(&mut w, &header, &data)?;
    w.flush().map_err(io_err(path))
}

/// Read a snapshot written by [`simulate`] back into a state.
pub fn load_snapshot(path: &Path) -> Result<(SnapshotHeader, State), CliError> {
    let mut f = File::open(path).map_err(io_err(path))?;
    let (h, data) = read_snapshot(&mut f)?;
    let grid = PeriodicGrid::new(h.dim, h.n, h.length)?;
    let mut it = data.into_iter();
    let rho = qns_core::fields::ScalarField::new(&grid, it.next().unwrap_or_default())?;
    let mom = qns_core::fields::VectorField::new(
        it.map(|v| qns_core::fields::ScalarField::new(&grid, v))
            .collect::<qns_core::Result<Vec<_>>>()?,
    )?;
    let formulation = match h.formulation.as_str() {
        "primitive" => Formulation::Primitive,
        "effective" => Formulation::Effective(h.c),
        other => return Err(QnsError::Format(format!("unknown formulation {other:?}")).into()),
    };
    let state = State::new(rho, mom, formulation, h.time)?;
    Ok((h, state))
}

/// Integrate one configuration with the given physics and formulation.
pub fn simulate(
    cfg: &RunConfig,
    params: ModelParams,
    formulation: Formulation,
    opts: &SimOptions,
) -> Result<Simulation, CliError> {
    let model = Model::new(params)?;
    let grid = cfg.grid()?;
    let mut state = cfg.initial.primitive_state(&grid)?;
    if let Formulation::Effective(c) = formulation {
        state = to_effective(&model, &state, c)?;
    }
    let control = cfg.control.step_control();
    let dcfg = diag_config(cfg, &model, formulation);
    let provenance = serde_json::to_string(cfg).unwrap_or_default();
    let diag_every = cfg.control.diag_cadence.max(1);
    let snap_every = cfg.control.snapshot_cadence;
    let t_end = control.t_end;

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut snapshot_files = Vec::new();
    let mut monitors = StepMonitors::default();
    let mut last_energy = f64::NAN;
    let mut mass0 = f64::NAN;

    let mut hook = |s: &State, step: usize| -> qns_core::Result<()> {
        let last = s.time >= t_end;
        if opts.step_monitors {
            let prim = match s.formulation {
                Formulation::Primitive => None,
                Formulation::Effective(_) => Some(to_primitive(&model, s)?),
            };
            let e = energy(&model, prim.as_ref().unwrap_or(s))?.energy;
            let mass = s.mass();
            if step == 0 {
                monitors.energy0 = e;
                monitors.max_energy_increase = f64::NEG_INFINITY;
                mass0 = mass;
            } else {
                monitors.max_energy_increase = monitors.max_energy_increase.max(e - last_energy);
            }
            last_energy = e;
            monitors.max_rel_mass_drift = monitors.max_rel_mass_drift.max((mass - mass0).abs() / mass0);
            let dk = div_k_form_c(&s.rho, &model.coeffs)?;
            for c in dk.comps() {
                monitors.max_div_k_integral = monitors.max_div_k_integral.max(integrate(c).abs());
            }
        }
        if step % diag_every == 0 || last {
            records.push(DiagnosticsRecord::from_state(&model, s, &dcfg)?);
        }
        if snap_every > 0 && (step % snap_every == 0 || last) {
            if opts.keep_snapshots {
                snapshots.push(s.clone());
            }
            if let Some(dir) = &opts.snapshot_dir {
                let path = dir.join(format!("snap_{step:08}.qns"));
                save_snapshot(&path, s, &params, &provenance)
                    .map_err(|e| QnsError::Format(e.to_string()))?;
                snapshot_files.push(path);
            }
        }
        Ok(())
    };
    let summary = run(&model, state, &control, 1, None, &mut hook)?;
    close_ledgers(&mut records);
    if monitors.max_energy_increase == f64::NEG_INFINITY {
        monitors.max_energy_increase = 0.0;
    }
    Ok(Simulation {
        params,
        formulation,
        records,
        monitors: opts.step_monitors.then_some(monitors),
        snapshots,
        snapshot_files,
        steps: summary.steps,
        dt_min: summary.dt_min,
        dt_max: summary.dt_max,
        final_state: summary.final_state,
    })
}

fn provenance(cfg: &RunConfig, mode: &str) -> String {
    format!("qns-sim {mode}\n{}", cfg.to_toml())
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m: f64, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummaryJson {
    pub config: RunConfig,
    pub formulation: String,
    pub c: f64,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_final: f64,
    pub records: usize,
    pub monitors: Option<StepMonitors>,
    pub max_abs_energy_residual: f64,
    pub max_abs_bd_residual: f64,
    pub max_abs_mv_residual: f64,
    pub mv_constant: f64,
    pub snapshots: Vec<PathBuf>,
}

fn summarize(cfg: &RunConfig, sim: &Simulation) -> RunSummaryJson {
    let r = &sim.records;
    RunSummaryJson {
        config: cfg.clone(),
        formulation: sim.formulation.name().to_string(),
        c: sim.formulation.c(),
        steps: sim.steps,
        dt_min: sim.dt_min,
        dt_max: sim.dt_max,
        t_final: sim.final_state.time,
        records: r.len(),
        monitors: sim.monitors,
        max_abs_energy_residual: max_abs(r.iter().map(|x| x.energy_residual)),
        max_abs_bd_residual: max_abs(r.iter().map(|x| x.bd_residual)),
        max_abs_mv_residual: max_abs(r.iter().map(|x| x.mv_residual)),
        mv_constant: fit_mv_constant(r),
        snapshots: sim.snapshot_files.clone(),
    }
}

/// Single run: `diagnostics.csv`, `summary.json` and `snapshots/`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<Simulation, CliError> {
    let opts = SimOptions {
        step_monitors: true,
        snapshot_dir: Some(out.join("snapshots")),
        keep_snapshots: false,
    };
    let sim = simulate(cfg, cfg.model_params(), cfg.formulation(), &opts)?;
    csv_to(&out.join("diagnostics.csv"), &provenance(cfg, "run"), cfg.grid.dim, &sim.records)?;
    write_json(&out.join("summary.json"), &summarize(cfg, &sim))?;
    Ok(sim)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub config: RunConfig,
    pub n: usize,
    pub c: f64,
    pub t_final: f64,
    pub steps: usize,
    /// Discrete `L^2` norm of the density difference at the final time.
    pub rho_l2_diff: f64,
    pub rho_linf_diff: f64,
    pub rho_l2_norm: f64,
    pub rho_rel_diff: f64,
    pub momentum_l2_diff: f64,
}

/// Both formulations from identical data; the effective run is mapped back to
/// primitive variables before comparing.
pub fn compare_formulations(cfg: &RunConfig) -> Result<(CompareReport, Simulation, Simulation), CliError> {
    let params = cfg.model_params();
    let c = cfg.compare.c.unwrap_or(cfg.mu());
    let opts = SimOptions::default();
    let (p, e) = rayon::join(
        || simulate(cfg, params, Formulation::Primitive, &opts),
        || simulate(cfg, params, Formulation::Effective(c), &opts),
    );
    let (p, e) = (p?, e?);
    let model = Model::new(params)?;
    let ep = to_primitive(&model, &e.final_state)?;
    let pp = &p.final_state;
    let d = pp.rho.sub(&ep.rho);
    let norm = pp.rho.l2_norm();
    let report = CompareReport {
        config: cfg.clone(),
        n: cfg.grid.n,
        c,
        t_final: pp.time,
        steps: p.steps,
        rho_l2_diff: d.l2_norm(),
        rho_linf_diff: d.max_abs(),
        rho_l2_norm: norm,
        rho_rel_diff: d.l2_norm() / norm,
        momentum_l2_diff: pp.mom.sub(&ep.mom).l2_norm(),
    };
    Ok((report, p, e))
}

/// Formulation comparison: `compare.json` plus one diagnostics CSV per formulation.
pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<CompareReport, CliError> {
    let (report, p, e) = compare_formulations(cfg)?;
    let prov = provenance(cfg, "compare");
    csv_to(&out.join("compare_primitive.csv"), &prov, cfg.grid.dim, &p.records)?;
    csv_to(&out.join("compare_effective.csv"), &prov, cfg.grid.dim, &e.records)?;
    write_json(&out.join("compare.json"), &report)?;
    if let Some(tol) = cfg.compare.max_rel_diff {
        if !(report.rho_rel_diff <= tol) {
            return Err(CliError::Assertion {
                name: "compare.max_rel_diff".into(),
                detail: format!("relative density difference {:e} > {tol:e}", report.rho_rel_diff),
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub steps: usize,
    pub uf_max: [f64; 8],
    pub rho_min: f64,
    pub rho_max: f64,
    /// Largest ratio of this entry's run-maxima to the first entry's.
    pub growth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub uf_names: Vec<String>,
    pub entries: Vec<SweepEntry>,
    pub max_growth: f64,
}

/// Run every `eps` of the sweep concurrently with otherwise identical settings.
pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let list = cfg.sweep.as_ref().map(|s| s.eps.clone()).unwrap_or_default();
    let base = cfg.model_params();
    let formulation = cfg.formulation();
    let sims: Vec<Simulation> = list
        .par_iter()
        .map(|&e| simulate(cfg, base.with_eps(e), formulation, &SimOptions::default()))
        .collect::<Result<_, _>>()?;
    let reference = sims.first().map(|s| s.uf_maxima()).unwrap_or([0.0; 8]);
    let entries: Vec<SweepEntry> = sims
        .iter()
        .map(|s| {
            let m = s.uf_maxima();
            let growth = m
                .iter()
                .zip(&reference)
                .map(|(a, b)| if *b > 0.0 { a / b } else if *a > 0.0 { f64::INFINITY } else { 1.0 })
                .fold(0.0, f64::max);
            SweepEntry {
                eps: s.params.eps,
                steps: s.steps,
                uf_max: m,
                rho_min: s.records.iter().map(|r| r.rho_min).fold(f64::INFINITY, f64::min),
                rho_max: s.records.iter().map(|r| r.rho_max).fold(0.0, f64::max),
                growth,
            }
        })
        .collect();
    let max_growth = entries.iter().map(|e| e.growth).fold(0.0, f64::max);
    Ok(SweepReport {
        config: cfg.clone(),
        uf_names: UF_NAMES.iter().map(|s| s.to_string()).collect(),
        entries,
        max_growth,
    })
}

/// Epsilon sweep: `sweep.csv` of run-maxima and `sweep.json`.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<SweepReport, CliError> {
    let report = sweep(cfg)?;
    let path = out.join("sweep.csv");
    let mut w = create(&path)?;
    let mut text = String::new();
    for line in provenance(cfg, "sweep").lines() {
        text.push_str(&format!("# {line}\n"));
    }
    let mut cols = vec!["eps".to_string()];
    cols.extend(UF_NAMES.iter().map(|n| format!("uf_{n}_max")));
    cols.extend(["rho_min".to_string(), "rho_max".to_string(), "growth".to_string()]);
    text.push_str(&cols.join(","));
    text.push('\n');
    for e in &report.entries {
        let mut row = vec![e.eps];
        row.extend_from_slice(&e.uf_max);
        row.extend_from_slice(&[e.rho_min, e.rho_max, e.growth]);
        let row: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    write_json(&out.join("sweep.json"), &report)?;
    if let Some(limit) = cfg.sweep.as_ref().and_then(|s| s.max_growth) {
        if !(report.max_growth <= limit) {
            return Err(CliError::Assertion {
                name: "sweep.max_growth".into(),
                detail: format!("run-maximum growth {:.4} > {limit}", report.max_growth),
            });
        }
    }
    Ok(report)
}

enum VerifyTask {
    FormK(f64),
    Bohm(f64),
    Transform(f64),
    ClosedForms(f64, f64),
    Coercivity,
    WeakForm,
}

fn weak_form_report(cfg: &RunConfig) -> Result<Vec<IdentityReport>, CliError> {
    let v = &cfg.verify;
    let mut short = cfg.clone();
    short.grid.n = v.weak_form_n;
    short.control.t_end = v.weak_form_t_end;
    short.control.snapshot_cadence = short.control.snapshot_cadence.max(1);
    let opts = SimOptions {
        keep_snapshots: true,
        ..SimOptions::default()
    };
    let params = cfg.model_params();
    let sim = simulate(&short, params, Formulation::Primitive, &opts)?;
    let model = Model::new(params)?;
    let tests = default_test_functions(cfg.grid.dim);
    Ok(vec![check_weak_form(&model, &sim.snapshots, &tests, v.weak_form_tolerance)?])
}

/// Every identity check of the verifier for this configuration's profile.
pub fn verify_reports(cfg: &RunConfig) -> Result<Vec<IdentityReport>, CliError> {
    let v = &cfg.verify;
    let base = cfg.model_params();
    let length = cfg.grid.length;
    let ini = &cfg.initial;
    let rho = |x: &[f64]| ini.density_at(x, length);
    let u = |x: &[f64], i: usize| ini.mode_velocity_at(x, i, length);

    let mut tasks = Vec::new();
    for &e in &v.eps {
        tasks.push(VerifyTask::FormK(e));
        tasks.push(VerifyTask::Bohm(e));
        tasks.push(VerifyTask::Transform(e));
    }
    for &e in &v.pf_eps {
        for &g in &v.pf_gamma {
            tasks.push(VerifyTask::ClosedForms(e, g));
        }
    }
    tasks.push(VerifyTask::Coercivity);
    tasks.push(VerifyTask::WeakForm);

    let results: Vec<Vec<IdentityReport>> = tasks
        .par_iter()
        .map(|t| -> Result<Vec<IdentityReport>, CliError> {
            Ok(match *t {
                VerifyTask::FormK(e) => check_form_k(&rho, &base.with_eps(e), &v.resolutions, v.tolerance)?,
                VerifyTask::Bohm(e) => check_bohm(&rho, &base.with_eps(e), &v.resolutions, v.tolerance)?,
                VerifyTask::Transform(e) => {
                    let p = base.with_eps(e);
                    let c = cfg.run.c.unwrap_or(cfg.mu());
                    check_transform_identities(&rho, &u, &p, c, &v.resolutions, v.tolerance)?
                }
                VerifyTask::ClosedForms(e, g) => {
                    let p = ModelParams { gamma: g, ..base.with_eps(e) };
                    check_pf_closed_forms(&p, (0.5, 2.0), 200, v.pf_tolerance)?
                }
                VerifyTask::Coercivity => vec![check_stin(&base, v.coercivity_samples, v.seed)?],
                VerifyTask::WeakForm => weak_form_report(cfg)?,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(results.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub config: RunConfig,
    pub pass: bool,
    pub reports: Vec<IdentityReport>,
}

/// Identity suite: `verify.json` and the printed table.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<Vec<IdentityReport>, CliError> {
    let reports = verify_reports(cfg)?;
    print!("{}", format_table(&reports));
    let pass = reports.iter().all(|r| r.pass);
    write_json(
        &out.join("verify.json"),
        &VerifyOutput {
            config: cfg.clone(),
            pass,
            reports: reports.clone(),
        },
    )?;
    if let Some(r) = reports.iter().find(|r| !r.pass) {
        return Err(CliError::Assertion {
            name: r.name.clone(),
            detail: format!(
                "eps = {}, finest l2 = {:e}, observed = {:?}, tolerance = {:e}",
                r.params.eps,
                r.finest(),
                r.observed,
                r.tolerance
            ),
        });
    }
    Ok(reports)
}
