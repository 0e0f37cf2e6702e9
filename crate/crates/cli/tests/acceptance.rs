//! Acceptance gate: one test per criterion, each printing a single PASS/FAIL
//! line to stderr (uncaptured) with the measured values.

mod support;

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use qns_cli::commands::{compare_formulations, load_snapshot, sweep};
use qns_cli::{simulate, SimOptions, Simulation};
use qns_core::diagnostics::{moment, moment_delta_bound_2d, UF_NAMES};
use qns_core::dynamics::{run, Formulation, Model, State, StepControl};
use qns_core::fields::PeriodicGrid;
use qns_core::verify::{
    check_bohm, check_form_k, check_pf_closed_forms, check_transform_identities, check_weak_form,
    default_test_functions, IdentityReport,
};
use qns_core::{derived_mu, ModelParams};
use support::{smooth_config, Manufactured, Modulation, GAMMA, KAPPA, NU};

// criterion 1
const IDENTITY_TOL: f64 = 1e-7;
const IDENTITY_REDUCTION: f64 = 10.0;
const IDENTITY_BUDGET: Duration = Duration::from_secs(10);
// criterion 2
const PF_TOL: f64 = 1e-9;
const PF_BUDGET: Duration = Duration::from_secs(5);
// criterion 3 and 4
const STEP_ENERGY_TOL: f64 = 1e-7;
const LEDGER_REDUCTION: f64 = 8.0;
const RUN_BUDGET: Duration = Duration::from_secs(60);
// criterion 5
const COMPARE_REDUCTION: f64 = 4.0;
const COMPARE_REL_TOL: f64 = 1e-5;
// criterion 6
const MASS_DRIFT_TOL: f64 = 1e-12;
const DIV_K_TOL: f64 = 1e-11;
// criterion 7
const BOUND_FACTOR: f64 = 2.0;
const RHO_MIN_FRACTION: f64 = 0.1;
// criterion 8
const SWEEP_FACTOR: f64 = 2.0;
const SWEEP_BUDGET: Duration = Duration::from_secs(300);
// criterion 9
const WEAK_ORDER: f64 = 2.0;
// criterion 10
const MMS_SPATIAL_FLOOR: f64 = 1e-9;
const MMS_ORDER: f64 = 4.0;
const MMS_ORDER_TOL: f64 = 0.4;

const EPS: f64 = 0.4;
const N: usize = 128;
const T_END: f64 = 0.05;
const DT: f64 = 1.5e-6;
/// Diagnostics and snapshots every this many steps at every `dt`.
const CADENCE: usize = 20;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "\n[criterion {id:>2}] {status} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn mu() -> f64 {
    derived_mu(NU, KAPPA).unwrap()
}

struct Trajectory {
    sim: Simulation,
    elapsed: Duration,
}

impl Trajectory {
    fn records_max(&self, f: impl Fn(&qns_core::diagnostics::DiagnosticsRecord) -> f64) -> f64 {
        self.sim.records.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
    }

    fn snapshots(&self) -> Vec<State> {
        self.sim
            .snapshot_files
            .iter()
            .map(|p| load_snapshot(p).expect("snapshot reads back").1)
            .collect()
    }
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qns-acceptance-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Criterion-3 run; primitive runs also write snapshots for the weak form.
fn trajectory(formulation: Formulation, dt: f64, tag: &str) -> Trajectory {
    let mut cfg = smooth_config(EPS, N, T_END, dt, CADENCE);
    let primitive = formulation == Formulation::Primitive;
    if primitive {
        cfg.control.snapshot_cadence = CADENCE;
    }
    let opts = SimOptions {
        step_monitors: true,
        snapshot_dir: primitive.then(|| scratch_dir(tag)),
        keep_snapshots: false,
    };
    let start = Instant::now();
    let sim = simulate(&cfg, cfg.model_params(), formulation, &opts).expect("run completes");
    Trajectory {
        sim,
        elapsed: start.elapsed(),
    }
}

macro_rules! shared {
    ($name:ident, $formulation:expr, $dt:expr, $tag:expr) => {
        fn $name() -> &'static Trajectory {
            static CELL: OnceLock<Trajectory> = OnceLock::new();
            CELL.get_or_init(|| trajectory($formulation, $dt, $tag))
        }
    };
}

shared!(primitive_dt, Formulation::Primitive, DT, "p1");
shared!(primitive_half, Formulation::Primitive, 0.5 * DT, "p2");
shared!(effective_mu_dt, Formulation::Effective(mu()), DT, "e1");
shared!(effective_mu_half, Formulation::Effective(mu()), 0.5 * DT, "e2");
shared!(effective_half_mu_dt, Formulation::Effective(0.5 * mu()), DT, "h1");
shared!(effective_half_mu_half, Formulation::Effective(0.5 * mu()), 0.5 * DT, "h2");

/// Whether every report meets the tolerance at the finest level and the
/// reduction contract at every doubling, plus a per-report summary.
fn finest_and_reductions(reports: &[IdentityReport]) -> (bool, bool, String) {
    let mut within = true;
    let mut reduced = true;
    let mut lines = Vec::new();
    for r in reports {
        let red = r.reductions.clone().unwrap_or_default();
        within &= r.finest() <= IDENTITY_TOL;
        reduced &= red.len() == 2 && red.iter().all(|&x| x >= IDENTITY_REDUCTION);
        let best = red.iter().fold(0.0f64, |m, &x| m.max(x));
        lines.push(format!("{} eps={}: {:.1e}, best {best:.2}x", r.name, r.params.eps, r.finest()));
    }
    (within, reduced, lines.join("; "))
}

#[test]
fn criterion_01_identity_suite() {
    let rho = |x: &[f64]| 2.0 + (std::f64::consts::TAU * x[0]).cos();
    let u = |x: &[f64], _: usize| 0.1 * (std::f64::consts::TAU * x[0]).sin();
    let levels = [64, 128, 256];
    let start = Instant::now();
    let mut reports = Vec::new();
    for eps in [0.0, 0.3] {
        let p = ModelParams::new(NU, KAPPA, GAMMA, eps, 1);
        reports.extend(check_form_k(&rho, &p, &levels, IDENTITY_TOL).unwrap());
        reports.extend(check_transform_identities(&rho, &u, &p, mu(), &levels, IDENTITY_TOL).unwrap());
        reports.extend(check_bohm(&rho, &p, &levels, IDENTITY_TOL).unwrap());
    }
    let elapsed = start.elapsed();
    let (within, reduced, detail) = finest_and_reductions(&reports);
    verdict(
        1,
        "identity suite",
        within && reduced && elapsed < IDENTITY_BUDGET,
        &format!(
            "all l2@256 <= {IDENTITY_TOL:e}: {within}; >= {IDENTITY_REDUCTION}x per doubling: {reduced}; {:.2}s; {detail}",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_coefficient_conjugacy() {
    let documented = ["f2", "f4", "f5", "p6"];
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut flags_ok = true;
    let mut detail = Vec::new();
    for eps in [0.3, 0.4, 0.5, 0.6] {
        for gamma in [1.5, 2.0, 2.5] {
            let p = ModelParams::new(NU, KAPPA, gamma, eps, 1);
            let reports = check_pf_closed_forms(&p, (0.5, 2.0), 200, PF_TOL).unwrap();
            for r in &reports[..2] {
                worst = worst.max(r.finest());
            }
            let mut names: Vec<&str> = reports[2].flags.iter().map(|f| f.term.as_str()).collect();
            names.sort_unstable();
            if names != documented || !reports[2].pass {
                flags_ok = false;
                detail.push(format!("eps={eps} gamma={gamma} flags={names:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "coefficient conjugacy",
        worst <= PF_TOL && flags_ok && elapsed < PF_BUDGET,
        &format!(
            "max (a),(b) discrepancy {worst:.2e} <= {PF_TOL:e}; flags exactly {documented:?}: {flags_ok} {}; {:.2}s",
            detail.join(" "),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_03_energy_law() {
    let (a, b) = (primitive_dt(), primitive_half());
    let e0 = a.sim.records[0].energy.energy;
    let bound = STEP_ENERGY_TOL * (1.0 + e0);
    let inc = [a, b].map(|t| t.sim.monitors.unwrap().max_energy_increase);
    let r1 = a.records_max(|r| r.energy_residual);
    let r2 = b.records_max(|r| r.energy_residual);
    let ratio = r1 / r2;
    verdict(
        3,
        "energy law",
        inc.iter().all(|&i| i <= bound) && ratio >= LEDGER_REDUCTION && a.elapsed < RUN_BUDGET,
        &format!(
            "max per-step increase {:.2e}, {:.2e} <= {bound:.2e}; |dE/dt + D| {r1:.3e} -> {r2:.3e} ({ratio:.1}x >= {LEDGER_REDUCTION}x); run {:.1}s",
            inc[0],
            inc[1],
            a.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_bd_entropy_law() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, a, b) in [
        ("c=mu", effective_mu_dt(), effective_mu_half()),
        ("c=mu/2", effective_half_mu_dt(), effective_half_mu_half()),
    ] {
        let r1 = a.records_max(|r| r.bd_residual);
        let r2 = b.records_max(|r| r.bd_residual);
        pass &= r1 / r2 >= LEDGER_REDUCTION;
        detail.push(format!("{label}: |dB/dt + terms| {r1:.3e} -> {r2:.3e} ({:.1}x)", r1 / r2));
    }
    let zero = [effective_mu_dt(), effective_mu_half()]
        .iter()
        .flat_map(|t| &t.sim.records)
        .all(|r| r.bd.c == mu() && r.bd.terms[4] == 0.0 && r.bd.terms[5] == 0.0 && r.bd.terms[6] == 0.0);
    pass &= zero;
    verdict(
        4,
        "entropy law",
        pass,
        &format!("{}; weighted terms exactly zero at c=mu: {zero}", detail.join("; ")),
    );
}

/// Density with geometrically decaying modes up to k = 100, so that n = 128
/// under-resolves it while n = 256 does not.
fn broadband_config(n: usize, dt: f64) -> qns_cli::RunConfig {
    let mut cfg = smooth_config(EPS, n, T_END, dt, usize::MAX / 2);
    cfg.initial.rho_modes = (1..=100)
        .map(|k| qns_core::dynamics::Mode {
            k: vec![k],
            amp: 0.4 * 0.8f64.powi(k),
            phase: 0.0,
            shape: qns_core::dynamics::Shape::Cos,
            component: 0,
        })
        .collect();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn criterion_05_formulation_equivalence() {
    let dt = 1e-6;
    let coarse = compare_formulations(&broadband_config(128, dt)).unwrap().0;
    let fine = compare_formulations(&broadband_config(256, dt / 8.0)).unwrap().0;
    let ratio = coarse.rho_l2_diff / fine.rho_l2_diff;
    let limit = COMPARE_REL_TOL * fine.rho_l2_norm;
    verdict(
        5,
        "formulation equivalence",
        ratio >= COMPARE_REDUCTION && fine.rho_l2_diff <= limit,
        &format!(
            "|rho_p - rho_e| {:.3e} (n=128) -> {:.3e} (n=256), {ratio:.1}x >= {COMPARE_REDUCTION}x; fine {:.3e} <= {limit:.3e}",
            coarse.rho_l2_diff, fine.rho_l2_diff, fine.rho_l2_diff
        ),
    );
}

#[test]
fn criterion_06_conservation() {
    let runs = [
        ("P dt", primitive_dt()),
        ("P dt/2", primitive_half()),
        ("E mu dt", effective_mu_dt()),
        ("E mu dt/2", effective_mu_half()),
        ("E mu/2 dt", effective_half_mu_dt()),
        ("E mu/2 dt/2", effective_half_mu_half()),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (label, t) in runs {
        let m = t.sim.monitors.unwrap();
        pass &= m.max_rel_mass_drift <= MASS_DRIFT_TOL && m.max_div_k_integral <= DIV_K_TOL;
        detail.push(format!(
            "{label}: mass {:.1e}, div K {:.1e}",
            m.max_rel_mass_drift, m.max_div_k_integral
        ));
    }
    verdict(
        6,
        "conservation",
        pass,
        &format!("limits {MASS_DRIFT_TOL:e} / {DIV_K_TOL:e}; {}", detail.join("; ")),
    );
}

#[test]
fn criterion_07_monitored_bounds() {
    let t = primitive_dt();
    let model = Model::new(t.sim.params).unwrap();
    let delta2 = 0.5 * moment_delta_bound_2d(&model);
    let moment2: Vec<f64> = t
        .snapshots()
        .iter()
        .map(|s| moment(&model, s, delta2).unwrap())
        .collect();
    let recs = &t.sim.records;
    let first = &recs[0];
    let e0 = first.energy.energy;
    let mut series: Vec<(String, Vec<f64>)> = vec![
        ("mv".into(), recs.iter().map(|r| r.mv).collect()),
        ("moment(0.25)".into(), recs.iter().map(|r| r.moment).collect()),
        (format!("moment({delta2})"), moment2),
    ];
    for (k, name) in UF_NAMES.iter().enumerate() {
        series.push((format!("uf_{name}"), recs.iter().map(|r| r.uf[k]).collect()));
    }
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, v) in &series {
        let reference = v[0].abs().max(e0);
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ok = v.iter().all(|x| x.is_finite()) && max <= BOUND_FACTOR * reference;
        pass &= ok;
        detail.push(format!("{name} {:.3}", max / reference));
    }
    let rho0_min = first.rho_min;
    let rho_min = recs.iter().map(|r| r.rho_min).fold(f64::INFINITY, f64::min);
    pass &= rho_min > RHO_MIN_FRACTION * rho0_min;
    verdict(
        7,
        "monitored bounds",
        pass,
        &format!(
            "run-max / max(q(0), E(0)) <= {BOUND_FACTOR}: {}; rho_min {rho_min:.4} > {:.4}",
            detail.join(", "),
            RHO_MIN_FRACTION * rho0_min
        ),
    );
}

#[test]
fn criterion_08_eps_sweep() {
    let mut cfg = smooth_config(0.6, N, T_END, DT, 200);
    cfg.sweep = Some(qns_cli::config::SweepSection {
        eps: vec![0.6, 0.5, 0.4, 0.3],
        max_growth: Some(SWEEP_FACTOR),
    });
    cfg.validate().unwrap();
    let start = Instant::now();
    let report = sweep(&cfg).unwrap();
    let elapsed = start.elapsed();
    let growth: Vec<String> = report
        .entries
        .iter()
        .map(|e| format!("eps={} {:.3}", e.eps, e.growth))
        .collect();
    let spread: Vec<String> = UF_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let v = report.entries.iter().map(|e| e.uf_max[k]);
            let (lo, hi) = v.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
            format!("{name} {:.3e}", hi / lo)
        })
        .collect();
    verdict(
        8,
        "eps sweep",
        report.max_growth <= SWEEP_FACTOR && elapsed < SWEEP_BUDGET,
        &format!(
            "largest run-maximum relative to eps=0.6 per entry: {} (<= {SWEEP_FACTOR}); max/min across sweep: {}; {:.1}s",
            growth.join(", "),
            spread.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

fn weak_residual(t: &Trajectory) -> f64 {
    let model = Model::new(t.sim.params).unwrap();
    let snaps = t.snapshots();
    let report = check_weak_form(&model, &snaps, &default_test_functions(1), f64::INFINITY).unwrap();
    report.observed.unwrap()
}

#[test]
fn criterion_09_weak_form() {
    let (a, b) = (primitive_dt(), primitive_half());
    let (r1, r2) = (weak_residual(a), weak_residual(b));
    let order = (r1 / r2).log2();
    verdict(
        9,
        "weak form",
        order >= WEAK_ORDER,
        &format!(
            "residual {r1:.3e} ({} snapshots) -> {r2:.3e} ({} snapshots), order {order:.5} >= {WEAK_ORDER}",
            a.sim.snapshot_files.len(),
            b.sim.snapshot_files.len()
        ),
    );
}

fn mms_error(n: usize, dt: f64, t_end: f64, modulation: Modulation) -> f64 {
    let params = ModelParams::new(NU, KAPPA, GAMMA, EPS, 1);
    let model = Model::new(params).unwrap();
    let mms = Manufactured::new(params, modulation);
    let grid = PeriodicGrid::new(1, n, 1.0).unwrap();
    let (rho, mom) = mms.sample(&grid, 0.0);
    let state = State::primitive(rho, mom, 0.0).unwrap();
    let control = StepControl {
        dt_fixed: Some(dt),
        t_end,
        ..StepControl::default()
    };
    let out = run(&model, state, &control, usize::MAX, Some(&mms), &mut |_, _| Ok(())).unwrap();
    let (rho_e, mom_e) = mms.sample(&grid, t_end);
    let f = out.final_state;
    f.rho.sub(&rho_e).max_abs().max(f.mom.sub(&mom_e).max_abs())
}

#[test]
fn criterion_10_manufactured_solution() {
    let spatial: Vec<(usize, f64)> = [16, 32, 64, 128]
        .into_iter()
        .map(|n| (n, mms_error(n, 2e-7, 0.002, Modulation::Decay)))
        .collect();
    let floor_by_128 = spatial.last().unwrap().1 <= MMS_SPATIAL_FLOOR;
    let dts = [2e-5, 1e-5, 5e-6, 2.5e-6];
    let temporal: Vec<f64> = dts
        .iter()
        .map(|&dt| mms_error(32, dt, 0.002, Modulation::Oscillation(3000.0)))
        .collect();
    let orders: Vec<f64> = temporal.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let orders_ok = orders.iter().all(|o| (o - MMS_ORDER).abs() <= MMS_ORDER_TOL);
    let sp: Vec<String> = spatial.iter().map(|(n, e)| format!("n={n} {e:.2e}")).collect();
    let od: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    verdict(
        10,
        "manufactured solution",
        floor_by_128 && orders_ok,
        &format!(
            "spatial {} (<= {MMS_SPATIAL_FLOOR:e} by n=128); temporal orders [{}] within {MMS_ORDER} +- {MMS_ORDER_TOL}",
            sp.join(", "),
            od.join(", ")
        ),
    );
}
