//! Run orchestration: config, the five commands and their output files.
//!
//! Every command writes into its own output directory and echoes the resolved
//! config there as `config.resolved`. Nothing here holds global state, so
//! independent runs can share a process.

pub mod config;
pub mod suite;

pub use config::{InitialData, RunConfig, WeightChoice};

use crate::detectors::{classify, late_local_mass, threshold_classify, DetectorConfig, ThresholdReport, Verdict, VerdictLabel};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::ground_state::{petviashvili_solve, GroundState, SolverConfig, Thresholds};
use crate::integrator::{evolve, write_csvs, BlowupCriteria, EvolveConfig, Monitors, SnapshotSink, TrajectoryReport, CSV_SCHEMA_VERSION};
use crate::model::{check_conditions, derive_exponents, DerivedExponents};
use crate::nonlinearity::NonlinearityContext;
use crate::random::{random_smooth_field, Lcg64, PacketSpec};
use crate::snapshot;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Whether a command's domain checks held. Errors are reported separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Ok
        } else {
            Status::Failed
        }
    }
}

pub const THRESHOLDS_HEADER: &str = "N,alpha,b,p,s_c,A,B,massQ,gradQ_sq,energyQ,C0,ME_threshold,K_threshold,residual,grid_M,box_L,seed_id";

pub const SCAN_HEADER: &str = "c,class_t0,me_ratio,kinetic_ratio,verdict,stop,peak_grad_l2,final_local_mass,error";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write_file(&dir.join("config.resolved"), &cfg.to_text())
}

pub fn context(cfg: &RunConfig) -> Result<NonlinearityContext> {
    let grid = SpatialGrid::new(cfg.params.dim, cfg.box_length, cfg.grid_points)?;
    NonlinearityContext::new(cfg.params, grid, cfg.nonlinearity_options())
}

/// Prints the derived exponents and every admissibility condition.
pub fn cmd_validate(cfg: &RunConfig, out: &mut impl Write) -> Result<Status> {
    let p = &cfg.params;
    writeln!(out, "params {p}")?;
    let conditions = check_conditions(p);
    let ok = conditions.iter().all(|c| c.holds);
    if let Ok(e) = derive_exponents(p) {
        writeln!(out, "s_c = {}", e.s_c)?;
        writeln!(out, "A = {}", e.mass_exp)?;
        writeln!(out, "B = {}", e.kinetic_exp)?;
        writeln!(out, "K = {:.16e}", e.k_riesz)?;
        writeln!(out, "p_range = ({}, {})", e.p_lower, e.p_upper)?;
    }
    for c in &conditions {
        writeln!(out, "condition {} value={} {}", c.condition, c.value, if c.holds { "pass" } else { "fail" })?;
    }
    writeln!(out, "valid = {ok}")?;
    Ok(Status::from_bool(ok))
}

pub fn thresholds_row(cfg: &RunConfig, e: &DerivedExponents, gs: &GroundState) -> String {
    let p = &cfg.params;
    format!(
        "{},{:?},{:?},{:?},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:?},{}",
        p.dim,
        p.alpha,
        p.b,
        p.p,
        e.s_c,
        e.mass_exp,
        e.kinetic_exp,
        gs.mass,
        gs.grad_sq,
        gs.energy,
        gs.c0,
        gs.me_threshold,
        gs.k_threshold,
        gs.residual,
        cfg.grid_points,
        cfg.box_length,
        gs.seed.id()
    )
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig { tol: cfg.gs_tol, max_iter: cfg.gs_max_iter, seed: cfg.gs_seed }
}

fn gs_path(cfg: &RunConfig, dir: &Path) -> PathBuf {
    if cfg.gs_path.is_absolute() {
        cfg.gs_path.clone()
    } else {
        dir.join(&cfg.gs_path)
    }
}

/// Solves for Q and writes the profile, `thresholds.csv` and a report.
pub fn cmd_ground_state(cfg: &RunConfig, dir: &Path, out: &mut impl Write) -> Result<Status> {
    crate::model::admissible_exponents(&cfg.params)?;
    create_dir(dir)?;
    echo_config(cfg, dir)?;
    let ctx = context(cfg)?;
    let gs = match petviashvili_solve(&ctx, &solver_config(cfg)) {
        Ok(gs) => gs,
        Err(err @ Error::NoConvergence { .. }) => {
            if let Error::NoConvergence { trace, .. } = &err {
                let mut s = String::from("iteration,update\n");
                for (i, u) in trace.iter().enumerate() {
                    let _ = writeln!(s, "{},{:.16e}", i + 1, u);
                }
                write_file(&dir.join("ground_state_trace.csv"), &s)?;
            }
            return Err(err);
        }
        Err(e) => return Err(e),
    };
    let e = *ctx.exponents();
    snapshot::write(&gs_path(cfg, dir), &gs.profile, 0.0, &cfg.params)?;
    let csv = format!("{THRESHOLDS_HEADER}\n{}\n", thresholds_row(cfg, &e, &gs));
    write_file(&dir.join("thresholds.csv"), &csv)?;
    let po = gs.pohozaev(&e, cfg.params.p);
    let mut report = String::new();
    let _ = writeln!(report, "iterations = {}", gs.iterations);
    let _ = writeln!(report, "gamma = {:.16e}", gs.gamma);
    let _ = writeln!(report, "residual = {:.6e}", gs.residual);
    let _ = writeln!(report, "mass = {:.16e}", gs.mass);
    let _ = writeln!(report, "grad_sq = {:.16e}", gs.grad_sq);
    let _ = writeln!(report, "energy = {:.16e}", gs.energy);
    let _ = writeln!(report, "C0 = {:.16e}", gs.c0);
    let _ = writeln!(report, "ME_threshold = {:.16e}", gs.me_threshold);
    let _ = writeln!(report, "K_threshold = {:.16e}", gs.k_threshold);
    let _ = writeln!(report, "pohozaev_kinetic_mass = {:.10}", po.kinetic_mass);
    let _ = writeln!(report, "pohozaev_potential_kinetic = {:.10}", po.potential_kinetic);
    let _ = writeln!(report, "pohozaev_energy = {:.10}", po.energy);
    let _ = writeln!(report, "symmetry_defect = {:.6e}", gs.symmetry_defect());
    write_file(&dir.join("ground_state.txt"), &report)?;
    out.write_all(report.as_bytes())?;
    Ok(Status::Ok)
}

/// Q read back from a ground-state run, with the thresholds it implies.
pub struct GroundStateArtifact {
    pub profile: ComplexField,
    pub thresholds: Thresholds,
}

pub fn load_ground_state(ctx: &NonlinearityContext, path: &Path) -> Result<GroundStateArtifact> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("ground-state artifact {} is missing; run `ground-state` first", path.display())));
    }
    let snap = snapshot::read(path)?;
    ctx.grid().check_same(snap.field.grid())?;
    if snap.params != *ctx.params() {
        return Err(Error::InvalidArgument(format!("{} holds Q for {}, config has {}", path.display(), snap.params, ctx.params())));
    }
    let f = ctx.functionals(&snap.field)?;
    let thresholds = crate::ground_state::thresholds(ctx.exponents(), f.mass, f.grad_sq, f.energy_2p)?;
    Ok(GroundStateArtifact { profile: snap.field, thresholds })
}

/// Q from the artifact when present; solved in memory when the initial data
/// does not reference it.
fn ground_state_for(cfg: &RunConfig, ctx: &NonlinearityContext, dir: &Path) -> Result<GroundStateArtifact> {
    let path = gs_path(cfg, dir);
    if path.exists() || matches!(cfg.initial, InitialData::GroundStateMultiple { .. }) {
        return load_ground_state(ctx, &path);
    }
    let gs = petviashvili_solve(ctx, &solver_config(cfg))?;
    Ok(GroundStateArtifact { thresholds: gs.thresholds(), profile: gs.profile })
}

pub fn initial_field(cfg: &RunConfig, ctx: &NonlinearityContext, q: &ComplexField) -> Result<ComplexField> {
    let grid = *ctx.grid();
    match &cfg.initial {
        InitialData::GroundStateMultiple { c } => Ok(q.scaled(Complex64::new(*c, 0.0))),
        InitialData::Gaussian { amplitude, width, center, momentum } => {
            let (a, w) = (*amplitude, *width);
            Ok(ComplexField::from_fn(grid, |x| {
                let d2: f64 = x.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                let phase: f64 = x.iter().zip(momentum).map(|(x, k)| x * k).sum();
                Complex64::from_polar(a * (-d2 / (2.0 * w * w)).exp(), phase)
            }))
        }
        InitialData::Random { amplitude } => {
            let spec = PacketSpec { amplitude: *amplitude, ..PacketSpec::default() };
            Ok(random_smooth_field(grid, &spec, &mut Lcg64::new(cfg.seed)))
        }
        InitialData::Snapshot { path } => {
            let snap = snapshot::read(path)?;
            grid.check_same(snap.field.grid())?;
            Ok(snap.field)
        }
    }
}

pub fn evolve_config(cfg: &RunConfig) -> EvolveConfig {
    let mut snapshot_times = Vec::new();
    if cfg.snapshot_every > 0.0 {
        let n = (cfg.t_final / cfg.snapshot_every + 1e-9).floor() as usize;
        snapshot_times = (0..=n).map(|k| k as f64 * cfg.snapshot_every).collect();
    }
    EvolveConfig {
        dt: cfg.dt,
        t_final: cfg.t_final,
        diag_stride: cfg.diag_stride,
        snapshot_times,
        filter_on: cfg.filter,
        nonlinearity: cfg.nonlinearity,
        truncation: cfg.truncation,
        guard_fraction: cfg.guard_fraction,
        blowup: BlowupCriteria { growth_factor: cfg.growth_factor, saturation: cfg.saturation },
    }
}

pub fn detector_config(cfg: &RunConfig) -> DetectorConfig {
    DetectorConfig { local_mass_eps_rel: cfg.local_mass_eps, pullback_eps_rel: cfg.pullback_eps, spacetime_levels: cfg.spacetime_levels }
}

/// Everything one evolution produced.
pub struct RunOutcome {
    pub classification: ThresholdReport,
    pub report: TrajectoryReport,
    pub reruns: Vec<TrajectoryReport>,
    pub verdict: Verdict,
}

/// Evolves `u0`, reruns at `dt/2` on a blow-up trigger, classifies, and writes
/// the CSVs, snapshots and `verdict.txt` into `dir`.
pub fn run_evolution(cfg: &RunConfig, ctx: &NonlinearityContext, u0: &ComplexField, thresholds: &Thresholds, dir: &Path) -> Result<RunOutcome> {
    create_dir(dir)?;
    echo_config(cfg, dir)?;
    let classification = threshold_classify(ctx, u0, thresholds)?;
    let monitors = Monitors::new(ctx, cfg.resolved_detector_radius(), cfg.resolved_morawetz_radius(), Some(thresholds.kinetic))?;
    let ecfg = evolve_config(cfg);
    let sink = SnapshotSink { dir: dir.to_path_buf(), params: cfg.params };
    let report = evolve(ctx, u0, &ecfg, &monitors, Some(&sink))?;
    write_csvs(dir, &report)?;
    let mut reruns = Vec::new();
    if report.stop.is_blowup() && cfg.rerun {
        let fine = EvolveConfig { dt: 0.5 * ecfg.dt, diag_stride: 2 * ecfg.diag_stride, ..ecfg.clone() };
        let rerun = evolve(ctx, u0, &fine, &monitors, None)?;
        let sub = dir.join("rerun_half_dt");
        create_dir(&sub)?;
        write_csvs(&sub, &rerun)?;
        reruns.push(rerun);
    }
    let verdict = classify(&report, &reruns, &detector_config(cfg));
    write_file(&dir.join("verdict.txt"), &verdict_text(&classification, &report, &reruns, &verdict))?;
    Ok(RunOutcome { classification, report, reruns, verdict })
}

fn verdict_text(class: &ThresholdReport, report: &TrajectoryReport, reruns: &[TrajectoryReport], verdict: &Verdict) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "csv_schema_version = {CSV_SCHEMA_VERSION}");
    let _ = writeln!(s, "class_t0 = {}", class.class.name());
    if let crate::detectors::ThresholdClass::OutsideHypotheses(why) = &class.class {
        let _ = writeln!(s, "class_note = {why}");
    }
    let _ = writeln!(s, "me_ratio = {:.10e}", class.me_ratio);
    let _ = writeln!(s, "kinetic_ratio = {:.10e}", class.kinetic_ratio);
    let _ = writeln!(s, "stop = {}", report.stop.name());
    let _ = writeln!(s, "stop_time = {:.10e}", report.stop_time);
    let _ = writeln!(s, "steps = {}", report.steps);
    let _ = writeln!(s, "truncation_flagged = {}", report.truncation_flagged);
    if let Some(t) = report.first_truncation_time {
        let _ = writeln!(s, "first_truncation_time = {t:.10e}");
    }
    for r in reruns {
        let _ = writeln!(s, "rerun dt={:e} stop={} stop_time={:.10e}", r.dt, r.stop.name(), r.stop_time);
    }
    if verdict.label == VerdictLabel::BlowupSuspected {
        let _ = writeln!(s, "note = numerical observation, not a proof of blow-up");
    }
    s.push_str(&verdict.to_string());
    s
}

/// Runs the configured evolution and prints the verdict.
pub fn cmd_evolve(cfg: &RunConfig, dir: &Path, out: &mut impl Write) -> Result<Status> {
    crate::model::admissible_exponents(&cfg.params)?;
    let ctx = context(cfg)?;
    let gs = ground_state_for(cfg, &ctx, dir)?;
    let u0 = initial_field(cfg, &ctx, &gs.profile)?;
    let run = run_evolution(cfg, &ctx, &u0, &gs.thresholds, dir)?;
    write!(out, "{}", std::fs::read_to_string(dir.join("verdict.txt"))?)?;
    Ok(Status::from_bool(run.report.stop != crate::integrator::StopReason::NonFinite))
}

/// Runs the identity suite; fails when any residual is above its tolerance.
pub fn cmd_verify(cfg: &RunConfig, dir: &Path, out: &mut impl Write) -> Result<Status> {
    crate::model::admissible_exponents(&cfg.params)?;
    create_dir(dir)?;
    echo_config(cfg, dir)?;
    let suite_cfg = suite::SuiteConfig {
        params: cfg.params,
        grid_points: cfg.verify_grid_points,
        box_length: cfg.verify_box_length,
        energy: cfg.verify_energy,
    };
    let checks = suite::identity_suite(&suite_cfg)?;
    let mut s = String::new();
    for c in &checks {
        let _ = writeln!(s, "{c}");
    }
    let ok = checks.iter().all(|c| c.passed);
    let _ = writeln!(s, "all_passed = {ok}");
    write_file(&dir.join("verify.txt"), &s)?;
    out.write_all(s.as_bytes())?;
    Ok(Status::from_bool(ok))
}

/// One row of a scan table.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub c: f64,
    pub class: String,
    pub me_ratio: f64,
    pub kinetic_ratio: f64,
    pub verdict: String,
    pub stop: String,
    pub peak_grad: f64,
    pub final_local_mass: f64,
    pub error: String,
}

impl ScanRow {
    pub fn csv(&self) -> String {
        format!(
            "{:?},{},{:.10e},{:.10e},{},{},{:.10e},{:.10e},{}",
            self.c,
            self.class,
            self.me_ratio,
            self.kinetic_ratio,
            self.verdict,
            self.stop,
            self.peak_grad,
            self.final_local_mass,
            self.error.replace(',', ";")
        )
    }
}

/// Largest scattering-proxy amplitude lies below the smallest blowup-suspected
/// one. Vacuously true when either set is empty.
pub fn monotone_boundary(rows: &[ScanRow]) -> bool {
    let scat = rows.iter().filter(|r| r.verdict == VerdictLabel::ScatteringProxy.name()).map(|r| r.c).fold(f64::NEG_INFINITY, f64::max);
    let blow = rows.iter().filter(|r| r.verdict == VerdictLabel::BlowupSuspected.name()).map(|r| r.c).fold(f64::INFINITY, f64::min);
    scat < blow
}

/// Runs `c·Q` for each amplitude in its own subdirectory. A failing run is
/// recorded in its row and the scan continues.
pub fn cmd_scan(cfg: &RunConfig, dir: &Path, out: &mut impl Write) -> Result<Status> {
    crate::model::admissible_exponents(&cfg.params)?;
    create_dir(dir)?;
    echo_config(cfg, dir)?;
    let mut amps = cfg.scan_amplitudes.clone();
    amps.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(amps.len());
    if !amps.is_empty() {
        let ctx = context(cfg)?;
        let gs = load_ground_state(&ctx, &gs_path(cfg, dir))?;
        for &c in &amps {
            let run_cfg = RunConfig { initial: InitialData::GroundStateMultiple { c }, ..cfg.clone() };
            let sub = dir.join(format!("c_{c:.4}"));
            let u0 = gs.profile.scaled(Complex64::new(c, 0.0));
            let row = match run_evolution(&run_cfg, &ctx, &u0, &gs.thresholds, &sub) {
                Ok(run) => ScanRow {
                    c,
                    class: run.classification.class.name().into(),
                    me_ratio: run.classification.me_ratio,
                    kinetic_ratio: run.classification.kinetic_ratio,
                    verdict: run.verdict.label.name().into(),
                    stop: run.report.stop.name().into(),
                    peak_grad: run.report.records.iter().map(|r| r.grad_l2).fold(0.0, f64::max),
                    final_local_mass: run.report.records.last().map(|r| r.local_mass).unwrap_or(f64::NAN),
                    error: String::new(),
                },
                Err(e) => ScanRow {
                    c,
                    class: String::new(),
                    me_ratio: f64::NAN,
                    kinetic_ratio: f64::NAN,
                    verdict: "error".into(),
                    stop: String::new(),
                    peak_grad: f64::NAN,
                    final_local_mass: f64::NAN,
                    error: e.to_string(),
                },
            };
            writeln!(out, "{}", row.csv())?;
            rows.push(row);
        }
    }
    let mut s = format!("{SCAN_HEADER}\n");
    for r in &rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    write_file(&dir.join("scan.csv"), &s)?;
    let mono = monotone_boundary(&rows);
    let summary = format!("rows = {}\nmonotone_boundary = {mono}\n", rows.len());
    write_file(&dir.join("scan.txt"), &summary)?;
    out.write_all(summary.as_bytes())?;
    Ok(Status::Ok)
}

/// Late-window local mass of a finished run relative to its initial mass.
pub fn relative_late_local_mass(report: &TrajectoryReport) -> f64 {
    let m0 = report.records.first().map(|r| r.mass).unwrap_or(f64::NAN);
    late_local_mass(report) / m0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> RunConfig {
        RunConfig {
            grid_points: 24,
            box_length: 16.0,
            dt: 0.01,
            t_final: 0.2,
            diag_stride: 5,
            snapshot_every: 0.1,
            gs_tol: 1e-8,
            gs_path: dir.join("q.chqs"),
            ..RunConfig::default()
        }
    }

    #[test]
    fn validate_reports_conditions() {
        let mut buf = Vec::new();
        assert_eq!(cmd_validate(&RunConfig::default(), &mut buf).unwrap(), Status::Ok);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("s_c = 0.75"));
        let bad = RunConfig { params: crate::model::ModelParams { p: 2.0, ..crate::model::ModelParams::reference() }, ..RunConfig::default() };
        let mut buf = Vec::new();
        assert_eq!(cmd_validate(&bad, &mut buf).unwrap(), Status::Failed);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().any(|l| l.starts_with("condition p > ") && l.ends_with("fail")), "{text}");
    }

    #[test]
    fn evolve_needs_the_ground_state_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        let err = cmd_evolve(&cfg, tmp.path(), &mut Vec::new()).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }

    #[test]
    fn ground_state_then_evolve_then_scan() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        assert_eq!(cmd_ground_state(&cfg, tmp.path(), &mut Vec::new()).unwrap(), Status::Ok);
        let csv = std::fs::read_to_string(tmp.path().join("thresholds.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), THRESHOLDS_HEADER);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), THRESHOLDS_HEADER.split(',').count());
        let run = tmp.path().join("run");
        let cfg_run = cfg.clone();
        assert_eq!(cmd_evolve(&cfg_run, &run, &mut Vec::new()).unwrap(), Status::Ok);
        for f in ["diagnostics.csv", "coercivity.csv", "pullback.csv", "verdict.txt", "config.resolved", "snapshot_0002.chqs"] {
            assert!(run.join(f).exists(), "{f}");
        }
        let echoed = RunConfig::load(&run.join("config.resolved")).unwrap();
        assert_eq!(echoed.to_text(), cfg_run.to_text());
        let scan = RunConfig { scan_amplitudes: vec![0.7, 0.5], ..cfg_run };
        let sdir = tmp.path().join("scan");
        std::fs::create_dir_all(&sdir).unwrap();
        cmd_scan(&scan, &sdir, &mut Vec::new()).unwrap();
        let table = std::fs::read_to_string(sdir.join("scan.csv")).unwrap();
        let cs: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(cs, ["0.5", "0.7"]);
    }

    #[test]
    fn empty_scan_is_an_empty_table() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig { scan_amplitudes: vec![], ..small(tmp.path()) };
        assert_eq!(cmd_scan(&cfg, tmp.path(), &mut Vec::new()).unwrap(), Status::Ok);
        assert_eq!(std::fs::read_to_string(tmp.path().join("scan.csv")).unwrap(), format!("{SCAN_HEADER}\n"));
    }

    #[test]
    fn monotone_boundary_flag() {
        let row = |c: f64, v: VerdictLabel| ScanRow {
            c,
            class: String::new(),
            me_ratio: 0.0,
            kinetic_ratio: 0.0,
            verdict: v.name().into(),
            stop: String::new(),
            peak_grad: 0.0,
            final_local_mass: 0.0,
            error: String::new(),
        };
        let s = VerdictLabel::ScatteringProxy;
        let b = VerdictLabel::BlowupSuspected;
        assert!(monotone_boundary(&[row(0.5, s), row(0.9, s), row(1.2, b)]));
        assert!(!monotone_boundary(&[row(0.5, s), row(1.2, b), row(1.4, s)]));
        assert!(monotone_boundary(&[]));
    }
}
