//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Dynamics use 64³ on L = 24 with dt = 0.005; the ground-state certificates
//! use the default 128³ grid and the radial solver.

use choquard::detectors::VerdictLabel;
use choquard::grid::SpatialGrid;
use choquard::ground_state::radial::{solve_radial, RadialConfig};
use choquard::ground_state::{petviashvili_solve, weinstein_functional, GroundState, SolverConfig};
use choquard::harness::suite;
use choquard::harness::{run_evolution, InitialData, RunConfig, RunOutcome};
use choquard::integrator::{evolve, EvolveConfig, Monitors};
use choquard::model::{derive_exponents, ModelParams};
use choquard::nonlinearity::{EnergyConvention, NonlinearityContext, NonlinearityOptions};
use choquard::random::{random_smooth_field, Lcg64, PacketSpec};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn ctx(params: ModelParams, l: f64, m: usize) -> NonlinearityContext {
    NonlinearityContext::new(params, SpatialGrid::new(params.dim, l, m).unwrap(), NonlinearityOptions::default()).unwrap()
}

fn solve(c: &NonlinearityContext) -> GroundState {
    petviashvili_solve(c, &SolverConfig::default()).unwrap()
}

fn exponent_algebra() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (params, hand) in [(ModelParams::reference(), [0.75, 1.0, 5.0]), (ModelParams::secondary(), [0.25, 1.5, 2.5])] {
        let e = derive_exponents(&params).unwrap();
        let got = [e.s_c, e.mass_exp, e.kinetic_exp];
        let identity = (e.kinetic_exp - (2.0 * (params.p - 1.0) * e.s_c + 2.0)).abs();
        ok &= got.iter().zip(hand).all(|(g, h)| (g - h).abs() < 1e-12) && identity < 1e-12;
        detail.push(format!("{params}: s_c={} A={} B={} |B-2(p-1)s_c-2|={identity:.1e}", got[0], got[1], got[2]));
    }
    outcome(ok, detail.join("; "))
}

fn riesz_oracle() -> Outcome {
    let c = suite::riesz_oracle(32).unwrap();
    outcome(c.passed, format!("max relative error {:.3e} on [h, L/4], L=16σ, 32³", c.value))
}

fn conservation() -> Outcome {
    let p = ModelParams::reference();
    let mass = suite::mass_drift(p, 12.0, 16, 1e-3, 10_000).unwrap();
    let (_, drift, ratio) = suite::energy_conservation(p, 12.0, 16, 1e-3, EnergyConvention::TwoP).unwrap();
    let (_, hook, _) = suite::energy_conservation(p, 12.0, 16, 1e-3, EnergyConvention::P).unwrap();
    let ok = mass.value < 1e-10 && drift < 1e-6 && (3.0..=5.0).contains(&ratio) && hook > 1e-2;
    outcome(
        ok,
        format!("mass drift {:.2e} over 1e4 steps; energy drift {drift:.2e}, halving ratio {ratio:.3}; 1/p hook drift {hook:.2e}", mass.value),
    )
}

fn scaling() -> Outcome {
    let r = suite::scaling_symmetry(ModelParams::reference(), 12.0, 24, 2.0, 1e-3, 200).unwrap();
    outcome(
        r.commutation < 1e-5 && r.hsc_change < 1e-6,
        format!("λ=2, 24³ paired grids, t=0.2: L² mismatch {:.2e}, Ḣ^s_c change {:.2e}", r.commutation, r.hsc_change),
    )
}

fn ground_state_certificates(q64: &GroundState) -> Outcome {
    let p = ModelParams::reference();
    let e = derive_exponents(&p).unwrap();
    let t = Instant::now();
    let c128 = ctx(p, 24.0, 128);
    let q = solve(&c128);
    let radial = solve_radial(&p, &RadialConfig::default()).unwrap();
    let po = radial.pohozaev(&e, p.p);
    let c0_radial = radial.sharp_constant(&e);
    let equality = (q.c0 / c0_radial - 1.0).abs();
    // sharpness on the grid where the random fields live
    let c64 = ctx(p, 24.0, 64);
    let mut rng = Lcg64::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let spec = PacketSpec {
            packets: 1 + (rng.next_u64() % 8) as usize,
            spread: 4.0,
            width_min: 0.7,
            width_max: 2.5,
            momentum: 1.0,
            amplitude: 1.0,
        };
        let f = random_smooth_field(*c64.grid(), &spec, &mut rng);
        worst = worst.max(weinstein_functional(&c64, &f).unwrap() / q64.c0);
    }
    let refine = [(q64.me_threshold, q.me_threshold), (q64.k_threshold, q.k_threshold)]
        .iter()
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0, f64::max);
    println!("  info: ground-state refinement 64³ -> 128³ moves thresholds by {refine:.2e} (target < 1e-3)");
    let ok = q.residual < 1e-8 && po.max_deviation() < 1e-5 && worst <= 1.0 + 1e-4 && equality < 1e-4;
    outcome(
        ok,
        format!(
            "128³ residual {:.2e}; radial Pohozaev deviations {:.1e} {:.1e} {:.1e}; max W/C0 over 200 fields {worst:.6}; C0 128³ vs radial {equality:.2e} ({:.1}s)",
            q.residual,
            po.kinetic_mass - 1.0,
            po.potential_kinetic - 1.0,
            po.energy - 1.0,
            t.elapsed().as_secs_f64()
        ),
    )
}

/// e^{it}Q on `params`; returns the largest relative drift among mass,
/// energy, ‖∇u‖ and the kinetic ratio, and the diagnostics CSV.
fn stationary_run(params: ModelParams, l: f64, m: usize, dt: f64) -> (f64, String) {
    let c = ctx(params, l, m);
    let q = solve(&c);
    let cfg = EvolveConfig { dt, t_final: 2.0, diag_stride: (0.1 / dt).round() as usize, ..EvolveConfig::default() };
    let mon = Monitors::with_defaults(&c, Some(q.k_threshold)).unwrap();
    let rep = evolve(&c, &q.profile, &cfg, &mon, None).unwrap();
    let drift = [
        rep.max_relative_drift(|r| r.mass),
        rep.max_relative_drift(|r| r.energy_2p),
        rep.max_relative_drift(|r| r.grad_l2),
        rep.max_relative_drift(|r| r.kinetic_threshold_ratio),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let complete = rep.stop == choquard::integrator::StopReason::Completed;
    (if complete { drift } else { f64::INFINITY }, rep.diagnostics_csv())
}

fn stationary(csvs: &mut Vec<(String, String)>) -> Outcome {
    let (drift, csv) = stationary_run(ModelParams::secondary(), 16.0, 32, 1e-4);
    csvs.push(("stationary".into(), csv));
    let (reference, _) = stationary_run(ModelParams::reference(), 16.0, 32, 1e-4);
    println!("  info: reference set, same run: max drift {reference:.2e} (lattice Q is linearly unstable there)");
    outcome(drift < 1e-4, format!("secondary set, 32³ L=16, dt=1e-4, T=2: max relative drift {drift:.2e}"))
}

fn morawetz_suite() -> Outcome {
    let p = ModelParams::reference();
    let checks = [
        suite::morawetz_order(p, 16.0, 48, 3.5).unwrap(),
        suite::expanded_form(p, 8.0, 16).unwrap(),
        suite::localization(p).unwrap(),
        suite::pure_virial(p, 8.0, 16).unwrap(),
    ];
    for c in &checks {
        println!("  {c}");
    }
    let summary: Vec<String> = checks.iter().map(|c| format!("{} {:.2e}", c.name, c.value)).collect();
    outcome(checks.iter().all(|c| c.passed), summary.join(", "))
}

fn dynamics_config(initial: InitialData) -> RunConfig {
    RunConfig {
        grid_points: 64,
        box_length: 24.0,
        dt: 0.005,
        t_final: 10.0,
        diag_stride: 20,
        snapshot_every: 1.0,
        initial,
        ..RunConfig::default()
    }
}

fn offset_gaussian() -> InitialData {
    InitialData::Gaussian { amplitude: 1.0, width: std::f64::consts::FRAC_1_SQRT_2, center: vec![1.0, 0.0, 0.0], momentum: vec![0.0; 3] }
}

struct Dynamics {
    label: &'static str,
    run: RunOutcome,
    seconds: f64,
}

fn run_dynamics(c: &NonlinearityContext, q: &GroundState, label: &'static str, initial: InitialData, dir: &Path) -> Dynamics {
    let cfg = dynamics_config(initial);
    let u0 = choquard::harness::initial_field(&cfg, c, &q.profile).unwrap();
    let t = Instant::now();
    let run = run_evolution(&cfg, c, &u0, &q.thresholds(), dir).unwrap();
    let seconds = t.elapsed().as_secs_f64();
    println!("  info: {label}: {} in {seconds:.0}s, stop {} at t={}", run.verdict.label.name(), run.report.stop.name(), run.report.stop_time);
    Dynamics { label, run, seconds }
}

fn coercivity(runs: &[&Dynamics]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for d in runs {
        let recs = &d.run.report.records;
        let kin = recs.iter().map(|r| r.kinetic_threshold_ratio).fold(f64::NEG_INFINITY, f64::max);
        let ball = recs.iter().map(|r| r.ball_ratio).fold(f64::INFINITY, f64::min);
        let t_end = recs.last().map(|r| r.t).unwrap_or(0.0);
        ok &= kin < 1.0 && ball > 0.0 && t_end >= 10.0;
        detail.push(format!("{}: max kinetic_ratio {kin:.4}, min ball_ratio {ball:.4}, T={t_end}", d.label));
    }
    outcome(ok, detail.join("; "))
}

fn dichotomy(sub: &[&Dynamics], above: &Dynamics) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for d in sub {
        let v = &d.run.verdict;
        let pass = |name: &str| v.evidence_for(name).map(|e| e.passed).unwrap_or(false);
        let row = |name: &str| v.evidence_for(name).map(|e| e.value).unwrap_or(f64::NAN);
        let good = v.label == VerdictLabel::ScatteringProxy
            && pass("local_mass_late_mean")
            && pass("pullback_final")
            && pass("spacetime_final_over_first")
            && d.seconds <= 600.0;
        ok &= good;
        detail.push(format!(
            "{}: {} (local {:.2e}, pullback {:.2e}, spacetime {:.2e}, {:.0}s)",
            d.label,
            v.label.name(),
            row("local_mass_late_mean") / d.run.report.records[0].mass,
            row("pullback_final") / d.run.report.records[0].mass,
            row("spacetime_final_over_first"),
            d.seconds
        ));
    }
    let v = &above.run.verdict;
    ok &= v.label == VerdictLabel::BlowupSuspected && v.refinement_consistent;
    detail.push(format!(
        "{}: {} (numerical observation), stop {} at t={}, refinement_consistent={}",
        above.label,
        v.label.name(),
        above.run.report.stop.name(),
        above.run.report.stop_time,
        v.refinement_consistent
    ));
    outcome(ok, detail.join("; "))
}

const RUN_FILES: [&str; 4] = ["diagnostics.csv", "coercivity.csv", "pullback.csv", "verdict.txt"];

fn determinism(first: &Path, second: &Path, labels: &[&str], extra: &[(String, String)], rerun_extra: &[(String, String)]) -> Outcome {
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for label in labels {
        for f in RUN_FILES.iter().map(|f| f.to_string()).chain(["rerun_half_dt/diagnostics.csv".to_string()]) {
            let a = first.join(label).join(&f);
            let b = second.join(label).join(&f);
            if !a.exists() && !b.exists() {
                continue;
            }
            compared += 1;
            if std::fs::read(&a).ok() != std::fs::read(&b).ok() {
                mismatched.push(format!("{label}/{f}"));
            }
        }
    }
    for ((name, a), (_, b)) in extra.iter().zip(rerun_extra) {
        compared += 1;
        if a != b {
            mismatched.push(name.clone());
        }
    }
    outcome(mismatched.is_empty() && compared > 0, format!("{compared} outputs compared, mismatches: {mismatched:?}"))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn report(results: &mut Vec<(usize, &'static str, bool)>, id: usize, name: &'static str, o: Outcome) {
    println!("criterion {id} {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    results.push((id, name, o.passed));
}

fn main() {
    // `cargo test -- --list` and filters must not trigger the full run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let start = Instant::now();
    let mut results = Vec::new();
    report(&mut results, 1, "exponent algebra", guarded(exponent_algebra));
    report(&mut results, 2, "Riesz oracle", guarded(riesz_oracle));
    report(&mut results, 3, "conservation", guarded(conservation));
    report(&mut results, 4, "scaling symmetry", guarded(scaling));

    let p = ModelParams::reference();
    let c64 = ctx(p, 24.0, 64);
    let q64 = solve(&c64);
    let q64_again = solve(&c64);
    report(&mut results, 5, "ground state", guarded(|| ground_state_certificates(&q64)));

    let mut extra = Vec::new();
    report(&mut results, 6, "stationary solution", guarded(|| stationary(&mut extra)));
    report(&mut results, 7, "Morawetz identity suite", guarded(morawetz_suite));

    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let cases: [(&'static str, InitialData); 4] = [
        ("0.9Q", InitialData::GroundStateMultiple { c: 0.9 }),
        ("0.5Q", InitialData::GroundStateMultiple { c: 0.5 }),
        ("offset-gaussian", offset_gaussian()),
        ("1.3Q", InitialData::GroundStateMultiple { c: 1.3 }),
    ];
    let runs: Vec<Option<Dynamics>> = cases
        .iter()
        .map(|(label, init)| {
            catch_unwind(AssertUnwindSafe(|| run_dynamics(&c64, &q64, label, init.clone(), &first.path().join(label)))).ok()
        })
        .collect();
    let find = |label: &str| runs.iter().flatten().find(|d| d.label == label);
    report(
        &mut results,
        8,
        "coercivity",
        guarded(|| match (find("0.9Q"), find("offset-gaussian")) {
            (Some(a), Some(b)) => coercivity(&[a, b]),
            _ => outcome(false, "a dynamics run failed".into()),
        }),
    );
    report(
        &mut results,
        9,
        "dichotomy proxy",
        guarded(|| match (find("0.9Q"), find("0.5Q"), find("offset-gaussian"), find("1.3Q")) {
            (Some(a), Some(b), Some(c), Some(d)) => dichotomy(&[a, b, c], d),
            _ => outcome(false, "a dynamics run failed".into()),
        }),
    );
    report(
        &mut results,
        10,
        "determinism",
        guarded(|| {
            for (label, init) in &cases {
                run_dynamics(&c64, &q64_again, label, init.clone(), &second.path().join(label));
            }
            let mut rerun_extra = Vec::new();
            rerun_extra.push(("stationary".to_string(), stationary_run(ModelParams::secondary(), 16.0, 32, 1e-4).1));
            let cfg = dynamics_config(InitialData::GroundStateMultiple { c: 1.0 });
            let e = derive_exponents(&p).unwrap();
            let mut all_extra = extra.clone();
            all_extra.push(("thresholds".into(), choquard::harness::thresholds_row(&cfg, &e, &q64)));
            rerun_extra.push(("thresholds".into(), choquard::harness::thresholds_row(&cfg, &e, &q64_again)));
            let labels: Vec<&str> = cases.iter().map(|(l, _)| *l).collect();
            determinism(first.path(), second.path(), &labels, &all_extra, &rerun_extra)
        }),
    );
    let failed: Vec<usize> = results.iter().filter(|r| !r.2).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass in {:.0}s", results.len() - failed.len(), results.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
