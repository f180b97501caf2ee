//! One sub-threshold run of 0.7·Q on a coarse grid, with the threshold
//! classification, a few diagnostics rows and the verdict.
//!
//! Usage: dichotomy_run [c] [T]

use choquard::harness::{context, initial_field, run_evolution, InitialData, RunConfig};
use choquard::ground_state::{petviashvili_solve, SolverConfig};

fn main() -> choquard::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let c = args.first().copied().unwrap_or(0.7);
    let t = args.get(1).copied().unwrap_or(10.0);
    let cfg = RunConfig {
        grid_points: 48,
        box_length: 24.0,
        dt: 0.005,
        t_final: t,
        diag_stride: 100,
        snapshot_every: 0.5,
        initial: InitialData::GroundStateMultiple { c },
        ..RunConfig::default()
    };
    let ctx = context(&cfg)?;
    let gs = petviashvili_solve(&ctx, &SolverConfig::default())?;
    let u0 = initial_field(&cfg, &ctx, &gs.profile)?;
    let dir = std::env::temp_dir().join("choquard_dichotomy_run");
    let run = run_evolution(&cfg, &ctx, &u0, &gs.thresholds(), &dir)?;
    println!("class at t=0: {} (ME ratio {:.4}, kinetic ratio {:.4})", run.classification.class.name(), run.classification.me_ratio, run.classification.kinetic_ratio);
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "t", "mass", "energy", "|∇u|", "local mass");
    for r in &run.report.records {
        println!("{:6.2} {:12.8} {:12.8} {:12.6} {:12.4e}", r.t, r.mass, r.energy_2p, r.grad_l2, r.local_mass);
    }
    print!("{}", run.verdict);
    println!("outputs in {}", dir.display());
    Ok(())
}
