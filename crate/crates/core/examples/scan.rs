//! Amplitude scan over c·Q on a coarse grid through the harness, printing the
//! table and the monotone-boundary flag.

use choquard::harness::{cmd_ground_state, cmd_scan, RunConfig};

fn main() -> choquard::Result<()> {
    let dir = std::env::temp_dir().join("choquard_scan");
    let cfg = RunConfig {
        grid_points: 32,
        box_length: 20.0,
        dt: 0.005,
        t_final: 2.0,
        diag_stride: 20,
        snapshot_every: 0.5,
        scan_amplitudes: vec![1.4, 0.5, 0.9],
        ..RunConfig::default()
    };
    let mut out = std::io::stdout().lock();
    cmd_ground_state(&cfg, &dir, &mut std::io::sink())?;
    cmd_scan(&cfg, &dir, &mut out)?;
    println!("table in {}", dir.join("scan.csv").display());
    Ok(())
}
