//! The residual checks behind `choquard verify`, including the 1/p energy
//! coefficient hook that is expected to fail.

use choquard::harness::suite::{energy_conservation, identity_suite, SuiteConfig};
use choquard::model::ModelParams;
use choquard::nonlinearity::EnergyConvention;

fn main() -> choquard::Result<()> {
    let cfg = SuiteConfig { params: ModelParams::reference(), grid_points: 16, box_length: 8.0, energy: EnergyConvention::TwoP };
    for check in identity_suite(&cfg)? {
        println!("{check}");
    }
    let (hook, _, _) = energy_conservation(cfg.params, 12.0, 16, 1e-3, EnergyConvention::P)?;
    println!("{hook}");
    Ok(())
}
