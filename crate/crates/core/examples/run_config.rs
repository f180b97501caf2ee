//! Parses a run config, shows the resolved echo and a rejected key.

use choquard::harness::RunConfig;

const TEXT: &str = "\
# offset Gaussian on a coarse grid
grid.M = 64
initial.kind = gaussian
initial.amplitude = 1.0
initial.width = 0.7071067811865476
initial.center = 1, 0, 0
evolve.dt = 0.005
evolve.saturation = off
";

fn main() {
    match RunConfig::parse(TEXT) {
        Ok(cfg) => print!("{}", cfg.to_text()),
        Err(e) => println!("unexpected: {e}"),
    }
    if let Err(e) = RunConfig::parse("grid.M = 64\ngrid.N = 64\n") {
        println!("rejected: {e}");
    }
}
