//! Ground state of the reference set on a 64³ grid, its thresholds and the
//! radial certificate for the Pohozaev identities.

use choquard::grid::SpatialGrid;
use choquard::ground_state::radial::{solve_radial, RadialConfig};
use choquard::ground_state::{petviashvili_solve, SolverConfig};
use choquard::model::ModelParams;
use choquard::nonlinearity::{NonlinearityContext, NonlinearityOptions};

fn main() -> choquard::Result<()> {
    let params = ModelParams::reference();
    let ctx = NonlinearityContext::new(params, SpatialGrid::new(3, 24.0, 64)?, NonlinearityOptions::default())?;
    let gs = petviashvili_solve(&ctx, &SolverConfig::default())?;
    let e = *ctx.exponents();
    println!("3D 64³, L=24: {} iterations, residual {:.2e}", gs.iterations, gs.residual);
    println!("  M(Q) = {:.8}  |∇Q|² = {:.8}  E(Q) = {:.8}", gs.mass, gs.grad_sq, gs.energy);
    println!("  C0 = {:.8}  ME threshold = {:.8}  kinetic threshold = {:.8}", gs.c0, gs.me_threshold, gs.k_threshold);
    let po = gs.pohozaev(&e, params.p);
    println!("  Pohozaev ratios {:.6} {:.6} {:.6}", po.kinetic_mass, po.potential_kinetic, po.energy);
    println!("  cube-symmetry defect {:.2e}", gs.symmetry_defect());

    let radial = solve_radial(&params, &RadialConfig::default())?;
    let rp = radial.pohozaev(&e, params.p);
    println!("radial, {} nodes: {} iterations", radial.radii.len(), radial.iterations);
    println!("  M(Q) = {:.8}  |∇Q|² = {:.8}  C0 = {:.8}", radial.mass, radial.grad_sq, radial.sharp_constant(&e));
    println!("  Pohozaev deviations {:.2e} {:.2e} {:.2e}", rp.kinetic_mass - 1.0, rp.potential_kinetic - 1.0, rp.energy - 1.0);
    Ok(())
}
