//! Newtonian potential of a Gaussian with the free-space and the periodic
//! kernel, against `erf(r/√2)/(4πr)` along the x axis.

use choquard::grid::{Fourier, RealField, SpatialGrid};
use choquard::operators::{RieszKernel, RieszOperator};
use std::f64::consts::PI;

fn main() -> choquard::Result<()> {
    let grid = SpatialGrid::new(3, 16.0, 32)?;
    let fourier = Fourier::new(grid);
    let norm = (2.0 * PI).powf(-1.5);
    let rho = RealField::from_fn(grid, |x| norm * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp());
    let free = RieszOperator::new(&fourier, 2.0, RieszKernel::FreeSpace)?.apply_real(&fourier, &rho)?;
    let periodic = RieszOperator::new(&fourier, 2.0, RieszKernel::Periodic)?.apply_real(&fourier, &rho)?;
    let m = grid.points_per_axis();
    println!("{:>6} {:>14} {:>14} {:>14}", "x", "exact", "free rel err", "periodic rel err");
    for j in (m / 2 + 1)..=(3 * m / 4) {
        let x = grid.coordinate(j);
        // row-major, x is the slowest axis
        let idx = (j * m + m / 2) * m + m / 2;
        let exact = statrs::function::erf::erf(x / 2f64.sqrt()) / (4.0 * PI * x);
        println!(
            "{x:6.2} {exact:14.8e} {:14.3e} {:14.3e}",
            free.values()[idx] / exact - 1.0,
            periodic.values()[idx] / exact - 1.0
        );
    }
    Ok(())
}
