//! Residual checks shared by the `verify` command and the test suites.
//!
//! Each check builds its own small grid, runs one identity or oracle and
//! returns the measured residual next to its tolerance.

use crate::error::Result;
use crate::grid::{ComplexField, RealField, SpatialGrid};
use crate::integrator::Stepper;
use crate::model::ModelParams;
use crate::morawetz::{
    lattice_riesz_energy_fft, localization_check, morawetz_action, pairwise_double_sum, rhs_direct, rhs_expanded, CutoffField,
    MorawetzWeight, PairwiseOptions,
};
use crate::nonlinearity::{EnergyConvention, NonlinearityContext, NonlinearityOptions};
use crate::operators::{sobolev_seminorm, RieszOperator};
use crate::random::{random_smooth_field, Lcg64, PacketSpec};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub grid: String,
    pub value: f64,
    pub tolerance: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} grid={} value={:.6e} tolerance={} {}",
            self.name,
            self.grid,
            self.value,
            self.tolerance,
            if self.passed { "pass" } else { "fail" }
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

fn join(v: &[f64], f: impl Fn(f64) -> String) -> String {
    v.iter().map(|&x| f(x)).collect::<Vec<_>>().join(" ")
}

fn grid_label(g: &SpatialGrid) -> String {
    format!("{}^{} L={}", g.points_per_axis(), g.dim(), g.box_length())
}

fn context(params: ModelParams, l: f64, m: usize) -> Result<NonlinearityContext> {
    NonlinearityContext::new(params, SpatialGrid::new(params.dim, l, m)?, NonlinearityOptions::default())
}

/// Smooth localized field used by the identity checks: eight packets of unit
/// width within two units of the origin.
pub fn packet_field(grid: SpatialGrid, seed: u64, amplitude: f64) -> ComplexField {
    let spec = PacketSpec { packets: 8, spread: 2.0, width_min: 1.0, width_max: 1.0001, momentum: 1.0, amplitude };
    random_smooth_field(grid, &spec, &mut Lcg64::new(seed))
}

/// Off-centre Gaussian with a phase tilt; no symmetry of the weight survives.
pub fn offset_datum(grid: SpatialGrid, amplitude: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2 = (x[0] - 1.0).powi(2) + (x[1] - 0.5).powi(2) + x[2..].iter().map(|v| v * v).sum::<f64>();
        Complex64::from_polar(amplitude * (-r2 / 4.5).exp(), 0.3 * x[1])
    })
}

/// `|Σ|u|² h^N - Σ|û|² h^N/M^N|` relative to the mass.
pub fn parseval(params: ModelParams, l: f64, m: usize, seed: u64) -> Result<Check> {
    let ctx = context(params, l, m)?;
    let u = packet_field(*ctx.grid(), seed, 1.0);
    let s = ctx.fourier().forward(&u)?;
    let g = ctx.grid();
    let spectral = s.norm_sq();
    let physical = u.norm_sq();
    let value = (spectral - physical).abs() / physical;
    Ok(Check { name: "parseval".into(), grid: grid_label(g), value, tolerance: "< 1e-12".into(), passed: value < 1e-12, detail: String::new() })
}

/// Worst relative error of the Newtonian potential of a unit Gaussian against
/// `erf(r/(√2σ))/(4πr)` on `h <= r <= L/4`, with `L = 16σ`.
pub fn riesz_oracle(m: usize) -> Result<Check> {
    let sigma = 1.0;
    let g = SpatialGrid::new(3, 16.0 * sigma, m)?;
    let fo = crate::grid::Fourier::new(g);
    let norm = (2.0 * PI * sigma * sigma).powf(-1.5);
    let f = RealField::from_fn(g, |x| norm * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp());
    let v = RieszOperator::free_space(&fo, 2.0)?.apply_real(&fo, &f)?;
    let h = g.spacing();
    let mut worst: f64 = 0.0;
    for (i, rr) in g.radius_sq().iter().enumerate() {
        let r = rr.sqrt();
        if r >= h - 1e-12 && r <= 0.25 * g.box_length() + 1e-12 {
            let exact = statrs::function::erf::erf(r / (2f64.sqrt() * sigma)) / (4.0 * PI * r);
            worst = worst.max((v.values()[i] / exact - 1.0).abs());
        }
    }
    Ok(Check {
        name: "riesz_oracle".into(),
        grid: grid_label(&g),
        value: worst,
        tolerance: "< 1e-4".into(),
        passed: worst < 1e-4,
        detail: String::new(),
    })
}

/// Relative mass drift over `steps` Strang steps.
pub fn mass_drift(params: ModelParams, l: f64, m: usize, dt: f64, steps: usize) -> Result<Check> {
    let ctx = context(params, l, m)?;
    let u0 = offset_datum(*ctx.grid(), 0.9);
    let m0 = u0.norm_sq();
    let mut u = u0;
    let stepper = Stepper::new(&ctx, dt, false, true);
    let mut worst: f64 = 0.0;
    let chunk = 100;
    let mut done = 0;
    while done < steps {
        let n = chunk.min(steps - done);
        stepper.advance(&mut u, n)?;
        done += n;
        worst = worst.max((u.norm_sq() / m0 - 1.0).abs());
    }
    Ok(Check {
        name: "mass_drift".into(),
        grid: grid_label(ctx.grid()),
        value: worst,
        tolerance: "< 1e-10".into(),
        passed: worst < 1e-10,
        detail: format!("{steps} steps at dt={dt:e}"),
    })
}

/// Maximum relative drift of the energy under `convention` over `[0, t]`,
/// sampled every `stride` steps.
pub fn energy_drift(ctx: &NonlinearityContext, u0: &ComplexField, dt: f64, t: f64, stride: usize, convention: EnergyConvention) -> Result<f64> {
    let e0 = ctx.energy_with(u0, convention)?;
    let steps = (t / dt).round() as usize;
    let stepper = Stepper::new(ctx, dt, false, true);
    let mut u = u0.clone();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < steps {
        let n = stride.min(steps - done);
        stepper.advance(&mut u, n)?;
        done += n;
        worst = worst.max((ctx.energy_with(&u, convention)? - e0).abs());
    }
    Ok(worst / e0.abs())
}

/// Energy drift over `T = 1` at `dt` and `dt/2`. Passes when the drift at `dt`
/// is below `1e-6` and the halving ratio lies in `[3, 5]`.
pub fn energy_conservation(params: ModelParams, l: f64, m: usize, dt: f64, convention: EnergyConvention) -> Result<(Check, f64, f64)> {
    let ctx = context(params, l, m)?;
    let u0 = offset_datum(*ctx.grid(), 0.9);
    let coarse = energy_drift(&ctx, &u0, dt, 1.0, 10, convention)?;
    let fine = energy_drift(&ctx, &u0, 0.5 * dt, 1.0, 20, convention)?;
    let ratio = coarse / fine;
    let passed = coarse < 1e-6 && (3.0..=5.0).contains(&ratio);
    let name = match convention {
        EnergyConvention::TwoP => "energy_drift",
        EnergyConvention::P => "energy_drift_1_over_p",
    };
    let check = Check {
        name: name.into(),
        grid: grid_label(ctx.grid()),
        value: coarse,
        tolerance: "< 1e-6, halving ratio in [3, 5]".into(),
        passed,
        detail: format!("dt={dt:e}, ratio {ratio:.4}"),
    };
    Ok((check, coarse, ratio))
}

/// Centred difference of `M_a` along one numerical trajectory against
/// `rhs_direct`, for each dt in `dts`. Returns the relative errors.
pub fn morawetz_time_derivative_errors(ctx: &NonlinearityContext, u0: &ComplexField, radius: f64, dts: &[f64]) -> Result<Vec<f64>> {
    let weight = MorawetzWeight::build(ctx.grid(), radius)?;
    let exact = rhs_direct(ctx, u0, &weight)?.total();
    let mut errs = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut fwd = u0.clone();
        Stepper::new(ctx, dt, false, true).step(&mut fwd)?;
        let mut back = u0.clone();
        Stepper::new(ctx, -dt, false, true).step(&mut back)?;
        let fd = (morawetz_action(ctx.fourier(), &fwd, &weight)? - morawetz_action(ctx.fourier(), &back, &weight)?) / (2.0 * dt);
        errs.push(((fd - exact) / exact).abs());
    }
    Ok(errs)
}

/// Observed orders `log2(e_k/e_{k+1})` must all lie in `[1.8, 2.2]`.
///
/// The weight radius keeps the jumps of the third radial derivative of `a`,
/// at `R` and `2R`, where the field is small; there the discrete product rule
/// fails at `O(h)` and that floor would mask the time error.
pub fn morawetz_order(params: ModelParams, l: f64, m: usize, radius: f64) -> Result<Check> {
    let ctx = context(params, l, m)?;
    let u0 = packet_field(*ctx.grid(), 7, 1.0);
    let dts = [0.02, 0.01, 0.005];
    let errs = morawetz_time_derivative_errors(&ctx, &u0, radius, &dts)?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let worst = orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max);
    Ok(Check {
        name: "morawetz_dt_order".into(),
        grid: grid_label(ctx.grid()),
        value: worst,
        tolerance: "|order - 2| <= 0.2".into(),
        passed: worst <= 0.2,
        detail: format!("errors {}, orders {}", join(&errs, |e| format!("{e:.3e}")), join(&orders, |o| format!("{o:.4}"))),
    })
}

/// `|rhs_expanded - rhs_direct| / |rhs_direct|` on each grid size.
pub fn expanded_vs_direct(params: ModelParams, l: f64, sizes: &[usize], seed: u64) -> Result<Vec<f64>> {
    sizes
        .iter()
        .map(|&m| {
            let ctx = context(params, l, m)?;
            let w = MorawetzWeight::build(ctx.grid(), 1.5)?;
            let u = packet_field(*ctx.grid(), seed, 1.0);
            let d = rhs_direct(&ctx, &u, &w)?.total();
            let e = rhs_expanded(&ctx, &u, &w, &PairwiseOptions::default())?.total();
            Ok(((d - e) / d).abs())
        })
        .collect()
}

/// Expanded vs bracket form at `M` and `3M/2`: below `1e-3` and improving.
pub fn expanded_form(params: ModelParams, l: f64, m: usize) -> Result<Check> {
    let fine = 3 * m / 2 + (3 * m / 2) % 2;
    let errs = expanded_vs_direct(params, l, &[m, fine], 12345)?;
    Ok(Check {
        name: "rhs_expanded_vs_direct".into(),
        grid: format!("{m}^{0} and {fine}^{0} L={l}", params.dim),
        value: errs[0],
        tolerance: "< 1e-3, smaller on the finer grid".into(),
        passed: errs[0] < 1e-3 && errs[1] < errs[0],
        detail: format!("fine {:.3e}", errs[1]),
    })
}

pub fn localization(params: ModelParams) -> Result<Check> {
    let ctx = context(params, 16.0, 64)?;
    let cut = CutoffField::build(ctx.grid(), 6.0)?;
    let u = packet_field(*ctx.grid(), 4, 1.0);
    let chk = localization_check(ctx.fourier(), &u, &cut)?;
    Ok(Check {
        name: "localization_identity".into(),
        grid: grid_label(ctx.grid()),
        value: chk.residual,
        tolerance: "< 1e-10".into(),
        passed: chk.residual < 1e-10,
        detail: String::new(),
    })
}

/// Pure-virial double sum against twice the zero-padded FFT lattice energy.
pub fn pure_virial(params: ModelParams, l: f64, m: usize) -> Result<Check> {
    let ctx = context(params, l, m)?;
    let w = MorawetzWeight::pure_virial(ctx.grid());
    let u = packet_field(*ctx.grid(), 99, 1.0);
    let rho = ctx.density(&u)?;
    let direct = pairwise_double_sum(&rho, &w, params.alpha, &PairwiseOptions::default())?;
    let fft = 2.0 * lattice_riesz_energy_fft(&rho, params.alpha)?;
    let value = ((direct - fft) / fft).abs();
    Ok(Check {
        name: "pure_virial_pairwise_vs_fft".into(),
        grid: grid_label(ctx.grid()),
        value,
        tolerance: "< 1e-6".into(),
        passed: value < 1e-6,
        detail: String::new(),
    })
}

/// `u_λ(t, x) = λ^{e} u(λ²t, λx)` with `e = (2+2b+α)/(2(p-1))`, realized on a
/// paired grid of side `L/λ` with the same number of points.
pub fn rescale(u: &ComplexField, params: &ModelParams, lambda: f64) -> Result<ComplexField> {
    let g = u.grid();
    let paired = SpatialGrid::new(g.dim(), g.box_length() / lambda, g.points_per_axis())?;
    let e = (2.0 + 2.0 * params.b + params.alpha) / (2.0 * (params.p - 1.0));
    let f = lambda.powf(e);
    ComplexField::from_values(paired, u.values().iter().map(|z| z * f).collect())
}

/// Outcome of evolving, then rescaling, against rescaling, then evolving.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingResult {
    /// Relative L² difference at the matched final times.
    pub commutation: f64,
    /// Relative change of the critical Sobolev seminorm under the rescaling.
    pub hsc_change: f64,
}

pub fn scaling_symmetry(params: ModelParams, l: f64, m: usize, lambda: f64, dt: f64, steps: usize) -> Result<ScalingResult> {
    let base = context(params, l, m)?;
    let scaled = context(params, l / lambda, m)?;
    let u0 = offset_datum(*base.grid(), 0.9);
    let v0 = rescale(&u0, &params, lambda)?;
    let s_c = base.exponents().s_c;
    let h0 = sobolev_seminorm(base.fourier(), &u0, s_c)?;
    let h1 = sobolev_seminorm(scaled.fourier(), &v0, s_c)?;
    let mut u = u0;
    Stepper::new(&base, dt, false, true).advance(&mut u, steps)?;
    let mut v = v0;
    Stepper::new(&scaled, dt / (lambda * lambda), false, true).advance(&mut v, steps)?;
    let u_scaled = rescale(&u, &params, lambda)?;
    let commutation = (v.sub(&u_scaled)?.norm_sq() / u_scaled.norm_sq()).sqrt();
    Ok(ScalingResult { commutation, hsc_change: (h1 / h0 - 1.0).abs() })
}

/// Settings for [`identity_suite`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteConfig {
    pub params: ModelParams,
    /// Grid for the pairwise checks.
    pub grid_points: usize,
    pub box_length: f64,
    pub energy: EnergyConvention,
}

/// The full set of checks run by `verify`.
pub fn identity_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let p = cfg.params;
    let (l, m) = (cfg.box_length, cfg.grid_points);
    Ok(vec![
        parseval(p, l, m, 1)?,
        riesz_oracle(32)?,
        mass_drift(p, 12.0, 16, 1e-3, 10_000)?,
        energy_conservation(p, 12.0, 16, 1e-3, cfg.energy)?.0,
        morawetz_order(p, 16.0, 48, 3.5)?,
        expanded_form(p, l, m)?,
        localization(p)?,
        pure_virial(p, l, m)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        let p = ModelParams::reference();
        assert!(parseval(p, 8.0, 16, 3).unwrap().passed);
        assert!(riesz_oracle(32).unwrap().passed);
        assert!(localization(p).unwrap().passed);
    }

    #[test]
    fn rescale_round_trip() {
        let p = ModelParams::reference();
        let g = SpatialGrid::new(3, 8.0, 8).unwrap();
        let u = offset_datum(g, 1.0);
        let back = rescale(&rescale(&u, &p, 2.0).unwrap(), &p, 0.5).unwrap();
        assert_eq!(back.grid(), u.grid());
        assert!(back.sub(&u).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn check_display_is_one_line() {
        let c = Check { name: "x".into(), grid: "8^3".into(), value: 0.5, tolerance: "< 1".into(), passed: true, detail: String::new() };
        assert_eq!(c.to_string(), "x grid=8^3 value=5.000000e-1 tolerance=< 1 pass");
    }
}
