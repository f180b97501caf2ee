//! Fourier multipliers: Riesz potential, free propagator, derivatives, Sobolev norms.
//!
//! All multipliers act on the unnormalized forward coefficients described in
//! [`crate::grid`] and are applied as `F^{-1}[m(k) F f]`.

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Fourier, RealField, SpatialGrid};
use crate::model::riesz_constant;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::{gamma, gamma_lr};
use std::f64::consts::PI;

/// Real multiplier table with an explicit value at k = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Multiplier {
    /// `symbol(|k|²)` on nonzero modes and `zero_mode` at k = 0.
    pub fn from_symbol(fourier: &Fourier, symbol: impl Fn(f64) -> f64 + Sync, zero_mode: f64) -> Self {
        let values = fourier
            .k_sq()
            .par_iter()
            .map(|&k2| if k2 == 0.0 { zero_mode } else { symbol(k2) })
            .collect();
        Self { grid: *fourier.grid(), values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_mode(&self) -> f64 {
        self.values[0]
    }

    pub fn apply(&self, fourier: &Fourier, f: &ComplexField) -> Result<ComplexField> {
        self.grid.check_same(f.grid())?;
        fourier.apply_multiplier(f, &self.values)
    }
}

/// Which kernel realizes `I_α * f = K |x|^{α-N} * f` on the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RieszKernel {
    /// Free-space kernel restricted to minimum-image separations. A density
    /// supported in a sub-box of side L/2 sees exactly the whole-space
    /// convolution, evaluated without padding by an Ewald split: the smooth
    /// long-range part is sampled in real space, the remainder is a rapidly
    /// converging multiplier.
    FreeSpace,
    /// Torus convolution: symbol `|k|^{-α}` with the zero mode set to 0. The
    /// result differs from the free-space potential by a constant plus a
    /// quadratic-in-x correction of order `M(ρ)/L^{N-α+2}`.
    Periodic,
}

impl RieszKernel {
    pub fn name(&self) -> &'static str {
        match self {
            RieszKernel::FreeSpace => "free",
            RieszKernel::Periodic => "periodic",
        }
    }
}

/// Convolution with the Riesz potential I_α as a precomputed multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct RieszOperator {
    alpha: f64,
    kernel: RieszKernel,
    multiplier: Multiplier,
}

impl RieszOperator {
    pub fn new(fourier: &Fourier, alpha: f64, kernel: RieszKernel) -> Result<Self> {
        let n = fourier.grid().dim() as f64;
        if !(alpha > 0.0 && alpha < n) {
            return Err(Error::InvalidArgument(format!("Riesz order {alpha} outside (0, {n})")));
        }
        let multiplier = match kernel {
            RieszKernel::Periodic => Multiplier::from_symbol(fourier, |k2| k2.powf(-0.5 * alpha), 0.0),
            RieszKernel::FreeSpace => free_space_multiplier(fourier, alpha),
        };
        Ok(Self { alpha, kernel, multiplier })
    }

    pub fn periodic(fourier: &Fourier, alpha: f64) -> Result<Self> {
        Self::new(fourier, alpha, RieszKernel::Periodic)
    }

    pub fn free_space(fourier: &Fourier, alpha: f64) -> Result<Self> {
        Self::new(fourier, alpha, RieszKernel::FreeSpace)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kernel(&self) -> RieszKernel {
        self.kernel
    }

    pub fn multiplier(&self) -> &Multiplier {
        &self.multiplier
    }

    pub fn apply(&self, fourier: &Fourier, f: &ComplexField) -> Result<ComplexField> {
        self.multiplier.apply(fourier, f)
    }

    /// Real input to real output; the symbol is real and even.
    pub fn apply_real(&self, fourier: &Fourier, f: &RealField) -> Result<RealField> {
        self.multiplier.grid.check_same(f.grid())?;
        let mut v: Vec<Complex64> = f.values().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fourier.multiply_in_place(&mut v, self.multiplier.values());
        RealField::from_values(*f.grid(), v.into_iter().map(|z| z.re).collect())
    }
}

/// Splitting scale of the Ewald decomposition. The multiplier part decays like
/// `e^{-s0 k²}`, the real-space part like `e^{-r²/(4 s0)}`; s0 = L h/(4π)
/// balances both at `e^{-πM/4}`.
fn ewald_scale(grid: &SpatialGrid) -> f64 {
    grid.box_length() * grid.spacing() / (4.0 * PI)
}

fn free_space_multiplier(fourier: &Fourier, alpha: f64) -> Multiplier {
    let grid = *fourier.grid();
    let n = grid.dim() as f64;
    let s0 = ewald_scale(&grid);
    let a2 = 0.5 * alpha;
    // K|x|^{α-N} = (1/Γ(α/2)) ∫_0^∞ t^{α/2-1} heat_t(x) dt, split at t = s0.
    let short = Multiplier::from_symbol(fourier, |k2| gamma_lr(a2, s0 * k2) * k2.powf(-a2), s0.powf(a2) / gamma(a2 + 1.0));
    let k = riesz_constant(grid.dim(), alpha);
    let c = 0.5 * (n - alpha);
    let origin = (4.0 * PI).powf(-0.5 * n) * s0.powf(-c) / (c * gamma(a2));
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let offset_sq: Vec<f64> = (0..m).map(|j| (grid.mode(j) as f64 * h).powi(2)).collect();
    let r2 = grid.separable_sum(&offset_sq);
    let mut long: Vec<Complex64> = r2
        .par_iter()
        .map(|&r2| {
            let v = if r2 == 0.0 { origin } else { k * r2.powf(-c) * gamma_lr(c, r2 / (4.0 * s0)) };
            Complex64::new(v, 0.0)
        })
        .collect();
    fourier.forward_in_place(&mut long);
    let dv = grid.cell_volume();
    let values = short.values.iter().zip(&long).map(|(s, l)| s + l.re * dv).collect();
    Multiplier { grid, values }
}

/// `e^{itΔ}`: û(k) ↦ e^{-i|k|² t} û(k).
pub fn free_propagate(fourier: &Fourier, u: &ComplexField, t: f64) -> Result<ComplexField> {
    fourier.grid().check_same(u.grid())?;
    let phase: Vec<Complex64> = fourier.k_sq().iter().map(|&k2| Complex64::from_polar(1.0, -k2 * t)).collect();
    let mut v = u.values().to_vec();
    fourier.multiply_complex_in_place(&mut v, &phase);
    ComplexField::from_values(*u.grid(), v)
}

/// Spectral partial derivatives `∂_a u`, a = 0..N.
///
/// The Nyquist mode is dropped so real fields have real derivatives; the
/// kinetic energy from [`gradient_norm_sq`] still counts it with `|k|² = (π/h)²`.
pub fn gradient(fourier: &Fourier, u: &ComplexField) -> Result<Vec<ComplexField>> {
    fourier.grid().check_same(u.grid())?;
    let grid = *u.grid();
    let mut hat = u.values().to_vec();
    fourier.forward_in_place(&mut hat);
    let m = grid.points_per_axis();
    (0..grid.dim())
        .map(|axis| {
            let stride = m.pow((grid.dim() - 1 - axis) as u32);
            let k = fourier.k_axis();
            let nyq = m / 2;
            let mut d: Vec<Complex64> = hat
                .par_iter()
                .enumerate()
                .map(|(i, z)| {
                    let j = (i / stride) % m;
                    if j == nyq {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * Complex64::new(0.0, k[j])
                    }
                })
                .collect();
            fourier.inverse_in_place(&mut d);
            ComplexField::from_values(grid, d)
        })
        .collect()
}

/// Spectral Laplacian, multiplier `-|k|²`.
pub fn laplacian(fourier: &Fourier, u: &ComplexField) -> Result<ComplexField> {
    let m: Vec<f64> = fourier.k_sq().iter().map(|k| -k).collect();
    fourier.apply_multiplier(u, &m)
}

/// `(h^N/M^N) Σ_k |k|^{2s} |û(k)|²` with `|0|^0 = 1`.
fn weighted_spectral_sum(fourier: &Fourier, u: &ComplexField, s: f64) -> Result<f64> {
    fourier.grid().check_same(u.grid())?;
    let mut hat = u.values().to_vec();
    fourier.forward_in_place(&mut hat);
    let g = u.grid();
    let total: f64 = hat
        .iter()
        .zip(fourier.k_sq())
        .map(|(z, &k2)| {
            let w = if s == 0.0 {
                1.0
            } else if s == 1.0 {
                k2
            } else if k2 == 0.0 {
                0.0
            } else {
                k2.powf(s)
            };
            w * z.norm_sqr()
        })
        .sum();
    Ok(total * g.cell_volume() / g.len() as f64)
}

/// Homogeneous Sobolev seminorm `‖u‖_{Ḣ^s}`.
pub fn sobolev_seminorm(fourier: &Fourier, u: &ComplexField, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("Sobolev order {s} must be >= 0")));
    }
    Ok(weighted_spectral_sum(fourier, u, s)?.sqrt())
}

/// `∫|∇u|²` from spectral weights.
pub fn gradient_norm_sq(fourier: &Fourier, u: &ComplexField) -> Result<f64> {
    weighted_spectral_sum(fourier, u, 1.0)
}

/// `⟨(1-Δ)u, u⟩ = ‖u‖² + ‖∇u‖²`.
pub fn h1_norm_sq(fourier: &Fourier, u: &ComplexField) -> Result<f64> {
    fourier.grid().check_same(u.grid())?;
    let mut hat = u.values().to_vec();
    fourier.forward_in_place(&mut hat);
    let g = u.grid();
    let total: f64 = hat.iter().zip(fourier.k_sq()).map(|(z, k2)| (1.0 + k2) * z.norm_sqr()).sum();
    Ok(total * g.cell_volume() / g.len() as f64)
}
