//! The Choquard nonlinearity `F(u) = (I_α * w|u|^p) w |u|^{p-2} u` with `w = |x|^b`,
//! its potential functional and the conserved quantities.

use crate::error::Result;
use crate::grid::{integrate_product, weight_field, ComplexField, Fourier, RealField, SpatialGrid, WeightRegularization};
use crate::model::{admissible_exponents, derive_exponents, DerivedExponents, ModelParams};
use crate::operators::{gradient_norm_sq, RieszKernel, RieszOperator};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Coefficient in front of `P(u)` in the energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyConvention {
    /// `½‖∇u‖² - P/(2p)`: the Hamiltonian of the flow, conserved.
    TwoP,
    /// `½‖∇u‖² - P/p`: not conserved; kept as a diagnostic.
    P,
}

/// Discretization choices for the nonlinear term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearityOptions {
    pub weight: WeightRegularization,
    pub kernel: RieszKernel,
}

impl Default for NonlinearityOptions {
    fn default() -> Self {
        Self { weight: WeightRegularization::LatticeCorrected, kernel: RieszKernel::FreeSpace }
    }
}

/// Mass, kinetic term, potential functional and both energies of one field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Functionals {
    pub mass: f64,
    pub grad_sq: f64,
    pub potential: f64,
    pub energy_2p: f64,
    pub energy_p: f64,
}

/// `|u|^e` for the exponents that occur (e >= 0), with `0^0 = 1`.
#[inline]
pub(crate) fn pow_mod(a: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        a
    } else if e == 2.0 {
        a * a
    } else if e == 3.0 {
        a * a * a
    } else {
        a.powf(e)
    }
}

/// Everything needed to evaluate `F` on one grid. Read-only after construction.
#[derive(Debug)]
pub struct NonlinearityContext {
    params: ModelParams,
    exps: DerivedExponents,
    fourier: Arc<Fourier>,
    weight: RealField,
    options: NonlinearityOptions,
    riesz: RieszOperator,
}

impl NonlinearityContext {
    /// Validates `params` and precomputes the weight and the Riesz multiplier.
    pub fn new(params: ModelParams, grid: SpatialGrid, options: NonlinearityOptions) -> Result<Self> {
        Self::with_fourier(params, Arc::new(Fourier::new(grid)), options)
    }

    pub fn with_fourier(params: ModelParams, fourier: Arc<Fourier>, options: NonlinearityOptions) -> Result<Self> {
        let exps = admissible_exponents(&params)?;
        Self::build(params, exps, fourier, options)
    }

    /// Skips admissibility; only for probing inadmissible parameters (e.g. b = 0).
    pub fn unchecked(params: ModelParams, grid: SpatialGrid, options: NonlinearityOptions) -> Result<Self> {
        let exps = derive_exponents(&params)?;
        Self::build(params, exps, Arc::new(Fourier::new(grid)), options)
    }

    fn build(params: ModelParams, exps: DerivedExponents, fourier: Arc<Fourier>, options: NonlinearityOptions) -> Result<Self> {
        let grid = *fourier.grid();
        if grid.dim() != params.dim {
            return Err(crate::Error::GridMismatch(format!("grid dimension {} vs N = {}", grid.dim(), params.dim)));
        }
        let weight = weight_field(&grid, params.b, options.weight)?;
        let riesz = RieszOperator::new(&fourier, params.alpha, options.kernel)?;
        Ok(Self { params, exps, fourier, weight, options, riesz })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn exponents(&self) -> &DerivedExponents {
        &self.exps
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.fourier.grid()
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn fourier_arc(&self) -> Arc<Fourier> {
        self.fourier.clone()
    }

    pub fn weight(&self) -> &RealField {
        &self.weight
    }

    pub fn options(&self) -> &NonlinearityOptions {
        &self.options
    }

    pub fn riesz(&self) -> &RieszOperator {
        &self.riesz
    }

    /// ρ = w |u|^p.
    pub fn density(&self, u: &ComplexField) -> Result<RealField> {
        self.grid().check_same(u.grid())?;
        let p = self.params.p;
        let values = u
            .values()
            .par_iter()
            .zip(self.weight.values().par_iter())
            .map(|(z, w)| w * pow_mod(z.norm(), p))
            .collect();
        RealField::from_values(*self.grid(), values)
    }

    /// V = I_α * ρ.
    pub fn hartree_potential(&self, u: &ComplexField) -> Result<RealField> {
        let rho = self.density(u)?;
        self.riesz.apply_real(&self.fourier, &rho)
    }

    /// (ρ, V) together.
    pub fn density_and_potential(&self, u: &ComplexField) -> Result<(RealField, RealField)> {
        let rho = self.density(u)?;
        let v = self.riesz.apply_real(&self.fourier, &rho)?;
        Ok((rho, v))
    }

    /// W = V w |u|^{p-2}, so that F(u) = W u.
    pub fn phase_potential(&self, u: &ComplexField) -> Result<RealField> {
        let v = self.hartree_potential(u)?;
        Ok(self.phase_from(u, &v))
    }

    fn phase_from(&self, u: &ComplexField, v: &RealField) -> RealField {
        let e = self.params.p - 2.0;
        let values = u
            .values()
            .par_iter()
            .zip(self.weight.values().par_iter())
            .zip(v.values().par_iter())
            .map(|((z, w), v)| v * w * pow_mod(z.norm(), e))
            .collect();
        RealField::from_values(*self.grid(), values).expect("same grid")
    }

    /// F(u) = V w |u|^{p-2} u.
    pub fn apply_f(&self, u: &ComplexField) -> Result<ComplexField> {
        let w = self.phase_potential(u)?;
        u.mul_real(&w)
    }

    /// P(u) = ∫ V ρ.
    pub fn potential_functional(&self, u: &ComplexField) -> Result<f64> {
        let (rho, v) = self.density_and_potential(u)?;
        Ok(integrate_product(rho.values(), v.values(), self.grid()))
    }

    pub fn mass(&self, u: &ComplexField) -> f64 {
        u.norm_sq()
    }

    /// Conserved energy `½‖∇u‖² - P/(2p)`.
    pub fn energy(&self, u: &ComplexField) -> Result<f64> {
        self.energy_with(u, EnergyConvention::TwoP)
    }

    pub fn energy_with(&self, u: &ComplexField, convention: EnergyConvention) -> Result<f64> {
        let f = self.functionals(u)?;
        Ok(match convention {
            EnergyConvention::TwoP => f.energy_2p,
            EnergyConvention::P => f.energy_p,
        })
    }

    pub fn functionals(&self, u: &ComplexField) -> Result<Functionals> {
        let grad_sq = gradient_norm_sq(&self.fourier, u)?;
        let potential = self.potential_functional(u)?;
        let p = self.params.p;
        Ok(Functionals {
            mass: u.norm_sq(),
            grad_sq,
            potential,
            energy_2p: 0.5 * grad_sq - potential / (2.0 * p),
            energy_p: 0.5 * grad_sq - potential / p,
        })
    }

    /// `∫ (I_α * ρ1) ρ2` for two real densities.
    pub fn bilinear(&self, rho1: &RealField, rho2: &RealField) -> Result<f64> {
        let v = self.riesz.apply_real(&self.fourier, rho1)?;
        self.grid().check_same(rho2.grid())?;
        Ok(integrate_product(v.values(), rho2.values(), self.grid()))
    }

    /// Multiplies `u` in place by `e^{iτW}` with `W` evaluated on `u` itself.
    /// Exact flow of `i u_t = -W(|u|) u`, since `|u|` is invariant along it.
    pub fn nonlinear_phase_in_place(&self, u: &mut ComplexField, tau: f64) -> Result<()> {
        let w = self.phase_potential(u)?;
        u.values_mut().par_iter_mut().zip(w.values().par_iter()).for_each(|(z, w)| {
            *z *= Complex64::from_polar(1.0, tau * w);
        });
        Ok(())
    }
}
