//! Ground state of `-ΔQ + Q = (I_α * w|Q|^p) w |Q|^{p-2} Q` by Petviashvili
//! iteration, the sharp Gagliardo-Nirenberg constant and the dichotomy thresholds.

pub mod radial;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, RealField};
use crate::model::DerivedExponents;
use crate::nonlinearity::NonlinearityContext;
use crate::operators::{gradient_norm_sq, h1_norm_sq, laplacian};
use num_complex::Complex64;
use rayon::prelude::*;

/// Initial profile of the iteration, centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedProfile {
    /// `e^{-|x|²}`
    Gaussian,
    /// `e^{-|x|²/4}`
    WideGaussian,
    /// `sech(|x|)`
    Sech,
}

impl SeedProfile {
    pub const ALL: [SeedProfile; 3] = [SeedProfile::Gaussian, SeedProfile::WideGaussian, SeedProfile::Sech];

    pub fn id(&self) -> &'static str {
        match self {
            SeedProfile::Gaussian => "gauss1",
            SeedProfile::WideGaussian => "gauss2",
            SeedProfile::Sech => "sech",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.id() == id)
    }

    fn value(&self, r2: f64) -> f64 {
        match self {
            SeedProfile::Gaussian => (-r2).exp(),
            SeedProfile::WideGaussian => (-0.25 * r2).exp(),
            SeedProfile::Sech => 1.0 / r2.sqrt().cosh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: SeedProfile,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, seed: SeedProfile::Gaussian }
    }
}

/// Converged profile with its norms and derived thresholds.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub profile: ComplexField,
    pub mass: f64,
    pub grad_sq: f64,
    pub potential: f64,
    /// `½‖∇Q‖² - P(Q)/(2p)`.
    pub energy: f64,
    pub c0: f64,
    /// `M(Q)^{1-s_c} E(Q)^{s_c}`.
    pub me_threshold: f64,
    /// `‖Q‖^{1-s_c} ‖∇Q‖^{s_c}`.
    pub k_threshold: f64,
    /// `‖ΔQ - Q + F(Q)‖ / ‖Q‖_{H¹}`.
    pub residual: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub seed: SeedProfile,
    /// Relative H¹ update per iteration.
    pub trace: Vec<f64>,
}

/// The three identities a ground state satisfies, as ratios equal to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PohozaevRatios {
    /// `‖∇Q‖² A / (B ‖Q‖²)`.
    pub kinetic_mass: f64,
    /// `P(Q) B / (2p ‖∇Q‖²)`.
    pub potential_kinetic: f64,
    /// `E(Q) / ((½ - 1/B) ‖∇Q‖²)`.
    pub energy: f64,
}

impl PohozaevRatios {
    pub fn from_norms(exps: &DerivedExponents, p: f64, mass: f64, grad_sq: f64, potential: f64) -> Self {
        let (a, b) = (exps.mass_exp, exps.kinetic_exp);
        let energy = 0.5 * grad_sq - potential / (2.0 * p);
        Self {
            kinetic_mass: grad_sq * a / (b * mass),
            potential_kinetic: potential * b / (2.0 * p * grad_sq),
            energy: energy / ((0.5 - 1.0 / b) * grad_sq),
        }
    }

    /// Largest deviation from 1.
    pub fn max_deviation(&self) -> f64 {
        [self.kinetic_mass, self.potential_kinetic, self.energy].iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Threshold pair for the dichotomy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub me: f64,
    pub kinetic: f64,
}

/// `M^{1-s_c} E^{s_c}`; NaN when `E <= 0`.
pub fn mass_energy_product(exps: &DerivedExponents, mass: f64, energy: f64) -> f64 {
    if energy > 0.0 {
        mass.powf(1.0 - exps.s_c) * energy.powf(exps.s_c)
    } else if energy == 0.0 {
        0.0
    } else {
        f64::NAN
    }
}

/// `‖f‖^{1-s_c} ‖∇f‖^{s_c}`.
pub fn kinetic_product(exps: &DerivedExponents, mass: f64, grad_sq: f64) -> f64 {
    mass.sqrt().powf(1.0 - exps.s_c) * grad_sq.sqrt().powf(exps.s_c)
}

/// Thresholds from the norms of Q; errors when `B <= 2`.
pub fn thresholds(exps: &DerivedExponents, mass: f64, grad_sq: f64, energy: f64) -> Result<Thresholds> {
    if exps.kinetic_exp <= 2.0 {
        return Err(Error::InvalidParams(format!("B = {} <= 2", exps.kinetic_exp)));
    }
    Ok(Thresholds { me: mass_energy_product(exps, mass, energy), kinetic: kinetic_product(exps, mass, grad_sq) })
}

/// `P(f) / (‖f‖^A ‖∇f‖^B)`, the Weinstein functional.
pub fn weinstein_functional(ctx: &NonlinearityContext, f: &ComplexField) -> Result<f64> {
    let e = ctx.exponents();
    let p = ctx.potential_functional(f)?;
    let m = f.norm_sq();
    let g = gradient_norm_sq(ctx.fourier(), f)?;
    Ok(p / (m.sqrt().powf(e.mass_exp) * g.sqrt().powf(e.kinetic_exp)))
}

/// Sharp constant `C0 = P(Q)/(‖Q‖^A ‖∇Q‖^B)`.
pub fn sharp_constant(ctx: &NonlinearityContext, q: &ComplexField) -> Result<f64> {
    weinstein_functional(ctx, q)
}

/// Samples `seed` on the context grid.
pub fn seed_field(ctx: &NonlinearityContext, seed: SeedProfile) -> ComplexField {
    ComplexField::from_fn(*ctx.grid(), |x| Complex64::new(seed.value(x.iter().map(|v| v * v).sum()), 0.0))
}

/// Petviashvili iteration `Q <- γ^s (1-Δ)^{-1} F(Q)`, `γ = ⟨(1-Δ)Q,Q⟩/⟨F(Q),Q⟩`,
/// `s = (2p-1)/(2p-2)`. Iterates are kept real.
pub fn petviashvili_solve(ctx: &NonlinearityContext, config: &SolverConfig) -> Result<GroundState> {
    petviashvili_from(ctx, seed_field(ctx, config.seed), config)
}

/// As [`petviashvili_solve`] from an arbitrary real initial profile.
pub fn petviashvili_from(ctx: &NonlinearityContext, initial: ComplexField, config: &SolverConfig) -> Result<GroundState> {
    ctx.grid().check_same(initial.grid())?;
    let fourier = ctx.fourier();
    let p = ctx.params().p;
    let s = (2.0 * p - 1.0) / (2.0 * p - 2.0);
    let resolvent: Vec<f64> = fourier.k_sq().iter().map(|k| 1.0 / (1.0 + k)).collect();
    let mut q = real_projection(&initial);
    let mut trace = Vec::new();
    let mut gamma = f64::NAN;
    for it in 1..=config.max_iter {
        let nq = ctx.apply_f(&q)?;
        let lhs = h1_norm_sq(fourier, &q)?;
        let rhs = nq.inner_re(&q)?;
        gamma = lhs / rhs;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::DegenerateSeed(gamma));
        }
        let mut next = fourier.apply_multiplier(&nq, &resolvent)?;
        let scale = gamma.powf(s);
        next = real_projection(&next.scaled(Complex64::new(scale, 0.0)));
        let update = (h1_norm_sq(fourier, &next.sub(&q)?)? / lhs).sqrt();
        trace.push(update);
        q = next;
        if !update.is_finite() {
            break;
        }
        if update < config.tol && (gamma - 1.0).abs() < config.tol {
            return finish(ctx, q, gamma, it, config.seed, trace);
        }
    }
    let last_update = trace.last().copied().unwrap_or(f64::NAN);
    Err(Error::NoConvergence { iterations: trace.len(), last_update, gamma, trace })
}

fn real_projection(f: &ComplexField) -> ComplexField {
    let v: Vec<Complex64> = f.values().par_iter().map(|z| Complex64::new(z.re, 0.0)).collect();
    ComplexField::from_values(*f.grid(), v).expect("same grid")
}

fn finish(ctx: &NonlinearityContext, q: ComplexField, gamma: f64, iterations: usize, seed: SeedProfile, trace: Vec<f64>) -> Result<GroundState> {
    let fourier = ctx.fourier();
    let exps = *ctx.exponents();
    let f = ctx.functionals(&q)?;
    let residual = equation_residual(ctx, &q)?;
    let c0 = f.potential / (f.mass.sqrt().powf(exps.mass_exp) * f.grad_sq.sqrt().powf(exps.kinetic_exp));
    let th = thresholds(&exps, f.mass, f.grad_sq, f.energy_2p)?;
    let _ = fourier;
    Ok(GroundState {
        profile: q,
        mass: f.mass,
        grad_sq: f.grad_sq,
        potential: f.potential,
        energy: f.energy_2p,
        c0,
        me_threshold: th.me,
        k_threshold: th.kinetic,
        residual,
        gamma,
        iterations,
        seed,
        trace,
    })
}

/// `‖ΔQ - Q + F(Q)‖_{L²} / ‖Q‖_{H¹}`.
pub fn equation_residual(ctx: &NonlinearityContext, q: &ComplexField) -> Result<f64> {
    let lap = laplacian(ctx.fourier(), q)?;
    let nq = ctx.apply_f(q)?;
    let r = lap.sub(q)?;
    let v: Vec<Complex64> = r.values().iter().zip(nq.values()).map(|(a, b)| a + b).collect();
    let res = ComplexField::from_values(*q.grid(), v)?;
    Ok((res.norm_sq() / h1_norm_sq(ctx.fourier(), q)?).sqrt())
}

impl GroundState {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds { me: self.me_threshold, kinetic: self.k_threshold }
    }

    pub fn pohozaev(&self, exps: &DerivedExponents, p: f64) -> PohozaevRatios {
        PohozaevRatios::from_norms(exps, p, self.mass, self.grad_sq, self.potential)
    }

    /// `C0 ‖Q‖^{2(p-1)(1-s_c)} ‖∇Q‖^{2(p-1)s_c}`, equal to 2p/B for an exact ground state.
    pub fn gn_product(&self, exps: &DerivedExponents, p: f64) -> f64 {
        self.c0 * self.mass.sqrt().powf(2.0 * (p - 1.0) * (1.0 - exps.s_c)) * self.grad_sq.sqrt().powf(2.0 * (p - 1.0) * exps.s_c)
    }

    /// Largest deviation of Q under the symmetries of the cube (axis
    /// reflections and permutations), relative to the peak.
    pub fn symmetry_defect(&self) -> f64 {
        let grid = self.profile.grid();
        let (n, m) = (grid.dim(), grid.points_per_axis());
        let vals = self.profile.values();
        let peak = self.profile.max_abs();
        let ravel = |idx: &[usize]| idx.iter().fold(0usize, |acc, &j| acc * m + j);
        let mut idx = vec![0usize; n];
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            grid.unravel(i, &mut idx);
            // the -L/2 faces have no mirror image
            if idx.iter().any(|&j| j == 0) {
                continue;
            }
            let mut img = idx.clone();
            img[0] = m - idx[0];
            worst = worst.max((vals[i] - vals[ravel(&img)]).norm());
            if n > 1 {
                let mut img = idx.clone();
                img.rotate_left(1);
                worst = worst.max((vals[i] - vals[ravel(&img)]).norm());
                let mut img = idx.clone();
                img.swap(0, 1);
                worst = worst.max((vals[i] - vals[ravel(&img)]).norm());
            }
        }
        worst / peak
    }

    /// Real part of Q as a real field.
    pub fn real_profile(&self) -> RealField {
        self.profile.real_part()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::model::ModelParams;
    use crate::nonlinearity::NonlinearityOptions;

    fn ctx(params: ModelParams, l: f64, m: usize) -> NonlinearityContext {
        NonlinearityContext::new(params, SpatialGrid::new(3, l, m).unwrap(), NonlinearityOptions::default()).unwrap()
    }

    #[test]
    fn reference_solve_converges_and_is_symmetric() {
        let c = ctx(ModelParams::reference(), 16.0, 32);
        let gs = petviashvili_solve(&c, &SolverConfig::default()).unwrap();
        assert!(gs.residual < 1e-8, "{}", gs.residual);
        assert!((gs.gamma - 1.0).abs() < 1e-9);
        assert!(gs.symmetry_defect() < 1e-10, "{}", gs.symmetry_defect());
        let min = gs.profile.values().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        // far-field ringing of the discrete resolvent is tiny compared with the peak
        assert!(min > -1e-2 * gs.profile.max_abs());
        assert!(gs.profile.values().iter().all(|z| z.im == 0.0));
        let e = c.exponents();
        let twice = gs.profile.scaled(Complex64::new(2.0, 0.0));
        let w1 = weinstein_functional(&c, &gs.profile).unwrap();
        let w2 = weinstein_functional(&c, &twice).unwrap();
        assert!((w1 / w2 - 1.0).abs() < 1e-12);
        assert!(gs.c0 > 0.0 && gs.me_threshold > 0.0 && gs.k_threshold > 0.0);
        let ratios = gs.pohozaev(e, 3.0);
        // triangle check: energy ratio follows from the potential ratio
        let b = e.kinetic_exp;
        let predicted = (0.5 - ratios.potential_kinetic / b) / (0.5 - 1.0 / b);
        assert!((predicted - ratios.energy).abs() < 1e-12);
    }

    #[test]
    fn scaled_profile_thresholds() {
        let c = ctx(ModelParams::reference(), 16.0, 24);
        let gs = petviashvili_solve(&c, &SolverConfig::default()).unwrap();
        let e = c.exponents();
        let lam = 0.8;
        let k = kinetic_product(e, lam * lam * gs.mass, lam * lam * gs.grad_sq);
        assert!((k / (lam * gs.k_threshold) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_seed_is_reported() {
        let c = ctx(ModelParams::reference(), 8.0, 8);
        let zero = ComplexField::zeros(*c.grid());
        assert!(matches!(petviashvili_from(&c, zero, &SolverConfig::default()), Err(Error::DegenerateSeed(_))));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let c = ctx(ModelParams::reference(), 8.0, 8);
        let cfg = SolverConfig { max_iter: 2, ..SolverConfig::default() };
        match petviashvili_solve(&c, &cfg) {
            Err(Error::NoConvergence { iterations, trace, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(trace.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_needs_b_above_two() {
        let e = DerivedExponents { s_c: 0.0, mass_exp: 4.0, kinetic_exp: 2.0, k_riesz: 1.0, p_lower: 1.0, p_upper: 2.0 };
        assert!(thresholds(&e, 1.0, 1.0, 1.0).is_err());
    }
}
