//! Morawetz weight, action `M_a = 2 Im ∫ ū ∇u·∇a` and the two forms of its
//! time derivative, plus the localization identity for the cutoff χ_R.
//!
//! The radial weight has `a'(r) = 2r` on `[0, R]`, the bridge
//! `a'(r) = 2R + 2(r-R) - (r-R)²/R` on `[R, 2R]` and `a'(r) = 3R` beyond.
//! Only derivatives of `a` are used.

use crate::error::{Error, Result};
use crate::grid::{integrate_product, ComplexField, Fourier, RealField, SpatialGrid};
use crate::lattice::epstein_zeta;
use crate::nonlinearity::NonlinearityContext;
use crate::operators::{gradient, laplacian};
use num_complex::Complex64;
use rayon::prelude::*;

/// Region of a point relative to the weight radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Inner,
    Bridge,
    Outer,
}

/// Radial profile of the weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// Piecewise weight with radius R.
    Truncated { radius: f64 },
    /// `a = |x|²` everywhere.
    PureVirial,
}

impl Profile {
    /// a'(r).
    pub fn a_prime(&self, r: f64) -> f64 {
        match *self {
            Profile::PureVirial => 2.0 * r,
            Profile::Truncated { radius } => {
                if r <= radius {
                    2.0 * r
                } else if r <= 2.0 * radius {
                    let d = r - radius;
                    2.0 * radius + 2.0 * d - d * d / radius
                } else {
                    3.0 * radius
                }
            }
        }
    }

    /// a''(r).
    pub fn a_second(&self, r: f64) -> f64 {
        match *self {
            Profile::PureVirial => 2.0,
            Profile::Truncated { radius } => {
                if r <= radius {
                    2.0
                } else if r <= 2.0 * radius {
                    2.0 * (1.0 - (r - radius) / radius)
                } else {
                    0.0
                }
            }
        }
    }

    /// a'(r)/r with the limit 2 at the origin.
    pub fn a_prime_over_r(&self, r: f64) -> f64 {
        if r == 0.0 {
            2.0
        } else {
            self.a_prime(r) / r
        }
    }

    pub fn region(&self, r: f64) -> Region {
        match *self {
            Profile::PureVirial => Region::Inner,
            Profile::Truncated { radius } => {
                if r <= radius {
                    Region::Inner
                } else if r <= 2.0 * radius {
                    Region::Bridge
                } else {
                    Region::Outer
                }
            }
        }
    }
}

/// Index of `(j, k)`, j <= k, in the packed upper triangle of an N×N matrix.
fn packed(n: usize, j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    j * n - j * (j + 1) / 2 + k
}

/// Derivatives of the weight sampled on a grid.
#[derive(Clone, Debug)]
pub struct MorawetzWeight {
    grid: SpatialGrid,
    profile: Profile,
    grad: Vec<Vec<f64>>,
    laplacian: Vec<f64>,
    hessian: Vec<Vec<f64>>,
    a_prime_over_r: Vec<f64>,
    regions: Vec<Region>,
}

impl MorawetzWeight {
    /// Truncated weight; requires `2R < 0.45 L`.
    pub fn build(grid: &SpatialGrid, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || 2.0 * radius >= 0.45 * grid.box_length() {
            return Err(Error::InvalidArgument(format!(
                "Morawetz radius {radius} needs 0 < 2R < 0.45 L = {}",
                0.45 * grid.box_length()
            )));
        }
        Ok(Self::from_profile(grid, Profile::Truncated { radius }))
    }

    /// `a = |x|²` on the whole box.
    pub fn pure_virial(grid: &SpatialGrid) -> Self {
        Self::from_profile(grid, Profile::PureVirial)
    }

    fn from_profile(grid: &SpatialGrid, profile: Profile) -> Self {
        let n = grid.dim();
        let len = grid.len();
        let mut grad = vec![vec![0.0; len]; n];
        let mut hessian = vec![vec![0.0; len]; n * (n + 1) / 2];
        let mut lap = vec![0.0; len];
        let mut aor = vec![0.0; len];
        let mut regions = vec![Region::Inner; len];
        let mut x = vec![0.0; n];
        for i in 0..len {
            grid.position(i, &mut x);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let q = profile.a_prime_over_r(r);
            let s = profile.a_second(r);
            aor[i] = q;
            regions[i] = profile.region(r);
            lap[i] = s + (n as f64 - 1.0) * q;
            for j in 0..n {
                grad[j][i] = q * x[j];
                for k in j..n {
                    let radial = if r == 0.0 { 0.0 } else { (s - q) * x[j] * x[k] / (r * r) };
                    hessian[packed(n, j, k)][i] = radial + if j == k { q } else { 0.0 };
                }
            }
        }
        Self { grid: *grid, profile, grad, laplacian: lap, hessian, a_prime_over_r: aor, regions }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// Component `j` of ∇a.
    pub fn grad(&self, j: usize) -> &[f64] {
        &self.grad[j]
    }

    pub fn laplacian(&self) -> &[f64] {
        &self.laplacian
    }

    /// a_{jk} at every point.
    pub fn hessian(&self, j: usize, k: usize) -> &[f64] {
        &self.hessian[packed(self.grid.dim(), j, k)]
    }

    /// `∇a·x/|x|² = a'(r)/r`.
    pub fn a_prime_over_r(&self) -> &[f64] {
        &self.a_prime_over_r
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// sup |∇a| = sup a'.
    pub fn sup_grad(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.grad.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `M_a = 2 Im ∫ ū ∇u·∇a`.
pub fn morawetz_action(fourier: &Fourier, u: &ComplexField, weight: &MorawetzWeight) -> Result<f64> {
    weight.grid.check_same(u.grid())?;
    let du = gradient(fourier, u)?;
    Ok(action_from_gradient(u, &du, weight))
}

pub(crate) fn action_from_gradient(u: &ComplexField, du: &[ComplexField], weight: &MorawetzWeight) -> f64 {
    let mut total = 0.0;
    for (j, d) in du.iter().enumerate() {
        total += u
            .values()
            .iter()
            .zip(d.values())
            .zip(weight.grad(j))
            .map(|((u, d), g)| (u.conj() * d).im * g)
            .sum::<f64>();
    }
    2.0 * total * u.grid().cell_volume()
}

/// Contributions to `dM_a/dt` in the bracket form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectTerms {
    /// `-∫ Δa Δ(|u|²)`, the bi-Laplacian term after integration by parts.
    pub bilaplacian: f64,
    /// `4 ∫ a_{jk} Re(∂_j ū ∂_k u)`.
    pub hessian: f64,
    /// `2 ∫ ∇a·Re(F̄ ∇u - ū ∇F)` with `F = -(I_α*ρ) w |u|^{p-2} u`.
    pub nonlinear: f64,
}

impl DirectTerms {
    pub fn total(&self) -> f64 {
        self.bilaplacian + self.hessian + self.nonlinear
    }
}

fn linear_terms(fourier: &Fourier, u: &ComplexField, du: &[ComplexField], weight: &MorawetzWeight) -> Result<(f64, f64)> {
    let grid = *u.grid();
    let n = grid.dim();
    let dens = ComplexField::from_real(&u.modulus_sq());
    let lap_dens = laplacian(fourier, &dens)?;
    let bil = -lap_dens
        .values()
        .iter()
        .zip(weight.laplacian())
        .map(|(l, a)| l.re * a)
        .sum::<f64>()
        * grid.cell_volume();
    let mut hes = 0.0;
    for j in 0..n {
        for k in j..n {
            let mult = if j == k { 1.0 } else { 2.0 };
            let s: f64 = du[j]
                .values()
                .iter()
                .zip(du[k].values())
                .zip(weight.hessian(j, k))
                .map(|((a, b), h)| (a.conj() * b).re * h)
                .sum();
            hes += mult * s;
        }
    }
    Ok((bil, 4.0 * hes * grid.cell_volume()))
}

/// `dM_a/dt` assembled from the bracket form.
pub fn rhs_direct(ctx: &NonlinearityContext, u: &ComplexField, weight: &MorawetzWeight) -> Result<DirectTerms> {
    weight.grid.check_same(u.grid())?;
    let fourier = ctx.fourier();
    let du = gradient(fourier, u)?;
    let (bilaplacian, hessian) = linear_terms(fourier, u, &du, weight)?;
    let f = ctx.apply_f(u)?.scaled(Complex64::new(-1.0, 0.0));
    let df = gradient(fourier, &f)?;
    let mut nl = 0.0;
    for j in 0..u.grid().dim() {
        let s: f64 = (0..u.grid().len())
            .map(|i| {
                let fv = f.values()[i];
                let uv = u.values()[i];
                let bracket = (fv.conj() * du[j].values()[i] - uv.conj() * df[j].values()[i]).re;
                weight.grad(j)[i] * bracket
            })
            .sum();
        nl += s;
    }
    Ok(DirectTerms { bilaplacian, hessian, nonlinear: 2.0 * nl * u.grid().cell_volume() })
}

/// How the pair kernel `|x-y|^{α-N}` is made finite on the diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairKernel {
    /// Exact kernel off the diagonal; the diagonal carries the lattice
    /// correction `-ζ_N((N-α)/2) h^{α-N}` times the angular average `Δa/N`.
    LatticeCorrected,
    /// `(|x-y|² + δ²)^{-(N-α+2)/2}` everywhere.
    Regularized { delta: f64 },
}

/// Budget and kernel for the O(M^{2N}) double sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseOptions {
    /// Maximum number of ordered pair evaluations.
    pub budget: u128,
    pub kernel: PairKernel,
}

impl Default for PairwiseOptions {
    fn default() -> Self {
        Self { budget: 2_000_000_000, kernel: PairKernel::LatticeCorrected }
    }
}

fn check_budget(grid: &SpatialGrid, budget: u128) -> Result<()> {
    let needed = (grid.len() as u128) * (grid.len() as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// `Σ_x Σ_y (∇a(x) - ∇a(y))·(x-y) / |x-y|^{N-α+2} ρ(x) ρ(y) h^{2N}`.
///
/// Separations are the plain coordinate differences (no periodic images).
pub fn pairwise_double_sum(rho: &RealField, weight: &MorawetzWeight, alpha: f64, options: &PairwiseOptions) -> Result<f64> {
    let grid = *rho.grid();
    weight.grid.check_same(&grid)?;
    check_budget(&grid, options.budget)?;
    let n = grid.dim();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let e = 0.5 * (n as f64 - alpha + 2.0);
    // kernel |h m|^{-2e} as a function of the integer |m|² (exact kernel)
    let max_sq = n * (m - 1) * (m - 1);
    let table: Vec<f64> = (0..=max_sq)
        .map(|q| match options.kernel {
            PairKernel::LatticeCorrected => {
                if q == 0 {
                    0.0
                } else {
                    (h * h * q as f64).powf(-e)
                }
            }
            PairKernel::Regularized { delta } => (h * h * q as f64 + delta * delta).powf(-e),
        })
        .collect();
    let mut idx = vec![0usize; n];
    let coords: Vec<Vec<i64>> = (0..grid.len())
        .map(|i| {
            grid.unravel(i, &mut idx);
            idx.iter().map(|&v| v as i64).collect()
        })
        .collect();
    let rv = rho.values();
    let rows: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let ri = rv[i];
            if ri == 0.0 {
                return 0.0;
            }
            let ci = &coords[i];
            let mut acc = 0.0;
            for j in 0..grid.len() {
                let rj = rv[j];
                if rj == 0.0 || j == i {
                    continue;
                }
                let cj = &coords[j];
                let mut q = 0usize;
                let mut dot = 0.0;
                for a in 0..n {
                    let d = ci[a] - cj[a];
                    q += (d * d) as usize;
                    dot += (weight.grad[a][i] - weight.grad[a][j]) * d as f64;
                }
                acc += dot * h * table[q] * rj;
            }
            acc * ri
        })
        .collect();
    let mut total: f64 = rows.iter().sum();
    if options.kernel == PairKernel::LatticeCorrected {
        total += diagonal_correction(rho, weight, alpha);
    }
    Ok(total * grid.cell_volume() * grid.cell_volume())
}

/// Σ_x (Δa(x)/N) (-ζ_N((N-α)/2)) h^{α-N} ρ(x)², without the h^{2N} factor.
fn diagonal_correction(rho: &RealField, weight: &MorawetzWeight, alpha: f64) -> f64 {
    let grid = rho.grid();
    let n = grid.dim() as f64;
    let c = -epstein_zeta(grid.dim(), 0.5 * (n - alpha)) * grid.spacing().powf(alpha - n);
    rho.values().iter().zip(weight.laplacian()).map(|(r, l)| l / n * c * r * r).sum()
}

/// `Σ_x Σ_y k(x-y) ρ(x) ρ(y) h^{2N}` for the lattice kernel `k(z) = |z|^{α-N}`,
/// `k(0) = -ζ_N((N-α)/2) h^{α-N}`, by zero-padded (aperiodic) FFT convolution.
/// The pure-virial double sum equals twice this value.
pub fn lattice_riesz_energy_fft(rho: &RealField, alpha: f64) -> Result<f64> {
    let grid = *rho.grid();
    let n = grid.dim();
    let m = grid.points_per_axis();
    let padded = SpatialGrid::new(n, 2.0 * grid.box_length(), 2 * m)?;
    let fourier = Fourier::new(padded);
    let h = grid.spacing();
    let nn = n as f64;
    let origin = -epstein_zeta(n, 0.5 * (nn - alpha)) * h.powf(alpha - nn);
    let pm = 2 * m;
    let mut idx = vec![0usize; n];
    let mut kernel: Vec<Complex64> = (0..padded.len())
        .map(|i| {
            padded.unravel(i, &mut idx);
            let q: f64 = idx.iter().map(|&j| padded.mode(j) as f64).map(|d| d * d).sum();
            let v = if q == 0.0 { origin } else { (h * h * q).powf(0.5 * (alpha - nn)) };
            Complex64::new(v, 0.0)
        })
        .collect();
    let mut dens = vec![Complex64::new(0.0, 0.0); padded.len()];
    let mut src = vec![0usize; n];
    for i in 0..grid.len() {
        grid.unravel(i, &mut src);
        let flat = src.iter().fold(0usize, |acc, &j| acc * pm + j);
        dens[flat] = Complex64::new(rho.values()[i], 0.0);
    }
    let original = dens.clone();
    fourier.forward_in_place(&mut kernel);
    fourier.forward_in_place(&mut dens);
    for (d, k) in dens.iter_mut().zip(&kernel) {
        *d *= k;
    }
    fourier.inverse_in_place(&mut dens);
    let s: f64 = dens.iter().zip(&original).map(|(c, r)| c.re * r.re).sum();
    Ok(s * grid.cell_volume() * grid.cell_volume())
}

/// Contributions to `dM_a/dt` in the expanded nonlocal form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpandedTerms {
    pub bilaplacian: f64,
    pub hessian: f64,
    /// `-(2 - 4/p) ∫ Δa V ρ`.
    pub laplacian_term: f64,
    /// `(4b/p) ∫ (∇a·x/|x|²) V ρ`.
    pub weight_term: f64,
    /// `-(2K(N-α)/p) ΣΣ (∇a(x)-∇a(y))·(x-y)/|x-y|^{N-α+2} ρρ h^{2N}`.
    pub double_term: f64,
}

impl ExpandedTerms {
    pub fn total(&self) -> f64 {
        self.bilaplacian + self.hessian + self.laplacian_term + self.weight_term + self.double_term
    }

    pub fn nonlinear(&self) -> f64 {
        self.laplacian_term + self.weight_term + self.double_term
    }
}

/// `dM_a/dt` assembled from the expanded form.
///
/// Sign bookkeeping: for the focusing equation the double term enters with
/// `-2K(N-α)/p`; this is the sign for which the form agrees with
/// [`rhs_direct`].
pub fn rhs_expanded(ctx: &NonlinearityContext, u: &ComplexField, weight: &MorawetzWeight, options: &PairwiseOptions) -> Result<ExpandedTerms> {
    weight.grid.check_same(u.grid())?;
    check_budget(u.grid(), options.budget)?;
    let fourier = ctx.fourier();
    let du = gradient(fourier, u)?;
    let (bilaplacian, hessian) = linear_terms(fourier, u, &du, weight)?;
    let (rho, v) = ctx.density_and_potential(u)?;
    let params = ctx.params();
    let p = params.p;
    let n = params.dim as f64;
    let grid = *u.grid();
    let vrho: Vec<f64> = v.values().iter().zip(rho.values()).map(|(a, b)| a * b).collect();
    let laplacian_term = -(2.0 - 4.0 / p) * integrate_product(weight.laplacian(), &vrho, &grid);
    let weight_term = 4.0 * params.b / p * integrate_product(weight.a_prime_over_r(), &vrho, &grid);
    let s = pairwise_double_sum(&rho, weight, params.alpha, options)?;
    let double_term = -2.0 * ctx.exponents().k_riesz * (n - params.alpha) / p * s;
    Ok(ExpandedTerms { bilaplacian, hessian, laplacian_term, weight_term, double_term })
}

/// Smooth radial cutoff: 1 on `|x| <= R/2`, 0 on `|x| >= R`.
#[derive(Clone, Debug)]
pub struct CutoffField {
    radius: f64,
    values: RealField,
}

/// `C^∞` step from 1 (t <= 0) to 0 (t >= 1).
fn smooth_step_down(t: f64) -> f64 {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = psi(1.0 - t);
        a / (a + psi(t))
    }
}

impl CutoffField {
    pub fn build(grid: &SpatialGrid, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || radius >= 0.5 * grid.box_length() {
            return Err(Error::InvalidArgument(format!("cutoff radius {radius} needs 0 < R < L/2")));
        }
        let half = 0.5 * radius;
        let values = RealField::from_fn(*grid, |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            smooth_step_down((r - half) / half)
        });
        Ok(Self { radius, values })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn values(&self) -> &RealField {
        &self.values
    }

    /// χ_R u.
    pub fn apply(&self, u: &ComplexField) -> Result<ComplexField> {
        u.mul_real(&self.values)
    }
}

/// Both sides of `∫χ²|∇u|² = ∫|∇(χu)|² + ∫χΔχ|u|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizationCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / ∫|∇u|²`.
    pub residual: f64,
}

/// Localization identity with spectral derivatives throughout.
pub fn localization_check(fourier: &Fourier, u: &ComplexField, cutoff: &CutoffField) -> Result<LocalizationCheck> {
    let grid = *u.grid();
    grid.check_same(cutoff.values.grid())?;
    let chi = cutoff.values.values();
    let du = gradient(fourier, u)?;
    let grad_total: f64 = du.iter().map(|d| d.norm_sq()).sum();
    let lhs: f64 = du
        .iter()
        .map(|d| d.values().iter().zip(chi).map(|(z, c)| c * c * z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        * grid.cell_volume();
    let cu = cutoff.apply(u)?;
    let dcu = gradient(fourier, &cu)?;
    let first: f64 = dcu.iter().map(|d| d.norm_sq()).sum();
    let lap_chi = laplacian(fourier, &ComplexField::from_real(&cutoff.values))?;
    let second = u
        .values()
        .iter()
        .zip(chi)
        .zip(lap_chi.values())
        .map(|((z, c), l)| c * l.re * z.norm_sqr())
        .sum::<f64>()
        * grid.cell_volume();
    let rhs = first + second;
    let residual = if grad_total > 0.0 { (lhs - rhs).abs() / grad_total } else { (lhs - rhs).abs() };
    Ok(LocalizationCheck { lhs, rhs, residual })
}

/// Window averages of `∫_{|x|<R}|u|^q` over dyadic windows of `[0, T]`:
/// `[0, T/2^K], [T/2^K, T/2^{K-1}], .., [T/2, T]`, earliest first.
///
/// `samples` are `(t, value)` pairs in increasing time; each window average is
/// the trapezoid integral over the samples inside it divided by its length.
pub fn spacetime_average(samples: &[(f64, f64)], t_final: f64, levels: usize) -> Vec<f64> {
    let mut edges = vec![0.0];
    for k in (0..=levels).rev() {
        edges.push(t_final / 2f64.powi(k as i32));
    }
    edges.dedup();
    edges
        .windows(2)
        .map(|w| window_average(samples, w[0], w[1]))
        .collect()
}

fn window_average(samples: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let eps = 1e-12 * b.abs().max(1.0);
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|(t, _)| *t >= a - eps && *t <= b + eps).collect();
    if pts.len() < 2 {
        return pts.first().map(|p| p.1).unwrap_or(0.0);
    }
    let integral: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    let span = pts.last().unwrap().0 - pts[0].0;
    if span > 0.0 {
        integral / span
    } else {
        pts[0].1
    }
}

/// `∫_{|x|<R} |u|^q`.
pub fn local_lq(u: &ComplexField, radius: f64, q: f64) -> f64 {
    let r2 = u.grid().radius_sq();
    let lim = radius * radius;
    u.values()
        .iter()
        .zip(&r2)
        .filter(|(_, &r)| r < lim)
        .map(|(z, _)| z.norm().powf(q))
        .sum::<f64>()
        * u.grid().cell_volume()
}
