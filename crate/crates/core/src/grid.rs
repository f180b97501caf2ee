//! Periodic cubic boxes `[-L/2, L/2)^N`, sampled fields and the spectral transform.
//!
//! Storage is row-major: the last axis is contiguous and the flat index of
//! `(j_0, .., j_{N-1})` is `Σ j_a M^{N-1-a}`.
//!
//! Transform convention: the forward DFT is unnormalized,
//! `f̂_m = Σ_j f_j e^{-2πi m·j/M}`, and the inverse carries `1/M^N`. The
//! coefficient at index `m` (per axis `0..M`) belongs to the wavenumber
//! `k = 2π m'/L` with `m' = m` for `m < M/2` and `m - M` otherwise. Discrete
//! Parseval reads `Σ |f|² h^N = (h^N / M^N) Σ |f̂|²`. Multipliers act on
//! coefficients and commute with the sign convention of the grid origin.

use crate::error::{Error, Result};
use crate::lattice;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Uniform grid on the cube `[-L/2, L/2)^N` with `M` points per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    box_length: f64,
    points: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, box_length: f64, points: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("grid dimension must be positive".into()));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidArgument(format!("box length {box_length} must be positive")));
        }
        if points < 2 || points % 2 != 0 {
            return Err(Error::InvalidArgument(format!("points per axis {points} must be even and >= 2")));
        }
        let total = (points as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if total > (1u128 << 34) {
            return Err(Error::InvalidArgument(format!("grid {points}^{dim} is too large")));
        }
        Ok(Self { dim, box_length, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    /// h = L/M.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.points as f64
    }

    /// h^N.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// M^N.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// x_j = -L/2 + j h.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing()
    }

    /// Signed mode number of index `j` in `{-M/2, .., M/2-1}`.
    pub fn mode(&self, j: usize) -> i64 {
        let m = self.points as i64;
        let j = j as i64;
        if j < m / 2 {
            j
        } else {
            j - m
        }
    }

    /// k = 2π m/L for index `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64 / self.box_length
    }

    /// Largest resolved wavenumber π/h.
    pub fn k_max(&self) -> f64 {
        PI / self.spacing()
    }

    /// Per-axis indices of a flat index.
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
    }

    /// Physical position of a flat index.
    pub fn position(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = self.coordinate(rem % self.points);
            rem /= self.points;
        }
    }

    /// Flat index of the grid point nearest the origin (`j = M/2` on each axis).
    pub fn origin_index(&self) -> usize {
        (0..self.dim).fold(0, |acc, _| acc * self.points + self.points / 2)
    }

    /// `|x|²` at every point.
    pub fn radius_sq(&self) -> Vec<f64> {
        let axis: Vec<f64> = (0..self.points).map(|j| self.coordinate(j).powi(2)).collect();
        self.separable_sum(&axis)
    }

    /// `Σ_a v[j_a]` at every point, built axis by axis.
    pub(crate) fn separable_sum(&self, per_axis: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0];
        for _ in 0..self.dim {
            let mut next = Vec::with_capacity(out.len() * self.points);
            for &base in &out {
                next.extend(per_axis.iter().map(|v| base + v));
            }
            out = next;
        }
        out
    }

    pub fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Complex samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_values(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |x, i| {
                    grid.position(i, x);
                    f(x)
                },
            )
            .collect();
        Self { grid, values }
    }

    pub fn from_real(f: &RealField) -> Self {
        Self {
            grid: f.grid,
            values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Σ |f|² h^N.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn modulus_sq(&self) -> RealField {
        RealField { grid: self.grid, values: self.values.iter().map(|z| z.norm_sqr()).collect() }
    }

    pub fn real_part(&self) -> RealField {
        RealField { grid: self.grid, values: self.values.iter().map(|z| z.re).collect() }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|z| z * c).collect() }
    }

    /// Pointwise multiplication by a real field.
    pub fn mul_real(&self, w: &RealField) -> Result<Self> {
        self.grid.check_same(&w.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&w.values).map(|(z, v)| z * v).collect(),
        })
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Re Σ conj(self) other h^N.
    pub fn inner_re(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Real samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |x, i| {
                    grid.position(i, x);
                    f(x)
                },
            )
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn mul(&self, other: &RealField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Riemann sum Σ f h^N of a real field.
pub fn integrate(f: &RealField) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

/// Riemann sum Σ f h^N of a complex field.
pub fn integrate_complex(f: &ComplexField) -> Complex64 {
    f.values.iter().sum::<Complex64>() * f.grid.cell_volume()
}

/// Σ a b h^N without materializing the product.
pub fn integrate_product(a: &[f64], b: &[f64], grid: &SpatialGrid) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * grid.cell_volume()
}

/// Spectral coefficients on a grid (forward DFT, unnormalized).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: SpatialGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_coeffs(grid: SpatialGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch("coefficient count".into()));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `(h^N/M^N) Σ |f̂|²`, equal to `Σ |f|² h^N`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
            / self.grid.len() as f64
    }
}

/// N-dimensional FFT for one grid plus the wavenumber tables multipliers need.
///
/// Shareable across threads; every method takes `&self`.
pub struct Fourier {
    grid: SpatialGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_axis: Vec<f64>,
    k2: Vec<f64>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.points_per_axis();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let k_axis: Vec<f64> = (0..m).map(|j| grid.wavenumber(j)).collect();
        let sq: Vec<f64> = k_axis.iter().map(|k| k * k).collect();
        let k2 = grid.separable_sum(&sq);
        Self { grid, forward, inverse, k_axis, k2 }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Wavenumbers along one axis, indexed like the coefficients.
    pub fn k_axis(&self) -> &[f64] {
        &self.k_axis
    }

    /// |k|² per coefficient.
    pub fn k_sq(&self) -> &[f64] {
        &self.k2
    }

    /// Component `axis` of the wavevector at a flat coefficient index.
    pub fn k_component(&self, idx: usize, axis: usize) -> f64 {
        let m = self.grid.points_per_axis();
        let stride = m.pow((self.grid.dim() - 1 - axis) as u32);
        self.k_axis[(idx / stride) % m]
    }

    /// Full per-point table of `k_axis` along one axis.
    pub fn k_component_table(&self, axis: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.k_component(i, axis)).collect()
    }

    pub fn forward(&self, f: &ComplexField) -> Result<Spectrum> {
        self.grid.check_same(&f.grid)?;
        let mut coeffs = f.values.clone();
        self.forward_in_place(&mut coeffs);
        Ok(Spectrum { grid: self.grid, coeffs })
    }

    pub fn inverse(&self, s: &Spectrum) -> Result<ComplexField> {
        self.grid.check_same(&s.grid)?;
        let mut values = s.coeffs.clone();
        self.inverse_in_place(&mut values);
        Ok(ComplexField { grid: self.grid, values })
    }

    /// Unnormalized forward DFT of a row-major buffer of length M^N.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT including the 1/M^N factor.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }

    /// `F^{-1}[ m(k) F f ]` for a real multiplier table.
    pub fn apply_multiplier(&self, f: &ComplexField, multiplier: &[f64]) -> Result<ComplexField> {
        self.grid.check_same(&f.grid)?;
        let mut v = f.values.clone();
        self.multiply_in_place(&mut v, multiplier);
        Ok(ComplexField { grid: self.grid, values: v })
    }

    /// In-place `F^{-1}[ m F v ]`.
    pub fn multiply_in_place(&self, v: &mut [Complex64], multiplier: &[f64]) {
        self.forward_in_place(v);
        v.par_iter_mut().zip(multiplier.par_iter()).for_each(|(z, m)| *z *= m);
        self.inverse_in_place(v);
    }

    /// In-place `F^{-1}[ m F v ]` for a complex multiplier table.
    pub fn multiply_complex_in_place(&self, v: &mut [Complex64], multiplier: &[Complex64]) {
        self.forward_in_place(v);
        v.par_iter_mut().zip(multiplier.par_iter()).for_each(|(z, m)| *z *= m);
        self.inverse_in_place(v);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.grid.points_per_axis();
        let n = self.grid.dim();
        assert_eq!(data.len(), self.grid.len(), "buffer length must be M^N");
        let scratch_len = fft.get_inplace_scratch_len();
        data.par_chunks_mut(m).for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
        let mut scratch = vec![Complex64::default(); scratch_len];
        for axis in (0..n.saturating_sub(1)).rev() {
            let inner = m.pow((n - 1 - axis) as u32);
            let mut buf = vec![Complex64::default(); m * inner];
            for block in data.chunks_mut(m * inner) {
                for j in 0..m {
                    let src = &block[j * inner..(j + 1) * inner];
                    for (i, z) in src.iter().enumerate() {
                        buf[i * m + j] = *z;
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for j in 0..m {
                    let dst = &mut block[j * inner..(j + 1) * inner];
                    for (i, z) in dst.iter_mut().enumerate() {
                        *z = buf[i * m + j];
                    }
                }
            }
        }
    }
}

/// How the singular factors `|x|^b` and `|x|` are given finite values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightRegularization {
    /// Exact `|x|^b` away from the origin; the origin sample is `-ζ_N(-b/2) h^b`
    /// so that lattice sums against the weight are consistent with the
    /// continuum integral. Scale-covariant: `w_{L/λ} = λ^{-b} w_L` pointwise.
    LatticeCorrected,
    /// `(|x|² + ε²)^{b/2}`.
    Smoothed { eps: f64 },
}

impl Default for WeightRegularization {
    fn default() -> Self {
        WeightRegularization::LatticeCorrected
    }
}

impl WeightRegularization {
    /// Smoothed with ε = h/2.
    pub fn smoothed_half_spacing(grid: &SpatialGrid) -> Self {
        WeightRegularization::Smoothed { eps: 0.5 * grid.spacing() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightRegularization::LatticeCorrected => "lattice",
            WeightRegularization::Smoothed { .. } => "smoothed",
        }
    }
}

/// Samples of the regularized `|x|^b`.
pub fn weight_field(grid: &SpatialGrid, b: f64, reg: WeightRegularization) -> Result<RealField> {
    if !b.is_finite() {
        return Err(Error::InvalidArgument(format!("weight exponent {b}")));
    }
    let r2 = grid.radius_sq();
    let values = match reg {
        WeightRegularization::Smoothed { eps } => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidArgument(format!("weight smoothing {eps} must be positive")));
            }
            let e2 = eps * eps;
            r2.iter().map(|&r| (r + e2).powf(0.5 * b)).collect()
        }
        WeightRegularization::LatticeCorrected => {
            let origin = if b == 0.0 {
                1.0
            } else if b < 0.0 && -b < grid.dim() as f64 {
                lattice::origin_value(grid.dim(), -0.5 * b, grid.spacing())
            } else {
                return Err(Error::InvalidArgument(format!(
                    "lattice-corrected weight needs -N < b <= 0, got {b}"
                )));
            };
            r2.iter().map(|&r| if r == 0.0 { origin } else { r.powf(0.5 * b) }).collect()
        }
    };
    Ok(RealField { grid: *grid, values })
}

/// Samples of `|x|`, regularized like the weight: `sqrt(|x|²+ε²)` when smoothed;
/// under the lattice rule the origin carries the radius whose b-th power is the
/// weight's origin sample, so `r^b` reproduces the weight everywhere.
pub fn radial_field(grid: &SpatialGrid, b: f64, reg: WeightRegularization) -> Result<RealField> {
    let r2 = grid.radius_sq();
    let values = match reg {
        WeightRegularization::Smoothed { eps } => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidArgument(format!("weight smoothing {eps} must be positive")));
            }
            r2.iter().map(|&r| (r + eps * eps).sqrt()).collect()
        }
        WeightRegularization::LatticeCorrected => {
            let w0 = weight_field(grid, b, reg)?.values[grid.origin_index()];
            let origin = if b == 0.0 { 0.0 } else { w0.powf(1.0 / b) };
            r2.iter().map(|&r| if r == 0.0 { origin } else { r.sqrt() }).collect()
        }
    };
    Ok(RealField { grid: *grid, values })
}

/// `∫_{|x| > radius} |u|²`.
pub fn mass_outside(u: &ComplexField, radius: f64) -> f64 {
    let r2 = u.grid.radius_sq();
    let lim = radius * radius;
    u.values.iter().zip(&r2).filter(|(_, &r)| r > lim).map(|(z, _)| z.norm_sqr()).sum::<f64>()
        * u.grid.cell_volume()
}

/// `∫_{|x| <= radius} |u|²`.
pub fn mass_inside(u: &ComplexField, radius: f64) -> f64 {
    let r2 = u.grid.radius_sq();
    let lim = radius * radius;
    u.values.iter().zip(&r2).filter(|(_, &r)| r <= lim).map(|(z, _)| z.norm_sqr()).sum::<f64>()
        * u.grid.cell_volume()
}

/// Indicator mass beyond 0.4 L used by the truncation guard.
pub fn boundary_mass(u: &ComplexField) -> f64 {
    mass_outside(u, 0.4 * u.grid.box_length())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lcg_field(grid: SpatialGrid, seed: u64) -> ComplexField {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let vals = (0..grid.len()).map(|_| Complex64::new(next(), next())).collect();
        ComplexField::from_values(grid, vals).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = SpatialGrid::new(3, 8.0, 16).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.coordinate(0), -4.0);
        assert_eq!(g.coordinate(8), 0.0);
        assert_eq!(g.mode(8), -8);
        assert_eq!(g.mode(7), 7);
        let mut x = [0.0; 3];
        g.position(g.origin_index(), &mut x);
        assert_eq!(x, [0.0; 3]);
        assert!(SpatialGrid::new(3, -1.0, 16).is_err());
        assert!(SpatialGrid::new(3, 1.0, 15).is_err());
    }

    #[test]
    fn constant_is_zero_mode() {
        let g = SpatialGrid::new(3, 10.0, 8).unwrap();
        let f = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        let s = Fourier::new(g).forward(&f).unwrap();
        assert_relative_eq!(s.coeffs()[0].re, g.len() as f64, max_relative = 1e-14);
        assert!(s.coeffs()[1..].iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn plane_wave_single_coefficient() {
        let g = SpatialGrid::new(3, 2.0 * PI, 8).unwrap();
        let fo = Fourier::new(g);
        let f = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * x[0] - 3.0 * x[2]));
        let s = fo.forward(&f).unwrap();
        let big: Vec<usize> = (0..g.len()).filter(|&i| s.coeffs()[i].norm() > 1e-8).collect();
        assert_eq!(big.len(), 1);
        let i = big[0];
        assert_relative_eq!(fo.k_component(i, 0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(fo.k_component(i, 1), 0.0, epsilon = 1e-12);
        assert_relative_eq!(fo.k_component(i, 2), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = SpatialGrid::new(3, 7.0, 16).unwrap();
        let fo = Fourier::new(g);
        let f = lcg_field(g, 7);
        let s = fo.forward(&f).unwrap();
        let back = fo.inverse(&s).unwrap();
        let err = back.sub(&f).unwrap().norm_sq().sqrt() / f.norm_sq().sqrt();
        assert!(err < 1e-12, "round trip {err}");
        assert_relative_eq!(s.norm_sq(), f.norm_sq(), max_relative = 1e-12);
    }

    #[test]
    fn integrals() {
        let g = SpatialGrid::new(3, 10.0, 8).unwrap();
        assert_relative_eq!(integrate(&RealField::from_fn(g, |_| 1.0)), 1000.0, max_relative = 1e-14);
        let g = SpatialGrid::new(3, 20.0, 64).unwrap();
        let gauss = RealField::from_fn(g, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp());
        assert_relative_eq!(integrate(&gauss), PI.powf(1.5), max_relative = 1e-10);
        let odd = RealField::from_fn(g, |x| x[0] * (-x.iter().map(|v| v * v).sum::<f64>()).exp());
        assert!(integrate(&odd).abs() < 1e-12);
    }

    #[test]
    fn smoothed_weight_values() {
        let g = SpatialGrid::new(3, 4.0, 16).unwrap();
        let w = weight_field(&g, -0.5, WeightRegularization::Smoothed { eps: 0.05 }).unwrap();
        assert_relative_eq!(w.values()[g.origin_index()], 0.05f64.powf(-0.5), max_relative = 1e-14);
        assert_relative_eq!(w.values()[g.origin_index()], 4.4721, max_relative = 1e-4);
        // point (1, 0, 0): index j = M/2 + 4 on axis 0
        let idx = (12 * 16 + 8) * 16 + 8;
        assert!((w.values()[idx] - 1.0).abs() < 1.2e-3);
        assert!(weight_field(&g, -0.5, WeightRegularization::Smoothed { eps: 0.0 }).is_err());
        let one = weight_field(&g, 0.0, WeightRegularization::Smoothed { eps: 0.1 }).unwrap();
        assert!(one.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn lattice_weight_is_scale_covariant() {
        let b = -0.5;
        let g1 = SpatialGrid::new(3, 8.0, 16).unwrap();
        let g2 = SpatialGrid::new(3, 4.0, 16).unwrap();
        let w1 = weight_field(&g1, b, WeightRegularization::LatticeCorrected).unwrap();
        let w2 = weight_field(&g2, b, WeightRegularization::LatticeCorrected).unwrap();
        for (a, c) in w1.values().iter().zip(w2.values()) {
            assert_relative_eq!(c * 2f64.powf(b), *a, max_relative = 1e-14);
        }
    }

    #[test]
    fn lattice_weight_integrates_smooth_functions() {
        // ∫ |x|^{-1/2} e^{-|x|²} dx = 2π Γ(5/4)
        let exact = 2.0 * PI * statrs::function::gamma::gamma(1.25);
        let mut errs = vec![];
        for m in [16, 32] {
            let g = SpatialGrid::new(3, 12.0, m).unwrap();
            let w = weight_field(&g, -0.5, WeightRegularization::LatticeCorrected).unwrap();
            let r2 = g.radius_sq();
            let s: f64 = w.values().iter().zip(&r2).map(|(w, r)| w * (-r).exp()).sum::<f64>() * g.cell_volume();
            errs.push((s / exact - 1.0).abs());
        }
        // leading error is O(h^{N+b+2})
        let order = (errs[0] / errs[1]).log2();
        assert!(errs[1] < 5e-4 && order > 4.0, "{errs:?}");
    }

    #[test]
    fn weights_monotone_in_radius() {
        let g = SpatialGrid::new(3, 6.0, 16).unwrap();
        for reg in [WeightRegularization::LatticeCorrected, WeightRegularization::smoothed_half_spacing(&g)] {
            let w = weight_field(&g, -0.5, reg).unwrap();
            let r = radial_field(&g, -0.5, reg).unwrap();
            let mut pairs: Vec<(f64, f64)> = r.values().iter().copied().zip(w.values().iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for win in pairs.windows(2) {
                assert!(win[1].1 <= win[0].1 * (1.0 + 1e-14));
            }
            // r^b reproduces the weight exactly for both rules
            for (rv, wv) in r.values().iter().zip(w.values()) {
                assert_relative_eq!(rv.powf(-0.5), *wv, max_relative = 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn parseval_random(seed in any::<u64>(), l in 1.0f64..30.0) {
            let g = SpatialGrid::new(3, l, 8).unwrap();
            let fo = Fourier::new(g);
            let f = lcg_field(g, seed);
            let s = fo.forward(&f).unwrap();
            prop_assert!((s.norm_sq() / f.norm_sq() - 1.0).abs() < 1e-10);
            let back = fo.inverse(&s).unwrap();
            prop_assert!((back.norm_sq() / f.norm_sq() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn round_trip_other_dims(seed in any::<u64>(), dim in 1usize..5) {
            let g = SpatialGrid::new(dim, 3.0, 8).unwrap();
            let fo = Fourier::new(g);
            let f = lcg_field(g, seed);
            let back = fo.inverse(&fo.forward(&f).unwrap()).unwrap();
            prop_assert!(back.sub(&f).unwrap().max_abs() < 1e-12);
        }
    }
}
