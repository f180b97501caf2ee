//! Reproducible pseudo-random fields.
//!
//! The generator is the 64-bit linear congruential map
//! `s <- 6364136223846793005 s + 1442695040888963407 (mod 2^64)` with output
//! `(s >> 11) / 2^53` in [0, 1), so sequences are reproducible in any language.

use crate::grid::{ComplexField, SpatialGrid};
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(Self::MULTIPLIER).wrapping_add(Self::INCREMENT);
        self.state
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Shape of [`random_smooth_field`]: a sum of Gaussian wave packets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketSpec {
    pub packets: usize,
    /// Packet centres uniform in `[-spread/2, spread/2)^N`.
    pub spread: f64,
    /// Packet widths uniform in `[width_min, width_max)`.
    pub width_min: f64,
    pub width_max: f64,
    /// Momentum components uniform in `[-momentum, momentum)`.
    pub momentum: f64,
    /// Overall factor applied to the sum.
    pub amplitude: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        Self { packets: 8, spread: 2.0, width_min: 0.6, width_max: 1.0, momentum: 1.0, amplitude: 1.0 }
    }
}

/// `amplitude · Σ c_j e^{i k_j·x} exp(-|x - x_j|²/w_j²)` with all parameters
/// drawn from `rng` in a fixed order (per packet: k, c, x_j, w_j).
pub fn random_smooth_field(grid: SpatialGrid, spec: &PacketSpec, rng: &mut Lcg64) -> ComplexField {
    let n = grid.dim();
    let packets: Vec<(Vec<f64>, Complex64, Vec<f64>, f64)> = (0..spec.packets)
        .map(|_| {
            let k: Vec<f64> = (0..n).map(|_| rng.uniform(-spec.momentum, spec.momentum)).collect();
            let c = Complex64::new(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
            let x0: Vec<f64> = (0..n).map(|_| rng.uniform(-0.5 * spec.spread, 0.5 * spec.spread)).collect();
            let w = rng.uniform(spec.width_min, spec.width_max);
            (k, c, x0, w)
        })
        .collect();
    let amp = spec.amplitude;
    ComplexField::from_fn(grid, move |x| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c, x0, w) in &packets {
            let phase: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum();
            let d2: f64 = x0.iter().zip(x).map(|(a, x)| (x - a) * (x - a)).sum();
            acc += c * Complex64::from_polar((-d2 / (w * w)).exp(), phase);
        }
        acc * amp
    })
}
