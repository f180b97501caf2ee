//! Lattice sums over Z^N used to regularize singular point values consistently
//! with the continuum kernels.

use statrs::function::gamma::{gamma, gamma_ur};
use std::f64::consts::PI;

/// Largest |j|² kept in the theta-function sums; terms decay like e^{-π|j|²}.
const SHELL_CUTOFF: i64 = 40;

/// Representation counts r_N(n) = #{j ∈ Z^N : |j|² = n} for 1 <= n <= cutoff.
fn shell_counts(dim: usize, cutoff: i64) -> Vec<u64> {
    let r = (cutoff as f64).sqrt().floor() as i64;
    let mut counts = vec![0u64; cutoff as usize + 1];
    let mut j = vec![-r; dim];
    loop {
        let n: i64 = j.iter().map(|v| v * v).sum();
        if n > 0 && n <= cutoff {
            counts[n as usize] += 1;
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return counts;
            }
            j[axis] += 1;
            if j[axis] <= r {
                break;
            }
            j[axis] = -r;
            axis += 1;
        }
    }
}

/// Analytic continuation of the Epstein zeta function `Σ'_{j∈Z^N} |j|^{-2s}`,
/// valid for 0 < s < N/2 (Riemann's theta splitting).
///
/// Returns NaN outside that strip.
pub fn epstein_zeta(dim: usize, s: f64) -> f64 {
    let half = dim as f64 / 2.0;
    if !(s > 0.0 && s < half) {
        return f64::NAN;
    }
    let counts = shell_counts(dim, SHELL_CUTOFF);
    let gs = gamma(s);
    let gc = gamma(half - s);
    let mut acc = 1.0 / (s - half) - 1.0 / s;
    for (n, &c) in counts.iter().enumerate().skip(1) {
        if c == 0 {
            continue;
        }
        let x = PI * n as f64;
        let t = x.powf(-s) * gamma_ur(s, x) * gs + x.powf(s - half) * gamma_ur(half - s, x) * gc;
        acc += c as f64 * t;
    }
    acc * PI.powf(s) / gs
}

/// Point value at the origin of the lattice function `|x|^{-2s}` (x = h j) that
/// makes `Σ_j h^N f(hj)` reproduce the continuum integral of smooth test
/// functions against `|x|^{-2s}` to the order of the lattice sum.
///
/// Equals `-ζ_N(s) h^{-2s}`.
pub fn origin_value(dim: usize, s: f64, h: f64) -> f64 {
    -epstein_zeta(dim, s) * h.powf(-2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shell_counts_cube() {
        let c = shell_counts(3, 9);
        assert_eq!(&c[1..=6], &[6, 12, 8, 6, 24, 24]);
    }

    #[test]
    fn epstein_known_values() {
        // Z^3 values from the theta splitting, cross-checked by direct
        // summation with Richardson extrapolation.
        assert_relative_eq!(epstein_zeta(3, 1.0), -8.913633, max_relative = 1e-6);
        assert_relative_eq!(epstein_zeta(3, 0.25), -1.702281, max_relative = 1e-5);
        assert_relative_eq!(epstein_zeta(3, 0.125), -1.311283, max_relative = 1e-5);
    }

    #[test]
    fn epstein_one_dimension_is_riemann() {
        // Σ'_{Z} |j|^{-2s} = 2 ζ(2s); ζ(1/2) = -1.4603545088...
        assert_relative_eq!(epstein_zeta(1, 0.25), 2.0 * -1.4603545088095868, max_relative = 1e-10);
    }

    #[test]
    fn epstein_tends_to_minus_one_at_zero() {
        assert_relative_eq!(epstein_zeta(3, 1e-6), -1.0, max_relative = 1e-4);
    }

    #[test]
    fn outside_strip_is_nan() {
        assert!(epstein_zeta(3, 1.5).is_nan());
        assert!(epstein_zeta(3, 0.0).is_nan());
    }
}
