//! Model parameters, derived exponents and admissibility.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::fmt;

/// Parameters of `i u_t + Δu = -(I_α * |x|^b |u|^p) |x|^b |u|^{p-2} u` on R^N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub alpha: f64,
    pub b: f64,
    pub p: f64,
}

impl ModelParams {
    pub fn new(dim: usize, alpha: f64, b: f64, p: f64) -> Self {
        Self { dim, alpha, b, p }
    }

    /// N=3, α=2, b=-1/2, p=3 (s_c = 3/4).
    pub fn reference() -> Self {
        Self::new(3, 2.0, -0.5, 3.0)
    }

    /// N=3, α=1, b=-1/4, p=2 (s_c = 1/4).
    pub fn secondary() -> Self {
        Self::new(3, 1.0, -0.25, 2.0)
    }

    fn n(&self) -> f64 {
        self.dim as f64
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} alpha={} b={} p={}", self.dim, self.alpha, self.b, self.p)
    }
}

/// Quantities derived from [`ModelParams`].
///
/// `mass_exp` and `kinetic_exp` are the exponents A and B of the sharp
/// Gagliardo-Nirenberg inequality `P(f) <= C ||f||^A ||∇f||^B`; A + B = 2p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedExponents {
    pub s_c: f64,
    pub mass_exp: f64,
    pub kinetic_exp: f64,
    pub k_riesz: f64,
    pub p_lower: f64,
    pub p_upper: f64,
}

impl DerivedExponents {
    /// Exponent 1 - s_c carried by the mass in the scale-invariant products.
    pub fn mass_weight(&self) -> f64 {
        1.0 - self.s_c
    }

    /// Exponent (1 - s_c)/s_c of the mass in the critical products.
    pub fn sigma(&self) -> f64 {
        (1.0 - self.s_c) / self.s_c
    }
}

/// Normalization of the Riesz potential I_α = K |x|^{α-N}.
pub fn riesz_constant(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    gamma((n - alpha) / 2.0) / (gamma(alpha / 2.0) * PI.powf(n / 2.0) * 2f64.powf(alpha))
}

/// Computes s_c, A, B, K and the admissible p-range. Does not check admissibility.
pub fn derive_exponents(params: &ModelParams) -> Result<DerivedExponents> {
    let ModelParams { dim, alpha, b, p } = *params;
    if !(alpha.is_finite() && b.is_finite() && p.is_finite()) {
        return Err(Error::InvalidParams(format!("non-finite parameter in {params}")));
    }
    if dim == 0 || p == 1.0 {
        return Err(Error::InvalidParams(format!("exponents undefined for {params}")));
    }
    let n = params.n();
    let s_c = n / 2.0 - (2.0 + 2.0 * b + alpha) / (2.0 * (p - 1.0));
    let kinetic_exp = n * p - n - alpha - 2.0 * b;
    let mass_exp = 2.0 * p - kinetic_exp;
    let k_riesz = if alpha > 0.0 && alpha < n {
        riesz_constant(dim, alpha)
    } else {
        f64::NAN
    };
    let p_lower = 1.0 + (2.0 + alpha + 2.0 * b) / n;
    let p_upper = if dim > 2 {
        1.0 + (2.0 + alpha + 2.0 * b) / (n - 2.0)
    } else {
        f64::INFINITY
    };
    Ok(DerivedExponents { s_c, mass_exp, kinetic_exp, k_riesz, p_lower, p_upper })
}

/// One failed admissibility condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub condition: String,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (value {})", self.condition, self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Validity {
    Ok,
    Rejected(Vec<Violation>),
}

impl Validity {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validity::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Validity::Ok => &[],
            Validity::Rejected(v) => v,
        }
    }

    /// `Err(InvalidParams)` listing every violation.
    pub fn into_result(self) -> Result<()> {
        match self {
            Validity::Ok => Ok(()),
            Validity::Rejected(v) => Err(Error::InvalidParams(
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            )),
        }
    }
}

/// One admissibility condition evaluated on a parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub condition: String,
    pub value: f64,
    pub holds: bool,
}

/// Every admissibility condition, in a fixed order; boundary cases fail.
pub fn check_conditions(params: &ModelParams) -> Vec<Condition> {
    let ModelParams { dim, alpha, b, p } = *params;
    let n = params.n();
    let mut out = Vec::new();
    let mut need = |holds: bool, condition: &str, value: f64| {
        out.push(Condition { condition: condition.to_string(), value, holds });
    };
    let finite = alpha.is_finite() && b.is_finite() && p.is_finite();
    need(finite, "all parameters finite", f64::NAN);
    if !finite {
        return out;
    }
    need(dim >= 3, "N >= 3", n);
    need(alpha > 0.0, "alpha > 0", alpha);
    need(alpha < n, "alpha < N", alpha);
    need(b < 0.0, "b < 0", b);
    need(p >= 2.0, "p >= 2", p);
    let c1 = 2.0 + alpha + 2.0 * b;
    let c2 = n + b;
    let c3 = n + 4.0 * b + 2.0 * alpha;
    let c4 = 4.0 + alpha + 2.0 * b - n;
    need(c1 > 0.0, "2+alpha+2b > 0", c1);
    need(c2 > 0.0, "N+b > 0", c2);
    need(c3 > 0.0, "N+4b+2alpha > 0", c3);
    need(c4 > 0.0, "4+alpha+2b-N > 0", c4);
    let lower = 1.0 + c1 / n;
    need(p > lower, &format!("p > 1+(2+alpha+2b)/N = {lower}"), p);
    if dim > 2 {
        let upper = 1.0 + c1 / (n - 2.0);
        need(p < upper, &format!("p < 1+(2+alpha+2b)/(N-2) = {upper}"), p);
    }
    out
}

/// Checks every admissibility condition; boundary cases are rejected.
pub fn validate(params: &ModelParams) -> Validity {
    let out: Vec<Violation> = check_conditions(params)
        .into_iter()
        .filter(|c| !c.holds)
        .map(|c| Violation { condition: c.condition, value: c.value })
        .collect();
    if out.is_empty() {
        Validity::Ok
    } else {
        Validity::Rejected(out)
    }
}

/// Validates then derives.
pub fn admissible_exponents(params: &ModelParams) -> Result<DerivedExponents> {
    validate(params).into_result()?;
    derive_exponents(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_exponents() {
        let e = derive_exponents(&ModelParams::reference()).unwrap();
        assert_relative_eq!(e.s_c, 0.75, epsilon = 1e-15);
        assert_relative_eq!(e.kinetic_exp, 5.0, epsilon = 1e-15);
        assert_relative_eq!(e.mass_exp, 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.k_riesz, 1.0 / (4.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn secondary_exponents() {
        let e = derive_exponents(&ModelParams::secondary()).unwrap();
        assert_relative_eq!(e.s_c, 0.25, epsilon = 1e-15);
        assert_relative_eq!(e.kinetic_exp, 2.5, epsilon = 1e-15);
        assert_relative_eq!(e.mass_exp, 1.5, epsilon = 1e-15);
        // Γ(1)/(Γ(1/2) π^{3/2} 2) = 1/(2π²)
        assert_relative_eq!(e.k_riesz, 1.0 / (2.0 * PI * PI), max_relative = 1e-14);
    }

    #[test]
    fn rejects_lower_endpoint() {
        let v = validate(&ModelParams::new(3, 2.0, -0.5, 2.0));
        assert!(!v.is_ok());
        assert_eq!(v.violations().len(), 1);
        assert!(v.violations()[0].condition.starts_with("p > 1+"));
    }

    #[test]
    fn rejects_structural_condition() {
        let v = validate(&ModelParams::new(3, 0.5, -1.2, 2.5));
        let hit = v.violations().iter().find(|x| x.condition.starts_with("N+4b+2alpha")).unwrap();
        assert_relative_eq!(hit.value, -0.8, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(derive_exponents(&ModelParams::new(3, f64::NAN, -0.5, 3.0)).is_err());
        assert!(!validate(&ModelParams::new(3, 2.0, f64::INFINITY, 3.0)).is_ok());
    }

    #[test]
    fn references_are_admissible() {
        assert!(validate(&ModelParams::reference()).is_ok());
        assert!(validate(&ModelParams::secondary()).is_ok());
    }

    proptest! {
        #[test]
        fn accepted_sets_are_intercritical(
            dim in 3usize..6, a in 0.01f64..0.99, bb in 0.01f64..0.99, t in 0.01f64..0.99,
        ) {
            let n = dim as f64;
            let alpha = a * n;
            let b = -bb * 2.0;
            let lower = 1.0 + (2.0 + alpha + 2.0 * b) / n;
            let upper = 1.0 + (2.0 + alpha + 2.0 * b) / (n - 2.0);
            let p = lower + t * (upper - lower);
            let params = ModelParams::new(dim, alpha, b, p);
            prop_assume!(validate(&params).is_ok());
            let e = derive_exponents(&params).unwrap();
            prop_assert!(e.s_c > 0.0 && e.s_c < 1.0);
            prop_assert!(e.kinetic_exp > 2.0 && e.kinetic_exp < 2.0 * p);
            prop_assert!(e.mass_exp > 0.0);
            let scale = e.kinetic_exp.abs().max(1.0);
            prop_assert!((e.kinetic_exp - (2.0 * (p - 1.0) * e.s_c + 2.0)).abs() <= 1e-12 * scale);
            prop_assert!((e.mass_exp - 2.0 * (p - 1.0) * (1.0 - e.s_c)).abs() <= 1e-12 * scale);
            prop_assert!(e.k_riesz > 0.0 && e.k_riesz.is_finite());
        }
    }
}
