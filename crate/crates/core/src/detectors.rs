//! Scattering and blow-up proxies: threshold classification, local mass,
//! free pull-back increments, coercivity monitors and the run verdict.

use crate::error::{Error, Result};
use crate::grid::{mass_inside, ComplexField, Fourier};
use crate::ground_state::{kinetic_product, mass_energy_product, Thresholds};
use crate::integrator::{StopReason, TrajectoryReport};
use crate::morawetz::{spacetime_average, CutoffField};
use crate::nonlinearity::NonlinearityContext;
use crate::operators::{free_propagate, gradient_norm_sq, h1_norm_sq};
use std::fmt;

/// Relative distance from a threshold inside which data count as on the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdClass {
    SubThreshold,
    AboveKinetic,
    AboveEnergy,
    OutsideHypotheses(String),
}

impl ThresholdClass {
    pub fn name(&self) -> &'static str {
        match self {
            ThresholdClass::SubThreshold => "sub-threshold",
            ThresholdClass::AboveKinetic => "above-kinetic",
            ThresholdClass::AboveEnergy => "above-energy",
            ThresholdClass::OutsideHypotheses(_) => "outside-hypotheses",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdReport {
    /// `M^{1-s_c}E^{s_c}` over its threshold; NaN when `E < 0`.
    pub me_ratio: f64,
    /// `‖u‖^{1-s_c}‖∇u‖^{s_c}` over its threshold.
    pub kinetic_ratio: f64,
    pub class: ThresholdClass,
}

pub fn threshold_classify(ctx: &NonlinearityContext, u0: &ComplexField, thresholds: &Thresholds) -> Result<ThresholdReport> {
    let e = ctx.exponents();
    let f = ctx.functionals(u0)?;
    let kinetic_ratio = kinetic_product(e, f.mass, f.grad_sq) / thresholds.kinetic;
    if f.mass == 0.0 {
        return Ok(ThresholdReport { me_ratio: 0.0, kinetic_ratio: 0.0, class: ThresholdClass::SubThreshold });
    }
    if f.energy_2p < 0.0 {
        let why = format!("E(u0) = {:e} < 0, so M^(1-s_c) E^s_c is undefined", f.energy_2p);
        return Ok(ThresholdReport { me_ratio: f64::NAN, kinetic_ratio, class: ThresholdClass::OutsideHypotheses(why) });
    }
    let me_ratio = mass_energy_product(e, f.mass, f.energy_2p) / thresholds.me;
    let class = if (me_ratio - 1.0).abs() <= BOUNDARY_TOLERANCE || (kinetic_ratio - 1.0).abs() <= BOUNDARY_TOLERANCE {
        ThresholdClass::OutsideHypotheses(format!("on the threshold: ME ratio {me_ratio:.8}, kinetic ratio {kinetic_ratio:.8}"))
    } else if me_ratio >= 1.0 {
        ThresholdClass::AboveEnergy
    } else if kinetic_ratio > 1.0 {
        ThresholdClass::AboveKinetic
    } else {
        ThresholdClass::SubThreshold
    };
    Ok(ThresholdReport { me_ratio, kinetic_ratio, class })
}

/// `∫_{|x|<=R} |u|²`; needs `R < L/2`.
pub fn local_mass(u: &ComplexField, radius: f64) -> Result<f64> {
    let half = 0.5 * u.grid().box_length();
    if !(radius >= 0.0 && radius < half) {
        return Err(Error::InvalidArgument(format!("detector radius {radius} must lie in [0, {half})")));
    }
    Ok(mass_inside(u, radius))
}

/// `d_n = ‖v(t_{n+1}) - v(t_n)‖_{H¹}` with `v(t) = e^{-itΔ}u(t)`.
pub fn pullback_cauchy(fourier: &Fourier, snapshots: &[(f64, ComplexField)]) -> Result<Vec<f64>> {
    if snapshots.len() < 3 {
        return Err(Error::InvalidArgument(format!("pull-back test needs at least 3 snapshots, got {}", snapshots.len())));
    }
    let mut tracker = PullbackTracker::default();
    for (t, u) in snapshots {
        tracker.push(fourier, *t, u)?;
    }
    Ok(tracker.increments().iter().map(|(_, d)| *d).collect())
}

/// Online form of [`pullback_cauchy`]: keeps only the last pulled-back field.
#[derive(Clone, Debug, Default)]
pub struct PullbackTracker {
    last: Option<(f64, ComplexField)>,
    increments: Vec<(f64, f64)>,
}

impl PullbackTracker {
    pub fn push(&mut self, fourier: &Fourier, t: f64, u: &ComplexField) -> Result<()> {
        if let Some((t0, _)) = &self.last {
            if t <= *t0 {
                return Err(Error::InvalidArgument(format!("snapshot times must increase: {t} after {t0}")));
            }
        }
        let v = free_propagate(fourier, u, -t)?;
        if let Some((_, prev)) = &self.last {
            let d = h1_norm_sq(fourier, &v.sub(prev)?)?.sqrt();
            self.increments.push((t, d));
        }
        self.last = Some((t, v));
        Ok(())
    }

    /// `(t_{n+1}, d_n)` pairs.
    pub fn increments(&self) -> &[(f64, f64)] {
        &self.increments
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coercivity {
    /// `‖u‖^{1-s_c}‖∇u‖^{s_c} / K_threshold`.
    pub kinetic_ratio: f64,
    /// `[‖∇(χ_R u)‖² - (B/2p) P(χ_R u)] / ‖∇(χ_R u)‖²`, 1 when `χ_R u = 0`.
    pub ball_ratio: f64,
}

pub fn coercivity_monitor(ctx: &NonlinearityContext, u: &ComplexField, k_threshold: f64, cutoff: &CutoffField) -> Result<Coercivity> {
    let e = ctx.exponents();
    let fo = ctx.fourier();
    let kinetic_ratio = kinetic_product(e, u.norm_sq(), gradient_norm_sq(fo, u)?) / k_threshold;
    let cu = cutoff.apply(u)?;
    let g = gradient_norm_sq(fo, &cu)?;
    let ball_ratio = if g == 0.0 {
        1.0
    } else {
        let p = ctx.potential_functional(&cu)?;
        (g - e.kinetic_exp / (2.0 * ctx.params().p) * p) / g
    };
    Ok(Coercivity { kinetic_ratio, ball_ratio })
}

/// Smallest C with `|Δ local mass / Δt| <= C ‖u‖‖∇u‖ / R` between consecutive records.
pub fn local_mass_flux_constant(report: &TrajectoryReport, radius: f64) -> f64 {
    report
        .records
        .windows(2)
        .map(|w| {
            let rate = (w[1].local_mass - w[0].local_mass).abs() / (w[1].t - w[0].t);
            let scale = w[0].mass.sqrt().max(w[1].mass.sqrt()) * w[0].grad_l2.max(w[1].grad_l2) / radius;
            if scale > 0.0 {
                rate / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictLabel {
    ScatteringProxy,
    BlowupSuspected,
    Undecided,
    DomainTruncation,
}

impl VerdictLabel {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictLabel::ScatteringProxy => "scattering-proxy",
            VerdictLabel::BlowupSuspected => "blowup-suspected",
            VerdictLabel::Undecided => "undecided",
            VerdictLabel::DomainTruncation => "domain-truncation",
        }
    }
}

/// One row of evidence: `value` compared against `threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evidence {
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Evidence {
    fn new(criterion: &str, value: f64, threshold: f64, passed: bool) -> Self {
        Self { criterion: criterion.to_string(), value, threshold, passed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub evidence: Vec<Evidence>,
    /// A blow-up label requires that some dt-refined rerun also tripped.
    pub refinement_consistent: bool,
}

impl Verdict {
    pub fn evidence_for(&self, criterion: &str) -> Option<&Evidence> {
        self.evidence.iter().find(|e| e.criterion == criterion)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict = {}", self.label.name())?;
        writeln!(f, "refinement_consistent = {}", self.refinement_consistent)?;
        for e in &self.evidence {
            writeln!(f, "evidence {} value={:.10e} threshold={:.10e} {}", e.criterion, e.value, e.threshold, if e.passed { "pass" } else { "fail" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    /// `ε²` for the local-mass criterion, relative to `M(u0)`.
    pub local_mass_eps_rel: f64,
    /// `ε_scat` for the pull-back increments, relative to `M(u0)`.
    pub pullback_eps_rel: f64,
    /// Dyadic levels of the space-time average.
    pub spacetime_levels: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { local_mass_eps_rel: 1e-3, pullback_eps_rel: 1e-3, spacetime_levels: 3 }
    }
}

/// Final/first window ratio of the space-time average.
pub fn spacetime_decay(report: &TrajectoryReport, levels: usize) -> f64 {
    let samples: Vec<(f64, f64)> = report.records.iter().map(|r| (r.t, r.local_lq)).collect();
    let Some(t_end) = report.records.last().map(|r| r.t) else { return f64::NAN };
    let w = spacetime_average(&samples, t_end, levels);
    match (w.first(), w.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => b / a,
        (Some(_), Some(&b)) if b == 0.0 => 0.0,
        _ => f64::NAN,
    }
}

/// Aggregates the monitors of a finished run and its dt-refined reruns.
pub fn classify(primary: &TrajectoryReport, reruns: &[TrajectoryReport], config: &DetectorConfig) -> Verdict {
    let mut evidence = Vec::new();
    if primary.stop == StopReason::DomainTruncation {
        let bm = primary.records.last().map(|r| r.boundary_mass).unwrap_or(f64::NAN);
        evidence.push(Evidence::new("boundary_mass", bm, primary.guard_level, false));
        return Verdict { label: VerdictLabel::DomainTruncation, evidence, refinement_consistent: false };
    }
    if primary.stop.is_blowup() {
        evidence.push(Evidence::new(primary.stop.name(), primary.stop_time, primary.config_t_final, true));
        let confirmed: Vec<&TrajectoryReport> = reruns.iter().filter(|r| r.stop.is_blowup()).collect();
        for r in reruns {
            evidence.push(Evidence::new(&format!("rerun_dt={:e}_{}", r.dt, r.stop.name()), r.stop_time, r.config_t_final, r.stop.is_blowup()));
        }
        let consistent = !confirmed.is_empty();
        let label = if consistent { VerdictLabel::BlowupSuspected } else { VerdictLabel::Undecided };
        return Verdict { label, evidence, refinement_consistent: consistent };
    }
    let ok = scattering_evidence(primary, config, &mut evidence);
    let reruns_ok = !reruns.is_empty() && reruns.iter().all(|r| !r.stop.is_blowup() && scattering_evidence(r, config, &mut Vec::new()));
    let label = if ok { VerdictLabel::ScatteringProxy } else { VerdictLabel::Undecided };
    Verdict { label, evidence, refinement_consistent: reruns_ok }
}

/// Local mass averaged over the final dyadic window `[T/2, T]`.
///
/// Radiation that wraps around the periodic box refocuses near the origin, so
/// single samples carry recurrence spikes; the window mean follows the trend.
pub fn late_local_mass(report: &TrajectoryReport) -> f64 {
    let samples: Vec<(f64, f64)> = report.records.iter().map(|r| (r.t, r.local_mass)).collect();
    match report.records.last() {
        Some(last) => spacetime_average(&samples, last.t, 1).last().copied().unwrap_or(f64::NAN),
        None => f64::NAN,
    }
}

/// Index of the first pull-back increment below `eps` after which all stay
/// below it, if any.
pub fn pullback_settles(increments: &[f64], eps: f64) -> Option<usize> {
    // NaN counts as not settled
    let k = increments.iter().rposition(|&d| !(d < eps)).map_or(0, |i| i + 1);
    (k < increments.len()).then_some(k)
}

fn scattering_evidence(report: &TrajectoryReport, config: &DetectorConfig, evidence: &mut Vec<Evidence>) -> bool {
    let Some(first) = report.records.first() else {
        return false;
    };
    let eps2 = config.local_mass_eps_rel * first.mass;
    let late = late_local_mass(report);
    let local = Evidence::new("local_mass_late_mean", late, eps2, late < eps2);
    let eps = config.pullback_eps_rel * first.mass;
    let d: Vec<f64> = report.pullback.iter().map(|(_, d)| *d).collect();
    let settles = d.len() >= 2 && pullback_settles(&d, eps).is_some();
    let d_final = d.last().copied().unwrap_or(f64::NAN);
    let pull = Evidence::new("pullback_final", d_final, eps, settles);
    let head = d[..d.len() / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = d[d.len() / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let envelope = Evidence::new("pullback_tail_over_head", tail / head, 1.0, tail < head);
    let kmax = report.records.iter().map(|r| r.kinetic_threshold_ratio).fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let kin = Evidence::new("kinetic_ratio_max", kmax, 1.0, kmax < 1.0);
    let decay = spacetime_decay(report, config.spacetime_levels);
    let st = Evidence::new("spacetime_final_over_first", decay, 0.1, decay < 0.1);
    let bmin = report.records.iter().map(|r| r.ball_ratio).fold(f64::INFINITY, f64::min);
    let ball = Evidence::new("ball_ratio_min", bmin, 0.0, bmin > 0.0);
    let ok = local.passed && pull.passed && kin.passed;
    evidence.extend([local, pull, envelope, kin, st, ball]);
    if report.truncation_flagged {
        evidence.push(Evidence::new("boundary_guard_tripped_at", report.first_truncation_time.unwrap_or(f64::NAN), report.guard_level, false));
    }
    ok
}
