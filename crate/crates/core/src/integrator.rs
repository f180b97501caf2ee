//! Strang split-step evolution `K_{dt/2} N_dt K_{dt/2}` with scheduled diagnostics.
//!
//! `K_τ` is the exact free flow and `N_τ : u ↦ e^{iτW}u` the exact nonlinear
//! flow: `W` depends on `|u|` only and `|u|` does not change along `N_τ`.

use crate::detectors::{coercivity_monitor, PullbackTracker, Verdict};
use crate::error::{Error, Result};
use crate::grid::{boundary_mass, mass_inside, ComplexField};
use crate::ground_state::kinetic_product;
use crate::morawetz::{local_lq, morawetz_action, CutoffField, MorawetzWeight};
use crate::nonlinearity::NonlinearityContext;
use crate::operators::sobolev_seminorm;
use crate::snapshot;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Version of the diagnostics and coercivity CSV layouts.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const DIAGNOSTICS_HEADER: &str =
    "t,mass,energy_2p,energy_p,grad_l2,hsc_norm,potential_P,local_mass,morawetz_action,kinetic_threshold_ratio,boundary_mass";
pub const COERCIVITY_HEADER: &str = "t,kinetic_ratio,ball_ratio,local_lq,high_mode_fraction";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationPolicy {
    /// Record when the guard trips and keep going.
    Flag,
    /// Stop with a domain-truncation verdict.
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupCriteria {
    /// Stop once `‖∇u‖` exceeds this multiple of its initial value.
    pub growth_factor: f64,
    /// Stop once `‖∇u‖ / (k_max ‖u‖)` exceeds this value, `k_max = π/h`:
    /// the profile has collapsed onto the grid scale. Checked every step.
    pub saturation: Option<f64>,
}

impl Default for BlowupCriteria {
    fn default() -> Self {
        Self { growth_factor: 1e3, saturation: Some(0.5) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    pub diag_stride: usize,
    pub snapshot_times: Vec<f64>,
    /// Damp the top of the spectrum by `exp(-36(|k|/k_max)^36)` per step.
    pub filter_on: bool,
    /// Test hook: `false` turns the run into free evolution.
    pub nonlinearity: bool,
    pub truncation: TruncationPolicy,
    /// Guard level for `∫_{|x|>0.4L}|u|²` relative to the initial mass.
    pub guard_fraction: f64,
    pub blowup: BlowupCriteria,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            diag_stride: 10,
            snapshot_times: Vec::new(),
            filter_on: false,
            nonlinearity: true,
            truncation: TruncationPolicy::Flag,
            guard_fraction: 1e-6,
            blowup: BlowupCriteria::default(),
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("T must be positive, got {}", self.t_final)));
        }
        if self.diag_stride == 0 {
            return Err(Error::InvalidArgument("diag_stride must be at least 1".into()));
        }
        self.steps()?;
        for &t in &self.snapshot_times {
            self.step_of(t)?;
        }
        Ok(())
    }

    /// Number of steps; T must be a whole number of steps.
    pub fn steps(&self) -> Result<usize> {
        self.step_of(self.t_final)
    }

    fn step_of(&self, t: f64) -> Result<usize> {
        let s = t / self.dt;
        let n = s.round();
        if !(t >= 0.0 && t <= self.t_final * (1.0 + 1e-12)) || (s - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::InvalidArgument(format!("time {t} is not a step multiple of dt = {} inside [0, T]", self.dt)));
        }
        Ok(n as usize)
    }
}

/// Split-step propagator for a fixed dt (negative dt runs backwards).
pub struct Stepper<'a> {
    ctx: &'a NonlinearityContext,
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    nonlinear: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(ctx: &'a NonlinearityContext, dt: f64, filter_on: bool, nonlinear: bool) -> Self {
        let kmax = ctx.grid().k_max();
        let table = |tau: f64, share: f64| -> Vec<Complex64> {
            ctx.fourier()
                .k_sq()
                .par_iter()
                .map(|&k2| {
                    let damp = if filter_on { (-36.0 * share * (k2.sqrt() / kmax).powi(36)).exp() } else { 1.0 };
                    Complex64::from_polar(damp, -k2 * tau)
                })
                .collect()
        };
        Self { ctx, dt, half: table(0.5 * dt, 0.5), full: table(dt, 1.0), nonlinear }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Forward transform of `u` in place, returning `(‖∇u‖, ‖∇u‖/(k_max‖u‖))`.
    fn to_spectrum(&self, u: &mut ComplexField) -> (f64, f64) {
        let fo = self.ctx.fourier();
        let grid = self.ctx.grid();
        let v = u.values_mut();
        fo.forward_in_place(v);
        let (mut g, mut m) = (0.0, 0.0);
        for (z, k2) in v.iter().zip(fo.k_sq()) {
            let e = z.norm_sqr();
            m += e;
            g += k2 * e;
        }
        let norm = grid.cell_volume() / grid.len() as f64;
        let ratio = if m > 0.0 { (g / m).sqrt() / grid.k_max() } else { 0.0 };
        ((g * norm).sqrt(), ratio)
    }

    fn from_spectrum(&self, u: &mut ComplexField, table: &[Complex64]) {
        let v = u.values_mut();
        v.par_iter_mut().zip(table.par_iter()).for_each(|(z, t)| *z *= t);
        self.ctx.fourier().inverse_in_place(v);
    }

    /// One step `K_{dt/2} N_dt K_{dt/2}`.
    pub fn step(&self, u: &mut ComplexField) -> Result<AdvanceStats> {
        self.advance(u, 1)
    }

    /// `n` steps with adjacent half kinetic steps merged.
    pub fn advance(&self, u: &mut ComplexField, n: usize) -> Result<AdvanceStats> {
        Ok(self.advance_until(u, n, |_| false)?.0)
    }

    /// As [`Stepper::advance`], but closes the run after the first step whose
    /// running stats satisfy `stop`. Returns the stats and the steps taken.
    pub fn advance_until(&self, u: &mut ComplexField, n: usize, stop: impl Fn(&AdvanceStats) -> bool) -> Result<(AdvanceStats, usize)> {
        self.ctx.grid().check_same(u.grid())?;
        let mut stats = AdvanceStats::default();
        if n == 0 {
            return Ok((stats, 0));
        }
        self.to_spectrum(u);
        self.from_spectrum(u, &self.half);
        for i in 0..n {
            if self.nonlinear {
                self.ctx.nonlinear_phase_in_place(u, self.dt)?;
            }
            let (g, r) = self.to_spectrum(u);
            if g.is_finite() && r.is_finite() {
                stats.max_grad = stats.max_grad.max(g);
                stats.max_resolution_ratio = stats.max_resolution_ratio.max(r);
            } else {
                stats.non_finite = true;
            }
            let done = i + 1 == n || stats.non_finite || stop(&stats);
            self.from_spectrum(u, if done { &self.half } else { &self.full });
            if done {
                return Ok((stats, i + 1));
            }
        }
        unreachable!("loop returns on its last step")
    }
}

/// Maxima over the steps of one [`Stepper::advance`] call, sampled between
/// the nonlinear substep and the closing kinetic substep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdvanceStats {
    pub max_grad: f64,
    pub max_resolution_ratio: f64,
    pub non_finite: bool,
}

/// Per-run monitor state: Morawetz weight, cutoff and detector radius.
pub struct Monitors {
    weight: MorawetzWeight,
    cutoff: CutoffField,
    detector_radius: f64,
    k_threshold: Option<f64>,
}

impl Monitors {
    /// `detector_radius` serves the local mass, the coercivity cutoff and the
    /// space-time average; `morawetz_radius` sets the weight.
    pub fn new(ctx: &NonlinearityContext, detector_radius: f64, morawetz_radius: f64, k_threshold: Option<f64>) -> Result<Self> {
        let grid = ctx.grid();
        Ok(Self {
            weight: MorawetzWeight::build(grid, morawetz_radius)?,
            cutoff: CutoffField::build(grid, detector_radius)?,
            detector_radius,
            k_threshold,
        })
    }

    /// Defaults `R = L/24` and `R_a = L/8`.
    pub fn with_defaults(ctx: &NonlinearityContext, k_threshold: Option<f64>) -> Result<Self> {
        let l = ctx.grid().box_length();
        Self::new(ctx, l / 24.0, l / 8.0, k_threshold)
    }

    pub fn detector_radius(&self) -> f64 {
        self.detector_radius
    }

    pub fn weight(&self) -> &MorawetzWeight {
        &self.weight
    }

    pub fn cutoff(&self) -> &CutoffField {
        &self.cutoff
    }

    pub fn k_threshold(&self) -> Option<f64> {
        self.k_threshold
    }

    pub fn record(&self, ctx: &NonlinearityContext, u: &ComplexField, t: f64) -> Result<DiagnosticRecord> {
        let f = ctx.functionals(u)?;
        let e = ctx.exponents();
        let fo = ctx.fourier();
        let (kinetic_threshold_ratio, ball_ratio) = match self.k_threshold {
            Some(k) => {
                let c = coercivity_monitor(ctx, u, k, &self.cutoff)?;
                (c.kinetic_ratio, c.ball_ratio)
            }
            None => (f64::NAN, coercivity_monitor(ctx, u, f64::INFINITY, &self.cutoff)?.ball_ratio),
        };
        debug_assert!(self.k_threshold.is_none() || (kinetic_threshold_ratio - kinetic_product(e, f.mass, f.grad_sq) / self.k_threshold.unwrap()).abs() <= 1e-12);
        let dim = ctx.grid().dim() as f64;
        let q = if dim > 2.0 { 2.0 * dim / (dim - 2.0) } else { f64::NAN };
        Ok(DiagnosticRecord {
            t,
            mass: f.mass,
            energy_2p: f.energy_2p,
            energy_p: f.energy_p,
            grad_l2: f.grad_sq.sqrt(),
            hsc_norm: sobolev_seminorm(fo, u, e.s_c)?,
            potential: f.potential,
            local_mass: mass_inside(u, self.detector_radius),
            morawetz_action: morawetz_action(fo, u, &self.weight)?,
            kinetic_threshold_ratio,
            boundary_mass: boundary_mass(u),
            ball_ratio,
            local_lq: if q.is_nan() { f64::NAN } else { local_lq(u, self.detector_radius, q) },
            high_mode_fraction: high_mode_fraction(ctx, u),
        })
    }
}

/// Share of `‖û‖²` in modes with some `|k_j| > (2/3) k_max`.
pub fn high_mode_fraction(ctx: &NonlinearityContext, u: &ComplexField) -> f64 {
    let grid = ctx.grid();
    let m = grid.points_per_axis();
    let mut hat = u.values().to_vec();
    ctx.fourier().forward_in_place(&mut hat);
    let cut = m as f64 / 3.0;
    let mut idx = vec![0usize; grid.dim()];
    let (mut high, mut total) = (0.0, 0.0);
    for (i, z) in hat.iter().enumerate() {
        grid.unravel(i, &mut idx);
        let e = z.norm_sqr();
        total += e;
        if idx.iter().any(|&j| (grid.mode(j).abs() as f64) > cut) {
            high += e;
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub mass: f64,
    pub energy_2p: f64,
    pub energy_p: f64,
    pub grad_l2: f64,
    pub hsc_norm: f64,
    pub potential: f64,
    pub local_mass: f64,
    pub morawetz_action: f64,
    /// NaN when no ground state was supplied.
    pub kinetic_threshold_ratio: f64,
    pub boundary_mass: f64,
    pub ball_ratio: f64,
    /// `∫_{|x|<R}|u|^q`, `q = 2N/(N-2)`.
    pub local_lq: f64,
    pub high_mode_fraction: f64,
}

impl DiagnosticRecord {
    pub fn diagnostics_row(&self) -> String {
        [
            self.t,
            self.mass,
            self.energy_2p,
            self.energy_p,
            self.grad_l2,
            self.hsc_norm,
            self.potential,
            self.local_mass,
            self.morawetz_action,
            self.kinetic_threshold_ratio,
            self.boundary_mass,
        ]
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
    }

    pub fn coercivity_row(&self) -> String {
        [self.t, self.kinetic_threshold_ratio, self.ball_ratio, self.local_lq, self.high_mode_fraction]
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    GradientGrowth,
    Saturation,
    NonFinite,
    DomainTruncation,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::GradientGrowth => "gradient-growth",
            StopReason::Saturation => "spectral-saturation",
            StopReason::NonFinite => "non-finite",
            StopReason::DomainTruncation => "domain-truncation",
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, StopReason::GradientGrowth | StopReason::Saturation | StopReason::NonFinite)
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryReport {
    pub dt: f64,
    pub config_t_final: f64,
    pub records: Vec<DiagnosticRecord>,
    /// `(t_{n+1}, d_n)` free pull-back increments between snapshots.
    pub pullback: Vec<(f64, f64)>,
    pub snapshot_times: Vec<f64>,
    pub stop: StopReason,
    pub stop_time: f64,
    pub steps: usize,
    /// Absolute guard level, `guard_fraction · M(u0)`.
    pub guard_level: f64,
    pub truncation_flagged: bool,
    pub first_truncation_time: Option<f64>,
    pub final_field: ComplexField,
    pub verdict: Option<Verdict>,
}

impl TrajectoryReport {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from(DIAGNOSTICS_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.diagnostics_row());
            s.push('\n');
        }
        s
    }

    pub fn coercivity_csv(&self) -> String {
        let mut s = String::from(COERCIVITY_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.coercivity_row());
            s.push('\n');
        }
        s
    }

    pub fn pullback_csv(&self) -> String {
        let mut s = String::from("t,increment\n");
        for (t, d) in &self.pullback {
            s.push_str(&format!("{t:.16e},{d:.16e}\n"));
        }
        s
    }

    /// Relative drift `max_t |q(t) - q(0)| / |q(0)|` of one recorded quantity.
    pub fn max_relative_drift(&self, q: impl Fn(&DiagnosticRecord) -> f64) -> f64 {
        let Some(first) = self.records.first() else { return 0.0 };
        let q0 = q(first);
        self.records.iter().map(|r| (q(r) - q0).abs()).fold(0.0, f64::max) / q0.abs()
    }
}

/// Snapshot destination: `dir/snapshot_NNNN.chqs`.
#[derive(Clone, Debug)]
pub struct SnapshotSink {
    pub dir: PathBuf,
    pub params: crate::model::ModelParams,
}

impl SnapshotSink {
    pub fn path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("snapshot_{index:04}.chqs"))
    }
}

/// Runs `u0` to `T` or an early stop.
pub fn evolve(ctx: &NonlinearityContext, u0: &ComplexField, config: &EvolveConfig, monitors: &Monitors, sink: Option<&SnapshotSink>) -> Result<TrajectoryReport> {
    config.validate()?;
    ctx.grid().check_same(u0.grid())?;
    let n_steps = config.steps()?;
    let snap_steps: BTreeSet<usize> = config.snapshot_times.iter().map(|&t| config.step_of(t)).collect::<Result<_>>()?;
    let mut events: BTreeSet<usize> = (0..=n_steps).step_by(config.diag_stride).collect();
    events.insert(n_steps);
    events.extend(snap_steps.iter().copied());

    let stepper = Stepper::new(ctx, config.dt, config.filter_on, config.nonlinearity);
    let mut u = u0.clone();
    let mut records = Vec::new();
    let mut tracker = PullbackTracker::default();
    let mut snapshot_times = Vec::new();
    let mut stop = StopReason::Completed;
    let mut first_truncation_time = None;
    let mut current = 0usize;
    let mut guard_level = f64::NAN;

    let grad_init = crate::operators::gradient_norm_sq(ctx.fourier(), u0)?.sqrt();
    let tripped = |s: &AdvanceStats| {
        s.non_finite
            || (grad_init > 0.0 && s.max_grad > config.blowup.growth_factor * grad_init)
            || config.blowup.saturation.is_some_and(|lim| s.max_resolution_ratio > lim)
    };
    for &e in &events {
        let (stats, taken) = stepper.advance_until(&mut u, e - current, tripped)?;
        current += taken;
        let t = current as f64 * config.dt;
        if stats.non_finite || !u.is_finite() {
            stop = StopReason::NonFinite;
            break;
        }
        if tripped(&stats) {
            stop = if grad_init > 0.0 && stats.max_grad > config.blowup.growth_factor * grad_init {
                StopReason::GradientGrowth
            } else {
                StopReason::Saturation
            };
            records.push(monitors.record(ctx, &u, t)?);
            break;
        }
        if snap_steps.contains(&e) {
            tracker.push(ctx.fourier(), t, &u)?;
            if let Some(s) = sink {
                snapshot::write(&s.path(snapshot_times.len()), &u, t, &s.params)?;
            }
            snapshot_times.push(t);
        }
        if e % config.diag_stride != 0 && e != n_steps {
            continue;
        }
        let rec = monitors.record(ctx, &u, t)?;
        if records.is_empty() {
            guard_level = config.guard_fraction * rec.mass;
        }
        records.push(rec);
        if !(rec.grad_l2.is_finite() && rec.mass.is_finite()) {
            stop = StopReason::NonFinite;
            break;
        }
        if rec.boundary_mass > guard_level {
            first_truncation_time.get_or_insert(t);
            if config.truncation == TruncationPolicy::Stop {
                stop = StopReason::DomainTruncation;
                break;
            }
        }
    }
    Ok(TrajectoryReport {
        dt: config.dt,
        config_t_final: config.t_final,
        records,
        pullback: tracker.increments().to_vec(),
        snapshot_times,
        stop,
        stop_time: current as f64 * config.dt,
        steps: current,
        guard_level,
        truncation_flagged: first_truncation_time.is_some(),
        first_truncation_time,
        final_field: u,
        verdict: None,
    })
}

/// Writes `diagnostics.csv`, `coercivity.csv` and `pullback.csv` into `dir`.
pub fn write_csvs(dir: &Path, report: &TrajectoryReport) -> Result<()> {
    for (name, body) in [
        ("diagnostics.csv", report.diagnostics_csv()),
        ("coercivity.csv", report.coercivity_csv()),
        ("pullback.csv", report.pullback_csv()),
    ] {
        let mut f = std::fs::File::create(dir.join(name))?;
        f.write_all(body.as_bytes())?;
    }
    Ok(())
}
