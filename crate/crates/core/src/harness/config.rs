//! Flat `section.key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; unknown or
//! repeated keys are errors that carry the line number. [`RunConfig::to_text`]
//! writes every key with its resolved value and parses back to the same config.

use crate::error::{Error, Result};
use crate::ground_state::SeedProfile;
use crate::grid::WeightRegularization;
use crate::integrator::TruncationPolicy;
use crate::model::ModelParams;
use crate::nonlinearity::{EnergyConvention, NonlinearityOptions};
use crate::operators::RieszKernel;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `c · Q` with Q from the ground-state artifacts.
    GroundStateMultiple { c: f64 },
    /// `A exp(-|x-x0|²/(2σ²)) e^{ik·x}`.
    Gaussian { amplitude: f64, width: f64, center: Vec<f64>, momentum: Vec<f64> },
    /// Sum of random wave packets drawn from `run.seed`.
    Random { amplitude: f64 },
    Snapshot { path: PathBuf },
}

impl InitialData {
    pub fn kind(&self) -> &'static str {
        match self {
            InitialData::GroundStateMultiple { .. } => "ground-state",
            InitialData::Gaussian { .. } => "gaussian",
            InitialData::Random { .. } => "random",
            InitialData::Snapshot { .. } => "snapshot",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid_points: usize,
    pub box_length: f64,
    pub weight: WeightChoice,
    pub kernel: RieszKernel,
    pub gs_tol: f64,
    pub gs_max_iter: usize,
    pub gs_seed: SeedProfile,
    /// Ground-state snapshot; relative paths resolve against the output directory.
    pub gs_path: PathBuf,
    pub initial: InitialData,
    pub dt: f64,
    pub t_final: f64,
    pub diag_stride: usize,
    /// Snapshot spacing in time; 0 writes none.
    pub snapshot_every: f64,
    pub filter: bool,
    pub nonlinearity: bool,
    pub truncation: TruncationPolicy,
    pub guard_fraction: f64,
    pub growth_factor: f64,
    pub saturation: Option<f64>,
    /// `None` resolves to `L/24`.
    pub detector_radius: Option<f64>,
    /// `None` resolves to `L/8`.
    pub morawetz_radius: Option<f64>,
    pub local_mass_eps: f64,
    pub pullback_eps: f64,
    pub spacetime_levels: usize,
    /// Rerun at dt/2 when a blow-up trigger fires.
    pub rerun: bool,
    pub scan_amplitudes: Vec<f64>,
    pub verify_grid_points: usize,
    pub verify_box_length: f64,
    pub verify_energy: EnergyConvention,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightChoice {
    Lattice,
    /// `eps = None` is `h/2`.
    Smoothed { eps: Option<f64> },
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            grid_points: 128,
            box_length: 24.0,
            weight: WeightChoice::Lattice,
            kernel: RieszKernel::FreeSpace,
            gs_tol: 1e-10,
            gs_max_iter: 2000,
            gs_seed: SeedProfile::Gaussian,
            gs_path: PathBuf::from("ground_state.chqs"),
            initial: InitialData::GroundStateMultiple { c: 0.9 },
            dt: 1e-3,
            t_final: 10.0,
            diag_stride: 100,
            snapshot_every: 1.0,
            filter: false,
            nonlinearity: true,
            truncation: TruncationPolicy::Flag,
            guard_fraction: 1e-6,
            growth_factor: 1e3,
            saturation: Some(0.5),
            detector_radius: None,
            morawetz_radius: None,
            local_mass_eps: 1e-3,
            pullback_eps: 1e-3,
            spacetime_levels: 3,
            rerun: true,
            scan_amplitudes: vec![0.5, 0.7, 0.9, 1.2, 1.4],
            verify_grid_points: 16,
            verify_box_length: 8.0,
            verify_energy: EnergyConvention::TwoP,
            seed: 12345,
        }
    }
}

const KEYS: &[&str] = &[
    "model.dim",
    "model.alpha",
    "model.b",
    "model.p",
    "grid.M",
    "grid.L",
    "nonlinearity.weight",
    "nonlinearity.weight_eps",
    "nonlinearity.kernel",
    "ground_state.tol",
    "ground_state.max_iter",
    "ground_state.seed",
    "ground_state.path",
    "initial.kind",
    "initial.c",
    "initial.amplitude",
    "initial.width",
    "initial.center",
    "initial.momentum",
    "initial.path",
    "evolve.dt",
    "evolve.T",
    "evolve.diag_stride",
    "evolve.snapshot_every",
    "evolve.filter",
    "evolve.nonlinearity",
    "evolve.truncation",
    "evolve.guard_fraction",
    "evolve.growth_factor",
    "evolve.saturation",
    "detector.radius",
    "detector.morawetz_radius",
    "detector.local_mass_eps",
    "detector.pullback_eps",
    "detector.spacetime_levels",
    "detector.rerun",
    "scan.amplitudes",
    "verify.M",
    "verify.L",
    "verify.energy",
    "run.seed",
];

fn num(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, found `{v}`"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, found `{v}`"))
    }
}

fn int<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, found `{v}`"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found `{v}`")),
    }
}

fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

fn auto_or_num(v: &str) -> std::result::Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        num(v).map(Some)
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn fmt_opt(v: Option<f64>, none: &str) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_else(|| none.to_string())
}

/// Fields of the initial-data section, collected before the kind is known.
#[derive(Default)]
struct InitialParts {
    kind: Option<String>,
    c: Option<f64>,
    amplitude: Option<f64>,
    width: Option<f64>,
    center: Option<Vec<f64>>,
    momentum: Option<Vec<f64>>,
    path: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        let mut init = InitialParts::default();
        let mut weight_name: Option<(usize, String)> = None;
        let mut weight_eps: Option<Option<f64>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config { line, msg: format!("expected `key = value`, found `{content}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config { line, msg: format!("unknown key `{key}`") });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config { line, msg: format!("duplicate key `{key}`") });
            }
            let wrap = |r: std::result::Result<(), String>| r.map_err(|msg| Error::Config { line, msg: format!("{key}: {msg}") });
            wrap((|| {
                match key {
                    "model.dim" => cfg.params.dim = int(value)?,
                    "model.alpha" => cfg.params.alpha = num(value)?,
                    "model.b" => cfg.params.b = num(value)?,
                    "model.p" => cfg.params.p = num(value)?,
                    "grid.M" => cfg.grid_points = int(value)?,
                    "grid.L" => cfg.box_length = num(value)?,
                    "nonlinearity.weight" => weight_name = Some((line, value.to_string())),
                    "nonlinearity.weight_eps" => weight_eps = Some(auto_or_num(value)?),
                    "nonlinearity.kernel" => {
                        cfg.kernel = match value {
                            "free" => RieszKernel::FreeSpace,
                            "periodic" => RieszKernel::Periodic,
                            _ => return Err(format!("expected free or periodic, found `{value}`")),
                        }
                    }
                    "ground_state.tol" => cfg.gs_tol = num(value)?,
                    "ground_state.max_iter" => cfg.gs_max_iter = int(value)?,
                    "ground_state.seed" => {
                        cfg.gs_seed = SeedProfile::from_id(value).ok_or_else(|| format!("unknown seed profile `{value}` (gauss1, gauss2, sech)"))?
                    }
                    "ground_state.path" => cfg.gs_path = PathBuf::from(value),
                    "initial.kind" => init.kind = Some(value.to_string()),
                    "initial.c" => init.c = Some(num(value)?),
                    "initial.amplitude" => init.amplitude = Some(num(value)?),
                    "initial.width" => init.width = Some(num(value)?),
                    "initial.center" => init.center = Some(list(value)?),
                    "initial.momentum" => init.momentum = Some(list(value)?),
                    "initial.path" => init.path = Some(PathBuf::from(value)),
                    "evolve.dt" => cfg.dt = num(value)?,
                    "evolve.T" => cfg.t_final = num(value)?,
                    "evolve.diag_stride" => cfg.diag_stride = int(value)?,
                    "evolve.snapshot_every" => cfg.snapshot_every = num(value)?,
                    "evolve.filter" => cfg.filter = boolean(value)?,
                    "evolve.nonlinearity" => cfg.nonlinearity = boolean(value)?,
                    "evolve.truncation" => {
                        cfg.truncation = match value {
                            "flag" => TruncationPolicy::Flag,
                            "stop" => TruncationPolicy::Stop,
                            _ => return Err(format!("expected flag or stop, found `{value}`")),
                        }
                    }
                    "evolve.guard_fraction" => cfg.guard_fraction = num(value)?,
                    "evolve.growth_factor" => cfg.growth_factor = num(value)?,
                    "evolve.saturation" => cfg.saturation = if value == "off" { None } else { Some(num(value)?) },
                    "detector.radius" => cfg.detector_radius = auto_or_num(value)?,
                    "detector.morawetz_radius" => cfg.morawetz_radius = auto_or_num(value)?,
                    "detector.local_mass_eps" => cfg.local_mass_eps = num(value)?,
                    "detector.pullback_eps" => cfg.pullback_eps = num(value)?,
                    "detector.spacetime_levels" => cfg.spacetime_levels = int(value)?,
                    "detector.rerun" => cfg.rerun = boolean(value)?,
                    "scan.amplitudes" => cfg.scan_amplitudes = list(value)?,
                    "verify.M" => cfg.verify_grid_points = int(value)?,
                    "verify.L" => cfg.verify_box_length = num(value)?,
                    "verify.energy" => {
                        cfg.verify_energy = match value {
                            "2p" => EnergyConvention::TwoP,
                            "p" => EnergyConvention::P,
                            _ => return Err(format!("expected 2p or p, found `{value}`")),
                        }
                    }
                    "run.seed" => cfg.seed = int(value)?,
                    _ => unreachable!("key table and match agree"),
                }
                Ok(())
            })())?;
        }
        cfg.weight = match weight_name.as_ref().map(|(l, s)| (*l, s.as_str())) {
            None | Some((_, "lattice")) => {
                if weight_eps.flatten().is_some() {
                    return Err(Error::Config { line: 0, msg: "nonlinearity.weight_eps needs nonlinearity.weight = smoothed".into() });
                }
                WeightChoice::Lattice
            }
            Some((_, "smoothed")) => WeightChoice::Smoothed { eps: weight_eps.flatten() },
            Some((line, other)) => return Err(Error::Config { line, msg: format!("nonlinearity.weight: expected lattice or smoothed, found `{other}`") }),
        };
        cfg.initial = resolve_initial(init, cfg.params.dim)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config { line: 0, msg: format!("{}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn nonlinearity_options(&self) -> NonlinearityOptions {
        let weight = match self.weight {
            WeightChoice::Lattice => WeightRegularization::LatticeCorrected,
            WeightChoice::Smoothed { eps: Some(eps) } => WeightRegularization::Smoothed { eps },
            WeightChoice::Smoothed { eps: None } => WeightRegularization::Smoothed { eps: 0.5 * self.box_length / self.grid_points as f64 },
        };
        NonlinearityOptions { weight, kernel: self.kernel }
    }

    pub fn resolved_detector_radius(&self) -> f64 {
        self.detector_radius.unwrap_or(self.box_length / 24.0)
    }

    pub fn resolved_morawetz_radius(&self) -> f64 {
        self.morawetz_radius.unwrap_or(self.box_length / 8.0)
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model.dim", p.dim.to_string());
        put("model.alpha", format!("{:?}", p.alpha));
        put("model.b", format!("{:?}", p.b));
        put("model.p", format!("{:?}", p.p));
        put("grid.M", self.grid_points.to_string());
        put("grid.L", format!("{:?}", self.box_length));
        match self.weight {
            WeightChoice::Lattice => put("nonlinearity.weight", "lattice".into()),
            WeightChoice::Smoothed { eps } => {
                put("nonlinearity.weight", "smoothed".into());
                put("nonlinearity.weight_eps", fmt_opt(eps, "auto"));
            }
        }
        put("nonlinearity.kernel", self.kernel.name().into());
        put("ground_state.tol", format!("{:?}", self.gs_tol));
        put("ground_state.max_iter", self.gs_max_iter.to_string());
        put("ground_state.seed", self.gs_seed.id().into());
        put("ground_state.path", self.gs_path.display().to_string());
        put("initial.kind", self.initial.kind().into());
        match &self.initial {
            InitialData::GroundStateMultiple { c } => put("initial.c", format!("{c:?}")),
            InitialData::Gaussian { amplitude, width, center, momentum } => {
                put("initial.amplitude", format!("{amplitude:?}"));
                put("initial.width", format!("{width:?}"));
                put("initial.center", fmt_list(center));
                put("initial.momentum", fmt_list(momentum));
            }
            InitialData::Random { amplitude } => put("initial.amplitude", format!("{amplitude:?}")),
            InitialData::Snapshot { path } => put("initial.path", path.display().to_string()),
        }
        put("evolve.dt", format!("{:?}", self.dt));
        put("evolve.T", format!("{:?}", self.t_final));
        put("evolve.diag_stride", self.diag_stride.to_string());
        put("evolve.snapshot_every", format!("{:?}", self.snapshot_every));
        put("evolve.filter", self.filter.to_string());
        put("evolve.nonlinearity", self.nonlinearity.to_string());
        put("evolve.truncation", match self.truncation { TruncationPolicy::Flag => "flag", TruncationPolicy::Stop => "stop" }.into());
        put("evolve.guard_fraction", format!("{:?}", self.guard_fraction));
        put("evolve.growth_factor", format!("{:?}", self.growth_factor));
        put("evolve.saturation", fmt_opt(self.saturation, "off"));
        put("detector.radius", format!("{:?}", self.resolved_detector_radius()));
        put("detector.morawetz_radius", format!("{:?}", self.resolved_morawetz_radius()));
        put("detector.local_mass_eps", format!("{:?}", self.local_mass_eps));
        put("detector.pullback_eps", format!("{:?}", self.pullback_eps));
        put("detector.spacetime_levels", self.spacetime_levels.to_string());
        put("detector.rerun", self.rerun.to_string());
        put("scan.amplitudes", fmt_list(&self.scan_amplitudes));
        put("verify.M", self.verify_grid_points.to_string());
        put("verify.L", format!("{:?}", self.verify_box_length));
        put("verify.energy", match self.verify_energy { EnergyConvention::TwoP => "2p", EnergyConvention::P => "p" }.into());
        put("run.seed", self.seed.to_string());
        s
    }
}

fn resolve_initial(parts: InitialParts, dim: usize) -> Result<InitialData> {
    let bad = |msg: String| Error::Config { line: 0, msg };
    let kind = parts.kind.as_deref().unwrap_or("ground-state");
    let extra = |allowed: &[&str]| -> Result<()> {
        let given = [
            ("initial.c", parts.c.is_some()),
            ("initial.amplitude", parts.amplitude.is_some()),
            ("initial.width", parts.width.is_some()),
            ("initial.center", parts.center.is_some()),
            ("initial.momentum", parts.momentum.is_some()),
            ("initial.path", parts.path.is_some()),
        ];
        match given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
            Some((k, _)) => Err(bad(format!("{k} does not apply to initial.kind = {kind}"))),
            None => Ok(()),
        }
    };
    let vector = |v: Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
        let v = v.unwrap_or_else(|| vec![0.0; dim]);
        if v.len() != dim {
            return Err(bad(format!("initial.{name} needs {dim} components, found {}", v.len())));
        }
        Ok(v)
    };
    match kind {
        "ground-state" => {
            extra(&["initial.c"])?;
            Ok(InitialData::GroundStateMultiple { c: parts.c.unwrap_or(0.9) })
        }
        "gaussian" => {
            extra(&["initial.amplitude", "initial.width", "initial.center", "initial.momentum"])?;
            Ok(InitialData::Gaussian {
                amplitude: parts.amplitude.unwrap_or(1.0),
                width: parts.width.unwrap_or(1.0),
                center: vector(parts.center, "center")?,
                momentum: vector(parts.momentum, "momentum")?,
            })
        }
        "random" => {
            extra(&["initial.amplitude"])?;
            Ok(InitialData::Random { amplitude: parts.amplitude.unwrap_or(0.5) })
        }
        "snapshot" => {
            extra(&["initial.path"])?;
            let path = parts.path.ok_or_else(|| bad("initial.kind = snapshot needs initial.path".into()))?;
            Ok(InitialData::Snapshot { path })
        }
        other => Err(bad(format!("initial.kind: expected ground-state, gaussian, random or snapshot, found `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        let back = RunConfig::parse(&text).unwrap();
        // radii come back resolved
        assert_eq!(back.detector_radius, Some(1.0));
        assert_eq!(RunConfig { detector_radius: Some(1.0), morawetz_radius: Some(3.0), ..cfg }, back);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn parses_sections_and_comments() {
        let text = "# offset datum\nmodel.alpha = 2.0\ngrid.M = 64   # coarse\n\ninitial.kind = gaussian\ninitial.center = 1, 0, 0\nevolve.saturation = off\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.grid_points, 64);
        assert_eq!(cfg.saturation, None);
        assert_eq!(
            cfg.initial,
            InitialData::Gaussian { amplitude: 1.0, width: 1.0, center: vec![1.0, 0.0, 0.0], momentum: vec![0.0; 3] }
        );
    }

    #[test]
    fn errors_carry_line_context() {
        let err = |t: &str| match RunConfig::parse(t) {
            Err(Error::Config { line, msg }) => (line, msg),
            other => panic!("{other:?}"),
        };
        assert_eq!(err("model.p = 3\nmodel.q = 1\n").0, 2);
        assert!(err("model.p = 3\nmodel.p = 2\n").1.contains("duplicate"));
        assert!(err("grid.M = many\n").1.contains("grid.M"));
        assert!(err("just words\n").1.contains("key = value"));
        assert!(err("initial.kind = gaussian\ninitial.center = 1, 2\n").1.contains("3 components"));
        assert!(err("initial.c = 0.5\ninitial.width = 2\n").1.contains("does not apply"));
        assert!(err("evolve.truncation = maybe\n").1.contains("flag or stop"));
    }

    proptest! {
        #[test]
        fn echo_is_a_fixed_point(m in 2usize..200, l in 1.0f64..100.0, dt in 1e-5f64..1e-1, c in 0.0f64..2.0, seed in any::<u64>()) {
            let cfg = RunConfig { grid_points: 2 * m, box_length: l, dt, initial: InitialData::GroundStateMultiple { c }, seed, ..RunConfig::default() };
            let text = cfg.to_text();
            let back = RunConfig::parse(&text).unwrap();
            prop_assert_eq!(back.to_text(), text);
            prop_assert_eq!(back.dt, dt);
            prop_assert_eq!(back.box_length, l);
        }
    }
}
