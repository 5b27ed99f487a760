//! Scenario configuration files.

use std::path::{Path, PathBuf};

use flatflow::mms::{min_time_step, Mode, StepOptions};
use flatflow::shapes::{FourierMode, Shape, ShapeKind, UNIT_DISK_AREA};
use flatflow::{Error, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub shape: ShapeConfig,
    pub flow: FlowConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    /// Center of cell `(0, 0)`.
    pub origin: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Disk,
    Ellipse,
    Dumbbell,
    Star,
    Fourier,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeConfig {
    pub kind: ShapeName,
    /// Target area after normalization.
    #[serde(default = "default_area")]
    pub area: f64,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub rotation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lobe_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neck_half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lobes: Option<u32>,
    /// Fourier modes as `[k, amplitude, phase]`. When absent, `random_modes`
    /// modes `k = 2, 3, ...` are drawn from the scenario seed with
    /// amplitudes in `[0, amplitude]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_modes: Option<u32>,
}

fn default_area() -> f64 {
    UNIT_DISK_AREA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub h: f64,
    pub steps: usize,
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vol_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths are taken from the directory of the config file.
    pub dir: PathBuf,
    /// Snapshot stride in steps (0: first and last only).
    #[serde(default)]
    pub snapshot_every: usize,
    /// Also store the last this many regions.
    #[serde(default)]
    pub keep_last: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub apriori: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub good_times: Option<GoodTimesConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excess: Vec<ExcessProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harnack: Option<HarnackConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodTimesConfig {
    pub t_start: f64,
    pub eps0: f64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcessProbeConfig {
    pub point: [f64; 2],
    /// Defaults to the final time of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub r: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_c0")]
    pub c0: f64,
}

fn default_sigma() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    0.1
}

fn default_depth() -> usize {
    2
}

fn default_c0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarnackSource {
    /// `w_r^-` of the run at a boundary point.
    Flow,
    /// Caloric polynomial plus convex bumps drawn from the seed.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackConfig {
    pub source: HarnackSource,
    /// Parabola opening.
    pub a: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Vertex box in rescaled units: `xi` range and `tau` range.
    #[serde(default = "default_xi")]
    pub xi: [f64; 2],
    #[serde(default = "default_tau")]
    pub tau: [f64; 2],
    /// Flow source: anchor point, time and radius of the window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Synthetic source: base points and slices.
    #[serde(default = "default_synthetic_n")]
    pub n: usize,
}

fn default_samples() -> usize {
    400
}

fn default_xi() -> [f64; 2] {
    [-0.5, 0.5]
}

fn default_tau() -> [f64; 2] {
    [-1.0, -0.25]
}

fn default_synthetic_n() -> usize {
    64
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.output.dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> CliResult<()> {
        let g = self.grid()?;
        let min_h = min_time_step(g.spacing());
        if !(self.flow.h >= min_h) {
            return Err(Error::ResolutionViolation { h: self.flow.h, min_h }.into());
        }
        self.shape()?;
        if !(self.shape.area > 0.0 && self.shape.area.is_finite()) {
            return Err(CliError::Config(format!("shape area {}", self.shape.area)));
        }
        for p in &self.diagnostics.excess {
            if !(p.r > 0.0 && p.sigma > 0.0 && p.sigma < 1.0 && p.alpha > 0.0 && p.alpha < 1.0) {
                return Err(CliError::Config(format!("excess probe at {:?}: need r > 0, sigma and alpha in (0, 1)", p.point)));
            }
        }
        if let Some(hc) = &self.diagnostics.harnack {
            if !(hc.a > 0.0) || hc.samples == 0 || hc.xi[0] > hc.xi[1] || hc.tau[0] > hc.tau[1] {
                return Err(CliError::Config("harnack: need a > 0, samples > 0 and ordered ranges".into()));
            }
            if hc.source == HarnackSource::Flow && (hc.point.is_none() || hc.r.is_none()) {
                return Err(CliError::Config("harnack flow source needs point and r".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<Grid> {
        let g = &self.grid;
        Ok(Grid::new(g.nx, g.ny, g.spacing, g.origin)?)
    }

    pub fn mode(&self) -> Mode {
        match self.flow.mode {
            ModeName::Constrained => Mode::Constrained,
            ModeName::Unconstrained => Mode::Unconstrained,
        }
    }

    pub fn step_options(&self) -> StepOptions {
        let d = StepOptions::default();
        StepOptions {
            solver_tol: self.flow.solver_tol.unwrap_or(d.solver_tol),
            max_iter: self.flow.max_iter.unwrap_or(d.max_iter),
            vol_tol: self.flow.vol_tol.unwrap_or(d.vol_tol),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn shape(&self) -> CliResult<Shape> {
        let s = &self.shape;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Config(format!("shape {:?} needs {name}", s.kind)));
        let kind = match s.kind {
            ShapeName::Disk => ShapeKind::Disk,
            ShapeName::Ellipse => ShapeKind::Ellipse { aspect: need(s.aspect, "aspect")? },
            ShapeName::Rectangle => ShapeKind::Rectangle { aspect: need(s.aspect, "aspect")? },
            ShapeName::Dumbbell => ShapeKind::Dumbbell {
                lobe_radius: need(s.lobe_radius, "lobe_radius")?,
                separation: need(s.separation, "separation")?,
                neck_half_width: need(s.neck_half_width, "neck_half_width")?,
            },
            ShapeName::Star => ShapeKind::Star {
                amplitude: need(s.amplitude, "amplitude")?,
                lobes: s.lobes.ok_or_else(|| CliError::Config("shape star needs lobes".into()))?,
            },
            ShapeName::Fourier => ShapeKind::FourierDisk { modes: self.fourier_modes()? },
        };
        Ok(Shape { kind, center: s.center, rotation: s.rotation })
    }

    fn fourier_modes(&self) -> CliResult<Vec<FourierMode>> {
        let s = &self.shape;
        if let Some(modes) = &s.modes {
            return modes
                .iter()
                .map(|&[k, amplitude, phase]| {
                    if k < 0.0 || k.fract() != 0.0 {
                        return Err(CliError::Config(format!("fourier mode index {k}")));
                    }
                    Ok(FourierMode { k: k as u32, amplitude, phase })
                })
                .collect();
        }
        let (Some(n), Some(amp)) = (s.random_modes, s.amplitude) else {
            return Err(CliError::Config("shape fourier needs modes or random_modes with amplitude".into()));
        };
        let mut rng = self.rng();
        Ok((0..n)
            .map(|i| FourierMode {
                k: i + 2,
                amplitude: rng.gen_range(0.0..=amp),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect())
    }

    /// Steps whose regions the configured probes read, given the run length.
    pub fn probe_steps(&self) -> Vec<usize> {
        let h = self.flow.h;
        let mut out = Vec::new();
        let mut window = |t0: Option<f64>, r: f64| {
            let k0 = t0.map_or(self.flow.steps, |t| (t / h).round() as usize);
            let back = ((r * r) / h).ceil() as usize;
            out.extend(k0.saturating_sub(back)..=k0);
        };
        for p in &self.diagnostics.excess {
            window(p.t0, p.r);
        }
        if let Some(hc) = &self.diagnostics.harnack {
            if let (HarnackSource::Flow, Some(r)) = (hc.source, hc.r) {
                window(hc.t0, r);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}
