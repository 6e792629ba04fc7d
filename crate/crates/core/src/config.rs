//! Experiment configuration: a strict TOML file with the sections `domain`,
//! `flow`, `norm`, `forcing`, `initial`, `output` and `scenario`.
//!
//! Unknown keys are rejected and every cross-field constraint is checked in
//! [`ExperimentConfig::validate`] before any computation starts.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SetSpec};
use crate::kernel::{self, SchemeParams};
use crate::norms::NormDescriptor;
use crate::scheme::{ForcingSpec, SpaceField, TimeTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub flow: FlowConfig,
    pub norm: NormConfig,
    pub forcing: ForcingConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub scenario: ScenarioConfig,
}

/// The cube `[extent[0], extent[1]]^n` split into `cells` cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n: usize,
    pub extent: [f64; 2],
    pub cells: usize,
    pub margin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Threshold,
    Pde,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub alpha: f64,
    /// Threshold-scheme time step.
    pub h: f64,
    pub n_steps: usize,
    pub engine: Engine,
    /// Level-set solver step; defaults to 0.9 of the CFL limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Level-set clamp; defaults to 8 cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_dirs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_tail: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NormConfig {
    Euclidean,
    Pnorm { q: f64 },
    Ellipse { matrix: Vec<Vec<f64>> },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForcingConfig {
    Zero,
    Constant {
        value: f64,
    },
    /// Piecewise-linear in time.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// `(offset + <gradient, x>) * s(t)`, with `s` piecewise linear (1 if absent).
    Affine {
        gradient: Vec<f64>,
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        times: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Polygon { vertices: Vec<[f64; 2]> },
    Regular {
        center: [f64; 2],
        radius: f64,
        sides: usize,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Pgm,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub cadence: usize,
    #[serde(default)]
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    ShrinkCircle,
    Wulff,
    Convexity,
    Splitting,
    Distance,
    Stability,
    Crossval,
    AnisotropyReport,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 8] = [
        ScenarioName::ShrinkCircle,
        ScenarioName::Wulff,
        ScenarioName::Convexity,
        ScenarioName::Splitting,
        ScenarioName::Distance,
        ScenarioName::Stability,
        ScenarioName::Crossval,
        ScenarioName::AnisotropyReport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::ShrinkCircle => "shrink_circle",
            ScenarioName::Wulff => "wulff",
            ScenarioName::Convexity => "convexity",
            ScenarioName::Splitting => "splitting",
            ScenarioName::Distance => "distance",
            ScenarioName::Stability => "stability",
            ScenarioName::Crossval => "crossval",
            ScenarioName::AnisotropyReport => "anisotropy_report",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|n| n.as_str()).collect();
                Error::Config(format!("unknown scenario `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// Scenario selection plus the keys only some scenarios read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    /// Seed for every random draw of the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// shrink_circle: also run with `h / 2` and require a smaller error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    /// splitting: splitting periods `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// distance: radius of the inner set, which takes `g_inner`; the outer
    /// set is `initial` and takes `forcing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_inner: Option<f64>,
    /// distance: number of sampled times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// stability: number of random quadratic specs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// anisotropy_report: random pairs for the midpoint-convexity check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

impl ScenarioConfig {
    pub fn named(name: ScenarioName) -> Self {
        Self {
            name,
            seed: None,
            refine: None,
            epsilons: None,
            inner_radius: None,
            g_inner: None,
            samples: None,
            specs: None,
            alphas: None,
            pairs: None,
        }
    }
}

fn constraint(msg: String) -> Error {
    Error::Config(msg)
}

impl ExperimentConfig {
    /// Parses without validating.
    pub fn parse_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    /// Reads, parses and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML text; parsing it gives back the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(2..=3).contains(&d.n) {
            return Err(constraint(format!("domain.n = {} must be 2 or 3", d.n)));
        }
        if !(d.extent[0] < d.extent[1]) || d.extent.iter().any(|v| !v.is_finite()) {
            return Err(constraint(format!(
                "domain.extent = [{}, {}] must be finite and increasing",
                d.extent[0], d.extent[1]
            )));
        }
        if d.cells < 8 {
            return Err(constraint(format!("domain.cells = {} must be at least 8", d.cells)));
        }
        if 2 * d.margin >= d.cells {
            return Err(constraint(format!(
                "domain.margin = {} leaves no interior in {} cells",
                d.margin, d.cells
            )));
        }
        let f = &self.flow;
        if !(f.alpha >= 1.0 && f.alpha < 2.0) {
            return Err(constraint(format!("flow.alpha = {}: alpha must be in [1,2)", f.alpha)));
        }
        if !(f.h > 0.0 && f.h.is_finite()) {
            return Err(constraint(format!("flow.h = {} must be positive", f.h)));
        }
        if f.alpha == 1.0 && f.h >= kernel::h_max_alpha_one() {
            return Err(constraint(format!(
                "flow.h = {} must be below {} when alpha = 1",
                f.h,
                kernel::h_max_alpha_one()
            )));
        }
        if let Some(dt) = f.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(constraint(format!("flow.dt = {dt} must be positive")));
            }
        }
        if let Some(eta) = f.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(constraint(format!("flow.eta = {eta} must be positive")));
            }
        }
        if let Some(n) = f.n_dirs {
            if n < 64 || n % 2 == 1 {
                return Err(constraint(format!("flow.n_dirs = {n} must be even and at least 64")));
            }
        }
        if let Some(e) = f.eps_tail {
            if !(e > 0.0 && e < 1.0) {
                return Err(constraint(format!("flow.eps_tail = {e} must be in (0,1)")));
            }
        }
        let grid = self.template()?;
        let params = self.params()?;
        if matches!(f.engine, Engine::Threshold | Engine::Both) && grid.dx() > params.length() / 4.0 {
            return Err(constraint(format!(
                "grid spacing {} exceeds a quarter of the kernel length {} (flow.h = {})",
                grid.dx(),
                params.length(),
                f.h
            )));
        }
        if matches!(f.engine, Engine::Pde | Engine::Both) && d.n != 2 {
            return Err(constraint(format!("flow.engine = pde needs domain.n = 2, got {}", d.n)));
        }
        self.norm_descriptor()?;
        let forcing = self.forcing_spec()?;
        forcing.validate(&grid)?;
        let set = self.initial_set()?;
        set.validate(d.n).map_err(|e| constraint(format!("initial: {e}")))?;
        crate::grid::init_phase(&grid, &set, d.margin).map_err(|e| constraint(format!("initial: {e}")))?;
        if self.output.cadence == 0 {
            return Err(constraint("output.cadence must be at least 1".into()));
        }
        if self.output.dir.is_empty() {
            return Err(constraint("output.dir must not be empty".into()));
        }
        self.validate_scenario(&forcing)
    }

    fn validate_scenario(&self, forcing: &ForcingSpec) -> Result<()> {
        let s = &self.scenario;
        let name = s.name.as_str();
        let needs_2d = !matches!(s.name, ScenarioName::Stability | ScenarioName::AnisotropyReport);
        if needs_2d && self.domain.n != 2 {
            return Err(constraint(format!("scenario {name} needs domain.n = 2, got {}", self.domain.n)));
        }
        match s.name {
            ScenarioName::ShrinkCircle => match (&self.initial, &self.norm) {
                (InitialConfig::Ball { .. }, NormConfig::Euclidean) => Ok(()),
                _ => Err(constraint(
                    "scenario shrink_circle needs a ball as initial set and the euclidean norm".into(),
                )),
            },
            ScenarioName::Convexity if !forcing.is_time_only() => Err(constraint(
                "scenario convexity requires a forcing that depends only on time".into(),
            )),
            ScenarioName::Wulff => match self.forcing {
                ForcingConfig::Constant { value } if value > 0.0 => Ok(()),
                ForcingConfig::Constant { value } => Err(constraint(format!(
                    "scenario wulff requires a constant forcing c > 0, got c = {value}"
                ))),
                _ => Err(constraint("scenario wulff requires a constant forcing c > 0".into())),
            },
            ScenarioName::Splitting => {
                if !forcing.is_time_only() {
                    return Err(constraint("scenario splitting requires a time-only forcing".into()));
                }
                let eps = s.epsilons.as_deref().unwrap_or(&[]);
                if eps.is_empty() {
                    return Err(constraint("scenario.epsilons must list at least one period".into()));
                }
                if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
                    return Err(constraint(format!("scenario.epsilons entry {e} must be positive")));
                }
                Ok(())
            }
            ScenarioName::Distance => {
                let (ri, gi) = (s.inner_radius.unwrap_or(f64::NAN), s.g_inner.unwrap_or(0.0));
                let outer = match &self.initial {
                    InitialConfig::Ball { radius, .. } => *radius,
                    _ => return Err(constraint("scenario distance needs a ball as initial set".into())),
                };
                if !(ri > 0.0 && ri < outer) {
                    return Err(constraint(format!(
                        "scenario.inner_radius = {ri} must be in (0, {outer}) (the outer radius)"
                    )));
                }
                let g = forcing
                    .time_value(0.0)
                    .ok_or_else(|| constraint("scenario distance requires a time-only forcing".into()))?;
                let inf = match &self.forcing {
                    ForcingConfig::Table { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
                    _ => g,
                };
                if gi > inf {
                    return Err(constraint(format!(
                        "scenario.g_inner = {gi} must not exceed the outer forcing (minimum {inf})"
                    )));
                }
                Ok(())
            }
            ScenarioName::Stability => {
                if let Some(a) = s.alphas.as_deref() {
                    if let Some(x) = a.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
                        return Err(constraint(format!("scenario.alphas entry {x} must be in (0,1)")));
                    }
                }
                Ok(())
            }
            ScenarioName::AnisotropyReport | ScenarioName::Crossval if self.domain.n != 2 => {
                Err(constraint(format!("scenario {name} needs domain.n = 2")))
            }
            _ => Ok(()),
        }
    }

    pub fn template(&self) -> Result<Grid> {
        let d = &self.domain;
        Grid::cube(d.n, d.extent[0], d.extent[1], d.cells, -1.0)
    }

    pub fn params(&self) -> Result<SchemeParams> {
        SchemeParams::new(self.flow.alpha, self.flow.h)
    }

    pub fn norm_descriptor(&self) -> Result<NormDescriptor> {
        let n = self.domain.n;
        match &self.norm {
            NormConfig::Euclidean => NormDescriptor::euclidean(n),
            NormConfig::Pnorm { q } => NormDescriptor::pnorm(n, *q),
            NormConfig::Ellipse { matrix } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(constraint(format!("norm.matrix must be {n}x{n}")));
                }
                NormDescriptor::ellipse(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            NormConfig::Polygon { vertices } => {
                if n != 2 {
                    return Err(constraint("polygon norms need domain.n = 2".into()));
                }
                NormDescriptor::polygon(vertices)
            }
        }
    }

    pub fn forcing_spec(&self) -> Result<ForcingSpec> {
        Ok(match &self.forcing {
            ForcingConfig::Zero => ForcingSpec::Zero,
            ForcingConfig::Constant { value } => ForcingSpec::Constant(*value),
            ForcingConfig::Table { times, values } => ForcingSpec::TimeTable(TimeTable::new(times.clone(), values.clone())?),
            ForcingConfig::Affine {
                gradient,
                offset,
                times,
                values,
            } => {
                if gradient.len() != self.domain.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.domain.n,
                        got: gradient.len(),
                    });
                }
                let time = match (times, values) {
                    (Some(t), Some(v)) => TimeTable::new(t.clone(), v.clone())?,
                    (None, None) => TimeTable::new(vec![0.0], vec![1.0])?,
                    _ => return Err(constraint("forcing.times and forcing.values go together".into())),
                };
                ForcingSpec::Separable {
                    space: SpaceField::Affine {
                        gradient: gradient.clone(),
                        offset: *offset,
                    },
                    time,
                }
            }
        })
    }

    pub fn initial_set(&self) -> Result<SetSpec> {
        Ok(match &self.initial {
            InitialConfig::Ball { center, radius } => SetSpec::ball(center, *radius),
            InitialConfig::Box { lo, hi } => SetSpec::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            InitialConfig::Polygon { vertices } => SetSpec::Polygon {
                vertices: vertices.clone(),
            },
            InitialConfig::Regular {
                center,
                radius,
                sides,
                phase,
            } => {
                if *sides < 3 {
                    return Err(constraint(format!("initial.sides = {sides} must be at least 3")));
                }
                SetSpec::regular_polygon(*center, *radius, *sides, *phase)
            }
        })
    }

    pub fn n_dirs(&self) -> usize {
        self.flow.n_dirs.unwrap_or(if self.domain.n == 2 { 1024 } else { 2048 })
    }

    pub fn eta(&self) -> Result<f64> {
        Ok(self.flow.eta.unwrap_or(8.0 * self.template()?.dx()))
    }
}
