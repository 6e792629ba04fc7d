//! Forced threshold dynamics on a phase grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::Convolver;
use crate::geometry::{self, FrontPolyline};
use crate::grid::Grid;
use crate::kernel::{KernelSampling, KernelTable, SchemeParams, DEFAULT_EPS_TAIL, DEFAULT_MAX_CELLS};
use crate::norms::NormDescriptor;
use crate::quad::{self, Tol};

/// Piecewise-linear function of time, constant beyond its end points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTable {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Config(format!(
                "time table needs matching non-empty breakpoints and values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time table breakpoints must increase".into()));
        }
        if values.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::Config("time table entries must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut breaks = vec![a];
        breaks.extend(self.times.iter().copied().filter(|&t| t > a && t < b));
        breaks.push(b);
        // exact on each linear piece
        breaks
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1])))
            .sum()
    }
}

/// Spatial factor of a separable forcing.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceField {
    /// `<gradient, x> + offset`.
    Affine { gradient: Vec<f64>, offset: f64 },
    /// Values sampled on the simulation grid.
    Sampled(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Constant(f64),
    TimeTable(TimeTable),
    Separable { space: SpaceField, time: TimeTable },
    /// One grid of values per step of length `h`, the last one repeated.
    GridSequence { h: f64, frames: Vec<Vec<f64>> },
}

/// Forcing evaluated on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingValues {
    Uniform(f64),
    Field(Vec<f64>),
}

impl ForcingValues {
    #[inline]
    pub fn at(&self, flat: usize) -> f64 {
        match self {
            ForcingValues::Uniform(c) => *c,
            ForcingValues::Field(v) => v[flat],
        }
    }
}

impl ForcingSpec {
    pub fn is_time_only(&self) -> bool {
        match self {
            ForcingSpec::Zero | ForcingSpec::Constant(_) | ForcingSpec::TimeTable(_) => true,
            ForcingSpec::Separable { space, .. } => match space {
                SpaceField::Affine { gradient, .. } => gradient.iter().all(|&g| g == 0.0),
                SpaceField::Sampled(v) => v.windows(2).all(|w| w[0] == w[1]),
            },
            ForcingSpec::GridSequence { frames, .. } => {
                frames.iter().all(|f| f.windows(2).all(|w| w[0] == w[1]))
            }
        }
    }

    /// `g(t)` for time-only forcings.
    pub fn time_value(&self, t: f64) -> Option<f64> {
        if !self.is_time_only() {
            return None;
        }
        Some(match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant(c) => *c,
            ForcingSpec::TimeTable(tt) => tt.eval(t),
            ForcingSpec::Separable { space, time } => {
                let s = match space {
                    SpaceField::Affine { offset, .. } => *offset,
                    SpaceField::Sampled(v) => v.first().copied().unwrap_or(0.0),
                };
                s * time.eval(t)
            }
            ForcingSpec::GridSequence { h, frames } => {
                let k = ((t / h).round().max(0.0) as usize).min(frames.len().saturating_sub(1));
                frames.get(k).and_then(|f| f.first()).copied().unwrap_or(0.0)
            }
        })
    }

    /// `int_a^b g(t) dt` for time-only forcings.
    pub fn time_integral(&self, a: f64, b: f64) -> Option<f64> {
        match self {
            ForcingSpec::Zero => Some(0.0),
            ForcingSpec::Constant(c) => Some(c * (b - a)),
            ForcingSpec::TimeTable(tt) => Some(tt.integral(a, b)),
            _ if self.is_time_only() => {
                quad::integrate(|t| self.time_value(t).unwrap_or(0.0), a, b, Tol::rel(1e-10)).ok()
            }
            _ => None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant(c) => c.abs(),
            ForcingSpec::TimeTable(tt) => tt.sup(),
            ForcingSpec::Separable { space, time } => {
                let s = match space {
                    SpaceField::Affine { offset, .. } if space_is_constant(space) => offset.abs(),
                    SpaceField::Affine { .. } => f64::INFINITY,
                    SpaceField::Sampled(v) => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
                };
                s * time.sup()
            }
            ForcingSpec::GridSequence { frames, .. } => frames
                .iter()
                .flatten()
                .fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }

    /// Supremum over the cells of `grid` (finite for affine fields).
    pub fn sup_on(&self, grid: &Grid) -> f64 {
        match self {
            ForcingSpec::Separable {
                space: space @ SpaceField::Affine { .. },
                time,
            } => {
                let f = space_values(space, grid);
                f.iter().fold(0.0_f64, |m, x: &f64| m.max(x.abs())) * time.sup()
            }
            _ => self.sup_norm(),
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let check_len = |v: &Vec<f64>| {
            if v.len() != grid.len() {
                Err(Error::Config(format!(
                    "sampled forcing has {} values for a grid of {} cells",
                    v.len(),
                    grid.len()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            ForcingSpec::Separable { space, .. } => match space {
                SpaceField::Affine { gradient, .. } if gradient.len() != grid.dim() => {
                    Err(Error::DimensionMismatch {
                        expected: grid.dim(),
                        got: gradient.len(),
                    })
                }
                SpaceField::Sampled(v) => check_len(v),
                _ => Ok(()),
            },
            ForcingSpec::GridSequence { h, frames } => {
                if frames.is_empty() || !(*h > 0.0) {
                    return Err(Error::Config("grid sequence needs frames and a positive step".into()));
                }
                frames.iter().try_for_each(check_len)
            }
            ForcingSpec::Constant(c) if !c.is_finite() => Err(Error::Config("forcing must be finite".into())),
            _ => Ok(()),
        }
    }

    pub fn values(&self, grid: &Grid, t: f64) -> ForcingValues {
        if let Some(v) = self.time_value(t) {
            return ForcingValues::Uniform(v);
        }
        match self {
            ForcingSpec::Separable { space, time } => {
                let s = time.eval(t);
                ForcingValues::Field(space_values(space, grid).into_iter().map(|v| v * s).collect())
            }
            ForcingSpec::GridSequence { h, frames } => {
                let k = ((t / h).round().max(0.0) as usize).min(frames.len() - 1);
                ForcingValues::Field(frames[k].clone())
            }
            _ => unreachable!("time-only forcings handled above"),
        }
    }
}

fn space_is_constant(space: &SpaceField) -> bool {
    match space {
        SpaceField::Affine { gradient, .. } => gradient.iter().all(|&g| g == 0.0),
        SpaceField::Sampled(v) => v.windows(2).all(|w| w[0] == w[1]),
    }
}

fn space_values(space: &SpaceField, grid: &Grid) -> Vec<f64> {
    match space {
        SpaceField::Affine { gradient, offset } => {
            let mut x = vec![0.0; grid.dim()];
            (0..grid.len())
                .map(|f| {
                    grid.center(f, &mut x);
                    offset + gradient.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect()
        }
        SpaceField::Sampled(v) => v.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct SchemeOptions {
    pub eps_tail: f64,
    pub max_kernel_cells: usize,
    /// Width in cells of the boundary band the +1 phase must never enter;
    /// zero disables the check.
    pub margin: usize,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            eps_tail: DEFAULT_EPS_TAIL,
            max_kernel_cells: DEFAULT_MAX_CELLS,
            margin: 2,
        }
    }
}

/// Threshold scheme bound to one grid geometry: the kernel is sampled at the
/// grid spacing, cropped to the grid extent and transformed once.
#[derive(Debug)]
pub struct ThresholdScheme {
    params: SchemeParams,
    kernel: KernelTable,
    conv: Convolver,
    dims: Vec<usize>,
    dx: f64,
    margin: usize,
    indicator: Vec<f64>,
    smoothed: Vec<f64>,
}

impl ThresholdScheme {
    pub fn new(
        desc: &NormDescriptor,
        params: SchemeParams,
        template: &Grid,
        opts: &SchemeOptions,
    ) -> Result<Self> {
        if desc.dim() != template.dim() {
            return Err(Error::DimensionMismatch {
                expected: template.dim(),
                got: desc.dim(),
            });
        }
        let sampling = KernelSampling {
            dx: template.dx(),
            eps_tail: opts.eps_tail,
            max_cells: opts.max_kernel_cells,
            crop: Some(template.dims().iter().map(|n| n - 1).collect()),
        };
        let kernel = KernelTable::sample(desc, &params, &sampling)?;
        Self::with_kernel(kernel, params, template, opts.margin)
    }

    pub fn with_kernel(kernel: KernelTable, params: SchemeParams, template: &Grid, margin: usize) -> Result<Self> {
        if (kernel.spacing() - template.dx()).abs() > 1e-12 * template.dx() {
            return Err(Error::SpacingMismatch {
                kernel: kernel.spacing(),
                grid: template.dx(),
            });
        }
        let conv = Convolver::new(template.dims(), kernel.values(), kernel.half_widths())?;
        let n = template.len();
        Ok(Self {
            params,
            kernel,
            conv,
            dims: template.dims().to_vec(),
            dx: template.dx(),
            margin,
            indicator: vec![0.0; n],
            smoothed: vec![0.0; n],
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dims() != self.dims.as_slice() {
            return Err(Error::OutOfRange(format!(
                "grid shape {:?} differs from the scheme's {:?}",
                grid.dims(),
                self.dims
            )));
        }
        if (grid.dx() - self.dx).abs() > 1e-12 * self.dx {
            return Err(Error::SpacingMismatch {
                kernel: self.dx,
                grid: grid.dx(),
            });
        }
        Ok(())
    }

    /// `S = 2 J_h * 1_Omega - m_h`, with all mass outside the sampled patch and
    /// outside the grid counted as the -1 phase.
    fn smooth(&mut self, grid: &Grid) {
        for (i, v) in self.indicator.iter_mut().zip(&grid.values) {
            *i = if *v > 0.0 { 1.0 } else { 0.0 };
        }
        self.conv.convolve(&self.indicator, &mut self.smoothed);
        let m = self.kernel.total_mass();
        self.smoothed.iter_mut().for_each(|s| *s = 2.0 * *s - m);
    }

    /// Pre-threshold field `S + g beta` at the grid's time.
    pub fn field(&mut self, grid: &Grid, forcing: &ForcingSpec) -> Result<Grid> {
        self.check_grid(grid)?;
        self.smooth(grid);
        let g = forcing.values(grid, grid.time);
        let beta = self.params.beta;
        let vals: Vec<f64> = self
            .smoothed
            .iter()
            .enumerate()
            .map(|(i, s)| s + g.at(i) * beta)
            .collect();
        Ok(grid.with_values(vals))
    }

    /// One step: `+1` iff `S + g beta > 0`.
    pub fn step(&mut self, grid: &Grid, forcing: &ForcingSpec) -> Result<Grid> {
        self.check_grid(grid)?;
        if !grid.is_phase() {
            return Err(Error::InvalidSet("threshold step needs a +-1 phase grid".into()));
        }
        self.smooth(grid);
        let g = forcing.values(grid, grid.time);
        let beta = self.params.beta;
        let mut values = vec![0.0; grid.len()];
        values
            .par_iter_mut()
            .zip(self.smoothed.par_iter())
            .enumerate()
            .for_each(|(i, (v, s))| {
                *v = if s + g.at(i) * beta > 0.0 { 1.0 } else { -1.0 };
            });
        let mut out = grid.with_values(values);
        out.time = grid.time + self.params.h;
        if out.touches_margin(self.margin) {
            return Err(Error::FrontTouchesMargin {
                margin: self.margin,
                time: out.time,
            });
        }
        Ok(out)
    }

    /// Iterates `n_steps` steps, calling `observe` on the initial grid and
    /// after every step.
    pub fn run_with<F>(&mut self, init: Grid, forcing: &ForcingSpec, n_steps: usize, mut observe: F) -> Result<Grid>
    where
        F: FnMut(usize, &Grid) -> Result<()>,
    {
        let mut g = init;
        observe(0, &g)?;
        for n in 1..=n_steps {
            g = self.step(&g, forcing)?;
            observe(n, &g)?;
        }
        Ok(g)
    }

    /// Runs and records diagnostics (and snapshots) every `cadence` steps.
    pub fn run(
        &mut self,
        init: Grid,
        forcing: &ForcingSpec,
        n_steps: usize,
        cadence: usize,
        center: Option<[f64; 2]>,
    ) -> Result<Trajectory> {
        let cadence = cadence.max(1);
        let mut traj = Trajectory::default();
        self.run_with(init, forcing, n_steps, |n, g| {
            if n % cadence == 0 || n == n_steps {
                traj.diagnostics.push(Diagnostics::measure(n, g, center)?);
                traj.snapshots.push(g.clone());
            }
            Ok(())
        })?;
        Ok(traj)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Grid>,
    pub diagnostics: Vec<Diagnostics>,
}

/// Per-snapshot front measurements. Front-based fields are NaN for 3-D grids
/// and empty fronts; `volume` always counts cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub step: usize,
    pub time: f64,
    pub volume: f64,
    pub area: f64,
    pub perimeter: f64,
    pub r_min: f64,
    pub r_mean: f64,
    pub r_max: f64,
    pub convexity_defect: f64,
}

impl Diagnostics {
    pub const HEADER: [&'static str; 9] = [
        "step",
        "t",
        "volume",
        "area",
        "perimeter",
        "r_min",
        "r_mean",
        "r_max",
        "convexity_defect",
    ];

    pub fn measure(step: usize, grid: &Grid, center: Option<[f64; 2]>) -> Result<Self> {
        let mut d = Self {
            step,
            time: grid.time,
            volume: grid.positive_volume(),
            area: f64::NAN,
            perimeter: f64::NAN,
            r_min: f64::NAN,
            r_mean: f64::NAN,
            r_max: f64::NAN,
            convexity_defect: f64::NAN,
        };
        if grid.dim() != 2 {
            return Ok(d);
        }
        let front = geometry::extract_front(grid)?;
        if front.is_empty() {
            return Ok(d);
        }
        d.fill_from_front(&front, center);
        Ok(d)
    }

    pub fn fill_from_front(&mut self, front: &FrontPolyline, center: Option<[f64; 2]>) {
        self.area = front.area();
        self.perimeter = front.perimeter();
        let c = center.or_else(|| geometry::centroid(front)).unwrap_or([0.0, 0.0]);
        if let Ok(s) = geometry::radius_stats(front, c) {
            self.r_min = s.min;
            self.r_mean = s.mean;
            self.r_max = s.max;
        }
        self.convexity_defect = geometry::convexity_defect_union(front).unwrap_or(f64::NAN);
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            format!("{:.10e}", self.time),
            format!("{:.10e}", self.volume),
            format!("{:.10e}", self.area),
            format!("{:.10e}", self.perimeter),
            format!("{:.10e}", self.r_min),
            format!("{:.10e}", self.r_mean),
            format!("{:.10e}", self.r_max),
            format!("{:.10e}", self.convexity_defect),
        ]
    }
}
