//! Named experiments. Each one runs from an [`ExperimentConfig`], writes
//! `series.csv` and `summary.csv` (plus optional frames) into an output
//! directory and reports pass/fail metrics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::{self, AnisotropyTable};
use crate::config::{Engine, ExperimentConfig, ForcingConfig, InitialConfig, NormConfig, OutputFormat, ScenarioName};
use crate::error::{Error, Result};
use crate::geometry::{self, FrontPolyline, Metric as Distance};
use crate::grid::{init_phase, Grid, SetSpec};
use crate::io;
use crate::kernel::SchemeParams;
use crate::nonlocal::{self, QuadraticSurfaceSpec};
use crate::norms::NormDescriptor;
use crate::refsolver::{cfl_limit, init_levelset, LevelSetField, PdeStepper};
use crate::scheme::{ForcingSpec, SchemeOptions, ThresholdScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    Below,
    AtLeast,
    /// Reported only.
    Info,
}

impl Relation {
    fn as_str(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::Below => "<",
            Relation::AtLeast => ">=",
            Relation::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Metric {
    pub fn new(name: &str, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::Below => value < threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Info => true,
        };
        Self {
            name: name.to_string(),
            value,
            relation,
            threshold,
            pass,
        }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Self::new(name, value, Relation::Info, f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: ScenarioName,
    pub metrics: Vec<Metric>,
    pub series_header: Vec<String>,
    pub series: Vec<Vec<String>>,
}

impl ScenarioReport {
    fn new(scenario: ScenarioName, header: &[&str]) -> Self {
        Self {
            scenario,
            metrics: Vec::new(),
            series_header: header.iter().map(|s| s.to_string()).collect(),
            series: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    fn push_row(&mut self, row: Vec<String>) {
        self.series.push(row);
    }

    fn write(&self, outdir: &Path) -> Result<()> {
        let header: Vec<&str> = self.series_header.iter().map(|s| s.as_str()).collect();
        io::write_csv(&outdir.join("series.csv"), &header, &self.series)?;
        let rows: Vec<Vec<String>> = self
            .metrics
            .iter()
            .map(|m| {
                vec![
                    m.name.clone(),
                    num(m.value),
                    m.relation.as_str().to_string(),
                    num(m.threshold),
                    m.pass.to_string(),
                ]
            })
            .collect();
        io::write_csv(
            &outdir.join("summary.csv"),
            &["metric", "value", "relation", "threshold", "pass"],
            &rows,
        )
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.10e}")
    }
}

/// Validates `cfg`, runs its scenario and writes the outputs into `outdir`.
pub fn run(cfg: &ExperimentConfig, outdir: &Path) -> Result<ScenarioReport> {
    cfg.validate()?;
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let ctx = Ctx::new(cfg, outdir)?;
    log::info!("scenario {} -> {}", cfg.scenario.name.as_str(), outdir.display());
    let report = match cfg.scenario.name {
        ScenarioName::ShrinkCircle => shrink_circle(&ctx),
        ScenarioName::Wulff => wulff(&ctx),
        ScenarioName::Convexity => convexity(&ctx),
        ScenarioName::Splitting => splitting(&ctx),
        ScenarioName::Distance => distance(&ctx),
        ScenarioName::Stability => stability(&ctx),
        ScenarioName::Crossval => crossval(&ctx),
        ScenarioName::AnisotropyReport => anisotropy_report(&ctx),
    }?;
    report.write(outdir)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Threshold,
    Pde,
}

impl Kind {
    fn as_str(self) -> &'static str {
        match self {
            Kind::Threshold => "threshold",
            Kind::Pde => "pde",
        }
    }
}

fn kinds(engine: Engine) -> Vec<Kind> {
    match engine {
        Engine::Threshold => vec![Kind::Threshold],
        Engine::Pde => vec![Kind::Pde],
        Engine::Both => vec![Kind::Threshold, Kind::Pde],
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    outdir: &'a Path,
    desc: NormDescriptor,
    template: Grid,
    table: Option<AnisotropyTable>,
    forcing: ForcingSpec,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ExperimentConfig, outdir: &'a Path) -> Result<Self> {
        let desc = cfg.norm_descriptor()?;
        let template = cfg.template()?;
        let needs_table = cfg.domain.n == 2 || cfg.scenario.name == ScenarioName::AnisotropyReport;
        let table = if needs_table && cfg.scenario.name != ScenarioName::Stability {
            Some(AnisotropyTable::build(&desc, cfg.flow.alpha, cfg.n_dirs())?)
        } else {
            None
        };
        Ok(Self {
            cfg,
            outdir,
            desc,
            template,
            table,
            forcing: cfg.forcing_spec()?,
        })
    }

    /// Same experiment on a grid with `factor` times as many cells per axis.
    fn refined(&self, factor: f64) -> Result<Ctx<'a>> {
        let d = &self.cfg.domain;
        let cells = (d.cells as f64 * factor).round() as usize;
        Ok(Ctx {
            cfg: self.cfg,
            outdir: self.outdir,
            desc: self.desc.clone(),
            template: Grid::cube(d.n, d.extent[0], d.extent[1], cells, -1.0)?,
            table: self.table.clone(),
            forcing: self.forcing.clone(),
        })
    }

    fn table(&self) -> Result<&AnisotropyTable> {
        self.table
            .as_ref()
            .ok_or_else(|| Error::Unsupported("this scenario needs a 2-D anisotropy table".into()))
    }

    fn dx(&self) -> f64 {
        self.template.dx()
    }

    fn write_frame(&self, prefix: &str, step: usize, raw: &Grid, phase: &Grid) -> Result<()> {
        if step % self.cfg.output.cadence != 0 {
            return Ok(());
        }
        for f in &self.cfg.output.formats {
            match f {
                OutputFormat::Grid => io::write_grid(raw, &self.outdir.join(format!("{prefix}frame_{step:06}.grid")))?,
                OutputFormat::Pgm if phase.dim() == 2 => {
                    io::write_pgm(phase, &self.outdir.join(format!("{prefix}frame_{step:06}.pgm")))?
                }
                OutputFormat::Pgm => {}
            }
        }
        Ok(())
    }

    /// Runs `n_steps` observation steps of length `h` with either engine and
    /// returns the engine's own time step. `frames` is the file prefix for
    /// snapshots, if any should be written.
    fn evolve<F>(
        &self,
        kind: Kind,
        h: f64,
        set: &SetSpec,
        forcing: &ForcingSpec,
        n_steps: usize,
        frames: Option<&str>,
        mut observe: F,
    ) -> Result<f64>
    where
        F: FnMut(usize, f64, &FrontPolyline) -> Result<()>,
    {
        let margin = self.cfg.domain.margin;
        match kind {
            Kind::Threshold => {
                let params = SchemeParams::new(self.cfg.flow.alpha, h)?;
                let mut opts = SchemeOptions {
                    margin,
                    ..SchemeOptions::default()
                };
                if let Some(e) = self.cfg.flow.eps_tail {
                    opts.eps_tail = e;
                }
                let mut scheme = ThresholdScheme::new(&self.desc, params, &self.template, &opts)?;
                let init = init_phase(&self.template, set, margin)?;
                scheme.run_with(init, forcing, n_steps, |n, g| {
                    if let Some(p) = frames {
                        self.write_frame(p, n, g, g)?;
                    }
                    let front = if g.dim() == 2 {
                        geometry::extract_front(g)?
                    } else {
                        FrontPolyline::default()
                    };
                    observe(n, g.time, &front)
                })?;
                Ok(h)
            }
            Kind::Pde => {
                let table = self.table()?;
                let dt_max = match self.cfg.flow.dt {
                    Some(dt) => dt,
                    None => 0.9 * cfl_limit(table, self.dx(), forcing.sup_on(&self.template)),
                };
                let sub = (h / dt_max).ceil().max(1.0) as usize;
                let dt = h / sub as f64;
                let stepper = PdeStepper::new(table, dt)?.with_margin(margin);
                let mut field = init_levelset(&self.template, set, self.cfg.eta()?, margin)?;
                for n in 0..=n_steps {
                    if n > 0 {
                        for _ in 0..sub {
                            field = stepper.step(&field, forcing)?;
                        }
                        // keep observation times on the h lattice
                        field.grid.time = n as f64 * h;
                    }
                    if let Some(p) = frames {
                        self.write_frame(p, n, &field.grid, &field.phase())?;
                    }
                    observe(n, field.time(), &field.front()?)?;
                }
                Ok(dt)
            }
        }
    }
}

fn ball_of(cfg: &ExperimentConfig) -> Result<([f64; 2], f64)> {
    match &cfg.initial {
        InitialConfig::Ball { center, radius } if center.len() == 2 => Ok(([center[0], center[1]], *radius)),
        _ => Err(Error::Config(format!(
            "scenario {} needs a 2-D ball as initial set",
            cfg.scenario.name.as_str()
        ))),
    }
}

fn shrink_circle(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let (center, r0) = ball_of(cfg)?;
    let alpha = cfg.flow.alpha;
    let rate = 4.0 * anisotropy::mobility_mu(&ctx.desc, alpha, &[1.0, 0.0])? * anisotropy::c_const(2, alpha);
    let t_ext = r0 * r0 / rate;
    let set = cfg.initial_set()?;
    let mut rep = ScenarioReport::new(
        ScenarioName::ShrinkCircle,
        &["engine", "cells", "h", "step", "t", "r_exact", "r_mean", "rel_err"],
    );
    let run_one = |ctx: &Ctx, kind: Kind, h: f64, frames: Option<&str>, rep: &mut ScenarioReport| -> Result<f64> {
        // same horizon in time whatever the step
        let horizon = (cfg.flow.n_steps as f64 * cfg.flow.h).min(0.8 * t_ext);
        let n = (horizon / h + 1e-9).floor() as usize;
        let cells = ctx.template.dims()[0];
        let mut worst = 0.0_f64;
        ctx.evolve(kind, h, &set, &ctx.forcing, n, frames, |step, t, front| {
            let r_exact = (r0 * r0 - rate * t).max(0.0).sqrt();
            let r_mean = if front.is_empty() {
                0.0
            } else {
                geometry::radius_stats(front, center)?.mean
            };
            let err = (r_mean - r_exact).abs() / r_exact;
            worst = worst.max(err);
            rep.push_row(vec![
                kind.as_str().into(),
                cells.to_string(),
                num(h),
                step.to_string(),
                num(t),
                num(r_exact),
                num(r_mean),
                num(err),
            ]);
            Ok(())
        })?;
        Ok(worst)
    };
    let tol = 0.05;
    for kind in kinds(cfg.flow.engine) {
        let h = cfg.flow.h;
        let prefix = if kind == Kind::Pde && cfg.flow.engine == Engine::Both { "pde_" } else { "" };
        let err = run_one(ctx, kind, h, Some(prefix), &mut rep)?;
        let suffix = if kind == Kind::Pde { "_pde" } else { "" };
        rep.metrics
            .push(Metric::new(&format!("max_rel_radius_err{suffix}"), err, Relation::AtMost, tol));
        if kind == Kind::Threshold && cfg.scenario.refine.unwrap_or(true) {
            // halving h shrinks the kernel length by sqrt 2; refine the grid
            // with it so the kernel stays equally resolved
            let fine = ctx.refined(std::f64::consts::SQRT_2)?;
            let err2 = run_one(&fine, kind, h / 2.0, None, &mut rep)?;
            rep.metrics.push(Metric::new("max_rel_radius_err_half_h", err2, Relation::AtMost, tol));
            rep.metrics
                .push(Metric::new("err_ratio_half_h", err2 / err, Relation::Below, 1.0));
        }
    }
    rep.metrics.push(Metric::info("t_extinction", t_ext));
    Ok(rep)
}

fn wulff(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let c = match cfg.forcing {
        ForcingConfig::Constant { value } => value,
        _ => return Err(Error::Config("scenario wulff requires a constant forcing c > 0".into())),
    };
    let table = ctx.table()?;
    let target = anisotropy::wulff_boundary(c, table)?;
    let diam = 2.0 * target.vertices().map(|v| v[0].hypot(v[1])).fold(0.0_f64, f64::max);
    let set = cfg.initial_set()?;
    let n = cfg.flow.n_steps;
    let half = n / 2;
    let mut rep = ScenarioReport::new(ScenarioName::Wulff, &["engine", "step", "t", "hausdorff_scaled"]);
    for kind in kinds(cfg.flow.engine) {
        let mut at = [f64::NAN; 2];
        let prefix = if kind == Kind::Pde && cfg.flow.engine == Engine::Both { "pde_" } else { "" };
        ctx.evolve(kind, cfg.flow.h, &set, &ctx.forcing, n, Some(prefix), |step, t, front| {
            let wanted = step == half || step == n;
            if step == 0 || !(wanted || step % cfg.output.cadence == 0) {
                return Ok(());
            }
            let d = geometry::hausdorff(&front.scaled(1.0 / t, [0.0, 0.0]), &target, Distance::Euclidean)?;
            if step == half {
                at[0] = d;
            }
            if step == n {
                at[1] = d;
            }
            rep.push_row(vec![kind.as_str().into(), step.to_string(), num(t), num(d)]);
            Ok(())
        })?;
        let suffix = if kind == Kind::Pde { "_pde" } else { "" };
        rep.metrics.push(Metric::info(&format!("hausdorff_half{suffix}"), at[0]));
        rep.metrics.push(Metric::info(&format!("hausdorff_final{suffix}"), at[1]));
        rep.metrics
            .push(Metric::new(&format!("hausdorff_final_over_diam{suffix}"), at[1] / diam, Relation::AtMost, 0.1));
        rep.metrics
            .push(Metric::new(&format!("hausdorff_final_over_half{suffix}"), at[1] / at[0], Relation::Below, 1.0));
    }
    rep.metrics.push(Metric::info("wulff_diameter", diam));
    Ok(rep)
}

fn convexity(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let set = cfg.initial_set()?;
    let dx = ctx.dx();
    let mut rep = ScenarioReport::new(ScenarioName::Convexity, &["engine", "step", "t", "defect", "bound"]);
    for kind in kinds(cfg.flow.engine) {
        let mut worst = 0.0_f64;
        let mut empty = false;
        let prefix = if kind == Kind::Pde && cfg.flow.engine == Engine::Both { "pde_" } else { "" };
        ctx.evolve(kind, cfg.flow.h, &set, &ctx.forcing, cfg.flow.n_steps, Some(prefix), |step, t, front| {
            if front.is_empty() {
                empty = true;
                return Ok(());
            }
            let defect = geometry::convexity_defect_union(front)?;
            let bound = 4.0 * dx * front.perimeter() / front.area();
            worst = worst.max(defect / bound);
            rep.push_row(vec![kind.as_str().into(), step.to_string(), num(t), num(defect), num(bound)]);
            Ok(())
        })?;
        let suffix = if kind == Kind::Pde { "_pde" } else { "" };
        rep.metrics
            .push(Metric::new(&format!("max_defect_over_bound{suffix}"), worst, Relation::AtMost, 1.0));
        rep.metrics
            .push(Metric::info(&format!("vanished{suffix}"), if empty { 1.0 } else { 0.0 }));
    }
    Ok(rep)
}

/// Alternates a Wulff dilation by the forcing integral over each period `2 eps`
/// with curvature flow at doubled mobility over `eps`.
fn split_run(ctx: &Ctx, set: &SetSpec, t_final: f64, eps: f64) -> Result<LevelSetField> {
    let table = ctx.table()?;
    let periods = (t_final / (2.0 * eps)).round() as usize;
    if periods == 0 || ((periods as f64) * 2.0 * eps - t_final).abs() > 1e-9 * t_final {
        return Err(Error::Config(format!(
            "splitting period 2 * {eps} does not divide the horizon {t_final}"
        )));
    }
    let eta = ctx.cfg.eta()?;
    let mut field = init_levelset(&ctx.template, set, eta, ctx.cfg.domain.margin)?;
    let dt_max = ctx.cfg.flow.dt.unwrap_or(0.9 * cfl_limit(table, ctx.dx(), 0.0)) / 2.0;
    let sub = (eps / dt_max).ceil().max(1.0) as usize;
    let stepper = PdeStepper::new(table, eps / sub as f64)?
        .with_mobility_scale(2.0)
        .with_margin(ctx.cfg.domain.margin);
    for k in 0..periods {
        let t0 = 2.0 * eps * k as f64;
        let rho = ctx
            .forcing
            .time_integral(t0, t0 + 2.0 * eps)
            .ok_or_else(|| Error::Config("splitting requires a time-only forcing".into()))?;
        let morphed = geometry::wulff_morph_field(&field.grid, rho, table, -eta)?;
        field = LevelSetField::from_grid(morphed, eta)?;
        for _ in 0..sub {
            field = stepper.step(&field, &ForcingSpec::Zero)?;
        }
        field.grid.time = t0 + 2.0 * eps;
    }
    Ok(field)
}

fn splitting(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let set = cfg.initial_set()?;
    let t_final = cfg.flow.n_steps as f64 * cfg.flow.h;
    let mut coupled = FrontPolyline::default();
    ctx.evolve(Kind::Pde, cfg.flow.h, &set, &ctx.forcing, cfg.flow.n_steps, Some(""), |step, _, front| {
        if step == cfg.flow.n_steps {
            coupled = front.clone();
        }
        Ok(())
    })?;
    let eps_list = cfg
        .scenario
        .epsilons
        .clone()
        .unwrap_or_else(|| vec![t_final / 4.0, t_final / 8.0, t_final / 16.0]);
    let mut rep = ScenarioReport::new(ScenarioName::Splitting, &["epsilon", "hausdorff"]);
    let mut dists = Vec::new();
    for &eps in &eps_list {
        let field = split_run(ctx, &set, t_final, eps)?;
        let d = geometry::hausdorff(&field.front()?, &coupled, Distance::Euclidean)?;
        rep.push_row(vec![num(eps), num(d)]);
        rep.metrics.push(Metric::info(&format!("hausdorff_eps_{eps}"), d));
        dists.push(d);
    }
    let worst = dists
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0_f64, f64::max);
    rep.metrics.push(Metric::new("max_successive_ratio", worst, Relation::AtMost, 1.1));
    Ok(rep)
}

fn distance(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let table = ctx.table()?;
    let (center, _) = ball_of(cfg)?;
    let ri = cfg.scenario.inner_radius.unwrap_or(f64::NAN);
    let g_in = cfg.scenario.g_inner.unwrap_or(0.0);
    let inner_forcing = ForcingSpec::Constant(g_in);
    let inner_set = SetSpec::ball(&center, ri);
    let outer_set = cfg.initial_set()?;
    let n = cfg.flow.n_steps;
    let samples = cfg.scenario.samples.unwrap_or(20).max(1);
    let steps: Vec<usize> = (0..=samples).map(|i| (i * n) / samples).collect();
    let g_sup = ctx.forcing.sup_norm().max(g_in.abs());
    let mut rep = ScenarioReport::new(
        ScenarioName::Distance,
        &["engine", "step", "t", "gap", "lower_bound", "tolerance"],
    );
    for kind in kinds(cfg.flow.engine) {
        let collect = |set: &SetSpec, forcing: &ForcingSpec, frames: Option<&str>| -> Result<(Vec<FrontPolyline>, f64)> {
            let mut fronts = Vec::new();
            let dt = ctx.evolve(kind, cfg.flow.h, set, forcing, n, frames, |step, _, front| {
                if steps.contains(&step) {
                    fronts.push(front.clone());
                }
                Ok(())
            })?;
            Ok((fronts, dt))
        };
        let (inner, dt) = collect(&inner_set, &inner_forcing, None)?;
        let (outer, _) = collect(&outer_set, &ctx.forcing, Some(""))?;
        let tol = 4.0 * ctx.dx() + 2.0 * dt * g_sup;
        let mut gaps = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        let mut unique: Vec<usize> = steps.clone();
        unique.dedup();
        for (k, &step) in unique.iter().enumerate() {
            let t = step as f64 * cfg.flow.h;
            let gap = geometry::gap(&inner[k], &outer[k], Distance::PhiDual(table))?;
            gaps.push(gap);
            let gain = ctx.forcing.time_integral(0.0, t).unwrap_or(f64::NAN) - g_in * t;
            let lower = gaps[0] + gain;
            worst = worst.max(lower - gap);
            rep.push_row(vec![
                kind.as_str().into(),
                step.to_string(),
                num(t),
                num(gap),
                num(lower),
                num(tol),
            ]);
        }
        let suffix = if kind == Kind::Pde { "_pde" } else { "" };
        rep.metrics
            .push(Metric::new(&format!("max_shortfall{suffix}"), worst, Relation::AtMost, tol));
    }
    Ok(rep)
}

/// Random quadratic spec whose local limit is not small compared to `|M|`.
pub fn random_quadratic_spec(rng: &mut ChaCha8Rng, desc: &NormDescriptor) -> Result<QuadraticSurfaceSpec> {
    use nalgebra::{DMatrix, DVector};
    let n = desc.dim();
    loop {
        let p = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if p.norm() < 0.3 {
            continue;
        }
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        m = (&m + m.transpose()) * 0.5;
        let spec = QuadraticSurfaceSpec::new(p, m)?;
        let lim = nonlocal::local_limit_curvature(&spec, desc)?;
        if lim.abs() >= 0.25 * spec.m.norm() / spec.p.norm() {
            return Ok(spec);
        }
    }
}

fn stability(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let n = cfg.domain.n;
    let other = match cfg.norm {
        NormConfig::Euclidean => NormDescriptor::pnorm(n, 4.0)?,
        _ => ctx.desc.clone(),
    };
    let norms = [NormDescriptor::euclidean(n)?, other];
    let alphas = cfg.scenario.alphas.clone().unwrap_or_else(|| vec![0.9, 0.99, 0.999]);
    let (lo, hi) = alphas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.scenario.seed.unwrap_or(0));
    let mut rep = ScenarioReport::new(
        ScenarioName::Stability,
        &["spec", "norm", "alpha", "kappa", "limit", "rel_error"],
    );
    let mut worst_top = 0.0_f64;
    let mut not_better = 0usize;
    for k in 0..cfg.scenario.specs.unwrap_or(10) {
        let desc = &norms[k % 2];
        let spec = random_quadratic_spec(&mut rng, desc)?;
        let rows = nonlocal::stability_sweep(&spec, desc, &alphas)?;
        let err_at = |a: f64| rows.iter().find(|r| r.alpha == a).map_or(f64::NAN, |r| r.rel_error);
        worst_top = worst_top.max(err_at(hi));
        if !(err_at(hi) < err_at(lo)) {
            not_better += 1;
        }
        for r in rows {
            rep.push_row(vec![
                k.to_string(),
                (if k % 2 == 0 { "euclidean" } else { "other" }).into(),
                format!("{}", r.alpha),
                num(r.kappa),
                num(r.limit),
                num(r.rel_error),
            ]);
        }
    }
    rep.metrics.push(Metric::new("max_rel_error_top_alpha", worst_top, Relation::AtMost, 0.02));
    rep.metrics
        .push(Metric::new("specs_not_improving", not_better as f64, Relation::AtMost, 0.0));
    Ok(rep)
}

fn crossval(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let set = cfg.initial_set()?;
    let n = cfg.flow.n_steps;
    let mut thr = Vec::with_capacity(n + 1);
    ctx.evolve(Kind::Threshold, cfg.flow.h, &set, &ctx.forcing, n, Some(""), |_, _, f| {
        thr.push(f.clone());
        Ok(())
    })?;
    let mut pde = Vec::with_capacity(n + 1);
    ctx.evolve(Kind::Pde, cfg.flow.h, &set, &ctx.forcing, n, Some("pde_"), |_, _, f| {
        pde.push(f.clone());
        Ok(())
    })?;
    let beta = cfg.params()?.beta;
    let tol = 3.0 * (ctx.dx() + beta);
    let mut rep = ScenarioReport::new(ScenarioName::Crossval, &["step", "t", "hausdorff", "tolerance"]);
    let mut worst = 0.0_f64;
    for (step, (a, b)) in thr.iter().zip(&pde).enumerate() {
        let d = match (a.is_empty(), b.is_empty()) {
            (true, true) => 0.0,
            (false, false) => geometry::hausdorff(a, b, Distance::Euclidean)?,
            _ => f64::INFINITY,
        };
        worst = worst.max(d);
        rep.push_row(vec![step.to_string(), num(step as f64 * cfg.flow.h), num(d), num(tol)]);
    }
    rep.metrics.push(Metric::new("max_hausdorff", worst, Relation::AtMost, tol));
    Ok(rep)
}

fn anisotropy_report(ctx: &Ctx) -> Result<ScenarioReport> {
    let cfg = ctx.cfg;
    let alpha = cfg.flow.alpha;
    let table = ctx.table()?;
    table.write_csv(&ctx.outdir.join("anisotropy.csv"))?;
    let n = cfg.domain.n;
    let mut rep = ScenarioReport::new(ScenarioName::AnisotropyReport, &["direction", "mu", "phi", "ratio"]);
    if n == 2 {
        let mut ratios = Vec::with_capacity(table.len());
        for (k, d) in table.directions().iter().enumerate() {
            let phi = anisotropy::mobility_norm_phi(&ctx.desc, alpha, d)?;
            let ratio = phi / ctx.desc.norm(&[-d[1], d[0]]);
            ratios.push(ratio);
            rep.push_row(vec![k.to_string(), num(table.mu()[k]), num(phi), num(ratio)]);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len() as f64;
        rep.metrics.push(Metric::new("phi_ratio_cv", var.sqrt() / mean, Relation::AtMost, 1e-8));
        rep.metrics.push(Metric::info("phi_ratio_mean", mean));
        rep.metrics.push(Metric::info("lambda", table.lambda()));
        rep.metrics.push(Metric::info("lambda_over_4", table.lambda() / 4.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.scenario.seed.unwrap_or(0));
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cfg.scenario.pairs.unwrap_or(10_000) {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fp, fq, fm) = (
            anisotropy::mobility_norm_phi(&ctx.desc, alpha, &p)?,
            anisotropy::mobility_norm_phi(&ctx.desc, alpha, &q)?,
            anisotropy::mobility_norm_phi(&ctx.desc, alpha, &m)?,
        );
        let excess = fm - 0.5 * (fp + fq);
        worst = worst.max(excess);
        if excess > 1e-10 {
            violations += 1;
        }
    }
    rep.metrics.push(Metric::info("max_midpoint_excess", worst));
    rep.metrics
        .push(Metric::new("midpoint_violations", violations as f64, Relation::AtMost, 0.0));
    rep.metrics.push(Metric::info("c_n_alpha", anisotropy::c_const(n, alpha)));
    Ok(rep)
}
