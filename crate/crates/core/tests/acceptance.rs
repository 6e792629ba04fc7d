//! End-to-end acceptance suite. Runs as its own binary so every criterion
//! prints one PASS/FAIL line in order; the process fails if any criterion
//! outside `KNOWN_INFEASIBLE` fails, or if a known-infeasible one passes.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use frontflow::anisotropy::{c_const, c_const_quad, lambda_const, lambda_const_quad};
use frontflow::config::ExperimentConfig;
use frontflow::geometry::{contour, extract_front, radius_stats};
use frontflow::grid::{init_phase, Grid, SetSpec};
use frontflow::kernel::{kernel_mass, SchemeParams};
use frontflow::norms::NormDescriptor;
use frontflow::scenario::{self, ScenarioReport};
use frontflow::scheme::{ForcingSpec, SchemeOptions, ThresholdScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met at the prescribed resolution. They would
/// still run at full strictness; the suite then checks that the failure is
/// reproduced instead of failing outright.
const KNOWN_INFEASIBLE: &[u32] = &[];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Cfg<'a> {
    extent: (f64, f64),
    cells: usize,
    h: f64,
    n_steps: usize,
    engine: &'a str,
    norm: &'a str,
    forcing: &'a str,
    initial: &'a str,
    scenario: &'a str,
}

impl Cfg<'_> {
    fn text(&self) -> String {
        format!(
            "[domain]\nn = 2\nextent = [{:?}, {:?}]\ncells = {}\nmargin = 2\n\n\
             [flow]\nalpha = 1.5\nh = {:?}\nn_steps = {}\nengine = \"{}\"\n\n\
             [norm]\n{}\n\n[forcing]\n{}\n\n[initial]\n{}\n\n\
             [output]\ndir = \"out\"\ncadence = 1000000\nformats = []\n\n[scenario]\n{}\n",
            self.extent.0,
            self.extent.1,
            self.cells,
            self.h,
            self.n_steps,
            self.engine,
            self.norm,
            self.forcing,
            self.initial,
            self.scenario
        )
    }

    fn run(&self) -> ScenarioReport {
        let cfg = ExperimentConfig::parse_str(&self.text()).expect("acceptance config parses");
        let dir = tempfile::tempdir().expect("temp dir");
        let report = scenario::run(&cfg, dir.path()).expect("scenario runs");
        assert!(dir.path().join("summary.csv").exists());
        report
    }
}

fn metrics(r: &ScenarioReport) -> String {
    r.metrics
        .iter()
        .filter(|m| m.threshold.is_finite())
        .map(|m| format!("{}={:.4e}", m.name, m.value))
        .collect::<Vec<_>>()
        .join(" ")
}

const EUCLIDEAN: &str = "kind = \"euclidean\"";
const PNORM4: &str = "kind = \"pnorm\"\nq = 4.0";
const ELLIPSE: &str = "kind = \"ellipse\"\nmatrix = [[1.0, 0.0], [0.0, 2.25]]";
const ZERO: &str = "kind = \"zero\"";

fn quadrature_identities() -> Outcome {
    let mut worst = 0.0_f64;
    for n in [2usize, 3] {
        let desc = NormDescriptor::euclidean(n).unwrap();
        for alpha in [1.0, 1.25, 1.5, 1.9] {
            let nf = n as f64;
            let radial = |a: f64| (PI / (nf + alpha)) / (PI * (a + 1.0) / (nf + alpha)).sin();
            let sphere = 2.0 * PI.powf(nf / 2.0) / gamma_half_int(nf / 2.0);
            let rel = |x: f64, y: f64| ((x - y) / y).abs();
            worst = worst
                .max(rel(lambda_const(n, alpha), 1.0 / radial(nf - 2.0)))
                .max(rel(lambda_const_quad(n, alpha).unwrap(), 1.0 / radial(nf - 2.0)))
                .max(rel(kernel_mass(&desc, alpha).unwrap(), sphere * radial(nf - 1.0)));
            // the defining integral of C diverges at alpha = 1, where the
            // constant is fixed to 1 instead
            if alpha > 1.0 {
                worst = worst
                    .max(rel(c_const(n, alpha), radial(nf)))
                    .max(rel(c_const_quad(n, alpha).unwrap(), radial(nf)));
            } else {
                worst = worst.max((c_const(n, alpha) - 1.0).abs());
            }
        }
    }
    outcome(worst <= 1e-8, format!("max relative deviation {worst:.3e} (tol 1e-8)"))
}

/// Gamma at integers and half integers, enough for sphere areas.
fn gamma_half_int(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut k = 0.5;
        while k < x - 1e-12 {
            g *= k;
            k += 1.0;
        }
        g
    }
}

fn shrinking_circle() -> Outcome {
    let r = Cfg {
        extent: (-1.25, 1.25),
        cells: 566,
        h: 0.00125,
        n_steps: 1000,
        engine: "threshold",
        norm: EUCLIDEAN,
        forcing: ZERO,
        initial: "shape = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0",
        scenario: "name = \"shrink_circle\"\nrefine = true",
    }
    .run();
    outcome(r.passed(), metrics(&r))
}

fn r_squared(x: &[f64], y: &[f64], through_origin: bool) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = if through_origin {
        (0.0, 0.0)
    } else {
        (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n)
    };
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ybar = y.iter().sum::<f64>() / n;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - ybar).powi(2)).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

/// One-step inward displacement of a disk, read off the pre-threshold field
/// so it resolves motion below the grid spacing.
fn disk_displacement(desc: &NormDescriptor, template: &Grid, r: f64, h: f64) -> f64 {
    let params = SchemeParams::new(1.5, h).unwrap();
    let opts = SchemeOptions {
        margin: 0,
        ..SchemeOptions::default()
    };
    let mut scheme = ThresholdScheme::new(desc, params, template, &opts).unwrap();
    let init = init_phase(template, &SetSpec::ball(&[0.0, 0.0], r), 0).unwrap();
    let before = radius_stats(&extract_front(&init).unwrap(), [0.0, 0.0]).unwrap().mean;
    let field = scheme.field(&init, &ForcingSpec::Zero).unwrap();
    let after = radius_stats(&contour(&field, -1.0).unwrap(), [0.0, 0.0]).unwrap().mean;
    before - after
}

fn ball_speed_scaling() -> Outcome {
    let desc = NormDescriptor::euclidean(2).unwrap();
    let template = Grid::cube(2, -2.4, 2.4, 480, -1.0).unwrap();
    let h0 = 0.0064;
    let hs = [h0, h0 / 2.0, h0 / 4.0];
    let mut worst_lin = 1.0_f64;
    let mut inv_r = Vec::new();
    let mut taus = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let d: Vec<f64> = hs.iter().map(|&h| disk_displacement(&desc, &template, r, h)).collect();
        let (tau, r2) = r_squared(&hs, &d, false);
        worst_lin = worst_lin.min(r2);
        inv_r.push(1.0 / r);
        taus.push(tau);
    }
    let (a1, r2_tau) = r_squared(&inv_r, &taus, true);
    outcome(
        worst_lin >= 0.99 && r2_tau >= 0.95,
        format!("min R2(d vs h)={worst_lin:.5} (>=0.99), R2(tau vs 1/r)={r2_tau:.5} (>=0.95), A1={a1:.4}"),
    )
}

fn convexity() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, norm) in [("euclidean", EUCLIDEAN), ("pnorm4", PNORM4), ("ellipse", ELLIPSE)] {
        let r = Cfg {
            extent: (-2.0, 2.0),
            cells: 320,
            h: 0.0025,
            n_steps: 200,
            engine: "threshold",
            norm,
            forcing: "kind = \"table\"\ntimes = [0.0, 0.25, 0.5]\nvalues = [0.5, -0.5, 0.5]",
            initial: "shape = \"regular\"\ncenter = [0.0, 0.0]\nradius = 1.2\nsides = 6\nphase = 0.0",
            scenario: "name = \"convexity\"",
        }
        .run();
        pass &= r.passed();
        detail.push(format!("{name}: {}", metrics(&r)));
    }
    outcome(pass, detail.join("; "))
}

fn random_blob(rng: &mut ChaCha8Rng, count: usize, reach: f64) -> Vec<SetSpec> {
    (0..count)
        .map(|_| {
            let c = [rng.gen_range(-reach..reach), rng.gen_range(-reach..reach)];
            if rng.gen_bool(0.5) {
                SetSpec::ball(&c, rng.gen_range(0.1..0.35))
            } else {
                let (w, hgt) = (rng.gen_range(0.1..0.35), rng.gen_range(0.1..0.35));
                SetSpec::Box {
                    lo: vec![c[0] - w, c[1] - hgt],
                    hi: vec![c[0] + w, c[1] + hgt],
                }
            }
        })
        .collect()
}

fn comparison_principle() -> Outcome {
    let desc = NormDescriptor::euclidean(2).unwrap();
    let template = Grid::cube(2, -1.0, 1.0, 96, -1.0).unwrap();
    let params = SchemeParams::new(1.5, 0.01).unwrap();
    let opts = SchemeOptions {
        margin: 0,
        ..SchemeOptions::default()
    };
    let mut scheme = ThresholdScheme::new(&desc, params, &template, &opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0usize;
    let mut checks = 0usize;
    for _ in 0..100 {
        let k = rng.gen_range(1..4);
        let inner_parts = random_blob(&mut rng, k, 0.5);
        let mut outer_parts = inner_parts.clone();
        let k = rng.gen_range(0..3);
        outer_parts.extend(random_blob(&mut rng, k, 0.5));
        let mut a = init_phase(&template, &SetSpec::Union(inner_parts), 0).unwrap();
        let mut b = init_phase(&template, &SetSpec::Union(outer_parts), 0).unwrap();
        let g1: Vec<f64> = (0..template.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g2: Vec<f64> = g1.iter().map(|g| g + rng.gen_range(0.0..0.5)).collect();
        let f1 = ForcingSpec::GridSequence { h: 0.01, frames: vec![g1] };
        let f2 = ForcingSpec::GridSequence { h: 0.01, frames: vec![g2] };
        for _ in 0..50 {
            a = scheme.step(&a, &f1).unwrap();
            b = scheme.step(&b, &f2).unwrap();
            checks += a.len();
            violations += a.values.iter().zip(&b.values).filter(|(x, y)| x > y).count();
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checks} cell checks"))
}

fn cross_validation() -> Outcome {
    let r = Cfg {
        extent: (-1.5, 1.5),
        cells: 150,
        h: 0.01,
        n_steps: 25,
        engine: "both",
        norm: PNORM4,
        forcing: ZERO,
        initial: "shape = \"box\"\nlo = [-0.8, -0.6]\nhi = [0.8, 0.6]",
        scenario: "name = \"crossval\"",
    }
    .run();
    let tol = r.metric("max_hausdorff").map_or(f64::NAN, |m| m.threshold);
    outcome(r.passed(), format!("{} (tol {tol:.4})", metrics(&r)))
}

fn wulff_asymptotics() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, norm) in [("euclidean", EUCLIDEAN), ("pnorm4", PNORM4)] {
        let r = Cfg {
            extent: (-40.0, 40.0),
            cells: 640,
            h: 1.0,
            n_steps: 120,
            engine: "threshold",
            norm,
            forcing: "kind = \"constant\"\nvalue = 1.0",
            initial: "shape = \"ball\"\ncenter = [0.0, 0.0]\nradius = 10.0",
            scenario: "name = \"wulff\"",
        }
        .run();
        pass &= r.passed();
        detail.push(format!("{name}: {}", metrics(&r)));
    }
    outcome(pass, detail.join("; "))
}

fn splitting() -> Outcome {
    let r = Cfg {
        extent: (-1.5, 1.5),
        cells: 150,
        h: 0.01,
        n_steps: 32,
        engine: "pde",
        norm: PNORM4,
        forcing: "kind = \"constant\"\nvalue = 1.0",
        initial: "shape = \"ball\"\ncenter = [0.0, 0.0]\nradius = 0.8",
        scenario: "name = \"splitting\"\nepsilons = [0.08, 0.04, 0.02]",
    }
    .run();
    let d: Vec<String> = r
        .series
        .iter()
        .map(|row| format!("{}:{}", row[0], row[1]))
        .collect();
    outcome(r.passed(), format!("{} [{}]", metrics(&r), d.join(", ")))
}

fn distance_inequality() -> Outcome {
    let r = Cfg {
        extent: (-1.5, 1.5),
        cells: 300,
        h: 0.0025,
        n_steps: 40,
        engine: "threshold",
        norm: EUCLIDEAN,
        forcing: "kind = \"constant\"\nvalue = 0.5",
        initial: "shape = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.2",
        scenario: "name = \"distance\"\ninner_radius = 0.9\ng_inner = 0.0\nsamples = 20",
    }
    .run();
    let tol = r.metric("max_shortfall").map_or(f64::NAN, |m| m.threshold);
    outcome(r.passed(), format!("{} (tol {tol:.4})", metrics(&r)))
}

fn nonlocal_stability() -> Outcome {
    let r = Cfg {
        extent: (-1.5, 1.5),
        cells: 150,
        h: 0.01,
        n_steps: 1,
        engine: "threshold",
        norm: PNORM4,
        forcing: ZERO,
        initial: "shape = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0",
        scenario: "name = \"stability\"\nseed = 0\nspecs = 10\nalphas = [0.9, 0.99, 0.999]",
    }
    .run();
    outcome(r.passed(), metrics(&r))
}

fn mobility_convexity() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, norm) in [("pnorm4", PNORM4), ("ellipse", ELLIPSE)] {
        let r = Cfg {
            extent: (-1.5, 1.5),
            cells: 150,
            h: 0.01,
            n_steps: 1,
            engine: "threshold",
            norm,
            forcing: ZERO,
            initial: "shape = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0",
            scenario: "name = \"anisotropy_report\"\nseed = 3\npairs = 10000",
        }
        .run();
        pass &= r.passed();
        let get = |k: &str| r.metric(k).map_or(f64::NAN, |m| m.value);
        detail.push(format!(
            "{name}: {} ratio={:.6} lambda={:.6} lambda/4={:.6}",
            metrics(&r),
            get("phi_ratio_mean"),
            get("lambda"),
            get("lambda_over_4")
        ));
    }
    outcome(pass, detail.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "quadrature identities", quadrature_identities),
        (2, "shrinking circle law", shrinking_circle),
        (3, "ball speed scaling", ball_speed_scaling),
        (4, "convexity preservation", convexity),
        (5, "discrete comparison principle", comparison_principle),
        (6, "threshold vs level-set cross-validation", cross_validation),
        (7, "Wulff asymptotics", wulff_asymptotics),
        (8, "splitting convergence", splitting),
        (9, "distance inequality", distance_inequality),
        (10, "nonlocal stability", nonlocal_stability),
        (11, "mobility convexity and 2-D form", mobility_convexity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut ok = true;
    for (id, name, run) in criteria {
        let selected = filter.iter().any(|f| match f.parse::<u32>() {
            Ok(n) => n == id,
            Err(_) => name.contains(f.as_str()),
        });
        if !filter.is_empty() && !selected {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let expected_fail = KNOWN_INFEASIBLE.contains(&id);
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        let note = match (expected_fail, out.pass) {
            (true, false) => " (known infeasible, failure reproduced)",
            (true, true) => " (listed as infeasible but passed)",
            _ => "",
        };
        println!("criterion {id:>2} {name}: {verdict}{note} [{secs:.1}s] {}", out.detail);
        ok &= out.pass != expected_fail;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
