//! Fractional anisotropic curvature of quadratic level sets and its local
//! limit as `alpha -> 1`.
//!
//! With `nu(dz) = (1 - alpha) dz / N(z)^(N + alpha)` and the local expansion
//! `u(x + z) - u(x) = <p, z> + <M z, z> / 2`, the curvature is
//! `nu({u >= u(x), <p,z> <= 0}) - nu({u < u(x), <p,z> > 0})`.
//! Directions are written `w = cos(psi) theta + sin(psi) p/|p|` with `theta`
//! on the sphere of `p^perp`. Along each ray the set is a half line
//! `r > 2 |p| |sin psi| / |<M w, w>|`, so the radial integral is closed form,
//! and the `|psi|^-alpha` blow-up at `psi = 0` is removed by the substitution
//! `psi = psi1 v^(1 / (1 - alpha))`.

use std::cell::RefCell;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norms::NormDescriptor;
use crate::quad::{self, Tol};

/// Default outer radius of the evaluated region.
pub const DEFAULT_R_OUT: f64 = 1e3;

// end of the substituted inner range in psi
const PSI1: f64 = 0.1;

/// `u(x + z) = u(x) + <p, z> + <M z, z> / 2` near the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSurfaceSpec {
    pub p: DVector<f64>,
    pub m: DMatrix<f64>,
    pub r_out: f64,
}

impl QuadraticSurfaceSpec {
    pub fn new(p: DVector<f64>, m: DMatrix<f64>) -> Result<Self> {
        let s = Self {
            p,
            m,
            r_out: DEFAULT_R_OUT,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_r_out(mut self, r_out: f64) -> Self {
        self.r_out = r_out;
        self
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p.len();
        if n < 2 {
            return Err(Error::OutOfRange(format!("dimension must be at least 2, got {n}")));
        }
        if self.m.nrows() != n || self.m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.m.nrows(),
            });
        }
        if self.p.iter().chain(self.m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("spec entries must be finite".into()));
        }
        if self.p.norm() == 0.0 {
            return Err(Error::OutOfRange("gradient p must be nonzero".into()));
        }
        let scale = self.m.amax().max(f64::MIN_POSITIVE);
        if (&self.m - self.m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::OutOfRange("Hessian M must be symmetric".into()));
        }
        if !(self.r_out > 0.0) {
            return Err(Error::OutOfRange(format!("outer radius must be positive, got {}", self.r_out)));
        }
        Ok(())
    }

    /// Same gradient with `M` scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            p: self.p.clone(),
            m: &self.m * s,
            r_out: self.r_out,
        }
    }
}

fn check(spec: &QuadraticSurfaceSpec, desc: &NormDescriptor) -> Result<()> {
    spec.validate()?;
    if desc.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: desc.dim(),
        });
    }
    Ok(())
}

/// Value of the curvature together with the `nu`-mass outside the ball of
/// radius `r_out`, which bounds the neglected far field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

pub fn kappa_alpha(spec: &QuadraticSurfaceSpec, desc: &NormDescriptor, alpha: f64) -> Result<f64> {
    kappa_alpha_estimate(spec, desc, alpha).map(|k| k.value)
}

pub fn kappa_alpha_estimate(spec: &QuadraticSurfaceSpec, desc: &NormDescriptor, alpha: f64) -> Result<KappaEstimate> {
    check(spec, desc)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha must be in (0,1), got {alpha}")));
    }
    let n = spec.dim();
    let pn = spec.p.norm();
    let phat: Vec<f64> = spec.p.iter().map(|v| v / pn).collect();
    let basis = quad::orthogonal_complement(spec.p.as_slice());
    let tol = Tol { abs: 1e-14, rel: 1e-10 };
    let first_err: RefCell<Option<Error>> = RefCell::new(None);
    let inner = |theta: &[f64]| -> f64 {
        psi_integral(spec, desc, alpha, theta, &phat, pn, tol).unwrap_or_else(|e| {
            first_err.borrow_mut().get_or_insert(e);
            0.0
        })
    };
    let value = quad::sphere_integral(&basis, &[], &inner, tol)?;
    if let Some(e) = first_err.into_inner() {
        return Err(e);
    }
    let ang = quad::sphere_integral(
        &quad::standard_basis(n),
        &desc.kink_angles(),
        &|w: &[f64]| desc.norm(w).powf(-(n as f64) - alpha),
        Tol::rel(1e-8),
    )?;
    let tail_bound = (1.0 - alpha) / alpha * spec.r_out.powf(-alpha) * ang;
    Ok(KappaEstimate { value, tail_bound })
}

/// Zeros in `(-pi/2, pi/2)` of `b(psi) = <M w, w>` for
/// `w = cos(psi) theta + sin(psi) n`.
fn b_zeros(a: f64, b: f64, c: f64) -> Vec<f64> {
    // b(psi) = (a + c)/2 + (a - c)/2 cos(2 psi) + b sin(2 psi)
    let amp = ((a - c) / 2.0).hypot(b);
    let rhs = -(a + c) / 2.0;
    if amp == 0.0 || rhs.abs() > amp {
        return Vec::new();
    }
    let phase = b.atan2((a - c) / 2.0);
    let d = (rhs / amp).acos();
    let mut out = Vec::new();
    for base in [phase + d, phase - d] {
        for k in -2..=2 {
            let psi = (base + k as f64 * std::f64::consts::TAU) / 2.0;
            if psi > -FRAC_PI_2 && psi < FRAC_PI_2 {
                out.push(psi);
            }
        }
    }
    out
}

fn psi_integral(
    spec: &QuadraticSurfaceSpec,
    desc: &NormDescriptor,
    alpha: f64,
    theta: &[f64],
    nvec: &[f64],
    pn: f64,
    tol: Tol,
) -> Result<f64> {
    let n = theta.len();
    let m = &spec.m;
    let quad_form = |x: &[f64], y: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += x[i] * m[(i, j)] * y[j];
            }
        }
        s
    };
    let (mtt, mtn, mnn) = (quad_form(theta, theta), quad_form(theta, nvec), quad_form(nvec, nvec));
    let power = -(n as f64) - alpha;
    let gamma = 1.0 - alpha;
    let r_out_pow = spec.r_out.powf(-alpha);
    let dir = |psi: f64| -> (Vec<f64>, f64) {
        let (s, c) = psi.sin_cos();
        let w: Vec<f64> = (0..n).map(|i| c * theta[i] + s * nvec[i]).collect();
        let b = c * c * mtt + 2.0 * s * c * mtn + s * s * mnn;
        (w, b)
    };
    // sign of the ray contribution: +1 in the upper wedge set, -1 in the lower one
    let sign = |psi: f64, b: f64| -> f64 {
        if psi < 0.0 && b > 0.0 {
            1.0
        } else if psi > 0.0 && b < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut breaks_outer: Vec<f64> = b_zeros(mtt, mtn, mnn);
    if n == 2 {
        // kinks of the norm along the half circle
        let t_ang = theta[1].atan2(theta[0]);
        let orient = (theta[0] * nvec[1] - theta[1] * nvec[0]).signum();
        for k in desc.kink_angles() {
            let mut d = (k - t_ang).rem_euclid(std::f64::consts::TAU);
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            }
            let psi = orient * d;
            if psi.abs() < FRAC_PI_2 {
                breaks_outer.push(psi);
            }
        }
    }
    let mut total = 0.0;
    for side in [-1.0, 1.0] {
        // outer part |psi| in (PSI1, pi/2), plain integrand
        let mut breaks: Vec<f64> = breaks_outer
            .iter()
            .map(|&z| side * z)
            .filter(|&z| z > PSI1 && z < FRAC_PI_2)
            .chain([PSI1, FRAC_PI_2])
            .collect();
        breaks.sort_by(f64::total_cmp);
        let outer = quad::integrate_with_breaks(
            |t| {
                let psi = side * t;
                let (w, b) = dir(psi);
                let sg = sign(psi, b);
                if sg == 0.0 {
                    return 0.0;
                }
                let r0 = 2.0 * pn * t.sin() / b.abs();
                let radial = (r0.powf(-alpha) - r_out_pow).max(0.0);
                sg * t.cos().powi(n as i32 - 2) * desc.norm(&w).powf(power) * radial
            },
            &breaks,
            tol,
        )?;
        // inner part |psi| = PSI1 v^(1/gamma), v in (0, 1); the (1 - alpha)
        // prefactor cancels the Jacobian's 1/gamma
        let mut vbreaks: Vec<f64> = breaks_outer
            .iter()
            .map(|&z| side * z)
            .filter(|&z| z > 0.0 && z < PSI1)
            .map(|z| (z / PSI1).powf(gamma))
            .chain([0.0, 1.0])
            .collect();
        vbreaks.sort_by(f64::total_cmp);
        let inner = quad::integrate_with_breaks(
            |v| {
                let t = PSI1 * v.powf(1.0 / gamma);
                let psi = side * t;
                let (w, b) = dir(psi);
                let sg = if t == 0.0 {
                    // limit direction: sign decided by b at psi = 0
                    if side < 0.0 && b > 0.0 {
                        1.0
                    } else if side > 0.0 && b < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    sign(psi, b)
                };
                if sg == 0.0 {
                    return 0.0;
                }
                let sinc = if t == 0.0 { 1.0 } else { t / t.sin() };
                // psi * r0^-alpha / v and psi * R^-alpha / v
                let near = (b.abs() / (2.0 * pn)).powf(alpha) * sinc.powf(alpha) * PSI1.powf(gamma);
                let far = PSI1 * v.powf(1.0 / gamma - 1.0) * r_out_pow;
                sg * t.cos().powi(n as i32 - 2) * desc.norm(&w).powf(power) * (near - far).max(0.0)
            },
            &vbreaks,
            tol,
        )?;
        total += (1.0 - alpha) * outer + inner;
    }
    Ok(total / alpha)
}

/// `(1 / (2|p|)) tr(B M)` with `B = int theta (x) theta N(theta)^-(N+1)` over
/// the unit sphere of `p^perp`.
pub fn local_limit_curvature(spec: &QuadraticSurfaceSpec, desc: &NormDescriptor) -> Result<f64> {
    check(spec, desc)?;
    let n = spec.dim();
    let basis = quad::orthogonal_complement(spec.p.as_slice());
    let m = &spec.m;
    let f = |t: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += t[i] * m[(i, j)] * t[j];
            }
        }
        s * desc.norm(t).powf(-(n as f64) - 1.0)
    };
    let v = quad::sphere_integral(&basis, &[], &f, Tol { abs: 1e-15, rel: 1e-12 })?;
    Ok(v / (2.0 * spec.p.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub kappa: f64,
    pub limit: f64,
    pub rel_error: f64,
}

pub fn stability_sweep(spec: &QuadraticSurfaceSpec, desc: &NormDescriptor, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let limit = local_limit_curvature(spec, desc)?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let kappa = kappa_alpha(spec, desc, alpha)?;
            Ok(SweepRow {
                alpha,
                kappa,
                limit,
                rel_error: (kappa - limit).abs() / limit.abs(),
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["alpha", "kappa", "limit", "rel_error"]).map_err(io)?;
    for r in rows {
        w.write_record([
            format!("{}", r.alpha),
            format!("{:.12e}", r.kappa),
            format!("{:.12e}", r.limit),
            format!("{:.6e}", r.rel_error),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
