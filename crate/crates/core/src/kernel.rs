//! The threshold kernel `J_h`, its time-step scalings and its sampled form.

use std::f64::consts::E;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::norms::{NormDescriptor, NormKind};
use crate::quad::{self, Tol};

/// Default fraction of the kernel mass allowed outside the sampled patch.
pub const DEFAULT_EPS_TAIL: f64 = 1e-3;

/// Default cap on the number of cells in a sampled kernel patch.
pub const DEFAULT_MAX_CELLS: usize = 1 << 25;

/// Relative tolerance of the α = 1 time-step inversion.
const BISECTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub alpha: f64,
    pub h: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl SchemeParams {
    pub fn new(alpha: f64, h: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            h,
            sigma: sigma_of_h(alpha, h)?,
            beta: beta_of_h(alpha, h)?,
        })
    }

    /// Core width `sigma^(1/alpha)` of the kernel.
    pub fn length(&self) -> f64 {
        self.sigma.powf(1.0 / self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(1.0..2.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha must be in [1,2), got {alpha}")));
    }
    Ok(())
}

/// Upper bound on `h` for α = 1: the maximum of `s^2 |ln s|` on `(0, 1)`.
pub fn h_max_alpha_one() -> f64 {
    1.0 / (2.0 * E)
}

pub fn sigma_of_h(alpha: f64, h: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::OutOfRange(format!("time step must be positive, got {h}")));
    }
    if alpha > 1.0 {
        return Ok(h.powf(alpha / 2.0));
    }
    let hmax = h_max_alpha_one();
    if h >= hmax {
        return Err(Error::OutOfRange(format!(
            "for alpha = 1 the time step must satisfy h < 1/(2e) = {hmax}, got {h}"
        )));
    }
    // s^2 |ln s| is increasing on (0, e^{-1/2})
    let g = |s: f64| s * s * (-s.ln());
    let mut lo = 0.0_f64;
    let mut hi = (-0.5_f64).exp();
    while hi - lo > BISECTION_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn beta_of_h(alpha: f64, h: f64) -> Result<f64> {
    let sigma = sigma_of_h(alpha, h)?;
    if alpha > 1.0 {
        Ok(h.sqrt())
    } else {
        Ok(sigma * sigma.ln().abs())
    }
}

/// `J_h(y) = sigma / (sigma^((N+alpha)/alpha) + N(y)^(N+alpha))`.
pub fn kernel_value(desc: &NormDescriptor, params: &SchemeParams, y: &[f64]) -> f64 {
    let n = desc.dim() as f64;
    let s = params.sigma;
    let e = n + params.alpha;
    s / (s.powf(e / params.alpha) + desc.norm(y).powf(e))
}

/// `int_{S^(N-1)} N(theta)^(-power) dH^(N-1)` by quadrature.
pub fn angular_moment(desc: &NormDescriptor, power: f64, tol: Tol) -> Result<f64> {
    let basis = quad::standard_basis(desc.dim());
    let breaks = desc.kink_angles();
    quad::sphere_integral(&basis, &breaks, &|x: &[f64]| desc.norm(x).powf(-power), tol)
}

/// `int_{S^(N-1)} N(theta)^(-N)`, in closed form where one exists.
pub fn angular_mass_factor(desc: &NormDescriptor) -> Result<f64> {
    let n = desc.dim();
    match desc.kind() {
        NormKind::Euclidean => Ok(quad::sphere_area(n)),
        NormKind::Ellipse { matrix } => Ok(quad::sphere_area(n) / matrix.determinant().sqrt()),
        _ => angular_moment(desc, n as f64, Tol::rel(1e-12)),
    }
}

/// `||P_alpha||_{L^1}`; independent of `h`.
pub fn kernel_mass(desc: &NormDescriptor, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = desc.dim() as f64;
    Ok(quad::power_ratio_integral(n - 1.0, n + alpha) * angular_mass_factor(desc)?)
}

/// Radius beyond which the analytic tail bound drops below `eps_tail * mass`.
pub fn tail_radius(desc: &NormDescriptor, params: &SchemeParams, mass: f64, eps_tail: f64) -> f64 {
    let n = desc.dim();
    let c = desc.equivalence_constant();
    let a = params.alpha;
    let bound = params.sigma * c.powf(n as f64 + a) * quad::sphere_area(n) / a;
    (bound / (eps_tail * mass)).powf(1.0 / a)
}

/// Analytic bound on `int_{|y| > r} J_h`.
pub fn tail_bound(desc: &NormDescriptor, params: &SchemeParams, r: f64) -> f64 {
    let n = desc.dim();
    let c = desc.equivalence_constant();
    let a = params.alpha;
    params.sigma * c.powf(n as f64 + a) * quad::sphere_area(n) * r.powf(-a) / a
}

#[derive(Debug, Clone)]
pub struct KernelSampling {
    pub dx: f64,
    pub eps_tail: f64,
    pub max_cells: usize,
    /// Per-axis cap on the half-width in cells. Cells farther than the grid
    /// extent never meet a +1 cell, so a grid can ask for a cropped patch.
    pub crop: Option<Vec<usize>>,
}

impl KernelSampling {
    pub fn new(dx: f64) -> Self {
        Self {
            dx,
            eps_tail: DEFAULT_EPS_TAIL,
            max_cells: DEFAULT_MAX_CELLS,
            crop: None,
        }
    }
}

/// Midpoint samples of `J_h * dx^N` on a centered patch of `2K_d + 1` cells per axis.
#[derive(Debug, Clone)]
pub struct KernelTable {
    values: Vec<f64>,
    half_widths: Vec<usize>,
    dx: f64,
    total_mass: f64,
    tail_mass: f64,
    tail_radius: f64,
}

impl KernelTable {
    pub fn sample(
        desc: &NormDescriptor,
        params: &SchemeParams,
        opts: &KernelSampling,
    ) -> Result<Self> {
        let n = desc.dim();
        let dx = opts.dx;
        let width = params.length();
        if !(dx > 0.0 && dx <= width / 4.0 * (1.0 + 1e-12)) {
            return Err(Error::UnderResolvedKernel { dx, width });
        }
        if !(opts.eps_tail > 0.0 && opts.eps_tail < 1.0) {
            return Err(Error::OutOfRange(format!(
                "tail fraction must be in (0,1), got {}",
                opts.eps_tail
            )));
        }
        let total_mass = kernel_mass(desc, params.alpha)?;
        let radius = tail_radius(desc, params, total_mass, opts.eps_tail);
        let k_full = (radius / dx).ceil() as usize;
        let half_widths: Vec<usize> = match &opts.crop {
            Some(c) if c.len() == n => c.iter().map(|&cd| cd.min(k_full)).collect(),
            Some(c) => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                })
            }
            None => vec![k_full; n],
        };
        let shape: Vec<usize> = half_widths.iter().map(|k| 2 * k + 1).collect();
        let cells = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        let cells = match cells {
            Some(c) if c <= opts.max_cells => c,
            _ => {
                return Err(Error::PatchTooLarge {
                    cells: cells.unwrap_or(usize::MAX),
                    limit: opts.max_cells,
                })
            }
        };
        let vol = dx.powi(n as i32);
        let half = cells / 2 + 1;
        let mut values = vec![0.0; cells];
        values[..half]
            .par_chunks_mut(4096)
            .enumerate()
            .for_each_init(
                || vec![0.0; n],
                |y, (chunk, out)| {
                    for (k, v) in out.iter_mut().enumerate() {
                        let mut flat = chunk * 4096 + k;
                        for d in (0..n).rev() {
                            let j = flat % shape[d];
                            flat /= shape[d];
                            y[d] = (j as f64 - half_widths[d] as f64) * dx;
                        }
                        *v = kernel_value(desc, params, y) * vol;
                    }
                },
            );
        for i in half..cells {
            values[i] = values[cells - 1 - i];
        }
        let sampled: f64 = values.iter().sum();
        let tail_mass = (total_mass - sampled).max(0.0);
        Ok(Self {
            values,
            half_widths,
            dx,
            total_mass,
            tail_mass,
            tail_radius: radius,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn half_widths(&self) -> &[usize] {
        &self.half_widths
    }

    pub fn shape(&self) -> Vec<usize> {
        self.half_widths.iter().map(|k| 2 * k + 1).collect()
    }

    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn sampled_mass(&self) -> f64 {
        self.total_mass - self.tail_mass
    }

    /// Radius required by the tail rule, whether or not the patch was cropped.
    pub fn tail_radius(&self) -> f64 {
        self.tail_radius
    }

    /// Entry at integer offset `idx` from the center (each `|idx_d| <= K_d`).
    pub fn at(&self, idx: &[isize]) -> f64 {
        let mut flat = 0usize;
        for (d, &i) in idx.iter().enumerate() {
            let s = 2 * self.half_widths[d] + 1;
            flat = flat * s + (i + self.half_widths[d] as isize) as usize;
        }
        self.values[flat]
    }
}
