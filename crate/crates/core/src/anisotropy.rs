//! Limit-flow quantities: `C_{N,alpha}`, mobility, anisotropy matrix, the
//! mobility norm and its dual, and Wulff shapes.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::FrontPolyline;
use crate::norms::{self, NormDescriptor};
use crate::quad::{self, Tol};

/// Default number of directions in a 2-D table.
pub const DEFAULT_DIRECTIONS: usize = 1024;

const ANGULAR_TOL: f64 = 1e-12;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(1.0..2.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha must be in [1,2), got {alpha}")));
    }
    Ok(())
}

fn check_p(desc: &NormDescriptor, p: &[f64]) -> Result<()> {
    if p.len() != desc.dim() {
        return Err(Error::DimensionMismatch {
            expected: desc.dim(),
            got: p.len(),
        });
    }
    if p.iter().all(|&v| v == 0.0) {
        return Err(Error::OutOfRange("direction p must be nonzero".into()));
    }
    Ok(())
}

/// `C_{N,alpha} = int_0^inf t^N/(1+t^(N+alpha)) dt`, and 1 at alpha = 1.
pub fn c_const(n: usize, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let n = n as f64;
    quad::power_ratio_integral(n, n + alpha)
}

/// `C_{N,alpha}` by quadrature of the defining integral.
pub fn c_const_quad(n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(1.0);
    }
    let n = n as f64;
    quad::power_ratio_integral_quad(n, n + alpha, Tol::rel(1e-13))
}

/// `lambda_{alpha,N} = [int_0^inf t^(N-2)/(1+t^(N+alpha)) dt]^(-1)`.
pub fn lambda_const(n: usize, alpha: f64) -> f64 {
    let n = n as f64;
    1.0 / quad::power_ratio_integral(n - 2.0, n + alpha)
}

pub fn lambda_const_quad(n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = n as f64;
    Ok(1.0 / quad::power_ratio_integral_quad(n - 2.0, n + alpha, Tol::rel(1e-13))?)
}

/// `int_{S^(N-1) cap p^perp} N(theta)^(-power)`.
fn hyperplane_moment(desc: &NormDescriptor, p: &[f64], power: f64) -> Result<f64> {
    let basis = quad::orthogonal_complement(p);
    quad::sphere_integral(&basis, &[], &|x: &[f64]| desc.norm(x).powf(-power), Tol::rel(ANGULAR_TOL))
}

/// `mu_alpha(p/|p|) = [2 int_{p^perp} P_alpha dH^(N-1)]^(-1)`.
pub fn mobility_mu(desc: &NormDescriptor, alpha: f64, p: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    check_p(desc, p)?;
    let n = desc.dim() as f64;
    let radial = quad::power_ratio_integral(n - 2.0, n + alpha);
    let angular = hyperplane_moment(desc, p, n - 1.0)?;
    Ok(1.0 / (2.0 * radial * angular))
}

/// `Phi_alpha(p) = mu_alpha(p) |p|`, zero at the origin.
pub fn mobility_norm_phi(desc: &NormDescriptor, alpha: f64, p: &[f64]) -> Result<f64> {
    if p.iter().all(|&v| v == 0.0) {
        check_alpha(alpha)?;
        return Ok(0.0);
    }
    Ok(mobility_mu(desc, alpha, p)? * norms::euclidean(p))
}

/// `A(p/|p|) = C_{N,alpha} int_{S^(N-1) cap p^perp} theta (x) theta N(theta)^(-(N+1))`.
pub fn anisotropy_matrix(desc: &NormDescriptor, alpha: f64, p: &[f64]) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    check_p(desc, p)?;
    let n = desc.dim();
    let c = c_const(n, alpha);
    let power = n as f64 + 1.0;
    let basis = quad::orthogonal_complement(p);
    let mut a = DMatrix::zeros(n, n);
    if n == 2 {
        let t = &basis[0];
        let w = 2.0 * c / desc.norm(t).powf(power);
        a[(0, 0)] = w * t[0] * t[0];
        a[(1, 1)] = w * t[1] * t[1];
        a[(0, 1)] = w * t[0] * t[1];
        a[(1, 0)] = a[(0, 1)];
        return Ok(a);
    }
    let scale = hyperplane_moment(desc, p, power)?;
    let tol = Tol {
        abs: 1e-13 * scale,
        rel: ANGULAR_TOL,
    };
    for i in 0..n {
        for j in i..n {
            let v = quad::sphere_integral(
                &basis,
                &[],
                &|x: &[f64]| x[i] * x[j] * desc.norm(x).powf(-power),
                tol,
            )?;
            a[(i, j)] = c * v;
            a[(j, i)] = c * v;
        }
    }
    Ok(a)
}

/// `F_alpha(M, p) = tr(M A(p/|p|))`.
pub fn curvature_operator(
    desc: &NormDescriptor,
    alpha: f64,
    m: &DMatrix<f64>,
    p: &[f64],
) -> Result<f64> {
    let a = anisotropy_matrix(desc, alpha, p)?;
    if m.nrows() != a.nrows() || m.ncols() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: m.nrows(),
        });
    }
    Ok((m * a).trace())
}

/// Convex polygon given by counter-clockwise vertices around the origin, with
/// a gauge evaluated by locating the angular sector of the argument.
#[derive(Debug, Clone)]
pub struct SectorPolygon {
    vertices: Vec<[f64; 2]>,
    angles: Vec<f64>,
    facets: Vec<[f64; 2]>,
    r_min: f64,
    r_max: f64,
}

impl SectorPolygon {
    /// Polygon `{x : <x, q_k> <= 1}` for points `q_k` whose convex hull
    /// contains the origin in its interior.
    fn polar_of(points: &[[f64; 2]]) -> Result<Self> {
        let hull = norms::convex_hull(points);
        if hull.len() < 3 {
            return Err(Error::InvalidSet("degenerate support table".into()));
        }
        let m = hull.len();
        let mut vertices = Vec::with_capacity(m);
        for i in 0..m {
            let a = hull[i];
            let b = hull[(i + 1) % m];
            let det = a[0] * b[1] - a[1] * b[0];
            if det <= 0.0 {
                return Err(Error::InvalidSet("origin not interior to support hull".into()));
            }
            vertices.push([(b[1] - a[1]) / det, (a[0] - b[0]) / det]);
        }
        // the edge from vertex i to i+1 lies on the line <x, hull[i+1]> = 1
        let facets: Vec<[f64; 2]> = (0..m).map(|i| hull[(i + 1) % m]).collect();
        Ok(Self::from_parts(vertices, facets))
    }

    fn from_parts(vertices: Vec<[f64; 2]>, facets: Vec<[f64; 2]>) -> Self {
        // rotate so that the angles increase from the smallest one
        let m = vertices.len();
        let ang: Vec<f64> = vertices.iter().map(|v| v[1].atan2(v[0])).collect();
        let start = (0..m).min_by(|&i, &j| ang[i].total_cmp(&ang[j])).unwrap_or(0);
        let vertices: Vec<[f64; 2]> = (0..m).map(|k| vertices[(start + k) % m]).collect();
        let facets: Vec<[f64; 2]> = (0..m).map(|k| facets[(start + k) % m]).collect();
        let angles: Vec<f64> = vertices.iter().map(|v| v[1].atan2(v[0])).collect();
        let r_max = vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        let r_min = facets
            .iter()
            .map(|f| 1.0 / f[0].hypot(f[1]))
            .fold(f64::INFINITY, f64::min);
        Self {
            vertices,
            angles,
            facets,
            r_min,
            r_max,
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Inradius and circumradius about the origin.
    pub fn radii(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    pub fn gauge(&self, x: [f64; 2]) -> f64 {
        if x[0] == 0.0 && x[1] == 0.0 {
            return 0.0;
        }
        let t = x[1].atan2(x[0]);
        let m = self.vertices.len();
        let i = self.angles.partition_point(|&a| a <= t);
        let sector = if i == 0 { m - 1 } else { i - 1 };
        let f = self.facets[sector];
        (f[0] * x[0] + f[1] * x[1]).max(0.0)
    }

    /// Gauge as the plain maximum over all facets.
    pub fn gauge_exhaustive(&self, x: [f64; 2]) -> f64 {
        self.facets
            .iter()
            .map(|f| f[0] * x[0] + f[1] * x[1])
            .fold(0.0, f64::max)
    }
}

/// Per-direction samples of the limit quantities.
#[derive(Debug, Clone)]
pub struct AnisotropyTable {
    dim: usize,
    alpha: f64,
    desc: NormDescriptor,
    dirs: Vec<Vec<f64>>,
    mu: Vec<f64>,
    amat: Vec<DMatrix<f64>>,
    phi: Vec<f64>,
    c_n_alpha: f64,
    lambda: f64,
    wulff: Option<SectorPolygon>,
}

impl AnisotropyTable {
    pub fn build(desc: &NormDescriptor, alpha: f64, n_dirs: usize) -> Result<Self> {
        check_alpha(alpha)?;
        let dim = desc.dim();
        if dim == 2 && (n_dirs < 64 || n_dirs % 2 != 0) {
            return Err(Error::OutOfRange(format!(
                "2-D tables need an even number of at least 64 directions, got {n_dirs}"
            )));
        }
        if dim != 2 && dim != 3 {
            return Err(Error::Unsupported(format!("direction tables in dimension {dim}")));
        }
        if dim == 3 && n_dirs < 64 {
            return Err(Error::OutOfRange(format!(
                "3-D tables need at least 64 directions, got {n_dirs}"
            )));
        }
        let half = n_dirs / 2;
        let half_dirs: Vec<Vec<f64>> = if dim == 2 {
            (0..half)
                .map(|k| {
                    let t = TAU * k as f64 / n_dirs as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        } else {
            hemisphere_points(half)
        };
        let samples: Vec<(f64, DMatrix<f64>)> = half_dirs
            .par_iter()
            .map(|d| Ok((mobility_mu(desc, alpha, d)?, anisotropy_matrix(desc, alpha, d)?)))
            .collect::<Result<_>>()?;
        // antipodal directions share every sample exactly
        let mut dirs = half_dirs.clone();
        dirs.extend(half_dirs.iter().map(|d| d.iter().map(|v| -v).collect::<Vec<f64>>()));
        let mut mu: Vec<f64> = samples.iter().map(|s| s.0).collect();
        mu.extend_from_within(..);
        let mut amat: Vec<DMatrix<f64>> = samples.into_iter().map(|s| s.1).collect();
        amat.extend_from_within(..);
        let phi = mu.clone();
        let wulff = if dim == 2 {
            let pts: Vec<[f64; 2]> = dirs
                .iter()
                .zip(&phi)
                .map(|(d, f)| [d[0] / f, d[1] / f])
                .collect();
            Some(SectorPolygon::polar_of(&pts)?)
        } else {
            None
        };
        Ok(Self {
            dim,
            alpha,
            desc: desc.clone(),
            dirs,
            mu,
            amat,
            phi,
            c_n_alpha: c_const(dim, alpha),
            lambda: lambda_const(dim, alpha),
            wulff,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn norm(&self) -> &NormDescriptor {
        &self.desc
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.dirs
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn amat(&self) -> &[DMatrix<f64>] {
        &self.amat
    }

    /// `Phi_alpha` on the unit table directions (equal to `mu` there).
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn c_n_alpha(&self) -> f64 {
        self.c_n_alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Wulff polygon `{x : <x, theta_k> <= Phi(theta_k)}` of a 2-D table.
    pub fn wulff_polygon(&self) -> Option<&SectorPolygon> {
        self.wulff.as_ref()
    }

    /// Largest `mu * lambda_max(A)` over the table.
    pub fn max_diffusion(&self) -> f64 {
        self.mu
            .iter()
            .zip(&self.amat)
            .map(|(m, a)| m * a.clone().symmetric_eigen().eigenvalues.max())
            .fold(0.0, f64::max)
    }

    pub fn max_mu(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max)
    }

    /// `mu` and the entries `(a11, a12, a22)` of `A` at polar angle `theta`,
    /// interpolated linearly between the two nearest table directions.
    pub fn interpolate_2d(&self, theta: f64) -> (f64, [f64; 3]) {
        let n = self.dirs.len();
        let s = theta.rem_euclid(TAU) / TAU * n as f64;
        let k = (s.floor() as usize) % n;
        let w = s - s.floor();
        let k1 = (k + 1) % n;
        let lerp = |a: f64, b: f64| a + w * (b - a);
        let (a, b) = (&self.amat[k], &self.amat[k1]);
        (
            lerp(self.mu[k], self.mu[k1]),
            [
                lerp(a[(0, 0)], b[(0, 0)]),
                lerp(a[(0, 1)], b[(0, 1)]),
                lerp(a[(1, 1)], b[(1, 1)]),
            ],
        )
    }

    /// `Phi_alpha(x)` interpolated from the table (2-D); exact for the
    /// table directions and positively homogeneous.
    pub fn phi_interp(&self, x: &[f64]) -> f64 {
        let r = norms::euclidean(x);
        if r == 0.0 {
            return 0.0;
        }
        let (mu, _) = self.interpolate_2d(x[1].atan2(x[0]));
        mu * r
    }

    /// Writes `theta, mu, a_ij..., phi` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("dir{i}")).collect();
        header.push("mu".into());
        for i in 0..self.dim {
            for j in i..self.dim {
                header.push(format!("a{i}{j}"));
            }
        }
        header.push("phi".into());
        let to_err = |e: csv::Error| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        };
        w.write_record(&header).map_err(to_err)?;
        for k in 0..self.dirs.len() {
            let mut row: Vec<String> = self.dirs[k].iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", self.mu[k]));
            for i in 0..self.dim {
                for j in i..self.dim {
                    row.push(format!("{:.17e}", self.amat[k][(i, j)]));
                }
            }
            row.push(format!("{:.17e}", self.phi[k]));
            w.write_record(&row).map_err(to_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        inner.flush().map_err(|e| Error::io(path, e))
    }
}

/// `n` well-spread points on the open upper unit hemisphere (spherical
/// Fibonacci lattice restricted to `z > 0`).
fn hemisphere_points(n: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            vec![r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Boundary of `c * W`, counter-clockwise.
pub fn wulff_boundary(c: f64, table: &AnisotropyTable) -> Result<FrontPolyline> {
    let poly = table
        .wulff_polygon()
        .ok_or_else(|| Error::Unsupported("Wulff boundary needs a 2-D table".into()))?;
    if !(c > 0.0) {
        return Err(Error::OutOfRange(format!("Wulff scale must be positive, got {c}")));
    }
    Ok(FrontPolyline::from_loops(vec![poly
        .vertices()
        .iter()
        .map(|v| [c * v[0], c * v[1]])
        .collect()]))
}

/// `Phi°(x) = max_k <x, theta_k> / Phi(theta_k)`.
pub fn phi_dual(x: &[f64], table: &AnisotropyTable) -> f64 {
    match table.wulff_polygon() {
        Some(poly) => poly.gauge([x[0], x[1]]),
        None => table
            .dirs
            .iter()
            .zip(&table.phi)
            .map(|(d, f)| d.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / f)
            .fold(0.0, f64::max),
    }
}
