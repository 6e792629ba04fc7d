//! Anisotropy norms on R^N.
//!
//! A [`NormDescriptor`] is the single source of anisotropy for the kernel, the
//! limit mobility and every metric diagnostic. All kinds are even by
//! construction, so `norm(x) == norm(-x)` holds bit-for-bit for the Euclidean,
//! p-norm and ellipse kinds; polygon norms are even up to the 1e-12 symmetry
//! tolerance enforced at construction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance for the central symmetry check on polygon vertex hulls.
const POLYGON_SYMMETRY_TOL: f64 = 1e-12;

/// Angles sampled on the unit circle when bounding a polygon norm by the
/// Euclidean one.
const EQUIVALENCE_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    Euclidean,
    /// `(sum |x_i|^q)^(1/q)`; `q = f64::INFINITY` is the max norm.
    PNorm { q: f64 },
    /// Quadratic gauge `sqrt(x^T M x)` for a symmetric positive-definite `M`.
    Ellipse { matrix: DMatrix<f64> },
    /// Minkowski gauge of a centrally symmetric convex polygon (N = 2 only).
    Polygon(PolygonGauge),
}

/// Convex, centrally symmetric polygon stored as its counter-clockwise hull
/// together with the scaled facet normals `n_i / c_i` so that the gauge is
/// `max_i <f_i, x>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonGauge {
    hull: Vec<[f64; 2]>,
    facets: Vec<[f64; 2]>,
}

impl PolygonGauge {
    pub fn new(vertices: &[[f64; 2]]) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::InvalidNorm(format!(
                "polygon needs at least 4 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidNorm("polygon vertex is not finite".into()));
        }
        let hull = convex_hull(vertices);
        if hull.len() < 4 {
            return Err(Error::InvalidNorm("polygon hull is degenerate".into()));
        }
        let scale = hull
            .iter()
            .map(|v| v[0].abs().max(v[1].abs()))
            .fold(0.0_f64, f64::max);
        let tol = POLYGON_SYMMETRY_TOL * scale.max(1.0);
        for v in &hull {
            let mirrored = hull
                .iter()
                .any(|w| (v[0] + w[0]).abs() <= tol && (v[1] + w[1]).abs() <= tol);
            if !mirrored {
                return Err(Error::InvalidNorm(format!(
                    "polygon hull is not centrally symmetric: vertex ({}, {}) has no mirror image",
                    v[0], v[1]
                )));
            }
        }
        let n = hull.len();
        let mut facets = Vec::with_capacity(n);
        for i in 0..n {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            // outward normal of a counter-clockwise edge
            let normal = [b[1] - a[1], a[0] - b[0]];
            let offset = normal[0] * a[0] + normal[1] * a[1];
            if offset <= 0.0 {
                return Err(Error::InvalidNorm(
                    "origin is not interior to the polygon".into(),
                ));
            }
            facets.push([normal[0] / offset, normal[1] / offset]);
        }
        Ok(Self { hull, facets })
    }

    pub fn hull(&self) -> &[[f64; 2]] {
        &self.hull
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        self.facets
            .iter()
            .map(|f| f[0] * x[0] + f[1] * x[1])
            .fold(0.0_f64, f64::max)
    }

    /// Polar angles of the hull vertices in `[0, 2*pi)`; the gauge is smooth
    /// between consecutive ones.
    pub fn vertex_angles(&self) -> Vec<f64> {
        let mut angles: Vec<f64> = self
            .hull
            .iter()
            .map(|v| v[1].atan2(v[0]).rem_euclid(std::f64::consts::TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        angles
    }
}

/// Andrew's monotone chain; returns the strict hull counter-clockwise.
pub(crate) fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormDescriptor {
    kind: NormKind,
    dim: usize,
}

impl NormDescriptor {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: NormKind::Euclidean,
            dim,
        })
    }

    pub fn pnorm(dim: usize, q: f64) -> Result<Self> {
        check_dim(dim)?;
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidNorm(format!("p-norm exponent must be >= 1, got {q}")));
        }
        Ok(Self {
            kind: NormKind::PNorm { q },
            dim,
        })
    }

    pub fn ellipse(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        check_dim(dim)?;
        if matrix.ncols() != dim {
            return Err(Error::InvalidNorm(format!(
                "ellipse matrix must be square, got {}x{}",
                dim,
                matrix.ncols()
            )));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if !(asym <= 1e-12 * matrix.amax().max(1.0)) {
            return Err(Error::InvalidNorm("ellipse matrix is not symmetric".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(Error::InvalidNorm(
                "ellipse matrix is not positive definite".into(),
            ));
        }
        Ok(Self {
            kind: NormKind::Ellipse { matrix: sym },
            dim,
        })
    }

    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        Ok(Self {
            kind: NormKind::Polygon(PolygonGauge::new(vertices)?),
            dim: 2,
        })
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, NormKind::Euclidean)
    }

    /// Evaluates the norm, checking the dimension.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.norm(x))
    }

    /// Evaluates the norm; `x.len()` must equal `self.dim()`.
    #[inline]
    pub fn norm(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            NormKind::Euclidean => euclidean(x),
            NormKind::PNorm { q } => pnorm(x, *q),
            NormKind::Ellipse { matrix } => {
                let mut s = 0.0;
                for i in 0..self.dim {
                    let mut row = 0.0;
                    for j in 0..self.dim {
                        row += matrix[(i, j)] * x[j];
                    }
                    s += x[i] * row;
                }
                s.max(0.0).sqrt()
            }
            NormKind::Polygon(poly) => poly.gauge(x),
        }
    }

    /// Smallest `C >= 1` with `|x|/C <= N(x) <= C|x|` that is available for the
    /// kind: exact for Euclidean, p-norm and ellipse, sampled and inflated by 1%
    /// for polygons.
    pub fn equivalence_constant(&self) -> f64 {
        let n = self.dim as f64;
        match &self.kind {
            NormKind::Euclidean => 1.0,
            NormKind::PNorm { q } => {
                let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
                n.powf((inv_q - 0.5).abs())
            }
            NormKind::Ellipse { matrix } => {
                let eig = matrix.clone().symmetric_eigen().eigenvalues;
                let lo = eig.min().sqrt();
                let hi = eig.max().sqrt();
                hi.max(1.0 / lo).max(1.0)
            }
            NormKind::Polygon(poly) => {
                let (lo, hi) = (0..EQUIVALENCE_SAMPLES)
                    .map(|k| {
                        let t = std::f64::consts::TAU * k as f64 / EQUIVALENCE_SAMPLES as f64;
                        poly.gauge(&[t.cos(), t.sin()])
                    })
                    .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
                (1.01 * hi.max(1.0 / lo)).max(1.0)
            }
        }
    }

    /// Angles in `[0, 2*pi)` where the norm restricted to the unit circle may
    /// fail to be smooth. Quadrature over the circle splits at these points.
    pub fn kink_angles(&self) -> Vec<f64> {
        use std::f64::consts::FRAC_PI_2;
        match &self.kind {
            NormKind::Euclidean | NormKind::Ellipse { .. } => Vec::new(),
            NormKind::PNorm { q } => {
                if *q == 2.0 {
                    Vec::new()
                } else if q.is_infinite() {
                    (0..4)
                        .map(|k| FRAC_PI_2 * k as f64 + std::f64::consts::FRAC_PI_4)
                        .collect()
                } else {
                    (0..4).map(|k| FRAC_PI_2 * k as f64).collect()
                }
            }
            NormKind::Polygon(poly) => poly.vertex_angles(),
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidNorm(format!("dimension must be >= 2, got {dim}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn pnorm(x: &[f64], q: f64) -> f64 {
    let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m == 0.0 || q.is_infinite() {
        return m;
    }
    if q == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    if q == 2.0 {
        return euclidean(x);
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powf(q)).sum();
    m * s.powf(1.0 / q)
}
