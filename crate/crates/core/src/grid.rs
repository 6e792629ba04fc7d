//! Uniform cell-centered grids and the initial-set shapes placed on them.

use crate::error::{Error, Result};
use crate::norms;

/// Uniform N-D grid of cell values. Values are row-major with the last axis
/// fastest; cell `idx` has center `origin + idx * dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    dx: f64,
    origin: Vec<f64>,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, dx: f64, origin: Vec<f64>, fill: f64) -> Result<Self> {
        if dims.len() != origin.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: origin.len(),
            });
        }
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::OutOfRange(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::OutOfRange(format!("grid spacing must be positive, got {dx}")));
        }
        let len = dims.iter().product();
        Ok(Self {
            dims,
            dx,
            origin,
            time: 0.0,
            values: vec![fill; len],
        })
    }

    /// `cells` cells per axis covering `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64, cells: usize, fill: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::OutOfRange(format!("empty extent [{lo}, {hi}]")));
        }
        let dx = (hi - lo) / cells as f64;
        Self::new(vec![cells; n], dx, vec![lo + 0.5 * dx; n], fill)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            dims: self.dims.clone(),
            dx: self.dx,
            origin: self.origin.clone(),
            time: self.time,
            values,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dims.len() as i32)
    }

    pub fn index_of(&self, flat: usize, out: &mut [usize]) {
        let mut f = flat;
        for d in (0..self.dims.len()).rev() {
            out[d] = f % self.dims[d];
            f /= self.dims[d];
        }
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center(&self, flat: usize, out: &mut [f64]) {
        let mut f = flat;
        for d in (0..self.dims.len()).rev() {
            let i = f % self.dims[d];
            f /= self.dims[d];
            out[d] = self.origin[d] + i as f64 * self.dx;
        }
    }

    /// Value at 2-D cell `(i, j)`.
    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dims[1] + j]
    }

    pub fn is_phase(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Volume of the `> 0` region counted by cells.
    pub fn positive_volume(&self) -> f64 {
        self.positive_count() as f64 * self.cell_volume()
    }

    /// Whether some positive cell lies within `margin` cells of the boundary.
    pub fn touches_margin(&self, margin: usize) -> bool {
        if margin == 0 {
            return false;
        }
        let n = self.dims.len();
        let mut idx = vec![0; n];
        (0..self.values.len()).any(|f| {
            if self.values[f] <= 0.0 {
                return false;
            }
            self.index_of(f, &mut idx);
            idx.iter()
                .zip(&self.dims)
                .any(|(&i, &d)| i < margin || i + margin >= d)
        })
    }

    /// Cell-wise translation by whole cells; vacated cells take `fill`.
    pub fn shifted(&self, shift: &[isize], fill: f64) -> Self {
        let n = self.dims.len();
        let mut out = self.with_values(vec![fill; self.values.len()]);
        let mut idx = vec![0; n];
        let mut target = vec![0; n];
        for f in 0..self.values.len() {
            self.index_of(f, &mut idx);
            let mut inside = true;
            for d in 0..n {
                let t = idx[d] as isize + shift[d];
                if t < 0 || t >= self.dims[d] as isize {
                    inside = false;
                    break;
                }
                target[d] = t as usize;
            }
            if inside {
                let g = out.flat(&target);
                out.values[g] = self.values[f];
            }
        }
        out
    }
}

/// Open sets used as initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Convex polygon (2-D); any vertex order.
    Polygon { vertices: Vec<[f64; 2]> },
    Union(Vec<SetSpec>),
}

impl SetSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        SetSpec::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    /// Regular polygon with `k` vertices on the circle of radius `r`.
    pub fn regular_polygon(center: [f64; 2], r: f64, k: usize, phase: f64) -> Self {
        SetSpec::Polygon {
            vertices: (0..k)
                .map(|i| {
                    let t = phase + std::f64::consts::TAU * i as f64 / k as f64;
                    [center[0] + r * t.cos(), center[1] + r * t.sin()]
                })
                .collect(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            SetSpec::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: center.len(),
                    });
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
                }
            }
            SetSpec::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: lo.len().min(hi.len()),
                    });
                }
                if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(Error::InvalidSet("box needs lo < hi on every axis".into()));
                }
            }
            SetSpec::Polygon { vertices } => {
                if dim != 2 {
                    return Err(Error::InvalidSet("polygons are 2-D only".into()));
                }
                let hull = norms::convex_hull(vertices);
                if hull.len() < 3 || hull.len() != vertices.len() {
                    return Err(Error::InvalidSet(
                        "polygon must list the vertices of a non-degenerate convex polygon".into(),
                    ));
                }
            }
            SetSpec::Union(parts) => {
                if parts.is_empty() {
                    return Err(Error::Empty("union of no sets".into()));
                }
                for p in parts {
                    p.validate(dim)?;
                }
            }
        }
        Ok(())
    }

    /// Euclidean signed distance to the boundary, positive inside. For unions
    /// this is the maximum over the parts, exact outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            SetSpec::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                radius - d.sqrt()
            }
            SetSpec::Box { lo, hi } => {
                // standard box distance
                let mut outside = 0.0;
                let mut inside = f64::INFINITY;
                for d in 0..x.len() {
                    let below = lo[d] - x[d];
                    let above = x[d] - hi[d];
                    let e = below.max(above);
                    if e > 0.0 {
                        outside += e * e;
                    }
                    inside = inside.min(-e);
                }
                if outside > 0.0 {
                    -outside.sqrt()
                } else {
                    inside
                }
            }
            SetSpec::Polygon { vertices } => {
                let hull = norms::convex_hull(vertices);
                polygon_signed_distance(&hull, [x[0], x[1]])
            }
            SetSpec::Union(parts) => parts
                .iter()
                .map(|p| p.signed_distance(x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }
}

/// Signed distance to a counter-clockwise convex polygon, positive inside.
pub(crate) fn polygon_signed_distance(hull: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let m = hull.len();
    let mut inside = true;
    let mut best = f64::INFINITY;
    for i in 0..m {
        let a = hull[i];
        let b = hull[(i + 1) % m];
        let e = [b[0] - a[0], b[1] - a[1]];
        let w = [x[0] - a[0], x[1] - a[1]];
        if e[0] * w[1] - e[1] * w[0] <= 0.0 {
            inside = false;
        }
        let t = ((w[0] * e[0] + w[1] * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
        let d = (w[0] - t * e[0]).hypot(w[1] - t * e[1]);
        best = best.min(d);
    }
    if inside {
        best
    } else {
        -best
    }
}

/// Phase grid with `+1` on the cells whose centers lie in `set`.
pub fn init_phase(template: &Grid, set: &SetSpec, margin: usize) -> Result<Grid> {
    set.validate(template.dim())?;
    let n = template.dim();
    let mut x = vec![0.0; n];
    let values: Vec<f64> = (0..template.len())
        .map(|f| {
            template.center(f, &mut x);
            if set.contains(&x) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let mut g = template.with_values(values);
    g.time = 0.0;
    if g.positive_count() == 0 {
        return Err(Error::Empty("initial set covers no cell center".into()));
    }
    if g.touches_margin(margin) {
        return Err(Error::FrontTouchesMargin { margin, time: 0.0 });
    }
    Ok(g)
}
