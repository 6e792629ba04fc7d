//! Front extraction, distances between fronts and anisotropic morphology.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::anisotropy::{AnisotropyTable, SectorPolygon};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::norms;

/// Closed loops of a zero-level contour; the positive side is on the left,
/// so outer boundaries run counter-clockwise and holes clockwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontPolyline {
    loops: Vec<Vec<[f64; 2]>>,
}

impl FrontPolyline {
    pub fn from_loops(loops: Vec<Vec<[f64; 2]>>) -> Self {
        Self {
            loops: loops.into_iter().filter(|l| !l.is_empty()).collect(),
        }
    }

    pub fn loops(&self) -> &[Vec<[f64; 2]>] {
        &self.loops
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.loops.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.loops.iter().flatten()
    }

    pub fn loop_area(l: &[[f64; 2]]) -> f64 {
        let m = l.len();
        0.5 * (0..m)
            .map(|i| {
                let a = l[i];
                let b = l[(i + 1) % m];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    pub fn loop_perimeter(l: &[[f64; 2]]) -> f64 {
        let m = l.len();
        (0..m)
            .map(|i| {
                let a = l[i];
                let b = l[(i + 1) % m];
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Signed area enclosed (positive for counter-clockwise outer loops).
    pub fn area(&self) -> f64 {
        self.loops.iter().map(|l| Self::loop_area(l)).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.loops.iter().map(|l| Self::loop_perimeter(l)).sum()
    }

    pub fn scaled(&self, s: f64, center: [f64; 2]) -> Self {
        Self {
            loops: self
                .loops
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|v| [center[0] + s * (v[0] - center[0]), center[1] + s * (v[1] - center[1])])
                        .collect()
                })
                .collect(),
        }
    }

    /// Writes `loop,x,y` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut body = String::from("loop,x,y\n");
        for (k, l) in self.loops.iter().enumerate() {
            for v in l {
                body.push_str(&format!("{k},{:.12e},{:.12e}\n", v[0], v[1]));
            }
        }
        w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Marching squares on the level `0` of a 2-D field; cells outside the grid
/// take the value `outside`. Positive values are inside. Saddle cells keep the
/// two positive corners apart.
pub fn contour(grid: &Grid, outside: f64) -> Result<FrontPolyline> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported(format!("contours of {}-D grids", grid.dim())));
    }
    let (nx, ny) = (grid.dims()[0] as isize, grid.dims()[1] as isize);
    let dx = grid.dx();
    let (ox, oy) = (grid.origin()[0], grid.origin()[1]);
    let value = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nx || j >= ny {
            outside
        } else {
            grid.at2(i as usize, j as usize)
        }
    };
    // edge key: (i, j, 0) joins (i,j)-(i+1,j); (i, j, 1) joins (i,j)-(i,j+1)
    type Key = (isize, isize, u8);
    let point = |k: Key| -> [f64; 2] {
        let (i, j, d) = k;
        let (i1, j1) = if d == 0 { (i + 1, j) } else { (i, j + 1) };
        let f0 = value(i, j);
        let f1 = value(i1, j1);
        let t = f0 / (f0 - f1);
        let x = i as f64 + t * (i1 - i) as f64;
        let y = j as f64 + t * (j1 - j) as f64;
        [ox + x * dx, oy + y * dx]
    };
    let mut next: HashMap<Key, Key> = HashMap::new();
    for i in -1..nx {
        for j in -1..ny {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let inside: [bool; 4] = corners.map(|(a, b)| value(a, b) > 0.0);
            if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                continue;
            }
            let edges: [Key; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            for k in 0..4 {
                if inside[k] && !inside[(k + 1) % 4] {
                    // walk back to the crossing where the boundary re-enters
                    let mut m = (k + 3) % 4;
                    while !(!inside[m] && inside[(m + 1) % 4]) {
                        m = (m + 3) % 4;
                    }
                    next.insert(edges[k], edges[m]);
                }
            }
        }
    }
    let mut keys: Vec<Key> = next.keys().copied().collect();
    keys.sort_unstable();
    let mut used: HashMap<Key, bool> = HashMap::with_capacity(keys.len());
    let mut loops = Vec::new();
    for start in keys {
        if used.contains_key(&start) {
            continue;
        }
        let mut l = Vec::new();
        let mut k = start;
        loop {
            used.insert(k, true);
            l.push(point(k));
            k = match next.get(&k) {
                Some(&n) => n,
                None => return Err(Error::InvalidSet("open contour".into())),
            };
            if k == start {
                break;
            }
        }
        loops.push(l);
    }
    Ok(FrontPolyline::from_loops(loops))
}

/// Sign boundary of a phase grid (outside the grid counts as `-1`).
pub fn extract_front(grid: &Grid) -> Result<FrontPolyline> {
    contour(grid, -1.0)
}

/// Metric for front distances.
#[derive(Debug, Clone, Copy)]
pub enum Metric<'a> {
    Euclidean,
    /// `Phi°` of the table, the gauge of its Wulff polygon.
    PhiDual(&'a AnisotropyTable),
}

struct MetricEval<'a> {
    poly: Option<&'a SectorPolygon>,
    table: Option<&'a AnisotropyTable>,
    r_min: f64,
    r_max: f64,
}

impl<'a> MetricEval<'a> {
    fn new(metric: Metric<'a>) -> Self {
        match metric {
            Metric::Euclidean => Self {
                poly: None,
                table: None,
                r_min: 1.0,
                r_max: 1.0,
            },
            Metric::PhiDual(t) => match t.wulff_polygon() {
                Some(p) => {
                    let (lo, hi) = p.radii();
                    Self {
                        poly: Some(p),
                        table: Some(t),
                        r_min: lo,
                        r_max: hi,
                    }
                }
                None => Self {
                    poly: None,
                    table: Some(t),
                    r_min: 0.0,
                    r_max: 0.0,
                },
            },
        }
    }

    fn eval(&self, v: [f64; 2]) -> f64 {
        match (self.poly, self.table) {
            (Some(p), _) => p.gauge(v),
            (None, Some(t)) => crate::anisotropy::phi_dual(&v, t),
            _ => v[0].hypot(v[1]),
        }
    }

    fn is_euclidean(&self) -> bool {
        self.table.is_none()
    }

    /// Distance from `x` to the segment `[a, b]`.
    fn to_segment(&self, x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        let e = [b[0] - a[0], b[1] - a[1]];
        let w = [x[0] - a[0], x[1] - a[1]];
        if self.is_euclidean() {
            let l2 = e[0] * e[0] + e[1] * e[1];
            let t = if l2 > 0.0 {
                ((w[0] * e[0] + w[1] * e[1]) / l2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            return (w[0] - t * e[0]).hypot(w[1] - t * e[1]);
        }
        // convex in t: golden-section search
        let f = |t: f64| self.eval([w[0] - t * e[0], w[1] - t * e[1]]);
        let g = 0.5 * (5.0_f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut c = hi - g * (hi - lo);
        let mut d = lo + g * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = f(d);
            }
        }
        f(0.0).min(f(1.0)).min(fc).min(fd)
    }
}

fn segments(p: &FrontPolyline) -> Vec<([f64; 2], [f64; 2])> {
    let mut out = Vec::with_capacity(p.vertex_count());
    for l in p.loops() {
        let m = l.len();
        for i in 0..m {
            out.push((l[i], l[(i + 1) % m]));
        }
    }
    out
}

fn euclid_to_segment(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    MetricEval::new(Metric::Euclidean).to_segment(x, a, b)
}

/// Distance from `x` to the nearest segment.
fn to_front(m: &MetricEval, x: [f64; 2], segs: &[([f64; 2], [f64; 2])]) -> f64 {
    let eu: Vec<f64> = segs.iter().map(|(s, t)| euclid_to_segment(x, *s, *t)).collect();
    let nearest = eu.iter().copied().fold(f64::INFINITY, f64::min);
    if m.is_euclidean() {
        return nearest;
    }
    if m.r_max > 0.0 {
        // |v|/r_max <= Phi°(v) <= |v|/r_min prunes most segments
        let mut best = nearest / m.r_min;
        for (k, (s, t)) in segs.iter().enumerate() {
            if eu[k] / m.r_max <= best {
                best = best.min(m.to_segment(x, *s, *t));
            }
        }
        best
    } else {
        segs.iter()
            .map(|(s, t)| m.to_segment(x, *s, *t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `max_{x in a} min_{segment s of b} d(x, s)`.
pub fn directed_distance(a: &FrontPolyline, b: &FrontPolyline, metric: Metric) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("distance between empty fronts".into()));
    }
    let m = MetricEval::new(metric);
    let segs = segments(b);
    let verts: Vec<[f64; 2]> = a.vertices().copied().collect();
    Ok(verts
        .par_iter()
        .map(|x| to_front(&m, *x, &segs))
        .reduce(|| 0.0, f64::max))
}

/// Symmetric Hausdorff distance between the vertex sets, measured to segments.
pub fn hausdorff(a: &FrontPolyline, b: &FrontPolyline, metric: Metric) -> Result<f64> {
    let ab = directed_distance(a, b, metric)?;
    let ba = directed_distance(b, a, metric)?;
    Ok(ab.max(ba))
}

/// Smallest distance between the two fronts (vertex to segment, both ways).
pub fn gap(a: &FrontPolyline, b: &FrontPolyline, metric: Metric) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("gap between empty fronts".into()));
    }
    let m = MetricEval::new(metric);
    let one_way = |p: &FrontPolyline, q: &FrontPolyline| -> f64 {
        let segs = segments(q);
        let verts: Vec<[f64; 2]> = p.vertices().copied().collect();
        verts
            .par_iter()
            .map(|x| to_front(&m, *x, &segs))
            .reduce(|| f64::INFINITY, f64::min)
    };
    Ok(one_way(a, b).min(one_way(b, a)))
}

fn hull_area(points: &[[f64; 2]]) -> f64 {
    let hull = norms::convex_hull(points);
    if hull.len() < 3 {
        return 0.0;
    }
    FrontPolyline::loop_area(&hull)
}

/// `1 - area / area(convex hull)` of a single-loop front.
pub fn convexity_defect(a: &FrontPolyline) -> Result<f64> {
    match a.loops().len() {
        0 => Err(Error::Empty("convexity defect of an empty front".into())),
        1 => {
            let l = &a.loops()[0];
            let h = hull_area(l);
            if h <= 0.0 {
                return Ok(0.0);
            }
            Ok((1.0 - FrontPolyline::loop_area(l) / h).clamp(0.0, 1.0))
        }
        n => Err(Error::Unsupported(format!(
            "convexity defect of a {n}-loop front; use convexity_defect_union"
        ))),
    }
}

/// Defect of the whole front against the hull of all its vertices; this
/// also penalizes disconnected pieces.
pub fn convexity_defect_union(a: &FrontPolyline) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Empty("convexity defect of an empty front".into()));
    }
    let pts: Vec<[f64; 2]> = a.vertices().copied().collect();
    let h = hull_area(&pts);
    if h <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - a.area() / h).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

pub fn radius_stats(a: &FrontPolyline, center: [f64; 2]) -> Result<RadiusStats> {
    if a.is_empty() {
        return Err(Error::Empty("radius statistics of an empty front".into()));
    }
    let r: Vec<f64> = a
        .vertices()
        .map(|v| (v[0] - center[0]).hypot(v[1] - center[1]))
        .collect();
    Ok(RadiusStats {
        min: r.iter().copied().fold(f64::INFINITY, f64::min),
        mean: r.iter().sum::<f64>() / r.len() as f64,
        max: r.iter().copied().fold(0.0, f64::max),
    })
}

/// Area centroid of the front.
pub fn centroid(a: &FrontPolyline) -> Option<[f64; 2]> {
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut area = 0.0;
    for l in a.loops() {
        let m = l.len();
        for i in 0..m {
            let p = l[i];
            let q = l[(i + 1) % m];
            let c = p[0] * q[1] - q[0] * p[1];
            area += c;
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
    }
    if area.abs() < 1e-300 {
        return None;
    }
    Some([cx / (3.0 * area), cy / (3.0 * area)])
}

/// Lattice offsets `o` with `Phi°(o dx) <= rho`.
fn wulff_stencil(table: &AnisotropyTable, rho: f64, dx: f64) -> Vec<(isize, isize)> {
    let (_, r_max) = table
        .wulff_polygon()
        .map(|p| p.radii())
        .unwrap_or((1.0, 1.0));
    let k = (rho * r_max / dx).ceil() as isize + 1;
    let mut out = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let v = [i as f64 * dx, j as f64 * dx];
            if crate::anisotropy::phi_dual(&v, table) <= rho {
                out.push((i, j));
            }
        }
    }
    out
}

/// Minkowski dilation (`radius > 0`) or erosion (`radius < 0`) of the positive
/// cells by `|radius| W`, measured between cell centers. Outside the grid
/// counts as negative.
pub fn wulff_morph_grid(grid: &Grid, radius: f64, table: &AnisotropyTable) -> Result<Grid> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported("grid morphology is 2-D only".into()));
    }
    if radius.abs() < grid.dx() {
        return Err(Error::OutOfRange(format!(
            "morphology radius {radius} below grid spacing {}",
            grid.dx()
        )));
    }
    let dilate = radius > 0.0;
    let stencil = wulff_stencil(table, radius.abs(), grid.dx());
    let (nx, ny) = (grid.dims()[0] as isize, grid.dims()[1] as isize);
    // source set: positive cells for dilation, negative cells (padded by the
    // exterior) for erosion
    let in_source = |i: isize, j: isize| -> bool {
        let v = if i < 0 || j < 0 || i >= nx || j >= ny {
            -1.0
        } else {
            grid.at2(i as usize, j as usize)
        };
        (v > 0.0) == dilate
    };
    let is_boundary = |i: isize, j: isize| -> bool {
        in_source(i, j)
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(a, b)| !in_source(i + a, j + b))
    };
    let rows: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            (0..ny)
                .map(|j| {
                    if in_source(i, j) {
                        return if dilate { 1.0 } else { -1.0 };
                    }
                    // a cell is reached iff some source cell lies in the stencil
                    // around it; the nearest such cell is a boundary cell
                    let hit = stencil.iter().any(|&(a, b)| is_boundary(i + a, j + b));
                    if hit == dilate {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect();
    let mut out = grid.with_values(rows.into_iter().flatten().collect());
    out.time = grid.time;
    Ok(out)
}

/// Hopf-Lax morphology of a level-set field: `sup` (dilation) or `inf`
/// (erosion) of the bilinear interpolant over `x + |radius| W`. Every
/// superlevel set is dilated or eroded by `|radius| W`.
pub fn wulff_morph_field(
    field: &Grid,
    radius: f64,
    table: &AnisotropyTable,
    outside: f64,
) -> Result<Grid> {
    if field.dim() != 2 {
        return Err(Error::Unsupported("field morphology is 2-D only".into()));
    }
    if radius == 0.0 {
        return Ok(field.clone());
    }
    let poly = table
        .wulff_polygon()
        .ok_or_else(|| Error::Unsupported("field morphology needs a 2-D table".into()))?;
    let rho = radius.abs();
    let dx = field.dx();
    let (_, r_max) = poly.radii();
    // boundary points at fine angular spacing plus interior rings
    let n_ang = ((std::f64::consts::TAU * rho * r_max / (0.25 * dx)).ceil() as usize).clamp(64, 4096);
    let rings = ((rho * r_max / dx).ceil() as usize).max(1);
    let mut offsets = vec![[0.0, 0.0]];
    for r in 1..=rings {
        let s = rho * r as f64 / rings as f64;
        let n = if r == rings {
            n_ang
        } else {
            ((n_ang * r) / rings).max(8)
        };
        for k in 0..n {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            let u = [t.cos(), t.sin()];
            let g = poly.gauge(u);
            offsets.push([s * u[0] / g, s * u[1] / g]);
        }
    }
    let (nx, ny) = (field.dims()[0], field.dims()[1]);
    let (ox, oy) = (field.origin()[0], field.origin()[1]);
    let sample = |x: f64, y: f64| -> f64 {
        let fx = (x - ox) / dx;
        let fy = (y - oy) / dx;
        let i0 = fx.floor();
        let j0 = fy.floor();
        let (a, b) = (fx - i0, fy - j0);
        let val = |i: f64, j: f64| -> f64 {
            if i < 0.0 || j < 0.0 || i >= nx as f64 || j >= ny as f64 {
                outside
            } else {
                field.at2(i as usize, j as usize)
            }
        };
        (1.0 - a) * (1.0 - b) * val(i0, j0)
            + a * (1.0 - b) * val(i0 + 1.0, j0)
            + (1.0 - a) * b * val(i0, j0 + 1.0)
            + a * b * val(i0 + 1.0, j0 + 1.0)
    };
    let dilate = radius > 0.0;
    let values: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|f| {
            let x = ox + (f / ny) as f64 * dx;
            let y = oy + (f % ny) as f64 * dx;
            let it = offsets.iter().map(|o| sample(x + o[0], y + o[1]));
            if dilate {
                it.fold(f64::NEG_INFINITY, f64::max)
            } else {
                it.fold(f64::INFINITY, f64::min)
            }
        })
        .collect();
    let mut out = field.with_values(values);
    out.time = field.time;
    Ok(out)
}

/// Morphology of a single convex counter-clockwise loop: Minkowski sum with
/// `radius W` for dilation, support-line clipping for erosion.
pub fn wulff_morph_polyline(
    front: &FrontPolyline,
    radius: f64,
    table: &AnisotropyTable,
) -> Result<FrontPolyline> {
    let poly = table
        .wulff_polygon()
        .ok_or_else(|| Error::Unsupported("polyline morphology needs a 2-D table".into()))?;
    if front.loops().len() != 1 {
        return Err(Error::Unsupported("polyline morphology of multi-loop fronts".into()));
    }
    let l = norms::convex_hull(&front.loops()[0]);
    if l.len() < 3 || convexity_defect(&front.clone())? > 1e-9 {
        return Err(Error::InvalidSet("polyline morphology needs a convex loop".into()));
    }
    if radius >= 0.0 {
        let mut pts = Vec::with_capacity(l.len() * poly.vertices().len());
        for a in &l {
            for w in poly.vertices() {
                pts.push([a[0] + radius * w[0], a[1] + radius * w[1]]);
            }
        }
        return Ok(FrontPolyline::from_loops(vec![norms::convex_hull(&pts)]));
    }
    let rho = -radius;
    let mut cur = l.clone();
    let m = l.len();
    for i in 0..m {
        let a = l[i];
        let b = l[(i + 1) % m];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = [(b[1] - a[1]) / len, (a[0] - b[0]) / len];
        let support = poly
            .vertices()
            .iter()
            .map(|w| w[0] * n[0] + w[1] * n[1])
            .fold(f64::NEG_INFINITY, f64::max);
        let c = n[0] * a[0] + n[1] * a[1] - rho * support;
        cur = clip_half_plane(&cur, n, c);
        if cur.is_empty() {
            return Ok(FrontPolyline::default());
        }
    }
    Ok(FrontPolyline::from_loops(vec![cur]))
}

/// Sutherland-Hodgman clip of a convex polygon to `<x, n> <= c`.
fn clip_half_plane(p: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let m = p.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let a = p[i];
        let b = p[(i + 1) % m];
        let fa = n[0] * a[0] + n[1] * a[1] - c;
        let fb = n[0] * b[0] + n[1] * b[1] - c;
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{init_phase, SetSpec};
    use crate::norms::NormDescriptor;
    use std::f64::consts::{PI, TAU};

    fn circle(r: f64, n: usize, c: [f64; 2]) -> FrontPolyline {
        FrontPolyline::from_loops(vec![(0..n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                [c[0] + r * t.cos(), c[1] + r * t.sin()]
            })
            .collect()])
    }

    fn disk_grid(r: f64, dx_cells: usize) -> Grid {
        let t = Grid::cube(2, -2.0, 2.0, dx_cells, -1.0).unwrap();
        init_phase(&t, &SetSpec::ball(&[0.0, 0.0], r), 2).unwrap()
    }

    #[test]
    fn disk_front() {
        let g = disk_grid(1.0, 400);
        let f = extract_front(&g).unwrap();
        assert_eq!(f.loops().len(), 1);
        assert!(f.area() > 0.0);
        assert!((f.area() - PI).abs() < 0.01 * PI);
        let s = radius_stats(&f, [0.0, 0.0]).unwrap();
        assert!((s.min - 1.0).abs() <= 0.01 && (s.max - 1.0).abs() <= 0.01);
        // the staircase contour of a rasterized disk carries an O(dx) defect
        assert!(convexity_defect(&f).unwrap() <= g.dx());
        let sampled = circle(1.0, (TAU / 0.01) as usize, [0.0, 0.0]);
        assert!(convexity_defect(&sampled).unwrap() <= 1e-3);
        let exact = circle(1.0, 4096, [0.0, 0.0]);
        assert!(hausdorff(&f, &exact, Metric::Euclidean).unwrap() <= g.dx());
    }

    #[test]
    fn staircase_perimeter_is_not_euclidean_but_area_is() {
        // marching squares on a binary field cuts corners at edge midpoints
        let g = disk_grid(1.0, 400);
        let f = extract_front(&g).unwrap();
        let ratio = f.perimeter() / TAU;
        assert!(ratio > 1.0 && ratio < 1.09, "{ratio}");
    }

    #[test]
    fn square_front_and_empty() {
        let t = Grid::cube(2, -2.0, 2.0, 400, -1.0).unwrap();
        let sq = SetSpec::Box {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        let g = init_phase(&t, &sq, 2).unwrap();
        let f = extract_front(&g).unwrap();
        assert!((f.area() - 4.0).abs() <= 2.0 * g.dx() * f.perimeter());
        let s = radius_stats(&f, [0.0, 0.0]).unwrap();
        assert!((s.min - 1.0).abs() < 0.01 && (s.max - 2.0_f64.sqrt()).abs() < 0.02);
        let empty = t.clone();
        assert!(extract_front(&empty).unwrap().is_empty());
        assert!(hausdorff(&FrontPolyline::default(), &f, Metric::Euclidean).is_err());
    }

    #[test]
    fn saddle_and_orientation() {
        let mut g = Grid::new(vec![2, 2], 1.0, vec![0.0, 0.0], -1.0).unwrap();
        g.values = vec![1.0, -1.0, -1.0, 1.0];
        let f = extract_front(&g).unwrap();
        assert_eq!(f.loops().len(), 2);
        assert!(f.loops().iter().all(|l| FrontPolyline::loop_area(l) > 0.0));
        // a hole is clockwise
        let mut h = Grid::new(vec![5, 5], 1.0, vec![0.0, 0.0], 1.0).unwrap();
        h.values[12] = -1.0;
        let f = extract_front(&h).unwrap();
        assert_eq!(f.loops().len(), 2);
        let areas: Vec<f64> = f.loops().iter().map(|l| FrontPolyline::loop_area(l)).collect();
        assert!(areas.iter().any(|&a| a < 0.0) && areas.iter().any(|&a| a > 0.0));
    }

    #[test]
    fn hausdorff_examples() {
        let a = circle(1.0, 720, [0.0, 0.0]);
        let b = circle(1.2, 720, [0.0, 0.0]);
        assert_eq!(hausdorff(&a, &a, Metric::Euclidean).unwrap(), 0.0);
        let d = hausdorff(&a, &b, Metric::Euclidean).unwrap();
        assert!((d - 0.2).abs() < 1e-4);
        assert_eq!(d, hausdorff(&b, &a, Metric::Euclidean).unwrap());
        let e = NormDescriptor::euclidean(2).unwrap();
        let t = AnisotropyTable::build(&e, 1.5, 256).unwrap();
        let phi0 = t.phi()[0];
        let dphi = hausdorff(&a, &b, Metric::PhiDual(&t)).unwrap();
        assert!((dphi - 0.2 / phi0).abs() / (0.2 / phi0) < 1e-3);
        let g = gap(&a, &b, Metric::Euclidean).unwrap();
        assert!((g - 0.2).abs() < 1e-3);
    }

    #[test]
    fn convexity_examples() {
        let l_shape = FrontPolyline::from_loops(vec![vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ]]);
        // area 3 against hull area 3.5
        assert!((convexity_defect(&l_shape).unwrap() - (1.0 - 3.0 / 3.5)).abs() < 1e-12);
        let sq = FrontPolyline::from_loops(vec![vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]]);
        assert!(convexity_defect(&sq).unwrap() < 1e-12);
        // L-shape of area 3 whose hull is the full 2x2 square
        let notch = FrontPolyline::from_loops(vec![vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 2.0],
            [1.0, 1.0],
            [0.0, 2.0],
        ]]);
        assert!((convexity_defect(&notch).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_morphology() {
        let e = NormDescriptor::euclidean(2).unwrap();
        let t = AnisotropyTable::build(&e, 1.5, 256).unwrap();
        let phi0 = t.phi()[0];
        let g = disk_grid(0.6, 200);
        let dx = g.dx();
        let rho = 0.3 / phi0;
        // unit Phi°-ball is the Euclidean disk of radius phi0
        let d = wulff_morph_grid(&g, rho, &t).unwrap();
        let f = extract_front(&d).unwrap();
        let s = radius_stats(&f, [0.0, 0.0]).unwrap();
        assert!((s.mean - 0.9).abs() < 2.0 * dx && (s.max - 0.9).abs() < 2.0 * dx);
        let opened = wulff_morph_grid(&wulff_morph_grid(&g, -rho, &t).unwrap(), rho, &t).unwrap();
        assert!(opened.values.iter().zip(&g.values).all(|(a, b)| a <= b));
        let twice = wulff_morph_grid(&wulff_morph_grid(&g, 0.5 * rho, &t).unwrap(), 0.5 * rho, &t).unwrap();
        let ft = extract_front(&twice).unwrap();
        assert!(hausdorff(&f, &ft, Metric::Euclidean).unwrap() <= 2.0 * dx);
        assert!(wulff_morph_grid(&g, 0.5 * dx, &t).is_err());
    }

    #[test]
    fn field_and_polyline_morphology_agree() {
        let q = NormDescriptor::pnorm(2, 4.0).unwrap();
        let t = AnisotropyTable::build(&q, 1.5, 256).unwrap();
        let tg = Grid::cube(2, -2.0, 2.0, 200, 0.0).unwrap();
        let set = SetSpec::regular_polygon([0.0, 0.0], 0.8, 6, 0.0);
        let mut x = [0.0; 2];
        let vals: Vec<f64> = (0..tg.len())
            .map(|f| {
                tg.center(f, &mut x);
                set.signed_distance(&x).clamp(-0.5, 0.5)
            })
            .collect();
        let field = tg.with_values(vals);
        let front = contour(&field, -0.5).unwrap();
        for rho in [0.8, -0.8] {
            let a = contour(&wulff_morph_field(&field, rho, &t, -0.5).unwrap(), -0.5).unwrap();
            let b = wulff_morph_polyline(&front, rho, &t).unwrap();
            assert!(hausdorff(&a, &b, Metric::Euclidean).unwrap() < 2.0 * tg.dx());
        }
    }
}
