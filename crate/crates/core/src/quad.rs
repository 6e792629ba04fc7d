//! Adaptive Gauss-Kronrod quadrature and the sphere integrals built on it.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

// Kronrod 15-point abscissae (non-negative half) with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

/// Tolerances for [`integrate`]: the estimate is accepted once the summed
/// error bound is below `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Tol {
    pub const fn rel(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }
}

impl Default for Tol {
    fn default() -> Self {
        Self {
            abs: 1e-300,
            rel: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]` by globally adaptive G7-K15 bisection.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Result<f64> {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Like [`integrate`] but starts from the given sorted breakpoints so that
/// known kinks fall on interval ends.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: Tol,
) -> Result<f64> {
    if breaks.len() < 2 {
        return Err(Error::Quadrature("need at least two breakpoints".into()));
    }
    let mut pieces: Vec<Piece> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (value, err) = gk15(&mut f, w[0], w[1]);
            Piece {
                a: w[0],
                b: w[1],
                value,
                err,
            }
        })
        .collect();
    if pieces.is_empty() {
        return Ok(0.0);
    }
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.err).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand value {total}")));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            // Roundoff floor: accept when the remaining error is at the level of
            // the accumulated floating-point noise.
            if err <= 1e3 * f64::EPSILON * pieces.iter().map(|p| p.value.abs()).sum::<f64>() {
                return Ok(total);
            }
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance after {MAX_INTERVALS} intervals"
            )));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty");
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature("interval collapsed below machine precision".into()));
        }
        for (a, b) in [(p.a, m), (m, p.b)] {
            let (value, err) = gk15(&mut f, a, b);
            pieces.push(Piece { a, b, value, err });
        }
    }
}

/// Closed form of `int_0^inf t^a / (1 + t^b) dt` for `-1 < a < b - 1`.
pub fn power_ratio_integral(a: f64, b: f64) -> f64 {
    debug_assert!(a > -1.0 && a < b - 1.0);
    (PI / b) / (PI * (a + 1.0) / b).sin()
}

/// The same integral by quadrature. Both halves `[0,1]` and `[1,inf)` are
/// mapped to `(1/(c+1)) int_0^1 dw / (1 + w^(b/(c+1)))`, which is bounded and
/// has no endpoint singularity.
pub fn power_ratio_integral_quad(a: f64, b: f64, tol: Tol) -> Result<f64> {
    if !(a > -1.0 && a < b - 1.0) {
        return Err(Error::OutOfRange(format!(
            "power ratio integral diverges for a = {a}, b = {b}"
        )));
    }
    let half = |c: f64| {
        let gamma = b / (c + 1.0);
        integrate(|w: f64| 1.0 / (1.0 + w.powf(gamma)), 0.0, 1.0, tol).map(|v| v / (c + 1.0))
    };
    Ok(half(a)? + half(b - a - 2.0)?)
}

/// Surface area of the unit sphere `S^(n-1)` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => TAU,
        _ => TAU / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}

/// Integrates `f` over the unit sphere of `span(basis)` (orthonormal vectors
/// in `R^N`) against its Hausdorff measure. One vector gives the two-point
/// counting measure, two a great circle, more use nested polar coordinates.
/// `circle_breaks` lists angles (measured from `basis[0]` towards `basis[1]`)
/// where the integrand may kink; they are only used on the innermost circle.
pub fn sphere_integral(
    basis: &[Vec<f64>],
    circle_breaks: &[f64],
    f: &dyn Fn(&[f64]) -> f64,
    tol: Tol,
) -> Result<f64> {
    let dim = basis.first().map_or(0, |b| b.len());
    match basis.len() {
        0 => Err(Error::Empty("sphere basis".into())),
        1 => {
            let plus: Vec<f64> = basis[0].clone();
            let minus: Vec<f64> = basis[0].iter().map(|v| -v).collect();
            Ok(f(&plus) + f(&minus))
        }
        2 => {
            let mut breaks: Vec<f64> = circle_breaks
                .iter()
                .map(|t| t.rem_euclid(TAU))
                .chain([0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0, TAU])
                .collect();
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
            let mut x = vec![0.0; dim];
            integrate_with_breaks(
                |t| {
                    let (s, c) = t.sin_cos();
                    for (k, xi) in x.iter_mut().enumerate() {
                        *xi = c * basis[0][k] + s * basis[1][k];
                    }
                    f(&x)
                },
                &breaks,
                tol,
            )
        }
        k => {
            let (inner, last) = basis.split_at(k - 1);
            let axis = &last[0];
            let power = (k - 2) as i32;
            let mut first_err = None;
            let value = integrate_with_breaks(
                |psi: f64| {
                    let (s, c) = psi.sin_cos();
                    let g = |y: &[f64]| {
                        let x: Vec<f64> = (0..dim).map(|i| c * axis[i] + s * y[i]).collect();
                        f(&x)
                    };
                    match sphere_integral(inner, circle_breaks, &g, Tol { abs: tol.abs, rel: tol.rel * 0.1 }) {
                        Ok(v) => s.powi(power) * v,
                        Err(e) => {
                            first_err.get_or_insert(e);
                            0.0
                        }
                    }
                },
                &[0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI],
                tol,
            )?;
            match first_err {
                Some(e) => Err(e),
                None => Ok(value),
            }
        }
    }
}

/// Standard basis of `R^n`.
pub fn standard_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Orthonormal basis of the hyperplane `p^perp` (Gram-Schmidt on the standard
/// basis with the direction of `p` removed). For `n = 2` the single vector is
/// `(-p2, p1)/|p|`.
pub fn orthogonal_complement(p: &[f64]) -> Vec<Vec<f64>> {
    let n = p.len();
    let len = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let phat: Vec<f64> = p.iter().map(|v| v / len).collect();
    if n == 2 {
        return vec![vec![-phat[1], phat[0]]];
    }
    let mut basis: Vec<Vec<f64>> = vec![phat];
    let mut order: Vec<usize> = (0..n).collect();
    // start with the axes least aligned with p for better conditioning
    order.sort_by(|&i, &j| basis[0][i].abs().total_cmp(&basis[0][j].abs()));
    for i in order {
        if basis.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l > 1e-8 {
            v.iter_mut().for_each(|x| *x /= l);
            basis.push(v);
        }
    }
    basis.remove(0);
    basis
}
