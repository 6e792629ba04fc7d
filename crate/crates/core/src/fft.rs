//! Zero-padded linear convolution of N-D grids against a fixed centered
//! kernel patch, via separable complex FFTs.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest `m >= n` whose only prime factors are 2, 3, 5 and 7.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Computes `out[i] = sum_j kernel[i - j] * input[j]` for `i` on the grid,
/// with the kernel indexed from its center and everything outside the grid
/// treated as zero.
pub struct Convolver {
    n: Vec<usize>,
    k: Vec<usize>,
    l: Vec<usize>,
    spectrum: Vec<Complex<f64>>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    buf: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("grid", &self.n)
            .field("half_widths", &self.k)
            .field("padded", &self.l)
            .finish()
    }
}

impl Convolver {
    /// `kernel` has shape `2 k_d + 1` per axis and must satisfy `k_d < n_d`.
    pub fn new(grid: &[usize], kernel: &[f64], half_widths: &[usize]) -> Result<Self> {
        let nd = grid.len();
        if half_widths.len() != nd {
            return Err(Error::DimensionMismatch {
                expected: nd,
                got: half_widths.len(),
            });
        }
        let kshape: Vec<usize> = half_widths.iter().map(|k| 2 * k + 1).collect();
        if kernel.len() != kshape.iter().product::<usize>() {
            return Err(Error::OutOfRange("kernel length does not match its shape".into()));
        }
        if half_widths.iter().zip(grid).any(|(k, n)| k >= n) {
            return Err(Error::OutOfRange(
                "kernel half-width must be below the grid size on every axis".into(),
            ));
        }
        // aliasing-free for outputs on the grid once L >= n + K
        let l: Vec<usize> = grid.iter().zip(half_widths).map(|(n, k)| fast_len(n + k)).collect();
        let mut planner = FftPlanner::new();
        let fwd: Vec<_> = l.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inv: Vec<_> = l.iter().map(|&m| planner.plan_fft_inverse(m)).collect();
        let total: usize = l.iter().product();
        let mut spectrum = vec![Complex::new(0.0, 0.0); total];
        let ls = strides(&l);
        let ks = strides(&kshape);
        for (flat, &v) in kernel.iter().enumerate() {
            let mut off = 0;
            for d in 0..nd {
                let i = (flat / ks[d]) % kshape[d];
                off += i * ls[d];
            }
            spectrum[off] = Complex::new(v, 0.0);
        }
        let mut conv = Self {
            n: grid.to_vec(),
            k: half_widths.to_vec(),
            l,
            spectrum: Vec::new(),
            fwd,
            inv,
            buf: Vec::new(),
        };
        let full: Vec<usize> = conv.l.clone();
        conv.transform(&mut spectrum, true, &full);
        let scale = 1.0 / total as f64;
        spectrum.iter_mut().for_each(|c| *c *= scale);
        conv.spectrum = spectrum;
        conv.buf = vec![Complex::new(0.0, 0.0); total];
        Ok(conv)
    }

    pub fn padded_shape(&self) -> &[usize] {
        &self.l
    }

    /// Applies the separable transform. Forward runs from the last axis to the
    /// first and skips lines that are still all zero (indices beyond `extent`
    /// on axes not yet transformed); inverse runs first to last and skips
    /// lines outside the output window.
    fn transform(&self, data: &mut [Complex<f64>], forward: bool, extent: &[usize]) {
        let nd = self.l.len();
        let axes: Vec<usize> = if forward {
            (0..nd).rev().collect()
        } else {
            (0..nd).collect()
        };
        for axis in axes {
            let len = self.l[axis];
            let inner: usize = self.l[axis + 1..].iter().product();
            let plan = if forward { &self.fwd[axis] } else { &self.inv[axis] };
            // outer blocks: axes before `axis`, restricted to the active window
            let outer_shape = &self.l[..axis];
            let ranges: Vec<(usize, usize)> = (0..axis)
                .map(|d| {
                    if forward {
                        (0, extent[d])
                    } else {
                        (self.k[d], self.k[d] + self.n[d])
                    }
                })
                .collect();
            let outer_strides = strides(outer_shape);
            let block = len * inner;
            let mut count = 1usize;
            for &(a, b) in &ranges {
                count *= b - a;
            }
            let offsets: Vec<usize> = (0..count)
                .map(|mut r| {
                    let mut off = 0;
                    for d in (0..axis).rev() {
                        let (a, b) = ranges[d];
                        let w = b - a;
                        off += (a + r % w) * outer_strides[d];
                        r /= w;
                    }
                    off * block
                })
                .collect();
            if inner == 1 {
                let mut lines: Vec<&mut [Complex<f64>]> = Vec::with_capacity(offsets.len());
                let mut rest: &mut [Complex<f64>] = data;
                let mut consumed = 0;
                for &o in &offsets {
                    let (_, tail) = rest.split_at_mut(o - consumed);
                    let (line, tail) = tail.split_at_mut(len);
                    lines.push(line);
                    rest = tail;
                    consumed = o + len;
                }
                lines.into_par_iter().for_each(|line| plan.process(line));
            } else {
                for &o in &offsets {
                    let blk = &mut data[o..o + block];
                    // transpose to inner x len, transform rows, transpose back
                    let mut t = vec![Complex::new(0.0, 0.0); block];
                    for i in 0..len {
                        for j in 0..inner {
                            t[j * len + i] = blk[i * inner + j];
                        }
                    }
                    t.par_chunks_mut(len).for_each(|line| plan.process(line));
                    for i in 0..len {
                        for j in 0..inner {
                            blk[i * inner + j] = t[j * len + i];
                        }
                    }
                }
            }
        }
    }

    /// Linear convolution of `input` (grid-shaped) with the kernel, written to `out`.
    pub fn convolve(&mut self, input: &[f64], out: &mut [f64]) {
        let nd = self.n.len();
        let ls = strides(&self.l);
        let ns = strides(&self.n);
        let mut buf = std::mem::take(&mut self.buf);
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        let mut any = false;
        for (flat, &v) in input.iter().enumerate() {
            if v != 0.0 {
                any = true;
                let mut off = 0;
                for d in 0..nd {
                    off += ((flat / ns[d]) % self.n[d]) * ls[d];
                }
                buf[off] = Complex::new(v, 0.0);
            }
        }
        if !any {
            out.iter_mut().for_each(|o| *o = 0.0);
            self.buf = buf;
            return;
        }
        let extent = self.n.clone();
        self.transform(&mut buf, true, &extent);
        buf.par_iter_mut()
            .zip(self.spectrum.par_iter())
            .for_each(|(b, s)| *b *= s);
        self.transform(&mut buf, false, &extent);
        for (flat, o) in out.iter_mut().enumerate() {
            let mut off = 0;
            for d in 0..nd {
                off += ((flat / ns[d]) % self.n[d] + self.k[d]) * ls[d];
            }
            *o = buf[off].re;
        }
        self.buf = buf;
    }
}

/// Direct evaluation of the same convolution; for tests and tiny grids.
pub fn convolve_direct(grid: &[usize], kernel: &[f64], half_widths: &[usize], input: &[f64]) -> Vec<f64> {
    let nd = grid.len();
    let ns = strides(grid);
    let kshape: Vec<usize> = half_widths.iter().map(|k| 2 * k + 1).collect();
    let ks = strides(&kshape);
    let mut out = vec![0.0; input.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &v) in input.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut koff = 0;
            let mut ok = true;
            for d in 0..nd {
                let a = ((i / ns[d]) % grid[d]) as isize;
                let b = ((j / ns[d]) % grid[d]) as isize;
                let r = a - b + half_widths[d] as isize;
                if r < 0 || r >= kshape[d] as isize {
                    ok = false;
                    break;
                }
                koff += r as usize * ks[d];
            }
            if ok {
                acc += kernel[koff] * v;
            }
        }
        *o = acc;
    }
    out
}
