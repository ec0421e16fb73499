//! Per-sample kernels. Inner loops run over whole output planes so the
//! dot and axpy primitives see long contiguous rows.

use super::Real;

#[inline(always)]
pub(crate) fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    F::dot(a, b)
}

/// `y += a·x`
#[inline(always)]
pub(crate) fn axpy<F: Real>(y: &mut [F], a: F, x: &[F]) {
    F::axpy(y, a, x)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub k: usize,
    pub s: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// Rows of the unfolded input: one per (channel, ky, kx) tap.
    pub fn taps(&self) -> usize {
        self.c * self.k * self.k
    }

    /// Output positions per filter.
    pub fn plane(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfold `x` so that `cols[tap][oy·ow + ox]` is the input under that tap.
fn im2col<F: Real>(g: &ConvGeom, x: &[F], cols: &mut [F]) {
    let plane = g.plane();
    for ci in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[r * plane..(r + 1) * plane];
                for oy in 0..g.oh {
                    let src = ci * g.h * g.w + (oy * g.s + ky) * g.w + kx;
                    let d = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if g.s == 1 {
                        d.copy_from_slice(&x[src..src + g.ow]);
                    } else {
                        for (ox, v) in d.iter_mut().enumerate() {
                            *v = x[src + ox * g.s];
                        }
                    }
                }
            }
        }
    }
}

/// Inverse scatter of [`im2col`]: accumulate `dcols` into `dx`.
fn col2im<F: Real>(g: &ConvGeom, dcols: &[F], dx: &mut [F]) {
    let plane = g.plane();
    dx.fill(F::zero());
    for ci in 0..g.c {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (ci * g.k + ky) * g.k + kx;
                let src = &dcols[r * plane..(r + 1) * plane];
                for oy in 0..g.oh {
                    let start = ci * g.h * g.w + (oy * g.s + ky) * g.w + kx;
                    let s = &src[oy * g.ow..(oy + 1) * g.ow];
                    if g.s == 1 {
                        for (d, &v) in dx[start..start + g.ow].iter_mut().zip(s) {
                            *d += v;
                        }
                    } else {
                        for (ox, &v) in s.iter().enumerate() {
                            dx[start + ox * g.s] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Valid cross-correlation plus bias. `cols` receives the unfolded input
/// (`taps × plane`) for reuse by the backward pass.
pub(crate) fn conv_forward<F: Real>(g: &ConvGeom, x: &[F], wts: &[F], bias: &[F], cols: &mut [F], out: &mut [F]) {
    im2col(g, x, cols);
    let (plane, taps) = (g.plane(), g.taps());
    for fi in 0..g.f {
        let o = &mut out[fi * plane..(fi + 1) * plane];
        o.fill(bias[fi]);
        for r in 0..taps {
            axpy(o, wts[fi * taps + r], &cols[r * plane..(r + 1) * plane]);
        }
    }
}

/// Accumulate weight and bias gradients from the unfolded input. When `dx`
/// is given, the input gradient is written there using `dcols` as scratch.
pub(crate) fn conv_backward<F: Real>(
    g: &ConvGeom,
    cols: &[F],
    wts: &[F],
    dout: &[F],
    dw: &mut [F],
    db: &mut [F],
    dx: Option<(&mut [F], &mut Vec<F>)>,
) {
    let (plane, taps) = (g.plane(), g.taps());
    for fi in 0..g.f {
        let d = &dout[fi * plane..(fi + 1) * plane];
        db[fi] += d.iter().fold(F::zero(), |a, &v| a + v);
        for r in 0..taps {
            dw[fi * taps + r] += dot(d, &cols[r * plane..(r + 1) * plane]);
        }
    }
    if let Some((dx, dcols)) = dx {
        dcols.resize(taps * plane, F::zero());
        for r in 0..taps {
            let dc = &mut dcols[r * plane..(r + 1) * plane];
            let w0 = wts[r];
            for (d, &v) in dc.iter_mut().zip(&dout[..plane]) {
                *d = w0 * v;
            }
            for fi in 1..g.f {
                axpy(dc, wts[fi * taps + r], &dout[fi * plane..(fi + 1) * plane]);
            }
        }
        col2im(g, dcols, dx);
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PoolGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub size: usize,
    pub s: usize,
    pub oh: usize,
    pub ow: usize,
}

/// Max pooling; `argmax` receives the flat input index of each winner
/// (first maximum in row-major window order).
pub(crate) fn pool_forward<F: Real>(g: &PoolGeom, x: &[F], out: &mut [F], argmax: &mut [u32]) {
    for ci in 0..g.c {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut best = ci * g.h * g.w + oy * g.s * g.w + ox * g.s;
                for dy in 0..g.size {
                    let base = ci * g.h * g.w + (oy * g.s + dy) * g.w + ox * g.s;
                    for (dxi, &v) in x[base..base + g.size].iter().enumerate() {
                        if v > x[best] {
                            best = base + dxi;
                        }
                    }
                }
                let o = (ci * g.oh + oy) * g.ow + ox;
                out[o] = x[best];
                argmax[o] = best as u32;
            }
        }
    }
}

/// Route each output gradient to its recorded winner.
pub(crate) fn pool_backward<F: Real>(dout: &[F], argmax: &[u32], dx: &mut [F]) {
    dx.fill(F::zero());
    for (&d, &a) in dout.iter().zip(argmax) {
        dx[a as usize] += d;
    }
}

pub(crate) fn relu_forward<F: Real>(x: &[F], out: &mut [F]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = if v > F::zero() { v } else { F::zero() };
    }
}

/// Gradient through ReLU given its output `y`.
pub(crate) fn relu_backward<F: Real>(y: &[F], dout: &[F], dx: &mut [F]) {
    for ((d, &yv), &g) in dx.iter_mut().zip(y).zip(dout) {
        *d = if yv > F::zero() { g } else { F::zero() };
    }
}

/// `out = W·x + b` for a row-major `out_len × x.len()` matrix.
pub(crate) fn fc_forward<F: Real>(x: &[F], wts: &[F], bias: &[F], out: &mut [F]) {
    let n = x.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = bias[j] + dot(&wts[j * n..(j + 1) * n], x);
    }
}

pub(crate) fn fc_backward<F: Real>(x: &[F], wts: &[F], dout: &[F], dw: &mut [F], db: &mut [F], dx: Option<&mut [F]>) {
    let n = x.len();
    for (j, &d) in dout.iter().enumerate() {
        db[j] += d;
        axpy(&mut dw[j * n..(j + 1) * n], d, x);
    }
    if let Some(dx) = dx {
        dx.fill(F::zero());
        for (j, &d) in dout.iter().enumerate() {
            axpy(dx, d, &wts[j * n..(j + 1) * n]);
        }
    }
}

/// Numerically stable softmax; returns the log-sum-exp of the shifted logits.
pub(crate) fn softmax<F: Real>(logits: &[F], out: &mut [F]) -> (F, F) {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    (max, sum.ln())
}
