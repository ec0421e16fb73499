//! Dot product and axpy for the network's float types.
//!
//! `dot` accumulates into 32 interleaved lanes and reduces them in a fixed
//! tree, so the AVX path and the portable path return identical bits.

use num_traits::Float;

const LANES: usize = 32;

#[inline(always)]
fn reduce<F: Float>(acc: &[F; LANES]) -> F {
    let v: [F; 8] = std::array::from_fn(|j| (acc[j] + acc[j + 8]) + (acc[j + 16] + acc[j + 24]));
    reduce8(&v)
}

#[inline(always)]
fn reduce8<F: Float>(v: &[F; 8]) -> F {
    ((v[0] + v[4]) + (v[1] + v[5])) + ((v[2] + v[6]) + (v[3] + v[7]))
}

#[inline(always)]
pub(crate) fn dot_portable<F: Float>(a: &[F], b: &[F]) -> F {
    let n = a.len().min(b.len());
    let full = n / LANES * LANES;
    let mut acc = [F::zero(); LANES];
    for (ca, cb) in a[..full].chunks_exact(LANES).zip(b[..full].chunks_exact(LANES)) {
        for j in 0..LANES {
            acc[j] = acc[j] + ca[j] * cb[j];
        }
    }
    let mut tail = F::zero();
    for i in full..n {
        tail = tail + a[i] * b[i];
    }
    reduce(&acc) + tail
}

#[inline(always)]
pub(crate) fn axpy_portable<F: Float>(y: &mut [F], a: F, x: &[F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

#[cfg(target_arch = "x86_64")]
mod avx {
    use std::arch::x86_64::*;

    use super::{reduce8, LANES};

    #[target_feature(enable = "avx")]
    pub(super) unsafe fn dot(a: &[f32], b: &[f32]) -> f32 {
        let n = a.len().min(b.len());
        let full = n / LANES * LANES;
        let (pa, pb) = (a.as_ptr(), b.as_ptr());
        let mut acc = [_mm256_setzero_ps(); 4];
        let mut i = 0;
        while i < full {
            for (k, lane) in acc.iter_mut().enumerate() {
                // SAFETY: i + 8k + 8 <= full <= len of both slices
                let prod = unsafe { _mm256_mul_ps(_mm256_loadu_ps(pa.add(i + 8 * k)), _mm256_loadu_ps(pb.add(i + 8 * k))) };
                *lane = _mm256_add_ps(*lane, prod);
            }
            i += LANES;
        }
        let v = _mm256_add_ps(_mm256_add_ps(acc[0], acc[1]), _mm256_add_ps(acc[2], acc[3]));
        let mut out = [0f32; 8];
        // SAFETY: out holds 8 floats
        unsafe { _mm256_storeu_ps(out.as_mut_ptr(), v) };
        let mut tail = 0f32;
        for j in full..n {
            tail += a[j] * b[j];
        }
        reduce8(&out) + tail
    }

    #[target_feature(enable = "avx")]
    pub(super) unsafe fn axpy(y: &mut [f32], a: f32, x: &[f32]) {
        let n = y.len().min(x.len());
        let full = n / 8 * 8;
        let av = _mm256_set1_ps(a);
        let (py, px) = (y.as_mut_ptr(), x.as_ptr());
        let mut i = 0;
        while i < full {
            // SAFETY: i + 8 <= full <= len of both slices
            unsafe {
                let r = _mm256_add_ps(_mm256_loadu_ps(py.add(i)), _mm256_mul_ps(av, _mm256_loadu_ps(px.add(i))));
                _mm256_storeu_ps(py.add(i), r);
            }
            i += 8;
        }
        for j in full..n {
            y[j] += a * x[j];
        }
    }
}

#[inline]
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx") {
        // SAFETY: AVX support checked above
        return unsafe { avx::dot(a, b) };
    }
    dot_portable(a, b)
}

#[inline]
pub(crate) fn axpy_f32(y: &mut [f32], a: f32, x: &[f32]) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx") {
        // SAFETY: AVX support checked above
        return unsafe { avx::axpy(y, a, x) };
    }
    axpy_portable(y, a, x)
}
