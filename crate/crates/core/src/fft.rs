//! FFT plumbing: fast linear convolution and correlation on top of rustfft.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;

/// In-place forward transform (unnormalized).
pub fn forward<T: Real>(buf: &mut [Complex<T>]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// In-place inverse transform, normalized by `1/n`.
pub fn inverse<T: Real>(buf: &mut [Complex<T>]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let scale = T::one() / T::from_usize(n).unwrap();
    for v in buf.iter_mut() {
        *v = *v * scale;
    }
}

fn padded<T: Real>(x: &[T], n: usize) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    buf
}

/// Forward spectrum of `x` zero-padded to `n` points.
pub fn spectrum<T: Real>(x: &[T], n: usize) -> Vec<Complex<T>> {
    let mut buf = padded(x, n);
    forward(&mut buf);
    buf
}

const DIRECT_LIMIT: usize = 64;

/// Full linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![T::zero(); out_len];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = out[i + j] + x * y;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let mut fa = padded(a, n);
    let mut fb = padded(b, n);
    forward(&mut fa);
    forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y;
    }
    inverse(&mut fa);
    fa.truncate(out_len);
    fa.into_iter().map(|c| c.re).collect()
}

/// Sliding correlation `q[n] = sum_i x[n + i] * kernel[i]` for `n in 0..x.len()`,
/// with `x` treated as zero beyond its end.
pub fn correlate<T: Real>(x: &[T], kernel: &[T]) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    if kernel.is_empty() {
        return vec![T::zero(); x.len()];
    }
    let reversed: Vec<T> = kernel.iter().rev().copied().collect();
    let full = convolve(x, &reversed);
    full[kernel.len() - 1..kernel.len() - 1 + x.len()].to_vec()
}

/// [`correlate`] against several kernels, sharing one transform of `x`.
pub fn correlate_bank<T: Real>(x: &[T], kernels: &[&[T]]) -> Vec<Vec<T>> {
    let longest = kernels.iter().map(|k| k.len()).max().unwrap_or(0);
    if x.is_empty() || longest == 0 {
        return kernels.iter().map(|_| vec![T::zero(); x.len()]).collect();
    }
    let n = (x.len() + longest - 1).next_power_of_two();
    let fx = spectrum(x, n);
    kernels
        .iter()
        .map(|k| {
            // conj of the kernel spectrum gives the time-reversed kernel
            let fk = spectrum(k, n);
            let mut prod: Vec<Complex<T>> = fx.iter().zip(&fk).map(|(a, b)| *a * b.conj()).collect();
            inverse(&mut prod);
            prod[..x.len()].iter().map(|c| c.re).collect()
        })
        .collect()
}

/// Cyclic cross-correlation spectrum helper: `ifft(A * conj(B))` for equal-length spectra.
pub fn cross_correlation_from_spectra<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<T> {
    let mut prod: Vec<Complex<T>> = a.iter().zip(b).map(|(x, y)| *x * y.conj()).collect();
    inverse(&mut prod);
    prod.into_iter().map(|c| c.re).collect()
}
