//! Third-octave band grids and band-averaged power spectra.

use std::ops::Range;

use crate::fft;
use crate::scalar::{wide, Real};

/// Third-octave bands laid over the one-sided bins of an `n_fft` spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct BandGrid {
    pub centers_hz: Vec<f64>,
    pub bins: Vec<Range<usize>>,
    pub n_fft: usize,
    pub fs: f64,
}

impl BandGrid {
    /// Base-2 third-octave bands (1 kHz reference) from 20 Hz to Nyquist;
    /// bands that contain no bin are dropped.
    pub fn third_octave(fs: f64, n_fft: usize) -> Self {
        let df = fs / n_fft as f64;
        let half = n_fft / 2;
        let edge = 2f64.powf(1.0 / 6.0);
        let mut centers_hz = Vec::new();
        let mut bins = Vec::new();
        for k in -17i32..=20 {
            let fc = 1000.0 * 2f64.powf(k as f64 / 3.0);
            let (lo, hi) = (fc / edge, fc * edge);
            if fc < 20.0 || lo >= fs / 2.0 {
                continue;
            }
            let first = ((lo / df).ceil() as usize).max(1);
            let last = ((hi / df).ceil() as usize).min(half + 1);
            if first < last {
                centers_hz.push(fc);
                bins.push(first..last);
            }
        }
        Self {
            centers_hz,
            bins,
            n_fft,
            fs,
        }
    }

    pub fn len(&self) -> usize {
        self.centers_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers_hz.is_empty()
    }

    /// Mean of `per_bin` over each band.
    pub fn average(&self, per_bin: &[f64]) -> Vec<f64> {
        self.bins
            .iter()
            .map(|r| per_bin[r.clone()].iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Value of `per_bin` at the bin nearest each band center.
    pub fn sample_at_centers(&self, per_bin: &[f64]) -> Vec<f64> {
        let df = self.fs / self.n_fft as f64;
        self.centers_hz
            .iter()
            .map(|&fc| {
                let k = ((fc / df).round() as usize).clamp(1, self.n_fft / 2);
                per_bin[k]
            })
            .collect()
    }
}

/// One-sided power spectrum `|X_k|^2`, `k = 0..=n_fft/2`, of `x` zero-padded to `n_fft`.
pub fn power_spectrum<T: Real>(x: &[T], n_fft: usize) -> Vec<f64> {
    let spec = fft::spectrum(&x[..x.len().min(n_fft)], n_fft);
    spec[..=n_fft / 2]
        .iter()
        .map(|c| wide(c.re) * wide(c.re) + wide(c.im) * wide(c.im))
        .collect()
}

pub fn db(power: f64) -> f64 {
    10.0 * power.max(1e-300).log10()
}
