//! Data augmentation by all-pass filtering.
//!
//! Each variant is the input convolved with a fresh unit and re-centred on the
//! unit's time origin, so the output is time-aligned with the input and keeps
//! its magnitude spectrum.

use crate::bands::{db, power_spectrum, BandGrid};
use crate::design::{derive_seed, generate_unit, DesignParams, UnitCapricep};
use crate::error::{Error, Result};
use crate::fft;
use crate::scalar::{energy, wide, Real};

/// SNR reported for a variant identical to the input.
pub const SNR_CAP_DB: f64 = 150.0;
pub const HISTOGRAM_BINS: usize = 101;
/// Rectangular duration of augmentation units unless overridden.
pub const DEFAULT_AUGMENT_TERD_S: f64 = 2e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentReport {
    /// Input vs. each variant after best lag and gain, capped at [`SNR_CAP_DB`].
    pub snr_db: Vec<f64>,
    /// Histogram of the input normalized to peak 1, over [-1, 1].
    pub input_histogram: Vec<u64>,
    pub value_histograms: Vec<Vec<u64>>,
    pub input_skewness: f64,
    pub skewness: Vec<f64>,
    /// Third-octave band centers used by `spectra_delta_db`.
    pub band_centers_hz: Vec<f64>,
    /// Variant band power minus input band power, dB, per variant and band.
    pub spectra_delta_db: Vec<Vec<f64>>,
    /// `sum y^2 / sum x^2` per variant.
    pub energy_ratio: Vec<f64>,
}

impl AugmentReport {
    pub fn spectral_delta_max_db(&self, variant: usize) -> f64 {
        self.spectra_delta_db[variant].iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// `input * unit`, trimmed to the input length and aligned on the unit centre.
pub fn filter_same<T: Real>(input: &[T], unit: &UnitCapricep<T>) -> Vec<T> {
    if unit.is_identity() {
        return input.to_vec();
    }
    let full = fft::convolve(input, &unit.samples);
    full[unit.center_index..unit.center_index + input.len()].to_vec()
}

/// Histogram of `x / max|x|` over `bins` equal cells spanning [-1, 1].
pub fn value_histogram<T: Real>(x: &[T], bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    let peak = x.iter().fold(0.0f64, |m, &v| m.max(wide(v).abs()));
    if peak == 0.0 || bins == 0 {
        if bins > 0 {
            h[bins / 2] = x.len() as u64;
        }
        return h;
    }
    for &v in x {
        let u = (wide(v) / peak + 1.0) / 2.0;
        let idx = ((u * bins as f64) as usize).min(bins - 1);
        h[idx] += 1;
    }
    h
}

/// Sample skewness (third standardized moment); zero for constant input.
pub fn skewness<T: Real>(x: &[T]) -> f64 {
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mean = x.iter().map(|&v| wide(v)).sum::<f64>() / n;
    let (m2, m3) = x.iter().fold((0.0, 0.0), |(a, b), &v| {
        let d = wide(v) - mean;
        (a + d * d, b + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// SNR of `y` against `x` after the integer lag and scalar gain minimizing the error.
pub fn aligned_snr_db<T: Real>(x: &[T], y: &[T], max_lag: usize) -> f64 {
    let ex = energy(x);
    let ey = energy(y);
    if ex == 0.0 {
        return if ey == 0.0 { SNR_CAP_DB } else { -SNR_CAP_DB };
    }
    if ey == 0.0 {
        return 0.0;
    }
    let n = (x.len() + y.len()).next_power_of_two();
    let xc = fft::cross_correlation_from_spectra(&fft::spectrum(x, n), &fft::spectrum(y, n));
    // xc[k] = sum_i x[i + k] y[i], negative k wrapped to the end
    let lags = (0..=max_lag.min(n / 2)).chain((1..=max_lag.min(n / 2 - 1)).map(|k| n - k));
    let best = lags.map(|k| wide(xc[k]).powi(2)).fold(0.0, f64::max);
    let residual = (ex - best / ey).max(0.0);
    if residual <= ex * 10f64.powf(-SNR_CAP_DB / 10.0) {
        SNR_CAP_DB
    } else {
        (10.0 * (ex / residual).log10()).min(SNR_CAP_DB)
    }
}

/// Filters `input` with every unit and measures the effect of each.
pub fn augment_with_units<T: Real>(
    input: &[T],
    fs: f64,
    units: &[UnitCapricep<T>],
) -> Result<(Vec<Vec<T>>, AugmentReport)> {
    if input.is_empty() {
        return Err(Error::EmptyInput);
    }
    if units.is_empty() {
        return Err(Error::InvalidParameter("at least one variant is required".into()));
    }
    for u in units {
        if u.fs != fs {
            return Err(Error::SampleRateMismatch {
                expected: fs,
                actual: u.fs,
            });
        }
    }
    let variants: Vec<Vec<T>> = units.iter().map(|u| filter_same(input, u)).collect();

    let n_fft = input.len().max(16).next_power_of_two();
    let grid = BandGrid::third_octave(fs, n_fft);
    let input_bands = grid.average(&power_spectrum(input, n_fft));
    let ex = energy(input);
    let max_lag = units.iter().map(|u| u.len()).max().unwrap_or(0);

    let report = AugmentReport {
        snr_db: variants.iter().map(|y| aligned_snr_db(input, y, max_lag)).collect(),
        input_histogram: value_histogram(input, HISTOGRAM_BINS),
        value_histograms: variants.iter().map(|y| value_histogram(y, HISTOGRAM_BINS)).collect(),
        input_skewness: skewness(input),
        skewness: variants.iter().map(|y| skewness(y)).collect(),
        band_centers_hz: grid.centers_hz.clone(),
        spectra_delta_db: variants
            .iter()
            .map(|y| {
                let bands = grid.average(&power_spectrum(y, n_fft));
                bands
                    .iter()
                    .zip(&input_bands)
                    .map(|(&p, &q)| if q > 0.0 { db(p / q) } else { 0.0 })
                    .collect()
            })
            .collect(),
        energy_ratio: variants
            .iter()
            .map(|y| if ex > 0.0 { energy(y) / ex } else { 1.0 })
            .collect(),
    };
    Ok((variants, report))
}

/// Draws `n_variants` units from `base` (unit `i` seeded with
/// `derive_seed(base.seed, i)`) and filters `input` with each.
pub fn augment<T: Real>(
    input: &[T],
    base: &DesignParams,
    t_erd_s: f64,
    n_variants: usize,
) -> Result<(Vec<Vec<T>>, AugmentReport)> {
    if input.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_variants == 0 {
        return Err(Error::InvalidParameter("n_variants must be at least 1".into()));
    }
    let units = (0..n_variants)
        .map(|i| generate_unit(&base.with_seed(derive_seed(base.seed, i as u64)), t_erd_s))
        .collect::<Result<Vec<UnitCapricep<T>>>>()?;
    augment_with_units(input, base.fs, &units)
}
