//! Recovery of responses from a recording of the three-sequence test signal.
//!
//! The chain is: pulse compression (correlation with each unit), B4
//! orthogonalization across eight consecutive repetitions, synchronous
//! averaging over the clean 8-cycles, and decomposition into five channels:
//! linear response (raw and third-octave smoothed), nonlinear time-invariant
//! residual, random/time-varying residual from the silent fourth channel, and
//! pre-measurement background.

use crate::bands::{db, power_spectrum, BandGrid};
use crate::design::UnitCapricep;
use crate::error::{Error, Result};
use crate::fft;
use crate::scalar::{cst, wide, Real};
use crate::sequence::{SequenceSet, WeightMatrix};

/// Output of pulse compression: one correlation per unit, same length as the recording.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedSignals<T> {
    pub q: [Vec<T>; 4],
}

/// Correlates the recording with each unit; a copy of unit `m` starting at
/// sample `s` of the recording compresses to a pulse at `q[m][s]`.
pub fn compress<T: Real>(recorded: &[T], units: &[UnitCapricep<T>; 4]) -> Result<CompressedSignals<T>> {
    if recorded.is_empty() {
        return Err(Error::EmptyInput);
    }
    let len = units[0].len();
    for u in &units[1..] {
        if u.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: u.len(),
            });
        }
    }
    let kernels: Vec<&[T]> = units.iter().map(|u| u.samples.as_slice()).collect();
    let mut bank = fft::correlate_bank(recorded, &kernels).into_iter();
    let mut next = || bank.next().expect("four kernels");
    Ok(CompressedSignals {
        q: [next(), next(), next(), next()],
    })
}

/// `r[m][n] = 1/8 * sum_k q[m][n + k n_o] * b_m[k]`.
///
/// Cross-channel terms cancel at every `n` because distinct rows have zero
/// cyclic cross-correlation at every lag; the own channel is recovered with
/// unit gain where `n` is aligned to the start of an 8-cycle.
pub fn orthogonalize<T: Real>(q: &CompressedSignals<T>, weights: &WeightMatrix, n_o: usize) -> [Vec<T>; 4] {
    let eighth: T = cst(0.125);
    std::array::from_fn(|m| {
        let src = &q.q[m];
        let out_len = src.len().saturating_sub(7 * n_o);
        let mut out = vec![T::zero(); out_len];
        for k in 0..8 {
            let shifted = &src[k * n_o..k * n_o + out_len];
            if weights.weight(m, k) > 0 {
                out.iter_mut().zip(shifted).for_each(|(o, &v)| *o = *o + v);
            } else {
                out.iter_mut().zip(shifted).for_each(|(o, &v)| *o = *o - v);
            }
        }
        out.iter_mut().for_each(|o| *o = *o * eighth);
        out
    })
}

/// Mean of the `n_o`-long windows starting at `n_ini + 8 c n_o`, `c` in `omega`.
pub fn synchronous_average<T: Real>(r_itr: &[T], n_ini: usize, n_o: usize, omega: &[usize]) -> Result<Vec<T>> {
    if omega.is_empty() {
        return Err(Error::TooShort);
    }
    let mut acc = vec![T::zero(); n_o];
    for &c in omega {
        let start = n_ini + 8 * c * n_o;
        let window = r_itr.get(start..start + n_o).ok_or(Error::TooShort)?;
        acc.iter_mut().zip(window).for_each(|(a, &v)| *a = *a + v);
    }
    let inv: T = cst(1.0 / omega.len() as f64);
    acc.iter_mut().for_each(|a| *a = *a * inv);
    Ok(acc)
}

/// Lag in `0..=max_lag` maximizing the magnitude of `sum_j q[lag + j n_o]`
/// over `n_repeats` comb teeth.
pub fn estimate_latency<T: Real>(q1: &[T], n_o: usize, n_repeats: usize, max_lag: usize) -> usize {
    let mut best = (0usize, -1.0f64);
    for lag in 0..=max_lag.min(q1.len().saturating_sub(1)) {
        let sum: f64 = (0..n_repeats)
            .map(|j| lag + j * n_o)
            .take_while(|&i| i < q1.len())
            .map(|i| wide(q1[i]))
            .sum();
        if sum.abs() > best.1 {
            best = (lag, sum.abs());
        }
    }
    best.0
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnalysisConfig {
    /// Samples kept before the detected pulse peak; default `n_o / 16`.
    pub pre_roll: Option<usize>,
    /// Largest device latency searched, samples; default `4 n_o`.
    pub max_latency: Option<usize>,
}

/// Third-octave levels of every channel, dB re the loudest LTI-S band.
#[derive(Clone, Debug, PartialEq)]
pub struct BandLevels {
    pub freq_hz: f64,
    pub lti_l_db: f64,
    pub lti_s_db: f64,
    pub nonl_ti_db: f64,
    pub rntv_db: f64,
    /// RNTV with the pre-BG power removed; `None` when pre-BG is invalid.
    pub rntv_corrected_db: Option<f64>,
    pub pre_bg_db: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult<T> {
    pub fs: f64,
    pub n_o: usize,
    /// Start of the first clean cycle window in the recording.
    pub n_ini: usize,
    /// Detected position of the first compressed pulse, i.e. the device latency.
    pub latency_samples: usize,
    /// `latency_samples` minus the pre-roll; origin of every analysis window.
    pub window_offset: isize,
    /// Absolute 8-cycle indices averaged over.
    pub omega: Vec<usize>,
    /// Averaged linear response (LTI-L), length `n_o`.
    pub lti_raw: Vec<T>,
    /// Synchronously averaged orthogonalized response of each channel.
    pub channel_responses: [Vec<T>; 4],
    /// Per-combination deviations from the linear prediction, index `8 m + slot`.
    pub nonlinear_ti: Vec<Vec<T>>,
    /// Orthogonalized fourth channel over the averaged region (RNTV).
    pub random_tv: Vec<T>,
    /// Compressed pre-measurement silence, when usable.
    pub background: Option<Vec<T>>,
    pub bands: Vec<BandLevels>,
    /// LTI-S power of the loudest band (the 0 dB reference).
    pub reference_power: f64,
    /// Total nonl-TI power relative to total LTI power, dB.
    pub nonl_ti_total_db: f64,
    /// Total RNTV power relative to total LTI power, dB.
    pub rntv_total_db: f64,
    /// RMS of the random component referred back to the recording, dB re 1.
    pub rntv_noise_db: f64,
    /// RMS of the background referred back to the recording, dB re 1.
    pub pre_bg_noise_db: Option<f64>,
}

fn mean_power<T: Real>(arrays: &[&[T]], n_fft: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n_fft / 2 + 1];
    for a in arrays {
        for (s, p) in acc.iter_mut().zip(power_spectrum(a, n_fft)) {
            *s += p;
        }
    }
    let k = arrays.len().max(1) as f64;
    acc.iter_mut().for_each(|s| *s /= k);
    acc
}

fn mean_square<T: Real>(arrays: &[&[T]]) -> f64 {
    let (sum, count) = arrays.iter().fold((0.0, 0usize), |(s, c), a| {
        (s + crate::scalar::energy(a), c + a.len())
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Full decomposition of a recording made with `set`'s test signal.
///
/// `recorded` must be in the units of the unscaled test signal. `pre_silence`
/// is optional; when it is missing, too short, or clipped the pre-BG fields
/// are `None`.
pub fn decompose<T: Real>(
    recorded: &[T],
    pre_silence: Option<&[T]>,
    set: &SequenceSet<T>,
    config: &AnalysisConfig,
) -> Result<DecompositionResult<T>> {
    let n_o = set.n_o;
    let test = set.test_signal();
    if recorded.len() < test.len() {
        return Err(Error::LengthMismatch {
            expected: test.len(),
            actual: recorded.len(),
        });
    }
    if recorded.len() < 8 * n_o + set.unit_len() {
        return Err(Error::TooShort);
    }
    let total_cycles = set.n_cycles();
    if total_cycles < 3 {
        return Err(Error::TooShort);
    }

    let q = compress(recorded, &set.units)?;
    let pre_roll = config.pre_roll.unwrap_or(n_o / 16).min(8 * n_o - 1);
    let max_latency = config.max_latency.unwrap_or(4 * n_o);
    let peak = estimate_latency(&q.q[0], n_o, set.n_repeats, max_latency);
    let start0 = peak as isize - pre_roll as isize;

    let r_itr = orthogonalize(&q, &set.weights, n_o);
    let cycle_start = |c: usize| (start0 + (8 * c * n_o) as isize) as usize;
    let omega: Vec<usize> = (1..total_cycles - 1)
        .filter(|&c| cycle_start(c) + n_o <= r_itr[0].len())
        .collect();
    let first = *omega.first().ok_or(Error::TooShort)?;
    let n_ini = cycle_start(first);
    let relative: Vec<usize> = omega.iter().map(|c| c - first).collect();

    let channel_responses: [Vec<T>; 4] = [
        synchronous_average(&r_itr[0], n_ini, n_o, &relative)?,
        synchronous_average(&r_itr[1], n_ini, n_o, &relative)?,
        synchronous_average(&r_itr[2], n_ini, n_o, &relative)?,
        synchronous_average(&r_itr[3], n_ini, n_o, &relative)?,
    ];
    let third: T = cst(1.0 / 3.0);
    let lti_raw: Vec<T> = (0..n_o)
        .map(|i| (channel_responses[0][i] + channel_responses[1][i] + channel_responses[2][i]) * third)
        .collect();

    // residual after removing the linear prediction
    let predicted = fft::convolve(&test, &lti_raw);
    let residual: Vec<T> = recorded
        .iter()
        .enumerate()
        .map(|(n, &y)| {
            let idx = n as isize - start0;
            if idx >= 0 && (idx as usize) < predicted.len() {
                y - predicted[idx as usize]
            } else {
                y
            }
        })
        .collect();
    let kernels: Vec<&[T]> = set.units[..3].iter().map(|u| u.samples.as_slice()).collect();
    let q_res = fft::correlate_bank(&residual, &kernels);
    let inv_cycles: T = cst(1.0 / omega.len() as f64);
    let mut nonlinear_ti = Vec::with_capacity(24);
    for (m, qm) in q_res.iter().enumerate() {
        for slot in 0..8 {
            let sign: T = cst(set.weights.weight(m, slot) as f64);
            let mut d = vec![T::zero(); n_o];
            for &c in &omega {
                let s = cycle_start(c) + slot * n_o;
                for (acc, &v) in d.iter_mut().zip(&qm[s..s + n_o]) {
                    *acc = *acc + v;
                }
            }
            d.iter_mut().for_each(|v| *v = *v * sign * inv_cycles);
            nonlinear_ti.push(d);
        }
    }

    // random / time-varying: every slot window of the silent channel in the clean region
    let r4 = &r_itr[3];
    let mut rntv_windows: Vec<&[T]> = Vec::new();
    for &c in &omega {
        for slot in 0..8 {
            let s = cycle_start(c) + slot * n_o;
            if let Some(w) = r4.get(s..s + n_o) {
                rntv_windows.push(w);
            }
        }
    }
    let region_end = (cycle_start(*omega.last().unwrap()) + 8 * n_o).min(r4.len());
    let random_tv = r4[n_ini..region_end].to_vec();

    // background through the same compression gain; 1/8 is the orthogonalizer's
    // exact power gain on uncorrelated input
    let unit_len = set.unit_len();
    let background = pre_silence.and_then(|sil| {
        let clipped = sil.iter().any(|v| wide(v.abs()) >= 0.999);
        if clipped || sil.len() < unit_len + n_o {
            return None;
        }
        let q_bg = fft::correlate(sil, &set.units[3].samples);
        Some(q_bg[..sil.len() - unit_len + 1].to_vec())
    });
    let bg_windows: Vec<&[T]> = background
        .as_ref()
        .map(|b| b.chunks_exact(n_o).collect())
        .unwrap_or_default();

    let grid = BandGrid::third_octave(set.fs, n_o);
    let lti_power = power_spectrum(&lti_raw, n_o);
    let nonl_refs: Vec<&[T]> = nonlinear_ti.iter().map(|v| v.as_slice()).collect();
    let nonl_power = mean_power(&nonl_refs, n_o);
    let rntv_power = mean_power(&rntv_windows, n_o);
    let bg_power: Option<Vec<f64>> = (!bg_windows.is_empty()).then(|| {
        mean_power(&bg_windows, n_o).into_iter().map(|p| p / 8.0).collect()
    });

    let lti_s = grid.average(&lti_power);
    let lti_l = grid.sample_at_centers(&lti_power);
    let nonl = grid.average(&nonl_power);
    let rntv = grid.average(&rntv_power);
    let bg = bg_power.as_ref().map(|p| grid.average(p));
    let reference_power = lti_s.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let rel = |p: f64| db(p / reference_power);

    let bands = (0..grid.len())
        .map(|b| BandLevels {
            freq_hz: grid.centers_hz[b],
            lti_l_db: rel(lti_l[b]),
            lti_s_db: rel(lti_s[b]),
            nonl_ti_db: rel(nonl[b]),
            rntv_db: rel(rntv[b]),
            rntv_corrected_db: bg.as_ref().map(|g| rel((rntv[b] - g[b]).max(reference_power * 1e-30))),
            pre_bg_db: bg.as_ref().map(|g| rel(g[b])),
        })
        .collect();

    let lti_total: f64 = lti_power.iter().sum::<f64>().max(1e-300);
    let pre_bg_noise_db = (!bg_windows.is_empty()).then(|| db(mean_square(&bg_windows)));
    drop(bg_windows);
    Ok(DecompositionResult {
        fs: set.fs,
        n_o,
        n_ini,
        latency_samples: peak,
        window_offset: start0,
        omega,
        lti_raw,
        channel_responses,
        nonlinear_ti,
        random_tv,
        background,
        bands,
        reference_power,
        nonl_ti_total_db: db(nonl_power.iter().sum::<f64>() / lti_total),
        rntv_total_db: db(rntv_power.iter().sum::<f64>() / lti_total),
        rntv_noise_db: db(8.0 * mean_square(&rntv_windows)),
        pre_bg_noise_db,
    })
}
