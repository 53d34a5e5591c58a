//! Ensemble statistics of unit pulses: variance shaping against a target
//! envelope with the 1-D Wasserstein distance, grid search over the
//! rectangular duration, and pairwise cross-correlation statistics.
//!
//! This layer is `f64`-only.

use serde::{Deserialize, Serialize};

use crate::design::{derive_seed, generate_unit, DesignParams, UnitCapricep};
#[cfg(test)]
use crate::design::composite_unit;
use crate::error::{Error, Result};
use crate::fft;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Rectangular,
    RaisedCosine,
}

/// Target envelope on the same sample grid as an ensemble variance.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeTarget {
    pub kind: TargetKind,
    pub duration_s: f64,
    /// Unit-mass profile.
    pub profile: Vec<f64>,
    pub center_index: usize,
}

impl ShapeTarget {
    /// Centered rectangle of width `duration_s`, with fractional edge samples.
    pub fn rectangular(duration_s: f64, fs: f64, len: usize, center_index: usize) -> Result<Self> {
        let half = duration_s * fs / 2.0;
        let profile = (0..len)
            .map(|n| {
                let t = (n as f64 - center_index as f64).abs();
                (half + 0.5 - t).clamp(0.0, 1.0)
            })
            .collect();
        Self::normalized(TargetKind::Rectangular, duration_s, profile, center_index)
    }

    /// Centered raised cosine with total support `support_s`.
    pub fn raised_cosine(support_s: f64, fs: f64, len: usize, center_index: usize) -> Result<Self> {
        let support = support_s * fs;
        let profile = (0..len)
            .map(|n| {
                let t = n as f64 - center_index as f64;
                if t.abs() < support / 2.0 {
                    0.5 * (1.0 + (2.0 * std::f64::consts::PI * t / support).cos())
                } else {
                    0.0
                }
            })
            .collect();
        Self::normalized(TargetKind::RaisedCosine, support_s, profile, center_index)
    }

    fn normalized(
        kind: TargetKind,
        duration_s: f64,
        mut profile: Vec<f64>,
        center_index: usize,
    ) -> Result<Self> {
        let mass: f64 = profile.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        profile.iter_mut().for_each(|v| *v /= mass);
        Ok(Self {
            kind,
            duration_s,
            profile,
            center_index,
        })
    }
}

/// Per-sample unbiased variance across an ensemble aligned on `center_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleVariance {
    pub variance: Vec<f64>,
    pub ensemble_size: usize,
    pub fs: f64,
    pub center_index: usize,
}

impl EnsembleVariance {
    pub fn total(&self) -> f64 {
        self.variance.iter().sum()
    }

    /// Variance level of a rectangle of width `duration_s` carrying the same total.
    pub fn rectangle_level(&self, duration_s: f64) -> f64 {
        self.total() / (duration_s * self.fs)
    }
}

/// Accumulates the ensemble variance of `n_units` units produced by `make`.
pub fn ensemble_variance_with<F>(n_units: usize, mut make: F) -> Result<EnsembleVariance>
where
    F: FnMut(usize) -> Result<UnitCapricep<f64>>,
{
    if n_units < 2 {
        return Err(Error::InvalidParameter(format!(
            "ensemble needs at least 2 units, got {n_units}"
        )));
    }
    let first = make(0)?;
    let len = first.len();
    let center_index = first.center_index;
    let fs = first.fs;
    // Welford per sample
    let mut mean = vec![0.0; len];
    let mut m2 = vec![0.0; len];
    let mut push = |k: usize, u: &UnitCapricep<f64>| -> Result<()> {
        if u.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: u.len(),
            });
        }
        let count = (k + 1) as f64;
        for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(&u.samples) {
            let d = x - *m;
            *m += d / count;
            *s += d * (x - *m);
        }
        Ok(())
    };
    push(0, &first)?;
    for k in 1..n_units {
        let u = make(k)?;
        push(k, &u)?;
    }
    let denom = (n_units - 1) as f64;
    Ok(EnsembleVariance {
        variance: m2.into_iter().map(|s| s / denom).collect(),
        ensemble_size: n_units,
        fs,
        center_index,
    })
}

/// Ensemble variance of independently seeded units; unit `i` uses
/// `derive_seed(params.seed, i)`.
pub fn ensemble_variance(params: &DesignParams, t_erd_s: f64, n_units: usize) -> Result<EnsembleVariance> {
    ensemble_variance_with(n_units, |i| {
        generate_unit(&params.with_seed(derive_seed(params.seed, i as u64)), t_erd_s)
    })
}

/// Wasserstein-1 distance between two mass profiles on a grid with spacing `dt`.
/// Both are normalized to unit mass first.
pub fn wasserstein_1d(a: &[f64], b: &[f64], dt: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let ma: f64 = a.iter().sum();
    let mb: f64 = b.iter().sum();
    if !(ma > 0.0) || !(mb > 0.0) {
        return Err(Error::ZeroMass);
    }
    let (mut ca, mut cb, mut acc) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ca += x / ma;
        cb += y / mb;
        acc += (ca - cb).abs();
    }
    Ok(acc * dt)
}

/// Distance in seconds between a variance profile and a target envelope.
pub fn wasserstein_distance(v: &EnsembleVariance, target: &ShapeTarget) -> Result<f64> {
    if v.center_index != target.center_index {
        return Err(Error::InvalidParameter(format!(
            "variance centered at {} but target at {}",
            v.center_index, target.center_index
        )));
    }
    wasserstein_1d(&v.variance, &target.profile, 1.0 / v.fs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerdSearch {
    pub grid: Vec<f64>,
    pub distances: Vec<f64>,
    pub best_index: usize,
    pub best_t_erd: f64,
}

/// Index of the smallest value; ties resolve to the earliest entry.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Generation duration wide enough that the kept window covers twice the
/// largest candidate rectangle.
fn analysis_terd(params: &DesignParams, grid: &[f64]) -> f64 {
    let widest = grid.iter().cloned().fold(0.0, f64::max);
    (2.0 * widest / params.truncation_factor).max(params.rectangular_terd())
}

/// Grid search for the rectangle duration closest to the variance profile.
pub fn optimize_terd(params: &DesignParams, grid: &[f64], n_units: usize) -> Result<TerdSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty duration grid".into()));
    }
    let v = ensemble_variance(params, analysis_terd(params, grid), n_units)?;
    search_terd(&v, grid)
}

/// Rectangle grid search over a precomputed variance profile.
pub fn search_terd(v: &EnsembleVariance, grid: &[f64]) -> Result<TerdSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty duration grid".into()));
    }
    let distances = grid
        .iter()
        .map(|&t| {
            let target = ShapeTarget::rectangular(t, v.fs, v.variance.len(), v.center_index)?;
            wasserstein_distance(v, &target)
        })
        .collect::<Result<Vec<_>>>()?;
    let best_index = argmin(&distances);
    Ok(TerdSearch {
        grid: grid.to_vec(),
        best_t_erd: grid[best_index],
        distances,
        best_index,
    })
}

/// Evenly spaced grid `start, start + step, ..., <= stop` (inclusive within half a step).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 0.5).floor().max(0.0) as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// One cell of a coarse parameter search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseCell {
    pub cmag: f64,
    pub alpha: f64,
    pub best_t_erd: f64,
    /// Wasserstein distance to the best rectangle, relative to its duration.
    pub cost: f64,
}

/// Exhaustive search over `cmag x alpha` (with `beta = alpha`), each cell
/// refining its own rectangle duration over `terd_ratios / fd`. Rows are
/// sorted by ascending cost.
pub fn coarse_search(
    cmag_grid: &[f64],
    alpha_grid: &[f64],
    params: &DesignParams,
    n_units: usize,
    terd_ratios: &[f64],
) -> Result<Vec<CoarseCell>> {
    let grid: Vec<f64> = terd_ratios.iter().map(|r| r / params.fd).collect();
    let mut cells = Vec::with_capacity(cmag_grid.len() * alpha_grid.len());
    for &cmag in cmag_grid {
        for &alpha in alpha_grid {
            let p = DesignParams {
                cmag,
                alpha,
                beta: alpha,
                ..params.clone()
            };
            let search = optimize_terd(&p, &grid, n_units)?;
            cells.push(CoarseCell {
                cmag,
                alpha,
                best_t_erd: search.best_t_erd,
                cost: search.distances[search.best_index] / search.best_t_erd,
            });
        }
    }
    cells.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    Ok(cells)
}

/// Grid search for a short design against a raised-cosine target.
///
/// Cells that cannot guarantee two sections for every seed are skipped.
/// Returns `(fd, alpha, distance_s)` rows sorted by ascending distance.
pub fn raised_cosine_search(
    fd_grid: &[f64],
    alpha_grid: &[f64],
    params: &DesignParams,
    support_s: f64,
    n_units: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for &fd in fd_grid {
        for &alpha in alpha_grid {
            let p = DesignParams {
                fd,
                alpha,
                beta: alpha,
                ..params.clone()
            };
            // the largest interval is fd (a+b)/a; two of them must stay below
            // Nyquist or some seeds yield a single section
            if 2.0 * fd * (p.alpha + p.beta) / p.alpha >= p.fs / 2.0 {
                continue;
            }
            let v = ensemble_variance(&p, support_s.max(p.rectangular_terd()), n_units)?;
            let target = ShapeTarget::raised_cosine(support_s, v.fs, v.variance.len(), v.center_index)?;
            rows.push((fd, alpha, wasserstein_distance(&v, &target)?));
        }
    }
    rows.sort_by(|a, b| a.2.total_cmp(&b.2));
    Ok(rows)
}

/// Maximum absolute normalized cross-correlation for one unordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub unit_a: usize,
    pub unit_b: usize,
    pub max_abs_xcorr: f64,
}

/// All unordered pairs of `units`, in lexicographic order.
pub fn max_cross_correlations(units: &[UnitCapricep<f64>]) -> Vec<PairCorrelation> {
    let longest = units.iter().map(|u| u.len()).max().unwrap_or(0);
    let n = (2 * longest).max(2).next_power_of_two();
    let spectra: Vec<_> = units.iter().map(|u| fft::spectrum(&u.samples, n)).collect();
    let energies: Vec<f64> = units.iter().map(|u| u.energy()).collect();
    let mut out = Vec::new();
    for i in 0..units.len() {
        for j in i + 1..units.len() {
            let xc = fft::cross_correlation_from_spectra(&spectra[i], &spectra[j]);
            let peak = xc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            out.push(PairCorrelation {
                unit_a: i,
                unit_b: j,
                max_abs_xcorr: peak / (energies[i] * energies[j]).sqrt(),
            });
        }
    }
    out
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
