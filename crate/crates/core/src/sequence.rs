//! Periodic overlap-add sequences weighted by the four orthogonal binary rows.

use crate::design::UnitCapricep;
use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

/// The 4 x 8 matrix of orthogonal +-1 rows used to weight repetitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightMatrix {
    pub rows: [[i8; 8]; 4],
}

pub const B4: WeightMatrix = WeightMatrix {
    rows: [
        [1, 1, 1, 1, 1, 1, 1, 1],
        [1, -1, 1, -1, 1, -1, 1, -1],
        [1, 1, -1, -1, 1, 1, -1, -1],
        [1, 1, 1, 1, -1, -1, -1, -1],
    ],
};

impl Default for WeightMatrix {
    fn default() -> Self {
        B4
    }
}

impl WeightMatrix {
    pub fn row(&self, m: usize) -> &[i8; 8] {
        &self.rows[m]
    }

    /// Weight applied to repetition `k` of sequence `m` (cyclic in 8).
    pub fn weight(&self, m: usize, k: usize) -> i8 {
        self.rows[m][k % 8]
    }

    pub fn inner(&self, i: usize, j: usize) -> i32 {
        self.rows[i]
            .iter()
            .zip(&self.rows[j])
            .map(|(&a, &b)| a as i32 * b as i32)
            .sum()
    }

    /// Cyclic cross-correlation `sum_k b_i[k] b_j[(k + lag) mod 8]`.
    pub fn cyclic_correlation(&self, i: usize, j: usize, lag: usize) -> i32 {
        (0..8)
            .map(|k| self.rows[i][k] as i32 * self.rows[j][(k + lag) % 8] as i32)
            .sum()
    }
}

/// Overlap-add of `n_repeats` copies of `unit`, copy `k` starting at `k * n_o`
/// and scaled by `row[k mod 8]`. Length is `n_o * n_repeats + unit.len() - 1`.
pub fn build_sequence<T: Real>(unit: &[T], row: &[i8; 8], n_o: usize, n_repeats: usize) -> Result<Vec<T>> {
    if unit.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_o == 0 {
        return Err(Error::InvalidParameter("repetition shift must be at least 1".into()));
    }
    let overlap = unit.len().div_ceil(n_o);
    if overlap > 16 {
        return Err(Error::Overlap { n_o, overlap });
    }
    let mut out = vec![T::zero(); n_o * n_repeats + unit.len() - 1];
    for k in 0..n_repeats {
        let start = k * n_o;
        let dst = &mut out[start..start + unit.len()];
        if row[k % 8] > 0 {
            dst.iter_mut().zip(unit).for_each(|(d, &u)| *d = *d + u);
        } else {
            dst.iter_mut().zip(unit).for_each(|(d, &u)| *d = *d - u);
        }
    }
    Ok(out)
}

/// Default number of repetitions: `n_cycles` measured 8-cycles plus one
/// warm-up and one cool-down cycle.
pub fn default_repeats(n_cycles: usize) -> usize {
    8 * (n_cycles.max(3) + 2)
}

/// Default repetition shift: one rectangular duration.
pub fn default_shift(fs: f64, t_erd_s: f64) -> usize {
    ((fs * t_erd_s).round() as usize).max(1)
}

/// The four weighted sequences plus the timing they were built with.
#[derive(Clone, Debug)]
pub struct SequenceSet<T> {
    pub sequences: [Vec<T>; 4],
    pub n_o: usize,
    pub n_repeats: usize,
    pub units: [UnitCapricep<T>; 4],
    pub weights: WeightMatrix,
    pub fs: f64,
}

impl<T: Real> SequenceSet<T> {
    /// Sum of the first three sequences.
    pub fn test_signal(&self) -> Vec<T> {
        let [a, b, c, _] = &self.sequences;
        a.iter().zip(b).zip(c).map(|((&x, &y), &z)| x + y + z).collect()
    }

    pub fn n_cycles(&self) -> usize {
        self.n_repeats / 8
    }

    pub fn unit_len(&self) -> usize {
        self.units[0].len()
    }
}

/// Builds all four sequences and returns the three-sequence test signal.
/// The fourth sequence is kept only as the reference for the silent channel.
pub fn build_test_signal<T: Real>(
    units: [UnitCapricep<T>; 4],
    n_o: usize,
    n_repeats: usize,
) -> Result<(Vec<T>, SequenceSet<T>)> {
    if n_repeats < 8 {
        return Err(Error::InvalidParameter(format!("n_repeats {n_repeats} < 8")));
    }
    let fs = units[0].fs;
    let len = units[0].len();
    for u in &units[1..] {
        if u.fs != fs {
            return Err(Error::SampleRateMismatch {
                expected: fs,
                actual: u.fs,
            });
        }
        if u.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: u.len(),
            });
        }
    }
    let weights = B4;
    let build = |m: usize| build_sequence(&units[m].samples, weights.row(m), n_o, n_repeats);
    let sequences = [build(0)?, build(1)?, build(2)?, build(3)?];
    let set = SequenceSet {
        sequences,
        n_o,
        n_repeats,
        units,
        weights,
        fs,
    };
    Ok((set.test_signal(), set))
}

/// Scales `signal` in place so its peak magnitude is `target`; returns the factor.
pub fn normalize_peak<T: Real>(signal: &mut [T], target: f64) -> f64 {
    let peak = signal.iter().fold(0.0f64, |m, &v| m.max(v.abs().to_f64().unwrap_or(0.0)));
    if peak == 0.0 {
        return 1.0;
    }
    let scale = target / peak;
    let s: T = cst(scale);
    signal.iter_mut().for_each(|v| *v = *v * s);
    scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allpass::{AllPassSection, TimeSign};
    use crate::design::{unit_from_sections, DesignParams, UnitSpec};

    fn delta_unit() -> UnitCapricep<f64> {
        unit_from_sections(
            Vec::new(),
            UnitSpec {
                design: DesignParams::default(),
                t_erd_s: 1.0 / 44100.0,
                short: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn rows_are_orthogonal_in_integers() {
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(B4.inner(i, j), if i == j { 8 } else { 0 });
            }
        }
    }

    #[test]
    fn distinct_rows_have_zero_cyclic_correlation_at_every_lag() {
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    for lag in 0..8 {
                        assert_eq!(B4.cyclic_correlation(i, j, lag), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn delta_unit_gives_pulse_train() {
        let s = build_sequence(&[1.0f64], B4.row(0), 10, 3).unwrap();
        assert_eq!(s.len(), 30);
        for (i, v) in s.iter().enumerate() {
            assert_eq!(*v, if i % 10 == 0 { 1.0 } else { 0.0 });
        }
        let s = build_sequence(&[1.0f64], B4.row(1), 10, 4).unwrap();
        assert_eq!([s[0], s[10], s[20], s[30]], [1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn ola_matches_dense_convolution() {
        let unit: Vec<f64> = (0..37).map(|i| ((i * 11 % 13) as f64 - 6.0) / 7.0).collect();
        let n_o = 9;
        let n_repeats = 20;
        let row = B4.row(2);
        let mut train = vec![0.0; n_o * n_repeats];
        for k in 0..n_repeats {
            train[k * n_o] = row[k % 8] as f64;
        }
        let dense = crate::fft::convolve(&train, &unit);
        let ola = build_sequence(&unit, row, n_o, n_repeats).unwrap();
        assert_eq!(ola.len(), dense.len());
        for (a, b) in ola.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pile_up_guard() {
        let unit = vec![0.0f64; 170];
        assert!(matches!(
            build_sequence(&unit, B4.row(0), 10, 8),
            Err(Error::Overlap { overlap: 17, .. })
        ));
        assert!(build_sequence(&unit, B4.row(0), 11, 8).is_ok());
    }

    #[test]
    fn delta_test_signal_starts_with_column_sum() {
        let units = [delta_unit(), delta_unit(), delta_unit(), delta_unit()];
        let c = units[0].center_index;
        let (x, set) = build_test_signal(units, 5, 16).unwrap();
        assert_eq!(x[c], 3.0);
        for k in 0..16 {
            let expect: i32 = (0..3).map(|m| B4.weight(m, k) as i32).sum();
            assert_eq!(x[c + k * 5], expect as f64);
        }
        assert_eq!(set.sequences[3][c + 4 * 5], -1.0);
    }

    #[test]
    fn test_signal_rejects_mismatched_units() {
        let a = delta_unit();
        let mut b = delta_unit();
        b.fs = 48000.0;
        let r = build_test_signal([a.clone(), a.clone(), b, a], 5, 16);
        assert!(matches!(r, Err(Error::SampleRateMismatch { .. })));
    }

    #[test]
    fn peak_bound_and_linearity() {
        let mk = |seed| {
            let sec = vec![
                AllPassSection::new(1000.0 + seed as f64 * 300.0, 400.0, TimeSign::Forward),
                AllPassSection::new(6000.0, 700.0, TimeSign::Reversed),
            ];
            unit_from_sections::<f64>(
                sec,
                UnitSpec {
                    design: DesignParams::default(),
                    t_erd_s: 0.005,
                    short: None,
                },
            )
            .unwrap()
        };
        let units = [mk(0), mk(1), mk(2), mk(3)];
        let n_o = 100;
        let (x, _) = build_test_signal(units.clone(), n_o, 16).unwrap();
        let overlap = units[0].len().div_ceil(n_o) as f64;
        let bound: f64 = units[..3]
            .iter()
            .map(|u| u.samples.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .sum::<f64>()
            * overlap;
        assert!(x.iter().all(|v| v.abs() <= bound + 1e-12));

        let scaled = units.clone().map(|mut u| {
            u.samples.iter_mut().for_each(|v| *v *= 2.5);
            u
        });
        let (y, _) = build_test_signal(scaled, n_o, 16).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_peak_records_scale() {
        let mut s = vec![0.1f64, -0.8, 0.4];
        let k = normalize_peak(&mut s, 0.5);
        assert!((k - 0.625).abs() < 1e-15);
        assert!((s[1] + 0.5).abs() < 1e-15);
    }
}
