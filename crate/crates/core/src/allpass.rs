//! Single all-pass sections and signed cascades, evaluated exactly on an FFT grid.
//!
//! A section is parameterized by a center frequency and a bandwidth; its pole
//! sits at radius `exp(-pi * b / fs)` and angle `2 pi f / fs`. To keep impulse
//! responses real, each section realizes the second-order all-pass built from
//! the conjugate pole pair, `H(z) = z^-2 A(1/z) / A(z)` with
//! `A(z) = 1 + a1 z^-1 + a2 z^-2`.
//!
//! Phase is computed in closed form, so cascades of thousands of sections need
//! no numerical unwrapping: each first-order factor of `A(e^{jw})` has an
//! argument inside `(-pi/2, pi/2)`, hence one `atan2` of the product is already
//! the continuous value.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::scalar::{cst, Real};

/// Time direction of a section: causal, or time-reversed (anti-causal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum TimeSign {
    Forward,
    Reversed,
}

impl TimeSign {
    pub fn value(self) -> f64 {
        match self {
            TimeSign::Forward => 1.0,
            TimeSign::Reversed => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            TimeSign::Forward => TimeSign::Reversed,
            TimeSign::Reversed => TimeSign::Forward,
        }
    }
}

impl From<TimeSign> for i8 {
    fn from(s: TimeSign) -> i8 {
        match s {
            TimeSign::Forward => 1,
            TimeSign::Reversed => -1,
        }
    }
}

impl TryFrom<i8> for TimeSign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(TimeSign::Forward),
            -1 => Ok(TimeSign::Reversed),
            other => Err(format!("time sign must be +1 or -1, got {other}")),
        }
    }
}

/// One conjugate-pair all-pass stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllPassSection {
    pub center_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub time_sign: TimeSign,
}

impl AllPassSection {
    pub fn new(center_freq_hz: f64, bandwidth_hz: f64, time_sign: TimeSign) -> Self {
        Self {
            center_freq_hz,
            bandwidth_hz,
            time_sign,
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.center_freq_hz > 0.0 && self.center_freq_hz < fs / 2.0) {
            return Err(Error::InvalidSection(format!(
                "center frequency {} Hz outside (0, {}) Hz",
                self.center_freq_hz,
                fs / 2.0
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::InvalidSection(format!(
                "bandwidth {} Hz must be positive (pole strictly inside the unit circle)",
                self.bandwidth_hz
            )));
        }
        Ok(())
    }

    pub fn pole_radius(&self, fs: f64) -> f64 {
        (-std::f64::consts::PI * self.bandwidth_hz / fs).exp()
    }

    pub fn pole_angle(&self, fs: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.center_freq_hz / fs
    }

    /// Denominator coefficients `[a1, a2]` of `1 + a1 z^-1 + a2 z^-2`.
    pub fn denominator(&self, fs: f64) -> [f64; 2] {
        let r = self.pole_radius(fs);
        [-2.0 * r * self.pole_angle(fs).cos(), r * r]
    }

    pub fn reversed(&self) -> Self {
        Self {
            time_sign: self.time_sign.flipped(),
            ..*self
        }
    }
}

/// Trigonometric tables for bins `0..=n/2`.
struct HalfGrid<T> {
    w: Vec<T>,
    c1: Vec<T>,
    s1: Vec<T>,
    c2: Vec<T>,
    s2: Vec<T>,
}

impl<T: Real> HalfGrid<T> {
    fn new(n_fft: usize) -> Self {
        let half = n_fft / 2;
        let mut g = HalfGrid {
            w: Vec::with_capacity(half + 1),
            c1: Vec::with_capacity(half + 1),
            s1: Vec::with_capacity(half + 1),
            c2: Vec::with_capacity(half + 1),
            s2: Vec::with_capacity(half + 1),
        };
        for k in 0..=half {
            let w = 2.0 * std::f64::consts::PI * k as f64 / n_fft as f64;
            // exact values at DC and Nyquist keep the spectrum real there
            let (s1, c1, s2, c2) = if k == 0 {
                (0.0, 1.0, 0.0, 1.0)
            } else if k == half {
                (0.0, -1.0, 0.0, 1.0)
            } else {
                (w.sin(), w.cos(), (2.0 * w).sin(), (2.0 * w).cos())
            };
            g.w.push(cst(w));
            g.c1.push(cst(c1));
            g.s1.push(cst(s1));
            g.c2.push(cst(c2));
            g.s2.push(cst(s2));
        }
        g
    }

    fn accumulate(&self, phase: &mut [T], section: &AllPassSection, fs: f64) {
        let [a1, a2] = section.denominator(fs);
        let (a1, a2): (T, T) = (cst(a1), cst(a2));
        let sign: T = cst(section.time_sign.value());
        let two: T = cst(2.0);
        for (k, p) in phase.iter_mut().enumerate() {
            let re = T::one() + a1 * self.c1[k] + a2 * self.c2[k];
            let im = -(a1 * self.s1[k] + a2 * self.s2[k]);
            *p = *p + sign * (-two * self.w[k] - two * im.atan2(re));
        }
    }
}

fn check_fft_len(n_fft: usize) -> Result<()> {
    if n_fft < 2 || !n_fft.is_power_of_two() {
        return Err(Error::FftLength(n_fft));
    }
    Ok(())
}

fn mirror<T: Real>(half_phase: Vec<T>, n_fft: usize) -> Vec<T> {
    let mut full = half_phase;
    full.resize(n_fft, T::zero());
    for k in 1..n_fft / 2 {
        full[n_fft - k] = -full[k];
    }
    full
}

/// Phase (radians, length `n_fft`) of one section on the FFT grid.
pub fn section_phase<T: Real>(section: &AllPassSection, fs: f64, n_fft: usize) -> Result<Vec<T>> {
    check_fft_len(n_fft)?;
    section.validate(fs)?;
    let grid = HalfGrid::<T>::new(n_fft);
    let mut half = vec![T::zero(); n_fft / 2 + 1];
    grid.accumulate(&mut half, section, fs);
    Ok(mirror(half, n_fft))
}

/// Phase-only description of an all-pass cascade on an FFT grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeResponse<T> {
    phase: Vec<T>,
    sample_rate_hz: f64,
}

impl<T: Real> CascadeResponse<T> {
    /// Wraps an externally built phase array; symmetry is checked when the
    /// impulse response is formed.
    pub fn from_phase(phase: Vec<T>, sample_rate_hz: f64) -> Result<Self> {
        check_fft_len(phase.len())?;
        Ok(Self {
            phase,
            sample_rate_hz,
        })
    }

    pub fn phase_samples(&self) -> &[T] {
        &self.phase
    }

    pub fn fft_length(&self) -> usize {
        self.phase.len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Unit-magnitude spectrum `exp(j phase)`.
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        self.phase
            .iter()
            .map(|&p| Complex::new(p.cos(), p.sin()))
            .collect()
    }
}

/// Sums the section phases of a cascade. An empty cascade is the identity.
pub fn cascade_phase<T: Real>(
    sections: &[AllPassSection],
    fs: f64,
    n_fft: usize,
) -> Result<CascadeResponse<T>> {
    check_fft_len(n_fft)?;
    for s in sections {
        s.validate(fs)?;
    }
    let grid = HalfGrid::<T>::new(n_fft);
    let mut half = vec![T::zero(); n_fft / 2 + 1];
    for s in sections {
        grid.accumulate(&mut half, s, fs);
    }
    Ok(CascadeResponse {
        phase: mirror(half, n_fft),
        sample_rate_hz: fs,
    })
}

/// Real impulse response with the time origin rotated to `center_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseResponse<T> {
    pub samples: Vec<T>,
    pub center_index: usize,
}

/// Inverse transform of `exp(j phase)`, circularly rotated so that time zero
/// lands at `fft_length / 2`. Anti-causal parts appear before the center.
pub fn impulse_response<T: Real>(resp: &CascadeResponse<T>) -> Result<ImpulseResponse<T>> {
    let n = resp.fft_length();
    let mut buf = resp.spectrum();
    fft::inverse(&mut buf);
    let residue = buf.iter().fold(T::zero(), |m, c| m.max(c.im.abs()));
    if residue > T::imag_tolerance() {
        return Err(Error::PhaseSymmetry {
            residue: residue.to_f64().unwrap_or(f64::NAN),
        });
    }
    let center = n / 2;
    let mut samples = vec![T::zero(); n];
    for (i, c) in buf.iter().enumerate() {
        samples[(i + center) % n] = c.re;
    }
    Ok(ImpulseResponse {
        samples,
        center_index: center,
    })
}
