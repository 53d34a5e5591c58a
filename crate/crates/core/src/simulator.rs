//! Virtual measurement chain used to exercise the analyzer without hardware:
//! FIR filter, memoryless polynomial, optional sinusoidal gain drift, additive
//! Gaussian noise and a fixed latency.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::scalar::{cst, wide, Real};

/// Sinusoidal gain modulation `1 + depth * sin(2 pi t / period)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub period_s: f64,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualSystem {
    pub lti_ir: Vec<f64>,
    /// `nl_coeffs[i]` multiplies `x^(i+1)`.
    pub nl_coeffs: Vec<f64>,
    /// Additive noise RMS in dB re 1; `None` disables noise.
    pub noise_level_db: Option<f64>,
    pub drift: Option<Drift>,
    pub latency_samples: usize,
    pub noise_seed: u64,
    /// Length of the noise-only segment returned alongside the response.
    #[serde(default = "default_silence")]
    pub pre_silence_s: f64,
}

fn default_silence() -> f64 {
    1.0
}

impl VirtualSystem {
    /// Identity: delta response, linear, noiseless, no latency.
    pub fn identity() -> Self {
        Self {
            lti_ir: vec![1.0],
            nl_coeffs: vec![1.0],
            noise_level_db: None,
            drift: None,
            latency_samples: 0,
            noise_seed: 0,
            pre_silence_s: default_silence(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e: f64 = self.lti_ir.iter().map(|v| v * v).sum();
        if self.lti_ir.is_empty() || !e.is_finite() {
            return Err(Error::InvalidParameter("lti_ir must be non-empty with finite energy".into()));
        }
        if self.nl_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("nl_coeffs must be finite".into()));
        }
        if let Some(d) = self.drift {
            if !(0.0..0.5).contains(&d.depth) || !(d.period_s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "drift depth {} must lie in [0, 0.5) with positive period",
                    d.depth
                )));
            }
        }
        if !(self.pre_silence_s >= 0.0) {
            return Err(Error::InvalidParameter("pre_silence_s must be non-negative".into()));
        }
        Ok(())
    }

    fn polynomial(&self, x: f64) -> f64 {
        // Horner on c1 x + c2 x^2 + ...
        self.nl_coeffs.iter().rev().fold(0.0, |acc, &c| (acc + c) * x)
    }

    fn is_linear(&self) -> bool {
        self.nl_coeffs.len() == 1 && self.nl_coeffs[0] == 1.0
    }
}

/// Runs `input` through `system` sampled at `fs`.
///
/// Returns `(output, pre_silence)`: the output has length
/// `input.len() + lti_ir.len() - 1 + latency_samples`; the silence is noise
/// from the same generator, drawn before the response.
pub fn run<T: Real>(system: &VirtualSystem, input: &[T], fs: f64) -> Result<(Vec<T>, Vec<T>)> {
    system.validate()?;
    if input.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ir: Vec<T> = system.lti_ir.iter().map(|&v| cst(v)).collect();
    let filtered = if ir.len() == 1 && system.lti_ir[0] == 1.0 {
        input.to_vec()
    } else {
        fft::convolve(input, &ir)
    };

    let mut out = vec![T::zero(); system.latency_samples];
    out.reserve(filtered.len());
    let linear = system.is_linear();
    for (n, &v) in filtered.iter().enumerate() {
        let mut y = if linear { v } else { cst(system.polynomial(wide(v))) };
        if let Some(d) = system.drift {
            let t = (n + system.latency_samples) as f64 / fs;
            y = y * cst(1.0 + d.depth * (2.0 * std::f64::consts::PI * t / d.period_s).sin());
        }
        let mag = wide(y.abs());
        if !(mag <= 10.0) {
            return Err(Error::Overflow { peak: mag });
        }
        out.push(y);
    }

    let n_silence = (system.pre_silence_s * fs).round() as usize;
    let mut silence = vec![T::zero(); n_silence];
    if let Some(level) = system.noise_level_db {
        let sigma = 10f64.powf(level / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(system.noise_seed);
        let mut draw = || -> T {
            let g: f64 = StandardNormal.sample(&mut rng);
            cst(sigma * g)
        };
        silence.iter_mut().for_each(|s| *s = draw());
        out.iter_mut().for_each(|s| *s = *s + draw());
    }
    Ok((out, silence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(a: f64, f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a * (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn identity_delays_input_exactly() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let sys = VirtualSystem {
            latency_samples: 7,
            ..VirtualSystem::identity()
        };
        let (y, sil) = run(&sys, &x, 1000.0).unwrap();
        assert_eq!(&y[..7], &[0.0; 7]);
        assert_eq!(&y[7..], x.as_slice());
        assert_eq!(sil.len(), 1000);
        assert!(sil.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cubic_term_third_harmonic_matches_closed_form() {
        let fs = 48000.0;
        let n = 48000;
        let (a, c3) = (0.8, 0.1);
        // 1 kHz lands exactly on bin 1000 of a 48000-point DFT
        let x = sine(a, 1000.0, fs, n);
        let sys = VirtualSystem {
            nl_coeffs: vec![1.0, 0.0, c3],
            ..VirtualSystem::identity()
        };
        let (y, _) = run(&sys, &x, fs).unwrap();
        let amp = |k: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in y.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * k * i as f64 / fs;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            2.0 * (re * re + im * im).sqrt() / n as f64
        };
        let expect = c3 * a.powi(3) / 4.0;
        let got = amp(3000.0);
        assert!((got / expect - 1.0).abs() < 0.01, "{got} vs {expect}");
    }

    #[test]
    fn noise_rms_matches_level() {
        let sys = VirtualSystem {
            noise_level_db: Some(-40.0),
            noise_seed: 3,
            ..VirtualSystem::identity()
        };
        let (y, sil) = run(&sys, &vec![0.0f64; 44100], 44100.0).unwrap();
        for s in [&y, &sil] {
            let rms = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
            assert!((rms / 0.01 - 1.0).abs() < 0.05, "{rms}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let sys = VirtualSystem {
            lti_ir: vec![0.5, 0.25, -0.1],
            nl_coeffs: vec![1.0, 0.05],
            noise_level_db: Some(-30.0),
            drift: Some(Drift { period_s: 0.1, depth: 0.2 }),
            latency_samples: 3,
            noise_seed: 11,
            pre_silence_s: 0.01,
        };
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.1).cos()).collect();
        assert_eq!(run(&sys, &x, 8000.0).unwrap(), run(&sys, &x, 8000.0).unwrap());
    }

    #[test]
    fn linear_path_commutes_with_scaling() {
        let sys = VirtualSystem {
            lti_ir: vec![0.3, -0.2, 0.1, 0.05],
            ..VirtualSystem::identity()
        };
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.21).sin()).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        let (y, _) = run(&sys, &x, 1000.0).unwrap();
        let (y2, _) = run(&sys, &x2, 1000.0).unwrap();
        for (a, b) in y.iter().zip(&y2) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn overflow_and_bad_drift_rejected() {
        let sys = VirtualSystem {
            nl_coeffs: vec![1.0, 0.0, 5.0],
            ..VirtualSystem::identity()
        };
        assert!(matches!(run(&sys, &[2.0f64], 1000.0), Err(Error::Overflow { .. })));
        let sys = VirtualSystem {
            drift: Some(Drift { period_s: 1.0, depth: 0.5 }),
            ..VirtualSystem::identity()
        };
        assert!(run(&sys, &[0.1f64], 1000.0).is_err());
    }
}
