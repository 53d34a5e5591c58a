//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use capricep::allpass::{cascade_phase, impulse_response};
use capricep::analyzer::{compress, decompose, orthogonalize, synchronous_average, AnalysisConfig};
use capricep::augment::{augment, augment_with_units, DEFAULT_AUGMENT_TERD_S};
use capricep::design::{
    derive_seed, draw_sections, first_order_count, generate_unit, synthesis_fft_length, unit_from_sections,
    unit_length, DesignParams, UnitSpec,
};
use capricep::fft;
use capricep::sequence::{build_sequence, build_test_signal, default_repeats, SequenceSet, B4};
use capricep::shape::{linear_grid, max_cross_correlations, median, optimize_terd};
use capricep::simulator::{run, VirtualSystem};
use capricep::Unit;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ac1_allpass_exactness() -> Outcome {
    let params = DesignParams::default();
    let t_erd = params.rectangular_terd();
    let (mut worst_mag, mut worst_energy, mut slowest) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..5 {
        let start = Instant::now();
        let p = params.with_seed(seed);
        let sections = draw_sections(&p).unwrap();
        let n_fft = synthesis_fft_length(t_erd, p.fs, unit_length(p.truncation_factor, t_erd, p.fs));
        let ir = impulse_response(&cascade_phase::<f64>(&sections, p.fs, n_fft).unwrap()).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let spec = fft::spectrum(&ir.samples, n_fft);
        worst_mag = spec.iter().fold(worst_mag, |m, c| m.max((c.norm() - 1.0).abs()));
        let e: f64 = ir.samples.iter().map(|v| v * v).sum();
        worst_energy = worst_energy.max((e - 1.0).abs());
    }
    outcome(
        worst_mag <= 1e-12 && worst_energy <= 1e-9 && slowest < 1.0,
        format!("max |mag-1| {worst_mag:.2e}, max |energy-1| {worst_energy:.2e}, slowest unit {slowest:.3} s"),
    )
}

fn ac2_section_count() -> Outcome {
    let p = DesignParams::default();
    let counts: Vec<f64> = (0..50)
        .map(|i| first_order_count(&draw_sections(&p.with_seed(derive_seed(2, i))).unwrap()) as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    outcome(
        (1080.0..=1125.0).contains(&mean),
        format!("mean first-order section count {mean:.1} over 50 seeds (conjugate pairs {:.1})", mean / 2.0),
    )
}

fn ac3_terd_optimum() -> Outcome {
    let p = DesignParams::default();
    let grid: Vec<f64> = linear_grid(1.0, 2.5, 0.05).iter().map(|r| r / p.fd).collect();
    let start = Instant::now();
    let s = optimize_terd(&p, &grid, 500).unwrap();
    let ratio = s.best_t_erd * p.fd;
    outcome(
        // grid points are k * 0.05 / fd; allow float rounding at the edges
        (1.64 - 1e-9..=1.84 + 1e-9).contains(&ratio),
        format!("best T_ERD = {ratio:.3}/fd with 500 units in {:.1} s", start.elapsed().as_secs_f64()),
    )
}

fn ac4_xcorr_median() -> Outcome {
    let p = DesignParams::default();
    let units: Vec<Unit> = (0..100)
        .map(|i| generate_unit(&p.with_seed(derive_seed(4, i)), p.rectangular_terd()).unwrap())
        .collect();
    let pairs = max_cross_correlations(&units);
    let values: Vec<f64> = pairs.iter().map(|c| c.max_abs_xcorr).collect();
    let med = median(&values).unwrap();
    outcome(
        (0.06..=0.12).contains(&med),
        format!("median max|xcorr| {med:.4} over {} pairs", pairs.len()),
    )
}

/// Pulse power over background power with +-20 samples masked around every pulse.
fn pulse_to_background(x: &[f64], n_o: usize, from: usize, to: usize) -> (f64, f64) {
    let (mut pulse, mut n_pulse, mut bg, mut n_bg) = (0.0, 0usize, 0.0, 0usize);
    for (n, &v) in x.iter().enumerate().take(to).skip(from) {
        let off = n % n_o;
        let dist = off.min(n_o - off);
        if dist == 0 {
            pulse += v * v;
            n_pulse += 1;
        } else if dist > 20 {
            bg += v * v;
            n_bg += 1;
        }
    }
    (pulse / n_pulse as f64, bg / n_bg as f64)
}

fn ac5_compression_background() -> Outcome {
    let fs = 44100.0;
    let t_erd = 0.2;
    let units = std::array::from_fn(|m| {
        generate_unit::<f64>(&DesignParams::for_terd(fs, t_erd, derive_seed(5, m as u64)), t_erd).unwrap()
    });
    let n_o = units[0].len();
    let n_repeats = default_repeats(2);
    let (x, set) = build_test_signal(units, n_o, n_repeats).unwrap();
    let q = compress(&x, &set.units).unwrap();
    let r = orthogonalize(&q, &set.weights, n_o);
    let (from, to) = (2 * n_o, (n_repeats - 9) * n_o);
    let (pq, bq) = pulse_to_background(&q.q[0], n_o, from, to);
    let (pr, br) = pulse_to_background(&r[0], n_o, from, to);
    let ratio_q = 10.0 * (pq / bq).log10();
    let drop = 10.0 * (bq / br).log10();
    outcome(
        (40.0..=50.0).contains(&ratio_q) && drop >= 20.0,
        format!(
            "q1 pulse/background {ratio_q:.1} dB, r_itr1 background {drop:.1} dB below q1 (pulse/background {:.1} dB)",
            10.0 * (pr / br).log10()
        ),
    )
}

fn ac6_orthogonality() -> Outcome {
    let mut inner_ok = true;
    for i in 0..4 {
        for j in 0..4 {
            inner_ok &= B4.inner(i, j) == if i == j { 8 } else { 0 };
        }
    }
    let delta = || {
        unit_from_sections::<f64>(
            Vec::new(),
            UnitSpec {
                design: DesignParams::default(),
                t_erd_s: 1e-3,
                short: None,
            },
        )
        .unwrap()
    };
    let units = [delta(), delta(), delta(), delta()];
    let n_o = 64;
    let n_repeats = 48;
    let mut worst = 0.0f64;
    for src in 0..4 {
        let x = build_sequence(&units[src].samples, B4.row(src), n_o, n_repeats).unwrap();
        let q = compress(&x, &units).unwrap();
        let r = orthogonalize(&q, &B4, n_o);
        let own = r[src].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for rm in r.iter().enumerate().filter(|(m, _)| *m != src).map(|(_, rm)| rm) {
            // every window with all eight copies present
            let valid = &rm[n_o..(n_repeats - 8) * n_o];
            worst = worst.max(valid.iter().fold(0.0f64, |a, v| a.max(v.abs())) / own);
        }
    }
    outcome(
        inner_ok && worst <= 1e-10,
        format!("B4 inner products exact: {inner_ok}; worst delta-unit leakage {worst:.2e}"),
    )
}

fn measurement_set(t_erd: f64, seed: u64, cycles: usize) -> (Vec<f64>, SequenceSet<f64>) {
    let fs = 44100.0;
    let units = std::array::from_fn(|m| {
        generate_unit::<f64>(&DesignParams::for_terd(fs, t_erd, derive_seed(seed, m as u64)), t_erd).unwrap()
    });
    let n_o = (t_erd * fs).round() as usize;
    build_test_signal(units, n_o, default_repeats(cycles)).unwrap()
}

fn decaying_fir(taps: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * (-(i as f64) / 300.0).exp()
        })
        .collect();
    h[0] = 1.0;
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= norm);
    h
}

/// SNR of `estimate` against `truth` at the best integer lag, unit gain.
fn aligned_snr(truth: &[f64], estimate: &[f64]) -> (f64, usize) {
    let et: f64 = truth.iter().map(|v| v * v).sum();
    (0..estimate.len().saturating_sub(truth.len()) + 1)
        .map(|lag| {
            let err: f64 = (0..estimate.len())
                .map(|i| {
                    let t = if i >= lag && i - lag < truth.len() { truth[i - lag] } else { 0.0 };
                    (estimate[i] - t).powi(2)
                })
                .sum();
            (10.0 * (et / err).log10(), lag)
        })
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
}

fn ac7_end_to_end() -> Outcome {
    let (x, set) = measurement_set(0.1, 7, 4);
    let h = decaying_fir(2048, 70);
    let cfg = AnalysisConfig::default();
    let mut slowest = 0.0f64;
    let mut timed = |sys: &VirtualSystem| {
        let start = Instant::now();
        let (y, sil) = run(sys, &x, set.fs).unwrap();
        let res = decompose(&y, Some(&sil), &set, &cfg).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        res
    };
    let base = VirtualSystem {
        lti_ir: h.clone(),
        latency_samples: 37,
        ..VirtualSystem::identity()
    };
    let clean = timed(&base);
    let (snr, _) = aligned_snr(&h, &clean.lti_raw);

    let levels: Vec<f64> = [0.0, 0.01, 0.03, 0.1]
        .iter()
        .map(|&c3| {
            let sys = VirtualSystem {
                nl_coeffs: vec![1.0, 0.0, c3],
                ..base.clone()
            };
            timed(&sys).nonl_ti_total_db
        })
        .collect();
    let monotone = levels.windows(2).all(|w| w[1] > w[0]);

    let noisy = timed(&VirtualSystem {
        noise_level_db: Some(-40.0),
        noise_seed: 77,
        ..base.clone()
    });
    let rntv = noisy.rntv_noise_db;
    outcome(
        snr >= 40.0 && monotone && (rntv + 40.0).abs() <= 3.0 && slowest < 60.0,
        format!(
            "LTI-L SNR {snr:.1} dB; nonl-TI {:?} dB for c3 0/0.01/0.03/0.1; RNTV {rntv:.2} dB for -40 dB noise; slowest case {slowest:.1} s",
            levels.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>()
        ),
    )
}

fn ac8_sync_average_gain() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for n_cycles in [4usize, 16] {
        let (_, set) = measurement_set(0.02, 8, n_cycles);
        let n_o = set.n_o;
        let len = set.test_signal().len();
        let mut rng = ChaCha8Rng::seed_from_u64(80 + n_cycles as u64);
        let noise: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q = compress(&noise, &set.units).unwrap();
        let r = orthogonalize(&q, &set.weights, n_o);
        let n_ini = 8 * n_o;
        let omega: Vec<usize> = (0..n_cycles).collect();
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        let single: f64 = (omega
            .iter()
            .map(|&c| rms(&synchronous_average(&r[0], n_ini, n_o, &[c]).unwrap()).powi(2))
            .sum::<f64>()
            / n_cycles as f64)
            .sqrt();
        let averaged = rms(&synchronous_average(&r[0], n_ini, n_o, &omega).unwrap());
        let gain = single / averaged;
        let expect = (n_cycles as f64).sqrt();
        pass &= (gain / expect - 1.0).abs() <= 0.2;
        details.push(format!("#Omega {n_cycles}: {gain:.2} (expect {expect:.0})"));
    }
    outcome(pass, format!("noise-floor reduction {}", details.join(", ")))
}

fn ac9_augmentation() -> Outcome {
    let fs = 44100.0;
    let base = DesignParams::for_terd(fs, DEFAULT_AUGMENT_TERD_S, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let noise: Vec<f64> = (0..44100).map(|_| rng.random_range(-0.5..0.5)).collect();
    let (_, rep) = augment(&noise, &base, DEFAULT_AUGMENT_TERD_S, 8).unwrap();
    let worst_delta = (0..8).map(|i| rep.spectral_delta_max_db(i)).fold(0.0, f64::max);
    let worst_energy = rep.energy_ratio.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));

    // vowel surrogate: glottal-like positive pulse train at 120 Hz exciting one damped formant
    let two_pi = 2.0 * std::f64::consts::PI;
    let vowel: Vec<f64> = (0..44100)
        .map(|n| {
            let k = n % 368;
            let t = k as f64 / fs;
            f64::from(k == 0) + 0.3 * (-t * 300.0).exp() * (two_pi * 600.0 * t).sin()
        })
        .collect();
    let (_, vrep) = augment(&vowel, &base.with_seed(91), DEFAULT_AUGMENT_TERD_S, 8).unwrap();
    let skew_ok = vrep.skewness.iter().all(|s| s.abs() < vrep.input_skewness.abs());
    let worst_skew = vrep.skewness.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    // informational: formant ringing alone is narrowband and only changes sign at random
    let ringing: Vec<f64> = (0..44100)
        .map(|n| {
            let t = (n % 368) as f64 / fs;
            (-t * 400.0).exp() * (two_pi * 700.0 * t).cos() + 0.5 * (-t * 600.0).exp() * (two_pi * 1200.0 * t).cos()
        })
        .collect();
    let (_, rrep) = augment(&ringing, &base.with_seed(91), DEFAULT_AUGMENT_TERD_S, 8).unwrap();
    let ringing_mean = rrep.skewness.iter().map(|s| s.abs()).sum::<f64>() / 8.0;

    let identity = unit_from_sections::<f64>(
        Vec::new(),
        UnitSpec {
            design: base.clone(),
            t_erd_s: DEFAULT_AUGMENT_TERD_S,
            short: None,
        },
    )
    .unwrap();
    let (same, _) = augment_with_units(&noise, fs, &[identity]).unwrap();
    let bit_exact = same[0].iter().zip(&noise).all(|(a, b)| a.to_bits() == b.to_bits());
    outcome(
        worst_delta <= 0.5 && worst_energy <= 0.01 && skew_ok && bit_exact,
        format!(
            "max band deviation {worst_delta:.3} dB, max energy error {:.3}%, pulse-train skewness {:.2} -> max {worst_skew:.2} \
             (ringing-only {:.2} -> mean {ringing_mean:.2}, not asserted), identity bit-exact: {bit_exact}",
            100.0 * worst_energy,
            vrep.input_skewness,
            rrep.input_skewness
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_capricep"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn ac10_reproducibility() -> Outcome {
    let script: &[&[&str]] = &[
        &["design", "--seed", "3", "--fd", "200", "--out-dir", "design"],
        &["design", "--seed", "3", "--composite", "--format", "pcm24", "--out-dir", "composite"],
        &["optimize", "--seed", "3", "--fd", "200", "--n-units", "8", "--cmag", "1,1.5", "--out-dir", "opt"],
        &["xcorr-stats", "--seed", "3", "--fd", "200", "--count", "8", "--out-dir", "xcorr"],
        &["make-signal", "--seed", "3", "--terd-ms", "20", "--cycles", "3", "--out-dir", "sig"],
        &[
            "simulate", "--seed", "3", "--input", "sig/test_signal.wav", "--nl", "1,0,0.05", "--noise-db", "-50",
            "--latency", "9", "--out-dir", "sim",
        ],
        &[
            "analyze", "--session", "sig/test_signal.json", "--recording", "sim/response.wav", "--silence",
            "sim/silence.wav", "--out-dir", "ana",
        ],
        &["augment", "--seed", "3", "--input", "sim/silence.wav", "--variants", "2", "--format", "pcm16", "--out-dir", "aug"],
    ];
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let ok = script.iter().all(|args| run_cli(dir.path(), args));
            (ok, snapshot(dir.path()))
        })
        .collect();
    let all_ok = runs.iter().all(|r| r.0);
    let identical = runs[0].1 == runs[1].1;
    outcome(
        all_ok && identical && !runs[0].1.is_empty(),
        format!(
            "{} subcommand runs succeeded: {all_ok}; {} output files byte-identical: {identical}",
            script.len(),
            runs[0].1.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("all-pass exactness", ac1_allpass_exactness),
        ("section count", ac2_section_count),
        ("T_ERD optimum", ac3_terd_optimum),
        ("cross-correlation median", ac4_xcorr_median),
        ("compression background", ac5_compression_background),
        ("orthogonality", ac6_orthogonality),
        ("end-to-end decomposition", ac7_end_to_end),
        ("synchronous-averaging gain", ac8_sync_average_gain),
        ("augmentation", ac9_augmentation),
        ("CLI reproducibility", ac10_reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let o = std::panic::catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked".into()));
        println!("{id} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
