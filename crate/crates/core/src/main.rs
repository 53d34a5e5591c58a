use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use capricep::analyzer::{decompose, AnalysisConfig};
use capricep::augment::{augment, DEFAULT_AUGMENT_TERD_S, HISTOGRAM_BINS};
use capricep::design::{derive_seed, DesignParams, UnitSpec, RECT_TERD_RATIO};
use capricep::io::{
    read_json, read_wav, write_csv, write_json, write_wav, SessionMetadata, UnitSidecar, WavFormat,
    SCHEMA_VERSION, TOOL_VERSION,
};
use capricep::sequence::{build_test_signal, default_repeats, default_shift, normalize_peak};
use capricep::shape::{coarse_search, linear_grid, max_cross_correlations, median, optimize_terd};
use capricep::simulator::{run, Drift, VirtualSystem};
use capricep::{Error, Result};

#[derive(Parser)]
#[command(name = "capricep", version, about = "Randomized all-pass test signals and response analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 44100.0)]
    fs: f64,
    /// Average center-frequency spacing in Hz (default 40, or 1.736 / T_ERD).
    #[arg(long)]
    fd: Option<f64>,
    /// Rectangular duration in ms (default 1.736 / fd).
    #[arg(long = "terd-ms")]
    terd_ms: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

impl Common {
    fn design(&self, default_fd: f64) -> (DesignParams, f64) {
        let fd = match (self.fd, self.terd_ms) {
            (Some(fd), _) => fd,
            (None, Some(ms)) => RECT_TERD_RATIO / (ms * 1e-3),
            (None, None) => default_fd,
        };
        let p = DesignParams {
            fs: self.fs,
            fd,
            seed: self.seed,
            ..DesignParams::default()
        };
        let t_erd = self.terd_ms.map(|ms| ms * 1e-3).unwrap_or_else(|| p.rectangular_terd());
        (p, t_erd)
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(name))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one unit pulse as WAV plus a JSON sidecar.
    Design {
        #[command(flatten)]
        common: Common,
        /// Prepend the short raised-cosine design.
        #[arg(long)]
        composite: bool,
        #[arg(long, default_value = "float32")]
        format: WavFormat,
        #[arg(long, default_value = "unit")]
        name: String,
    },
    /// Search the rectangular duration (or cmag x alpha) by Wasserstein distance.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-units", default_value_t = 100)]
        n_units: usize,
        /// Grid of durations as multiples of 1/fd.
        #[arg(long, default_value_t = 1.0)]
        start: f64,
        #[arg(long, default_value_t = 2.5)]
        stop: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Also rank cmag x alpha cells (comma-separated grids).
        #[arg(long, value_delimiter = ',')]
        cmag: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
    },
    /// Pairwise maximum cross-correlation over an ensemble of units.
    XcorrStats {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Build the three-sequence test signal and its session sidecar.
    MakeSignal {
        #[command(flatten)]
        common: Common,
        /// Repetition shift in samples (default: one T_ERD).
        #[arg(long = "n-o")]
        n_o: Option<usize>,
        /// Number of averaged 8-cycles.
        #[arg(long, default_value_t = 4)]
        cycles: usize,
        /// Peak level of the written signal.
        #[arg(long, default_value_t = 0.5)]
        peak: f64,
        #[arg(long)]
        composite: bool,
        #[arg(long, default_value = "float32")]
        format: WavFormat,
    },
    /// Play a WAV through a virtual system.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// JSON system description; overrides the individual flags.
        #[arg(long)]
        system: Option<PathBuf>,
        /// Impulse response as a mono WAV.
        #[arg(long = "ir")]
        ir: Option<PathBuf>,
        /// Polynomial coefficients c1,c2,... of the memoryless nonlinearity.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        nl: Vec<f64>,
        #[arg(long = "noise-db", allow_negative_numbers = true)]
        noise_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        latency: usize,
        #[arg(long = "drift-period")]
        drift_period: Option<f64>,
        #[arg(long = "drift-depth", default_value_t = 0.0)]
        drift_depth: f64,
    },
    /// Decompose a recording made with a `make-signal` session.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        recording: PathBuf,
        /// Pre-measurement silence recorded through the same chain.
        #[arg(long)]
        silence: Option<PathBuf>,
        #[arg(long = "max-latency")]
        max_latency: Option<usize>,
    },
    /// Filter a WAV with randomly drawn units.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        variants: usize,
        #[arg(long, default_value = "float32")]
        format: WavFormat,
    },
}

#[derive(Serialize)]
struct TerdRow {
    t_erd_s: f64,
    t_erd_fd: f64,
    distance_s: f64,
    best: bool,
}

#[derive(Serialize)]
struct BandRow {
    freq_hz: f64,
    lti_l_db: f64,
    lti_s_db: f64,
    nonl_ti_db: f64,
    rntv_db: f64,
    pre_bg_db: Option<f64>,
    rntv_corrected_db: Option<f64>,
}

#[derive(Serialize)]
struct AnalysisSummary {
    schema_version: u32,
    tool_version: String,
    fs: f64,
    n_o: usize,
    n_ini: usize,
    scale: f64,
    latency_samples: usize,
    window_offset: isize,
    averaged_cycles: usize,
    nonl_ti_total_db: f64,
    rntv_total_db: f64,
    /// Levels re full scale of the recording file.
    rntv_noise_dbfs: f64,
    pre_bg_noise_dbfs: Option<f64>,
}

#[derive(Serialize)]
struct AugmentRow {
    variant_id: usize,
    snr_db: f64,
    skewness: f64,
    spectral_delta_max_db: f64,
}

#[derive(Serialize)]
struct XcorrSummary {
    schema_version: u32,
    count: usize,
    pairs: usize,
    median_max_abs_xcorr: f64,
}

fn unit_spec(design: &DesignParams, t_erd: f64, composite: bool) -> UnitSpec {
    UnitSpec {
        design: design.clone(),
        t_erd_s: t_erd,
        short: composite.then(|| DesignParams::raised_cosine_short(design.fs, derive_seed(design.seed, u64::MAX))),
    }
}

fn read_mono(path: &Path) -> Result<capricep::io::Audio<f64>> {
    read_wav::<f64>(path)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Design {
            common,
            composite,
            format,
            name,
        } => {
            let (p, t_erd) = common.design(40.0);
            let unit = unit_spec(&p, t_erd, composite).generate::<f64>()?;
            write_wav(&common.out(&format!("{name}.wav"))?, &unit.samples, p.fs, format)?;
            write_json(&common.out(&format!("{name}.json"))?, &UnitSidecar::describe(&unit))?;
            println!("{} samples, {} sections", unit.len(), unit.sections.len());
        }
        Command::Optimize {
            common,
            n_units,
            start,
            stop,
            step,
            cmag,
            alpha,
        } => {
            let (p, _) = common.design(40.0);
            let ratios = linear_grid(start, stop, step);
            let grid: Vec<f64> = ratios.iter().map(|r| r / p.fd).collect();
            let s = optimize_terd(&p, &grid, n_units)?;
            let rows: Vec<TerdRow> = (0..grid.len())
                .map(|i| TerdRow {
                    t_erd_s: grid[i],
                    t_erd_fd: ratios[i],
                    distance_s: s.distances[i],
                    best: i == s.best_index,
                })
                .collect();
            write_csv(&common.out("optimize.csv")?, &rows)?;
            println!("best T_ERD {:.6} s = {:.3}/fd", s.best_t_erd, ratios[s.best_index]);
            if !cmag.is_empty() || !alpha.is_empty() {
                let cmag = if cmag.is_empty() { vec![p.cmag] } else { cmag };
                let alpha = if alpha.is_empty() { vec![p.alpha] } else { alpha };
                let cells = coarse_search(&cmag, &alpha, &p, n_units, &ratios)?;
                write_csv(&common.out("coarse.csv")?, &cells)?;
            }
        }
        Command::XcorrStats { common, count } => {
            if count < 2 {
                return Err(Error::InvalidParameter("count must be at least 2".into()));
            }
            let (p, t_erd) = common.design(40.0);
            let units = (0..count)
                .map(|i| capricep::design::generate_unit::<f64>(&p.with_seed(derive_seed(p.seed, i as u64)), t_erd))
                .collect::<Result<Vec<_>>>()?;
            let pairs = max_cross_correlations(&units);
            let values: Vec<f64> = pairs.iter().map(|c| c.max_abs_xcorr).collect();
            let med = median(&values).unwrap_or(f64::NAN);
            write_csv(&common.out("xcorr.csv")?, &pairs)?;
            write_json(
                &common.out("xcorr_summary.json")?,
                &XcorrSummary {
                    schema_version: SCHEMA_VERSION,
                    count,
                    pairs: pairs.len(),
                    median_max_abs_xcorr: med,
                },
            )?;
            println!("median max|xcorr| {med:.4} over {} pairs", pairs.len());
        }
        Command::MakeSignal {
            common,
            n_o,
            cycles,
            peak,
            composite,
            format,
        } => {
            let (p, t_erd) = common.design(40.0);
            let specs: Vec<UnitSpec> = (0..4)
                .map(|m| unit_spec(&p.with_seed(derive_seed(p.seed, m)), t_erd, composite))
                .collect();
            let n_o = n_o.unwrap_or_else(|| default_shift(p.fs, t_erd));
            let n_repeats = default_repeats(cycles);
            let mut meta = SessionMetadata {
                schema_version: SCHEMA_VERSION,
                tool_version: TOOL_VERSION.to_string(),
                fs: p.fs,
                seed: p.seed,
                units: specs,
                n_o,
                n_repeats,
                scale: 1.0,
                format,
            };
            let (mut signal, _) = build_test_signal(meta.units::<f64>()?, n_o, n_repeats)?;
            meta.scale = normalize_peak(&mut signal, peak);
            write_wav(&common.out("test_signal.wav")?, &signal, p.fs, format)?;
            write_json(&common.out("test_signal.json")?, &meta)?;
            println!("{} samples, n_o {n_o}, {n_repeats} repetitions", signal.len());
        }
        Command::Simulate {
            common,
            input,
            system,
            ir,
            nl,
            noise_db,
            latency,
            drift_period,
            drift_depth,
        } => {
            let audio = read_mono(&input)?;
            if audio.fs != common.fs {
                return Err(Error::SampleRateMismatch {
                    expected: common.fs,
                    actual: audio.fs,
                });
            }
            let sys = match system {
                Some(path) => read_json::<VirtualSystem>(&path)?,
                None => VirtualSystem {
                    lti_ir: match ir {
                        Some(path) => read_mono(&path)?.samples,
                        None => vec![1.0],
                    },
                    nl_coeffs: nl,
                    noise_level_db: noise_db,
                    drift: drift_period.map(|period_s| Drift {
                        period_s,
                        depth: drift_depth,
                    }),
                    latency_samples: latency,
                    noise_seed: common.seed,
                    pre_silence_s: 1.0,
                },
            };
            let (out, silence) = run(&sys, &audio.samples, audio.fs)?;
            write_wav(&common.out("response.wav")?, &out, audio.fs, WavFormat::Float32)?;
            write_wav(&common.out("silence.wav")?, &silence, audio.fs, WavFormat::Float32)?;
            write_json(&common.out("system.json")?, &sys)?;
        }
        Command::Analyze {
            common,
            session,
            recording,
            silence,
            max_latency,
        } => {
            let meta: SessionMetadata = read_json(&session)?;
            meta.check_version()?;
            let rec = read_mono(&recording)?;
            if rec.fs != meta.fs {
                return Err(Error::SampleRateMismatch {
                    expected: meta.fs,
                    actual: rec.fs,
                });
            }
            let inv = 1.0 / meta.scale;
            let y: Vec<f64> = rec.samples.iter().map(|v| v * inv).collect();
            let sil = match silence {
                Some(path) => {
                    let a = read_mono(&path)?;
                    if a.fs != meta.fs {
                        return Err(Error::SampleRateMismatch {
                            expected: meta.fs,
                            actual: a.fs,
                        });
                    }
                    Some(a.samples.iter().map(|v| v * inv).collect::<Vec<f64>>())
                }
                None => None,
            };
            let (_, set) = build_test_signal(meta.units::<f64>()?, meta.n_o, meta.n_repeats)?;
            let cfg = AnalysisConfig {
                max_latency,
                ..AnalysisConfig::default()
            };
            let res = decompose(&y, sil.as_deref(), &set, &cfg)?;
            // noise levels are computed on the unscaled signal
            let gain_db = 20.0 * meta.scale.log10();
            write_wav(&common.out("lti.wav")?, &res.lti_raw, meta.fs, WavFormat::Float32)?;
            let rows: Vec<BandRow> = res
                .bands
                .iter()
                .map(|b| BandRow {
                    freq_hz: b.freq_hz,
                    lti_l_db: b.lti_l_db,
                    lti_s_db: b.lti_s_db,
                    nonl_ti_db: b.nonl_ti_db,
                    rntv_db: b.rntv_db,
                    pre_bg_db: b.pre_bg_db,
                    rntv_corrected_db: b.rntv_corrected_db,
                })
                .collect();
            write_csv(&common.out("levels.csv")?, &rows)?;
            write_json(
                &common.out("analysis.json")?,
                &AnalysisSummary {
                    schema_version: SCHEMA_VERSION,
                    tool_version: TOOL_VERSION.to_string(),
                    fs: res.fs,
                    n_o: res.n_o,
                    n_ini: res.n_ini,
                    scale: meta.scale,
                    latency_samples: res.latency_samples,
                    window_offset: res.window_offset,
                    averaged_cycles: res.omega.len(),
                    nonl_ti_total_db: res.nonl_ti_total_db,
                    rntv_total_db: res.rntv_total_db,
                    rntv_noise_dbfs: res.rntv_noise_db + gain_db,
                    pre_bg_noise_dbfs: res.pre_bg_noise_db.map(|v| v + gain_db),
                },
            )?;
        }
        Command::Augment {
            common,
            input,
            variants,
            format,
        } => {
            let audio = read_mono(&input)?;
            let terd_ms = common.terd_ms.unwrap_or(DEFAULT_AUGMENT_TERD_S * 1e3);
            let c = Common {
                fs: audio.fs,
                terd_ms: Some(terd_ms),
                ..common.clone()
            };
            // terd_ms is always set here, so the fallback fd is unused
            let (p, t_erd) = c.design(0.0);
            let (outs, report) = augment(&audio.samples, &p, t_erd, variants)?;
            for (i, v) in outs.iter().enumerate() {
                write_wav(&common.out(&format!("variant_{i:04}.wav"))?, v, audio.fs, format)?;
            }
            let rows: Vec<AugmentRow> = (0..outs.len())
                .map(|i| AugmentRow {
                    variant_id: i,
                    snr_db: report.snr_db[i],
                    skewness: report.skewness[i],
                    spectral_delta_max_db: report.spectral_delta_max_db(i),
                })
                .collect();
            write_csv(&common.out("augment_report.csv")?, &rows)?;
            let mut w = csv::Writer::from_path(common.out("histograms.csv")?).map_err(csv_io)?;
            let mut header = vec!["bin_center".to_string(), "input".to_string()];
            header.extend((0..outs.len()).map(|i| format!("variant_{i}")));
            w.write_record(&header).map_err(csv_io)?;
            for b in 0..HISTOGRAM_BINS {
                let center = -1.0 + (2 * b + 1) as f64 / HISTOGRAM_BINS as f64;
                let mut rec = vec![format!("{center}"), report.input_histogram[b].to_string()];
                rec.extend(report.value_histograms.iter().map(|h| h[b].to_string()));
                w.write_record(&rec).map_err(csv_io)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
