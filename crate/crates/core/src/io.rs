//! WAV, JSON and CSV plumbing shared by the command-line tool.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::{first_order_count, UnitCapricep, UnitSpec};
use crate::error::{Error, Result};
use crate::scalar::{cst, wide, Real};

/// Version of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    #[default]
    Float32,
    Pcm16,
    Pcm24,
}

impl WavFormat {
    fn spec(self, fs: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            WavFormat::Float32 => (32, SampleFormat::Float),
            WavFormat::Pcm16 => (16, SampleFormat::Int),
            WavFormat::Pcm24 => (24, SampleFormat::Int),
        };
        WavSpec {
            channels: 1,
            sample_rate: fs,
            bits_per_sample,
            sample_format,
        }
    }
}

impl std::str::FromStr for WavFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float32" | "f32" => Ok(WavFormat::Float32),
            "pcm16" | "s16" => Ok(WavFormat::Pcm16),
            "pcm24" | "s24" => Ok(WavFormat::Pcm24),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

fn integer_rate(fs: f64) -> Result<u32> {
    if fs > 0.0 && fs.fract() == 0.0 && fs <= u32::MAX as f64 {
        Ok(fs as u32)
    } else {
        Err(Error::InvalidParameter(format!("WAV needs an integer sample rate, got {fs}")))
    }
}

fn quantize(x: f64, bits: u32) -> i32 {
    let full = (1i64 << (bits - 1)) as f64;
    (x * full).round().clamp(-full, full - 1.0) as i32
}

/// Writes a mono WAV. PCM formats clip to the representable range.
pub fn write_wav<T: Real>(path: &Path, samples: &[T], fs: f64, format: WavFormat) -> Result<()> {
    let spec = format.spec(integer_rate(fs)?);
    let mut w = WavWriter::create(path, spec)?;
    match format {
        WavFormat::Float32 => {
            for &s in samples {
                w.write_sample(wide(s) as f32)?;
            }
        }
        WavFormat::Pcm16 | WavFormat::Pcm24 => {
            let bits = spec.bits_per_sample as u32;
            for &s in samples {
                w.write_sample(quantize(wide(s), bits))?;
            }
        }
    }
    w.finalize()?;
    Ok(())
}

/// Decoded mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct Audio<T> {
    pub samples: Vec<T>,
    pub fs: f64,
    pub format: WavFormat,
}

/// Reads a mono WAV written in one of the supported formats.
pub fn read_wav<T: Real>(path: &Path) -> Result<Audio<T>> {
    let reader = WavReader::new(BufReader::new(File::open(path)?))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedChannels(spec.channels));
    }
    let (format, samples) = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => {
            let s = reader
                .into_samples::<f32>()
                .map(|v| v.map(|x| cst::<T>(x as f64)))
                .collect::<std::result::Result<Vec<T>, _>>()?;
            (WavFormat::Float32, s)
        }
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let full = (1i64 << (bits - 1)) as f64;
            let s = reader
                .into_samples::<i32>()
                .map(|v| v.map(|x| cst::<T>(x as f64 / full)))
                .collect::<std::result::Result<Vec<T>, _>>()?;
            let fmt = if bits == 16 { WavFormat::Pcm16 } else { WavFormat::Pcm24 };
            (fmt, s)
        }
        (f, b) => return Err(Error::UnsupportedFormat(format!("{f:?} {b}-bit"))),
    };
    Ok(Audio {
        samples,
        fs: spec.sample_rate as f64,
        format,
    })
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Writes `rows` as CSV with a header taken from the field names.
pub fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

/// Everything needed to regenerate a test signal and analyze its recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMetadata {
    pub schema_version: u32,
    pub tool_version: String,
    pub fs: f64,
    /// Master seed; unit `m` uses `derive_seed(seed, m)`.
    pub seed: u64,
    pub units: Vec<UnitSpec>,
    pub n_o: usize,
    pub n_repeats: usize,
    /// Factor applied to the test signal before writing.
    pub scale: f64,
    pub format: WavFormat,
}

impl SessionMetadata {
    pub fn check_version(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::UnsupportedFormat(format!(
                "sidecar schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.units.len() != 4 {
            return Err(Error::InvalidParameter(format!(
                "session needs 4 units, sidecar has {}",
                self.units.len()
            )));
        }
        Ok(())
    }

    /// Regenerates the four units.
    pub fn units<T: Real>(&self) -> Result<[UnitCapricep<T>; 4]> {
        self.check_version()?;
        let u = |m: usize| self.units[m].generate::<T>();
        Ok([u(0)?, u(1)?, u(2)?, u(3)?])
    }
}

/// Sidecar written next to a single-unit WAV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSidecar {
    pub schema_version: u32,
    pub tool_version: String,
    pub unit: UnitSpec,
    pub length: usize,
    pub center_index: usize,
    pub sections: usize,
    pub first_order_sections: usize,
    pub truncation_loss: f64,
}

impl UnitSidecar {
    pub fn describe<T: Real>(unit: &UnitCapricep<T>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            unit: unit.spec.clone(),
            length: unit.len(),
            center_index: unit.center_index,
            sections: unit.sections.len(),
            first_order_sections: first_order_count(&unit.sections),
            truncation_loss: unit.truncation_loss,
        }
    }
}
