//! Mono audio signals and WAV input/output.
//!
//! Every recording is reduced to a single channel of `f64` samples in
//! `[-1.0, 1.0]` at its native sample rate. Nothing is resampled; time
//! parameters given in milliseconds are converted per file with
//! [`ms_to_samples`].

use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("WAV file contains no sample frames")]
    EmptySignal,
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
}

/// A recorded typing sound: mono samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns a copy of `range`, clipped to the signal bounds.
    pub fn slice(&self, range: std::ops::Range<usize>) -> AudioSignal {
        let end = range.end.min(self.samples.len());
        let start = range.start.min(end);
        AudioSignal {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Converts a duration in milliseconds to a whole number of samples,
/// rounding to nearest.
pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    debug_assert!(ms >= 0.0);
    (ms * sample_rate as f64 / 1000.0).round().max(0.0) as usize
}

pub fn samples_to_ms(samples: usize, sample_rate: u32) -> f64 {
    samples as f64 * 1000.0 / sample_rate as f64
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
            AudioError::MalformedContainer(format!("truncated chunk: {e}"))
        }
        hound::Error::IoError(e) => AudioError::MalformedContainer(e.to_string()),
        hound::Error::FormatError(msg) => AudioError::MalformedContainer(msg.to_string()),
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding("compressed or unknown format tag".into())
        }
        hound::Error::TooWide => {
            AudioError::UnsupportedEncoding("sample width exceeds 32 bits".into())
        }
        other => AudioError::MalformedContainer(other.to_string()),
    }
}

/// Loads a PCM (8/16/24/32-bit integer) or 32-bit float WAV file with one or
/// two channels and returns it as a mono signal.
///
/// Stereo frames are down-mixed by the arithmetic mean of both channels.
/// Integer samples are scaled by the magnitude of the most negative value of
/// their type, so a 16-bit sample of `-32768` becomes exactly `-1.0`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal, AudioError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_wav(io::BufReader::new(file))
}

/// Same as [`load_wav`], reading from any byte source.
pub fn read_wav<R: io::Read>(reader: R) -> Result<AudioSignal, AudioError> {
    let mut reader = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels (only mono and stereo are accepted)",
            spec.channels
        )));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::MalformedContainer("sample rate of 0".into()));
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
                return Err(AudioError::UnsupportedEncoding(format!(
                    "{}-bit integer PCM",
                    spec.bits_per_sample
                )));
            }
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
                .map_err(map_hound)?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(AudioError::UnsupportedEncoding(format!(
                    "{}-bit float",
                    spec.bits_per_sample
                )));
            }
            reader
                .samples::<f32>()
                .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
                .collect::<Result<_, _>>()
                .map_err(map_hound)?
        }
    };

    let channels = spec.channels as usize;
    if !interleaved.len().is_multiple_of(channels) {
        return Err(AudioError::MalformedContainer(
            "data chunk ends mid-frame".into(),
        ));
    }
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|frame| (frame[0] + frame[1]) / 2.0)
            .collect()
    };
    if mono.is_empty() {
        return Err(AudioError::EmptySignal);
    }
    AudioSignal::new(mono, spec.sample_rate)
}

fn to_i16(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes a signal as 16-bit PCM mono WAV.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<(), AudioError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let io_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.display().to_string(),
            source,
        },
        other => map_hound(other),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(io_err)?;
    for &s in &signal.samples {
        writer.write_sample(to_i16(s)).map_err(io_err)?;
    }
    writer.finalize().map_err(io_err)
}
