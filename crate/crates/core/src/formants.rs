//! LPC formant tracking with an RMS gate.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod audio;
pub mod lpc;

pub use audio::{read_wav, synth_vowel, write_wav, SampleFormat, VowelSpec};
pub use lpc::{
    autocorrelation, formants_from_lpc, hamming, levinson_durbin, lpc_coefficients, lpc_envelope, preemphasize,
    to_db, AudioScalar, EnvelopeEngine, Formant, Lpc, DB_FLOOR,
};

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    pub frame_size: usize,
    pub hop_size: usize,
    pub lpc_order: usize,
    pub preemphasis: f64,
    /// RMS gate in dBFS; a full-scale sine measures about -3.01.
    pub threshold_db: f64,
    pub max_formants: usize,
    pub max_bandwidth_hz: f64,
    /// FFT length of the spectral envelope.
    pub n_fft: usize,
}

impl AnalysisConfig {
    /// Conventional speech defaults for a sample rate: 25 ms frames, 10 ms
    /// hop, order 2 + kHz, pre-emphasis 0.97, gate at -40 dBFS.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        Self {
            sample_rate,
            frame_size: (sr * 0.025).round() as usize,
            hop_size: (sr * 0.010).round() as usize,
            lpc_order: 2 + (sr / 1000.0).round() as usize,
            preemphasis: 0.97,
            threshold_db: -40.0,
            max_formants: 4,
            max_bandwidth_hz: 400.0,
            n_fft: 512,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sample_rate < 1000 {
            return Err(invalid("sample_rate", "must be at least 1000 Hz"));
        }
        if self.lpc_order < 2 {
            return Err(invalid("lpc_order", "must be at least 2"));
        }
        if self.frame_size < self.lpc_order + 1 {
            return Err(invalid("frame_size", format!("must be at least lpc_order + 1 = {}", self.lpc_order + 1)));
        }
        if self.hop_size == 0 || self.hop_size > self.frame_size {
            return Err(invalid("hop_size", "must be between 1 and frame_size"));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(invalid("preemphasis", "must be in [0, 1)"));
        }
        if !self.threshold_db.is_finite() {
            return Err(invalid("threshold_db", "must be finite"));
        }
        if self.max_formants == 0 {
            return Err(invalid("max_formants", "must be at least 1"));
        }
        if !(self.max_bandwidth_hz > 0.0) || !self.max_bandwidth_hz.is_finite() {
            return Err(invalid("max_bandwidth_hz", "must be positive"));
        }
        if self.n_fft < 256 || !self.n_fft.is_power_of_two() {
            return Err(invalid("n_fft", "must be a power of two >= 256"));
        }
        Ok(())
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self::for_sample_rate(16000)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormantFrame {
    /// Start of the frame, ms from the start of the stream.
    pub t_ms: f64,
    pub rms_db: f64,
    pub voiced: bool,
    pub formants: Vec<Formant>,
    pub envelope_db: Vec<f64>,
}

impl FormantFrame {
    pub fn formant(&self, k: usize) -> Option<f64> {
        self.formants.get(k).map(|f| f.freq_hz)
    }
}

/// Streaming analyser: buffers samples and emits one frame per hop once a
/// full frame is available.
pub struct Tracker<T: AudioScalar = f64> {
    config: AnalysisConfig,
    window: Vec<T>,
    envelope: EnvelopeEngine<T>,
    pending: Vec<T>,
    frames_emitted: u64,
    root_failures: u64,
    emphasized: Vec<T>,
}

impl<T: AudioScalar> Tracker<T> {
    pub fn new(config: AnalysisConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            window: hamming(config.frame_size),
            envelope: EnvelopeEngine::new(config.n_fft),
            pending: Vec::with_capacity(config.frame_size * 2),
            frames_emitted: 0,
            root_failures: 0,
            emphasized: Vec::with_capacity(config.frame_size),
            config,
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    /// Frames whose root finding failed; they carry no formants.
    pub fn root_failures(&self) -> u64 {
        self.root_failures
    }

    /// Appends samples and returns every frame that became complete.
    pub fn push(&mut self, samples: &[T]) -> Vec<FormantFrame> {
        self.pending.extend_from_slice(samples);
        let (n, hop) = (self.config.frame_size, self.config.hop_size);
        let mut out = Vec::new();
        let mut start = 0;
        while self.pending.len() - start >= n {
            let t_ms = self.frames_emitted as f64 * hop as f64 * 1000.0 / self.config.sample_rate as f64;
            let frame = self.pending[start..start + n].to_vec();
            out.push(self.analyze(&frame, t_ms));
            self.frames_emitted += 1;
            start += hop;
        }
        self.pending.drain(..start);
        out
    }

    /// Analyses one frame of exactly `frame_size` samples.
    pub fn analyze(&mut self, frame: &[T], t_ms: f64) -> FormantFrame {
        assert_eq!(frame.len(), self.config.frame_size);
        let c = &self.config;
        let ms = frame.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / frame.len() as f64;
        let rms_db = to_db(ms.sqrt());

        lpc::preemphasize_into(frame, T::lit(c.preemphasis), &mut self.emphasized);
        for (v, &w) in self.emphasized.iter_mut().zip(&self.window) {
            *v = *v * w;
        }
        let l = lpc_coefficients(&self.emphasized, c.lpc_order);
        let mut envelope_db = Vec::with_capacity(c.n_fft / 2 + 1);
        self.envelope.envelope_into(&l.coefficients, l.gain, &mut envelope_db);

        let voiced = rms_db >= c.threshold_db && !l.silent;
        let formants = if voiced {
            match formants_from_lpc(&l.coefficients, c.sample_rate as f64, c.max_bandwidth_hz, c.max_formants) {
                Some(f) => f,
                None => {
                    self.root_failures += 1;
                    Vec::new()
                }
            }
        } else {
            Vec::new()
        };
        FormantFrame {
            t_ms,
            rms_db,
            voiced,
            formants,
            envelope_db,
        }
    }
}

/// Offline tracking of a whole signal; trailing samples shorter than a
/// frame are ignored.
pub fn track<T: AudioScalar>(samples: &[T], config: &AnalysisConfig) -> Result<Vec<FormantFrame>, ConfigError> {
    let mut t = Tracker::new(config.clone())?;
    Ok(t.push(samples))
}

/// Header of the frame CSV.
pub const FRAME_CSV_HEADER: &str = "t_ms,rms_db,voiced,f1,b1,f2,b2,f3,b3,f4,b4";

#[derive(Debug, Error)]
pub enum FrameCsvError {
    #[error("frame CSV line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes frames as CSV; missing formants are empty fields and the
/// envelope is not stored.
pub fn write_frames_csv<W: Write>(frames: &[FormantFrame], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{FRAME_CSV_HEADER}")?;
    for f in frames {
        write!(w, "{},{},{}", f.t_ms, f.rms_db, u8::from(f.voiced))?;
        for k in 0..4 {
            match f.formants.get(k) {
                Some(p) => write!(w, ",{},{}", p.freq_hz, p.bandwidth_hz)?,
                None => write!(w, ",,")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_frames_csv<R: Read>(mut r: R) -> Result<Vec<FormantFrame>, FrameCsvError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == FRAME_CSV_HEADER => {}
        _ => {
            return Err(FrameCsvError::Parse {
                line: 1,
                message: format!("expected header {FRAME_CSV_HEADER}"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| FrameCsvError::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 11 {
            return Err(err(format!("expected 11 fields, found {}", f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| err(format!("field {} is not a number", k + 1)));
        let voiced = match f[2] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(err(format!("voiced must be 0 or 1, got {other:?}"))),
        };
        let mut formants = Vec::new();
        for k in 0..4 {
            let (a, b) = (f[3 + 2 * k], f[4 + 2 * k]);
            match (a.is_empty(), b.is_empty()) {
                (true, true) => {}
                (false, false) => formants.push(Formant {
                    freq_hz: num(3 + 2 * k)?,
                    bandwidth_hz: num(4 + 2 * k)?,
                }),
                _ => return Err(err(format!("formant {} has only one of frequency and bandwidth", k + 1))),
            }
        }
        out.push(FormantFrame {
            t_ms: num(0)?,
            rms_db: num(1)?,
            voiced,
            formants,
            envelope_db: Vec::new(),
        });
    }
    Ok(out)
}

/// Median of the finite values, `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Converts samples between scalar types.
pub fn cast_samples<A: Scalar, B: Scalar>(x: &[A]) -> Vec<B> {
    x.iter().map(|&v| B::lit(v.as_f64())).collect()
}
