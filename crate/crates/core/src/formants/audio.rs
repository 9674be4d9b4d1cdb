//! PCM WAV input/output and a source-filter vowel synthesiser.

use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("WAV: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int16,
    Float32,
}

/// Reads the first channel of a PCM WAV file (integer or 32-bit float) as
/// samples in [-1, 1], with its sample rate.
pub fn read_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<(Vec<T>, u32), AudioError> {
    let mut r = hound::WavReader::open(path)?;
    let spec = r.spec();
    let ch = spec.channels.max(1) as usize;
    let samples: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => r
            .samples::<f32>()
            .step_by(ch)
            .map(|s| s.map(|v| T::lit(v as f64)))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ 8..=32) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            r.samples::<i32>()
                .step_by(ch)
                .map(|s| s.map(|v| T::lit(v as f64 * scale)))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => return Err(AudioError::Unsupported(format!("{fmt:?} with {bits} bits"))),
    };
    Ok((samples, spec.sample_rate))
}

/// Writes mono samples; 16-bit output is clipped to [-1, 1].
pub fn write_wav<T: Scalar>(path: impl AsRef<Path>, samples: &[T], sample_rate: u32, format: SampleFormat) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: match format {
            SampleFormat::Int16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Int16 => hound::SampleFormat::Int,
            SampleFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        let v = s.as_f64();
        match format {
            SampleFormat::Int16 => w.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16)?,
            SampleFormat::Float32 => w.write_sample(v as f32)?,
        }
    }
    w.finalize()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VowelSpec {
    pub sample_rate: u32,
    pub f0_hz: f64,
    /// Resonance frequencies, Hz.
    pub formants_hz: Vec<f64>,
    pub bandwidths_hz: Vec<f64>,
    /// Peak absolute amplitude of the output.
    pub peak: f64,
}

impl VowelSpec {
    pub fn new(sample_rate: u32, formants: [f64; 3]) -> Self {
        Self {
            sample_rate,
            f0_hz: 110.0,
            formants_hz: formants.to_vec(),
            bandwidths_hz: vec![80.0, 100.0, 140.0],
            peak: 0.5,
        }
    }
}

/// Impulse train at `f0` through a one-pole glottal low-pass and a cascade
/// of unity-DC-gain two-pole resonators.
pub fn synth_vowel<T: Scalar>(spec: &VowelSpec, seconds: f64) -> Vec<T> {
    let sr = spec.sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let period = sr / spec.f0_hz;
    let mut x = vec![0.0f64; n];
    let mut next = 0.0;
    while (next as usize) < n {
        x[next as usize] = 1.0;
        next += period;
    }
    let mut prev = 0.0;
    for v in x.iter_mut() {
        prev = *v + 0.9 * prev;
        *v = prev;
    }
    for (&f, &bw) in spec.formants_hz.iter().zip(&spec.bandwidths_hz) {
        let r = (-std::f64::consts::PI * bw / sr).exp();
        let c1 = 2.0 * r * (2.0 * std::f64::consts::PI * f / sr).cos();
        let c2 = -r * r;
        let g = 1.0 - c1 - c2;
        let (mut y1, mut y2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = g * *v + c1 * y1 + c2 * y2;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k = if peak > 0.0 { spec.peak / peak } else { 0.0 };
    x.into_iter().map(|v| T::lit(v * k)).collect()
}
