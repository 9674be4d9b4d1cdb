//! Audio inputs for live analysis. Devices are named: `synth` cycles
//! through synthetic vowels, `silence` produces zeros, and `wav:<path>`
//! loops a file. Each plays at real-time rate inside the capture thread.

use std::path::PathBuf;

use thiserror::Error;
use tongue_core::formants::audio::AudioError;
use tongue_core::formants::{read_wav, synth_vowel, VowelSpec};

/// Built-in device names, reported by `list_devices`.
pub const BUILTIN_DEVICES: [&str; 2] = ["synth", "silence"];

/// Vowels (F1, F2, F3 in Hz) played in turn by the `synth` device.
pub const SYNTH_VOWELS: [[f64; 3]; 3] = [[700.0, 1100.0, 2400.0], [300.0, 2300.0, 3000.0], [650.0, 850.0, 2900.0]];

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("no audio device matches {0:?} (available: synth, silence, wav:<path>)")]
    NotFound(String),
    #[error("device name {0:?} is ambiguous")]
    Ambiguous(String),
    #[error("cannot open {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: AudioError,
    },
    #[error("{0} contains no samples")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Device {
    Synth,
    Silence,
    Wav(PathBuf),
}

/// Resolves a device name: `wav:` prefixed paths must exist, other names
/// select the unique built-in device containing them.
pub fn resolve_device(name: &str) -> Result<Device, DeviceError> {
    if let Some(path) = name.strip_prefix("wav:") {
        let path = PathBuf::from(path);
        if !path.is_file() {
            return Err(DeviceError::NotFound(name.to_string()));
        }
        return Ok(Device::Wav(path));
    }
    let needle = name.to_ascii_lowercase();
    let hits: Vec<&str> = BUILTIN_DEVICES.iter().copied().filter(|d| *d == needle || d.contains(&needle)).collect();
    match hits.as_slice() {
        [d] => Ok(builtin(d)),
        [] => Err(DeviceError::NotFound(name.to_string())),
        _ => match hits.iter().find(|d| **d == needle) {
            Some(d) => Ok(builtin(d)),
            None => Err(DeviceError::Ambiguous(name.to_string())),
        },
    }
}

fn builtin(name: &str) -> Device {
    if name == "synth" {
        Device::Synth
    } else {
        Device::Silence
    }
}

/// Endless sample stream for one device at a fixed sample rate.
pub struct Source {
    samples: Vec<f64>,
    pos: usize,
}

impl Source {
    pub fn open(device: &Device, sample_rate: u32) -> Result<Self, DeviceError> {
        let samples = match device {
            Device::Silence => vec![0.0; sample_rate as usize],
            Device::Synth => synth_loop(sample_rate),
            Device::Wav(path) => {
                let (x, sr) = read_wav::<f64>(path).map_err(|source| DeviceError::Wav {
                    path: path.clone(),
                    source,
                })?;
                if x.is_empty() {
                    return Err(DeviceError::Empty(path.clone()));
                }
                resample_linear(&x, sr, sample_rate)
            }
        };
        Ok(Self { samples, pos: 0 })
    }

    /// Fills `out` with the next samples, wrapping at the end.
    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.samples[self.pos];
            self.pos = (self.pos + 1) % self.samples.len();
        }
    }
}

/// 0.8 s of each synthetic vowel followed by 0.2 s of silence.
fn synth_loop(sample_rate: u32) -> Vec<f64> {
    let gap = vec![0.0; (sample_rate as f64 * 0.2).round() as usize];
    let mut out = Vec::new();
    for f in SYNTH_VOWELS {
        out.extend(synth_vowel::<f64>(&VowelSpec::new(sample_rate, f), 0.8));
        out.extend_from_slice(&gap);
    }
    out
}

pub fn resample_linear(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || x.len() < 2 {
        return x.to_vec();
    }
    let ratio = from as f64 / to as f64;
    let n = ((x.len() - 1) as f64 / ratio).floor() as usize + 1;
    (0..n)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = (pos.floor() as usize).min(x.len() - 1);
            let u = pos - i as f64;
            if u == 0.0 || i + 1 == x.len() {
                x[i]
            } else {
                x[i] + u * (x[i + 1] - x[i])
            }
        })
        .collect()
}
