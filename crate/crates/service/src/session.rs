//! Presentation state shared by all clients: analysis settings, formant
//! highlighting, display smoothing, and the mapping from tracker frames to
//! display frames.

use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;
use tongue_core::formants::{AnalysisConfig, ConfigError, FormantFrame};
use tongue_core::lut::LookupTable;
use tongue_core::TongueContour;

use crate::audio;
use crate::protocol::{ConfigPatch, ContourXY, DisplayFrame, EffectiveConfig, FormantXY, LutRanges, ServerMessage, ENVELOPE_POINTS};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {field}: {message}")]
pub struct ConfigRejection {
    pub field: String,
    pub message: String,
}

impl ConfigRejection {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl From<ConfigError> for ConfigRejection {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid { field, message } => Self::new(field, message),
        }
    }
}

/// What an accepted patch requires of the running engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applied {
    pub restart_engine: bool,
}

pub struct Session {
    config: AnalysisConfig,
    highlight: Vec<u8>,
    display_smoothing: f64,
    device: String,
    lut: Arc<LookupTable>,
    smoothed: Option<(f64, f64)>,
    scratch: TongueContour<f64>,
}

impl Session {
    pub fn new(config: AnalysisConfig, device: impl Into<String>, lut: Arc<LookupTable>) -> Result<Self, ConfigRejection> {
        config.validate()?;
        let device = device.into();
        audio::resolve_device(&device).map_err(|e| ConfigRejection::new("device", e.to_string()))?;
        let scratch = lut.query(0.0, 0.0);
        Ok(Self {
            config,
            highlight: Vec::new(),
            display_smoothing: 0.0,
            device,
            lut,
            smoothed: None,
            scratch,
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn highlight(&self) -> &[u8] {
        &self.highlight
    }

    pub fn lut(&self) -> &Arc<LookupTable> {
        &self.lut
    }

    pub fn effective_config(&self) -> EffectiveConfig {
        let h = &self.lut.header;
        EffectiveConfig {
            analysis: self.config.clone(),
            highlight: self.highlight.clone(),
            display_smoothing: self.display_smoothing,
            device: self.device.clone(),
            lut: LutRanges {
                f1_lo: h.f1.lo,
                f1_hi: h.f1.hi,
                f2_lo: h.f2.lo,
                f2_hi: h.f2.hi,
            },
        }
    }

    /// Validates the whole patch before changing anything; a rejected
    /// patch leaves the session untouched.
    pub fn apply_config(&mut self, patch: &ConfigPatch) -> Result<Applied, ConfigRejection> {
        let mut config = self.config.clone();
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = patch.$f.clone() {
                    config.$f = v;
                }
            )*};
        }
        set!(sample_rate, frame_size, hop_size, lpc_order, preemphasis, threshold_db, max_formants, max_bandwidth_hz, n_fft);
        config.validate()?;

        let highlight = match &patch.highlight {
            Some(h) => normalize_highlight(h)?,
            None => self.highlight.clone(),
        };
        let smoothing = patch.display_smoothing.unwrap_or(self.display_smoothing);
        if !(0.0..1.0).contains(&smoothing) {
            return Err(ConfigRejection::new("display_smoothing", "must be in [0, 1)"));
        }
        let device = match &patch.device {
            Some(d) => {
                audio::resolve_device(d).map_err(|e| ConfigRejection::new("device", e.to_string()))?;
                d.clone()
            }
            None => self.device.clone(),
        };

        let restart_engine = config != self.config || device != self.device;
        self.config = config;
        self.highlight = highlight;
        self.display_smoothing = smoothing;
        self.device = device;
        if restart_engine {
            self.smoothed = None;
        }
        Ok(Applied { restart_engine })
    }

    /// Forgets the smoothing history, as at the start of a new stream.
    pub fn reset(&mut self) {
        self.smoothed = None;
    }

    fn smooth(&mut self, f1: f64, f2: f64) -> (f64, f64) {
        let a = self.display_smoothing;
        if a == 0.0 {
            self.smoothed = Some((f1, f2));
            return (f1, f2);
        }
        let s = match self.smoothed {
            Some((s1, s2)) => (a * s1 + (1.0 - a) * f1, a * s2 + (1.0 - a) * f2),
            None => (f1, f2),
        };
        self.smoothed = Some(s);
        s
    }

    /// Builds the display frame for one tracker frame. The contour is
    /// present iff the frame is voiced and has both F1 and F2; unvoiced
    /// frames restart the smoothing.
    pub fn display_frame(&mut self, frame: &FormantFrame) -> DisplayFrame {
        let (contour, extrapolated) = match (frame.voiced, frame.formant(0), frame.formant(1)) {
            (true, Some(f1), Some(f2)) => {
                let (s1, s2) = self.smooth(f1, f2);
                self.lut.query_into(s1, s2, &mut self.scratch);
                (Some(contour_xy(&self.scratch)), self.scratch.extrapolated)
            }
            _ => {
                if !frame.voiced {
                    self.smoothed = None;
                }
                (None, false)
            }
        };
        DisplayFrame {
            t_ms: frame.t_ms,
            rms_db: frame.rms_db,
            voiced: frame.voiced,
            formants: frame
                .formants
                .iter()
                .map(|f| FormantXY {
                    f: f.freq_hz,
                    bw: f.bandwidth_hz,
                })
                .collect(),
            envelope_db: resample_envelope(&frame.envelope_db, ENVELOPE_POINTS),
            contour,
            extrapolated,
            highlight: self.highlight.clone(),
            dropped: 0,
        }
    }

    /// Answers a slider request from the table, independent of live audio.
    pub fn invert_request(&self, id: Value, f1: f64, f2: f64) -> ServerMessage {
        if !(f1.is_finite() && f2.is_finite()) || f1 <= 0.0 || f2 <= 0.0 {
            return ServerMessage::error(id, format!("formants must be positive and finite, got f1={f1}, f2={f2}"));
        }
        let c = self.lut.query(f1, f2);
        ServerMessage::Contour {
            id,
            contour: contour_xy(&c),
            extrapolated: c.extrapolated,
        }
    }
}

pub fn contour_xy(c: &TongueContour<f64>) -> ContourXY {
    ContourXY {
        x: c.points.iter().map(|p| p.x).collect(),
        y: c.points.iter().map(|p| p.y).collect(),
    }
}

fn normalize_highlight(h: &[u8]) -> Result<Vec<u8>, ConfigRejection> {
    if let Some(bad) = h.iter().find(|k| !(1..=4).contains(*k)) {
        return Err(ConfigRejection::new("highlight", format!("formant index {bad} is outside 1..4")));
    }
    let mut v = h.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Linear resampling over the frequency axis, keeping both endpoints.
pub fn resample_envelope(env: &[f64], n: usize) -> Vec<f64> {
    match env.len() {
        0 => vec![f64::NAN; n],
        1 => vec![env[0]; n],
        m if m == n => env.to_vec(),
        m => (0..n)
            .map(|k| {
                let pos = k as f64 * (m - 1) as f64 / (n - 1) as f64;
                let i = (pos.floor() as usize).min(m - 2);
                let u = pos - i as f64;
                if u == 0.0 {
                    env[i]
                } else {
                    env[i] + u * (env[i + 1] - env[i])
                }
            })
            .collect(),
    }
}
