//! JSON messages exchanged with display clients, one object per socket
//! text message, discriminated by `"type"`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tongue_core::formants::AnalysisConfig;

/// Number of envelope values sent per frame regardless of FFT size.
pub const ENVELOPE_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourXY {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormantXY {
    pub f: f64,
    pub bw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayFrame {
    pub t_ms: f64,
    pub rms_db: f64,
    pub voiced: bool,
    pub formants: Vec<FormantXY>,
    pub envelope_db: Vec<f64>,
    pub contour: Option<ContourXY>,
    pub extrapolated: bool,
    pub highlight: Vec<u8>,
    /// Frames discarded for this client because it fell behind.
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LutRanges {
    pub f1_lo: f64,
    pub f1_hi: f64,
    pub f2_lo: f64,
    pub f2_hi: f64,
}

/// Everything a client needs to mirror the session settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    #[serde(flatten)]
    pub analysis: AnalysisConfig,
    pub highlight: Vec<u8>,
    pub display_smoothing: f64,
    pub device: String,
    pub lut: LutRanges,
}

/// Fields a client may change; absent fields keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub sample_rate: Option<u32>,
    pub frame_size: Option<usize>,
    pub hop_size: Option<usize>,
    pub lpc_order: Option<usize>,
    pub preemphasis: Option<f64>,
    pub threshold_db: Option<f64>,
    pub max_formants: Option<usize>,
    pub max_bandwidth_hz: Option<f64>,
    pub n_fft: Option<usize>,
    pub highlight: Option<Vec<u8>>,
    pub display_smoothing: Option<f64>,
    pub device: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Config(ConfigPatch),
    Invert {
        #[serde(default)]
        id: Value,
        f1: f64,
        f2: f64,
    },
    ListDevices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(DisplayFrame),
    Ack {
        config: EffectiveConfig,
    },
    Error {
        id: Value,
        message: String,
    },
    Contour {
        id: Value,
        contour: ContourXY,
        extrapolated: bool,
    },
    Devices {
        names: Vec<String>,
    },
}

impl ServerMessage {
    pub fn error(id: Value, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            id,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Parses a client message, producing an error reply (with the request id
/// when one can be recovered) on failure.
pub fn parse_client(text: &str) -> Result<ClientMessage, ServerMessage> {
    serde_json::from_str(text).map_err(|e| {
        let id = serde_json::from_str::<Value>(text)
            .ok()
            .and_then(|v| v.get("id").cloned())
            .unwrap_or(Value::Null);
        ServerMessage::error(id, format!("malformed message: {e}"))
    })
}
