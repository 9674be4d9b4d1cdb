use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{fit_regression, RegressError, RegressionModel, DESIGN_TERMS, TARGETS};
use crate::corpus::{center_by_speaker, Corpus, CorpusError};
use crate::geometry::{Configuration, SHAPE_DIM};
use crate::scalar::Scalar;
use crate::shapespace::{fit_shape_space, PcaModel, ShapeError};

/// Value of the `format` field written to every bundle.
pub const FORMAT: &str = "aurora-model/1";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("unsupported bundle format {0:?}, expected {FORMAT:?}")]
    Format(String),
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error("bundle JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    /// Hex SHA-256 of the training CSV bytes.
    pub corpus_sha256: String,
    /// RFC 3339 creation time, UTC.
    pub created: String,
    pub n_tokens: usize,
    pub n_speakers: usize,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layout {
    rows: Vec<String>,
    columns: Vec<String>,
}

impl Layout {
    fn current() -> Self {
        Self {
            rows: DESIGN_TERMS.iter().map(|s| s.to_string()).collect(),
            columns: TARGETS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Trained PCA and regression in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelBundle<T = f64> {
    pub metadata: BundleMetadata,
    pub pca: PcaModel<T>,
    pub regression: RegressionModel<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct OnDisk<T> {
    format: String,
    metadata: BundleMetadata,
    coefficient_layout: Layout,
    pca: PcaModel<T>,
    regression: RegressionModel<T>,
}

/// Hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Full training pipeline on the CSV bytes of a corpus: parse, center by
/// speaker, fit the shape space on all tokens, fit the regression.
pub fn train<T: Scalar>(csv_bytes: &[u8]) -> Result<ModelBundle<T>, BundleError> {
    let corpus = Corpus::<T>::from_reader(csv_bytes)?;
    train_corpus(corpus, sha256_hex(csv_bytes))
}

/// As [`train`] for an already loaded corpus; `digest` is stored verbatim.
pub fn train_corpus<T: Scalar>(corpus: Corpus<T>, digest: String) -> Result<ModelBundle<T>, BundleError> {
    let corpus = if corpus.centered {
        corpus
    } else {
        center_by_speaker(corpus)?
    };
    if corpus.len() < 5 {
        return Err(RegressError::TooFewTokens(corpus.len()).into());
    }
    let configs: Vec<Configuration<T>> = corpus.records.iter().map(|r| Configuration::new(r.knots)).collect();
    let space = fit_shape_space(&configs)?;
    let regression = fit_regression(&corpus, &space.pca)?;
    Ok(ModelBundle {
        metadata: BundleMetadata {
            corpus_sha256: digest,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            n_tokens: corpus.len(),
            n_speakers: corpus.speakers().len(),
            items: corpus.items().iter().map(|s| s.to_string()).collect(),
        },
        pca: space.pca,
        regression,
    })
}

impl<T: Scalar> ModelBundle<T> {
    pub fn to_json(&self) -> String {
        let disk = OnDisk {
            format: FORMAT.to_string(),
            metadata: self.metadata.clone(),
            coefficient_layout: Layout::current(),
            pca: self.pca.clone(),
            regression: self.regression.clone(),
        };
        serde_json::to_string_pretty(&disk).expect("bundle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BundleError> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("format").and_then(|f| f.as_str()) {
            Some(FORMAT) => {}
            Some(other) => return Err(BundleError::Format(other.to_string())),
            None => return Err(BundleError::Format(String::new())),
        }
        let disk: OnDisk<T> = serde_json::from_value(v)?;
        let want = Layout::current();
        if disk.coefficient_layout.rows != want.rows || disk.coefficient_layout.columns != want.columns {
            return Err(BundleError::Inconsistent("coefficient row/column labels".into()));
        }
        let b = ModelBundle {
            metadata: disk.metadata,
            pca: disk.pca,
            regression: disk.regression,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<(), BundleError> {
        let p = &self.pca;
        let bad = |m: &str| Err(BundleError::Inconsistent(m.to_string()));
        if p.mean_shape.len() != SHAPE_DIM {
            return bad("mean_shape must have 22 entries");
        }
        if p.components.len() < 2 || p.components.iter().any(|c| c.len() != SHAPE_DIM) {
            return bad("need at least 2 components of length 22");
        }
        if p.eigenvalues.len() != p.components.len() {
            return bad("eigenvalue count differs from component count");
        }
        let r = &self.regression;
        let finite = r.coefficients.iter().flatten().all(|v| v.is_finite());
        if !finite || r.residual_variance.iter().any(|&v| !(v >= T::zero())) {
            return bad("coefficients must be finite and residual variances nonnegative");
        }
        if !(r.f1_range[0] < r.f1_range[1] && r.f2_range[0] < r.f2_range[1]) {
            return bad("formant ranges must satisfy low < high");
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BundleError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BundleError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// The 32 raw bytes of the corpus digest, zero if it is not valid hex.
    pub fn digest_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        if let Ok(v) = hex::decode(&self.metadata.corpus_sha256) {
            if v.len() == 32 {
                out.copy_from_slice(&v);
            }
        }
        out
    }
}
