//! Training corpora: one record per vowel token with 11 tongue landmarks and
//! the first two formants measured at the same time point.
//!
//! The CSV layout is `speaker,item,x1,y1,...,x11,y11,f1,f2`, coordinates in
//! millimetres and formants in Hz. Columns are located by header name, so
//! extra columns are ignored.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, N_KNOTS};
use crate::scalar::Scalar;

pub mod synth;

pub use synth::{default_templates, synth_corpus, ForwardMap, GroundTruth, ItemTemplate, SynthSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("corpus is already centered")]
    AlreadyCentered,
    #[error("corpus must be centered first")]
    NotCentered,
    #[error("corpus is empty")]
    Empty,
    #[error("invalid token: {0}")]
    InvalidToken(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One vowel token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TokenRecord<T = f64> {
    pub speaker_id: String,
    pub item: String,
    /// Index 0 is the epiglottic vallecula, index 10 the tongue tip.
    pub knots: [Point2<T>; N_KNOTS],
    pub f1_hz: T,
    pub f2_hz: T,
}

impl<T: Scalar> TokenRecord<T> {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !self.knots.iter().all(|p| p.is_finite()) {
            return Err(CorpusError::InvalidToken(format!(
                "non-finite landmark for speaker {} item {}",
                self.speaker_id, self.item
            )));
        }
        if !(self.f1_hz > T::zero() && self.f2_hz > T::zero()) {
            return Err(CorpusError::InvalidToken("formants must be positive".into()));
        }
        if self.f2_hz <= self.f1_hz {
            return Err(CorpusError::InvalidToken(format!(
                "F2 ({}) must exceed F1 ({})",
                self.f2_hz, self.f1_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Corpus<T = f64> {
    pub records: Vec<TokenRecord<T>>,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ItemSummary<T = f64> {
    pub item: String,
    pub n_tokens: usize,
    pub mean_knots: [Point2<T>; N_KNOTS],
    pub mean_f1_hz: T,
    pub mean_f2_hz: T,
}

/// Column names in canonical order.
pub fn csv_header() -> Vec<String> {
    let mut cols = vec!["speaker".to_string(), "item".to_string()];
    for k in 1..=N_KNOTS {
        cols.push(format!("x{k}"));
        cols.push(format!("y{k}"));
    }
    cols.push("f1".into());
    cols.push("f2".into());
    cols
}

impl<T: Scalar> Corpus<T> {
    pub fn new(records: Vec<TokenRecord<T>>) -> Self {
        Self {
            records,
            centered: false,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct speakers in first-appearance order.
    pub fn speakers(&self) -> Vec<&str> {
        distinct(self.records.iter().map(|r| r.speaker_id.as_str()))
    }

    /// Distinct items in first-appearance order.
    pub fn items(&self) -> Vec<&str> {
        distinct(self.records.iter().map(|r| r.item.as_str()))
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize, CorpusError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
        };
        let speaker_col = col("speaker")?;
        let item_col = col("item")?;
        let mut knot_cols = Vec::with_capacity(N_KNOTS);
        for k in 1..=N_KNOTS {
            knot_cols.push((col(&format!("x{k}"))?, col(&format!("y{k}"))?));
        }
        let f1_col = col("f1")?;
        let f2_col = col("f2")?;

        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(CorpusError::FieldCount {
                    row,
                    expected: headers.len(),
                    found: rec.len(),
                });
            }
            let text = |c: usize| -> Result<&str, CorpusError> {
                let s = &rec[c];
                if s.is_empty() {
                    Err(CorpusError::Cell {
                        row,
                        column: headers[c].to_string(),
                        message: "empty cell".into(),
                    })
                } else {
                    Ok(s)
                }
            };
            let num = |c: usize| -> Result<T, CorpusError> {
                let s = text(c)?;
                let v: T = s.parse().map_err(|_| CorpusError::Cell {
                    row,
                    column: headers[c].to_string(),
                    message: format!("not a number: {s:?}"),
                })?;
                if !v.is_finite() {
                    return Err(CorpusError::Cell {
                        row,
                        column: headers[c].to_string(),
                        message: format!("non-finite value {s:?}"),
                    });
                }
                Ok(v)
            };
            let mut knots = [Point2::zero(); N_KNOTS];
            for (k, &(cx, cy)) in knot_cols.iter().enumerate() {
                knots[k] = Point2::new(num(cx)?, num(cy)?);
            }
            let f1 = num(f1_col)?;
            let f2 = num(f2_col)?;
            for (c, f) in [(f1_col, f1), (f2_col, f2)] {
                if f <= T::zero() {
                    return Err(CorpusError::Cell {
                        row,
                        column: headers[c].to_string(),
                        message: format!("formant must be positive, got {f}"),
                    });
                }
            }
            if f2 <= f1 {
                return Err(CorpusError::Cell {
                    row,
                    column: headers[f2_col].to_string(),
                    message: format!("F2 ({f2}) must exceed F1 ({f1})"),
                });
            }
            records.push(TokenRecord {
                speaker_id: text(speaker_col)?.to_string(),
                item: text(item_col)?.to_string(),
                knots,
                f1_hz: f1,
                f2_hz: f2,
            });
        }
        Ok(Self::new(records))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(csv_header())?;
        for r in &self.records {
            let mut row = vec![r.speaker_id.clone(), r.item.clone()];
            for p in &r.knots {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
            }
            row.push(r.f1_hz.to_string());
            row.push(r.f2_hz.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Reads a corpus CSV file. The result is not centered.
pub fn load_corpus<T: Scalar>(path: impl AsRef<Path>) -> Result<Corpus<T>, CorpusError> {
    let f = std::fs::File::open(path)?;
    Corpus::from_reader(std::io::BufReader::new(f))
}

/// Subtracts one 2-D centroid per speaker (mean over all knots of all that
/// speaker's tokens) from every landmark. Formants are untouched.
pub fn center_by_speaker<T: Scalar>(c: Corpus<T>) -> Result<Corpus<T>, CorpusError> {
    if c.centered {
        return Err(CorpusError::AlreadyCentered);
    }
    let mut sums: BTreeMap<String, (Point2<T>, usize)> = BTreeMap::new();
    for r in &c.records {
        let e = sums
            .entry(r.speaker_id.clone())
            .or_insert((Point2::zero(), 0));
        for &p in &r.knots {
            e.0 = e.0 + p;
        }
        e.1 += N_KNOTS;
    }
    let centroids: BTreeMap<String, Point2<T>> = sums
        .into_iter()
        .map(|(k, (s, n))| {
            let n = T::from_usize_lossy(n);
            (k, Point2::new(s.x / n, s.y / n))
        })
        .collect();
    let mut records = c.records;
    for r in records.iter_mut() {
        let off = centroids[&r.speaker_id];
        for p in r.knots.iter_mut() {
            *p = *p - off;
        }
    }
    Ok(Corpus {
        records,
        centered: true,
    })
}

/// Per-item arithmetic means of every knot coordinate and of F1, F2.
///
/// Items are returned sorted by name so the output does not depend on
/// record order.
pub fn item_means<T: Scalar>(c: &Corpus<T>) -> Result<Vec<ItemSummary<T>>, CorpusError> {
    if !c.centered {
        return Err(CorpusError::NotCentered);
    }
    if c.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut groups: BTreeMap<&str, Vec<&TokenRecord<T>>> = BTreeMap::new();
    for r in &c.records {
        groups.entry(r.item.as_str()).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(item, recs)| {
            // Sorting the group members makes the summation order canonical.
            let mut recs = recs;
            recs.sort_by(|a, b| record_order(a, b));
            let n = T::from_usize_lossy(recs.len());
            let mut mean_knots = [Point2::zero(); N_KNOTS];
            let (mut f1, mut f2) = (T::zero(), T::zero());
            for r in &recs {
                for (m, &p) in mean_knots.iter_mut().zip(r.knots.iter()) {
                    *m = *m + p;
                }
                f1 = f1 + r.f1_hz;
                f2 = f2 + r.f2_hz;
            }
            for m in mean_knots.iter_mut() {
                *m = Point2::new(m.x / n, m.y / n);
            }
            ItemSummary {
                item: item.to_string(),
                n_tokens: recs.len(),
                mean_knots,
                mean_f1_hz: f1 / n,
                mean_f2_hz: f2 / n,
            }
        })
        .collect())
}

/// Total order on records used wherever summation order must not depend on
/// input order.
pub(crate) fn record_order<T: Scalar>(a: &TokenRecord<T>, b: &TokenRecord<T>) -> std::cmp::Ordering {
    let key = |r: &TokenRecord<T>| {
        let mut v = vec![r.f1_hz, r.f2_hz];
        v.extend(r.knots.iter().flat_map(|p| [p.x, p.y]));
        v
    };
    a.speaker_id
        .cmp(&b.speaker_id)
        .then_with(|| a.item.cmp(&b.item))
        .then_with(|| {
            key(a)
                .iter()
                .zip(key(b).iter())
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = std::collections::HashSet::new();
    it.filter(|s| seen.insert(*s)).collect()
}
