//! Synthetic corpora with a known articulatory-acoustic forward map.
//!
//! Each item template is produced by [`ForwardMap::knots`]: a normalized base
//! shape is deformed along two orthonormal shape modes whose amplitudes are
//! bilinear in (F1, F2), then placed so its end knots sit on positions that
//! are also bilinear in (F1, F2). Tokens add a per-speaker rigid offset,
//! landmark noise and formant jitter on top of the templates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Corpus, TokenRecord};
use crate::geometry::{Configuration, Point2, N_KNOTS, SHAPE_DIM};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ItemTemplate<T = f64> {
    pub item: String,
    pub knots: [Point2<T>; N_KNOTS],
    pub f1_hz: T,
    pub f2_hz: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SynthSpec<T = f64> {
    pub n_speakers: usize,
    pub tokens_per_item: usize,
    pub item_templates: Vec<ItemTemplate<T>>,
    pub noise_sd_mm: f64,
    pub speaker_offset_sd_mm: f64,
    pub formant_jitter_hz: f64,
}

impl<T: Scalar> SynthSpec<T> {
    /// 40 speakers, 5 repetitions of the 10 default vowels.
    pub fn paper_scale() -> Self {
        Self {
            n_speakers: 40,
            tokens_per_item: 5,
            item_templates: default_templates(),
            noise_sd_mm: 0.5,
            speaker_offset_sd_mm: 5.0,
            formant_jitter_hz: 15.0,
        }
    }

    /// Same layout with every noise source switched off.
    pub fn noiseless(n_speakers: usize, tokens_per_item: usize) -> Self {
        Self {
            n_speakers,
            tokens_per_item,
            item_templates: default_templates(),
            noise_sd_mm: 0.0,
            speaker_offset_sd_mm: 0.0,
            formant_jitter_hz: 0.0,
        }
    }
}

/// Everything the generator knows that the corpus alone does not reveal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroundTruth<T = f64> {
    pub templates: Vec<ItemTemplate<T>>,
    /// Rigid offset added to every landmark of each speaker.
    pub speaker_offsets: Vec<(String, Point2<T>)>,
    /// Landmarks of each record before the speaker offset was added.
    pub pre_offset_knots: Vec<[Point2<T>; N_KNOTS]>,
}

/// Generates `n_speakers * templates * tokens_per_item` tokens, speaker-major,
/// then item, then repetition. Deterministic for a fixed seed.
///
/// # Panics
/// If `n_speakers == 0` or no templates are given.
pub fn synth_corpus<T: Scalar>(spec: &SynthSpec<T>, seed: u64) -> (Corpus<T>, GroundTruth<T>) {
    assert!(spec.n_speakers >= 1, "need at least one speaker");
    assert!(!spec.item_templates.is_empty(), "need at least one item template");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let gauss = |rng: &mut ChaCha8Rng, sd: f64| -> f64 {
        if sd > 0.0 {
            sd * std_normal.sample(rng)
        } else {
            0.0
        }
    };

    let n = spec.n_speakers * spec.item_templates.len() * spec.tokens_per_item;
    let mut records = Vec::with_capacity(n);
    let mut pre_offset_knots = Vec::with_capacity(n);
    let mut speaker_offsets = Vec::with_capacity(spec.n_speakers);
    let width = spec.n_speakers.to_string().len().max(2);
    for s in 0..spec.n_speakers {
        let speaker = format!("S{:0width$}", s + 1);
        let off = Point2::new(
            T::lit(gauss(&mut rng, spec.speaker_offset_sd_mm)),
            T::lit(gauss(&mut rng, spec.speaker_offset_sd_mm)),
        );
        speaker_offsets.push((speaker.clone(), off));
        for tpl in &spec.item_templates {
            for _ in 0..spec.tokens_per_item {
                let mut clean = tpl.knots;
                for p in clean.iter_mut() {
                    let dx = T::lit(gauss(&mut rng, spec.noise_sd_mm));
                    let dy = T::lit(gauss(&mut rng, spec.noise_sd_mm));
                    *p = Point2::new(p.x + dx, p.y + dy);
                }
                let mut knots = clean;
                for p in knots.iter_mut() {
                    *p = *p + off;
                }
                let f1 = tpl.f1_hz + T::lit(gauss(&mut rng, spec.formant_jitter_hz));
                let f2 = tpl.f2_hz + T::lit(gauss(&mut rng, spec.formant_jitter_hz));
                pre_offset_knots.push(clean);
                records.push(TokenRecord {
                    speaker_id: speaker.clone(),
                    item: tpl.item.clone(),
                    knots,
                    f1_hz: f1,
                    f2_hz: f2,
                });
            }
        }
    }
    let truth = GroundTruth {
        templates: spec.item_templates.clone(),
        speaker_offsets,
        pre_offset_knots,
    };
    (Corpus::new(records), truth)
}

/// Ten vowel archetypes in the b_d frame with plausible Northern English
/// formant values, shaped by [`ForwardMap::vowel_default`].
pub fn default_templates<T: Scalar>() -> Vec<ItemTemplate<T>> {
    let map = ForwardMap::vowel_default();
    DEFAULT_VOWELS
        .iter()
        .map(|&(item, f1, f2)| ItemTemplate {
            item: item.to_string(),
            knots: map.knots(f1, f2).map(|p| p.cast()),
            f1_hz: T::lit(f1),
            f2_hz: T::lit(f2),
        })
        .collect()
}

pub const DEFAULT_VOWELS: [(&str, f64, f64); 10] = [
    ("bead", 290.0, 2300.0),
    ("bid", 400.0, 2050.0),
    ("bed", 560.0, 1850.0),
    ("bad", 780.0, 1500.0),
    ("bud", 420.0, 1150.0),
    ("bard", 720.0, 1150.0),
    ("bod", 600.0, 950.0),
    ("bored", 430.0, 850.0),
    ("booed", 320.0, 1650.0),
    ("bird", 500.0, 1500.0),
];

/// A forward articulatory map whose six parameters (vallecula x/y, tip x/y and
/// two shape-mode amplitudes) are exactly bilinear in (F1, F2).
///
/// x grows toward the tongue tip, y grows upward.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardMap {
    /// Normalized base shape: zero centroid, unit centroid size.
    pub base: Vec<f64>,
    /// Two orthonormal modes, each orthogonal to the base, to its in-plane
    /// rotation and to translations.
    pub modes: [Vec<f64>; 2],
    /// Rows: 1, F1, F2, F1*F2. Columns: knot1 x, knot1 y, knot11 x, knot11 y,
    /// mode 1 amplitude, mode 2 amplitude.
    pub coefficients: [[f64; 6]; 4],
}

impl ForwardMap {
    pub fn vowel_default() -> Self {
        let pi = std::f64::consts::PI;
        let u = |k: usize| k as f64 / (N_KNOTS - 1) as f64;
        let mut base = Vec::with_capacity(SHAPE_DIM);
        let mut fronting = Vec::with_capacity(SHAPE_DIM);
        let mut raising = Vec::with_capacity(SHAPE_DIM);
        for k in 0..N_KNOTS {
            let t = u(k);
            let s = (pi * t).sin();
            base.push(-35.0 + 65.0 * t - 8.0 * s);
            base.push(-25.0 + 22.0 * t + 28.0 * s.powf(1.5));
            fronting.push(4.0 * s * s);
            fronting.push(-8.0 * (2.0 * pi * t).sin() * s);
            raising.push(0.0);
            raising.push(10.0 * s * s);
        }
        let base = normalize(&base);
        let rot: Vec<f64> = base.chunks(2).flat_map(|p| [-p[1], p[0]]).collect();
        let tx: Vec<f64> = (0..SHAPE_DIM).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let ty: Vec<f64> = (0..SHAPE_DIM).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in [tx, ty, base.clone(), rot] {
            push_orthonormal(&mut basis, v);
        }
        let m1 = push_orthonormal(&mut basis, fronting);
        let m2 = push_orthonormal(&mut basis, raising);

        let a = DEFAULT_VOWELS.iter().map(|v| v.1).sum::<f64>() / 10.0;
        let b = DEFAULT_VOWELS.iter().map(|v| v.2).sum::<f64>() / 10.0;
        // Each column as c0 + c1 (F1 - a) + c2 (F2 - b) + c3 (F1 - a)(F2 - b).
        let centred: [[f64; 4]; 6] = [
            [-35.0, 0.0, 0.004, 0.0],
            [-25.0, -0.004, 0.0, 0.0],
            [30.0, 0.0, 0.003, 0.0],
            [-3.0, -0.012, 0.0, -6e-6],
            [0.0, 0.0, 6e-5, 0.0],
            [0.0, -0.05 / 300.0, 0.0, -0.05 / 300.0 * 0.6e-3],
        ];
        let mut coefficients = [[0.0; 6]; 4];
        for (j, c) in centred.iter().enumerate() {
            coefficients[0][j] = c[0] - c[1] * a - c[2] * b + c[3] * a * b;
            coefficients[1][j] = c[1] - c[3] * b;
            coefficients[2][j] = c[2] - c[3] * a;
            coefficients[3][j] = c[3];
        }
        Self {
            base,
            modes: [m1, m2],
            coefficients,
        }
    }

    /// The six articulatory parameters at (F1, F2).
    pub fn params(&self, f1: f64, f2: f64) -> [f64; 6] {
        let x = [1.0, f1, f2, f1 * f2];
        let mut out = [0.0; 6];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|i| x[i] * self.coefficients[i][j]).sum();
        }
        out
    }

    /// Landmarks in millimetres at (F1, F2).
    pub fn knots(&self, f1: f64, f2: f64) -> [Point2<f64>; N_KNOTS] {
        let p = self.params(f1, f2);
        let shape: Vec<f64> = (0..SHAPE_DIM)
            .map(|i| self.base[i] + p[4] * self.modes[0][i] + p[5] * self.modes[1][i])
            .collect();
        let cfg = Configuration::<f64>::from_flat(&shape);
        let (r1, r11) = (cfg.first(), cfg.last());
        let (t1, t11) = (Point2::new(p[0], p[1]), Point2::new(p[2], p[3]));
        let ratio = (t11 - t1).cdiv(r11 - r1);
        cfg.map(|q| t1 + (q - r1).cmul(ratio)).landmarks
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.len() / 2;
    let (cx, cy) = (
        v.iter().step_by(2).sum::<f64>() / n as f64,
        v.iter().skip(1).step_by(2).sum::<f64>() / n as f64,
    );
    let c: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, x)| if i % 2 == 0 { x - cx } else { x - cy })
        .collect();
    let s = dot(&c, &c).sqrt();
    c.into_iter().map(|x| x / s).collect()
}

/// Gram-Schmidt step; returns the new unit vector and appends it to `basis`.
fn push_orthonormal(basis: &mut Vec<Vec<f64>>, mut v: Vec<f64>) -> Vec<f64> {
    for _ in 0..2 {
        for b in basis.iter() {
            let d = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
    }
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    basis.push(v.clone());
    v
}
