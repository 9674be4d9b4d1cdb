//! Contour reconstruction from formants: PCA inversion, end-knot
//! similarity transform, spline resampling to 100 points.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{item_means, Corpus, CorpusError};
use crate::geometry::{Configuration, Point2, N_KNOTS};
use crate::regress::{ModelBundle, RegressError};
use crate::scalar::Scalar;
use crate::shapespace::PcaModel;

pub mod spline;
pub mod svg;

pub use spline::{knot_indices, sample_parameters, N_POINTS};

const DEGENERATE_LEN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("degenerate geometry at F1={f1} Hz, F2={f2} Hz: {message}")]
    DegenerateAt { f1: f64, f2: f64, message: String },
    #[error("contour input contains non-finite coordinates")]
    NonFinite,
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("grid needs at least 2 steps, got {0}")]
    Steps(usize),
    #[error("contour CSV line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// A 100-point contour in mm with the 11 knot positions marked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TongueContour<T = f64> {
    pub points: Vec<Point2<T>>,
    pub knot_indices: [usize; N_KNOTS],
    pub extrapolated: bool,
    pub source_f1_hz: T,
    pub source_f2_hz: T,
}

impl<T: Scalar> TongueContour<T> {
    pub fn knots(&self) -> [Point2<T>; N_KNOTS] {
        self.knot_indices.map(|i| self.points[i])
    }

    /// Index and position of the point with the largest y (first on ties).
    pub fn highest_point(&self) -> (usize, Point2<T>) {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if p.y > self.points[best].y {
                best = i;
            }
        }
        (best, self.points[best])
    }

    /// `index,x_mm,y_mm,is_knot` with one row per point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,x_mm,y_mm,is_knot\n");
        for (i, p) in self.points.iter().enumerate() {
            let k = u8::from(self.knot_indices.contains(&i));
            let _ = writeln!(s, "{i},{},{},{k}", p.x, p.y);
        }
        s
    }

    /// Single-panel SVG with one polyline, tip on the left.
    pub fn to_svg(&self) -> String {
        let title = format!(
            "F1 {:.0} Hz, F2 {:.0} Hz{}",
            self.source_f1_hz.as_f64(),
            self.source_f2_hz.as_f64(),
            if self.extrapolated { " (extrapolated)" } else { "" }
        );
        svg::render(
            &[svg::Panel {
                title,
                curves: vec![svg::Curve {
                    points: &self.points,
                    class: "contour",
                    stroke: "#1f4e9c",
                }],
            }],
            1,
        )
    }
}

/// Reads the point list written by [`TongueContour::to_csv`].
pub fn read_contour_csv<T: Scalar, R: Read>(r: R) -> Result<Vec<(Point2<T>, bool)>, InversionError> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| InversionError::Csv {
            line: n + 1,
            message: e.to_string(),
        })?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| InversionError::Csv {
            line: n + 1,
            message: m.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let x = f[1].trim().parse::<T>().map_err(|_| bad("bad x_mm"))?;
        let y = f[2].trim().parse::<T>().map_err(|_| bad("bad y_mm"))?;
        out.push((Point2::new(x, y), f[3].trim() == "1"));
    }
    Ok(out)
}

/// Normalized shape for the first two scores.
pub fn reconstruct_shape<T: Scalar>(pca: &PcaModel<T>, pc1: T, pc2: T) -> Configuration<T> {
    pca.invert(&[pc1, pc2]).expect("bundle PCA has at least two components")
}

/// Maps `shape` by the similarity that sends its first knot to `target1`
/// and its last knot to `target11`.
pub fn similarity_transform<T: Scalar>(
    shape: &Configuration<T>,
    target1: Point2<T>,
    target11: Point2<T>,
) -> Result<[Point2<T>; N_KNOTS], InversionError> {
    let r1 = shape.first();
    let v_rec = shape.last() - r1;
    let v_ref = target11 - target1;
    let tiny = T::lit(DEGENERATE_LEN);
    if !(v_rec.norm() >= tiny) {
        return Err(InversionError::Degenerate("reconstructed knots 1 and 11 coincide".into()));
    }
    if !(v_ref.norm() >= tiny) {
        return Err(InversionError::Degenerate("target knots 1 and 11 coincide".into()));
    }
    // Scale and rotation as one complex factor.
    let q = v_ref.cdiv(v_rec);
    Ok(shape.landmarks.map(|p| target1 + q.cmul(p - r1)))
}

/// Natural cubic spline through the knots resampled to 100 points.
pub fn smooth_contour<T: Scalar>(knots: &[Point2<T>; N_KNOTS]) -> Result<(Vec<Point2<T>>, [usize; N_KNOTS]), InversionError> {
    if !knots.iter().all(|p| p.is_finite()) {
        return Err(InversionError::NonFinite);
    }
    Ok((spline::resample(knots), knot_indices()))
}

fn contour_from_knots<T: Scalar>(knots: &[Point2<T>; N_KNOTS], f1: T, f2: T, extrapolated: bool) -> Result<TongueContour<T>, InversionError> {
    let (points, knot_indices) = smooth_contour(knots)?;
    Ok(TongueContour {
        points,
        knot_indices,
        extrapolated,
        source_f1_hz: f1,
        source_f2_hz: f2,
    })
}

/// The full formants-to-contour pipeline.
pub fn invert<T: Scalar>(bundle: &ModelBundle<T>, f1: T, f2: T) -> Result<TongueContour<T>, InversionError> {
    let pred = bundle.regression.predict(f1, f2)?;
    let p = pred.params;
    let shape = reconstruct_shape(&bundle.pca, p.pc1, p.pc2);
    let knots = similarity_transform(&shape, p.knot1(), p.knot11()).map_err(|e| InversionError::DegenerateAt {
        f1: f1.as_f64(),
        f2: f2.as_f64(),
        message: e.to_string(),
    })?;
    contour_from_knots(&knots, f1, f2, pred.extrapolated)
}

/// `steps` evenly spaced values from `lo` to `hi`, both included exactly.
pub fn grid_axis<T: Scalar>(lo: T, hi: T, steps: usize) -> Vec<T> {
    let d = T::from_usize_lossy(steps - 1);
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * T::from_usize_lossy(i) / d
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid<T = f64> {
    pub f1_axis: Vec<T>,
    pub f2_axis: Vec<T>,
    /// Row-major, F1 index major.
    pub contours: Vec<TongueContour<T>>,
}

impl<T: Scalar> ContourGrid<T> {
    pub fn get(&self, i: usize, j: usize) -> &TongueContour<T> {
        &self.contours[i * self.f2_axis.len() + j]
    }
}

/// Contours on an evenly spaced `steps` x `steps` formant grid.
pub fn grid_predict<T: Scalar>(
    bundle: &ModelBundle<T>,
    f1_range: (T, T),
    f2_range: (T, T),
    steps: usize,
) -> Result<ContourGrid<T>, InversionError> {
    if steps < 2 {
        return Err(InversionError::Steps(steps));
    }
    let f1_axis = grid_axis(f1_range.0, f1_range.1, steps);
    let f2_axis = grid_axis(f2_range.0, f2_range.1, steps);
    let mut contours = Vec::with_capacity(steps * steps);
    for &a in &f1_axis {
        for &b in &f2_axis {
            contours.push(invert(bundle, a, b)?);
        }
    }
    Ok(ContourGrid {
        f1_axis,
        f2_axis,
        contours,
    })
}

/// Grid over the model's stored 5th-95th percentile formant ranges.
pub fn grid_predict_default<T: Scalar>(bundle: &ModelBundle<T>, steps: usize) -> Result<ContourGrid<T>, InversionError> {
    let r = &bundle.regression;
    grid_predict(bundle, (r.f1_range[0], r.f1_range[1]), (r.f2_range[0], r.f2_range[1]), steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemReport<T = f64> {
    pub item: String,
    pub n_tokens: usize,
    pub mean_f1_hz: T,
    pub mean_f2_hz: T,
    pub mean_contour: TongueContour<T>,
    pub predicted_contour: TongueContour<T>,
    /// Euclidean distance between observed and predicted knot, per knot.
    pub knot_errors_mm: [T; N_KNOTS],
    /// Root mean square of `knot_errors_mm`.
    pub rmsd_mm: T,
}

/// Compares each item's mean contour with the prediction at its mean
/// formants.
pub fn evaluate_item_means<T: Scalar>(bundle: &ModelBundle<T>, corpus: &Corpus<T>) -> Result<Vec<ItemReport<T>>, InversionError> {
    let means = item_means(corpus)?;
    means
        .into_iter()
        .map(|m| {
            let observed = contour_from_knots(&m.mean_knots, m.mean_f1_hz, m.mean_f2_hz, false)?;
            let predicted = invert(bundle, m.mean_f1_hz, m.mean_f2_hz)?;
            let pk = predicted.knots();
            let errs: [T; N_KNOTS] = std::array::from_fn(|k| pk[k].dist(m.mean_knots[k]));
            let ms = errs.iter().fold(T::zero(), |s, &e| s + e * e) / T::from_usize_lossy(N_KNOTS);
            Ok(ItemReport {
                item: m.item,
                n_tokens: m.n_tokens,
                mean_f1_hz: m.mean_f1_hz,
                mean_f2_hz: m.mean_f2_hz,
                mean_contour: observed,
                predicted_contour: predicted,
                knot_errors_mm: errs,
                rmsd_mm: ms.sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{center_by_speaker, synth_corpus, SynthSpec};
    use crate::regress::train;
    use std::sync::OnceLock;

    fn bundle() -> &'static ModelBundle<f64> {
        static B: OnceLock<ModelBundle<f64>> = OnceLock::new();
        B.get_or_init(|| {
            let (c, _) = synth_corpus(&SynthSpec::<f64>::noiseless(4, 2), 11);
            train(&c.to_csv_bytes()).unwrap()
        })
    }

    fn cfg(pts: &[(f64, f64)]) -> Configuration<f64> {
        Configuration::new(std::array::from_fn(|k| {
            let (x, y) = pts[k.min(pts.len() - 1)];
            Point2::new(x, y)
        }))
    }

    #[test]
    fn zero_scores_give_mean_shape() {
        let b = bundle();
        let s = reconstruct_shape(&b.pca, 0.0, 0.0);
        assert_eq!(s.to_flat(), b.pca.mean_shape);
    }

    #[test]
    fn opposite_scores_average_to_mean() {
        let b = bundle();
        let a = reconstruct_shape(&b.pca, 0.03, 0.0).to_flat();
        let c = reconstruct_shape(&b.pca, -0.03, 0.0).to_flat();
        for ((x, y), m) in a.iter().zip(&c).zip(&b.pca.mean_shape) {
            assert!(((x + y) / 2.0 - m).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_similarity() {
        let mut pts: Vec<(f64, f64)> = (0..11).map(|k| (k as f64, (k as f64).sin())).collect();
        pts[10] = (10.0, 2.0);
        let s = cfg(&pts);
        let out = similarity_transform(&s, s.first(), s.last()).unwrap();
        for (a, b) in out.iter().zip(s.landmarks.iter()) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn hand_applied_similarity() {
        // R1 = (0,0), R11 = (1,0), a middle point at (0.5, 0.2).
        let mut pts = vec![(0.0, 0.0); 11];
        for (k, p) in pts.iter_mut().enumerate() {
            *p = (k as f64 / 10.0, 0.0);
        }
        pts[5] = (0.5, 0.2);
        let out = similarity_transform(&cfg(&pts), Point2::new(10.0, 10.0), Point2::new(10.0, 12.0)).unwrap();
        assert!(out[5].dist(Point2::new(9.6, 11.0)) < 1e-12);
        assert!(out[0].dist(Point2::new(10.0, 10.0)) < 1e-12);
        assert!(out[10].dist(Point2::new(10.0, 12.0)) < 1e-12);
    }

    #[test]
    fn swapped_targets_rotate_half_turn() {
        let pts: Vec<(f64, f64)> = (0..11).map(|k| (k as f64, 0.1 * (k * k) as f64)).collect();
        let s = cfg(&pts);
        let (t1, t11) = (Point2::new(3.0, 4.0), Point2::new(-7.0, 1.0));
        let a = similarity_transform(&s, t1, t11).unwrap();
        let b = similarity_transform(&s, t11, t1).unwrap();
        assert!(b[0].dist(t11) < 1e-12 && b[10].dist(t1) < 1e-12);
        // Same endpoints swapped: b is a rotated by 180 degrees about the midpoint.
        let mid = (t1 + t11) * 0.5;
        for k in 0..11 {
            let r = mid * 2.0 - a[k];
            assert!(r.dist(b[k]) < 1e-12);
        }
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let s = cfg(&[(1.0, 1.0)]);
        assert!(matches!(
            similarity_transform(&s, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)),
            Err(InversionError::Degenerate(_))
        ));
        let pts: Vec<(f64, f64)> = (0..11).map(|k| (k as f64, 0.0)).collect();
        assert!(similarity_transform(&cfg(&pts), Point2::new(2.0, 2.0), Point2::new(2.0, 2.0)).is_err());
    }

    #[test]
    fn non_finite_knots_rejected() {
        let mut k = [Point2::new(0.0, 0.0); N_KNOTS];
        k[3].y = f64::NAN;
        assert!(matches!(smooth_contour(&k), Err(InversionError::NonFinite)));
    }

    #[test]
    fn invert_anchors_endpoints() {
        let b = bundle();
        let c = invert(b, 500.0, 1600.0).unwrap();
        let p = b.regression.predict(500.0, 1600.0).unwrap().params;
        assert_eq!(c.points.len(), N_POINTS);
        assert!(c.points[0].dist(p.knot1()) < 1e-9);
        assert!(c.points[99].dist(p.knot11()) < 1e-9);
        assert!(!c.extrapolated);
        assert!(invert(b, 5000.0, 9000.0).unwrap().extrapolated);
        assert!(invert(b, 0.0, 1000.0).is_err());
    }

    #[test]
    fn grid_axes_and_corners() {
        let ax: Vec<f64> = grid_axis(320.0, 903.0, 4);
        assert_eq!(ax[0], 320.0);
        assert_eq!(ax[3], 903.0);
        assert!((ax[1] - 514.33).abs() < 0.01 && (ax[2] - 708.67).abs() < 0.01);
        let ax = grid_axis(828.0, 2616.0, 4);
        assert_eq!(ax, vec![828.0, 1424.0, 2020.0, 2616.0]);

        let b = bundle();
        let g = grid_predict(b, (320.0, 903.0), (828.0, 2616.0), 2).unwrap();
        assert_eq!(g.contours.len(), 4);
        assert_eq!(g.get(1, 0), &invert(b, 903.0, 828.0).unwrap());
        let g4 = grid_predict(b, (320.0, 903.0), (828.0, 2616.0), 4).unwrap();
        assert_eq!(g4.contours.len(), 16);
        assert_eq!(g4.get(2, 1), &invert(b, g4.f1_axis[2], g4.f2_axis[1]).unwrap());
        assert!(matches!(grid_predict(b, (1.0, 2.0), (3.0, 4.0), 1), Err(InversionError::Steps(1))));
    }

    #[test]
    fn single_item_corpus_is_fitted_closely() {
        let mut spec = SynthSpec::<f64>::noiseless(6, 2);
        spec.item_templates.truncate(1);
        spec.formant_jitter_hz = 20.0;
        let (c, _) = synth_corpus(&spec, 5);
        let b: ModelBundle<f64> = train(&c.to_csv_bytes()).unwrap();
        let rep = evaluate_item_means(&b, &center_by_speaker(c).unwrap()).unwrap();
        assert_eq!(rep.len(), 1);
        assert!(rep[0].rmsd_mm < 0.05, "{}", rep[0].rmsd_mm);
    }

    #[test]
    fn csv_round_trip() {
        let c = invert(bundle(), 400.0, 1800.0).unwrap();
        let text = c.to_csv();
        assert_eq!(text.lines().count(), 101);
        let back = read_contour_csv::<f64, _>(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 100);
        for (i, (p, k)) in back.iter().enumerate() {
            assert_eq!(*p, c.points[i]);
            assert_eq!(*k, c.knot_indices.contains(&i));
        }
        assert_eq!(back.iter().filter(|(_, k)| *k).count(), 11);
    }

    #[test]
    fn svg_has_one_polyline_of_100_points() {
        let svg = invert(bundle(), 320.0, 2616.0).unwrap().to_svg();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 100);
    }
}
