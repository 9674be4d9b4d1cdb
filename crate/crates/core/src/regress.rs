//! Multivariate linear map from (1, F1, F2, F1*F2) onto six articulatory
//! parameters: vallecula x/y, tip x/y (mm) and the first two shape scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::geometry::{Configuration, Point2};
use crate::linalg::lstsq_qr;
use crate::scalar::Scalar;
use crate::shapespace::PcaModel;

mod bundle;

pub use bundle::{sha256_hex, train, train_corpus, BundleError, BundleMetadata, ModelBundle, FORMAT};

/// Row labels of the coefficient matrix.
pub const DESIGN_TERMS: [&str; 4] = ["intercept", "f1", "f2", "f1_f2"];
/// Column labels of the coefficient matrix.
pub const TARGETS: [&str; 6] = ["knot1_x", "knot1_y", "knot11_x", "knot11_y", "pc1", "pc2"];

const MIN_TOKENS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("under-determined fit: {0} tokens, need at least 5 for 4 predictors")]
    TooFewTokens(usize),
    #[error("corpus must be centered by speaker before fitting")]
    NotCentered,
    #[error("formants must be positive, got F1={f1} F2={f2}")]
    NonPositive { f1: f64, f2: f64 },
    #[error("{0} range is degenerate; formants need spread to fit a slope")]
    DegenerateRange(&'static str),
    #[error("token {0} has a degenerate tongue shape")]
    DegenerateShape(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ArticulatoryParams<T = f64> {
    pub knot1_x: T,
    pub knot1_y: T,
    pub knot11_x: T,
    pub knot11_y: T,
    pub pc1: T,
    pub pc2: T,
}

impl<T: Scalar> ArticulatoryParams<T> {
    pub fn from_array(a: [T; 6]) -> Self {
        Self {
            knot1_x: a[0],
            knot1_y: a[1],
            knot11_x: a[2],
            knot11_y: a[3],
            pc1: a[4],
            pc2: a[5],
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.knot1_x, self.knot1_y, self.knot11_x, self.knot11_y, self.pc1, self.pc2]
    }

    pub fn knot1(&self) -> Point2<T> {
        Point2::new(self.knot1_x, self.knot1_y)
    }

    pub fn knot11(&self) -> Point2<T> {
        Point2::new(self.knot11_x, self.knot11_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T = f64> {
    pub params: ArticulatoryParams<T>,
    /// Input fell outside 0.8 x low .. 1.25 x high of a training range.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionModel<T = f64> {
    /// 4 x 6, rows in [`DESIGN_TERMS`] order, columns in [`TARGETS`] order.
    pub coefficients: [[T; 6]; 4],
    /// Per-target mean squared residual.
    pub residual_variance: [T; 6],
    pub r_squared: [T; 6],
    /// 5th and 95th percentiles of training F1, Hz.
    pub f1_range: [T; 2],
    /// 5th and 95th percentiles of training F2, Hz.
    pub f2_range: [T; 2],
    pub n_train: usize,
}

/// `(1, f1, f2, f1 * f2)`.
pub fn build_design<T: Scalar>(f1: T, f2: T) -> [T; 4] {
    [T::one(), f1, f2, f1 * f2]
}

/// Linear-interpolation quantile of sorted data (the usual "type 7").
pub fn quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Target rows for each token: end knots and the first two shape scores of
/// the token's contour aligned onto the PCA mean shape.
pub fn token_targets<T: Scalar>(corpus: &Corpus<T>, pca: &PcaModel<T>) -> Result<Vec<[T; 6]>, RegressError> {
    corpus
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let cfg = Configuration::new(r.knots);
            let tangent = pca.tangent_of(&cfg).ok_or(RegressError::DegenerateShape(i))?;
            let s = pca.scores(&tangent, 2).map_err(|_| RegressError::DegenerateShape(i))?;
            Ok([r.knots[0].x, r.knots[0].y, r.knots[10].x, r.knots[10].y, s[0], s[1]])
        })
        .collect()
}

/// Least-squares fit of the six targets on the design of every token.
pub fn fit_regression<T: Scalar>(corpus: &Corpus<T>, pca: &PcaModel<T>) -> Result<RegressionModel<T>, RegressError> {
    if !corpus.centered {
        return Err(RegressError::NotCentered);
    }
    if corpus.len() < MIN_TOKENS {
        return Err(RegressError::TooFewTokens(corpus.len()));
    }
    let targets = token_targets(corpus, pca)?;
    let formants: Vec<(T, T)> = corpus.records.iter().map(|r| (r.f1_hz, r.f2_hz)).collect();
    fit_targets(&formants, &targets)
}

/// Least-squares fit from explicit (F1, F2) pairs and target rows.
///
/// Predictor columns are centred and scaled before the QR solve; the
/// stored coefficients are mapped back to raw Hz units.
pub fn fit_targets<T: Scalar>(formants: &[(T, T)], targets: &[[T; 6]]) -> Result<RegressionModel<T>, RegressError> {
    assert_eq!(formants.len(), targets.len());
    let n = formants.len();
    if n < MIN_TOKENS {
        return Err(RegressError::TooFewTokens(n));
    }
    for &(f1, f2) in formants {
        if !(f1 > T::zero() && f2 > T::zero()) {
            return Err(RegressError::NonPositive {
                f1: f1.as_f64(),
                f2: f2.as_f64(),
            });
        }
    }
    let sorted = |sel: fn(&(T, T)) -> T| {
        let mut v: Vec<T> = formants.iter().map(sel).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let f1s = sorted(|f| f.0);
    let f2s = sorted(|f| f.1);
    let f1_range = [quantile(&f1s, 0.05), quantile(&f1s, 0.95)];
    let f2_range = [quantile(&f2s, 0.05), quantile(&f2s, 0.95)];
    if !(f1_range[0] < f1_range[1]) {
        return Err(RegressError::DegenerateRange("F1"));
    }
    if !(f2_range[0] < f2_range[1]) {
        return Err(RegressError::DegenerateRange("F2"));
    }

    let nt = T::from_usize_lossy(n);
    let raw: Vec<[T; 4]> = formants.iter().map(|&(a, b)| build_design(a, b)).collect();
    let mut centre = [T::zero(); 4];
    let mut scale = [T::one(); 4];
    for j in 1..4 {
        centre[j] = raw.iter().fold(T::zero(), |s, r| s + r[j]) / nt;
        let var = raw
            .iter()
            .fold(T::zero(), |s, r| s + (r[j] - centre[j]) * (r[j] - centre[j]))
            / nt;
        scale[j] = if var > T::zero() { var.sqrt() } else { T::one() };
    }
    let x: Vec<T> = raw
        .iter()
        .flat_map(|r| {
            let z = |j: usize| (r[j] - centre[j]) / scale[j];
            [T::one(), z(1), z(2), z(3)]
        })
        .collect();
    let y: Vec<T> = targets.iter().flat_map(|t| t.iter().copied()).collect();
    let (b, _dropped) = lstsq_qr(&x, n, 4, &y, 6, T::solver_tol(1e-10));

    let mut coefficients = [[T::zero(); 6]; 4];
    for t in 0..6 {
        let mut intercept = b[t];
        for j in 1..4 {
            let beta = b[j * 6 + t] / scale[j];
            coefficients[j][t] = beta;
            intercept = intercept - beta * centre[j];
        }
        coefficients[0][t] = intercept;
    }

    let mut model = RegressionModel {
        coefficients,
        residual_variance: [T::zero(); 6],
        r_squared: [T::one(); 6],
        f1_range,
        f2_range,
        n_train: n,
    };
    let mut ss_res = [T::zero(); 6];
    let mut mean_y = [T::zero(); 6];
    for (f, t) in formants.iter().zip(targets) {
        let p = model.evaluate(f.0, f.1);
        for j in 0..6 {
            ss_res[j] = ss_res[j] + (t[j] - p[j]) * (t[j] - p[j]);
            mean_y[j] = mean_y[j] + t[j] / nt;
        }
    }
    for j in 0..6 {
        let ss_tot = targets
            .iter()
            .fold(T::zero(), |s, t| s + (t[j] - mean_y[j]) * (t[j] - mean_y[j]));
        model.residual_variance[j] = ss_res[j] / nt;
        model.r_squared[j] = if ss_tot > T::zero() {
            T::one() - ss_res[j] / ss_tot
        } else {
            T::one()
        };
    }
    Ok(model)
}

impl<T: Scalar> RegressionModel<T> {
    /// Raw product of the design row with the coefficient matrix.
    pub fn evaluate(&self, f1: T, f2: T) -> [T; 6] {
        let x = build_design(f1, f2);
        let mut out = [T::zero(); 6];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).fold(T::zero(), |s, i| s + x[i] * self.coefficients[i][j]);
        }
        out
    }

    pub fn is_extrapolated(&self, f1: T, f2: T) -> bool {
        let (lo, hi) = (T::lit(0.8), T::lit(1.25));
        f1 < lo * self.f1_range[0]
            || f1 > hi * self.f1_range[1]
            || f2 < lo * self.f2_range[0]
            || f2 > hi * self.f2_range[1]
    }

    /// Articulatory parameters at (F1, F2). Inputs outside the training
    /// window are still evaluated and flagged.
    pub fn predict(&self, f1: T, f2: T) -> Result<Prediction<T>, RegressError> {
        if !(f1 > T::zero() && f2 > T::zero()) || !f1.is_finite() || !f2.is_finite() {
            return Err(RegressError::NonPositive {
                f1: f1.as_f64(),
                f2: f2.as_f64(),
            });
        }
        Ok(Prediction {
            params: ArticulatoryParams::from_array(self.evaluate(f1, f2)),
            extrapolated: self.is_extrapolated(f1, f2),
        })
    }
}

/// Free-function form of [`RegressionModel::predict`].
pub fn predict_params<T: Scalar>(m: &RegressionModel<T>, f1: T, f2: T) -> Result<Prediction<T>, RegressError> {
    m.predict(f1, f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn planted() -> [[f64; 6]; 4] {
        [
            [-30.0, -20.0, 28.0, 2.0, 0.1, -0.05],
            [0.002, -0.01, 0.0005, -0.02, 1e-4, -2e-4],
            [0.004, 0.001, 0.003, 0.0005, 5e-5, 1e-5],
            [1e-7, -2e-7, 3e-7, -6e-6, 1e-8, -1e-7],
        ]
    }

    fn x_times_b(b: &[[f64; 6]; 4], f1: f64, f2: f64) -> [f64; 6] {
        let x = [1.0, f1, f2, f1 * f2];
        let mut out = [0.0; 6];
        for j in 0..6 {
            for i in 0..4 {
                out[j] += x[i] * b[i][j];
            }
        }
        out
    }

    fn formants(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| (rng.random_range(280.0..950.0), rng.random_range(800.0..2700.0)))
            .collect()
    }

    #[test]
    fn design_rows() {
        assert_eq!(build_design(500.0, 1500.0), [1.0, 500.0, 1500.0, 750000.0]);
        assert_eq!(build_design(0.0, 0.0), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(build_design(903.0, 2616.0), [1.0, 903.0, 2616.0, 2362248.0]);
    }

    #[test]
    fn recovers_planted_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = formants(&mut rng, 200);
        let b = planted();
        let y: Vec<[f64; 6]> = f.iter().map(|&(a, c)| x_times_b(&b, a, c)).collect();
        let m = fit_targets(&f, &y).unwrap();
        for i in 0..4 {
            for j in 0..6 {
                let rel = (m.coefficients[i][j] - b[i][j]).abs() / b[i][j].abs();
                assert!(rel < 1e-8, "coef [{i}][{j}] rel err {rel}");
            }
        }
        assert!(m.r_squared.iter().all(|&r| r > 1.0 - 1e-12));
    }

    #[test]
    fn residual_variance_tracks_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = formants(&mut rng, 2000);
        let sigma = 0.7;
        let noise = Normal::new(0.0, sigma).unwrap();
        let b = planted();
        let y: Vec<[f64; 6]> = f
            .iter()
            .map(|&(a, c)| {
                let mut t = x_times_b(&b, a, c);
                t.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
                t
            })
            .collect();
        let m = fit_targets(&f, &y).unwrap();
        for &rv in &m.residual_variance {
            assert!((rv - sigma * sigma).abs() < 0.15 * sigma * sigma, "{rv}");
        }
    }

    #[test]
    fn duplicated_rows_do_not_change_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = formants(&mut rng, 50);
        let y: Vec<[f64; 6]> = f
            .iter()
            .map(|&(a, c)| {
                let mut t = x_times_b(&planted(), a, c);
                t[0] += rng.random_range(-1.0..1.0);
                t
            })
            .collect();
        let m1 = fit_targets(&f, &y).unwrap();
        let f2: Vec<_> = f.iter().chain(f.iter()).copied().collect();
        let y2: Vec<_> = y.iter().chain(y.iter()).copied().collect();
        let m2 = fit_targets(&f2, &y2).unwrap();
        for i in 0..4 {
            for j in 0..6 {
                let d = (m1.coefficients[i][j] - m2.coefficients[i][j]).abs();
                assert!(d <= 1e-10 * m1.coefficients[i][j].abs().max(1e-12) + 1e-14, "{d}");
            }
        }
    }

    #[test]
    fn intercept_only_model() {
        let mut c = [[0.0; 6]; 4];
        c[0] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = RegressionModel {
            coefficients: c,
            residual_variance: [0.0; 6],
            r_squared: [1.0; 6],
            f1_range: [300.0, 800.0],
            f2_range: [900.0, 2500.0],
            n_train: 10,
        };
        for (a, b) in [(320.0, 828.0), (700.0, 2000.0), (5000.0, 9000.0)] {
            assert_eq!(m.predict(a, b).unwrap().params.to_array(), c[0]);
        }
        assert!(m.predict(5000.0, 9000.0).unwrap().extrapolated);
        assert!(!m.predict(320.0, 1000.0).unwrap().extrapolated);
        assert!(m.predict(-10.0, 1000.0).is_err());
    }

    #[test]
    fn planted_prediction_at_grid_corner() {
        let b = planted();
        let m = RegressionModel {
            coefficients: b,
            residual_variance: [0.0; 6],
            r_squared: [1.0; 6],
            f1_range: [320.0, 903.0],
            f2_range: [828.0, 2616.0],
            n_train: 10,
        };
        let p = m.predict(320.0, 828.0).unwrap().params.to_array();
        let e = x_times_b(&b, 320.0, 828.0);
        for j in 0..6 {
            assert!((p[j] - e[j]).abs() <= 1e-10 * e[j].abs().max(1.0));
        }
    }

    #[test]
    fn too_few_tokens() {
        let f = vec![(300.0, 900.0), (400.0, 1000.0), (500.0, 1200.0), (600.0, 1500.0)];
        let y = vec![[0.0; 6]; 4];
        assert_eq!(fit_targets(&f, &y).unwrap_err(), RegressError::TooFewTokens(4));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn residuals_orthogonal_to_design(seed in 0u64..u64::MAX, n in 20usize..300, sigma in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = formants(&mut rng, n);
            let noise = Normal::new(0.0, sigma.max(1e-12)).unwrap();
            let y: Vec<[f64; 6]> = f
                .iter()
                .map(|&(a, c)| {
                    let mut t = x_times_b(&planted(), a, c);
                    t.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
                    t
                })
                .collect();
            let m = fit_targets(&f, &y).unwrap();
            let ymax = y.iter().flat_map(|t| t.iter()).fold(0.0f64, |a, &b| a.max(b.abs()));
            for i in 0..4 {
                for j in 0..6 {
                    let s: f64 = f
                        .iter()
                        .zip(&y)
                        .map(|(&(a, c), t)| build_design(a, c)[i] * (t[j] - m.evaluate(a, c)[j]))
                        .sum();
                    proptest::prop_assert!(s.abs() < 1e-6 * ymax, "X^T r [{}][{}] = {}", i, j, s);
                }
            }
        }

        #[test]
        fn fit_ignores_token_order(seed in 0u64..u64::MAX, n in 10usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = formants(&mut rng, n);
            let y: Vec<[f64; 6]> = f
                .iter()
                .map(|&(a, c)| {
                    let mut t = x_times_b(&planted(), a, c);
                    t.iter_mut().for_each(|v| *v += rng.random_range(-1.0..1.0));
                    t
                })
                .collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.reverse();
            idx.rotate_left(n / 3);
            let fs: Vec<_> = idx.iter().map(|&i| f[i]).collect();
            let ys: Vec<_> = idx.iter().map(|&i| y[i]).collect();
            let a = fit_targets(&f, &y).unwrap();
            let b = fit_targets(&fs, &ys).unwrap();
            for i in 0..4 {
                for j in 0..6 {
                    let d = (a.coefficients[i][j] - b.coefficients[i][j]).abs();
                    proptest::prop_assert!(d <= 1e-10 * a.coefficients[i][j].abs().max(1e-12), "{}", d);
                }
            }
            proptest::prop_assert_eq!(a.f1_range, b.f1_range);
        }
    }

    #[test]
    fn quantile_type7() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.05) - 1.2).abs() < 1e-12);
        assert!((quantile(&v, 0.95) - 4.8).abs() < 1e-12);
    }
}
