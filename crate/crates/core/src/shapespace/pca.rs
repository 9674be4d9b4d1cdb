use serde::{Deserialize, Serialize};

use super::gpa::{optimal_rotation, preshape};
use super::ShapeError;
use crate::geometry::{Configuration, SHAPE_DIM};
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Tangent-space PCA of aligned shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PcaModel<T = f64> {
    /// Flattened consensus shape `(x1, y1, ..., x11, y11)`.
    pub mean_shape: Vec<T>,
    /// Orthonormal principal directions, one per row, strongest first.
    pub components: Vec<Vec<T>>,
    /// Variances along each component, descending and nonnegative.
    pub eigenvalues: Vec<T>,
    pub n_train: usize,
    pub total_variance: T,
}

/// Projection of `aligned` onto the hyperplane orthogonal to `mean`.
pub fn tangent_project<T: Scalar>(aligned: &Configuration<T>, mean: &Configuration<T>) -> Vec<T> {
    let x = aligned.to_flat();
    let m = mean.to_flat();
    let d = dot(&x, &m);
    x.iter().zip(m.iter()).map(|(&a, &b)| a - d * b).collect()
}

/// Eigendecomposition of the sample covariance (1/(n-1)) of `vectors`.
///
/// All 22 eigenpairs are kept; trailing ones are zero for tangent data.
/// Each component is signed so that its largest-magnitude entry is positive.
pub fn fit_pca<T: Scalar>(vectors: &[Vec<T>], mean_shape: &Configuration<T>) -> Result<PcaModel<T>, ShapeError> {
    let n = vectors.len();
    if n < 3 {
        return Err(ShapeError::TooFew { needed: 3, got: n });
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != SHAPE_DIM {
            return Err(ShapeError::Dimension {
                index: i,
                len: v.len(),
                expected: SHAPE_DIM,
            });
        }
    }
    let d = SHAPE_DIM;
    let nt = T::from_usize_lossy(n);
    let mut centre = vec![T::zero(); d];
    for v in vectors {
        for (c, &x) in centre.iter_mut().zip(v.iter()) {
            *c = *c + x;
        }
    }
    centre.iter_mut().for_each(|c| *c = *c / nt);
    let mut cov = vec![T::zero(); d * d];
    for v in vectors {
        for i in 0..d {
            let di = v[i] - centre[i];
            for j in i..d {
                cov[i * d + j] = cov[i * d + j] + di * (v[j] - centre[j]);
            }
        }
    }
    let denom = nt - T::one();
    for i in 0..d {
        for j in i..d {
            let c = cov[i * d + j] / denom;
            cov[i * d + j] = c;
            cov[j * d + i] = c;
        }
    }
    let (values, mut vectors_out) = symmetric_eigen(&cov, d);
    let eigenvalues: Vec<T> = values.into_iter().map(|v| v.max(T::zero())).collect();
    for comp in vectors_out.iter_mut() {
        let mut best = 0;
        for (i, x) in comp.iter().enumerate() {
            if x.abs() > comp[best].abs() {
                best = i;
            }
        }
        if comp[best] < T::zero() {
            comp.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let total_variance = eigenvalues.iter().fold(T::zero(), |s, &v| s + v);
    Ok(PcaModel {
        mean_shape: mean_shape.to_flat(),
        components: vectors_out,
        eigenvalues,
        n_train: n,
        total_variance,
    })
}

impl<T: Scalar> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn mean_configuration(&self) -> Configuration<T> {
        Configuration::from_flat(&self.mean_shape)
    }

    /// Share of the total variance carried by each component. All zero when
    /// the total variance is zero.
    pub fn variance_ratios(&self) -> Vec<T> {
        if self.total_variance > T::zero() {
            self.eigenvalues.iter().map(|&v| v / self.total_variance).collect()
        } else {
            vec![T::zero(); self.eigenvalues.len()]
        }
    }

    /// Scores of a tangent vector on the first `k` components.
    pub fn scores(&self, v: &[T], k: usize) -> Result<Vec<T>, ShapeError> {
        self.check_k(k)?;
        if v.len() != SHAPE_DIM {
            return Err(ShapeError::Dimension {
                index: 0,
                len: v.len(),
                expected: SHAPE_DIM,
            });
        }
        Ok(self.components[..k].iter().map(|c| dot(v, c)).collect())
    }

    /// `mean_shape + sum_i scores[i] * components[i]`.
    pub fn invert(&self, scores: &[T]) -> Result<Configuration<T>, ShapeError> {
        self.check_k(scores.len())?;
        let mut flat = self.mean_shape.clone();
        for (s, c) in scores.iter().zip(self.components.iter()) {
            for (f, &ci) in flat.iter_mut().zip(c.iter()) {
                *f = *f + *s * ci;
            }
        }
        Ok(Configuration::from_flat(&flat))
    }

    /// Tangent coordinates of a raw configuration: normalized to unit size,
    /// rotated onto the mean shape, then projected.
    pub fn tangent_of(&self, c: &Configuration<T>) -> Option<Vec<T>> {
        let mean = self.mean_configuration();
        let pre = preshape(c)?;
        let aligned = optimal_rotation(&pre, &mean).apply_all(&pre);
        Some(tangent_project(&aligned, &mean))
    }

    /// Mean squared reconstruction error over `vectors` when keeping `k`
    /// components, normalized by `n - 1` like the covariance estimate.
    pub fn reconstruction_mse(&self, vectors: &[Vec<T>], k: usize) -> Result<T, ShapeError> {
        self.check_k(k)?;
        let mut total = T::zero();
        for v in vectors {
            let s = self.scores(v, k)?;
            let mut r = v.clone();
            for (si, c) in s.iter().zip(self.components.iter()) {
                for (ri, &ci) in r.iter_mut().zip(c.iter()) {
                    *ri = *ri - *si * ci;
                }
            }
            total = total + dot(&r, &r);
        }
        Ok(total / (T::from_usize_lossy(vectors.len()) - T::one()))
    }

    fn check_k(&self, k: usize) -> Result<(), ShapeError> {
        if k > self.components.len() {
            Err(ShapeError::ComponentRange {
                requested: k,
                available: self.components.len(),
            })
        } else {
            Ok(())
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |s, (&x, &y)| s + x * y)
}
