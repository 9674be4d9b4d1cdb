use serde::{Deserialize, Serialize};

use super::ShapeError;
use crate::geometry::{Configuration, Point2};
use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 100;
const CONVERGENCE_TOL: f64 = 1e-10;

/// A proper 2-D rotation stored as (cos, sin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation2<T = f64> {
    pub cos: T,
    pub sin: T,
}

impl<T: Scalar> Rotation2<T> {
    pub fn identity() -> Self {
        Self {
            cos: T::one(),
            sin: T::zero(),
        }
    }

    pub fn from_angle(theta: T) -> Self {
        Self {
            cos: theta.cos(),
            sin: theta.sin(),
        }
    }

    pub fn angle(&self) -> T {
        self.sin.atan2(self.cos)
    }

    pub fn det(&self) -> T {
        self.cos * self.cos + self.sin * self.sin
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(self.cos * p.x - self.sin * p.y, self.sin * p.x + self.cos * p.y)
    }

    pub fn apply_all(&self, c: &Configuration<T>) -> Configuration<T> {
        c.map(|p| self.apply(p))
    }
}

#[derive(Debug, Clone)]
pub struct GpaResult<T: Scalar = f64> {
    /// Unit-size, zero-centroid shapes rotated onto `mean`, in input order.
    pub aligned: Vec<Configuration<T>>,
    /// Consensus shape; its knot-1 to knot-11 vector points along +x.
    pub mean: Configuration<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Translates to zero centroid and scales to unit centroid size.
pub fn preshape<T: Scalar>(c: &Configuration<T>) -> Option<Configuration<T>> {
    let centroid = c.centroid();
    let centered = c.map(|p| p - centroid);
    let size = centered.centroid_size();
    if !(size > T::epsilon()) || !size.is_finite() {
        return None;
    }
    Some(centered.map(|p| p * (T::one() / size)))
}

/// Rotation minimizing the squared distance from rotated `x` to `target`.
///
/// Both inputs must be centred. Only proper rotations are considered; if the
/// cross-covariance vanishes the identity is returned.
pub fn optimal_rotation<T: Scalar>(x: &Configuration<T>, target: &Configuration<T>) -> Rotation2<T> {
    let (mut re, mut im) = (T::zero(), T::zero());
    for (p, q) in x.landmarks.iter().zip(target.landmarks.iter()) {
        re = re + p.x * q.x + p.y * q.y;
        im = im + p.x * q.y - p.y * q.x;
    }
    let n = re.hypot(im);
    if n == T::zero() {
        return Rotation2::identity();
    }
    Rotation2 {
        cos: re / n,
        sin: im / n,
    }
}

/// Riemannian shape distance between two configurations.
pub fn procrustes_distance<T: Scalar>(a: &Configuration<T>, b: &Configuration<T>) -> Option<T> {
    let a = preshape(a)?;
    let b = preshape(b)?;
    let r = optimal_rotation(&a, &b);
    let ra = r.apply_all(&a);
    let c: T = ra
        .landmarks
        .iter()
        .zip(b.landmarks.iter())
        .map(|(p, q)| p.dot(*q))
        .fold(T::zero(), |s, v| s + v);
    Some(c.min(T::one()).acos())
}

fn flat_dist<T: Scalar>(a: &Configuration<T>, b: &Configuration<T>) -> T {
    a.landmarks
        .iter()
        .zip(b.landmarks.iter())
        .map(|(p, q)| {
            let d = *p - *q;
            d.dot(d)
        })
        .fold(T::zero(), |s, v| s + v)
        .sqrt()
}

fn consensus<T: Scalar>(aligned: &[Configuration<T>]) -> Configuration<T> {
    let n = T::from_usize_lossy(aligned.len());
    let mut sum = [Point2::zero(); crate::geometry::N_KNOTS];
    for c in aligned {
        for (s, &p) in sum.iter_mut().zip(c.landmarks.iter()) {
            *s = *s + p;
        }
    }
    let mean = Configuration::new(sum.map(|p| Point2::new(p.x / n, p.y / n)));
    // The mean of unit shapes is only zero in pathological cases.
    preshape(&mean).unwrap_or(mean)
}

/// Generalized Procrustes alignment (rotation-only, unit centroid size).
///
/// Starts from the first shape as consensus and alternates rotating every
/// shape onto the consensus with recomputing it, until the consensus moves
/// by less than 1e-10 (flat norm) or 100 passes have run. The final
/// consensus is rotated so its end-to-end vector points along +x, which
/// makes the output independent of any rotation shared by all inputs.
pub fn gpa_align<T: Scalar>(configs: &[Configuration<T>]) -> Result<GpaResult<T>, ShapeError> {
    if configs.len() < 2 {
        return Err(ShapeError::TooFew {
            needed: 2,
            got: configs.len(),
        });
    }
    let pre: Vec<Configuration<T>> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| preshape(c).ok_or(ShapeError::Degenerate(i)))
        .collect::<Result<_, _>>()?;

    let tol = T::solver_tol(CONVERGENCE_TOL);
    let mut mean = pre[0];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let aligned: Vec<_> = pre
            .iter()
            .map(|c| optimal_rotation(c, &mean).apply_all(c))
            .collect();
        let next = consensus(&aligned);
        let change = flat_dist(&next, &mean);
        mean = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    let axis = mean.last() - mean.first();
    let canon = if axis.norm() > T::zero() {
        let a = axis * (T::one() / axis.norm());
        Rotation2 {
            cos: a.x,
            sin: -a.y,
        }
    } else {
        Rotation2::identity()
    };
    let mean = canon.apply_all(&mean);
    let aligned = pre
        .iter()
        .map(|c| optimal_rotation(c, &mean).apply_all(c))
        .collect();
    Ok(GpaResult {
        aligned,
        mean,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::N_KNOTS;

    fn arch(bump: f64) -> Configuration<f64> {
        let mut l = [Point2::zero(); N_KNOTS];
        for (k, p) in l.iter_mut().enumerate() {
            let t = k as f64 / 10.0;
            *p = Point2::new(60.0 * t - 30.0, 25.0 * (std::f64::consts::PI * t).sin() + bump * t * t);
        }
        Configuration::new(l)
    }

    fn similarity(c: &Configuration<f64>, deg: f64, s: f64, tx: f64, ty: f64) -> Configuration<f64> {
        let r = Rotation2::from_angle(deg.to_radians());
        c.map(|p| r.apply(p) * s + Point2::new(tx, ty))
    }

    #[test]
    fn identical_inputs() {
        let a = arch(0.0);
        let g = gpa_align(&[a, a]).unwrap();
        assert!(g.converged);
        assert!(g.iterations <= 2);
        assert!(flat_dist(&g.aligned[0], &g.aligned[1]) < 1e-14);
        assert!(flat_dist(&g.aligned[0], &g.mean) < 1e-14);
    }

    #[test]
    fn similar_copy_coincides() {
        let a = arch(3.0);
        let b = similarity(&a, 37.0, 2.4, 5.0, -3.0);
        let g = gpa_align(&[a, b]).unwrap();
        assert!(flat_dist(&g.aligned[0], &g.aligned[1]) < 1e-8);
    }

    #[test]
    fn outputs_are_preshapes() {
        let g = gpa_align(&[arch(0.0), arch(5.0), arch(-4.0)]).unwrap();
        for a in &g.aligned {
            assert!(a.centroid().norm() < 1e-12);
            assert!((a.centroid_size() - 1.0).abs() < 1e-12);
        }
        assert!((g.mean.last() - g.mean.first()).y.abs() < 1e-12);
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let flat = Configuration::new([Point2::new(1.0, 1.0); N_KNOTS]);
        assert_eq!(gpa_align(&[arch(0.0), flat]).unwrap_err(), ShapeError::Degenerate(1));
        assert!(matches!(gpa_align(&[arch(0.0)]), Err(ShapeError::TooFew { .. })));
    }

    #[test]
    fn rotation_is_proper() {
        let a = preshape(&arch(1.0)).unwrap();
        let b = preshape(&similarity(&arch(2.0), 170.0, 1.0, 0.0, 0.0)).unwrap();
        let r = optimal_rotation(&a, &b);
        assert!((r.det() - 1.0).abs() < 1e-12);
    }
}
