//! 2-D points and the 11-landmark tongue configuration.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Number of tracked landmarks along the tongue, vallecula (index 0) to tip (index 10).
pub const N_KNOTS: usize = 11;

/// Length of a flattened configuration, `(x1, y1, ..., x11, y11)`.
pub const SHAPE_DIM: usize = 2 * N_KNOTS;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// Multiplication as complex numbers `(x + iy)(a + ib)`.
    pub fn cmul(self, other: Self) -> Self {
        Self::new(
            self.x * other.x - self.y * other.y,
            self.x * other.y + self.y * other.x,
        )
    }

    /// Division as complex numbers.
    pub fn cdiv(self, other: Self) -> Self {
        let d = other.x * other.x + other.y * other.y;
        Self::new(
            (self.x * other.x + self.y * other.y) / d,
            (self.y * other.x - self.x * other.y) / d,
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(
            U::from_f64(self.x.as_f64()).unwrap(),
            U::from_f64(self.y.as_f64()).unwrap(),
        )
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// An ordered set of 11 landmarks.
///
/// Coordinates are millimetres for raw contours and dimensionless once
/// normalized by Procrustes alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Configuration<T = f64> {
    pub landmarks: [Point2<T>; N_KNOTS],
}

impl<T: Scalar> Configuration<T> {
    pub fn new(landmarks: [Point2<T>; N_KNOTS]) -> Self {
        Self { landmarks }
    }

    pub fn from_flat(v: &[T]) -> Self {
        assert_eq!(v.len(), SHAPE_DIM, "flat shape must have {SHAPE_DIM} entries");
        let mut landmarks = [Point2::zero(); N_KNOTS];
        for (k, p) in landmarks.iter_mut().enumerate() {
            *p = Point2::new(v[2 * k], v[2 * k + 1]);
        }
        Self { landmarks }
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.landmarks.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn centroid(&self) -> Point2<T> {
        let n = T::from_usize_lossy(N_KNOTS);
        let s = self
            .landmarks
            .iter()
            .fold(Point2::zero(), |acc, &p| acc + p);
        Point2::new(s.x / n, s.y / n)
    }

    /// Root sum of squared distances from the centroid.
    pub fn centroid_size(&self) -> T {
        let c = self.centroid();
        self.landmarks
            .iter()
            .map(|&p| {
                let d = p - c;
                d.dot(d)
            })
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn map(&self, mut f: impl FnMut(Point2<T>) -> Point2<T>) -> Self {
        let mut out = *self;
        for p in out.landmarks.iter_mut() {
            *p = f(*p);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.landmarks.iter().all(|p| p.is_finite())
    }

    /// Vallecula end (knot 1).
    pub fn first(&self) -> Point2<T> {
        self.landmarks[0]
    }

    /// Tip end (knot 11).
    pub fn last(&self) -> Point2<T> {
        self.landmarks[N_KNOTS - 1]
    }
}
