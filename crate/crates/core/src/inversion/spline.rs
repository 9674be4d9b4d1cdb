use crate::geometry::{Point2, N_KNOTS};
use crate::scalar::Scalar;

/// Number of points on a resampled contour.
pub const N_POINTS: usize = 100;

/// Interior samples in each of the 10 knot segments, vallecula end first.
/// Together with the 11 knots this gives 100 samples.
pub const SEGMENT_SAMPLES: [usize; N_KNOTS - 1] = [9, 9, 9, 9, 9, 9, 9, 9, 9, 8];

/// Index of every knot in the resampled contour.
pub fn knot_indices() -> [usize; N_KNOTS] {
    let mut out = [0; N_KNOTS];
    for k in 1..N_KNOTS {
        out[k] = out[k - 1] + SEGMENT_SAMPLES[k - 1] + 1;
    }
    out
}

/// The 100 spline parameter values, with knot k (0-based) at `t = k`.
pub fn sample_parameters() -> Vec<f64> {
    let mut ts = Vec::with_capacity(N_POINTS);
    for (seg, &m) in SEGMENT_SAMPLES.iter().enumerate() {
        ts.push(seg as f64);
        for j in 1..=m {
            ts.push(seg as f64 + j as f64 / (m + 1) as f64);
        }
    }
    ts.push((N_KNOTS - 1) as f64);
    ts
}

/// Second derivatives of the natural cubic spline through `y` on unit
/// spacing (Thomas algorithm on the 9 interior equations).
pub fn natural_second_derivatives<T: Scalar>(y: &[T; N_KNOTS]) -> [T; N_KNOTS] {
    let n = N_KNOTS - 2;
    let (four, six) = (T::lit(4.0), T::lit(6.0));
    let mut c = [T::zero(); N_KNOTS];
    let mut d = [T::zero(); N_KNOTS];
    for i in 0..n {
        let rhs = six * (y[i + 2] - y[i + 1] - (y[i + 1] - y[i]));
        let denom = if i == 0 { four } else { four - c[i - 1] };
        c[i] = T::one() / denom;
        d[i] = if i == 0 { rhs / denom } else { (rhs - d[i - 1]) / denom };
    }
    let mut m = [T::zero(); N_KNOTS];
    for i in (0..n).rev() {
        m[i + 1] = if i + 1 == n { d[i] } else { d[i] - c[i] * m[i + 2] };
    }
    m
}

fn eval<T: Scalar>(y: &[T; N_KNOTS], m: &[T; N_KNOTS], t: f64) -> T {
    let seg = (t.floor() as usize).min(N_KNOTS - 2);
    let u = T::lit(t - seg as f64);
    let w = T::one() - u;
    let six = T::lit(6.0);
    w * y[seg] + u * y[seg + 1] + ((w * w * w - w) * m[seg] + (u * u * u - u) * m[seg + 1]) / six
}

/// Natural cubic spline through the knots, x and y independently,
/// resampled at [`sample_parameters`]. Knot samples are the knots exactly.
pub fn resample<T: Scalar>(knots: &[Point2<T>; N_KNOTS]) -> Vec<Point2<T>> {
    let xs = knots.map(|p| p.x);
    let ys = knots.map(|p| p.y);
    let mx = natural_second_derivatives(&xs);
    let my = natural_second_derivatives(&ys);
    let idx = knot_indices();
    let mut out: Vec<Point2<T>> = sample_parameters()
        .into_iter()
        .map(|t| Point2::new(eval(&xs, &mx, t), eval(&ys, &my, t)))
        .collect();
    for (k, &i) in idx.iter().enumerate() {
        out[i] = knots[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_layout() {
        let ts = sample_parameters();
        assert_eq!(ts.len(), N_POINTS);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        let idx = knot_indices();
        assert_eq!(idx[0], 0);
        assert_eq!(idx[10], 99);
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(ts[i], k as f64);
        }
        assert_eq!(SEGMENT_SAMPLES.iter().sum::<usize>(), 89);
    }

    #[test]
    fn collinear_knots_give_a_line() {
        let knots: [Point2<f64>; N_KNOTS] = std::array::from_fn(|k| Point2::new(2.0 + 3.0 * k as f64, -1.0 + 1.5 * k as f64));
        for p in resample(&knots) {
            // Distance from the line y = (x - 2) / 2 - 1.
            let d = (p.y - ((p.x - 2.0) / 2.0 - 1.0)).abs();
            assert!(d < 1e-9, "{d}");
        }
    }

    /// Natural spline through samples of x^3/100 at x = 0..10, compared with
    /// an independently assembled dense solve of the spline conditions.
    #[test]
    fn cubic_polynomial_against_dense_oracle() {
        let p = |x: f64| x * x * x / 100.0;
        let knots: [Point2<f64>; N_KNOTS] = std::array::from_fn(|k| Point2::new(k as f64, p(k as f64)));
        let got = resample(&knots);

        // Dense Gaussian elimination for [M_0..M_10] with natural ends.
        let n = N_KNOTS;
        let mut a = vec![vec![0.0f64; n + 1]; n];
        a[0][0] = 1.0;
        a[n - 1][n - 1] = 1.0;
        for i in 1..n - 1 {
            a[i][i - 1] = 1.0;
            a[i][i] = 4.0;
            a[i][i + 1] = 1.0;
            a[i][n] = 6.0 * (p(i as f64 + 1.0) - 2.0 * p(i as f64) + p(i as f64 - 1.0));
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let m: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
        for (i, t) in sample_parameters().into_iter().enumerate() {
            let s = (t.floor() as usize).min(n - 2);
            let u = t - s as f64;
            let w = 1.0 - u;
            let want = w * p(s as f64) + u * p(s as f64 + 1.0) + ((w.powi(3) - w) * m[s] + (u.powi(3) - u) * m[s + 1]) / 6.0;
            assert!((got[i].y - want).abs() < 1e-12, "t={t}");
            assert!((got[i].x - t).abs() < 1e-12);
        }

        // The natural end condition forces y'' = 0 at x = 10 although the
        // polynomial has y'' = 0.6 there; the mismatch decays towards the
        // vallecula end by about 2 - sqrt(3) per segment.
        let dev = |seg: usize| {
            sample_parameters()
                .into_iter()
                .zip(&got)
                .filter(|(t, _)| (t.floor() as usize).min(n - 2) == seg)
                .map(|(t, q)| (q.y - p(t)).abs())
                .fold(0.0, f64::max)
        };
        assert!(dev(0) < 1e-6);
        assert!(dev(1) < 1e-6);
        for s in 1..9 {
            assert!(dev(s) > dev(s - 1) || dev(s - 1) < 1e-12);
        }
    }

    #[test]
    fn knots_are_reproduced() {
        let knots: [Point2<f64>; N_KNOTS] = std::array::from_fn(|k| Point2::new((k as f64 * 0.7).sin() * 13.0, (k as f64).sqrt() * 4.0 - 1.0));
        let out = resample(&knots);
        for (k, &i) in knot_indices().iter().enumerate() {
            assert_eq!(out[i], knots[k]);
        }
    }
}
