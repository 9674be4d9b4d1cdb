use std::sync::Arc;

use num_traits::Float;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::linalg::{balance, hessenberg_eigenvalues};
use crate::scalar::Scalar;

/// Scalars usable by the FFT-backed parts of the tracker.
pub trait AudioScalar: Scalar + FftNum {}
impl AudioScalar for f32 {}
impl AudioScalar for f64 {}

/// Floor applied to every dB value in place of minus infinity.
pub const DB_FLOOR: f64 = -200.0;

const MIN_FORMANT_HZ: f64 = 90.0;
const NYQUIST_MARGIN_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub freq_hz: f64,
    pub bandwidth_hz: f64,
}

/// Prediction polynomial `A(z) = 1 - sum_k a_k z^-k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lpc<T = f64> {
    /// `a_1 .. a_p`.
    pub coefficients: Vec<T>,
    /// Residual prediction error energy.
    pub gain: T,
    pub reflection: Vec<T>,
    /// Set when the frame had no energy; coefficients are then all zero.
    pub silent: bool,
}

/// `y[n] = x[n] - a x[n-1]`, `y[0] = x[0]`.
pub fn preemphasize<T: Scalar>(x: &[T], a: T) -> Vec<T> {
    let mut y = Vec::with_capacity(x.len());
    preemphasize_into(x, a, &mut y);
    y
}

pub(crate) fn preemphasize_into<T: Scalar>(x: &[T], a: T, y: &mut Vec<T>) {
    y.clear();
    y.extend(x.iter().enumerate().map(|(n, &v)| if n == 0 { v } else { v - a * x[n - 1] }));
}

/// Symmetric Hamming window of length `n`.
pub fn hamming<T: Scalar>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let d = (n - 1) as f64;
    (0..n)
        .map(|i| T::lit(0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / d).cos()))
        .collect()
}

/// Biased autocorrelation `r[0..=p]`.
pub fn autocorrelation<T: Scalar>(x: &[T], p: usize) -> Vec<T> {
    (0..=p)
        .map(|lag| {
            x[lag.min(x.len())..]
                .iter()
                .zip(x)
                .fold(T::zero(), |s, (&a, &b)| s + a * b)
        })
        .collect()
}

/// Levinson-Durbin solution of the autocorrelation normal equations.
///
/// Stops early, leaving the remaining coefficients zero, if the error
/// energy stops being positive.
pub fn levinson_durbin<T: Scalar>(r: &[T]) -> Lpc<T> {
    let p = r.len() - 1;
    let mut a = vec![T::zero(); p];
    let mut refl = vec![T::zero(); p];
    if !(r[0] > T::zero()) || !r[0].is_finite() {
        return Lpc {
            coefficients: a,
            gain: T::zero(),
            reflection: refl,
            silent: true,
        };
    }
    let mut err = r[0];
    let mut prev = vec![T::zero(); p];
    for i in 0..p {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc = acc - a[j] * r[i - j];
        }
        let k = acc / err;
        let next = err * (T::one() - k * k);
        if !(next > T::zero()) || Float::abs(k) >= T::one() {
            break;
        }
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a[i] = k;
        refl[i] = k;
        err = next;
    }
    Lpc {
        coefficients: a,
        gain: err,
        reflection: refl,
        silent: false,
    }
}

/// LPC of an already windowed frame.
pub fn lpc_coefficients<T: Scalar>(frame: &[T], order: usize) -> Lpc<T> {
    assert!(order < frame.len(), "LPC order must be below the frame length");
    levinson_durbin(&autocorrelation(frame, order))
}

/// Resonances of `1 / A(z)` from the roots of `A`, filtered and sorted by
/// frequency. `None` if the eigenvalue iteration did not converge.
pub fn formants_from_lpc<T: Scalar>(
    a: &[T],
    sample_rate: f64,
    max_bandwidth_hz: f64,
    max_formants: usize,
) -> Option<Vec<Formant>> {
    let p = a.len();
    if p == 0 || a.iter().all(|&v| v == T::zero()) {
        return Some(Vec::new());
    }
    // Companion matrix of z^p - a_1 z^(p-1) - ... - a_p, already Hessenberg.
    let mut h = vec![T::zero(); p * p];
    h[..p].copy_from_slice(a);
    for i in 1..p {
        h[i * p + i - 1] = T::one();
    }
    balance(&mut h, p);
    let roots = hessenberg_eigenvalues(&mut h, p)?;
    let nyq = sample_rate / 2.0;
    let mut out: Vec<Formant> = roots
        .into_iter()
        .filter(|&(_, im)| im > T::zero())
        .map(|(re, im)| {
            let (re, im) = (re.as_f64(), im.as_f64());
            Formant {
                freq_hz: im.atan2(re) * sample_rate / (2.0 * std::f64::consts::PI),
                bandwidth_hz: -(sample_rate / std::f64::consts::PI) * re.hypot(im).ln(),
            }
        })
        .filter(|f| {
            f.freq_hz >= MIN_FORMANT_HZ
                && f.freq_hz <= nyq - NYQUIST_MARGIN_HZ
                && f.bandwidth_hz > 0.0
                && f.bandwidth_hz <= max_bandwidth_hz
        })
        .collect();
    out.sort_by(|x, y| x.freq_hz.total_cmp(&y.freq_hz));
    out.truncate(max_formants);
    Some(out)
}

/// Spectral envelope `20 log10(sqrt(gain) / |A(e^jw)|)` at `n_fft / 2 + 1`
/// frequencies from 0 to Nyquist.
pub struct EnvelopeEngine<T: AudioScalar> {
    n_fft: usize,
    fft: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: AudioScalar> EnvelopeEngine<T> {
    pub fn new(n_fft: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        let scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        Self {
            n_fft,
            fft,
            buf: vec![Complex::new(T::zero(), T::zero()); n_fft],
            scratch,
        }
    }

    pub fn envelope_into(&mut self, a: &[T], gain: T, out: &mut Vec<f64>) {
        let zero = Complex::new(T::zero(), T::zero());
        self.buf.iter_mut().for_each(|c| *c = zero);
        self.buf[0] = Complex::new(T::one(), T::zero());
        for (k, &ak) in a.iter().enumerate().take(self.n_fft - 1) {
            self.buf[k + 1] = Complex::new(-ak, T::zero());
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let g = gain.as_f64().max(0.0).sqrt();
        out.clear();
        out.extend(self.buf[..self.n_fft / 2 + 1].iter().map(|c| {
            let mag = c.re.as_f64().hypot(c.im.as_f64());
            let db = 20.0 * (g / mag).log10();
            if db.is_nan() {
                DB_FLOOR
            } else {
                db.max(DB_FLOOR)
            }
        }));
    }
}

/// One-shot form of [`EnvelopeEngine`].
pub fn lpc_envelope<T: AudioScalar>(a: &[T], gain: T, n_fft: usize) -> Vec<f64> {
    let mut out = Vec::new();
    EnvelopeEngine::new(n_fft).envelope_into(a, gain, &mut out);
    out
}

/// `20 log10(x)` floored at [`DB_FLOOR`].
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (20.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}
