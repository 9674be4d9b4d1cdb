//! Precomputed contour grid over (F1, F2) with bilinear lookup.
//!
//! File layout, little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `AURL` |
//! | 4 | 4 | u32 version (1) |
//! | 8 | 32 | SHA-256 corpus digest of the source model |
//! | 40 | 4 | u32 number of F1 nodes |
//! | 44 | 4 | u32 number of F2 nodes |
//! | 48 | 48 | f64 f1_lo, f1_hi, f1_step, f2_lo, f2_hi, f2_step |
//! | 96 | 4 | u32 points per contour (100) |
//! | 100 | n1·n2·800 | f32 x, y per point, node (i, j) at index i·n2 + j |
//! | … | n1·n2 | u8 per node, 1 if the node was extrapolated |
//!
//! Node `k` of an axis sits at `lo + k·step`, except the last which is `hi`.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::Point2;
use crate::inversion::{invert, knot_indices, InversionError, TongueContour, N_POINTS};
use crate::regress::ModelBundle;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"AURL";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 100;
pub const DEFAULT_CELL_CAP: usize = 500_000;

const NODE_FLOATS: usize = 2 * N_POINTS;

#[derive(Debug, Error)]
pub enum LutError {
    #[error("not a lookup table file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported lookup table version {0}, this build reads version 1")]
    UnsupportedVersion(u32),
    #[error("lookup table truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("inconsistent lookup table: {0}")]
    Inconsistent(String),
    #[error("grid of {cells} cells exceeds the cap of {cap}; use a larger step")]
    TooLarge { cells: usize, cap: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One uniformly stepped axis whose last node is clamped to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, LutError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(LutError::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(LutError::InvalidGrid(format!("range {lo}..{hi} is empty")));
        }
        let intervals = ((hi - lo) / step - 1e-9).ceil();
        if !(intervals < u32::MAX as f64) {
            return Err(LutError::InvalidGrid(format!("range {lo}..{hi} at step {step} has too many nodes")));
        }
        let n = intervals as usize + 1;
        Ok(Self { lo, hi, step, n })
    }

    pub fn value(&self, k: usize) -> f64 {
        if k + 1 >= self.n {
            self.hi
        } else {
            self.lo + self.step * k as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.value(k)).collect()
    }

    /// Lower node index and fractional position within its interval, after
    /// clamping to the axis. The flag reports whether clamping happened.
    fn locate(&self, v: f64) -> (usize, f64, bool) {
        let clamped = !(v >= self.lo && v <= self.hi);
        let v = if v.is_nan() { self.lo } else { v.clamp(self.lo, self.hi) };
        let mut k = (((v - self.lo) / self.step).floor().max(0.0) as usize).min(self.n - 2);
        if k + 2 < self.n && v >= self.value(k + 1) {
            k += 1;
        }
        let (a, b) = (self.value(k), self.value(k + 1));
        (k, ((v - a) / (b - a)).clamp(0.0, 1.0), clamped)
    }
}

/// Grid ranges and resolution for [`compile_lut`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LutSpec {
    pub f1_lo: f64,
    pub f1_hi: f64,
    pub f2_lo: f64,
    pub f2_hi: f64,
    pub step: f64,
    pub cell_cap: usize,
}

impl Default for LutSpec {
    fn default() -> Self {
        Self {
            f1_lo: 320.0,
            f1_hi: 903.0,
            f2_lo: 828.0,
            f2_hi: 2616.0,
            step: 10.0,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// Header fields, readable without the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct LutHeader {
    pub version: u32,
    pub digest: [u8; 32],
    pub f1: Axis,
    pub f2: Axis,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    pub header: LutHeader,
    /// `n1 * n2 * 200` floats, x then y per point.
    contours: Vec<f32>,
    extrapolated: Vec<bool>,
}

/// Runs [`invert`] at every grid node.
pub fn compile_lut<T: Scalar>(bundle: &ModelBundle<T>, spec: &LutSpec) -> Result<LookupTable, LutError> {
    let f1 = Axis::new(spec.f1_lo, spec.f1_hi, spec.step)?;
    let f2 = Axis::new(spec.f2_lo, spec.f2_hi, spec.step)?;
    let cells = f1.n.saturating_mul(f2.n);
    if cells > spec.cell_cap {
        return Err(LutError::TooLarge {
            cells,
            cap: spec.cell_cap,
        });
    }
    let mut contours = Vec::with_capacity(cells * NODE_FLOATS);
    let mut extrapolated = Vec::with_capacity(cells);
    for a in f1.values() {
        for b in f2.values() {
            let c = invert(bundle, T::lit(a), T::lit(b))?;
            for p in &c.points {
                contours.push(p.x.to_f32().unwrap_or(f32::NAN));
                contours.push(p.y.to_f32().unwrap_or(f32::NAN));
            }
            extrapolated.push(c.extrapolated);
        }
    }
    Ok(LookupTable {
        header: LutHeader {
            version: VERSION,
            digest: bundle.digest_bytes(),
            f1,
            f2,
            n_points: N_POINTS,
        },
        contours,
        extrapolated,
    })
}

impl LookupTable {
    pub fn dims(&self) -> (usize, usize) {
        (self.header.f1.n, self.header.f2.n)
    }

    pub fn node_count(&self) -> usize {
        self.header.f1.n * self.header.f2.n
    }

    fn node(&self, i: usize, j: usize) -> &[f32] {
        let k = (i * self.header.f2.n + j) * NODE_FLOATS;
        &self.contours[k..k + NODE_FLOATS]
    }

    pub fn node_extrapolated(&self, i: usize, j: usize) -> bool {
        self.extrapolated[i * self.header.f2.n + j]
    }

    /// Bilinear blend of the four surrounding node contours. Inputs
    /// outside the grid are clamped to it and the result is flagged.
    pub fn query<T: Scalar>(&self, f1: T, f2: T) -> TongueContour<T> {
        let mut out = TongueContour {
            points: vec![Point2::zero(); N_POINTS],
            knot_indices: knot_indices(),
            extrapolated: false,
            source_f1_hz: f1,
            source_f2_hz: f2,
        };
        self.query_into(f1, f2, &mut out);
        out
    }

    /// As [`LookupTable::query`] but writes into an existing contour.
    pub fn query_into<T: Scalar>(&self, f1: T, f2: T, out: &mut TongueContour<T>) {
        let (i, u, c1) = self.header.f1.locate(f1.as_f64());
        let (j, v, c2) = self.header.f2.locate(f2.as_f64());
        let w = [(1.0 - u) * (1.0 - v), (1.0 - u) * v, u * (1.0 - v), u * v];
        let corners = [(i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)];
        let mut flagged = c1 || c2;
        let mut acc = [0.0f64; NODE_FLOATS];
        for (&(a, b), &wk) in corners.iter().zip(&w) {
            if wk == 0.0 {
                continue;
            }
            flagged |= self.node_extrapolated(a, b);
            for (s, &c) in acc.iter_mut().zip(self.node(a, b)) {
                *s += wk * c as f64;
            }
        }
        out.points.resize(N_POINTS, Point2::zero());
        for (p, xy) in out.points.iter_mut().zip(acc.chunks_exact(2)) {
            *p = Point2::new(T::lit(xy[0]), T::lit(xy[1]));
        }
        out.knot_indices = knot_indices();
        out.extrapolated = flagged;
        out.source_f1_hz = f1;
        out.source_f2_hz = f2;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut b = Vec::with_capacity(HEADER_LEN + self.contours.len() * 4 + self.extrapolated.len());
        b.extend_from_slice(&MAGIC);
        b.extend_from_slice(&h.version.to_le_bytes());
        b.extend_from_slice(&h.digest);
        b.extend_from_slice(&(h.f1.n as u32).to_le_bytes());
        b.extend_from_slice(&(h.f2.n as u32).to_le_bytes());
        for v in [h.f1.lo, h.f1.hi, h.f1.step, h.f2.lo, h.f2.hi, h.f2.step] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&(h.n_points as u32).to_le_bytes());
        for v in &self.contours {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend(self.extrapolated.iter().map(|&e| u8::from(e)));
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LutError> {
        let header = parse_header(bytes, bytes.len() as u64)?;
        let cells = header.f1.n * header.f2.n;
        let payload = &bytes[HEADER_LEN..];
        let floats = cells * NODE_FLOATS;
        let contours = payload[..floats * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut extrapolated = Vec::with_capacity(cells);
        for &f in &payload[floats * 4..] {
            match f {
                0 => extrapolated.push(false),
                1 => extrapolated.push(true),
                other => return Err(LutError::Inconsistent(format!("extrapolation flag byte {other}"))),
            }
        }
        Ok(Self {
            header,
            contours,
            extrapolated,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LutError> {
        let mut f = File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LutError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Total file size implied by a header.
pub fn expected_len(n1: usize, n2: usize) -> u64 {
    let cells = n1 as u64 * n2 as u64;
    HEADER_LEN as u64 + cells * NODE_FLOATS as u64 * 4 + cells
}

fn parse_header(bytes: &[u8], file_len: u64) -> Result<LutHeader, LutError> {
    if bytes.len() < 4 {
        return Err(LutError::Truncated {
            expected: HEADER_LEN as u64,
            found: file_len,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(LutError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(LutError::Truncated {
            expected: HEADER_LEN as u64,
            found: file_len,
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(LutError::UnsupportedVersion(version));
    }
    let mut digest = [0u8; 32];
    digest.copy_from_slice(&bytes[8..40]);
    let (n1, n2) = (u32_at(40) as usize, u32_at(44) as usize);
    let axis = |lo: f64, hi: f64, step: f64, n: usize, name: &str| -> Result<Axis, LutError> {
        let a = Axis::new(lo, hi, step).map_err(|e| LutError::Inconsistent(format!("{name} axis: {e}")))?;
        if a.n != n || n < 2 {
            return Err(LutError::Inconsistent(format!(
                "{name} axis has {n} nodes but its range and step imply {}",
                a.n
            )));
        }
        Ok(a)
    };
    let f1 = axis(f64_at(48), f64_at(56), f64_at(64), n1, "F1")?;
    let f2 = axis(f64_at(72), f64_at(80), f64_at(88), n2, "F2")?;
    let n_points = u32_at(96) as usize;
    if n_points != N_POINTS {
        return Err(LutError::Inconsistent(format!("{n_points} points per contour, expected {N_POINTS}")));
    }
    let expected = expected_len(n1, n2);
    if file_len < expected {
        return Err(LutError::Truncated {
            expected,
            found: file_len,
        });
    }
    if file_len > expected {
        return Err(LutError::Inconsistent(format!("{} trailing bytes", file_len - expected)));
    }
    Ok(LutHeader {
        version,
        digest,
        f1,
        f2,
        n_points,
    })
}

/// Reads and validates only the 100-byte header, checking the file size
/// against it without reading the payload.
pub fn inspect_header(path: impl AsRef<Path>) -> Result<LutHeader, LutError> {
    let mut f = File::open(path)?;
    let len = f.metadata()?.len();
    let mut buf = Vec::with_capacity(HEADER_LEN);
    Read::take(&mut f, HEADER_LEN as u64).read_to_end(&mut buf)?;
    parse_header(&buf, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthSpec};
    use crate::regress::train;
    use std::sync::OnceLock;

    fn bundle() -> &'static ModelBundle<f64> {
        static B: OnceLock<ModelBundle<f64>> = OnceLock::new();
        B.get_or_init(|| {
            let (c, _) = synth_corpus(&SynthSpec::<f64>::noiseless(4, 2), 3);
            train(&c.to_csv_bytes()).unwrap()
        })
    }

    fn small_spec(step: f64) -> LutSpec {
        LutSpec {
            f1_lo: 400.0,
            f1_hi: 560.0,
            f2_lo: 1200.0,
            f2_hi: 1500.0,
            step,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }

    fn small() -> &'static LookupTable {
        static T: OnceLock<LookupTable> = OnceLock::new();
        T.get_or_init(|| compile_lut(bundle(), &small_spec(20.0)).unwrap())
    }

    #[test]
    fn default_axes() {
        let s = LutSpec::default();
        let a = Axis::new(s.f1_lo, s.f1_hi, s.step).unwrap();
        let b = Axis::new(s.f2_lo, s.f2_hi, s.step).unwrap();
        assert_eq!((a.n, b.n), (60, 180));
        assert_eq!(a.value(58), 900.0);
        assert_eq!(a.value(59), 903.0);
        assert_eq!(Axis::new(0.0, 100.0, 10.0).unwrap().n, 11);
        assert!(Axis::new(0.0, 100.0, 0.0).is_err());
        assert!(Axis::new(5.0, 5.0, 1.0).is_err());
        assert!(Axis::new(-1e308, 1e308, 1e-300).is_err());
        assert!(Axis::new(0.0, 1e12, 1e-3).is_err());
    }

    #[test]
    fn node_query_equals_direct_inversion() {
        let t = small();
        let f1 = t.header.f1.values();
        let f2 = t.header.f2.values();
        for (i, &a) in f1.iter().enumerate().step_by(3) {
            for (j, &b) in f2.iter().enumerate().step_by(4) {
                let q = t.query::<f64>(a, b);
                let d = invert(bundle(), a, b).unwrap();
                for (p, r) in q.points.iter().zip(&d.points) {
                    assert_eq!(p.x, r.x as f32 as f64);
                    assert_eq!(p.y, r.y as f32 as f64);
                }
                assert_eq!(q.extrapolated, t.node_extrapolated(i, j));
            }
        }
    }

    #[test]
    fn cell_centre_is_corner_average() {
        let t = small();
        let (a0, a1) = (t.header.f1.value(2), t.header.f1.value(3));
        let (b0, b1) = (t.header.f2.value(5), t.header.f2.value(6));
        let q = t.query::<f64>((a0 + a1) / 2.0, (b0 + b1) / 2.0);
        let c = [t.query::<f64>(a0, b0), t.query::<f64>(a0, b1), t.query::<f64>(a1, b0), t.query::<f64>(a1, b1)];
        for k in 0..N_POINTS {
            let mx = c.iter().map(|x| x.points[k].x).sum::<f64>() / 4.0;
            let my = c.iter().map(|x| x.points[k].y).sum::<f64>() / 4.0;
            assert!((q.points[k].x - mx).abs() < 1e-12);
            assert!((q.points[k].y - my).abs() < 1e-12);
        }
    }

    #[test]
    fn continuous_across_cell_edges() {
        let t = small();
        let edge = t.header.f1.value(4);
        let below = t.query::<f64>(edge - 1e-9, 1333.0);
        let above = t.query::<f64>(edge + 1e-9, 1333.0);
        for (p, q) in below.points.iter().zip(&above.points) {
            assert!(p.dist(*q) < 1e-6);
        }
        let at = t.query::<f64>(edge, 1333.0);
        for (p, q) in below.points.iter().zip(&at.points) {
            assert!(p.dist(*q) < 1e-6);
        }
    }

    #[test]
    fn outside_queries_are_clamped_and_flagged() {
        let t = small();
        let q = t.query::<f64>(100.0, 5000.0);
        let corner = t.query::<f64>(400.0, 1500.0);
        assert!(q.extrapolated);
        assert_eq!(q.points, corner.points);
        assert_eq!(q.source_f1_hz, 100.0);
        assert!(!t.query::<f64>(480.0, 1300.0).extrapolated);
    }

    #[test]
    fn short_last_interval() {
        let t = compile_lut(bundle(), &small_spec(70.0)).unwrap();
        assert_eq!(t.header.f1.values(), vec![400.0, 470.0, 540.0, 560.0]);
        let q = t.query::<f64>(550.0, 1300.0);
        let a = t.query::<f64>(540.0, 1300.0);
        let b = t.query::<f64>(560.0, 1300.0);
        assert!((q.points[50].y - (a.points[50].y + b.points[50].y) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let mut s = LutSpec::default();
        s.step = 0.5;
        assert!(matches!(compile_lut(bundle(), &s), Err(LutError::TooLarge { .. })));
    }

    #[test]
    fn byte_round_trip_and_determinism() {
        let t = small();
        let bytes = t.to_bytes();
        assert_eq!(bytes.len() as u64, expected_len(t.header.f1.n, t.header.f2.n));
        assert_eq!(&bytes[..4], b"AURL");
        let back = LookupTable::from_bytes(&bytes).unwrap();
        assert_eq!(&back, t);
        let again = compile_lut(bundle(), &small_spec(20.0)).unwrap();
        assert_eq!(again.to_bytes(), bytes);
        assert_eq!(t.header.digest, bundle().digest_bytes());
    }

    #[test]
    fn corrupt_inputs_give_typed_errors() {
        let bytes = small().to_bytes();
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(matches!(LookupTable::from_bytes(&b), Err(LutError::BadMagic)));
        let mut b = bytes.clone();
        b[4] = 2;
        assert!(matches!(LookupTable::from_bytes(&b), Err(LutError::UnsupportedVersion(2))));
        assert!(matches!(
            LookupTable::from_bytes(&bytes[..bytes.len() - 7]),
            Err(LutError::Truncated { .. })
        ));
        assert!(matches!(LookupTable::from_bytes(&bytes[..50]), Err(LutError::Truncated { .. })));
        let mut b = bytes.clone();
        b[40] = b[40].wrapping_add(1);
        assert!(matches!(LookupTable::from_bytes(&b), Err(LutError::Inconsistent(_))));
        let mut b = bytes.clone();
        b[96] = 99;
        assert!(matches!(LookupTable::from_bytes(&b), Err(LutError::Inconsistent(_))));
        let mut b = bytes.clone();
        *b.last_mut().unwrap() = 7;
        assert!(matches!(LookupTable::from_bytes(&b), Err(LutError::Inconsistent(_))));
    }

    #[test]
    fn header_inspection_matches_full_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.lut");
        small().save(&p).unwrap();
        let h = inspect_header(&p).unwrap();
        assert_eq!(h, LookupTable::load(&p).unwrap().header);
        std::fs::write(&p, &small().to_bytes()[..2000]).unwrap();
        assert!(matches!(inspect_header(&p), Err(LutError::Truncated { .. })));
    }

    #[test]
    fn refinement_does_not_increase_error() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let qs: Vec<(f64, f64)> = (0..100)
            .map(|_| (rng.random_range(400.0..560.0), rng.random_range(1200.0..1500.0)))
            .collect();
        let mut last = f64::INFINITY;
        for step in [80.0, 40.0, 20.0, 10.0] {
            let t = compile_lut(bundle(), &small_spec(step)).unwrap();
            let mut worst = 0.0f64;
            for &(a, b) in &qs {
                let q = t.query::<f64>(a, b);
                let d = invert(bundle(), a, b).unwrap();
                for (p, r) in q.points.iter().zip(&d.points) {
                    worst = worst.max((p.x - r.x).abs()).max((p.y - r.y).abs());
                }
            }
            assert!(worst <= last, "step {step}: {worst} > {last}");
            last = worst;
        }
    }
}
