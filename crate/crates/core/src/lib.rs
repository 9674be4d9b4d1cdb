//! Formant-to-tongue-contour inversion.
//!
//! A multivariate linear model maps (F1, F2, F1*F2) onto the positions of
//! the two end knots of an 11-landmark tongue contour and onto two
//! tangent-space shape scores. Contours are rebuilt from those six numbers
//! by PCA inversion, an end-knot similarity transform and cubic-spline
//! resampling to 100 points. A lookup table makes the reconstruction cheap
//! enough for live use, and an LPC formant tracker feeds it from audio.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for callers that do not care.

pub mod corpus;
pub mod formants;
pub mod geometry;
pub mod inversion;
pub mod linalg;
pub mod lut;
pub mod regress;
pub mod scalar;
pub mod shapespace;

pub use geometry::{Configuration, Point2, N_KNOTS, SHAPE_DIM};
pub use inversion::TongueContour;
pub use regress::ModelBundle;
pub use scalar::Scalar;

pub type CorpusF64 = corpus::Corpus<f64>;
pub type CorpusF32 = corpus::Corpus<f32>;
pub type PcaModelF64 = shapespace::PcaModel<f64>;
pub type PcaModelF32 = shapespace::PcaModel<f32>;
pub type ModelBundleF64 = regress::ModelBundle<f64>;
pub type ModelBundleF32 = regress::ModelBundle<f32>;
pub type ContourF64 = inversion::TongueContour<f64>;
pub type ContourF32 = inversion::TongueContour<f32>;
pub type TrackerF64 = formants::Tracker<f64>;
pub type TrackerF32 = formants::Tracker<f32>;
