//! Shape statistics over 11-landmark configurations: generalized Procrustes
//! alignment, tangent-space projection and PCA.

use thiserror::Error;

mod gpa;
mod pca;

pub use gpa::{gpa_align, optimal_rotation, preshape, procrustes_distance, GpaResult, Rotation2};
pub use pca::{fit_pca, tangent_project, PcaModel};

use crate::geometry::Configuration;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("need at least {needed} inputs, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("configuration {0} is degenerate (zero centroid size)")]
    Degenerate(usize),
    #[error("requested {requested} components but the model has {available}")]
    ComponentRange { requested: usize, available: usize },
    #[error("vector {index} has length {len}, expected {expected}")]
    Dimension {
        index: usize,
        len: usize,
        expected: usize,
    },
}

/// Output of [`fit_shape_space`]: the alignment, the PCA model and each
/// input's tangent coordinates (same order as the input).
#[derive(Debug, Clone)]
pub struct ShapeSpace<T: Scalar = f64> {
    pub gpa: GpaResult<T>,
    pub pca: PcaModel<T>,
    pub tangents: Vec<Vec<T>>,
}

/// GPA, tangent projection at the consensus, then PCA.
pub fn fit_shape_space<T: Scalar>(configs: &[Configuration<T>]) -> Result<ShapeSpace<T>, ShapeError> {
    if configs.len() < 3 {
        return Err(ShapeError::TooFew {
            needed: 3,
            got: configs.len(),
        });
    }
    let gpa = gpa_align(configs)?;
    let tangents: Vec<Vec<T>> = gpa
        .aligned
        .iter()
        .map(|a| tangent_project(a, &gpa.mean))
        .collect();
    let pca = fit_pca(&tangents, &gpa.mean)?;
    Ok(ShapeSpace { gpa, pca, tangents })
}
