//! Natural-scene-statistics quality scores: BRISQUE and NIQE.
//!
//! Both metrics share one feature extractor. The luminance image is turned into
//! mean-subtracted contrast-normalized (MSCN) coefficients, a generalized
//! Gaussian is fitted to the coefficients, and asymmetric generalized Gaussians
//! are fitted to the four neighbor-product maps. Two scales give 36 values.
//! BRISQUE feeds the vector to an RBF support vector regressor; NIQE fits a
//! multivariate Gaussian over patch features and measures its distance to a
//! pristine model.

mod brisque;
mod fit;
mod mscn;
mod niqe;

pub use brisque::{brisque_features, brisque_image_score, brisque_score, SvrModel};
pub use fit::{fit_aggd, fit_ggd, ggd_ratio, AggdFit, GgdFit, ALPHA_MAX, ALPHA_MIN, ALPHA_STEP};
pub use mscn::{gaussian_window, mscn, mscn_with_sigma, pairwise_products, MscnMap, MSCN_C};
pub use niqe::{
    fit_mvg, niqe_features, niqe_image_score, niqe_patches, niqe_score, MvgModel, NiqePatch,
    MIN_PATCH_COVERAGE, NIQE_PATCH, SHARPNESS_FRACTION,
};

use crate::media::MediaError;
use std::path::PathBuf;

/// Feature count per scale.
pub const SCALE_FEATURES: usize = 18;
/// Two scales.
pub const FEATURE_DIM: usize = 2 * SCALE_FEATURES;

#[derive(Debug, thiserror::Error)]
pub enum NssError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: invalid model file: {msg}")]
    ModelFile { path: PathBuf, msg: String },
    #[error(transparent)]
    Media(#[from] MediaError),
}

/// The 18 per-scale features of an MSCN map, in this order:
/// GGD shape and variance of the coefficients, then for the horizontal,
/// vertical, main-diagonal and anti-diagonal products the AGGD
/// shape, mean, left variance and right variance.
pub fn scale_features(mscn: &crate::media::Plane) -> Result<[f64; SCALE_FEATURES], NssError> {
    let mut out = [0.0; SCALE_FEATURES];
    let g = fit_ggd(mscn.data())?;
    out[0] = g.alpha;
    out[1] = g.sigma_sq;
    for (k, prod) in pairwise_products(mscn)?.iter().enumerate() {
        let a = fit_aggd(prod.data())?;
        let base = 2 + 4 * k;
        out[base] = a.alpha;
        out[base + 1] = a.mean_eta;
        out[base + 2] = a.sigma_l_sq;
        out[base + 3] = a.sigma_r_sq;
    }
    Ok(out)
}
