use super::{mscn, scale_features, NssError, FEATURE_DIM, SCALE_FEATURES};
use crate::media::ImageBuffer;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The 36 BRISQUE features: [`scale_features`] at full resolution followed by
/// the same 18 values at half resolution.
pub fn brisque_features(gray: &ImageBuffer) -> Result<[f64; FEATURE_DIM], NssError> {
    if gray.width() < 14 || gray.height() < 14 {
        return Err(NssError::Degenerate(format!(
            "BRISQUE needs at least 14x14, got {}x{}",
            gray.width(),
            gray.height()
        )));
    }
    let mut out = [0.0; FEATURE_DIM];
    let full = scale_features(&mscn(gray)?)?;
    let half = scale_features(&mscn(&gray.downsample_half()?)?)?;
    out[..SCALE_FEATURES].copy_from_slice(&full);
    out[SCALE_FEATURES..].copy_from_slice(&half);
    Ok(out)
}

/// Epsilon-SVR with an RBF kernel, in libsvm's decision-function form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub gamma: f64,
    pub rho: f64,
    pub dual_coefs: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
}

impl SvrModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !self.rho.is_finite() {
            return Err("rho is not finite".into());
        }
        if self.dual_coefs.len() != self.support_vectors.len() {
            return Err(format!(
                "{} dual coefficients for {} support vectors",
                self.dual_coefs.len(),
                self.support_vectors.len()
            ));
        }
        if let Some((i, sv)) = self
            .support_vectors
            .iter()
            .enumerate()
            .find(|(_, sv)| sv.len() != FEATURE_DIM)
        {
            return Err(format!("support vector {i} has {} entries", sv.len()));
        }
        if self.feature_min.len() != FEATURE_DIM || self.feature_max.len() != FEATURE_DIM {
            return Err(format!("feature bounds must have {FEATURE_DIM} entries"));
        }
        if let Some(i) = (0..FEATURE_DIM).find(|&i| self.feature_min[i] > self.feature_max[i]) {
            return Err(format!("feature {i}: min exceeds max"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let m: SvrModel = serde_json::from_str(text).map_err(|e| e.to_string())?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NssError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| NssError::ModelFile {
            path: path.into(),
            msg: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|msg| NssError::ModelFile {
            path: path.into(),
            msg,
        })
    }

    /// Maps raw features to `[-1, 1]`; constant features map to 0.
    pub fn scale(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.feature_min.iter().zip(&self.feature_max))
            .map(|(x, (lo, hi))| {
                if hi > lo {
                    -1.0 + 2.0 * (x - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// `Σ_k coef_k exp(-gamma ‖x - sv_k‖²) - rho` on the scaled features.
pub fn brisque_score(features: &[f64], model: &SvrModel) -> Result<f64, NssError> {
    if features.len() != FEATURE_DIM {
        return Err(NssError::DimensionMismatch(format!(
            "expected {FEATURE_DIM} features, got {}",
            features.len()
        )));
    }
    model.validate().map_err(NssError::Invariant)?;
    let x = model.scale(features);
    let mut acc = 0.0;
    for (coef, sv) in model.dual_coefs.iter().zip(&model.support_vectors) {
        let d2: f64 = x.iter().zip(sv).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += coef * (-model.gamma * d2).exp();
    }
    Ok(acc - model.rho)
}

pub fn brisque_image_score(gray: &ImageBuffer, model: &SvrModel) -> Result<f64, NssError> {
    brisque_score(&brisque_features(gray)?, model)
}
