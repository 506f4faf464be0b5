use super::{mscn, mscn_with_sigma, scale_features, NssError, FEATURE_DIM, SCALE_FEATURES};
use crate::media::{ImageBuffer, MaskMap};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Patch edge at full resolution; the half-scale patch is half this.
pub const NIQE_PATCH: usize = 96;
/// Patches sharper than this fraction of the sharpest patch are kept.
pub const SHARPNESS_FRACTION: f64 = 0.75;
/// Minimum mean coverage for a patch to count when a coverage mask is given.
pub const MIN_PATCH_COVERAGE: f64 = 0.75;

const PINV_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct NiqePatch {
    /// Patch grid column and row.
    pub col: usize,
    pub row: usize,
    /// Mean local deviation over the patch.
    pub sharpness: f64,
    pub features: [f64; FEATURE_DIM],
}

/// Selects and featurizes the non-overlapping 96x96 patches of `gray`.
///
/// With `coverage`, only patches whose mean coverage is at least
/// [`MIN_PATCH_COVERAGE`] are candidates. Sharpness selection runs over the
/// candidates.
pub fn niqe_patches(
    gray: &ImageBuffer,
    coverage: Option<&MaskMap>,
) -> Result<Vec<NiqePatch>, NssError> {
    let (cols, rows) = (gray.width() / NIQE_PATCH, gray.height() / NIQE_PATCH);
    if cols == 0 || rows == 0 {
        return Err(NssError::Degenerate(format!(
            "NIQE needs at least {NIQE_PATCH}x{NIQE_PATCH}, got {}x{}",
            gray.width(),
            gray.height()
        )));
    }
    if let Some(m) = coverage {
        if m.dims() != (gray.width(), gray.height()) {
            return Err(NssError::DimensionMismatch(format!(
                "coverage {:?} vs image {}x{}",
                m.dims(),
                gray.width(),
                gray.height()
            )));
        }
    }
    let img = gray.crop(0, 0, cols * NIQE_PATCH, rows * NIQE_PATCH)?;
    let full = mscn_with_sigma(&img)?;
    let half = mscn(&img.downsample_half()?)?;

    let mut candidates = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            let (x0, y0) = (col * NIQE_PATCH, row * NIQE_PATCH);
            if let Some(m) = coverage {
                let cov = m.crop(x0, y0, NIQE_PATCH, NIQE_PATCH);
                let mean = cov.data().iter().sum::<f64>() / cov.data().len() as f64;
                if mean < MIN_PATCH_COVERAGE {
                    continue;
                }
            }
            let sharpness = full.local_sigma.crop(x0, y0, NIQE_PATCH, NIQE_PATCH).mean();
            candidates.push((col, row, sharpness));
        }
    }
    let max_sharpness = candidates.iter().map(|c| c.2).fold(0.0, f64::max);
    if max_sharpness <= 0.0 {
        return Err(NssError::Degenerate(
            "no patch with nonzero sharpness survives selection".into(),
        ));
    }
    let hp = NIQE_PATCH / 2;
    candidates
        .into_iter()
        .filter(|c| c.2 >= SHARPNESS_FRACTION * max_sharpness)
        .map(|(col, row, sharpness)| {
            let (x0, y0) = (col * NIQE_PATCH, row * NIQE_PATCH);
            let mut features = [0.0; FEATURE_DIM];
            features[..SCALE_FEATURES].copy_from_slice(&scale_features(
                &full.coefficients.crop(x0, y0, NIQE_PATCH, NIQE_PATCH),
            )?);
            features[SCALE_FEATURES..]
                .copy_from_slice(&scale_features(&half.crop(col * hp, row * hp, hp, hp))?);
            Ok(NiqePatch {
                col,
                row,
                sharpness,
                features,
            })
        })
        .collect()
}

/// Feature vectors of the selected patches.
pub fn niqe_features(gray: &ImageBuffer) -> Result<Vec<[f64; FEATURE_DIM]>, NssError> {
    Ok(niqe_patches(gray, None)?.into_iter().map(|p| p.features).collect())
}

/// Multivariate Gaussian over NSS feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct MvgModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct MvgRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl MvgModel {
    /// Validates shape, symmetry, and positive semidefiniteness (both within 1e-8).
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self, NssError> {
        let d = mean.len();
        if d == 0 {
            return Err(NssError::Invariant("empty mean vector".into()));
        }
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(NssError::DimensionMismatch(format!(
                "covariance must be {d}x{d}"
            )));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(NssError::Invariant("non-finite model entry".into()));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let scale = cov.amax().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(NssError::Invariant(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -SYMMETRY_TOLERANCE * scale {
            return Err(NssError::Invariant(format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(MvgModel {
            mean: DVector::from_vec(mean),
            cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let r: MvgRepr = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::new(r.mean, r.cov).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        let d = self.dim();
        let repr = MvgRepr {
            mean: self.mean.iter().copied().collect(),
            cov: (0..d).map(|i| (0..d).map(|j| self.cov[(i, j)]).collect()).collect(),
        };
        serde_json::to_string(&repr).expect("mvg serialization")
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
}

/// Sample mean and unbiased sample covariance.
pub fn fit_mvg<V: AsRef<[f64]>>(vectors: &[V]) -> Result<MvgModel, NssError> {
    if vectors.len() < 2 {
        return Err(NssError::Degenerate(format!(
            "need at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let d = vectors[0].as_ref().len();
    if d == 0 || vectors.iter().any(|v| v.as_ref().len() != d) {
        return Err(NssError::DimensionMismatch("vectors differ in length".into()));
    }
    let n = vectors.len() as f64;
    let mut mean = DVector::zeros(d);
    for v in vectors {
        mean += DVector::from_column_slice(v.as_ref());
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for v in vectors {
        let c = DVector::from_column_slice(v.as_ref()) - &mean;
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(MvgModel { mean, cov })
}

/// `sqrt(Δᵀ ((Σ₁ + Σ₂) / 2)⁺ Δ)` with `Δ = ν₁ - ν₂`.
pub fn niqe_score(test: &MvgModel, pristine: &MvgModel) -> Result<f64, NssError> {
    if test.dim() != pristine.dim() {
        return Err(NssError::DimensionMismatch(format!(
            "model dimensions {} and {}",
            test.dim(),
            pristine.dim()
        )));
    }
    let pooled = (&test.cov + &pristine.cov) * 0.5;
    let pinv = pooled
        .pseudo_inverse(PINV_TOLERANCE)
        .map_err(|e| NssError::Invariant(e.to_string()))?;
    let delta = &test.mean - &pristine.mean;
    let q = delta.dot(&(pinv * &delta));
    Ok(q.max(0.0).sqrt())
}

/// NIQE of one image against a pristine model. A single surviving patch
/// yields a zero test covariance.
pub fn niqe_image_score(
    gray: &ImageBuffer,
    pristine: &MvgModel,
    coverage: Option<&MaskMap>,
) -> Result<f64, NssError> {
    let feats: Vec<[f64; FEATURE_DIM]> = niqe_patches(gray, coverage)?
        .into_iter()
        .map(|p| p.features)
        .collect();
    let test = if feats.len() == 1 {
        MvgModel {
            mean: DVector::from_column_slice(&feats[0]),
            cov: DMatrix::zeros(FEATURE_DIM, FEATURE_DIM),
        }
    } else {
        fit_mvg(&feats)?
    };
    niqe_score(&test, pristine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn identity(d: usize) -> Vec<Vec<f64>> {
        (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect()
    }

    #[test]
    fn analytic_cases() {
        let a = MvgModel::new(vec![0.0; 4], identity(4)).unwrap();
        assert_eq!(niqe_score(&a, &a).unwrap(), 0.0);
        let b = MvgModel::new(vec![1.0, 0.0, 0.0, 0.0], identity(4)).unwrap();
        assert!((niqe_score(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let mut c = identity(3);
        c[0][1] = 0.5;
        assert!(matches!(
            MvgModel::new(vec![0.0; 3], c),
            Err(NssError::Invariant(_))
        ));
        let mut c = identity(3);
        c[2][2] = -1.0;
        assert!(matches!(
            MvgModel::new(vec![0.0; 3], c),
            Err(NssError::Invariant(_))
        ));
        assert!(MvgModel::new(vec![0.0; 3], identity(2)).is_err());
    }

    #[test]
    fn fit_mvg_unbiased() {
        let v = [[1.0, 2.0], [3.0, 6.0]];
        let m = fit_mvg(&v).unwrap();
        assert_eq!(m.mean().as_slice(), &[2.0, 4.0]);
        assert_eq!(m.cov()[(0, 0)], 2.0);
        assert_eq!(m.cov()[(1, 1)], 8.0);
        assert_eq!(m.cov()[(0, 1)], 4.0);
        assert!(fit_mvg(&v[..1]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = MvgModel::new(vec![0.5, -1.0], vec![vec![2.0, 0.1], vec![0.1, 1.0]]).unwrap();
        assert_eq!(MvgModel::from_json(&m.to_json()).unwrap(), m);
    }

    fn textured(w: usize, h: usize, seed: u64, flat_right: bool) -> ImageBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        ImageBuffer::from_fn_gray(w, h, |x, y| {
            if flat_right && x >= w / 2 {
                0.5
            } else {
                0.2 + 0.6 * noise[y * w + x]
            }
        })
    }

    #[test]
    fn exact_patch_is_selected() {
        let p = niqe_patches(&textured(96, 96, 1, false), None).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].col, p[0].row), (0, 0));
    }

    #[test]
    fn flat_half_is_excluded() {
        let p = niqe_patches(&textured(192, 192, 2, true), None).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|q| q.col == 0));
    }

    #[test]
    fn constant_and_small_images_fail() {
        let c = ImageBuffer::filled(192, 96, &[0.4]).unwrap();
        assert!(matches!(niqe_patches(&c, None), Err(NssError::Degenerate(_))));
        let s = ImageBuffer::filled(95, 200, &[0.4]).unwrap();
        assert!(matches!(niqe_patches(&s, None), Err(NssError::Degenerate(_))));
    }

    #[test]
    fn coverage_filters_patches() {
        let img = textured(192, 96, 5, false);
        let cov = MaskMap::from_fn(192, 96, |x, _| x < 96);
        let p = niqe_patches(&img, Some(&cov)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].col, 0);
    }
}
