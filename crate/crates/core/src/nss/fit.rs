use super::NssError;
use statrs::function::gamma::ln_gamma;
use std::sync::OnceLock;

pub const ALPHA_MIN: f64 = 0.2;
pub const ALPHA_MAX: f64 = 10.0;
pub const ALPHA_STEP: f64 = 0.001;
const MIN_SAMPLES: usize = 16;

/// Generalized Gaussian fit: shape `alpha` and variance `sigma_sq`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgdFit {
    pub alpha: f64,
    pub sigma_sq: f64,
}

/// Asymmetric generalized Gaussian fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub mean_eta: f64,
    pub sigma_l_sq: f64,
    pub sigma_r_sq: f64,
}

/// `Γ(2/a)² / (Γ(1/a) Γ(3/a))`, increasing in `a`.
pub fn ggd_ratio(alpha: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / alpha) - ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha)).exp()
}

fn ratio_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let lo = (ALPHA_MIN / ALPHA_STEP).round() as u32;
        let hi = (ALPHA_MAX / ALPHA_STEP).round() as u32;
        (lo..=hi)
            .map(|k| {
                let a = f64::from(k) * ALPHA_STEP;
                (a, ggd_ratio(a))
            })
            .collect()
    })
}

/// Grid point whose ratio is closest to `target`; ties go to the smaller shape.
fn invert_ratio(target: f64) -> f64 {
    let mut best = (f64::INFINITY, ALPHA_MIN);
    for &(a, r) in ratio_table() {
        let d = (r - target).abs();
        if d < best.0 {
            best = (d, a);
        }
    }
    best.1
}

fn check_samples(samples: &[f64]) -> Result<(), NssError> {
    if samples.len() < MIN_SAMPLES {
        return Err(NssError::DegenerateDistribution(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(NssError::DegenerateDistribution("non-finite sample".into()));
    }
    Ok(())
}

/// Moment-matching GGD fit over the tabulated shape grid.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit, NssError> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let mean_sq = samples.iter().map(|x| x * x).sum::<f64>() / n;
    if mean_sq == 0.0 {
        return Err(NssError::DegenerateDistribution("all samples are zero".into()));
    }
    let mean_abs = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let alpha = invert_ratio(mean_abs * mean_abs / mean_sq);
    Ok(GgdFit {
        alpha,
        sigma_sq: mean_sq,
    })
}

/// Sum of squares in ascending order, so equal multisets give equal sums.
fn sorted_square_sum(mut sq: Vec<f64>) -> f64 {
    sq.sort_by(f64::total_cmp);
    sq.iter().sum()
}

/// Moment-matching AGGD fit: one-sided second moments, the ratio corrected
/// for asymmetry, and the mean implied by the fitted shape.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit, NssError> {
    check_samples(samples)?;
    let left: Vec<f64> = samples.iter().filter(|x| **x < 0.0).map(|x| x * x).collect();
    let right: Vec<f64> = samples.iter().filter(|x| **x > 0.0).map(|x| x * x).collect();
    if left.is_empty() || right.is_empty() {
        return Err(NssError::DegenerateDistribution(
            "AGGD needs samples of both signs".into(),
        ));
    }
    let (nl, nr) = (left.len() as f64, right.len() as f64);
    let sigma_l_sq = sorted_square_sum(left) / nl;
    let sigma_r_sq = sorted_square_sum(right) / nr;
    let (sl, sr) = (sigma_l_sq.sqrt(), sigma_r_sq.sqrt());

    let n = samples.len() as f64;
    let mean_abs = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let mean_sq = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let g = sl / sr;
    let r_hat = mean_abs * mean_abs / mean_sq;
    let r_norm = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);
    let alpha = invert_ratio(r_norm);

    let scale = (0.5 * (ln_gamma(1.0 / alpha) - ln_gamma(3.0 / alpha))).exp();
    let (beta_l, beta_r) = (sl * scale, sr * scale);
    let mean_eta = (beta_r - beta_l) * (ln_gamma(2.0 / alpha) - ln_gamma(1.0 / alpha)).exp();
    Ok(AggdFit {
        alpha,
        mean_eta,
        sigma_l_sq,
        sigma_r_sq,
    })
}
