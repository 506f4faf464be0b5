//! Input-alignment and temporal-consistency metrics.
//!
//! Pixel differences are reported in 8-bit units and cosine similarities are
//! scaled by 100. Pose error is measured after normalizing coordinates to a
//! `[0, 100]` square so it does not depend on resolution.

use crate::backends::{BackendError, Embedder};
use crate::media::{ImageBuffer, MaskMap, PoseFrame};
use crate::nss::{brisque_image_score, niqe_image_score, MvgModel, NssError, SvrModel};
use crate::Execution;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("zero-norm embedding")]
    ZeroNorm,
    #[error("no keypoint is visible in both poses")]
    UndefinedPose,
    #[error("empty {0} region")]
    DegenerateRegion(Region),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Nss(#[from] NssError),
}

/// Feature vector from an image or text encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::DimensionMismatch("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::DimensionMismatch("non-finite embedding".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(EmbeddingVector { values, norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn check_same_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<(), MetricError> {
    if a.dims() != b.dims() {
        return Err(MetricError::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Mean squared sample difference in 8-bit units.
pub fn frame_mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    check_same_dims(a, b)?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = (x - y) * 255.0;
            d * d
        })
        .sum();
    Ok(s / a.data().len() as f64)
}

/// Mean absolute sample difference in 8-bit units.
pub fn frame_l1(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
    check_same_dims(a, b)?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() * 255.0)
        .sum();
    Ok(s / a.data().len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMetric {
    Mse,
    L1,
}

impl PairMetric {
    pub fn eval(self, a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, MetricError> {
        match self {
            PairMetric::Mse => frame_mse(a, b),
            PairMetric::L1 => frame_l1(a, b),
        }
    }
}

/// Mean of `metric` over adjacent frame pairs.
pub fn sequence_consistency(
    frames: &[ImageBuffer],
    metric: PairMetric,
    exec: Execution,
) -> Result<f64, MetricError> {
    if frames.len() < 2 {
        return Err(MetricError::TooFewFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    let pairs: Vec<(&ImageBuffer, &ImageBuffer)> = frames.windows(2).map(|w| (&w[0], &w[1])).collect();
    let values = exec.map(&pairs, |(a, b)| metric.eval(a, b));
    mean_of(values)
}

fn mean_of(values: Vec<Result<f64, MetricError>>) -> Result<f64, MetricError> {
    let n = values.len() as f64;
    let mut acc = 0.0;
    for v in values {
        acc += v?;
    }
    Ok(acc / n)
}

/// Cosine similarity scaled to `[-100, 100]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch(format!(
            "embedding dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let aa: f64 = a.values.iter().map(|v| v * v).sum();
    let bb: f64 = b.values.iter().map(|v| v * v).sum();
    if aa == 0.0 || bb == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    let ab: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    // sqrt(aa * bb) rather than |a||b|: identical vectors then give exactly 1.
    Ok((ab / (aa * bb).sqrt()).clamp(-1.0, 1.0) * 100.0)
}

/// Mean cosine similarity between adjacent embeddings, scaled by 100.
pub fn cosine_consistency(embeddings: &[EmbeddingVector]) -> Result<f64, MetricError> {
    if embeddings.len() < 2 {
        return Err(MetricError::TooFewFrames {
            needed: 2,
            got: embeddings.len(),
        });
    }
    mean_of(
        embeddings
            .windows(2)
            .map(|w| cosine_similarity(&w[0], &w[1]))
            .collect(),
    )
}

/// Mean text-to-frame cosine similarity, scaled by 100.
pub fn text_alignment(
    frames: &[ImageBuffer],
    prompt_embedding: &EmbeddingVector,
    embedder: &dyn Embedder,
    exec: Execution,
) -> Result<f64, MetricError> {
    if frames.is_empty() {
        return Err(MetricError::TooFewFrames { needed: 1, got: 0 });
    }
    let sims = exec.map(frames, |f| {
        let e = embedder.embed_image(f)?;
        cosine_similarity(prompt_embedding, &e)
    });
    mean_of(sims)
}

/// Embeds every frame in order.
pub fn embed_frames(
    frames: &[ImageBuffer],
    embedder: &dyn Embedder,
    exec: Execution,
) -> Result<Vec<EmbeddingVector>, MetricError> {
    exec.map(frames, |f| embedder.embed_image(f).map_err(MetricError::from))
        .into_iter()
        .collect()
}

/// Keypoint MSE on coordinates normalized to `[0, 100]²`, over joints visible
/// in both poses: mean of `(Δx² + Δy²) / 2`.
pub fn pose_mse(
    reference: &PoseFrame,
    detected: &PoseFrame,
    width: usize,
    height: usize,
) -> Result<f64, MetricError> {
    let (sx, sy) = (100.0 / width as f64, 100.0 / height as f64);
    let mut acc = 0.0;
    let mut n = 0usize;
    for (r, d) in reference.keypoints().iter().zip(detected.keypoints()) {
        if r.is_visible() && d.is_visible() {
            let dx = (r.x - d.x) * sx;
            let dy = (r.y - d.y) * sy;
            acc += (dx * dx + dy * dy) / 2.0;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricError::UndefinedPose);
    }
    Ok(acc / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Body,
    Background,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::Body => "body",
            Region::Background => "background",
        })
    }
}

/// A frame restricted to one region and cropped to its bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionImage {
    pub image: ImageBuffer,
    /// Effective coverage over the cropped area.
    pub coverage: MaskMap,
}

/// `frame × mask` for the body, `frame × (1 − mask)` for the background,
/// cropped to the bounding box of nonzero coverage.
pub fn extract_region(
    frame: &ImageBuffer,
    mask: &MaskMap,
    region: Region,
) -> Result<RegionImage, MetricError> {
    if mask.dims() != (frame.width(), frame.height()) {
        return Err(MetricError::DimensionMismatch(format!(
            "mask {:?} vs frame {}x{}",
            mask.dims(),
            frame.width(),
            frame.height()
        )));
    }
    let effective = match region {
        Region::Body => mask.clone(),
        Region::Background => mask.inverted(),
    };
    let (x0, y0, x1, y1) = effective
        .bounding_box()
        .ok_or(MetricError::DegenerateRegion(region))?;
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let coverage = effective.crop(x0, y0, w, h);
    let c = frame.channels();
    let mut data = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            let a = coverage.get(x, y);
            data.extend(frame.pixel(x0 + x, y0 + y).iter().map(|v| v * a));
        }
    }
    let image = ImageBuffer::new(w, h, c, data).expect("region crop stays in range");
    Ok(RegionImage { image, coverage })
}

/// Metrics that can be evaluated on a segmented region.
#[derive(Clone, Copy)]
pub enum SegmentedMetric<'a> {
    /// Mean per-frame NIQE; patches need at least 75% region coverage.
    Niqe(&'a MvgModel),
    /// Mean per-frame BRISQUE of the region crop.
    Brisque(&'a SvrModel),
    /// Adjacent-frame cosine consistency of region embeddings.
    Clip(&'a dyn Embedder),
}

pub fn segmented_metric(
    frames: &[ImageBuffer],
    masks: &[MaskMap],
    metric: SegmentedMetric<'_>,
    region: Region,
    exec: Execution,
) -> Result<f64, MetricError> {
    if frames.len() != masks.len() {
        return Err(MetricError::DimensionMismatch(format!(
            "{} frames but {} masks",
            frames.len(),
            masks.len()
        )));
    }
    if frames.is_empty() {
        return Err(MetricError::TooFewFrames { needed: 1, got: 0 });
    }
    let idx: Vec<usize> = (0..frames.len()).collect();
    let regions: Vec<RegionImage> = exec
        .map(&idx, |&i| extract_region(&frames[i], &masks[i], region))
        .into_iter()
        .collect::<Result<_, _>>()?;
    match metric {
        SegmentedMetric::Niqe(pristine) => mean_of(exec.map(&regions, |r| {
            niqe_image_score(&r.image.to_gray(), pristine, Some(&r.coverage)).map_err(Into::into)
        })),
        SegmentedMetric::Brisque(model) => mean_of(exec.map(&regions, |r| {
            brisque_image_score(&r.image.to_gray(), model).map_err(Into::into)
        })),
        SegmentedMetric::Clip(embedder) => {
            let crops: Vec<ImageBuffer> = regions.into_iter().map(|r| r.image).collect();
            cosine_consistency(&embed_frames(&crops, embedder, exec)?)
        }
    }
}

/// Mean per-frame NIQE over whole frames.
pub fn frame_niqe(
    frames: &[ImageBuffer],
    pristine: &MvgModel,
    exec: Execution,
) -> Result<f64, MetricError> {
    if frames.is_empty() {
        return Err(MetricError::TooFewFrames { needed: 1, got: 0 });
    }
    mean_of(exec.map(frames, |f| {
        niqe_image_score(&f.to_gray(), pristine, None).map_err(Into::into)
    }))
}

/// Mean per-frame BRISQUE over whole frames.
pub fn frame_brisque(
    frames: &[ImageBuffer],
    model: &SvrModel,
    exec: Execution,
) -> Result<f64, MetricError> {
    if frames.is_empty() {
        return Err(MetricError::TooFewFrames { needed: 1, got: 0 });
    }
    mean_of(exec.map(frames, |f| {
        brisque_image_score(&f.to_gray(), model).map_err(Into::into)
    }))
}
