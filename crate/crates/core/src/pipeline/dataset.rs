//! Training-set builders for the appearance and previous-frame adapters.
//! Training itself happens elsewhere; these functions write the images and a
//! JSON job description.

use super::PipelineError;
use crate::backends::{BackendError, Captioner, PoseDetector};
use crate::media::{save_frame, FrameSequence, ImageBuffer};
use crate::Execution;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const INTRA_STEPS: u32 = 500;
pub const INTERFRAME_EPOCHS: u32 = 20;
pub const INTERFRAME_LEARNING_RATE: f64 = 5e-5;
pub const CLOTHES_BASE_MODEL: &str = "MohamedRashad/diffusion_fashion";
pub const FACE_BASE_MODEL: &str = "digiplay/majicMIX_realistic_v6";
pub const INTERFRAME_BASE_MODEL: &str = "digiplay/majicMIX_realistic_v5";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Clothes,
    Face,
    Interframe,
}

impl AdapterKind {
    pub fn name(self) -> &'static str {
        match self {
            AdapterKind::Clothes => "clothes",
            AdapterKind::Face => "face",
            AdapterKind::Interframe => "interframe",
        }
    }

    pub fn base_model(self) -> &'static str {
        match self {
            AdapterKind::Clothes => CLOTHES_BASE_MODEL,
            AdapterKind::Face => FACE_BASE_MODEL,
            AdapterKind::Interframe => INTERFRAME_BASE_MODEL,
        }
    }

    pub fn hyperparameters(self) -> Hyperparameters {
        match self {
            AdapterKind::Clothes | AdapterKind::Face => Hyperparameters {
                steps: Some(INTRA_STEPS),
                epochs: None,
                learning_rate: None,
                optimizer: "adamw".into(),
                low_rank: true,
            },
            AdapterKind::Interframe => Hyperparameters {
                steps: None,
                epochs: Some(INTERFRAME_EPOCHS),
                learning_rate: Some(INTERFRAME_LEARNING_RATE),
                optimizer: "adamw".into(),
                low_rank: false,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epochs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub learning_rate: Option<f64>,
    pub optimizer: String,
    /// Train low-rank updates of the cross-attention weights.
    pub low_rank: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    /// Target image.
    pub image: PathBuf,
    pub caption: String,
    /// Conditioning image (the previous frame) for previous-frame adapters.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub condition: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterJobSpec {
    pub kind: AdapterKind,
    pub base_model: String,
    pub hyperparameters: Hyperparameters,
    pub pairs: Vec<TrainingPair>,
    /// Pairs that were dropped, with the reason.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl AdapterJobSpec {
    pub fn new(kind: AdapterKind, pairs: Vec<TrainingPair>) -> Self {
        AdapterJobSpec {
            kind,
            base_model: kind.base_model().to_string(),
            hyperparameters: kind.hyperparameters(),
            pairs,
            warnings: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.hyperparameters != self.kind.hyperparameters() {
            return Err(PipelineError::Input(format!(
                "hyperparameters do not match a {} job",
                self.kind.name()
            )));
        }
        let conditioned = self.kind == AdapterKind::Interframe;
        if let Some(p) = self.pairs.iter().find(|p| p.condition.is_some() != conditioned) {
            return Err(PipelineError::Input(format!(
                "pair {} has the wrong conditioning for a {} job",
                p.image.display(),
                self.kind.name()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("job spec serialization");
        s.push('\n');
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Axis-aligned box in pixel coordinates, `[x0, x1) × [y0, y1)`. May extend
/// past the image; crops clamp it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RegionBox {
    /// Integer pixel rectangle `(x, y, w, h)` inside a `width × height` image,
    /// or `None` if nothing remains after clamping.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let x0 = self.x0.floor().clamp(0.0, width as f64) as usize;
        let y0 = self.y0.floor().clamp(0.0, height as f64) as usize;
        let x1 = self.x1.ceil().clamp(0.0, width as f64) as usize;
        let y1 = self.y1.ceil().clamp(0.0, height as f64) as usize;
        (x1 > x0 && y1 > y0).then(|| (x0, y0, x1 - x0, y1 - y0))
    }
}

/// Finds clothing or face areas.
pub trait RegionDetector: Send + Sync {
    fn detect_regions(&self, image: &ImageBuffer, kind: AdapterKind) -> Result<Vec<RegionBox>, BackendError>;
}

/// Boxes from detected keypoints: the face box spans nose, eyes and ears, the
/// clothes box spans neck, shoulders, arms, hips and legs. Each is padded by
/// `margin` pixels.
pub struct PoseRegionDetector<'a> {
    pub detector: &'a dyn PoseDetector,
    pub margin: f64,
}

const FACE_JOINTS: [usize; 5] = [0, 14, 15, 16, 17];
const BODY_JOINTS: [usize; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

impl RegionDetector for PoseRegionDetector<'_> {
    fn detect_regions(&self, image: &ImageBuffer, kind: AdapterKind) -> Result<Vec<RegionBox>, BackendError> {
        let joints: &[usize] = match kind {
            AdapterKind::Face => &FACE_JOINTS,
            AdapterKind::Clothes => &BODY_JOINTS,
            AdapterKind::Interframe => return Ok(Vec::new()),
        };
        let pose = self.detector.detect(image)?;
        let pts: Vec<_> = joints
            .iter()
            .map(|&j| pose.keypoint(j))
            .filter(|k| k.is_visible())
            .collect();
        if pts.is_empty() {
            return Ok(Vec::new());
        }
        let fold = |f: fn(f64, f64) -> f64, init: f64, g: fn(&crate::media::Keypoint) -> f64| {
            pts.iter().map(g).fold(init, f)
        };
        Ok(vec![RegionBox {
            x0: fold(f64::min, f64::INFINITY, |k| k.x) - self.margin,
            y0: fold(f64::min, f64::INFINITY, |k| k.y) - self.margin,
            x1: fold(f64::max, f64::NEG_INFINITY, |k| k.x) + self.margin + 1.0,
            y1: fold(f64::max, f64::NEG_INFINITY, |k| k.y) + self.margin + 1.0,
        }])
    }
}

/// Crops of every detected box, in image order then detector order.
pub fn crop_regions(
    images: &[ImageBuffer],
    detector: &dyn RegionDetector,
    kind: AdapterKind,
    exec: Execution,
) -> Result<Vec<ImageBuffer>, PipelineError> {
    let per_image = exec.map(images, |img| -> Result<Vec<ImageBuffer>, PipelineError> {
        let boxes = detector.detect_regions(img, kind)?;
        Ok(boxes
            .iter()
            .filter_map(|b| b.clamp_to(img.width(), img.height()))
            .map(|(x, y, w, h)| img.crop(x, y, w, h).expect("clamped box lies inside the image"))
            .collect())
    });
    let mut out = Vec::new();
    for crops in per_image {
        out.extend(crops?);
    }
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Crops clothing or face areas, writes them as `<kind>_<n>.png` under
/// `out_dir`, and pairs each with `refined_prompt`.
pub fn build_intra_dataset(
    images: &[ImageBuffer],
    detector: &dyn RegionDetector,
    kind: AdapterKind,
    refined_prompt: &str,
    out_dir: &Path,
    exec: Execution,
) -> Result<AdapterJobSpec, PipelineError> {
    if kind == AdapterKind::Interframe {
        return Err(PipelineError::Input("intra datasets are for clothes or face".into()));
    }
    if images.is_empty() {
        return Err(PipelineError::Input("no images".into()));
    }
    let crops = crop_regions(images, detector, kind, exec)?;
    if crops.is_empty() {
        return Err(PipelineError::EmptyDataset(format!("no {} regions detected", kind.name())));
    }
    create_dir(out_dir)?;
    let mut pairs = Vec::with_capacity(crops.len());
    for (i, crop) in crops.iter().enumerate() {
        let path = out_dir.join(format!("{}_{i:05}.png", kind.name()));
        save_frame(crop, &path)?;
        pairs.push(TrainingPair {
            image: path,
            caption: refined_prompt.to_string(),
            condition: None,
        });
    }
    Ok(AdapterJobSpec::new(kind, pairs))
}

/// Pairs every frame with its successor, captioned by the successor's
/// caption. Frames are written as `video<v>_frame<t>.png` under `out_dir`.
/// Pairs whose caption fails are dropped with a warning.
pub fn build_interframe_dataset(
    videos: &[FrameSequence],
    captioner: &dyn Captioner,
    out_dir: &Path,
    exec: Execution,
) -> Result<AdapterJobSpec, PipelineError> {
    if videos.is_empty() {
        return Err(PipelineError::Input("no videos".into()));
    }
    if let Some((v, seq)) = videos.iter().enumerate().find(|(_, s)| s.len() < 2) {
        return Err(PipelineError::Input(format!("video {v} has {} frames; need at least 2", seq.len())));
    }
    // (video, index of the next frame)
    let targets: Vec<(usize, usize)> = videos
        .iter()
        .enumerate()
        .flat_map(|(v, s)| (1..s.len()).map(move |t| (v, t)))
        .collect();
    let captions = exec.map(&targets, |&(v, t)| captioner.caption(&videos[v].frames()[t]));
    create_dir(out_dir)?;
    let path_of = |v: usize, t: usize| out_dir.join(format!("video{v:03}_frame{t:05}.png"));
    let mut written = std::collections::HashSet::new();
    let mut write = |v: usize, t: usize| -> Result<PathBuf, PipelineError> {
        let p = path_of(v, t);
        if written.insert((v, t)) {
            save_frame(&videos[v].frames()[t], &p)?;
        }
        Ok(p)
    };
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for (&(v, t), caption) in targets.iter().zip(captions) {
        match caption {
            Ok(caption) => pairs.push(TrainingPair {
                condition: Some(write(v, t - 1)?),
                image: write(v, t)?,
                caption,
            }),
            Err(e) => {
                log::warn!("skipping video {v} frames {}-{t}: {e}", t - 1);
                warnings.push(format!("video {v} frames {}-{t}: {e}", t - 1));
            }
        }
    }
    if pairs.is_empty() {
        return Err(PipelineError::EmptyDataset("every caption request failed".into()));
    }
    let mut spec = AdapterJobSpec::new(AdapterKind::Interframe, pairs);
    spec.warnings = warnings;
    Ok(spec)
}
