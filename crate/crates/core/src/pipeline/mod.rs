//! Orchestration: prompt refinement, adapter datasets, the background stage,
//! the autoregressive synthesis loop and video evaluation.

mod dataset;
mod evaluate;
mod prompt;
mod synth;

pub use dataset::{
    build_interframe_dataset, build_intra_dataset, crop_regions, AdapterJobSpec, AdapterKind,
    Hyperparameters, PoseRegionDetector, RegionBox, RegionDetector, TrainingPair,
    CLOTHES_BASE_MODEL, FACE_BASE_MODEL, INTERFRAME_BASE_MODEL, INTERFRAME_EPOCHS,
    INTERFRAME_LEARNING_RATE, INTRA_STEPS,
};
pub use evaluate::{evaluate_video, EvalInputs};
pub use prompt::{clothes_template, face_template, refine_prompts, PromptSpec, FALLBACK_PREFIX};
pub use synth::{
    background_stage, synthesize_video, Aborted, BackgroundPlate, CallRecord, FrameRecord,
    Synthesis, SynthesisTrace,
};

use crate::backends::{BackendError, BackendSuite, DEFAULT_GUIDANCE_SCALE, DEFAULT_RESOLUTION, DEFAULT_STEPS};
use crate::compose::{ComposeError, DEFAULT_FEATHER_WIDTH};
use crate::consistency::MetricError;
use crate::media::{MediaError, DEFAULT_FPS};
use crate::report::ReportError;
use crate::Execution;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("prompt refinement failed for {template:?}: {source}")]
    Refinement {
        template: String,
        #[source]
        source: BackendError,
    },
    #[error("segmentation of the reference image is empty")]
    EmptySegmentation,
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("synthesis aborted at frame {}: {}", .0.frame, .0.source)]
    Aborted(Box<Aborted>),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Whether the failure came from a backend call rather than bad input.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            PipelineError::Backend(_)
                | PipelineError::Aborted(_)
                | PipelineError::Refinement { .. }
                | PipelineError::Compose(ComposeError::Backend(_))
                | PipelineError::Metric(MetricError::Backend(_))
        )
    }
}

/// How the human is removed from the reference image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BackgroundMode {
    /// Deterministic Laplace fill.
    #[default]
    Harmonic,
    /// One call to the inpainter slot.
    Inpainter,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub backends: BackendSuite,
    pub guidance_scale: f64,
    pub steps: u32,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub feather_width: usize,
    pub seed: u64,
    pub negative_prompt: String,
    pub background_mode: BackgroundMode,
    pub adapter_job_dir: PathBuf,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(backends: BackendSuite) -> Self {
        PipelineConfig {
            backends,
            guidance_scale: DEFAULT_GUIDANCE_SCALE,
            steps: DEFAULT_STEPS,
            fps: DEFAULT_FPS,
            width: DEFAULT_RESOLUTION,
            height: DEFAULT_RESOLUTION,
            feather_width: DEFAULT_FEATHER_WIDTH,
            seed: 0,
            negative_prompt: String::new(),
            background_mode: BackgroundMode::Harmonic,
            adapter_job_dir: PathBuf::from("adapter_jobs"),
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.width == 0 || self.height == 0 || !self.width.is_multiple_of(8) || !self.height.is_multiple_of(8) {
            return bad(format!(
                "resolution {}x{} must be nonzero multiples of 8",
                self.width, self.height
            ));
        }
        if !(self.guidance_scale > 0.0 && self.guidance_scale.is_finite()) {
            return bad(format!("guidance_scale must be positive, got {}", self.guidance_scale));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = PipelineConfig::new(BackendSuite::mock());
        assert_eq!((c.guidance_scale, c.steps, c.fps, c.width, c.height), (7.5, 25, 24.0, 512, 512));
        assert!(c.validate().is_ok());
        for f in [
            |c: &mut PipelineConfig| c.width = 500,
            |c: &mut PipelineConfig| c.height = 0,
            |c: &mut PipelineConfig| c.steps = 0,
            |c: &mut PipelineConfig| c.guidance_scale = -1.0,
            |c: &mut PipelineConfig| c.fps = 0.0,
        ] {
            let mut c = PipelineConfig::new(BackendSuite::mock());
            f(&mut c);
            assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
        }
    }
}
