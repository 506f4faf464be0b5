//! Interfaces to every neural capability the pipeline consumes.
//!
//! Each capability is a trait object held in a [`BackendSuite`] slot. Two
//! implementations ship with the crate: deterministic procedural mocks
//! ([`mock`]) and an HTTP client for an external model server ([`http`]).

pub mod http;
pub mod mock;
pub mod wire;

use crate::consistency::EmbeddingVector;
use crate::media::{ImageBuffer, MaskMap, PoseFrame};
use sha2::{Digest, Sha256};
use std::fmt;
use std::sync::Arc;

pub use http::{HttpBackend, HttpConfig, MAX_REQUEST_BYTES};
pub use mock::{
    mock_detect_pose, mock_embed_image, mock_embed_text, mock_render, mock_segment, mock_wire_reply,
    MockBackend, EMBEDDING_DIM, JOINT_PALETTE,
};

/// Named capability slots of a [`BackendSuite`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Text2Image,
    Inpainter,
    Segmenter,
    PoseDetector,
    Embedder,
    Captioner,
    LlmRefiner,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::Text2Image => "text2image",
            Slot::Inpainter => "inpainter",
            Slot::Segmenter => "segmenter",
            Slot::PoseDetector => "pose_detector",
            Slot::Embedder => "embedder",
            Slot::Captioner => "captioner",
            Slot::LlmRefiner => "llm_refiner",
        }
    }

    /// Whether a failed call may safely be repeated.
    pub fn is_idempotent(self) -> bool {
        !matches!(self, Slot::Text2Image | Slot::Inpainter | Slot::LlmRefiner)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One HTTP route of the wire protocol. The embedder slot owns two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Route {
    Generate,
    Inpaint,
    Segment,
    Pose,
    EmbedImage,
    EmbedText,
    Caption,
    RefinePrompt,
}

impl Route {
    pub const ALL: [Route; 8] = [
        Route::Generate,
        Route::Inpaint,
        Route::Segment,
        Route::Pose,
        Route::EmbedImage,
        Route::EmbedText,
        Route::Caption,
        Route::RefinePrompt,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Route::Generate => "/v1/generate",
            Route::Inpaint => "/v1/inpaint",
            Route::Segment => "/v1/segment",
            Route::Pose => "/v1/pose",
            Route::EmbedImage => "/v1/embed_image",
            Route::EmbedText => "/v1/embed_text",
            Route::Caption => "/v1/caption",
            Route::RefinePrompt => "/v1/refine_prompt",
        }
    }

    pub fn slot(self) -> Slot {
        match self {
            Route::Generate => Slot::Text2Image,
            Route::Inpaint => Slot::Inpainter,
            Route::Segment => Slot::Segmenter,
            Route::Pose => Slot::PoseDetector,
            Route::EmbedImage | Route::EmbedText => Slot::Embedder,
            Route::Caption => Slot::Captioner,
            Route::RefinePrompt => Slot::LlmRefiner,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendErrorKind {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request of {size} bytes exceeds the {limit}-byte limit")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("transport: {0}")]
    Transport(String),
    #[error("status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Schema(String),
    #[error("{0}")]
    Failed(String),
}

/// A failed backend call, tagged with the slot and route it was made on.
/// Mocks report the route their HTTP counterpart would use.
#[derive(Debug, thiserror::Error)]
#[error("{slot} backend ({route}): {kind}")]
pub struct BackendError {
    pub slot: Slot,
    pub route: &'static str,
    #[source]
    pub kind: BackendErrorKind,
}

impl BackendError {
    pub fn new(route: Route, kind: BackendErrorKind) -> Self {
        BackendError {
            slot: route.slot(),
            route: route.path(),
            kind,
        }
    }

    pub fn invalid(route: Route, msg: impl Into<String>) -> Self {
        Self::new(route, BackendErrorKind::InvalidRequest(msg.into()))
    }

    pub fn failed(route: Route, msg: impl Into<String>) -> Self {
        Self::new(route, BackendErrorKind::Failed(msg.into()))
    }
}

pub const DEFAULT_GUIDANCE_SCALE: f64 = 7.5;
pub const DEFAULT_STEPS: u32 = 25;
pub const DEFAULT_RESOLUTION: usize = 512;

/// A text-to-image or inpainting call. Setting both `init_image` and `mask`
/// selects inpaint mode.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub negative_prompt: String,
    pub pose: Option<PoseFrame>,
    pub prev_frame: Option<ImageBuffer>,
    pub init_image: Option<ImageBuffer>,
    pub mask: Option<MaskMap>,
    pub guidance_scale: f64,
    pub steps: u32,
    pub seed: u64,
    /// Output size in pixels; inpaint mode must match `init_image`.
    pub width: usize,
    pub height: usize,
}

impl Default for GenerationRequest {
    fn default() -> Self {
        GenerationRequest {
            prompt: String::new(),
            negative_prompt: String::new(),
            pose: None,
            prev_frame: None,
            init_image: None,
            mask: None,
            guidance_scale: DEFAULT_GUIDANCE_SCALE,
            steps: DEFAULT_STEPS,
            seed: 0,
            width: DEFAULT_RESOLUTION,
            height: DEFAULT_RESOLUTION,
        }
    }
}

impl GenerationRequest {
    pub fn is_inpaint(&self) -> bool {
        self.init_image.is_some() && self.mask.is_some()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.steps == 0 {
            return Err("steps must be at least 1".into());
        }
        if !(self.guidance_scale > 0.0 && self.guidance_scale.is_finite()) {
            return Err(format!("guidance_scale must be positive, got {}", self.guidance_scale));
        }
        if self.width == 0 || self.height == 0 {
            return Err("output size must be nonzero".into());
        }
        match (&self.init_image, &self.mask) {
            (Some(img), Some(mask)) => {
                if (img.width(), img.height()) != (self.width, self.height)
                    || mask.dims() != (self.width, self.height)
                {
                    return Err(format!(
                        "inpaint inputs {}x{} / {:?} do not match output {}x{}",
                        img.width(),
                        img.height(),
                        mask.dims(),
                        self.width,
                        self.height
                    ));
                }
            }
            (None, None) => {}
            _ => return Err("inpaint mode needs both init_image and mask".into()),
        }
        if let Some(prev) = &self.prev_frame {
            if (prev.width(), prev.height()) != (self.width, self.height) {
                return Err("prev_frame size differs from output size".into());
            }
        }
        if let Some(pose) = &self.pose {
            pose.check_bounds(self.width, self.height)
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    /// SHA-256 over every field. Image-valued fields contribute their own
    /// digests, so a request digest commits to the exact previous frame.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut text = |label: &str, s: &str| {
            h.update(label.as_bytes());
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        };
        text("prompt", &self.prompt);
        text("negative_prompt", &self.negative_prompt);
        text(
            "pose",
            &self.pose.as_ref().map_or(String::new(), |p| {
                p.to_flat()
                    .iter()
                    .map(|v| format!("{:016x}", v.to_bits()))
                    .collect()
            }),
        );
        text("prev_frame", &self.prev_frame.as_ref().map_or(String::new(), ImageBuffer::digest));
        text("init_image", &self.init_image.as_ref().map_or(String::new(), ImageBuffer::digest));
        text("mask", &self.mask.as_ref().map_or(String::new(), MaskMap::digest));
        h.update(self.guidance_scale.to_bits().to_le_bytes());
        h.update(self.steps.to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        hex::encode(h.finalize())
    }
}

pub trait ImageGenerator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError>;
}

pub trait Inpainter: Send + Sync {
    fn inpaint(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError>;
}

pub trait Segmenter: Send + Sync {
    /// Human mask of `frame`. `background_hint` is a known background plate
    /// of the same size, when one exists.
    fn segment(
        &self,
        frame: &ImageBuffer,
        background_hint: Option<&ImageBuffer>,
    ) -> Result<MaskMap, BackendError>;
}

pub trait PoseDetector: Send + Sync {
    fn detect(&self, frame: &ImageBuffer) -> Result<PoseFrame, BackendError>;
}

pub trait Embedder: Send + Sync {
    fn embed_image(&self, image: &ImageBuffer) -> Result<EmbeddingVector, BackendError>;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, BackendError>;
}

pub trait Captioner: Send + Sync {
    fn caption(&self, image: &ImageBuffer) -> Result<String, BackendError>;
}

pub trait PromptRefiner: Send + Sync {
    fn refine(&self, prompt: &str) -> Result<String, BackendError>;
}

/// One implementation per capability slot.
#[derive(Clone)]
pub struct BackendSuite {
    pub text2image: Arc<dyn ImageGenerator>,
    pub inpainter: Arc<dyn Inpainter>,
    pub segmenter: Arc<dyn Segmenter>,
    pub pose_detector: Arc<dyn PoseDetector>,
    pub embedder: Arc<dyn Embedder>,
    pub captioner: Arc<dyn Captioner>,
    pub llm_refiner: Option<Arc<dyn PromptRefiner>>,
}

impl BackendSuite {
    /// Procedural mocks in every slot; no prompt refiner.
    pub fn mock() -> Self {
        let m = Arc::new(MockBackend);
        BackendSuite {
            text2image: m.clone(),
            inpainter: m.clone(),
            segmenter: m.clone(),
            pose_detector: m.clone(),
            embedder: m.clone(),
            captioner: m,
            llm_refiner: None,
        }
    }

    /// Every slot, including the prompt refiner, served by one HTTP endpoint.
    pub fn http(config: HttpConfig) -> Self {
        let h = Arc::new(HttpBackend::new(config));
        BackendSuite {
            text2image: h.clone(),
            inpainter: h.clone(),
            segmenter: h.clone(),
            pose_detector: h.clone(),
            embedder: h.clone(),
            captioner: h.clone(),
            llm_refiner: Some(h),
        }
    }
}

impl fmt::Debug for BackendSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendSuite")
            .field("llm_refiner", &self.llm_refiner.is_some())
            .finish_non_exhaustive()
    }
}
