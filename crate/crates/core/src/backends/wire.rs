//! JSON bodies of the model-server protocol.

use super::GenerationRequest;
use crate::media::{decode_png, encode_png, ImageBuffer, MaskMap, PoseFrame, NUM_KEYPOINTS};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub png_b64: String,
}

impl ImagePayload {
    pub fn encode(img: &ImageBuffer) -> Self {
        ImagePayload {
            png_b64: STANDARD.encode(encode_png(img)),
        }
    }

    pub fn encode_mask(mask: &MaskMap) -> Self {
        Self::encode(&mask.to_image())
    }

    pub fn decode(&self) -> Result<ImageBuffer, String> {
        let bytes = STANDARD
            .decode(self.png_b64.as_bytes())
            .map_err(|e| format!("base64: {e}"))?;
        decode_png(&bytes)
    }

    pub fn decode_mask(&self) -> Result<MaskMap, String> {
        let img = self.decode()?.to_gray();
        MaskMap::new(img.width(), img.height(), img.into_data()).map_err(|e| e.to_string())
    }
}

/// Same layout as one entry of a pose file; a null marks a missing joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosePayload {
    pub keypoints: Vec<Option<f64>>,
}

impl PosePayload {
    pub fn encode(pose: &PoseFrame) -> Self {
        PosePayload {
            keypoints: pose.to_flat().into_iter().map(Some).collect(),
        }
    }

    pub fn decode(&self) -> Result<PoseFrame, String> {
        if self.keypoints.len() != 3 * NUM_KEYPOINTS {
            return Err(format!(
                "expected {} keypoint values, got {}",
                3 * NUM_KEYPOINTS,
                self.keypoints.len()
            ));
        }
        let flat: Vec<f64> = self
            .keypoints
            .chunks_exact(3)
            .flat_map(|t| match (t[0], t[1], t[2]) {
                (Some(x), Some(y), Some(c)) => [x, y, c],
                _ => [0.0, 0.0, 0.0],
            })
            .collect();
        PoseFrame::from_flat(&flat).map_err(|e| e.to_string())
    }
}

/// Body of `/v1/generate` and `/v1/inpaint`; field names follow
/// `GenerationRequest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateBody {
    pub prompt: String,
    pub negative_prompt: String,
    pub pose: Option<PosePayload>,
    pub prev_frame: Option<ImagePayload>,
    pub init_image: Option<ImagePayload>,
    pub mask: Option<ImagePayload>,
    pub guidance_scale: f64,
    pub steps: u32,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

impl GenerateBody {
    pub fn from_request(req: &GenerationRequest) -> Self {
        GenerateBody {
            prompt: req.prompt.clone(),
            negative_prompt: req.negative_prompt.clone(),
            pose: req.pose.as_ref().map(PosePayload::encode),
            prev_frame: req.prev_frame.as_ref().map(ImagePayload::encode),
            init_image: req.init_image.as_ref().map(ImagePayload::encode),
            mask: req.mask.as_ref().map(ImagePayload::encode_mask),
            guidance_scale: req.guidance_scale,
            steps: req.steps,
            seed: req.seed,
            width: req.width,
            height: req.height,
        }
    }

    pub fn into_request(self) -> Result<GenerationRequest, String> {
        Ok(GenerationRequest {
            prompt: self.prompt,
            negative_prompt: self.negative_prompt,
            pose: self.pose.as_ref().map(PosePayload::decode).transpose()?,
            prev_frame: self.prev_frame.as_ref().map(ImagePayload::decode).transpose()?,
            init_image: self.init_image.as_ref().map(ImagePayload::decode).transpose()?,
            mask: self.mask.as_ref().map(ImagePayload::decode_mask).transpose()?,
            guidance_scale: self.guidance_scale,
            steps: self.steps,
            seed: self.seed,
            width: self.width,
            height: self.height,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageBody {
    pub image: ImagePayload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentBody {
    pub image: ImagePayload,
    pub background_hint: Option<ImagePayload>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextBody {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBody {
    pub prompt: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorBody {
    pub vector: Vec<f64>,
}
