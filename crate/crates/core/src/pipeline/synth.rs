//! Background stage and the autoregressive frame loop.

use super::{refine_prompts, BackgroundMode, PipelineConfig, PipelineError, PromptSpec};
use crate::backends::{BackendError, GenerationRequest, Slot};
use crate::compose::{
    composite, dilate, extract_background, feather, BackgroundFill, CompositeSpec,
};
use crate::media::{FrameSequence, ImageBuffer, MaskMap, PoseFrame};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// One backend call: the slot and a digest of everything sent to it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub slot: Slot,
    pub digest: String,
}

impl CallRecord {
    fn new(slot: Slot, parts: &[&str]) -> Self {
        let mut h = Sha256::new();
        h.update(slot.name().as_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        CallRecord {
            slot,
            digest: hex::encode(h.finalize()),
        }
    }

    fn generation(slot: Slot, req: &GenerationRequest) -> Self {
        CallRecord {
            slot,
            digest: req.digest(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameRecord {
    pub index: usize,
    /// Flat `[x, y, confidence] × 18` conditioning pose.
    pub pose: Vec<f64>,
    pub prev_frame_used: bool,
    /// Digest of the frame passed as `prev_frame`, when one was.
    pub prev_frame_digest: Option<String>,
    pub frame_digest: String,
    pub backend_calls: Vec<CallRecord>,
}

/// Ordered record of every backend call made during synthesis.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SynthesisTrace {
    /// Calls made before the frame loop (refinement and background stage).
    pub stage_calls: Vec<CallRecord>,
    pub frames: Vec<FrameRecord>,
}

impl SynthesisTrace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serialization");
        s.push('\n');
        s
    }

    /// Number of calls made on `slot` across the whole run.
    pub fn count(&self, slot: Slot) -> usize {
        self.stage_calls
            .iter()
            .chain(self.frames.iter().flat_map(|f| &f.backend_calls))
            .filter(|c| c.slot == slot)
            .count()
    }

    /// Checks contiguous indices and that every frame after the first was
    /// conditioned on exactly its predecessor.
    pub fn check_autoregressive(&self) -> Result<(), String> {
        for (i, f) in self.frames.iter().enumerate() {
            if f.index != i {
                return Err(format!("record {i} has index {}", f.index));
            }
            let expected = (i > 0).then(|| self.frames[i - 1].frame_digest.clone());
            if f.prev_frame_used != expected.is_some() || f.prev_frame_digest != expected {
                return Err(format!("frame {i} is not conditioned on frame {}", i.wrapping_sub(1) as isize));
            }
        }
        Ok(())
    }
}

/// The single background plate and one human mask per pose.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundPlate {
    pub background: ImageBuffer,
    /// Binary per-pose masks, already grown by the feather width so the
    /// feathered band stays outside the detected human.
    pub masks: Vec<MaskMap>,
    pub calls: Vec<CallRecord>,
}

fn check_poses(poses: &[PoseFrame], config: &PipelineConfig) -> Result<(), PipelineError> {
    if poses.is_empty() {
        return Err(PipelineError::Input("pose sequence is empty".into()));
    }
    for (t, p) in poses.iter().enumerate() {
        p.check_bounds(config.width, config.height)
            .map_err(|e| PipelineError::Input(format!("pose {t}: {e}")))?;
    }
    Ok(())
}

fn base_request(prompt: &str, config: &PipelineConfig) -> GenerationRequest {
    GenerationRequest {
        prompt: prompt.to_string(),
        negative_prompt: config.negative_prompt.clone(),
        guidance_scale: config.guidance_scale,
        steps: config.steps,
        seed: config.seed,
        width: config.width,
        height: config.height,
        ..Default::default()
    }
}

fn segment_record(frame: &ImageBuffer, hint: Option<&ImageBuffer>) -> CallRecord {
    let hint = hint.map(ImageBuffer::digest).unwrap_or_default();
    CallRecord::new(Slot::Segmenter, &[&frame.digest(), &hint])
}

/// Generates a reference image of the full prompt, removes the human to get
/// the background plate, then generates and segments one image per pose to
/// obtain per-pose masks. The prompt is used as given (no refinement).
pub fn background_stage(
    spec: &PromptSpec,
    poses: &[PoseFrame],
    config: &PipelineConfig,
) -> Result<BackgroundPlate, PipelineError> {
    config.validate()?;
    spec.validate()?;
    check_poses(poses, config)?;
    let b = &config.backends;
    let prompt = spec.full_prompt();
    let mut calls = Vec::new();

    let reference_req = GenerationRequest {
        pose: Some(poses[0].clone()),
        ..base_request(&prompt, config)
    };
    calls.push(CallRecord::generation(Slot::Text2Image, &reference_req));
    let reference = b.text2image.generate(&reference_req)?;
    calls.push(segment_record(&reference, None));
    let body = b.segmenter.segment(&reference, None)?;
    if body.is_empty() {
        return Err(PipelineError::EmptySegmentation);
    }
    let fill = match config.background_mode {
        BackgroundMode::Harmonic => BackgroundFill::Harmonic,
        BackgroundMode::Inpainter => BackgroundFill::Backend {
            inpainter: b.inpainter.as_ref(),
            request: Box::new(base_request(&spec.background, config)),
        },
    };
    if config.background_mode == BackgroundMode::Inpainter {
        // Mirrors the request extract_background sends.
        let grown = dilate(&body, crate::compose::DILATION_MARGIN);
        let req = GenerationRequest {
            init_image: Some(reference.clone()),
            mask: Some(grown),
            ..base_request(&spec.background, config)
        };
        calls.push(CallRecord::generation(Slot::Inpainter, &req));
    }
    let background = extract_background(&reference, &body, fill)?.quantized();

    let indexed: Vec<(usize, &PoseFrame)> = poses.iter().enumerate().collect();
    let results = config.exec.map(&indexed, |&(t, pose)| {
        let req = GenerationRequest {
            pose: Some(pose.clone()),
            seed: config.seed.wrapping_add(t as u64),
            ..base_request(&prompt, config)
        };
        let image = b.text2image.generate(&req)?;
        let mask = b.segmenter.segment(&image, Some(&background))?;
        Ok::<_, BackendError>((req, image, mask))
    });
    let mut masks = Vec::with_capacity(poses.len());
    for r in results {
        let (req, image, mask) = r?;
        calls.push(CallRecord::generation(Slot::Text2Image, &req));
        calls.push(segment_record(&image, Some(&background)));
        if mask.dims() != (config.width, config.height) {
            return Err(PipelineError::Input(format!(
                "segmenter returned a {:?} mask for a {}x{} frame",
                mask.dims(),
                config.width,
                config.height
            )));
        }
        masks.push(dilate(&mask, config.feather_width));
    }
    Ok(BackgroundPlate {
        background,
        masks,
        calls,
    })
}

/// Everything a synthesis run produced.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub video: FrameSequence,
    pub trace: SynthesisTrace,
    /// The prompt after refinement.
    pub prompt: PromptSpec,
    pub plate: BackgroundPlate,
}

/// State of a run that stopped on a backend failure.
#[derive(Debug)]
pub struct Aborted {
    /// Index of the frame that failed.
    pub frame: usize,
    /// Frames completed before the failure.
    pub frames: Vec<ImageBuffer>,
    pub trace: SynthesisTrace,
    pub plate: BackgroundPlate,
    pub source: PipelineError,
}

/// Refines the prompt, builds the background plate, then renders frames in
/// pose order. Frame `t` inpaints the feathered mask `t` over the background
/// with seed `seed + t`, conditioned on frame `t − 1` (nothing for frame 0),
/// and is composited back over the background.
pub fn synthesize_video(
    spec: &PromptSpec,
    poses: &[PoseFrame],
    config: &PipelineConfig,
) -> Result<Synthesis, PipelineError> {
    config.validate()?;
    check_poses(poses, config)?;
    let b = &config.backends;
    let mut trace = SynthesisTrace::default();
    if b.llm_refiner.is_some() {
        for t in [super::clothes_template(&spec.clothes), super::face_template(&spec.face)] {
            trace.stage_calls.push(CallRecord::new(Slot::LlmRefiner, &[&t]));
        }
    }
    let refined = refine_prompts(spec, b.llm_refiner.as_deref())?;
    let plate = background_stage(&refined, poses, config)?;
    trace.stage_calls.extend(plate.calls.iter().cloned());
    let prompt = refined.full_prompt();

    let mut frames: Vec<ImageBuffer> = Vec::with_capacity(poses.len());
    for (t, pose) in poses.iter().enumerate() {
        let prev = frames.last();
        let req = GenerationRequest {
            pose: Some(pose.clone()),
            prev_frame: prev.cloned(),
            init_image: Some(plate.background.clone()),
            mask: Some(feather(&plate.masks[t], config.feather_width)),
            seed: config.seed.wrapping_add(t as u64),
            ..base_request(&prompt, config)
        };
        let call = CallRecord::generation(Slot::Inpainter, &req);
        let result = b.inpainter.inpaint(&req).map_err(PipelineError::from).and_then(|fg| {
            composite(&CompositeSpec {
                background: plate.background.clone(),
                foreground: fg,
                mask: plate.masks[t].clone(),
                feather_width: config.feather_width,
            })
            .map_err(PipelineError::from)
        });
        let frame = match result {
            Ok(f) => f.quantized(),
            Err(source) => {
                log::error!("frame {t} failed: {source}");
                return Err(PipelineError::Aborted(Box::new(Aborted {
                    frame: t,
                    frames,
                    trace,
                    plate,
                    source,
                })));
            }
        };
        trace.frames.push(FrameRecord {
            index: t,
            pose: pose.to_flat(),
            prev_frame_used: prev.is_some(),
            prev_frame_digest: prev.map(ImageBuffer::digest),
            frame_digest: frame.digest(),
            backend_calls: vec![call],
        });
        log::info!("frame {t} done");
        frames.push(frame);
    }
    let video = FrameSequence::new(frames, config.fps)?;
    Ok(Synthesis {
        video,
        trace,
        prompt: refined,
        plate,
    })
}
