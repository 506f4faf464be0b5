use super::PipelineError;
use crate::backends::{Embedder, PoseDetector};
use crate::consistency::{
    cosine_consistency, embed_frames, frame_brisque, frame_niqe, pose_mse, segmented_metric,
    sequence_consistency, text_alignment, MetricError, PairMetric, Region, SegmentedMetric,
};
use crate::media::{ImageBuffer, MaskMap, PoseFrame};
use crate::nss::{MvgModel, SvrModel};
use crate::report::{MetricId, MetricReport};
use crate::Execution;

/// Inputs to [`evaluate_video`]. Optional fields gate the metrics that need
/// them; metrics without their prerequisites are reported as unavailable.
#[derive(Clone, Copy)]
pub struct EvalInputs<'a> {
    pub label: &'a str,
    pub frames: &'a [ImageBuffer],
    /// Conditioning poses, one per frame.
    pub poses: Option<&'a [PoseFrame]>,
    pub prompt: Option<&'a str>,
    /// Human masks, one per frame.
    pub masks: Option<&'a [MaskMap]>,
    pub niqe_model: Option<&'a MvgModel>,
    pub svr_model: Option<&'a SvrModel>,
    pub embedder: Option<&'a dyn Embedder>,
    pub pose_detector: Option<&'a dyn PoseDetector>,
    pub exec: Execution,
}

impl<'a> EvalInputs<'a> {
    pub fn new(label: &'a str, frames: &'a [ImageBuffer]) -> Self {
        EvalInputs {
            label,
            frames,
            poses: None,
            prompt: None,
            masks: None,
            niqe_model: None,
            svr_model: None,
            embedder: None,
            pose_detector: None,
            exec: Execution::default(),
        }
    }
}

/// Records a computed value, or the reason it is missing. Backend failures
/// abort the evaluation instead.
fn record(
    report: &mut MetricReport,
    metric: MetricId,
    value: Result<f64, MetricError>,
) -> Result<(), PipelineError> {
    match value {
        Ok(v) => report.set(metric, v)?,
        Err(MetricError::Backend(e)) => return Err(e.into()),
        Err(e) => report.set_unavailable(metric, e.to_string()),
    }
    Ok(())
}

fn pose_error(
    frames: &[ImageBuffer],
    poses: &[PoseFrame],
    detector: &dyn PoseDetector,
    exec: Execution,
) -> Result<f64, MetricError> {
    let idx: Vec<usize> = (0..frames.len()).collect();
    let per_frame = exec.map(&idx, |&t| {
        let det = detector.detect(&frames[t])?;
        pose_mse(&poses[t], &det, frames[t].width(), frames[t].height())
    });
    let mut acc = 0.0;
    for v in per_frame {
        acc += v?;
    }
    Ok(acc / frames.len() as f64)
}

/// Computes all thirteen metrics for one video.
pub fn evaluate_video(inputs: &EvalInputs<'_>) -> Result<MetricReport, PipelineError> {
    let frames = inputs.frames;
    if frames.is_empty() {
        return Err(PipelineError::Input("no frames to evaluate".into()));
    }
    if let Some(f) = frames.iter().find(|f| f.dims() != frames[0].dims()) {
        return Err(PipelineError::Input(format!(
            "frame sizes differ: {:?} vs {:?}",
            frames[0].dims(),
            f.dims()
        )));
    }
    for (what, n) in [
        ("poses", inputs.poses.map(<[_]>::len)),
        ("masks", inputs.masks.map(<[_]>::len)),
    ] {
        if let Some(n) = n {
            if n != frames.len() {
                return Err(PipelineError::Input(format!(
                    "{} frames but {n} {what}",
                    frames.len()
                )));
            }
        }
    }
    let exec = inputs.exec;
    let mut report = MetricReport::new(inputs.label);

    let no_masks = "no human masks given";
    let no_niqe = "no NIQE pristine model given";
    let no_svr = "no BRISQUE SVR model given";
    let no_embedder = "no embedder configured";

    match inputs.niqe_model {
        Some(m) => {
            record(&mut report, MetricId::FrameNiqe, frame_niqe(frames, m, exec))?;
            for (id, region) in [(MetricId::BodyNiqe, Region::Body), (MetricId::BackgroundNiqe, Region::Background)] {
                match inputs.masks {
                    Some(masks) => record(&mut report, id, segmented_metric(frames, masks, SegmentedMetric::Niqe(m), region, exec))?,
                    None => report.set_unavailable(id, no_masks),
                }
            }
        }
        None => {
            for id in [MetricId::FrameNiqe, MetricId::BodyNiqe, MetricId::BackgroundNiqe] {
                report.set_unavailable(id, no_niqe);
            }
        }
    }
    match inputs.svr_model {
        Some(m) => {
            record(&mut report, MetricId::FrameBrisque, frame_brisque(frames, m, exec))?;
            for (id, region) in [(MetricId::BodyBrisque, Region::Body), (MetricId::BackgroundBrisque, Region::Background)] {
                match inputs.masks {
                    Some(masks) => record(&mut report, id, segmented_metric(frames, masks, SegmentedMetric::Brisque(m), region, exec))?,
                    None => report.set_unavailable(id, no_masks),
                }
            }
        }
        None => {
            for id in [MetricId::FrameBrisque, MetricId::BodyBrisque, MetricId::BackgroundBrisque] {
                report.set_unavailable(id, no_svr);
            }
        }
    }

    match (inputs.poses, inputs.pose_detector) {
        (Some(poses), Some(det)) => record(&mut report, MetricId::PoseMse, pose_error(frames, poses, det, exec))?,
        (None, _) => report.set_unavailable(MetricId::PoseMse, "no conditioning poses given"),
        (_, None) => report.set_unavailable(MetricId::PoseMse, "no pose detector configured"),
    }

    record(&mut report, MetricId::FrameMse, sequence_consistency(frames, PairMetric::Mse, exec))?;
    record(&mut report, MetricId::FrameL1, sequence_consistency(frames, PairMetric::L1, exec))?;

    match inputs.embedder {
        Some(emb) => {
            match inputs.prompt {
                Some(p) => {
                    let value = emb
                        .embed_text(p)
                        .map_err(MetricError::from)
                        .and_then(|t| text_alignment(frames, &t, emb, exec));
                    record(&mut report, MetricId::TextAlignment, value)?;
                }
                None => report.set_unavailable(MetricId::TextAlignment, "no prompt given"),
            }
            let frame_clip = embed_frames(frames, emb, exec).and_then(|e| cosine_consistency(&e));
            record(&mut report, MetricId::FrameClip, frame_clip)?;
            for (id, region) in [(MetricId::BodyClip, Region::Body), (MetricId::BackgroundClip, Region::Background)] {
                match inputs.masks {
                    Some(masks) => record(&mut report, id, segmented_metric(frames, masks, SegmentedMetric::Clip(emb), region, exec))?,
                    None => report.set_unavailable(id, no_masks),
                }
            }
        }
        None => {
            for id in [MetricId::TextAlignment, MetricId::FrameClip, MetricId::BodyClip, MetricId::BackgroundClip] {
                report.set_unavailable(id, no_embedder);
            }
        }
    }
    Ok(report)
}
