use crate::config::{FileConfig, Overrides};
use crate::{BackendArgs, CliError, ComposeArgs, DatasetArgs, EvaluateArgs, IntraKind, SynthesizeArgs};
use avatarforge_core::backends::BackendSuite;
use avatarforge_core::media::{
    read_frames_dir, read_masks_dir, read_pose_file, save_frame, save_mask, write_sequence, FrameSequence, MaskMap,
    PoseFrame,
};
use avatarforge_core::nss::{MvgModel, SvrModel};
use avatarforge_core::pipeline::{
    background_stage, build_interframe_dataset, build_intra_dataset, evaluate_video, refine_prompts, synthesize_video,
    AdapterKind, EvalInputs, PipelineConfig, PipelineError, PoseRegionDetector, PromptSpec,
};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const TRACE_FILE: &str = "trace.json";
pub const BACKGROUND_FILE: &str = "background.png";
pub const MASKS_DIR: &str = "masks";
pub const RUN_FILE: &str = "run.json";
pub const JOB_FILE: &str = "job.json";
/// Padding around joint boxes when cropping intra datasets.
pub const REGION_MARGIN: f64 = 8.0;

struct Setup {
    file: FileConfig,
    config: PipelineConfig,
}

fn setup(common: &BackendArgs) -> Result<Setup, CliError> {
    let file = FileConfig::load(common.config.as_deref())?;
    let over = Overrides {
        backend: common.backend,
        endpoint: common.endpoint.clone(),
        seed: common.seed,
    };
    let backends = file.backends(&over)?;
    let config = file.pipeline(backends, &over)?;
    Ok(Setup { file, config })
}

fn require_prompt(file: &FileConfig) -> Result<PromptSpec, CliError> {
    file.prompt_spec()?
        .ok_or_else(|| CliError::Usage("the config needs a [prompt] section with clothes, face and background".into()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_masks(masks: &[MaskMap], dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    for (i, m) in masks.iter().enumerate() {
        save_mask(m, dir.join(format!("mask_{i:05}.png")))?;
    }
    Ok(())
}

fn load_poses(path: &Path) -> Result<Vec<PoseFrame>, CliError> {
    let poses = read_pose_file(path)?;
    if poses.is_empty() {
        return Err(CliError::Input(format!("{}: no poses", path.display())));
    }
    Ok(poses)
}

pub fn synthesize(args: &SynthesizeArgs) -> Result<(), CliError> {
    let Setup { file, config } = setup(&args.common)?;
    let spec = require_prompt(&file)?;
    let poses = load_poses(&args.poses)?;
    create_dir(&args.out)?;
    match synthesize_video(&spec, &poses, &config) {
        Ok(s) => {
            write_sequence(&s.video, &args.out)?;
            write_text(&args.out.join(TRACE_FILE), &s.trace.to_json())?;
            save_frame(&s.plate.background, args.out.join(BACKGROUND_FILE))?;
            write_masks(&s.plate.masks, &args.out.join(MASKS_DIR))?;
            println!("frames={} fps={} out={}", s.video.len(), s.video.fps(), args.out.display());
            Ok(())
        }
        Err(PipelineError::Aborted(a)) => {
            let partial = FrameSequence::new(a.frames, config.fps)?;
            write_sequence(&partial, &args.out)?;
            write_text(&args.out.join(TRACE_FILE), &a.trace.to_json())?;
            save_frame(&a.plate.background, args.out.join(BACKGROUND_FILE))?;
            write_masks(&a.plate.masks, &args.out.join(MASKS_DIR))?;
            Err(CliError::Runtime(format!(
                "synthesis aborted at frame {}: {}; kept {} frames in {}",
                a.frame,
                a.source,
                partial.len(),
                args.out.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

/// Run metadata written next to a report so the report bodies stay
/// byte-stable.
#[derive(Serialize)]
struct RunMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    started_unix_secs: u64,
    elapsed_secs: f64,
    frames: usize,
    inputs: Vec<(&'a str, String)>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let Setup { file, config } = setup(&args.common)?;
    let video = read_frames_dir(&args.frames, config.fps)?;
    if video.is_empty() {
        return Err(CliError::Input(format!("{}: no frames", args.frames.display())));
    }
    let masks = args.masks.as_deref().map(read_masks_dir).transpose()?;
    let poses = args.poses.as_deref().map(read_pose_file).transpose()?;
    let prompt = match &args.prompt {
        Some(p) => Some(p.clone()),
        None => file.prompt_spec()?.map(|s| s.full_prompt()),
    };
    let niqe = args
        .niqe_model
        .as_deref()
        .map(MvgModel::load)
        .transpose()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let svr = args
        .svr_model
        .as_deref()
        .map(SvrModel::load)
        .transpose()
        .map_err(|e| CliError::Input(e.to_string()))?;

    let mut inputs = EvalInputs::new(&args.label, video.frames());
    inputs.masks = masks.as_deref();
    inputs.poses = poses.as_deref();
    inputs.prompt = prompt.as_deref();
    inputs.niqe_model = niqe.as_ref();
    inputs.svr_model = svr.as_ref();
    inputs.embedder = Some(config.backends.embedder.as_ref());
    inputs.pose_detector = Some(config.backends.pose_detector.as_ref());
    inputs.exec = config.exec;
    let report = evaluate_video(&inputs)?;

    create_dir(&args.out)?;
    let to_input = |e: avatarforge_core::report::ReportError| CliError::Input(e.to_string());
    write_text(&args.out.join("report.json"), &report.to_json().map_err(to_input)?)?;
    write_text(&args.out.join("report.csv"), &report.to_csv().map_err(to_input)?)?;
    write_text(&args.out.join("report.md"), &report.to_markdown())?;

    let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let inputs: Vec<(&str, String)> = [
        ("frames", Some(args.frames.display().to_string())),
        ("masks", show(&args.masks)),
        ("poses", show(&args.poses)),
        ("svr_model", show(&args.svr_model)),
        ("niqe_model", show(&args.niqe_model)),
        ("prompt", prompt),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.map(|v| (k, v)))
    .collect();
    let meta = RunMetadata {
        tool: "avatarforge",
        version: env!("CARGO_PKG_VERSION"),
        command: "evaluate",
        started_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        elapsed_secs: started.elapsed().as_secs_f64(),
        frames: video.len(),
        inputs,
    };
    let meta = serde_json::to_string_pretty(&meta).expect("run metadata serialization");
    write_text(&args.out.join(RUN_FILE), &meta)?;
    println!("report={} frames={}", args.out.join("report.md").display(), video.len());
    Ok(())
}

pub fn compose(args: &ComposeArgs) -> Result<(), CliError> {
    let Setup { file, config } = setup(&args.common)?;
    let spec = require_prompt(&file)?;
    let poses = load_poses(&args.poses)?;
    let plate = background_stage(&spec, &poses, &config)?;
    create_dir(&args.out)?;
    save_frame(&plate.background, args.out.join(BACKGROUND_FILE))?;
    write_masks(&plate.masks, &args.out)?;
    println!("masks={} out={}", plate.masks.len(), args.out.display());
    Ok(())
}

pub fn dataset(args: &DatasetArgs) -> Result<(), CliError> {
    let Setup { file, config } = setup(&args.common)?;
    let out = args.out.clone().unwrap_or_else(|| config.adapter_job_dir.clone());
    let images_dir = out.join("images");
    let videos = args
        .frames
        .iter()
        .map(|d| read_frames_dir(d, config.fps))
        .collect::<Result<Vec<_>, _>>()?;
    let suite: &BackendSuite = &config.backends;

    let job = if args.inter {
        build_interframe_dataset(&videos, suite.captioner.as_ref(), &images_dir, config.exec)?
    } else {
        let kind = match args.intra.expect("clap requires --intra or --inter") {
            IntraKind::Clothes => AdapterKind::Clothes,
            IntraKind::Face => AdapterKind::Face,
        };
        let caption = match &args.prompt {
            Some(p) => p.clone(),
            None => {
                let refined = refine_prompts(&require_prompt(&file)?, suite.llm_refiner.as_deref())?;
                let text = match kind {
                    AdapterKind::Face => refined.refined_face,
                    _ => refined.refined_clothes,
                };
                text.expect("refine_prompts fills both refined prompts")
            }
        };
        let images: Vec<_> = videos.into_iter().flat_map(FrameSequence::into_frames).collect();
        let detector = PoseRegionDetector {
            detector: suite.pose_detector.as_ref(),
            margin: REGION_MARGIN,
        };
        build_intra_dataset(&images, &detector, kind, &caption, &images_dir, config.exec)?
    };
    job.validate()?;
    let job_path = out.join(JOB_FILE);
    job.write(&job_path)?;
    for w in &job.warnings {
        log::warn!("{w}");
    }
    println!("pairs={} job={}", job.pairs.len(), job_path.display());
    Ok(())
}
