//! Pixel buffers, masks, skeletons, and their file formats.

mod buffer;
mod io;
mod pose;

pub use buffer::{ImageBuffer, MaskMap, Plane};
pub(crate) use buffer::quantize;
pub use io::{
    decode_png, encode_png, load_frame, load_mask, read_frames_dir, read_masks_dir, read_pose_file, read_sequence,
    save_frame, save_mask, write_pose_file, write_sequence, Manifest, MANIFEST_FILE,
};
pub use pose::{Keypoint, PoseFrame, KEYPOINT_NAMES, LIMBS, NUM_KEYPOINTS};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: format error: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl MediaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MediaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        MediaError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

/// A sequence of equally sized frames at a fixed frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<ImageBuffer>,
    fps: f64,
}

pub const DEFAULT_FPS: f64 = 24.0;

impl FrameSequence {
    pub fn new(frames: Vec<ImageBuffer>, fps: f64) -> Result<Self, MediaError> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(MediaError::InvalidBuffer(format!("fps must be positive, got {fps}")));
        }
        if let Some(first) = frames.first() {
            let dims = first.dims();
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
                return Err(MediaError::DimensionMismatch(format!(
                    "frame {i} is {:?}, frame 0 is {:?}",
                    f.dims(),
                    dims
                )));
            }
        }
        Ok(FrameSequence { frames, fps })
    }

    pub fn frames(&self) -> &[ImageBuffer] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<ImageBuffer> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
