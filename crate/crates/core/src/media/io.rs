use super::{FrameSequence, ImageBuffer, MaskMap, MediaError, PoseFrame, NUM_KEYPOINTS};
use image::{codecs::png::PngEncoder, DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: f64,
    pub frames: Vec<String>,
}

/// Decodes an 8-bit gray/RGB PNG into `[0, 1]` samples. Alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, raw): (usize, Vec<u8>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(b) => (1, b.into_raw().chunks_exact(2).map(|p| p[0]).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(b) => (
            3,
            b.into_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
        ),
        other => return Err(format!("unsupported sample layout {:?}", other.color())),
    };
    let data = raw.into_iter().map(|b| f64::from(b) / 255.0).collect();
    ImageBuffer::new(w, h, channels, data).map_err(|e| e.to_string())
}

/// Encodes to an 8-bit PNG, rounding each sample to the nearest level.
pub fn encode_png(img: &ImageBuffer) -> Vec<u8> {
    let raw: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let color = if img.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(&raw, img.width() as u32, img.height() as u32, color)
        .expect("png encoding into memory");
    out
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<ImageBuffer, MediaError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| MediaError::io(path, e))?;
    decode_png(&bytes).map_err(|msg| MediaError::format(path, msg))
}

pub fn save_frame(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), MediaError> {
    let path = path.as_ref();
    fs::write(path, encode_png(img)).map_err(|e| MediaError::io(path, e))
}

/// Loads a gray PNG mask (255 maps to full coverage). RGB masks use their luma.
pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskMap, MediaError> {
    let img = load_frame(&path)?.to_gray();
    MaskMap::new(img.width(), img.height(), img.into_data())
}

pub fn save_mask(mask: &MaskMap, path: impl AsRef<Path>) -> Result<(), MediaError> {
    save_frame(&mask.to_image(), path)
}

#[derive(Serialize, Deserialize)]
struct PoseFileRepr {
    frames: Vec<PoseEntryRepr>,
}

#[derive(Serialize, Deserialize)]
struct PoseEntryRepr {
    keypoints: Vec<Option<f64>>,
}

pub(crate) fn parse_pose_json(text: &str) -> Result<Vec<PoseFrame>, String> {
    let repr: PoseFileRepr = serde_json::from_str(text).map_err(|e| e.to_string())?;
    repr.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.keypoints.len() != 3 * NUM_KEYPOINTS {
                return Err(format!(
                    "frame {i}: expected {} keypoint values, got {}",
                    3 * NUM_KEYPOINTS,
                    f.keypoints.len()
                ));
            }
            // A null anywhere in a triplet marks the joint missing.
            let flat: Vec<f64> = f
                .keypoints
                .chunks_exact(3)
                .flat_map(|t| match (t[0], t[1], t[2]) {
                    (Some(x), Some(y), Some(c)) => [x, y, c],
                    _ => [0.0, 0.0, 0.0],
                })
                .collect();
            PoseFrame::from_flat(&flat).map_err(|e| format!("frame {i}: {e}"))
        })
        .collect()
}

pub(crate) fn pose_json(poses: &[PoseFrame]) -> String {
    let repr = PoseFileRepr {
        frames: poses
            .iter()
            .map(|p| PoseEntryRepr {
                keypoints: p.to_flat().into_iter().map(Some).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&repr).expect("pose serialization")
}

pub fn read_pose_file(path: impl AsRef<Path>) -> Result<Vec<PoseFrame>, MediaError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MediaError::io(path, e))?;
    parse_pose_json(&text).map_err(|msg| MediaError::format(path, msg))
}

pub fn write_pose_file(poses: &[PoseFrame], path: impl AsRef<Path>) -> Result<(), MediaError> {
    let path = path.as_ref();
    fs::write(path, pose_json(poses)).map_err(|e| MediaError::io(path, e))
}

pub(crate) fn frame_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// Writes `frame_%05d.png` files plus `manifest.json`; returns the manifest path.
pub fn write_sequence(seq: &FrameSequence, dir: impl AsRef<Path>) -> Result<PathBuf, MediaError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| MediaError::io(dir, e))?;
    let mut names = Vec::with_capacity(seq.len());
    for (i, frame) in seq.frames().iter().enumerate() {
        let name = frame_name(i);
        save_frame(frame, dir.join(&name))?;
        names.push(name);
    }
    let manifest = Manifest {
        fps: seq.fps(),
        frames: names,
    };
    let path = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    fs::write(&path, body).map_err(|e| MediaError::io(&path, e))?;
    Ok(path)
}

/// Reads a directory written by [`write_sequence`].
pub fn read_sequence(dir: impl AsRef<Path>) -> Result<FrameSequence, MediaError> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| MediaError::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| MediaError::format(&path, e.to_string()))?;
    let frames = manifest
        .frames
        .iter()
        .map(|name| load_frame(dir.join(name)))
        .collect::<Result<Vec<_>, _>>()?;
    FrameSequence::new(frames, manifest.fps)
}

fn sorted_pngs(dir: &Path) -> Result<Vec<PathBuf>, MediaError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| MediaError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads a frame directory: the manifest when present, otherwise every PNG in
/// lexicographic order at `fallback_fps`.
pub fn read_frames_dir(
    dir: impl AsRef<Path>,
    fallback_fps: f64,
) -> Result<FrameSequence, MediaError> {
    let dir = dir.as_ref();
    if dir.join(MANIFEST_FILE).is_file() {
        return read_sequence(dir);
    }
    let frames = sorted_pngs(dir)?
        .iter()
        .map(load_frame)
        .collect::<Result<Vec<_>, _>>()?;
    FrameSequence::new(frames, fallback_fps)
}

/// Every PNG in `dir`, in lexicographic order, as masks.
pub fn read_masks_dir(dir: impl AsRef<Path>) -> Result<Vec<MaskMap>, MediaError> {
    sorted_pngs(dir.as_ref())?.iter().map(load_mask).collect()
}
