//! Procedural stand-ins for the neural backends.
//!
//! Every mock is a pure function of its inputs. Generated frames draw the
//! skeleton with a reserved color per joint so the pose detector can recover
//! the keypoints from pixels alone.

use super::wire::{GenerateBody, ImageBody, ImagePayload, PosePayload, SegmentBody, TextBody, VectorBody};
use super::{
    BackendError, BackendErrorKind, Captioner, Embedder, GenerationRequest, ImageGenerator, Inpainter,
    PoseDetector, Route, Segmenter,
};
use crate::compose::{dilate, erode};
use crate::consistency::EmbeddingVector;
use crate::media::{ImageBuffer, Keypoint, MaskMap, PoseFrame, LIMBS, NUM_KEYPOINTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Joint colors in keypoint order (the usual OpenPose rendering palette).
pub const JOINT_PALETTE: [[u8; 3]; NUM_KEYPOINTS] = [
    [255, 0, 0],
    [255, 85, 0],
    [255, 170, 0],
    [255, 255, 0],
    [170, 255, 0],
    [85, 255, 0],
    [0, 255, 0],
    [0, 255, 85],
    [0, 255, 170],
    [0, 255, 255],
    [0, 170, 255],
    [0, 85, 255],
    [0, 0, 255],
    [85, 0, 255],
    [170, 0, 255],
    [255, 0, 255],
    [255, 0, 170],
    [255, 0, 85],
];

pub const EMBEDDING_DIM: usize = 64;
/// Segmentation threshold on the per-channel difference from the background.
pub const SEGMENT_THRESHOLD: f64 = 8.0 / 255.0;

const LIMB_HALF_WIDTH: f64 = 1.5;
const JOINT_RADIUS: f64 = 2.5;
const LIMB_GRAY: f64 = 0.65;
const LIMB_NOISE: f64 = 0.1;

fn sha(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Solid background color derived from the prompt, each channel in
/// `[0.1, 0.35]` so it never collides with the limb gray or the palette.
pub fn prompt_color(prompt: &str) -> [f64; 3] {
    let h = sha(prompt.as_bytes());
    [0, 1, 2].map(|i| 0.1 + 0.25 * f64::from(h[i]) / 255.0)
}

fn seg_dist2(px: f64, py: f64, a: Keypoint, b: Keypoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.x) * dx + (py - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let (ex, ey) = (px - a.x - t * dx, py - a.y - t * dy);
    ex * ex + ey * ey
}

/// Pixel ranges covering `[c - r, c + r]`, clipped to `[0, n)`.
fn span(c0: f64, c1: f64, r: f64, n: usize) -> std::ops::Range<usize> {
    let lo = (c0.min(c1) - r).floor().max(0.0) as usize;
    let hi = ((c0.max(c1) + r).ceil() + 1.0).clamp(0.0, n as f64) as usize;
    lo.min(n)..hi
}

fn render_scene(req: &GenerationRequest) -> ImageBuffer {
    let (w, h) = (req.width, req.height);
    let bg = prompt_color(&req.prompt);
    let mut img = ImageBuffer::filled(w, h, &bg).expect("prompt color in range");
    let Some(pose) = &req.pose else {
        return img;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let kp = pose.keypoints();
    for &(a, b) in LIMBS.iter() {
        let (ka, kb) = (kp[a], kp[b]);
        if !(ka.is_visible() && kb.is_visible()) {
            continue;
        }
        for y in span(ka.y, kb.y, LIMB_HALF_WIDTH, h) {
            for x in span(ka.x, kb.x, LIMB_HALF_WIDTH, w) {
                if seg_dist2(x as f64, y as f64, ka, kb) <= LIMB_HALF_WIDTH * LIMB_HALF_WIDTH {
                    let g = LIMB_GRAY + LIMB_NOISE * noise[y * w + x];
                    img.set_pixel(x, y, &[g, g, g]);
                }
            }
        }
    }
    for (k, p) in kp.iter().enumerate() {
        if !p.is_visible() {
            continue;
        }
        let color = JOINT_PALETTE[k].map(|c| f64::from(c) / 255.0);
        for y in span(p.y, p.y, JOINT_RADIUS, h) {
            for x in span(p.x, p.x, JOINT_RADIUS, w) {
                let (dx, dy) = (x as f64 - p.x, y as f64 - p.y);
                if dx * dx + dy * dy <= JOINT_RADIUS * JOINT_RADIUS {
                    img.set_pixel(x, y, &color);
                }
            }
        }
    }
    img.quantized()
}

/// Procedural generator. Text-to-image mode draws the skeleton of `req.pose`
/// on a solid prompt-colored background; limb texture depends on the seed.
/// Inpaint mode blends that scene over `init_image` through the mask and
/// leaves unmasked pixels untouched.
pub fn mock_render(req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
    let route = if req.is_inpaint() { Route::Inpaint } else { Route::Generate };
    req.validate().map_err(|m| BackendError::invalid(route, m))?;
    let mut scene = render_scene(req);
    let (Some(init), Some(mask)) = (&req.init_image, &req.mask) else {
        if req.pose.is_none() {
            return Err(BackendError::invalid(route, "pose-conditioned generation without a pose"));
        }
        return Ok(scene);
    };
    let c = init.channels();
    if c == 1 {
        scene = scene.to_gray();
    }
    let data = init
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let a = mask.data()[i / c];
            if a == 0.0 {
                return v;
            }
            let s = scene.data()[i];
            crate::media::quantize(a * s + (1.0 - a) * v)
        })
        .collect();
    Ok(ImageBuffer::new(init.width(), init.height(), c, data).expect("blend stays in range"))
}

fn as_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Recovers keypoints as centroids of the pixels carrying each joint color.
/// Joints whose color is absent come back with confidence 0.
pub fn mock_detect_pose(frame: &ImageBuffer) -> PoseFrame {
    let mut acc = [(0.0f64, 0.0f64, 0usize); NUM_KEYPOINTS];
    if frame.channels() == 3 {
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                let p = frame.pixel(x, y);
                let rgb = [as_u8(p[0]), as_u8(p[1]), as_u8(p[2])];
                if let Some(k) = JOINT_PALETTE.iter().position(|c| *c == rgb) {
                    acc[k].0 += x as f64;
                    acc[k].1 += y as f64;
                    acc[k].2 += 1;
                }
            }
        }
    }
    let kps = acc
        .iter()
        .map(|&(sx, sy, n)| {
            if n == 0 {
                Keypoint::missing()
            } else {
                Keypoint::new(sx / n as f64, sy / n as f64, 1.0)
            }
        })
        .collect();
    PoseFrame::new(kps).expect("centroids are finite")
}

/// Most frequent 8-bit color of the frame.
fn mode_color(frame: &ImageBuffer) -> Vec<f64> {
    let mut counts = std::collections::BTreeMap::<Vec<u8>, usize>::new();
    for px in frame.data().chunks_exact(frame.channels()) {
        *counts.entry(px.iter().map(|v| as_u8(*v)).collect()).or_default() += 1;
    }
    let best = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(k, _)| k.clone())
        .unwrap_or_default();
    best.into_iter().map(|b| f64::from(b) / 255.0).collect()
}

/// Pixels differing from the background by more than [`SEGMENT_THRESHOLD`]
/// in any channel, cleaned by a 1-px closing. Without a hint the frame's most
/// frequent color stands in for the background.
pub fn mock_segment(
    frame: &ImageBuffer,
    background_hint: Option<&ImageBuffer>,
) -> Result<MaskMap, BackendError> {
    let (w, h, c) = frame.dims();
    let raw = match background_hint {
        Some(hint) => {
            if hint.dims() != frame.dims() {
                return Err(BackendError::invalid(
                    Route::Segment,
                    format!("hint {:?} vs frame {:?}", hint.dims(), frame.dims()),
                ));
            }
            MaskMap::from_fn(w, h, |x, y| {
                frame
                    .pixel(x, y)
                    .iter()
                    .zip(hint.pixel(x, y))
                    .any(|(a, b)| (a - b).abs() > SEGMENT_THRESHOLD)
            })
        }
        None => {
            let bg = mode_color(frame);
            debug_assert_eq!(bg.len(), c);
            MaskMap::from_fn(w, h, |x, y| {
                frame
                    .pixel(x, y)
                    .iter()
                    .zip(&bg)
                    .any(|(a, b)| (a - b).abs() > SEGMENT_THRESHOLD)
            })
        }
    };
    Ok(erode(&dilate(&raw, 1), 1))
}

/// 8×8 grid of gray block means, L2-normalized. An all-black image yields
/// the zero vector.
pub fn mock_embed_image(image: &ImageBuffer) -> Result<EmbeddingVector, BackendError> {
    let (w, h) = (image.width(), image.height());
    if w < 8 || h < 8 {
        return Err(BackendError::invalid(
            Route::EmbedImage,
            format!("image {w}x{h} smaller than 8x8"),
        ));
    }
    let gray = image.to_gray();
    let mut v = Vec::with_capacity(EMBEDDING_DIM);
    for by in 0..8 {
        for bx in 0..8 {
            let (x0, x1) = (bx * w / 8, (bx + 1) * w / 8);
            let (y0, y1) = (by * h / 8, (by + 1) * h / 8);
            let mut s = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    s += gray.data()[y * w + x];
                }
            }
            v.push(s / ((x1 - x0) * (y1 - y0)) as f64);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    EmbeddingVector::new(v).map_err(|e| BackendError::failed(Route::EmbedImage, e.to_string()))
}

/// Unit vector seeded by the SHA-256 of the text.
pub fn mock_embed_text(text: &str) -> EmbeddingVector {
    let seed = sha(text.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    EmbeddingVector::new(v).expect("finite unit vector")
}

fn mock_caption(image: &ImageBuffer) -> String {
    let c = image.channels();
    let n = (image.width() * image.height()) as f64;
    let mut mean = vec![0.0; c];
    for px in image.data().chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(px) {
            *m += v;
        }
    }
    let hex: String = mean.iter().map(|m| format!("{:02x}", as_u8(m / n))).collect();
    format!("a person in front of a #{hex} background")
}

/// Every mock behind the backend traits.
#[derive(Clone, Copy, Debug, Default)]
pub struct MockBackend;

impl ImageGenerator for MockBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
        if req.is_inpaint() {
            return Err(BackendError::invalid(Route::Generate, "inpaint inputs sent to generate"));
        }
        mock_render(req)
    }
}

impl Inpainter for MockBackend {
    fn inpaint(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
        if !req.is_inpaint() {
            return Err(BackendError::invalid(Route::Inpaint, "inpaint needs init_image and mask"));
        }
        mock_render(req)
    }
}

impl Segmenter for MockBackend {
    fn segment(
        &self,
        frame: &ImageBuffer,
        background_hint: Option<&ImageBuffer>,
    ) -> Result<MaskMap, BackendError> {
        mock_segment(frame, background_hint)
    }
}

impl PoseDetector for MockBackend {
    fn detect(&self, frame: &ImageBuffer) -> Result<PoseFrame, BackendError> {
        Ok(mock_detect_pose(frame))
    }
}

impl Embedder for MockBackend {
    fn embed_image(&self, image: &ImageBuffer) -> Result<EmbeddingVector, BackendError> {
        mock_embed_image(image)
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        Ok(mock_embed_text(text))
    }
}

impl Captioner for MockBackend {
    fn caption(&self, image: &ImageBuffer) -> Result<String, BackendError> {
        Ok(mock_caption(image))
    }
}

/// Answers one wire-protocol request with [`MockBackend`], returning the HTTP
/// status and JSON body a model server would send. The refine route has no
/// mock and answers 503.
pub fn mock_wire_reply(path: &str, body: &str) -> (u16, String) {
    fn parse<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, (u16, String)> {
        serde_json::from_str(body).map_err(|e| (400, format!("schema: {e}")))
    }
    fn image(p: &ImagePayload) -> Result<ImageBuffer, (u16, String)> {
        p.decode().map_err(|e| (400, e))
    }
    fn backend(e: BackendError) -> (u16, String) {
        match e.kind {
            BackendErrorKind::InvalidRequest(_) => (400, e.to_string()),
            _ => (500, e.to_string()),
        }
    }
    fn json<T: serde::Serialize>(v: &T) -> Result<String, (u16, String)> {
        Ok(serde_json::to_string(v).expect("wire body serialization"))
    }
    let Some(route) = Route::ALL.into_iter().find(|r| r.path() == path) else {
        return (404, format!("unknown route {path}"));
    };
    let m = MockBackend;
    let reply = (|| match route {
        Route::Generate | Route::Inpaint => {
            let req = parse::<GenerateBody>(body)?.into_request().map_err(|e| (400, e))?;
            let out = if route == Route::Generate { m.generate(&req) } else { m.inpaint(&req) };
            json(&ImagePayload::encode(&out.map_err(backend)?))
        }
        Route::Segment => {
            let b: SegmentBody = parse(body)?;
            let hint = b.background_hint.as_ref().map(image).transpose()?;
            let mask = m.segment(&image(&b.image)?, hint.as_ref()).map_err(backend)?;
            json(&ImagePayload::encode_mask(&mask))
        }
        Route::Pose => {
            let b: ImageBody = parse(body)?;
            json(&PosePayload::encode(&mock_detect_pose(&image(&b.image)?)))
        }
        Route::EmbedImage => {
            let b: ImageBody = parse(body)?;
            let v = m.embed_image(&image(&b.image)?).map_err(backend)?;
            json(&VectorBody { vector: v.values().to_vec() })
        }
        Route::EmbedText => {
            let b: TextBody = parse(body)?;
            json(&VectorBody { vector: mock_embed_text(&b.text).values().to_vec() })
        }
        Route::Caption => {
            let b: ImageBody = parse(body)?;
            json(&TextBody { text: mock_caption(&image(&b.image)?) })
        }
        Route::RefinePrompt => Err((503, "refiner slot not loaded".to_string())),
    })();
    match reply {
        Ok(body) => (200, body),
        Err(e) => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{cosine_similarity, pose_mse};

    fn star(cx: f64, cy: f64) -> PoseFrame {
        PoseFrame::new(
            (0..NUM_KEYPOINTS)
                .map(|k| {
                    let t = k as f64 / NUM_KEYPOINTS as f64 * std::f64::consts::TAU;
                    Keypoint::new(cx + 20.0 * t.cos() + 0.3, cy + 20.0 * t.sin() - 0.2, 1.0)
                })
                .collect(),
        )
        .unwrap()
    }

    fn req(seed: u64) -> GenerationRequest {
        GenerationRequest {
            prompt: "red hoodie".into(),
            pose: Some(star(32.0, 32.0)),
            seed,
            width: 64,
            height: 64,
            ..Default::default()
        }
    }

    #[test]
    fn render_is_deterministic_and_seed_only_moves_texture() {
        let a = mock_render(&req(1)).unwrap();
        assert_eq!(a, mock_render(&req(1)).unwrap());
        let b = mock_render(&req(2)).unwrap();
        assert_ne!(a, b);
        assert_eq!(mock_detect_pose(&a), mock_detect_pose(&b));
        assert_eq!(a.pixel(0, 0), b.pixel(0, 0));
    }

    #[test]
    fn missing_pose_is_rejected() {
        let r = GenerationRequest { pose: None, ..req(0) };
        let err = mock_render(&r).unwrap_err();
        assert_eq!(err.route, "/v1/generate");
    }

    #[test]
    fn detection_recovers_pose() {
        let r = req(3);
        let det = mock_detect_pose(&mock_render(&r).unwrap());
        let p = r.pose.unwrap();
        for (a, b) in p.keypoints().iter().zip(det.keypoints()) {
            assert_eq!(b.confidence, 1.0);
            assert!((a.x - b.x).abs() <= 0.5 && (a.y - b.y).abs() <= 0.5);
        }
        assert!(pose_mse(&p, &det, 64, 64).unwrap() < 0.05);
    }

    #[test]
    fn blank_frame_detects_nothing() {
        let img = ImageBuffer::filled(16, 16, &[0.2, 0.2, 0.2]).unwrap();
        assert_eq!(mock_detect_pose(&img).visible_count(), 0);
    }

    #[test]
    fn occluded_joint_drops_out() {
        let r = req(0);
        let mut img = mock_render(&r).unwrap();
        let k = r.pose.as_ref().unwrap().keypoint(4);
        for y in 0..64 {
            for x in 0..64 {
                if (x as f64 - k.x).hypot(y as f64 - k.y) <= 3.2 {
                    img.set_pixel(x, y, &[0.2, 0.2, 0.2]);
                }
            }
        }
        let det = mock_detect_pose(&img);
        assert_eq!(det.keypoint(4).confidence, 0.0);
        assert_eq!(det.visible_count(), NUM_KEYPOINTS - 1);
    }

    #[test]
    fn inpaint_respects_mask() {
        let init = ImageBuffer::from_fn_rgb(64, 64, |x, y| [x as f64 / 64.0, y as f64 / 64.0, 0.5]);
        let empty = GenerationRequest {
            init_image: Some(init.clone()),
            mask: Some(MaskMap::empty(64, 64)),
            ..req(0)
        };
        assert_eq!(mock_render(&empty).unwrap(), init);
        let half = GenerationRequest {
            mask: Some(MaskMap::from_fn(64, 64, |x, _| x >= 32)),
            ..empty
        };
        let out = mock_render(&half).unwrap();
        let scene = mock_render(&req(0)).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let want = if x >= 32 { scene.pixel(x, y) } else { init.pixel(x, y) };
                assert_eq!(out.pixel(x, y), want);
            }
        }
    }

    #[test]
    fn segmentation_matches_pixel_diff() {
        let r = req(5);
        let img = mock_render(&r).unwrap();
        let bg = ImageBuffer::filled(64, 64, &prompt_color(&r.prompt)).unwrap().quantized();
        assert!(mock_segment(&bg, Some(&bg)).unwrap().is_empty());
        let diff = MaskMap::from_fn(64, 64, |x, y| img.pixel(x, y) != bg.pixel(x, y));
        let m = mock_segment(&img, Some(&bg)).unwrap();
        assert_eq!(m, erode(&dilate(&diff, 1), 1));
        for y in 0..64 {
            for x in 0..64 {
                if diff.is_set(x, y) {
                    assert!(m.is_set(x, y));
                }
            }
        }
        assert_eq!(mock_segment(&img, None).unwrap(), m);
        let small = ImageBuffer::filled(8, 8, &[0.0, 0.0, 0.0]).unwrap();
        assert!(mock_segment(&img, Some(&small)).is_err());
    }

    #[test]
    fn embeddings() {
        let img = mock_render(&req(0)).unwrap();
        let e = mock_embed_image(&img).unwrap();
        assert_eq!(e.dim(), EMBEDDING_DIM);
        assert_eq!(cosine_similarity(&e, &mock_embed_image(&img).unwrap()).unwrap(), 100.0);
        let t = mock_embed_text("red hoodie");
        assert_eq!(t, mock_embed_text("red hoodie"));
        assert!((t.norm() - 1.0).abs() < 1e-12);
        assert_ne!(t, mock_embed_text("blue hoodie"));
    }

    #[test]
    fn negative_image_anticorrelates_after_centering() {
        let img = ImageBuffer::from_fn_gray(64, 64, |x, y| 0.5 + 0.3 * ((x as f64 / 9.0).sin() * (y as f64 / 7.0).cos()));
        let neg = ImageBuffer::from_fn_gray(64, 64, |x, y| 1.0 - img.pixel(x, y)[0]);
        let center = |e: EmbeddingVector| {
            let m = e.values().iter().sum::<f64>() / e.dim() as f64;
            EmbeddingVector::new(e.values().iter().map(|v| v - m).collect()).unwrap()
        };
        let a = center(mock_embed_image(&img).unwrap());
        let b = center(mock_embed_image(&neg).unwrap());
        assert!((cosine_similarity(&a, &b).unwrap() + 100.0).abs() < 1e-9);
    }

    #[test]
    fn caption_is_stable() {
        let img = ImageBuffer::filled(8, 8, &[1.0, 0.0, 0.5]).unwrap();
        assert_eq!(mock_caption(&img), "a person in front of a #ff0080 background");
    }
}
