use super::{dilate, ComposeError};
use crate::backends::{GenerationRequest, Inpainter};
use crate::media::{ImageBuffer, MaskMap};
use std::collections::VecDeque;

pub const SOR_OMEGA: f64 = 1.9;
pub const SOR_TOLERANCE: f64 = 1e-6;
pub const SOR_MAX_SWEEPS: usize = 10_000;
/// Safety margin added around the human mask before removing the human.
pub const DILATION_MARGIN: usize = 2;

fn check_mask(img: &ImageBuffer, mask: &MaskMap) -> Result<(), ComposeError> {
    if mask.dims() != (img.width(), img.height()) {
        return Err(ComposeError::DimensionMismatch(format!(
            "mask {:?} vs image {}x{}",
            mask.dims(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Replaces masked pixels with the discrete harmonic interpolant of the
/// unmasked ones (4-neighbor Laplace, Dirichlet data from unmasked pixels,
/// zero-flux at the image border), solved by SOR.
pub fn harmonic_inpaint(img: &ImageBuffer, mask: &MaskMap) -> Result<ImageBuffer, ComposeError> {
    check_mask(img, mask)?;
    let (w, h, c) = img.dims();
    let unknown: Vec<bool> = mask.data().iter().map(|v| *v > 0.0).collect();
    if unknown.iter().all(|u| *u) {
        return Err(ComposeError::NoBoundary);
    }
    let holes: Vec<usize> = (0..w * h).filter(|&i| unknown[i]).collect();
    if holes.is_empty() {
        return Ok(img.clone());
    }
    let seed = nearest_known(w, h, &unknown);
    let neighbors = |i: usize| {
        let (x, y) = (i % w, i / w);
        let mut n = [usize::MAX; 4];
        if x > 0 {
            n[0] = i - 1;
        }
        if x + 1 < w {
            n[1] = i + 1;
        }
        if y > 0 {
            n[2] = i - w;
        }
        if y + 1 < h {
            n[3] = i + w;
        }
        n
    };
    let stencils: Vec<[usize; 4]> = holes.iter().map(|&i| neighbors(i)).collect();

    let mut out = img.data().to_vec();
    for ch in 0..c {
        let mut u: Vec<f64> = (0..w * h).map(|i| img.data()[i * c + ch]).collect();
        for &i in &holes {
            u[i] = u[seed[i]];
        }
        let mut sweeps = 0;
        loop {
            let mut max_update: f64 = 0.0;
            for (&i, nb) in holes.iter().zip(&stencils) {
                let (mut acc, mut k) = (0.0, 0.0);
                for &j in nb.iter().filter(|j| **j != usize::MAX) {
                    acc += u[j] - u[i];
                    k += 1.0;
                }
                let step = SOR_OMEGA * acc / k;
                u[i] += step;
                max_update = max_update.max(step.abs());
            }
            sweeps += 1;
            if max_update < SOR_TOLERANCE || sweeps >= SOR_MAX_SWEEPS {
                log::debug!("harmonic fill channel {ch}: {sweeps} sweeps, last update {max_update:e}");
                break;
            }
        }
        for &i in &holes {
            out[i * c + ch] = u[i].clamp(0.0, 1.0);
        }
    }
    Ok(ImageBuffer::new(w, h, c, out).expect("harmonic fill stays in range"))
}

/// Index of a nearest known pixel (4-connected BFS) for every pixel, used as
/// the initial guess. Constants are therefore reproduced exactly.
fn nearest_known(w: usize, h: usize, unknown: &[bool]) -> Vec<usize> {
    let mut src = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if !unknown[i] {
            src[i] = i;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let mut visit = |j: usize| {
            if src[j] == usize::MAX {
                src[j] = src[i];
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
    src
}

/// How the human area is filled when extracting a background plate.
pub enum BackgroundFill<'a> {
    Harmonic,
    /// One call to a generative inpainter; `request` supplies the prompt and
    /// sampling settings, its image and mask fields are overwritten.
    Backend {
        inpainter: &'a dyn Inpainter,
        request: Box<GenerationRequest>,
    },
}

/// Removes the human covered by `human_mask`: the mask is dilated by
/// [`DILATION_MARGIN`] and the covered pixels are refilled. Pixels outside the
/// dilated mask are returned unchanged.
pub fn extract_background(
    human_image: &ImageBuffer,
    human_mask: &MaskMap,
    fill: BackgroundFill<'_>,
) -> Result<ImageBuffer, ComposeError> {
    check_mask(human_image, human_mask)?;
    let grown = dilate(human_mask, DILATION_MARGIN);
    if grown.is_empty() {
        return Ok(human_image.clone());
    }
    if grown.count_set() == grown.data().len() {
        return Err(ComposeError::NoBoundary);
    }
    match fill {
        BackgroundFill::Harmonic => harmonic_inpaint(human_image, &grown),
        BackgroundFill::Backend { inpainter, request } => {
            let req = GenerationRequest {
                init_image: Some(human_image.clone()),
                mask: Some(grown.clone()),
                pose: None,
                prev_frame: None,
                width: human_image.width(),
                height: human_image.height(),
                ..*request
            };
            let filled = inpainter.inpaint(&req)?;
            if filled.dims() != human_image.dims() {
                return Err(ComposeError::DimensionMismatch(format!(
                    "inpainter returned {:?} for {:?}",
                    filled.dims(),
                    human_image.dims()
                )));
            }
            Ok(super::blend(human_image, &filled, &grown))
        }
    }
}
