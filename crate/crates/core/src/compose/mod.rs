//! Background alignment: mask morphology, feathering, compositing, and
//! deterministic harmonic inpainting.

mod distance;
mod inpaint;
mod morphology;

pub use distance::{feather, squared_distance_to, DEFAULT_FEATHER_WIDTH};
pub use inpaint::{
    extract_background, harmonic_inpaint, BackgroundFill, DILATION_MARGIN, SOR_MAX_SWEEPS,
    SOR_OMEGA, SOR_TOLERANCE,
};
pub use morphology::{dilate, erode};

use crate::backends::BackendError;
use crate::media::{ImageBuffer, MaskMap};

#[derive(Debug, thiserror::Error)]
pub enum ComposeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mask covers the whole image; no boundary to fill from")]
    NoBoundary,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Foreground over background through a feathered mask.
#[derive(Clone, Debug)]
pub struct CompositeSpec {
    pub background: ImageBuffer,
    pub foreground: ImageBuffer,
    pub mask: MaskMap,
    pub feather_width: usize,
}

/// `α·fg + (1−α)·bg` with `α = feather(mask, feather_width)`.
pub fn composite(spec: &CompositeSpec) -> Result<ImageBuffer, ComposeError> {
    let (bg, fg) = (&spec.background, &spec.foreground);
    if bg.dims() != fg.dims() || spec.mask.dims() != (bg.width(), bg.height()) {
        return Err(ComposeError::DimensionMismatch(format!(
            "background {:?}, foreground {:?}, mask {:?}",
            bg.dims(),
            fg.dims(),
            spec.mask.dims()
        )));
    }
    let alpha = feather(&spec.mask, spec.feather_width);
    Ok(blend(bg, fg, &alpha))
}

/// Per-pixel convex blend with an explicit alpha map.
pub(crate) fn blend(bg: &ImageBuffer, fg: &ImageBuffer, alpha: &MaskMap) -> ImageBuffer {
    let c = bg.channels();
    let data = bg
        .data()
        .iter()
        .zip(fg.data())
        .enumerate()
        .map(|(i, (&b, &f))| {
            let a = alpha.data()[i / c];
            if a == 0.0 {
                b
            } else if a == 1.0 {
                f
            } else {
                (a * f + (1.0 - a) * b).clamp(b.min(f), b.max(f))
            }
        })
        .collect();
    ImageBuffer::new(bg.width(), bg.height(), c, data).expect("blend of valid buffers")
}
