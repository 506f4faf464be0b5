use super::MediaError;
use sha2::{Digest, Sha256};

/// Row-major pixel grid with 1 or 3 channels and samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidBuffer(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(MediaError::InvalidBuffer(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(MediaError::InvalidBuffer(format!(
                "expected {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MediaError::InvalidBuffer(format!("sample {v} outside [0, 1]")));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    /// Every pixel set to `pixel`, whose length gives the channel count.
    pub fn filled(width: usize, height: usize, pixel: &[f64]) -> Result<Self, MediaError> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), data)
    }

    /// Single-channel image from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn_gray(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, 1, data).expect("from_fn_gray dimensions")
    }

    /// Three-channel image from a per-pixel function; values are clamped to `[0, 1]`.
    pub fn from_fn_rgb(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(width, height, 3, data).expect("from_fn_rgb dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(width, height, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Writes `value`, clamped to `[0, 1]`, into every channel of `(x, y)`.
    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[f64]) {
        let i = (y * self.width + x) * self.channels;
        for (dst, v) in self.data[i..i + self.channels].iter_mut().zip(value) {
            *dst = v.clamp(0.0, 1.0);
        }
    }

    /// Luma with BT.601 weights; identity for single-channel input.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// 2x2 box average; odd trailing rows and columns are dropped.
    pub fn downsample_half(&self) -> Result<ImageBuffer, MediaError> {
        if self.width < 2 || self.height < 2 {
            return Err(MediaError::Degenerate(format!(
                "cannot halve a {}x{} image",
                self.width, self.height
            )));
        }
        let (w, h, c) = (self.width / 2, self.height / 2, self.channels);
        let mut data = Vec::with_capacity(w * h * c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let at = |xx: usize, yy: usize| self.data[(yy * self.width + xx) * c + ch];
                    let s = (at(2 * x, 2 * y) + at(2 * x + 1, 2 * y))
                        + (at(2 * x, 2 * y + 1) + at(2 * x + 1, 2 * y + 1));
                    data.push((s * 0.25).clamp(0.0, 1.0));
                }
            }
        }
        Ok(ImageBuffer {
            width: w,
            height: h,
            channels: c,
            data,
        })
    }

    /// Sub-rectangle `[x0, x0+w) x [y0, y0+h)`; must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ImageBuffer, MediaError> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(MediaError::DimensionMismatch(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(w * h * c);
        for y in y0..y0 + h {
            let row = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[row..row + w * c]);
        }
        Ok(ImageBuffer {
            width: w,
            height: h,
            channels: c,
            data,
        })
    }

    /// Rounds every sample to the nearest multiple of 1/255.
    pub fn quantized(&self) -> ImageBuffer {
        ImageBuffer {
            data: self.data.iter().map(|v| quantize(*v)).collect(),
            ..self.clone()
        }
    }

    pub fn as_plane(&self) -> Result<Plane, MediaError> {
        if self.channels != 1 {
            return Err(MediaError::InvalidBuffer(format!(
                "expected a single-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(Plane::new(self.width, self.height, self.data.clone()))
    }

    /// SHA-256 over dimensions and the exact sample bits, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"img");
        for d in [self.width, self.height, self.channels] {
            h.update((d as u64).to_le_bytes());
        }
        for v in &self.data {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Unconstrained row-major scalar field (MSCN maps, local deviations, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Plane::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Plane {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "plane crop bounds");
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width + x0;
            data.extend_from_slice(&self.data[row..row + w]);
        }
        Plane::new(w, h, data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Per-pixel coverage in `[0, 1]`; binary masks use only 0 and 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl MaskMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidBuffer(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(MediaError::InvalidBuffer(format!(
                "expected {} mask values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MediaError::InvalidBuffer(format!("coverage {v} outside [0, 1]")));
        }
        Ok(MaskMap {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        MaskMap::new(width, height, vec![0.0; width * height]).expect("empty mask")
    }

    pub fn full(width: usize, height: usize) -> Self {
        MaskMap::new(width, height, vec![1.0; width * height]).expect("full mask")
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(if f(x, y) { 1.0 } else { 0.0 });
            }
        }
        MaskMap::new(width, height, data).expect("mask from_fn")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// True where coverage is nonzero.
    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > 0.0
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    /// Coverage thresholded at zero.
    pub fn binarized(&self) -> MaskMap {
        MaskMap {
            data: self.data.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect(),
            ..self.clone()
        }
    }

    /// `1 - coverage`.
    pub fn inverted(&self) -> MaskMap {
        MaskMap {
            data: self.data.iter().map(|v| 1.0 - v).collect(),
            ..self.clone()
        }
    }

    /// Pointwise maximum; both masks must share dimensions.
    pub fn union(&self, other: &MaskMap) -> Result<MaskMap, MediaError> {
        if self.dims() != other.dims() {
            return Err(MediaError::DimensionMismatch(format!(
                "mask union {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(MaskMap {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.max(*b)).collect(),
            ..self.clone()
        })
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of nonzero coverage.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_set(x, y) {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bb
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> MaskMap {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "mask crop bounds");
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width + x0;
            data.extend_from_slice(&self.data[row..row + w]);
        }
        MaskMap {
            width: w,
            height: h,
            data,
        }
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"mask");
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        for v in &self.data {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// The mask as a single-channel image.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.clone(),
        }
    }
}
