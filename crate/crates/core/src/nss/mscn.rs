use super::NssError;
use crate::media::{ImageBuffer, Plane};

pub const WINDOW: usize = 7;
const HALF: isize = (WINDOW / 2) as isize;
const WINDOW_SIGMA: f64 = 7.0 / 6.0;

/// Stabilizing constant in the `[0, 1]` intensity domain (1 in 8-bit units).
pub const MSCN_C: f64 = 1.0 / 255.0;

/// The 7x7 Gaussian window with sigma 7/6, normalized to unit sum.
pub fn gaussian_window() -> [[f64; WINDOW]; WINDOW] {
    let mut w = [[0.0; WINDOW]; WINDOW];
    let mut sum = 0.0;
    for (dy, row) in w.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (x, y) = (dx as f64 - HALF as f64, dy as f64 - HALF as f64);
            *v = (-(x * x + y * y) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
            sum += *v;
        }
    }
    for v in w.iter_mut().flatten() {
        *v /= sum;
    }
    w
}

/// Symmetric (edge-repeating) reflection of an out-of-range index.
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// MSCN coefficients together with the local deviation map they were
/// normalized by.
#[derive(Clone, Debug)]
pub struct MscnMap {
    pub coefficients: Plane,
    pub local_sigma: Plane,
}

pub fn mscn(gray: &ImageBuffer) -> Result<Plane, NssError> {
    Ok(mscn_with_sigma(gray)?.coefficients)
}

/// Local mean and deviation come from the Gaussian window with mirror padding.
///
/// Moments are accumulated relative to the center sample, which keeps constant
/// regions at exactly zero and avoids the cancellation in `E[x^2] - E[x]^2`.
pub fn mscn_with_sigma(gray: &ImageBuffer) -> Result<MscnMap, NssError> {
    let plane = gray.as_plane()?;
    let (w, h) = (plane.width(), plane.height());
    if w < WINDOW || h < WINDOW {
        return Err(NssError::Degenerate(format!(
            "MSCN needs at least {WINDOW}x{WINDOW}, got {w}x{h}"
        )));
    }
    let win = gaussian_window();
    let mut coeffs = Vec::with_capacity(w * h);
    let mut sigmas = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let center = plane.get(x, y);
            let (mut d1, mut d2) = (0.0, 0.0);
            for (dy, row) in win.iter().enumerate() {
                let yy = mirror(y as isize + dy as isize - HALF, h);
                for (dx, wt) in row.iter().enumerate() {
                    let xx = mirror(x as isize + dx as isize - HALF, w);
                    let d = plane.get(xx, yy) - center;
                    d1 += wt * d;
                    d2 += wt * d * d;
                }
            }
            let sigma = (d2 - d1 * d1).abs().sqrt();
            coeffs.push(-d1 / (sigma + MSCN_C));
            sigmas.push(sigma);
        }
    }
    Ok(MscnMap {
        coefficients: Plane::new(w, h, coeffs),
        local_sigma: Plane::new(w, h, sigmas),
    })
}

/// Horizontal, vertical, main-diagonal and anti-diagonal neighbor products.
///
/// `H(i,j) = m(i,j) m(i,j+1)`, `V = m(i,j) m(i+1,j)`, `D1 = m(i,j) m(i+1,j+1)`,
/// `D2 = m(i,j) m(i+1,j-1)` (row `i`, column `j`); outputs shrink by one
/// along each shifted axis.
pub fn pairwise_products(map: &Plane) -> Result<[Plane; 4], NssError> {
    let (w, h) = (map.width(), map.height());
    if w < 2 || h < 2 {
        return Err(NssError::Degenerate(format!(
            "pairwise products need at least 2x2, got {w}x{h}"
        )));
    }
    let build = |ow: usize, oh: usize, f: &dyn Fn(usize, usize) -> f64| {
        let mut data = Vec::with_capacity(ow * oh);
        for y in 0..oh {
            for x in 0..ow {
                data.push(f(x, y));
            }
        }
        Plane::new(ow, oh, data)
    };
    let m = |x: usize, y: usize| map.get(x, y);
    Ok([
        build(w - 1, h, &|x, y| m(x, y) * m(x + 1, y)),
        build(w, h - 1, &|x, y| m(x, y) * m(x, y + 1)),
        build(w - 1, h - 1, &|x, y| m(x, y) * m(x + 1, y + 1)),
        build(w - 1, h - 1, &|x, y| m(x + 1, y) * m(x, y + 1)),
    ])
}
