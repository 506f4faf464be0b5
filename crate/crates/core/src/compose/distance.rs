use crate::media::MaskMap;

pub const DEFAULT_FEATHER_WIDTH: usize = 3;

/// 1-D squared distance transform of a sampled function (lower envelope of
/// parabolas). `f` holds 0 at feature samples and infinity elsewhere.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        if f[v[0]].is_infinite() {
            // First finite sample replaces the placeholder.
            v[0] = q;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            // z[0] is -inf, so this never underflows k.
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if f[v[0]].is_infinite() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest pixel
/// where `is_feature` holds; infinity when there is none.
pub fn squared_distance_to(
    width: usize,
    height: usize,
    is_feature: impl Fn(usize, usize) -> bool,
) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..width * height)
        .map(|i| {
            if is_feature(i % width, i / width) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let n = width.max(height);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
    grid
}

/// Soft alpha from a binary mask: `clamp(d / width, 0, 1)` where `d` is the
/// Euclidean distance from a mask pixel to the nearest non-mask pixel and is
/// negative outside the mask. The image border is not a boundary. Width 0
/// returns the binarized mask.
pub fn feather(mask: &MaskMap, width: usize) -> MaskMap {
    let bin = mask.binarized();
    if width == 0 {
        return bin;
    }
    let (w, h) = bin.dims();
    let inside = squared_distance_to(w, h, |x, y| !bin.is_set(x, y));
    let wf = width as f64;
    let data = bin
        .data()
        .iter()
        .zip(&inside)
        .map(|(&m, &d2)| {
            if m == 0.0 {
                0.0
            } else {
                (d2.sqrt() / wf).min(1.0)
            }
        })
        .collect();
    MaskMap::new(w, h, data).expect("feather alpha in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(width: usize, height: usize, feat: &[bool]) -> Vec<f64> {
        (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                feat.iter()
                    .enumerate()
                    .filter(|(_, f)| **f)
                    .map(|(j, _)| {
                        let (fx, fy) = ((j % width) as f64, (j / width) as f64);
                        (x - fx).powi(2) + (y - fy).powi(2)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn edt_matches_brute_force(w in 1usize..14, h in 1usize..14, bits in proptest::collection::vec(proptest::bool::weighted(0.15), 196)) {
            let feat: Vec<bool> = bits[..w * h].to_vec();
            let got = squared_distance_to(w, h, |x, y| feat[y * w + x]);
            prop_assert_eq!(got, brute(w, h, &feat));
        }
    }

    #[test]
    fn width_zero_is_identity() {
        let m = MaskMap::from_fn(7, 7, |x, y| x > 2 && y < 4);
        assert_eq!(feather(&m, 0), m);
    }

    #[test]
    fn band_limits_and_values() {
        let m = MaskMap::from_fn(30, 30, |x, y| (5..25).contains(&x) && (5..25).contains(&y));
        let a = feather(&m, 3);
        assert_eq!(a.get(15, 15), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(2, 15), 0.0);
        let outside: Vec<bool> = m.data().iter().map(|v| *v == 0.0).collect();
        let d = brute(30, 30, &outside);
        for y in 0..30 {
            for x in 0..30 {
                if m.is_set(x, y) {
                    let expected = (d[y * 30 + x].sqrt() / 3.0).min(1.0);
                    assert!((a.get(x, y) - expected).abs() < 1e-15);
                }
            }
        }
        assert!((a.get(5, 15) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(6, 15) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn full_mask_stays_opaque() {
        assert_eq!(feather(&MaskMap::full(5, 4), 3), MaskMap::full(5, 4));
        assert!(feather(&MaskMap::empty(5, 4), 3).is_empty());
    }
}
