use crate::media::MaskMap;

fn disc_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

fn morph(mask: &MaskMap, radius: usize, dilating: bool) -> MaskMap {
    let bin = mask.binarized();
    if radius == 0 {
        return bin;
    }
    let (w, h) = bin.dims();
    let offsets = disc_offsets(radius);
    MaskMap::from_fn(w, h, |x, y| {
        let mut in_bounds = offsets.iter().filter_map(|&(dx, dy)| {
            let (xx, yy) = (x as isize + dx, y as isize + dy);
            (xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h)
                .then(|| bin.is_set(xx as usize, yy as usize))
        });
        if dilating {
            in_bounds.any(|s| s)
        } else {
            in_bounds.all(|s| s)
        }
    })
}

/// Binary dilation by a disc of `radius`; radius 0 only binarizes.
pub fn dilate(mask: &MaskMap, radius: usize) -> MaskMap {
    morph(mask, radius, true)
}

/// Binary erosion by a disc of `radius`. Pixels outside the image are ignored,
/// so a full mask stays full.
pub fn erode(mask: &MaskMap, radius: usize) -> MaskMap {
    morph(mask, radius, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_stays_empty() {
        assert!(dilate(&MaskMap::empty(6, 6), 3).is_empty());
    }

    #[test]
    fn radius_zero_is_identity() {
        let m = MaskMap::from_fn(5, 5, |x, y| x == y);
        assert_eq!(dilate(&m, 0), m);
        assert_eq!(erode(&m, 0), m);
    }

    #[test]
    fn unit_disc_is_plus() {
        let m = MaskMap::from_fn(5, 5, |x, y| x == 2 && y == 2);
        let d = dilate(&m, 1);
        let expected = MaskMap::from_fn(5, 5, |x, y| {
            (x as i32 - 2).abs() + (y as i32 - 2).abs() <= 1
        });
        assert_eq!(d, expected);
        assert_eq!(d.count_set(), 5);
    }

    /// Brute force over every set pixel.
    fn oracle_dilate(m: &MaskMap, r: usize) -> MaskMap {
        let (w, h) = m.dims();
        MaskMap::from_fn(w, h, |x, y| {
            (0..h).any(|yy| {
                (0..w).any(|xx| {
                    let (dx, dy) = (xx as i64 - x as i64, yy as i64 - y as i64);
                    m.is_set(xx, yy) && dx * dx + dy * dy <= (r * r) as i64
                })
            })
        })
    }

    proptest! {
        #[test]
        fn closing_contains_rectangle(x0 in 0usize..10, y0 in 0usize..10, w in 1usize..8, h in 1usize..8, r in 0usize..4) {
            let m = MaskMap::from_fn(20, 20, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h);
            let c = erode(&dilate(&m, r), r);
            for y in 0..20 {
                for x in 0..20 {
                    prop_assert!(!m.is_set(x, y) || c.is_set(x, y));
                }
            }
            prop_assert_eq!(dilate(&m, r), oracle_dilate(&m, r));
        }

        #[test]
        fn dilation_is_monotone(bits in proptest::collection::vec(any::<bool>(), 100), extra in proptest::collection::vec(any::<bool>(), 100), r in 0usize..3) {
            let m = MaskMap::from_fn(10, 10, |x, y| bits[y * 10 + x]);
            let bigger = MaskMap::from_fn(10, 10, |x, y| bits[y * 10 + x] || extra[y * 10 + x]);
            let (a, b) = (dilate(&m, r), dilate(&bigger, r));
            for y in 0..10 {
                for x in 0..10 {
                    prop_assert!(!a.is_set(x, y) || b.is_set(x, y));
                }
            }
        }
    }
}
