//! Binary morphology. Pixels outside the image read as background for
//! both erosion and dilation.
//!
//! With that convention opening is always anti-extensive and idempotent.
//! Closing is extensive only for masks that keep a background margin of the
//! element radius along the image border: erosion cannot see past the edge,
//! so border pixels never survive it.

use super::mask::{BinaryMask, StructuringElement};

/// `p` is set iff every active cell of `se` centred on `p` covers a set pixel.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offsets = se.offsets();
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        offsets.iter().all(|&(dx, dy)| mask.get_or_false(x as isize + dx, y as isize + dy))
    })
}

/// `p` is set iff some active cell of the reflected `se` centred on `p`
/// covers a set pixel.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offsets = se.offsets();
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        offsets.iter().any(|&(dx, dy)| mask.get_or_false(x as isize - dx, y as isize - dy))
    })
}

/// Erosion followed by dilation; removes specks smaller than `se`.
pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

/// Dilation followed by erosion; fills holes smaller than `se`.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// The refinement used on predicted masks: close, then open.
pub fn refine(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    open(&close(mask, se), se)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn se() -> StructuringElement {
        StructuringElement::default()
    }

    #[test]
    fn dilating_a_point_gives_the_element() {
        let mut m = BinaryMask::empty(5, 5);
        m.set(2, 2, true);
        let d = dilate(&m, &se());
        let want = BinaryMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y));
        assert_eq!(d, want);
    }

    #[test]
    fn empty_stays_empty() {
        let e = BinaryMask::empty(6, 4);
        assert_eq!(erode(&e, &se()), e);
        assert_eq!(dilate(&e, &se()), e);
    }

    #[test]
    fn opening_removes_isolated_pixel() {
        let mut m = BinaryMask::empty(7, 7);
        m.set(3, 3, true);
        assert!(open(&m, &se()).is_empty());
    }

    #[test]
    fn closing_fills_single_hole() {
        let mut m = BinaryMask::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        m.set(4, 4, false);
        let c = close(&m, &se());
        assert!(c.get(4, 4));
        assert_eq!(c.count(), 25);
    }

    #[test]
    fn erosion_treats_outside_as_background() {
        let full = BinaryMask::full(4, 4);
        let e = erode(&full, &se());
        assert_eq!(e.count(), 4);
        assert!(e.get(1, 1) && !e.get(0, 0));
    }

    #[test]
    fn asymmetric_element_reflects_for_dilation() {
        // element with only the right-hand neighbour active
        let mut cells = vec![false; 9];
        cells[5] = true;
        let se = StructuringElement::new(3, cells).unwrap();
        let mut m = BinaryMask::empty(5, 1);
        m.set(2, 0, true);
        // dilation shifts right, erosion looks right
        assert!(dilate(&m, &se).get(3, 0));
        assert!(erode(&m, &se).get(1, 0));
    }
}
