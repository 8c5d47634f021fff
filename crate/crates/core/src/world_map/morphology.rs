use super::mask::BinaryMask;

/// Binary erosion with a square structuring element of side `2 * radius + 1`.
///
/// The element is clipped at the image border: pixels outside the raster do
/// not clear their neighbours. Erosion of a free-space mask therefore grows
/// obstacles inward without turning the whole map frame into an obstacle.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    // square element is separable: horizontal pass then vertical pass
    let mut horiz = BinaryMask::new(w, h);
    for row in 0..h {
        let mut prefix = vec![0usize; w + 1];
        for col in 0..w {
            prefix[col + 1] = prefix[col] + usize::from(!mask.get(col, row));
        }
        for col in 0..w {
            let lo = col.saturating_sub(radius);
            let hi = (col + radius).min(w - 1);
            horiz.set(col, row, prefix[hi + 1] - prefix[lo] == 0);
        }
    }
    let mut out = BinaryMask::new(w, h);
    for col in 0..w {
        let mut prefix = vec![0usize; h + 1];
        for row in 0..h {
            prefix[row + 1] = prefix[row] + usize::from(!horiz.get(col, row));
        }
        for row in 0..h {
            let lo = row.saturating_sub(radius);
            let hi = (row + radius).min(h - 1);
            out.set(col, row, prefix[hi + 1] - prefix[lo] == 0);
        }
    }
    out
}

/// Dual of [`erode`]: grows set regions by the same square element.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    erode(&mask.invert(), radius).invert()
}
