//! Binary segmentation masks: pixel access, IoU, run-length encoding,
//! morphology, and lossless PNG round trips.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask dimensions {0}x{1} and {2}x{3} do not match")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("run-length data sums to {got} pixels, expected {expected}")]
    BadRunLength { got: u64, expected: u64 },
    #[error("failed to read mask image {path}: {source}")]
    ImageRead {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to write mask image {path}: {source}")]
    ImageWrite {
        path: String,
        source: image::ImageError,
    },
}

/// A dense binary bitmap with image-style (x right, y down) coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

/// Serialized form: row-major run-length counts, alternating background and
/// foreground runs, starting with a (possibly zero) background run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub size: (u32, u32), // (height, width)
    pub counts: Vec<u32>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; (width as usize) * (height as usize)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[(y as usize) * (self.width as usize) + x as usize] = value;
    }

    pub fn area(&self) -> u64 {
        self.data.iter().filter(|&&v| v).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Tight axis-aligned bounding box (x, y, w, h), or `None` for an empty
    /// mask.
    pub fn tight_bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let (mut x0, mut y0) = (u32::MAX, u32::MAX);
        let (mut x1, mut y1) = (0u32, 0u32);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        any.then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// Foreground centroid in pixel coordinates, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut n = 0u64;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<u64, MaskError> {
        self.check_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count() as u64)
    }

    /// Intersection over union. Two empty masks have IoU 1; one empty mask
    /// against a nonempty one has IoU 0.
    pub fn iou(&self, other: &Mask) -> Result<f64, MaskError> {
        self.check_dims(other)?;
        let mut inter = 0u64;
        let mut union = 0u64;
        for (&a, &b) in self.data.iter().zip(&other.data) {
            if a && b {
                inter += 1;
            }
            if a || b {
                union += 1;
            }
        }
        if union == 0 {
            return Ok(1.0);
        }
        Ok(inter as f64 / union as f64)
    }

    fn check_dims(&self, other: &Mask) -> Result<(), MaskError> {
        if self.width != other.width || self.height != other.height {
            return Err(MaskError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Chebyshev (square structuring element) erosion by `radius` pixels.
    /// Pixels within `radius` of the image border are treated as adjacent to
    /// background, so foreground touching the border erodes there too.
    pub fn erode(&self, radius: u32) -> Mask {
        self.min_max_filter(radius, true)
    }

    /// Chebyshev dilation by `radius` pixels.
    pub fn dilate(&self, radius: u32) -> Mask {
        self.min_max_filter(radius, false)
    }

    fn min_max_filter(&self, radius: u32, erode: bool) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        // Separable: horizontal pass then vertical pass.
        let mut horiz = vec![false; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = erode;
                for dx in -r..=r {
                    let xx = x + dx;
                    let v = if xx < 0 || xx >= w {
                        false
                    } else {
                        self.get(xx as u32, y as u32)
                    };
                    if erode {
                        acc &= v;
                    } else {
                        acc |= v;
                    }
                }
                horiz[(y * w + x) as usize] = acc;
            }
        }
        let mut out = Mask::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let mut acc = erode;
                for dy in -r..=r {
                    let yy = y + dy;
                    let v = if yy < 0 || yy >= h {
                        false
                    } else {
                        horiz[(yy * w + x) as usize]
                    };
                    if erode {
                        acc &= v;
                    } else {
                        acc |= v;
                    }
                }
                out.set(x as u32, y as u32, acc);
            }
        }
        out
    }

    pub fn to_rle(&self) -> RleMask {
        let mut counts = Vec::new();
        let mut current = false; // runs start with background
        let mut run = 0u32;
        for &v in &self.data {
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
        counts.push(run);
        RleMask {
            size: (self.height, self.width),
            counts,
        }
    }

    pub fn from_rle(rle: &RleMask) -> Result<Mask, MaskError> {
        let (height, width) = rle.size;
        let expected = (width as u64) * (height as u64);
        let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
        if total != expected {
            return Err(MaskError::BadRunLength {
                got: total,
                expected,
            });
        }
        let mut mask = Mask::new(width, height);
        let mut idx = 0usize;
        let mut value = false;
        for &count in &rle.counts {
            for _ in 0..count {
                mask.data[idx] = value;
                idx += 1;
            }
            value = !value;
        }
        Ok(mask)
    }

    /// Writes the mask as an 8-bit grayscale PNG (foreground 255).
    pub fn write_png(&self, path: &Path) -> Result<(), MaskError> {
        let img = image::GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255u8 } else { 0u8 }])
        });
        img.save(path).map_err(|source| MaskError::ImageWrite {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a grayscale PNG written by [`Mask::write_png`]; any pixel above
    /// 127 counts as foreground.
    pub fn read_png(path: &Path) -> Result<Mask, MaskError> {
        let img = image::open(path)
            .map_err(|source| MaskError::ImageRead {
                path: path.display().to_string(),
                source,
            })?
            .into_luma8();
        let mut mask = Mask::new(img.width(), img.height());
        for (x, y, pixel) in img.enumerate_pixels() {
            mask.set(x, y, pixel.0[0] > 127);
        }
        Ok(mask)
    }

    /// Fills an axis-aligned rectangle, clipped to the image.
    pub fn fill_rect(&mut self, x: u32, y: u32, w: u32, h: u32) {
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                self.set(xx, yy, true);
            }
        }
    }

    /// Fills an axis-aligned ellipse given by its bounding box, clipped to
    /// the image.
    pub fn fill_ellipse(&mut self, x: u32, y: u32, w: u32, h: u32) {
        let cx = x as f64 + (w as f64 - 1.0) / 2.0;
        let cy = y as f64 + (h as f64 - 1.0) / 2.0;
        let rx = (w as f64) / 2.0;
        let ry = (h as f64) / 2.0;
        for yy in y..(y + h).min(self.height) {
            for xx in x..(x + w).min(self.width) {
                let dx = (xx as f64 - cx) / rx;
                let dy = (yy as f64 - cy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    self.set(xx, yy, true);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn checker(w: u32, h: u32) -> Mask {
        let mut m = Mask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                m.set(x, y, (x + y) % 2 == 0);
            }
        }
        m
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let mut a = Mask::new(8, 8);
        a.fill_rect(0, 0, 4, 4);
        let mut b = Mask::new(8, 8);
        b.fill_rect(4, 4, 4, 4);
        assert_eq!(a.iou(&a).unwrap(), 1.0);
        assert_eq!(a.iou(&b).unwrap(), 0.0);
    }

    #[test]
    fn iou_both_empty_is_one() {
        let a = Mask::new(4, 4);
        assert_eq!(a.iou(&a).unwrap(), 1.0);
    }

    #[test]
    fn iou_dimension_mismatch_errors() {
        let a = Mask::new(4, 4);
        let b = Mask::new(5, 4);
        assert!(matches!(a.iou(&b), Err(MaskError::DimensionMismatch(..))));
    }

    #[test]
    fn tight_bbox_matches_fill() {
        let mut m = Mask::new(16, 12);
        m.fill_rect(3, 2, 5, 7);
        assert_eq!(m.tight_bbox(), Some((3, 2, 5, 7)));
        assert_eq!(Mask::new(4, 4).tight_bbox(), None);
    }

    #[test]
    fn erosion_matches_brute_force() {
        let m = {
            let mut m = Mask::new(20, 16);
            m.fill_rect(4, 3, 9, 8);
            m.fill_ellipse(12, 9, 7, 6);
            m
        };
        for radius in [1u32, 2, 3] {
            let fast = m.erode(radius);
            let r = radius as i64;
            for y in 0..16i64 {
                for x in 0..20i64 {
                    let mut all = true;
                    'outer: for dy in -r..=r {
                        for dx in -r..=r {
                            let (xx, yy) = (x + dx, y + dy);
                            if xx < 0 || yy < 0 || xx >= 20 || yy >= 16 {
                                all = false;
                                break 'outer;
                            }
                            if !m.get(xx as u32, yy as u32) {
                                all = false;
                                break 'outer;
                            }
                        }
                    }
                    assert_eq!(fast.get(x as u32, y as u32), all, "at ({x},{y}) r={radius}");
                }
            }
        }
    }

    #[test]
    fn erode_rect_shrinks_exactly() {
        let mut m = Mask::new(32, 32);
        m.fill_rect(8, 8, 10, 12);
        let e = m.erode(2);
        assert_eq!(e.tight_bbox(), Some((10, 10, 6, 8)));
        assert_eq!(e.area(), 6 * 8);
    }

    #[test]
    fn rle_known_pattern() {
        let mut m = Mask::new(4, 2);
        m.set(1, 0, true);
        m.set(2, 0, true);
        let rle = m.to_rle();
        assert_eq!(rle.counts, vec![1, 2, 5]);
        assert_eq!(Mask::from_rle(&rle).unwrap(), m);
    }

    #[test]
    fn rle_rejects_bad_totals() {
        let rle = RleMask {
            size: (2, 2),
            counts: vec![3],
        };
        assert!(matches!(
            Mask::from_rle(&rle),
            Err(MaskError::BadRunLength { .. })
        ));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let m = checker(13, 9);
        m.write_png(&path).unwrap();
        assert_eq!(Mask::read_png(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn rle_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..200)) {
            let w = 10u32;
            let h = bits.len().div_ceil(10) as u32;
            let mut m = Mask::new(w, h);
            for (i, &b) in bits.iter().enumerate() {
                m.set((i % 10) as u32, (i / 10) as u32, b);
            }
            let back = Mask::from_rle(&m.to_rle()).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn dilate_then_contains_original(seed in 0u64..500) {
            let mut m = Mask::new(12, 12);
            let x = (seed % 6) as u32 + 1;
            let y = (seed / 7 % 6) as u32 + 1;
            m.fill_rect(x, y, 3, 4);
            let d = m.dilate(1);
            for yy in 0..12 {
                for xx in 0..12 {
                    if m.get(xx, yy) {
                        prop_assert!(d.get(xx, yy));
                    }
                }
            }
        }
    }
}
