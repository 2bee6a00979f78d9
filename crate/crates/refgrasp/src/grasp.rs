//! Planar grasp rectangles and the map representation used to exchange
//! grasp hypotheses with pixel-wise models.
//!
//! A grasp is a rotated rectangle: center in pixel coordinates, rotation of
//! the jaw-opening axis, opening width along that axis, jaw size across it.
//! Angles live in `[-pi/2, pi/2)`; a grasp and its 180-degree rotation are
//! the same physical grasp.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("map dimensions disagree: quality {0:?}, angle {1:?}, width {2:?}")]
    MapShapeMismatch((usize, usize), (usize, usize), (usize, usize)),
    #[error("failed to read map image {path}: {source}")]
    ImageRead {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to write map image {path}: {source}")]
    ImageWrite {
        path: String,
        source: image::ImageError,
    },
    #[error("map image {path} is not 16-bit grayscale")]
    BadMapFormat { path: String },
    #[error("grasp center ({cx}, {cy}) lies outside the {width}x{height} image")]
    CenterOutsideImage {
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    },
    #[error(transparent)]
    Mask(#[from] crate::mask::MaskError),
}

/// Folds any angle into the canonical grasp range `[-pi/2, pi/2)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(PI);
    if a >= FRAC_PI_2 {
        a -= PI;
    }
    a
}

/// Smallest rotation between two grasp orientations, in degrees, in
/// `[0, 90]`. Orientations that differ by pi are identical.
pub fn angle_difference_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRectangle {
    pub cx: f64,
    pub cy: f64,
    /// Rotation of the opening axis, canonical range `[-pi/2, pi/2)`.
    pub angle: f64,
    /// Jaw opening, measured along the rotated axis. Pixels.
    pub width: f64,
    /// Jaw extent across the opening axis. Pixels.
    pub height: f64,
}

impl GraspRectangle {
    pub fn new(cx: f64, cy: f64, angle: f64, width: f64, height: f64) -> Self {
        Self {
            cx,
            cy,
            angle: canonical_angle(angle),
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    fn axes(&self) -> ((f64, f64), (f64, f64)) {
        let (s, c) = self.angle.sin_cos();
        ((c, s), (-s, c))
    }

    /// True when the point falls inside the rectangle (boundary inclusive).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.axes();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let pu = dx * u.0 + dy * u.1;
        let pv = dx * v.0 + dy * v.1;
        pu.abs() <= self.width / 2.0 && pv.abs() <= self.height / 2.0
    }
}

/// Corner positions in a fixed order: the first edge (corner 0 to corner 1)
/// runs along the opening axis. Winding is positive under the shoelace rule.
pub fn rect_corners(r: &GraspRectangle) -> [(f64, f64); 4] {
    let (s, c) = r.angle.sin_cos();
    let (ux, uy) = (c * r.width / 2.0, s * r.width / 2.0);
    let (vx, vy) = (-s * r.height / 2.0, c * r.height / 2.0);
    [
        (r.cx - ux - vx, r.cy - uy - vy),
        (r.cx + ux - vx, r.cy + uy - vy),
        (r.cx + ux + vx, r.cy + uy + vy),
        (r.cx - ux + vx, r.cy - uy + vy),
    ]
}

/// Rebuilds a rectangle from four ordered corners, treating the first edge
/// as the opening axis. Inverse of [`rect_corners`] up to floating point.
pub fn rect_from_corners(corners: &[(f64, f64); 4]) -> GraspRectangle {
    let cx = corners.iter().map(|c| c.0).sum::<f64>() / 4.0;
    let cy = corners.iter().map(|c| c.1).sum::<f64>() / 4.0;
    let e1 = (corners[1].0 - corners[0].0, corners[1].1 - corners[0].1);
    let e2 = (corners[3].0 - corners[0].0, corners[3].1 - corners[0].1);
    let width = e1.0.hypot(e1.1);
    let height = e2.0.hypot(e2.1);
    GraspRectangle::new(cx, cy, e1.1.atan2(e1.0), width, height)
}

fn shoelace_signed(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    s / 2.0
}

/// Clips `subject` by a convex quad using Sutherland-Hodgman. Points exactly
/// on a clip edge count as inside, so a polygon clipped by itself survives
/// intact.
fn clip_polygon(subject: &[(f64, f64)], clip: &[(f64, f64); 4]) -> Vec<(f64, f64)> {
    let sign = if shoelace_signed(clip) >= 0.0 { 1.0 } else { -1.0 };
    let mut output: Vec<(f64, f64)> = subject.to_vec();
    for i in 0..4 {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % 4];
        let cross = |p: (f64, f64)| {
            sign * ((b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0))
        };
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let (cp, cq) = (cross(p), cross(q));
            if cp >= 0.0 {
                output.push(p);
                if cq < 0.0 {
                    output.push(edge_crossing(p, q, cp, cq));
                }
            } else if cq >= 0.0 {
                output.push(edge_crossing(p, q, cp, cq));
            }
        }
    }
    output
}

fn edge_crossing(p: (f64, f64), q: (f64, f64), cp: f64, cq: f64) -> (f64, f64) {
    let t = cp / (cp - cq);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

fn rect_sort_key(r: &GraspRectangle) -> [f64; 5] {
    [r.cx, r.cy, r.angle, r.width, r.height]
}

/// Exact intersection-over-union of two rotated rectangles, computed by
/// polygon clipping. Symmetric bit for bit: the operands are put in a
/// canonical order before clipping. Degenerate zero-area pairs score 0.
pub fn rect_iou(a: &GraspRectangle, b: &GraspRectangle) -> f64 {
    let (first, second) = {
        let (ka, kb) = (rect_sort_key(a), rect_sort_key(b));
        let le = ka
            .iter()
            .zip(kb.iter())
            .find_map(|(x, y)| match x.total_cmp(y) {
                std::cmp::Ordering::Equal => None,
                ord => Some(ord == std::cmp::Ordering::Less),
            })
            .unwrap_or(true);
        if le {
            (a, b)
        } else {
            (b, a)
        }
    };
    let inter = shoelace_signed(&clip_polygon(&rect_corners(first), &rect_corners(second))).abs();
    let union = first.area() + second.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Pixel-wise grasp representation: per-pixel quality in `[0, 1]`, opening
/// angle in `[-pi/2, pi/2)`, and opening width normalized by a fixed
/// maximum. All three arrays are indexed `(row, col)`. A segmentation mask
/// of the referred object may ride along.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    pub quality: Array2<f64>,
    pub angle: Array2<f64>,
    pub width: Array2<f64>,
    pub mask: Option<crate::mask::Mask>,
}

impl GraspMaps {
    pub fn zeros(height: u32, width: u32) -> Self {
        let shape = (height as usize, width as usize);
        Self {
            quality: Array2::zeros(shape),
            angle: Array2::zeros(shape),
            width: Array2::zeros(shape),
            mask: None,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.quality.dim()
    }

    pub fn check_shapes(&self) -> Result<(), GraspError> {
        if self.quality.dim() != self.angle.dim() || self.quality.dim() != self.width.dim() {
            return Err(GraspError::MapShapeMismatch(
                self.quality.dim(),
                self.angle.dim(),
                self.width.dim(),
            ));
        }
        if let Some(mask) = &self.mask {
            let mdim = (mask.height() as usize, mask.width() as usize);
            if mdim != self.quality.dim() {
                return Err(GraspError::MapShapeMismatch(
                    self.quality.dim(),
                    self.angle.dim(),
                    mdim,
                ));
            }
        }
        Ok(())
    }

    /// Writes the maps as 16-bit grayscale PNGs next to each other:
    /// `<stem>_quality.png`, `<stem>_angle.png`, `<stem>_width.png`, plus
    /// `<stem>_mask.png` (8-bit) when a mask is attached. Quality and width
    /// are stored over `[0, 1]`, angle over `[-pi/2, pi/2]`.
    pub fn save_png(&self, dir: &Path, stem: &str) -> Result<(), GraspError> {
        write_map_png(&dir.join(format!("{stem}_quality.png")), &self.quality, 0.0, 1.0)?;
        write_map_png(
            &dir.join(format!("{stem}_angle.png")),
            &self.angle,
            -FRAC_PI_2,
            FRAC_PI_2,
        )?;
        write_map_png(&dir.join(format!("{stem}_width.png")), &self.width, 0.0, 1.0)?;
        if let Some(mask) = &self.mask {
            mask.write_png(&dir.join(format!("{stem}_mask.png")))?;
        }
        Ok(())
    }

    /// Reads maps written by [`GraspMaps::save_png`]. Values come back
    /// within one quantization step (about 1.6e-5 of the coded range). The
    /// mask channel is restored when its file is present.
    pub fn load_png(dir: &Path, stem: &str) -> Result<Self, GraspError> {
        let mask_path = dir.join(format!("{stem}_mask.png"));
        let mask = if mask_path.exists() {
            Some(crate::mask::Mask::read_png(&mask_path)?)
        } else {
            None
        };
        let maps = Self {
            quality: read_map_png(&dir.join(format!("{stem}_quality.png")), 0.0, 1.0)?,
            angle: read_map_png(
                &dir.join(format!("{stem}_angle.png")),
                -FRAC_PI_2,
                FRAC_PI_2,
            )?,
            width: read_map_png(&dir.join(format!("{stem}_width.png")), 0.0, 1.0)?,
            mask,
        };
        maps.check_shapes()?;
        Ok(maps)
    }
}

fn write_map_png(path: &Path, map: &Array2<f64>, lo: f64, hi: f64) -> Result<(), GraspError> {
    let (h, w) = map.dim();
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for ((y, x), &v) in map.indexed_iter() {
        let coded = (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 65535.0).round() as u16;
        img.put_pixel(x as u32, y as u32, image::Luma([coded]));
    }
    img.save(path).map_err(|source| GraspError::ImageWrite {
        path: path.display().to_string(),
        source,
    })
}

fn read_map_png(path: &Path, lo: f64, hi: f64) -> Result<Array2<f64>, GraspError> {
    let dynamic = image::open(path).map_err(|source| GraspError::ImageRead {
        path: path.display().to_string(),
        source,
    })?;
    let img = match dynamic {
        image::DynamicImage::ImageLuma16(img) => img,
        _ => {
            return Err(GraspError::BadMapFormat {
                path: path.display().to_string(),
            })
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut map = Array2::zeros((h, w));
    for (x, y, pixel) in img.enumerate_pixels() {
        map[(y as usize, x as usize)] = lo + (pixel.0[0] as f64 / 65535.0) * (hi - lo);
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy)]
pub struct RenderConfig {
    /// Opening width that maps to 1.0 in the width channel.
    pub max_width: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { max_width: 150.0 }
    }
}

/// Rasterizes grasps into quality, angle, and width maps.
///
/// Each grasp paints the central third of its rectangle (full opening width,
/// one third of the jaw extent around the center line): quality 1, its
/// angle, and its normalized width. Grasps are painted in order, so later
/// ones overwrite overlapping earlier ones. The pixel nearest the grasp
/// center is always painted even when the rectangle is degenerately thin.
pub fn render_grasp_maps(
    grasps: &[GraspRectangle],
    height: u32,
    width: u32,
    cfg: &RenderConfig,
) -> Result<GraspMaps, GraspError> {
    let mut maps = GraspMaps::zeros(height, width);
    for g in grasps {
        if g.cx < 0.0 || g.cx >= width as f64 || g.cy < 0.0 || g.cy >= height as f64 {
            return Err(GraspError::CenterOutsideImage {
                cx: g.cx,
                cy: g.cy,
                width,
                height,
            });
        }
        let band = GraspRectangle {
            height: g.height / 3.0,
            ..*g
        };
        let norm_w = (g.width / cfg.max_width).clamp(0.0, 1.0);
        let corners = rect_corners(&band);
        let x0 = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let y0 = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let x1 = corners
            .iter()
            .map(|c| c.0)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min(width.saturating_sub(1) as f64) as usize;
        let y1 = corners
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min(height.saturating_sub(1) as f64) as usize;
        for y in y0..=y1.min(height as usize - 1) {
            for x in x0..=x1.min(width as usize - 1) {
                if band.contains(x as f64, y as f64) {
                    maps.quality[(y, x)] = 1.0;
                    maps.angle[(y, x)] = g.angle;
                    maps.width[(y, x)] = norm_w;
                }
            }
        }
        let px = (g.cx.round().max(0.0) as usize).min(width as usize - 1);
        let py = (g.cy.round().max(0.0) as usize).min(height as usize - 1);
        maps.quality[(py, px)] = 1.0;
        maps.angle[(py, px)] = g.angle;
        maps.width[(py, px)] = norm_w;
    }
    Ok(maps)
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeConfig {
    /// Quality strictly below or at this value never yields a grasp.
    pub quality_threshold: f64,
    /// Peaks closer than this (Euclidean pixels) to an accepted peak are
    /// suppressed.
    pub min_separation: f64,
    /// Decoded jaw extent as a fraction of the decoded opening width.
    pub height_ratio: f64,
    /// Must match the normalization used when the maps were produced.
    pub max_width: f64,
    /// Keep at most this many grasps after suppression; `None` keeps all.
    pub top_n: Option<usize>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            quality_threshold: 0.2,
            min_separation: 10.0,
            height_ratio: 0.5,
            max_width: 150.0,
            top_n: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedGrasp {
    pub rect: GraspRectangle,
    pub quality: f64,
}

/// Extracts grasps from maps: local quality maxima above the threshold,
/// greedy distance suppression, ordered by quality (ties broken row-major).
/// The global maximum always comes first. A plateau of equal values yields
/// its row-major first pixel.
pub fn decode_grasps(maps: &GraspMaps, cfg: &DecodeConfig) -> Result<Vec<DecodedGrasp>, GraspError> {
    maps.check_shapes()?;
    let (h, w) = maps.shape();
    let mut peaks: Vec<(usize, usize, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let q = maps.quality[(y, x)];
            if q <= cfg.quality_threshold {
                continue;
            }
            let mut is_peak = true;
            'scan: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if maps.quality[(ny as usize, nx as usize)] > q {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            // Plateau rule: only the first plateau pixel in row-major order
            // survives, namely the one with no equal neighbor before it.
            if is_peak {
                'plateau: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dy > 0 || (dy == 0 && dx >= 0) {
                            break 'plateau;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 {
                            continue;
                        }
                        if maps.quality[(ny as usize, nx as usize)] == q {
                            is_peak = false;
                            break 'plateau;
                        }
                    }
                }
            }
            if is_peak {
                peaks.push((y, x, q));
            }
        }
    }
    // Row-major collection plus a stable sort keeps ties in row-major order.
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for &(y, x, q) in &peaks {
        if let Some(cap) = cfg.top_n {
            if kept.len() >= cap {
                break;
            }
        }
        let far_enough = kept.iter().all(|&(ky, kx, _)| {
            let d = ((y as f64 - ky as f64).powi(2) + (x as f64 - kx as f64).powi(2)).sqrt();
            d >= cfg.min_separation
        });
        if far_enough {
            kept.push((y, x, q));
        }
    }
    Ok(kept
        .into_iter()
        .map(|(y, x, q)| {
            let opening = maps.width[(y, x)] * cfg.max_width;
            DecodedGrasp {
                rect: GraspRectangle::new(
                    x as f64,
                    y as f64,
                    maps.angle[(y, x)],
                    opening,
                    opening * cfg.height_ratio,
                ),
                quality: q,
            }
        })
        .collect())
}
