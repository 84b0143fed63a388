//! Binary rasterization of posed contours and box-filter downscaling.
//!
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`; a point belongs to the pixel
//! containing it. Edges are drawn with Bresenham's algorithm between the
//! pixels of their endpoints, then stamped with a square brush of side
//! `stroke_width`. There is no anti-aliasing: every pixel is 0 or 255.

use alloc::vec;
use alloc::vec::Vec;

use libm::floor;
use serde::{Deserialize, Serialize};

use crate::contour::Point2;
use crate::error::{bail, Result};

pub const WHITE: u8 = 255;
pub const BLACK: u8 = 0;

/// Grayscale image, row-major, 0 = stroke and 255 = background.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageGray {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageGray {
    pub fn white(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![WHITE; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width * height != pixels.len() {
            bail!(
                Argument,
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            );
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn count_black(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == BLACK).count()
    }

    fn set_black(&mut self, x: i64, y: i64) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = BLACK;
        }
    }
}

/// Pixel index of a coordinate.
#[inline]
pub fn pixel_of(v: f64) -> i64 {
    floor(v) as i64
}

/// Brush offsets `[lo, hi]` for a given stroke width.
#[inline]
pub fn brush_extent(stroke_width: usize) -> (i64, i64) {
    let w = stroke_width as i64;
    (-(w - 1) / 2, w / 2)
}

/// Renders closed polylines as binary outlines on a white `side` x `side`
/// canvas.
pub fn rasterize(polylines: &[Vec<Point2>], side: usize, stroke_width: usize) -> Result<ImageGray> {
    if side < 32 {
        bail!(Argument, "canvas side {side} below minimum 32");
    }
    if stroke_width < 1 {
        bail!(Argument, "stroke width must be >= 1");
    }
    let limit = side as f64;
    for (k, poly) in polylines.iter().enumerate() {
        for p in poly {
            if !(p.x >= 0.0 && p.x < limit && p.y >= 0.0 && p.y < limit) {
                bail!(Argument, "polyline {k} vertex ({}, {}) outside [0, {side})", p.x, p.y);
            }
        }
    }
    let mut img = ImageGray::white(side, side);
    let (blo, bhi) = brush_extent(stroke_width);
    for poly in polylines {
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            bresenham(
                (pixel_of(a.x), pixel_of(a.y)),
                (pixel_of(b.x), pixel_of(b.y)),
                |x, y| {
                    for dy in blo..=bhi {
                        for dx in blo..=bhi {
                            img.set_black(x + dx, y + dy);
                        }
                    }
                },
            );
        }
    }
    Ok(img)
}

fn bresenham((mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), mut plot: impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x0, y0);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Area-weighted box filter down to `side` x `side`, averages rounded half
/// up. Works for any target no larger than the source; integer arithmetic
/// keeps it exact.
pub fn downscale(img: &ImageGray, side: usize) -> Result<ImageGray> {
    if img.width != img.height {
        bail!(
            Argument,
            "downscale expects a square image, got {}x{}",
            img.width,
            img.height
        );
    }
    let src = img.width;
    if side == 0 || side > src {
        bail!(
            Argument,
            "cannot resize {src} px image to {side} px (upscaling unsupported)"
        );
    }
    if side == src {
        return Ok(img.clone());
    }
    // In units of 1/side source pixels: source pixel i spans [i*side, (i+1)*side),
    // destination pixel j spans [j*src, (j+1)*src).
    let spans: Vec<Vec<(usize, u64)>> = (0..side)
        .map(|j| {
            let (lo, hi) = (j * src, (j + 1) * src);
            (lo / side..hi.div_ceil(side))
                .filter_map(|i| {
                    let (a, b) = (i * side, (i + 1) * side);
                    let w = hi.min(b).saturating_sub(lo.max(a));
                    (w > 0).then_some((i, w as u64))
                })
                .collect()
        })
        .collect();
    let den = (src * src) as u64;
    let mut out = Vec::with_capacity(side * side);
    for ys in &spans {
        for xs in &spans {
            let mut acc: u64 = 0;
            for &(y, wy) in ys {
                let row = &img.pixels[y * src..(y + 1) * src];
                for &(x, wx) in xs {
                    acc += wy * wx * u64::from(row[x]);
                }
            }
            out.push(((2 * acc + den) / (2 * den)) as u8);
        }
    }
    ImageGray::from_pixels(side, side, out)
}
