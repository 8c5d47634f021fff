//! Canny edge extraction: Gaussian blur, Sobel gradients, non-maximum
//! suppression and hysteresis thresholding.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use super::pgm::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CannyConfig {
    /// Standard deviation of the 5x5 Gaussian pre-filter, in pixels.
    pub sigma: f32,
    /// Weak-edge threshold on the normalized gradient magnitude (0..=255 scale).
    pub low: u8,
    /// Strong-edge threshold on the normalized gradient magnitude (0..=255 scale).
    pub high: u8,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 20,
            high: 60,
        }
    }
}

/// Canny with the default blur. Thresholds are swapped if given out of order.
pub fn extract_edges(img: &GrayImage, low: u8, high: u8) -> BinaryMask {
    extract_edges_with(
        img,
        &CannyConfig {
            low,
            high,
            ..CannyConfig::default()
        },
    )
}

pub fn extract_edges_with(img: &GrayImage, cfg: &CannyConfig) -> BinaryMask {
    let (low, high) = if cfg.low <= cfg.high {
        (cfg.low, cfg.high)
    } else {
        (cfg.high, cfg.low)
    };
    let w = img.width();
    let h = img.height();
    let blurred = gaussian_blur(img, cfg.sigma);
    let (mag, dir) = sobel(&blurred, w, h);
    let thin = non_max_suppression(&mag, &dir, w, h);
    hysteresis(&thin, w, h, f32::from(low), f32::from(high))
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn gaussian_kernel(sigma: f32) -> [f32; 5] {
    let mut k = [0.0f32; 5];
    if sigma <= 0.0 {
        k[2] = 1.0;
        return k;
    }
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f32 - 2.0;
        *v = (-(x * x) / (2.0 * sigma * sigma)).exp();
    }
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable 5x5 Gaussian with replicated borders.
fn gaussian_blur(img: &GrayImage, sigma: f32) -> Vec<f32> {
    let (w, h) = (img.width(), img.height());
    let k = gaussian_kernel(sigma);
    let mut tmp = vec![0.0f32; w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let c = clamp_idx(col as isize + t as isize - 2, w);
                acc += kv * f32::from(img.get(c, row));
            }
            tmp[row * w + col] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let r = clamp_idx(row as isize + t as isize - 2, h);
                acc += kv * tmp[r * w + col];
            }
            out[row * w + col] = acc;
        }
    }
    out
}

/// Gradient direction quantized to the four neighbour axes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Axis {
    Horizontal,
    Diagonal,
    Vertical,
    AntiDiagonal,
}

/// Returns the normalized magnitude (Sobel / 4, so an ideal step of height
/// `h` yields `h`) and the quantized gradient axis.
fn sobel(px: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<Axis>) {
    let at = |c: isize, r: isize| px[clamp_idx(r, h) * w + clamp_idx(c, w)];
    let mut mag = vec![0.0f32; w * h];
    let mut dir = vec![Axis::Horizontal; w * h];
    for row in 0..h as isize {
        for col in 0..w as isize {
            let gx = (at(col + 1, row - 1) + 2.0 * at(col + 1, row) + at(col + 1, row + 1))
                - (at(col - 1, row - 1) + 2.0 * at(col - 1, row) + at(col - 1, row + 1));
            let gy = (at(col - 1, row + 1) + 2.0 * at(col, row + 1) + at(col + 1, row + 1))
                - (at(col - 1, row - 1) + 2.0 * at(col, row - 1) + at(col + 1, row - 1));
            let i = row as usize * w + col as usize;
            let m = (gx * gx + gy * gy).sqrt() / 4.0;
            // sub-ulp residue from blurring a flat region is not an edge
            mag[i] = if m < 1e-3 { 0.0 } else { m };
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            dir[i] = if !(22.5..157.5).contains(&angle) {
                Axis::Horizontal
            } else if angle < 67.5 {
                Axis::Diagonal
            } else if angle < 112.5 {
                Axis::Vertical
            } else {
                Axis::AntiDiagonal
            };
        }
    }
    (mag, dir)
}

/// Keeps ridge pixels. On a two-pixel plateau only the pixel on the negative
/// side survives, so a symmetric step yields a single-pixel line.
fn non_max_suppression(mag: &[f32], dir: &[Axis], w: usize, h: usize) -> Vec<f32> {
    let at = |c: isize, r: isize| -> f32 {
        if c < 0 || r < 0 || c >= w as isize || r >= h as isize {
            0.0
        } else {
            mag[r as usize * w + c as usize]
        }
    };
    let mut out = vec![0.0f32; w * h];
    for row in 0..h as isize {
        for col in 0..w as isize {
            let i = row as usize * w + col as usize;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (dc, dr) = match dir[i] {
                Axis::Horizontal => (1, 0),
                Axis::Vertical => (0, 1),
                Axis::Diagonal => (1, 1),
                Axis::AntiDiagonal => (-1, 1),
            };
            let before = at(col - dc, row - dr);
            let after = at(col + dc, row + dr);
            if m > before && m >= after {
                out[i] = m;
            }
        }
    }
    out
}

fn hysteresis(thin: &[f32], w: usize, h: usize, low: f32, high: f32) -> BinaryMask {
    let mut mask = BinaryMask::new(w, h);
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m > 0.0 && m >= high {
            mask.set(i % w, i / w, true);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (c, r) = ((i % w) as isize, (i / w) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                    continue;
                }
                let (nc, nr) = (nc as usize, nr as usize);
                let j = nr * w + nc;
                if !mask.get(nc, nr) && thin[j] > 0.0 && thin[j] >= low {
                    mask.set(nc, nr, true);
                    queue.push_back(j);
                }
            }
        }
    }
    mask
}
