//! Light compensation, chroma-interval skin detection and the two noise
//! passes applied to the raw skin mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{connected_components, BinaryMask, ColorSpace, Connectivity, Image};

/// A size threshold either in pixels or as a fraction of the image area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSize {
    Pixels(usize),
    AreaFraction(f64),
}

impl RegionSize {
    pub fn resolve(self, area: usize) -> usize {
        match self {
            RegionSize::Pixels(n) => n,
            RegionSize::AreaFraction(f) => (f * area as f64).round() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkinParams {
    pub cb_lo: u8,
    pub cb_hi: u8,
    pub cr_lo: u8,
    pub cr_hi: u8,
    /// Foreground components smaller than this are dropped.
    pub min_region_size: RegionSize,
    /// Enclosed background components smaller than this are filled.
    pub max_hole_size: RegionSize,
    pub apply_gray_world: bool,
}

impl Default for SkinParams {
    fn default() -> Self {
        Self {
            cb_lo: 77,
            cb_hi: 127,
            cr_lo: 133,
            cr_hi: 173,
            min_region_size: RegionSize::AreaFraction(0.005),
            max_hole_size: RegionSize::AreaFraction(0.001),
            apply_gray_world: true,
        }
    }
}

impl SkinParams {
    pub fn validate(&self) -> Result<()> {
        if self.cb_lo > self.cb_hi || self.cr_lo > self.cr_hi {
            return Err(Error::Argument("skin intervals must satisfy lo <= hi".into()));
        }
        for size in [self.min_region_size, self.max_hole_size] {
            if let RegionSize::AreaFraction(f) = size {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::Argument(format!("area fraction {f} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn is_skin(&self, cb: u8, cr: u8) -> bool {
        (self.cb_lo..=self.cb_hi).contains(&cb) && (self.cr_lo..=self.cr_hi).contains(&cr)
    }
}

/// Gray-world compensation: each channel is scaled by
/// `(1 / mean_c) / max(1 / mean_R, 1 / mean_G, 1 / mean_B)`, which brings every
/// channel mean down to the smallest one.
pub fn gray_world(img: &Image) -> Result<Image> {
    if img.colorspace() != ColorSpace::Rgb {
        return Err(Error::Precondition("gray world expects an RGB image".into()));
    }
    let mut sums = [0u64; 3];
    for p in img.data().chunks_exact(3) {
        for c in 0..3 {
            sums[c] += p[c] as u64;
        }
    }
    if sums.contains(&0) {
        return Err(Error::Degenerate("a color channel has zero mean".into()));
    }
    let n = (img.width() * img.height()) as f64;
    let inv: Vec<f64> = sums.iter().map(|&s| n / s as f64).collect();
    let max_inv = inv.iter().copied().fold(f64::MIN, f64::max);
    let scale: Vec<f64> = inv.iter().map(|v| v / max_inv).collect();
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|p| (0..3).map(|c| (p[c] as f64 * scale[c]).round().clamp(0.0, 255.0) as u8).collect::<Vec<_>>())
        .collect();
    Image::new(img.width(), img.height(), ColorSpace::Rgb, data)
}

/// Luma is ignored; a pixel is skin iff both chroma components fall inside
/// their inclusive intervals.
pub fn skin_mask(img: &Image, p: &SkinParams) -> Result<BinaryMask> {
    if img.colorspace() != ColorSpace::YCbCr {
        return Err(Error::Precondition("skin detection expects a YCbCr image".into()));
    }
    let bits = img.data().chunks_exact(3).map(|px| p.is_skin(px[1], px[2])).collect();
    BinaryMask::from_bits(img.width(), img.height(), bits)
}

/// Type-1 noise: drop small foreground components. Type-2 noise: fill small
/// background holes. The background region touching the frame is never filled.
pub fn filter_noise(mask: &BinaryMask, p: &SkinParams) -> BinaryMask {
    let area = mask.width() * mask.height();
    let min_region = p.min_region_size.resolve(area);
    let max_hole = p.max_hole_size.resolve(area);

    let fg = connected_components(mask, Connectivity::Eight);
    let pruned = fg.select(|id| fg.size(id) >= min_region);

    // 4-connected background is the dual of 8-connected foreground.
    let bg = connected_components(&pruned.complement(), Connectivity::Four);
    let holes = bg.select(|id| bg.size(id) < max_hole && !bg.touches_border(id));
    let bits = pruned.bits().iter().zip(holes.bits()).map(|(&a, &b)| a || b).collect();
    BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("same dimensions")
}
