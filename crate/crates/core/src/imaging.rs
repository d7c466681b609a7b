//! Pixel-level primitives shared by every stage.
//!
//! Coordinates are `(x, y)` with `x` the column and `y` the row, `y` growing
//! downward. All operations return fresh rasters and leave their inputs alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        }
    }
}

/// Row-major 8-bit raster with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    colorspace: ColorSpace,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, colorspace: ColorSpace, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!("image dimensions must be positive, got {width}x{height}")));
        }
        let expected = width * height * colorspace.channels();
        if data.len() != expected {
            return Err(Error::Argument(format!(
                "image data length {} does not match {width}x{height}x{}",
                data.len(),
                colorspace.channels()
            )));
        }
        Ok(Self { width, height, colorspace, data })
    }

    /// Image with every pixel set to `value` (one entry per channel).
    pub fn filled(width: usize, height: usize, colorspace: ColorSpace, value: &[u8]) -> Result<Self> {
        if value.len() != colorspace.channels() {
            return Err(Error::Argument("fill value must have one entry per channel".into()));
        }
        let data = value.iter().copied().cycle().take(width * height * value.len()).collect();
        Self::new(width, height, colorspace, data)
    }

    pub fn from_fn_gray(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, ColorSpace::Gray, data)
    }

    pub fn from_fn_rgb(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, ColorSpace::Rgb, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels();
        let i = (y * self.width + x) * c;
        &self.data[i..i + c]
    }

    /// First channel of a pixel; the sample itself for gray images.
    pub fn sample(&self, x: usize, y: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels()]
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Luma view of the image: BT.601 luma for RGB, the Y plane for YCbCr.
    pub fn to_gray(&self) -> Image {
        let data = match self.colorspace {
            ColorSpace::Gray => self.data.clone(),
            ColorSpace::YCbCr => self.data.chunks_exact(3).map(|p| p[0]).collect(),
            ColorSpace::Rgb => self
                .data
                .chunks_exact(3)
                .map(|p| round_u8(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
                .collect(),
        };
        Image { width: self.width, height: self.height, colorspace: ColorSpace::Gray, data }
    }
}

fn round_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Row-major boolean raster; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Argument(format!(
                "mask has {} bits, expected {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but anything outside the frame reads as background.
    #[inline]
    pub fn get_or_bg(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Foreground coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % w, i / w))
    }

    /// Foreground pixel with at least one 4-neighbor in the background
    /// (pixels outside the frame are background).
    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        if !self.get(x, y) {
            return false;
        }
        let (xi, yi) = (x as isize, y as isize);
        !(self.get_or_bg(xi - 1, yi)
            && self.get_or_bg(xi + 1, yi)
            && self.get_or_bg(xi, yi - 1)
            && self.get_or_bg(xi, yi + 1))
    }

    /// Gray image with foreground 255 and background 0.
    pub fn to_image(&self) -> Image {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Image { width: self.width, height: self.height, colorspace: ColorSpace::Gray, data }
    }

    /// Inverse of [`to_image`](Self::to_image): samples ≥ 128 are foreground.
    pub fn from_image(img: &Image) -> Result<Self> {
        if img.channels() != 1 {
            return Err(Error::Precondition("mask images must be single channel".into()));
        }
        Ok(Self {
            width: img.width(),
            height: img.height(),
            bits: img.data().iter().map(|&v| v >= 128).collect(),
        })
    }
}

/// Full-range BT.601 conversion.
pub fn rgb_to_ycbcr(img: &Image) -> Result<Image> {
    if img.colorspace() != ColorSpace::Rgb {
        return Err(Error::Precondition(format!("expected an RGB image, got {:?}", img.colorspace())));
    }
    let mut data = Vec::with_capacity(img.data.len());
    for p in img.data.chunks_exact(3) {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        data.push(round_u8(0.299 * r + 0.587 * g + 0.114 * b));
        data.push(round_u8(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b));
        data.push(round_u8(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b));
    }
    Image::new(img.width, img.height, ColorSpace::YCbCr, data)
}

/// Catmull-Rom kernel (a = -0.5).
pub(crate) fn catmull_rom(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Source taps and weights for one output coordinate along an axis.
fn resample_taps(out_len: usize, in_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let offset = k as isize - 1;
                let pos = (base as isize + offset).clamp(0, in_len as isize - 1);
                idx[k] = pos as usize;
                w[k] = catmull_rom(frac - offset as f64);
            }
            (idx, w)
        })
        .collect()
}

/// Bicubic (Catmull-Rom) resampling with edge-clamped borders.
///
/// Output pixel centers map onto input pixel centers, so resizing to the
/// same dimensions is the identity.
pub fn resize(img: &Image, new_w: usize, new_h: usize) -> Result<Image> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Argument(format!("target size must be positive, got {new_w}x{new_h}")));
    }
    let c = img.channels();
    let xt = resample_taps(new_w, img.width);
    let yt = resample_taps(new_h, img.height);

    // Horizontal pass into a float buffer of size new_w x height.
    let mut tmp = vec![0.0f64; new_w * img.height * c];
    for y in 0..img.height {
        let row = &img.data[y * img.width * c..(y + 1) * img.width * c];
        for (ox, (idx, w)) in xt.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w[k] * row[idx[k] * c + ch] as f64;
                }
                tmp[(y * new_w + ox) * c + ch] = acc;
            }
        }
    }
    let mut data = vec![0u8; new_w * new_h * c];
    for (oy, (idx, w)) in yt.iter().enumerate() {
        for ox in 0..new_w {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += w[k] * tmp[(idx[k] * new_w + ox) * c + ch];
                }
                data[(oy * new_w + ox) * c + ch] = round_u8(acc);
            }
        }
    }
    Image::new(new_w, new_h, img.colorspace, data)
}

/// Pixels at or above `t` become foreground.
pub fn threshold(img: &Image, t: u8) -> Result<BinaryMask> {
    if img.channels() != 1 {
        return Err(Error::Precondition("threshold needs a single-channel image".into()));
    }
    Ok(BinaryMask { width: img.width, height: img.height, bits: img.data.iter().map(|&v| v >= t).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BBox {
    fn point(x: usize, y: usize) -> Self {
        Self { min_x: x, min_y: y, max_x: x, max_y: y }
    }

    fn include(&mut self, x: usize, y: usize) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }

    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x as f64 && x <= self.max_x as f64 && y >= self.min_y as f64 && y <= self.max_y as f64
    }
}

/// Labeled components of a mask. Label 0 is background; ids run `1..=count`
/// in raster order of each component's first pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
    bboxes: Vec<BBox>,
}

impl ComponentTable {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count of component `id` (1-based).
    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn bbox(&self, id: u32) -> BBox {
        self.bboxes[id as usize - 1]
    }

    pub fn touches_border(&self, id: u32) -> bool {
        let b = self.bbox(id);
        b.min_x == 0 || b.min_y == 0 || b.max_x + 1 == self.width || b.max_y + 1 == self.height
    }

    pub fn mask(&self, id: u32) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == id).collect(),
        }
    }

    /// Mask of every component whose id satisfies `keep`.
    pub fn select(&self, keep: impl Fn(u32) -> bool) -> BinaryMask {
        let flags: Vec<bool> = (1..=self.count() as u32).map(keep).collect();
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l != 0 && flags[l as usize - 1]).collect(),
        }
    }

    /// Component ids sorted by decreasing size, ties by id.
    pub fn by_size_desc(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (1..=self.count() as u32).collect();
        ids.sort_by(|&a, &b| self.size(b).cmp(&self.size(a)).then(a.cmp(&b)));
        ids
    }
}

fn uf_find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn uf_union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = uf_find(parent, a);
    let rb = uf_find(parent, b);
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass connected component labeling with union-find.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentTable {
    let (w, h) = (mask.width, mask.height);
    let mut provisional = vec![0u32; w * h];
    // parent[0] is a dummy slot so provisional labels index directly.
    let mut parent: Vec<u32> = vec![0];
    let back: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };
    for y in 0..h {
        for x in 0..w {
            if !mask.bits[y * w + x] {
                continue;
            }
            let mut current = 0u32;
            for &(dx, dy) in back {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w {
                    continue;
                }
                let l = provisional[ny as usize * w + nx as usize];
                if l == 0 {
                    continue;
                }
                current = if current == 0 { uf_find(&mut parent, l) } else { uf_union(&mut parent, current, l) };
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            provisional[y * w + x] = current;
        }
    }

    let mut final_id = vec![0u32; parent.len()];
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut bboxes: Vec<BBox> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == 0 {
                continue;
            }
            let root = uf_find(&mut parent, p) as usize;
            if final_id[root] == 0 {
                sizes.push(0);
                bboxes.push(BBox::point(x, y));
                final_id[root] = sizes.len() as u32;
            }
            let id = final_id[root];
            labels[y * w + x] = id;
            sizes[id as usize - 1] += 1;
            bboxes[id as usize - 1].include(x, y);
        }
    }
    ComponentTable { width: w, height: h, labels, sizes, bboxes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorphOp {
    Erode,
    Dilate,
    Close,
}

/// Sliding-window count along rows (`horizontal`) or columns of `src`.
/// Window cells outside the frame count as `outside`.
fn window_pass(src: &[bool], w: usize, h: usize, r: usize, horizontal: bool, erode: bool) -> Vec<bool> {
    let (len, lines) = if horizontal { (w, h) } else { (h, w) };
    let at = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut out = vec![false; w * h];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[at(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let n = prefix[hi + 1] - prefix[lo];
            out[at(line, i)] = if erode {
                // Outside-frame cells are background, so a clipped window fails.
                i >= r && i + r < len && n == 2 * r + 1
            } else {
                n > 0
            };
        }
    }
    out
}

fn erode_or_dilate(mask: &BinaryMask, r: usize, erode: bool) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let rows = window_pass(&mask.bits, w, h, r, true, erode);
    let bits = window_pass(&rows, w, h, r, false, erode);
    BinaryMask { width: w, height: h, bits }
}

/// Binary morphology with a `(2r+1)²` square element.
///
/// The frame is treated as a window onto an infinite background: erosion
/// clears pixels whose element leaves the frame, and closing is computed on a
/// padded canvas so that it is always extensive.
pub fn morphology(mask: &BinaryMask, op: MorphOp, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::Argument("morphology radius must be at least 1".into()));
    }
    Ok(match op {
        MorphOp::Erode => erode_or_dilate(mask, radius, true),
        MorphOp::Dilate => erode_or_dilate(mask, radius, false),
        MorphOp::Close => {
            let pad = radius;
            let (pw, ph) = (mask.width + 2 * pad, mask.height + 2 * pad);
            let padded = BinaryMask::from_fn(pw, ph, |x, y| {
                x >= pad && y >= pad && x < pad + mask.width && y < pad + mask.height && mask.get(x - pad, y - pad)
            });
            let closed = erode_or_dilate(&erode_or_dilate(&padded, radius, false), radius, true);
            BinaryMask::from_fn(mask.width, mask.height, |x, y| closed.get(x + pad, y + pad))
        }
    })
}

/// Majority vote over a `window x window` neighborhood with edge-clamped
/// borders.
pub fn median_filter(mask: &BinaryMask, window: usize) -> Result<BinaryMask> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!("median window must be odd and at least 3, got {window}")));
    }
    let h = window / 2;
    let (w, ht) = (mask.width, mask.height);
    // Summed-area table over the replicate-padded mask.
    let (pw, ph) = (w + 2 * h, ht + 2 * h);
    let mut sat = vec![0u32; (pw + 1) * (ph + 1)];
    for py in 0..ph {
        let sy = (py as isize - h as isize).clamp(0, ht as isize - 1) as usize;
        let mut row = 0u32;
        for px in 0..pw {
            let sx = (px as isize - h as isize).clamp(0, w as isize - 1) as usize;
            row += mask.get(sx, sy) as u32;
            sat[(py + 1) * (pw + 1) + px + 1] = sat[py * (pw + 1) + px + 1] + row;
        }
    }
    let half = (window * window / 2) as u32;
    Ok(BinaryMask::from_fn(w, ht, |x, y| {
        // Window in padded coordinates: [x, x + window) x [y, y + window).
        let (x0, y0, x1, y1) = (x, y, x + window, y + window);
        let s = sat[y1 * (pw + 1) + x1] + sat[y0 * (pw + 1) + x0] - sat[y0 * (pw + 1) + x1] - sat[y1 * (pw + 1) + x0];
        s > half
    }))
}

/// One-pixel-wide outer contour: foreground pixels where the L1 Sobel
/// gradient of the 0/1 raster is nonzero. Outside the frame reads as 0.
pub fn sobel_edges(mask: &BinaryMask) -> BinaryMask {
    let v = |x: isize, y: isize| mask.get_or_bg(x, y) as i32;
    BinaryMask::from_fn(mask.width, mask.height, |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        let (x, y) = (x as isize, y as isize);
        let gx = (v(x + 1, y - 1) + 2 * v(x + 1, y) + v(x + 1, y + 1)) - (v(x - 1, y - 1) + 2 * v(x - 1, y) + v(x - 1, y + 1));
        let gy = (v(x - 1, y + 1) + 2 * v(x, y + 1) + v(x + 1, y + 1)) - (v(x - 1, y - 1) + 2 * v(x, y - 1) + v(x + 1, y - 1));
        gx.abs() + gy.abs() > 0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(w: usize, h: usize, density: f64, seed: u64) -> BinaryMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density))
    }

    #[test]
    fn ycbcr_fixed_points_and_red() {
        let px = |r, g, b| {
            let img = Image::new(1, 1, ColorSpace::Rgb, vec![r, g, b]).unwrap();
            rgb_to_ycbcr(&img).unwrap().data().to_vec()
        };
        assert_eq!(px(128, 128, 128), vec![128, 128, 128]);
        assert_eq!(px(0, 0, 0), vec![0, 128, 128]);
        // Y = 76.245, Cb = 84.972, Cr = 255.5 (clamped).
        assert_eq!(px(255, 0, 0), vec![76, 85, 255]);
    }

    #[test]
    fn ycbcr_rejects_wrong_colorspace() {
        let img = Image::filled(2, 2, ColorSpace::Gray, &[3]).unwrap();
        assert!(matches!(rgb_to_ycbcr(&img), Err(Error::Precondition(_))));
    }

    #[test]
    fn resize_identity_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = Image::from_fn_rgb(13, 9, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap();
        assert_eq!(resize(&img, 13, 9).unwrap(), img);
        let flat = Image::filled(17, 11, ColorSpace::Gray, &[201]).unwrap();
        for (w, h) in [(1, 1), (5, 3), (40, 29), (17, 11)] {
            let out = resize(&flat, w, h).unwrap();
            assert!(out.data().iter().all(|&v| v == 201), "{w}x{h}");
        }
        assert!(matches!(resize(&flat, 0, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn threshold_checkerboard() {
        let img = Image::from_fn_gray(8, 6, |x, y| if (x + y) % 2 == 0 { 200 } else { 10 }).unwrap();
        let m = threshold(&img, 100).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                assert_eq!(m.get(x, y), (x + y) % 2 == 0);
            }
        }
        let zero = Image::filled(4, 4, ColorSpace::Gray, &[0]).unwrap();
        assert!(threshold(&zero, 1).unwrap().is_empty());
        let full = Image::filled(4, 4, ColorSpace::Gray, &[255]).unwrap();
        assert_eq!(threshold(&full, 1).unwrap().count(), 16);
    }

    #[test]
    fn components_connectivity() {
        assert_eq!(connected_components(&BinaryMask::new(5, 5), Connectivity::Eight).count(), 0);
        let mut m = BinaryMask::new(3, 3);
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(connected_components(&m, Connectivity::Eight).count(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).count(), 2);
    }

    #[test]
    fn components_label_order_is_raster_order_of_first_pixel() {
        // A "U" whose arms start on row 0 and join at the bottom, plus a dot.
        let rows = ["#.#.#", "#.#..", "###..", "....."];
        let m = BinaryMask::from_fn(5, 4, |x, y| rows[y].as_bytes()[x] == b'#');
        let t = connected_components(&m, Connectivity::Four);
        assert_eq!(t.count(), 2);
        assert_eq!(t.label(0, 0), 1);
        assert_eq!(t.label(2, 0), 1);
        assert_eq!(t.label(4, 0), 2);
        assert_eq!(t.size(1), 7);
        assert_eq!(t.bbox(1), BBox { min_x: 0, min_y: 0, max_x: 2, max_y: 2 });
    }

    /// Flood-fill oracle: label by BFS in raster order of seeds.
    fn flood_labels(m: &BinaryMask, eight: bool) -> Vec<u32> {
        let (w, h) = (m.width(), m.height());
        let mut labels = vec![0u32; w * h];
        let mut next = 0;
        for sy in 0..h {
            for sx in 0..w {
                if !m.get(sx, sy) || labels[sy * w + sx] != 0 {
                    continue;
                }
                next += 1;
                let mut stack = vec![(sx, sy)];
                labels[sy * w + sx] = next;
                while let Some((x, y)) = stack.pop() {
                    for dy in -1i32..=1 {
                        for dx in -1i32..=1 {
                            if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                                continue;
                            }
                            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                                continue;
                            }
                            let i = ny as usize * w + nx as usize;
                            if m.bits()[i] && labels[i] == 0 {
                                labels[i] = next;
                                stack.push((nx as usize, ny as usize));
                            }
                        }
                    }
                }
            }
        }
        labels
    }

    #[test]
    fn components_match_flood_fill() {
        for seed in 0..20 {
            let m = random_mask(32, 32, 0.45, seed);
            for (conn, eight) in [(Connectivity::Eight, true), (Connectivity::Four, false)] {
                let t = connected_components(&m, conn);
                assert_eq!(t.labels(), flood_labels(&m, eight).as_slice());
                assert_eq!(t.sizes().iter().sum::<usize>(), m.count());
            }
        }
    }

    fn window_oracle(m: &BinaryMask, r: usize, erode: bool) -> BinaryMask {
        let r = r as isize;
        BinaryMask::from_fn(m.width(), m.height(), |x, y| {
            let mut all = true;
            let mut any = false;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = m.get_or_bg(x as isize + dx, y as isize + dy);
                    all &= v;
                    any |= v;
                }
            }
            if erode {
                all
            } else {
                any
            }
        })
    }

    #[test]
    fn morphology_matches_window_oracle() {
        for seed in 0..10 {
            let m = random_mask(23, 17, 0.6, seed);
            for r in 1..=3 {
                assert_eq!(morphology(&m, MorphOp::Erode, r).unwrap(), window_oracle(&m, r, true));
                assert_eq!(morphology(&m, MorphOp::Dilate, r).unwrap(), window_oracle(&m, r, false));
            }
        }
    }

    #[test]
    fn erode_full_mask_clears_border() {
        let e = morphology(&BinaryMask::full(6, 5), MorphOp::Erode, 1).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                assert_eq!(e.get(x, y), x > 0 && y > 0 && x < 5 && y < 4);
            }
        }
        assert!(morphology(&BinaryMask::full(3, 3), MorphOp::Erode, 0).is_err());
    }

    #[test]
    fn morphology_duality_in_interior() {
        let r = 2;
        for seed in 0..10 {
            let m = random_mask(20, 20, 0.5, seed);
            let a = morphology(&m.complement(), MorphOp::Erode, r).unwrap();
            let b = morphology(&m, MorphOp::Dilate, r).unwrap().complement();
            for y in r..20 - r {
                for x in r..20 - r {
                    assert_eq!(a.get(x, y), b.get(x, y));
                }
            }
        }
    }

    fn median_oracle(m: &BinaryMask, window: usize) -> BinaryMask {
        let h = (window / 2) as isize;
        BinaryMask::from_fn(m.width(), m.height(), |x, y| {
            let mut n = 0;
            for dy in -h..=h {
                for dx in -h..=h {
                    let sx = (x as isize + dx).clamp(0, m.width() as isize - 1) as usize;
                    let sy = (y as isize + dy).clamp(0, m.height() as isize - 1) as usize;
                    n += m.get(sx, sy) as usize;
                }
            }
            n * 2 > window * window
        })
    }

    #[test]
    fn median_filter_cases() {
        let full = BinaryMask::full(7, 5);
        assert_eq!(median_filter(&full, 3).unwrap(), full);
        let empty = BinaryMask::new(7, 5);
        assert_eq!(median_filter(&empty, 5).unwrap(), empty);
        let mut dot = BinaryMask::new(7, 7);
        dot.set(3, 3, true);
        assert!(median_filter(&dot, 3).unwrap().is_empty());
        assert!(matches!(median_filter(&dot, 4), Err(Error::Argument(_))));
        for seed in 0..10 {
            let m = random_mask(19, 14, 0.5, seed);
            for win in [3, 5, 7] {
                assert_eq!(median_filter(&m, win).unwrap(), median_oracle(&m, win));
            }
        }
    }

    #[test]
    fn sobel_cases() {
        let full = BinaryMask::full(6, 5);
        let e = sobel_edges(&full);
        for y in 0..5 {
            for x in 0..6 {
                assert_eq!(e.get(x, y), x == 0 || y == 0 || x == 5 || y == 4);
            }
        }
        assert!(sobel_edges(&BinaryMask::new(4, 4)).is_empty());
        let square = BinaryMask::from_fn(20, 20, |x, y| (4..15).contains(&x) && (6..13).contains(&y));
        let edges = sobel_edges(&square);
        let oracle = BinaryMask::from_fn(20, 20, |x, y| square.is_boundary(x, y));
        assert_eq!(edges, oracle);
    }

    proptest! {
        #[test]
        fn close_is_extensive(seed in 0u64..1000, r in 1usize..4, density in 0.05f64..0.9) {
            let m = random_mask(15, 12, density, seed);
            let c = morphology(&m, MorphOp::Close, r).unwrap();
            for (x, y) in m.foreground() {
                prop_assert!(c.get(x, y));
            }
        }

        #[test]
        fn components_partition_foreground(seed in 0u64..1000, density in 0.0f64..1.0) {
            let m = random_mask(16, 16, density, seed);
            let t = connected_components(&m, Connectivity::Eight);
            for (i, &l) in t.labels().iter().enumerate() {
                prop_assert_eq!(l != 0, m.bits()[i]);
                prop_assert!(l as usize <= t.count());
            }
        }
    }
}
