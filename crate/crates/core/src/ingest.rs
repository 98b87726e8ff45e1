//! Image-side preprocessing: block orientation fields, virtual minutiae and
//! rotation-normalised patches around a minutia.
//!
//! Orientation is estimated from the block gradient covariance using
//! doubled-angle averaging. Ridge orientation is perpendicular to the
//! dominant gradient.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::descriptor::{patch_geometry, PATCH_OUTPUT_SIZE};
use crate::error::{Error, Result};
use crate::model::{wrap_pi, Minutia, OrientationField, PatchTypeId};

pub const DEFAULT_BLOCK_SIZE: u32 = 16;
pub const COHERENCE_THRESHOLD: f64 = 0.2;

/// 8-bit grayscale image with a per-pixel region-of-interest mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub roi_mask: Vec<bool>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, roi_mask: Vec<bool>) -> Result<Self> {
        let n = width as usize * height as usize;
        if pixels.len() != n || roi_mask.len() != n {
            return Err(Error::InvalidInput(format!(
                "image {width}x{height} needs {n} pixels and mask entries, got {} and {}",
                pixels.len(),
                roi_mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            roi_mask,
        })
    }

    /// Image whose ROI covers every pixel.
    pub fn full_roi(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let n = width as usize * height as usize;
        Self::new(width, height, pixels, vec![true; n])
    }

    /// Renders `f(x, y)` (clamped to 0..=255) into a full-ROI image.
    pub fn from_fn(width: u32, height: u32, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x as f64, y as f64).round().clamp(0.0, 255.0) as u8);
            }
        }
        Self::full_roi(width, height, pixels).expect("dimensions match")
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Mean intensity over the ROI, or over the whole image when the ROI is empty.
    pub fn roi_mean(&self) -> f64 {
        let (sum, n) = self
            .pixels
            .iter()
            .zip(&self.roi_mask)
            .filter(|(_, m)| **m)
            .fold((0.0, 0usize), |(s, n), (p, _)| (s + *p as f64, n + 1));
        if n > 0 {
            sum / n as f64
        } else if self.pixels.is_empty() {
            0.0
        } else {
            self.pixels.iter().map(|p| *p as f64).sum::<f64>() / self.pixels.len() as f64
        }
    }

    /// Bilinear sample at a continuous pixel position (pixel centres at
    /// integer coordinates). `None` outside the image.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
            return None;
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as u32;
        let y0 = y0 as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p = |x, y| self.at(x, y) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

#[cfg(feature = "image-io")]
/// Loads an 8-bit grayscale image (PNG or PGM) and an ROI mask image of the
/// same size; mask pixels above zero are inside the ROI.
pub fn load_gray_image(
    image_path: impl AsRef<std::path::Path>,
    mask_path: Option<&std::path::Path>,
) -> Result<GrayImage> {
    let decode = |p: &std::path::Path| {
        image::open(p)
            .map(|i| i.to_luma8())
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
    };
    let img = decode(image_path.as_ref())?;
    let (w, h) = img.dimensions();
    let roi = match mask_path {
        Some(p) => {
            let m = decode(p)?;
            if m.dimensions() != (w, h) {
                return Err(Error::InvalidInput(format!(
                    "mask is {:?}, image is {w}x{h}",
                    m.dimensions()
                )));
            }
            m.into_raw().into_iter().map(|v| v > 0).collect()
        }
        None => vec![true; w as usize * h as usize],
    };
    GrayImage::new(w, h, img.into_raw(), roi)
}

/// Estimates the field, failing with `EmptyRoi` when nothing is masked in.
pub fn estimate_orientation_field(img: &GrayImage, block_size: u32) -> Result<OrientationField> {
    let of = estimate_orientation_field_unchecked(img, block_size)?;
    if of.masked_count() == 0 {
        return Err(Error::EmptyRoi);
    }
    Ok(of)
}

/// Same as [`estimate_orientation_field`] but returns an all-masked-out
/// field instead of an error.
pub fn estimate_orientation_field_unchecked(
    img: &GrayImage,
    block_size: u32,
) -> Result<OrientationField> {
    if block_size < 8 {
        return Err(Error::InvalidInput(format!("block size {block_size} < 8")));
    }
    if img.width <= block_size || img.height <= block_size {
        return Err(Error::InvalidInput(format!(
            "image {}x{} not larger than one {block_size}px block",
            img.width, img.height
        )));
    }
    let (gx, gy) = sobel(img);
    let w = img.width as usize;
    let wb = img.width / block_size;
    let hb = img.height / block_size;
    let mut of = OrientationField::empty(block_size, wb, hb);
    let bs = block_size as usize;
    // covariance window: the block plus half a block on every side
    let pad = bs / 2;
    for by in 0..hb as usize {
        for bx in 0..wb as usize {
            let (x0, y0) = (bx * bs, by * bs);
            let roi_in = (y0..y0 + bs)
                .flat_map(|y| (x0..x0 + bs).map(move |x| y * w + x))
                .filter(|&i| img.roi_mask[i])
                .count();
            if roi_in * 2 < bs * bs {
                continue;
            }
            let xs = x0.saturating_sub(pad)..(x0 + bs + pad).min(img.width as usize);
            let ys = y0.saturating_sub(pad)..(y0 + bs + pad).min(img.height as usize);
            let (mut gxx, mut gyy, mut gxy) = (0.0, 0.0, 0.0);
            for y in ys {
                for x in xs.clone() {
                    let i = y * w + x;
                    if !img.roi_mask[i] {
                        continue;
                    }
                    gxx += gx[i] * gx[i];
                    gyy += gy[i] * gy[i];
                    gxy += gx[i] * gy[i];
                }
            }
            let energy = gxx + gyy;
            if energy <= 0.0 {
                continue;
            }
            let coherence = ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt() / energy;
            if coherence < COHERENCE_THRESHOLD {
                continue;
            }
            let gradient_dir = 0.5 * (2.0 * gxy).atan2(gxx - gyy);
            of.set(bx as u32, by as u32, wrap_pi(gradient_dir + FRAC_PI_2));
        }
    }
    Ok(of)
}

fn sobel(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width as i64, img.height as i64);
    let p = |x: i64, y: i64| img.at(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32) as f64;
    let mut gx = vec![0.0; (w * h) as usize];
    let mut gy = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            gx[i] = (p(x + 1, y - 1) + 2.0 * p(x + 1, y) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2.0 * p(x - 1, y) + p(x - 1, y + 1));
            gy[i] = (p(x - 1, y + 1) + 2.0 * p(x, y + 1) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2.0 * p(x, y - 1) + p(x + 1, y - 1));
        }
    }
    (gx, gy)
}

fn interior_blocks(of: &OrientationField) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
    let (wb, hb) = (of.width_blocks, of.height_blocks);
    of.masked_blocks()
        .filter(move |(bx, by, _)| *bx > 0 && *by > 0 && *bx + 1 < wb && *by + 1 < hb)
}

/// Latent texture points: two virtual minutiae `(x, y, O)` and `(x, y, O+π)`
/// per masked-in block, skipping blocks on the field border.
pub fn latent_virtual_minutiae(of: &OrientationField) -> Vec<Minutia> {
    interior_blocks(of)
        .flat_map(|(bx, by, theta)| {
            let (x, y) = of.block_center(bx, by);
            [
                Minutia::virtual_minutia(x, y, theta),
                Minutia::virtual_minutia(x, y, theta + PI),
            ]
        })
        .collect()
}

/// Reference texture points: one virtual minutia per masked-in block with
/// direction in `[0, π)`.
pub fn reference_virtual_minutiae(of: &OrientationField) -> Vec<Minutia> {
    interior_blocks(of)
        .map(|(bx, by, theta)| {
            let (x, y) = of.block_center(bx, by);
            Minutia::virtual_minutia(x, y, theta)
        })
        .collect()
}

/// Square crop around a minutia, resampled to `PATCH_OUTPUT_SIZE`².
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub patch_type_id: PatchTypeId,
    pub size: usize,
    pub pixels: Vec<f32>,
    pub center_minutia: Minutia,
}

impl Patch {
    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.pixels[v * self.size + u]
    }
}

/// Crops the given patch type around `m` in the minutia's own frame: the
/// minutia direction maps to the +u axis. Out-of-image samples take the mean
/// ROI intensity.
pub fn extract_patch(img: &GrayImage, m: &Minutia, patch_type_id: PatchTypeId) -> Result<Patch> {
    let geom = patch_geometry(patch_type_id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown patch type {patch_type_id}")))?;
    let fill = img.roi_mean();
    let n = PATCH_OUTPUT_SIZE;
    let scale = geom.window as f64 / n as f64;
    let half = geom.window as f64 / 2.0;
    let (s, c) = m.alpha.sin_cos();
    let mut pixels = Vec::with_capacity(n * n);
    for v in 0..n {
        let ly = geom.offset.1 + (v as f64 + 0.5) * scale - half;
        for u in 0..n {
            let lx = geom.offset.0 + (u as f64 + 0.5) * scale - half;
            let x = m.x + lx * c - ly * s;
            let y = m.y + lx * s + ly * c;
            pixels.push(img.sample(x, y).unwrap_or(fill) as f32);
        }
    }
    Ok(Patch {
        patch_type_id,
        size: n,
        pixels,
        center_minutia: *m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::CENTERED_160;

    /// Sinusoidal grating whose ridges run along `angle` (image coordinates).
    pub(crate) fn grating(size: u32, angle: f64, wavelength: f64) -> GrayImage {
        let (s, c) = angle.sin_cos();
        GrayImage::from_fn(size, size, |x, y| {
            128.0 + 100.0 * (2.0 * PI * (-x * s + y * c) / wavelength).cos()
        })
    }

    fn interior_errors(of: &OrientationField, angle: f64) -> Vec<f64> {
        interior_blocks(of)
            .map(|(_, _, t)| {
                let d = (t - wrap_pi(angle)).abs();
                d.min(PI - d)
            })
            .collect()
    }

    #[test]
    fn grating_orientation_is_recovered() {
        let angle = 30f64.to_radians();
        let of = estimate_orientation_field(&grating(192, angle, 9.0), 16).unwrap();
        let errs = interior_errors(&of, angle);
        assert!(!errs.is_empty());
        for e in errs {
            assert!(e.to_degrees() <= 3.0, "error {}", e.to_degrees());
        }
    }

    #[test]
    fn rotated_grating_differs_by_ninety_degrees() {
        let a = 30f64.to_radians();
        let of1 = estimate_orientation_field(&grating(160, a, 9.0), 16).unwrap();
        let of2 = estimate_orientation_field(&grating(160, a + FRAC_PI_2, 9.0), 16).unwrap();
        for ((_, _, t1), (_, _, t2)) in interior_blocks(&of1).zip(interior_blocks(&of2)) {
            let d = wrap_pi(t2 - t1 - FRAC_PI_2);
            assert!(d.min(PI - d).to_degrees() < 3.0);
        }
    }

    #[test]
    fn uniform_image_has_no_valid_block() {
        let img = GrayImage::from_fn(128, 128, |_, _| 90.0);
        let of = estimate_orientation_field_unchecked(&img, 16).unwrap();
        assert_eq!(of.masked_count(), 0);
        assert!(matches!(
            estimate_orientation_field(&img, 16),
            Err(Error::EmptyRoi)
        ));
    }

    #[test]
    fn rejects_small_blocks_and_images() {
        let img = GrayImage::from_fn(64, 64, |x, _| x);
        assert!(estimate_orientation_field(&img, 4).is_err());
        assert!(estimate_orientation_field(&img, 64).is_err());
    }

    #[test]
    fn roi_outside_blocks_are_masked() {
        let mut img = grating(128, 0.3, 8.0);
        for y in 0..128 {
            for x in 0..64 {
                img.roi_mask[y * 128 + x] = false;
            }
        }
        let of = estimate_orientation_field(&img, 16).unwrap();
        for by in 0..8 {
            for bx in 0..4 {
                assert!(of.get(bx, by).is_none());
            }
            assert!(of.get(6, by).is_some());
        }
    }

    #[test]
    fn single_interior_block_virtual_minutiae() {
        let mut of = OrientationField::empty(16, 5, 5);
        of.set(2, 3, 0.4);
        let (cx, cy) = of.block_center(2, 3);
        let lat = latent_virtual_minutiae(&of);
        assert_eq!(lat.len(), 2);
        assert_eq!((lat[0].x, lat[0].y, lat[0].alpha), (cx, cy, 0.4));
        assert_eq!((lat[1].x, lat[1].y), (cx, cy));
        assert_eq!(lat[1].alpha, 0.4 + PI);
        let refs = reference_virtual_minutiae(&of);
        assert_eq!(refs.len(), 1);
        assert_eq!((refs[0].x, refs[0].y, refs[0].alpha), (cx, cy, 0.4));
    }

    #[test]
    fn empty_field_gives_no_virtual_minutiae() {
        let of = OrientationField::empty(16, 6, 6);
        assert!(latent_virtual_minutiae(&of).is_empty());
        assert!(reference_virtual_minutiae(&of).is_empty());
    }

    #[test]
    fn full_field_excludes_one_block_border() {
        let of = OrientationField::new(16, 10, 10, vec![1.0; 100], vec![true; 100]).unwrap();
        assert_eq!(latent_virtual_minutiae(&of).len(), 2 * 8 * 8);
        assert_eq!(reference_virtual_minutiae(&of).len(), 8 * 8);
    }

    fn textured(size: u32) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            128.0 + 40.0 * (x * 0.21 + y * 0.05).sin() + 40.0 * (y * 0.13 - x * 0.07).cos()
        })
    }

    #[test]
    fn centered_patch_at_zero_angle_is_plain_crop() {
        let img = textured(320);
        let m = Minutia::true_minutia(159.5, 159.5, 0.0);
        let p = extract_patch(&img, &m, CENTERED_160).unwrap();
        assert_eq!(p.size, 160);
        for v in 0..160 {
            for u in 0..160 {
                assert_eq!(p.at(u, v), img.at(80 + u as u32, 80 + v as u32) as f32);
            }
        }
    }

    #[test]
    fn rotated_patch_matches_prerotated_image() {
        let n = 241u32;
        let img = textured(n);
        // I'(x, y) = I(n-1-y, x) turns direction π/2 into direction 0
        let rotated = GrayImage::from_fn(n, n, |x, y| img.at(n - 1 - y as u32, x as u32) as f64);
        let c = (n - 1) as f64 / 2.0;
        for pt in [CENTERED_160, 0, 7] {
            let a = extract_patch(&img, &Minutia::true_minutia(c, c, FRAC_PI_2), pt).unwrap();
            let b = extract_patch(&rotated, &Minutia::true_minutia(c, c, 0.0), pt).unwrap();
            for (x, y) in a.pixels.iter().zip(&b.pixels) {
                assert!((x - y).abs() < 1e-3, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn border_patch_uses_mean_fill() {
        let img = textured(200);
        let fill = img.roi_mean() as f32;
        let m = Minutia::true_minutia(10.0, 100.0, 0.0);
        let p = extract_patch(&img, &m, CENTERED_160).unwrap();
        let filled = p.pixels.iter().filter(|v| **v == fill).count();
        // columns left of the image edge: 80 - 10 = 70 of 160
        let frac = filled as f64 / p.pixels.len() as f64;
        assert!((frac - 70.0 / 160.0).abs() < 0.02, "fill fraction {frac}");
    }
}
