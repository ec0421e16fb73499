//! Geometric transforms used to build and augment pair-eye crops.
//!
//! Every resampling transform fills from the nearest edge pixel rather than
//! with black, so shifted or rotated crops carry no artificial borders.

use super::{GrayImage, ImagingError, Rect};

/// Largest rotation accepted by [`rotate`], in degrees.
pub const MAX_ROTATION_DEGREES: f64 = 45.0;

#[inline]
fn clamp_coord(v: i64, len: u32) -> u32 {
    v.clamp(0, len as i64 - 1) as u32
}

/// Shift by `(dx, dy)`: `out(x, y) = in(clamp(x - dx), clamp(y - dy))`.
pub fn translate(img: &GrayImage, dx: i32, dy: i32) -> Result<GrayImage, ImagingError> {
    let (w, h) = (img.width(), img.height());
    if dx.unsigned_abs() >= w || dy.unsigned_abs() >= h {
        return Err(ImagingError::ShiftTooLarge { dx, dy, width: w, height: h });
    }
    let src_x: Vec<u32> = (0..w).map(|x| clamp_coord(x as i64 - dx as i64, w)).collect();
    GrayImage::from_fn(w, h, |x, y| {
        let sy = clamp_coord(y as i64 - dy as i64, h);
        img.get(src_x[x as usize], sy)
    })
}

/// Bilinear sample at real coordinates with replicate-edge handling.
#[inline]
fn sample_bilinear(img: &GrayImage, fx: f64, fy: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let x0 = fx.floor() as u32;
    let y0 = fy.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ax = fx - x0 as f64;
    let ay = fy - y0 as f64;
    let top = img.get(x0, y0) as f64 * (1.0 - ax) + img.get(x1, y0) as f64 * ax;
    let bottom = img.get(x0, y1) as f64 * (1.0 - ax) + img.get(x1, y1) as f64 * ax;
    top * (1.0 - ay) + bottom * ay
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Rotate about the image center by `degrees` (positive = counter-clockwise
/// on screen, since y points down). Bilinear, replicate-edge.
pub fn rotate(img: &GrayImage, degrees: f64) -> Result<GrayImage, ImagingError> {
    if !degrees.is_finite() || degrees.abs() > MAX_ROTATION_DEGREES {
        return Err(ImagingError::AngleOutOfRange(degrees));
    }
    if degrees == 0.0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = degrees.to_radians().sin_cos();
    GrayImage::from_fn(w, h, |x, y| {
        let ox = x as f64 - cx;
        let oy = y as f64 - cy;
        // inverse mapping: rotate the output coordinate back by -angle
        let sx = cos * ox - sin * oy + cx;
        let sy = sin * ox + cos * oy + cy;
        to_u8(sample_bilinear(img, sx, sy))
    })
}

/// Bilinear resize with pixel-center alignment.
pub fn resize(img: &GrayImage, width: u32, height: u32) -> Result<GrayImage, ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyImage);
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    GrayImage::from_fn(width, height, |x, y| {
        let fx = (x as f64 + 0.5) * sx - 0.5;
        let fy = (y as f64 + 0.5) * sy - 0.5;
        to_u8(sample_bilinear(img, fx, fy))
    })
}

/// Copy the pixels of `r` verbatim.
pub fn crop(img: &GrayImage, r: &Rect) -> Result<GrayImage, ImagingError> {
    if !r.fits(img.width(), img.height()) {
        return Err(ImagingError::OutOfBounds {
            rect: *r,
            width: img.width(),
            height: img.height(),
        });
    }
    let mut samples = Vec::with_capacity(r.area() as usize);
    for y in r.y..r.bottom() {
        samples.extend_from_slice(&img.row(y)[r.x as usize..r.right() as usize]);
    }
    GrayImage::new(r.w, r.h, samples)
}
