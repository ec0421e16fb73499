//! Pair-eye composition: both eye crops stacked into one 72×72 image.
//!
//! The image-left eye fills the top 72×36 half and the image-right eye the
//! bottom half. Each crop is the detected eye box grown by 10% per side and
//! clamped to the frame.

use serde::Serialize;
use thiserror::Error;

use crate::cascade::{FaceLandmarks, Rejection};
use crate::imaging::{crop, resize, GrayImage, ImagingError, Rect};

pub const PAIR_SIDE: u32 = 72;
pub const HALF_HEIGHT: u32 = PAIR_SIDE / 2;
/// Per-side growth of an eye box before cropping.
pub const EYE_MARGIN: f64 = 0.10;
/// Smallest eye box (w, h) the quality gate accepts.
pub const MIN_EYE_SIZE: (u32, u32) = (24, 12);

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("eye box {0:?} is degenerate after clamping to the frame")]
    Degenerate(Rect),
    #[error("pair-eye images must be 72x72, got {0}x{1}")]
    WrongSize(u32, u32),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// A 72×72 two-eye image with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEyeImage {
    image: GrayImage,
    pub frame_id: String,
    pub person_id: String,
}

impl PairEyeImage {
    /// Wrap an existing 72×72 raster (for example one read back from disk).
    pub fn new(image: GrayImage, frame_id: impl Into<String>, person_id: impl Into<String>) -> Result<Self, ComposeError> {
        if image.width() != PAIR_SIDE || image.height() != PAIR_SIDE {
            return Err(ComposeError::WrongSize(image.width(), image.height()));
        }
        Ok(PairEyeImage {
            image,
            frame_id: frame_id.into(),
            person_id: person_id.into(),
        })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn into_image(self) -> GrayImage {
        self.image
    }

    /// `<person>_<frame>_<class>.pgm`
    pub fn file_name(&self, class: u8) -> String {
        format!("{}_{}_{}.pgm", self.person_id, self.frame_id, class)
    }
}

/// Grow `r` by [`EYE_MARGIN`] on every side and clamp it to the frame.
pub fn expand_eye_box(r: &Rect, frame_w: u32, frame_h: u32) -> Result<Rect, ComposeError> {
    let mx = (r.w as f64 * EYE_MARGIN).round() as i64;
    let my = (r.h as f64 * EYE_MARGIN).round() as i64;
    let x0 = (r.x as i64 - mx).max(0);
    let y0 = (r.y as i64 - my).max(0);
    let x1 = (r.right() as i64 + mx).min(frame_w as i64);
    let y1 = (r.bottom() as i64 + my).min(frame_h as i64);
    if x1 <= x0 || y1 <= y0 {
        return Err(ComposeError::Degenerate(*r));
    }
    Ok(Rect::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32))
}

/// Crop, expand and resize one eye to the 72×36 half-tile.
pub fn eye_tile(frame: &GrayImage, eye: &Rect) -> Result<GrayImage, ComposeError> {
    let r = expand_eye_box(eye, frame.width(), frame.height())?;
    Ok(resize(&crop(frame, &r)?, PAIR_SIDE, HALF_HEIGHT)?)
}

/// Stack two 72×36 tiles into a 72×72 image (first on top).
pub fn stack_tiles(top: &GrayImage, bottom: &GrayImage) -> Result<GrayImage, ComposeError> {
    for t in [top, bottom] {
        if t.width() != PAIR_SIDE || t.height() != HALF_HEIGHT {
            return Err(ComposeError::WrongSize(t.width(), t.height()));
        }
    }
    let mut samples = Vec::with_capacity((PAIR_SIDE * PAIR_SIDE) as usize);
    samples.extend_from_slice(top.samples());
    samples.extend_from_slice(bottom.samples());
    Ok(GrayImage::new(PAIR_SIDE, PAIR_SIDE, samples)?)
}

/// Build the pair-eye image for one frame.
pub fn compose_pair(
    frame: &GrayImage,
    lm: &FaceLandmarks,
    frame_id: impl Into<String>,
    person_id: impl Into<String>,
) -> Result<PairEyeImage, ComposeError> {
    let top = eye_tile(frame, &lm.left_eye)?;
    let bottom = eye_tile(frame, &lm.right_eye)?;
    PairEyeImage::new(stack_tiles(&top, &bottom)?, frame_id, person_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GateOutcome {
    Accept(FaceLandmarks),
    Reject(Rejection),
}

impl GateOutcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateOutcome::Accept(_))
    }
}

/// Dataset cleaning gate: landmarks must exist and both eyes must be at least 24×12.
pub fn quality_gate(detection: &Result<FaceLandmarks, Rejection>) -> GateOutcome {
    match detection {
        Err(reason) => GateOutcome::Reject(*reason),
        Ok(lm) => {
            let big_enough = |r: &Rect| r.w >= MIN_EYE_SIZE.0 && r.h >= MIN_EYE_SIZE.1;
            if big_enough(&lm.left_eye) && big_enough(&lm.right_eye) {
                GateOutcome::Accept(*lm)
            } else {
                GateOutcome::Reject(Rejection::EyeTooSmall)
            }
        }
    }
}
