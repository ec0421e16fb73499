use serde::Serialize;

use super::detect::{detect_multiscale, group_rectangles, DetectParams, Detection};
use super::model::{CascadeModel, FeatureKind};
use super::CascadeError;
use crate::imaging::{crop, GrayImage, Rect};

/// Face box plus the two eye boxes, all in frame coordinates.
/// `left_eye` is the eye with the smaller x-center in the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FaceLandmarks {
    pub face: Rect,
    pub left_eye: Rect,
    pub right_eye: Rect,
}

impl FaceLandmarks {
    /// `FACE x y w h EYES xl yl wl hl xr yr wr hr`
    pub fn to_line(&self) -> String {
        let (f, l, r) = (self.face, self.left_eye, self.right_eye);
        format!(
            "FACE {} {} {} {} EYES {} {} {} {} {} {} {} {}",
            f.x, f.y, f.w, f.h, l.x, l.y, l.w, l.h, r.x, r.y, r.w, r.h
        )
    }
}

/// Why a frame produced no usable landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    NoFace,
    MultipleFaces,
    EyesNotTwo,
    EyesOverlap,
    EyeTooSmall,
}

impl Rejection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rejection::NoFace => "no_face",
            Rejection::MultipleFaces => "multiple_faces",
            Rejection::EyesNotTwo => "eyes_not_two",
            Rejection::EyesOverlap => "eyes_overlap",
            Rejection::EyeTooSmall => "eye_too_small",
        }
    }
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandmarkParams {
    pub face: DetectParams,
    pub eyes: DetectParams,
    pub min_neighbors: usize,
    pub group_eps: f64,
    /// Fraction of the face height, from the top, searched for eyes.
    pub eye_region: f64,
}

impl Default for LandmarkParams {
    fn default() -> Self {
        LandmarkParams {
            face: DetectParams::default(),
            eyes: DetectParams {
                min_size: (12, 12),
                ..DetectParams::default()
            },
            min_neighbors: 3,
            group_eps: 0.2,
            eye_region: 0.6,
        }
    }
}

/// An LBP face cascade paired with a Haar eye cascade.
#[derive(Debug, Clone)]
pub struct FaceEyeDetector {
    face: CascadeModel,
    eyes: CascadeModel,
    params: LandmarkParams,
}

impl FaceEyeDetector {
    pub fn new(face: CascadeModel, eyes: CascadeModel, params: LandmarkParams) -> Result<Self, CascadeError> {
        if face.kind() != FeatureKind::Lbp {
            return Err(CascadeError::WrongKind { expected: FeatureKind::Lbp, actual: face.kind() });
        }
        if eyes.kind() != FeatureKind::Haar {
            return Err(CascadeError::WrongKind { expected: FeatureKind::Haar, actual: eyes.kind() });
        }
        if !(params.eye_region > 0.0 && params.eye_region <= 1.0) {
            return Err(CascadeError::Argument(format!("eye region fraction {} outside (0, 1]", params.eye_region)));
        }
        Ok(FaceEyeDetector { face, eyes, params })
    }

    pub fn params(&self) -> &LandmarkParams {
        &self.params
    }

    pub fn faces(&self, img: &GrayImage) -> Result<Vec<Detection>, CascadeError> {
        let raw = detect_multiscale(&self.face, img, &self.params.face)?;
        Ok(group_rectangles(&raw, self.params.min_neighbors, self.params.group_eps))
    }

    /// Eye boxes inside the upper part of `face`, in frame coordinates.
    pub fn eyes_in(&self, img: &GrayImage, face: &Rect) -> Result<Vec<Detection>, CascadeError> {
        let region_h = ((face.h as f64 * self.params.eye_region).round() as u32).max(1);
        let region = Rect::new(face.x, face.y, face.w, region_h);
        let sub = crop(img, &region)?;
        let raw = detect_multiscale(&self.eyes, &sub, &self.params.eyes)?;
        Ok(group_rectangles(&raw, self.params.min_neighbors, self.params.group_eps)
            .into_iter()
            .map(|d| Detection {
                rect: Rect::new(d.rect.x + region.x, d.rect.y + region.y, d.rect.w, d.rect.h),
                neighbors: d.neighbors,
            })
            .collect())
    }

    /// Face over the whole frame first, then eyes inside the face.
    pub fn detect(&self, img: &GrayImage) -> Result<Result<FaceLandmarks, Rejection>, CascadeError> {
        let faces = self.faces(img)?;
        let face = match faces.as_slice() {
            [] => return Ok(Err(Rejection::NoFace)),
            [f] => f.rect,
            _ => return Ok(Err(Rejection::MultipleFaces)),
        };
        let eyes = self.eyes_in(img, &face)?;
        let (a, b) = match eyes.as_slice() {
            [a, b] => (a.rect, b.rect),
            _ => return Ok(Err(Rejection::EyesNotTwo)),
        };
        if a.intersects(&b) {
            return Ok(Err(Rejection::EyesOverlap));
        }
        let (left_eye, right_eye) = if a.center_x2() <= b.center_x2() { (a, b) } else { (b, a) };
        if left_eye.center_x2() == right_eye.center_x2() {
            // stacked vertically with no horizontal order: not a pair of eyes
            return Ok(Err(Rejection::EyesOverlap));
        }
        Ok(Ok(FaceLandmarks { face, left_eye, right_eye }))
    }
}

/// One-shot form of [`FaceEyeDetector::detect`] with default parameters.
pub fn detect_face_then_eyes(
    face_model: &CascadeModel,
    eye_model: &CascadeModel,
    img: &GrayImage,
) -> Result<Result<FaceLandmarks, Rejection>, CascadeError> {
    FaceEyeDetector::new(face_model.clone(), eye_model.clone(), LandmarkParams::default())?.detect(img)
}
