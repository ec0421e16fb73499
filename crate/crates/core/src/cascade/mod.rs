//! Boosted cascade classifiers: XML parsing, window evaluation, multiscale
//! sliding-window detection and the face-then-eyes landmark pass.

mod detect;
mod eval;
mod landmarks;
mod model;
mod parse;

use thiserror::Error;

use crate::imaging::ImagingError;

pub use detect::{
    detect_multiscale, detect_multiscale_integral, group_rectangles, partition, scale_ladder, similar, stride_at,
    DetectParams, Detection,
};
pub use eval::{eval_haar_window, eval_lbp_window, scale_rect, window_features, WindowOutcome};
pub use landmarks::{detect_face_then_eyes, FaceEyeDetector, FaceLandmarks, LandmarkParams, Rejection};
pub use model::{CascadeModel, FeatureKind, Features, HaarFeature, LbpFeature, Split, Stage, Stump, WeightedRect};
pub use parse::parse_cascade;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("malformed cascade: {0}")]
    Malformed(String),
    #[error("unsupported cascade feature: {0}")]
    Unsupported(String),
    #[error("invalid cascade: {0}")]
    Invalid(String),
    #[error("expected a {expected} cascade, got {actual}")]
    WrongKind { expected: FeatureKind, actual: FeatureKind },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}
