//! Gaze-direction classification pipeline.
//!
//! Frames are converted to grayscale, a multi-block LBP cascade finds the
//! face, a Haar cascade finds the two eyes inside it, and both eye crops are
//! stacked into one 72×72 image that a small convolutional network labels as
//! right (0), left (1) or undetermined (2). Around that core sit the dataset
//! tooling (manifests, augmentation, person-disjoint folds, a synthetic
//! generator), evaluation protocols and session-level gaze reports.

pub mod cascade;
pub mod cnn;
pub mod composer;
pub mod dataset;
pub mod evaluate;
pub mod imaging;
pub mod session;

pub use imaging::{GrayImage, IntegralImage, Rect, RgbImage};
