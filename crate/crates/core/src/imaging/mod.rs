//! Rasters, integral images, geometric transforms and PNM I/O.

mod image;
mod integral;
pub mod pnm;
mod transform;

use thiserror::Error;

pub use image::{to_grayscale, AnyImage, GrayImage, Rect, RgbImage};
pub use integral::{integral, IntegralImage};
pub use pnm::{read_pnm, write_pgm, write_pnm, PnmError, PnmFrames};
pub use transform::{crop, resize, rotate, translate, MAX_ROTATION_DEGREES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("sample buffer has {actual} values, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("rectangle {rect:?} is outside the {width}x{height} image")]
    OutOfBounds { rect: Rect, width: u32, height: u32 },
    #[error("shift ({dx}, {dy}) must be smaller than the {width}x{height} image")]
    ShiftTooLarge { dx: i32, dy: i32, width: u32, height: u32 },
    #[error("rotation of {0} degrees is outside the supported range")]
    AngleOutOfRange(f64),
}
