use serde::Serialize;

use super::manifest::Sample;
use crate::composer::PairEyeImage;
use crate::imaging::{rotate, translate, GrayImage};

/// Shift step for augmentation, in pixels.
pub const SHIFT_PX: i32 = 6;
/// Rotation step for augmentation, in degrees (positive = counter-clockwise).
pub const ROTATION_DEG: f64 = 10.0;
pub const VARIANTS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Transform {
    Identity,
    Shift { dx: i32, dy: i32 },
    Rotate { degrees: f64 },
    /// Shift first, then rotate.
    ShiftRotate { dx: i32, degrees: f64 },
}

impl Transform {
    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        // 72×72 inputs always satisfy the shift and angle guards
        match *self {
            Transform::Identity => img.clone(),
            Transform::Shift { dx, dy } => translate(img, dx, dy).expect("shift within guard"),
            Transform::Rotate { degrees } => rotate(img, degrees).expect("angle within guard"),
            Transform::ShiftRotate { dx, degrees } => {
                rotate(&translate(img, dx, 0).expect("shift within guard"), degrees).expect("angle within guard")
            }
        }
    }
}

/// The fixed 15-variant list, in output order: identity, the eight ±6 px
/// shifts, ±10° rotations, then the four rotate∘shift composites.
pub fn augment_spec() -> [Transform; VARIANTS] {
    let s = SHIFT_PX;
    let r = ROTATION_DEG;
    [
        Transform::Identity,
        Transform::Shift { dx: -s, dy: -s },
        Transform::Shift { dx: -s, dy: 0 },
        Transform::Shift { dx: -s, dy: s },
        Transform::Shift { dx: 0, dy: -s },
        Transform::Shift { dx: 0, dy: s },
        Transform::Shift { dx: s, dy: -s },
        Transform::Shift { dx: s, dy: 0 },
        Transform::Shift { dx: s, dy: s },
        Transform::Rotate { degrees: r },
        Transform::Rotate { degrees: -r },
        Transform::ShiftRotate { dx: s, degrees: r },
        Transform::ShiftRotate { dx: -s, degrees: r },
        Transform::ShiftRotate { dx: s, degrees: -r },
        Transform::ShiftRotate { dx: -s, degrees: -r },
    ]
}

/// `dir/p1_12_0.pgm` + 3 → `dir/p1_12_0_a03.pgm`
pub fn variant_path(path: &str, index: usize) -> String {
    let (stem, ext) = match path.rfind('.') {
        Some(dot) if !path[dot..].contains('/') => (&path[..dot], &path[dot..]),
        _ => (path, ""),
    };
    format!("{stem}_a{index:02}{ext}")
}

/// Expand one sample into its 15 variants; every variant keeps the label
/// and person and records the original path in `augmented_from`.
pub fn augment(sample: &Sample, img: &PairEyeImage) -> Vec<(Sample, PairEyeImage)> {
    augment_spec()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let s = Sample {
                image_path: variant_path(&sample.image_path, i),
                label: sample.label,
                person_id: sample.person_id.clone(),
                source: sample.source,
                augmented_from: Some(sample.augmented_from.clone().unwrap_or_else(|| sample.image_path.clone())),
            };
            let out = PairEyeImage::new(t.apply(img.image()), format!("{}a{i:02}", img.frame_id), img.person_id.clone())
                .expect("transforms preserve dimensions");
            (s, out)
        })
        .collect()
}
