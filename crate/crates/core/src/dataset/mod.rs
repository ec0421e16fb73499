//! Manifests, augmentation, person-disjoint folds and a synthetic generator.

mod augment;
mod folds;
mod manifest;
mod set;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use augment::{augment, augment_spec, variant_path, Transform, ROTATION_DEG, SHIFT_PX, VARIANTS};
pub use folds::{kfold_split, FoldPlan};
pub use manifest::{filter_classes, load_manifest, save_manifest, Label, Manifest, Sample, Source, NAME_KEY};
pub use set::{LabeledSet, MANIFEST_FILE};
pub use synth::{class_counts, synth_generate, Difficulty, SynthParams};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: crate::imaging::PnmError,
    },
}
