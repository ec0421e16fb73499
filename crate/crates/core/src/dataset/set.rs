use std::fs;
use std::path::{Path, PathBuf};

use super::augment::{augment, VARIANTS};
use super::folds::FoldPlan;
use super::manifest::{filter_classes, load_manifest, save_manifest, Label, Manifest};
use super::DatasetError;
use crate::composer::{PairEyeImage, PAIR_SIDE};
use crate::imaging::{read_pnm, write_pgm, GrayImage};

/// File name used for the manifest inside a dataset directory.
pub const MANIFEST_FILE: &str = "manifest.tsv";

/// A manifest together with its decoded 72×72 images, index-aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    manifest: Manifest,
    images: Vec<GrayImage>,
}

impl LabeledSet {
    pub fn new(manifest: Manifest, images: Vec<GrayImage>) -> Result<Self, DatasetError> {
        if manifest.len() != images.len() {
            return Err(DatasetError::Argument(format!(
                "{} samples but {} images",
                manifest.len(),
                images.len()
            )));
        }
        for (s, img) in manifest.samples().iter().zip(&images) {
            if img.width() != PAIR_SIDE || img.height() != PAIR_SIDE {
                return Err(DatasetError::Argument(format!(
                    "{} is {}x{}, expected 72x72",
                    s.image_path,
                    img.width(),
                    img.height()
                )));
            }
        }
        Ok(LabeledSet { manifest, images })
    }

    /// Read every image of `manifest`, resolving relative paths against `root`.
    pub fn load(manifest: Manifest, root: &Path) -> Result<Self, DatasetError> {
        let images = manifest
            .samples()
            .iter()
            .map(|s| {
                let path = root.join(&s.image_path);
                let bytes = fs::read(&path).map_err(|e| DatasetError::Io { path: path.clone(), source: e })?;
                let img = read_pnm(&bytes).map_err(|e| DatasetError::Image { path, source: e })?;
                Ok(img.into_gray())
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        LabeledSet::new(manifest, images)
    }

    /// Load `dir/manifest.tsv` and its images, or a manifest file and the images next to it.
    pub fn load_path(path: &Path) -> Result<Self, DatasetError> {
        let (file, root) = if path.is_dir() {
            (path.join(MANIFEST_FILE), path.to_path_buf())
        } else {
            (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
        };
        let text = fs::read_to_string(&file).map_err(|e| DatasetError::Io { path: file.clone(), source: e })?;
        LabeledSet::load(load_manifest(&text)?, &root)
    }

    /// Write the images under `dir` by their manifest paths, then `dir/manifest.tsv`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, DatasetError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |e| DatasetError::Io { path, source: e }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (s, img) in self.manifest.samples().iter().zip(&self.images) {
            let path = dir.join(&s.image_path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::write(&path, write_pgm(img)).map_err(io(&path))?;
        }
        let mpath = dir.join(MANIFEST_FILE);
        fs::write(&mpath, save_manifest(&self.manifest)).map_err(io(&mpath))?;
        Ok(mpath)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn label(&self, i: usize) -> Label {
        self.manifest.samples()[i].label
    }

    pub fn labels(&self) -> Vec<Label> {
        self.manifest.samples().iter().map(|s| s.label).collect()
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let samples = indices.iter().map(|&i| self.manifest.samples()[i].clone()).collect();
        let images = indices.iter().map(|&i| self.images[i].clone()).collect();
        LabeledSet::new(self.manifest.with_samples(samples)?, images)
    }

    pub fn filter_classes(&self, keep: &[Label]) -> (Self, Option<String>) {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.label(i))).collect();
        let (_, warning) = filter_classes(&self.manifest, keep);
        (self.subset(&idx).expect("subset of a valid set"), warning)
    }

    /// Every sample expanded into its augmentation variants, in manifest order.
    pub fn augmented(&self) -> Result<Self, DatasetError> {
        let mut samples = Vec::with_capacity(self.len() * VARIANTS);
        let mut images = Vec::with_capacity(self.len() * VARIANTS);
        for (s, img) in self.manifest.samples().iter().zip(&self.images) {
            let pair = PairEyeImage::new(img.clone(), s.image_path.clone(), s.person_id.clone())
                .map_err(|e| DatasetError::Argument(e.to_string()))?;
            for (vs, vi) in augment(s, &pair) {
                samples.push(vs);
                images.push(vi.into_image());
            }
        }
        LabeledSet::new(self.manifest.with_samples(samples)?, images)
    }

    /// (train, test) for fold `fold`: test holds the persons assigned to it.
    pub fn fold_split(&self, plan: &FoldPlan, fold: usize) -> Result<(Self, Self), DatasetError> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, s) in self.manifest.samples().iter().enumerate() {
            match plan.fold_of(&s.person_id) {
                Some(f) if f == fold => test.push(i),
                Some(_) => train.push(i),
                None => {
                    return Err(DatasetError::Argument(format!("person {:?} has no fold", s.person_id)));
                }
            }
        }
        Ok((self.subset(&train)?, self.subset(&test)?))
    }
}
