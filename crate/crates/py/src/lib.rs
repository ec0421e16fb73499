//! Python bindings (`gazecnn`): images, cascade detection, datasets, the
//! reference network, training, evaluation and session helpers.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use gaze_core::cascade::{parse_cascade, FaceEyeDetector, LandmarkParams};
use gaze_core::cnn::{self, reference_spec, NetworkState, TrainConfig};
use gaze_core::composer::{compose_pair, quality_gate, GateOutcome};
use gaze_core::dataset::{synth_generate, Label, LabeledSet, SynthParams};
use gaze_core::evaluate::{evaluate as evaluate_set, run_kfold};
use gaze_core::imaging::{read_pnm, write_pgm};
use gaze_core::session::{self, SamplerConfig};
use gaze_core::{GrayImage, IntegralImage, Rect};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// 8-bit grayscale raster.
#[pyclass(name = "Image", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: GrayImage,
}

#[pymethods]
impl PyImage {
    /// Row-major samples, `width * height` bytes.
    #[new]
    fn new(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        Ok(PyImage { inner: GrayImage::new(width, height, data.to_vec()).map_err(value_err)? })
    }

    /// Decode a binary PGM or PPM (converted to gray).
    #[staticmethod]
    fn from_pnm(data: &[u8]) -> PyResult<Self> {
        Ok(PyImage { inner: read_pnm(data).map_err(value_err)?.into_gray() })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_pnm(&bytes)
    }

    fn to_pgm<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &write_pgm(&self.inner))
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.samples())
    }

    /// Sum of the samples in the rectangle, via the integral image.
    fn rect_sum(&self, x: u32, y: u32, w: u32, h: u32) -> PyResult<u64> {
        IntegralImage::new(&self.inner).rect_sum(&Rect::new(x, y, w, h)).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Face cascade (LBP) plus eye cascade (Haar), both OpenCV XML.
#[pyclass(name = "Detector", frozen)]
struct PyDetector {
    inner: FaceEyeDetector,
}

#[pymethods]
impl PyDetector {
    #[new]
    fn new(face_xml: &str, eye_xml: &str) -> PyResult<Self> {
        let face = parse_cascade(face_xml).map_err(value_err)?;
        let eyes = parse_cascade(eye_xml).map_err(value_err)?;
        Ok(PyDetector { inner: FaceEyeDetector::new(face, eyes, LandmarkParams::default()).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_files(face_path: PathBuf, eye_path: PathBuf) -> PyResult<Self> {
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display())));
        Self::new(&read(&face_path)?, &read(&eye_path)?)
    }

    /// `FACE x y w h EYES …` or `REJECT <reason>`.
    fn detect(&self, image: &PyImage) -> PyResult<String> {
        Ok(match self.inner.detect(&image.inner).map_err(value_err)? {
            Ok(lm) => lm.to_line(),
            Err(r) => format!("REJECT {r}"),
        })
    }

    /// The 72×72 pair-eye image of a frame, or None when the quality gate rejects it.
    fn pair_image(&self, image: &PyImage) -> PyResult<Option<PyImage>> {
        let detection = self.inner.detect(&image.inner).map_err(value_err)?;
        match quality_gate(&detection) {
            GateOutcome::Reject(_) => Ok(None),
            GateOutcome::Accept(lm) => {
                let pair = compose_pair(&image.inner, &lm, "", "").map_err(value_err)?;
                Ok(Some(PyImage { inner: pair.into_image() }))
            }
        }
    }
}

/// Labeled 72×72 pair-eye images with person ids.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: LabeledSet,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (seed, n, persons=20, mix=(1.0/3.0, 1.0/3.0, 1.0/3.0), easy=false))]
    fn synthetic(py: Python<'_>, seed: u64, n: usize, persons: usize, mix: (f64, f64, f64), easy: bool) -> PyResult<Self> {
        let mut params = SynthParams::new(n, [mix.0, mix.1, mix.2], persons);
        if easy {
            params = params.easy();
        }
        let inner = py.detach(|| synth_generate(seed, &params)).map_err(value_err)?;
        Ok(PyDataset { inner })
    }

    /// A dataset directory (with manifest.tsv) or a manifest file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: LabeledSet::load_path(&path).map_err(value_err)? })
    }

    /// Write images and manifest under `dir`; returns the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        self.inner.save(&dir).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn labels(&self) -> Vec<u8> {
        self.inner.labels().iter().map(|l| l.value()).collect()
    }

    fn persons(&self) -> Vec<String> {
        self.inner.manifest().samples().iter().map(|s| s.person_id.clone()).collect()
    }

    fn class_counts(&self) -> [usize; 3] {
        self.inner.manifest().class_counts()
    }

    fn image(&self, i: usize) -> PyResult<PyImage> {
        self.inner
            .images()
            .get(i)
            .map(|img| PyImage { inner: img.clone() })
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(format!("index {i} out of range")))
    }

    /// The 15 shifted and rotated variants of every sample.
    fn augmented(&self, py: Python<'_>) -> PyResult<Self> {
        Ok(PyDataset { inner: py.detach(|| self.inner.augmented()).map_err(value_err)? })
    }

    /// Drop the undetermined class.
    fn two_class(&self) -> Self {
        PyDataset { inner: self.inner.filter_classes(&[Label::RIGHT, Label::LEFT]).0 }
    }
}

/// The reference two-conv network.
#[pyclass(name = "Network", frozen)]
struct PyNetwork {
    inner: NetworkState<f32>,
}

#[pymethods]
impl PyNetwork {
    /// Freshly initialized weights.
    #[new]
    #[pyo3(signature = (classes=3, seed=0))]
    fn new(classes: usize, seed: u64) -> PyResult<Self> {
        let spec = reference_spec(classes).map_err(value_err)?;
        Ok(PyNetwork { inner: NetworkState::init(spec, seed).map_err(value_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (data, classes=3))]
    fn from_bytes(data: &[u8], classes: usize) -> PyResult<Self> {
        let spec = reference_spec(classes).map_err(value_err)?;
        Ok(PyNetwork { inner: cnn::load_weights(data, &spec).map_err(value_err)? })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &cnn::save_weights(&self.inner))
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// (class, probabilities) for a 72×72 image.
    fn predict(&self, image: &PyImage) -> PyResult<(u8, Vec<f32>)> {
        let (label, probs) = cnn::predict(&self.inner, &image.inner).map_err(value_err)?;
        Ok((label.value(), probs))
    }

    /// Infer-mode forward latency summary (dict).
    #[pyo3(signature = (repetitions=100))]
    fn benchmark(&self, py: Python<'_>, repetitions: usize) -> PyResult<Py<PyAny>> {
        let b = py.detach(|| session::benchmark(&self.inner, repetitions)).map_err(value_err)?;
        json_to_py(py, &serde_json::to_string(&b.summary).expect("summary serializes"))
    }
}

fn train_config(
    iterations: usize,
    batch: usize,
    learning_rate: f64,
    seed: u64,
    dropout: f64,
    lanes: usize,
) -> PyResult<TrainConfig> {
    let c = TrainConfig { iterations, batch, learning_rate, seed, dropout, lanes, ..TrainConfig::default() };
    c.validate().map_err(value_err)?;
    Ok(c)
}

/// Train the reference network; returns (network, per-iteration losses).
#[pyfunction]
#[pyo3(signature = (dataset, classes=3, iterations=6000, batch=100, learning_rate=0.01, seed=0, dropout=0.5, lanes=1))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    classes: usize,
    iterations: usize,
    batch: usize,
    learning_rate: f64,
    seed: u64,
    dropout: f64,
    lanes: usize,
) -> PyResult<(PyNetwork, Vec<f64>)> {
    let config = train_config(iterations, batch, learning_rate, seed, dropout, lanes)?;
    let spec = reference_spec(classes).map_err(value_err)?;
    let (state, report) = py.detach(|| cnn::train(&spec, &dataset.inner, None, &config)).map_err(value_err)?;
    Ok((PyNetwork { inner: state }, report.losses))
}

/// (accuracy, confusion counts) of a network on a dataset.
#[pyfunction]
fn evaluate(py: Python<'_>, network: &PyNetwork, dataset: &PyDataset) -> PyResult<(f64, Vec<Vec<u64>>)> {
    let (acc, m) = py.detach(|| evaluate_set(&network.inner, &dataset.inner)).map_err(value_err)?;
    Ok((acc, m.counts().to_vec()))
}

/// Person-disjoint k-fold cross-validation report (dict).
#[pyfunction]
#[pyo3(signature = (dataset, k=5, classes=3, iterations=6000, batch=100, learning_rate=0.01, seed=0, dropout=0.5, lanes=1))]
#[allow(clippy::too_many_arguments)]
fn kfold(
    py: Python<'_>,
    dataset: &PyDataset,
    k: usize,
    classes: usize,
    iterations: usize,
    batch: usize,
    learning_rate: f64,
    seed: u64,
    dropout: f64,
    lanes: usize,
) -> PyResult<Py<PyAny>> {
    let config = train_config(iterations, batch, learning_rate, seed, dropout, lanes)?;
    let spec = reference_spec(classes).map_err(value_err)?;
    let report = py
        .detach(|| run_kfold(&spec, &dataset.inner, k, &config, classes))
        .map_err(value_err)?;
    json_to_py(py, &report.to_json())
}

#[pyfunction]
#[pyo3(signature = (total_frames, skip=300, stride=15))]
fn sample_frames(total_frames: usize, skip: usize, stride: usize) -> PyResult<Vec<usize>> {
    Ok(session::sample_frames(total_frames, &SamplerConfig::new(skip, stride).map_err(value_err)?))
}

/// Learnable parameters of the reference network.
#[pyfunction]
fn param_count(classes: usize) -> PyResult<usize> {
    Ok(cnn::param_count(&reference_spec(classes).map_err(value_err)?))
}

#[pymodule]
fn gazecnn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyDetector>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(kfold, m)?)?;
    m.add_function(wrap_pyfunction!(sample_frames, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    Ok(())
}
