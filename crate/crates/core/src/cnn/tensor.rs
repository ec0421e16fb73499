use super::{CnnError, Real};
use crate::imaging::GrayImage;

/// Dense row-major array of up to four extents (batch, channels, height, width).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F = f32> {
    dims: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn new(dims: Vec<usize>, data: Vec<F>) -> Result<Self, CnnError> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(CnnError::Shape(format!("tensors have 1 to 4 extents, got {}", dims.len())));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(CnnError::Shape(format!("extents {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self, CnnError> {
        let n = dims.iter().product();
        Tensor::new(dims, vec![F::zero(); n])
    }

    /// N×1×H×W batch with pixels scaled to [0, 1]. All images must share one size.
    pub fn from_images(images: &[&GrayImage]) -> Result<Self, CnnError> {
        let first = images.first().ok_or_else(|| CnnError::Shape("empty image batch".into()))?;
        let (w, h) = (first.width() as usize, first.height() as usize);
        let mut data = Vec::with_capacity(images.len() * w * h);
        for img in images {
            if (img.width() as usize, img.height() as usize) != (w, h) {
                return Err(CnnError::Shape(format!(
                    "image {}x{} in a batch of {w}x{h}",
                    img.width(),
                    img.height()
                )));
            }
            push_scaled(&mut data, img);
        }
        Tensor::new(vec![images.len(), 1, h, w], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Leading extent.
    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    /// Values per leading index.
    pub fn sample_len(&self) -> usize {
        self.dims[1..].iter().product()
    }

    pub fn sample(&self, i: usize) -> &[F] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Append `img` scaled to [0, 1].
pub(crate) fn push_scaled<F: Real>(out: &mut Vec<F>, img: &GrayImage) {
    let inv = F::from(1.0 / 255.0).expect("representable");
    out.extend(img.samples().iter().map(|&v| F::from(v).expect("u8 fits") * inv));
}
