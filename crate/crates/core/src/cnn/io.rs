//! Weight files: `GZCNN1`, then a little-endian payload (layer count; per
//! learnable layer a kind tag, its weight extents, weights and biases as
//! f32), then the CRC-32 of the payload.

use super::network::{LayerParams, NetworkState};
use super::spec::{LayerSpec, NetworkSpec};
use super::CnnError;

pub const MAGIC: &[u8; 6] = b"GZCNN1";

fn tag(layer: &LayerSpec) -> Option<u8> {
    match layer {
        LayerSpec::Conv { .. } => Some(1),
        LayerSpec::Fc { .. } => Some(2),
        LayerSpec::SoftmaxOut { .. } => Some(3),
        _ => None,
    }
}

pub fn save_weights(state: &NetworkState<f32>) -> Vec<u8> {
    let spec = state.spec();
    let learnable: Vec<usize> = (0..spec.layers().len()).filter(|&i| spec.layers()[i].is_learnable()).collect();
    let mut payload = Vec::with_capacity(state.param_count() * 4 + 64);
    payload.extend_from_slice(&(learnable.len() as u32).to_le_bytes());
    for &i in &learnable {
        let (dims, _) = spec.param_shape(i).expect("learnable");
        payload.push(tag(&spec.layers()[i]).expect("learnable"));
        payload.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            payload.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let p = &state.params()[i];
        for v in p.weights.iter().chain(&p.bias) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 10);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CnnError> {
        if self.buf.len() - self.pos < n {
            return Err(CnnError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CnnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, CnnError> {
        let bytes = self.take(n.checked_mul(4).ok_or(CnnError::Truncated)?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

/// Parse a weight file against `spec`. Velocity buffers start at zero.
pub fn load_weights(bytes: &[u8], spec: &NetworkSpec) -> Result<NetworkState<f32>, CnnError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CnnError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(CnnError::Truncated);
    }
    let payload = &bytes[MAGIC.len()..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(CnnError::Checksum { stored, actual });
    }
    let mut r = Reader { buf: payload, pos: 0 };
    let learnable: Vec<usize> = (0..spec.layers().len()).filter(|&i| spec.layers()[i].is_learnable()).collect();
    let count = r.u32()? as usize;
    if count != learnable.len() {
        return Err(CnnError::ShapeMismatch(format!(
            "file has {count} learnable layers, spec has {}",
            learnable.len()
        )));
    }
    let mut params: Vec<LayerParams<f32>> = (0..spec.layers().len())
        .map(|_| LayerParams { weights: Vec::new(), bias: Vec::new() })
        .collect();
    for &i in &learnable {
        let (want, blen) = spec.param_shape(i).expect("learnable");
        let t = r.take(1)?[0];
        if Some(t) != tag(&spec.layers()[i]) {
            return Err(CnnError::ShapeMismatch(format!("layer {i}: kind tag {t} does not match the spec")));
        }
        let nd = r.u32()? as usize;
        if nd > 4 {
            return Err(CnnError::ShapeMismatch(format!("layer {i}: {nd} extents")));
        }
        let dims = (0..nd).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims != want {
            return Err(CnnError::ShapeMismatch(format!("layer {i}: file extents {dims:?}, spec {want:?}")));
        }
        params[i].weights = r.f32s(dims.iter().product())?;
        params[i].bias = r.f32s(blen)?;
    }
    if r.pos != payload.len() {
        return Err(CnnError::ShapeMismatch(format!("{} trailing payload bytes", payload.len() - r.pos)));
    }
    NetworkState::from_parts(spec.clone(), params, 0)
}
