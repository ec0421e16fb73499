use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    conv_backward, conv_forward, fc_backward, fc_forward, pool_backward, pool_forward, relu_backward, relu_forward,
    softmax, ConvGeom, PoolGeom,
};
use super::spec::{LayerSpec, NetworkSpec};
use super::tensor::{push_scaled, Tensor};
use super::{CnnError, Real};
use crate::dataset::Label;
use crate::imaging::GrayImage;

/// Weights (row-major, see [`NetworkSpec::param_shape`]) and biases of one layer.
/// Layers without parameters hold empty vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Real> LayerParams<F> {
    fn zeros_for(spec: &NetworkSpec, i: usize) -> Self {
        match spec.param_shape(i) {
            Some((w, b)) => LayerParams {
                weights: vec![F::zero(); w.iter().product()],
                bias: vec![F::zero(); b],
            },
            None => LayerParams {
                weights: Vec::new(),
                bias: Vec::new(),
            },
        }
    }

    fn cast<G: Real>(&self) -> LayerParams<G> {
        let c = |v: &Vec<F>| v.iter().map(|x| G::from(*x).expect("finite cast")).collect();
        LayerParams {
            weights: c(&self.weights),
            bias: c(&self.bias),
        }
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Parameter gradients, aligned with the layers of a spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub layers: Vec<LayerParams<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Gradients {
            layers: (0..spec.layers().len()).map(|i| LayerParams::zeros_for(spec, i)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<F>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += *y;
            }
        }
    }

    /// Every gradient value, layer by layer, weights before biases.
    pub fn flat(&self) -> Vec<F> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// Network parameters, momentum buffers and the initialization seed.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<F = f32> {
    spec: NetworkSpec,
    params: Vec<LayerParams<F>>,
    velocity: Vec<LayerParams<F>>,
    seed: u64,
}

fn require_classifier(spec: &NetworkSpec) -> Result<usize, CnnError> {
    match spec.classes() {
        Some(c @ 2..=3) => Ok(c),
        Some(c) => Err(CnnError::Spec(format!("classifier must have 2 or 3 classes, not {c}"))),
        None => Err(CnnError::Spec("network must end in a softmax output".into())),
    }
}

impl<F: Real> NetworkState<F> {
    /// Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self, CnnError> {
        let mut state = NetworkState::zeros(spec)?;
        state.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..state.spec.layers().len() {
            let Some((wdims, _)) = state.spec.param_shape(i) else { continue };
            let (fan_in, fan_out) = match state.spec.layers()[i] {
                LayerSpec::Conv { filters, kernel, .. } => (wdims[1] * kernel * kernel, filters * kernel * kernel),
                _ => (wdims[1], wdims[0]),
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in state.params[i].weights.iter_mut() {
                *w = F::from(rng.random_range(-bound..bound)).expect("finite");
            }
        }
        Ok(state)
    }

    /// All parameters zero.
    pub fn zeros(spec: NetworkSpec) -> Result<Self, CnnError> {
        require_classifier(&spec)?;
        let params: Vec<_> = (0..spec.layers().len()).map(|i| LayerParams::zeros_for(&spec, i)).collect();
        Ok(NetworkState {
            velocity: params.clone(),
            params,
            spec,
            seed: 0,
        })
    }

    pub(crate) fn from_parts(spec: NetworkSpec, params: Vec<LayerParams<F>>, seed: u64) -> Result<Self, CnnError> {
        let mut state = NetworkState::zeros(spec)?;
        for (i, (have, want)) in params.iter().zip(&state.params).enumerate() {
            if have.weights.len() != want.weights.len() || have.bias.len() != want.bias.len() {
                return Err(CnnError::ShapeMismatch(format!("layer {i} parameter sizes differ")));
            }
        }
        if params.len() != state.params.len() {
            return Err(CnnError::ShapeMismatch("layer count differs".into()));
        }
        state.params = params;
        state.seed = seed;
        Ok(state)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn classes(&self) -> usize {
        self.spec.classes().expect("validated classifier")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[LayerParams<F>] {
        &self.params
    }

    /// Mutable parameters; lengths must be preserved.
    pub fn params_mut(&mut self) -> &mut [LayerParams<F>] {
        &mut self.params
    }

    pub fn velocity(&self) -> &[LayerParams<F>] {
        &self.velocity
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(LayerParams::len).sum()
    }

    /// Copy into another float type (for example a 64-bit shadow of a 32-bit state).
    pub fn cast<G: Real>(&self) -> NetworkState<G> {
        NetworkState {
            spec: self.spec.clone(),
            params: self.params.iter().map(LayerParams::cast).collect(),
            velocity: self.velocity.iter().map(LayerParams::cast).collect(),
            seed: self.seed,
        }
    }

    fn conv_geom(&self, i: usize) -> ConvGeom {
        let LayerSpec::Conv { filters, kernel, stride } = self.spec.layers()[i] else { unreachable!() };
        let (inp, out) = (self.spec.shape_in(i), self.spec.shape_in(i + 1));
        ConvGeom { c: inp.c, h: inp.h, w: inp.w, f: filters, k: kernel, s: stride, oh: out.h, ow: out.w }
    }

    fn pool_geom(&self, i: usize) -> PoolGeom {
        let LayerSpec::MaxPool { size, stride } = self.spec.layers()[i] else { unreachable!() };
        let (inp, out) = (self.spec.shape_in(i), self.spec.shape_in(i + 1));
        PoolGeom { c: inp.c, h: inp.h, w: inp.w, size, s: stride, oh: out.h, ow: out.w }
    }

    /// One sample through every layer. `masks` holds scaled dropout masks
    /// (train mode); `None` makes dropout the identity.
    pub(crate) fn forward_sample(&self, x: &[F], masks: Option<&Masks<F>>, tr: &mut Trace<F>) {
        tr.acts[0].copy_from_slice(x);
        for (i, layer) in self.spec.layers().iter().enumerate() {
            let (before, after) = tr.acts.split_at_mut(i + 1);
            let (inp, out) = (&before[i], &mut after[0]);
            let p = &self.params[i];
            match *layer {
                LayerSpec::Conv { .. } => {
                    conv_forward(&self.conv_geom(i), inp, &p.weights, &p.bias, &mut tr.cols[i], out)
                }
                LayerSpec::MaxPool { .. } => pool_forward(&self.pool_geom(i), inp, out, &mut tr.argmax[i]),
                LayerSpec::Relu => relu_forward(inp, out),
                LayerSpec::Dropout { .. } => match masks {
                    Some(m) => {
                        for ((o, &v), &k) in out.iter_mut().zip(inp.iter()).zip(&m[i]) {
                            *o = v * k;
                        }
                    }
                    None => out.copy_from_slice(inp),
                },
                LayerSpec::Fc { .. } => fc_forward(inp, &p.weights, &p.bias, out),
                LayerSpec::SoftmaxOut { .. } => {
                    fc_forward(inp, &p.weights, &p.bias, &mut tr.logits);
                    let (max, lse) = softmax(&tr.logits, out);
                    tr.shift = max + lse;
                }
            }
        }
    }

    /// Accumulate the gradient of `loss / denom` for one traced sample.
    pub(crate) fn backward_sample(
        &self,
        tr: &Trace<F>,
        masks: Option<&Masks<F>>,
        label: usize,
        denom: F,
        grads: &mut Gradients<F>,
        scratch: &mut Scratch<F>,
    ) {
        let layers = self.spec.layers();
        let last = layers.len() - 1;
        let (cur, next, dcols) = (&mut scratch.a, &mut scratch.b, &mut scratch.dcols);
        cur.clear();
        cur.extend(tr.acts[last + 1].iter().enumerate().map(|(c, &p)| {
            let t = if c == label { F::one() } else { F::zero() };
            (p - t) / denom
        }));
        for i in (0..=last).rev() {
            let inp = &tr.acts[i];
            let out = &tr.acts[i + 1];
            let need_dx = i > 0;
            if !need_dx && !layers[i].is_learnable() {
                break;
            }
            if need_dx {
                // every layer overwrites its whole input gradient
                next.resize(inp.len(), F::zero());
            }
            let g = &mut grads.layers[i];
            let p = &self.params[i];
            match layers[i] {
                LayerSpec::Conv { .. } => conv_backward(
                    &self.conv_geom(i),
                    &tr.cols[i],
                    &p.weights,
                    cur,
                    &mut g.weights,
                    &mut g.bias,
                    need_dx.then_some((next.as_mut_slice(), &mut *dcols)),
                ),
                LayerSpec::MaxPool { .. } => pool_backward(cur, &tr.argmax[i], next),
                LayerSpec::Relu => relu_backward(out, cur, next),
                LayerSpec::Dropout { .. } => match masks {
                    Some(m) => {
                        for ((d, &c), &k) in next.iter_mut().zip(cur.iter()).zip(&m[i]) {
                            *d = c * k;
                        }
                    }
                    None => next.copy_from_slice(cur),
                },
                LayerSpec::Fc { .. } | LayerSpec::SoftmaxOut { .. } => fc_backward(
                    inp,
                    &p.weights,
                    cur,
                    &mut g.weights,
                    &mut g.bias,
                    need_dx.then_some(next.as_mut_slice()),
                ),
            }
            std::mem::swap(cur, next);
        }
    }

    fn check_batch(&self, batch: &Tensor<F>) -> Result<(), CnnError> {
        let inp = self.spec.input();
        let ok = match batch.dims() {
            [_, c, h, w] => (*c, *h, *w) == (inp.c, inp.h, inp.w),
            [_, n] => *n == inp.len(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(CnnError::Shape(format!("batch extents {:?} do not match input {inp:?}", batch.dims())))
        }
    }
}

/// Scaled dropout masks for one sample, indexed by layer (empty for non-dropout layers).
pub type Masks<F> = Vec<Vec<F>>;

/// Activations of one sample.
#[derive(Debug, Clone)]
pub struct Trace<F> {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<F>>,
    argmax: Vec<Vec<u32>>,
    /// Unfolded conv inputs.
    cols: Vec<Vec<F>>,
    logits: Vec<F>,
    /// max + log-sum-exp of the logits
    shift: F,
}

impl<F: Real> Trace<F> {
    pub(crate) fn new(spec: &NetworkSpec) -> Self {
        let n = spec.layers().len();
        let acts = (0..=n).map(|i| vec![F::zero(); spec.shape_in(i).len()]).collect();
        let argmax = (0..n)
            .map(|i| match spec.layers()[i] {
                LayerSpec::MaxPool { .. } => vec![0; spec.shape_in(i + 1).len()],
                _ => Vec::new(),
            })
            .collect();
        let cols = (0..n)
            .map(|i| match spec.layers()[i] {
                LayerSpec::Conv { kernel, .. } => {
                    vec![F::zero(); spec.shape_in(i).c * kernel * kernel * spec.shape_in(i + 1).h * spec.shape_in(i + 1).w]
                }
                _ => Vec::new(),
            })
            .collect();
        Trace {
            acts,
            argmax,
            cols,
            logits: vec![F::zero(); spec.output().len()],
            shift: F::zero(),
        }
    }

    /// Output of layer `i`.
    pub fn activation(&self, i: usize) -> &[F] {
        &self.acts[i + 1]
    }

    pub fn logits(&self) -> &[F] {
        &self.logits
    }

    pub fn probabilities(&self) -> &[F] {
        self.acts.last().expect("output layer")
    }

    /// Cross-entropy `−ln p[label]`, computed from the logits.
    pub fn loss(&self, label: usize) -> F {
        self.shift - self.logits[label]
    }
}

#[derive(Debug, Default)]
pub(crate) struct Scratch<F> {
    a: Vec<F>,
    b: Vec<F>,
    dcols: Vec<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-sample traces kept for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    traces: Vec<Trace<F>>,
    masks: Option<Vec<Masks<F>>>,
}

impl<F: Real> ForwardCache<F> {
    pub fn traces(&self) -> &[Trace<F>] {
        &self.traces
    }

    /// Mean cross-entropy over the batch.
    pub fn mean_loss(&self, labels: &[usize]) -> F {
        let n = F::from(self.traces.len()).expect("batch size");
        self.traces.iter().zip(labels).fold(F::zero(), |a, (t, &l)| a + t.loss(l)) / n
    }
}

/// Draw inverted-dropout masks (0 or 1/(1−p)) for `n` samples.
pub fn draw_masks<F: Real, R: Rng + ?Sized>(spec: &NetworkSpec, n: usize, rng: &mut R) -> Vec<Masks<F>> {
    (0..n)
        .map(|_| {
            spec.layers()
                .iter()
                .enumerate()
                .map(|(i, l)| match *l {
                    LayerSpec::Dropout { p } => {
                        let keep = F::from(1.0 / (1.0 - p)).expect("finite");
                        (0..spec.shape_in(i).len())
                            .map(|_| if rng.random::<f64>() < p { F::zero() } else { keep })
                            .collect()
                    }
                    _ => Vec::new(),
                })
                .collect()
        })
        .collect()
}

/// Batch forward. Train mode draws fresh dropout masks from `rng`.
pub fn forward<F: Real, R: Rng + ?Sized>(
    state: &NetworkState<F>,
    batch: &Tensor<F>,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<F>, ForwardCache<F>), CnnError> {
    let masks = match mode {
        Mode::Train => Some(draw_masks(&state.spec, batch.batch(), rng)),
        Mode::Infer => None,
    };
    forward_with_masks(state, batch, masks)
}

/// Batch forward with caller-supplied dropout masks (`None` = infer mode).
pub fn forward_with_masks<F: Real>(
    state: &NetworkState<F>,
    batch: &Tensor<F>,
    masks: Option<Vec<Masks<F>>>,
) -> Result<(Tensor<F>, ForwardCache<F>), CnnError> {
    state.check_batch(batch)?;
    let n = batch.batch();
    if let Some(m) = &masks {
        if m.len() != n {
            return Err(CnnError::Shape(format!("{} masks for a batch of {n}", m.len())));
        }
    }
    let classes = state.classes();
    let mut probs = Vec::with_capacity(n * classes);
    let mut traces = Vec::with_capacity(n);
    for i in 0..n {
        let mut tr = Trace::new(&state.spec);
        state.forward_sample(batch.sample(i), masks.as_ref().map(|m| &m[i]), &mut tr);
        probs.extend_from_slice(tr.probabilities());
        traces.push(tr);
    }
    Ok((Tensor::new(vec![n, classes], probs)?, ForwardCache { traces, masks }))
}

/// Gradients of the mean cross-entropy over the cached batch.
pub fn backward<F: Real>(state: &NetworkState<F>, cache: &ForwardCache<F>, labels: &[usize]) -> Result<Gradients<F>, CnnError> {
    let n = cache.traces.len();
    if labels.len() != n {
        return Err(CnnError::Shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    let classes = state.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(CnnError::Label { label: bad, classes });
    }
    let mut grads = Gradients::zeros(&state.spec);
    let mut scratch = Scratch::default();
    let denom = F::from(n).expect("batch size");
    for (i, (tr, &l)) in cache.traces.iter().zip(labels).enumerate() {
        let m = cache.masks.as_ref().map(|m| &m[i]);
        state.backward_sample(tr, m, l, denom, &mut grads, &mut scratch);
    }
    Ok(grads)
}

/// `v ← momentum·v − lr·g; w ← w + v`
pub fn sgd_step<F: Real>(state: &mut NetworkState<F>, grads: &Gradients<F>, lr: F, momentum: F) {
    for ((p, v), g) in state.params.iter_mut().zip(state.velocity.iter_mut()).zip(&grads.layers) {
        for ((w, vel), &gr) in p.weights.iter_mut().zip(v.weights.iter_mut()).zip(&g.weights) {
            *vel = momentum * *vel - lr * gr;
            *w += *vel;
        }
        for ((w, vel), &gr) in p.bias.iter_mut().zip(v.bias.iter_mut()).zip(&g.bias) {
            *vel = momentum * *vel - lr * gr;
            *w += *vel;
        }
    }
}

/// Index of the largest probability; ties go to the smaller index.
pub fn argmax<F: Real>(probs: &[F]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Infer-mode class and probabilities for one image.
pub fn predict<F: Real>(state: &NetworkState<F>, img: &GrayImage) -> Result<(Label, Vec<F>), CnnError> {
    Ok(predict_batch(state, &[img])?.pop().expect("one result"))
}

pub fn predict_batch<F: Real>(state: &NetworkState<F>, images: &[&GrayImage]) -> Result<Vec<(Label, Vec<F>)>, CnnError> {
    let inp = state.spec.input();
    let mut tr = Trace::new(&state.spec);
    let mut x = Vec::with_capacity(inp.len());
    images
        .iter()
        .map(|img| {
            if inp.c != 1 || (img.width() as usize, img.height() as usize) != (inp.w, inp.h) {
                return Err(CnnError::Shape(format!(
                    "image {}x{} does not match input {inp:?}",
                    img.width(),
                    img.height()
                )));
            }
            x.clear();
            push_scaled(&mut x, img);
            state.forward_sample(&x, None, &mut tr);
            let p = tr.probabilities().to_vec();
            let label = Label::new(argmax(&p) as u8).expect("at most three classes");
            Ok((label, p))
        })
        .collect()
}
