use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{draw_masks, predict_batch, sgd_step, Gradients, Masks, NetworkState, Scratch, Trace};
use super::spec::NetworkSpec;
use super::tensor::push_scaled;
use super::CnnError;
use crate::dataset::LabeledSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplier applied every `lr_step` iterations.
    pub lr_decay: f64,
    pub lr_step: usize,
    /// Probability for every dropout layer of the spec.
    pub dropout: f64,
    pub seed: u64,
    /// Validation accuracy is measured every this many iterations.
    pub val_every: usize,
    /// Threads sharing each batch. Results are bit-reproducible for a fixed lane count.
    pub lanes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 6000,
            batch: 100,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay: 0.1,
            lr_step: 4000,
            dropout: 0.5,
            seed: 0,
            val_every: 500,
            lanes: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CnnError> {
        let bad = |m: String| Err(CnnError::Argument(m));
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.lr_decay.is_finite() && self.lr_decay > 0.0) || self.lr_step == 0 {
            return bad("lr decay must be positive with a positive step".into());
        }
        if self.lanes == 0 || self.val_every == 0 {
            return bad("lanes and val_every must be at least 1".into());
        }
        Ok(())
    }

    /// Learning rate for 0-based iteration `it`.
    pub fn lr_at(&self, it: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((it / self.lr_step) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean batch loss per iteration.
    pub losses: Vec<f64>,
    /// (1-based iteration, accuracy in [0, 1]).
    pub val_accuracy: Vec<(usize, f64)>,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    /// `{"iter": n, "loss": x}` per iteration, `{"iter": n, "val_acc": y}` after each validation.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let mut val = self.val_accuracy.iter().peekable();
        for (i, loss) in self.losses.iter().enumerate() {
            let it = i + 1;
            out.push_str(&serde_json::json!({"iter": it, "loss": loss}).to_string());
            out.push('\n');
            while let Some((vi, acc)) = val.next_if(|(vi, _)| *vi == it) {
                out.push_str(&serde_json::json!({"iter": vi, "val_acc": acc}).to_string());
                out.push('\n');
            }
        }
        out
    }
}

/// Fraction of `set` classified correctly.
pub fn accuracy(state: &NetworkState<f32>, set: &LabeledSet) -> Result<f64, CnnError> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let imgs: Vec<_> = set.images().iter().collect();
    let preds = predict_batch(state, &imgs)?;
    let correct = preds.iter().zip(set.labels()).filter(|((p, _), l)| p == l).count();
    Ok(correct as f64 / set.len() as f64)
}

/// Endless shuffled index stream; a batch that runs past the end continues
/// from a fresh permutation.
struct Sampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(n: usize, rng: ChaCha8Rng) -> Self {
        Sampler {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    fn next_batch(&mut self, b: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(b);
        while out.len() < b {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Sum of per-sample gradients of `loss / denom` and the summed loss for
/// samples `range` of the batch.
fn chunk_gradients(
    state: &NetworkState<f32>,
    set: &LabeledSet,
    idx: &[usize],
    masks: &[Masks<f32>],
    denom: f32,
) -> (Gradients<f32>, f64) {
    let spec = state.spec();
    let mut grads = Gradients::zeros(spec);
    let mut tr = Trace::new(spec);
    let mut scratch = Scratch::default();
    let mut x = Vec::with_capacity(spec.input().len());
    let mut loss = 0.0;
    for (&i, m) in idx.iter().zip(masks) {
        x.clear();
        push_scaled(&mut x, &set.images()[i]);
        state.forward_sample(&x, Some(m), &mut tr);
        let label = set.label(i).index();
        loss += tr.loss(label) as f64;
        state.backward_sample(&tr, Some(m), label, denom, &mut grads, &mut scratch);
    }
    (grads, loss)
}

fn batch_gradients(
    state: &NetworkState<f32>,
    set: &LabeledSet,
    idx: &[usize],
    masks: &[Masks<f32>],
    lanes: usize,
) -> (Gradients<f32>, f64) {
    let denom = idx.len() as f32;
    if lanes <= 1 || idx.len() < 2 {
        return chunk_gradients(state, set, idx, masks, denom);
    }
    let per = idx.len().div_ceil(lanes);
    let parts: Vec<(Gradients<f32>, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = idx
            .chunks(per)
            .zip(masks.chunks(per))
            .map(|(ic, mc)| s.spawn(move || chunk_gradients(state, set, ic, mc, denom)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("lane panicked")).collect()
    });
    let mut it = parts.into_iter();
    let (mut total, mut loss) = it.next().expect("at least one lane");
    for (g, l) in it {
        total.add_assign(&g);
        loss += l;
    }
    (total, loss)
}

/// Minibatch SGD with momentum from a seeded initialization.
///
/// Deterministic for a given seed and lane count. A non-finite batch loss
/// aborts with [`CnnError::Diverged`].
pub fn train(
    spec: &NetworkSpec,
    train_set: &LabeledSet,
    val_set: Option<&LabeledSet>,
    config: &TrainConfig,
) -> Result<(NetworkState<f32>, TrainReport), CnnError> {
    config.validate()?;
    let start = Instant::now();
    let spec = spec.with_dropout(config.dropout)?;
    let mut state = NetworkState::<f32>::init(spec.clone(), config.seed)?;
    let classes = state.classes();
    let inp = spec.input();
    for set in std::iter::once(train_set).chain(val_set) {
        for (s, img) in set.manifest().samples().iter().zip(set.images()) {
            if s.label.index() >= classes {
                return Err(CnnError::Label { label: s.label.index(), classes });
            }
            if inp.c != 1 || (img.width() as usize, img.height() as usize) != (inp.w, inp.h) {
                return Err(CnnError::Shape(format!("{} does not match input {inp:?}", s.image_path)));
            }
        }
    }
    let mut report = TrainReport {
        losses: Vec::with_capacity(config.iterations),
        val_accuracy: Vec::new(),
        wall_clock_secs: 0.0,
    };
    if config.iterations > 0 && train_set.is_empty() {
        return Err(CnnError::Argument("training set is empty".into()));
    }
    let mut sampler = Sampler::new(train_set.len(), rng_stream(config.seed, 1));
    let mut dropout_rng = rng_stream(config.seed, 2);
    for it in 0..config.iterations {
        let idx = sampler.next_batch(config.batch);
        let masks = draw_masks::<f32, _>(&spec, idx.len(), &mut dropout_rng);
        let (grads, loss_sum) = batch_gradients(&state, train_set, &idx, &masks, config.lanes);
        let loss = loss_sum / idx.len() as f64;
        let lr = config.lr_at(it);
        if !loss.is_finite() {
            return Err(CnnError::Diverged { iteration: it + 1, loss, lr });
        }
        sgd_step(&mut state, &grads, lr as f32, config.momentum as f32);
        report.losses.push(loss);
        if let Some(val) = val_set {
            if (it + 1) % config.val_every == 0 {
                report.val_accuracy.push((it + 1, accuracy(&state, val)?));
            }
        }
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::reference_spec;
    use crate::dataset::{synth_generate, SynthParams};

    #[test]
    fn zero_iterations_returns_init() {
        let set = synth_generate(1, &SynthParams::new(4, [0.5, 0.5, 0.0], 2)).unwrap();
        let spec = reference_spec(2).unwrap();
        let cfg = TrainConfig { iterations: 0, ..TrainConfig::default() };
        let (st, rep) = train(&spec, &set, None, &cfg).unwrap();
        assert!(rep.losses.is_empty());
        assert_eq!(st, NetworkState::init(spec.with_dropout(0.5).unwrap(), 0).unwrap());
    }

    #[test]
    fn sampler_wraps_with_full_batches() {
        let mut s = Sampler::new(5, rng_stream(0, 1));
        let a = s.next_batch(3);
        let b = s.next_batch(3);
        assert_eq!((a.len(), b.len()), (3, 3));
        let mut first_epoch: Vec<usize> = a.iter().chain(&b[..2]).copied().collect();
        first_epoch.sort();
        assert_eq!(first_epoch, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn lr_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 0.01);
        assert_eq!(c.lr_at(3999), 0.01);
        assert!((c.lr_at(4000) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { batch: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { dropout: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lanes: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn divergence_is_reported() {
        let set = synth_generate(1, &SynthParams::new(20, [0.5, 0.5, 0.0], 2)).unwrap();
        let cfg = TrainConfig {
            iterations: 50,
            batch: 10,
            learning_rate: 1.0,
            lr_decay: 1e4,
            lr_step: 1,
            ..TrainConfig::default()
        };
        match train(&reference_spec(2).unwrap(), &set, None, &cfg) {
            Err(CnnError::Diverged { iteration, .. }) => assert!(iteration >= 2),
            other => panic!("expected divergence, got {:?}", other.map(|r| r.1.losses)),
        }
    }

    #[test]
    fn three_class_data_rejected_by_two_class_spec() {
        let set = synth_generate(1, &SynthParams::new(9, [0.3, 0.3, 0.4], 2)).unwrap();
        let cfg = TrainConfig { iterations: 1, ..TrainConfig::default() };
        assert!(matches!(
            train(&reference_spec(2).unwrap(), &set, None, &cfg),
            Err(CnnError::Label { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn json_lines_interleave() {
        let r = TrainReport { losses: vec![1.0, 0.5], val_accuracy: vec![(2, 0.75)], wall_clock_secs: 0.0 };
        assert_eq!(
            r.to_json_lines(),
            "{\"iter\":1,\"loss\":1.0}\n{\"iter\":2,\"loss\":0.5}\n{\"iter\":2,\"val_acc\":0.75}\n"
        );
    }
}
