//! Oracles shared by the integration tests and the acceptance suite.

#![allow(dead_code)]

use gaze_core::cnn::{forward_with_masks, backward, LayerSpec, NetworkSpec, NetworkState, Shape, Tensor, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The small network used for finite-difference checks.
pub fn gradcheck_spec() -> NetworkSpec {
    NetworkSpec::new(
        Shape::new(1, 12, 12),
        vec![
            LayerSpec::Conv { filters: 2, kernel: 3, stride: 1 },
            LayerSpec::MaxPool { size: 2, stride: 2 },
            LayerSpec::Relu,
            LayerSpec::Fc { units: 8 },
            LayerSpec::Relu,
            LayerSpec::SoftmaxOut { classes: 3 },
        ],
    )
    .expect("valid spec")
}

pub struct GradCheck {
    /// Relative error of every parameter, in layer order (weights then bias).
    pub rel_errors: Vec<f64>,
}

impl GradCheck {
    pub fn fraction_within(&self, tol: f64) -> f64 {
        self.rel_errors.iter().filter(|&&e| e <= tol).count() as f64 / self.rel_errors.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.rel_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn param(state: &mut NetworkState<f64>, layer: usize, which: usize, j: usize) -> &mut f64 {
    let p = &mut state.params_mut()[layer];
    if which == 0 {
        &mut p.weights[j]
    } else {
        &mut p.bias[j]
    }
}

/// A conv weight step moves a conv output by at most `h` (inputs lie in
/// [0, 1]), so pool winners need a top-two gap above `2h` and the ReLU after
/// the pool a margin above `2h`. FC pre-activations get a wider margin
/// because they sum many such moves.
fn clear_of_kinks(t: &Trace<f64>, h: f64) -> bool {
    let conv = t.activation(0);
    for c in 0..2 {
        for py in 0..5 {
            for px in 0..5 {
                let mut w: Vec<f64> = (0..4)
                    .map(|k| conv[c * 100 + (2 * py + k / 2) * 10 + 2 * px + k % 2])
                    .collect();
                w.sort_by(|a, b| b.total_cmp(a));
                if w[0] - w[1] <= 2.0 * h {
                    return false;
                }
            }
        }
    }
    t.activation(1).iter().all(|v| v.abs() > 2.0 * h) && t.activation(3).iter().all(|v| v.abs() > 50.0 * h)
}

fn mean_loss(state: &NetworkState<f64>, x: &Tensor<f64>, labels: &[usize]) -> f64 {
    let (_, cache) = forward_with_masks(state, x, None).expect("forward");
    cache.mean_loss(labels)
}

/// Compare analytic gradients against central differences with step `h` on a
/// random 64-bit network and batch.
pub fn gradient_check(seed: u64, batch: usize, h: f64) -> GradCheck {
    let spec = gradcheck_spec();
    let mut state = NetworkState::<f64>::init(spec.clone(), seed).expect("init");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    // Nudge biases off zero so ReLUs are not all sitting on their kink.
    for p in state.params_mut() {
        for b in &mut p.bias {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    // Central differences are meaningless across a ReLU or max-pool kink, so
    // each sample is redrawn until no kink lies within reach of a ±h step.
    let n = spec.input().len();
    let mut data = Vec::with_capacity(batch * n);
    while data.len() < batch * n {
        let sample: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let one = Tensor::new(vec![1, 1, 12, 12], sample.clone()).expect("tensor");
        let (_, cache) = forward_with_masks(&state, &one, None).expect("forward");
        if clear_of_kinks(&cache.traces()[0], h) {
            data.extend(sample);
        }
    }
    let x = Tensor::new(vec![batch, 1, 12, 12], data).expect("tensor");
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..3)).collect();

    let (_, cache) = forward_with_masks(&state, &x, None).expect("forward");
    let analytic = backward(&state, &cache, &labels).expect("backward");

    let mut rel_errors = Vec::new();
    for li in 0..state.params().len() {
        for which in 0..2 {
            let len = if which == 0 { state.params()[li].weights.len() } else { state.params()[li].bias.len() };
            for j in 0..len {
                let orig = *param(&mut state, li, which, j);
                *param(&mut state, li, which, j) = orig + h;
                let lp = mean_loss(&state, &x, &labels);
                *param(&mut state, li, which, j) = orig - h;
                let lm = mean_loss(&state, &x, &labels);
                *param(&mut state, li, which, j) = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let a = if which == 0 { analytic.layers[li].weights[j] } else { analytic.layers[li].bias[j] };
                let scale = a.abs().max(numeric.abs());
                rel_errors.push(if scale == 0.0 { 0.0 } else { (a - numeric).abs() / scale });
            }
        }
    }
    GradCheck { rel_errors }
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// A bundled cascade fixture.
pub fn cascade(name: &str) -> gaze_core::cascade::CascadeModel {
    gaze_core::cascade::parse_cascade(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// The bundled LBP face and Haar eye cascades with default parameters.
pub fn detector() -> gaze_core::cascade::FaceEyeDetector {
    gaze_core::cascade::FaceEyeDetector::new(
        cascade("lbpcascade_frontalface.xml"),
        cascade("haarcascade_eye.xml"),
        gaze_core::cascade::LandmarkParams::default(),
    )
    .unwrap()
}

pub fn astronaut() -> gaze_core::GrayImage {
    gaze_core::imaging::read_pnm(&std::fs::read(fixture("astronaut_face.pgm")).unwrap()).unwrap().into_gray()
}

/// Sum of `img` over a rectangle by nested loops.
pub fn brute_sum(img: &gaze_core::GrayImage, x: u32, y: u32, w: u32, h: u32) -> u64 {
    let mut s = 0u64;
    for yy in y..y + h {
        for xx in x..x + w {
            s += img.get(xx, yy) as u64;
        }
    }
    s
}

pub fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32, levels: u32) -> gaze_core::GrayImage {
    gaze_core::GrayImage::from_fn(w, h, |_, _| rng.random_range(0..levels) as u8).expect("valid size")
}

/// `[start, start + len)` scaled by `s` with both ends rounded.
fn span(start: u32, len: u32, s: f64) -> (u32, u32) {
    let a = (start as f64 * s).round() as u32;
    let b = ((start + len) as f64 * s).round() as u32;
    (a, b - a)
}

pub fn scaled_window(model: &gaze_core::cascade::CascadeModel, scale: f64) -> (u32, u32) {
    let (bw, bh) = model.window();
    (span(0, bw, scale).1, span(0, bh, scale).1)
}

/// Normalized value of every Haar feature on one window, with every
/// rectangle sum and the normalization statistics recomputed from pixels.
pub fn brute_haar_values(
    features: &[gaze_core::cascade::HaarFeature],
    window: (u32, u32),
    img: &gaze_core::GrayImage,
    (x, y): (u32, u32),
    scale: f64,
) -> Vec<f64> {
    let (bw, bh) = window;
    let (nx, ny, nw, nh) = if bw > 2 && bh > 2 { (1, 1, bw - 2, bh - 2) } else { (0, 0, bw, bh) };
    let ((nx, nw), (ny, nh)) = (span(nx, nw, scale), span(ny, nh, scale));
    let pixels: Vec<f64> = (y + ny..y + ny + nh)
        .flat_map(|yy| (x + nx..x + nx + nw).map(move |xx| (xx, yy)))
        .map(|(xx, yy)| img.get(xx, yy) as f64)
        .collect();
    let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
    let var = pixels.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / pixels.len() as f64;
    let normalizer = if var > 0.0 { pixels.len() as f64 * var.sqrt() } else { 1.0 };

    features
        .iter()
        .map(|f| {
            let scaled: Vec<(u32, u32, u32, u32, f64)> = f
                .rects
                .iter()
                .map(|wr| {
                    let (rx, rw) = span(wr.rect.x, wr.rect.w, scale);
                    let (ry, rh) = span(wr.rect.y, wr.rect.h, scale);
                    (rx, ry, rw, rh, wr.weight)
                })
                .collect();
            let sums: Vec<f64> = scaled.iter().map(|&(rx, ry, rw, rh, _)| brute_sum(img, x + rx, y + ry, rw, rh) as f64).collect();
            let mut v: f64 = scaled.iter().zip(&sums).skip(1).map(|(r, s)| r.4 * s).sum();
            if f.is_balanced() && scaled.len() > 1 {
                // first weight re-derived so the scaled feature stays zero-sum
                let rest: f64 = scaled[1..].iter().map(|r| r.4 * (r.2 * r.3) as f64).sum();
                v -= rest * sums[0] / (scaled[0].2 * scaled[0].3) as f64;
            } else {
                v += scaled[0].4 * sums[0];
            }
            v / normalizer
        })
        .collect()
}

/// Haar cascade on one window by [`brute_haar_values`]; returns the outcome
/// and the feature values.
pub fn brute_haar_window(
    model: &gaze_core::cascade::CascadeModel,
    img: &gaze_core::GrayImage,
    (x, y): (u32, u32),
    scale: f64,
) -> (gaze_core::cascade::WindowOutcome, Vec<f64>) {
    use gaze_core::cascade::{Features, Split, WindowOutcome};
    let Features::Haar(features) = model.features() else { panic!("not a Haar cascade") };
    let values = brute_haar_values(features, model.window(), img, (x, y), scale);
    for (si, stage) in model.stages().iter().enumerate() {
        let mut sum = 0.0;
        for stump in &stage.weak {
            let Split::Threshold(t) = stump.split else { panic!("Haar stump without threshold") };
            sum += if values[stump.feature] < t { stump.left } else { stump.right };
        }
        if sum < stage.threshold {
            return (WindowOutcome::Fail(si), values);
        }
    }
    (WindowOutcome::Pass, values)
}

/// LBP cascade on one window with every block sum recomputed from pixels.
pub fn brute_lbp_window(
    model: &gaze_core::cascade::CascadeModel,
    img: &gaze_core::GrayImage,
    (x, y): (u32, u32),
    scale: f64,
) -> (gaze_core::cascade::WindowOutcome, Vec<u8>) {
    use gaze_core::cascade::{Features, Split, WindowOutcome};
    let Features::Lbp(features) = model.features() else { panic!("not an LBP cascade") };
    let codes: Vec<u8> = features
        .iter()
        .map(|f| {
            let c = f.cell;
            let (fx, gw) = span(c.x, 3 * c.w, scale);
            let (fy, gh) = span(c.y, 3 * c.h, scale);
            let (cw, ch) = ((gw / 3).max(1), (gh / 3).max(1));
            let block = |col: u32, row: u32| brute_sum(img, x + fx + col * cw, y + fy + row * ch, cw, ch);
            let center = block(1, 1);
            // clockwise from the top-left neighbor, most significant bit first
            let ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
            ring.iter().fold(0u8, |code, &(col, row)| (code << 1) | (block(col, row) >= center) as u8)
        })
        .collect();
    for (si, stage) in model.stages().iter().enumerate() {
        let mut sum = 0.0;
        for stump in &stage.weak {
            let Split::Subset(table) = stump.split else { panic!("LBP stump without subset") };
            let code = codes[stump.feature];
            let hit = (table[(code / 32) as usize] as u32 >> (code % 32)) & 1 == 1;
            sum += if hit { stump.left } else { stump.right };
        }
        if sum < stage.threshold {
            return (WindowOutcome::Fail(si), codes);
        }
    }
    (WindowOutcome::Pass, codes)
}

fn random_stages(
    rng: &mut ChaCha8Rng,
    features: usize,
    split: &mut dyn FnMut(&mut ChaCha8Rng, usize) -> gaze_core::cascade::Split,
) -> Vec<gaze_core::cascade::Stage> {
    use gaze_core::cascade::{Stage, Stump};
    (0..rng.random_range(2..6))
        .map(|_| {
            let weak: Vec<Stump> = (0..rng.random_range(1..5))
                .map(|_| {
                    let feature = rng.random_range(0..features);
                    Stump { feature, split: split(rng, feature), left: rng.random_range(-1.0..1.0), right: rng.random_range(-1.0..1.0) }
                })
                .collect();
            // around the median leaf sum so stages pass and fail in similar measure
            Stage { threshold: rng.random_range(-0.3..0.1) * weak.len() as f64, weak }
        })
        .collect()
}

fn random_rect_in(rng: &mut ChaCha8Rng, w: u32, h: u32) -> gaze_core::Rect {
    let rw = rng.random_range(1..=w);
    let rh = rng.random_range(1..=h);
    gaze_core::Rect::new(rng.random_range(0..=w - rw), rng.random_range(0..=h - rh), rw, rh)
}

/// A random Haar cascade whose stump thresholds are drawn from feature
/// values on a reference image, so both leaves get used.
pub fn random_haar_cascade(rng: &mut ChaCha8Rng, reference: &gaze_core::GrayImage) -> gaze_core::cascade::CascadeModel {
    use gaze_core::cascade::{CascadeModel, Features, HaarFeature, Split, WeightedRect};
    let (bw, bh) = (rng.random_range(6..=20), rng.random_range(6..=20));
    let features: Vec<HaarFeature> = (0..rng.random_range(2..8))
        .map(|_| {
            // an inner rectangle equal to the outer one would make a zero-sum
            // feature identically zero, a tie no threshold can resolve
            let outer = loop {
                let r = random_rect_in(rng, bw, bh);
                if r.area() > 1 {
                    break r;
                }
            };
            let inner = loop {
                let r = random_rect_in(rng, outer.w, outer.h);
                if r.area() < outer.area() {
                    break r;
                }
            };
            let inner = gaze_core::Rect::new(outer.x + inner.x, outer.y + inner.y, inner.w, inner.h);
            let mut rects = vec![WeightedRect { rect: outer, weight: -1.0 }];
            if rng.random_bool(0.5) {
                // zero-sum pair
                rects.push(WeightedRect { rect: inner, weight: outer.area() as f64 / inner.area() as f64 });
            } else {
                rects.push(WeightedRect { rect: inner, weight: rng.random_range(-3.0..3.0) });
                if rng.random_bool(0.5) {
                    rects.push(WeightedRect { rect: random_rect_in(rng, bw, bh), weight: rng.random_range(-3.0..3.0) });
                }
            }
            HaarFeature { rects }
        })
        .collect();
    let (pw, ph) = (reference.width() - bw, reference.height() - bh);
    let mut split = |rng: &mut ChaCha8Rng, f: usize| {
        let origin = (rng.random_range(0..=pw), rng.random_range(0..=ph));
        Split::Threshold(brute_haar_values(&features[f..=f], (bw, bh), reference, origin, 1.0)[0])
    };
    let stages = random_stages(rng, features.len(), &mut split);
    CascadeModel::new(bw, bh, stages, Features::Haar(features)).expect("valid random cascade")
}

pub fn random_lbp_cascade(rng: &mut ChaCha8Rng) -> gaze_core::cascade::CascadeModel {
    use gaze_core::cascade::{CascadeModel, Features, LbpFeature, Split};
    let (bw, bh) = (rng.random_range(6..=24), rng.random_range(6..=24));
    let features: Vec<LbpFeature> = (0..rng.random_range(2..8))
        .map(|_| {
            let (cw, ch) = (rng.random_range(1..=bw / 3), rng.random_range(1..=bh / 3));
            let cell = gaze_core::Rect::new(rng.random_range(0..=bw - 3 * cw), rng.random_range(0..=bh - 3 * ch), cw, ch);
            LbpFeature { cell }
        })
        .collect();
    let mut split = |rng: &mut ChaCha8Rng, _: usize| Split::Subset(std::array::from_fn(|_| rng.random()));
    let stages = random_stages(rng, features.len(), &mut split);
    CascadeModel::new(bw, bh, stages, Features::Lbp(features)).expect("valid random cascade")
}

/// Connected components of the similarity graph by breadth-first search,
/// labeled in order of first appearance.
pub fn bfs_partition(rects: &[gaze_core::Rect], eps: f64) -> Vec<usize> {
    let n = rects.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if label[j] == usize::MAX && close(&rects[i], &rects[j], eps) {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Every side and offset within `eps` times the mean side length.
fn close(a: &gaze_core::Rect, b: &gaze_core::Rect, eps: f64) -> bool {
    let delta = eps * (a.w + a.h + b.w + b.h) as f64 / 4.0;
    [(a.x, b.x), (a.y, b.y), (a.w, b.w), (a.h, b.h)].iter().all(|&(p, q)| (p as f64 - q as f64).abs() <= delta)
}
