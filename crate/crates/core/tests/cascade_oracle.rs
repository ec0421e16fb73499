mod support;

use gaze_core::cascade::{
    detect_multiscale, eval_haar_window, eval_lbp_window, group_rectangles, partition, scale_ladder, stride_at,
    window_features, CascadeModel, DetectParams, Detection, FeatureKind, WindowOutcome,
};
use gaze_core::imaging::integral;
use gaze_core::{GrayImage, Rect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

/// A window origin and scale at which `model` fits inside `img`.
fn random_window(rng: &mut ChaCha8Rng, model: &CascadeModel, img: &GrayImage) -> ((u32, u32), f64) {
    let (bw, bh) = model.window();
    let max_scale = (img.width() as f64 / bw as f64).min(img.height() as f64 / bh as f64);
    loop {
        let scale = if rng.random_bool(0.3) { 1.0 } else { rng.random_range(1.0..max_scale.max(1.0 + 1e-9)) };
        let (ww, wh) = scaled_window(model, scale);
        if ww <= img.width() && wh <= img.height() {
            return ((rng.random_range(0..=img.width() - ww), rng.random_range(0..=img.height() - wh)), scale);
        }
    }
}

fn image_for(rng: &mut ChaCha8Rng, model: &CascadeModel) -> GrayImage {
    let (bw, bh) = model.window();
    // few gray levels make LBP ties common
    let levels = if rng.random_bool(0.3) { 3 } else { 256 };
    let (w, h) = (rng.random_range(bw..=64.max(bw)), rng.random_range(bh..=64.max(bh)));
    random_image(rng, w, h, levels)
}

#[test]
fn random_haar_windows_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut outcomes = [0usize; 2];
    for _ in 0..300 {
        let reference = random_image(&mut rng, 40, 40, 256);
        let model = random_haar_cascade(&mut rng, &reference);
        let img = image_for(&mut rng, &model);
        let (origin, scale) = random_window(&mut rng, &model, &img);
        let ii = integral(&img);
        let (expected, values) = brute_haar_window(&model, &img, origin, scale);
        let got = window_features(&model, &ii, origin, scale).unwrap();
        for (a, b) in got.iter().zip(&values) {
            assert!((a - b).abs() <= 1e-9, "feature value {a} vs brute force {b}");
        }
        assert_eq!(eval_haar_window(&model, &ii, origin, scale).unwrap(), expected);
        outcomes[expected.passed() as usize] += 1;
    }
    assert!(outcomes[0] > 20 && outcomes[1] > 20, "degenerate outcome mix {outcomes:?}");
}

#[test]
fn random_lbp_windows_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut outcomes = [0usize; 2];
    for _ in 0..300 {
        let model = random_lbp_cascade(&mut rng);
        let img = image_for(&mut rng, &model);
        let (origin, scale) = random_window(&mut rng, &model, &img);
        let ii = integral(&img);
        let (expected, codes) = brute_lbp_window(&model, &img, origin, scale);
        let got: Vec<u8> = window_features(&model, &ii, origin, scale).unwrap().iter().map(|&c| c as u8).collect();
        assert_eq!(got, codes);
        assert_eq!(eval_lbp_window(&model, &ii, origin, scale).unwrap(), expected);
        outcomes[expected.passed() as usize] += 1;
    }
    assert!(outcomes[0] > 20 && outcomes[1] > 20, "degenerate outcome mix {outcomes:?}");
}

#[test]
fn bundled_cascades_match_brute_force_on_a_face() {
    let face = astronaut();
    let ii = integral(&face);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut deepest = [0usize; 2];
    let models = [cascade("lbpcascade_frontalface.xml"), cascade("haarcascade_eye.xml")];
    for (k, model) in models.iter().enumerate() {
        for _ in 0..60 {
            let (origin, scale) = random_window(&mut rng, model, &face);
            let (expected, got) = match model.kind() {
                FeatureKind::Haar => (brute_haar_window(model, &face, origin, scale).0, eval_haar_window(model, &ii, origin, scale)),
                FeatureKind::Lbp => (brute_lbp_window(model, &face, origin, scale).0, eval_lbp_window(model, &ii, origin, scale)),
            };
            assert_eq!(got.unwrap(), expected, "{:?} window at {origin:?} scale {scale}", model.kind());
            let depth = match expected {
                WindowOutcome::Pass => model.stages().len(),
                WindowOutcome::Fail(s) => s,
            };
            deepest[k] = deepest[k].max(depth);
        }
    }
    assert!(deepest.iter().all(|&d| d >= 2), "windows never got past the first stages: {deepest:?}");
}

fn exhaustive(model: &CascadeModel, img: &GrayImage, params: &DetectParams) -> Vec<Rect> {
    let mut hits = Vec::new();
    for scale in scale_ladder(model, img.width(), img.height(), params).unwrap() {
        let (ww, wh) = scaled_window(model, scale);
        let stride = stride_at(params, scale) as usize;
        for y in (0..=img.height() - wh).step_by(stride) {
            for x in (0..=img.width() - ww).step_by(stride) {
                let passed = match model.kind() {
                    FeatureKind::Haar => brute_haar_window(model, img, (x, y), scale).0.passed(),
                    FeatureKind::Lbp => brute_lbp_window(model, img, (x, y), scale).0.passed(),
                };
                if passed {
                    hits.push(Rect::new(x, y, ww, wh));
                }
            }
        }
    }
    hits
}

#[test]
fn raw_detections_equal_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut total = 0;
    for trial in 0..12 {
        let reference = random_image(&mut rng, 40, 40, 256);
        let model = if trial % 2 == 0 { random_haar_cascade(&mut rng, &reference) } else { random_lbp_cascade(&mut rng) };
        let (w, h) = (rng.random_range(24..=40), rng.random_range(24..=40));
        let img = random_image(&mut rng, w, h, 256);
        let params = DetectParams { scale_factor: rng.random_range(1.1..1.4), step: rng.random_range(0.6..2.0), ..DetectParams::default() };
        let mut got: Vec<Rect> = detect_multiscale(&model, &img, &params).unwrap().iter().map(|d| d.rect).collect();
        let mut want = exhaustive(&model, &img, &params);
        let key = |r: &Rect| (r.w, r.h, r.y, r.x);
        got.sort_by_key(key);
        want.sort_by_key(key);
        assert_eq!(got, want, "trial {trial}");
        total += want.len();
    }
    assert!(total > 0);
}

fn cluster_strategy() -> impl Strategy<Value = Vec<Rect>> {
    // boxes jittered around a few centers, so some merge and some do not
    (proptest::collection::vec((0u32..80, 0u32..80, 10u32..30), 1..5), proptest::collection::vec((0usize..5, -3i32..=3, -3i32..=3, -2i32..=2), 0..40))
        .prop_map(|(centers, jitter)| {
            jitter
                .into_iter()
                .map(|(c, dx, dy, ds)| {
                    let (x, y, s) = centers[c % centers.len()];
                    let s = (s as i32 + ds) as u32;
                    Rect::new((x as i32 + dx).max(0) as u32, (y as i32 + dy).max(0) as u32, s, s)
                })
                .collect()
        })
}

proptest! {
    #[test]
    fn partition_matches_graph_components(rects in cluster_strategy(), eps in 0.0f64..0.4) {
        let raw: Vec<Detection> = rects.iter().map(|&rect| Detection { rect, neighbors: 1 }).collect();
        prop_assert_eq!(partition(&raw, eps), bfs_partition(&rects, eps));
    }

    #[test]
    fn grouping_averages_each_component(rects in cluster_strategy(), min_neighbors in 0usize..4) {
        let eps = 0.2;
        let raw: Vec<Detection> = rects.iter().map(|&rect| Detection { rect, neighbors: 1 }).collect();
        let labels = bfs_partition(&rects, eps);
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut want: Vec<Detection> = (0..classes)
            .filter_map(|c| {
                let members: Vec<&Rect> = rects.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
                let n = members.len();
                let avg = |f: fn(&Rect) -> u32| (members.iter().map(|r| f(r) as f64).sum::<f64>() / n as f64).round() as u32;
                (n > min_neighbors).then(|| Detection { rect: Rect::new(avg(|r| r.x), avg(|r| r.y), avg(|r| r.w), avg(|r| r.h)), neighbors: n })
            })
            .collect();
        want.sort_by_key(|d| (d.rect.y, d.rect.x, d.rect.h, d.rect.w));
        prop_assert_eq!(group_rectangles(&raw, min_neighbors, eps), want);
    }
}
