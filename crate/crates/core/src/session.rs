//! Scoring a stimulus-video session: frame sampling, per-frame
//! classification, the aggregate gaze report and latency benchmarks.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cascade::{CascadeError, FaceEyeDetector};
use crate::cnn::{predict, CnnError, NetworkState, PAIR_INPUT};
use crate::composer::{compose_pair, quality_gate, ComposeError, GateOutcome};
use crate::imaging::{AnyImage, GrayImage, PnmError};

/// Warm-up runs discarded before a benchmark is timed.
pub const WARMUP_RUNS: usize = 5;
pub const MIN_REPETITIONS: usize = 30;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("frame {frame}: {source}")]
    Decode {
        frame: usize,
        #[source]
        source: PnmError,
    },
    #[error("frame {frame}: {message}")]
    Frame { frame: usize, message: String },
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplerConfig {
    /// Leading frames dropped.
    pub skip: usize,
    /// Keep every `stride`-th frame after that.
    pub stride: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { skip: 300, stride: 15 }
    }
}

impl SamplerConfig {
    pub fn new(skip: usize, stride: usize) -> Result<Self, SessionError> {
        if stride == 0 {
            return Err(SessionError::Argument("sampler stride must be at least 1".into()));
        }
        Ok(SamplerConfig { skip, stride })
    }

    pub fn keeps(&self, frame: usize) -> bool {
        frame >= self.skip && (frame - self.skip).is_multiple_of(self.stride.max(1))
    }
}

/// Indices `skip, skip + stride, …` below `total_frames`.
pub fn sample_frames(total_frames: usize, cfg: &SamplerConfig) -> Vec<usize> {
    (cfg.skip..total_frames).step_by(cfg.stride.max(1)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame: usize,
    /// `accept` or the rejection reason.
    pub gate: String,
    pub class: Option<u8>,
    pub probabilities: Option<Vec<f32>>,
    /// Wall clock for decode-to-prediction of this frame.
    pub latency_ms: f64,
}

impl FrameRecord {
    pub fn accepted(&self) -> bool {
        self.class.is_some()
    }
}

/// Records produced before the stream ended, and the error that ended it early, if any.
#[derive(Debug)]
pub struct StreamOutcome {
    pub records: Vec<FrameRecord>,
    pub error: Option<SessionError>,
}

/// Detect, gate, compose and classify one grayscale frame.
pub fn classify_frame(
    detector: &FaceEyeDetector,
    state: &NetworkState<f32>,
    frame: &GrayImage,
    index: usize,
) -> Result<FrameRecord, SessionError> {
    let start = Instant::now();
    let detection = detector.detect(frame)?;
    let (gate, class, probabilities) = match quality_gate(&detection) {
        GateOutcome::Reject(reason) => (reason.as_str().to_string(), None, None),
        GateOutcome::Accept(lm) => {
            let pair = compose_pair(frame, &lm, index.to_string(), "")?;
            let (label, probs) = predict(state, pair.image())?;
            ("accept".to_string(), Some(label.value()), Some(probs))
        }
    };
    Ok(FrameRecord {
        frame: index,
        gate,
        class,
        probabilities,
        latency_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Classify the sampled frames of a decoded frame stream, in stream order.
/// Frames outside the sample are decoded and dropped. A decode or
/// processing failure stops the walk and is returned next to the records
/// gathered so far.
pub fn classify_stream<I>(
    detector: &FaceEyeDetector,
    state: &NetworkState<f32>,
    frames: I,
    cfg: &SamplerConfig,
) -> StreamOutcome
where
    I: IntoIterator<Item = Result<AnyImage, PnmError>>,
{
    let mut records = Vec::new();
    for (i, frame) in frames.into_iter().enumerate() {
        let frame = match frame {
            Ok(f) => f,
            Err(source) => {
                return StreamOutcome {
                    records,
                    error: Some(SessionError::Decode { frame: i, source }),
                }
            }
        };
        if !cfg.keeps(i) {
            continue;
        }
        match classify_frame(detector, state, &frame.into_gray(), i) {
            Ok(r) => records.push(r),
            Err(e) => {
                return StreamOutcome {
                    records,
                    error: Some(SessionError::Frame { frame: i, message: e.to_string() }),
                }
            }
        }
    }
    StreamOutcome { records, error: None }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencySummary {
    pub count: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl LatencySummary {
    /// Median (mean of the middle pair for even counts) and nearest-rank p95.
    /// `None` for no samples.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
        let rank = (0.95 * n as f64).ceil() as usize;
        Some(LatencySummary {
            count: n,
            median_ms: median,
            p95_ms: s[rank.clamp(1, n) - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub sampled: usize,
    pub accepted: usize,
    /// Accepted frames per class.
    pub class_counts: Vec<u64>,
    /// Share of accepted frames per class; empty when nothing was accepted.
    pub proportions: Vec<f64>,
    /// Class-1 share of the class-0 plus class-1 frames.
    pub preference_ratio: Option<f64>,
    /// Why the ratio is absent.
    pub preference_note: Option<String>,
    pub rejected: BTreeMap<String, u64>,
    pub latency: Option<LatencySummary>,
}

/// Aggregate per-frame records. `classes` is the classifier's output arity.
pub fn summarize(records: &[FrameRecord], classes: usize) -> SessionReport {
    let mut class_counts = vec![0u64; classes];
    let mut rejected = BTreeMap::new();
    for r in records {
        match r.class {
            Some(c) => {
                let c = c as usize;
                if c >= class_counts.len() {
                    class_counts.resize(c + 1, 0);
                }
                class_counts[c] += 1;
            }
            None => *rejected.entry(r.gate.clone()).or_insert(0) += 1,
        }
    }
    let accepted: u64 = class_counts.iter().sum();
    let proportions = if accepted == 0 {
        Vec::new()
    } else {
        class_counts.iter().map(|&c| c as f64 / accepted as f64).collect()
    };
    let pair = class_counts.first().copied().unwrap_or(0) + class_counts.get(1).copied().unwrap_or(0);
    let (preference_ratio, preference_note) = if pair == 0 {
        let why = if accepted == 0 { "no frames were accepted" } else { "no accepted frame was classified right or left" };
        (None, Some(why.to_string()))
    } else {
        (Some(class_counts[1] as f64 / pair as f64), None)
    };
    let latencies: Vec<f64> = records.iter().map(|r| r.latency_ms).collect();
    SessionReport {
        sampled: records.len(),
        accepted: accepted as usize,
        class_counts,
        proportions,
        preference_ratio,
        preference_note,
        rejected,
        latency: LatencySummary::from_samples(&latencies),
    }
}

impl SessionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-page plain-text summary.
    pub fn to_text(&self) -> String {
        let names = ["right", "left", "undetermined"];
        let mut out = format!("frames sampled   {}\nframes accepted  {}\n", self.sampled, self.accepted);
        for (i, c) in self.class_counts.iter().enumerate() {
            let share = self.proportions.get(i).map(|p| format!("{:6.2}%", p * 100.0)).unwrap_or_else(|| "     -".into());
            out.push_str(&format!("  {:<14} {:>6}  {}\n", names.get(i).copied().unwrap_or("?"), c, share));
        }
        match (self.preference_ratio, &self.preference_note) {
            (Some(r), _) => out.push_str(&format!("left/(right+left) {r:.4}\n")),
            (None, Some(n)) => out.push_str(&format!("left/(right+left) n/a ({n})\n")),
            (None, None) => {}
        }
        if !self.rejected.is_empty() {
            out.push_str("rejected\n");
            for (reason, n) in &self.rejected {
                out.push_str(&format!("  {reason:<14} {n:>6}\n"));
            }
        }
        if let Some(l) = &self.latency {
            out.push_str(&format!("latency ms       median {:.2}  p95 {:.2}\n", l.median_ms, l.p95_ms));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Benchmark {
    pub samples_ms: Vec<f64>,
    pub summary: LatencySummary,
}

fn timed(repetitions: usize, mut run: impl FnMut() -> Result<(), SessionError>) -> Result<Benchmark, SessionError> {
    if repetitions < MIN_REPETITIONS {
        return Err(SessionError::Argument(format!(
            "at least {MIN_REPETITIONS} repetitions are needed, got {repetitions}"
        )));
    }
    for _ in 0..WARMUP_RUNS {
        run()?;
    }
    let mut samples_ms = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t = Instant::now();
        run()?;
        samples_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let summary = LatencySummary::from_samples(&samples_ms).expect("non-empty");
    Ok(Benchmark { samples_ms, summary })
}

/// Infer-mode forward latency on a fixed pseudo-random 72×72 input.
pub fn benchmark(state: &NetworkState<f32>, repetitions: usize) -> Result<Benchmark, SessionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let img = GrayImage::from_fn(PAIR_INPUT.w as u32, PAIR_INPUT.h as u32, |_, _| rng.random()).expect("valid size");
    timed(repetitions, || {
        std::hint::black_box(predict(state, &img)?);
        Ok(())
    })
}

/// Full per-frame pipeline latency (detection through prediction) on `frame`.
pub fn benchmark_pipeline(
    detector: &FaceEyeDetector,
    state: &NetworkState<f32>,
    frame: &GrayImage,
    repetitions: usize,
) -> Result<Benchmark, SessionError> {
    timed(repetitions, || {
        std::hint::black_box(classify_frame(detector, state, frame, 0)?);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(frame: usize, class: Option<u8>) -> FrameRecord {
        FrameRecord {
            frame,
            gate: if class.is_some() { "accept".into() } else { "no_face".into() },
            class,
            probabilities: None,
            latency_ms: frame as f64,
        }
    }

    #[test]
    fn default_sampler_on_a_stimulus_video() {
        let idx = sample_frames(1810, &SamplerConfig::default());
        assert_eq!(idx.len(), 101);
        assert_eq!((idx[0], idx[100]), (300, 1800));
        assert!(sample_frames(300, &SamplerConfig::default()).is_empty());
        assert_eq!(sample_frames(7, &SamplerConfig::new(0, 1).unwrap()), (0..7).collect::<Vec<_>>());
        assert!(SamplerConfig::new(0, 0).is_err());
    }

    #[test]
    fn summary_examples() {
        let all_left: Vec<_> = (0..4).map(|i| rec(i, Some(1))).collect();
        assert_eq!(summarize(&all_left, 3).preference_ratio, Some(1.0));

        let mut mixed: Vec<_> = (0..6).map(|i| rec(i, Some(0))).collect();
        mixed.extend((6..12).map(|i| rec(i, Some(1))));
        mixed.extend((12..15).map(|i| rec(i, Some(2))));
        mixed.push(rec(15, None));
        let r = summarize(&mixed, 3);
        assert_eq!(r.preference_ratio, Some(0.5));
        assert_eq!(r.proportions, vec![0.4, 0.4, 0.2]);
        assert_eq!(r.rejected.get("no_face"), Some(&1));
        assert_eq!(r.accepted + 1, r.sampled);

        let none: Vec<_> = (0..3).map(|i| rec(i, None)).collect();
        let r = summarize(&none, 3);
        assert_eq!(r.preference_ratio, None);
        assert!(r.preference_note.is_some());
        assert!(r.proportions.is_empty());
        assert!(r.to_text().contains("n/a"));
    }

    #[test]
    fn latency_percentiles() {
        let s: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let l = LatencySummary::from_samples(&s).unwrap();
        assert_eq!((l.median_ms, l.p95_ms, l.count), (50.5, 95.0, 100));
        assert_eq!(LatencySummary::from_samples(&[3.0]).unwrap().p95_ms, 3.0);
        assert!(LatencySummary::from_samples(&[]).is_none());
    }

    proptest! {
        #[test]
        fn sampled_indices_are_increasing_and_bounded(total in 1usize..5000, skip in 0usize..400, stride in 1usize..40) {
            let cfg = SamplerConfig::new(skip, stride).unwrap();
            let idx = sample_frames(total, &cfg);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&i| i < total && cfg.keeps(i)));
            prop_assert_eq!(idx.len(), (0..total).filter(|&i| cfg.keeps(i)).count());
        }

        #[test]
        fn proportions_form_a_distribution(classes in proptest::collection::vec(proptest::option::of(0u8..3), 0..60)) {
            let recs: Vec<_> = classes.iter().enumerate().map(|(i, c)| rec(i, *c)).collect();
            let r = summarize(&recs, 3);
            prop_assert_eq!(r.accepted + r.rejected.values().sum::<u64>() as usize, recs.len());
            if r.accepted > 0 {
                prop_assert!((r.proportions.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            if let Some(p) = r.preference_ratio {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
