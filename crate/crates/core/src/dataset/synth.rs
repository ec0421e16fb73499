use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{Label, Manifest, Sample, Source};
use super::set::LabeledSet;
use super::DatasetError;
use crate::composer::{HALF_HEIGHT, PAIR_SIDE};
use crate::imaging::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Difficulty {
    /// Per-sample jitter, noise and a spread of pupil offsets.
    #[default]
    Standard,
    /// Fixed large offsets, no jitter, no noise.
    Easy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    /// Fraction of samples per class; must sum to 1.
    pub class_mix: [f64; 3],
    pub persons: usize,
    pub difficulty: Difficulty,
}

impl SynthParams {
    pub fn new(n: usize, class_mix: [f64; 3], persons: usize) -> Self {
        SynthParams {
            n,
            class_mix,
            persons,
            difficulty: Difficulty::Standard,
        }
    }

    pub fn easy(mut self) -> Self {
        self.difficulty = Difficulty::Easy;
        self
    }
}

/// Per-person appearance.
#[derive(Debug, Clone, Copy)]
struct Style {
    skin: f64,
    sclera: f64,
    pupil: f64,
    semi_x: f64,
    semi_y: f64,
    radius: f64,
    noise: f64,
}

impl Style {
    fn draw(rng: &mut ChaCha8Rng, difficulty: Difficulty) -> Style {
        Style {
            skin: rng.random_range(90.0..150.0),
            sclera: rng.random_range(185.0..235.0),
            pupil: rng.random_range(10.0..50.0),
            semi_x: rng.random_range(15.0..22.0),
            semi_y: rng.random_range(7.0..10.0),
            radius: rng.random_range(4.5..6.5),
            noise: match difficulty {
                Difficulty::Standard => rng.random_range(2.0..8.0),
                Difficulty::Easy => 0.0,
            },
        }
    }
}

/// Pupil offset as fractions of the eye's semi-axes.
fn gaze_offset(rng: &mut ChaCha8Rng, label: Label, difficulty: Difficulty) -> (f64, f64) {
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    match difficulty {
        Difficulty::Easy => match label.value() {
            0 => (0.5, 0.0),
            1 => (-0.5, 0.0),
            _ => (0.0, 0.7 * sign(rng)),
        },
        Difficulty::Standard => {
            let v = rng.random_range(-0.2..0.2);
            match label.value() {
                0 => (rng.random_range(0.30..0.55), v),
                1 => (-rng.random_range(0.30..0.55), v),
                _ if rng.random_bool(0.5) => (rng.random_range(-0.15..0.15), sign(rng) * rng.random_range(0.5..0.75)),
                _ => (sign(rng) * rng.random_range(0.75..0.95), v),
            }
        }
    }
}

fn coverage(signed_inside: f64) -> f64 {
    (signed_inside + 0.5).clamp(0.0, 1.0)
}

/// Render one eye into a 72×36 tile. The pupil is hidden outside the eye opening.
fn render_eye(style: &Style, center: (f64, f64), gaze: (f64, f64), brightness: f64, noise: &mut impl FnMut() -> f64) -> Vec<u8> {
    let (cx, cy) = center;
    let (a, b) = (style.semi_x, style.semi_y);
    let (px, py) = (cx + gaze.0 * a, cy + gaze.1 * b);
    let mut out = Vec::with_capacity((PAIR_SIDE * HALF_HEIGHT) as usize);
    for y in 0..HALF_HEIGHT {
        for x in 0..PAIR_SIDE {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let e = (((fx - cx) / a).powi(2) + ((fy - cy) / b).powi(2)).sqrt();
            let eye = coverage((1.0 - e) * b);
            let dist = ((fx - px).powi(2) + (fy - py).powi(2)).sqrt();
            let pupil = coverage(style.radius - dist) * eye;
            let mut v = style.skin * (1.0 - eye) + style.sclera * eye;
            v = v * (1.0 - pupil) + style.pupil * pupil;
            v = v * brightness + noise();
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Number of samples per class by largest remainder; ties go to the lower class.
pub fn class_counts(n: usize, mix: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = mix.iter().map(|m| m * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())).then(i.cmp(&j)));
    let mut left = n - counts.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[c] += 1;
        left -= 1;
    }
    counts
}

/// Deterministic stylized pair-eye images.
///
/// Class 0 puts both pupils right of the eye center, class 1 left, class 2
/// either vertical or at extreme eccentricity. Sample `i` belongs to person
/// `i mod persons`; labels are shuffled before assignment.
pub fn synth_generate(seed: u64, params: &SynthParams) -> Result<LabeledSet, DatasetError> {
    let SynthParams {
        n,
        class_mix,
        persons,
        difficulty,
    } = *params;
    if n == 0 {
        return Err(DatasetError::Argument("n must be at least 1".into()));
    }
    if persons == 0 {
        return Err(DatasetError::Argument("persons must be at least 1".into()));
    }
    if class_mix.iter().any(|m| !m.is_finite() || *m < 0.0) || (class_mix.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(DatasetError::Argument(format!("class mix {class_mix:?} must be non-negative and sum to 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let styles: Vec<Style> = (0..persons).map(|_| Style::draw(&mut rng, difficulty)).collect();
    let counts = class_counts(n, &class_mix);
    let mut labels: Vec<Label> = Label::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&l, c)| std::iter::repeat_n(l, c))
        .collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);

    let mut samples = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let easy = difficulty == Difficulty::Easy;
    for (i, &label) in labels.iter().enumerate() {
        let p = i % persons;
        let style = styles[p];
        let gaze = gaze_offset(&mut rng, label, difficulty);
        let brightness = if easy { 1.0 } else { rng.random_range(0.9..1.1) };
        let tile = |rng: &mut ChaCha8Rng| {
            let (jx, jy, jg) = if easy {
                (0.0, 0.0, (0.0, 0.0))
            } else {
                (
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-2.0..2.0),
                    (rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03)),
                )
            };
            let center = (PAIR_SIDE as f64 / 2.0 + jx, HALF_HEIGHT as f64 / 2.0 + jy);
            let mut noise = || style.noise * unit.sample(&mut *rng);
            render_eye(&style, center, (gaze.0 + jg.0, gaze.1 + jg.1), brightness, &mut noise)
        };
        let mut raster = tile(&mut rng);
        raster.extend(tile(&mut rng));
        let person_id = format!("s{p:02}");
        samples.push(Sample {
            image_path: format!("{person_id}_{i:05}_{label}.pgm"),
            label,
            person_id,
            source: Source::Synthetic,
            augmented_from: None,
        });
        images.push(GrayImage::new(PAIR_SIDE, PAIR_SIDE, raster).expect("72x72 raster"));
    }
    let header = Manifest::with_scenes(&format!("synthetic-{seed}"), "synthetic right", "synthetic left");
    LabeledSet::new(header.with_samples(samples)?, images)
}
