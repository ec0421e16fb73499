//! Single-window cascade evaluation.
//!
//! Features are scaled into the detection window rather than resampling the
//! image. A base rectangle `[x, x+w)` maps to `[round(x·s), round((x+w)·s))`,
//! so scaled rectangles never leave the scaled window. For balanced Haar
//! features the first rectangle's weight is re-derived after scaling so the
//! feature still answers 0 on a flat field. The Haar normalization window is
//! the base window inset by one pixel on each side, scaled the same way.

use super::model::{CascadeModel, FeatureKind, Features, Split};
use super::CascadeError;
use crate::imaging::{ImagingError, IntegralImage, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowOutcome {
    Pass,
    /// Index of the first stage the window failed.
    Fail(usize),
}

impl WindowOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, WindowOutcome::Pass)
    }
}

#[inline]
fn scale_span(start: u32, len: u32, scale: f64) -> (u32, u32) {
    let a = (start as f64 * scale).round() as u32;
    let b = ((start + len) as f64 * scale).round() as u32;
    (a, b - a)
}

/// Map a base-window rectangle into a window scaled by `scale` (≥ 1).
pub fn scale_rect(r: &Rect, scale: f64) -> Rect {
    let (x, w) = scale_span(r.x, r.w, scale);
    let (y, h) = scale_span(r.y, r.h, scale);
    Rect::new(x, y, w, h)
}

#[derive(Debug, Clone)]
pub(crate) struct ScaledHaar {
    pub rects: Vec<(Rect, f64)>,
    // For balanced features: Σ weight·area of rectangles 1.., which replaces
    // the first rectangle's weight by -rest/area0.
    pub balance: Option<f64>,
}

/// A cascade's features laid out for one window scale.
#[derive(Debug, Clone)]
pub(crate) struct ScaledCascade<'m> {
    model: &'m CascadeModel,
    pub win_w: u32,
    pub win_h: u32,
    norm: Rect,
    haar: Vec<ScaledHaar>,
    // (x, y, cell_w, cell_h) relative to the window origin
    lbp: Vec<(u32, u32, u32, u32)>,
}

impl<'m> ScaledCascade<'m> {
    pub fn new(model: &'m CascadeModel, scale: f64) -> Result<Self, CascadeError> {
        if !(scale.is_finite() && scale >= 1.0) {
            return Err(CascadeError::Argument(format!("window scale {scale} must be >= 1")));
        }
        let (bw, bh) = model.window();
        let win = scale_rect(&Rect::new(0, 0, bw, bh), scale);
        let norm_base = if bw > 2 && bh > 2 {
            Rect::new(1, 1, bw - 2, bh - 2)
        } else {
            Rect::new(0, 0, bw, bh)
        };
        let mut out = ScaledCascade {
            model,
            win_w: win.w,
            win_h: win.h,
            norm: scale_rect(&norm_base, scale),
            haar: Vec::new(),
            lbp: Vec::new(),
        };
        match model.features() {
            Features::Haar(fs) => {
                out.haar = fs
                    .iter()
                    .map(|f| {
                        let rects: Vec<(Rect, f64)> =
                            f.rects.iter().map(|wr| (scale_rect(&wr.rect, scale), wr.weight)).collect();
                        let balance = (f.is_balanced() && rects.len() > 1)
                            .then(|| rects[1..].iter().map(|(r, w)| w * r.area() as f64).sum());
                        ScaledHaar { rects, balance }
                    })
                    .collect();
            }
            Features::Lbp(fs) => {
                out.lbp = fs
                    .iter()
                    .map(|f| {
                        let c = f.cell;
                        let x = (c.x as f64 * scale).round() as u32;
                        let y = (c.y as f64 * scale).round() as u32;
                        let x_end = ((c.x + 3 * c.w) as f64 * scale).round() as u32;
                        let y_end = ((c.y + 3 * c.h) as f64 * scale).round() as u32;
                        (x, y, ((x_end - x) / 3).max(1), ((y_end - y) / 3).max(1))
                    })
                    .collect();
            }
        }
        Ok(out)
    }

    pub fn window_at(&self, x: u32, y: u32) -> Rect {
        Rect::new(x, y, self.win_w, self.win_h)
    }

    fn check(&self, ii: &IntegralImage, x: u32, y: u32) -> Result<(), CascadeError> {
        let w = self.window_at(x, y);
        if w.fits(ii.width(), ii.height()) {
            Ok(())
        } else {
            Err(CascadeError::Imaging(ImagingError::OutOfBounds {
                rect: w,
                width: ii.width(),
                height: ii.height(),
            }))
        }
    }

    pub fn eval(&self, ii: &IntegralImage, x: u32, y: u32) -> Result<WindowOutcome, CascadeError> {
        self.check(ii, x, y)?;
        Ok(match self.model.kind() {
            FeatureKind::Haar => self.eval_haar_unchecked(ii, x, y),
            FeatureKind::Lbp => self.eval_lbp_unchecked(ii, x, y),
        })
    }

    /// Area times standard deviation of the normalization window, or 1 on a flat window.
    pub fn haar_normalizer(&self, ii: &IntegralImage, x: u32, y: u32) -> f64 {
        let r = Rect::new(x + self.norm.x, y + self.norm.y, self.norm.w, self.norm.h);
        let (_, var) = ii.window_mean_var(&r).expect("normalization window inside checked window");
        if var > 0.0 {
            r.area() as f64 * var.sqrt()
        } else {
            1.0
        }
    }

    pub fn haar_value(&self, ii: &IntegralImage, feature: usize, x: u32, y: u32, normalizer: f64) -> f64 {
        let f = &self.haar[feature];
        let mut v = 0.0;
        for (i, (r, w)) in f.rects.iter().enumerate() {
            let s = ii.rect_sum_unchecked(&Rect::new(x + r.x, y + r.y, r.w, r.h)) as f64;
            v += match (i, f.balance) {
                (0, Some(rest)) => -rest * (s / r.area() as f64),
                _ => w * s,
            };
        }
        v / normalizer
    }

    fn eval_haar_unchecked(&self, ii: &IntegralImage, x: u32, y: u32) -> WindowOutcome {
        let normalizer = self.haar_normalizer(ii, x, y);
        for (si, stage) in self.model.stages().iter().enumerate() {
            let mut sum = 0.0;
            for stump in &stage.weak {
                let Split::Threshold(t) = stump.split else { unreachable!("validated at construction") };
                let v = self.haar_value(ii, stump.feature, x, y, normalizer);
                sum += if v < t { stump.left } else { stump.right };
            }
            if sum < stage.threshold {
                return WindowOutcome::Fail(si);
            }
        }
        WindowOutcome::Pass
    }

    /// 8-bit MB-LBP code; bit 7 = top-left, then clockwise to bit 0 = left.
    pub fn lbp_code(&self, ii: &IntegralImage, feature: usize, x: u32, y: u32) -> u8 {
        let (fx, fy, cw, ch) = self.lbp[feature];
        let (ox, oy) = (x + fx, y + fy);
        let block = |col: u32, row: u32| ii.rect_sum_unchecked(&Rect::new(ox + col * cw, oy + row * ch, cw, ch));
        let center = block(1, 1);
        // (col, row) of each neighbor from the most significant bit down
        const ORDER: [(u32, u32); 8] = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
        let mut code = 0u8;
        for (col, row) in ORDER {
            code = (code << 1) | (block(col, row) >= center) as u8;
        }
        code
    }

    fn eval_lbp_unchecked(&self, ii: &IntegralImage, x: u32, y: u32) -> WindowOutcome {
        for (si, stage) in self.model.stages().iter().enumerate() {
            let mut sum = 0.0;
            for stump in &stage.weak {
                let Split::Subset(ref table) = stump.split else { unreachable!("validated at construction") };
                let code = self.lbp_code(ii, stump.feature, x, y);
                sum += if Split::subset_contains(table, code) { stump.left } else { stump.right };
            }
            if sum < stage.threshold {
                return WindowOutcome::Fail(si);
            }
        }
        WindowOutcome::Pass
    }
}

fn expect_kind(model: &CascadeModel, kind: FeatureKind) -> Result<(), CascadeError> {
    if model.kind() == kind {
        Ok(())
    } else {
        Err(CascadeError::WrongKind {
            expected: kind,
            actual: model.kind(),
        })
    }
}

/// Run a Haar cascade on the window at `origin` scaled by `scale`.
pub fn eval_haar_window(
    model: &CascadeModel,
    ii: &IntegralImage,
    origin: (u32, u32),
    scale: f64,
) -> Result<WindowOutcome, CascadeError> {
    expect_kind(model, FeatureKind::Haar)?;
    ScaledCascade::new(model, scale)?.eval(ii, origin.0, origin.1)
}

/// Run an LBP cascade on the window at `origin` scaled by `scale`.
pub fn eval_lbp_window(
    model: &CascadeModel,
    ii: &IntegralImage,
    origin: (u32, u32),
    scale: f64,
) -> Result<WindowOutcome, CascadeError> {
    expect_kind(model, FeatureKind::Lbp)?;
    ScaledCascade::new(model, scale)?.eval(ii, origin.0, origin.1)
}

/// Feature values (Haar) or codes (LBP) of every feature for one window;
/// used by diagnostics and tests.
pub fn window_features(
    model: &CascadeModel,
    ii: &IntegralImage,
    origin: (u32, u32),
    scale: f64,
) -> Result<Vec<f64>, CascadeError> {
    let sc = ScaledCascade::new(model, scale)?;
    sc.check(ii, origin.0, origin.1)?;
    let (x, y) = origin;
    Ok(match model.kind() {
        FeatureKind::Haar => {
            let n = sc.haar_normalizer(ii, x, y);
            (0..sc.haar.len()).map(|f| sc.haar_value(ii, f, x, y, n)).collect()
        }
        FeatureKind::Lbp => (0..sc.lbp.len()).map(|f| sc.lbp_code(ii, f, x, y) as f64).collect(),
    })
}
