use serde::Serialize;

use super::CascadeError;
use crate::imaging::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Haar,
    Lbp,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureKind::Haar => "haar",
            FeatureKind::Lbp => "lbp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedRect {
    pub rect: Rect,
    pub weight: f64,
}

/// Weighted sum of up to three rectangles, in base-window coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarFeature {
    pub rects: Vec<WeightedRect>,
}

impl HaarFeature {
    /// True when `Σ weight·area` vanishes, i.e. the feature responds with 0 on a flat field.
    pub fn is_balanced(&self) -> bool {
        let total: f64 = self.rects.iter().map(|r| r.weight * r.rect.area() as f64).sum();
        total.abs() < 1e-9
    }
}

/// Multi-block LBP feature: a 3×3 grid of `cell`-sized blocks whose top-left block is `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LbpFeature {
    pub cell: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Haar(Vec<HaarFeature>),
    Lbp(Vec<LbpFeature>),
}

impl Features {
    pub fn len(&self) -> usize {
        match self {
            Features::Haar(f) => f.len(),
            Features::Lbp(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Features::Haar(_) => FeatureKind::Haar,
            Features::Lbp(_) => FeatureKind::Lbp,
        }
    }
}

/// How a stump routes a window to one of its two leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    /// Haar: left leaf iff normalized feature value < threshold.
    Threshold(f64),
    /// LBP: left leaf iff bit `code` is set in this 256-bit table.
    Subset([i32; 8]),
}

impl Split {
    pub fn subset_contains(table: &[i32; 8], code: u8) -> bool {
        (table[(code >> 5) as usize] as u32 >> (code & 31)) & 1 == 1
    }
}

/// Depth-1 decision tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub split: Split,
    pub left: f64,
    pub right: f64,
}

/// A window passes the stage iff the sum of chosen leaf values is ≥ `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub threshold: f64,
    pub weak: Vec<Stump>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    window_w: u32,
    window_h: u32,
    stages: Vec<Stage>,
    features: Features,
}

impl CascadeModel {
    /// Build a model, checking every structural invariant.
    pub fn new(window_w: u32, window_h: u32, stages: Vec<Stage>, features: Features) -> Result<Self, CascadeError> {
        let invalid = |msg: String| Err(CascadeError::Invalid(msg));
        if window_w == 0 || window_h == 0 {
            return invalid(format!("window {window_w}x{window_h} is empty"));
        }
        if stages.is_empty() {
            return invalid("cascade has no stages".into());
        }
        match &features {
            Features::Haar(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    if f.rects.is_empty() || f.rects.len() > 3 {
                        return invalid(format!("haar feature {i} has {} rectangles", f.rects.len()));
                    }
                    if let Some(r) = f.rects.iter().find(|r| !r.rect.fits(window_w, window_h)) {
                        return invalid(format!("haar feature {i} rectangle {:?} leaves the window", r.rect));
                    }
                }
            }
            Features::Lbp(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    let c = f.cell;
                    let grid = Rect::new(c.x, c.y, c.w.saturating_mul(3), c.h.saturating_mul(3));
                    if !grid.fits(window_w, window_h) {
                        return invalid(format!("lbp feature {i} grid {grid:?} leaves the window"));
                    }
                }
            }
        }
        for (si, stage) in stages.iter().enumerate() {
            if stage.weak.is_empty() {
                return invalid(format!("stage {si} has no weak classifiers"));
            }
            for (wi, stump) in stage.weak.iter().enumerate() {
                if stump.feature >= features.len() {
                    return invalid(format!(
                        "stage {si} weak {wi} references feature {} of {}",
                        stump.feature,
                        features.len()
                    ));
                }
                let split_ok = matches!(
                    (&stump.split, &features),
                    (Split::Threshold(_), Features::Haar(_)) | (Split::Subset(_), Features::Lbp(_))
                );
                if !split_ok {
                    return invalid(format!("stage {si} weak {wi} split does not match the feature kind"));
                }
            }
        }
        Ok(CascadeModel {
            window_w,
            window_h,
            stages,
            features,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.features.kind()
    }

    pub fn window(&self) -> (u32, u32) {
        (self.window_w, self.window_h)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn weak_count(&self) -> usize {
        self.stages.iter().map(|s| s.weak.len()).sum()
    }
}
