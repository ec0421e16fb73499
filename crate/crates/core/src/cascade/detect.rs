use serde::Serialize;

use super::eval::ScaledCascade;
use super::model::CascadeModel;
use super::CascadeError;
use crate::imaging::{integral, GrayImage, IntegralImage, Rect};

/// A detected box; `neighbors` counts the raw hits merged into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Detection {
    pub rect: Rect,
    pub neighbors: usize,
}

impl Detection {
    /// One `x y w h neighbors` line.
    pub fn to_line(&self) -> String {
        let r = self.rect;
        format!("{} {} {} {} {}", r.x, r.y, r.w, r.h, self.neighbors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectParams {
    /// Window growth per scale step; must exceed 1.
    pub scale_factor: f64,
    /// Smallest window (w, h) considered.
    pub min_size: (u32, u32),
    /// Largest window considered; `None` means bounded only by the image.
    pub max_size: Option<(u32, u32)>,
    /// Base stride in window pixels; the stride at scale `s` is `max(1, round(step·s))`.
    pub step: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            scale_factor: 1.1,
            min_size: (0, 0),
            max_size: None,
            step: 1.0,
        }
    }
}

/// The window scales `scale_factor^k` whose window size lies inside
/// `[min_size, max_size]` and the image, in increasing order.
pub fn scale_ladder(model: &CascadeModel, width: u32, height: u32, params: &DetectParams) -> Result<Vec<f64>, CascadeError> {
    if !(params.scale_factor.is_finite() && params.scale_factor > 1.0) {
        return Err(CascadeError::Argument(format!("scale factor {} must exceed 1", params.scale_factor)));
    }
    if !(params.step.is_finite() && params.step > 0.0) {
        return Err(CascadeError::Argument(format!("step {} must be positive", params.step)));
    }
    let (bw, bh) = model.window();
    let mut out = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let ww = (bw as f64 * scale).round() as u32;
        let wh = (bh as f64 * scale).round() as u32;
        if ww > width || wh > height {
            break;
        }
        if let Some((mw, mh)) = params.max_size {
            if ww > mw || wh > mh {
                break;
            }
        }
        if ww >= params.min_size.0 && wh >= params.min_size.1 {
            out.push(scale);
        }
        scale *= params.scale_factor;
    }
    Ok(out)
}

/// Stride between neighboring window origins at `scale`.
pub fn stride_at(params: &DetectParams, scale: f64) -> u32 {
    ((params.step * scale).round() as u32).max(1)
}

/// Slide the cascade over the image at every scale of the ladder.
///
/// Raw hits come out scale-major, then row-major, each with `neighbors = 1`.
pub fn detect_multiscale(model: &CascadeModel, img: &GrayImage, params: &DetectParams) -> Result<Vec<Detection>, CascadeError> {
    let ii = integral(img);
    detect_multiscale_integral(model, &ii, params)
}

pub fn detect_multiscale_integral(
    model: &CascadeModel,
    ii: &IntegralImage,
    params: &DetectParams,
) -> Result<Vec<Detection>, CascadeError> {
    let mut out = Vec::new();
    for scale in scale_ladder(model, ii.width(), ii.height(), params)? {
        let sc = ScaledCascade::new(model, scale)?;
        let stride = stride_at(params, scale) as usize;
        for y in (0..=ii.height() - sc.win_h).step_by(stride) {
            for x in (0..=ii.width() - sc.win_w).step_by(stride) {
                if sc.eval(ii, x, y)?.passed() {
                    out.push(Detection {
                        rect: sc.window_at(x, y),
                        neighbors: 1,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Two boxes are similar when every side length and offset differs by at
/// most `eps` times their mean side length.
pub fn similar(a: &Rect, b: &Rect, eps: f64) -> bool {
    let mean_side = (a.w + a.h + b.w + b.h) as f64 / 4.0;
    let delta = eps * mean_side;
    let d = |p: u32, q: u32| (p as f64 - q as f64).abs() <= delta;
    d(a.x, b.x) && d(a.y, b.y) && d(a.w, b.w) && d(a.h, b.h)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Partition raw boxes into classes of the transitive closure of [`similar`].
/// Returns class labels numbered by first appearance.
pub fn partition(raw: &[Detection], eps: f64) -> Vec<usize> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if similar(&raw[i].rect, &raw[j].rect, eps) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Merge raw hits into averaged boxes, keeping classes with more than
/// `min_neighbors` members. Output is sorted by `(y, x)`.
pub fn group_rectangles(raw: &[Detection], min_neighbors: usize, eps: f64) -> Vec<Detection> {
    let eps = eps.max(0.0);
    let labels = partition(raw, eps);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut acc = vec![(0u64, 0u64, 0u64, 0u64, 0usize); classes];
    for (d, &l) in raw.iter().zip(&labels) {
        let a = &mut acc[l];
        a.0 += d.rect.x as u64;
        a.1 += d.rect.y as u64;
        a.2 += d.rect.w as u64;
        a.3 += d.rect.h as u64;
        a.4 += d.neighbors.max(1);
    }
    let members = {
        let mut m = vec![0u64; classes];
        for &l in &labels {
            m[l] += 1;
        }
        m
    };
    let avg = |s: u64, n: u64| ((s as f64) / n as f64).round() as u32;
    let mut out: Vec<Detection> = acc
        .iter()
        .zip(&members)
        .filter(|(a, _)| a.4 > min_neighbors)
        .map(|(a, &n)| Detection {
            rect: Rect::new(avg(a.0, n), avg(a.1, n), avg(a.2, n), avg(a.3, n)),
            neighbors: a.4,
        })
        .collect();
    out.sort_by_key(|d| (d.rect.y, d.rect.x, d.rect.h, d.rect.w));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::model::{Features, LbpFeature, Split, Stage, Stump};

    pub(crate) fn constant_lbp(window: u32, pass: bool) -> CascadeModel {
        let stage = Stage {
            threshold: 0.0,
            weak: vec![Stump {
                feature: 0,
                split: Split::Subset([-1; 8]),
                left: if pass { 1.0 } else { -1.0 },
                right: if pass { 1.0 } else { -1.0 },
            }],
        };
        CascadeModel::new(window, window, vec![stage], Features::Lbp(vec![LbpFeature { cell: Rect::new(0, 0, 1, 1) }])).unwrap()
    }

    fn det(x: u32, y: u32, w: u32, h: u32) -> Detection {
        Detection { rect: Rect::new(x, y, w, h), neighbors: 1 }
    }

    #[test]
    fn single_window_fits() {
        let img = GrayImage::filled(24, 24, 3).unwrap();
        let raw = detect_multiscale(&constant_lbp(24, true), &img, &DetectParams::default()).unwrap();
        assert_eq!(raw, vec![det(0, 0, 24, 24)]);
        assert!(detect_multiscale(&constant_lbp(24, false), &img, &DetectParams::default()).unwrap().is_empty());
    }

    #[test]
    fn argument_validation() {
        let img = GrayImage::filled(24, 24, 3).unwrap();
        let bad = DetectParams { scale_factor: 1.0, ..DetectParams::default() };
        assert!(matches!(detect_multiscale(&constant_lbp(24, true), &img, &bad), Err(CascadeError::Argument(_))));
    }

    #[test]
    fn ladder_respects_bounds() {
        let m = constant_lbp(10, true);
        let p = DetectParams { scale_factor: 1.5, min_size: (14, 14), max_size: Some((30, 30)), step: 1.0 };
        // windows 10, 15, 22.5->23, 33.75 -> only 15 and 23 qualify
        let ladder = scale_ladder(&m, 100, 100, &p).unwrap();
        assert_eq!(ladder, vec![1.5, 2.25]);
    }

    #[test]
    fn grouping_basics() {
        assert!(group_rectangles(&[], 3, 0.2).is_empty());
        let four = vec![det(5, 5, 20, 20); 4];
        assert_eq!(group_rectangles(&four, 3, 0.2), vec![Detection { rect: Rect::new(5, 5, 20, 20), neighbors: 4 }]);
        assert!(group_rectangles(&four[..3], 3, 0.2).is_empty());
    }

    #[test]
    fn grouping_separates_far_boxes_and_sorts() {
        let mut raw = vec![det(50, 10, 20, 20), det(51, 10, 20, 20), det(0, 40, 20, 20), det(1, 41, 20, 20)];
        raw.push(det(52, 11, 21, 21));
        let g = group_rectangles(&raw, 1, 0.2);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].rect, Rect::new(51, 10, 20, 20));
        assert_eq!(g[0].neighbors, 3);
        assert_eq!(g[1].rect.y, 41);
        assert!(g.iter().all(|d| d.neighbors >= 2));
    }

    #[test]
    fn detection_line_format() {
        assert_eq!(Detection { rect: Rect::new(1, 2, 3, 4), neighbors: 5 }.to_line(), "1 2 3 4 5");
    }
}
