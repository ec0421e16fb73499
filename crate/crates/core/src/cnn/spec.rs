use serde::{Deserialize, Serialize};

use super::CnnError;

/// Dropout probability used by [`reference_spec`].
pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize, stride: usize },
    MaxPool { size: usize, stride: usize },
    Relu,
    Dropout { p: f64 },
    Fc { units: usize },
    /// Fully connected layer followed by softmax.
    SoftmaxOut { classes: usize },
}

impl LayerSpec {
    pub fn is_learnable(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Fc { .. } | LayerSpec::SoftmaxOut { .. })
    }
}

/// Channels × height × width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Shape { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const PAIR_INPUT: Shape = Shape::new(1, 72, 72);

/// A validated layer chain with its propagated shapes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSpec {
    input: Shape,
    layers: Vec<LayerSpec>,
    #[serde(skip)]
    shapes: Vec<Shape>,
}

fn window_out(n: usize, k: usize, s: usize) -> Option<usize> {
    (k >= 1 && s >= 1 && n >= k).then(|| (n - k) / s + 1)
}

impl NetworkSpec {
    /// Validate the chain from `input`. `SoftmaxOut` may only appear last.
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self, CnnError> {
        if input.is_empty() {
            return Err(CnnError::Spec(format!("empty input shape {input:?}")));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut cur = input;
        for (i, layer) in layers.iter().enumerate() {
            let bad = |msg: String| CnnError::Spec(format!("layer {i} ({layer:?}): {msg}"));
            cur = match *layer {
                LayerSpec::Conv { filters, kernel, stride } => {
                    if filters == 0 {
                        return Err(bad("no filters".into()));
                    }
                    match (window_out(cur.h, kernel, stride), window_out(cur.w, kernel, stride)) {
                        (Some(h), Some(w)) => Shape::new(filters, h, w),
                        _ => return Err(bad(format!("kernel does not fit input {cur:?}"))),
                    }
                }
                LayerSpec::MaxPool { size, stride } => {
                    match (window_out(cur.h, size, stride), window_out(cur.w, size, stride)) {
                        (Some(h), Some(w)) => Shape::new(cur.c, h, w),
                        _ => return Err(bad(format!("pool does not fit input {cur:?}"))),
                    }
                }
                LayerSpec::Relu => cur,
                LayerSpec::Dropout { p } => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(bad(format!("dropout p = {p} outside [0, 1)")));
                    }
                    cur
                }
                LayerSpec::Fc { units } => {
                    if units == 0 {
                        return Err(bad("no units".into()));
                    }
                    Shape::new(units, 1, 1)
                }
                LayerSpec::SoftmaxOut { classes } => {
                    if i + 1 != layers.len() {
                        return Err(bad("softmax output must be the last layer".into()));
                    }
                    if classes < 2 {
                        return Err(bad("need at least two classes".into()));
                    }
                    Shape::new(classes, 1, 1)
                }
            };
            shapes.push(cur);
        }
        Ok(NetworkSpec { input, layers, shapes })
    }

    pub fn input(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Shape entering layer `i` (`i == layers().len()` gives the output shape).
    pub fn shape_in(&self, i: usize) -> Shape {
        if i == 0 {
            self.input
        } else {
            self.shapes[i - 1]
        }
    }

    pub fn output(&self) -> Shape {
        self.shape_in(self.layers.len())
    }

    /// Class count when the chain ends in a softmax output.
    pub fn classes(&self) -> Option<usize> {
        match self.layers.last() {
            Some(LayerSpec::SoftmaxOut { classes }) => Some(*classes),
            _ => None,
        }
    }

    /// Weight extents and bias length of learnable layer `i`.
    pub fn param_shape(&self, i: usize) -> Option<(Vec<usize>, usize)> {
        let inp = self.shape_in(i);
        match self.layers[i] {
            LayerSpec::Conv { filters, kernel, .. } => Some((vec![filters, inp.c, kernel, kernel], filters)),
            LayerSpec::Fc { units } => Some((vec![units, inp.len()], units)),
            LayerSpec::SoftmaxOut { classes } => Some((vec![classes, inp.len()], classes)),
            _ => None,
        }
    }

    /// Same chain with every dropout probability set to `p`.
    pub fn with_dropout(&self, p: f64) -> Result<Self, CnnError> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                LayerSpec::Dropout { .. } => LayerSpec::Dropout { p },
                other => *other,
            })
            .collect();
        NetworkSpec::new(self.input, layers)
    }
}

/// The reference two-conv network on 72×72 inputs.
pub fn reference_spec(classes: usize) -> Result<NetworkSpec, CnnError> {
    if !(2..=3).contains(&classes) {
        return Err(CnnError::Spec(format!("reference network has 2 or 3 classes, not {classes}")));
    }
    NetworkSpec::new(
        PAIR_INPUT,
        vec![
            LayerSpec::Conv { filters: 6, kernel: 5, stride: 1 },
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 3, stride: 3 },
            LayerSpec::Conv { filters: 14, kernel: 5, stride: 1 },
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 3, stride: 3 },
            LayerSpec::Dropout { p: DEFAULT_DROPOUT },
            LayerSpec::Fc { units: 120 },
            LayerSpec::Relu,
            LayerSpec::SoftmaxOut { classes },
        ],
    )
}

/// Learnable weights plus biases over all layers.
pub fn param_count(spec: &NetworkSpec) -> usize {
    (0..spec.layers().len())
        .filter_map(|i| spec.param_shape(i))
        .map(|(w, b)| w.iter().product::<usize>() + b)
        .sum()
}
