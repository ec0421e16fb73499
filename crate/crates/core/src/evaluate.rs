//! Accuracy, confusion matrices and person-disjoint k-fold evaluation.

use serde::Serialize;
use thiserror::Error;

use crate::cnn::{predict_batch, train, CnnError, NetworkSpec, NetworkState, TrainConfig};
use crate::dataset::{kfold_split, DatasetError, Label, LabeledSet};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate: the set is empty")]
    Empty,
    #[error("label {label} is outside the network's {classes} classes")]
    Classes { label: usize, classes: usize },
    #[error("{0}")]
    Argument(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Counts of (true class, predicted class) pairs; rows are true classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

/// Row-normalized confusion values. Rows with no samples stay zero and are
/// listed in `empty_rows`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedConfusion {
    pub rows: Vec<Vec<f64>>,
    pub empty_rows: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; k]; k] }
    }

    /// Build from (true, predicted) pairs. Panics on a class index ≥ `k`.
    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = ConfusionMatrix::new(k);
        for (t, p) in pairs {
            m.record(t, p);
        }
        m
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    pub fn normalized(&self) -> NormalizedConfusion {
        normalize_confusion(&self.counts)
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }
}

pub fn normalize_confusion(counts: &[Vec<u64>]) -> NormalizedConfusion {
    let mut empty_rows = Vec::new();
    let rows = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let sum: u64 = row.iter().sum();
            if sum == 0 {
                empty_rows.push(i);
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&c| c as f64 / sum as f64).collect()
            }
        })
        .collect();
    NormalizedConfusion { rows, empty_rows }
}

/// Infer-mode accuracy and confusion matrix of `state` on `set`.
pub fn evaluate(state: &NetworkState<f32>, set: &LabeledSet) -> Result<(f64, ConfusionMatrix), EvalError> {
    if set.is_empty() {
        return Err(EvalError::Empty);
    }
    let classes = state.classes();
    if let Some(bad) = set.labels().into_iter().find(|l| l.index() >= classes) {
        return Err(EvalError::Classes { label: bad.index(), classes });
    }
    let imgs: Vec<_> = set.images().iter().collect();
    let preds = predict_batch(state, &imgs)?;
    let m = ConfusionMatrix::from_pairs(classes, set.labels().iter().zip(&preds).map(|(l, (p, _))| (l.index(), p.index())));
    assert_eq!(m.total(), set.len() as u64);
    assert_eq!(m.accuracy(), m.trace() as f64 / m.total() as f64);
    assert!(m.normalized().rows.iter().zip(m.counts()).all(|(r, c)| {
        c.iter().sum::<u64>() == 0 || (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }));
    Ok((m.accuracy(), m))
}

/// A fraction as a percentage rounded to two decimals.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

pub fn mean_accuracy(folds: &[f64]) -> f64 {
    if folds.is_empty() {
        return 0.0;
    }
    folds.iter().sum::<f64>() / folds.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Percent, two decimals.
    pub accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValReport {
    pub class_mode: usize,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the fold accuracies, in percent.
    pub mean_accuracy: f64,
    /// Pooled over all test folds.
    pub confusion: ConfusionMatrix,
    pub normalized: NormalizedConfusion,
    pub config: TrainConfig,
}

impl CrossValReport {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.folds.iter().map(|f| f.test_size).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Person-disjoint k-fold cross-validation. Persons are assigned to folds
/// with `config.seed`; fold `i` is evaluated by a network trained on the
/// other folds. With `class_mode == 2` the undetermined class is dropped
/// from both sides before training.
pub fn run_kfold(
    spec: &NetworkSpec,
    set: &LabeledSet,
    k: usize,
    config: &TrainConfig,
    class_mode: usize,
) -> Result<CrossValReport, EvalError> {
    if !(2..=3).contains(&class_mode) {
        return Err(EvalError::Argument(format!("class mode must be 2 or 3, not {class_mode}")));
    }
    if spec.classes() != Some(class_mode) {
        return Err(EvalError::Argument(format!(
            "network has {:?} outputs but class mode is {class_mode}",
            spec.classes()
        )));
    }
    let plan = kfold_split(set.manifest(), k, config.seed)?;
    let keep = [Label::RIGHT, Label::LEFT];
    let mut folds = Vec::with_capacity(k);
    let mut pooled = ConfusionMatrix::new(class_mode);
    for fold in 0..k {
        let annotate = |e: EvalError| EvalError::Fold { fold, source: Box::new(e) };
        let (mut tr, mut te) = set.fold_split(&plan, fold).map_err(|e| annotate(e.into()))?;
        if class_mode == 2 {
            tr = tr.filter_classes(&keep).0;
            te = te.filter_classes(&keep).0;
            assert!(
                tr.labels().iter().chain(te.labels().iter()).all(|l| *l != Label::UNDETERMINED),
                "class 2 leaked into a 2-class fold"
            );
        }
        let (state, _) = train(spec, &tr, None, config).map_err(|e| annotate(e.into()))?;
        let (acc, confusion) = evaluate(&state, &te).map_err(annotate)?;
        pooled.add(&confusion);
        folds.push(FoldResult {
            fold,
            accuracy: percent(acc),
            train_size: tr.len(),
            test_size: te.len(),
            confusion,
        });
    }
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    Ok(CrossValReport {
        class_mode,
        k,
        seed: config.seed,
        mean_accuracy: mean_accuracy(&accs),
        normalized: pooled.normalized(),
        confusion: pooled,
        folds,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let n = normalize_confusion(&[vec![1, 1, 2], vec![0, 0, 0], vec![0, 0, 5]]);
        assert_eq!(n.rows[0], vec![0.25, 0.25, 0.5]);
        assert_eq!(n.rows[1], vec![0.0; 3]);
        assert_eq!(n.empty_rows, vec![1]);
        let id = normalize_confusion(&[vec![3, 0], vec![0, 7]]);
        assert_eq!(id.rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(id.empty_rows.is_empty());
    }

    #[test]
    fn oracle_and_constant_predictors() {
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let oracle = ConfusionMatrix::from_pairs(3, truth.iter().map(|&t| (t, t)));
        assert_eq!(oracle.accuracy(), 1.0);
        assert_eq!(oracle.counts(), &[vec![10, 0, 0], vec![0, 10, 0], vec![0, 0, 10]]);
        let constant = ConfusionMatrix::from_pairs(3, truth.iter().map(|&t| (t, 0)));
        assert_eq!(constant.accuracy(), 1.0 / 3.0);
        assert!(constant.counts().iter().all(|r| r[0] == 10 && r[1] == 0 && r[2] == 0));
    }

    #[test]
    fn mean_of_published_folds() {
        let m = mean_accuracy(&[89.65, 88.61, 90.45, 93.29, 85.70]);
        assert!((m - 89.54).abs() < 1e-9);
        assert_eq!(percent(0.895_449), 89.54);
        assert_eq!(percent(1.0), 100.0);
    }

    proptest! {
        #[test]
        fn matrix_invariants(pairs in proptest::collection::vec((0usize..3, 0usize..3), 0..300)) {
            let m = ConfusionMatrix::from_pairs(3, pairs.iter().copied());
            prop_assert_eq!(m.total(), pairs.len() as u64);
            let correct = pairs.iter().filter(|(t, p)| t == p).count();
            if !pairs.is_empty() {
                prop_assert_eq!(m.accuracy(), correct as f64 / pairs.len() as f64);
            }
            let n = m.normalized();
            for (i, row) in n.rows.iter().enumerate() {
                if n.empty_rows.contains(&i) {
                    prop_assert!(row.iter().all(|v| *v == 0.0));
                } else {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
            }
        }
    }
}
