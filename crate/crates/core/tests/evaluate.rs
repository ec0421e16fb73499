mod support;

use gaze_core::cnn::{reference_spec, train, TrainConfig};
use gaze_core::dataset::{kfold_split, synth_generate, Label, LabeledSet, SynthParams};
use gaze_core::evaluate::{evaluate, run_kfold, ConfusionMatrix, EvalError};

fn easy(n: usize, persons: usize, seed: u64) -> LabeledSet {
    synth_generate(seed, &SynthParams::new(n, [0.34, 0.33, 0.33], persons).easy()).unwrap()
}

fn check(m: &ConfusionMatrix, n: usize, acc: f64) {
    assert_eq!(m.total(), n as u64);
    assert_eq!(acc, m.trace() as f64 / m.total() as f64);
    let norm = m.normalized();
    for (i, row) in norm.rows.iter().enumerate() {
        if !norm.empty_rows.contains(&i) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn easy_synthetic_folds_are_near_perfect() {
    let set = easy(400, 10, 5);
    let config = TrainConfig { iterations: 200, batch: 32, ..TrainConfig::default() };
    let report = run_kfold(&reference_spec(3).unwrap(), &set, 5, &config, 3).unwrap();
    println!("{:?} mean {}", report.fold_accuracies(), report.mean_accuracy);
    assert_eq!(report.folds.len(), 5);
    assert!(report.fold_accuracies().iter().all(|&a| a >= 99.0));
    assert_eq!(report.fold_sizes().iter().sum::<usize>(), set.len());
    let mean = report.fold_accuracies().iter().sum::<f64>() / 5.0;
    assert_eq!(report.mean_accuracy, mean);
    assert_eq!(report.confusion.total(), set.len() as u64);
    for f in &report.folds {
        check(&f.confusion, f.test_size, f.confusion.accuracy());
        assert_eq!(f.train_size + f.test_size, set.len());
    }

    let plan = kfold_split(set.manifest(), 5, config.seed).unwrap();
    for fold in 0..5 {
        let (tr, te) = set.fold_split(&plan, fold).unwrap();
        let a = tr.manifest().persons();
        assert!(te.manifest().persons().iter().all(|p| !a.contains(p)));
    }
}

#[test]
fn two_class_mode_drops_undetermined_and_is_reproducible() {
    let set = easy(150, 5, 6);
    let config = TrainConfig { iterations: 15, batch: 10, ..TrainConfig::default() };
    let spec = reference_spec(2).unwrap();
    let a = run_kfold(&spec, &set, 5, &config, 2).unwrap();
    let b = run_kfold(&spec, &set, 5, &config, 2).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let two = set.labels().iter().filter(|l| **l != Label::UNDETERMINED).count();
    assert_eq!(a.fold_sizes().iter().sum::<usize>(), two);
    assert_eq!(a.confusion.k(), 2);
    assert!(a.to_json().contains("\"mean_accuracy\""));

    assert!(matches!(run_kfold(&spec, &set, 5, &config, 3), Err(EvalError::Argument(_))));
    assert!(run_kfold(&spec, &set, 6, &config, 2).is_err());
}

#[test]
fn training_failures_name_the_fold() {
    let set = easy(100, 5, 7);
    let config = TrainConfig { iterations: 50, batch: 10, learning_rate: 1.0, lr_decay: 1e4, lr_step: 1, ..TrainConfig::default() };
    let err = run_kfold(&reference_spec(3).unwrap(), &set, 5, &config, 3).unwrap_err();
    assert!(matches!(err, EvalError::Fold { fold: 0, .. }), "{err}");
    assert!(err.to_string().starts_with("fold 0: training diverged"));
}

#[test]
fn evaluate_checks_arity_and_emptiness() {
    let set = easy(60, 3, 8);
    let config = TrainConfig { iterations: 5, batch: 8, ..TrainConfig::default() };
    let (state3, _) = train(&reference_spec(3).unwrap(), &set, None, &config).unwrap();
    let (acc, m) = evaluate(&state3, &set).unwrap();
    check(&m, set.len(), acc);
    let (state2, _) = train(&reference_spec(2).unwrap(), &set.filter_classes(&[Label::RIGHT, Label::LEFT]).0, None, &config).unwrap();
    assert!(matches!(evaluate(&state2, &set), Err(EvalError::Classes { label: 2, classes: 2 })));
    assert!(matches!(evaluate(&state3, &set.subset(&[]).unwrap()), Err(EvalError::Empty)));
}
