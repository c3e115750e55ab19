mod common;

use common::checks;
use common::*;
use greenspoof::classifiers::knn::Knn;
use greenspoof::classifiers::tree::DecisionTree;
use greenspoof::classifiers::{
    fit_samples, read_model, write_model, Criterion, Hyperparams, LrSchedule, ModelBundle,
    OutputHead, Samples, TrainConfig,
};
use greenspoof::features::Standardizer;
use greenspoof::Label;

fn all_cells() -> Vec<Hyperparams> {
    vec![
        Hyperparams::Knn { k: 3 },
        Hyperparams::LogReg { c: 0.5 },
        Hyperparams::SvmRbf {
            c: 1.0,
            gamma: None,
        },
        Hyperparams::GaussianNb {
            var_smoothing: 1e-9,
        },
        Hyperparams::DecisionTree {
            criterion: Criterion::Entropy,
            max_depth: 5,
        },
        Hyperparams::Mlp {
            hidden: 8,
            batch_size: 16,
            schedule: LrSchedule::InvScaling,
            alpha: 1e-4,
            head: OutputHead::SoftmaxPair,
        },
    ]
}

fn flip(labels: &[Label]) -> Vec<Label> {
    labels
        .iter()
        .map(|&l| {
            if l == Label::Bonafide {
                Label::Spoof
            } else {
                Label::Bonafide
            }
        })
        .collect()
}

#[test]
fn gnb_matches_closed_form() {
    checks::gnb_closed_form().unwrap();
}

#[test]
fn svm_matches_kernel_expansion_and_kkt() {
    checks::svm_kernel_sum_and_kkt().unwrap();
}

#[test]
fn svm_dual_objective_never_decreases() {
    checks::svm_dual_non_decreasing().unwrap();
}

#[test]
fn logreg_reaches_a_stationary_point() {
    checks::logreg_stationary().unwrap();
}

#[test]
fn mlp_backprop_matches_finite_differences() {
    checks::mlp_gradient(OutputHead::Sigmoid).unwrap();
    checks::mlp_gradient(OutputHead::SoftmaxPair).unwrap();
}

#[test]
fn every_algorithm_is_deterministic() {
    let (rows, labels) = small_problem(21, 80, 4, 0.8);
    let s = Samples::from_rows(&rows, labels).unwrap();
    for h in all_cells() {
        let cfg = TrainConfig::new(h, 77);
        let a = fit_samples(&cfg, &s, Some(&s)).unwrap();
        let b = fit_samples(&cfg, &s, Some(&s)).unwrap();
        assert_eq!(a, b, "{}", h.canonical());
    }
}

#[test]
fn flipping_labels_mirrors_logreg_and_svm() {
    let (rows, labels) = small_problem(23, 90, 3, 0.5);
    let (probe, _) = small_problem(24, 30, 3, 0.0);
    let s = Samples::from_rows(&rows, labels.clone()).unwrap();
    let f = Samples::from_rows(&rows, flip(&labels)).unwrap();
    for h in [
        Hyperparams::LogReg { c: 1.0 },
        Hyperparams::SvmRbf {
            c: 1.0,
            gamma: None,
        },
    ] {
        let a = fit_samples(&TrainConfig::new(h, 1), &s, None).unwrap();
        let b = fit_samples(&TrainConfig::new(h, 1), &f, None).unwrap();
        for x in &probe {
            let (sa, sb) = (a.score(x).unwrap(), b.score(x).unwrap());
            let mirrored = if matches!(h, Hyperparams::LogReg { .. }) {
                1.0 - sb
            } else {
                -sb
            };
            assert!(
                (sa - mirrored).abs() < 1e-6,
                "{}: {sa} vs {mirrored}",
                h.canonical()
            );
        }
    }
}

#[test]
fn deep_tree_fits_distinct_points() {
    let (rows, labels) = small_problem(25, 200, 3, 0.2);
    let s = Samples::from_rows(&rows, labels.clone()).unwrap();
    for c in [Criterion::Gini, Criterion::Entropy] {
        let t = DecisionTree::fit(&s, c, 150);
        for (x, l) in rows.iter().zip(&labels) {
            let want = if *l == Label::Bonafide { 1.0 } else { 0.0 };
            assert_eq!(t.score(x), want);
        }
        assert_eq!(
            t.param_count(),
            2 * (t.node_count() - t.leaf_count()) + t.leaf_count()
        );
    }
}

#[test]
fn one_nearest_neighbour_recalls_training_labels() {
    let (rows, labels) = small_problem(27, 60, 4, 0.1);
    let knn = Knn::fit(&Samples::from_rows(&rows, labels.clone()).unwrap(), 1).unwrap();
    for (x, l) in rows.iter().zip(&labels) {
        assert_eq!(knn.score(x), if *l == Label::Bonafide { 1.0 } else { 0.0 });
    }
    assert!(Knn::fit(&Samples::from_rows(&rows, labels).unwrap(), 61).is_err());
}

#[test]
fn knn_score_matches_bruteforce_vote() {
    let (rows, labels) = small_problem(29, 50, 3, 0.3);
    let (probe, _) = small_problem(30, 20, 3, 0.0);
    let knn = Knn::fit(&Samples::from_rows(&rows, labels.clone()).unwrap(), 5).unwrap();
    for q in &probe {
        let d: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum())
            .collect();
        let nn = &argsort(&d)[..5];
        let want = nn.iter().filter(|&&i| labels[i] == Label::Bonafide).count() as f64 / 5.0;
        assert_eq!(knn.score(q), want);
    }
}

#[test]
fn models_survive_a_round_trip() {
    let (rows, labels) = small_problem(31, 60, 4, 0.8);
    let (probe, _) = small_problem(32, 15, 4, 0.0);
    let s = Samples::from_rows(&rows, labels).unwrap();
    let vs: Vec<_> = rows
        .iter()
        .enumerate()
        .map(|(i, v)| greenspoof::features::PooledVector {
            utt_id: format!("u{i}"),
            layer: 3,
            values: v.clone(),
        })
        .collect();
    for (k, h) in all_cells().into_iter().enumerate() {
        let bundle = ModelBundle {
            scorer: fit_samples(&TrainConfig::new(h, 5), &s, None).unwrap(),
            standardizer: (k % 2 == 0).then(|| Standardizer::fit(&vs).unwrap()),
            layer: 3,
            threshold: 0.25,
        };
        let mut bytes = Vec::new();
        write_model(&bundle, &mut bytes).unwrap();
        let back = read_model(std::io::Cursor::new(&bytes)).unwrap();
        assert_eq!(back, bundle, "{}", h.canonical());
        for x in &probe {
            assert_eq!(
                back.score(x).unwrap().to_bits(),
                bundle.score(x).unwrap().to_bits()
            );
        }
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(again, bytes);
    }
}

#[test]
fn corrupt_model_files_are_rejected() {
    let (rows, labels) = small_problem(33, 20, 2, 1.0);
    let s = Samples::from_rows(&rows, labels).unwrap();
    let bundle = ModelBundle {
        scorer: fit_samples(
            &TrainConfig::new(Hyperparams::LogReg { c: 1.0 }, 0),
            &s,
            None,
        )
        .unwrap(),
        standardizer: None,
        layer: 0,
        threshold: 0.5,
    };
    let mut bytes = Vec::new();
    write_model(&bundle, &mut bytes).unwrap();
    assert!(read_model(std::io::Cursor::new(&bytes[..bytes.len() - 3])).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'Z';
    assert!(read_model(std::io::Cursor::new(&bad)).is_err());
}

#[test]
fn parameter_counts_follow_conventions() {
    let (rows, labels) = small_problem(35, 40, 768, 0.2);
    let s = Samples::from_rows(&rows, labels).unwrap();
    let count = |h| {
        fit_samples(&TrainConfig::new(h, 0), &s, None)
            .unwrap()
            .param_count()
    };
    assert_eq!(count(Hyperparams::LogReg { c: 1.0 }), 769);
    assert_eq!(
        count(Hyperparams::GaussianNb {
            var_smoothing: 1e-9
        }),
        4 * 768 + 2
    );
    assert_eq!(count(Hyperparams::Knn { k: 3 }), 0);
    let mlp = |head| Hyperparams::Mlp {
        hidden: 100,
        batch_size: 32,
        schedule: LrSchedule::Constant,
        alpha: 1e-4,
        head,
    };
    assert_eq!(count(mlp(OutputHead::Sigmoid)), 77_001);
    assert_eq!(count(mlp(OutputHead::SoftmaxPair)), 77_102);
    let svm = fit_samples(
        &TrainConfig::new(
            Hyperparams::SvmRbf {
                c: 1.0,
                gamma: None,
            },
            0,
        ),
        &s,
        None,
    )
    .unwrap();
    match &svm.model {
        greenspoof::classifiers::Model::SvmRbf(m) => {
            assert_eq!(svm.param_count(), m.support_count() + 1)
        }
        _ => unreachable!(),
    }
}
