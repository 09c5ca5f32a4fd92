use acousep_core::classify::{
    knn, svm, ClassifierConfig, ClassifierKind, Detection, SvmConfig, TrainedClassifier,
};
use acousep_core::features::{FeatureMethod, FeatureVector};
use acousep_core::linalg;
use acousep_core::rng;
use acousep_core::signals::SourceClass;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

fn clusters(seed: u64, n: usize, p: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<Detection>) {
    let mut r = rng::from_seed(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let drone = i % 2 == 0;
        let shift = if drone { gap / 2.0 } else { -gap / 2.0 };
        x.push(
            (0..p)
                .map(|d| normal(&mut r) + if d == 0 { shift } else { 0.0 })
                .collect(),
        );
        y.push(if drone {
            Detection::Drone
        } else {
            Detection::NonDrone
        });
    }
    (x, y)
}

#[test]
fn svm_separates_distant_clusters() {
    let (x, y) = clusters(4, 200, 9, 10.0);
    let m = svm::train(&x, &y, &SvmConfig::with_c(1.0)).unwrap();
    assert!(m.converged);
    for (v, l) in x.iter().zip(&y) {
        assert_eq!(m.predict(v).unwrap().0, *l);
    }
}

#[test]
fn svm_margins_hold_for_non_slack_points() {
    let (x, y) = clusters(5, 120, 4, 4.0);
    let m = svm::train(&x, &y, &SvmConfig::with_c(0.5)).unwrap();
    // points strictly outside the support set carry no slack
    let support: std::collections::HashSet<usize> = m.support_indices.iter().copied().collect();
    for (i, (v, l)) in x.iter().zip(&y).enumerate() {
        if !support.contains(&i) {
            let d = m.decision(v).unwrap();
            assert!(l.sign() * d >= 1.0 - 1e-3, "point {i}: {}", l.sign() * d);
        }
    }
}

#[test]
fn knn_matches_brute_force_sort() {
    let (x, y) = clusters(6, 300, 9, 1.5);
    let m = knn::train(&x, &y, 5).unwrap();
    let mut r = rng::from_seed(60);
    for _ in 0..1000 {
        let q: Vec<f64> = (0..9).map(|_| 2.0 * normal(&mut r)).collect();
        let mut naive: Vec<(f64, usize)> = x
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d: Vec<f64> = v.iter().zip(&q).map(|(a, b)| a - b).collect();
                let mut s = 0.0;
                for a in 0..9 {
                    for b in 0..9 {
                        s += d[a] * m.inv_cov[[a, b]] * d[b];
                    }
                }
                (s, i)
            })
            .collect();
        naive.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let top: Vec<usize> = naive[..5].iter().map(|p| p.1).collect();
        let ranked: Vec<usize> = m.ranked(&q).unwrap()[..5].iter().map(|p| p.0).collect();
        assert_eq!(top, ranked);
        let votes = top.iter().filter(|&&i| y[i].is_drone()).count();
        let expected = if votes >= 3 {
            Detection::Drone
        } else {
            Detection::NonDrone
        };
        assert_eq!(m.predict(&q).unwrap(), expected);
    }
}

#[test]
fn knn_self_classification_with_k1() {
    let (x, y) = clusters(7, 200, 9, 0.5);
    let m = knn::train(&x, &y, 1).unwrap();
    for (v, l) in x.iter().zip(&y) {
        assert_eq!(m.predict(v).unwrap(), *l);
    }
}

#[test]
fn knn_inverse_covariance_of_standardized_data() {
    let mut r = rng::from_seed(9);
    let n = 1000;
    let p = 9;
    let mut x = Array2::from_shape_fn((n, p), |_| normal(&mut r));
    for mut col in x.columns_mut() {
        let m = col.sum() / n as f64;
        let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt();
        col.mapv_inplace(|v| (v - m) / s);
    }
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let labels = vec![Detection::NonDrone; n];
    let m = knn::train(&rows, &labels, 1).unwrap();
    assert_eq!(m.ridge, 0.0);
    let mean_dev = m
        .inv_cov
        .indexed_iter()
        .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .sum::<f64>()
        / (p * p) as f64;
    assert!(mean_dev <= 0.05, "mean deviation {mean_dev}");
    let e = linalg::symmetric_eigen(&m.inv_cov).unwrap();
    assert!(e.values.iter().all(|&v| v > 1e-8));
    for i in 0..p {
        for j in 0..p {
            assert_eq!(m.inv_cov[[i, j]], m.inv_cov[[j, i]]);
        }
    }
}

#[test]
fn knn_labels_survive_affine_transforms() {
    let (x, y) = clusters(10, 150, 9, 1.0);
    let base = knn::train(&x, &y, 5).unwrap();
    let mut r = rng::from_seed(11);
    let queries: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..9).map(|_| 1.5 * normal(&mut r)).collect())
        .collect();
    for t in 0..5 {
        let a = loop {
            let a = Array2::from_shape_fn((9, 9), |_| r.random_range(-1.0..1.0));
            if linalg::condition_number(&a).unwrap() < 50.0 {
                break a;
            }
        };
        let shift: Vec<f64> = (0..9).map(|_| r.random_range(-3.0..3.0)).collect();
        let map = |v: &Vec<f64>| -> Vec<f64> {
            (0..9)
                .map(|i| (0..9).map(|j| a[[i, j]] * v[j]).sum::<f64>() + shift[i])
                .collect()
        };
        let xt: Vec<Vec<f64>> = x.iter().map(map).collect();
        let mt = knn::train(&xt, &y, 5).unwrap();
        for q in &queries {
            assert_eq!(
                base.predict(q).unwrap(),
                mt.predict(&map(q)).unwrap(),
                "transform {t}"
            );
        }
    }
}

fn feature_set(seed: u64) -> Vec<FeatureVector<f64>> {
    let (x, y) = clusters(seed, 40, 9, 6.0);
    x.into_iter()
        .zip(y)
        .map(|(v, l)| {
            let class = if l.is_drone() {
                SourceClass::Drone
            } else {
                SourceClass::Rain
            };
            FeatureVector::new(FeatureMethod::RmsPsd9, class, 1000, v).unwrap()
        })
        .collect()
}

#[test]
fn trained_classifiers_round_trip_through_json() {
    let set = feature_set(12);
    let dir = tempfile::tempdir().unwrap();
    for kind in ClassifierKind::ALL {
        let model = TrainedClassifier::train(kind, &set, &ClassifierConfig::default()).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        model.save(&path).unwrap();
        let back = TrainedClassifier::<f64>::load(&path).unwrap();
        assert_eq!(back, model);
        for v in &set {
            assert_eq!(back.predict(v).unwrap(), model.predict(v).unwrap());
        }
        let wrong = FeatureVector::new(FeatureMethod::Psd9, SourceClass::Drone, 1000, vec![0.0; 9])
            .unwrap();
        assert!(model.predict(&wrong).is_err());
    }
}

#[test]
fn unknown_labels_cannot_train() {
    let mut set = feature_set(13);
    set[0].label = SourceClass::Unknown;
    assert!(
        TrainedClassifier::train(ClassifierKind::Svm, &set, &ClassifierConfig::default()).is_err()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svm_sign_invariant_under_positive_rescaling(
        seed in 0u64..1000,
        scale in 0.01f64..100.0,
        q in proptest::collection::vec(-5.0f64..5.0, 3),
    ) {
        let (x, y) = clusters(seed, 30, 3, 3.0);
        let m = svm::train(&x, &y, &SvmConfig::default()).unwrap();
        let mut scaled = m.clone();
        scaled.z.iter_mut().for_each(|v| *v *= scale);
        scaled.b *= scale;
        prop_assert_eq!(m.predict(&q).unwrap().0, scaled.predict(&q).unwrap().0);
    }

    #[test]
    fn mahalanobis_is_a_symmetric_nonnegative_form(
        seed in 0u64..1000,
        a in proptest::collection::vec(-5.0f64..5.0, 4),
        b in proptest::collection::vec(-5.0f64..5.0, 4),
    ) {
        let (x, y) = clusters(seed, 40, 4, 1.0);
        let m = knn::train(&x, &y, 3).unwrap();
        let (dab, dba) = (m.distance(&a, &b), m.distance(&b, &a));
        prop_assert!(dab >= 0.0);
        prop_assert!((dab - dba).abs() <= 1e-12 * dab.max(1.0));
        prop_assert_eq!(m.distance(&a, &a), 0.0);
        if a != b {
            prop_assert!(dab > 0.0);
        }
    }

    #[test]
    fn knn_is_deterministic(seed in 0u64..1000) {
        let (x, y) = clusters(seed, 25, 3, 1.0);
        let m1 = knn::train(&x, &y, 3).unwrap();
        let m2 = knn::train(&x, &y, 3).unwrap();
        prop_assert_eq!(m1, m2);
    }
}
