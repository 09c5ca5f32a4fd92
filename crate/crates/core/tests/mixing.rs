use acousep_core::mixing::{self, random_mixing_matrix, MixingModel, MAX_CONDITION};
use acousep_core::rng;
use acousep_core::signals::{Signal, SourceClass};
use ndarray::Array2;
use rand::Rng;

fn random_sources(seed: u64, j: usize, l: usize) -> Vec<Signal<f64>> {
    let mut r = rng::from_seed(seed);
    (0..j)
        .map(|_| {
            let x = (0..l).map(|_| r.random_range(-1.0..1.0)).collect();
            Signal::new(x, 8000, SourceClass::Unknown).unwrap()
        })
        .collect()
}

fn svd_condition(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let s = m.singular_values();
    s.max() / s.min()
}

#[test]
fn product_matches_naive_loop() {
    let sources = random_sources(1, 4, 300);
    let model = random_mixing_matrix::<f64>(4, 2).unwrap();
    let block = mixing::mix(&sources, &model).unwrap();
    let a = model.matrix();
    for j in 0..4 {
        for n in 0..300 {
            let mut s = 0.0;
            for i in 0..4 {
                s += a[[j, i]] * sources[i].samples()[n];
            }
            assert!((block.data()[[j, n]] - s).abs() <= 1e-12);
        }
    }
}

#[test]
fn generated_matrices_respect_the_condition_cap() {
    for seed in 1..=20 {
        for n in [2, 6, 10] {
            let model = random_mixing_matrix::<f64>(n, seed).unwrap();
            let c = svd_condition(model.matrix());
            assert!(c <= MAX_CONDITION * (1.0 + 1e-9), "seed {seed} n {n}: {c}");
            assert!((c - model.condition_number()).abs() <= 1e-6 * c);
        }
    }
}

#[test]
fn mixing_is_linear() {
    let a = random_sources(3, 3, 200);
    let b = random_sources(4, 3, 200);
    let model = random_mixing_matrix::<f64>(3, 5).unwrap();
    let (alpha, beta) = (0.7, -2.5);
    let combo: Vec<Signal<f64>> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            let v = x
                .samples()
                .iter()
                .zip(y.samples())
                .map(|(p, q)| alpha * p + beta * q)
                .collect();
            Signal::new(v, 8000, SourceClass::Unknown).unwrap()
        })
        .collect();
    let xa = mixing::mix(&a, &model).unwrap();
    let xb = mixing::mix(&b, &model).unwrap();
    let xc = mixing::mix(&combo, &model).unwrap();
    let expected = xa.data() * alpha + xb.data() * beta;
    for (x, y) in xc.data().iter().zip(&expected) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn inverse_reconstructs_sources() {
    for seed in 1..=10 {
        let sources = random_sources(seed, 5, 400);
        let model = random_mixing_matrix::<f64>(5, seed).unwrap();
        let block = mixing::mix(&sources, &model).unwrap();
        let back = model.inverse().unwrap().dot(block.data());
        for (i, s) in sources.iter().enumerate() {
            for (x, y) in back.row(i).iter().zip(s.samples()) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn mismatched_sources_are_rejected() {
    let mut s = random_sources(1, 3, 100);
    let model = MixingModel::<f64>::identity(3);
    assert!(mixing::mix(&s[..2], &model).is_err());
    s[1] = s[1].truncated(50).unwrap();
    assert!(mixing::mix(&s, &model).is_err());
}
