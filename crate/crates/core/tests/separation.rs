use acousep_core::fastica::{self, Contrast, FastIcaConfig};
use acousep_core::linalg::distance_from_identity;
use acousep_core::metrics::score_separation;
use acousep_core::mixing::{self, random_mixing_matrix, MixingModel};
use acousep_core::signals::{synthesize, Signal, SourceClass, SourceSpec};
use ndarray::Array2;

const RATE: u32 = 24_000;

fn six_sources(seed: u64, len: usize) -> Vec<Signal<f64>> {
    SourceClass::ALL
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let spec = SourceSpec::preset(c, seed * 100 + i as u64);
            synthesize::<f64>(&spec, len as f64 / RATE as f64, RATE).unwrap()
        })
        .collect()
}

#[test]
fn six_sources_random_mixing() {
    let mut sirs = Vec::new();
    for seed in 1..=5u64 {
        let sources = six_sources(seed, 10_000);
        let model = random_mixing_matrix::<f64>(6, seed).unwrap();
        let block = mixing::mix(&sources, &model).unwrap();
        let cfg = FastIcaConfig {
            seed,
            ..FastIcaConfig::default()
        };
        let res = fastica::separate(&block, &cfg).unwrap();
        assert!(
            res.converged,
            "seed {seed}: {} iterations",
            res.iterations_used
        );
        let ortho = res.rotation.dot(&res.rotation.t());
        assert!(distance_from_identity(&ortho) <= 1e-8);
        let truth = &block.truth().unwrap().sources;
        let score = score_separation(&res.sources, truth).unwrap();
        println!(
            "seed {seed}: it {} sir {:?} corr {:?}",
            res.iterations_used, score.sir_db, score.alignment.correlations
        );
        for c in &score.alignment.correlations {
            assert!(c.abs() >= 0.95, "seed {seed}: correlation {c}");
        }
        sirs.push(score.mean_sir_db);
    }
    let mean = sirs.iter().sum::<f64>() / sirs.len() as f64;
    assert!(mean >= 20.0, "mean SIR {mean}");
}

#[test]
fn output_rows_have_unit_variance_and_match_unmixing() {
    let sources = six_sources(9, 4000);
    let model = random_mixing_matrix::<f64>(6, 9).unwrap();
    let block = mixing::mix(&sources, &model).unwrap();
    let res = fastica::separate(&block, &FastIcaConfig::default()).unwrap();
    for row in res.sources.outer_iter() {
        let var = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        assert!((var - 1.0).abs() < 1e-6, "variance {var}");
    }
    let (centered, mean) = fastica::center(&block);
    assert_eq!(mean, res.whitener.mean);
    assert_eq!(res.unmixing.dot(&centered), res.sources);
}

#[test]
fn identity_mixing_of_whitened_sources() {
    let sources = six_sources(4, 10_000);
    let s = Array2::from_shape_fn((6, 10_000), |(i, n)| sources[i].samples()[n]);
    let (c, _) = fastica::center_rows(&s);
    let cov = acousep_core::linalg::row_covariance(&c);
    let white = acousep_core::linalg::inverse_sqrt_spd(&cov)
        .unwrap()
        .dot(&c);
    let signals: Vec<Signal<f64>> = white
        .outer_iter()
        .map(|r| Signal::new(r.to_vec(), RATE, SourceClass::Unknown).unwrap())
        .collect();
    let block = mixing::mix(&signals, &MixingModel::identity(6)).unwrap();
    for contrast in [Contrast::Tanh, Contrast::Gauss, Contrast::Cubic] {
        let cfg = FastIcaConfig {
            contrast,
            ..FastIcaConfig::default()
        };
        let res = fastica::separate(&block, &cfg).unwrap();
        let score = score_separation(&res.sources, &white).unwrap();
        println!("{contrast}: {:?}", score.sir_db);
    }
}

#[test]
fn gaussian_sources_still_return() {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = acousep_core::rng::from_seed(3);
    let x = Array2::from_shape_fn((3, 2000), |_| {
        let v: f64 = StandardNormal.sample(&mut r);
        v
    });
    let block = mixing::MixedBlock::new(x, RATE).unwrap();
    let cfg = FastIcaConfig {
        max_iterations: 20,
        ..FastIcaConfig::default()
    };
    let res = fastica::separate(&block, &cfg).unwrap();
    assert!(res.sources.iter().all(|v| v.is_finite()));
}
