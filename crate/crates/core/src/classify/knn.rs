//! k-nearest-neighbour voting under the Mahalanobis distance.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

pub const DEFAULT_K: usize = 5;

/// Covariance conditioning below which a ridge is added before inversion.
const RIDGE_TRIGGER: f64 = 1e-8;
/// Ridge size relative to the mean variance `trace/p`.
const RIDGE_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KnnModel<T> {
    pub vectors: Array2<T>,
    pub labels: Vec<Detection>,
    pub inv_cov: Array2<T>,
    pub k: usize,
    /// Ridge added to the covariance diagonal, zero when none was needed.
    pub ridge: f64,
}

/// Stores the training set and the inverse of its sample covariance.
///
/// The covariance uses the `1/(n − 1)` normalisation. When its smallest
/// eigenvalue is below `1e-8` of the largest, `1e-6·trace/p` is added to the
/// diagonal first.
pub fn train<T: Real>(samples: &[Vec<T>], labels: &[Detection], k: usize) -> Result<KnnModel<T>> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::param(format!("k must be odd and positive, got {k}")));
    }
    if samples.len() != labels.len() {
        return Err(Error::param(format!(
            "{} samples for {} labels",
            samples.len(),
            labels.len()
        )));
    }
    if k > samples.len() {
        return Err(Error::param(format!(
            "k = {k} exceeds the {} training vectors",
            samples.len()
        )));
    }
    if samples.len() < 2 {
        return Err(Error::param("need at least two training vectors"));
    }
    let p = samples[0].len();
    if p == 0 || samples.iter().any(|v| v.len() != p) {
        return Err(Error::param(
            "training vectors must share a non-zero dimension",
        ));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::param("training vectors contain non-finite values"));
    }
    let n = samples.len();
    let x = Array2::from_shape_fn((n, p), |(i, d)| samples[i][d].as_f64());
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n ≥ 2");
    let centered = &x - &mean.insert_axis(ndarray::Axis(0));
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;

    let eig = linalg::symmetric_eigen(&cov)?;
    let (hi, lo) = (eig.values[0], eig.values[p - 1]);
    let trace: f64 = cov.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::Degenerate(
            "training vectors are all identical".into(),
        ));
    }
    let mut ridge = 0.0;
    if lo < RIDGE_TRIGGER * hi {
        ridge = RIDGE_SCALE * trace / p as f64;
        cov.diag_mut().mapv_inplace(|v| v + ridge);
    }
    let mut inv = linalg::inverse(&cov).map_err(|e| {
        Error::Degenerate(format!("covariance is singular after ridge {ridge:e}: {e}"))
    })?;
    for i in 0..p {
        for j in (i + 1)..p {
            let s = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = s;
            inv[[j, i]] = s;
        }
    }
    let check = linalg::symmetric_eigen(&inv)?;
    if !(check.values[p - 1] > 0.0) {
        return Err(Error::Degenerate(format!(
            "inverse covariance is not positive definite (smallest eigenvalue {:e})",
            check.values[p - 1]
        )));
    }
    Ok(KnnModel {
        vectors: x.mapv(T::of),
        labels: labels.to_vec(),
        inv_cov: inv.mapv(T::of),
        k,
        ridge,
    })
}

impl<T: Real> KnnModel<T> {
    pub fn dimension(&self) -> usize {
        self.vectors.ncols()
    }

    /// `(a − b)ᵀ C⁻¹ (a − b)`
    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        let d = Array1::from_iter(a.iter().zip(b).map(|(x, y)| *x - *y));
        d.dot(&self.inv_cov.dot(&d))
    }

    /// All training indices with their distance to `v`, nearest first; equal
    /// distances keep training order.
    pub fn ranked(&self, v: &[T]) -> Result<Vec<(usize, T)>> {
        if v.len() != self.dimension() {
            return Err(Error::param(format!(
                "model expects {} features, got {}",
                self.dimension(),
                v.len()
            )));
        }
        let q = Array1::from_iter(v.iter().copied());
        let mut out: Vec<(usize, T)> = self
            .vectors
            .outer_iter()
            .enumerate()
            .map(|(i, row)| {
                let d = &row - &q;
                (i, d.dot(&self.inv_cov.dot(&d)))
            })
            .collect();
        out.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        Ok(out)
    }

    /// Majority label among the `k` nearest training vectors.
    pub fn predict(&self, v: &[T]) -> Result<Detection> {
        let ranked = self.ranked(v)?;
        let drones = ranked[..self.k]
            .iter()
            .filter(|(i, _)| self.labels[*i].is_drone())
            .count();
        Ok(if 2 * drones > self.k {
            Detection::Drone
        } else {
            Detection::NonDrone
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<Detection>) {
        use Detection::*;
        (
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.2],
                vec![0.3, 1.1],
                vec![5.0, 5.0],
                vec![5.5, 4.1],
                vec![4.4, 5.6],
            ],
            vec![NonDrone, NonDrone, NonDrone, Drone, Drone, Drone],
        )
    }

    #[test]
    fn even_or_oversized_k_is_rejected() {
        let (x, y) = toy();
        assert!(train(&x, &y, 2).is_err());
        assert!(train(&x, &y, 7).is_err());
        assert!(train(&x, &y, 0).is_err());
    }

    #[test]
    fn exact_match_with_k1() {
        let (x, y) = toy();
        let m = train(&x, &y, 1).unwrap();
        for (v, l) in x.iter().zip(&y) {
            assert_eq!(m.predict(v).unwrap(), *l);
            assert_eq!(m.ranked(v).unwrap()[0].1, 0.0);
        }
    }

    #[test]
    fn few_samples_in_many_dimensions_use_a_ridge() {
        let x = vec![
            (0..9).map(|d| d as f64).collect::<Vec<_>>(),
            (0..9).map(|d| (d * d) as f64 * 0.1).collect(),
            (0..9).map(|d| 1.0 - d as f64).collect(),
        ];
        let y = vec![Detection::Drone, Detection::NonDrone, Detection::NonDrone];
        let m = train(&x, &y, 1).unwrap();
        assert!(m.ridge > 0.0);
        assert_eq!(m.predict(&x[0]).unwrap(), Detection::Drone);
    }

    #[test]
    fn dimension_mismatch() {
        let (x, y) = toy();
        let m = train(&x, &y, 3).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn distance_is_symmetric() {
        let (x, y) = toy();
        let m = train(&x, &y, 3).unwrap();
        let (a, b) = (&x[1], &x[4]);
        assert_eq!(m.distance(a, b), m.distance(b, a));
        assert!(m.distance(a, b) > 0.0);
        assert_eq!(m.distance(a, a), 0.0);
    }
}
