//! FastICA blind source separation.
//!
//! The block is centred, whitened through the eigendecomposition of its
//! sample covariance, and then all unmixing rows are updated together with
//! the fixed-point rule
//!
//! ```text
//! w⁺ = E[z·g(wᵀz)] − E[g'(wᵀz)]·w
//! ```
//!
//! followed by symmetric decorrelation `W ← (WWᵀ)^{-1/2}·W`. Expectations
//! are sample means over the block's columns.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mixing::MixedBlock;
use crate::rng;
use crate::scalar::Real;

/// Smallest accepted ratio between the smallest and largest covariance eigenvalue.
pub const WHITENING_RATIO_FLOOR: f64 = 1e-12;

/// Contrast nonlinearity `g` used by the fixed-point update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contrast {
    /// `g(u) = tanh(u)`
    #[default]
    Tanh,
    /// `g(u) = u·exp(−u²/2)`
    Gauss,
    /// `g(u) = u³`
    Cubic,
}

impl Contrast {
    /// Returns `(g(u), g'(u))`.
    #[inline]
    pub fn eval<T: Real>(self, u: T) -> (T, T) {
        match self {
            Contrast::Tanh => {
                let t = u.tanh();
                (t, T::one() - t * t)
            }
            Contrast::Gauss => {
                let u2 = u * u;
                let e = (-u2 * T::of(0.5)).exp();
                (u * e, (T::one() - u2) * e)
            }
            Contrast::Cubic => {
                let u2 = u * u;
                (u2 * u, T::of(3.0) * u2)
            }
        }
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Contrast::Tanh => "tanh",
            Contrast::Gauss => "gauss",
            Contrast::Cubic => "cubic",
        })
    }
}

impl FromStr for Contrast {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" | "logcosh" => Ok(Contrast::Tanh),
            "gauss" | "exp" => Ok(Contrast::Gauss),
            "cubic" | "cube" | "kurtosis" => Ok(Contrast::Cubic),
            other => Err(Error::param(format!("unknown contrast '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FastIcaConfig {
    pub contrast: Contrast,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Seed of the random initial unmixing matrix.
    pub seed: u64,
}

impl Default for FastIcaConfig {
    fn default() -> Self {
        FastIcaConfig {
            contrast: Contrast::Tanh,
            max_iterations: 200,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl FastIcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::param(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Centring and whitening record: `z = transform · (x − mean)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Whitener<T> {
    pub mean: Array1<T>,
    pub transform: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult<T> {
    /// Orthonormal unmixing matrix acting on whitened data.
    pub rotation: Array2<T>,
    /// Full unmixing matrix acting on centred data: `rotation · whitener.transform`.
    pub unmixing: Array2<T>,
    /// Estimated sources `Y = unmixing · X̃`, one per row.
    pub sources: Array2<T>,
    pub whitener: Whitener<T>,
    pub iterations_used: usize,
    pub converged: bool,
    /// `max_i |1 − |⟨w_i⁺, w_i⟩||` at the last sweep.
    pub final_change: T,
}

/// Subtracts each row's mean. Returns the centred rows and the means.
pub fn center_rows<T: Real>(x: &Array2<T>) -> (Array2<T>, Array1<T>) {
    let l = T::of_usize(x.ncols());
    let mut out = x.clone();
    let mut means = Array1::<T>::zeros(x.nrows());
    for (mut row, m) in out.outer_iter_mut().zip(means.iter_mut()) {
        let mean = row.sum() / l;
        row.mapv_inplace(|v| v - mean);
        // second pass removes the rounding residue of the first
        let residue = row.sum() / l;
        row.mapv_inplace(|v| v - residue);
        *m = mean + residue;
    }
    (out, means)
}

/// Centres a block's channels.
pub fn center<T: Real>(block: &MixedBlock<T>) -> (Array2<T>, Array1<T>) {
    center_rows(block.data())
}

/// Whitens centred rows: returns `(Λ^{-1/2}Eᵀ·x, Λ^{-1/2}Eᵀ)` where `EΛEᵀ` is the
/// `1/L` sample covariance.
pub fn whiten<T: Real>(centered: &Array2<T>) -> Result<(Array2<T>, Array2<T>)> {
    let cov = linalg::row_covariance(centered);
    let eig = linalg::symmetric_eigen(&cov)?;
    let largest = eig.values[0];
    let smallest = eig.values[eig.values.len() - 1];
    let ratio = if largest > T::zero() {
        smallest / largest
    } else {
        T::zero()
    };
    if !(ratio > T::of(WHITENING_RATIO_FLOOR)) {
        return Err(Error::Degenerate(format!(
            "covariance is rank deficient: smallest/largest eigenvalue ratio {:e} \
             (duplicate or collinear channels?)",
            ratio.as_f64()
        )));
    }
    let scale = eig.values.mapv(|l| T::one() / l.sqrt());
    let transform = &eig.vectors.t() * &scale.insert_axis(Axis(1));
    let white = transform.dot(centered);
    Ok((white, transform))
}

/// `(WWᵀ)^{-1/2}·W`
pub fn symmetric_decorrelation<T: Real>(w: &Array2<T>) -> Result<Array2<T>> {
    let gram = w.dot(&w.t());
    Ok(linalg::inverse_sqrt_spd(&gram)?.dot(w))
}

/// Separates `block` into as many independent components as it has channels.
///
/// Failing to converge within `max_iterations` is reported through
/// [`SeparationResult::converged`], not as an error.
pub fn separate<T: Real>(
    block: &MixedBlock<T>,
    config: &FastIcaConfig,
) -> Result<SeparationResult<T>> {
    config.validate()?;
    let (centered, mean) = center(block);
    let (white, transform) = whiten(&centered)?;
    let j = white.nrows();
    let l = T::of_usize(white.ncols());
    let tol = T::of(config.tolerance);

    let mut init = rng::substream(config.seed, "fastica-init", j as u64);
    let w0 = Array2::from_shape_fn((j, j), |_| {
        let v: f64 = StandardNormal.sample(&mut init);
        T::of(v)
    });
    let mut w = symmetric_decorrelation(&w0)?;

    let mut converged = false;
    let mut iterations = 0;
    let mut change = T::infinity();
    let mut g = Array2::<T>::zeros(white.dim());
    let mut mean_dg = Array1::<T>::zeros(j);
    for it in 1..=config.max_iterations {
        iterations = it;
        let proj = w.dot(&white);
        for ((mut g_row, p_row), d) in g
            .outer_iter_mut()
            .zip(proj.outer_iter())
            .zip(mean_dg.iter_mut())
        {
            let mut acc = T::zero();
            for (gv, &u) in g_row.iter_mut().zip(p_row.iter()) {
                let (gu, dgu) = config.contrast.eval(u);
                *gv = gu;
                acc += dgu;
            }
            *d = acc / l;
        }
        let update = g.dot(&white.t()) / l - &(&w * &mean_dg.view().insert_axis(Axis(1)));
        let next = symmetric_decorrelation(&update)?;
        change = next
            .outer_iter()
            .zip(w.outer_iter())
            .map(|(a, b)| (T::one() - a.dot(&b).abs()).abs())
            .fold(T::zero(), |m, v| m.max(v));
        w = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    let unmixing = w.dot(&transform);
    let sources = unmixing.dot(&centered);
    Ok(SeparationResult {
        rotation: w,
        unmixing,
        sources,
        whitener: Whitener { mean, transform },
        iterations_used: iterations,
        converged,
        final_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn contrast_values() {
        assert_eq!(Contrast::Tanh.eval(0.0f64), (0.0, 1.0));
        assert_eq!(Contrast::Cubic.eval(2.0f64), (8.0, 12.0));
        let (g, dg) = Contrast::Gauss.eval(1.0f64);
        assert!((g - (-0.5f64).exp()).abs() < 1e-15);
        assert!(dg.abs() < 1e-15);
    }

    #[test]
    fn contrast_derivative_matches_finite_difference() {
        for c in [Contrast::Tanh, Contrast::Gauss, Contrast::Cubic] {
            for &u in &[-2.3f64, -0.7, 0.0, 0.4, 1.9] {
                let h = 1e-6;
                let fd = (c.eval(u + h).0 - c.eval(u - h).0) / (2.0 * h);
                assert!((fd - c.eval(u).1).abs() < 1e-7, "{c} at {u}");
            }
        }
    }

    #[test]
    fn constant_row_centres_to_zero() {
        let x = Array2::from_elem((1, 50), 5.0f64);
        let (c, m) = center_rows(&x);
        assert_eq!(m[0], 5.0);
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_mean_row_unchanged() {
        let x = array![[1.0f64, -1.0, 2.0, -2.0, 0.5, -0.5]];
        let (c, _) = center_rows(&x);
        for (a, b) in c.iter().zip(x.iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn diagonal_covariance_whitener() {
        // rows with variances 4 and 9 and zero cross-covariance
        let x = array![[2.0f64, -2.0, 2.0, -2.0], [3.0, 3.0, -3.0, -3.0]];
        let (_, k) = whiten(&x).unwrap();
        let mut entries: Vec<f64> = k.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
        entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(entries.len(), 2);
        assert!((entries[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((entries[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn collinear_channels_are_degenerate() {
        let r: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = Array2::from_shape_fn((2, 100), |(i, n)| if i == 0 { r[n] } else { 2.0 * r[n] });
        let (c, _) = center_rows(&x);
        match whiten(&c) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("ratio")),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let c = FastIcaConfig {
            max_iterations: 0,
            ..FastIcaConfig::default()
        };
        assert!(c.validate().is_err());
        let c = FastIcaConfig {
            tolerance: 0.0,
            ..FastIcaConfig::default()
        };
        assert!(c.validate().is_err());
        assert_eq!("TANH".parse::<Contrast>().unwrap(), Contrast::Tanh);
    }
}
