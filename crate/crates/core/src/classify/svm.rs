//! Soft-margin linear SVM trained with sequential minimal optimisation.
//!
//! The dual `min ½αᵀQα − Σα` subject to `0 ≤ α ≤ C`, `yᵀα = 0` is solved by
//! pairwise updates; the working pair is chosen with second-order
//! information, and iteration stops when the maximal KKT violation falls
//! below the tolerance.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Detection};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// Regularisation constant `C`.
    pub c: f64,
    /// Stopping threshold on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Standardise each dimension with training mean and standard deviation.
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            tolerance: 1e-4,
            max_iterations: 10_000_000,
            standardize: true,
        }
    }
}

impl SvmConfig {
    pub fn with_c(c: f64) -> Self {
        SvmConfig {
            c,
            ..SvmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::param(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::param(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Per-dimension `(x − mean) / std` transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> Scaler<T> {
    /// Fits to the rows of `x`; a dimension with zero spread is a training error.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for (d, col) in x.columns().into_iter().enumerate() {
            let m = col.sum() / n;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if !(s > 1e-12 * m.abs().max(1e-300)) {
                return Err(Error::Training(format!(
                    "feature dimension {d} is constant ({m}) across the training set"
                )));
            }
            mean.push(T::of(m));
            std.push(T::of(s));
        }
        Ok(Scaler { mean, std })
    }

    pub fn transform(&self, v: &[T]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| ((*x - *m) / *s).as_f64())
            .collect()
    }
}

/// Linear decision function `z·x + b`, with `x` standardised when a scaler is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SvmModel<T> {
    pub z: Vec<T>,
    pub b: T,
    pub c: f64,
    pub support_indices: Vec<usize>,
    pub scaler: Option<Scaler<T>>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> SvmModel<T> {
    pub fn dimension(&self) -> usize {
        self.z.len()
    }

    /// `z·x + b` for a raw input vector.
    pub fn decision(&self, v: &[T]) -> Result<T> {
        if v.len() != self.dimension() {
            return Err(Error::param(format!(
                "model expects {} features, got {}",
                self.dimension(),
                v.len()
            )));
        }
        let x = match &self.scaler {
            Some(s) => s.transform(v),
            None => v.iter().map(|x| x.as_f64()).collect(),
        };
        let d = self
            .z
            .iter()
            .zip(&x)
            .map(|(z, x)| z.as_f64() * x)
            .sum::<f64>()
            + self.b.as_f64();
        Ok(T::of(d))
    }

    /// Label from the sign of the decision value (zero maps to non-drone), and the value itself.
    pub fn predict(&self, v: &[T]) -> Result<(Detection, T)> {
        let d = self.decision(v)?;
        Ok((Detection::from_sign(d.as_f64()), d))
    }

    /// Hyperplane `(z, b)` expressed on unstandardised inputs.
    pub fn input_space_hyperplane(&self) -> (Vec<T>, T) {
        match &self.scaler {
            None => (self.z.clone(), self.b),
            Some(s) => {
                let z: Vec<T> = self.z.iter().zip(&s.std).map(|(z, sd)| *z / *sd).collect();
                let shift = z
                    .iter()
                    .zip(&s.mean)
                    .fold(T::zero(), |acc, (z, m)| acc + *z * *m);
                (z, self.b - shift)
            }
        }
    }
}

/// Trains on the rows of `samples` with labels `labels`.
pub fn train<T: Real>(
    samples: &[Vec<T>],
    labels: &[Detection],
    config: &SvmConfig,
) -> Result<SvmModel<T>> {
    config.validate()?;
    let raw = check_training_set(samples, labels)?;
    let (scaler, x) = if config.standardize {
        let s = Scaler::<T>::fit(&raw)?;
        let rows: Vec<Vec<f64>> = samples.iter().map(|v| s.transform(v)).collect();
        let x = Array2::from_shape_fn(raw.dim(), |(i, d)| rows[i][d]);
        (Some(s), x)
    } else {
        (None, raw)
    };
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let sol = smo(&x, &y, config);
    let p = x.ncols();
    let mut z = vec![0.0f64; p];
    let mut support = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(i);
            for (zd, xd) in z.iter_mut().zip(x.row(i)) {
                *zd += a * y[i] * xd;
            }
        }
    }
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} iterations without reaching tolerance {}",
            sol.iterations,
            config.tolerance
        );
    }
    Ok(SvmModel {
        z: z.into_iter().map(T::of).collect(),
        b: T::of(-sol.rho),
        c: config.c,
        support_indices: support,
        scaler,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

const TAU: f64 = 1e-12;

fn smo(x: &Array2<f64>, y: &[f64], config: &SvmConfig) -> Solution {
    let n = y.len();
    let c = config.c;
    let diag: Vec<f64> = x.outer_iter().map(|r| r.dot(&r)).collect();
    let kernel_row = |i: usize| x.dot(&x.row(i));
    let mut alpha = vec![0.0f64; n];
    // gradient of the dual objective: Qα − 1
    let mut grad = vec![-1.0f64; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = t;
                }
            }
        }
        if i_sel == usize::MAX {
            converged = true;
            break;
        }
        let k_i = kernel_row(i_sel);
        let mut g_min = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if v < g_max {
                let b = g_max - v;
                let a = diag[i_sel] + diag[t] - 2.0 * k_i[t];
                let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX || g_max - g_min < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = {
            let a = diag[i] + diag[j] - 2.0 * k_i[j];
            if a > 0.0 {
                a
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let k_j = kernel_row(j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * (y[i] * k_i[t] * di + y[j] * k_j[t] * dj);
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        iterations,
        converged,
    }
}
