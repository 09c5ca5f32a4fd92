//! Separation and classification quality measures.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::classify::Detection;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Value reported by [`sir_db`] when the estimation error vanishes.
pub const SIR_CAP_DB: f64 = 300.0;

/// Error energy below which an estimate counts as exact.
const EXACT_ERROR_ENERGY: f64 = 1e-30;

/// Pairing of estimated rows to truth rows.
///
/// Entry `i` of every field refers to truth row `i`: it is matched with
/// estimated row `permutation[i]`, and `signs[i]·scales[i]·ŷ` is the
/// least-squares fit of that estimate to the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub permutation: Vec<usize>,
    pub signs: Vec<i8>,
    pub scales: Vec<f64>,
    /// Pearson correlation of each matched pair, before sign correction.
    pub correlations: Vec<f64>,
}

impl AlignmentMap {
    /// Estimated rows reordered, sign-corrected and scaled to match the truth rows.
    pub fn apply<T: Real>(&self, estimated: &Array2<T>) -> Array2<T> {
        let mut out = Array2::<T>::zeros((self.permutation.len(), estimated.ncols()));
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            let gain = T::of(self.signs[i] as f64 * self.scales[i]);
            row.assign(&estimated.row(self.permutation[i]).mapv(|v| v * gain));
        }
        out
    }
}

fn pearson<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mb = b.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (x, y) = (x.as_f64() - ma, y.as_f64() - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    let denom = (saa * sbb).sqrt();
    if denom > 0.0 {
        sab / denom
    } else {
        0.0
    }
}

/// Greedy max-|correlation| matching of estimated rows to truth rows.
///
/// Ties are broken by the lower (truth, estimate) index pair.
pub fn align<T: Real>(estimated: &Array2<T>, truth: &Array2<T>) -> Result<AlignmentMap> {
    if estimated.dim() != truth.dim() {
        return Err(Error::param(format!(
            "estimate shape {:?} differs from truth shape {:?}",
            estimated.dim(),
            truth.dim()
        )));
    }
    let j = truth.nrows();
    let mut corr = vec![vec![0.0f64; j]; j];
    for (t, row) in corr.iter_mut().enumerate() {
        for (e, c) in row.iter_mut().enumerate() {
            *c = pearson(estimated.row(e), truth.row(t));
        }
    }
    let mut permutation = vec![usize::MAX; j];
    let mut used = vec![false; j];
    for _ in 0..j {
        let mut best: Option<(usize, usize, f64)> = None;
        for t in (0..j).filter(|&t| permutation[t] == usize::MAX) {
            for e in (0..j).filter(|&e| !used[e]) {
                let c = corr[t][e].abs();
                if best.is_none_or(|(_, _, b)| c > b) {
                    best = Some((t, e, c));
                }
            }
        }
        let (t, e, _) = best.expect("unpaired rows remain");
        permutation[t] = e;
        used[e] = true;
    }

    let mut signs = Vec::with_capacity(j);
    let mut scales = Vec::with_capacity(j);
    let mut correlations = Vec::with_capacity(j);
    for (t, &e) in permutation.iter().enumerate() {
        let c = corr[t][e];
        let sign: i8 = if c < 0.0 { -1 } else { 1 };
        let (y, s) = (estimated.row(e), truth.row(t));
        let ys: f64 = y
            .iter()
            .zip(s.iter())
            .map(|(a, b)| a.as_f64() * b.as_f64())
            .sum();
        let yy: f64 = y.iter().map(|a| a.as_f64() * a.as_f64()).sum();
        let gain = if yy > 0.0 { ys / yy } else { 0.0 };
        signs.push(sign);
        scales.push(gain * sign as f64);
        correlations.push(c);
    }
    Ok(AlignmentMap {
        permutation,
        signs,
        scales,
        correlations,
    })
}

/// `10·log10(Σs² / Σ(s − y)²)` in dB, capped at [`SIR_CAP_DB`].
pub fn sir_db<T: Real>(estimate: &[T], truth: &[T]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::param(format!(
            "estimate length {} differs from truth length {}",
            estimate.len(),
            truth.len()
        )));
    }
    let signal: f64 = truth.iter().map(|s| s.as_f64() * s.as_f64()).sum();
    if !(signal > 0.0) {
        return Err(Error::param("truth signal is all zero"));
    }
    let error: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(y, s)| {
            let d = s.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    if error < EXACT_ERROR_ENERGY {
        return Ok(SIR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SIR_CAP_DB))
}

/// Alignment plus per-source SIR of a separation against known sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationScore {
    pub alignment: AlignmentMap,
    /// SIR in dB per truth row.
    pub sir_db: Vec<f64>,
    pub mean_sir_db: f64,
}

pub fn score_separation<T: Real>(
    estimated: &Array2<T>,
    truth: &Array2<T>,
) -> Result<SeparationScore> {
    let alignment = align(estimated, truth)?;
    let aligned = alignment.apply(estimated);
    let sir = aligned
        .outer_iter()
        .zip(truth.outer_iter())
        .map(|(y, s)| sir_db(&y.to_vec(), &s.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let mean = sir.iter().sum::<f64>() / sir.len() as f64;
    Ok(SeparationScore {
        alignment,
        sir_db: sir,
        mean_sir_db: mean,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn correct(&self) -> usize {
        self.true_positive + self.true_negative
    }

    pub fn add(&mut self, other: &Confusion) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.true_negative += other.true_negative;
        self.false_negative += other.false_negative;
    }

    /// `100·correct/total`, or 0 for an empty tally.
    pub fn percent(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => 100.0 * self.correct() as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub percent: f64,
    pub confusion: Confusion,
}

/// Percentage of `predictions` equal to `labels`, with drone/non-drone confusion counts.
pub fn accuracy(predictions: &[Detection], labels: &[Detection]) -> Result<Accuracy> {
    if predictions.len() != labels.len() {
        return Err(Error::param(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::param("accuracy of an empty prediction set"));
    }
    let mut c = Confusion::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Detection::Drone, Detection::Drone) => c.true_positive += 1,
            (Detection::Drone, Detection::NonDrone) => c.false_positive += 1,
            (Detection::NonDrone, Detection::NonDrone) => c.true_negative += 1,
            (Detection::NonDrone, Detection::Drone) => c.false_negative += 1,
        }
    }
    Ok(Accuracy {
        percent: c.percent(),
        confusion: c,
    })
}

/// Spearman rank correlation, with tied values given their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::param(
            "spearman needs two equal-length series of length ≥ 2",
        ));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let d = (sxx * syy).sqrt();
    Ok(if d > 0.0 { sxy / d } else { 0.0 })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}
