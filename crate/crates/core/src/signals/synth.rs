use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};

use super::{Signal, SourceClass, SourceSpec, MIN_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Relative level of the broadband floor added to harmonic classes.
const HARMONIC_NOISE_LEVEL: f64 = 0.05;

/// Envelope level between bird syllables, so short windows are never silent.
const SYLLABLE_FLOOR: f64 = 0.02;

/// Generates `duration_s` seconds of the source described by `spec`.
///
/// The output is zero-mean and normalised to a peak magnitude of exactly 1.
/// Generation is a pure function of `(spec, duration_s, sample_rate)`.
pub fn synthesize<T: Real>(
    spec: &SourceSpec,
    duration_s: f64,
    sample_rate: u32,
) -> Result<Signal<T>> {
    spec.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::param(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if sample_rate < MIN_SAMPLE_RATE {
        return Err(Error::param(format!(
            "sample rate {sample_rate} Hz is below the {MIN_SAMPLE_RATE} Hz minimum"
        )));
    }
    let n = (duration_s * sample_rate as f64).round() as usize;
    if n < 2 {
        return Err(Error::param(format!(
            "duration {duration_s} s yields fewer than two samples at {sample_rate} Hz"
        )));
    }
    let fs = sample_rate as f64;
    let mut rng = rng::from_seed(spec.seed);

    let mut x = match spec.label {
        // rotor blade passes: cosine-aligned harmonics give a peaky pulse train
        SourceClass::Drone => harmonic(spec, n, fs, &mut rng, 0.5, PI / 2.0, Envelope::Sine(0.5)),
        // engine drone: sine-aligned harmonics approach a sawtooth
        SourceClass::Aeroplane => harmonic(spec, n, fs, &mut rng, 1.0, 0.0, Envelope::Sine(0.3)),
        SourceClass::Bird => harmonic(spec, n, fs, &mut rng, 1.5, 0.0, Envelope::Syllables),
        SourceClass::Wind => wind(spec, n, fs, &mut rng)?,
        SourceClass::Rain => rain(spec, n, fs, &mut rng)?,
        SourceClass::Thunder => thunder(spec, n, fs, &mut rng)?,
        SourceClass::Unknown => unreachable!("rejected by validate"),
    };

    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::param("synthesized signal is silent"));
    }
    let samples = x.into_iter().map(|v| T::of(v / peak)).collect();
    Signal::new(samples, sample_rate, spec.label)
}

enum Envelope {
    /// `1 + depth·sin(2π·am·t + φ)`
    Sine(f64),
    /// Gated syllables over a faint floor: `0.02 + max(0, sin(2π·am·t + φ))²`.
    Syllables,
}

fn harmonic(
    spec: &SourceSpec,
    n: usize,
    fs: f64,
    rng: &mut rng::Rng,
    rolloff: f64,
    base_phase: f64,
    envelope: Envelope,
) -> Vec<f64> {
    let nyquist = fs / 2.0;
    let phases: Vec<f64> = (0..spec.harmonic_count)
        .map(|_| base_phase + rng.random_range(-0.2..0.2))
        .collect();
    let env_phase = rng.random_range(0.0..2.0 * PI);
    let vibrato_phase = rng.random_range(0.0..2.0 * PI);
    let f0 = spec.fundamental_hz;
    let am = spec.am_rate_hz;
    // birds get a slow frequency sweep; the other classes hold pitch
    let vibrato_depth = if matches!(envelope, Envelope::Syllables) {
        0.06
    } else {
        0.0
    };

    let mut out = Vec::with_capacity(n);
    let mut phase = 0.0f64;
    for i in 0..n {
        let t = i as f64 / fs;
        let inst = f0 * (1.0 + vibrato_depth * (2.0 * PI * 0.5 * am * t + vibrato_phase).sin());
        let mut v = 0.0;
        for (k, &ph) in phases.iter().enumerate() {
            let h = (k + 1) as f64;
            if h * inst >= nyquist {
                break;
            }
            v += h.powf(-rolloff) * (h * phase + ph).sin();
        }
        phase += 2.0 * PI * inst / fs;
        if phase > 2.0 * PI * 1e6 {
            phase -= 2.0 * PI * 1e6;
        }
        let e = match envelope {
            Envelope::Sine(depth) => 1.0 + depth * (2.0 * PI * am * t + env_phase).sin(),
            Envelope::Syllables => {
                SYLLABLE_FLOOR + (2.0 * PI * am * t + env_phase).sin().max(0.0).powi(2)
            }
        };
        out.push(e * v);
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += HARMONIC_NOISE_LEVEL * rms * z;
    }
    out
}

fn wind(spec: &SourceSpec, n: usize, fs: f64, rng: &mut rng::Rng) -> Result<Vec<f64>> {
    let mut x = band_noise(n, fs, spec.noise_band, rng)?;
    let phase = rng.random_range(0.0..2.0 * PI);
    let phase2 = rng.random_range(0.0..2.0 * PI);
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / fs;
        // gusts: log-normal-like envelope from two incommensurate sinusoids
        let g = 0.9 * (2.0 * PI * spec.am_rate_hz * t + phase).sin()
            + 0.4 * (2.0 * PI * spec.am_rate_hz * 0.37 * t + phase2).sin();
        *v *= g.exp();
    }
    Ok(x)
}

fn rain(spec: &SourceSpec, n: usize, fs: f64, rng: &mut rng::Rng) -> Result<Vec<f64>> {
    // sparse drop impulses over a faint continuous bed
    let p = (spec.am_rate_hz / fs).min(1.0);
    let amp = Exp::new(1.0).expect("unit rate");
    let mut e = vec![0.0f64; n];
    for v in e.iter_mut() {
        let bed: f64 = StandardNormal.sample(rng);
        *v = 0.02 * bed;
        if rng.random::<f64>() < p {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *v += sign * amp.sample(rng);
        }
    }
    band_limit(&mut e, fs, spec.noise_band)?;
    Ok(e)
}

fn thunder(spec: &SourceSpec, n: usize, fs: f64, rng: &mut rng::Rng) -> Result<Vec<f64>> {
    let mut x = band_noise(n, fs, spec.noise_band, rng)?;
    // rumble bursts with exponential decay at Poisson onsets over a rolling floor
    let p = (spec.am_rate_hz / fs).min(1.0);
    let decay = (-1.0 / (0.08 * fs)).exp();
    let strength = Exp::new(1.0).expect("unit rate");
    let roll_phase = rng.random_range(0.0..2.0 * PI);
    let mut level = 0.0f64;
    for (i, v) in x.iter_mut().enumerate() {
        if rng.random::<f64>() < p {
            level += 1.0 + strength.sample(rng);
        }
        level *= decay;
        let t = i as f64 / fs;
        let floor = 0.08 * (1.0 + 0.9 * (2.0 * PI * 0.75 * spec.am_rate_hz * t + roll_phase).sin());
        *v *= floor + level;
    }
    Ok(x)
}

/// White Gaussian noise restricted to `band` by zeroing FFT bins outside it.
fn band_noise(n: usize, fs: f64, band: (f64, f64), rng: &mut rng::Rng) -> Result<Vec<f64>> {
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    band_limit(&mut x, fs, band)?;
    Ok(x)
}

fn band_limit(x: &mut [f64], fs: f64, band: (f64, f64)) -> Result<()> {
    let n = x.len();
    let (lo, hi) = (band.0, band.1.min(fs / 2.0));
    if lo >= hi {
        return Err(Error::param(format!(
            "noise band ({}, {}) lies above the Nyquist frequency {}",
            band.0,
            band.1,
            fs / 2.0
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        let f = bin as f64 * fs / n as f64;
        if f < lo || f > hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    for (v, c) in x.iter_mut().zip(buf) {
        *v = c.re * scale;
    }
    Ok(())
}

/// Sample excess kurtosis `m4 / m2² − 3`.
pub fn excess_kurtosis<T: Real>(x: &[T]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = v.as_f64() - mean;
        (a + d * d, b + d * d * d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    m4 / (m2 * m2) - 3.0
}
