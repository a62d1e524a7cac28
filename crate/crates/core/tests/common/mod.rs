#![allow(dead_code)]

use mlocrisk_core::rng::{stream_rng, StreamRng};
use mlocrisk_core::{RiskParams, Sample, Sigma};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    stream_rng(seed, 0)
}

/// A random valid `(sigma, eta)`: sigma is zero, infinite, or log-uniform on
/// `[1e-3, 1e3]`; eta is its threshold times a factor in `[1.01, 20]`.
pub fn random_params(rng: &mut StreamRng) -> RiskParams<f64> {
    let sigma = match rng.random_range(0..6) {
        0 => Sigma::Zero,
        1 => Sigma::Infinite,
        _ => Sigma::Finite(10f64.powf(rng.random_range(-3.0..3.0))),
    };
    let eta = match sigma {
        Sigma::Zero => 1.0 + rng.random_range(0.01..19.0),
        Sigma::Infinite => 10f64.powf(rng.random_range(-2.0..2.0)),
        Sigma::Finite(s) => 2.0 * s / std::f64::consts::PI * rng.random_range(1.01..20.0),
    };
    RiskParams::new(sigma, eta).expect("eta above threshold")
}

/// A random sample of size `1..=max_n`, optionally weighted, with a mix of
/// scales and occasional ties.
pub fn random_sample(rng: &mut StreamRng, max_n: usize) -> Sample<f64> {
    let n = rng.random_range(1..=max_n);
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let shift = rng.random_range(-5.0..5.0);
    let mut values: Vec<f64> = (0..n).map(|_| shift + scale * (rng.random::<f64>() - 0.5) * 4.0).collect();
    if n > 2 && rng.random_bool(0.2) {
        values[1] = values[0];
    }
    if rng.random_bool(0.5) {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        Sample::weighted(values, raw.iter().map(|w| w / total).collect()).expect("valid weights")
    } else {
        Sample::new(values).expect("finite values")
    }
}
