//! The theta-solver against its first-order condition and a brute-force
//! minimizer, plus the location properties of the risk.

mod common;

use common::{random_params, random_sample, rng};
use mlocrisk_core::risk_eval::{joint_risk, risk_empirical, solve_theta};
use mlocrisk_core::{RiskParams, Sample, Sigma};
use proptest::prelude::*;

/// Distance of zero from the subdifferential of `theta -> J(theta)` at `theta`,
/// divided by `eta / sigma` for finite sigma so it reads in `atan` units.
fn first_order_residual(sample: &Sample<f64>, params: &RiskParams<f64>, theta: f64) -> f64 {
    let eta = params.eta();
    let n = sample.len();
    let w = |i| sample.weight(i);
    match params.sigma() {
        Sigma::Infinite => {
            let mean: f64 = (0..n).map(|i| w(i) * sample.values()[i]).sum();
            (1.0 - 2.0 * eta * (mean - theta)).abs()
        }
        Sigma::Finite(s) => {
            let m: f64 = (0..n).map(|i| w(i) * ((sample.values()[i] - theta) / s).atan()).sum();
            (m - s / eta).abs()
        }
        Sigma::Zero => {
            let above: f64 = (0..n).filter(|&i| sample.values()[i] > theta).map(w).sum();
            let below: f64 = (0..n).filter(|&i| sample.values()[i] < theta).map(w).sum();
            let at = 1.0 - above - below;
            // Subdifferential of E|Z - theta| is [below - above - at, below - above + at].
            let lo = 1.0 + eta * (below - above - at);
            let hi = 1.0 + eta * (below - above + at);
            if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                -hi
            } else {
                0.0
            }
        }
    }
}

/// Minimizes the convex map `theta -> J(theta)` by a grid scan followed by
/// golden-section refinement inside the best grid cell.
fn brute_force_risk(sample: &Sample<f64>, params: &RiskParams<f64>) -> f64 {
    let (zmin, zmax) = sample.support_bounds();
    let pad = match params.sigma() {
        Sigma::Finite(s) => s * (s / params.eta()).min(1.5).tan() + 1.0,
        Sigma::Infinite => 1.0 / params.eta() + 1.0,
        Sigma::Zero => 1.0,
    };
    let (lo, hi) = (zmin - pad, zmax + pad);
    let f = |t: f64| joint_risk(sample, t, params);
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps).min_by(|&a, &b| f(lo + a as f64 * h).total_cmp(&f(lo + b as f64 * h))).unwrap();
    let (mut a, mut b) = (lo + (best.max(1) - 1) as f64 * h, lo + (best + 1).min(steps) as f64 * h);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    f(mid).min(f(a)).min(f(b)).min(f(lo + best as f64 * h))
}

#[test]
fn first_order_condition_on_random_instances() {
    let mut r = rng(11);
    for case in 0..1000 {
        let params = random_params(&mut r);
        let sample = random_sample(&mut r, 200);
        let sol = solve_theta(&sample, &params).unwrap();
        let tol = match params.sigma() {
            Sigma::Finite(s) => 1e-10 * (s / params.eta()).max(1.0),
            _ => 1e-10,
        };
        let res = first_order_residual(&sample, &params, sol.theta_star);
        assert!(res <= tol, "case {case}: residual {res:e} > {tol:e} for {params:?}");
    }
}

#[test]
fn brute_force_agrees_on_small_samples() {
    let mut r = rng(12);
    for case in 0..300 {
        let params = random_params(&mut r);
        let sample = random_sample(&mut r, 8);
        let fast = risk_empirical(&sample, &params).unwrap();
        let slow = brute_force_risk(&sample, &params);
        assert!(fast <= slow + 1e-9, "case {case}: solver {fast} above grid {slow}");
        assert!((fast - slow).abs() <= 1e-6, "case {case}: solver {fast} grid {slow} for {params:?}");
    }
}

#[test]
fn zero_sigma_picks_smallest_minimizer() {
    // eta = 2: level (1 - 1/2)/2 = 1/4; with four atoms the whole interval
    // [z1, z2] minimizes and the lower end is returned.
    let s = Sample::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let p = RiskParams::new(Sigma::Zero, 2.0).unwrap();
    assert_eq!(solve_theta(&s, &p).unwrap().theta_star, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn translation_equivariance(seed in any::<u64>(), shift in -100.0_f64..100.0) {
        let mut r = rng(seed);
        let params = random_params(&mut r);
        let sample = random_sample(&mut r, 30);
        let base = risk_empirical(&sample, &params).unwrap();
        let moved = risk_empirical(&sample.shifted(shift), &params).unwrap();
        let tol = 1e-8 * base.abs().max(shift.abs()).max(1.0);
        prop_assert!((moved - (base + shift)).abs() <= tol, "{} vs {}", moved, base + shift);
    }

    #[test]
    fn location_monotonicity(seed in any::<u64>(), shift in 0.0_f64..50.0) {
        let mut r = rng(seed);
        let params = random_params(&mut r);
        let sample = random_sample(&mut r, 30);
        let base = risk_empirical(&sample, &params).unwrap();
        let moved = risk_empirical(&sample.shifted(shift), &params).unwrap();
        prop_assert!(moved >= base - 1e-8 * base.abs().max(1.0));
    }
}
