//! Empirical joint risk `J(theta) = theta + eta * E dev_sigma(Z - theta)` and
//! its minimum `R(Z) = min_theta J(theta)` over finite weighted samples.

use crate::error::{Error, Result};
use crate::riskfn::{dev_sigma, RiskParams, Sigma};
use crate::scalar::Scalar;

/// Iteration cap for the scalar Newton solves.
pub const MAX_SOLVER_ITERATIONS: usize = 200;

/// Relative tolerance on the first-order condition `mean atan((z - theta)/sigma) = sigma/eta`.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Newton steps taken after the residual test passes, while the step keeps shrinking.
const POLISH_STEPS: usize = 6;

/// Finite sample of realized losses with optional probability weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    values: Vec<T>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> Sample<T> {
    /// Uniformly weighted sample.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSample("sample must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("value {i} is not finite")));
        }
        Ok(Self { values, weights: None })
    }

    /// Sample with explicit weights; they must be nonnegative and sum to one
    /// within `1e-12`.
    pub fn weighted(values: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let mut s = Self::new(values)?;
        if weights.len() != s.values.len() {
            return Err(Error::DimensionMismatch { expected: s.values.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidSample("weights must be finite and nonnegative".into()));
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if (total - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::InvalidSample(format!("weights sum to {total}, expected 1")));
        }
        s.weights = Some(weights);
        Ok(s)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weight of observation `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> T {
        match &self.weights {
            Some(w) => w[i],
            None => T::one() / T::from_usize_lossy(self.values.len()),
        }
    }

    /// Weighted mean of `f(z_i)`.
    pub fn expect<F: Fn(T) -> T>(&self, f: F) -> T {
        match &self.weights {
            Some(w) => self.values.iter().zip(w).fold(T::zero(), |acc, (&z, &wi)| acc + wi * f(z)),
            None => {
                let sum = self.values.iter().fold(T::zero(), |acc, &z| acc + f(z));
                sum / T::from_usize_lossy(self.values.len())
            }
        }
    }

    pub fn mean(&self) -> T {
        self.expect(|z| z)
    }

    /// Weighted population variance (two-pass).
    pub fn variance(&self) -> T {
        let m = self.mean();
        self.expect(|z| (z - m) * (z - m))
    }

    /// The same sample with every value shifted by `a`.
    pub fn shifted(&self, a: T) -> Self {
        Self { values: self.values.iter().map(|&z| z + a).collect(), weights: self.weights.clone() }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Smallest and largest values carrying positive weight.
    pub fn support_bounds(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for (i, &z) in self.values.iter().enumerate() {
            if self.weight(i) > T::zero() {
                lo = lo.min(z);
                hi = hi.max(z);
            }
        }
        (lo, hi)
    }
}

/// Minimizer of the joint risk in `theta` together with solver diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaSolution<T> {
    pub theta_star: T,
    pub risk_value: T,
    pub iterations: usize,
    /// Distance of zero from the (sub)differential of `J` at `theta_star`,
    /// expressed in the units of the first-order condition.
    pub residual: T,
}

/// `theta + eta * E dev_sigma(Z - theta)`.
pub fn joint_risk<T: Scalar>(sample: &Sample<T>, theta: T, params: &RiskParams<T>) -> T {
    theta + params.eta() * sample.expect(|z| dev_sigma(z - theta, params))
}

/// Minimizes `theta -> joint_risk(sample, theta, params)`.
///
/// * `sigma = inf`: closed form `theta = mean(Z) - 1/(2 eta)`.
/// * `sigma = 0`: the smallest minimizer, a lower quantile of level
///   `(1 - 1/eta)/2`.
/// * otherwise: bracketed Newton on `mean atan((z - theta)/sigma) = sigma/eta`.
pub fn solve_theta<T: Scalar>(sample: &Sample<T>, params: &RiskParams<T>) -> Result<ThetaSolution<T>> {
    // Re-validate so hand-built params cannot slip through.
    RiskParams::new(params.sigma(), params.eta())?;
    match params.sigma() {
        Sigma::Infinite => {
            let two_eta = T::lit(2.0) * params.eta();
            let theta = sample.mean() - two_eta.recip();
            let residual = (T::one() - two_eta * (sample.mean() - theta)).abs();
            Ok(ThetaSolution {
                theta_star: theta,
                risk_value: joint_risk(sample, theta, params),
                iterations: 0,
                residual,
            })
        }
        Sigma::Zero => Ok(solve_theta_median(sample, params)),
        Sigma::Finite(s) => {
            let target = s / params.eta();
            let (theta, iterations, residual) = solve_atan_condition(sample, s, target)?;
            Ok(ThetaSolution { theta_star: theta, risk_value: joint_risk(sample, theta, params), iterations, residual })
        }
    }
}

/// `R_sigma(Z)`, the minimum value of the joint risk.
pub fn risk_empirical<T: Scalar>(sample: &Sample<T>, params: &RiskParams<T>) -> Result<T> {
    solve_theta(sample, params).map(|s| s.risk_value)
}

/// `mean(Z) + eta * var(Z) - 1/(4 eta)`, with the population variance.
pub fn mean_variance_closed_form<T: Scalar>(sample: &Sample<T>, eta: T) -> T {
    sample.mean() + eta * sample.variance() - (T::lit(4.0) * eta).recip()
}

/// M-location for the scale `sigma`: the root of `mean atan((z - theta)/sigma) = 0`.
pub fn m_location<T: Scalar>(sample: &Sample<T>, sigma: T) -> Result<T> {
    if !(sigma > T::zero() && sigma.is_finite()) {
        return Err(Error::InvalidParams(format!("m_location needs a finite positive sigma, got {sigma}")));
    }
    solve_atan_condition(sample, sigma, T::zero()).map(|(theta, _, _)| theta)
}

fn solve_theta_median<T: Scalar>(sample: &Sample<T>, params: &RiskParams<T>) -> ThetaSolution<T> {
    let eta = params.eta();
    let mut order: Vec<usize> = (0..sample.len()).collect();
    let values = sample.values();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite sample"));

    // Right derivative at a value z is 1 - eta (1 - 2 F(z)), where F is the
    // weight at or below z; the smallest minimizer is the first distinct value
    // where that becomes nonnegative.
    let level = (T::one() - eta.recip()) / T::lit(2.0);
    let slack = T::lit(8.0) * T::epsilon();
    let mut below = T::zero();
    let mut k = 0;
    let mut chosen = values[order[order.len() - 1]];
    let mut weight_below_chosen = T::zero();
    let mut weight_through_chosen = T::one();
    while k < order.len() {
        let z = values[order[k]];
        let mut through = below;
        while k < order.len() && values[order[k]] == z {
            through += sample.weight(order[k]);
            k += 1;
        }
        if through >= level - slack {
            chosen = z;
            weight_below_chosen = below;
            weight_through_chosen = through;
            break;
        }
        below = through;
    }
    let left = T::one() - eta * (T::one() - T::lit(2.0) * weight_below_chosen);
    let right = T::one() - eta * (T::one() - T::lit(2.0) * weight_through_chosen);
    let residual = left.max(T::zero()) + (-right).max(T::zero());
    ThetaSolution { theta_star: chosen, risk_value: joint_risk(sample, chosen, params), iterations: 0, residual }
}

/// Solves `g(theta) = mean atan((z - theta)/sigma) - target = 0` for
/// `0 <= target < pi/2`. `g` is strictly decreasing in `theta`, so a bracket
/// plus Newton with bisection fallback converges globally.
fn solve_atan_condition<T: Scalar>(sample: &Sample<T>, sigma: T, target: T) -> Result<(T, usize, T)> {
    let g = |theta: T| sample.expect(|z| ((z - theta) / sigma).atan()) - target;
    let dg = |theta: T| {
        -sample.expect(|z| {
            let u = (z - theta) / sigma;
            (T::one() + u * u).recip()
        }) / sigma
    };
    let half = T::lit(0.5);

    let guard = T::FRAC_PI_2() - T::lit(1e-9);
    // g(lo) >= 0 >= g(hi)
    let mut lo = sample.min() - sigma * target.min(guard).tan();
    let mut hi = sample.max();
    let tol = T::lit(SOLVER_TOLERANCE) * T::one().max(target);

    let mut theta = sample.mean().max(lo).min(hi);
    let mut value = g(theta);
    for iter in 1..=MAX_SOLVER_ITERATIONS {
        if value.abs() <= tol {
            return Ok(polish(theta, value, lo, hi, iter, &g, &dg));
        }
        if value > T::zero() {
            lo = theta;
        } else {
            hi = theta;
        }
        let slope = dg(theta);
        let newton = theta - value / slope;
        theta = if slope < T::zero() && newton > lo && newton < hi { newton } else { lo + (hi - lo) * half };
        value = g(theta);
    }
    if value.abs() <= tol {
        return Ok((theta, MAX_SOLVER_ITERATIONS, value.abs()));
    }
    Err(Error::NonConvergence { iterations: MAX_SOLVER_ITERATIONS, residual: value.abs().to_f64_lossy() })
}

/// Extra Newton steps once the residual test passes, kept only while they
/// reduce the residual. Tightens `theta` itself when `g` is flat.
fn polish<T: Scalar>(
    mut theta: T,
    mut value: T,
    lo: T,
    hi: T,
    iter: usize,
    g: &impl Fn(T) -> T,
    dg: &impl Fn(T) -> T,
) -> (T, usize, T) {
    let mut used = iter;
    for _ in 0..POLISH_STEPS {
        if value == T::zero() {
            break;
        }
        let next = theta - value / dg(theta);
        if !(next >= lo && next <= hi) || next == theta {
            break;
        }
        let next_value = g(next);
        if next_value.abs() >= value.abs() {
            break;
        }
        theta = next;
        value = next_value;
        used += 1;
    }
    (theta, used, value.abs())
}

/// Two three-point distributions `Z1 <= Z2` (almost surely) whose
/// mean-variance risks are ordered the other way.
#[derive(Clone, Debug, PartialEq)]
pub struct NonmonotonePair<T> {
    pub z1: Sample<T>,
    pub z2: Sample<T>,
    pub risk1: T,
    pub risk2: T,
}

/// Builds `Z_j` on `{c_j - w_j, c_j, c_j + w_j}` with variance `w_j^2 - epsilon`
/// and `c2 = c1 + w1 + w2`, then checks that the supports are separated and
/// that `R_inf(Z1) > R_inf(Z2)` for the given `eta`.
pub fn build_nonmonotone_pair<T: Scalar>(c1: T, w1: T, w2: T, epsilon: T, eta: T) -> Result<NonmonotonePair<T>> {
    if !(w1 > T::zero() && w2 > T::zero() && epsilon > T::zero()) {
        return Err(Error::InvalidWitness("widths and epsilon must be positive".into()));
    }
    if !(epsilon < w1 * w1 && epsilon < w2 * w2) {
        return Err(Error::InvalidWitness(format!("epsilon = {epsilon} must be below both squared widths")));
    }
    let params = RiskParams::new(Sigma::Infinite, eta).map_err(|e| Error::InvalidWitness(e.to_string()))?;
    let three_point = |c: T, w: T| -> Result<Sample<T>> {
        let v = w * w - epsilon;
        let tail = v / (T::lit(2.0) * w * w);
        Sample::weighted(vec![c - w, c, c + w], vec![tail, T::one() - tail - tail, tail])
    };
    let c2 = c1 + w1 + w2;
    let z1 = three_point(c1, w1)?;
    let z2 = three_point(c2, w2)?;

    let (_, max1) = z1.support_bounds();
    let (min2, _) = z2.support_bounds();
    if max1 > min2 {
        return Err(Error::InvalidWitness(format!("supports overlap: max Z1 = {max1} > min Z2 = {min2}")));
    }
    let risk1 = risk_empirical(&z1, &params)?;
    let risk2 = risk_empirical(&z2, &params)?;
    if risk1 <= risk2 {
        return Err(Error::InvalidWitness(format!("risk order not reversed: R(Z1) = {risk1} <= R(Z2) = {risk2}")));
    }
    Ok(NonmonotonePair { z1, z2, risk1, risk2 })
}
