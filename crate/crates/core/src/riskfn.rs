//! Deviation functions and the `(sigma, eta)` parameter rules.
//!
//! The base deviation is `dev(u) = u * atan(u) - log(1 + u^2) / 2`, which is
//! quadratic near zero and grows like `(pi/2) |u|` in the tails. The scale
//! `sigma` picks a member of the family:
//!
//! | sigma         | `dev_sigma(u)`     |
//! |---------------|--------------------|
//! | `0`           | `|u|`              |
//! | `(0, inf)`    | `dev(u / sigma)`   |
//! | `inf`         | `u^2`              |
//!
//! so that small scales give median-centric risks and large scales give
//! mean-centric ones.

use crate::error::{Error, Result};
use crate::scalar::{sign0, Scalar};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// Magnitude above which `dev` switches to the overflow-free branch.
const LARGE_ARGUMENT: f64 = 1e8;

/// Multiplier applied to `2 sigma / pi` by [`default_eta`] for `0 < sigma < 1`,
/// so that the strict lower bound on `eta` holds.
pub const SMALL_SIGMA_ETA_MARGIN: f64 = 1.0001;

/// Scale of the deviation family: zero, a finite positive value, or infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma<T> {
    Zero,
    Finite(T),
    Infinite,
}

impl<T: Scalar> Sigma<T> {
    /// Builds a scale from a raw value, mapping `0` and `+inf` onto the
    /// dedicated variants.
    pub fn new(value: T) -> Result<Self> {
        if value.is_nan() || value < T::zero() {
            return Err(Error::InvalidParams(format!("sigma must be nonnegative, got {value}")));
        }
        Ok(if value == T::zero() {
            Sigma::Zero
        } else if value.is_infinite() {
            Sigma::Infinite
        } else {
            Sigma::Finite(value)
        })
    }

    /// The scale as a plain number (`0`, the value, or `+inf`).
    pub fn value(&self) -> T {
        match *self {
            Sigma::Zero => T::zero(),
            Sigma::Finite(s) => s,
            Sigma::Infinite => T::infinity(),
        }
    }

    pub fn is_finite_positive(&self) -> bool {
        matches!(self, Sigma::Finite(_))
    }
}

impl<T: Scalar> fmt::Display for Sigma<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Zero => write!(f, "0"),
            Sigma::Finite(s) => write!(f, "{s}"),
            Sigma::Infinite => write!(f, "inf"),
        }
    }
}

impl<T: Scalar> FromStr for Sigma<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "∞" => return Ok(Sigma::Infinite),
            _ => {}
        }
        let v: f64 = t.parse().map_err(|_| Error::InvalidParams(format!("invalid sigma value {t:?}")))?;
        Sigma::new(T::lit(v))
    }
}

impl<T: Scalar> Serialize for Sigma<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Infinite => serializer.serialize_str("inf"),
            other => serializer.serialize_f64(other.value().to_f64_lossy()),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Sigma<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Sigma::new(T::lit(v)),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(|e| serde::de::Error::custom(format!("{e}; expected a nonnegative number or \"inf\"")))
    }
}

/// Validated `(sigma, eta)` pair.
///
/// `eta` must satisfy `eta > 1` when `sigma = 0`, `eta > 2 sigma / pi` for a
/// finite positive `sigma`, and `eta > 0` when `sigma = inf`; otherwise the
/// joint risk is unbounded below in `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct RiskParams<T> {
    sigma: Sigma<T>,
    eta: T,
}

impl<T: Scalar> RiskParams<T> {
    pub fn new(sigma: Sigma<T>, eta: T) -> Result<Self> {
        if !eta.is_finite() || eta <= T::zero() {
            return Err(Error::InvalidParams(format!("eta must be finite and positive, got {eta}")));
        }
        let ok = match sigma {
            Sigma::Zero => eta > T::one(),
            Sigma::Finite(s) => {
                if !s.is_finite() || s <= T::zero() {
                    return Err(Error::InvalidParams(format!("invalid finite sigma {s}")));
                }
                eta > (T::one() + T::one()) * s / T::PI()
            }
            Sigma::Infinite => true,
        };
        if !ok {
            return Err(Error::InvalidParams(format!(
                "eta = {eta} is too small for sigma = {sigma} (need {})",
                match sigma {
                    Sigma::Zero => "eta > 1".to_string(),
                    Sigma::Finite(s) => format!("eta > 2 sigma / pi = {}", T::lit(2.0) * s / T::PI()),
                    Sigma::Infinite => "eta > 0".to_string(),
                }
            )));
        }
        Ok(Self { sigma, eta })
    }

    /// Parameters with `eta` chosen by [`default_eta`].
    pub fn with_default_eta(sigma: Sigma<T>) -> Result<Self> {
        Self::new(sigma, default_eta(sigma))
    }

    pub fn sigma(&self) -> Sigma<T> {
        self.sigma
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    /// Supremum of `|dev_sigma'|`; infinite for `sigma = inf`.
    pub fn deviation_lipschitz(&self) -> T {
        match self.sigma {
            Sigma::Zero => T::one(),
            Sigma::Finite(s) => T::FRAC_PI_2() / s,
            Sigma::Infinite => T::infinity(),
        }
    }
}

/// `dev(u) = u atan(u) - log(1 + u^2) / 2`, evaluated without overflow.
pub fn dev<T: Scalar>(u: T) -> T {
    let a = u.abs();
    if a > T::lit(LARGE_ARGUMENT) {
        // log(1 + u^2) = 2 log|u| + log1p(1/u^2)
        let inv = a.recip();
        a * a.atan() - a.ln() - (inv * inv).ln_1p() / T::lit(2.0)
    } else {
        a * a.atan() - (a * a).ln_1p() / T::lit(2.0)
    }
}

/// `dev'(u) = atan(u)`.
#[inline]
pub fn dev_prime<T: Scalar>(u: T) -> T {
    u.atan()
}

/// Member of the deviation family selected by `params.sigma()`.
pub fn dev_sigma<T: Scalar>(u: T, params: &RiskParams<T>) -> T {
    match params.sigma {
        Sigma::Zero => u.abs(),
        Sigma::Finite(s) => dev(u / s),
        Sigma::Infinite => u * u,
    }
}

/// Derivative of [`dev_sigma`] in `u`, including the `1/sigma` chain factor.
///
/// At `sigma = 0` this returns the sub-gradient element `sign(u)` with
/// `sign(0) = 0`.
pub fn dev_sigma_prime<T: Scalar>(u: T, params: &RiskParams<T>) -> T {
    match params.sigma {
        Sigma::Zero => sign0(u),
        Sigma::Finite(s) => (u / s).atan() / s,
        Sigma::Infinite => (T::one() + T::one()) * u,
    }
}

/// Default weight for a given scale.
///
/// `1.05` at zero, `2 sigma / pi` (nudged up by [`SMALL_SIGMA_ETA_MARGIN`]) for
/// `0 < sigma < 1`, `2 sigma^2` for `1 <= sigma < inf`, and `1` at infinity.
/// The result always passes [`RiskParams::new`].
pub fn default_eta<T: Scalar>(sigma: Sigma<T>) -> T {
    match sigma {
        Sigma::Zero => T::lit(1.05),
        Sigma::Finite(s) if s < T::one() => T::lit(2.0) * s / T::PI() * T::lit(SMALL_SIGMA_ETA_MARGIN),
        Sigma::Finite(s) => T::lit(2.0) * s * s,
        Sigma::Infinite => T::one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(sigma: Sigma<f64>) -> RiskParams<f64> {
        RiskParams::with_default_eta(sigma).unwrap()
    }

    #[test]
    fn dev_known_values() {
        assert_eq!(dev(0.0_f64), 0.0);
        let expected = std::f64::consts::FRAC_PI_4 - std::f64::consts::LN_2 / 2.0;
        assert_relative_eq!(dev(1.0_f64), expected, max_relative = 1e-15);
        assert_relative_eq!(expected, 0.4388245731, epsilon = 1e-10);
        assert_eq!(dev(-3.7_f64), dev(3.7_f64));
    }

    #[test]
    fn dev_is_finite_for_huge_arguments() {
        for &u in &[1e9_f64, 1e154, 1e200, 1e300, -1e300] {
            let v = dev(u);
            assert!(v.is_finite() && v > 0.0, "dev({u}) = {v}");
        }
        // Both branches agree near the switch point.
        let u = 1e8_f64;
        let above = dev(u * (1.0 + 1e-12));
        let below = dev(u);
        assert_relative_eq!(above, below, max_relative = 1e-10);
        // Leading asymptotics: dev(u) ~ (pi/2) u - log(u) - 1.
        let u = 1e200_f64;
        assert_relative_eq!(dev(u), std::f64::consts::FRAC_PI_2 * u, max_relative = 1e-12);
    }

    #[test]
    fn dev_prime_values() {
        assert_eq!(dev_prime(0.0_f64), 0.0);
        assert_relative_eq!(dev_prime(1.0_f64), std::f64::consts::FRAC_PI_4);
        assert!((dev_prime(1e308_f64) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn dev_sigma_branches() {
        let zero = p(Sigma::Zero);
        let inf = p(Sigma::Infinite);
        let two = p(Sigma::Finite(2.0));
        assert_eq!(dev_sigma(-3.0, &zero), 3.0);
        assert_eq!(dev_sigma(2.0, &inf), 4.0);
        assert_relative_eq!(dev_sigma(2.0, &two), dev(1.0), max_relative = 1e-15);
    }

    #[test]
    fn dev_sigma_prime_branches() {
        assert_eq!(dev_sigma_prime(0.0, &p(Sigma::Zero)), 0.0);
        assert_eq!(dev_sigma_prime(-0.5, &p(Sigma::Zero)), -1.0);
        assert_eq!(dev_sigma_prime(1.5, &p(Sigma::Infinite)), 3.0);
        assert_relative_eq!(dev_sigma_prime(1.0, &p(Sigma::Finite(1.0))), std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn default_eta_values() {
        assert_eq!(default_eta::<f64>(Sigma::Zero), 1.05);
        assert_eq!(default_eta::<f64>(Sigma::Infinite), 1.0);
        assert_eq!(default_eta::<f64>(Sigma::Finite(4.0)), 32.0);
        for &s in &[1e-8, 1e-3, 0.5, 0.999, 1.0, 3.0, 1e6] {
            let sigma = Sigma::Finite(s);
            assert!(RiskParams::new(sigma, default_eta(sigma)).is_ok(), "sigma {s}");
        }
    }

    #[test]
    fn params_reject_invalid_eta() {
        assert!(RiskParams::new(Sigma::Zero, 1.0).is_err());
        assert!(RiskParams::new(Sigma::Zero, 1.0 + 1e-12).is_ok());
        let s = 0.3_f64;
        assert!(RiskParams::new(Sigma::Finite(s), 2.0 * s / std::f64::consts::PI).is_err());
        assert!(RiskParams::new(Sigma::Infinite, 0.0).is_err());
        assert!(RiskParams::new(Sigma::Infinite, 1e-9).is_ok());
        assert!(RiskParams::new(Sigma::Infinite, f64::NAN).is_err());
        assert!(Sigma::new(-1.0_f64).is_err());
    }

    #[test]
    fn sigma_parsing() {
        assert_eq!("inf".parse::<Sigma<f64>>().unwrap(), Sigma::Infinite);
        assert_eq!("0".parse::<Sigma<f64>>().unwrap(), Sigma::Zero);
        assert_eq!("2.5".parse::<Sigma<f64>>().unwrap(), Sigma::Finite(2.5));
        assert!("fast".parse::<Sigma<f64>>().is_err());
        assert!("-1".parse::<Sigma<f64>>().is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let v32 = dev(1.0_f32);
        assert!((v32 as f64 - dev(1.0_f64)).abs() < 1e-6);
        assert!(dev(1e30_f32).is_finite());
    }

    #[test]
    fn quadratic_and_absolute_limits() {
        let big = 1e6_f64;
        let small = 1e-6_f64;
        for i in 0..=200 {
            let u = -10.0 + 0.1 * i as f64;
            let q = 2.0 * big * big * dev(u / big);
            assert!((q - u * u).abs() / (u * u).max(1.0) <= 1e-6);
            let a = 2.0 * small / std::f64::consts::PI * dev(u / small);
            assert!((a - u.abs()).abs() <= 1e-4);
        }
    }

    proptest! {
        #[test]
        fn dev_even_and_nonnegative(u in -1e6_f64..1e6) {
            prop_assert_eq!(dev(u), dev(-u));
            prop_assert!(dev(u) >= 0.0);
        }

        #[test]
        fn derivative_matches_central_differences(
            u in prop_oneof![-50.0_f64..-1e-3, 1e-3_f64..50.0],
            mode in 0usize..4,
        ) {
            let sigma = [Sigma::Zero, Sigma::Finite(0.5), Sigma::Finite(3.0), Sigma::Infinite][mode];
            let params = p(sigma);
            let h = 1e-6 * u.abs().max(1.0) * 1e-1;
            let fd = (dev_sigma(u + h, &params) - dev_sigma(u - h, &params)) / (2.0 * h);
            let an = dev_sigma_prime(u, &params);
            prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "fd {} an {}", fd, an);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn dev_sigma_is_convex(
            u in -100.0_f64..100.0,
            v in -100.0_f64..100.0,
            alpha in 0.0_f64..=1.0,
            mode in 0usize..4,
        ) {
            let sigma = [Sigma::Zero, Sigma::Finite(0.1), Sigma::Finite(7.0), Sigma::Infinite][mode];
            let params = p(sigma);
            let lhs = dev_sigma(alpha * u + (1.0 - alpha) * v, &params);
            let rhs = alpha * dev_sigma(u, &params) + (1.0 - alpha) * dev_sigma(v, &params);
            prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
        }
    }
}
