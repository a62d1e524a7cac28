//! Stationarity and weak-convexity diagnostics on a small seeded
//! squared-loss regression problem.

use crate::error::CliError;
use mlocrisk_core::data::{synth_regression, InputLaw, NoiseLaw, RegressionLaw};
use mlocrisk_core::experiments::{fmt_f64, MetricsTable, Provenance};
use mlocrisk_core::moreau::{
    check_stationarity, gradient_check, weak_convexity_probe, EnvelopeConfig, GradientCheck, ProbeReport,
    StationarityProblem, StationarityReport,
};
use mlocrisk_core::rng::{stream_rng, trial_seed, STREAM_INIT};
use mlocrisk_core::{Error, JointState, RiskParams, Sigma};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnoseKind {
    Diagnose,
}

/// Source of the feedback-norm bound `kappa`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaSpec {
    /// Derive the bound from the data and the feasible box.
    Bound,
    Value(f64),
}

impl Serialize for KappaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            KappaSpec::Bound => s.serialize_str("bound"),
            KappaSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for KappaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 && v.is_finite() => Ok(KappaSpec::Value(v)),
            Raw::Text(t) if t == "bound" => Ok(KappaSpec::Bound),
            _ => Err(serde::de::Error::custom("expected a positive number or \"bound\"")),
        }
    }
}

/// Flat diagnose configuration. `kappa` is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub kind: DiagnoseKind,
    #[serde(default)]
    pub seed: u64,
    pub kappa: KappaSpec,
    #[serde(default)]
    pub sigma: Option<Sigma<f64>>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub data_count: Option<usize>,
    #[serde(default)]
    pub w0: Option<f64>,
    #[serde(default)]
    pub w1: Option<f64>,
    #[serde(default)]
    pub noise_scale: Option<f64>,
    #[serde(default)]
    pub input_law: Option<InputLaw>,
    /// Half-width of the feasible cube over `(w1, w0, theta)`.
    #[serde(default)]
    pub projection_radius: Option<f64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
    /// Defaults to `1 / (2 gamma)`.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub probe_triples: Option<usize>,
    #[serde(default)]
    pub probe_radius: Option<f64>,
    #[serde(default)]
    pub gradient_check_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl DiagnoseConfig {
    pub fn new(kappa: KappaSpec) -> Self {
        Self {
            kind: DiagnoseKind::Diagnose,
            seed: 0,
            kappa,
            sigma: None,
            eta: None,
            data_count: None,
            w0: None,
            w1: None,
            noise_scale: None,
            input_law: None,
            projection_radius: None,
            batch_size: None,
            iterations: None,
            trials: None,
            beta: None,
            probe_triples: None,
            probe_radius: None,
            gradient_check_points: None,
            provenance: None,
        }
    }

    /// Every field filled with its default; provenance cleared.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let radius = self.projection_radius.unwrap_or(4.0);
        let c = Self {
            kind: DiagnoseKind::Diagnose,
            seed: self.seed,
            kappa: self.kappa,
            sigma: Some(self.sigma.unwrap_or(Sigma::Finite(1.0))),
            eta: Some(self.eta.unwrap_or(2.0)),
            data_count: Some(self.data_count.unwrap_or(200)),
            w0: Some(self.w0.unwrap_or(1.0)),
            w1: Some(self.w1.unwrap_or(1.0)),
            noise_scale: Some(self.noise_scale.unwrap_or(0.5)),
            input_law: Some(self.input_law.unwrap_or(InputLaw::UnitUniform)),
            projection_radius: Some(radius),
            batch_size: Some(self.batch_size.unwrap_or(8)),
            iterations: Some(self.iterations.unwrap_or(2000)),
            trials: Some(self.trials.unwrap_or(200)),
            beta: self.beta,
            probe_triples: Some(self.probe_triples.unwrap_or(10_000)),
            probe_radius: Some(self.probe_radius.unwrap_or(radius)),
            gradient_check_points: Some(self.gradient_check_points.unwrap_or(100)),
            provenance: None,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Core(Error::InvalidConfig(m)));
        RiskParams::new(self.sigma.unwrap_or(Sigma::Infinite), self.eta.unwrap_or(1.0))?;
        if self.sigma == Some(Sigma::Infinite) {
            return bad("diagnose needs a finite sigma; the weak-convexity constant is unbounded at sigma = inf".into());
        }
        for (name, v) in [
            ("data_count", self.data_count),
            ("batch_size", self.batch_size),
            ("iterations", self.iterations),
            ("trials", self.trials),
        ] {
            if v == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        for (name, v) in
            [("projection_radius", self.projection_radius), ("probe_radius", self.probe_radius), ("beta", self.beta)]
        {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be finite and positive, got {v}"));
                }
            }
        }
        if let Some(s) = self.noise_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("noise_scale must be nonnegative, got {s}"));
            }
        }
        Ok(())
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials.unwrap_or(0)).map(|i| trial_seed(self.seed, i as u64)).collect()
    }
}

/// Reports produced by one diagnose run.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnoseOutcome {
    pub stationarity: StationarityReport,
    pub probe: ProbeReport,
    pub gradient_checks: Vec<GradientCheck>,
}

impl DiagnoseOutcome {
    pub fn tables(&self, seeds: &[u64]) -> Vec<MetricsTable> {
        let mut trials = MetricsTable::new("stationarity_trials", &["trial", "seed", "env_grad_norm_sq"]);
        for (i, (v, s)) in self.stationarity.per_trial.iter().zip(seeds).enumerate() {
            trials.push(vec![i.to_string(), s.to_string(), fmt_f64(*v)]);
        }
        let mut grads = MetricsTable::new("gradient_checks", &["point", "max_abs_error", "relative_error"]);
        for (i, g) in self.gradient_checks.iter().enumerate() {
            grads.push(vec![i.to_string(), fmt_f64(g.max_abs_error), fmt_f64(g.relative_error)]);
        }
        vec![trials, grads]
    }
}

/// Runs the diagnostics of a resolved configuration.
pub fn run_diagnose(cfg: &DiagnoseConfig) -> Result<DiagnoseOutcome, CliError> {
    let cfg = cfg.resolved()?;
    let get = |v: Option<f64>| v.expect("resolved");
    let law = RegressionLaw {
        w0: get(cfg.w0),
        w1: get(cfg.w1),
        noise: NoiseLaw::Normal(get(cfg.noise_scale)),
        input: cfg.input_law.expect("resolved"),
    };
    let data = synth_regression(&law, cfg.data_count.expect("resolved"), cfg.seed)?;
    let params = RiskParams::new(cfg.sigma.expect("resolved"), get(cfg.eta))?;
    let radius = get(cfg.projection_radius);
    let initial = JointState::new(vec![0.0, 0.0], 0.0);
    let mut problem = StationarityProblem::squared_regression(
        data.examples,
        params,
        radius,
        initial.clone(),
        cfg.batch_size.expect("resolved"),
    )?;
    let kappa_source = match cfg.kappa {
        KappaSpec::Bound => "bound derived from the data and the feasible box",
        KappaSpec::Value(k) => {
            problem.kappa = k;
            "configured value"
        }
    };
    let gamma = problem.gamma()?;
    let envelope = match cfg.beta {
        None => EnvelopeConfig::half_gamma(gamma, problem.feasible_set.clone())?,
        Some(beta) => EnvelopeConfig::new(
            beta,
            gamma,
            EnvelopeConfig::<f64>::DEFAULT_TOLERANCE,
            EnvelopeConfig::<f64>::DEFAULT_MAX_ITERATIONS,
            problem.feasible_set.clone(),
        )?,
    };
    let mut stationarity = check_stationarity(
        &problem,
        cfg.iterations.expect("resolved"),
        cfg.trials.expect("resolved"),
        &envelope,
        cfg.seed,
    )?;
    stationarity.kappa_source = kappa_source.into();

    let objective = problem.objective()?;
    let probe = weak_convexity_probe(
        &objective,
        gamma,
        cfg.probe_triples.expect("resolved"),
        &initial.to_vec(),
        get(cfg.probe_radius),
        cfg.seed,
    )?;

    let mut rng = stream_rng(cfg.seed, STREAM_INIT);
    let gradient_checks = (0..cfg.gradient_check_points.expect("resolved"))
        .map(|_| {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-radius..radius)).collect();
            gradient_check(&objective, &x, 1e-6)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    Ok(DiagnoseOutcome { stationarity, probe, gradient_checks })
}
