//! Near-stationarity diagnostics for the joint risk: proximal points and
//! Moreau-envelope gradients, the stationarity bound for the randomized
//! output of [`crate::optimizer::run`], and a sampled weak-convexity probe.
//!
//! Points are flat vectors `(h..., theta)`. The feasible set enters every
//! proximal subproblem as an indicator, so envelope gradients refer to
//! `J + 1_C`.

use crate::error::{Error, Result};
use crate::losses::{Example, LinearModel, LossKind};
use crate::optimizer::{
    feedback_from_evals, make_minibatcher, run, BatchMode, DatasetFeedback, JointState, Objective, ProjectionSet,
    StepSchedule,
};
use crate::risk_eval::{solve_theta, Sample};
use crate::riskfn::{dev_sigma, RiskParams, Sigma};
use crate::rng::{stream_rng, trial_seed};
use crate::scalar::{dot, norm_sq, Scalar};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// A function on flat points with a (sub)gradient oracle.
pub trait ObjectiveOracle<T>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T]) -> Vec<T>;
}

/// Objective assembled from closures.
pub struct FnObjective<V, G> {
    dim: usize,
    value: V,
    gradient: G,
}

impl<V, G> FnObjective<V, G> {
    pub fn new(dim: usize, value: V, gradient: G) -> Self {
        Self { dim, value, gradient }
    }
}

impl<T, V, G> ObjectiveOracle<T> for FnObjective<V, G>
where
    V: Fn(&[T]) -> T + Sync,
    G: Fn(&[T]) -> Vec<T> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.gradient)(x)
    }
}

/// Joint risk of a linear model under the empirical measure of `data`.
#[derive(Clone, Debug)]
pub struct EmpiricalJointObjective<'a, T> {
    data: &'a [Example<T>],
    d_in: usize,
    n_out: usize,
    loss: LossKind,
    params: RiskParams<T>,
}

impl<'a, T: Scalar> EmpiricalJointObjective<'a, T> {
    pub fn new(
        data: &'a [Example<T>],
        d_in: usize,
        n_out: usize,
        loss: LossKind,
        params: RiskParams<T>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { data, d_in, n_out, loss, params })
    }

    pub fn params(&self) -> &RiskParams<T> {
        &self.params
    }

    fn model(&self, x: &[T]) -> LinearModel<T> {
        let (_, h) = x.split_last().expect("point includes theta");
        LinearModel::from_params(self.d_in, self.n_out, h.to_vec()).expect("point dimension matches the model")
    }
}

impl<T: Scalar> ObjectiveOracle<T> for EmpiricalJointObjective<'_, T> {
    fn dim(&self) -> usize {
        LinearModel::<T>::param_count_for(self.d_in, self.n_out) + 1
    }

    fn value(&self, x: &[T]) -> T {
        let model = self.model(x);
        let theta = *x.last().expect("point includes theta");
        let total = self.data.iter().fold(T::zero(), |acc, ex| {
            let l = self.loss.value(&model, ex).expect("example matches the model");
            acc + dev_sigma(l - theta, &self.params)
        });
        theta + self.params.eta() * total / T::from_usize_lossy(self.data.len())
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let model = self.model(x);
        let theta = *x.last().expect("point includes theta");
        let evals: Vec<_> =
            self.data.iter().map(|ex| self.loss.eval(&model, ex).expect("example matches the model")).collect();
        feedback_from_evals(&evals, theta, &self.params).to_vec()
    }
}

/// Weak-convexity constant of the joint risk for a loss that is weakly
/// `lambda_smooth`-smooth: `(1 + eta pi / (2 sigma)) max(1, lambda)` for
/// finite `sigma > 0` and `(1 + eta) max(1, lambda)` at `sigma = 0`.
pub fn gamma_for<T: Scalar>(params: &RiskParams<T>, lambda_smooth: T) -> Result<T> {
    weak_convexity_constant(params.sigma(), params.eta(), lambda_smooth)
}

/// [`gamma_for`] on raw `(sigma, eta)`, without the risk-validity check on
/// `eta`.
pub fn weak_convexity_constant<T: Scalar>(sigma: Sigma<T>, eta: T, lambda_smooth: T) -> Result<T> {
    if !(lambda_smooth > T::zero()) || !lambda_smooth.is_finite() {
        return Err(Error::InvalidParams(format!("smoothness constant must be positive, got {lambda_smooth}")));
    }
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(Error::InvalidParams(format!("eta must be finite and positive, got {eta}")));
    }
    let factor = match sigma {
        Sigma::Zero => T::one() + eta,
        Sigma::Finite(s) => T::one() + eta * T::PI() / (T::lit(2.0) * s),
        Sigma::Infinite => {
            return Err(Error::Unsupported("the weak-convexity constant is defined only for finite sigma".into()))
        }
    };
    Ok(factor * T::one().max(lambda_smooth))
}

fn max_augmented_norm_sq<T: Scalar>(data: &[Example<T>]) -> T {
    data.iter().fold(T::zero(), |m, ex| m.max(norm_sq(&ex.features) + T::one()))
}

/// Smoothness constant of `loss` over linear models on `data`: `2 max |x~|^2`
/// for squared loss and `max |x~|^2 / 2` for multiclass logistic loss, where
/// `x~` is the feature vector with a trailing 1.
pub fn loss_smoothness<T: Scalar>(loss: LossKind, data: &[Example<T>]) -> Result<T> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let r2 = max_augmented_norm_sq(data);
    match loss {
        LossKind::Squared => Ok(T::lit(2.0) * r2),
        LossKind::Logistic => Ok(r2 * T::lit(0.5)),
        LossKind::Absolute | LossKind::Hinge => {
            Err(Error::Unsupported(format!("{loss:?} loss has no finite smoothness constant")))
        }
    }
}

/// Proximal-solver settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeConfig<T> {
    beta: T,
    gamma: T,
    tolerance: T,
    max_iterations: usize,
    #[serde(skip)]
    feasible_set: ProjectionSet<T>,
}

impl<T: Scalar> EnvelopeConfig<T> {
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;
    pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

    pub fn new(beta: T, gamma: T, tolerance: T, max_iterations: usize, feasible_set: ProjectionSet<T>) -> Result<Self> {
        if !(beta > T::zero()) || !(gamma >= T::zero()) || !(tolerance > T::zero()) || max_iterations == 0 {
            return Err(Error::InvalidParams(format!(
                "envelope config needs beta > 0, gamma >= 0, tolerance > 0, iterations > 0; got beta={beta}, gamma={gamma}, tolerance={tolerance}, iterations={max_iterations}"
            )));
        }
        if !(beta * gamma < T::one()) {
            return Err(Error::InvalidParams(format!("beta * gamma must be below 1, got {}", beta * gamma)));
        }
        Ok(Self { beta, gamma, tolerance, max_iterations, feasible_set })
    }

    /// `beta = 1 / (2 gamma)` with default solver settings.
    pub fn half_gamma(gamma: T, feasible_set: ProjectionSet<T>) -> Result<Self> {
        Self::new(
            T::one() / (T::lit(2.0) * gamma),
            gamma,
            T::lit(Self::DEFAULT_TOLERANCE),
            Self::DEFAULT_MAX_ITERATIONS,
            feasible_set,
        )
    }

    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn tolerance(&self) -> T {
        self.tolerance
    }
    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }
    pub fn feasible_set(&self) -> &ProjectionSet<T> {
        &self.feasible_set
    }
}

/// Result of a proximal solve.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxSolution<T> {
    pub point: Vec<T>,
    pub iterations: usize,
    /// Norm of the projected-gradient mapping of the surrogate at `point`.
    pub mapping_norm: T,
}

/// `argmin_{y in C} f(y) + |x - y|^2 / (2 beta)` by projected gradient
/// descent with backtracking on the strongly convex surrogate.
pub fn prox_point<T: Scalar, O: ObjectiveOracle<T> + ?Sized>(
    objective: &O,
    x: &[T],
    cfg: &EnvelopeConfig<T>,
) -> Result<ProxSolution<T>> {
    if x.len() != objective.dim() {
        return Err(Error::DimensionMismatch { expected: objective.dim(), found: x.len() });
    }
    let inv_beta = cfg.beta.recip();
    let half = T::lit(0.5);
    let surrogate = |y: &[T]| {
        let d = y.iter().zip(x).fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v));
        objective.value(y) + d * half * inv_beta
    };
    let surrogate_grad = |y: &[T]| {
        let mut g = objective.gradient(y);
        for ((gi, &yi), &xi) in g.iter_mut().zip(y).zip(x) {
            *gi += (yi - xi) * inv_beta;
        }
        g
    };
    let mut y = x.to_vec();
    cfg.feasible_set.project_vec(&mut y);
    let mut fy = surrogate(&y);
    let mut gy = surrogate_grad(&y);
    let mut step = cfg.beta;
    let mut mapping_norm = T::infinity();

    for iter in 0..cfg.max_iterations {
        loop {
            let mut cand: Vec<T> = y.iter().zip(&gy).map(|(&yi, &gi)| yi - step * gi).collect();
            cfg.feasible_set.project_vec(&mut cand);
            let diff: Vec<T> = cand.iter().zip(&y).map(|(&c, &yi)| c - yi).collect();
            let diff_sq = norm_sq(&diff);
            mapping_norm = diff_sq.sqrt() / step;
            if mapping_norm <= cfg.tolerance {
                return Ok(ProxSolution { point: y, iterations: iter, mapping_norm });
            }
            let fc = surrogate(&cand);
            let gc = surrogate_grad(&cand);
            // Sufficient decrease, or (once values stop resolving the
            // decrease) a local Lipschitz estimate of the gradient below 1/step.
            let decrease = fc <= fy + dot(&gy, &diff) + diff_sq * half / step;
            let grad_change: Vec<T> = gc.iter().zip(&gy).map(|(&a, &b)| a - b).collect();
            let lipschitz = norm_sq(&grad_change) * step * step <= diff_sq;
            if decrease || lipschitz {
                y = cand;
                fy = fc;
                gy = gc;
                step *= T::lit(1.25);
                break;
            }
            step *= half;
            if step < T::lit(1e-20) {
                return Err(Error::NonConvergence { iterations: iter, residual: mapping_norm.to_f64_lossy() });
            }
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iterations, residual: mapping_norm.to_f64_lossy() })
}

/// Moreau-envelope gradient `(x - prox(x)) / beta`.
pub fn envelope_grad<T: Scalar, O: ObjectiveOracle<T> + ?Sized>(
    objective: &O,
    x: &[T],
    cfg: &EnvelopeConfig<T>,
) -> Result<Vec<T>> {
    let prox = prox_point(objective, x, cfg)?;
    Ok(x.iter().zip(&prox.point).map(|(&a, &p)| (a - p) / cfg.beta).collect())
}

/// `1/(1 - beta gamma) * (delta0 + gamma kappa^2 sum(alpha^2) / 2) / sum(alpha)`.
pub fn stationarity_bound<T: Scalar>(beta: T, gamma: T, kappa: T, delta0: T, alphas: &[T]) -> T {
    let sum = alphas.iter().fold(T::zero(), |a, &v| a + v);
    let sum_sq = alphas.iter().fold(T::zero(), |a, &v| a + v * v);
    (delta0 + gamma * kappa * kappa * sum_sq * T::lit(0.5)) / sum / (T::one() - beta * gamma)
}

/// `sqrt(2 gamma kappa^2 delta0 / n)`, the sample-complexity form quoted
/// for the fixed-horizon step and `beta = 1 / (2 gamma)`.
pub fn fixed_horizon_bound<T: Scalar>(gamma: T, kappa: T, delta0: T, n: usize) -> T {
    (T::lit(2.0) * gamma * kappa * kappa * delta0 / T::from_usize_lossy(n)).sqrt()
}

/// A small empirical learning problem with known constants.
#[derive(Clone, Debug)]
pub struct StationarityProblem<T> {
    pub data: Vec<Example<T>>,
    pub d_in: usize,
    pub n_out: usize,
    pub loss: LossKind,
    pub params: RiskParams<T>,
    pub feasible_set: ProjectionSet<T>,
    pub initial: JointState<T>,
    pub batch_size: usize,
    /// Smoothness constant of the loss.
    pub lambda_smooth: T,
    /// Upper bound on the initial envelope gap.
    pub delta0: T,
    /// Upper bound on the feedback second moment, as a norm.
    pub kappa: T,
}

impl<T: Scalar> StationarityProblem<T> {
    /// Squared-loss linear regression restricted to the cube `[-r, r]` in
    /// every coordinate of `(h, theta)`, with every constant bounded from
    /// the data: `lambda = 2 max |x~|^2`, `kappa^2 = (eta D L)^2 + (1 + eta D)^2`
    /// with `D` the deviation Lipschitz constant and `L` the largest loss
    /// gradient on the cube, and `delta0 = J(initial) - R(point mass at 0)`,
    /// which bounds the gap because losses are nonnegative.
    pub fn squared_regression(
        data: Vec<Example<T>>,
        params: RiskParams<T>,
        radius: T,
        initial: JointState<T>,
        batch_size: usize,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if matches!(params.sigma(), Sigma::Infinite) {
            return Err(Error::Unsupported("the stationarity bound needs finite sigma".into()));
        }
        let d_in = data[0].features.len();
        let dim = LinearModel::<T>::param_count_for(d_in, 1) + 1;
        if initial.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: initial.dim() });
        }
        let feasible_set = ProjectionSet::cube(dim, radius)?;
        let lambda_smooth = loss_smoothness(LossKind::Squared, &data)?;

        let mut y_max = T::zero();
        let mut l1_max = T::zero();
        for ex in &data {
            let y = ex.label.real().ok_or_else(|| Error::InvalidSample("regression needs real labels".into()))?;
            y_max = y_max.max(y.abs());
            l1_max = l1_max.max(ex.features.iter().fold(T::one(), |a, v| a + v.abs()));
        }
        let grad_max = T::lit(2.0) * (y_max + radius * l1_max) * max_augmented_norm_sq(&data).sqrt();
        let d = params.deviation_lipschitz();
        let eta = params.eta();
        let kappa = ((eta * d * grad_max).powi(2) + (T::one() + eta * d).powi(2)).sqrt();

        let objective = EmpiricalJointObjective::new(&data, d_in, 1, LossKind::Squared, params)?;
        let floor = solve_theta(&Sample::new(vec![T::zero()])?, &params)?.risk_value;
        let delta0 = objective.value(&initial.to_vec()) - floor;

        Ok(Self {
            data,
            d_in,
            n_out: 1,
            loss: LossKind::Squared,
            params,
            feasible_set,
            initial,
            batch_size,
            lambda_smooth,
            delta0,
            kappa,
        })
    }

    pub fn objective(&self) -> Result<EmpiricalJointObjective<'_, T>> {
        EmpiricalJointObjective::new(&self.data, self.d_in, self.n_out, self.loss, self.params)
    }

    pub fn gamma(&self) -> Result<T> {
        gamma_for(&self.params, self.lambda_smooth)
    }
}

/// Monte-Carlo check of the stationarity bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub trials: usize,
    pub iterations: usize,
    pub per_trial: Vec<f64>,
    pub env_grad_norm_sq_mean: f64,
    pub env_grad_norm_sq_std_error: f64,
    /// General bound evaluated on the step sizes actually used.
    pub theorem_bound: f64,
    /// `sqrt(2 gamma kappa^2 delta0 / n)`.
    pub fixed_horizon_bound: f64,
    pub within_theorem_bound: bool,
    pub within_fixed_horizon_bound: bool,
    pub step_size: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub delta0: f64,
    pub lambda_smooth: f64,
    /// `2 max |G_t|^2` over the first trial; recorded, never used.
    pub kappa_sq_estimate: f64,
    pub kappa_source: String,
    pub objective_measure: String,
}

/// Runs the projected method `trials` times for `n` steps with the
/// fixed-horizon step size and averages `|envelope gradient|^2` at the
/// randomized outputs, evaluated on the full empirical objective.
pub fn check_stationarity<T: Scalar>(
    problem: &StationarityProblem<T>,
    n: usize,
    trials: usize,
    cfg: &EnvelopeConfig<T>,
    seed: u64,
) -> Result<StationarityReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let schedule =
        StepSchedule::FixedHorizon { delta0: problem.delta0, gamma: cfg.gamma, kappa: problem.kappa, horizon: n };
    schedule.validate()?;
    let objective = problem.objective()?;

    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i as u64);
            let batcher = make_minibatcher(problem.data.len(), problem.batch_size, BatchMode::IidWithReplacement, s)?;
            let mut source = DatasetFeedback::new(
                &problem.data,
                problem.d_in,
                problem.n_out,
                problem.loss,
                Objective::Risk(problem.params),
                batcher,
            );
            let rec = run(problem.initial.clone(), &schedule, &problem.feasible_set, n, &mut source, s)?;
            let g = envelope_grad(&objective, &rec.output_state.to_vec(), cfg)?;
            let max_feedback = rec.feedback_norms.iter().fold(T::zero(), |m, &v| m.max(v));
            Ok((norm_sq(&g).to_f64_lossy(), (max_feedback * max_feedback).to_f64_lossy()))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_trial: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let mean = per_trial.iter().sum::<f64>() / trials as f64;
    let std_error = if trials > 1 {
        let var = per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    let alphas: Vec<T> = (0..n).map(|t| schedule.alpha(t)).collect();
    let theorem_bound = stationarity_bound(cfg.beta, cfg.gamma, problem.kappa, problem.delta0, &alphas).to_f64_lossy();
    let fixed = fixed_horizon_bound(cfg.gamma, problem.kappa, problem.delta0, n).to_f64_lossy();

    Ok(StationarityReport {
        trials,
        iterations: n,
        env_grad_norm_sq_mean: mean,
        env_grad_norm_sq_std_error: std_error,
        theorem_bound,
        fixed_horizon_bound: fixed,
        within_theorem_bound: mean <= theorem_bound,
        within_fixed_horizon_bound: mean <= fixed,
        per_trial,
        step_size: alphas[0].to_f64_lossy(),
        beta: cfg.beta.to_f64_lossy(),
        gamma: cfg.gamma.to_f64_lossy(),
        kappa: problem.kappa.to_f64_lossy(),
        delta0: problem.delta0.to_f64_lossy(),
        lambda_smooth: problem.lambda_smooth.to_f64_lossy(),
        kappa_sq_estimate: 2.0 * outcomes[0].1,
        kappa_source: "supplied upper bound".into(),
        objective_measure: "empirical measure of the fixed dataset".into(),
    })
}

/// Outcome of sampling the weak-convexity inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub triples: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` seen; negative beyond `-1e-9` is a violation.
    pub worst_slack: f64,
    pub gamma: f64,
    pub radius: f64,
}

/// Violation threshold for the probe.
pub const PROBE_SLACK: f64 = 1e-9;

/// Samples `(x, x', a)` with `x, x'` uniform in the ball of `radius` about
/// `center` and `a` uniform in `[0, 1]`, and checks
/// `f(a x + (1-a) x') <= a f(x) + (1-a) f(x') + gamma/2 a (1-a) |x - x'|^2`.
pub fn weak_convexity_probe<T: Scalar, O: ObjectiveOracle<T> + ?Sized>(
    objective: &O,
    gamma: T,
    num_triples: usize,
    center: &[T],
    radius: T,
    seed: u64,
) -> Result<ProbeReport> {
    let dim = objective.dim();
    if center.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: center.len() });
    }
    let mut rng = stream_rng(seed, 0);
    let ball_point = |rng: &mut crate::rng::StreamRng| -> Vec<T> {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let r = radius.to_f64_lossy() * rng.random::<f64>().powf(1.0 / dim as f64);
        dir.iter().zip(center).map(|(d, &c)| c + T::lit(d / norm * r)).collect()
    };
    let triples: Vec<(Vec<T>, Vec<T>, T)> = (0..num_triples)
        .map(|_| {
            let x = ball_point(&mut rng);
            let y = ball_point(&mut rng);
            (x, y, T::lit(rng.random::<f64>()))
        })
        .collect();

    let half = T::lit(0.5);
    let slacks: Vec<f64> = triples
        .par_iter()
        .map(|(x, y, a)| {
            let b = T::one() - *a;
            let mid: Vec<T> = x.iter().zip(y).map(|(&u, &v)| *a * u + b * v).collect();
            let dist = x.iter().zip(y).fold(T::zero(), |s, (&u, &v)| s + (u - v) * (u - v));
            let rhs = *a * objective.value(x) + b * objective.value(y) + gamma * half * *a * b * dist;
            (rhs - objective.value(&mid)).to_f64_lossy()
        })
        .collect();
    Ok(ProbeReport {
        triples: num_triples,
        violations: slacks.iter().filter(|&&s| s < -PROBE_SLACK).count(),
        worst_slack: slacks.iter().copied().fold(f64::INFINITY, f64::min),
        gamma: gamma.to_f64_lossy(),
        radius: radius.to_f64_lossy(),
    })
}

/// Agreement between an oracle gradient and central differences of its
/// value at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_abs_error: f64,
    /// `|g - g_fd| / max(|g|, |g_fd|)`, zero when both vanish.
    pub relative_error: f64,
}

/// Compares `objective.gradient(x)` with central differences of step
/// `step * max(1, |x_i|)` in each coordinate. Only meaningful where the
/// objective is differentiable within one step of `x`.
pub fn gradient_check<T: Scalar, O: ObjectiveOracle<T> + ?Sized>(
    objective: &O,
    x: &[T],
    step: T,
) -> Result<GradientCheck> {
    let dim = objective.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: x.len() });
    }
    if !(step > T::zero()) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let g = objective.gradient(x);
    let two = T::lit(2.0);
    let mut probe = x.to_vec();
    let fd: Vec<T> = (0..dim)
        .map(|i| {
            let h = step * x[i].abs().max(T::one());
            probe[i] = x[i] + h;
            let up = objective.value(&probe);
            probe[i] = x[i] - h;
            let down = objective.value(&probe);
            probe[i] = x[i];
            (up - down) / (two * h)
        })
        .collect();
    let diff: Vec<T> = g.iter().zip(&fd).map(|(&a, &b)| a - b).collect();
    let scale = norm_sq(&g).sqrt().max(norm_sq(&fd).sqrt());
    let err = norm_sq(&diff).sqrt();
    Ok(GradientCheck {
        max_abs_error: diff.iter().fold(0.0, |m, v| f64::max(m, v.abs().to_f64_lossy())),
        relative_error: if scale > T::zero() { (err / scale).to_f64_lossy() } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::sign0;
    use approx::assert_relative_eq;

    fn cfg(beta: f64, gamma: f64) -> EnvelopeConfig<f64> {
        EnvelopeConfig::new(beta, gamma, 1e-12, 10_000, ProjectionSet::Identity).unwrap()
    }

    fn abs1() -> impl ObjectiveOracle<f64> {
        FnObjective::new(1, |x: &[f64]| x[0].abs(), |x: &[f64]| vec![sign0(x[0])])
    }

    fn half_sq1() -> impl ObjectiveOracle<f64> {
        FnObjective::new(1, |x: &[f64]| 0.5 * x[0] * x[0], |x: &[f64]| vec![x[0]])
    }

    #[test]
    fn gamma_branches() {
        let p = RiskParams::new(Sigma::Zero, 1.05).unwrap();
        assert_relative_eq!(gamma_for(&p, 1.0).unwrap(), 2.05, max_relative = 1e-15);
        // eta = 2 sigma / pi sits on the boundary of valid risk parameters.
        let g = weak_convexity_constant(Sigma::Finite(std::f64::consts::FRAC_PI_2), 1.0, 1.0).unwrap();
        assert_relative_eq!(g, 2.0, max_relative = 1e-15);
        let p = RiskParams::new(Sigma::Finite(1.0), 1.0).unwrap();
        assert_relative_eq!(
            gamma_for(&p, 3.0).unwrap(),
            3.0 * (1.0 + std::f64::consts::FRAC_PI_2),
            max_relative = 1e-15
        );
        let p = RiskParams::new(Sigma::Infinite, 1.0).unwrap();
        assert!(matches!(gamma_for(&p, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gradient_check_matches_smooth_quadratic() {
        let f = FnObjective::new(
            2,
            |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1],
            |x: &[f64]| vec![2.0 * x[0] + 3.0 * x[1], 3.0 * x[0]],
        );
        let c = gradient_check(&f, &[0.7, -1.3], 1e-6).unwrap();
        assert!(c.relative_error < 1e-8, "{c:?}");
        let wrong = FnObjective::new(1, |x: &[f64]| x[0] * x[0], |x: &[f64]| vec![x[0]]);
        assert!(gradient_check(&wrong, &[1.0], 1e-6).unwrap().relative_error > 0.4);
    }

    #[test]
    fn config_requires_beta_gamma_below_one() {
        assert!(EnvelopeConfig::new(1.0, 1.0, 1e-10, 10, ProjectionSet::Identity).is_err());
        assert!(EnvelopeConfig::new(0.4, 2.0, 1e-10, 10, ProjectionSet::<f64>::Identity).is_ok());
    }

    #[test]
    fn prox_closed_forms() {
        let zero = FnObjective::new(2, |_: &[f64]| 0.0, |_: &[f64]| vec![0.0, 0.0]);
        let p = prox_point(&zero, &[0.3, -1.0], &cfg(1.0, 0.0)).unwrap();
        assert_eq!(p.point, vec![0.3, -1.0]);
        assert_eq!(envelope_grad(&zero, &[0.3, -1.0], &cfg(1.0, 0.0)).unwrap(), vec![0.0, 0.0]);

        let p = prox_point(&abs1(), &[2.0], &cfg(0.5, 0.0)).unwrap();
        assert_relative_eq!(p.point[0], 1.5, epsilon = 1e-10);
        assert_relative_eq!(envelope_grad(&abs1(), &[2.0], &cfg(0.5, 0.0)).unwrap()[0], 1.0, epsilon = 1e-9);

        let p = prox_point(&half_sq1(), &[2.0], &cfg(1.0, 0.0)).unwrap();
        assert_relative_eq!(p.point[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(envelope_grad(&half_sq1(), &[2.0], &cfg(1.0, 0.0)).unwrap()[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn envelope_of_half_square() {
        let mut rng = stream_rng(17, 0);
        for _ in 0..200 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let beta: f64 = rng.random_range(0.05..5.0);
            let g = envelope_grad(&half_sq1(), &[x], &cfg(beta, 0.0)).unwrap()[0];
            assert!((g - x / (1.0 + beta)).abs() <= 1e-8, "x={x} beta={beta} g={g}");
        }
    }

    #[test]
    fn prox_respects_feasible_set() {
        let set = ProjectionSet::boxed(vec![-1.0], vec![1.0]).unwrap();
        let c = EnvelopeConfig::new(1.0, 0.0, 1e-12, 1000, set).unwrap();
        let p = prox_point(&half_sq1(), &[5.0], &c).unwrap();
        assert_relative_eq!(p.point[0], 1.0);
        assert!(p.mapping_norm <= 1e-12);
    }

    #[test]
    fn prox_optimality_on_joint_risk() {
        let data: Vec<Example<f64>> = (0..30)
            .map(|i| {
                let x = i as f64 / 29.0;
                Example::regression(vec![x], 1.0 + x + 0.3 * ((i * 7 % 11) as f64 / 11.0 - 0.5))
            })
            .collect();
        let params = RiskParams::new(Sigma::Finite(1.0), 2.0).unwrap();
        let obj = EmpiricalJointObjective::new(&data, 1, 1, LossKind::Squared, params).unwrap();
        let gamma = gamma_for(&params, loss_smoothness(LossKind::Squared, &data).unwrap()).unwrap();
        let c = EnvelopeConfig::half_gamma(gamma, ProjectionSet::Identity).unwrap();
        let x = [0.4, -0.2, 0.7];
        let p = prox_point(&obj, &x, &c).unwrap();
        let mut g = obj.gradient(&p.point);
        for ((gi, &pi), &xi) in g.iter_mut().zip(&p.point).zip(&x) {
            *gi += (pi - xi) / c.beta();
        }
        assert!(norm_sq(&g).sqrt() <= c.tolerance());
    }

    #[test]
    fn empirical_objective_gradient_matches_differences() {
        let data = vec![
            Example::regression(vec![0.2], 1.0),
            Example::regression(vec![0.9], 2.5),
            Example::regression(vec![0.5], 0.1),
        ];
        let params = RiskParams::new(Sigma::Finite(0.5), 1.0).unwrap();
        let obj = EmpiricalJointObjective::new(&data, 1, 1, LossKind::Squared, params).unwrap();
        let x = [0.3, 0.6, 0.2];
        let g = obj.gradient(&x);
        for i in 0..3 {
            let h = 1e-6;
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn probe_detects_violations() {
        let convex =
            FnObjective::new(2, |x: &[f64]| x[0] * x[0] + x[1].abs(), |x: &[f64]| vec![2.0 * x[0], sign0(x[1])]);
        let r = weak_convexity_probe(&convex, 0.0, 2000, &[0.0, 0.0], 3.0, 1).unwrap();
        assert_eq!(r.violations, 0);

        let concave = FnObjective::new(1, |x: &[f64]| -x[0] * x[0], |x: &[f64]| vec![-2.0 * x[0]]);
        let r = weak_convexity_probe(&concave, -1.0, 500, &[0.0], 1.0, 2).unwrap();
        assert!(r.violations > 0);
        assert!(r.worst_slack < 0.0);
        // Exactly enough curvature compensation: -x^2 is 2-weakly convex.
        let r = weak_convexity_probe(&concave, 2.0, 500, &[0.0], 1.0, 2).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn bound_arithmetic() {
        let alphas = vec![0.1; 10];
        let b = stationarity_bound(0.25, 2.0, 3.0, 4.0, &alphas);
        let expected = (4.0 + 2.0 * 9.0 * 0.1 / 2.0) / 1.0 / 0.5;
        assert_relative_eq!(b, expected, max_relative = 1e-15);
        assert_relative_eq!(
            fixed_horizon_bound(2.0, 3.0, 4.0, 100) / fixed_horizon_bound(2.0, 3.0, 4.0, 200),
            std::f64::consts::SQRT_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn stationary_start_reports_zero() {
        let params = RiskParams::new(Sigma::Finite(1.0), 2.0).unwrap();
        let theta = solve_theta(&Sample::new(vec![0.0]).unwrap(), &params).unwrap().theta_star;
        let data: Vec<Example<f64>> = (0..10).map(|i| Example::regression(vec![i as f64 / 9.0], 0.0)).collect();
        let problem =
            StationarityProblem::squared_regression(data, params, 4.0, JointState::new(vec![0.0, 0.0], theta), 4)
                .unwrap();
        let c = EnvelopeConfig::half_gamma(problem.gamma().unwrap(), problem.feasible_set.clone()).unwrap();
        let r = check_stationarity(&problem, 100, 8, &c, 3).unwrap();
        assert!(r.env_grad_norm_sq_mean <= 1e-12);
        assert!(r.within_theorem_bound);
        assert_eq!(r.per_trial.len(), 8);
    }
}
