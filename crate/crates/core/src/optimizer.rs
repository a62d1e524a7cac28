//! Projected stochastic sub-gradient method on the joint variable
//! `(h, theta)` with randomized output.
//!
//! Each step draws feedback
//!
//! ```text
//! g_h     = eta * mean_i[ dev_sigma'(l_i - theta) * grad l_i ]
//! g_theta = 1 - eta * mean_i[ dev_sigma'(l_i - theta) ]
//! ```
//!
//! over a minibatch, moves `(h, theta) <- P_C[(h, theta) - alpha_t G_t]`, and
//! after `n` steps returns iterate `T` drawn with `P{T = t}` proportional to
//! `alpha_t`. The full trajectory is kept as well.

use crate::error::{Error, Result};
use crate::losses::{Example, LinearModel, LossEval, LossKind};
use crate::riskfn::{dev_sigma_prime, RiskParams};
use crate::rng::{stream_rng, StreamRng, STREAM_OUTPUT_INDEX};
use crate::scalar::{norm_sq, Scalar};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Model parameters `h` together with the location variable `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState<T> {
    pub h: Vec<T>,
    pub theta: T,
}

impl<T: Scalar> JointState<T> {
    pub fn new(h: Vec<T>, theta: T) -> Self {
        Self { h, theta }
    }

    /// Number of coordinates, `theta` included.
    pub fn dim(&self) -> usize {
        self.h.len() + 1
    }

    /// Flat vector `(h..., theta)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.h.clone();
        v.push(self.theta);
        v
    }

    pub fn from_slice(x: &[T]) -> Self {
        let (theta, h) = x.split_last().expect("joint state has at least theta");
        Self { h: h.to_vec(), theta: *theta }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.h.iter().all(|v| v.is_finite())
    }
}

/// Stochastic sub-gradient sample over `(h, theta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Feedback<T> {
    pub g_h: Vec<T>,
    pub g_theta: T,
}

impl<T: Scalar> Feedback<T> {
    pub fn zeros(dim_h: usize) -> Self {
        Self { g_h: vec![T::zero(); dim_h], g_theta: T::zero() }
    }

    pub fn norm(&self) -> T {
        (norm_sq(&self.g_h) + self.g_theta * self.g_theta).sqrt()
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut v = self.g_h.clone();
        v.push(self.g_theta);
        v
    }
}

/// Composes per-example loss evaluations into joint-risk feedback.
pub fn feedback_from_evals<T: Scalar>(evals: &[LossEval<T>], theta: T, params: &RiskParams<T>) -> Feedback<T> {
    assert!(!evals.is_empty(), "feedback needs a non-empty minibatch");
    let dim = evals[0].grad.len();
    let inv_n = T::one() / T::from_usize_lossy(evals.len());
    let mut g_h = vec![T::zero(); dim];
    let mut mean_weight = T::zero();
    for e in evals {
        let w = dev_sigma_prime(e.value - theta, params);
        mean_weight += w;
        for (g, &d) in g_h.iter_mut().zip(&e.grad) {
            *g += w * d;
        }
    }
    let scale = params.eta() * inv_n;
    for g in &mut g_h {
        *g *= scale;
    }
    Feedback { g_h, g_theta: T::one() - params.eta() * mean_weight * inv_n }
}

/// Joint-risk feedback for a linear model over a minibatch.
pub fn feedback<T: Scalar>(
    minibatch: &[&Example<T>],
    model: &LinearModel<T>,
    theta: T,
    params: &RiskParams<T>,
    loss: LossKind,
) -> Result<Feedback<T>> {
    if minibatch.is_empty() {
        return Err(Error::InvalidSample("minibatch must be non-empty".into()));
    }
    let evals = minibatch.iter().map(|ex| loss.eval(model, ex)).collect::<Result<Vec<_>>>()?;
    Ok(feedback_from_evals(&evals, theta, params))
}

/// Plain empirical-risk feedback: the mean loss gradient, with `g_theta = 0`.
pub fn erm_feedback<T: Scalar>(
    minibatch: &[&Example<T>],
    model: &LinearModel<T>,
    loss: LossKind,
) -> Result<Feedback<T>> {
    if minibatch.is_empty() {
        return Err(Error::InvalidSample("minibatch must be non-empty".into()));
    }
    let mut g_h = vec![T::zero(); model.param_count()];
    for ex in minibatch {
        let e = loss.eval(model, ex)?;
        for (g, d) in g_h.iter_mut().zip(e.grad) {
            *g += d;
        }
    }
    let inv_n = T::one() / T::from_usize_lossy(minibatch.len());
    for g in &mut g_h {
        *g *= inv_n;
    }
    Ok(Feedback { g_h, g_theta: T::zero() })
}

/// Step-size rule.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSchedule<T> {
    Constant(T),
    /// `alpha_t = sqrt(delta0 / (horizon * gamma * kappa^2))` for every `t`,
    /// from known bounds on the initial gap `delta0`, the weak-convexity
    /// constant `gamma` and the feedback second moment `kappa^2`.
    FixedHorizon {
        delta0: T,
        gamma: T,
        kappa: T,
        horizon: usize,
    },
}

impl<T: Scalar> StepSchedule<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(a) => a > T::zero() && a.is_finite(),
            StepSchedule::FixedHorizon { delta0, gamma, kappa, horizon } => {
                delta0 > T::zero()
                    && gamma > T::zero()
                    && kappa > T::zero()
                    && horizon > 0
                    && delta0.is_finite()
                    && gamma.is_finite()
                    && kappa.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("step schedule must be positive: {self:?}")))
        }
    }

    pub fn alpha(&self, _t: usize) -> T {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::FixedHorizon { delta0, gamma, kappa, horizon } => {
                (delta0 / (T::from_usize_lossy(horizon) * gamma * kappa * kappa)).sqrt()
            }
        }
    }
}

/// Closed convex feasible set for the joint iterate. Ball and box sets act
/// on the flat vector `(h..., theta)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionSet<T> {
    Identity,
    Ball { center: Vec<T>, radius: T },
    Box { lower: Vec<T>, upper: Vec<T> },
}

impl<T: Scalar> ProjectionSet<T> {
    pub fn ball(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidConfig(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ProjectionSet::Ball { center, radius })
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidConfig("box needs lower <= upper in every coordinate".into()));
        }
        Ok(ProjectionSet::Box { lower, upper })
    }

    /// Symmetric box `[-r, r]^dim`.
    pub fn cube(dim: usize, r: T) -> Result<Self> {
        Self::boxed(vec![-r; dim], vec![r; dim])
    }

    /// Euclidean projection of a flat point.
    pub fn project_vec(&self, x: &mut [T]) {
        match self {
            ProjectionSet::Identity => {}
            ProjectionSet::Ball { center, radius } => {
                assert_eq!(center.len(), x.len(), "ball dimension");
                let dist = x.iter().zip(center).fold(T::zero(), |a, (&v, &c)| a + (v - c) * (v - c)).sqrt();
                // Points within a few ulps of the sphere count as inside, so
                // re-projecting a projected point is the identity.
                if dist > *radius * (T::one() + T::lit(4.0) * T::epsilon()) {
                    let scale = *radius / dist;
                    for (v, &c) in x.iter_mut().zip(center) {
                        *v = c + (*v - c) * scale;
                    }
                }
            }
            ProjectionSet::Box { lower, upper } => {
                assert_eq!(lower.len(), x.len(), "box dimension");
                for ((v, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
                    *v = v.max(l).min(u);
                }
            }
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        let mut y = x.to_vec();
        self.project_vec(&mut y);
        let scale = x.iter().fold(T::one(), |a, v| a.max(v.abs()));
        y.iter().zip(x).all(|(a, b)| (*a - *b).abs() <= T::lit(1e-12) * scale)
    }
}

/// Euclidean projection of a joint state onto `set`.
pub fn project<T: Scalar>(state: &JointState<T>, set: &ProjectionSet<T>) -> JointState<T> {
    let mut x = state.to_vec();
    set.project_vec(&mut x);
    JointState::from_slice(&x)
}

/// Anything that can produce a feedback sample at the current iterate.
pub trait FeedbackSource<T> {
    fn sample(&mut self, state: &JointState<T>) -> Result<Feedback<T>>;
}

impl<T, F> FeedbackSource<T> for F
where
    F: FnMut(&JointState<T>) -> Result<Feedback<T>>,
{
    fn sample(&mut self, state: &JointState<T>) -> Result<Feedback<T>> {
        self(state)
    }
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord<T> {
    /// Iterates `0..=n`.
    pub trajectory: Vec<JointState<T>>,
    /// `||G_t||` for `t = 0..n`.
    pub feedback_norms: Vec<T>,
    pub step_sizes: Vec<T>,
    /// Randomized output index `T` in `0..n`.
    pub output_index: usize,
    pub output_state: JointState<T>,
    pub seed: u64,
}

impl<T: Scalar> RunRecord<T> {
    pub fn final_state(&self) -> &JointState<T> {
        self.trajectory.last().expect("trajectory is never empty")
    }
}

/// Draws the randomized output index with `P{T = t}` proportional to `alphas[t]`.
pub fn draw_output_index<T: Scalar, R: Rng + ?Sized>(alphas: &[T], rng: &mut R) -> Result<usize> {
    let weights: Vec<f64> = alphas.iter().map(|a| a.to_f64_lossy()).collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidConfig(format!("step sizes cannot weight the output draw: {e}")))?;
    Ok(dist.sample(rng))
}

/// Runs `n` projected sub-gradient steps from `initial`.
pub fn run<T: Scalar, S: FeedbackSource<T> + ?Sized>(
    initial: JointState<T>,
    schedule: &StepSchedule<T>,
    set: &ProjectionSet<T>,
    n: usize,
    source: &mut S,
    seed: u64,
) -> Result<RunRecord<T>> {
    if n == 0 {
        return Err(Error::InvalidConfig("a run needs at least one iteration".into()));
    }
    schedule.validate()?;
    if !set.contains(&initial.to_vec()) {
        return Err(Error::InvalidConfig("initial point lies outside the projection set".into()));
    }
    let mut trajectory = Vec::with_capacity(n + 1);
    let mut feedback_norms = Vec::with_capacity(n);
    let mut step_sizes = Vec::with_capacity(n);
    let mut x = initial.to_vec();
    trajectory.push(initial);

    for t in 0..n {
        let g = source.sample(trajectory.last().expect("non-empty"))?;
        if g.g_h.len() + 1 != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: g.g_h.len() + 1 });
        }
        let alpha = schedule.alpha(t);
        for (v, d) in x.iter_mut().zip(g.g_h.iter().chain(std::iter::once(&g.g_theta))) {
            *v -= alpha * *d;
        }
        set.project_vec(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedState { step: t + 1 });
        }
        feedback_norms.push(g.norm());
        step_sizes.push(alpha);
        trajectory.push(JointState::from_slice(&x));
    }

    let mut rng = stream_rng(seed, STREAM_OUTPUT_INDEX);
    let output_index = draw_output_index(&step_sizes, &mut rng)?;
    let output_state = trajectory[output_index].clone();
    Ok(RunRecord { trajectory, feedback_norms, step_sizes, output_index, output_state, seed })
}

/// How minibatch indices are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// Independent uniform indices, with replacement, every step.
    IidWithReplacement,
    /// One shuffle per epoch, partitioned into consecutive batches; the last
    /// batch of an epoch may be short.
    EpochShuffle,
}

/// Deterministic minibatch index generator.
#[derive(Clone, Debug)]
pub struct Minibatcher {
    n_items: usize,
    batch_size: usize,
    mode: BatchMode,
    rng: StreamRng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl Minibatcher {
    pub fn batches_per_epoch(&self) -> usize {
        self.n_items.div_ceil(self.batch_size.min(self.n_items))
    }

    /// Number of completed epochs (epoch mode) so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        match self.mode {
            BatchMode::IidWithReplacement => {
                (0..self.batch_size).map(|_| self.rng.random_range(0..self.n_items)).collect()
            }
            BatchMode::EpochShuffle => {
                if self.cursor >= self.n_items {
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                    self.epoch += 1;
                }
                let end = (self.cursor + self.batch_size).min(self.n_items);
                let batch = self.order[self.cursor..end].to_vec();
                self.cursor = end;
                batch
            }
        }
    }
}

/// Builds a minibatch index stream over `n_items` examples.
pub fn make_minibatcher(n_items: usize, batch_size: usize, mode: BatchMode, seed: u64) -> Result<Minibatcher> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    if n_items == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = stream_rng(seed, crate::rng::STREAM_BATCHES);
    let mut order: Vec<usize> = (0..n_items).collect();
    if mode == BatchMode::EpochShuffle {
        order.shuffle(&mut rng);
    }
    Ok(Minibatcher { n_items, batch_size, mode, rng, order, cursor: 0, epoch: 0 })
}

/// What the feedback optimizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective<T> {
    /// Joint risk with the given `(sigma, eta)`.
    Risk(RiskParams<T>),
    /// Mean loss; `theta` is left untouched.
    Erm,
}

/// Minibatch feedback for a linear model over a fixed dataset.
pub struct DatasetFeedback<'a, T> {
    data: &'a [Example<T>],
    d_in: usize,
    n_out: usize,
    loss: LossKind,
    objective: Objective<T>,
    batcher: Minibatcher,
}

impl<'a, T: Scalar> DatasetFeedback<'a, T> {
    pub fn new(
        data: &'a [Example<T>],
        d_in: usize,
        n_out: usize,
        loss: LossKind,
        objective: Objective<T>,
        batcher: Minibatcher,
    ) -> Self {
        Self { data, d_in, n_out, loss, objective, batcher }
    }

    pub fn batcher(&self) -> &Minibatcher {
        &self.batcher
    }
}

impl<T: Scalar> FeedbackSource<T> for DatasetFeedback<'_, T> {
    fn sample(&mut self, state: &JointState<T>) -> Result<Feedback<T>> {
        let model = LinearModel::from_params(self.d_in, self.n_out, state.h.clone())?;
        let idx = self.batcher.next_batch();
        let batch: Vec<&Example<T>> = idx.iter().map(|&i| &self.data[i]).collect();
        match &self.objective {
            Objective::Risk(params) => feedback(&batch, &model, state.theta, params, self.loss),
            Objective::Erm => erm_feedback(&batch, &model, self.loss),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riskfn::Sigma;
    use approx::assert_relative_eq;

    #[test]
    fn feedback_hand_chain_rule() {
        let params = RiskParams::new(Sigma::Infinite, 1.0).unwrap();
        let evals = [LossEval { value: 1.0, grad: vec![0.5, -2.0] }];
        let g = feedback_from_evals(&evals, 0.0, &params);
        assert_eq!(g.g_h, vec![1.0, -4.0]);
        assert_eq!(g.g_theta, -1.0);
    }

    #[test]
    fn feedback_median_tie_break() {
        let params = RiskParams::new(Sigma::Zero, 1.05).unwrap();
        let evals = [LossEval { value: 0.7, grad: vec![3.0] }];
        let g = feedback_from_evals(&evals, 0.7, &params);
        assert_eq!(g.g_h, vec![0.0]);
        assert_eq!(g.g_theta, 1.0);
    }

    #[test]
    fn erm_feedback_is_mean_gradient() {
        let model = LinearModel::from_params(1, 1, vec![0.5, 0.1]).unwrap();
        let data = [Example::regression(vec![1.0], 2.0), Example::regression(vec![-1.0], 0.0)];
        let batch: Vec<&Example<f64>> = data.iter().collect();
        let g = erm_feedback(&batch, &model, LossKind::Squared).unwrap();
        let a = LossKind::Squared.eval(&model, &data[0]).unwrap().grad;
        let b = LossKind::Squared.eval(&model, &data[1]).unwrap().grad;
        assert_eq!(g.g_h, vec![(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
        assert_eq!(g.g_theta, 0.0);
    }

    #[test]
    fn projections() {
        let s = JointState::new(vec![3.0, -4.0], 7.0);
        assert_eq!(project(&s, &ProjectionSet::Identity), s);

        let ball = ProjectionSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = project(&JointState::new(vec![2.0], 0.0), &ball);
        assert_relative_eq!(p.h[0], 1.0);
        assert_eq!(p.theta, 0.0);
        let p: JointState<f64> = project(&JointState::new(vec![1.2], 1.6), &ball);
        assert_relative_eq!((p.h[0].powi(2) + p.theta.powi(2)).sqrt(), 1.0, max_relative = 1e-15);

        let bx = ProjectionSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(project(&JointState::new(vec![2.0], -1.0), &bx), JointState::new(vec![1.0], 0.0));
        assert!(ProjectionSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ProjectionSet::<f64>::ball(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn projection_is_idempotent() {
        let sets = [
            ProjectionSet::ball(vec![0.5, -0.5, 1.0], 0.75).unwrap(),
            ProjectionSet::boxed(vec![-1.0, 0.0, -2.0], vec![1.0, 0.5, -1.0]).unwrap(),
        ];
        let mut rng = stream_rng(3, 0);
        for set in &sets {
            for _ in 0..1000 {
                let s = JointState::new(
                    vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)],
                    rng.random_range(-5.0..5.0),
                );
                let once = project(&s, set);
                assert_eq!(project(&once, set), once);
            }
        }
    }

    #[test]
    fn zero_feedback_keeps_initial_point() {
        let init = JointState::new(vec![0.3, -0.2], 0.1);
        let mut source = |_: &JointState<f64>| Ok(Feedback::zeros(2));
        let rec =
            run(init.clone(), &StepSchedule::Constant(0.1), &ProjectionSet::Identity, 50, &mut source, 9).unwrap();
        assert_eq!(rec.trajectory.len(), 51);
        assert!(rec.trajectory.iter().all(|s| *s == init));
        assert_eq!(rec.output_state, rec.trajectory[rec.output_index]);
        assert!(rec.output_index < 50);
    }

    #[test]
    fn quadratic_descent_converges() {
        let target = [1.5, -0.5, 2.0];
        let mut source = |s: &JointState<f64>| {
            let x = s.to_vec();
            let g: Vec<f64> = x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            Ok(Feedback { g_h: g[..2].to_vec(), g_theta: g[2] })
        };
        let init = JointState::new(vec![0.0, 0.0], 0.0);
        let rec = run(init, &StepSchedule::Constant(1e-3), &ProjectionSet::Identity, 10_000, &mut source, 1).unwrap();
        let last = rec.final_state().to_vec();
        for (a, b) in last.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3);
        }
        // Objective values never increase below the curvature threshold.
        let f = |s: &JointState<f64>| s.to_vec().iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        for w in rec.trajectory.windows(2) {
            assert!(f(&w[1]) <= f(&w[0]));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut source = |s: &JointState<f64>| Ok(Feedback { g_h: vec![2.0 * s.h[0]], g_theta: 0.0 });
        let init = JointState::new(vec![1.0], 0.0);
        let err = run(init, &StepSchedule::Constant(10.0), &ProjectionSet::Identity, 5000, &mut source, 0).unwrap_err();
        assert!(matches!(err, Error::DivergedState { .. }));
    }

    #[test]
    fn run_rejects_infeasible_start_and_empty_horizon() {
        let mut source = |_: &JointState<f64>| Ok(Feedback::zeros(1));
        let bx = ProjectionSet::cube(2, 1.0).unwrap();
        assert!(run(JointState::new(vec![2.0], 0.0), &StepSchedule::Constant(0.1), &bx, 3, &mut source, 0).is_err());
        assert!(run(JointState::new(vec![0.0], 0.0), &StepSchedule::Constant(0.1), &bx, 0, &mut source, 0).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let data: Vec<Example<f64>> =
            (0..20).map(|i| Example::regression(vec![i as f64 / 20.0], 1.0 + i as f64 / 10.0)).collect();
        let params = RiskParams::with_default_eta(Sigma::Finite(0.5)).unwrap();
        let go = || {
            let b = make_minibatcher(data.len(), 4, BatchMode::IidWithReplacement, 11).unwrap();
            let mut src = DatasetFeedback::new(&data, 1, 1, LossKind::Squared, Objective::Risk(params), b);
            run(
                JointState::new(vec![0.0, 0.0], 0.0),
                &StepSchedule::Constant(0.01),
                &ProjectionSet::Identity,
                200,
                &mut src,
                11,
            )
            .unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a, b);
    }

    #[test]
    fn epoch_batches_partition_indices() {
        let mut b = make_minibatcher(16, 8, BatchMode::EpochShuffle, 5).unwrap();
        assert_eq!(b.batches_per_epoch(), 2);
        for _ in 0..3 {
            let mut seen: Vec<usize> = b.next_batch();
            let second = b.next_batch();
            assert_eq!(seen.len(), 8);
            assert_eq!(second.len(), 8);
            seen.extend(second);
            seen.sort();
            assert_eq!(seen, (0..16).collect::<Vec<_>>());
        }
    }

    #[test]
    fn epoch_batch_larger_than_dataset() {
        let mut b = make_minibatcher(5, 8, BatchMode::EpochShuffle, 5).unwrap();
        assert_eq!(b.batches_per_epoch(), 1);
        let mut first = b.next_batch();
        first.sort();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
        assert_eq!(b.next_batch().len(), 5);
    }

    #[test]
    fn short_last_batch_is_kept() {
        let mut b = make_minibatcher(10, 4, BatchMode::EpochShuffle, 1).unwrap();
        let sizes: Vec<usize> = (0..3).map(|_| b.next_batch().len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn iid_batches_are_deterministic() {
        let mut a = make_minibatcher(100, 8, BatchMode::IidWithReplacement, 42).unwrap();
        let mut b = make_minibatcher(100, 8, BatchMode::IidWithReplacement, 42).unwrap();
        for _ in 0..10 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
        assert!(make_minibatcher(10, 0, BatchMode::IidWithReplacement, 0).is_err());
    }

    #[test]
    fn fixed_horizon_step() {
        let s = StepSchedule::FixedHorizon { delta0: 2.0, gamma: 4.0, kappa: 0.5, horizon: 8 };
        assert_relative_eq!(s.alpha(3), (2.0_f64 / (8.0 * 4.0 * 0.25)).sqrt());
        assert!(StepSchedule::Constant(-1.0_f64).validate().is_err());
    }
}
