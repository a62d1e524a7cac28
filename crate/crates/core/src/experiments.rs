//! Seeded multi-trial runners: the two-distribution toy problem, 1-D
//! regression under two noise laws, multiclass logistic classification
//! against a plain ERM baseline, and test-set risk curves.
//!
//! Every outcome is a pure function of the resolved configuration. Trials run
//! in parallel and are gathered by index before any aggregation.

use crate::data::{
    draw_folded_normal, folded_normal_moments, load_csv, split, synth_blobs, BlobNoise, BlobSpec, CsvSchema, Dataset,
    InputLaw, LabelKind, NoiseLaw, RegressionLaw, SplitSpec,
};
use crate::error::{Error, Result};
use crate::losses::{zero_one_error, Example, LinearModel, LossEval, LossKind};
use crate::optimizer::{
    feedback, feedback_from_evals, make_minibatcher, run, BatchMode, DatasetFeedback, JointState, Objective,
    ProjectionSet, StepSchedule,
};
use crate::risk_eval::{mean_variance_closed_form, risk_empirical, Sample};
use crate::riskfn::{default_eta, RiskParams, Sigma};
use crate::rng::{stream_rng, trial_seed, STREAM_DATA, STREAM_INIT};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

/// Which study a configuration describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Toy,
    Linreg,
    Classify,
    Riskcurve,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Toy => "toy",
            ExperimentKind::Linreg => "linreg",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Riskcurve => "riskcurve",
        })
    }
}

/// Noise family for the regression study; the scale is `noise_scale`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Normal,
    LognormalCentered,
}

impl NoiseKind {
    fn law(self, scale: f64) -> NoiseLaw {
        match self {
            NoiseKind::None => NoiseLaw::None,
            NoiseKind::Normal => NoiseLaw::Normal(scale),
            NoiseKind::LognormalCentered => NoiseLaw::LognormalCentered(scale),
        }
    }

    fn name(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Normal => "normal",
            NoiseKind::LognormalCentered => "lognormal_centered",
        }
    }
}

/// Run metadata stored alongside a resolved configuration. Ignored on input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub library_version: String,
    pub command: String,
    pub trial_seeds: Vec<u64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Flat experiment configuration. Unset optional fields take
/// kind-dependent defaults in [`ExperimentConfig::resolved`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sigma_grid: Option<Vec<Sigma<f64>>>,
    /// Explicit eta values, crossed with `sigma_grid`; unset means the
    /// default eta of each sigma.
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub step_size: Option<f64>,
    /// Half-width of the uniform initial perturbation of `(h, theta)`.
    #[serde(default)]
    pub init_noise: Option<f64>,
    #[serde(default)]
    pub trajectory_stride: Option<usize>,
    /// Confines every coordinate of `(h, theta)` to `[-r, r]`; unset means
    /// no constraint.
    #[serde(default)]
    pub projection_radius: Option<f64>,

    #[serde(default)]
    pub h0: Option<f64>,
    #[serde(default)]
    pub theta0: Option<f64>,
    #[serde(default)]
    pub a_wide: Option<f64>,
    #[serde(default)]
    pub b_wide: Option<f64>,
    #[serde(default)]
    pub a_thin: Option<f64>,
    #[serde(default)]
    pub b_thin: Option<f64>,

    #[serde(default)]
    pub w0: Option<f64>,
    #[serde(default)]
    pub w1: Option<f64>,
    #[serde(default)]
    pub noise_scale: Option<f64>,
    #[serde(default)]
    pub noise_laws: Option<Vec<NoiseKind>>,
    #[serde(default)]
    pub input_law: Option<InputLaw>,

    #[serde(default)]
    pub csv_path: Option<String>,
    #[serde(default)]
    pub csv_label: Option<String>,
    #[serde(default)]
    pub csv_label_kind: Option<LabelKind>,
    #[serde(default)]
    pub csv_categorical: Option<Vec<String>>,
    #[serde(default)]
    pub blob_classes: Option<usize>,
    #[serde(default)]
    pub blob_dim: Option<usize>,
    #[serde(default)]
    pub blob_separation: Option<f64>,
    #[serde(default)]
    pub blob_count: Option<usize>,
    #[serde(default)]
    pub blob_label_noise: Option<f64>,
    /// Student-t degrees of freedom for blob noise; 0 means Gaussian.
    #[serde(default)]
    pub blob_student_t_dof: Option<f64>,
    #[serde(default)]
    pub train_fraction: Option<f64>,
    #[serde(default)]
    pub include_erm: Option<bool>,
    #[serde(default)]
    pub eval_sigma_grid: Option<Vec<Sigma<f64>>>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Default iteration budget for the toy and regression studies.
pub const DEFAULT_ITERATIONS: usize = 20_000;
pub const DEFAULT_BATCH_SIZE: usize = 8;
/// Box half-width for regression iterates. Mean-variance feedback grows with
/// the cube of the residual, so one extreme log-normal draw can otherwise
/// throw the iterate into a divergent regime at the default step size.
pub const DEFAULT_REGRESSION_RADIUS: f64 = 10.0;

fn default_sigma_grid() -> Vec<Sigma<f64>> {
    vec![Sigma::Zero, Sigma::Finite(0.5), Sigma::Finite(2.0), Sigma::Finite(8.0), Sigma::Infinite]
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be finite and positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be at least 1")))
    }
}

impl ExperimentConfig {
    /// A configuration with every optional field unset.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: 0,
            sigma_grid: None,
            eta: None,
            trials: None,
            iterations: None,
            epochs: None,
            batch_size: None,
            step_size: None,
            init_noise: None,
            trajectory_stride: None,
            projection_radius: None,
            h0: None,
            theta0: None,
            a_wide: None,
            b_wide: None,
            a_thin: None,
            b_thin: None,
            w0: None,
            w1: None,
            noise_scale: None,
            noise_laws: None,
            input_law: None,
            csv_path: None,
            csv_label: None,
            csv_label_kind: None,
            csv_categorical: None,
            blob_classes: None,
            blob_dim: None,
            blob_separation: None,
            blob_count: None,
            blob_label_noise: None,
            blob_student_t_dof: None,
            train_fraction: None,
            include_erm: None,
            eval_sigma_grid: None,
            provenance: None,
        }
    }

    /// Fills every field relevant to `kind` and validates the result.
    /// Fields irrelevant to `kind` are cleared.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = Self::new(self.kind);
        c.seed = self.seed;
        c.batch_size = Some(self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE));
        c.init_noise = Some(self.init_noise.unwrap_or(0.05));
        c.eta = self.eta.clone();
        c.projection_radius = self.projection_radius;
        match self.kind {
            ExperimentKind::Toy => {
                c.sigma_grid = Some(self.sigma_grid.clone().unwrap_or_else(|| vec![Sigma::Infinite]));
                if c.eta.is_none() {
                    c.eta = Some((0..8).map(|k| f64::from(1u32 << k)).collect());
                }
                c.trials = Some(self.trials.unwrap_or(100));
                c.iterations = Some(self.iterations.unwrap_or(DEFAULT_ITERATIONS));
                c.step_size = Some(self.step_size.unwrap_or(0.001));
                c.trajectory_stride = Some(self.trajectory_stride.unwrap_or(10));
                c.h0 = Some(self.h0.unwrap_or(0.5));
                c.theta0 = Some(self.theta0.unwrap_or(0.5));
                c.a_wide = Some(self.a_wide.unwrap_or(0.0));
                c.b_wide = Some(self.b_wide.unwrap_or(1.0));
                c.a_thin = Some(self.a_thin.unwrap_or(2.0));
                c.b_thin = Some(self.b_thin.unwrap_or(0.1));
                c.init_noise = None;
            }
            ExperimentKind::Linreg => {
                c.sigma_grid = Some(self.sigma_grid.clone().unwrap_or_else(default_sigma_grid));
                c.trials = Some(self.trials.unwrap_or(100));
                c.iterations = Some(self.iterations.unwrap_or(DEFAULT_ITERATIONS));
                c.step_size = Some(self.step_size.unwrap_or(0.001));
                c.trajectory_stride = Some(self.trajectory_stride.unwrap_or(100));
                c.w0 = Some(self.w0.unwrap_or(1.0));
                c.w1 = Some(self.w1.unwrap_or(1.0));
                c.noise_scale = Some(self.noise_scale.unwrap_or(0.8));
                c.noise_laws = Some(
                    self.noise_laws.clone().unwrap_or_else(|| vec![NoiseKind::Normal, NoiseKind::LognormalCentered]),
                );
                c.input_law = Some(self.input_law.unwrap_or(InputLaw::StandardNormal));
                c.projection_radius = Some(self.projection_radius.unwrap_or(DEFAULT_REGRESSION_RADIUS));
            }
            ExperimentKind::Classify | ExperimentKind::Riskcurve => {
                c.sigma_grid = Some(self.sigma_grid.clone().unwrap_or_else(default_sigma_grid));
                c.trials = Some(self.trials.unwrap_or(10));
                c.epochs = Some(self.epochs.unwrap_or(100));
                c.step_size = self.step_size;
                c.train_fraction = Some(self.train_fraction.unwrap_or(SplitSpec::DEFAULT_TRAIN_FRACTION));
                c.include_erm = Some(self.include_erm.unwrap_or(true));
                if let Some(path) = &self.csv_path {
                    c.csv_path = Some(path.clone());
                    c.csv_label = Some(
                        self.csv_label
                            .clone()
                            .ok_or_else(|| Error::InvalidConfig("csv_label is required with csv_path".into()))?,
                    );
                    c.csv_label_kind = Some(self.csv_label_kind.unwrap_or(LabelKind::Class));
                    c.csv_categorical = Some(self.csv_categorical.clone().unwrap_or_default());
                } else {
                    c.blob_classes = Some(self.blob_classes.unwrap_or(3));
                    c.blob_dim = Some(self.blob_dim.unwrap_or(4));
                    c.blob_separation = Some(self.blob_separation.unwrap_or(6.0));
                    c.blob_count = Some(self.blob_count.unwrap_or(1000));
                    c.blob_label_noise = Some(self.blob_label_noise.unwrap_or(0.1));
                    c.blob_student_t_dof = Some(self.blob_student_t_dof.unwrap_or(0.0));
                }
                if self.kind == ExperimentKind::Riskcurve {
                    c.eval_sigma_grid = Some(self.eval_sigma_grid.clone().unwrap_or_else(|| {
                        vec![
                            Sigma::Zero,
                            Sigma::Finite(0.1),
                            Sigma::Finite(0.5),
                            Sigma::Finite(1.0),
                            Sigma::Finite(2.0),
                            Sigma::Finite(4.0),
                            Sigma::Finite(8.0),
                            Sigma::Infinite,
                        ]
                    }));
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.sigma_grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(Error::InvalidConfig("sigma_grid must be non-empty".into()));
        }
        if let Some(etas) = &self.eta {
            if etas.is_empty() {
                return Err(Error::InvalidConfig("eta list must be non-empty".into()));
            }
        }
        risk_settings(self)?;
        for (name, v) in
            [("trials", self.trials), ("batch_size", self.batch_size), ("trajectory_stride", self.trajectory_stride)]
        {
            if let Some(v) = v {
                at_least_one(name, v)?;
            }
        }
        if let Some(a) = self.step_size {
            positive("step_size", a)?;
        }
        if let Some(r) = self.projection_radius {
            positive("projection_radius", r)?;
        }
        for (name, v) in
            [("b_wide", self.b_wide), ("b_thin", self.b_thin), ("blob_count", self.blob_count.map(|c| c as f64))]
        {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let Some(s) = self.noise_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("noise_scale must be nonnegative, got {s}")));
            }
        }
        if let Some(v) = self.init_noise {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("init_noise must be nonnegative, got {v}")));
            }
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!("train_fraction must lie in (0, 1), got {f}")));
            }
        }
        if self.noise_laws.as_ref().is_some_and(|l| l.is_empty()) {
            return Err(Error::InvalidConfig("noise_laws must be non-empty".into()));
        }
        if self.eval_sigma_grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(Error::InvalidConfig("eval_sigma_grid must be non-empty".into()));
        }
        Ok(())
    }

    /// Seeds of every trial, in order.
    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials.unwrap_or(0)).map(|i| trial_seed(self.seed, i as u64)).collect()
    }

    /// Feasible set for a joint iterate of dimension `dim`.
    pub fn feasible_set(&self, dim: usize) -> Result<ProjectionSet<f64>> {
        match self.projection_radius {
            Some(r) => ProjectionSet::cube(dim, r),
            None => Ok(ProjectionSet::Identity),
        }
    }

    fn req<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::InvalidConfig(format!("{name} is unset; resolve the configuration first")))
    }
}

/// `(sigma, eta)` pairs of a configuration: `sigma_grid x eta` when `eta`
/// is listed, otherwise each sigma with its default eta.
pub fn risk_settings(cfg: &ExperimentConfig) -> Result<Vec<RiskParams<f64>>> {
    let grid = cfg.sigma_grid.clone().unwrap_or_default();
    match &cfg.eta {
        Some(etas) => grid
            .iter()
            .flat_map(|&s| etas.iter().map(move |&e| RiskParams::new(s, e)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidConfig(e.to_string())),
        None => grid.iter().map(|&s| RiskParams::with_default_eta(s)).collect(),
    }
}

/// Plot-ready table written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl MetricsTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn sigma_cell(p: &RiskParams<f64>) -> String {
    match p.sigma() {
        Sigma::Zero => "0".into(),
        Sigma::Finite(s) => fmt_f64(s),
        Sigma::Infinite => "inf".into(),
    }
}

/// Strided trajectory average: rows `(step, mean of each coordinate)`.
fn average_trajectories(trajs: &[Vec<(usize, Vec<f64>)>]) -> Vec<(usize, Vec<f64>)> {
    let n = trajs.len() as f64;
    let mut out: Vec<(usize, Vec<f64>)> = trajs[0].iter().map(|(t, v)| (*t, vec![0.0; v.len()])).collect();
    for tr in trajs {
        for ((_, acc), (_, v)) in out.iter_mut().zip(tr) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
    }
    for (_, acc) in &mut out {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    out
}

fn strided(trajectory: &[JointState<f64>], stride: usize) -> Vec<(usize, Vec<f64>)> {
    let last = trajectory.len() - 1;
    trajectory.iter().enumerate().filter(|(t, _)| t % stride == 0 || *t == last).map(|(t, s)| (t, s.to_vec())).collect()
}

// ---------------------------------------------------------------- toy

/// One toy trial.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyTrial {
    pub final_h: f64,
    pub final_theta: f64,
    pub output_index: usize,
    pub output_h: f64,
    pub output_theta: f64,
}

/// All trials of one `(sigma, eta)` setting.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySetting {
    pub params: RiskParams<f64>,
    pub trials: Vec<ToyTrial>,
    /// `(step, mean h, mean theta)` every `trajectory_stride` steps.
    pub mean_trajectory: Vec<(usize, f64, f64)>,
    /// Minimizer of mean plus eta times variance, for `sigma = inf`.
    pub closed_form_h: Option<f64>,
}

impl ToySetting {
    pub fn mean_final_h(&self) -> (f64, f64) {
        mean_se(&self.trials.iter().map(|t| t.final_h).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyOutcome {
    pub settings: Vec<ToySetting>,
}

/// Minimizer over `h` of `E l + eta Var l` for `l = h L_wide + (1 - h) L_thin`
/// with independent folded-normal `L_wide`, `L_thin`.
pub fn toy_closed_form_h(eta: f64, wide: (f64, f64), thin: (f64, f64)) -> f64 {
    let (m_w, s_w) = folded_normal_moments(wide.0, wide.1);
    let (m_t, s_t) = folded_normal_moments(thin.0, thin.1);
    let v_w = s_w - m_w * m_w;
    let v_t = s_t - m_t * m_t;
    (m_t - m_w + 2.0 * eta * v_t) / (2.0 * eta * (v_w + v_t))
}

/// Learns the mixing weight `h` of `l(h) = h L_wide + (1 - h) L_thin`
/// from fresh minibatches of folded-normal draws.
pub fn run_toy(cfg: &ExperimentConfig) -> Result<ToyOutcome> {
    let cfg = &cfg.resolved()?;
    let settings = risk_settings(cfg)?;
    let trials = ExperimentConfig::req(cfg.trials, "trials")?;
    let n = ExperimentConfig::req(cfg.iterations, "iterations")?;
    let batch = ExperimentConfig::req(cfg.batch_size, "batch_size")?;
    let alpha = ExperimentConfig::req(cfg.step_size, "step_size")?;
    let stride = ExperimentConfig::req(cfg.trajectory_stride, "trajectory_stride")?;
    let h0 = ExperimentConfig::req(cfg.h0, "h0")?;
    let theta0 = ExperimentConfig::req(cfg.theta0, "theta0")?;
    let wide = (ExperimentConfig::req(cfg.a_wide, "a_wide")?, ExperimentConfig::req(cfg.b_wide, "b_wide")?);
    let thin = (ExperimentConfig::req(cfg.a_thin, "a_thin")?, ExperimentConfig::req(cfg.b_thin, "b_thin")?);
    let set = cfg.feasible_set(2)?;

    let jobs: Vec<(usize, usize)> = (0..settings.len()).flat_map(|s| (0..trials).map(move |t| (s, t))).collect();
    let results = jobs
        .par_iter()
        .map(|&(s, t)| {
            let params = settings[s];
            let seed = trial_seed(cfg.seed, t as u64);
            let init = JointState::new(vec![h0], theta0);
            if n == 0 {
                let trial =
                    ToyTrial { final_h: h0, final_theta: theta0, output_index: 0, output_h: h0, output_theta: theta0 };
                return Ok((trial, vec![(0, vec![h0, theta0])]));
            }
            let mut rng = stream_rng(seed, STREAM_DATA);
            let mut source = |state: &JointState<f64>| {
                let h = state.h[0];
                let evals: Vec<LossEval<f64>> = (0..batch)
                    .map(|_| {
                        let lw = draw_folded_normal(&mut rng, wide.0, wide.1);
                        let lt = draw_folded_normal(&mut rng, thin.0, thin.1);
                        LossEval { value: h * lw + (1.0 - h) * lt, grad: vec![lw - lt] }
                    })
                    .collect();
                Ok(feedback_from_evals(&evals, state.theta, &params))
            };
            let rec = run(init, &StepSchedule::Constant(alpha), &set, n, &mut source, seed)?;
            let last = rec.final_state();
            let trial = ToyTrial {
                final_h: last.h[0],
                final_theta: last.theta,
                output_index: rec.output_index,
                output_h: rec.output_state.h[0],
                output_theta: rec.output_state.theta,
            };
            Ok((trial, strided(&rec.trajectory, stride)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(settings.len());
    for (s, chunk) in results.chunks(trials).enumerate() {
        let params = settings[s];
        let trajs: Vec<_> = chunk.iter().map(|(_, tr)| tr.clone()).collect();
        let mean_trajectory = average_trajectories(&trajs).into_iter().map(|(t, v)| (t, v[0], v[1])).collect();
        let closed_form_h =
            matches!(params.sigma(), Sigma::Infinite).then(|| toy_closed_form_h(params.eta(), wide, thin));
        out.push(ToySetting {
            params,
            trials: chunk.iter().map(|(t, _)| t.clone()).collect(),
            mean_trajectory,
            closed_form_h,
        });
    }
    Ok(ToyOutcome { settings: out })
}

impl ToyOutcome {
    pub fn tables(&self) -> Vec<MetricsTable> {
        let mut traj = MetricsTable::new("trajectories", &["sigma", "eta", "step", "mean_h", "mean_theta"]);
        let mut finals = MetricsTable::new(
            "final_states",
            &["sigma", "eta", "trial", "final_h", "final_theta", "output_index", "output_h", "output_theta"],
        );
        let mut summary =
            MetricsTable::new("summary", &["sigma", "eta", "mean_final_h", "se_final_h", "closed_form_h"]);
        for s in &self.settings {
            let (sig, eta) = (sigma_cell(&s.params), fmt_f64(s.params.eta()));
            for (t, h, th) in &s.mean_trajectory {
                traj.push(vec![sig.clone(), eta.clone(), t.to_string(), fmt_f64(*h), fmt_f64(*th)]);
            }
            for (i, t) in s.trials.iter().enumerate() {
                finals.push(vec![
                    sig.clone(),
                    eta.clone(),
                    i.to_string(),
                    fmt_f64(t.final_h),
                    fmt_f64(t.final_theta),
                    t.output_index.to_string(),
                    fmt_f64(t.output_h),
                    fmt_f64(t.output_theta),
                ]);
            }
            let (m, se) = s.mean_final_h();
            summary.push(vec![sig, eta, fmt_f64(m), fmt_f64(se), s.closed_form_h.map_or(String::new(), fmt_f64)]);
        }
        vec![traj, finals, summary]
    }
}

// ---------------------------------------------------------------- linreg

/// Final line of one regression trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineTrial {
    pub w0: f64,
    pub w1: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinregSetting {
    pub noise: NoiseKind,
    pub params: RiskParams<f64>,
    pub trials: Vec<LineTrial>,
    /// `(step, mean w0, mean w1, mean theta)`.
    pub mean_trajectory: Vec<(usize, f64, f64, f64)>,
}

impl LinregSetting {
    /// Trial mean and standard error of `(w0, w1)`.
    pub fn line(&self) -> ((f64, f64), (f64, f64)) {
        let w0 = mean_se(&self.trials.iter().map(|t| t.w0).collect::<Vec<_>>());
        let w1 = mean_se(&self.trials.iter().map(|t| t.w1).collect::<Vec<_>>());
        (w0, w1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinregOutcome {
    pub settings: Vec<LinregSetting>,
}

/// Uniform `[-r, r]` perturbation of `dim` model coordinates and theta.
fn perturbed_init(dim: usize, r: f64, seed: u64) -> JointState<f64> {
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut draw = || if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
    let h = (0..dim).map(|_| draw()).collect();
    JointState::new(h, draw())
}

/// Fits `y = w0 + w1 x` with squared loss on fresh minibatches from the
/// regression law, for every noise law and risk setting.
pub fn run_linreg(cfg: &ExperimentConfig) -> Result<LinregOutcome> {
    let cfg = &cfg.resolved()?;
    let settings = risk_settings(cfg)?;
    let laws = cfg.noise_laws.clone().expect("resolved");
    let trials = ExperimentConfig::req(cfg.trials, "trials")?;
    let n = ExperimentConfig::req(cfg.iterations, "iterations")?;
    let batch = ExperimentConfig::req(cfg.batch_size, "batch_size")?;
    let alpha = ExperimentConfig::req(cfg.step_size, "step_size")?;
    let stride = ExperimentConfig::req(cfg.trajectory_stride, "trajectory_stride")?;
    let init_noise = ExperimentConfig::req(cfg.init_noise, "init_noise")?;
    let scale = ExperimentConfig::req(cfg.noise_scale, "noise_scale")?;
    let (w0, w1) = (ExperimentConfig::req(cfg.w0, "w0")?, ExperimentConfig::req(cfg.w1, "w1")?);
    let input = ExperimentConfig::req(cfg.input_law, "input_law")?;
    let set = cfg.feasible_set(3)?;

    let combos: Vec<(NoiseKind, RiskParams<f64>)> =
        laws.iter().flat_map(|&l| settings.iter().map(move |&p| (l, p))).collect();
    let jobs: Vec<(usize, usize)> = (0..combos.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let results = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (noise, params) = combos[c];
            let law = RegressionLaw { w0, w1, noise: noise.law(scale), input };
            let seed = trial_seed(cfg.seed, t as u64);
            let init = perturbed_init(2, init_noise, seed);
            let to_line = |s: &JointState<f64>| LineTrial { w0: s.h[1], w1: s.h[0], theta: s.theta };
            if n == 0 {
                let line = to_line(&init);
                return Ok((line, vec![(0, init.to_vec())]));
            }
            let mut rng = stream_rng(seed, STREAM_DATA);
            let mut source = |state: &JointState<f64>| {
                let model = LinearModel::from_params(1, 1, state.h.clone())?;
                let draws: Vec<Example<f64>> = (0..batch).map(|_| law.draw(&mut rng)).collect();
                let refs: Vec<&Example<f64>> = draws.iter().collect();
                feedback(&refs, &model, state.theta, &params, LossKind::Squared)
            };
            let rec = run(init, &StepSchedule::Constant(alpha), &set, n, &mut source, seed)?;
            Ok((to_line(rec.final_state()), strided(&rec.trajectory, stride)))
        })
        .collect::<Result<Vec<_>>>()?;

    let settings = results
        .chunks(trials)
        .zip(&combos)
        .map(|(chunk, &(noise, params))| {
            let trajs: Vec<_> = chunk.iter().map(|(_, tr)| tr.clone()).collect();
            let mean_trajectory =
                average_trajectories(&trajs).into_iter().map(|(t, v)| (t, v[1], v[0], v[2])).collect();
            LinregSetting { noise, params, trials: chunk.iter().map(|(l, _)| *l).collect(), mean_trajectory }
        })
        .collect();
    Ok(LinregOutcome { settings })
}

impl LinregOutcome {
    pub fn setting(&self, noise: NoiseKind, sigma: Sigma<f64>) -> Option<&LinregSetting> {
        self.settings.iter().find(|s| s.noise == noise && s.params.sigma() == sigma)
    }

    pub fn tables(&self) -> Vec<MetricsTable> {
        let mut lines = MetricsTable::new("lines", &["noise", "sigma", "eta", "mean_w0", "se_w0", "mean_w1", "se_w1"]);
        let mut finals = MetricsTable::new("final_states", &["noise", "sigma", "eta", "trial", "w0", "w1", "theta"]);
        let mut traj =
            MetricsTable::new("trajectories", &["noise", "sigma", "eta", "step", "mean_w0", "mean_w1", "mean_theta"]);
        for s in &self.settings {
            let (noise, sig, eta) = (s.noise.name().to_string(), sigma_cell(&s.params), fmt_f64(s.params.eta()));
            let ((m0, se0), (m1, se1)) = s.line();
            lines.push(vec![
                noise.clone(),
                sig.clone(),
                eta.clone(),
                fmt_f64(m0),
                fmt_f64(se0),
                fmt_f64(m1),
                fmt_f64(se1),
            ]);
            for (i, t) in s.trials.iter().enumerate() {
                finals.push(vec![
                    noise.clone(),
                    sig.clone(),
                    eta.clone(),
                    i.to_string(),
                    fmt_f64(t.w0),
                    fmt_f64(t.w1),
                    fmt_f64(t.theta),
                ]);
            }
            for (t, a, b, th) in &s.mean_trajectory {
                traj.push(vec![
                    noise.clone(),
                    sig.clone(),
                    eta.clone(),
                    t.to_string(),
                    fmt_f64(*a),
                    fmt_f64(*b),
                    fmt_f64(*th),
                ]);
            }
        }
        vec![lines, finals, traj]
    }
}

// ---------------------------------------------------------------- classify

/// Training signal of a classification run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Mean-loss feedback with no location variable.
    Erm,
    Risk(RiskParams<f64>),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Erm => "off".into(),
            Method::Risk(p) => format!("sigma={}", sigma_cell(p)),
        }
    }

    fn cells(&self) -> [String; 3] {
        match self {
            Method::Erm => ["off".into(), String::new(), String::new()],
            Method::Risk(p) => [self.label(), sigma_cell(p), fmt_f64(p.eta())],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyTrial {
    /// Test zero-one error at the start of each epoch, and after the last.
    pub test_error_by_epoch: Vec<f64>,
    /// Per-example test logistic losses of the final iterate.
    pub test_losses: Vec<f64>,
    pub final_state: JointState<f64>,
}

impl ClassifyTrial {
    pub fn test_loss_variance(&self) -> f64 {
        Sample::new(self.test_losses.clone()).map_or(0.0, |s| s.variance())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyMethod {
    pub method: Method,
    pub trials: Vec<ClassifyTrial>,
}

impl ClassifyMethod {
    pub fn mean_test_loss_variance(&self) -> f64 {
        mean_se(&self.trials.iter().map(|t| t.test_loss_variance()).collect::<Vec<_>>()).0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyOutcome {
    pub methods: Vec<ClassifyMethod>,
    pub param_count: usize,
    pub step_size: f64,
    pub epochs: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub class_count: usize,
}

/// Number of histogram bins for test-loss tables.
pub const HISTOGRAM_BINS: usize = 50;

/// Equal-width counts over `[0, max(values)]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    let edges: Vec<f64> = (0..=bins).map(|i| top * i as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = if top > 0.0 { ((v / top) * bins as f64).floor() as usize } else { 0 };
        counts[b.min(bins - 1)] += 1;
    }
    (edges, counts)
}

/// The `q`-quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Builds the classification dataset a configuration refers to.
pub fn classification_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    if let Some(path) = &cfg.csv_path {
        let schema = CsvSchema {
            label: cfg.csv_label.clone().ok_or_else(|| Error::InvalidConfig("csv_label is required".into()))?,
            label_kind: cfg.csv_label_kind.unwrap_or(LabelKind::Class),
            categorical: cfg.csv_categorical.clone().unwrap_or_default(),
            ignore: Vec::new(),
        };
        let ds = load_csv(path, &schema)?.dataset;
        if ds.class_count.is_none_or(|k| k < 2) {
            return Err(Error::InvalidConfig("classification needs a class label with at least two levels".into()));
        }
        return Ok(ds);
    }
    let dof = cfg.blob_student_t_dof.unwrap_or(0.0);
    let spec = BlobSpec {
        class_count: ExperimentConfig::req(cfg.blob_classes, "blob_classes")?,
        dim: ExperimentConfig::req(cfg.blob_dim, "blob_dim")?,
        separation: ExperimentConfig::req(cfg.blob_separation, "blob_separation")?,
        count: ExperimentConfig::req(cfg.blob_count, "blob_count")?,
        label_noise: cfg.blob_label_noise.unwrap_or(0.0),
        noise: if dof > 0.0 { BlobNoise::StudentT(dof) } else { BlobNoise::Gaussian },
    };
    synth_blobs(&spec, cfg.seed).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn mean_zero_one(model: &LinearModel<f64>, data: &[Example<f64>]) -> Result<f64> {
    let mut errors = 0.0;
    for ex in data {
        errors += zero_one_error(model, ex)?;
    }
    Ok(errors / data.len() as f64)
}

/// Multiclass logistic regression trained with risk feedback for each
/// setting and, optionally, with plain ERM. Each trial re-splits the data
/// and re-draws the initial point; all methods share both within a trial.
pub fn run_classify(cfg: &ExperimentConfig) -> Result<ClassifyOutcome> {
    let cfg = &cfg.resolved()?;
    let dataset = classification_dataset(cfg)?;
    let class_count = dataset.class_count.expect("classification data");
    let d_in = dataset.dim();
    let param_count = LinearModel::<f64>::param_count_for(d_in, class_count);
    let step_size = cfg.step_size.unwrap_or(0.01 / (param_count as f64).sqrt());
    let trials = ExperimentConfig::req(cfg.trials, "trials")?;
    let epochs = ExperimentConfig::req(cfg.epochs, "epochs")?;
    let batch = ExperimentConfig::req(cfg.batch_size, "batch_size")?;
    let init_noise = ExperimentConfig::req(cfg.init_noise, "init_noise")?;
    let train_fraction = ExperimentConfig::req(cfg.train_fraction, "train_fraction")?;
    let set = cfg.feasible_set(param_count + 1)?;

    let mut methods: Vec<Method> = Vec::new();
    if cfg.include_erm.unwrap_or(true) {
        methods.push(Method::Erm);
    }
    methods.extend(risk_settings(cfg)?.into_iter().map(Method::Risk));

    let splits = (0..trials)
        .map(|t| split(&dataset, &SplitSpec { train_fraction, seed: trial_seed(cfg.seed, t as u64) }))
        .collect::<Result<Vec<_>>>()?;
    let (train_size, test_size) = (splits[0].0.len(), splits[0].1.len());

    let jobs: Vec<(usize, usize)> = (0..methods.len()).flat_map(|m| (0..trials).map(move |t| (m, t))).collect();
    let results = jobs
        .par_iter()
        .map(|&(m, t)| {
            let seed = trial_seed(cfg.seed, t as u64);
            let (train, test) = &splits[t];
            let init = perturbed_init(param_count, init_noise, seed);
            let batcher = make_minibatcher(train.len(), batch, BatchMode::EpochShuffle, seed)?;
            let per_epoch = batcher.batches_per_epoch();
            let states: Vec<JointState<f64>> = if epochs == 0 {
                vec![init]
            } else {
                let objective = match methods[m] {
                    Method::Erm => Objective::Erm,
                    Method::Risk(p) => Objective::Risk(p),
                };
                let mut source =
                    DatasetFeedback::new(&train.examples, d_in, class_count, LossKind::Logistic, objective, batcher);
                let rec = run(init, &StepSchedule::Constant(step_size), &set, epochs * per_epoch, &mut source, seed)?;
                rec.trajectory.into_iter().step_by(per_epoch).collect()
            };
            let mut test_error_by_epoch = Vec::with_capacity(states.len());
            for s in &states {
                let model = LinearModel::from_params(d_in, class_count, s.h.clone())?;
                test_error_by_epoch.push(mean_zero_one(&model, &test.examples)?);
            }
            let final_state = states.last().expect("non-empty").clone();
            let model = LinearModel::from_params(d_in, class_count, final_state.h.clone())?;
            let test_losses =
                test.examples.iter().map(|ex| LossKind::Logistic.value(&model, ex)).collect::<Result<Vec<_>>>()?;
            Ok(ClassifyTrial { test_error_by_epoch, test_losses, final_state })
        })
        .collect::<Result<Vec<_>>>()?;

    let methods = results
        .chunks(trials)
        .zip(&methods)
        .map(|(chunk, &method)| ClassifyMethod { method, trials: chunk.to_vec() })
        .collect();
    Ok(ClassifyOutcome { methods, param_count, step_size, epochs, train_size, test_size, class_count })
}

/// Comparison of the best finite positive sigma against ERM.
#[derive(Clone, Debug, PartialEq)]
pub struct TailComparison {
    /// Index into `ClassifyOutcome::methods`.
    pub best_method: usize,
    /// Trials where the best setting has strictly lower test-loss variance.
    pub variance_wins: usize,
    pub trials: usize,
    /// Mean over trials of the fraction of test losses above that trial's
    /// ERM 95th percentile.
    pub erm_tail_mass: f64,
    pub best_tail_mass: f64,
}

impl ClassifyOutcome {
    pub fn erm(&self) -> Option<&ClassifyMethod> {
        self.methods.iter().find(|m| m.method == Method::Erm)
    }

    /// Picks the finite positive sigma with the lowest mean test-loss
    /// variance and compares it trial by trial against ERM.
    pub fn tail_comparison(&self) -> Option<TailComparison> {
        let erm = self.erm()?;
        let best_method = self
            .methods
            .iter()
            .enumerate()
            .filter(|(_, m)| matches!(m.method, Method::Risk(p) if p.sigma().is_finite_positive()))
            .min_by(|a, b| a.1.mean_test_loss_variance().total_cmp(&b.1.mean_test_loss_variance()))?
            .0;
        let best = &self.methods[best_method];
        let mut variance_wins = 0;
        let (mut erm_tail, mut best_tail) = (0.0, 0.0);
        for (e, b) in erm.trials.iter().zip(&best.trials) {
            if b.test_loss_variance() < e.test_loss_variance() {
                variance_wins += 1;
            }
            let q = quantile(&e.test_losses, 0.95);
            let frac = |v: &[f64]| v.iter().filter(|&&x| x > q).count() as f64 / v.len() as f64;
            erm_tail += frac(&e.test_losses);
            best_tail += frac(&b.test_losses);
        }
        let n = erm.trials.len() as f64;
        Some(TailComparison {
            best_method,
            variance_wins,
            trials: erm.trials.len(),
            erm_tail_mass: erm_tail / n,
            best_tail_mass: best_tail / n,
        })
    }

    pub fn tables(&self) -> Vec<MetricsTable> {
        let mut errors =
            MetricsTable::new("test_error", &["method", "sigma", "eta", "epoch", "mean_test_error", "se_test_error"]);
        let mut losses = MetricsTable::new("test_losses", &["method", "sigma", "eta", "trial", "example", "loss"]);
        let mut hist =
            MetricsTable::new("histograms", &["method", "sigma", "eta", "trial", "bin", "lower", "upper", "count"]);
        let mut summary = MetricsTable::new(
            "loss_summary",
            &["method", "sigma", "eta", "trial", "test_loss_mean", "test_loss_variance", "final_test_error"],
        );
        for m in &self.methods {
            let [label, sig, eta] = m.method.cells();
            let row = |rest: Vec<String>| [vec![label.clone(), sig.clone(), eta.clone()], rest].concat();
            let epochs = m.trials[0].test_error_by_epoch.len();
            for e in 0..epochs {
                let (mean, se) = mean_se(&m.trials.iter().map(|t| t.test_error_by_epoch[e]).collect::<Vec<_>>());
                errors.push(row(vec![e.to_string(), fmt_f64(mean), fmt_f64(se)]));
            }
            for (i, t) in m.trials.iter().enumerate() {
                for (j, l) in t.test_losses.iter().enumerate() {
                    losses.push(row(vec![i.to_string(), j.to_string(), fmt_f64(*l)]));
                }
                let (edges, counts) = histogram(&t.test_losses, HISTOGRAM_BINS);
                for (b, c) in counts.iter().enumerate() {
                    hist.push(row(vec![
                        i.to_string(),
                        b.to_string(),
                        fmt_f64(edges[b]),
                        fmt_f64(edges[b + 1]),
                        c.to_string(),
                    ]));
                }
                let mean = t.test_losses.iter().sum::<f64>() / t.test_losses.len() as f64;
                summary.push(row(vec![
                    i.to_string(),
                    fmt_f64(mean),
                    fmt_f64(t.test_loss_variance()),
                    fmt_f64(*t.test_error_by_epoch.last().expect("non-empty")),
                ]));
            }
        }
        let mut tables = vec![errors, losses, hist, summary];
        if let Some(c) = self.tail_comparison() {
            let mut t = MetricsTable::new(
                "tail_comparison",
                &["best_method", "variance_wins", "trials", "erm_tail_mass", "best_tail_mass"],
            );
            t.push(vec![
                self.methods[c.best_method].method.label(),
                c.variance_wins.to_string(),
                c.trials.to_string(),
                fmt_f64(c.erm_tail_mass),
                fmt_f64(c.best_tail_mass),
            ]);
            tables.push(t);
        }
        tables
    }
}

// ---------------------------------------------------------------- riskcurve

/// Test-set risk of each trained model at each evaluation setting.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskCurve {
    pub eval_params: Vec<RiskParams<f64>>,
    pub methods: Vec<Method>,
    /// `risks[m][e]`: trial-mean risk of method `m` at evaluation `e`.
    pub risks: Vec<Vec<f64>>,
    pub risk_se: Vec<Vec<f64>>,
    /// For each evaluation sigma that was also a training sigma: the rank
    /// (1 = lowest risk) of the model trained at that sigma.
    pub self_ranks: Vec<(RiskParams<f64>, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RiskcurveOutcome {
    pub classify: ClassifyOutcome,
    pub curve: RiskCurve,
}

/// Evaluates the empirical risk of each model's test losses at every
/// evaluation sigma, with that sigma's default eta.
pub fn risk_curve(outcome: &ClassifyOutcome, eval_grid: &[Sigma<f64>]) -> Result<RiskCurve> {
    let eval_params = eval_grid.iter().map(|&s| RiskParams::with_default_eta(s)).collect::<Result<Vec<_>>>()?;
    let mut risks = Vec::new();
    let mut risk_se = Vec::new();
    for m in &outcome.methods {
        let mut row = Vec::new();
        let mut row_se = Vec::new();
        for p in &eval_params {
            let per_trial = m
                .trials
                .iter()
                .map(|t| risk_empirical(&Sample::new(t.test_losses.clone())?, p))
                .collect::<Result<Vec<_>>>()?;
            let (mean, se) = mean_se(&per_trial);
            row.push(mean);
            row_se.push(se);
        }
        risks.push(row);
        risk_se.push(row_se);
    }
    let methods: Vec<Method> = outcome.methods.iter().map(|m| m.method).collect();
    let mut self_ranks = Vec::new();
    for (e, p) in eval_params.iter().enumerate() {
        if let Some(own) = methods.iter().position(|m| matches!(m, Method::Risk(q) if q.sigma() == p.sigma())) {
            let rank = 1 + risks.iter().filter(|r| r[e] < risks[own][e]).count();
            self_ranks.push((*p, rank, methods.len()));
        }
    }
    Ok(RiskCurve { eval_params, methods, risks, risk_se, self_ranks })
}

/// Trains as [`run_classify`] and tabulates test-set risks over the
/// evaluation grid.
pub fn run_riskcurve(cfg: &ExperimentConfig) -> Result<RiskcurveOutcome> {
    let resolved = cfg.resolved()?;
    let classify = run_classify(&resolved)?;
    let grid = resolved.eval_sigma_grid.clone().expect("resolved");
    let curve = risk_curve(&classify, &grid)?;
    Ok(RiskcurveOutcome { classify, curve })
}

impl RiskcurveOutcome {
    pub fn tables(&self) -> Vec<MetricsTable> {
        let mut t = MetricsTable::new(
            "risk_levels",
            &["method", "sigma", "eta", "eval_sigma", "eval_eta", "mean_risk", "se_risk"],
        );
        for (m, method) in self.curve.methods.iter().enumerate() {
            let [label, sig, eta] = method.cells();
            for (e, p) in self.curve.eval_params.iter().enumerate() {
                t.push(vec![
                    label.clone(),
                    sig.clone(),
                    eta.clone(),
                    sigma_cell(p),
                    fmt_f64(p.eta()),
                    fmt_f64(self.curve.risks[m][e]),
                    fmt_f64(self.curve.risk_se[m][e]),
                ]);
            }
        }
        let mut ranks = MetricsTable::new("self_rank", &["eval_sigma", "eval_eta", "rank", "models"]);
        for (p, rank, of) in &self.curve.self_ranks {
            ranks.push(vec![sigma_cell(p), fmt_f64(p.eta()), rank.to_string(), of.to_string()]);
        }
        let mut tables = self.classify.tables();
        tables.push(t);
        tables.push(ranks);
        tables
    }
}

/// Equivalence of the `sigma = inf` risk with the closed form, on one
/// sample of test losses.
pub fn closed_form_gap(losses: &[f64], eta: f64) -> Result<f64> {
    let s = Sample::new(losses.to_vec())?;
    let p = RiskParams::new(Sigma::Infinite, eta)?;
    Ok((risk_empirical(&s, &p)? - mean_variance_closed_form(&s, eta)).abs())
}

/// Default eta of each sigma in a grid, for display.
pub fn default_etas(grid: &[Sigma<f64>]) -> Vec<f64> {
    grid.iter().map(|s| default_eta(*s)).collect()
}
