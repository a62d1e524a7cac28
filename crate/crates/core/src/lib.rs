//! Risk-averse learning with the `(sigma, eta)` family of optimized
//! certainty-equivalent risks.
//!
//! The math modules are generic over the floating-point type through
//! [`Scalar`]; `f64` aliases are exported at the crate root. Dataset handling
//! and experiment drivers work in `f64`.

// `!(x > 0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiments;
pub mod losses;
pub mod moreau;
pub mod optimizer;
pub mod risk_eval;
pub mod riskfn;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use losses::{Example, Label, LinearModel, LossEval, LossKind};
pub use optimizer::{
    BatchMode, DatasetFeedback, Feedback, FeedbackSource, JointState, Minibatcher, Objective, ProjectionSet, RunRecord,
    StepSchedule,
};
pub use risk_eval::{NonmonotonePair, Sample, ThetaSolution};
pub use riskfn::{RiskParams, Sigma};
pub use scalar::Scalar;

/// Version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type RiskParams64 = RiskParams<f64>;
pub type Sigma64 = Sigma<f64>;
pub type Sample64 = Sample<f64>;
pub type Example64 = Example<f64>;
pub type JointState64 = JointState<f64>;
pub type Feedback64 = Feedback<f64>;
pub type ProjectionSet64 = ProjectionSet<f64>;

pub type RiskParams32 = RiskParams<f32>;
pub type Sigma32 = Sigma<f32>;
pub type Sample32 = Sample<f32>;
pub type JointState32 = JointState<f32>;
