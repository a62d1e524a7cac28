//! Minibatch feedback averages to the full-data gradient of the empirical
//! joint risk.

use mlocrisk_core::data::{synth_regression, InputLaw, NoiseLaw, RegressionLaw};
use mlocrisk_core::moreau::{EmpiricalJointObjective, ObjectiveOracle};
use mlocrisk_core::optimizer::{make_minibatcher, BatchMode, DatasetFeedback, FeedbackSource};
use mlocrisk_core::{JointState, LossKind, Objective, RiskParams, Sigma};

#[test]
fn iid_minibatch_feedback_is_unbiased() {
    let law = RegressionLaw { w0: 0.5, w1: -1.0, noise: NoiseLaw::Normal(0.3), input: InputLaw::UnitUniform };
    let data = synth_regression(&law, 50, 4).unwrap().examples;
    let params = RiskParams::new(Sigma::Finite(1.0), 2.0).unwrap();
    let state = JointState::new(vec![0.2, 0.1], 0.3);
    let full = EmpiricalJointObjective::new(&data, 1, 1, LossKind::Squared, params).unwrap().gradient(&state.to_vec());

    let draws = 100_000;
    let batcher = make_minibatcher(data.len(), 4, BatchMode::IidWithReplacement, 8).unwrap();
    let mut source = DatasetFeedback::new(&data, 1, 1, LossKind::Squared, Objective::Risk(params), batcher);
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for _ in 0..draws {
        let g = source.sample(&state).unwrap().to_vec();
        for i in 0..3 {
            sum[i] += g[i];
            sum_sq[i] += g[i] * g[i];
        }
    }
    for i in 0..3 {
        let mean = sum[i] / draws as f64;
        let sd = (sum_sq[i] / draws as f64 - mean * mean).sqrt();
        let se = sd / (draws as f64).sqrt();
        assert!((mean - full[i]).abs() < 5.0 * se + 1e-12, "coordinate {i}: {mean} vs {}", full[i]);
    }
}
