//! Per-example losses for linear models, returning the value together with
//! the gradient over all model parameters.

use crate::error::{Error, Result};
use crate::scalar::{sign0, Scalar};
use serde::{Deserialize, Serialize};

/// Linear model with `n_out` outputs over `d_in` features.
///
/// Parameters are stored as one flat vector: the `n_out x d_in` weight matrix
/// row by row (one row per output), followed by the `n_out` intercepts.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel<T> {
    d_in: usize,
    n_out: usize,
    params: Vec<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn zeros(d_in: usize, n_out: usize) -> Self {
        Self { d_in, n_out, params: vec![T::zero(); Self::param_count_for(d_in, n_out)] }
    }

    pub fn from_params(d_in: usize, n_out: usize, params: Vec<T>) -> Result<Self> {
        let expected = Self::param_count_for(d_in, n_out);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: params.len() });
        }
        Ok(Self { d_in, n_out, params })
    }

    pub fn param_count_for(d_in: usize, n_out: usize) -> usize {
        (d_in + 1) * n_out
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn weights(&self, output: usize) -> &[T] {
        &self.params[output * self.d_in..(output + 1) * self.d_in]
    }

    pub fn intercept(&self, output: usize) -> T {
        self.params[self.n_out * self.d_in + output]
    }

    /// Index of the intercept of `output` in the flat parameter vector.
    pub fn intercept_index(&self, output: usize) -> usize {
        self.n_out * self.d_in + output
    }

    pub fn predict(&self, features: &[T], output: usize) -> T {
        crate::scalar::dot(self.weights(output), features) + self.intercept(output)
    }

    pub fn logits(&self, features: &[T]) -> Vec<T> {
        (0..self.n_out).map(|k| self.predict(features, k)).collect()
    }

    /// Class with the largest logit (lowest index on ties).
    pub fn predict_class(&self, features: &[T]) -> usize {
        let logits = self.logits(features);
        let mut best = 0;
        for k in 1..logits.len() {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        best
    }

    /// Adds `scale * d(prediction_k)/d(params)` into `grad`.
    fn accumulate_output_grad(&self, grad: &mut [T], features: &[T], output: usize, scale: T) {
        let row = &mut grad[output * self.d_in..(output + 1) * self.d_in];
        for (g, &x) in row.iter_mut().zip(features) {
            *g += scale * x;
        }
        grad[self.n_out * self.d_in + output] += scale;
    }
}

/// Regression target or class index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Label<T> {
    Real(T),
    Class(usize),
}

impl<T: Copy> Label<T> {
    pub fn real(&self) -> Option<T> {
        match *self {
            Label::Real(y) => Some(y),
            Label::Class(_) => None,
        }
    }

    pub fn class(&self) -> Option<usize> {
        match *self {
            Label::Class(k) => Some(k),
            Label::Real(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example<T> {
    pub features: Vec<T>,
    pub label: Label<T>,
}

impl<T: Scalar> Example<T> {
    pub fn regression(features: Vec<T>, y: T) -> Self {
        Self { features, label: Label::Real(y) }
    }

    pub fn classification(features: Vec<T>, class: usize) -> Self {
        Self { features, label: Label::Class(class) }
    }

    fn real_label(&self) -> Result<T> {
        match self.label {
            Label::Real(y) => Ok(y),
            Label::Class(_) => Err(Error::InvalidSample("loss needs a real-valued label".into())),
        }
    }
}

/// Loss value and gradient with respect to the flat model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval<T> {
    pub value: T,
    pub grad: Vec<T>,
}

/// Selects the per-example training loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    Logistic,
    Absolute,
    Hinge,
}

impl LossKind {
    pub fn eval<T: Scalar>(self, model: &LinearModel<T>, ex: &Example<T>) -> Result<LossEval<T>> {
        match self {
            LossKind::Squared => squared_loss(model, ex),
            LossKind::Logistic => multiclass_logistic_loss(model, ex),
            LossKind::Absolute => absolute_loss(model, ex),
            LossKind::Hinge => hinge_loss(model, ex),
        }
    }

    /// Loss value only, skipping the gradient.
    pub fn value<T: Scalar>(self, model: &LinearModel<T>, ex: &Example<T>) -> Result<T> {
        match self {
            LossKind::Logistic => logistic_value(model, ex),
            _ => self.eval(model, ex).map(|e| e.value),
        }
    }
}

fn check_shape<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>, single_output: bool) -> Result<()> {
    if ex.features.len() != model.d_in {
        return Err(Error::DimensionMismatch { expected: model.d_in, found: ex.features.len() });
    }
    if single_output && model.n_out != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: model.n_out });
    }
    Ok(())
}

/// `(prediction - y)^2`.
pub fn squared_loss<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<LossEval<T>> {
    check_shape(model, ex, true)?;
    let r = model.predict(&ex.features, 0) - ex.real_label()?;
    let mut grad = vec![T::zero(); model.param_count()];
    model.accumulate_output_grad(&mut grad, &ex.features, 0, T::lit(2.0) * r);
    Ok(LossEval { value: r * r, grad })
}

/// `|prediction - y|`, with gradient `0` at the kink.
pub fn absolute_loss<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<LossEval<T>> {
    check_shape(model, ex, true)?;
    let r = model.predict(&ex.features, 0) - ex.real_label()?;
    let mut grad = vec![T::zero(); model.param_count()];
    model.accumulate_output_grad(&mut grad, &ex.features, 0, sign0(r));
    Ok(LossEval { value: r.abs(), grad })
}

/// `max(0, 1 - y * prediction)` for `y` in `{-1, +1}`; gradient `0` at margin exactly 1.
pub fn hinge_loss<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<LossEval<T>> {
    check_shape(model, ex, true)?;
    let y = ex.real_label()?;
    if y != T::one() && y != -T::one() {
        return Err(Error::InvalidSample(format!("hinge label must be +1 or -1, got {y}")));
    }
    let margin = y * model.predict(&ex.features, 0);
    let mut grad = vec![T::zero(); model.param_count()];
    let value = (T::one() - margin).max(T::zero());
    if margin < T::one() {
        model.accumulate_output_grad(&mut grad, &ex.features, 0, -y);
    }
    Ok(LossEval { value, grad })
}

fn class_index<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<usize> {
    check_shape(model, ex, false)?;
    if model.n_out < 2 {
        return Err(Error::InvalidParams("logistic loss needs at least two classes".into()));
    }
    match ex.label {
        Label::Class(c) if c < model.n_out => Ok(c),
        Label::Class(c) => Err(Error::InvalidSample(format!("class {c} out of range for {} outputs", model.n_out))),
        Label::Real(_) => Err(Error::InvalidSample("logistic loss needs a class label".into())),
    }
}

/// Stable `log sum exp` and the shifted exponentials.
fn log_softmax_parts<T: Scalar>(logits: &[T]) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &e| a + e);
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

fn logistic_value<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<T> {
    let c = class_index(model, ex)?;
    let logits = model.logits(&ex.features);
    let (lse, _) = log_softmax_parts(&logits);
    Ok((lse - logits[c]).max(T::zero()))
}

/// Multi-class logistic (softmax cross-entropy) loss `-log softmax(logits)[label]`.
pub fn multiclass_logistic_loss<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<LossEval<T>> {
    let c = class_index(model, ex)?;
    let logits = model.logits(&ex.features);
    let (lse, probs) = log_softmax_parts(&logits);
    let mut value = lse - logits[c];
    if value < T::zero() {
        value = T::zero();
    }
    // For a dominant correct logit `lse - logit_c` cancels to zero; use the
    // tail sum directly so tiny losses keep their magnitude.
    if value < T::lit(1e-8) {
        let tail =
            logits.iter().enumerate().filter(|&(k, _)| k != c).fold(T::zero(), |a, (_, &l)| a + (l - logits[c]).exp());
        value = tail.ln_1p();
    }
    let mut grad = vec![T::zero(); model.param_count()];
    for (k, &p) in probs.iter().enumerate() {
        let coeff = if k == c { p - T::one() } else { p };
        model.accumulate_output_grad(&mut grad, &ex.features, k, coeff);
    }
    Ok(LossEval { value, grad })
}

/// `1` when the predicted class differs from the label, else `0`. Evaluation only.
pub fn zero_one_error<T: Scalar>(model: &LinearModel<T>, ex: &Example<T>) -> Result<T> {
    let c = class_index(model, ex)?;
    Ok(if model.predict_class(&ex.features) == c { T::zero() } else { T::one() })
}
