//! Maximum-likelihood fitting of [`ThetaParams`] by full-batch gradient
//! descent on the cross-entropy loss.
//!
//! The image probability is a maximum over pixels, so the gradient is the
//! subgradient through the single arg-max pixel (lowest pixel index on
//! ties). Probabilities are clamped to `[floor, 1 - floor]` inside the loss
//! only; an item whose probability lies on or beyond a clamp boundary
//! contributes a constant term and no gradient.

use crate::model::{classify, sigmoid, ImageFeatures, Label, ThetaParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss became non-finite at iteration {iteration}; learning rate too large?")]
    NonFiniteLoss { iteration: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// One labelled image, by reference to its precomputed features.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub features: &'a ImageFeatures,
    pub label: Label,
}

impl<'a> TrainItem<'a> {
    pub fn new(features: &'a ImageFeatures, label: Label) -> Self {
        Self { features, label }
    }
}

/// How the step size evolves between iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Constant step of `learning_rate`.
    Fixed,
    /// Step grows by `grow` after an accepted step. A step that would raise
    /// the loss is rejected and the step size is multiplied by `shrink`.
    Adaptive { grow: f64, shrink: f64, max_rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub loss_tolerance: f64,
    pub init: ThetaParams,
    pub prob_floor: f64,
    pub step_rule: StepRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_iterations: 5000,
            loss_tolerance: 1e-9,
            init: ThetaParams::default(),
            prob_floor: 1e-7,
            step_rule: StepRule::Adaptive {
                grow: 1.05,
                shrink: 0.5,
                max_rate: 1e6,
            },
        }
    }
}

impl TrainConfig {
    /// Defaults with the loss tolerance scaled to `n_items`.
    pub fn for_items(n_items: usize) -> Self {
        Self {
            loss_tolerance: 1e-9 * n_items.max(1) as f64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.loss_tolerance > 0.0) {
            return bad("loss_tolerance must be positive");
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return bad("prob_floor must lie in (0, 0.5)");
        }
        if !self.init.is_finite() {
            return bad("init theta must be finite");
        }
        if let StepRule::Adaptive {
            grow,
            shrink,
            max_rate,
        } = self.step_rule
        {
            if !(grow >= 1.0 && shrink > 0.0 && shrink < 1.0 && max_rate >= self.learning_rate) {
                return bad("adaptive step needs grow >= 1, 0 < shrink < 1, max_rate >= learning_rate");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOutcome {
    pub theta: ThetaParams,
    pub final_loss: f64,
    pub iterations: usize,
}

fn item_loss(p: f64, label: Label, floor: f64) -> f64 {
    let p = p.clamp(floor, 1.0 - floor);
    match label {
        Label::Present => -p.ln(),
        Label::Absent => -(-p).ln_1p(),
    }
}

/// Summed cross-entropy over `items`, evaluated in item order.
pub fn cross_entropy_loss(
    items: &[TrainItem<'_>],
    theta: &ThetaParams,
    prob_floor: f64,
) -> Result<f64, TrainError> {
    if items.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    Ok(items
        .iter()
        .map(|it| item_loss(it.features.prob(theta), it.label, prob_floor))
        .sum())
}

/// Loss and its gradient with respect to `(w1, b1, w2, b2)`.
fn loss_and_gradient(items: &[TrainItem<'_>], theta: &ThetaParams, floor: f64) -> (f64, [f64; 4]) {
    let mut loss = 0.0;
    let mut grad = [0.0; 4];
    for it in items {
        let Some((f, p)) = it.features.argmax(theta) else {
            loss += item_loss(0.0, it.label, floor);
            continue;
        };
        loss += item_loss(p, it.label, floor);
        if p <= floor || p >= 1.0 - floor {
            continue;
        }
        let z1 = theta.w1 * f.x1 - theta.b1;
        let z2 = theta.w2 * f.x2 - theta.b2;
        // d log p / d z_k = 1 - s_k
        let (r1, r2) = (sigmoid(-z1), sigmoid(-z2));
        // dL/d log p
        let scale = match it.label {
            Label::Present => -1.0,
            Label::Absent => p / (1.0 - p),
        };
        grad[0] += scale * r1 * f.x1;
        grad[1] -= scale * r1;
        grad[2] += scale * r2 * f.x2;
        grad[3] -= scale * r2;
    }
    (loss, grad)
}

/// Analytic (sub)gradient of [`cross_entropy_loss`].
pub fn loss_gradient(
    items: &[TrainItem<'_>],
    theta: &ThetaParams,
    prob_floor: f64,
) -> Result<[f64; 4], TrainError> {
    if items.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    Ok(loss_and_gradient(items, theta, prob_floor).1)
}

fn step(theta: &ThetaParams, grad: &[f64; 4], rate: f64) -> ThetaParams {
    let mut a = theta.to_array();
    for (v, g) in a.iter_mut().zip(grad) {
        *v -= rate * g;
    }
    ThetaParams::from_array(a)
}

/// Full-batch gradient descent from `cfg.init`.
///
/// Stops once an accepted step changes the loss by less than
/// `cfg.loss_tolerance`, or after `cfg.max_iterations` iterations.
pub fn train_theta(items: &[TrainItem<'_>], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let floor = cfg.prob_floor;
    let mut theta = cfg.init;
    let mut rate = cfg.learning_rate;
    let (mut loss, mut grad) = loss_and_gradient(items, &theta, floor);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss { iteration: 0 });
    }

    for iteration in 1..=cfg.max_iterations {
        if grad.iter().all(|g| *g == 0.0) {
            return Ok(TrainOutcome {
                theta,
                final_loss: loss,
                iterations: iteration,
            });
        }
        let candidate = step(&theta, &grad, rate);
        let (next_loss, next_grad) = loss_and_gradient(items, &candidate, floor);
        if !next_loss.is_finite() || !candidate.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration });
        }

        match cfg.step_rule {
            StepRule::Fixed => {}
            StepRule::Adaptive {
                grow,
                shrink,
                max_rate,
            } => {
                if next_loss > loss {
                    rate *= shrink;
                    continue;
                }
                rate = (rate * grow).min(max_rate);
            }
        }

        let delta = (loss - next_loss).abs();
        theta = candidate;
        loss = next_loss;
        grad = next_grad;
        if delta < cfg.loss_tolerance {
            return Ok(TrainOutcome {
                theta,
                final_loss: loss,
                iterations: iteration,
            });
        }
    }
    Ok(TrainOutcome {
        theta,
        final_loss: loss,
        iterations: cfg.max_iterations,
    })
}

/// Fraction of items whose predicted label matches the item label.
pub fn evaluate_accuracy(
    items: &[TrainItem<'_>],
    theta: &ThetaParams,
    cutoff: f64,
) -> Result<f64, TrainError> {
    if items.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let hits = items
        .iter()
        .filter(|it| classify(it.features.prob(theta), cutoff) == it.label)
        .count();
    Ok(hits as f64 / items.len() as f64)
}
