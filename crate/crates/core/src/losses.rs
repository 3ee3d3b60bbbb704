//! Losses for linear hypotheses and the exact l-infinity inner maximisation.
//!
//! Every supported loss is a nonincreasing function of the margin
//! `z = y (theta . x + b)`. Over the box `||delta||_inf <= eps`, the margin at
//! `x + delta` is minimised by `delta_j = -eps * y * sign(theta_j)`, which
//! gives the attacked margin `z* = z - eps ||theta||_1`. The adversarial loss
//! is the loss at `z*`, and its gradient follows by the chain rule with
//! `delta` held at the maximiser.
//!
//! Cross-entropy is the binary logistic loss `log(1 + exp(-z))`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::LabeledSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `-z`
    Linear,
    /// `log(1 + exp(-z))`
    CrossEntropy,
    /// `max(0, margin - z)`; margin 0 or 1.
    Hinge { margin: f64 },
}

impl LossKind {
    pub fn hinge(margin: f64) -> Result<Self> {
        if margin == 0.0 || margin == 1.0 {
            Ok(LossKind::Hinge { margin })
        } else {
            Err(Error::Config(format!(
                "hinge margin must be 0 or 1, got {margin}"
            )))
        }
    }

    /// Loss as a function of the margin.
    pub fn of_margin(self, z: f64) -> f64 {
        match self {
            LossKind::Linear => -z,
            LossKind::CrossEntropy => softplus_neg(z),
            LossKind::Hinge { margin } => (margin - z).max(0.0),
        }
    }

    /// Derivative of [`LossKind::of_margin`] in `z`; the hinge kink gets 0.
    pub fn slope(self, z: f64) -> f64 {
        match self {
            LossKind::Linear => -1.0,
            LossKind::CrossEntropy => -sigmoid(-z),
            LossKind::Hinge { margin } => {
                if margin - z > 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Short name used on the command line and in file names.
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Linear => "linear",
            LossKind::CrossEntropy => "xent",
            LossKind::Hinge { margin: 0.0 } => "hinge0",
            LossKind::Hinge { .. } => "hinge1",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LossKind::Linear),
            "xent" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "hinge0" => LossKind::hinge(0.0),
            "hinge1" | "hinge" => LossKind::hinge(1.0),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// `log(1 + exp(-z))` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z <= -30.0 {
        -z
    } else if z >= 30.0 {
        (-z).exp()
    } else {
        (-z).max(0.0) + (-z.abs()).exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `sign` with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `f(x) = theta . x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHypothesis {
    pub theta: Vec<f64>,
    pub b: f64,
}

impl LinearHypothesis {
    pub fn new(theta: Vec<f64>, b: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::domain("theta must have at least one entry"));
        }
        if theta
            .iter()
            .chain(std::iter::once(&b))
            .any(|v| !v.is_finite())
        {
            return Err(Error::domain("hypothesis parameters must be finite"));
        }
        Ok(LinearHypothesis { theta, b })
    }

    pub fn zeros(d: usize) -> Self {
        LinearHypothesis {
            theta: vec![0.0; d],
            b: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.theta.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                found: x.len(),
            })
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>() + self.b
    }

    pub fn l1_norm(&self) -> f64 {
        self.theta.iter().map(|t| t.abs()).sum()
    }

    pub fn mean_theta(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }
}

/// l-infinity attack radius.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AttackBudget(f64);

impl AttackBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon >= 0.0 && epsilon.is_finite() {
            Ok(AttackBudget(epsilon))
        } else {
            Err(Error::domain(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )))
        }
    }

    pub const ZERO: AttackBudget = AttackBudget(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn loss_value(kind: LossKind, h: &LinearHypothesis, s: &LabeledSample) -> Result<f64> {
    let z = s.y.as_f64() * h.score(&s.x)?;
    Ok(kind.of_margin(z))
}

/// The maximiser `delta_j = -eps * y * sign(theta_j)` of the loss over the
/// l-infinity ball, for every supported loss.
pub fn worst_case_perturbation(
    h: &LinearHypothesis,
    s: &LabeledSample,
    eps: AttackBudget,
) -> Result<Vec<f64>> {
    h.check_dim(&s.x)?;
    let y = s.y.as_f64();
    Ok(h.theta.iter().map(|&t| -eps.0 * y * sign0(t)).collect())
}

/// Margin at the attacked point, `y (theta . x + b) - eps ||theta||_1`.
pub fn attacked_margin(h: &LinearHypothesis, s: &LabeledSample, eps: AttackBudget) -> Result<f64> {
    Ok(s.y.as_f64() * h.score(&s.x)? - eps.0 * h.l1_norm())
}

/// `max_{||delta||_inf <= eps} loss(f(x + delta), y)`.
pub fn adversarial_loss(
    kind: LossKind,
    h: &LinearHypothesis,
    s: &LabeledSample,
    eps: AttackBudget,
) -> Result<f64> {
    Ok(kind.of_margin(attacked_margin(h, s, eps)?))
}

/// Gradient of [`adversarial_loss`] in `(theta, b)`.
///
/// For the linear loss this is `grad_theta_j = -y x_j + eps sign(theta_j)`
/// and `grad_b = -y`.
pub fn adversarial_gradient(
    kind: LossKind,
    h: &LinearHypothesis,
    s: &LabeledSample,
    eps: AttackBudget,
) -> Result<(Vec<f64>, f64)> {
    h.check_dim(&s.x)?;
    let mut g = vec![0.0; h.dim()];
    let gb = adversarial_gradient_into(kind, h, &s.x, s.y.as_f64(), eps, &mut g);
    Ok((g, gb))
}

/// Allocation-free core of [`adversarial_gradient`]; writes `grad_theta`
/// into `out` and returns `grad_b`. Dimensions are not checked.
pub(crate) fn adversarial_gradient_into(
    kind: LossKind,
    h: &LinearHypothesis,
    x: &[f64],
    y: f64,
    eps: AttackBudget,
    out: &mut [f64],
) -> f64 {
    let z = y * h.score_unchecked(x) - eps.0 * h.l1_norm();
    let slope = kind.slope(z);
    for ((g, &t), &xj) in out.iter_mut().zip(&h.theta).zip(x) {
        // d z* / d theta_j = y x_j - eps sign(theta_j)
        *g = slope * (y * xj - eps.0 * sign0(t));
    }
    slope * y
}
