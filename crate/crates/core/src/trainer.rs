//! Stochastic adversarial training of a linear classifier.
//!
//! Three drivers share one update rule, `theta <- theta - eta * grad`, where
//! `grad` is the gradient of the exact adversarial loss:
//!
//! - [`train_streaming`] draws a fresh sample per step and tracks the sign of
//!   every coordinate after each update.
//! - [`train_epochs`] makes repeated single-sample passes over a fixed
//!   training set and records mean `theta` and clean test accuracy per epoch.
//! - [`train_intercept`] takes full-batch steps on label-balanced data from
//!   the shifted-mean model while learning a bias.

use std::io::Write;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::SignCensus;
use crate::error::{Error, Result};
use crate::losses::{adversarial_gradient_into, sign0, AttackBudget, LinearHypothesis, LossKind};
use crate::model::{self, Dataset, GaussianModel, Label, ShiftedModel};
use crate::output::fmt17;
use crate::rng::{self, Stream};
use crate::specfun::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// One fresh sample per step.
    Streaming { iterations: usize },
    /// `epochs` passes over `n_train` samples; clean accuracy on `n_test`.
    /// In [`train_intercept`] every "epoch" is one full-batch step.
    Epochs {
        n_train: usize,
        n_test: usize,
        epochs: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub epsilon: AttackBudget,
    pub loss: LossKind,
    pub mode: TrainMode,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialisation of `theta`.
    pub init_sigma: f64,
    pub learn_bias: bool,
    /// Reshuffle the training set every epoch.
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn streaming(
        eta: f64,
        epsilon: f64,
        loss: LossKind,
        iterations: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = TrainConfig {
            eta,
            epsilon: AttackBudget::new(epsilon)?,
            loss,
            mode: TrainMode::Streaming { iterations },
            seed,
            init_sigma: 1.0,
            learn_bias: false,
            shuffle: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn epochs(
        eta: f64,
        epsilon: f64,
        loss: LossKind,
        n_train: usize,
        n_test: usize,
        epochs: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = TrainConfig {
            eta,
            epsilon: AttackBudget::new(epsilon)?,
            loss,
            mode: TrainMode::Epochs {
                n_train,
                n_test,
                epochs,
            },
            seed,
            init_sigma: 1.0,
            learn_bias: false,
            shuffle: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "init_sigma must be positive, got {}",
                self.init_sigma
            )));
        }
        match self.mode {
            TrainMode::Streaming { iterations: 0 } => {
                Err(Error::Config("iterations must be at least 1".into()))
            }
            TrainMode::Epochs {
                n_train,
                n_test,
                epochs,
            } if n_train == 0 || n_test == 0 || epochs == 0 => Err(Error::Config(
                "n_train, n_test and epochs must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// What a run records.
///
/// Streaming runs fill `sign_counts` (one census per coordinate, one entry
/// per update) and `theta_trace` (mean of `theta` before the first update
/// and after each one, so `iterations + 1` values). Epoch and intercept runs
/// fill one entry of `mean_theta` and `test_accuracy` per epoch or step, and
/// `bias_history` when the bias is learned.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub sign_counts: Vec<SignCensus>,
    pub theta_trace: Vec<f64>,
    pub mean_theta: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub bias_history: Vec<f64>,
    pub initial: LinearHypothesis,
    pub final_hypothesis: LinearHypothesis,
}

impl RunStats {
    fn new(initial: LinearHypothesis) -> Self {
        RunStats {
            sign_counts: Vec::new(),
            theta_trace: Vec::new(),
            mean_theta: Vec::new(),
            test_accuracy: Vec::new(),
            bias_history: Vec::new(),
            final_hypothesis: initial.clone(),
            initial,
        }
    }

    /// Streaming trace as `step,theta,sign`. Row 0 is the initial value, so
    /// there is one row more than there are iterations.
    pub fn write_streaming_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "theta", "sign"])?;
        for (i, &t) in self.theta_trace.iter().enumerate() {
            w.write_record([i.to_string(), fmt17(t), (sign0(t) as i64).to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<streaming csv>", e))?;
        Ok(())
    }

    /// Per-epoch record as `epoch,mean_theta,test_accuracy[,bias]`, epochs
    /// numbered from 1.
    pub fn write_epoch_csv<W: Write>(&self, out: W) -> Result<()> {
        let with_bias = !self.bias_history.is_empty();
        let mut w = csv::Writer::from_writer(out);
        if with_bias {
            w.write_record(["epoch", "mean_theta", "test_accuracy", "bias"])?;
        } else {
            w.write_record(["epoch", "mean_theta", "test_accuracy"])?;
        }
        for (i, (m, a)) in self.mean_theta.iter().zip(&self.test_accuracy).enumerate() {
            let mut row = vec![(i + 1).to_string(), fmt17(*m), fmt17(*a)];
            if with_bias {
                row.push(fmt17(self.bias_history[i]));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<epoch csv>", e))?;
        Ok(())
    }
}

/// `theta_j ~ N(0, init_sigma^2)` i.i.d.; `b ~ N(0, 1)` when the bias is
/// learned, else `b = 0`.
pub fn init_hypothesis(d: usize, cfg: &TrainConfig) -> Result<LinearHypothesis> {
    if d == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    let mut r = rng::stream(cfg.seed, Stream::Init);
    let theta = (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            cfg.init_sigma * z
        })
        .collect();
    let b = if cfg.learn_bias {
        StandardNormal.sample(&mut r)
    } else {
        0.0
    };
    LinearHypothesis::new(theta, b)
}

/// Fraction of samples with `sign(theta . x + b) = y`, ties counted as `+1`.
pub fn evaluate_accuracy(h: &LinearHypothesis, data: &Dataset) -> Result<Probability> {
    if data.is_empty() {
        return Err(Error::domain(
            "cannot evaluate accuracy on an empty dataset",
        ));
    }
    if data.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: data.dim(),
        });
    }
    let hits = data
        .samples()
        .iter()
        .filter(|s| Label::of_score(h.score_unchecked(&s.x)) == s.y)
        .count();
    Ok(Probability::clamped(hits as f64 / data.len() as f64))
}

/// One stochastic step in place. `grad` is scratch space of length `d`.
fn sgd_step(h: &mut LinearHypothesis, cfg: &TrainConfig, x: &[f64], y: f64, grad: &mut [f64]) {
    #[cfg(debug_assertions)]
    let expected: Option<Vec<f64>> = (cfg.loss == LossKind::Linear).then(|| {
        let eps = cfg.epsilon.value();
        h.theta
            .iter()
            .zip(x)
            .map(|(&t, &xj)| t + cfg.eta * (y * xj - eps * sign0(t)))
            .collect()
    });

    let gb = adversarial_gradient_into(cfg.loss, h, x, y, cfg.epsilon, grad);
    for (t, g) in h.theta.iter_mut().zip(grad.iter()) {
        *t -= cfg.eta * g;
    }
    if cfg.learn_bias {
        h.b -= cfg.eta * gb;
    }

    #[cfg(debug_assertions)]
    if let Some(expected) = expected {
        debug_assert_eq!(h.theta, expected, "linear-loss update identity");
    }
}

pub fn train_streaming(model: &GaussianModel, cfg: &TrainConfig) -> Result<RunStats> {
    let h0 = init_hypothesis(model.dim(), cfg)?;
    train_streaming_from(model, cfg, h0)
}

/// [`train_streaming`] from a given starting hypothesis.
pub fn train_streaming_from(
    model: &GaussianModel,
    cfg: &TrainConfig,
    h0: LinearHypothesis,
) -> Result<RunStats> {
    cfg.validate()?;
    let TrainMode::Streaming { iterations } = cfg.mode else {
        return Err(Error::Config("train_streaming needs streaming mode".into()));
    };
    if h0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: h0.dim(),
        });
    }
    let d = model.dim();
    let mut stats = RunStats::new(h0.clone());
    stats.sign_counts = vec![SignCensus::default(); d];
    stats.theta_trace.reserve(iterations + 1);
    stats.theta_trace.push(h0.mean_theta());

    let mut h = h0;
    let mut grad = vec![0.0; d];
    let mut r = rng::stream(cfg.seed, Stream::Train);
    for _ in 0..iterations {
        let s = model::draw_sample(model, &mut r);
        sgd_step(&mut h, cfg, &s.x, s.y.as_f64(), &mut grad);
        for (c, &t) in stats.sign_counts.iter_mut().zip(&h.theta) {
            c.record(t);
        }
        stats.theta_trace.push(h.mean_theta());
        if cfg.learn_bias {
            stats.bias_history.push(h.b);
        }
    }
    stats.final_hypothesis = h;
    Ok(stats)
}

pub fn train_epochs(model: &GaussianModel, cfg: &TrainConfig) -> Result<RunStats> {
    cfg.validate()?;
    let TrainMode::Epochs {
        n_train,
        n_test,
        epochs,
    } = cfg.mode
    else {
        return Err(Error::Config("train_epochs needs epoch mode".into()));
    };
    let train = model::sample(model, rng::sub_seed(cfg.seed, Stream::Train), n_train)?;
    let test = model::sample(model, rng::sub_seed(cfg.seed, Stream::Test), n_test)?;
    let h0 = init_hypothesis(model.dim(), cfg)?;

    let mut stats = RunStats::new(h0.clone());
    let mut h = h0;
    let mut grad = vec![0.0; model.dim()];
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 0..epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng::epoch_stream(cfg.seed, epoch));
        }
        for &i in &order {
            let s = &train.samples()[i];
            sgd_step(&mut h, cfg, &s.x, s.y.as_f64(), &mut grad);
        }
        stats.mean_theta.push(h.mean_theta());
        stats
            .test_accuracy
            .push(evaluate_accuracy(&h, &test)?.value());
        if cfg.learn_bias {
            stats.bias_history.push(h.b);
        }
    }
    stats.final_hypothesis = h;
    Ok(stats)
}

/// Full-batch training with a learned bias on label-balanced data from the
/// shifted-mean model. Only the linear loss and the margin-0 hinge are
/// accepted. Each "epoch" of the config is one full-batch step.
pub fn train_intercept(model: &ShiftedModel, cfg: &TrainConfig) -> Result<RunStats> {
    cfg.validate()?;
    if !cfg.learn_bias {
        return Err(Error::Config(
            "intercept training requires learn_bias".into(),
        ));
    }
    let supported = match cfg.loss {
        LossKind::Linear => true,
        LossKind::Hinge { margin } => margin == 0.0,
        LossKind::CrossEntropy => false,
    };
    if !supported {
        return Err(Error::Config(format!(
            "intercept training supports linear and hinge0, got {}",
            cfg.loss
        )));
    }
    let TrainMode::Epochs {
        n_train,
        n_test,
        epochs: steps,
    } = cfg.mode
    else {
        return Err(Error::Config("train_intercept needs epoch mode".into()));
    };
    let train =
        model::sample_shifted_balanced(model, rng::sub_seed(cfg.seed, Stream::Train), n_train)?;
    let test = model::sample_shifted(model, rng::sub_seed(cfg.seed, Stream::Test), n_test)?;
    let d = model.dim();
    let h0 = init_hypothesis(d, cfg)?;

    let mut stats = RunStats::new(h0.clone());
    let mut h = h0;
    let mut grad = vec![0.0; d];
    let mut sum_theta = vec![0.0; d];
    let n = train.len() as f64;
    for _ in 0..steps {
        sum_theta.iter_mut().for_each(|v| *v = 0.0);
        let mut sum_b = 0.0;
        for s in train.samples() {
            sum_b +=
                adversarial_gradient_into(cfg.loss, &h, &s.x, s.y.as_f64(), cfg.epsilon, &mut grad);
            for (acc, g) in sum_theta.iter_mut().zip(&grad) {
                *acc += g;
            }
        }
        for (t, g) in h.theta.iter_mut().zip(&sum_theta) {
            *t -= cfg.eta * (g / n);
        }
        h.b -= cfg.eta * (sum_b / n);
        stats.mean_theta.push(h.mean_theta());
        stats
            .test_accuracy
            .push(evaluate_accuracy(&h, &test)?.value());
        stats.bias_history.push(h.b);
    }
    stats.final_hypothesis = h;
    Ok(stats)
}
