//! The two-class Gaussian data model `x | y ~ N(y mu, sigma^2 I)` with
//! uniform labels, and the shifted-mean variant where `x | y=+1 ~ N(mu1, .)`
//! and `x | y=-1 ~ N(mu2, .)`.

use std::f64::consts::SQRT_2;
use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::output::fmt17;
use crate::rng::{self, Stream};
use crate::specfun::{erf, phi, Probability};

/// Class label in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_sign(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::Parse(format!("label must be -1 or +1, got {other}"))),
        }
    }

    /// Sign convention for scores: `score >= 0` maps to `+1`.
    pub fn of_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mu: Vec<f64>,
    sigma: f64,
}

impl GaussianModel {
    pub fn new(mu: Vec<f64>, sigma: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if let Some(m) = mu.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::domain(format!(
                "every mean must be positive and finite, got {m}"
            )));
        }
        check_sigma(sigma)?;
        Ok(GaussianModel { mu, sigma })
    }

    /// `d` coordinates all with mean `mu`.
    pub fn isotropic(d: usize, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![mu; d], sigma)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The common mean when every coordinate shares it.
    pub fn equal_mean(&self) -> Option<f64> {
        let first = self.mu[0];
        self.mu.iter().all(|&m| m == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedModel {
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    sigma: f64,
}

impl ShiftedModel {
    pub fn new(mu1: Vec<f64>, mu2: Vec<f64>, sigma: f64) -> Result<Self> {
        if mu1.is_empty() {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if mu1.len() != mu2.len() {
            return Err(Error::DimensionMismatch {
                expected: mu1.len(),
                found: mu2.len(),
            });
        }
        for (a, b) in mu1.iter().zip(&mu2) {
            if !(0.0 < *b && b < a && a.is_finite()) {
                return Err(Error::domain(format!(
                    "need 0 < mu2 < mu1 componentwise, got mu1={a}, mu2={b}"
                )));
            }
        }
        check_sigma(sigma)?;
        Ok(ShiftedModel { mu1, mu2, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    pub fn mu1(&self) -> &[f64] {
        &self.mu1
    }

    pub fn mu2(&self) -> &[f64] {
        &self.mu2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn mean(&self, y: Label) -> &[f64] {
        match y {
            Label::Pos => &self.mu1,
            Label::Neg => &self.mu2,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "sigma must be positive and finite, got {sigma}"
        )))
    }
}

/// A seeded, immutable collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    dim: usize,
    seed: u64,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, seed: u64) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.x.len());
        if let Some(s) = samples.iter().find(|s| s.x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.x.len(),
            });
        }
        Ok(Dataset { samples, dim, seed })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self, y: Label) -> usize {
        self.samples.iter().filter(|s| s.y == y).count()
    }

    /// Writes `y,x_0,...,x_{d-1}` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["y".to_string()];
        header.extend((0..self.dim).map(|j| format!("x_{j}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.y.as_i64().to_string()];
            row.extend(s.x.iter().map(|&v| fmt17(v)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("y") {
            return Err(Error::Parse("first column must be `y`".into()));
        }
        for (j, name) in header.iter().skip(1).enumerate() {
            if name != format!("x_{j}") {
                return Err(Error::Parse(format!("unexpected column `{name}`")));
            }
        }
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let y: i64 = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad label `{}`", &rec[0])))?;
            let x = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad value `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push(LabeledSample {
                x,
                y: Label::from_sign(y)?,
            });
        }
        Dataset::new(samples, seed)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::domain("sample count must be at least 1"))
    } else {
        Ok(())
    }
}

fn draw_label(rng: &mut rng::Rng) -> Label {
    if rng.random::<bool>() {
        Label::Pos
    } else {
        Label::Neg
    }
}

fn draw_x(rng: &mut rng::Rng, mean: impl Iterator<Item = f64>, sigma: f64) -> Vec<f64> {
    mean.map(|m| {
        let z: f64 = rng.sample(StandardNormal);
        m + sigma * z
    })
    .collect()
}

/// One fresh draw from `model`.
pub(crate) fn draw_sample(model: &GaussianModel, rng: &mut rng::Rng) -> LabeledSample {
    let y = draw_label(rng);
    let s = y.as_f64();
    let x = draw_x(rng, model.mu.iter().map(|m| s * m), model.sigma);
    LabeledSample { x, y }
}

/// Draws `n` samples: `y` uniform on `{-1, +1}`, then `x ~ N(y mu, sigma^2 I)`.
pub fn sample(model: &GaussianModel, seed: u64, n: usize) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = rng::stream(seed, Stream::Data);
    let samples = (0..n).map(|_| draw_sample(model, &mut rng)).collect();
    Dataset::new(samples, seed)
}

/// Draws `n` samples from the shifted-mean model with uniform labels.
pub fn sample_shifted(model: &ShiftedModel, seed: u64, n: usize) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = rng::stream(seed, Stream::Data);
    let samples = (0..n)
        .map(|_| {
            let y = draw_label(&mut rng);
            let x = draw_x(&mut rng, model.mean(y).iter().copied(), model.sigma);
            LabeledSample { x, y }
        })
        .collect();
    Dataset::new(samples, seed)
}

/// Like [`sample_shifted`], but labels alternate `+1, -1, ...` so that both
/// classes appear exactly `n / 2` times. `n` must be even.
pub fn sample_shifted_balanced(model: &ShiftedModel, seed: u64, n: usize) -> Result<Dataset> {
    check_n(n)?;
    if !n.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "balanced sample needs an even count, got {n}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Data);
    let samples = (0..n)
        .map(|i| {
            let y = if i % 2 == 0 { Label::Pos } else { Label::Neg };
            let x = draw_x(&mut rng, model.mean(y).iter().copied(), model.sigma);
            LabeledSample { x, y }
        })
        .collect();
    Dataset::new(samples, seed)
}

/// One-dimensional Bayes error `(1 - erf(mu / (sqrt 2 sigma))) / 2`.
pub fn bayes_error_1d(mu: f64, sigma: f64) -> Result<Probability> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("mu must be positive, got {mu}")));
    }
    check_sigma(sigma)?;
    let e = erf(mu / (SQRT_2 * sigma))?;
    Ok(Probability::clamped(0.5 * (1.0 - e)))
}

/// Accuracy `Phi(sqrt(d) mu / sigma)` of the Bayes classifier (and of every
/// classifier with all-positive weights) when all means are equal.
pub fn bayes_accuracy_d(model: &GaussianModel) -> Result<Probability> {
    let mu = model.equal_mean().ok_or_else(|| {
        Error::Unsupported("d-dimensional Bayes accuracy requires equal coordinate means".into())
    })?;
    phi((model.dim() as f64).sqrt() * mu / model.sigma)
}

/// Bayes decision `sign(mu . x)`, ties to `+1`.
pub fn bayes_decision(x: &[f64], mu: &[f64], sigma: f64) -> Result<Label> {
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: x.len(),
        });
    }
    check_sigma(sigma)?;
    let score: f64 = x.iter().zip(mu).map(|(a, b)| a * b).sum();
    Ok(Label::of_score(score))
}
