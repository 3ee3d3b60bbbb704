//! Experiment runners behind the `advlin` binary.
//!
//! Each runner takes its parameters plus a [`RunContext`], writes CSV and SVG
//! files into the output directory, and returns an in-memory report. Sweep
//! points run on a bounded rayon pool and results are collected in input
//! order, so the files do not depend on `jobs`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{
    self, check_attraction, check_consecutive_pos, check_next_is_pos, detect_cycle, parse_rational,
    s_choice, sign_census, simulate, Attraction, Cycle, Rational, RecurrenceParams, SignCensus,
    Verdict,
};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::model::{self, bayes_accuracy_d, bayes_error_1d, GaussianModel, ShiftedModel};
use crate::output::{content_hash, csv_bytes, fmt17, write_atomic};
use crate::rng::{self, Stream};
use crate::svg::{LinePlot, Series};
use crate::trainer::{self, RunStats, TrainConfig, TrainMode};

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub manifest: bool,
}

impl RunContext {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        RunContext {
            out_dir: out_dir.into(),
            seed,
            jobs: 1,
            manifest: false,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
    }
}

/// Collects output files, writes them atomically and optionally a manifest.
struct Emitter<'a> {
    ctx: &'a RunContext,
    files: Vec<(String, String)>,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new(ctx: &'a RunContext) -> Self {
        Emitter {
            ctx,
            files: Vec::new(),
            written: Vec::new(),
        }
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.ctx.out_dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push((name.to_string(), content_hash(bytes)));
        self.written.push(path);
        Ok(())
    }

    fn finish(mut self, kind: &str, params: Value) -> Result<Vec<PathBuf>> {
        if self.ctx.manifest {
            let files: serde_json::Map<String, Value> = self
                .files
                .iter()
                .map(|(n, h)| (n.clone(), Value::String(h.clone())))
                .collect();
            let manifest = json!({
                "kind": kind,
                "seed": self.ctx.seed,
                "params": params,
                "files": files,
                "version": env!("CARGO_PKG_VERSION"),
            });
            let mut bytes = serde_json::to_vec_pretty(&manifest)?;
            bytes.push(b'\n');
            let path = self.ctx.out_dir.join("manifest.json");
            write_atomic(&path, &bytes)?;
            self.written.push(path);
        }
        Ok(self.written)
    }
}

/// Files written and whether every verdict passed.
#[derive(Debug, Clone)]
pub struct Outcome<R> {
    pub report: R,
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

// ---------------------------------------------------------------- bayes

#[derive(Debug, Clone, Serialize)]
pub struct BayesParams {
    pub mu: f64,
    pub sigma: f64,
    pub d_max: usize,
}

impl Default for BayesParams {
    fn default() -> Self {
        BayesParams {
            mu: 1.0,
            sigma: 1.0,
            d_max: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BayesReport {
    pub bayes_error_1d: f64,
    /// `(d, accuracy)` for `d = 1..=d_max`.
    pub accuracy: Vec<(usize, f64)>,
}

pub fn run_bayes(p: &BayesParams, ctx: &RunContext) -> Result<Outcome<BayesReport>> {
    if p.d_max == 0 {
        return Err(Error::Config("d must be at least 1".into()));
    }
    let err = bayes_error_1d(p.mu, p.sigma)?.value();
    let accuracy = (1..=p.d_max)
        .map(|d| {
            let m = GaussianModel::isotropic(d, p.mu, p.sigma)?;
            Ok((d, bayes_accuracy_d(&m)?.value()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut em = Emitter::new(ctx);
    em.emit(
        "bayes.csv",
        &csv_bytes(
            &["d", "bayes_accuracy"],
            accuracy.iter().map(|(d, a)| vec![d.to_string(), fmt17(*a)]),
        )?,
    )?;
    em.emit(
        "bayes_error_1d.csv",
        &csv_bytes(
            &["mu", "sigma", "bayes_error", "bayes_accuracy"],
            [vec![
                fmt17(p.mu),
                fmt17(p.sigma),
                fmt17(err),
                fmt17(1.0 - err),
            ]],
        )?,
    )?;
    let mut plot = LinePlot::new("Bayes accuracy vs dimension", "d", "accuracy");
    plot.push(Series::line(
        format!("mu={}, sigma={}", p.mu, p.sigma),
        accuracy.iter().map(|&(d, a)| (d as f64, a)).collect(),
    ));
    em.emit("bayes.svg", plot.render().as_bytes())?;
    let files = em.finish("bayes", serde_json::to_value(p)?)?;
    Ok(Outcome {
        report: BayesReport {
            bayes_error_1d: err,
            accuracy,
        },
        files,
        passed: true,
    })
}

// ------------------------------------------------------------- dynamics

#[derive(Debug, Clone)]
pub struct DynamicsParams {
    pub eta: Rational,
    pub mu: Rational,
    pub epsilon: Rational,
    pub theta0: Rational,
    pub horizon: usize,
    /// Upper ratio `t` with `eps < t mu`; defaults to `floor(eps / mu) + 1`.
    pub t_bound: Option<Rational>,
    pub cycle_horizon: usize,
    /// Sweep the built-in parameter grid instead of a single triple.
    pub grid: bool,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            eta: dynamics::rational(1, 2),
            mu: dynamics::rational(1, 1),
            epsilon: dynamics::rational(3, 2),
            theta0: dynamics::rational(1, 1_000_000),
            horizon: 100_000,
            t_bound: None,
            cycle_horizon: dynamics::DEFAULT_CYCLE_HORIZON,
            grid: false,
        }
    }
}

impl DynamicsParams {
    pub fn from_strings(eta: &str, mu: &str, epsilon: &str) -> Result<Self> {
        Ok(DynamicsParams {
            eta: parse_rational(eta)?,
            mu: parse_rational(mu)?,
            epsilon: parse_rational(epsilon)?,
            ..Default::default()
        })
    }

    fn to_json(&self) -> Value {
        json!({
            "eta": self.eta.to_string(),
            "mu": self.mu.to_string(),
            "epsilon": self.epsilon.to_string(),
            "theta0": self.theta0.to_string(),
            "horizon": self.horizon,
            "t_bound": self.t_bound.as_ref().map(|t| t.to_string()),
            "cycle_horizon": self.cycle_horizon,
            "grid": self.grid,
        })
    }
}

/// Smallest integer `t` with `eps < t mu`.
pub fn default_t_bound(p: &RecurrenceParams) -> Rational {
    (p.epsilon() / p.mu()).floor() + Rational::one()
}

/// Verdicts for one `(eta, mu, eps)` triple.
#[derive(Debug, Clone)]
pub struct DynamicsCheck {
    pub params: RecurrenceParams,
    pub t_bound: Rational,
    pub s: Option<u64>,
    pub attraction: Attraction,
    pub next_is_pos: Verdict,
    pub consecutive_pos: Verdict,
    /// Census over the whole trajectory.
    pub census: SignCensus,
    /// Census after discarding the first 100 steps.
    pub late_census: SignCensus,
    /// Both signs occur among `theta^2 .. theta^H`.
    pub oscillates: bool,
}

impl DynamicsCheck {
    pub fn passed(&self) -> bool {
        !matches!(self.attraction, Attraction::Counterexample { .. })
            && !self.next_is_pos.is_failure()
            && !self.consecutive_pos.is_failure()
            && (!self.params.adversary_dominates() || self.oscillates)
    }

    /// Positive steps outnumber negative ones late in the run.
    pub fn census_majority(&self) -> bool {
        self.late_census.positive > self.late_census.negative
    }
}

pub fn check_triple(
    params: RecurrenceParams,
    theta0: &Rational,
    horizon: usize,
    t_bound: Option<Rational>,
) -> Result<(DynamicsCheck, dynamics::Trajectory)> {
    let t = simulate(theta0.clone(), &params, horizon)?;
    let t_bound = t_bound.unwrap_or_else(|| default_t_bound(&params));
    let s = s_choice(&t_bound).ok();
    let attraction = check_attraction(&params, theta0, horizon);
    let next_is_pos = check_next_is_pos(&t, &params);
    let consecutive_pos = check_consecutive_pos(&params, &t_bound, &t);
    let tail = t.census_from(2);
    let oscillates = tail.positive > 0 && tail.negative > 0;
    let check = DynamicsCheck {
        census: t.census_from(0),
        late_census: t.census_from(100),
        params,
        t_bound,
        s,
        attraction,
        next_is_pos,
        consecutive_pos,
        oscillates,
    };
    Ok((check, t))
}

/// `eta in {1/1000, 1/100, 1/10, 1/2}`, `mu in {1/2, 1, 3/2, 2}`,
/// `eps / mu in {11/10, 3/2, 2, 3, 5, 7, 10}`: 112 triples.
pub fn default_grid() -> Vec<RecurrenceParams> {
    use dynamics::rational as q;
    let etas = [q(1, 1000), q(1, 100), q(1, 10), q(1, 2)];
    let mus = [q(1, 2), q(1, 1), q(3, 2), q(2, 1)];
    let ratios = [
        q(11, 10),
        q(3, 2),
        q(2, 1),
        q(3, 1),
        q(5, 1),
        q(7, 1),
        q(10, 1),
    ];
    let mut out = Vec::new();
    for eta in &etas {
        for mu in &mus {
            for r in &ratios {
                out.push(
                    RecurrenceParams::new(eta.clone(), mu.clone(), mu * r)
                        .expect("grid values are valid"),
                );
            }
        }
    }
    out
}

fn attraction_label(a: &Attraction) -> String {
    match a {
        Attraction::FirstNegative(n) => format!("first-negative={n}"),
        Attraction::NotApplicable => "not-applicable".into(),
        Attraction::Counterexample { horizon } => {
            format!("counterexample (no negative within {horizon} steps)")
        }
    }
}

fn census_label(c: &SignCensus) -> String {
    format!("pos={},neg={},zero={}", c.positive, c.negative, c.zero)
}

#[derive(Debug, Clone)]
pub struct DynamicsReport {
    pub checks: Vec<DynamicsCheck>,
    /// Only in single-triple mode.
    pub cycle: Option<Cycle>,
    pub cycle_census: Option<SignCensus>,
}

pub fn run_dynamics(p: &DynamicsParams, ctx: &RunContext) -> Result<Outcome<DynamicsReport>> {
    if p.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut em = Emitter::new(ctx);
    if p.grid {
        let grid = default_grid();
        let pool = ctx.pool()?;
        let checks = pool.install(|| {
            grid.into_par_iter()
                .map(|params| check_triple(params, &p.theta0, p.horizon, None).map(|(c, _)| c))
                .collect::<Result<Vec<_>>>()
        })?;
        let rows = checks.iter().map(|c| {
            vec![
                c.params.eta().to_string(),
                c.params.mu().to_string(),
                c.params.epsilon().to_string(),
                c.t_bound.to_string(),
                c.s.map_or(String::new(), |s| s.to_string()),
                attraction_label(&c.attraction),
                c.next_is_pos.label(),
                c.consecutive_pos.label(),
                c.oscillates.to_string(),
                c.census.positive.to_string(),
                c.census.negative.to_string(),
                c.census.zero.to_string(),
                c.census_majority().to_string(),
            ]
        });
        em.emit(
            "dynamics_grid.csv",
            &csv_bytes(
                &[
                    "eta",
                    "mu",
                    "epsilon",
                    "t_bound",
                    "s",
                    "attraction",
                    "next_is_pos",
                    "consecutive_pos",
                    "oscillates",
                    "pos",
                    "neg",
                    "zero",
                    "late_census_majority",
                ],
                rows,
            )?,
        )?;
        let passed = checks.iter().all(DynamicsCheck::passed);
        let files = em.finish("dynamics", p.to_json())?;
        return Ok(Outcome {
            report: DynamicsReport {
                checks,
                cycle: None,
                cycle_census: None,
            },
            files,
            passed,
        });
    }

    let params = RecurrenceParams::new(p.eta.clone(), p.mu.clone(), p.epsilon.clone())?;
    let (check, traj) = check_triple(params.clone(), &p.theta0, p.horizon, p.t_bound.clone())?;
    let cycle = detect_cycle(&p.theta0, &params, p.cycle_horizon);
    let cycle_census = cycle.map(|c| sign_census(&traj_or_replay(&traj, &p.theta0, &params, c)));

    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    em.emit("trajectory.csv", &buf)?;

    let mut report = String::new();
    let _ = writeln!(report, "eta={}", params.eta());
    let _ = writeln!(report, "mu={}", params.mu());
    let _ = writeln!(report, "epsilon={}", params.epsilon());
    let _ = writeln!(report, "theta0={}", p.theta0);
    let _ = writeln!(report, "horizon={}", p.horizon);
    match cycle {
        Some(c) => {
            let _ = writeln!(
                report,
                "cycle=period={},preperiod={}",
                c.period, c.preperiod
            );
        }
        None => {
            let _ = writeln!(report, "cycle=none within {} steps", p.cycle_horizon);
        }
    }
    if let Some(c) = &cycle_census {
        let _ = writeln!(report, "cycle_census={}", census_label(c));
    }
    let _ = writeln!(report, "trajectory_census={}", census_label(&check.census));
    let _ = writeln!(report, "attraction={}", attraction_label(&check.attraction));
    let _ = writeln!(report, "next_is_pos={}", check.next_is_pos.label());
    let _ = writeln!(
        report,
        "consecutive_pos={} (t={}, s={})",
        check.consecutive_pos.label(),
        check.t_bound,
        check.s.map_or("-".to_string(), |s| s.to_string())
    );
    let _ = writeln!(report, "oscillates={}", check.oscillates);
    em.emit("dynamics_report.txt", report.as_bytes())?;

    let mut plot = LinePlot::new("Expected dynamics", "step", "theta");
    let shown = traj.len().min(2_000);
    plot.push(Series::line(
        "theta",
        (0..shown)
            .map(|i| (i as f64, dynamics::to_f64(&traj.value(i))))
            .collect(),
    ));
    em.emit("trajectory.svg", plot.render().as_bytes())?;

    let passed = check.passed();
    let files = em.finish("dynamics", p.to_json())?;
    Ok(Outcome {
        report: DynamicsReport {
            checks: vec![check],
            cycle,
            cycle_census,
        },
        files,
        passed,
    })
}

/// One period of the cycle, taken from the trajectory when it is long enough.
fn traj_or_replay(
    traj: &dynamics::Trajectory,
    theta0: &Rational,
    p: &RecurrenceParams,
    c: Cycle,
) -> Vec<Rational> {
    let (start, end) = (c.preperiod, c.preperiod + c.period);
    if end <= traj.len() {
        return (start..end).map(|i| traj.value(i)).collect();
    }
    let t = simulate(theta0.clone(), p, end).expect("end >= 1");
    (start..end).map(|i| t.value(i)).collect()
}

// ---------------------------------------------------------- sign counts

/// `start:stop:step`, inclusive of `stop` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl EpsGrid {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("epsilon grid must be `start:stop:step`, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let g = EpsGrid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        if g.step.is_nan()
            || g.step <= 0.0
            || g.stop < g.start
            || !g.start.is_finite()
            || !g.stop.is_finite()
        {
            return Err(bad());
        }
        Ok(g)
    }

    pub fn single(eps: f64) -> Self {
        EpsGrid {
            start: eps,
            stop: eps,
            step: 1.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SignCountParams {
    pub loss: LossKind,
    pub eps_grid: EpsGrid,
    pub iterations: usize,
    pub eta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub d: usize,
    pub n_test: usize,
}

impl Serialize for LossKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl Default for SignCountParams {
    fn default() -> Self {
        SignCountParams {
            loss: LossKind::Linear,
            eps_grid: EpsGrid {
                start: 0.0,
                stop: 20.0,
                step: 0.5,
            },
            iterations: 100_000,
            eta: 0.001,
            mu: 1.0,
            sigma: 1.0,
            d: 1,
            n_test: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignCountRow {
    pub epsilon: f64,
    pub pos_count: usize,
    pub neg_count: usize,
    pub final_test_accuracy: f64,
}

pub const MAX_SIGN_COUNT_EPS: f64 = 20.0;

/// One streaming run per epsilon; returns rows in grid order.
pub fn sign_count_rows(p: &SignCountParams, seed: u64, jobs: usize) -> Result<Vec<SignCountRow>> {
    if !matches!(p.loss, LossKind::Linear | LossKind::CrossEntropy) {
        return Err(Error::Config(format!(
            "sign counts support linear and xent, got {}",
            p.loss
        )));
    }
    let eps = p.eps_grid.values();
    if let Some(e) = eps
        .iter()
        .find(|e| !(0.0..=MAX_SIGN_COUNT_EPS + 1e-9).contains(*e))
    {
        return Err(Error::Config(format!(
            "epsilon {e} outside [0, {MAX_SIGN_COUNT_EPS}]"
        )));
    }
    let model = GaussianModel::isotropic(p.d, p.mu, p.sigma)?;
    let test = model::sample(&model, rng::sub_seed(seed, Stream::Test), p.n_test)?;
    let pool = RunContext {
        out_dir: PathBuf::new(),
        seed,
        jobs,
        manifest: false,
    }
    .pool()?;
    pool.install(|| {
        eps.par_iter()
            .map(|&e| {
                let cfg = TrainConfig::streaming(p.eta, e, p.loss, p.iterations, seed)?;
                let stats = trainer::train_streaming(&model, &cfg)?;
                let (pos, neg) = stats
                    .sign_counts
                    .iter()
                    .fold((0, 0), |(a, b), c| (a + c.positive, b + c.negative));
                Ok(SignCountRow {
                    epsilon: e,
                    pos_count: pos,
                    neg_count: neg,
                    final_test_accuracy: trainer::evaluate_accuracy(
                        &stats.final_hypothesis,
                        &test,
                    )?
                    .value(),
                })
            })
            .collect()
    })
}

pub fn run_sign_counts(
    p: &SignCountParams,
    ctx: &RunContext,
) -> Result<Outcome<Vec<SignCountRow>>> {
    let rows = sign_count_rows(p, ctx.seed, ctx.jobs)?;
    let mut em = Emitter::new(ctx);
    em.emit(
        "sign_counts.csv",
        &csv_bytes(
            &["epsilon", "pos_count", "neg_count", "final_test_accuracy"],
            rows.iter().map(|r| {
                vec![
                    fmt17(r.epsilon),
                    r.pos_count.to_string(),
                    r.neg_count.to_string(),
                    fmt17(r.final_test_accuracy),
                ]
            }),
        )?,
    )?;
    let mut plot = LinePlot::new(
        &format!("Sign counts ({} loss)", p.loss),
        "epsilon",
        "count",
    );
    plot.push(
        Series::line(
            "theta > 0",
            rows.iter()
                .map(|r| (r.epsilon, r.pos_count as f64))
                .collect(),
        )
        .with_markers(),
    );
    plot.push(
        Series::line(
            "theta < 0",
            rows.iter()
                .map(|r| (r.epsilon, r.neg_count as f64))
                .collect(),
        )
        .with_markers(),
    );
    em.emit("sign_counts.svg", plot.render().as_bytes())?;
    let files = em.finish("sign-counts", serde_json::to_value(p)?)?;
    Ok(Outcome {
        report: rows,
        files,
        passed: true,
    })
}

// ----------------------------------------------------------- train 100d

/// Epsilon multiples of `mu` for the three regimes.
pub fn preset_epsilons(name: &str) -> Result<Vec<f64>> {
    match name {
        "high" => Ok(vec![1.5, 2.0, 4.0, 10.0]),
        "medium" => Ok(vec![0.75, 0.9, 1.0]),
        "low" => Ok(vec![0.0, 0.1, 0.25, 0.5]),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (high, medium, low)"
        ))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Train100dParams {
    pub losses: Vec<LossKind>,
    /// Absolute epsilon values.
    pub epsilons: Vec<f64>,
    pub d: usize,
    pub mu: f64,
    pub sigma: f64,
    pub eta: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub shuffle: bool,
    pub init_sigma: f64,
}

impl Default for Train100dParams {
    fn default() -> Self {
        Train100dParams {
            losses: vec![
                LossKind::Linear,
                LossKind::CrossEntropy,
                LossKind::Hinge { margin: 1.0 },
            ],
            epsilons: preset_epsilons("high").expect("known preset"),
            d: 100,
            mu: 1.0,
            sigma: 1.0,
            eta: 0.001,
            n_train: 100_000,
            n_test: 100_000,
            epochs: 200,
            shuffle: true,
            init_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochRun {
    pub loss: LossKind,
    pub epsilon: f64,
    pub stats: RunStats,
}

pub fn train_100d_runs(p: &Train100dParams, seed: u64, jobs: usize) -> Result<Vec<EpochRun>> {
    let model = GaussianModel::isotropic(p.d, p.mu, p.sigma)?;
    let points: Vec<(LossKind, f64)> = p
        .losses
        .iter()
        .flat_map(|&l| p.epsilons.iter().map(move |&e| (l, e)))
        .collect();
    let pool = RunContext {
        out_dir: PathBuf::new(),
        seed,
        jobs,
        manifest: false,
    }
    .pool()?;
    pool.install(|| {
        points
            .par_iter()
            .map(|&(loss, epsilon)| {
                let mut cfg =
                    TrainConfig::epochs(p.eta, epsilon, loss, p.n_train, p.n_test, p.epochs, seed)?;
                cfg.shuffle = p.shuffle;
                cfg.init_sigma = p.init_sigma;
                cfg.validate()?;
                Ok(EpochRun {
                    loss,
                    epsilon,
                    stats: trainer::train_epochs(&model, &cfg)?,
                })
            })
            .collect()
    })
}

fn eps_tag(e: f64) -> String {
    format!("{e}").replace('.', "p")
}

pub fn run_train_100d(p: &Train100dParams, ctx: &RunContext) -> Result<Outcome<Vec<EpochRun>>> {
    if p.losses.is_empty() || p.epsilons.is_empty() {
        return Err(Error::Config(
            "need at least one loss and one epsilon".into(),
        ));
    }
    let runs = train_100d_runs(p, ctx.seed, ctx.jobs)?;
    let mut em = Emitter::new(ctx);
    for r in &runs {
        let mut buf = Vec::new();
        r.stats.write_epoch_csv(&mut buf)?;
        em.emit(
            &format!("train_{}_eps{}.csv", r.loss, eps_tag(r.epsilon)),
            &buf,
        )?;
    }
    for &loss in &p.losses {
        let mut theta_plot = LinePlot::new(
            &format!("{loss} loss, average theta"),
            "epoch",
            "mean theta",
        );
        let mut acc_plot =
            LinePlot::new(&format!("{loss} loss, test accuracy"), "epoch", "accuracy");
        for r in runs.iter().filter(|r| r.loss == loss) {
            let name = format!("eps={}", r.epsilon);
            let xs = (1..=r.stats.mean_theta.len()).map(|e| e as f64);
            theta_plot.push(Series::line(
                &name,
                xs.clone().zip(r.stats.mean_theta.iter().copied()).collect(),
            ));
            acc_plot.push(Series::line(
                &name,
                xs.zip(r.stats.test_accuracy.iter().copied()).collect(),
            ));
        }
        em.emit(
            &format!("train_{loss}_mean_theta.svg"),
            theta_plot.render().as_bytes(),
        )?;
        em.emit(
            &format!("train_{loss}_test_accuracy.svg"),
            acc_plot.render().as_bytes(),
        )?;
    }
    let files = em.finish("train-100d", serde_json::to_value(p)?)?;
    Ok(Outcome {
        report: runs,
        files,
        passed: true,
    })
}

// ------------------------------------------------------------ intercept

#[derive(Debug, Clone, Serialize)]
pub struct InterceptParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub eta: f64,
    pub steps: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub epsilon: f64,
    pub losses: Vec<LossKind>,
}

impl Default for InterceptParams {
    fn default() -> Self {
        InterceptParams {
            mu1: 2.0,
            mu2: 1.0,
            sigma: 0.25,
            eta: 0.01,
            steps: 10_000,
            n_train: 10_000,
            n_test: 10_000,
            epsilon: 0.0,
            losses: vec![LossKind::Linear, LossKind::Hinge { margin: 0.0 }],
        }
    }
}

#[derive(Debug, Clone)]
pub struct InterceptRun {
    pub loss: LossKind,
    pub stats: RunStats,
    pub final_accuracy: f64,
    /// `-b / theta_0`, the decision threshold in one dimension.
    pub boundary: f64,
}

pub fn intercept_runs(p: &InterceptParams, seed: u64, jobs: usize) -> Result<Vec<InterceptRun>> {
    if !(p.mu2 > 0.0 && p.mu2 < p.mu1) {
        return Err(Error::Config(format!(
            "need mu1 > mu2 > 0, got mu1={}, mu2={}",
            p.mu1, p.mu2
        )));
    }
    let model = ShiftedModel::new(vec![p.mu1], vec![p.mu2], p.sigma)?;
    let pool = RunContext {
        out_dir: PathBuf::new(),
        seed,
        jobs,
        manifest: false,
    }
    .pool()?;
    pool.install(|| {
        p.losses
            .par_iter()
            .map(|&loss| {
                let cfg = TrainConfig {
                    eta: p.eta,
                    epsilon: crate::losses::AttackBudget::new(p.epsilon)?,
                    loss,
                    mode: TrainMode::Epochs {
                        n_train: p.n_train,
                        n_test: p.n_test,
                        epochs: p.steps,
                    },
                    seed,
                    init_sigma: 1.0,
                    learn_bias: true,
                    shuffle: false,
                };
                let stats = trainer::train_intercept(&model, &cfg)?;
                let h = &stats.final_hypothesis;
                Ok(InterceptRun {
                    loss,
                    final_accuracy: *stats.test_accuracy.last().expect("steps >= 1"),
                    boundary: -h.b / h.theta[0],
                    stats,
                })
            })
            .collect()
    })
}

pub fn run_intercept(p: &InterceptParams, ctx: &RunContext) -> Result<Outcome<Vec<InterceptRun>>> {
    let runs = intercept_runs(p, ctx.seed, ctx.jobs)?;
    let mut em = Emitter::new(ctx);
    let mut bias_plot = LinePlot::new("Bias during full-batch training", "step", "b");
    let mut acc_plot = LinePlot::new(
        "Test accuracy during full-batch training",
        "step",
        "accuracy",
    );
    for r in &runs {
        let mut buf = Vec::new();
        r.stats.write_epoch_csv(&mut buf)?;
        em.emit(&format!("intercept_{}.csv", r.loss), &buf)?;
        let xs = (1..=r.stats.bias_history.len()).map(|e| e as f64);
        bias_plot.push(Series::line(
            r.loss.name(),
            xs.clone()
                .zip(r.stats.bias_history.iter().copied())
                .collect(),
        ));
        acc_plot.push(Series::line(
            r.loss.name(),
            xs.zip(r.stats.test_accuracy.iter().copied()).collect(),
        ));
    }
    em.emit(
        "intercept_summary.csv",
        &csv_bytes(
            &[
                "loss",
                "initial_bias",
                "final_bias",
                "final_theta",
                "boundary",
                "final_test_accuracy",
            ],
            runs.iter().map(|r| {
                vec![
                    r.loss.name().to_string(),
                    fmt17(r.stats.initial.b),
                    fmt17(r.stats.final_hypothesis.b),
                    fmt17(r.stats.final_hypothesis.theta[0]),
                    fmt17(r.boundary),
                    fmt17(r.final_accuracy),
                ]
            }),
        )?,
    )?;
    em.emit("intercept_bias.svg", bias_plot.render().as_bytes())?;
    em.emit("intercept_accuracy.svg", acc_plot.render().as_bytes())?;
    let files = em.finish("intercept", serde_json::to_value(p)?)?;
    Ok(Outcome {
        report: runs,
        files,
        passed: true,
    })
}

/// Reads a CSV file back into header and rows; used to check outputs.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

/// Converts a rational to `f64` for display.
pub fn approx(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
