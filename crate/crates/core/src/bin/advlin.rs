use std::path::PathBuf;
use std::process::ExitCode;

use advlin::dynamics::parse_rational;
use advlin::experiments::{
    preset_epsilons, run_bayes, run_dynamics, run_intercept, run_sign_counts, run_train_100d,
    BayesParams, DynamicsParams, EpsGrid, InterceptParams, RunContext, SignCountParams,
    Train100dParams,
};
use advlin::{Error, LossKind, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "advlin",
    version,
    about = "Adversarial training of linear classifiers on Gaussian data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bayes accuracy against dimension, plus the 1-d Bayes error.
    Bayes(Common),
    /// Exact expected dynamics: trajectory, cycle and proposition verdicts.
    Dynamics(DynamicsArgs),
    /// 1-d streaming runs: sign counts of theta per epsilon.
    SignCounts(Common),
    /// 100-d epoch runs for each (loss, epsilon).
    #[command(name = "train-100d")]
    Train100d(TrainArgs),
    /// Shifted means with a learned bias, linear vs hinge0.
    Intercept(InterceptArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    eta: Option<String>,
    /// May be given several times or comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "eps_grid")]
    epsilon: Vec<String>,
    #[arg(long = "eps-grid", value_name = "A:B:STEP")]
    eps_grid: Option<String>,
    /// May be given several times or comma separated.
    #[arg(long, value_delimiter = ',')]
    loss: Vec<LossKind>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "n-train")]
    n_train: Option<usize>,
    #[arg(long = "n-test")]
    n_test: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, env = "ADVLIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write manifest.json with resolved parameters and output hashes.
    #[arg(long)]
    manifest: bool,
}

#[derive(Args)]
struct DynamicsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    theta0: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Upper ratio t with eps < t mu for the consecutive-positive check.
    #[arg(long = "t-bound")]
    t_bound: Option<String>,
    /// Sweep the built-in grid of (eta, mu, eps) triples.
    #[arg(long)]
    grid: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Epsilon preset: high, medium or low.
    #[arg(long, conflicts_with_all = ["epsilon", "eps_grid"])]
    preset: Option<String>,
    #[arg(long = "no-shuffle")]
    no_shuffle: bool,
}

#[derive(Args)]
struct InterceptArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    mu1: Option<f64>,
    #[arg(long)]
    mu2: Option<f64>,
}

impl Common {
    fn context(&self) -> Result<RunContext> {
        if self.jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        Ok(RunContext {
            out_dir: self.out.clone(),
            seed: self.seed,
            jobs: self.jobs,
            manifest: self.manifest,
        })
    }

    fn epsilons(&self) -> Result<Option<Vec<f64>>> {
        if let Some(g) = &self.eps_grid {
            return Ok(Some(EpsGrid::parse(g)?.values()));
        }
        if self.epsilon.is_empty() {
            return Ok(None);
        }
        self.epsilon
            .iter()
            .map(|e| real(e, "epsilon"))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn single_loss(&self) -> Result<Option<LossKind>> {
        match self.loss.as_slice() {
            [] => Ok(None),
            [l] => Ok(Some(*l)),
            _ => Err(Error::Config("this subcommand takes one --loss".into())),
        }
    }
}

/// Accepts decimals and `p/q` rationals.
fn real(s: &str, what: &str) -> Result<f64> {
    if let Ok(v) = s.trim().parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    parse_rational(s)
        .map(|r| advlin::dynamics::to_f64(&r))
        .map_err(|_| Error::Config(format!("--{what}: cannot parse `{s}`")))
}

fn opt_real(s: &Option<String>, what: &str) -> Result<Option<f64>> {
    s.as_deref().map(|v| real(v, what)).transpose()
}

fn rat(s: &str, what: &str) -> Result<advlin::dynamics::Rational> {
    parse_rational(s).map_err(|e| Error::Config(format!("--{what}: {e}")))
}

fn run(cli: Cli) -> Result<(bool, Vec<PathBuf>, Vec<String>)> {
    let mut summary = Vec::new();
    match cli.command {
        Command::Bayes(c) => {
            let mut p = BayesParams::default();
            p.mu = opt_real(&c.mu, "mu")?.unwrap_or(p.mu);
            p.sigma = opt_real(&c.sigma, "sigma")?.unwrap_or(p.sigma);
            p.d_max = c.d.unwrap_or(p.d_max);
            let o = run_bayes(&p, &c.context()?)?;
            summary.push(format!("bayes_error_1d={}", o.report.bayes_error_1d));
            summary.push(format!(
                "bayes_accuracy_1d={}",
                1.0 - o.report.bayes_error_1d
            ));
            Ok((o.passed, o.files, summary))
        }
        Command::Dynamics(a) => {
            let c = &a.common;
            let mut p = DynamicsParams::default();
            if let Some(e) = &c.eta {
                p.eta = rat(e, "eta")?;
            }
            if let Some(m) = &c.mu {
                p.mu = rat(m, "mu")?;
            }
            match c.epsilon.as_slice() {
                [] => {}
                [e] => p.epsilon = rat(e, "epsilon")?,
                _ => return Err(Error::Config("dynamics takes one --epsilon".into())),
            }
            if c.eps_grid.is_some() {
                return Err(Error::Config("dynamics uses --grid, not --eps-grid".into()));
            }
            if let Some(t) = &a.theta0 {
                p.theta0 = rat(t, "theta0")?;
            }
            if let Some(t) = &a.t_bound {
                p.t_bound = Some(rat(t, "t-bound")?);
            }
            p.horizon = a.horizon.or(c.iters).unwrap_or(p.horizon);
            p.grid = a.grid;
            let o = run_dynamics(&p, &c.context()?)?;
            if let Some(cy) = o.report.cycle {
                summary.push(format!("period={}", cy.period));
            }
            if let Some(cc) = &o.report.cycle_census {
                summary.push(format!("pos={},neg={}", cc.positive, cc.negative));
            }
            let failed = o.report.checks.iter().filter(|c| !c.passed()).count();
            summary.push(format!(
                "triples={} failed={}",
                o.report.checks.len(),
                failed
            ));
            Ok((o.passed, o.files, summary))
        }
        Command::SignCounts(c) => {
            let mut p = SignCountParams::default();
            p.loss = c.single_loss()?.unwrap_or(p.loss);
            if let Some(g) = &c.eps_grid {
                p.eps_grid = EpsGrid::parse(g)?;
            } else if let [e] = c.epsilon.as_slice() {
                p.eps_grid = EpsGrid::single(real(e, "epsilon")?);
            } else if c.epsilon.len() > 1 {
                return Err(Error::Config("use --eps-grid for several epsilons".into()));
            }
            p.eta = opt_real(&c.eta, "eta")?.unwrap_or(p.eta);
            p.mu = opt_real(&c.mu, "mu")?.unwrap_or(p.mu);
            p.sigma = opt_real(&c.sigma, "sigma")?.unwrap_or(p.sigma);
            p.iterations = c.iters.unwrap_or(p.iterations);
            p.n_test = c.n_test.unwrap_or(p.n_test);
            p.d = c.d.unwrap_or(p.d);
            let o = run_sign_counts(&p, &c.context()?)?;
            for r in &o.report {
                summary.push(format!(
                    "eps={} pos={} neg={} acc={:.4}",
                    r.epsilon, r.pos_count, r.neg_count, r.final_test_accuracy
                ));
            }
            Ok((o.passed, o.files, summary))
        }
        Command::Train100d(a) => {
            let c = &a.common;
            let mut p = Train100dParams::default();
            if !c.loss.is_empty() {
                p.losses = c.loss.clone();
            }
            if let Some(e) = c.epsilons()? {
                p.epsilons = e;
            } else if let Some(name) = &a.preset {
                p.epsilons = preset_epsilons(name)?;
            }
            p.eta = opt_real(&c.eta, "eta")?.unwrap_or(p.eta);
            p.mu = opt_real(&c.mu, "mu")?.unwrap_or(p.mu);
            p.sigma = opt_real(&c.sigma, "sigma")?.unwrap_or(p.sigma);
            p.d = c.d.unwrap_or(p.d);
            p.n_train = c.n_train.unwrap_or(p.n_train);
            p.n_test = c.n_test.unwrap_or(p.n_test);
            p.epochs = c.epochs.unwrap_or(p.epochs);
            p.shuffle = !a.no_shuffle;
            let o = run_train_100d(&p, &c.context()?)?;
            for r in &o.report {
                summary.push(format!(
                    "loss={} eps={} final_acc={:.4} final_mean_theta={:.6}",
                    r.loss,
                    r.epsilon,
                    r.stats.test_accuracy.last().copied().unwrap_or(f64::NAN),
                    r.stats.mean_theta.last().copied().unwrap_or(f64::NAN)
                ));
            }
            Ok((o.passed, o.files, summary))
        }
        Command::Intercept(a) => {
            let c = &a.common;
            let mut p = InterceptParams::default();
            if !c.loss.is_empty() {
                p.losses = c.loss.clone();
            }
            match c.epsilons()?.as_deref() {
                None => {}
                Some([e]) => p.epsilon = *e,
                Some(_) => return Err(Error::Config("intercept takes one --epsilon".into())),
            }
            p.mu1 = a.mu1.unwrap_or(p.mu1);
            p.mu2 = a.mu2.unwrap_or(p.mu2);
            p.sigma = opt_real(&c.sigma, "sigma")?.unwrap_or(p.sigma);
            p.eta = opt_real(&c.eta, "eta")?.unwrap_or(p.eta);
            p.steps = c.iters.or(c.epochs).unwrap_or(p.steps);
            p.n_train = c.n_train.unwrap_or(p.n_train);
            p.n_test = c.n_test.unwrap_or(p.n_test);
            let o = run_intercept(&p, &c.context()?)?;
            for r in &o.report {
                summary.push(format!(
                    "loss={} final_bias={:.6} boundary={:.4} acc={:.4}",
                    r.loss, r.stats.final_hypothesis.b, r.boundary, r.final_accuracy
                ));
            }
            Ok((o.passed, o.files, summary))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((passed, files, summary)) => {
            for line in summary {
                println!("{line}");
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("advlin: some verdicts failed");
                ExitCode::from(1)
            }
        }
        Err(
            e @ (Error::Config(_) | Error::Domain(_) | Error::Parse(_) | Error::Unsupported(_)),
        ) => {
            eprintln!("advlin: usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("advlin: {e}");
            ExitCode::from(1)
        }
    }
}
