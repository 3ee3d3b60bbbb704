//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};

use advlin::dynamics::{
    detect_cycle, rational, sign_census, simulate, Attraction, RecurrenceParams, Verdict,
};
use advlin::experiments::{
    check_triple, default_grid, intercept_runs, sign_count_rows, train_100d_runs, EpsGrid,
    InterceptParams, SignCountParams, Train100dParams,
};
use advlin::losses::{adversarial_gradient, adversarial_loss, loss_value};
use advlin::model::bayes_error_1d;
use advlin::specfun::{erf, erf_oracle};
use advlin::{AttackBudget, Label, LabeledSample, LinearHypothesis, LossKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    id: u32,
    passed: bool,
    detail: String,
}

fn line(id: u32, passed: bool, detail: impl Into<String>) -> Line {
    Line {
        id,
        passed,
        detail: detail.into(),
    }
}

fn bayes_constants() -> Line {
    let acc = bayes_error_1d(1.0, 1.0).unwrap().complement().value();
    line(
        1,
        (acc - 0.8413).abs() <= 1e-4,
        format!("1-d Bayes accuracy {acc:.6} (target 0.8413 +/- 1e-4)"),
    )
}

fn example_one() -> Line {
    let p = RecurrenceParams::new(rational(1, 2), rational(1, 1), rational(3, 2)).unwrap();
    let theta0 = rational(1, 1_000_000);
    let Some(c) = detect_cycle(&theta0, &p, 1_000) else {
        return line(2, false, "no cycle found");
    };
    let t = simulate(theta0, &p, c.preperiod + c.period).unwrap();
    let census = sign_census(&t.values()[c.preperiod..c.preperiod + c.period]);
    let ok = c.period == 6 && census.positive == 5 && census.negative == 1 && census.zero == 0;
    line(
        2,
        ok,
        format!(
            "period={} pos={} neg={} zero={} (target period=6 pos=5 neg=1)",
            c.period, census.positive, census.negative, census.zero
        ),
    )
}

fn proposition_suite() -> Line {
    let grid = default_grid();
    let theta0 = rational(1, 1_000_000);
    let mut failures = Vec::new();
    for p in &grid {
        let (c, _) = check_triple(p.clone(), &theta0, 100_000, None).unwrap();
        let attraction = matches!(c.attraction, Attraction::FirstNegative(_));
        if !(attraction && c.next_is_pos == Verdict::Pass && c.consecutive_pos == Verdict::Pass) {
            failures.push(format!(
                "({}, {}, {}): {:?} {} {}",
                p.eta(),
                p.mu(),
                p.epsilon(),
                c.attraction,
                c.next_is_pos.label(),
                c.consecutive_pos.label()
            ));
        }
    }
    let mut detail = format!(
        "{} triples, horizon 1e5, {} failures",
        grid.len(),
        failures.len()
    );
    for f in failures.iter().take(5) {
        detail.push_str(&format!("; {f}"));
    }
    line(3, grid.len() >= 100 && failures.is_empty(), detail)
}

fn sign_counts() -> Line {
    let mut ok = true;
    let mut notes = Vec::new();
    for loss in [LossKind::Linear, LossKind::CrossEntropy] {
        for seed in [1u64, 2, 3] {
            let p = SignCountParams {
                loss,
                eps_grid: EpsGrid::parse("0:20:2").unwrap(),
                iterations: 20_000,
                ..Default::default()
            };
            let rows = sign_count_rows(&p, seed, 1).unwrap();
            for r in &rows {
                if r.epsilon > 0.0 && r.pos_count <= r.neg_count {
                    ok = false;
                    notes.push(format!(
                        "{loss} seed {seed} eps {}: pos {} <= neg {}",
                        r.epsilon, r.pos_count, r.neg_count
                    ));
                }
            }
            let acc0 = rows.first().unwrap().final_test_accuracy;
            let acc20 = rows.last().unwrap().final_test_accuracy;
            let ok0 = (acc0 - 0.8413).abs() <= 0.01;
            let ok20 = (acc20 - 0.8413).abs() <= 0.03;
            ok &= ok0 && ok20;
            notes.push(format!(
                "{loss} seed {seed}: acc(eps=0)={acc0:.4}{} acc(eps=20)={acc20:.4}{}",
                if ok0 { "" } else { " OUT" },
                if ok20 { "" } else { " OUT" }
            ));
        }
    }
    line(4, ok, notes.join("; "))
}

fn scaled_100d(epsilons: Vec<f64>) -> Vec<advlin::experiments::EpochRun> {
    let p = Train100dParams {
        epsilons,
        n_train: 20_000,
        n_test: 20_000,
        epochs: 60,
        ..Default::default()
    };
    train_100d_runs(&p, 1, 1).unwrap()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn large_eps_learning(runs: &[advlin::experiments::EpochRun]) -> Line {
    let mut ok = true;
    let mut notes = Vec::new();
    for r in runs.iter().filter(|r| r.epsilon < 5.0) {
        let acc = &r.stats.test_accuracy;
        let first = acc.iter().position(|&a| a >= 0.999);
        ok &= first.is_some();
        notes.push(format!(
            "{} eps {}: {}",
            r.loss,
            r.epsilon,
            first.map_or(format!("max {:.4}", max(acc)), |e| format!(
                ">=0.999 at epoch {}",
                e + 1
            ))
        ));
    }
    line(5, ok, notes.join("; "))
}

fn eps_ten_regime(runs: &[advlin::experiments::EpochRun]) -> Line {
    let mut ok = true;
    let mut notes = Vec::new();
    for r in runs.iter().filter(|r| r.epsilon == 10.0) {
        let acc = &r.stats.test_accuracy;
        match r.loss {
            LossKind::Linear | LossKind::CrossEntropy => {
                let tail = &acc[acc.len() - 20..];
                let mean = tail.iter().sum::<f64>() / tail.len() as f64;
                let pass = (0.60..=0.98).contains(&mean);
                ok &= pass;
                notes.push(format!(
                    "{} last-20 mean {mean:.4} (band [0.60, 0.98])",
                    r.loss
                ));
            }
            LossKind::Hinge { .. } => {
                let span = max(acc) - min(acc);
                ok &= span >= 0.3;
                notes.push(format!(
                    "{} range {:.4}..{:.4} span {span:.4} (>= 0.3)",
                    r.loss,
                    min(acc),
                    max(acc)
                ));
            }
        }
    }
    line(6, ok, notes.join("; "))
}

fn mean_theta_oscillation(runs: &[advlin::experiments::EpochRun]) -> Line {
    let eta = 0.001;
    let mut ok = true;
    let mut notes = Vec::new();
    for r in runs
        .iter()
        .filter(|r| r.epsilon < 5.0 && !matches!(r.loss, LossKind::CrossEntropy))
    {
        let m = &r.stats.mean_theta;
        let tail = &m[m.len() - 20..];
        let inside = tail
            .iter()
            .filter(|&&v| (0.0..=2.0 * eta).contains(&v))
            .count();
        let frac = inside as f64 / tail.len() as f64;
        ok &= frac >= 0.8;
        notes.push(format!("{} eps {}: {inside}/20", r.loss, r.epsilon));
    }
    line(7, ok, notes.join("; "))
}

fn intercept() -> Line {
    let runs = intercept_runs(&InterceptParams::default(), 0, 1).unwrap();
    let lin = runs.iter().find(|r| r.loss == LossKind::Linear).unwrap();
    let hinge = runs
        .iter()
        .find(|r| r.loss == LossKind::Hinge { margin: 0.0 })
        .unwrap();
    let b0 = lin.stats.initial.b;
    let drift = lin
        .stats
        .bias_history
        .iter()
        .map(|b| (b - b0).abs())
        .fold(0.0, f64::max);
    let gap = hinge.final_accuracy - lin.final_accuracy;
    let ok = drift <= 1e-12
        && lin.stats.bias_history.len() == 10_000
        && hinge.final_accuracy >= 0.95
        && (1.3..=1.7).contains(&hinge.boundary)
        && gap >= 0.05;
    line(
        8,
        ok,
        format!(
            "linear bias drift {drift:.1e} over {} steps; hinge0 acc {:.4}, boundary {:.4}; linear acc {:.4}; gap {gap:.4}",
            lin.stats.bias_history.len(),
            hinge.final_accuracy,
            hinge.boundary,
            lin.final_accuracy
        ),
    )
}

fn corner_max(kind: LossKind, h: &LinearHypothesis, s: &LabeledSample, eps: f64) -> f64 {
    let d = h.dim();
    (0..1u32 << d)
        .map(|mask| {
            let x: Vec<f64> = (0..d)
                .map(|j| s.x[j] + if mask >> j & 1 == 1 { eps } else { -eps })
                .collect();
            loss_value(kind, h, &LabeledSample { x, y: s.y }).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn oracles() -> Line {
    let mut erf_err: f64 = 0.0;
    for i in 0..=1600 {
        let x = -8.0 + 0.01 * i as f64;
        erf_err = erf_err.max((erf(x).unwrap() - erf_oracle(x, 1e-13).unwrap()).abs());
    }

    let kinds = [
        LossKind::Linear,
        LossKind::CrossEntropy,
        LossKind::Hinge { margin: 0.0 },
        LossKind::Hinge { margin: 1.0 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut corner_err: f64 = 0.0;
    let mut fd_err: f64 = 0.0;
    let mut fd_checked = 0usize;
    for i in 0..200 {
        let d = rng.random_range(1..=4usize);
        let theta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h = LinearHypothesis::new(theta, rng.random_range(-1.0..1.0)).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = if rng.random_bool(0.5) {
            Label::Pos
        } else {
            Label::Neg
        };
        let s = LabeledSample { x, y };
        let eps = rng.random_range(0.0..1.5);
        let kind = kinds[i % kinds.len()];
        let adv = adversarial_loss(kind, &h, &s, AttackBudget::new(eps).unwrap()).unwrap();
        let brute = corner_max(kind, &h, &s, eps);
        corner_err = corner_err.max((adv - brute).abs() / brute.abs().max(1.0));

        // Central differences, skipping points near a kink of the loss or of |theta_j|.
        let z = advlin::losses::attacked_margin(&h, &s, AttackBudget::new(eps).unwrap()).unwrap();
        let near_hinge = matches!(kind, LossKind::Hinge { margin } if (z - margin).abs() < 1e-3);
        if near_hinge || h.theta.iter().any(|t| t.abs() < 1e-3) {
            continue;
        }
        let (g, gb) = adversarial_gradient(kind, &h, &s, AttackBudget::new(eps).unwrap()).unwrap();
        let f = |h: &LinearHypothesis| {
            adversarial_loss(kind, h, &s, AttackBudget::new(eps).unwrap()).unwrap()
        };
        let step = 1e-6;
        for j in 0..=d {
            let (mut hp, mut hm) = (h.clone(), h.clone());
            if j < d {
                hp.theta[j] += step;
                hm.theta[j] -= step;
            } else {
                hp.b += step;
                hm.b -= step;
            }
            let fd = (f(&hp) - f(&hm)) / (2.0 * step);
            let an = if j < d { g[j] } else { gb };
            fd_err = fd_err.max((fd - an).abs() / an.abs().max(1.0));
        }
        fd_checked += 1;
    }
    let ok = erf_err <= 1e-10 && corner_err <= 1e-12 && fd_err <= 1e-5;
    line(
        9,
        ok,
        format!(
            "erf max err {erf_err:.2e} (<= 1e-10); corner enumeration max err {corner_err:.2e} over 200 (<= 1e-12); finite differences max rel err {fd_err:.2e} over {fd_checked} (<= 1e-5)"
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Line {
    let commands: [&[&str]; 5] = [
        &["bayes"],
        &["dynamics", "--eta", "1/2", "--mu", "1", "--epsilon", "3/2"],
        &[
            "sign-counts",
            "--eps-grid",
            "0:20:5",
            "--iters",
            "5000",
            "--n-test",
            "5000",
        ],
        &[
            "train-100d",
            "--epsilon",
            "2,10",
            "--n-train",
            "2000",
            "--n-test",
            "2000",
            "--epochs",
            "5",
        ],
        &[
            "intercept",
            "--iters",
            "500",
            "--n-train",
            "2000",
            "--n-test",
            "2000",
        ],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for args in commands {
        let mut runs = Vec::new();
        for (k, jobs) in ["1", "3"].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{}_{k}", args[0]));
            let status = Command::new(env!("CARGO_BIN_EXE_advlin"))
                .args(args)
                .args(["--seed", "7", "--jobs", jobs, "--out"])
                .arg(&dir)
                .output()
                .unwrap()
                .status;
            ok &= status.success();
            runs.push(csv_files(&dir));
        }
        let same = !runs[0].is_empty() && runs[0] == runs[1];
        ok &= same;
        notes.push(format!(
            "{}: {} csv {}",
            args[0],
            runs[0].len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    line(10, ok, notes.join("; "))
}

fn main() -> ExitCode {
    let report = |l: Line| {
        println!(
            "criterion {:>2}: {} | {}",
            l.id,
            if l.passed { "PASS" } else { "FAIL" },
            l.detail
        );
        l.passed
    };
    let mut all = true;
    all &= report(bayes_constants());
    all &= report(example_one());
    all &= report(proposition_suite());
    all &= report(sign_counts());
    let runs = scaled_100d(vec![1.5, 2.0, 4.0, 10.0]);
    all &= report(large_eps_learning(&runs));
    all &= report(eps_ten_regime(&runs));
    all &= report(mean_theta_oscillation(&runs));
    all &= report(intercept());
    all &= report(oracles());
    all &= report(determinism());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
