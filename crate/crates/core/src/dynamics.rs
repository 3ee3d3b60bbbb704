//! Expected gradient-descent dynamics of one coordinate under the linear
//! loss, in exact rational arithmetic.
//!
//! Replacing `y x_j` by its expectation `mu` in the per-sample update gives
//!
//! ```text
//! theta' = theta + eta (mu + eps)   if theta < 0
//! theta' = theta + eta mu           if theta = 0
//! theta' = theta + eta (mu - eps)   if theta > 0
//! ```
//!
//! For `eps > mu` the iterate keeps returning below zero, yet once it has
//! been positive every negative value is immediately followed by a value
//! above `2 eta mu`, and runs of two positive values keep recurring. The
//! checks below verify these facts on concrete trajectories with strict
//! sign comparisons, which is why the arithmetic is exact.

use std::cmp::Ordering;
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::output::fmt17;

pub type Rational = BigRational;

/// Parses `p/q`, an integer, or a finite decimal such as `0.001` into an
/// exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10u8), frac_part.len());
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Step size, class mean and attack budget of the recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceParams {
    eta: Rational,
    mu: Rational,
    epsilon: Rational,
    /// `eta (mu + eps)`, `eta mu`, `eta (mu - eps)`.
    increments: [Rational; 3],
}

impl RecurrenceParams {
    pub fn new(eta: Rational, mu: Rational, epsilon: Rational) -> Result<Self> {
        if !eta.is_positive() {
            return Err(Error::domain(format!("eta must be positive, got {eta}")));
        }
        if !mu.is_positive() {
            return Err(Error::domain(format!("mu must be positive, got {mu}")));
        }
        if epsilon.is_negative() {
            return Err(Error::domain(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        let increments = [&eta * (&mu + &epsilon), &eta * &mu, &eta * (&mu - &epsilon)];
        Ok(RecurrenceParams {
            eta,
            mu,
            epsilon,
            increments,
        })
    }

    pub fn eta(&self) -> &Rational {
        &self.eta
    }

    pub fn mu(&self) -> &Rational {
        &self.mu
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    /// True when the adversary out-muscles the signal, `eps > mu`.
    pub fn adversary_dominates(&self) -> bool {
        self.epsilon > self.mu
    }
}

/// The iterates `theta^0, theta^1, ..., theta^k`, stored as integer
/// numerators over one common positive denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    nums: Vec<BigInt>,
    den: BigInt,
}

impl Trajectory {
    pub fn from_values(values: &[Rational]) -> Self {
        let den = values.iter().fold(BigInt::one(), |d, v| d.lcm(v.denom()));
        let nums = values
            .iter()
            .map(|v| v.numer() * (&den / v.denom()))
            .collect();
        Trajectory { nums, den }
    }

    /// Value at step `i`, in lowest terms.
    pub fn value(&self, i: usize) -> Rational {
        Rational::new(self.nums[i].clone(), self.den.clone())
    }

    pub fn values(&self) -> Vec<Rational> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.nums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nums.is_empty()
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.nums[i].is_positive()
    }

    pub fn is_negative(&self, i: usize) -> bool {
        self.nums[i].is_negative()
    }

    /// Sign census of the values from index `from` on.
    pub fn census_from(&self, from: usize) -> SignCensus {
        let mut c = SignCensus::default();
        for n in &self.nums[from.min(self.len())..] {
            match n.sign() {
                num_bigint::Sign::Plus => c.positive += 1,
                num_bigint::Sign::Minus => c.negative += 1,
                num_bigint::Sign::NoSign => c.zero += 1,
            }
        }
        c
    }

    /// `step,theta_num,theta_den,theta_float`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "theta_num", "theta_den", "theta_float"])?;
        for i in 0..self.len() {
            let v = self.value(i);
            w.write_record([
                i.to_string(),
                v.numer().to_string(),
                v.denom().to_string(),
                fmt17(to_f64(&v)),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
        Ok(())
    }

    /// Index of the first strictly positive value at or after `from`.
    fn first_positive_from(&self, from: usize) -> Option<usize> {
        (from..self.len()).find(|&i| self.is_positive(i))
    }

    fn first_negative_from(&self, from: usize) -> Option<usize> {
        (from..self.len()).find(|&i| self.is_negative(i))
    }

    /// The first negative index that follows the first positive one.
    pub fn first_positive_then_negative(&self) -> Option<usize> {
        let p = self.first_positive_from(0)?;
        self.first_negative_from(p + 1)
    }
}

pub fn expected_step(theta: &Rational, p: &RecurrenceParams) -> Rational {
    let inc = match theta.cmp(&Rational::zero()) {
        Ordering::Less => &p.increments[0],
        Ordering::Equal => &p.increments[1],
        Ordering::Greater => &p.increments[2],
    };
    theta + inc
}

/// `k` steps from `theta0`; the result holds `k + 1` values.
pub fn simulate(theta0: Rational, p: &RecurrenceParams, k: usize) -> Result<Trajectory> {
    if k == 0 {
        return Err(Error::domain("step count must be at least 1"));
    }
    // Every iterate is theta0 plus integer multiples of the increments, so a
    // common denominator turns each step into one integer addition.
    let den = p
        .increments
        .iter()
        .fold(theta0.denom().clone(), |d, v| d.lcm(v.denom()));
    let scaled = |v: &Rational| v.numer() * (&den / v.denom());
    let [neg, zero, pos] = [
        scaled(&p.increments[0]),
        scaled(&p.increments[1]),
        scaled(&p.increments[2]),
    ];
    let mut nums = Vec::with_capacity(k + 1);
    nums.push(scaled(&theta0));
    for i in 0..k {
        let cur: &BigInt = &nums[i];
        let inc = match cur.sign() {
            num_bigint::Sign::Minus => &neg,
            num_bigint::Sign::NoSign => &zero,
            num_bigint::Sign::Plus => &pos,
        };
        let next = cur + inc;
        nums.push(next);
    }
    Ok(Trajectory { nums, den })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignCensus {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl SignCensus {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.zero
    }

    pub fn record(&mut self, v: f64) {
        if v > 0.0 {
            self.positive += 1;
        } else if v < 0.0 {
            self.negative += 1;
        } else {
            self.zero += 1;
        }
    }
}

pub fn sign_census(values: &[Rational]) -> SignCensus {
    values.iter().fold(SignCensus::default(), |mut c, v| {
        match v.cmp(&Rational::zero()) {
            Ordering::Greater => c.positive += 1,
            Ordering::Less => c.negative += 1,
            Ordering::Equal => c.zero += 1,
        }
        c
    })
}

/// Outcome of a trajectory check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// The check's hypotheses do not hold for these inputs.
    NotApplicable(String),
    /// Index at which the asserted property fails.
    Violation(usize),
}

impl Verdict {
    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::Violation(_))
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Pass => "pass".into(),
            Verdict::NotApplicable(why) => format!("not-applicable ({why})"),
            Verdict::Violation(i) => format!("violation at step {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attraction {
    /// First index `n >= 1` with `theta^n < 0`.
    FirstNegative(usize),
    NotApplicable,
    /// No negative value within the horizon although `eps > mu`.
    Counterexample {
        horizon: usize,
    },
}

/// Runs the recurrence from `theta0` until it first goes negative.
pub fn check_attraction(p: &RecurrenceParams, theta0: &Rational, horizon: usize) -> Attraction {
    if !p.adversary_dominates() {
        return Attraction::NotApplicable;
    }
    let mut theta = theta0.clone();
    for n in 1..=horizon {
        theta = expected_step(&theta, p);
        if theta.is_negative() {
            return Attraction::FirstNegative(n);
        }
    }
    Attraction::Counterexample { horizon }
}

/// After the first positive-then-negative pattern, every negative value must
/// be followed by a value strictly above `2 eta mu`.
pub fn check_next_is_pos(t: &Trajectory, p: &RecurrenceParams) -> Verdict {
    let Some(n) = t.first_positive_then_negative() else {
        return Verdict::NotApplicable("no negative value after a positive one".into());
    };
    let bound = Rational::from_integer(BigInt::from(2)) * &p.eta * &p.mu;
    // Strict comparison on numerators: v > bound iff v * den > bound * den.
    let scaled = bound.numer() * &t.den;
    let bound_den = bound.denom();
    for i in n..t.len() - 1 {
        if t.is_negative(i) && &t.nums[i + 1] * bound_den <= scaled {
            return Verdict::Violation(i);
        }
    }
    Verdict::Pass
}

/// Even window length guaranteeing two consecutive positive values when
/// `mu < eps < t mu`: `ceil(t)` if even, else `ceil(t) + 1`.
pub fn s_choice(t: &Rational) -> Result<u64> {
    if *t <= Rational::one() {
        return Err(Error::domain(format!("t must exceed 1, got {t}")));
    }
    let c = t.ceil().to_integer();
    let s = if c.is_even() { c } else { c + 1 };
    s.to_u64()
        .ok_or_else(|| Error::domain(format!("t too large: {t}")))
}

/// For `mu < eps < t_bound mu`: after the first positive-then-negative
/// pattern, each negative `theta^i` is followed by a pair of consecutive
/// positive values `theta^k, theta^{k+1}` with `i < k` and
/// `k + 1 <= i + s + 1`, `s = s_choice(t_bound)`. Negatives whose window runs
/// past the end of the trajectory are skipped.
pub fn check_consecutive_pos(
    p: &RecurrenceParams,
    t_bound: &Rational,
    trajectory: &Trajectory,
) -> Verdict {
    if !p.adversary_dominates() {
        return Verdict::NotApplicable("requires eps > mu".into());
    }
    if *t_bound <= Rational::one() || p.epsilon >= t_bound * &p.mu {
        return Verdict::NotApplicable("requires eps < t mu with t > 1".into());
    }
    let s = match s_choice(t_bound) {
        Ok(s) => s as usize,
        Err(e) => return Verdict::NotApplicable(e.to_string()),
    };
    let Some(n) = trajectory.first_positive_then_negative() else {
        return Verdict::NotApplicable("no negative value after a positive one".into());
    };
    let t = trajectory;
    for i in n..t.len() {
        if !t.is_negative(i) || i + s + 1 >= t.len() {
            continue;
        }
        let found = (i + 1..=i + s).any(|k| t.is_positive(k) && t.is_positive(k + 1));
        if !found {
            return Verdict::Violation(i);
        }
    }
    Verdict::Pass
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cycle {
    pub period: usize,
    pub preperiod: usize,
}

pub const DEFAULT_CYCLE_HORIZON: usize = 1_000_000;

/// Brent's cycle detection over exact states, evaluating at most `max_steps`
/// steps in the search phase.
pub fn detect_cycle(t0: &Rational, p: &RecurrenceParams, max_steps: usize) -> Option<Cycle> {
    let step = |x: &Rational| expected_step(x, p);
    let mut power = 1usize;
    let mut period = 1usize;
    let mut tortoise = t0.clone();
    let mut hare = step(t0);
    let mut used = 1usize;
    while tortoise != hare {
        if used >= max_steps {
            return None;
        }
        if power == period {
            tortoise = hare.clone();
            power *= 2;
            period = 0;
        }
        hare = step(&hare);
        period += 1;
        used += 1;
    }

    let mut tortoise = t0.clone();
    let mut hare = t0.clone();
    for _ in 0..period {
        hare = step(&hare);
    }
    let mut preperiod = 0;
    while tortoise != hare {
        tortoise = step(&tortoise);
        hare = step(&hare);
        preperiod += 1;
    }
    Some(Cycle { period, preperiod })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_one() -> RecurrenceParams {
        RecurrenceParams::new(rational(1, 2), rational(1, 1), rational(3, 2)).unwrap()
    }

    fn r() -> Rational {
        rational(1, 1_000_000)
    }

    #[test]
    fn step_branches() {
        let p = example_one();
        assert_eq!(expected_step(&rational(1, 2), &p), rational(1, 4));
        assert_eq!(expected_step(&Rational::zero(), &p), rational(1, 2));
        assert_eq!(expected_step(&rational(-1, 4), &p), rational(1, 1));
    }

    #[test]
    fn example_one_cycle() {
        let p = example_one();
        let t = simulate(r(), &p, 6).unwrap();
        let offsets = [(0, 1), (-1, 4), (1, 1), (3, 4), (1, 2), (1, 4), (0, 1)];
        for (v, (a, b)) in t.values().iter().zip(offsets) {
            assert_eq!(*v, r() + rational(a, b));
        }
        let c = sign_census(&t.values()[..6]);
        assert_eq!((c.positive, c.negative, c.zero), (5, 1, 0));
        assert_eq!(
            detect_cycle(&r(), &p, DEFAULT_CYCLE_HORIZON),
            Some(Cycle {
                period: 6,
                preperiod: 0
            })
        );
    }

    #[test]
    fn no_adversary_is_linear_growth() {
        let p = RecurrenceParams::new(rational(1, 3), rational(2, 1), Rational::zero()).unwrap();
        let t = simulate(rational(1, 7), &p, 50).unwrap();
        for (k, v) in t.values().iter().enumerate() {
            assert_eq!(*v, rational(1, 7) + rational(2 * k as i64, 3));
        }
        let c = sign_census(&t.values());
        assert_eq!((c.negative, c.zero), (0, 0));
        assert_eq!(
            check_next_is_pos(&t, &p),
            Verdict::NotApplicable("no negative value after a positive one".into())
        );
        assert_eq!(detect_cycle(&rational(1, 7), &p, 10_000), None);
    }

    #[test]
    fn weak_adversary_diverges_upward() {
        let p = RecurrenceParams::new(rational(1, 10), rational(1, 1), rational(1, 2)).unwrap();
        let t = simulate(rational(-3, 1), &p, 200).unwrap();
        let first_pos = t.values().iter().position(|v| v.is_positive()).unwrap();
        assert!(t.values()[first_pos..].windows(2).all(|w| w[1] > w[0]));
        assert_eq!(
            check_attraction(&p, &rational(1, 1), 100),
            Attraction::NotApplicable
        );
    }

    #[test]
    fn simulate_requires_a_step() {
        assert!(simulate(r(), &example_one(), 0).is_err());
    }

    #[test]
    fn attraction_examples() {
        assert_eq!(
            check_attraction(&example_one(), &r(), 10),
            Attraction::FirstNegative(1)
        );
        let p = RecurrenceParams::new(rational(1, 1000), rational(1, 1), rational(2, 1)).unwrap();
        // From 1 the iterate falls by 1/1000 per step and lands exactly on 0
        // at step 1000. With eps = 2 mu the zero branch then alternates
        // 0 -> 1/1000 -> 0 forever, so no negative value ever appears.
        assert_eq!(
            check_attraction(&p, &rational(1, 1), 100_000),
            Attraction::Counterexample { horizon: 100_000 }
        );
        assert_eq!(
            detect_cycle(&rational(1, 1), &p, DEFAULT_CYCLE_HORIZON),
            Some(Cycle {
                period: 2,
                preperiod: 999
            })
        );
        // Off the lattice through zero the descent overshoots below it.
        assert_eq!(
            check_attraction(&p, &rational(10_001, 10_000), 10_000),
            Attraction::FirstNegative(1001)
        );
    }

    #[test]
    fn next_is_pos_on_example_one() {
        let p = example_one();
        let t = simulate(r(), &p, 600).unwrap();
        assert_eq!(check_next_is_pos(&t, &p), Verdict::Pass);
    }

    #[test]
    fn consecutive_pos_examples() {
        let p = example_one();
        let t = simulate(r(), &p, 600).unwrap();
        assert_eq!(
            check_consecutive_pos(&p, &rational(2, 1), &t),
            Verdict::Pass
        );

        let p = RecurrenceParams::new(rational(3, 7), rational(1, 1), rational(19, 10)).unwrap();
        let t = simulate(r(), &p, 5_000).unwrap();
        assert_eq!(s_choice(&rational(2, 1)).unwrap() + 1, 3);
        assert_eq!(
            check_consecutive_pos(&p, &rational(2, 1), &t),
            Verdict::Pass
        );

        let weak = RecurrenceParams::new(rational(1, 2), rational(1, 1), rational(1, 1)).unwrap();
        let t = simulate(r(), &weak, 10).unwrap();
        assert!(matches!(
            check_consecutive_pos(&weak, &rational(2, 1), &t),
            Verdict::NotApplicable(_)
        ));
        // eps outside (mu, t mu)
        let t = simulate(r(), &example_one(), 10).unwrap();
        assert!(matches!(
            check_consecutive_pos(&example_one(), &rational(3, 2), &t),
            Verdict::NotApplicable(_)
        ));
    }

    #[test]
    fn violation_is_reported_with_index() {
        // A hand-made trajectory that breaks the next-is-positive bound.
        let p = example_one();
        let t = Trajectory::from_values(&[rational(1, 1), rational(-1, 10), rational(1, 10)]);
        assert_eq!(check_next_is_pos(&t, &p), Verdict::Violation(1));
    }

    #[test]
    fn s_choice_rule() {
        assert_eq!(s_choice(&rational(3, 2)).unwrap(), 2);
        assert_eq!(s_choice(&rational(3, 1)).unwrap(), 4);
        assert_eq!(s_choice(&rational(2, 1)).unwrap(), 2);
        assert!(s_choice(&rational(1, 1)).is_err());
        assert!(s_choice(&rational(1, 2)).is_err());
        for num in 101..=10_000 {
            let t = rational(num, 100);
            let s = s_choice(&t).unwrap();
            assert_eq!(s % 2, 0);
            assert!(rational(s as i64 + 1, 1) > t);
        }
    }

    #[test]
    fn two_cycle_through_zero() {
        let p = RecurrenceParams::new(rational(1, 1), rational(1, 1), rational(2, 1)).unwrap();
        assert_eq!(
            detect_cycle(&Rational::zero(), &p, 100),
            Some(Cycle {
                period: 2,
                preperiod: 0
            })
        );
    }

    #[test]
    fn replay_from_interior_point_matches_suffix() {
        let p = RecurrenceParams::new(rational(1, 100), rational(1, 2), rational(7, 5)).unwrap();
        let t = simulate(r(), &p, 2_000).unwrap();
        let tail = simulate(t.values()[777].clone(), &p, 2_000 - 777).unwrap();
        assert_eq!(tail.values(), &t.values()[777..]);
    }

    #[test]
    fn scaled_simulation_matches_naive_stepping() {
        for (eta, mu, eps, t0) in [
            ((1, 2), (1, 1), (3, 2), (1, 1_000_000)),
            ((1, 7), (3, 5), (11, 3), (-2, 9)),
            ((1, 1000), (1, 1), (2, 1), (1, 1)),
            ((1, 3), (1, 2), (0, 1), (0, 1)),
        ] {
            let p = RecurrenceParams::new(
                rational(eta.0, eta.1),
                rational(mu.0, mu.1),
                rational(eps.0, eps.1),
            )
            .unwrap();
            let t = simulate(rational(t0.0, t0.1), &p, 3_000).unwrap();
            let mut x = rational(t0.0, t0.1);
            for i in 0..t.len() {
                assert_eq!(t.value(i), x, "step {i}");
                x = expected_step(&x, &p);
            }
            assert_eq!(t.census_from(0), sign_census(&t.values()));
            assert_eq!(Trajectory::from_values(&t.values()).values(), t.values());
        }
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/2").unwrap(), rational(3, 2));
        assert_eq!(parse_rational("0.001").unwrap(), rational(1, 1000));
        assert_eq!(parse_rational("-1.25").unwrap(), rational(-5, 4));
        assert_eq!(parse_rational("7").unwrap(), rational(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1e-3").is_err());
        assert!(RecurrenceParams::new(Rational::zero(), rational(1, 1), rational(1, 1)).is_err());
        assert!(RecurrenceParams::new(rational(1, 1), rational(1, 1), rational(-1, 1)).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let t = simulate(r(), &example_one(), 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,theta_num,theta_den,theta_float"));
        assert_eq!(lines.next(), Some("0,1,1000000,9.9999999999999995e-7"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&row[..3], &["1", "-249999", "1000000"]);
        assert_eq!(row[3].parse::<f64>().unwrap(), -0.249999);
    }
}
