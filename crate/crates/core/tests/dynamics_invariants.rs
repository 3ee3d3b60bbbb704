use advlin::dynamics::{
    check_consecutive_pos, check_next_is_pos, detect_cycle, rational, simulate, Rational,
    RecurrenceParams, Verdict,
};
use advlin::experiments::default_t_bound;
use num_traits::Signed;
use proptest::prelude::*;

/// Rational triples with `mu < eps <= 12 mu`.
fn dominated() -> impl Strategy<Value = RecurrenceParams> {
    (
        1i64..=50,
        1i64..=1000,
        1i64..=8,
        1i64..=4,
        1i64..=110,
        1i64..=10,
    )
        .prop_map(|(en, ed, mn, md, rn, rd)| {
            let mu = rational(mn, md);
            let ratio = rational(rn + rd, rd).min(rational(12, 1));
            let eps = &mu * ratio;
            RecurrenceParams::new(rational(en, ed), mu, eps).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iterates_stay_in_the_band_once_trapped(p in dominated(), t0 in -1000i64..1000) {
        let theta0 = rational(t0, 997);
        let t = simulate(theta0, &p, 5_000).unwrap();
        let lo = p.eta() * (p.mu() - p.epsilon());
        let hi = p.eta() * (p.mu() + p.epsilon());
        if let Some(n) = t.first_positive_then_negative() {
            for i in n..t.len() {
                let v = t.value(i);
                prop_assert!(v > lo && v < hi, "step {i}: {v} outside ({lo}, {hi})");
            }
        }
    }

    #[test]
    fn proposition_checks_hold_off_the_grid(p in dominated()) {
        let t = simulate(rational(1, 1_000_000), &p, 20_000).unwrap();
        prop_assert_eq!(check_next_is_pos(&t, &p), Verdict::Pass);
        let tb = default_t_bound(&p);
        prop_assert_eq!(check_consecutive_pos(&p, &tb, &t), Verdict::Pass);
    }

    #[test]
    fn cycles_replay_exactly(p in dominated()) {
        let theta0 = rational(1, 1_000_000);
        if let Some(c) = detect_cycle(&theta0, &p, 200_000) {
            let t = simulate(theta0, &p, c.preperiod + 2 * c.period).unwrap();
            prop_assert_eq!(t.value(c.preperiod), t.value(c.preperiod + c.period));
            if c.period > 1 {
                prop_assert_ne!(t.value(c.preperiod), t.value(c.preperiod + 1));
            }
        }
    }
}

#[test]
fn without_adversary_the_recurrence_is_linear() {
    let p = RecurrenceParams::new(
        rational(1, 100),
        rational(3, 2),
        Rational::from_integer(0.into()),
    )
    .unwrap();
    let t = simulate(rational(-1, 1), &p, 1_000).unwrap();
    for i in 0..t.len() {
        assert_eq!(
            t.value(i),
            rational(-1, 1) + rational(3, 200) * Rational::from_integer((i as i64).into())
        );
    }
}

#[test]
fn weak_adversary_never_oscillates() {
    let p = RecurrenceParams::new(rational(1, 10), rational(1, 1), rational(1, 2)).unwrap();
    let t = simulate(rational(-3, 1), &p, 1_000).unwrap();
    let first_pos = (0..t.len()).find(|&i| t.value(i).is_positive()).unwrap();
    assert!((first_pos..t.len()).all(|i| t.value(i).is_positive()));
}
