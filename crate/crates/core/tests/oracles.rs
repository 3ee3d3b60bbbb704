use advlin::losses::{
    adversarial_gradient, adversarial_loss, attacked_margin, loss_value, worst_case_perturbation,
};
use advlin::{AttackBudget, Label, LabeledSample, LinearHypothesis, LossKind};
use proptest::prelude::*;

fn loss_kind() -> impl Strategy<Value = LossKind> {
    prop_oneof![
        Just(LossKind::Linear),
        Just(LossKind::CrossEntropy),
        Just(LossKind::Hinge { margin: 0.0 }),
        Just(LossKind::Hinge { margin: 1.0 }),
    ]
}

/// `(hypothesis, sample, eps)` with `1 <= d <= 4`.
fn instance() -> impl Strategy<Value = (LinearHypothesis, LabeledSample, f64)> {
    (1usize..=4).prop_flat_map(|d| {
        (
            prop::collection::vec(-3.0..3.0f64, d),
            -2.0..2.0f64,
            prop::collection::vec(-4.0..4.0f64, d),
            any::<bool>(),
            0.0..2.0f64,
        )
            .prop_map(|(theta, b, x, pos, eps)| {
                let y = if pos { Label::Pos } else { Label::Neg };
                (
                    LinearHypothesis::new(theta, b).unwrap(),
                    LabeledSample { x, y },
                    eps,
                )
            })
    })
}

fn corner_max(kind: LossKind, h: &LinearHypothesis, s: &LabeledSample, eps: f64) -> f64 {
    let d = h.dim();
    (0..1u32 << d)
        .map(|mask| {
            let x = (0..d)
                .map(|j| s.x[j] + if mask >> j & 1 == 1 { eps } else { -eps })
                .collect();
            loss_value(kind, h, &LabeledSample { x, y: s.y }).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_corner_enumeration(kind in loss_kind(), (h, s, eps) in instance()) {
        let adv = adversarial_loss(kind, &h, &s, AttackBudget::new(eps).unwrap()).unwrap();
        let brute = corner_max(kind, &h, &s, eps);
        prop_assert!((adv - brute).abs() <= 1e-12 * brute.abs().max(1.0), "{adv} vs {brute}");
    }

    #[test]
    fn perturbation_stays_in_ball_and_attains_the_max(kind in loss_kind(), (h, s, eps) in instance()) {
        let e = AttackBudget::new(eps).unwrap();
        let delta = worst_case_perturbation(&h, &s, e).unwrap();
        prop_assert!(delta.iter().all(|d| d.abs() <= eps));
        let x = s.x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let attacked = loss_value(kind, &h, &LabeledSample { x, y: s.y }).unwrap();
        let adv = adversarial_loss(kind, &h, &s, e).unwrap();
        prop_assert!((attacked - adv).abs() <= 1e-12 * adv.abs().max(1.0));
    }

    #[test]
    fn attack_never_lowers_the_loss(kind in loss_kind(), (h, s, eps) in instance()) {
        let adv = adversarial_loss(kind, &h, &s, AttackBudget::new(eps).unwrap()).unwrap();
        let clean = loss_value(kind, &h, &s).unwrap();
        prop_assert!(adv >= clean - 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(kind in loss_kind(), (h, s, eps) in instance()) {
        let e = AttackBudget::new(eps).unwrap();
        let z = attacked_margin(&h, &s, e).unwrap();
        let near_kink = matches!(kind, LossKind::Hinge { margin } if (z - margin).abs() < 1e-3);
        prop_assume!(!near_kink && h.theta.iter().all(|t| t.abs() > 1e-3));
        let (g, gb) = adversarial_gradient(kind, &h, &s, e).unwrap();
        let f = |h: &LinearHypothesis| adversarial_loss(kind, h, &s, e).unwrap();
        let step = 1e-6;
        for j in 0..=h.dim() {
            let (mut hp, mut hm) = (h.clone(), h.clone());
            if j < h.dim() {
                hp.theta[j] += step;
                hm.theta[j] -= step;
            } else {
                hp.b += step;
                hm.b -= step;
            }
            let fd = (f(&hp) - f(&hm)) / (2.0 * step);
            let an = if j < h.dim() { g[j] } else { gb };
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "coord {j}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn zero_budget_is_the_clean_loss(kind in loss_kind(), (h, s, _eps) in instance()) {
        let adv = adversarial_loss(kind, &h, &s, AttackBudget::ZERO).unwrap();
        prop_assert_eq!(adv, loss_value(kind, &h, &s).unwrap());
    }
}
