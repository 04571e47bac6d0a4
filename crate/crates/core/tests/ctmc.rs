use feller::exact_ctmc::{
    chapman_kolmogorov_residual, semigroup_apply, transition_prob, transition_row, CtmcState, ExactCtmc,
};
use feller::{Ball, McConfig, StatePoint, TestFunction};
use feller::montecarlo::estimate_hit;
use proptest::prelude::*;
use std::f64::consts::E;

fn nonzero_state() -> impl Strategy<Value = CtmcState> {
    (2u32..200, any::<bool>()).prop_map(|(n, low)| if low { CtmcState::Low(n) } else { CtmcState::High(n) })
}

proptest! {
    #[test]
    fn rows_sum_to_one(i in nonzero_state(), t in 0.0..1e4f64) {
        let total: f64 = transition_row(i, t).unwrap().iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(transition_row(i, t).unwrap().iter().all(|(_, p)| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn absorption_is_monotone(i in nonzero_state(), mut ts in prop::collection::vec(0.0..500.0f64, 2..30)) {
        ts.sort_by(f64::total_cmp);
        let p: Vec<f64> = ts.iter().map(|&t| transition_prob(i, CtmcState::Zero, t).unwrap()).collect();
        prop_assert!(p.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn chapman_kolmogorov(n in 2u32..100, s in 0.0..50.0f64, t in 0.0..50.0f64) {
        prop_assert!(chapman_kolmogorov_residual(n, s, t).unwrap() < 1e-12);
    }
}

#[test]
fn witness_exceeds_floor_for_every_level() {
    let f = TestFunction::min_one();
    for n in 2u32..=500 {
        let t = f64::from(n);
        let w = semigroup_apply(&f, CtmcState::Low(n), t).unwrap() - semigroup_apply(&f, CtmcState::Zero, t).unwrap();
        let expected = (1.0 + 1.0 / t) / E;
        assert!((w - expected).abs() < 1e-12, "n = {n}");
        assert!(w >= 1.0 / E);
    }
}

#[test]
fn eventual_continuity_on_late_windows() {
    let f = TestFunction::min_one();
    for n in [2u32, 3, 7, 20] {
        let t0 = 10.0 * f64::from(n);
        let worst = (0..=900)
            .map(|k| t0 + f64::from(k) * t0 / 100.0)
            .map(|t| semigroup_apply(&f, CtmcState::Low(n), t).unwrap())
            .fold(0.0, f64::max);
        assert!(worst <= 11.0 * (-10.0f64).exp() + 1e-15);
    }
}

#[test]
fn sampled_marginals_match_table() {
    let mc = McConfig::new(20_000, 77).monte_carlo_only();
    let cases = [
        (CtmcState::Low(3), 2.0),
        (CtmcState::Low(3), 6.0),
        (CtmcState::High(5), 4.0),
        (CtmcState::Low(10), 25.0),
    ];
    for (i, t) in cases {
        for j in [i, CtmcState::High(i.level().unwrap()), CtmcState::Zero] {
            let exact = transition_prob(i, j, t).unwrap();
            // radius below the gap between distinct chain states
            let ball = Ball::new(j.embed(), 1e-6).unwrap();
            let est = estimate_hit(&ExactCtmc, i.embed(), t, ball, &mc).unwrap();
            assert!(est.brackets(exact), "{i} -> {j} at {t}: {est:?} vs {exact}");
        }
    }
}

#[test]
fn non_chain_points_are_rejected() {
    let mc = McConfig::new(10, 0).monte_carlo_only();
    let ball = Ball::new(StatePoint::ZERO, 0.1).unwrap();
    assert!(estimate_hit(&ExactCtmc, StatePoint::new(0.3).unwrap(), 1.0, ball, &mc).is_err());
}
