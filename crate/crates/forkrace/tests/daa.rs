use forkrace::analytic::{self, Model};
use forkrace::daa::{absolute_revenue, expected_t1, profitable_delay, profitable_delay_scan, Delay, PERIOD_BLOCKS};
use forkrace::{MinerConfig, RevenueReport};
use proptest::prelude::*;

fn n4(a: f64) -> RevenueReport {
    analytic::revenue(Model::N4, &MinerConfig::symmetric(2, a, 4).unwrap()).unwrap()
}

#[test]
fn hundred_periods() {
    let rep = n4(0.22);
    let abs = absolute_revenue(&rep, 100).unwrap()[0];
    assert!((abs - 0.2209).abs() < 5e-4);
    assert!((rep.r_hat[0] - 0.2217).abs() < 5e-4);
    let gap = rep.r_hat[0] - absolute_revenue(&rep, 1000).unwrap()[0];
    assert!((gap - 0.0001).abs() < 5e-5, "{gap}");
}

#[test]
fn long_run_limit() {
    let rep = n4(0.3);
    let abs = absolute_revenue(&rep, 10_000_000).unwrap();
    for (a, r) in abs.iter().zip(&rep.r_hat) {
        assert!((a - r).abs() < 1e-6);
    }
}

#[test]
fn delays() {
    assert_eq!(profitable_delay(&n4(0.22), 0, 0.22), Delay::Periods(51));
    assert_eq!(Delay::Periods(51).days(), Some(714.0));
    assert_eq!(profitable_delay(&n4(0.33), 0, 0.33), Delay::Periods(5));
    let single = analytic::revenue(Model::Single, &MinerConfig::symmetric(1, 0.255, 2).unwrap()).unwrap();
    assert_eq!(profitable_delay(&single, 0, 0.255), Delay::Periods(26));
    assert_eq!(profitable_delay(&n4(0.2), 0, 0.2), Delay::Never);
    assert_eq!(Delay::Never.days(), None);
}

#[test]
fn first_period_is_longer() {
    let rep = n4(0.25);
    let t = expected_t1(&rep, PERIOD_BLOCKS).unwrap();
    assert!(t > PERIOD_BLOCKS);
}

proptest! {
    #[test]
    fn closed_form_equals_scan(a in 0.05..0.45f64, n4_model in any::<bool>()) {
        let cfg = MinerConfig::symmetric(2, a, if n4_model { 4 } else { 2 }).unwrap();
        let rep = analytic::revenue(analytic::default_model(&cfg), &cfg).unwrap();
        prop_assert_eq!(profitable_delay(&rep, 0, a), profitable_delay_scan(&rep, 0, a, 1_000_000));
    }

    #[test]
    fn monotone_and_first_period_loss(a in 0.05..0.45f64) {
        let rep = n4(a);
        let xs: Vec<f64> = [1u64, 2, 5, 10, 100, 1000].iter().map(|&k| absolute_revenue(&rep, k).unwrap()[0]).collect();
        prop_assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        // distance to the limit shrinks like 1/K
        let d = |k: u64| (rep.r_hat[0] - absolute_revenue(&rep, k).unwrap()[0]).abs();
        prop_assert!(d(1000) <= d(100) / 9.0 + 1e-15);
        if rep.r_tot > rep.r_vld && rep.r_hat[0] > a {
            prop_assert!(xs[0] < a);
        }
    }
}
