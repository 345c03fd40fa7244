mod common;

use midp::special_fn::{chisq_survival, log_mgf_uniform, log_sinhc};
use proptest::prelude::*;

#[test]
fn even_dof_matches_series_oracle() {
    let mut worst = 0.0f64;
    for n in [1u32, 2, 3, 5, 10, 25, 50, 100, 150, 200] {
        for i in 0..=400 {
            let x = i as f64 * 10.0;
            let got = chisq_survival(2 * n, x).unwrap();
            let want = common::chisq_even_survival_oracle(n, x);
            worst = worst.max((got - want).abs());
        }
        for x in [0.01, 0.5, 1.5, 2.0 * n as f64 - 0.3, 2.0 * n as f64 + 0.7] {
            let got = chisq_survival(2 * n, x).unwrap();
            let want = common::chisq_even_survival_oracle(n, x);
            worst = worst.max((got - want).abs());
        }
    }
    assert!(worst < 1e-12, "worst abs error {worst}");
}

#[test]
fn even_dof_relative_accuracy_in_tail() {
    for n in [1u32, 10, 100] {
        for x in [50.0, 200.0, 600.0] {
            let want = common::chisq_even_survival_oracle(n, x);
            if want > 1e-290 {
                let got = chisq_survival(2 * n, x).unwrap();
                assert!(((got - want) / want).abs() < 1e-10, "n = {n}, x = {x}");
            }
        }
    }
}

#[test]
fn survival_decreasing_in_x_increasing_in_k() {
    for k in [1u32, 2, 3, 7, 20, 100] {
        let mut prev = 1.0;
        for i in 1..=300 {
            let x = i as f64 * 0.5;
            let s = chisq_survival(k, x).unwrap();
            assert!(s <= prev, "k = {k}, x = {x}");
            if prev > 1e-300 && prev < 1.0 {
                assert!(s < prev);
            }
            prev = s;
        }
    }
    for i in 1..=100 {
        let x = i as f64;
        for k in 1u32..60 {
            assert!(chisq_survival(k + 1, x).unwrap() >= chisq_survival(k, x).unwrap());
        }
    }
}

#[test]
fn log_mgf_convex_and_above_mean() {
    let step = 1e-3;
    let grid: Vec<f64> = (0..=20_000).map(|i| i as f64 * step).collect();
    let vals: Vec<f64> = grid.iter().map(|&h| log_mgf_uniform(h).unwrap()).collect();
    for w in vals.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
    }
    for (&h, &v) in grid.iter().zip(&vals) {
        // Jensen: E e^{hU} >= e^{h/2}
        assert!(v >= 0.5 * h - 1e-15);
    }
}

#[test]
fn log_mgf_switch_point_continuity() {
    let s = 1e-4;
    for k in 1..=20 {
        let d = k as f64 * 1e-16;
        let below = log_mgf_uniform(s - d).unwrap();
        let above = log_mgf_uniform(s + d).unwrap();
        assert!((above - below).abs() < 1e-12);
    }
    // one-sided limits against the closed form at the switch
    let closed = (s.exp_m1() / s).ln();
    assert!((log_mgf_uniform(s).unwrap() - closed).abs() < 1e-12);
}

proptest! {
    #[test]
    fn sinhc_matches_direct_form(x in 0.6f64..300.0) {
        let direct = (x.sinh() / x).ln();
        prop_assert!((log_sinhc(x) - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn mgf_matches_direct_form(h in 1e-3f64..600.0) {
        let direct = (h.exp_m1() / h).ln();
        prop_assert!((log_mgf_uniform(h).unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }
}
