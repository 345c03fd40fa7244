#![allow(dead_code)]

use midp::DiscreteNull;
use rand::Rng;

/// Null with `k` distinct atoms whose probabilities are bounded away from zero.
pub fn random_null<R: Rng>(rng: &mut R, k: usize) -> DiscreteNull {
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    DiscreteNull::new(weights.iter().enumerate().map(|(i, w)| (i as f64, w / total))).unwrap()
}

/// Atom count drawn uniformly from `lo..=hi`.
pub fn random_null_between<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> DiscreteNull {
    let k = rng.gen_range(lo..=hi);
    random_null(rng, k)
}

/// `S_{2n}(x) = e^{-x/2} sum_{k<n} (x/2)^k / k!`, summed in log space with
/// compensation. Independent of the incomplete gamma code in the library.
pub fn chisq_even_survival_oracle(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let y = 0.5 * x;
    let logs: Vec<f64> = (0..n)
        .scan(0.0f64, |log_fact, k| {
            if k > 0 {
                *log_fact += (k as f64).ln();
            }
            Some(k as f64 * y.ln() - *log_fact - y)
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for l in &logs {
        let term = (l - top).exp() - comp;
        let next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    (top + sum.ln()).exp()
}

/// Brute-force minimum of `f` over `h = 0, step, 2 step, ..., h_max`.
pub fn grid_min<F: Fn(f64) -> f64>(f: F, step: f64, h_max: f64) -> f64 {
    let steps = (h_max / step).round() as usize;
    (0..=steps)
        .map(|i| f(i as f64 * step))
        .fold(f64::INFINITY, f64::min)
}
