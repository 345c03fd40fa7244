//! Conservative combination of independent mid-p-values.
//!
//! Each function returns an upper bound on a null tail probability, which
//! can be used directly as a combined p-value. Products are accumulated as
//! sums of logs and exponentiated once, then clamped to [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::minimize_nonneg;
use crate::special_fn::{chisq_survival, log_mgf_uniform_unchecked, log_sinhc};

/// Largest standard deviation of a sub-uniform variable, `12^{-1/2}`.
pub const MAX_SIGMA: f64 = 0.288_675_134_594_812_9;

/// Which bound or test produced a [`CombinedResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Mean of mid-p-values, Chernoff parameter optimized.
    MeanBound,
    /// Mean of mid-p-values, `exp(-6 n t^2)`.
    MeanBoundClosed,
    /// Barnard's standardized sum, Chernoff parameter optimized.
    StdSumBound,
    /// Barnard's standardized sum, geometric-mean closed form.
    StdSumBoundClosed,
    /// Fisher's method on ordinary p-values with the chi-square reference.
    FisherStandard,
    /// Fisher's statistic on mid-p-values with the sub-uniform bound `u_n`.
    FisherSubUniform,
    /// Fisher's method on randomized p-values.
    FisherRandomized,
    /// Threshold test on `1/2 - mean(q)`.
    DeltaTest,
    /// Hoeffding's `exp(-2 n t^2)` on the mean, for comparison.
    HoeffdingReference,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::MeanBound,
        Method::MeanBoundClosed,
        Method::StdSumBound,
        Method::StdSumBoundClosed,
        Method::FisherStandard,
        Method::FisherSubUniform,
        Method::FisherRandomized,
        Method::DeltaTest,
        Method::HoeffdingReference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MeanBound => "MeanBound",
            Method::MeanBoundClosed => "MeanBoundClosed",
            Method::StdSumBound => "StdSumBound",
            Method::StdSumBoundClosed => "StdSumBoundClosed",
            Method::FisherStandard => "FisherStandard",
            Method::FisherSubUniform => "FisherSubUniform",
            Method::FisherRandomized => "FisherRandomized",
            Method::DeltaTest => "DeltaTest",
            Method::HoeffdingReference => "HoeffdingReference",
        }
    }

    pub fn needs_sigma(self) -> bool {
        matches!(self, Method::StdSumBound | Method::StdSumBoundClosed)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one combined test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedResult {
    pub method: Method,
    pub statistic: f64,
    pub pvalue_bound: f64,
    pub h_star: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
}

/// A bound together with the Chernoff parameter that achieved it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedBound {
    pub bound: f64,
    pub h_star: f64,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

fn check_t(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeT(t))
    }
}

fn clamp_exp(log_value: f64) -> f64 {
    log_value.exp().clamp(0.0, 1.0)
}

/// Hoeffding's bound `exp(-2 n t^2)` on `P(1/2 - mean >= t)`.
pub fn hoeffding_bound(n: usize, t: f64) -> Result<f64> {
    check_n(n)?;
    check_t(t)?;
    Ok(clamp_exp(-2.0 * n as f64 * t * t))
}

/// `exp(-6 n t^2)`, a bound on `P(1/2 - mean >= t)` for `n` independent
/// sub-uniform variables. For `t > 1/2` the event is impossible; the formula
/// is still returned since it remains a valid bound.
pub fn mean_bound_closed(n: usize, t: f64) -> Result<f64> {
    check_n(n)?;
    check_t(t)?;
    Ok(clamp_exp(-6.0 * n as f64 * t * t))
}

/// `exp(-12 n t^2) {sinh(6t) / (6t)}^n`, the Chernoff bound at `h = 12 t`.
pub fn mean_bound_sinh(n: usize, t: f64) -> Result<f64> {
    check_n(n)?;
    check_t(t)?;
    Ok(clamp_exp(n as f64 * (-12.0 * t * t + log_sinhc(6.0 * t))))
}

/// Per-variable log of `2 e^{-ht} sinh(h/2) / h`.
pub fn mean_log_objective(t: f64, h: f64) -> f64 {
    -h * t + log_sinhc(0.5 * h)
}

/// `min_{h >= 0} {2 e^{-ht} sinh(h/2) / h}^n`.
pub fn mean_bound_opt(n: usize, t: f64) -> Result<OptimizedBound> {
    check_n(n)?;
    check_t(t)?;
    if t == 0.0 {
        return Ok(OptimizedBound {
            bound: 1.0,
            h_star: 0.0,
        });
    }
    let nf = n as f64;
    let objective = |h: f64| nf * mean_log_objective(t, h);
    let (mut h_star, mut best) = minimize_nonneg(objective, 50.0 / t.max(1e-6));
    // the closed-form choice h = 12t is always admissible
    let at_closed = objective(12.0 * t);
    if at_closed < best {
        h_star = 12.0 * t;
        best = at_closed;
    }
    Ok(OptimizedBound {
        bound: clamp_exp(best),
        h_star,
    })
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() {
        return Err(Error::EmptyInput);
    }
    match sigmas
        .iter()
        .find(|&&s| !(s > 0.0 && s <= MAX_SIGMA + 1e-12))
    {
        Some(&s) => Err(Error::SigmaOutOfRange(s)),
        None => Ok(()),
    }
}

/// Distinct standard deviations with multiplicities.
fn group_sigmas(sigmas: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = sigmas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for s in sorted {
        match groups.last_mut() {
            Some((v, count)) if *v == s => *count += 1.0,
            _ => groups.push((s, 1.0)),
        }
    }
    groups
}

/// Log of one factor of the standardized-sum bound:
/// `exp[-h{t + 1/(2 sigma)}] {(e^{h/sigma} - 1)/(h/sigma) + h^2 (1/2 - 1/(24 sigma^2))}`.
pub fn std_sum_log_factor(sigma: f64, t: f64, h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    let y = h / sigma;
    let log_a = log_mgf_uniform_unchecked(y);
    let c = h * h * (0.5 - 1.0 / (24.0 * sigma * sigma));
    -h * t + log_sinhc(0.5 * y) + (c * (-log_a).exp()).ln_1p()
}

fn geometric_mean(sigmas: &[f64]) -> f64 {
    (sigmas.iter().map(|s| s.ln()).sum::<f64>() / sigmas.len() as f64).exp()
}

/// Optimized bound on `P(mean_i (1/2 - Q_i)/sigma_i >= t)`.
pub fn std_sum_bound_opt(sigmas: &[f64], t: f64) -> Result<OptimizedBound> {
    check_sigmas(sigmas)?;
    check_t(t)?;
    if t == 0.0 {
        return Ok(OptimizedBound {
            bound: 1.0,
            h_star: 0.0,
        });
    }
    let groups = group_sigmas(sigmas);
    let objective = |h: f64| -> f64 {
        groups
            .iter()
            .map(|&(s, count)| count * std_sum_log_factor(s, t, h))
            .sum()
    };
    let sigma_bar = geometric_mean(sigmas);
    let (mut h_star, mut best) = minimize_nonneg(objective, 50.0 / (sigma_bar * t).max(1e-6));
    // the choice behind the closed form, h = 12 sigma_bar^2 t
    let h_closed = 12.0 * sigma_bar * sigma_bar * t;
    let at_closed = objective(h_closed);
    if at_closed < best {
        h_star = h_closed;
        best = at_closed;
    }
    Ok(OptimizedBound {
        bound: clamp_exp(best),
        h_star,
    })
}

/// `exp{-6 n (sigma_bar t)^2}` with `sigma_bar` the geometric mean of the
/// standard deviations.
///
/// Only guaranteed when all standard deviations are equal. With unequal
/// ones the geometric-mean step goes the wrong way and the value can fall
/// far below the true tail probability; see [`std_sum_bound_harmonic`].
pub fn std_sum_bound_closed(sigmas: &[f64], t: f64) -> Result<f64> {
    check_sigmas(sigmas)?;
    check_t(t)?;
    let st = geometric_mean(sigmas) * t;
    Ok(clamp_exp(-6.0 * sigmas.len() as f64 * st * st))
}

/// `exp{-6 n s^2 t^2}` with `s^2 = n / sum sigma_i^{-2}`, the harmonic mean
/// of the variances. Valid for any standard deviations: it follows from
/// `ln(sinh x / x) <= x^2/6` and the choice `h = 12 s^2 t`. Coincides with
/// [`std_sum_bound_closed`] when the standard deviations are equal.
pub fn std_sum_bound_harmonic(sigmas: &[f64], t: f64) -> Result<f64> {
    check_sigmas(sigmas)?;
    check_t(t)?;
    let n = sigmas.len() as f64;
    let s2 = n / sigmas.iter().map(|s| 1.0 / (s * s)).sum::<f64>();
    Ok(clamp_exp(-6.0 * n * s2 * t * t))
}

/// Barnard's average standardized mid-p-value `n^{-1} sum (1/2 - q_i)/sigma_i`.
pub fn barnard_statistic(q: &[f64], sigmas: &[f64]) -> Result<f64> {
    check_unit(q)?;
    check_sigmas(sigmas)?;
    if q.len() != sigmas.len() {
        return Err(Error::LengthMismatch(q.len(), sigmas.len()));
    }
    let total: f64 = q.iter().zip(sigmas).map(|(&qi, &s)| (0.5 - qi) / s).sum();
    Ok(total / q.len() as f64)
}

fn check_unit(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    match q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&v) => Err(Error::OutOfUnitInterval(v)),
        None => Ok(()),
    }
}

/// `-2 sum ln q_i`.
pub fn fisher_statistic(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for &v in q {
        if !(v > 0.0) {
            return Err(Error::NonPositivePValue(v));
        }
        if v > 1.0 {
            return Err(Error::OutOfUnitInterval(v));
        }
        total -= 2.0 * v.ln();
    }
    Ok(total)
}

/// Chi-square tail at Fisher's statistic with `2n` degrees of freedom.
pub fn fisher_standard_p(p: &[f64]) -> Result<f64> {
    let x = fisher_statistic(p)?;
    chisq_survival(2 * p.len() as u32, x)
}

/// Same reference distribution applied to randomized p-values, which is exact.
pub fn fisher_randomized_p(r: &[f64]) -> Result<f64> {
    fisher_standard_p(r)
}

/// `u_n(x)`: tail bound for Fisher's statistic of `n` independent
/// sub-uniform variables. Equal to 1 below `x = 2n`.
pub fn fisher_subuniform_bound(n: usize, x: f64) -> Result<f64> {
    check_n(n)?;
    if !(x >= 0.0) {
        return Err(Error::NegativeArgument(x));
    }
    let nf = n as f64;
    if x < 2.0 * nf {
        return Ok(1.0);
    }
    let shifted = chisq_survival(2 * n as u32, x - 2.0 * nf * std::f64::consts::LN_2)?;
    let excess = 0.5 * (x - 2.0 * nf);
    let chebyshev = nf / (nf + excess * excess);
    let chernoff = fisher_chernoff_bound(n, x)?;
    Ok(shifted.min(chebyshev).min(chernoff).clamp(0.0, 1.0))
}

/// `exp{n - x/2 - n ln(2n/x)}`, the closed-form Chernoff part of `u_n`,
/// usable on its own as a conservative score for a product of mid-p-values.
/// Equal to 1 below `x = 2n`.
pub fn fisher_chernoff_bound(n: usize, x: f64) -> Result<f64> {
    check_n(n)?;
    if !(x >= 0.0) {
        return Err(Error::NegativeArgument(x));
    }
    let nf = n as f64;
    if x <= 2.0 * nf {
        return Ok(1.0);
    }
    Ok(clamp_exp(nf - 0.5 * x - nf * (2.0 * nf / x).ln()))
}

/// `u_n` evaluated at Fisher's statistic of the mid-p-values.
pub fn fisher_subuniform_p(q: &[f64]) -> Result<f64> {
    let x = fisher_statistic(q)?;
    fisher_subuniform_bound(q.len(), x)
}

/// Result of the threshold test on `1/2 - mean(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaOutcome {
    pub delta: f64,
    pub threshold: f64,
    pub reject: bool,
}

/// `c_{n,alpha} = (-ln(alpha) / 6n)^{1/2}`.
pub fn delta_threshold(n: usize, alpha: f64) -> Result<f64> {
    check_n(n)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok((-alpha.ln() / (6.0 * n as f64)).sqrt())
}

/// Rejects the global null when `1/2 - mean(q) >= c_{n,alpha}`.
pub fn delta_test(q: &[f64], alpha: f64) -> Result<DeltaOutcome> {
    check_unit(q)?;
    let threshold = delta_threshold(q.len(), alpha)?;
    let delta = 0.5 - mean(q);
    Ok(DeltaOutcome {
        delta,
        threshold,
        reject: delta >= threshold,
    })
}

fn mean(q: &[f64]) -> f64 {
    q.iter().sum::<f64>() / q.len() as f64
}

/// Applies `method` to a batch of values.
///
/// `values` are mid-p-values, except for `FisherStandard` (ordinary
/// p-values) and `FisherRandomized` (randomized p-values). `sigmas` is
/// required by the standardized-sum methods; `alpha` only affects
/// `DeltaTest`.
pub fn combine(
    method: Method,
    values: &[f64],
    sigmas: Option<&[f64]>,
    alpha: f64,
) -> Result<CombinedResult> {
    let n = values.len();
    let mut out = CombinedResult {
        method,
        statistic: 0.0,
        pvalue_bound: 1.0,
        h_star: None,
        n,
        threshold: None,
        reject: None,
    };
    match method {
        Method::MeanBound
        | Method::MeanBoundClosed
        | Method::HoeffdingReference
        | Method::DeltaTest => {
            check_unit(values)?;
            let delta = 0.5 - mean(values);
            let t = delta.max(0.0);
            out.statistic = delta;
            match method {
                Method::MeanBound => {
                    let opt = mean_bound_opt(n, t)?;
                    out.pvalue_bound = opt.bound;
                    out.h_star = Some(opt.h_star);
                }
                Method::MeanBoundClosed => out.pvalue_bound = mean_bound_closed(n, t)?,
                Method::HoeffdingReference => out.pvalue_bound = hoeffding_bound(n, t)?,
                _ => {
                    let outcome = delta_test(values, alpha)?;
                    out.pvalue_bound = mean_bound_closed(n, t)?;
                    out.threshold = Some(outcome.threshold);
                    out.reject = Some(outcome.reject);
                }
            }
        }
        Method::StdSumBound | Method::StdSumBoundClosed => {
            let sigmas = sigmas.ok_or(Error::LengthMismatch(n, 0))?;
            let d = barnard_statistic(values, sigmas)?;
            let t = d.max(0.0);
            out.statistic = d;
            if method == Method::StdSumBound {
                let opt = std_sum_bound_opt(sigmas, t)?;
                out.pvalue_bound = opt.bound;
                out.h_star = Some(opt.h_star);
            } else {
                out.pvalue_bound = std_sum_bound_closed(sigmas, t)?;
            }
        }
        Method::FisherStandard | Method::FisherRandomized => {
            out.statistic = fisher_statistic(values)?;
            out.pvalue_bound = chisq_survival(2 * n as u32, out.statistic)?;
        }
        Method::FisherSubUniform => {
            out.statistic = fisher_statistic(values)?;
            out.pvalue_bound = fisher_subuniform_bound(n, out.statistic)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_numbers() {
        let closed = mean_bound_closed(100, 0.1).unwrap();
        assert!((closed - (-6.0f64).exp()).abs() < 1e-15);
        assert!((0.00247..=0.00249).contains(&closed));
        let hoeffding = hoeffding_bound(100, 0.1).unwrap();
        assert!((0.135..=0.136).contains(&hoeffding));
    }

    #[test]
    fn zero_deviation_is_one() {
        for n in [1, 7, 100] {
            assert_eq!(mean_bound_closed(n, 0.0).unwrap(), 1.0);
            assert_eq!(mean_bound_sinh(n, 0.0).unwrap(), 1.0);
            let opt = mean_bound_opt(n, 0.0).unwrap();
            assert_eq!((opt.bound, opt.h_star), (1.0, 0.0));
        }
        assert_eq!(std_sum_bound_closed(&[0.2, 0.25], 0.0).unwrap(), 1.0);
        assert_eq!(std_sum_bound_opt(&[0.2, 0.25], 0.0).unwrap().bound, 1.0);
    }

    #[test]
    fn negative_t_rejected() {
        assert_eq!(mean_bound_closed(3, -0.1), Err(Error::NegativeT(-0.1)));
        assert_eq!(mean_bound_sinh(3, -0.1), Err(Error::NegativeT(-0.1)));
        assert!(mean_bound_opt(3, -0.1).is_err());
        assert!(std_sum_bound_opt(&[0.2], -1.0).is_err());
    }

    #[test]
    fn sigma_range() {
        assert_eq!(std_sum_bound_closed(&[0.0], 1.0), Err(Error::SigmaOutOfRange(0.0)));
        assert_eq!(std_sum_bound_closed(&[0.3], 1.0), Err(Error::SigmaOutOfRange(0.3)));
        assert!(std_sum_bound_closed(&[MAX_SIGMA], 1.0).is_ok());
    }

    #[test]
    fn uniform_sigmas_reduce_to_mean_form() {
        let sig = vec![MAX_SIGMA; 4];
        let t = 0.8;
        let got = std_sum_bound_closed(&sig, t).unwrap();
        assert!((got - (-4.0 * t * t / 2.0f64).exp()).abs() < 1e-14);
        assert_eq!(std_sum_bound_harmonic(&sig, t).unwrap(), got);
        let mixed = [0.1, 0.25];
        assert!(std_sum_bound_harmonic(&mixed, t).unwrap() > std_sum_bound_closed(&mixed, t).unwrap());
    }

    #[test]
    fn sinh_bound_single_term() {
        // exp(-0.75) sinh(1.5) / 1.5, 30-digit reference
        let want = 0.670_533_597_350_270_1;
        let got = mean_bound_sinh(1, 0.25).unwrap();
        assert!((got - want).abs() < 1e-14, "{got}");
    }

    #[test]
    fn fisher_statistic_values() {
        assert_eq!(fisher_statistic(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((fisher_statistic(&[(-1.0f64).exp()]).unwrap() - 2.0).abs() < 1e-15);
        let want = -2.0 * (0.25f64.ln() + 0.75f64.ln());
        assert!((fisher_statistic(&[0.25, 0.75]).unwrap() - want).abs() < 1e-15);
        assert!((want - 3.347_952_867_143_343).abs() < 1e-12);
        assert_eq!(fisher_statistic(&[0.5, 0.0]), Err(Error::NonPositivePValue(0.0)));
    }

    #[test]
    fn fisher_standard_single() {
        let p = fisher_standard_p(&[(-1.0f64).exp()]).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(fisher_standard_p(&[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn u_n_at_threshold() {
        let got = fisher_subuniform_bound(1, 2.0).unwrap();
        let want = (-(1.0 - std::f64::consts::LN_2)).exp();
        assert!((got - want).abs() < 1e-14);
        assert!((got - 0.7357).abs() < 1e-4);
        assert_eq!(fisher_subuniform_bound(5, 9.99).unwrap(), 1.0);
    }

    #[test]
    fn chernoff_part_of_u_n() {
        assert_eq!(fisher_chernoff_bound(3, 5.0).unwrap(), 1.0);
        assert_eq!(fisher_chernoff_bound(3, 6.0).unwrap(), 1.0);
        // n = 1, x = 4: exp(1 - 2 - ln(1/2)) = 2/e
        let got = fisher_chernoff_bound(1, 4.0).unwrap();
        assert!((got - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert!(fisher_subuniform_bound(1, 4.0).unwrap() <= got);
    }

    #[test]
    fn u_n_large_n() {
        // exp(-100 + 100 ln 2) with 40-digit arithmetic
        let want = 4.715_756_543_897_429e-14;
        let got = fisher_subuniform_bound(100, 400.0).unwrap();
        assert!(((got - want) / want).abs() < 1e-10, "{got}");
    }

    #[test]
    fn delta_threshold_value() {
        let c = delta_threshold(100, 0.05).unwrap();
        assert!((c - 0.070_66).abs() < 1e-5);
        assert!((mean_bound_closed(100, c).unwrap() - 0.05).abs() < 1e-14);
        let half = vec![0.5; 30];
        let out = delta_test(&half, 0.05).unwrap();
        assert_eq!(out.delta, 0.0);
        assert!(!out.reject);
        assert_eq!(delta_test(&half, 0.0), Err(Error::InvalidAlpha(0.0)));
        assert_eq!(delta_test(&half, 1.5), Err(Error::InvalidAlpha(1.5)));
    }

    #[test]
    fn combine_dispatch() {
        let q = vec![0.4; 100];
        let r = combine(Method::MeanBoundClosed, &q, None, 0.05).unwrap();
        assert!((r.pvalue_bound - 0.002_479).abs() < 1e-6);
        assert!((r.statistic - 0.1).abs() < 1e-12);
        let r = combine(Method::DeltaTest, &q, None, 0.05).unwrap();
        assert_eq!(r.reject, Some(true));
        assert!(combine(Method::StdSumBound, &q, None, 0.05).is_err());
        assert!(matches!(
            combine(Method::FisherSubUniform, &[0.0, 0.5], None, 0.05),
            Err(Error::NonPositivePValue(_))
        ));
    }

    #[test]
    fn json_field_names() {
        let q = vec![0.3, 0.2];
        let r = combine(Method::FisherSubUniform, &q, None, 0.05).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["h_star", "method", "n", "pvalue_bound", "statistic"]);
        assert_eq!(obj["method"], "FisherSubUniform");
    }
}
