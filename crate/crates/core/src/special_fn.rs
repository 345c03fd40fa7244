//! Chi-square survival function and log-space helpers used by the bounds.

use crate::error::{Error, Result};

const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Survival function of a chi-square distribution with `k` degrees of
/// freedom, i.e. the upper regularized incomplete gamma `Q(k/2, x/2)`.
pub fn chisq_survival(k: u32, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidDegreesOfFreedom);
    }
    if !(x >= 0.0) {
        return Err(Error::NegativeArgument(x));
    }
    gamma_q(0.5 * k as f64, 0.5 * x)
}

/// Upper regularized incomplete gamma `Q(a, y)` for `a > 0`, `y >= 0`.
fn gamma_q(a: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(1.0);
    }
    if y.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = -y + a * y.ln() - ln_gamma(a);
    if y < a + 1.0 {
        // P(a, y) = prefactor * sum_n y^n / (a (a+1) ... (a+n))
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= y / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                let p = (log_prefactor + sum.ln()).exp();
                return Ok((1.0 - p).clamp(0.0, 1.0));
            }
        }
        Err(Error::NoConvergence)
    } else {
        // modified Lentz on Q(a, y) = prefactor / (y + 1 - a - 1(1-a)/(y + 3 - a - ...))
        let mut b = y + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                return Ok((log_prefactor + h.ln()).exp().clamp(0.0, 1.0));
            }
        }
        Err(Error::NoConvergence)
    }
}

/// `ln(sinh(x) / x)` for `x >= 0`, accurate to a few ulps including near zero.
pub fn log_sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < 0.5 {
        // sinh(x)/x - 1 = x^2/3! + x^4/5! + ...
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 1.0;
        loop {
            term *= x2 / ((2.0 * k) * (2.0 * k + 1.0));
            sum += term;
            if term < sum * 1e-17 || k > 30.0 {
                break;
            }
            k += 1.0;
        }
        sum.ln_1p()
    } else {
        // ln((1 - e^{-2x}) e^x / (2x))
        x + (-(-2.0 * x).exp_m1()).ln() - (2.0 * x).ln()
    }
}

/// Log moment generating function of the uniform distribution on [0, 1],
/// `ln((e^h - 1) / h)`, for `h >= 0`.
pub fn log_mgf_uniform(h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::NegativeParameter(h));
    }
    Ok(log_mgf_uniform_unchecked(h))
}

pub(crate) fn log_mgf_uniform_unchecked(h: f64) -> f64 {
    if h <= 1e-4 {
        (h / 2.0 + h * h / 6.0 + h * h * h / 24.0).ln_1p()
    } else if h < 1.0 {
        // h + ln(1 - e^{-h}) - ln h cancels badly here; use the symmetric form
        0.5 * h + log_sinhc(0.5 * h)
    } else {
        h + (-(-h).exp_m1()).ln() - h.ln()
    }
}
