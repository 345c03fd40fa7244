//! Integrated distribution functions and sub-uniformity in the convex order.
//!
//! A distribution on [0, 1] is sub-uniform when its integrated distribution
//! function `phi(t) = int_0^t F(x) dx` stays below `t^2 / 2` and reaches
//! `1/2` at `t = 1`. For finite distributions `phi` is piecewise linear, so
//! the check below is exact rather than grid-based.

use std::io::Write;

use serde::Serialize;

use crate::discrete_null::UnitDistribution;
use crate::error::{Error, Result};

/// Classification tolerance for touch points and violations.
pub const CERT_TOL: f64 = 1e-10;

/// `t^2 / 2`, the integrated distribution function of the uniform law.
pub fn uniform_idf(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    0.5 * t * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knot {
    pub t: f64,
    pub phi: f64,
    /// Right derivative of `phi` at `t`, which is `F(t)`.
    pub right_slope: f64,
}

/// Exact integrated distribution function of a finite distribution on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinearIDF {
    knots: Vec<Knot>,
}

impl PiecewiseLinearIDF {
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// Evaluates `phi(t)`; zero left of the origin, slope one right of 1.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let idx = self.knots.partition_point(|k| k.t <= t) - 1;
        let k = &self.knots[idx];
        k.phi + k.right_slope * (t - k.t)
    }

    /// Points where `phi(t) - t^2/2` can attain its maximum: every knot and
    /// the clamped stationary point `t* = slope` of each segment.
    fn candidates(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.knots.iter().map(|k| k.t).collect();
        for pair in self.knots.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            out.push(a.right_slope.clamp(a.t, b.t));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `(t, phi(t) - t^2/2)` at the maximizer of the excess over `t^2/2`.
    pub fn sup_excess(&self) -> (f64, f64) {
        self.candidates()
            .into_iter()
            .map(|t| (t, self.eval(t) - uniform_idf(t)))
            .fold((0.0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    /// Writes `t,phi,slope` rows for plotting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        wtr.write_record(["t", "phi", "slope"]).map_err(io)?;
        for k in &self.knots {
            wtr.write_record([k.t.to_string(), k.phi.to_string(), k.right_slope.to_string()])
                .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Builds the integrated distribution function with knots at the atoms and
/// at 0 and 1.
pub fn idf_of(dist: &UnitDistribution) -> PiecewiseLinearIDF {
    let atoms = dist.atoms();
    let mut ts: Vec<f64> = Vec::with_capacity(atoms.len() + 2);
    ts.push(0.0);
    ts.extend(atoms.iter().map(|a| a.value));
    ts.push(1.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let mut knots = Vec::with_capacity(ts.len());
    let mut mass = 0.0;
    let mut moment = 0.0;
    let mut next = 0;
    for t in ts {
        while next < atoms.len() && atoms[next].value <= t {
            mass += atoms[next].prob;
            moment += atoms[next].prob * atoms[next].value;
            next += 1;
        }
        knots.push(Knot {
            t,
            phi: (mass * t - moment).max(0.0),
            right_slope: mass.min(1.0),
        });
    }
    PiecewiseLinearIDF { knots }
}

/// Outcome of a sub-uniformity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubUniformCertificate {
    pub is_subuniform: bool,
    /// `sup_t phi(t) - t^2/2`; positive means a violation.
    pub max_violation: f64,
    /// `phi(1) - 1/2`, which equals `1/2 - mean`.
    pub mean_gap: f64,
    /// Points in (0, 1] where `phi(t) = t^2/2` within tolerance. The origin,
    /// where every distribution touches, is omitted.
    pub touch_points: Vec<f64>,
}

pub fn certify_subuniform(idf: &PiecewiseLinearIDF) -> SubUniformCertificate {
    let mut max_violation = f64::NEG_INFINITY;
    let mut touch_points: Vec<f64> = Vec::new();
    for t in idf.candidates() {
        let g = idf.eval(t) - uniform_idf(t);
        max_violation = max_violation.max(g);
        if t > 0.0 && g.abs() <= CERT_TOL && touch_points.last().is_none_or(|&last| t - last > 1e-12) {
            touch_points.push(t);
        }
    }
    let mean_gap = idf.eval(1.0) - 0.5;
    SubUniformCertificate {
        is_subuniform: max_violation <= CERT_TOL && mean_gap.abs() <= CERT_TOL,
        max_violation,
        mean_gap,
        touch_points,
    }
}

/// Weighted mixture of finite distributions on [0, 1].
pub fn mixture(components: &[(&UnitDistribution, f64)]) -> Result<UnitDistribution> {
    if components.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = components.iter().map(|(_, w)| w).sum();
    let bad_weight = components.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0));
    if bad_weight || (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSumOutOfTolerance(total));
    }
    let points = components.iter().flat_map(|(dist, w)| {
        dist.atoms()
            .iter()
            .map(move |a| (a.value, a.prob * w / total))
    });
    UnitDistribution::new(points)
}

fn check_sample(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    match q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(&v) => Err(Error::OutOfUnitInterval(v)),
        None => Ok(()),
    }
}

/// `G1 = sup_{t in [0,1]} n^{1/2} (phi_hat(t) - t^2/2)` with `phi_hat` the
/// empirical integrated distribution function. Always `>= 0` since the
/// excess vanishes at the origin.
pub fn g1_statistic(q: &[f64]) -> Result<f64> {
    check_sample(q)?;
    let idf = idf_of(&UnitDistribution::from_sample(q)?);
    let (_, excess) = idf.sup_excess();
    Ok((q.len() as f64).sqrt() * excess)
}

/// `G2 = n^{1/2} (n^{-1} sum (1 - q_i)^2 / 2 - 1/6)`.
pub fn g2_statistic(q: &[f64]) -> Result<f64> {
    check_sample(q)?;
    let n = q.len() as f64;
    let avg = q.iter().map(|&v| 0.5 * (1.0 - v).powi(2)).sum::<f64>() / n;
    Ok(n.sqrt() * (avg - 1.0 / 6.0))
}
