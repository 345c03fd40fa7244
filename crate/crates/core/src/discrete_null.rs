//! Finite discrete null distributions and the p-values derived from them.
//!
//! The one-sided convention is fixed throughout: large values of the test
//! statistic are extreme. Callers negate their statistic for the other side.

use std::io::{Read, Write};
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms whose values differ by at most this much are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Allowed deviation of the raw probability sum from one.
pub const SUM_TOL: f64 = 1e-9;

/// A support point and its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

#[derive(Deserialize, Serialize)]
struct RawAtoms {
    atoms: Vec<Atom>,
}

/// Sorts, merges near-equal values and renormalizes a list of weighted points.
fn normalize_atoms(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Vec<Atom>> {
    let mut atoms = Vec::new();
    for (value, prob) in points {
        if !value.is_finite() {
            return Err(Error::Parse(format!("non-finite support value {value}")));
        }
        if !(prob.is_finite() && prob > 0.0) {
            return Err(Error::NegativeProbability(prob));
        }
        atoms.push(Atom { value, prob });
    }
    if atoms.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    atoms.sort_by(|a, b| a.value.total_cmp(&b.value));

    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if atom.value - last.value <= MERGE_TOL => last.prob += atom.prob,
            _ => merged.push(atom),
        }
    }

    let total: f64 = merged.iter().map(|a| a.prob).sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::ProbabilitySumOutOfTolerance(total));
    }
    for atom in &mut merged {
        atom.prob /= total;
    }
    Ok(merged)
}

/// `upper[i] = P(T >= atoms[i].value)`, with a trailing zero.
fn upper_tails(atoms: &[Atom]) -> Vec<f64> {
    let mut upper = vec![0.0; atoms.len() + 1];
    for i in (0..atoms.len()).rev() {
        upper[i] = upper[i + 1] + atoms[i].prob;
    }
    upper
}

/// A finite discrete null distribution of a test statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtoms", into = "RawAtoms")]
pub struct DiscreteNull {
    atoms: Vec<Atom>,
    upper: Vec<f64>,
}

impl TryFrom<RawAtoms> for DiscreteNull {
    type Error = Error;

    fn try_from(raw: RawAtoms) -> Result<Self> {
        DiscreteNull::new(raw.atoms.into_iter().map(|a| (a.value, a.prob)))
    }
}

impl From<DiscreteNull> for RawAtoms {
    fn from(null: DiscreteNull) -> Self {
        RawAtoms { atoms: null.atoms }
    }
}

/// Builds a [`DiscreteNull`] from `(value, prob)` points.
pub fn make_null(points: &[(f64, f64)]) -> Result<DiscreteNull> {
    DiscreteNull::new(points.iter().copied())
}

impl DiscreteNull {
    /// Sorts by value, merges duplicates and renormalizes.
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms = normalize_atoms(points)?;
        let upper = upper_tails(&atoms);
        Ok(DiscreteNull { atoms, upper })
    }

    /// The null of a discrete p-value with the given support.
    ///
    /// The support must be a subset of (0, 1] containing 1; the null
    /// probability of each support point is its gap to the previous one.
    /// The statistic is represented as `-p`, so small p-values are extreme.
    pub fn from_pvalue_support(support: &[f64]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut ps = support.to_vec();
        for &p in &ps {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::OutOfUnitInterval(p));
            }
        }
        ps.sort_by(f64::total_cmp);
        ps.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL);
        let top = *ps.last().unwrap();
        if (top - 1.0).abs() > SUM_TOL {
            return Err(Error::ProbabilitySumOutOfTolerance(top));
        }
        let mut prev = 0.0;
        let points: Vec<(f64, f64)> = ps
            .iter()
            .map(|&p| {
                let prob = p - prev;
                prev = p;
                (-p, prob)
            })
            .collect();
        DiscreteNull::new(points)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(P(T* >= t), P(T* > t))` for an arbitrary observed value `t`.
    pub fn tails(&self, observed: f64) -> (f64, f64) {
        let geq = self
            .atoms
            .partition_point(|a| a.value < observed - MERGE_TOL);
        let gt = self
            .atoms
            .partition_point(|a| a.value <= observed + MERGE_TOL);
        (self.upper[geq].min(1.0), self.upper[gt].min(1.0))
    }

    /// Ordinary, mid- and randomized p-values at `observed`, using `u` as
    /// the randomization draw.
    pub fn pvalues_at(&self, observed: f64, u: f64) -> PValueTriple {
        let (geq, gt) = self.tails(observed);
        PValueTriple::from_tails(geq, gt, u)
    }

    /// P-value triple when the statistic equals the `index`-th atom.
    pub fn pvalues_at_index(&self, index: usize, u: f64) -> PValueTriple {
        PValueTriple::from_tails(self.upper[index].min(1.0), self.upper[index + 1], u)
    }

    /// Mid-p-value at `observed`.
    pub fn midp_at(&self, observed: f64) -> f64 {
        let (geq, gt) = self.tails(observed);
        0.5 * (geq + gt)
    }

    /// Support of the ordinary p-value, ascending.
    pub fn pvalue_support(&self) -> Vec<f64> {
        self.upper[..self.atoms.len()]
            .iter()
            .rev()
            .map(|&p| p.min(1.0))
            .collect()
    }

    /// Index of the atom whose p-value is the smallest supported value `>= b`.
    ///
    /// With `b` uniform this samples from the null; with `b` drawn from a
    /// distribution concentrated near zero it left-censors that distribution
    /// onto the p-value support.
    pub fn censor(&self, b: f64) -> usize {
        let k = self.atoms.len();
        let count = self.upper[..k].partition_point(|&p| p >= b);
        count.max(1) - 1
    }

    /// Distribution of the mid-p-value under this null.
    pub fn midp_distribution(&self) -> MidPDistribution {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .rev()
            .map(|(i, a)| Atom {
                value: self.upper[i + 1] + 0.5 * a.prob,
                prob: a.prob,
            })
            .collect();
        MidPDistribution(UnitDistribution { atoms })
    }

    /// Barnard's third-power sum `s`, standard deviation of the mid-p-value,
    /// and standardized statistic at `observed`.
    pub fn barnard_moments(&self, observed: f64) -> Result<BarnardMoments> {
        let (s, sigma) = self.barnard_sigma()?;
        let d = (0.5 - self.midp_at(observed)) / sigma;
        Ok(BarnardMoments { s, sigma, d })
    }

    /// `(s, sigma)` with `s = sum P(T = t)^3` and `sigma = ((1 - s) / 12)^(1/2)`.
    pub fn barnard_sigma(&self) -> Result<(f64, f64)> {
        if self.atoms.len() < 2 {
            return Err(Error::DegenerateDistribution);
        }
        let s: f64 = self.atoms.iter().map(|a| a.prob.powi(3)).sum();
        Ok((s, ((1.0 - s) / 12.0).sqrt()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("null serializes")
    }

    /// Reads a two-column `value,prob` CSV. A header row is optional.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut points = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.len() < 2 {
                return Err(Error::Parse(format!(
                    "row {}: expected two columns (value, prob)",
                    line + 1
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(v), Ok(p)) => points.push((v, p)),
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "row {}: cannot parse {:?}",
                        line + 1,
                        record
                    )))
                }
            }
        }
        DiscreteNull::new(points)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        wtr.write_record(["value", "prob"]).map_err(io)?;
        for a in &self.atoms {
            wtr.write_record([a.value.to_string(), a.prob.to_string()])
                .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Ordinary, mid- and randomized p-values for one observation, together
/// with the tail probabilities that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueTriple {
    pub p: f64,
    pub midp: f64,
    pub randp: f64,
    pub tail_geq: f64,
    pub tail_gt: f64,
}

impl PValueTriple {
    /// `u` is the randomization draw; values outside [0, 1] are clamped.
    pub fn from_tails(tail_geq: f64, tail_gt: f64, u: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&u), "randomization draw {u} outside [0, 1]");
        let u = u.clamp(0.0, 1.0);
        let randp = (tail_gt + u * (tail_geq - tail_gt)).clamp(tail_gt, tail_geq);
        PValueTriple {
            p: tail_geq,
            midp: 0.5 * (tail_geq + tail_gt),
            randp,
            tail_geq,
            tail_gt,
        }
    }
}

/// A finite distribution on the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtoms", into = "RawAtoms")]
pub struct UnitDistribution {
    atoms: Vec<Atom>,
}

impl TryFrom<RawAtoms> for UnitDistribution {
    type Error = Error;

    fn try_from(raw: RawAtoms) -> Result<Self> {
        UnitDistribution::new(raw.atoms.into_iter().map(|a| (a.value, a.prob)))
    }
}

impl From<UnitDistribution> for RawAtoms {
    fn from(dist: UnitDistribution) -> Self {
        RawAtoms { atoms: dist.atoms }
    }
}

impl UnitDistribution {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let points: Vec<(f64, f64)> = points.into_iter().collect();
        if let Some(&(v, _)) = points.iter().find(|(v, _)| !(0.0..=1.0).contains(v)) {
            return Err(Error::AtomOutOfUnitInterval(v));
        }
        Ok(UnitDistribution {
            atoms: normalize_atoms(points)?,
        })
    }

    /// Empirical distribution of a sample, each point weighted `1/n`.
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptyInput);
        }
        let w = 1.0 / sample.len() as f64;
        UnitDistribution::new(sample.iter().map(|&q| (q, w)))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.value <= x)
            .map(|a| a.prob)
            .sum::<f64>()
            .min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .map(|a| a.prob * (a.value - m).powi(2))
            .sum()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Null distribution of a mid-p-value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MidPDistribution(UnitDistribution);

impl Deref for MidPDistribution {
    type Target = UnitDistribution;

    fn deref(&self) -> &UnitDistribution {
        &self.0
    }
}

impl MidPDistribution {
    pub fn into_inner(self) -> UnitDistribution {
        self.0
    }
}

/// Barnard's moments for one purely discrete test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarnardMoments {
    /// Sum of cubed atom probabilities.
    pub s: f64,
    /// Null standard deviation of the mid-p-value.
    pub sigma: f64,
    /// Standardized statistic `(1/2 - Q) / sigma`.
    pub d: f64,
}

/// Estimate of a generalized mid-p-value from `m` conditional randomized
/// p-value replicates.
pub fn generalized_midp(randp_draws: &[f64]) -> Result<f64> {
    if randp_draws.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&r) = randp_draws.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::OutOfUnitInterval(r));
    }
    let mean = randp_draws.iter().sum::<f64>() / randp_draws.len() as f64;
    Ok(mean.clamp(0.0, 1.0))
}
