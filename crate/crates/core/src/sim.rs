//! Seeded Monte Carlo scenarios for combined discrete p-values.
//!
//! Every replication draws from its own ChaCha stream keyed by
//! `(seed, replication index)`, so results do not depend on how the
//! replications are scheduled across threads.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiners::{combine, delta_test, Method};
use crate::discrete_null::{DiscreteNull, PValueTriple, UnitDistribution};
use crate::error::{Error, Result};

/// Family of per-test null distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Support {
    /// P-value support {1/2, 1}, null probabilities 1/2 each.
    FiftyFifty,
    /// Support {p, 1} with p drawn uniformly for each test; null probs (p, 1 - p).
    RandomBinary,
    /// Support {1/10, ..., 1}, null probabilities 1/10 each.
    GridOfTen,
    /// Each test uses one of these nulls, chosen uniformly at random.
    Custom(Vec<DiscreteNull>),
}

/// How the observed statistics are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Alternative {
    /// Statistics follow their nulls.
    Null,
    /// `P` is the smallest supported p-value at or above `B ~ Beta(a, b)`.
    CensoredBeta { a: f64, b: f64 },
    /// The two-experiment obfuscation construction. Overrides the support.
    LemmaMixture { x1: f64 },
}

fn default_methods() -> Vec<Method> {
    vec![
        Method::FisherStandard,
        Method::FisherSubUniform,
        Method::FisherRandomized,
    ]
}

/// Default threshold grid: a few small levels, then the deciles.
pub fn default_alphas() -> Vec<f64> {
    let mut out = vec![0.001, 0.005, 0.01, 0.025, 0.05];
    out.extend((1..=10).map(|k| k as f64 / 10.0));
    out
}

/// A declarative simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub support: Support,
    pub alternative: Alternative,
    /// Tests per replication.
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

impl ScenarioConfig {
    pub fn new(support: Support, alternative: Alternative, n: usize, reps: usize, seed: u64) -> Self {
        ScenarioConfig {
            name: String::new(),
            support,
            alternative,
            n,
            reps,
            seed,
            methods: default_methods(),
            alphas: default_alphas(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return bad(format!("alpha {a} outside (0, 1]"));
        }
        match self.alternative {
            Alternative::CensoredBeta { a, b } if !(a > 0.0 && b > 0.0) => {
                return bad(format!("beta parameters must be positive, got ({a}, {b})"));
            }
            Alternative::LemmaMixture { x1 } if !(x1 > 0.0 && x1 <= 0.25) => {
                return Err(Error::X1OutOfRange(x1));
            }
            _ => {}
        }
        if let Support::Custom(nulls) = &self.support {
            if nulls.is_empty() {
                return bad("custom support needs at least one null".into());
            }
            if nulls.iter().any(|n| n.len() < 2) && self.methods.iter().any(|m| m.needs_sigma()) {
                return bad("standardized-sum methods need nulls with at least two atoms".into());
            }
        }
        Ok(())
    }

    /// Name used in CSV output.
    pub fn label(&self) -> String {
        if !self.name.is_empty() {
            return self.name.clone();
        }
        let support = match &self.support {
            Support::FiftyFifty => "FiftyFifty".to_string(),
            Support::RandomBinary => "RandomBinary".to_string(),
            Support::GridOfTen => "GridOfTen".to_string(),
            Support::Custom(v) => format!("Custom{}", v.len()),
        };
        let alt = match self.alternative {
            Alternative::Null => "Null".to_string(),
            Alternative::CensoredBeta { a, b } => format!("Beta({a},{b})"),
            Alternative::LemmaMixture { x1 } => format!("LemmaMixture({x1})"),
        };
        format!("{support}/{alt}/n={}", self.n)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Box<ScenarioConfig>),
    Many(Vec<ScenarioConfig>),
}

/// Parses a scenario file holding one config object or an array of them.
pub fn load_scenarios(text: &str) -> Result<Vec<ScenarioConfig>> {
    let parsed: OneOrMany = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let configs = match parsed {
        OneOrMany::One(c) => vec![*c],
        OneOrMany::Many(v) => v,
    };
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

/// Random stream for one replication.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Uniform draw on (0, 1].
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

#[derive(Debug, Clone)]
struct PreparedNull {
    null: DiscreteNull,
    sigma: Option<f64>,
}

impl PreparedNull {
    fn new(null: DiscreteNull) -> Self {
        let sigma = null.barnard_sigma().ok().map(|(_, s)| s);
        PreparedNull { null, sigma }
    }
}

#[derive(Debug, Clone)]
enum BetaSampler {
    /// `a = 1`: `B = 1 - U^{1/b}`.
    UnitA(f64),
    /// `b = 1`: `B = U^{1/a}`.
    UnitB(f64),
    General(Beta<f64>),
}

impl BetaSampler {
    fn new(a: f64, b: f64) -> Result<Self> {
        if a == 1.0 {
            Ok(BetaSampler::UnitA(b))
        } else if b == 1.0 {
            Ok(BetaSampler::UnitB(a))
        } else {
            Beta::new(a, b)
                .map(BetaSampler::General)
                .map_err(|e| Error::InvalidConfig(e.to_string()))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            BetaSampler::UnitA(b) => 1.0 - rng.gen::<f64>().powf(1.0 / b),
            BetaSampler::UnitB(a) => rng.gen::<f64>().powf(1.0 / a),
            BetaSampler::General(beta) => beta.sample(rng),
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Fixed(Vec<PreparedNull>),
    RandomBinary,
}

/// One simulated test: its p-value triple and Barnard standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDraw {
    pub triple: PValueTriple,
    pub sigma: Option<f64>,
}

/// Draws p-value triples for a (support, alternative) pair.
#[derive(Debug, Clone)]
pub struct Sampler {
    source: Source,
    alternative: Alternative,
    beta: Option<BetaSampler>,
    /// `(x_e, P_1(P = x_e))` for the two lemma experiments.
    lemma: Option<[(f64, f64); 2]>,
}

impl Sampler {
    pub fn new(support: &Support, alternative: Alternative) -> Result<Self> {
        let mut lemma = None;
        let source = match (&alternative, support) {
            (Alternative::LemmaMixture { x1 }, _) => {
                let c = lemma_mixture_dists(*x1)?;
                lemma = Some([(c.x1, c.x1 + c.epsilon), (c.x2, c.x2 + c.epsilon)]);
                Source::Fixed(c.nulls.into_iter().map(PreparedNull::new).collect())
            }
            (_, Support::FiftyFifty) => Source::Fixed(vec![PreparedNull::new(
                DiscreteNull::from_pvalue_support(&[0.5, 1.0])?,
            )]),
            (_, Support::GridOfTen) => {
                let grid: Vec<f64> = (1..=10).map(|j| j as f64 / 10.0).collect();
                Source::Fixed(vec![PreparedNull::new(DiscreteNull::from_pvalue_support(&grid)?)])
            }
            (_, Support::RandomBinary) => Source::RandomBinary,
            (_, Support::Custom(nulls)) => {
                if nulls.is_empty() {
                    return Err(Error::InvalidConfig("custom support needs at least one null".into()));
                }
                Source::Fixed(nulls.iter().cloned().map(PreparedNull::new).collect())
            }
        };
        let beta = match alternative {
            Alternative::CensoredBeta { a, b } => Some(BetaSampler::new(a, b)?),
            _ => None,
        };
        Ok(Sampler {
            source,
            alternative,
            beta,
            lemma,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TestDraw {
        let owned;
        let (which, prepared) = match &self.source {
            Source::Fixed(list) => {
                let i = if list.len() == 1 { 0 } else { rng.gen_range(0..list.len()) };
                (i, &list[i])
            }
            Source::RandomBinary => {
                let p = loop {
                    let p = rng.gen::<f64>();
                    if p > 0.0 && p < 1.0 {
                        break p;
                    }
                };
                owned = PreparedNull::new(
                    DiscreteNull::from_pvalue_support(&[p, 1.0]).expect("valid binary support"),
                );
                (0, &owned)
            }
        };
        let b = match (&self.alternative, &self.beta, &self.lemma) {
            (Alternative::CensoredBeta { .. }, Some(beta), _) => beta.sample(rng),
            (Alternative::LemmaMixture { .. }, _, Some(lemma)) => {
                let (x, mass) = lemma[which];
                if rng.gen::<f64>() < mass {
                    x
                } else {
                    1.0
                }
            }
            _ => rng.gen::<f64>(),
        };
        let index = prepared.null.censor(b);
        let u = open_uniform(rng);
        TestDraw {
            triple: prepared.null.pvalues_at_index(index, u),
            sigma: prepared.sigma,
        }
    }
}

/// Draws one `(p, midp, randp)` triple. Prefer a reused [`Sampler`] in loops.
pub fn draw_pvalue<R: Rng + ?Sized>(
    support: &Support,
    alternative: Alternative,
    rng: &mut R,
) -> Result<PValueTriple> {
    Ok(Sampler::new(support, alternative)?.draw(rng).triple)
}

/// Combined p-value of `method` for one replication of draws.
pub fn combined_pvalue(method: Method, draws: &[TestDraw]) -> Result<f64> {
    let pick = |f: fn(&PValueTriple) -> f64| -> Vec<f64> {
        draws.iter().map(|d| f(&d.triple)).collect()
    };
    let values = match method {
        Method::FisherStandard => pick(|t| t.p),
        Method::FisherRandomized => pick(|t| t.randp),
        _ => pick(|t| t.midp),
    };
    let sigmas: Option<Vec<f64>> = if method.needs_sigma() {
        Some(
            draws
                .iter()
                .map(|d| d.sigma.ok_or(Error::DegenerateDistribution))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    Ok(combine(method, &values, sigmas.as_deref(), 0.05)?.pvalue_bound)
}

/// Empirical distribution function of a combined p-value over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    pub method: Method,
    pub thresholds: Vec<f64>,
    pub empirical_cdf: Vec<f64>,
    pub mc_stderr: Vec<f64>,
}

impl PowerCurve {
    pub fn from_pvalues(method: Method, thresholds: &[f64], pvalues: &[f64]) -> Self {
        let reps = pvalues.len() as f64;
        let empirical_cdf: Vec<f64> = thresholds
            .iter()
            .map(|&a| pvalues.iter().filter(|&&p| p <= a).count() as f64 / reps)
            .collect();
        let mc_stderr = empirical_cdf
            .iter()
            .map(|&c| (c * (1.0 - c) / reps).sqrt())
            .collect();
        PowerCurve {
            method,
            thresholds: thresholds.to_vec(),
            empirical_cdf,
            mc_stderr,
        }
    }

    /// CDF value at threshold `alpha`, if it is on the grid.
    pub fn at(&self, alpha: f64) -> Option<(f64, f64)> {
        self.thresholds
            .iter()
            .position(|&a| (a - alpha).abs() < 1e-12)
            .map(|i| (self.empirical_cdf[i], self.mc_stderr[i]))
    }
}

/// Output of [`run_power_study`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerStudy {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub curves: Vec<PowerCurve>,
}

impl PowerStudy {
    pub fn curve(&self, method: Method) -> Option<&PowerCurve> {
        self.curves.iter().find(|c| c.method == method)
    }
}

/// Combined p-values per replication, `[rep][method]`.
pub fn simulate_combined(cfg: &ScenarioConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let sampler = Sampler::new(&cfg.support, cfg.alternative)?;
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(cfg.seed, rep as u64);
            let draws: Vec<TestDraw> = (0..cfg.n).map(|_| sampler.draw(&mut rng)).collect();
            cfg.methods
                .iter()
                .map(|&m| combined_pvalue(m, &draws))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Runs the scenario and tabulates an empirical CDF per method.
pub fn run_power_study(cfg: &ScenarioConfig) -> Result<PowerStudy> {
    let table = simulate_combined(cfg)?;
    let curves = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let column: Vec<f64> = table.iter().map(|row| row[j]).collect();
            PowerCurve::from_pvalues(m, &cfg.alphas, &column)
        })
        .collect();
    Ok(PowerStudy {
        scenario: cfg.label(),
        n: cfg.n,
        reps: cfg.reps,
        curves,
    })
}

/// Writes studies as tidy CSV: `method,alpha,cdf,stderr,n,scenario`.
pub fn write_power_csv<W: Write>(writer: W, studies: &[PowerStudy]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Parse(e.to_string());
    wtr.write_record(["method", "alpha", "cdf", "stderr", "n", "scenario"])
        .map_err(io)?;
    for study in studies {
        for curve in &study.curves {
            for i in 0..curve.thresholds.len() {
                wtr.write_record([
                    curve.method.name().to_string(),
                    curve.thresholds[i].to_string(),
                    curve.empirical_cdf[i].to_string(),
                    curve.mc_stderr[i].to_string(),
                    study.n.to_string(),
                    study.scenario.clone(),
                ])
                .map_err(io)?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// The two-experiment construction in which mixing hides the signal from
/// ordinary p-values but not from mid-p-values.
///
/// Experiment `e` has p-value support `{x_e, 1}` with null mass `x_e` at
/// `x_e`; under the alternative that mass becomes `x_e + epsilon`, where
/// `epsilon = x1` and `x2 = 3 x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaConstruction {
    pub x1: f64,
    pub x2: f64,
    pub epsilon: f64,
    pub nulls: [DiscreteNull; 2],
    pub null_pvalue: [UnitDistribution; 2],
    pub alt_pvalue: [UnitDistribution; 2],
    pub pvalue_mixture_null: UnitDistribution,
    pub pvalue_mixture_alt: UnitDistribution,
    pub midp_mixture_null: UnitDistribution,
    pub midp_mixture_alt: UnitDistribution,
}

fn two_point(lo: f64, mass: f64, hi: f64) -> Result<UnitDistribution> {
    let points = [(lo, mass), (hi, 1.0 - mass)];
    UnitDistribution::new(points.into_iter().filter(|&(_, w)| w > 0.0))
}

fn even_mixture(a: &UnitDistribution, b: &UnitDistribution) -> Result<UnitDistribution> {
    crate::convex_order::mixture(&[(a, 0.5), (b, 0.5)])
}

pub fn lemma_mixture_dists(x1: f64) -> Result<LemmaConstruction> {
    if !(x1 > 0.0 && x1 <= 0.25) {
        return Err(Error::X1OutOfRange(x1));
    }
    let x2 = 3.0 * x1;
    let epsilon = x1;
    let xs = [x1, x2];
    let nulls = [
        DiscreteNull::from_pvalue_support(&[x1, 1.0])?,
        DiscreteNull::from_pvalue_support(&[x2, 1.0])?,
    ];
    let null_pvalue = [two_point(x1, x1, 1.0)?, two_point(x2, x2, 1.0)?];
    let alt_pvalue = [
        two_point(x1, x1 + epsilon, 1.0)?,
        two_point(x2, x2 + epsilon, 1.0)?,
    ];
    let midp_null = [
        nulls[0].midp_distribution().into_inner(),
        nulls[1].midp_distribution().into_inner(),
    ];
    let midp_alt = [
        two_point(0.5 * xs[0], xs[0] + epsilon, 0.5 * (1.0 + xs[0]))?,
        two_point(0.5 * xs[1], xs[1] + epsilon, 0.5 * (1.0 + xs[1]))?,
    ];
    Ok(LemmaConstruction {
        x1,
        x2,
        epsilon,
        pvalue_mixture_null: even_mixture(&null_pvalue[0], &null_pvalue[1])?,
        pvalue_mixture_alt: even_mixture(&alt_pvalue[0], &alt_pvalue[1])?,
        midp_mixture_null: even_mixture(&midp_null[0], &midp_null[1])?,
        midp_mixture_alt: even_mixture(&midp_alt[0], &midp_alt[1])?,
        nulls,
        null_pvalue,
        alt_pvalue,
    })
}

/// True when `F(x) <= x` at every support point, i.e. the distribution is
/// a valid (conservative) null distribution for a p-value.
pub fn is_valid_pvalue_null(dist: &UnitDistribution) -> bool {
    dist.atoms()
        .iter()
        .all(|a| dist.cdf(a.value) <= a.value + 1e-12)
}

/// Power and size of the Delta test at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub power: f64,
    pub power_stderr: f64,
    pub size: f64,
    pub size_stderr: f64,
}

fn rejection_rate(sampler: &Sampler, n: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    let rejections: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep as u64);
            let q: Vec<f64> = (0..n).map(|_| sampler.draw(&mut rng).triple.midp).collect();
            delta_test(&q, alpha).map(|o| o.reject)
        })
        .collect::<Result<_>>()?;
    Ok(rejections.iter().filter(|&&r| r).count() as f64 / reps as f64)
}

/// Delta-test power under the lemma mixture and size under its null, for
/// each sample size in `n_grid`.
pub fn consistency_experiment(
    x1: f64,
    n_grid: &[usize],
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<ConsistencyRow>> {
    let construction = lemma_mixture_dists(x1)?;
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let alt = Sampler::new(&Support::FiftyFifty, Alternative::LemmaMixture { x1 })?;
    let null = Sampler::new(
        &Support::Custom(construction.nulls.to_vec()),
        Alternative::Null,
    )?;
    let se = |p: f64| (p * (1.0 - p) / reps as f64).sqrt();
    n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if n == 0 {
                return Err(Error::EmptyInput);
            }
            let stream_seed = seed.wrapping_add(2 * k as u64);
            let power = rejection_rate(&alt, n, alpha, reps, stream_seed)?;
            let size = rejection_rate(&null, n, alpha, reps, stream_seed.wrapping_add(1))?;
            Ok(ConsistencyRow {
                n,
                power,
                power_stderr: se(power),
                size,
                size_stderr: se(size),
            })
        })
        .collect()
}

/// Exact check of `E_0(Q) - E_1(Q) >= epsilon^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanGap {
    pub null_mean: f64,
    pub alt_mean: f64,
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Builds the least favourable alternative `F_1 = max(F_0, (x + eps) 1{t >= x})`
/// on the p-value support of `null`, then compares the mid-p-value means
/// under both hypotheses exactly.
pub fn mean_gap_check(null: &DiscreteNull, x: f64, epsilon: f64) -> Result<MeanGap> {
    let violation = |msg: String| Err(Error::AlternativeViolatesPrecondition(msg));
    if !(epsilon >= 0.0) {
        return violation(format!("epsilon must be non-negative, got {epsilon}"));
    }
    if !(0.0..=1.0).contains(&x) || x + epsilon > 1.0 + 1e-12 {
        return violation(format!("need 0 <= x <= x + epsilon <= 1, got x = {x}, epsilon = {epsilon}"));
    }
    let support = null.pvalue_support();
    let lower = support.partition_point(|&p| p <= x + 1e-15);
    if lower == 0 {
        return violation(format!(
            "no supported p-value at or below x = {x}, so P_1(P <= x) = 0"
        ));
    }
    let first_raised = lower - 1;
    let level = (x + epsilon).min(1.0);

    let mut null_mean = 0.0;
    let mut alt_mean = 0.0;
    let mut prev_p = 0.0;
    let mut prev_alt_cdf = 0.0;
    for (j, &p) in support.iter().enumerate() {
        let midp = 0.5 * (p + prev_p);
        let alt_cdf = if j + 1 == support.len() {
            1.0
        } else if j >= first_raised {
            p.max(level)
        } else {
            p
        };
        null_mean += (p - prev_p) * midp;
        alt_mean += (alt_cdf - prev_alt_cdf) * midp;
        prev_p = p;
        prev_alt_cdf = alt_cdf;
    }
    let gap = null_mean - alt_mean;
    let bound = 0.5 * epsilon * epsilon;
    Ok(MeanGap {
        null_mean,
        alt_mean,
        gap,
        bound,
        holds: gap >= bound - 1e-12,
    })
}
