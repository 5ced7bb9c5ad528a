//! Monte Carlo check of the two-sided Hoeffding inequality
//! `P[|mean − μ| ≤ δ] ≥ 1 − 2·exp(−2mδ²)` for means of `m` i.i.d. draws in `[0, 1]`.
//!
//! Trial `t` draws from a ChaCha8 stream keyed by `(seed, t)`, so results do
//! not depend on how trials are scheduled across threads.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::hoeffding_floor;

/// Smallest batch count the inequality is checked for.
pub const MIN_BATCHES: usize = 8;

/// Bounded distributions on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    Bernoulli { p: f64 },
    Uniform01,
    Beta { a: f64, b: f64 },
}

impl Source {
    pub fn mean(&self) -> f64 {
        match *self {
            Source::Bernoulli { p } => p,
            Source::Uniform01 => 0.5,
            Source::Beta { a, b } => a / (a + b),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Source::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::config(format!("bernoulli probability must lie in [0, 1], got {p}")))
            }
            Source::Beta { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                Err(Error::config(format!("beta shape parameters must be positive, got ({a}, {b})")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Bernoulli { p } => write!(f, "bernoulli({p})"),
            Source::Uniform01 => write!(f, "uniform01"),
            Source::Beta { a, b } => write!(f, "beta({a},{b})"),
        }
    }
}

impl std::str::FromStr for Source {
    type Err = Error;

    /// Parses `uniform01`, `bernoulli(P)` or `beta(A,B)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("unknown source `{s}`; expected uniform01, bernoulli(p) or beta(a,b)"));
        if s == "uniform01" {
            return Ok(Source::Uniform01);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<f64> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let src = match (name.trim(), args.as_slice()) {
            ("bernoulli", &[p]) => Source::Bernoulli { p },
            ("beta", &[a, b]) => Source::Beta { a, b },
            _ => return Err(bad()),
        };
        src.validate()?;
        Ok(src)
    }
}

enum Sampler {
    Bernoulli(Bernoulli),
    Uniform,
    Beta(Beta<f64>),
}

impl Sampler {
    fn new(src: Source) -> Result<Self> {
        src.validate()?;
        Ok(match src {
            Source::Bernoulli { p } => Sampler::Bernoulli(Bernoulli::new(p).map_err(|e| Error::config(e.to_string()))?),
            Source::Uniform01 => Sampler::Uniform,
            Source::Beta { a, b } => Sampler::Beta(Beta::new(a, b).map_err(|e| Error::config(e.to_string()))?),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Bernoulli(d) => f64::from(u8::from(d.sample(rng))),
            Sampler::Uniform => rng.random::<f64>(),
            Sampler::Beta(d) => d.sample(rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationExperiment {
    /// Draws averaged per trial.
    pub m: usize,
    pub trials: usize,
    pub delta: f64,
    pub source: Source,
    pub seed: u64,
}

impl ConcentrationExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.m < MIN_BATCHES {
            return Err(Error::config(format!("m must be at least {MIN_BATCHES}, got {}", self.m)));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        self.source.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub m: usize,
    pub delta: f64,
    pub source: Source,
    pub trials: usize,
    /// Fraction of trials whose mean lands within `delta` of the true mean.
    pub empirical_coverage: f64,
    /// `1 − 2·exp(−2mδ²)`.
    pub theoretical_floor: f64,
    pub slack: f64,
    /// Binomial standard error of `empirical_coverage`.
    pub stderr: f64,
}

impl ConcentrationResult {
    /// Whether coverage clears the floor up to `k` standard errors.
    pub fn holds_within(&self, k: f64) -> bool {
        self.empirical_coverage >= self.theoretical_floor - k * self.stderr
    }
}

/// Per-trial sample means; trial `t` uses stream `t` of the generator seeded with `seed`.
fn trial_means(m: usize, trials: usize, source: Source, seed: u64) -> Result<Vec<f64>> {
    let sampler = Sampler::new(source)?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            (0..m).map(|_| sampler.draw(&mut rng)).sum::<f64>() / m as f64
        })
        .collect())
}

fn summarize(m: usize, delta: f64, source: Source, means: &[f64]) -> ConcentrationResult {
    let mu = source.mean();
    let trials = means.len();
    let hits = means.iter().filter(|&&x| (x - mu).abs() <= delta).count();
    let coverage = hits as f64 / trials as f64;
    let floor = hoeffding_floor(m, delta);
    ConcentrationResult {
        m,
        delta,
        source,
        trials,
        empirical_coverage: coverage,
        theoretical_floor: floor,
        slack: coverage - floor,
        stderr: (coverage * (1.0 - coverage) / trials as f64).sqrt(),
    }
}

pub fn run_concentration(exp: &ConcentrationExperiment) -> Result<ConcentrationResult> {
    exp.validate()?;
    let means = trial_means(exp.m, exp.trials, exp.source, exp.seed)?;
    Ok(summarize(exp.m, exp.delta, exp.source, &means))
}

/// One result per `(m, delta)` pair in row-major grid order. Every cell with
/// the same `m` reuses the same trial draws, so coverage is monotone in `delta`.
pub fn sweep_concentration(
    m_grid: &[usize],
    delta_grid: &[f64],
    source: Source,
    trials: usize,
    seed: u64,
) -> Result<Vec<ConcentrationResult>> {
    if m_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::config("sweep grids must be non-empty"));
    }
    let mut out = Vec::with_capacity(m_grid.len() * delta_grid.len());
    for &m in m_grid {
        for &delta in delta_grid {
            ConcentrationExperiment { m, trials, delta, source, seed }.validate()?;
        }
        let means = trial_means(m, trials, source, seed)?;
        out.extend(delta_grid.iter().map(|&delta| summarize(m, delta, source, &means)));
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "m,delta,source,trials,empirical,floor,slack,stderr";

/// Writes results as CSV with [`CSV_HEADER`].
pub fn write_results_csv<W: Write>(results: &[ConcentrationResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::format("<csv output>", e.to_string());
    w.write_record(CSV_HEADER.split(',')).map_err(to_err)?;
    for r in results {
        w.write_record([
            r.m.to_string(),
            r.delta.to_string(),
            r.source.to_string(),
            r.trials.to_string(),
            r.empirical_coverage.to_string(),
            r.theoretical_floor.to_string(),
            r.slack.to_string(),
            r.stderr.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
