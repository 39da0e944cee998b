//! Experiment plumbing: score loading, synthetic Zipf data, predicate sweeps
//! over privacy budgets, and timing.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{mc_estimate_many, predicate_probability, Predicate, PredicateKind};
use crate::canonical::{canonical_select, exact_class_distribution};
use crate::error::{domain, Error, Result};
use crate::mechanisms::{effective_sensitivity, oneshot, peel};
use crate::noise::NoiseKind;
use crate::rng::{derive_rng, StreamRng};
use crate::score::ScoreVector;

/// Layout of a score file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// One number per line; blank lines are skipped.
    Lines,
    /// A CSV file with a header row; scores are read from the named column.
    Csv { column: String },
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lines" {
            return Ok(InputFormat::Lines);
        }
        match s.strip_prefix("csv:") {
            Some(col) if !col.is_empty() => Ok(InputFormat::Csv { column: col.to_string() }),
            _ => domain(format!("unknown format '{s}' (expected 'lines' or 'csv:<column>')")),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputFormat::Lines => f.write_str("lines"),
            InputFormat::Csv { column } => write!(f, "csv:{column}"),
        }
    }
}

fn parse_value(text: &str, line: usize) -> Result<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("'{}' is not a number", text.trim()) })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("'{}' is not finite", text.trim()) });
    }
    Ok(v)
}

/// Reads raw scores from `reader`. Parse errors carry the 1-based line.
pub fn parse_scores<R: Read>(reader: R, format: &InputFormat) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    match format {
        InputFormat::Lines => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                out.push(parse_value(&line, i + 1)?);
            }
        }
        InputFormat::Csv { column } => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
            let col = headers
                .iter()
                .position(|h| h == column)
                .ok_or_else(|| Error::Data(format!("no column '{column}' in header")))?;
            for rec in rdr.records() {
                let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                let field = rec.get(col).ok_or_else(|| Error::Parse { line, msg: format!("missing column '{column}'") })?;
                out.push(parse_value(field, line)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Data("no scores found".into()));
    }
    Ok(out)
}

/// Loads scores and divides them by the effective sensitivity of per-user
/// changes in `[-delta_minus, +delta_plus]`.
pub fn load_scores(path: &Path, format: &InputFormat, delta_minus: f64, delta_plus: f64) -> Result<ScoreVector> {
    let sens = effective_sensitivity(delta_minus, delta_plus)?;
    let raw = parse_scores(File::open(path)?, format)?;
    ScoreVector::normalized(raw, sens)
}

pub const ZIPF_DEFAULT_D: usize = 10_000;
pub const ZIPF_DEFAULT_SCALE: f64 = 1.5e8;

/// Raw Zipf scores `scale * i^(-s) / sum_j j^(-s)` for `i = 1..=d`.
pub fn zipf_raw(d: usize, s: f64, scale: f64) -> Result<Vec<f64>> {
    if d < 2 {
        return domain(format!("zipf needs d >= 2, got {d}"));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return domain(format!("zipf exponent s = {s} must be finite and >= 0"));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return domain(format!("scale = {scale} must be positive"));
    }
    let f: Vec<f64> = (1..=d).map(|i| (i as f64).powf(-s)).collect();
    let total: f64 = f.iter().sum();
    Ok(f.into_iter().map(|x| scale * x / total).collect())
}

pub fn gen_zipf(d: usize, s: f64, scale: f64) -> Result<ScoreVector> {
    ScoreVector::new(zipf_raw(d, s, scale)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Canonical mechanism with the configured `gamma`.
    Canonical,
    /// Canonical mechanism with `gamma = 1` (linear-time path).
    CanonicalG1,
    /// `k` rounds of single-item selection at `epsilon / k`.
    Peeling,
    /// One pass reporting the top `k`, exponential noise by default.
    Oneshot,
    /// One pass reporting the top `k`, Gumbel noise by default.
    Lipschitz,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] =
        [Mechanism::Canonical, Mechanism::CanonicalG1, Mechanism::Peeling, Mechanism::Oneshot, Mechanism::Lipschitz];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Canonical => "canonical",
            Mechanism::CanonicalG1 => "canonical-g1",
            Mechanism::Peeling => "peeling",
            Mechanism::Oneshot => "oneshot",
            Mechanism::Lipschitz => "lipschitz",
        }
    }

    pub fn default_noise(self) -> NoiseKind {
        match self {
            Mechanism::Oneshot => NoiseKind::Exponential,
            _ => NoiseKind::Gumbel,
        }
    }

    pub fn is_canonical(self) -> bool {
        matches!(self, Mechanism::Canonical | Mechanism::CanonicalG1)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown mechanism '{s}'")))
    }
}

/// A configured mechanism ready to be run on one score vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Runner {
    pub mechanism: Mechanism,
    pub k: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub noise: NoiseKind,
}

impl Runner {
    pub fn effective_gamma(&self) -> f64 {
        match self.mechanism {
            Mechanism::CanonicalG1 => 1.0,
            _ => self.gamma,
        }
    }

    /// One selection, as 0-based item indices.
    ///
    /// With Gumbel noise, PEELING is drawn as a single top-`k` pass, which
    /// has the same output distribution as `k` sequential rounds and costs
    /// `O(d)` instead of `O(dk)`. Use [`Runner::run_literal`] for the
    /// round-by-round form.
    pub fn run(&self, scores: &ScoreVector, rng: &mut StreamRng) -> Result<Vec<usize>> {
        if self.mechanism == Mechanism::Peeling && self.noise == NoiseKind::Gumbel {
            return oneshot(scores, self.k, self.epsilon, 1.0, NoiseKind::Gumbel, rng);
        }
        self.run_literal(scores, rng)
    }

    pub fn run_literal(&self, scores: &ScoreVector, rng: &mut StreamRng) -> Result<Vec<usize>> {
        match self.mechanism {
            Mechanism::Canonical | Mechanism::CanonicalG1 => {
                Ok(canonical_select(scores, self.k, self.epsilon, self.effective_gamma(), self.noise, rng)?.subset)
            }
            Mechanism::Peeling => peel(scores, self.k, self.epsilon, 1.0, self.noise, rng),
            Mechanism::Oneshot | Mechanism::Lipschitz => oneshot(scores, self.k, self.epsilon, 1.0, self.noise, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreSource {
    File { path: PathBuf, format: InputFormat },
    Zipf { d: usize, s: f64, scale: f64 },
}

impl ScoreSource {
    pub fn load(&self, delta_minus: f64, delta_plus: f64) -> Result<ScoreVector> {
        match self {
            ScoreSource::File { path, format } => load_scores(path, format, delta_minus, delta_plus),
            ScoreSource::Zipf { d, s, scale } => {
                ScoreVector::normalized(zipf_raw(*d, *s, *scale)?, effective_sensitivity(delta_minus, delta_plus)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Exact class probabilities where available, Monte Carlo otherwise.
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub source: ScoreSource,
    pub mechanisms: Vec<Mechanism>,
    pub k: usize,
    pub gamma: f64,
    /// Noise for every mechanism; `None` uses each mechanism's default.
    pub noise: Option<NoiseKind>,
    pub epsilons: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub predicates: Vec<PredicateKind>,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub mode: EvalMode,
    /// When unset, `wall_time_ns` is reported as 0 and the output depends
    /// only on these settings.
    pub record_timing: bool,
}

impl ExperimentSpec {
    /// A spec with the usual defaults for everything but the data source.
    pub fn new(source: ScoreSource, k: usize) -> Self {
        Self {
            source,
            mechanisms: vec![Mechanism::Canonical],
            k,
            gamma: 0.5,
            noise: None,
            epsilons: vec![1.0],
            trials: 10_000,
            seed: 0,
            predicates: PredicateKind::ALL.to_vec(),
            delta_minus: 1.0,
            delta_plus: 1.0,
            mode: EvalMode::Exact,
            record_timing: true,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.epsilons.is_empty() {
            return domain("at least one epsilon is required");
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return domain(format!("epsilon = {e} must be positive and finite"));
        }
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if self.mechanisms.is_empty() {
            return domain("at least one mechanism is required");
        }
        if self.predicates.is_empty() {
            return domain("at least one predicate is required");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return domain(format!("gamma = {} outside [0, 1]", self.gamma));
        }
        if self.k == 0 || self.k >= d {
            return domain(format!("k = {} must lie in 1..={} for d = {d}", self.k, d - 1));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub predicate: PredicateKind,
    pub probability: f64,
    pub std_err: f64,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

/// Caps the worker pool at `DPTOPK_THREADS` threads when the variable is set.
pub fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("DPTOPK_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn time_one(runner: &Runner, scores: &ScoreVector, seed: u64) -> Result<u64> {
    let mut rng = derive_rng(seed, u64::MAX, 0);
    let start = Instant::now();
    std::hint::black_box(runner.run(scores, &mut rng)?);
    Ok(start.elapsed().as_nanos().max(1) as u64)
}

/// Evaluates every requested predicate for every mechanism and privacy loss.
///
/// Canonical mechanisms with Gumbel noise use exact class probabilities in
/// [`EvalMode::Exact`]; everything else is estimated from `spec.trials`
/// runs. Rows are sorted by mechanism name, then epsilon, then predicate.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepReport> {
    configure_threads();
    let scores = spec.source.load(spec.delta_minus, spec.delta_plus)?;
    spec.validate(scores.len())?;
    let mut report = SweepReport::default();
    let mut mechanisms = spec.mechanisms.clone();
    mechanisms.sort_by_key(|m| m.name());
    mechanisms.dedup();
    let mut predicates = spec.predicates.clone();
    predicates.sort();
    predicates.dedup();
    let preds: Vec<Predicate> = predicates.iter().map(|&p| Predicate::new(p, spec.k)).collect();
    let mut epsilons = spec.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);
    epsilons.dedup();

    for (mi, &mechanism) in mechanisms.iter().enumerate() {
        let noise = spec.noise.unwrap_or(mechanism.default_noise());
        let exact = spec.mode == EvalMode::Exact && mechanism.is_canonical();
        if exact && noise != NoiseKind::Gumbel {
            report.warnings.push(format!(
                "{mechanism}: no exact probabilities for {noise} noise, using {} Monte Carlo trials",
                spec.trials
            ));
        }
        for (ei, &epsilon) in epsilons.iter().enumerate() {
            let runner = Runner { mechanism, k: spec.k, epsilon, gamma: spec.gamma, noise };
            let stream = derive_rng(spec.seed, mi as u64, ei as u64 + 1);
            let estimates: Vec<(f64, f64)> = if exact && noise == NoiseKind::Gumbel {
                let dist = exact_class_distribution(&scores, spec.k, epsilon, runner.effective_gamma())?;
                preds.iter().map(|&p| predicate_probability(&dist, p).map(|v| (v, 0.0))).collect::<Result<_>>()?
            } else {
                let mut stream = stream;
                mc_estimate_many(|r| runner.run(&scores, r), &scores, &preds, spec.trials, &mut stream)?
                    .into_iter()
                    .map(|e| (e.p_hat, e.std_err))
                    .collect()
            };
            let wall_time_ns = if spec.record_timing { time_one(&runner, &scores, spec.seed)? } else { 0 };
            for (&predicate, (probability, std_err)) in predicates.iter().zip(estimates) {
                report.rows.push(SweepRow { mechanism, epsilon, predicate, probability, std_err, wall_time_ns });
            }
        }
    }
    Ok(report)
}

pub const CSV_HEADER: &str = "mechanism,epsilon,predicate,probability,std_err,wall_time_ns";

/// Writes rows as CSV with the header [`CSV_HEADER`].
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record(&[
            r.mechanism.name().to_string(),
            r.epsilon.to_string(),
            r.predicate.name().to_string(),
            r.probability.to_string(),
            r.std_err.to_string(),
            r.wall_time_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows as JSON Lines, one object per row.
pub fn write_jsonl<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSpec {
    pub mechanism: Mechanism,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub noise: Option<NoiseKind>,
    /// Zipf exponent of the benchmark data.
    pub s: f64,
    pub runs: usize,
    pub warmups: usize,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(mechanism: Mechanism, d: usize, k: usize) -> Self {
        Self { mechanism, d, k, epsilon: 1.0, gamma: 0.5, noise: None, s: 1.0, runs: 10, warmups: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mechanism: Mechanism,
    pub d: usize,
    pub k: usize,
    pub median_ns: u64,
    pub runs: usize,
}

/// Median wall time of the mechanism on Zipf data. Sorting the input is
/// done once up front and excluded; runs are serial on the calling thread.
/// PEELING is timed round by round.
pub fn bench(spec: &BenchSpec) -> Result<BenchRow> {
    if spec.runs < 10 {
        return domain(format!("bench needs at least 10 runs, got {}", spec.runs));
    }
    let scores = gen_zipf(spec.d, spec.s, ZIPF_DEFAULT_SCALE)?;
    if spec.k == 0 || spec.k >= spec.d {
        return domain(format!("k = {} must lie in 1..={}", spec.k, spec.d - 1));
    }
    let runner = Runner {
        mechanism: spec.mechanism,
        k: spec.k,
        epsilon: spec.epsilon,
        gamma: spec.gamma,
        noise: spec.noise.unwrap_or(spec.mechanism.default_noise()),
    };
    let mut times = Vec::with_capacity(spec.runs);
    for i in 0..spec.warmups + spec.runs {
        let mut rng = derive_rng(spec.seed, i as u64, 0);
        let start = Instant::now();
        std::hint::black_box(runner.run_literal(&scores, &mut rng)?);
        let ns = start.elapsed().as_nanos().max(1) as u64;
        if i >= spec.warmups {
            times.push(ns);
        }
    }
    times.sort_unstable();
    let n = times.len();
    let median_ns = if n % 2 == 1 { times[n / 2] } else { (times[n / 2 - 1] + times[n / 2]) / 2 };
    Ok(BenchRow { mechanism: spec.mechanism, d: spec.d, k: spec.k, median_ns, runs: n })
}
