use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dptopk::analysis::{classify_subset_k, predicate_probability, Predicate, PredicateKind};
use dptopk::canonical::{canonical_select, class_loss, exact_class_distribution};
use dptopk::harness::{
    bench, configure_threads, run_sweep, write_csv, write_jsonl, zipf_raw, BenchSpec, EvalMode, ExperimentSpec,
    InputFormat, Mechanism, Runner, ScoreSource, ZIPF_DEFAULT_D, ZIPF_DEFAULT_SCALE,
};
use dptopk::noise::NoiseKind;
use dptopk::rng::seeded;
use dptopk::{Error, ScoreVector};
use serde_json::json;

/// Differentially private top-k selection.
#[derive(Parser)]
#[command(name = "dptopk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one private top-k selection and print it as JSON.
    Sample(SampleArgs),
    /// Print the exact class distribution of the canonical mechanism.
    Probs(ProbsArgs),
    /// Estimate utility predicates over a grid of privacy budgets.
    Sweep(SweepArgs),
    /// Time mechanisms on Zipf data.
    Bench(BenchArgs),
    /// Write Zipf scores, one per line.
    GenZipf(ZipfArgs),
}

#[derive(Args, Clone)]
struct ZipfArgs {
    #[arg(long = "zipf-d", default_value_t = ZIPF_DEFAULT_D)]
    d: usize,
    #[arg(long = "zipf-s", default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = ZIPF_DEFAULT_SCALE)]
    scale: f64,
}

#[derive(Args)]
struct Source {
    /// Score file; Zipf data is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `lines` or `csv:COLUMN`.
    #[arg(long, default_value = "lines")]
    format: InputFormat,
    #[command(flatten)]
    zipf: ZipfArgs,
    #[arg(long = "delta-minus", default_value_t = 1.0)]
    delta_minus: f64,
    #[arg(long = "delta-plus", default_value_t = 1.0)]
    delta_plus: f64,
}

impl Source {
    fn spec(&self) -> ScoreSource {
        match &self.input {
            Some(path) => ScoreSource::File { path: path.clone(), format: self.format.clone() },
            None => ScoreSource::Zipf { d: self.zipf.d, s: self.zipf.s, scale: self.zipf.scale },
        }
    }

    fn load(&self) -> Result<ScoreVector, Error> {
        self.spec().load(self.delta_minus, self.delta_plus)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Defaults to the mechanism's usual noise.
    #[arg(long)]
    noise: Option<NoiseKind>,
    #[arg(long, default_value = "canonical")]
    mechanism: Mechanism,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ProbsArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Print TOP, GREAT and GOOD instead of every class.
    #[arg(long)]
    summary: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    k: usize,
    #[arg(long = "epsilon", default_values_t = [1.0])]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long)]
    noise: Option<NoiseKind>,
    #[arg(long = "mechanism", default_values_t = [Mechanism::Canonical])]
    mechanisms: Vec<Mechanism>,
    #[arg(long = "predicate", default_values_t = PredicateKind::ALL)]
    predicates: Vec<PredicateKind>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact probabilities where available (default).
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Monte Carlo estimates for every mechanism.
    #[arg(long)]
    mc: bool,
    /// Report zero wall time so output is reproducible byte for byte.
    #[arg(long = "no-timing")]
    no_timing: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "mechanism", default_values_t = [Mechanism::Canonical])]
    mechanisms: Vec<Mechanism>,
    #[arg(long = "d", default_values_t = [10_000usize])]
    ds: Vec<usize>,
    #[arg(long = "k", default_values_t = [100usize])]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long)]
    noise: Option<NoiseKind>,
    #[arg(long = "zipf-s", default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

fn sample(a: &SampleArgs) -> Result<(), Error> {
    let scores = a.source.load()?;
    let noise = a.noise.unwrap_or(a.mechanism.default_noise());
    let mut rng = seeded(a.seed);
    let runner = Runner { mechanism: a.mechanism, k: a.k, epsilon: a.epsilon, gamma: a.gamma, noise };
    let (mut subset, cls, loss, noisy) = if a.mechanism.is_canonical() {
        let sel = canonical_select(&scores, a.k, a.epsilon, runner.effective_gamma(), noise, &mut rng)?;
        (sel.subset, sel.cls, sel.loss, Some(sel.noisy_value))
    } else {
        let subset = runner.run_literal(&scores, &mut rng)?;
        let cls = classify_subset_k(&subset, a.k, &scores)?;
        let loss = class_loss(cls.h, cls.t, runner.effective_gamma(), &scores)?;
        (subset, cls, loss, None)
    };
    subset.sort_unstable();
    let indices: Vec<usize> = subset.iter().map(|i| i + 1).collect();
    let out = json!({
        "mechanism": a.mechanism.name(),
        "indices": indices,
        "h": cls.h,
        "t": cls.t,
        "loss": loss,
        "noisy_value": noisy,
    });
    println!("{out}");
    Ok(())
}

fn probs(a: &ProbsArgs) -> Result<(), Error> {
    let scores = a.source.load()?;
    let dist = exact_class_distribution(&scores, a.k, a.epsilon, a.gamma)?;
    let mut out = BufWriter::new(io::stdout().lock());
    if a.summary {
        if !a.json {
            writeln!(out, "predicate,probability")?;
        }
        for kind in PredicateKind::ALL {
            let p = predicate_probability(&dist, Predicate::new(kind, a.k))?;
            if a.json {
                writeln!(out, "{}", json!({ "predicate": kind.name(), "probability": p }))?;
            } else {
                writeln!(out, "{kind},{p}")?;
            }
        }
    } else {
        if !a.json {
            writeln!(out, "h,t,probability")?;
        }
        for (h, t, lp) in dist.entries() {
            if a.json {
                writeln!(out, "{}", json!({ "h": h, "t": t, "probability": lp.exp() }))?;
            } else {
                writeln!(out, "{h},{t},{}", lp.exp())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<(), Error> {
    let mut spec = ExperimentSpec::new(a.source.spec(), a.k);
    spec.mechanisms = a.mechanisms.clone();
    spec.epsilons = a.epsilons.clone();
    spec.gamma = a.gamma;
    spec.noise = a.noise;
    spec.predicates = a.predicates.clone();
    spec.trials = a.trials;
    spec.seed = a.seed;
    spec.delta_minus = a.source.delta_minus;
    spec.delta_plus = a.source.delta_plus;
    spec.mode = if a.mc { EvalMode::MonteCarlo } else { EvalMode::Exact };
    spec.record_timing = !a.no_timing;
    let report = run_sweep(&spec)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = BufWriter::new(io::stdout().lock());
    if a.json {
        write_jsonl(&report.rows, out)
    } else {
        write_csv(&report.rows, out)
    }
}

fn bench_cmd(a: &BenchArgs) -> Result<(), Error> {
    let mut out = BufWriter::new(io::stdout().lock());
    if !a.json {
        writeln!(out, "mechanism,d,k,median_ns,runs")?;
    }
    for &m in &a.mechanisms {
        for &d in &a.ds {
            for &k in &a.ks {
                let mut spec = BenchSpec::new(m, d, k);
                spec.epsilon = a.epsilon;
                spec.gamma = a.gamma;
                spec.noise = a.noise;
                spec.s = a.s;
                spec.runs = a.runs;
                spec.seed = a.seed;
                let row = bench(&spec)?;
                if a.json {
                    writeln!(out, "{}", serde_json::to_string(&row).map_err(|e| Error::Internal(e.to_string()))?)?;
                } else {
                    writeln!(out, "{},{},{},{},{}", row.mechanism, row.d, row.k, row.median_ns, row.runs)?;
                }
                out.flush()?;
            }
        }
    }
    Ok(())
}

fn gen_zipf(a: &ZipfArgs) -> Result<(), Error> {
    let mut out = BufWriter::new(io::stdout().lock());
    for x in zipf_raw(a.d, a.s, a.scale)? {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Unsupported(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Sample(a) => sample(a),
        Command::Probs(a) => probs(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench_cmd(a),
        Command::GenZipf(a) => gen_zipf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dptopk: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
