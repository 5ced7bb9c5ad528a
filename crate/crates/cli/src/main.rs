use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use confdim::bound::{self, Source};
use confdim::rank::{self, RankKey, Ranking};
use confdim::runner::{self, ExperimentConfig, ExperimentPlan, ReportFormat, RunRecord};

#[derive(Parser)]
#[command(name = "confdim", version, about = "Confidence-dimension measurement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config and persist the run record.
    Measure {
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output path for the JSON run record.
        #[arg(long, short, default_value = "run.json")]
        out: PathBuf,
        /// Worker threads; defaults to the config value or all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check that model rankings agree across the settings of one or more run records.
    Rank {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Key::Cd)]
        key: Key,
    },
    /// Simulate sample-mean concentration and compare with the Hoeffding floor.
    VerifyBound {
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// bernoulli(P), uniform01 or beta(A,B).
        #[arg(long, default_value = "bernoulli(0.5)")]
        source: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
    /// Render a persisted run record.
    Report {
        record: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Key {
    Cd,
    P,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
    /// One row per setting, one CD column per model.
    Plot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<String, Box<dyn std::error::Error>> {
    match cmd {
        Command::Measure { config, seed, out, workers } => measure(&config, seed, &out, workers),
        Command::Rank { records, key } => rank_records(&records, key),
        Command::VerifyBound { m, delta, trials, source, seed, csv } => {
            let source: Source = source.parse()?;
            let results = bound::sweep_concentration(&m, &delta, source, trials, seed)?;
            if csv {
                let mut buf = Vec::new();
                bound::write_results_csv(&results, &mut buf)?;
                return Ok(String::from_utf8(buf)?);
            }
            let mut text = format!(
                "{:>6} {:>8} {:>10} {:>10} {:>10} {:>9}\n",
                "m", "delta", "empirical", "floor", "slack", "stderr"
            );
            for r in &results {
                text += &format!(
                    "{:>6} {:>8} {:>10.5} {:>10.5} {:>10.5} {:>9.5}\n",
                    r.m, r.delta, r.empirical_coverage, r.theoretical_floor, r.slack, r.stderr
                );
            }
            let held = results.iter().filter(|r| r.holds_within(3.0)).count();
            text += &format!("{held}/{} cells satisfy the floor within 3 standard errors ({source})\n", results.len());
            Ok(text)
        }
        Command::Report { record, format } => {
            let record = RunRecord::load(&record)?;
            let text = match format {
                Format::Csv => runner::emit_report(&record, ReportFormat::Csv)?,
                Format::Json => runner::emit_report(&record, ReportFormat::Json)? + "\n",
                Format::Table => runner::emit_report(&record, ReportFormat::Table)?,
                Format::Plot => runner::plot_csv(&record)?,
            };
            Ok(text)
        }
    }
}

fn measure(config: &Path, seed: Option<u64>, out: &Path, workers: Option<usize>) -> Result<String, Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let record = ExperimentPlan::with_base_dir(cfg, base)?.run()?;
    record.save(out)?;
    let ok = record.successful_cells().count();
    let failed = record.failed_cells().count();
    let mut text = format!("{ok} cells ok, {failed} failed; record written to {}\n", out.display());
    for c in record.failed_cells() {
        if let runner::CellOutcome::Failed { error } = &c.outcome {
            text += &format!("  cell {} ({} / {}): {error}\n", c.key.index, c.setting_id, c.key.model_id);
        }
    }
    Ok(text)
}

fn rank_records(paths: &[PathBuf], key: Key) -> Result<String, Box<dyn std::error::Error>> {
    let key = match key {
        Key::Cd => RankKey::Cd,
        Key::P => RankKey::P,
    };
    let mut pooled: Vec<Ranking> = Vec::new();
    for path in paths {
        let record = RunRecord::load(path)?;
        let models = record.config.models.len();
        pooled.extend(runner::rankings(&record, key)?.into_iter().filter(|r| r.ordered.len() == models));
    }
    let report = rank::consistency_report(&pooled)?;
    let mut text = String::new();
    for r in &report.rankings {
        text += &format!("{:<32} {}\n", r.setting_id, r.model_ids().join(" < "));
    }
    let verdict = if report.consistent { "consistent" } else { "inconsistent" };
    text += &format!("min_tau = {} ({verdict}, {} rankings)\n", report.min_tau, report.rankings.len());
    Ok(text)
}
