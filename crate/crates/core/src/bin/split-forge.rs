use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use split_forge::grouping::Strategy;
use split_forge::pipeline::{self, RunConfig};
use split_forge::Result;

#[derive(Parser)]
#[command(
    name = "split-forge",
    version,
    about = "Group-aware splits and linear probes for concept attributes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads (0 = one per core)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grouping and per-attribute train/test splits
    Split(Common),
    /// Train and evaluate probes on an existing split file
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        splits: Option<PathBuf>,
    },
    /// Merge run summaries into selectivity, CS and scatter tables
    Report {
        #[command(flatten)]
        common: Common,
        /// summary.json files (adds to `results` in the config)
        #[arg(long = "results", num_args = 1..)]
        results: Vec<PathBuf>,
    },
    /// Sweep the number of K-Means clusters
    AblateK {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
    },
    /// Write a synthetic dataset with planted supercategories
    Synth(Common),
    /// Ask an LLM endpoint for similar concept pairs
    SuggestPairs(Common),
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.strategy {
        cfg.strategy = s;
    }
    if let Some(k) = c.k {
        cfg.k = k;
    }
    if let Some(seed) = c.seed {
        cfg.seed = Some(seed);
        cfg.synth.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{:.3}", v * scale))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Split(c) => {
            let cfg = load_config(&c)?;
            let outcome = pipeline::cmd_split(&cfg)?;
            let d = &outcome.grouping.diagnostics;
            println!(
                "strategy={} groups={} coverage={:.3} splittable={}/{} out={}",
                d.strategy,
                d.n_groups,
                d.coverage,
                outcome.splits.splittable().len(),
                outcome.splits.assignments.len(),
                cfg.out.display()
            );
        }
        Command::Probe { common, splits } => {
            let mut cfg = load_config(&common)?;
            if splits.is_some() {
                cfg.splits_file = splits;
            }
            let s = pipeline::cmd_probe(&cfg)?;
            println!(
                "strategy={} feasible={}/{} mean_selectivity={} cs={}",
                s.strategy,
                s.n_feasible,
                s.n_attributes,
                fmt_opt(s.mean_f1_selectivity, 100.0),
                fmt_opt(s.cs, 1.0)
            );
        }
        Command::Report { common, results } => {
            let mut cfg = load_config(&common)?;
            cfg.results.extend(results);
            let report = pipeline::cmd_report(&cfg)?;
            print!("{}", report.table1_csv);
        }
        Command::AblateK { common, ks } => {
            let cfg = load_config(&common)?;
            let ks = if ks.is_empty() { cfg.ablation_ks.clone() } else { ks };
            let rows = pipeline::cmd_ablate_k(&cfg, &ks)?;
            print!("{}", pipeline::ablation_csv(&rows));
        }
        Command::Synth(c) => {
            let cfg = load_config(&c)?;
            let planted = pipeline::cmd_synth(&cfg)?;
            println!(
                "wrote {} concepts, {} attributes to {}",
                planted.spec.n_concepts,
                planted.attributes.len(),
                cfg.out.display()
            );
        }
        Command::SuggestPairs(c) => {
            let cfg = load_config(&c)?;
            let s = pipeline::cmd_suggest_pairs(&cfg)?;
            println!(
                "pairs={} dropped_unknown={} malformed_lines={}",
                s.pairs.pairs.len(),
                s.dropped_unknown,
                s.malformed_lines
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
