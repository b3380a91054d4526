//! `weaver`: run continual-learning experiments from a JSON config.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or arguments, 1 for
//! failures while running.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weaver_core::eval::fmt_num;
use weaver_core::experiment::{
    run_ablation, run_cross_eval, run_experiment, run_project_embeddings, ExperimentConfig, Strategy,
};
use weaver_core::stats::{aso, DEFAULT_ALPHA, DEFAULT_BOOTSTRAP, DEFAULT_TAU};
use weaver_core::{Error, Result};

#[derive(Parser)]
#[command(name = "weaver", version, about = "Continual NER experiments with size-weighted checkpoint averaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every strategy over every order and seed, then aggregate tables.
    Run(ExperimentArgs),
    /// One independent model per corpus evaluated on every test set.
    CrossEval(ExperimentArgs),
    /// WEAVER with and without the config's frozen layer prefix.
    Ablation(ExperimentArgs),
    /// PCA projections of token representations under independent, joint
    /// and WEAVER models.
    ProjectEmbeddings(ExperimentArgs),
    /// Almost stochastic order test between two score samples.
    Aso(AsoArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's output_dir.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Replaces the config's seeds (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seed_override: Option<Vec<u64>>,
    /// Maximum number of concurrent runs.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args)]
struct AsoArgs {
    /// Scores of system A: a JSON array or numbers separated by whitespace or commas.
    #[arg(long)]
    a: PathBuf,
    /// Scores of system B.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.output {
            cfg.output_dir = out.clone();
        }
        if let Some(seeds) = &self.seed_override {
            cfg.seeds = seeds.clone();
        }
        if self.jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())));
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: {s:?}: {e}", path.display()))))
        .collect()
}

fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<()> {
    let summary = run_experiment(cfg, jobs)?;
    println!("{} averaged final F1, mean (sd) over {} seed(s)", summary.task_label, cfg.seeds.len());
    for &st in &cfg.strategies {
        let cells: Vec<String> = summary
            .cells_of(st)
            .map(|c| format!("{} ({})", fmt_num(c.final_f1_mean), fmt_num(c.final_f1_sd)))
            .collect();
        println!("  {:<9} {}", st.name(), cells.join("  "));
    }
    for c in summary.cells.iter().filter(|c| c.strategy.is_sequential()) {
        if let (Some(b), Some(f)) = (c.bwt_mean, c.fwt_mean) {
            println!("  {:<9} order {} BWT {} FWT {}", c.strategy.name(), c.order_index, fmt_num(b), fmt_num(f));
        }
    }
    for p in &summary.aso {
        println!("  ASO order {} {} vs {}: eps_min {}", p.order_index, p.a, p.b, fmt_num(p.eps_min));
    }
    println!("tables written to {}", cfg.output_dir.join("tables").display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(&args.load()?, args.jobs),
        Command::CrossEval(args) => {
            let cfg = args.load()?;
            let r = run_cross_eval(&cfg, args.jobs)?;
            println!("trained_on \\ tested_on: {}", r.task_names.join(" "));
            for (name, row) in r.task_names.iter().zip(&r.mean) {
                let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
                println!("  {name}: {}", cells.join(" "));
            }
            println!("diagonal minus off-diagonal: {}", fmt_num(r.diagonal_gap()));
            Ok(())
        }
        Command::Ablation(args) => {
            let cfg = args.load()?;
            let r = run_ablation(&cfg, args.jobs)?;
            let row = |v: &[f64]| v.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(" ");
            println!("per-stage averaged F1 ({})", Strategy::Weaver);
            println!("  full:             {}", row(&r.full_mean));
            println!("  frozen {} layers: {}", r.freeze_layers, row(&r.frozen_mean));
            Ok(())
        }
        Command::ProjectEmbeddings(args) => {
            let cfg = args.load()?;
            let all = run_project_embeddings(&cfg, args.jobs)?;
            println!("centroid distance between corpora: independent joint weaver");
            for (seed, d) in cfg.seeds.iter().zip(&all) {
                println!("  seed {seed}: {} {} {}", fmt_num(d.independent), fmt_num(d.joint), fmt_num(d.weaver));
            }
            Ok(())
        }
        Command::Aso(args) => {
            let a = read_scores(&args.a)?;
            let b = read_scores(&args.b)?;
            let r = aso(&a, &b, args.alpha, args.tau, args.bootstrap, args.seed).map_err(|e| match e {
                Error::Argument(m) => Error::Config(m),
                other => other,
            })?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
