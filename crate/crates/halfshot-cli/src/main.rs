//! Command-line driver: simulations, model evaluation, benchmark scoring,
//! pair-corpus generation, and an interactive teach loop.

mod teach;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use halfshot::engine::EngineConfig;
use halfshot::grammar::Grammar;
use halfshot::sim::{sts, EmbeddingTable, TrainConfig};
use halfshot::simulate::{eval_model_protocol, run_simulation, ModelEvalRow, Variant};

#[derive(Parser)]
#[command(
    name = "halfshot",
    about = "Adaptive intent and pattern learning engine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Grammar file; the bundled 50-intent grammar when omitted
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Word-embedding table (token v1 .. vd per line); hash fallback when
    /// omitted
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Similarity threshold for attributing a request to a known intent
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    /// Longest token span one argument may capture
    #[arg(long, default_value_t = 4)]
    max_span: usize,
    /// Argument contexts averaged during pattern inference
    #[arg(long, default_value_t = 1)]
    context_samples: usize,
    /// Interactions between model retrainings
    #[arg(long, default_value_t = 50)]
    retrain_every: usize,
}

impl EngineArgs {
    fn grammar(&self) -> Result<Grammar> {
        Ok(match &self.grammar {
            Some(path) => Grammar::load(path)
                .with_context(|| format!("loading grammar {}", path.display()))?,
            None => Grammar::bundled(),
        })
    }

    fn table(&self) -> Result<EmbeddingTable> {
        Ok(match &self.embeddings {
            Some(path) => EmbeddingTable::load(path)
                .with_context(|| format!("loading embeddings {}", path.display()))?,
            None => EmbeddingTable::fallback_only(),
        })
    }

    fn engine_config(&self) -> EngineConfig {
        let mut cfg = EngineConfig::default();
        cfg.epsilon = self.epsilon;
        cfg.max_span = self.max_span;
        cfg.context_samples = self.context_samples;
        cfg.retrain_every = self.retrain_every;
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run simulated user interactions and report detection accuracies
    Simulate {
        #[command(flatten)]
        common: EngineArgs,
        /// Interactions per simulation
        #[arg(long, default_value_t = 700)]
        interactions: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::Aidme)]
        variant: VariantArg,
        /// Seeds to run: seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Directory for per-seed reports and the flat metrics table
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on grammar pairs from one pattern split and score a disjoint
    /// split: per-submodel and ensemble F1/precision/recall
    EvalModel {
        #[command(flatten)]
        common: EngineArgs,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on a tab-separated benchmark file and report the Pearson
    /// correlation on a test file
    StsEval {
        /// Train rows: [meta ...] score TAB sentence1 TAB sentence2
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generate a labeled pair corpus from a grammar in the benchmark
    /// format
    GenPairs {
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interactive loop: ask, confirm or correct, teach
    Teach {
        #[command(flatten)]
        common: EngineArgs,
        /// Snapshot directory to resume from and save to
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq)]
enum VariantArg {
    Aidme,
    AidmeM,
    Oneshot,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Aidme => Variant::Aidme,
            VariantArg::AidmeM => Variant::AidmeM,
            VariantArg::Oneshot => Variant::Oneshot,
        }
    }
}

fn cmd_simulate(
    common: &EngineArgs,
    interactions: usize,
    variant: Variant,
    repeats: usize,
    out: Option<&PathBuf>,
) -> Result<()> {
    if repeats == 0 || interactions == 0 {
        bail!("repeats and interactions must be positive");
    }
    let grammar = common.grammar()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut reports = Vec::with_capacity(repeats);
    for i in 0..repeats {
        let seed = common.seed + i as u64;
        let report = run_simulation(
            &grammar,
            interactions,
            variant,
            seed,
            common.engine_config(),
            common.table()?,
        );
        println!("{}", report.summary_text());
        if let Some(dir) = out {
            let json = serde_json::to_string_pretty(&report)?;
            std::fs::write(dir.join(format!("report-seed{seed}.json")), json)?;
            let mut tsv = String::new();
            for (name, value) in report.metrics_table() {
                tsv.push_str(&format!("{name}\t{value}\n"));
            }
            std::fs::write(dir.join(format!("metrics-seed{seed}.tsv")), tsv)?;
        }
        reports.push(report);
    }
    if repeats > 1 {
        let mean = |f: fn(&halfshot::simulate::SimulationReport) -> f64| -> f64 {
            reports.iter().map(f).sum::<f64>() / reports.len() as f64
        };
        println!("means over {repeats} seeds:");
        println!(
            "  intents  new {:.3} known {:.3} all {:.3}",
            mean(|r| r.intent_accuracy.new),
            mean(|r| r.intent_accuracy.known),
            mean(|r| r.intent_accuracy.all)
        );
        println!(
            "  patterns new {:.3} known {:.3} all {:.3}",
            mean(|r| r.pattern_accuracy.new),
            mean(|r| r.pattern_accuracy.known),
            mean(|r| r.pattern_accuracy.all)
        );
        if let Some(dir) = out {
            let mut tsv = String::new();
            for (key, value) in [
                ("intent_accuracy_new", mean(|r| r.intent_accuracy.new)),
                ("intent_accuracy_known", mean(|r| r.intent_accuracy.known)),
                ("intent_accuracy_all", mean(|r| r.intent_accuracy.all)),
                ("pattern_accuracy_new", mean(|r| r.pattern_accuracy.new)),
                ("pattern_accuracy_known", mean(|r| r.pattern_accuracy.known)),
                ("pattern_accuracy_all", mean(|r| r.pattern_accuracy.all)),
            ] {
                tsv.push_str(&format!("{key}\t{value}\n"));
            }
            std::fs::write(dir.join("summary.tsv"), tsv)?;
        }
    }
    Ok(())
}

fn cmd_eval_model(common: &EngineArgs, repeats: usize, out: Option<&PathBuf>) -> Result<()> {
    if repeats == 0 {
        bail!("repeats must be positive");
    }
    let grammar = common.grammar()?;
    let table = common.table()?;
    let config = TrainConfig::default();
    let mut runs = Vec::with_capacity(repeats);
    for i in 0..repeats {
        let seed = common.seed + i as u64;
        let report = eval_model_protocol(&grammar, seed, &table, &config)?;
        eprintln!(
            "seed {seed}: train {} pairs ({:.1}% positive), test {} pairs ({:.1}% positive)",
            report.train_pairs,
            100.0 * report.train_positive_rate,
            report.test_pairs,
            100.0 * report.test_positive_rate
        );
        runs.push(report);
    }
    let n_rows = runs[0].rows.len();
    println!(
        "{:<22} {:>6} {:>6} {:>10} {:>8}",
        "model", "F1", "std", "precision", "recall"
    );
    let mut stats = Vec::new();
    for row in 0..n_rows {
        let name = &runs[0].rows[row].name;
        let f1s: Vec<f64> = runs.iter().map(|r| r.rows[row].f1).collect();
        let mean = f1s.iter().sum::<f64>() / f1s.len() as f64;
        let var = f1s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / f1s.len() as f64;
        let precision =
            runs.iter().map(|r| r.rows[row].precision).sum::<f64>() / runs.len() as f64;
        let recall = runs.iter().map(|r| r.rows[row].recall).sum::<f64>() / runs.len() as f64;
        println!(
            "{:<22} {:>6.3} {:>6.3} {:>10.3} {:>8.3}",
            name,
            mean,
            var.sqrt(),
            precision,
            recall
        );
        stats.push(ModelEvalRow {
            name: name.clone(),
            f1: mean,
            precision,
            recall,
        });
    }
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&stats)?)?;
    }
    Ok(())
}

fn cmd_sts_eval(
    train: &PathBuf,
    test: &PathBuf,
    embeddings: Option<&PathBuf>,
    seed: u64,
) -> Result<()> {
    let table = match embeddings {
        Some(path) => EmbeddingTable::load(path)
            .with_context(|| format!("loading embeddings {}", path.display()))?,
        None => EmbeddingTable::fallback_only(),
    };
    let config = TrainConfig::default();
    let report = sts::evaluate_files(train, test, &table, &config, seed)?;
    if report.skipped_train + report.skipped_test > 0 {
        eprintln!(
            "warning: skipped {} malformed train row(s), {} malformed test row(s)",
            report.skipped_train, report.skipped_test
        );
    }
    if report.degenerate {
        eprintln!("warning: predictions have zero variance; correlation reported as 0");
    }
    println!(
        "pearson {:.4} (trained on {} pairs, evaluated on {})",
        report.pearson, report.train_rows, report.test_rows
    );
    Ok(())
}

fn cmd_gen_pairs(
    grammar: Option<&PathBuf>,
    count: usize,
    seed: u64,
    out: Option<&PathBuf>,
) -> Result<()> {
    use rand::{Rng, SeedableRng};
    if count == 0 {
        bail!("count must be positive");
    }
    let grammar = match grammar {
        Some(path) => {
            Grammar::load(path).with_context(|| format!("loading grammar {}", path.display()))?
        }
        None => Grammar::bundled(),
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x6e6a);
    // draw a sentence pool, then label sampled pairs by intent equality
    let pool_size = (count / 2).clamp(30, 300);
    let mut pool = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while pool.len() < pool_size && attempts < pool_size * 200 {
        attempts += 1;
        let req = grammar.sample_request(&mut rng);
        if seen.insert(req.utterance.joined()) {
            pool.push(req);
        }
    }
    if pool.len() < 2 {
        bail!("grammar yields fewer than 2 distinct sentences");
    }
    let mut lines = String::new();
    for _ in 0..count {
        let i = rng.gen_range(0..pool.len());
        let mut j = rng.gen_range(0..pool.len());
        while j == i {
            j = rng.gen_range(0..pool.len());
        }
        let score = if pool[i].intent == pool[j].intent { 5.0 } else { 0.0 };
        lines.push_str(&format!(
            "{score:.1}\t{}\t{}\n",
            pool[i].utterance.joined(),
            pool[j].utterance.joined()
        ));
    }
    match out {
        Some(path) => std::fs::write(path, lines)?,
        None => print!("{lines}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports help/version through the error path too
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate {
            common,
            interactions,
            variant,
            repeats,
            out,
        } => cmd_simulate(
            common,
            *interactions,
            (*variant).into(),
            *repeats,
            out.as_ref(),
        ),
        Command::EvalModel {
            common,
            repeats,
            out,
        } => cmd_eval_model(common, *repeats, out.as_ref()),
        Command::StsEval {
            train,
            test,
            embeddings,
            seed,
        } => cmd_sts_eval(train, test, embeddings.as_ref(), *seed),
        Command::GenPairs {
            grammar,
            count,
            seed,
            out,
        } => cmd_gen_pairs(grammar.as_ref(), *count, *seed, out.as_ref()),
        Command::Teach { common, snapshot } => teach::run(common, snapshot.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
