//! `thn`: dataset checks, synthesis, live-update training, gradient checks.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thn_core::graph::{check_requirements, MIN_HETEROGENEITY, MIN_TEMPORALITY};
use thn_core::io::{load_dataset, parse_synth_spec, save_dataset, synth_generate, DatasetManifest};
use thn_core::training::rule_oracle_auprc;
use thn_core::{checks, live_update_run};

use config::{parse_scheme, parse_task, parse_update, RunConfigFile, TaskChoice, UpdateChoice};

const EXIT_ERROR: u8 = 1;
const EXIT_REQUIREMENT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "thn", version, about = "Learning on temporal heterogeneous networks")]
struct Cli {
    /// Worker threads for parallel kernels (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print dataset metrics and the requirement verdict (exit 2 on FAIL).
    Stats {
        /// Dataset directory holding schema.txt and edges.tsv.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
    },
    /// Generate a planted-rule dataset from a spec file.
    Synth {
        /// Generator spec file.
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Output dataset directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overrides the generator file's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the live-update protocol and write `<out>.json` and `<out>.csv`.
    Train {
        /// Run config file (`key = value` lines); defaults when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Dataset directory.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Report path stem.
        #[arg(long, value_name = "STEM")]
        out: PathBuf,
        /// Seed for initialization, splits and sampling.
        #[arg(long)]
        seed: Option<u64>,
        /// Temporal scheme.
        #[arg(long, value_parser = parse_scheme, value_name = "uta|atu")]
        scheme: Option<thn_core::Scheme>,
        /// Update module.
        #[arg(long, value_parser = parse_update, value_name = "gru|mlp|avg")]
        update: Option<UpdateChoice>,
        /// Past weight of the weighted-average update.
        #[arg(long)]
        alpha: Option<f64>,
        /// Monorelational or multirelational prediction.
        #[arg(long, value_parser = parse_task, value_name = "mono|multi")]
        task: Option<TaskChoice>,
        /// Target relation for `--task mono`.
        #[arg(long, value_name = "NAME")]
        relation: Option<String>,
    },
    /// Finite-difference check of every parameterized component (exit 2 on FAIL).
    Gradcheck,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn run(command: Command) -> AnyResult<ExitCode> {
    match command {
        Command::Stats { data } => stats(&data),
        Command::Synth { config, out, seed } => synth(&config, &out, seed),
        Command::Train {
            config,
            data,
            out,
            seed,
            scheme,
            update,
            alpha,
            task,
            relation,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfigFile::load(p)?,
                None => RunConfigFile::default(),
            };
            if let Some(s) = seed {
                cfg.live.seed = s;
                cfg.model.seed = s;
            }
            if let Some(s) = scheme {
                cfg.model.scheme = s;
            }
            if let Some(u) = update {
                cfg.update = u;
            }
            if let Some(a) = alpha {
                if cfg.update != UpdateChoice::Avg {
                    return Err("--alpha applies only to the avg update".into());
                }
                cfg.alpha = a;
            }
            if let Some(t) = task {
                cfg.task = t;
            }
            if relation.is_some() {
                cfg.target_relation = relation;
            }
            train(&cfg, &data, &out)
        }
        Command::Gradcheck => gradcheck(),
    }
}

fn stats(data: &Path) -> AnyResult<ExitCode> {
    let g = load_dataset(&DatasetManifest::in_dir(data))?;
    let m = check_requirements(&g);
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"));
    println!("heterogeneity           {}", m.heterogeneity);
    println!("temporality             {}", m.temporality);
    println!("evolutivity             {}", opt(m.evolutivity_raw));
    println!("evolutivity_normalized  {}", opt(m.evolutivity_normalized));
    println!("time_granularity        {}", g.time_granularity());
    let mut failed = Vec::new();
    if m.heterogeneity < MIN_HETEROGENEITY {
        failed.push(format!("heterogeneity < {MIN_HETEROGENEITY}"));
    }
    if m.temporality < MIN_TEMPORALITY {
        failed.push(format!("temporality < {MIN_TEMPORALITY}"));
    }
    if m.evolutivity_raw.is_none_or(|e| e < 0.0) {
        failed.push("evolutivity undefined".to_string());
    }
    if m.meets_requirements {
        println!("verdict                 PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verdict                 FAIL ({})", failed.join(", "));
        Ok(ExitCode::from(EXIT_REQUIREMENT))
    }
}

fn synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> AnyResult<ExitCode> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let mut spec = parse_synth_spec(&text, spec_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (g, labels) = synth_generate(&spec)?;
    save_dataset(&g, out)?;
    println!(
        "wrote {} ({} snapshots, {} edges)",
        out.display(),
        g.num_snapshots(),
        g.snapshots().iter().map(|s| s.num_edges()).sum::<usize>()
    );
    if spec.rule.is_some() {
        let per = rule_oracle_auprc(&g, labels.trigger, labels.target, 1, spec.seed)?;
        let vals: Vec<f64> = per.iter().filter_map(|p| p.1).collect();
        for (t, a) in &per {
            match a {
                Some(a) => println!("oracle snapshot {t}: auprc {a:.6}"),
                None => println!("oracle snapshot {t}: skipped (no target edges)"),
            }
        }
        if !vals.is_empty() {
            println!("oracle mean auprc {:.6}", vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn train(cfg: &RunConfigFile, data: &Path, out: &Path) -> AnyResult<ExitCode> {
    let g = load_dataset(&DatasetManifest::in_dir(data))?;
    let (spec, live) = cfg.resolve(&g)?;
    let report = live_update_run(&spec, &g, &live)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.write(out)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    for s in &report.snapshots {
        println!(
            "snapshot {}: auprc {} mrr {} epochs {}",
            s.tested_on,
            opt(s.auprc),
            opt(s.mrr),
            s.epochs
        );
    }
    println!("mean auprc {} mrr {}", opt(report.mean_auprc), opt(report.mean_mrr));
    Ok(ExitCode::SUCCESS)
}

fn gradcheck() -> AnyResult<ExitCode> {
    let results = checks::run_all(None)?;
    let mut all = true;
    for r in &results {
        all &= r.passed;
        println!(
            "{:<26} max_rel_error {:.3e}  {}",
            r.component,
            r.max_rel_error,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    println!("{} components, tolerance {:e}", results.len(), checks::TOLERANCE);
    Ok(if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REQUIREMENT)
    })
}
