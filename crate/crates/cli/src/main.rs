use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use activeset::baseline::{compute_big_m, solve_baseline, BigM, DualMaxima};
use activeset::dataset::{generate_database, load_database, save_database, DatasetParams, Method};
use activeset::dtree::{train_model, Hyperparams, TrainOptions, TrainedModel};
use activeset::network::{load_case, scale_loads, LoadVector, NetworkCase};
use activeset::pipeline::{evaluate, run_method, EvalConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "activeset", about = "Strategic bidding by learned active sets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample loads and label them with active sets.
    GenDb {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 0.5)]
        xm: f64,
        #[arg(long, default_value_t = 0.5)]
        xp: f64,
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        batch: usize,
        #[arg(long, default_value_t = 500)]
        max_batches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the decision tree(s) for a database.
    Train {
        #[arg(long)]
        db: PathBuf,
        /// Random hyperparameter configurations to try.
        #[arg(long, default_value_t = 20)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop the total-load feature.
        #[arg(long)]
        no_total: bool,
        /// Fix the depth instead of searching (with --min-leaf, default 1).
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        min_leaf: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the big-M MILP for one load.
    SolveBaseline {
        #[arg(long)]
        case: PathBuf,
        /// Database(s) whose dual statistics set the big-M constants.
        #[arg(long, required = true, num_args = 1..)]
        db: Vec<PathBuf>,
        /// Per-bus loads as a JSON array, inline or in a file; the case's
        /// own loads if omitted.
        #[arg(long)]
        load: Option<String>,
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
    },
    /// Solve one load with a trained model.
    Solve {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Per-bus loads as a JSON array, inline or in a file.
        #[arg(long)]
        load: Option<String>,
        /// Also try the classes under the leaf's parent node.
        #[arg(long)]
        parent: bool,
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
    },
    /// Compare models against the baseline on random loads.
    Evaluate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, num_args = 0..)]
        models: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        db: Vec<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        #[arg(long)]
        parent: bool,
        /// Load interval; defaults to the first database's.
        #[arg(long)]
        xm: Option<f64>,
        #[arg(long)]
        xp: Option<f64>,
        /// Report JSON; the table and scenario log are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid time limit {s}"))
}

/// `arg` is either an inline JSON array or a file holding one.
fn read_load(case: &NetworkCase, arg: Option<&str>) -> Result<LoadVector> {
    let Some(arg) = arg else {
        return Ok(case.default_load());
    };
    let text = if arg.trim_start().starts_with('[') {
        arg.to_owned()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    let values: Vec<f64> = serde_json::from_str(&text).with_context(|| format!("parsing load {arg}"))?;
    Ok(LoadVector::new(values)?)
}

fn big_m_from(case: &NetworkCase, dbs: &[PathBuf]) -> Result<(BigM, DualMaxima)> {
    let mut maxima = DualMaxima::default();
    for path in dbs {
        let db = load_database(path).with_context(|| format!("loading {}", path.display()))?;
        maxima.merge(&db.dual_maxima);
    }
    Ok((compute_big_m(&maxima, case)?, maxima))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDb {
            case,
            method,
            xm,
            xp,
            grid,
            delta,
            batch,
            max_batches,
            seed,
            out,
        } => {
            let case = load_case(&case)?;
            let params = DatasetParams {
                x_m: xm,
                x_p: xp,
                grid,
                delta,
                batch,
                max_batches,
            };
            let db = generate_database(method, &case, &params, seed)?;
            save_database(&db, &out)?;
            println!(
                "{method}: {} samples, {} labels, {} distinct sets, {} batches{}",
                db.samples.len(),
                db.distinct_labels(),
                db.distinct_sets(),
                db.batches,
                if db.complete { "" } else { " (batch cap reached)" }
            );
        }
        Command::Train {
            db,
            budget,
            seed,
            no_total,
            max_depth,
            min_leaf,
            out,
        } => {
            let db = load_database(&db)?;
            let hyperparams = match (max_depth, min_leaf) {
                (None, None) => None,
                (d, l) => {
                    let def = Hyperparams::default();
                    Some(Hyperparams {
                        max_depth: d.unwrap_or(def.max_depth),
                        min_samples_leaf: l.unwrap_or(def.min_samples_leaf),
                    })
                }
            };
            let opts = TrainOptions {
                include_total: !no_total,
                budget,
                hyperparams,
                ..TrainOptions::default()
            };
            let model = train_model(&db, &opts, seed)?;
            model.save(&out)?;
            println!(
                "{}: depth {} min_leaf {}, {} tree(s), train {:.3}, test {:.3}",
                model.method,
                model.hyperparams.max_depth,
                model.hyperparams.min_samples_leaf,
                model.trees.len(),
                model.train_accuracy,
                model.test_accuracy
            );
        }
        Command::SolveBaseline {
            case,
            db,
            load,
            time_limit,
        } => {
            let case = load_case(&case)?;
            let (big_m, _) = big_m_from(&case, &db)?;
            let scenario = scale_loads(&case, &read_load(&case, load.as_deref())?)?;
            let sol = solve_baseline(&scenario, &big_m, seconds(time_limit)?)?;
            println!("{}", serde_json::to_string_pretty(&sol)?);
        }
        Command::Solve {
            case,
            model,
            load,
            parent,
            time_limit,
        } => {
            let case = load_case(&case)?;
            let model = TrainedModel::load(&model)?;
            let load = read_load(&case, load.as_deref())?;
            let sol = run_method(&case, &load, &model, seconds(time_limit)?, parent)?;
            println!("{}", serde_json::to_string_pretty(&sol)?);
        }
        Command::Evaluate {
            case,
            models,
            db,
            scenarios,
            seed,
            time_limit,
            parent,
            xm,
            xp,
            out,
        } => {
            let case = load_case(&case)?;
            let first = load_database(&db[0])?;
            let (big_m, _) = big_m_from(&case, &db)?;
            let models = models
                .iter()
                .map(|p| TrainedModel::load(p).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            if scenarios == 0 {
                bail!("--scenarios must be positive");
            }
            let cfg = EvalConfig {
                n_scenarios: scenarios,
                time_limit: seconds(time_limit)?,
                seed,
                parent,
                x_m: xm.unwrap_or(first.params.x_m),
                x_p: xp.unwrap_or(first.params.x_p),
            };
            let log_path = with_suffix(&out, ".log.jsonl");
            log::info!("evaluating {scenarios} scenarios, log at {}", log_path.display());
            let (report, _) = evaluate(&case, &models, &big_m, &cfg, Some(&log_path))?;
            fs::write(&out, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", out.display()))?;
            let table = report.to_table();
            fs::write(with_suffix(&out, ".txt"), &table)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(Cli::parse())
}
