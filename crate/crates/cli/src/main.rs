use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use biasdisp::dynamics::{self, DynamicsConfig, Reranker};
use biasdisp::experiment::validate::{self, Tolerances};
use biasdisp::experiment::{self, ExperimentConfig, ExperimentKind, RunManifest, Scale};
use biasdisp::ingest::{self, BuildOptions};
use biasdisp::metrics::bias_report;
use biasdisp::synthgen::{self, SyntheticConfig};
use biasdisp::{dataset, gulm, recommender, Error, InteractionMatrix, Labeling};

const USERS_FILE: &str = "users.txt";
const ITEMS_FILE: &str = "items.txt";

/// Bias disparity in user-based collaborative filtering: data generation,
/// recommendation, re-ranking, feedback dynamics and experiment runs.
#[derive(Parser)]
#[command(name = "biasdisp", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Preset scale for experiments
    #[arg(long, global = true, value_parser = ["full", "smoke"])]
    scale: Option<String>,
}

#[derive(Args)]
struct DataArg {
    /// Directory holding users.txt and items.txt
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long, default_value_t = 50)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    r: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-group, two-category dataset
    Generate {
        #[arg(long, default_value_t = 1000)]
        n_users: usize,
        #[arg(long, default_value_t = 1000)]
        n_items: usize,
        /// Fraction of users in group 1
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        /// Fraction of items in category 1
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 0.5)]
        rho1: f64,
        /// Defaults to rho1
        #[arg(long)]
        rho2: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        density: f64,
    },
    /// Write top-r UserKNN recommendations
    Recommend {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        knn: KnnArgs,
    },
    /// Write the input/output bias report of UserKNN recommendations
    Report {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        knn: KnnArgs,
    },
    /// Run the recommend/accept feedback loop
    Dynamics {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        knn: KnnArgs,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        #[arg(long, default_value = "none", value_parser = ["none", "gulm"])]
        reranker: String,
    },
    /// Re-rank recommendations so each group keeps its input preference ratios
    Rerank {
        #[command(flatten)]
        data: DataArg,
        #[command(flatten)]
        knn: KnnArgs,
    },
    /// Build the gender/genre dataset from MovieLens-1M files
    Ingest {
        /// Directory with ratings.dat, movies.dat and users.dat
        #[arg(long)]
        movielens: PathBuf,
        #[arg(long, default_value_t = 90)]
        min_ratings: usize,
        /// Lowest rating value counted as a selection
        #[arg(long, default_value_t = 1)]
        min_rating: u8,
        #[arg(long, default_value = "Action,Romance")]
        genres: String,
        /// Sample the larger group down to the size of the smaller one
        #[arg(long)]
        balanced: bool,
        /// Expected checksum of one input file, e.g. `ratings.dat=<hex>` (repeatable)
        #[arg(long = "sha256")]
        checksums: Vec<String>,
    },
    /// Run an experiment (from a preset, a config file or a manifest)
    Experiment {
        /// Experiment kind; required unless --config or --manifest is given
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Directory with the MovieLens-1M files
        #[arg(long)]
        movielens: Option<PathBuf>,
        /// Re-run the experiment recorded in this manifest
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Check run outputs in --out against the acceptance thresholds
    Validate {
        /// Override a tolerance, e.g. `iter_flat=0.03` (repeatable)
        #[arg(long = "tolerance")]
        tolerances: Vec<String>,
        /// Check only these criteria (repeatable)
        #[arg(long = "criterion")]
        criteria: Vec<String>,
    },
}

enum Failure {
    Validation,
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::MissingRun(_) => 3,
        _ => 2,
    }
}

fn load_data(arg: &DataArg) -> Result<(InteractionMatrix, Labeling), Error> {
    dataset::read(&arg.data.join(USERS_FILE), &arg.data.join(ITEMS_FILE))
}

fn create_out(out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })
}

fn experiment_config(common: &Common, kind: Option<&str>, trials: Option<usize>, movielens: Option<&Path>) -> Result<ExperimentConfig, Error> {
    let scale: Option<Scale> = common.scale.as_deref().map(str::parse).transpose()?;
    let mut cfg = match (&common.config, kind) {
        (Some(path), _) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(k) = kind {
                cfg.set("kind", k)?;
            }
            if let Some(s) = scale {
                cfg.scale = s;
            }
            cfg
        }
        (None, Some(k)) => ExperimentConfig::preset(k.parse::<ExperimentKind>()?, scale.unwrap_or(Scale::Full)),
        (None, None) => return Err(Error::Config("--kind, --config or --manifest is required".into())),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(dir) = movielens {
        cfg.movielens_dir = Some(dir.to_path_buf());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    let out = &common.out;
    match cli.command {
        Command::Generate {
            n_users,
            n_items,
            phi,
            theta,
            rho1,
            rho2,
            density,
        } => {
            let cfg = SyntheticConfig {
                n_users,
                n_items,
                group_fraction: phi,
                category_fraction: theta,
                rho1,
                rho2: rho2.unwrap_or(rho1),
                density,
                seed: common.seed.unwrap_or(0),
            };
            let ds = synthgen::generate(&cfg)?;
            create_out(out)?;
            dataset::write(&ds.matrix, &ds.labeling, &out.join(USERS_FILE), &out.join(ITEMS_FILE))?;
            info!("generated {}", cfg.describe());
        }
        Command::Recommend { data, knn } => {
            let (s, _) = load_data(&data)?;
            create_out(out)?;
            recommender::recommend(&s, knn.k, knn.r).write_csv(&out.join("recommendations.csv"))?;
        }
        Command::Report { data, knn } => {
            let (s, labels) = load_data(&data)?;
            let recs = recommender::recommend(&s, knn.k, knn.r);
            let report = bias_report(&s, &recs.to_interaction_matrix(), &labels)?;
            create_out(out)?;
            report.write_csv(&out.join("bias_report.csv"))?;
            for row in report.csv_rows(None, None) {
                println!("{}", row.join(","));
            }
        }
        Command::Dynamics {
            data,
            knn,
            iterations,
            reranker,
        } => {
            let (s, labels) = load_data(&data)?;
            let cfg = DynamicsConfig {
                iterations,
                k: knn.k,
                r: knn.r,
                seed: common.seed.unwrap_or(0),
                reranker: reranker.parse::<Reranker>()?,
            };
            let (traj, last) = dynamics::run(&s, &labels, &cfg)?;
            create_out(out)?;
            traj.write_csv(&out.join("trajectory.csv"))?;
            dataset::write(&last, &labels, &out.join(USERS_FILE), &out.join(ITEMS_FILE))?;
        }
        Command::Rerank { data, knn } => {
            let (s, labels) = load_data(&data)?;
            let recs = recommender::recommend(&s, knn.k, knn.r);
            let (reranked, plan) = gulm::rerank(&recs, &s, &labels)?;
            create_out(out)?;
            reranked.write_csv(&out.join("recommendations.csv"))?;
            plan.write_csv(&out.join("rerank_plan.csv"))?;
            let report = bias_report(&s, &reranked.to_interaction_matrix(), &labels)?;
            report.write_csv(&out.join("bias_report.csv"))?;
        }
        Command::Ingest {
            movielens,
            min_ratings,
            min_rating,
            genres,
            balanced,
            checksums,
        } => {
            let (a, b) = genres
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("--genres `{genres}` must name two genres")))?;
            let opts = BuildOptions {
                genres: (a.trim().to_string(), b.trim().to_string()),
                min_ratings,
                min_rating,
            };
            ingest::check_files(&movielens)?;
            let expected = checksums
                .iter()
                .map(|c| {
                    c.split_once('=')
                        .map(|(f, h)| (f.to_string(), h.to_string()))
                        .ok_or_else(|| Error::Config(format!("--sha256 `{c}` is not FILE=HEX")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ingest::verify_checksums(&movielens, &expected)?;
            for path in ingest::file_paths(&movielens) {
                info!("sha256 {} {}", ingest::sha256_hex(&path)?, path.display());
            }
            let mut ds = ingest::load(&movielens, &opts)?;
            if balanced {
                ds = ingest::balance_groups(&ds, common.seed.unwrap_or(0))?;
            }
            create_out(out)?;
            dataset::write(&ds.matrix, &ds.labeling, &out.join(USERS_FILE), &out.join(ITEMS_FILE))?;
            ds.write_id_map(&out.join("id_map.csv"))?;
            println!(
                "users {} ({} {}, {} {}), items {} {} / {} {}, dual-genre excluded {}",
                ds.matrix.n_users(),
                ds.group_count(0),
                ds.group_names[0],
                ds.group_count(1),
                ds.group_names[1],
                ds.labeling.category_size(0),
                ds.category_names[0],
                ds.labeling.category_size(1),
                ds.category_names[1],
                ds.dual_genre_movies
            );
        }
        Command::Experiment {
            kind,
            trials,
            movielens,
            manifest,
        } => {
            let cfg = match manifest {
                Some(path) => RunManifest::read(&path)?.experiment_config()?,
                None => experiment_config(common, kind.as_deref(), trials, movielens.as_deref())?,
            };
            let m = experiment::run_experiment(&cfg, out)?;
            for note in &m.notes {
                println!("{note}");
            }
            println!("{} finished in {:.1}s", m.kind, m.wall_clock_secs);
        }
        Command::Validate { tolerances, criteria } => {
            let tol = Tolerances::default().with_overrides(tolerances.iter().map(String::as_str))?;
            let results = if criteria.is_empty() {
                validate::validate_acceptance(out, &tol)
            } else {
                criteria
                    .iter()
                    .map(|id| validate::check(out, id, &tol))
                    .collect::<Result<_, _>>()?
            };
            for r in &results {
                println!("{r}");
            }
            if results.iter().any(|r| !r.passed) {
                return Err(Failure::Validation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
