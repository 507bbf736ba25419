//! Experiment runs: parameter sweeps, feedback-loop trajectories and the
//! MovieLens gender/genre table, each written as CSV plus a run manifest.
//!
//! Trial `t` of every synthetic experiment generates its dataset from
//! `derive_seed(seed, [t])`, relabels its users and items with
//! `derive_seed(seed, [t, 2])` (unless `permute_indices` is off) and runs its
//! feedback loop with `derive_seed(seed, [t, 1])`; balanced MovieLens trials sample with
//! `derive_seed(seed, [t])`. Trials and grid points are evaluated in
//! parallel and merged in grid order, so outputs do not depend on the thread
//! count.
//!
//! Averaged files hold the arithmetic mean over trials of every value,
//! skipping undefined (`NA`) trials; the `*_trials.csv` files hold the raw
//! per-trial values.

mod config;
pub mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{grid, ExperimentConfig, ExperimentKind, Scale};

use crate::dynamics::{self, DynamicsConfig, Reranker};
use crate::error::{Error, Result};
use crate::ingest::{self, BuildOptions, MovieLensDataset};
use crate::metrics::{bias_report, BiasReport, BiasTable, BIAS_REPORT_HEADER};
use crate::recommender;
use crate::rng::{self, RNG_ALGORITHM};
use crate::synthgen::{self, SyntheticConfig};
use crate::table::{emit_csv, fmt_f64, fmt_opt};

pub const SWEEP_COLUMNS: [&str; 8] = [
    "group",
    "category",
    "pr_in",
    "pr_out",
    "bias_in",
    "bias_out",
    "bias_disparity",
    "candidate_pr",
];

pub const ITERATIVE_COLUMNS: [&str; 7] = ["rho", "iteration", "group", "category", "pr", "bias", "mean_accepted"];

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub version: String,
    pub rng_algorithm: String,
    /// Resolved configuration, in config-file key order.
    pub config: Vec<(String, String)>,
    pub trial_seeds: Vec<u64>,
    pub wall_clock_secs: f64,
    pub outputs: Vec<PathBuf>,
    /// Free-form run log lines (data summaries, deviations, input checksums).
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn file_name(kind: ExperimentKind) -> String {
        format!("manifest_{kind}.json")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let text: String = self.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        ExperimentConfig::parse(&text)
    }
}

pub fn trial_seed(root: u64, trial: usize) -> u64 {
    rng::derive_seed(root, &[trial as u64])
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// One recommendation run on one dataset.
#[derive(Debug, Clone)]
struct SweepRecord {
    k: usize,
    param: f64,
    trial: usize,
    report: BiasReport,
    candidates: BiasTable,
}

fn sweep_param_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SymmetricSweep => "rho",
        ExperimentKind::AsymmetricSweep => "rho1",
        ExperimentKind::GroupSizeSweep => "phi",
        _ => "theta",
    }
}

fn synthetic_for(cfg: &ExperimentConfig, param: f64, seed: u64) -> SyntheticConfig {
    let base = SyntheticConfig {
        n_users: cfg.n_users,
        n_items: cfg.n_items,
        density: cfg.density,
        seed,
        ..SyntheticConfig::default()
    };
    match cfg.kind {
        ExperimentKind::SymmetricSweep | ExperimentKind::Iterative | ExperimentKind::IterativeGulm => SyntheticConfig {
            rho1: param,
            rho2: param,
            ..base
        },
        ExperimentKind::AsymmetricSweep => SyntheticConfig {
            rho1: param,
            rho2: cfg.asymmetric_rho2,
            ..base
        },
        ExperimentKind::GroupSizeSweep => SyntheticConfig {
            group_fraction: param,
            rho1: cfg.size_sweep_rho,
            rho2: cfg.size_sweep_rho,
            ..base
        },
        _ => SyntheticConfig {
            category_fraction: param,
            rho1: cfg.size_sweep_rho,
            rho2: cfg.size_sweep_rho,
            ..base
        },
    }
}

fn synthetic_trial(cfg: &ExperimentConfig, param: f64, trial: usize) -> Result<synthgen::SyntheticDataset> {
    let ds = synthgen::generate(&synthetic_for(cfg, param, trial_seed(cfg.seed, trial)))?;
    if cfg.permute_indices {
        ds.permuted(rng::derive_seed(cfg.seed, &[trial as u64, 2]))
    } else {
        Ok(ds)
    }
}

fn sweep_grid(cfg: &ExperimentConfig) -> &[f64] {
    match cfg.kind {
        ExperimentKind::GroupSizeSweep => &cfg.phi_grid,
        ExperimentKind::CategorySizeSweep => &cfg.theta_grid,
        _ => &cfg.rho_grid,
    }
}

fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let grid = sweep_grid(cfg);
    for &p in grid {
        synthetic_for(cfg, p, 0).validate()?;
    }
    let jobs: Vec<(f64, usize)> = grid
        .iter()
        .flat_map(|&p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let per_job: Vec<Vec<SweepRecord>> = jobs
        .par_iter()
        .map(|&(param, trial)| -> Result<Vec<SweepRecord>> {
            let ds = synthetic_trial(cfg, param, trial)?;
            cfg.k_list
                .iter()
                .map(|&k| {
                    let recs = recommender::recommend(&ds.matrix, k, cfg.r);
                    Ok(SweepRecord {
                        k,
                        param,
                        trial,
                        report: bias_report(&ds.matrix, &recs.to_interaction_matrix(), &ds.labeling)?,
                        candidates: BiasTable::of(&recs.candidate_matrix(), &ds.labeling)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<SweepRecord> = per_job.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then(a.param.total_cmp(&b.param))
            .then(a.trial.cmp(&b.trial))
    });

    let param_name = sweep_param_name(cfg.kind);
    let cell_values = |r: &SweepRecord, g: usize, c: usize| -> [Option<f64>; 6] {
        let cell = r.report.cell(g, c);
        [
            cell.pr_input,
            cell.pr_output,
            cell.bias_input,
            cell.bias_output,
            cell.bias_disparity,
            r.candidates.pr(g, c),
        ]
    };

    let mut trial_rows = Vec::new();
    for r in &records {
        for cell in r.report.cells() {
            let mut row = vec![
                r.trial.to_string(),
                trial_seed(cfg.seed, r.trial).to_string(),
                r.k.to_string(),
                fmt_f64(r.param),
                cell.group.to_string(),
                cell.category.to_string(),
            ];
            row.extend(cell_values(r, cell.group, cell.category).map(fmt_opt));
            trial_rows.push(row);
        }
    }

    let mut groups: BTreeMap<(usize, i64), Vec<&SweepRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry((r.k, (r.param * 1e6).round() as i64)).or_default().push(r);
    }
    let mut mean_rows = Vec::new();
    for ((k, _), recs) in &groups {
        let first = recs[0];
        for cell in first.report.cells() {
            let (g, c) = (cell.group, cell.category);
            let mut row = vec![k.to_string(), fmt_f64(first.param), g.to_string(), c.to_string()];
            for field in 0..6 {
                row.push(fmt_opt(mean(recs.iter().map(|r| cell_values(r, g, c)[field]))));
            }
            mean_rows.push(row);
        }
    }

    let mut header = vec!["k", param_name];
    header.extend(SWEEP_COLUMNS);
    let mut trial_header = vec!["trial", "seed"];
    trial_header.extend(header.iter().copied());
    write_outputs(cfg.kind, out_dir, &header, &mean_rows, &trial_header, &trial_rows, manifest)
}

fn write_outputs(
    kind: ExperimentKind,
    out_dir: &Path,
    header: &[&str],
    rows: &[Vec<String>],
    trial_header: &[&str],
    trial_rows: &[Vec<String>],
    manifest: &mut RunManifest,
) -> Result<()> {
    let main = out_dir.join(format!("{kind}.csv"));
    let trials = out_dir.join(format!("{kind}_trials.csv"));
    emit_csv(&main, header, rows)?;
    emit_csv(&trials, trial_header, trial_rows)?;
    manifest.outputs.push(main);
    manifest.outputs.push(trials);
    Ok(())
}

fn run_iterative(cfg: &ExperimentConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let reranker = if cfg.kind == ExperimentKind::IterativeGulm {
        Reranker::Gulm
    } else {
        Reranker::None
    };
    for &p in &cfg.rho_grid {
        synthetic_for(cfg, p, 0).validate()?;
    }
    let jobs: Vec<(f64, usize)> = cfg
        .rho_grid
        .iter()
        .flat_map(|&p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let trajectories: Vec<dynamics::Trajectory> = jobs
        .par_iter()
        .map(|&(rho, trial)| {
            let ds = synthetic_trial(cfg, rho, trial)?;
            let dcfg = DynamicsConfig {
                iterations: cfg.iterations,
                k: cfg.k,
                r: cfg.r,
                seed: rng::derive_seed(cfg.seed, &[trial as u64, 1]),
                reranker,
            };
            Ok(dynamics::run(&ds.matrix, &ds.labeling, &dcfg)?.0)
        })
        .collect::<Result<_>>()?;

    let mut trial_rows = Vec::new();
    for (&(rho, trial), traj) in jobs.iter().zip(&trajectories) {
        for row in traj.csv_rows() {
            let mut full = vec![
                trial.to_string(),
                trial_seed(cfg.seed, trial).to_string(),
                fmt_f64(rho),
            ];
            full.extend(row);
            trial_rows.push(full);
        }
    }

    let mut mean_rows = Vec::new();
    for (pi, &rho) in cfg.rho_grid.iter().enumerate() {
        let trajs = &trajectories[pi * cfg.trials..(pi + 1) * cfg.trials];
        for (t, snap) in trajs[0].snapshots.iter().enumerate() {
            for g in 0..snap.table.n_groups() {
                for c in 0..snap.table.n_categories() {
                    mean_rows.push(vec![
                        fmt_f64(rho),
                        t.to_string(),
                        g.to_string(),
                        c.to_string(),
                        fmt_opt(mean(trajs.iter().map(|tr| tr.snapshots[t].table.pr(g, c)))),
                        fmt_opt(mean(trajs.iter().map(|tr| tr.snapshots[t].table.bias(g, c)))),
                        fmt_opt(mean(trajs.iter().map(|tr| tr.snapshots[t].mean_accepted))),
                    ]);
                }
            }
        }
    }
    let mut trial_header = vec!["trial", "seed"];
    trial_header.extend(ITERATIVE_COLUMNS);
    write_outputs(cfg.kind, out_dir, &ITERATIVE_COLUMNS, &mean_rows, &trial_header, &trial_rows, manifest)
}

/// Reference counts for the MovieLens-1M preprocessing.
pub const MOVIELENS_REFERENCE: [(&str, u64); 5] = [
    ("users", 1259),
    ("male_users", 981),
    ("female_users", 278),
    ("first_genre_items", 468),
    ("second_genre_items", 463),
];

fn movielens_summary(ds: &MovieLensDataset) -> Vec<(&'static str, u64)> {
    vec![
        ("users", ds.matrix.n_users() as u64),
        ("male_users", ds.group_count(0)),
        ("female_users", ds.group_count(1)),
        ("first_genre_items", ds.labeling.category_size(0)),
        ("second_genre_items", ds.labeling.category_size(1)),
        ("dual_genre_excluded", ds.dual_genre_movies as u64),
    ]
}

fn movielens_report(ds: &MovieLensDataset, k: usize, r: usize) -> Result<BiasReport> {
    let recs = recommender::recommend(&ds.matrix, k, r);
    bias_report(&ds.matrix, &recs.to_interaction_matrix(), &ds.labeling)
}

fn run_movielens(cfg: &ExperimentConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let dir = cfg
        .movielens_dir
        .as_deref()
        .ok_or_else(|| Error::Config("movielens_dir is required".into()))?;
    ingest::check_files(dir)?;
    for path in ingest::file_paths(dir) {
        manifest
            .notes
            .push(format!("sha256 {} {}", ingest::sha256_hex(&path)?, path.display()));
    }
    let opts = BuildOptions {
        genres: cfg.genres.clone(),
        min_ratings: cfg.min_ratings,
        min_rating: cfg.min_rating,
    };
    let ds = ingest::load(dir, &opts)?;

    let reference: BTreeMap<&str, u64> = MOVIELENS_REFERENCE.into_iter().collect();
    let mut summary_rows = Vec::new();
    for (name, value) in movielens_summary(&ds) {
        let expected = reference.get(name).copied();
        if let Some(e) = expected {
            if e != value {
                let note = format!("{name}: measured {value}, reference {e} (delta {})", value as i64 - e as i64);
                info!("{note}");
                manifest.notes.push(note);
            }
        }
        summary_rows.push(vec![
            name.to_string(),
            value.to_string(),
            expected.map_or_else(|| "NA".to_string(), |e| e.to_string()),
        ]);
    }
    let summary = out_dir.join(format!("{}_summary.csv", cfg.kind));
    emit_csv(&summary, &["metric", "value", "reference"], &summary_rows)?;
    manifest.outputs.push(summary);

    let names = (Some(&ds.group_names[..]), Some(&ds.category_names[..]));
    match cfg.kind {
        ExperimentKind::MovielensTable => {
            let users = out_dir.join("movielens_users.txt");
            let items = out_dir.join("movielens_items.txt");
            let id_map = out_dir.join("movielens_id_map.csv");
            crate::dataset::write(&ds.matrix, &ds.labeling, &users, &items)?;
            ds.write_id_map(&id_map)?;
            manifest.outputs.extend([users, items, id_map]);

            let report = movielens_report(&ds, cfg.k, cfg.r)?;
            let path = out_dir.join(format!("{}.csv", cfg.kind));
            emit_csv(&path, &BIAS_REPORT_HEADER, &report.csv_rows(names.0, names.1))?;
            manifest.outputs.push(path);
        }
        _ => {
            let reports: Vec<BiasReport> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let balanced = ingest::balance_groups(&ds, trial_seed(cfg.seed, t))?;
                    movielens_report(&balanced, cfg.k, cfg.r)
                })
                .collect::<Result<_>>()?;
            let mut trial_rows = Vec::new();
            for (t, rep) in reports.iter().enumerate() {
                for row in rep.csv_rows(names.0, names.1) {
                    let mut full = vec![t.to_string(), trial_seed(cfg.seed, t).to_string()];
                    full.extend(row);
                    trial_rows.push(full);
                }
            }
            let mut mean_rows = Vec::new();
            for cell in reports[0].cells() {
                let (g, c) = (cell.group, cell.category);
                let pick = |f: fn(&crate::metrics::BiasCell) -> Option<f64>| {
                    fmt_opt(mean(reports.iter().map(|r| f(r.cell(g, c)))))
                };
                mean_rows.push(vec![
                    ds.group_names[g].clone(),
                    ds.category_names[c].clone(),
                    pick(|x| x.pr_input),
                    pick(|x| x.pr_output),
                    pick(|x| x.bias_input),
                    pick(|x| x.bias_output),
                    pick(|x| x.bias_disparity),
                ]);
            }
            let mut trial_header = vec!["trial", "seed"];
            trial_header.extend(BIAS_REPORT_HEADER);
            write_outputs(cfg.kind, out_dir, &BIAS_REPORT_HEADER, &mean_rows, &trial_header, &trial_rows, manifest)?;
        }
    }
    Ok(())
}

/// Runs one experiment into `out_dir` and writes its manifest there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let started = Instant::now();
    let mut manifest = RunManifest {
        kind: cfg.kind.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        config: cfg.to_pairs(),
        trial_seeds: (0..cfg.trials).map(|t| trial_seed(cfg.seed, t)).collect(),
        wall_clock_secs: 0.0,
        outputs: Vec::new(),
        notes: Vec::new(),
    };
    info!("running {} ({} scale, {} trials)", cfg.kind, cfg.scale, cfg.trials);
    match cfg.kind {
        k if k.is_sweep() => run_sweep(cfg, out_dir, &mut manifest)?,
        ExperimentKind::Iterative | ExperimentKind::IterativeGulm => run_iterative(cfg, out_dir, &mut manifest)?,
        _ => run_movielens(cfg, out_dir, &mut manifest)?,
    }
    manifest.wall_clock_secs = started.elapsed().as_secs_f64();
    manifest.write(&out_dir.join(RunManifest::file_name(cfg.kind)))?;
    Ok(manifest)
}

/// Re-runs the experiment recorded in `manifest` into `out_dir`.
pub fn rerun(manifest: &RunManifest, out_dir: &Path) -> Result<RunManifest> {
    run_experiment(&manifest.experiment_config()?, out_dir)
}
