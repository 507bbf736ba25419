mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use biasdisp::experiment::validate::{self, Tolerances};
use biasdisp::experiment::{grid, rerun, run_experiment, ExperimentConfig, ExperimentKind, RunManifest, Scale};
use biasdisp::table::{parse_opt, CsvTable};

fn smoke(kind: ExperimentKind, movielens: Option<&Path>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(kind, Scale::Smoke);
    if let Some(dir) = movielens {
        cfg.movielens_dir = Some(dir.to_path_buf());
        cfg.min_ratings = 15;
    }
    cfg
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "txt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn fixture_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_movielens_fixture(dir.path(), 3);
    dir
}

#[test]
fn every_kind_runs_at_smoke_scale() {
    let ml = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    for kind in ExperimentKind::ALL {
        let cfg = smoke(kind, kind.is_movielens().then(|| ml.path()));
        let manifest = run_experiment(&cfg, out.path()).unwrap();
        assert!(!manifest.outputs.is_empty());
        for path in &manifest.outputs {
            assert!(path.exists(), "{}", path.display());
        }
        let main = CsvTable::read(&out.path().join(format!("{kind}.csv"))).unwrap();
        let expected_rows = match kind {
            ExperimentKind::SymmetricSweep | ExperimentKind::AsymmetricSweep => 3 * 11 * 4,
            ExperimentKind::GroupSizeSweep => 3 * 19 * 4,
            ExperimentKind::CategorySizeSweep => 3 * 9 * 4,
            ExperimentKind::Iterative | ExperimentKind::IterativeGulm => 11 * 6 * 4,
            _ => 4,
        };
        assert_eq!(main.rows.len(), expected_rows, "{kind}");
        let read_back = RunManifest::read(&out.path().join(RunManifest::file_name(kind))).unwrap();
        assert_eq!(read_back, manifest);
        assert_eq!(read_back.experiment_config().unwrap(), cfg);
    }
    let table = CsvTable::read(&out.path().join("movielens_table.csv")).unwrap();
    let g = table.column("group").unwrap();
    let c = table.column("category").unwrap();
    let cells: Vec<(String, String)> = table.rows.iter().map(|r| (r[g].clone(), r[c].clone())).collect();
    assert_eq!(
        cells,
        [("M", "Action"), ("M", "Romance"), ("F", "Action"), ("F", "Romance")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    assert!(out.path().join("movielens_id_map.csv").exists());

    let results = validate::validate_acceptance(out.path(), &Tolerances::default());
    assert_eq!(results.len(), validate::criterion_ids().len());
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let ml = fixture_dir();
    for kind in ExperimentKind::ALL {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let manifest = run_experiment(&smoke(kind, kind.is_movielens().then(|| ml.path())), a.path()).unwrap();
        rerun(&RunManifest::read(&a.path().join(RunManifest::file_name(kind))).unwrap(), b.path()).unwrap();
        let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{kind}");
        assert_eq!(manifest.trial_seeds.len(), manifest.experiment_config().unwrap().trials);
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let cfg = smoke(ExperimentKind::IterativeGulm, None);
    let run = |threads: usize| -> (tempfile::TempDir, BTreeMap<String, Vec<u8>>) {
        let dir = tempfile::tempdir().unwrap();
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg, dir.path()).unwrap());
        let files = csv_files(dir.path());
        (dir, files)
    };
    assert_eq!(run(1).1, run(3).1);
}

#[test]
fn trial_seeds_are_distinct() {
    let cfg = ExperimentConfig::preset(ExperimentKind::SymmetricSweep, Scale::Full);
    let out = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        rho_grid: vec![0.5],
        k_list: vec![50],
        ..cfg
    };
    let manifest = run_experiment(&cfg, out.path()).unwrap();
    let mut seeds = manifest.trial_seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 10);

    // unbiased input stays unbiased on average
    let t = CsvTable::read(&out.path().join("symmetric_sweep.csv")).unwrap();
    let pr = t.column("pr_out").unwrap();
    let g = t.column("group").unwrap();
    let c = t.column("category").unwrap();
    for row in t.rows.iter().filter(|r| r[g] == r[c]) {
        let v = parse_opt(&row[pr]).unwrap();
        assert!((v - 0.5).abs() <= 0.03, "{v}");
    }
}

#[test]
fn small_minority_group_has_negative_disparity() {
    let cfg = ExperimentConfig {
        phi_grid: vec![0.2],
        k_list: vec![50],
        ..ExperimentConfig::preset(ExperimentKind::GroupSizeSweep, Scale::Full)
    };
    let out = tempfile::tempdir().unwrap();
    run_experiment(&cfg, out.path()).unwrap();
    let t = CsvTable::read(&out.path().join("group_size_sweep.csv")).unwrap();
    let row = &t.rows[0];
    assert_eq!((row[2].as_str(), row[3].as_str()), ("0", "0"));
    let pr_out = parse_opt(&row[t.column("pr_out").unwrap()]).unwrap();
    assert!(pr_out < 0.7, "{pr_out}");
}

#[test]
fn config_text_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("exp.conf");
    fs::write(&path, "# smoke run\nkind = iterative\nscale = smoke\nrho_grid = 0.6:0.1:0.8\ntrials = 2\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.rho_grid, grid(0.6, 0.1, 0.8));
    assert_eq!(cfg.trials, 2);
    assert_eq!(cfg.n_users, 200);
    assert_eq!(ExperimentConfig::parse(&cfg.to_config_text()).unwrap(), cfg);
}

#[test]
fn invalid_configs_fail_before_running() {
    let out = tempfile::tempdir().unwrap();
    let bad = ExperimentConfig {
        trials: 0,
        ..smoke(ExperimentKind::SymmetricSweep, None)
    };
    assert!(run_experiment(&bad, &out.path().join("x")).is_err());
    assert!(!out.path().join("x").exists());
    let no_data = smoke(ExperimentKind::MovielensTable, None);
    assert!(run_experiment(&no_data, out.path()).is_err());
    let infeasible = ExperimentConfig {
        density: 0.5,
        ..smoke(ExperimentKind::CategorySizeSweep, None)
    };
    assert!(run_experiment(&infeasible, out.path()).is_err());
}
