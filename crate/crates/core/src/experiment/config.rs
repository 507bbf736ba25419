//! Experiment configuration and its flat `key = value` file format.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma-separated; numeric grids may also be written as
//! `start:step:end` (inclusive).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    SymmetricSweep,
    AsymmetricSweep,
    GroupSizeSweep,
    CategorySizeSweep,
    Iterative,
    IterativeGulm,
    MovielensTable,
    MovielensBalanced,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::SymmetricSweep,
        ExperimentKind::AsymmetricSweep,
        ExperimentKind::GroupSizeSweep,
        ExperimentKind::CategorySizeSweep,
        ExperimentKind::Iterative,
        ExperimentKind::IterativeGulm,
        ExperimentKind::MovielensTable,
        ExperimentKind::MovielensBalanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SymmetricSweep => "symmetric_sweep",
            ExperimentKind::AsymmetricSweep => "asymmetric_sweep",
            ExperimentKind::GroupSizeSweep => "group_size_sweep",
            ExperimentKind::CategorySizeSweep => "category_size_sweep",
            ExperimentKind::Iterative => "iterative",
            ExperimentKind::IterativeGulm => "iterative_gulm",
            ExperimentKind::MovielensTable => "movielens_table",
            ExperimentKind::MovielensBalanced => "movielens_balanced",
        }
    }

    pub fn is_movielens(self) -> bool {
        matches!(self, ExperimentKind::MovielensTable | ExperimentKind::MovielensBalanced)
    }

    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            ExperimentKind::SymmetricSweep
                | ExperimentKind::AsymmetricSweep
                | ExperimentKind::GroupSizeSweep
                | ExperimentKind::CategorySizeSweep
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// n = m = 1,000, 10 trials.
    Full,
    /// n = m = 200, 3 trials.
    Smoke,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "smoke" => Ok(Scale::Smoke),
            other => Err(Error::Config(format!("unknown scale `{other}` (expected full or smoke)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Full => "full",
            Scale::Smoke => "smoke",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub scale: Scale,
    pub seed: u64,
    pub trials: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub density: f64,
    /// Relabel each synthetic dataset by a seeded random permutation of user
    /// and item indices before recommending.
    pub permute_indices: bool,
    /// Symmetric ρ, asymmetric ρ1 and iterative input ratios.
    pub rho_grid: Vec<f64>,
    /// ρ2 of the asymmetric sweep.
    pub asymmetric_rho2: f64,
    /// ρ1 = ρ2 of the group and category size sweeps.
    pub size_sweep_rho: f64,
    pub phi_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// Neighborhood sizes of the sweeps.
    pub k_list: Vec<usize>,
    /// Neighborhood size of the iterative and MovieLens runs.
    pub k: usize,
    pub r: usize,
    pub iterations: usize,
    pub movielens_dir: Option<PathBuf>,
    pub min_ratings: usize,
    pub min_rating: u8,
    pub genres: (String, String),
}

/// Grid values `(start + i·step)` computed from integer millionths so that
/// e.g. 0.55 is the double nearest to 0.55, not an accumulated sum.
pub fn grid(start: f64, step: f64, end: f64) -> Vec<f64> {
    let to_micro = |x: f64| (x * 1e6).round() as i64;
    let (a, s, e) = (to_micro(start), to_micro(step), to_micro(end));
    if s <= 0 || e < a {
        return Vec::new();
    }
    (0..=(e - a) / s).map(|i| (a + i * s) as f64 / 1e6).collect()
}

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind, scale: Scale) -> Self {
        let (n, trials) = match scale {
            Scale::Full => (1000, 10),
            Scale::Smoke => (200, 3),
        };
        Self {
            kind,
            scale,
            seed: 20180801,
            trials,
            n_users: n,
            n_items: n,
            density: 0.05,
            permute_indices: true,
            rho_grid: grid(0.5, 0.05, 1.0),
            asymmetric_rho2: 0.5,
            size_sweep_rho: 0.7,
            phi_grid: grid(0.05, 0.05, 0.95),
            theta_grid: grid(0.1, 0.1, 0.9),
            k_list: vec![10, 50, 100],
            k: 50,
            r: 10,
            iterations: 5,
            movielens_dir: None,
            min_ratings: 90,
            min_rating: 1,
            genres: ("Action".into(), "Romance".into()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.k == 0 || self.r == 0 || self.k_list.iter().any(|&k| k == 0) {
            return fail("k, k_list and r must be at least 1");
        }
        match self.kind {
            ExperimentKind::SymmetricSweep
            | ExperimentKind::AsymmetricSweep
            | ExperimentKind::Iterative
            | ExperimentKind::IterativeGulm
                if self.rho_grid.is_empty() =>
            {
                return fail("rho_grid is empty")
            }
            ExperimentKind::GroupSizeSweep if self.phi_grid.is_empty() => return fail("phi_grid is empty"),
            ExperimentKind::CategorySizeSweep if self.theta_grid.is_empty() => {
                return fail("theta_grid is empty")
            }
            _ => {}
        }
        if self.kind.is_sweep() && self.k_list.is_empty() {
            return fail("k_list is empty");
        }
        if self.kind.is_movielens() && self.movielens_dir.is_none() {
            return fail("movielens_dir is required for MovieLens experiments");
        }
        Ok(())
    }

    /// Every setting as `(key, value)` in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let floats = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut pairs = vec![
            ("kind", self.kind.to_string()),
            ("scale", self.scale.to_string()),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("n_users", self.n_users.to_string()),
            ("n_items", self.n_items.to_string()),
            ("density", self.density.to_string()),
            ("permute_indices", self.permute_indices.to_string()),
            ("rho_grid", floats(&self.rho_grid)),
            ("asymmetric_rho2", self.asymmetric_rho2.to_string()),
            ("size_sweep_rho", self.size_sweep_rho.to_string()),
            ("phi_grid", floats(&self.phi_grid)),
            ("theta_grid", floats(&self.theta_grid)),
            (
                "k_list",
                self.k_list.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("k", self.k.to_string()),
            ("r", self.r.to_string()),
            ("iterations", self.iterations.to_string()),
            ("min_ratings", self.min_ratings.to_string()),
            ("min_rating", self.min_rating.to_string()),
            ("genres", format!("{},{}", self.genres.0, self.genres.1)),
        ];
        if let Some(dir) = &self.movielens_dir {
            pairs.push(("movielens_dir", dir.display().to_string()));
        }
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_config_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Overrides one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
        }
        fn floats(key: &str, v: &str) -> Result<Vec<f64>> {
            let parts: Vec<&str> = v.split(':').map(str::trim).collect();
            if let [a, s, e] = parts[..] {
                return Ok(grid(num(key, a)?, num(key, s)?, num(key, e)?));
            }
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        match key {
            "kind" => self.kind = value.parse()?,
            "scale" => self.scale = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "n_users" => self.n_users = num(key, value)?,
            "n_items" => self.n_items = num(key, value)?,
            "density" => self.density = num(key, value)?,
            "permute_indices" => self.permute_indices = num(key, value)?,
            "rho_grid" => self.rho_grid = floats(key, value)?,
            "asymmetric_rho2" => self.asymmetric_rho2 = num(key, value)?,
            "size_sweep_rho" => self.size_sweep_rho = num(key, value)?,
            "phi_grid" => self.phi_grid = floats(key, value)?,
            "theta_grid" => self.theta_grid = floats(key, value)?,
            "k_list" => {
                self.k_list = value
                    .split(',')
                    .map(|x| num(key, x.trim()))
                    .collect::<Result<_>>()?
            }
            "k" => self.k = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "movielens_dir" => self.movielens_dir = Some(PathBuf::from(value)),
            "min_ratings" => self.min_ratings = num(key, value)?,
            "min_rating" => self.min_rating = num(key, value)?,
            "genres" => {
                let Some((a, b)) = value.split_once(',') else {
                    return Err(Error::Config("genres must be `First,Second`".into()));
                };
                self.genres = (a.trim().to_string(), b.trim().to_string());
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a config file body. `kind` is required; `scale` selects the
    /// preset the remaining keys override.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let lookup = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let kind: ExperimentKind = lookup("kind")
            .ok_or_else(|| Error::Config("missing `kind`".into()))?
            .parse()?;
        let scale = lookup("scale").map_or(Ok(Scale::Full), str::parse)?;
        let mut cfg = Self::preset(kind, scale);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_match_reference_ranges() {
        let rho = grid(0.5, 0.05, 1.0);
        assert_eq!(rho.len(), 11);
        assert_eq!(rho[1], 0.55);
        assert_eq!(rho[10], 1.0);
        assert_eq!(grid(0.05, 0.05, 0.95).len(), 19);
        assert_eq!(grid(0.1, 0.1, 0.9), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
    }

    #[test]
    fn config_text_round_trips() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::MovielensTable, Scale::Smoke);
        cfg.movielens_dir = Some("/data/ml-1m".into());
        cfg.k_list = vec![5, 7];
        let back = ExperimentConfig::parse(&cfg.to_config_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_grids() {
        let cfg = ExperimentConfig::parse(
            "# smoke run\nkind = symmetric_sweep\nscale = smoke  # small\nrho_grid = 0.5:0.1:0.7\ntrials=2\n",
        )
        .unwrap();
        assert_eq!(cfg.rho_grid, vec![0.5, 0.6, 0.7]);
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.n_users, 200);
    }

    #[test]
    fn bad_configs() {
        assert!(ExperimentConfig::parse("trials = 2\n").is_err());
        assert!(ExperimentConfig::parse("kind = nope\n").is_err());
        assert!(ExperimentConfig::parse("kind = iterative\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("kind = iterative\njunk\n").is_err());
        let mut cfg = ExperimentConfig::preset(ExperimentKind::Iterative, Scale::Smoke);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::preset(ExperimentKind::MovielensTable, Scale::Full);
        assert!(cfg.validate().is_err());
    }
}
