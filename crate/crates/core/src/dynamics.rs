//! Iterated recommend → accept → retrain feedback loop.
//!
//! Each iteration recommends `r` items per user from the current data
//! (optionally re-ranked by GULM). It scales the list's utilities by the top
//! recommendation's utility and accepts each recommendation independently
//! with that probability. Accepted items are merged into the data before the
//! next iteration.
//!
//! Acceptance for user `u` in iteration `t` (1-based) draws from
//! `rng::stream(seed, [t, u])`, so results do not depend on thread count.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gulm;
use crate::metrics::{BiasTable, InteractionMatrix, Labeling};
use crate::recommender::{self, ScoredItem};
use crate::rng;
use crate::table::{self, fmt_opt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reranker {
    #[default]
    None,
    Gulm,
}

impl std::str::FromStr for Reranker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Reranker::None),
            "gulm" => Ok(Reranker::Gulm),
            other => Err(Error::Config(format!("unknown reranker `{other}` (expected none or gulm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub iterations: usize,
    pub k: usize,
    pub r: usize,
    pub seed: u64,
    pub reranker: Reranker,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            k: 50,
            r: 10,
            seed: 0,
            reranker: Reranker::None,
        }
    }
}

impl DynamicsConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.r == 0 {
            return Err(Error::Config("k and r must be at least 1".into()));
        }
        Ok(())
    }
}

/// `V(u, i_j) / V(u, i_1)` for a ranked list; the first entry is exactly 1.
pub fn acceptance_probabilities(utilities: &[f64]) -> Result<Vec<f64>> {
    let &top = utilities.first().ok_or(Error::EmptyRecommendations)?;
    if top <= 0.0 {
        return Err(Error::ZeroTopUtility);
    }
    Ok(utilities.iter().map(|&v| v / top).collect())
}

/// Items accepted from one ranked list, drawing one Bernoulli per entry in order.
pub fn sample_acceptance<R: Rng>(list: &[ScoredItem], rng: &mut R) -> Vec<usize> {
    let utilities: Vec<f64> = list.iter().map(|s| s.utility).collect();
    let Ok(probs) = acceptance_probabilities(&utilities) else {
        return Vec::new();
    };
    list.iter()
        .zip(probs)
        .filter(|(_, p)| rng.gen_bool(p.clamp(0.0, 1.0)))
        .map(|(s, _)| s.item)
        .collect()
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub matrix: InteractionMatrix,
    /// Accepted items per user.
    pub accepted: Vec<usize>,
}

impl StepOutcome {
    pub fn mean_accepted(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().sum::<usize>() as f64 / self.accepted.len() as f64
    }
}

/// One iteration of the loop. `iteration` is 1-based and selects the RNG substreams.
pub fn step(s: &InteractionMatrix, labels: &Labeling, cfg: &DynamicsConfig, iteration: usize) -> Result<StepOutcome> {
    cfg.validate()?;
    let mut recs = recommender::recommend(s, cfg.k, cfg.r);
    if cfg.reranker == Reranker::Gulm {
        recs = gulm::rerank(&recs, s, labels)?.0;
    }
    let accepted_items: Vec<Vec<usize>> = (0..s.n_users())
        .into_par_iter()
        .map(|u| {
            let mut rng = rng::stream(cfg.seed, &[iteration as u64, u as u64]);
            sample_acceptance(recs.recommended(u), &mut rng)
        })
        .collect();

    let mut next = s.clone();
    let mut accepted = Vec::with_capacity(s.n_users());
    for (u, items) in accepted_items.iter().enumerate() {
        for &i in items {
            next.insert(u, i)?;
        }
        accepted.push(items.len());
    }
    Ok(StepOutcome { matrix: next, accepted })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub table: BiasTable,
    /// `None` for the input snapshot.
    pub mean_accepted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["iteration", "group", "category", "pr", "bias", "mean_accepted"];

impl Trajectory {
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for snap in &self.snapshots {
            for g in 0..snap.table.n_groups() {
                for c in 0..snap.table.n_categories() {
                    rows.push(vec![
                        snap.iteration.to_string(),
                        g.to_string(),
                        c.to_string(),
                        fmt_opt(snap.table.pr(g, c)),
                        fmt_opt(snap.table.bias(g, c)),
                        fmt_opt(snap.mean_accepted),
                    ]);
                }
            }
        }
        rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        table::emit_csv(path, &TRAJECTORY_HEADER, &self.csv_rows())
    }
}

/// Runs `cfg.iterations` steps from `s0`; the returned data matrix is the final one.
pub fn run(s0: &InteractionMatrix, labels: &Labeling, cfg: &DynamicsConfig) -> Result<(Trajectory, InteractionMatrix)> {
    cfg.validate()?;
    let mut snapshots = vec![Snapshot {
        iteration: 0,
        table: BiasTable::of(s0, labels)?,
        mean_accepted: None,
    }];
    let mut current = s0.clone();
    for t in 1..=cfg.iterations {
        let outcome = step(&current, labels, cfg, t)?;
        current = outcome.matrix.clone();
        snapshots.push(Snapshot {
            iteration: t,
            table: BiasTable::of(&current, labels)?,
            mean_accepted: Some(outcome.mean_accepted()),
        });
    }
    Ok((Trajectory { snapshots }, current))
}
