//! Seeded two-group / two-category synthetic selection data.
//!
//! Users `[0, ⌊φn⌋)` form group 0 (G1) and favor category 0 (C1), made of
//! items `[0, ⌊θm⌋)`; the remaining users form group 1 (G2) and favor
//! category 1 (C2). Every user makes exactly `s = round(density·m)` distinct
//! selections. Each selection first picks the user's favored category with
//! probability `ρ` of their group (the other one otherwise), then an item of
//! that category uniformly among those not yet selected. If the picked
//! category is exhausted the draw falls back to the other one and is counted
//! in [`SyntheticDataset::exhausted_draws`].
//!
//! One ChaCha8 stream seeded with [`SyntheticConfig::seed`] drives the whole
//! dataset, users in index order.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{InteractionMatrix, Labeling};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Share of users in G1.
    pub group_fraction: f64,
    /// Share of items in C1.
    pub category_fraction: f64,
    /// Preference ratio of G1 for C1.
    pub rho1: f64,
    /// Preference ratio of G2 for C2.
    pub rho2: f64,
    /// Expected share of items each user selects.
    pub density: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 1000,
            n_items: 1000,
            group_fraction: 0.5,
            category_fraction: 0.5,
            rho1: 0.5,
            rho2: 0.5,
            density: 0.05,
            seed: 0,
        }
    }
}

/// `⌊fraction·total⌋`, tolerant of grid values such as 0.35 that sit just
/// below the exact product in binary floating point.
fn block_size(fraction: f64, total: usize) -> usize {
    (fraction * total as f64 + 1e-9).floor() as usize
}

impl SyntheticConfig {
    pub fn symmetric(rho: f64, seed: u64) -> Self {
        Self {
            rho1: rho,
            rho2: rho,
            seed,
            ..Self::default()
        }
    }

    pub fn g1_size(&self) -> usize {
        block_size(self.group_fraction, self.n_users)
    }

    pub fn c1_size(&self) -> usize {
        block_size(self.category_fraction, self.n_items)
    }

    pub fn selections_per_user(&self) -> usize {
        (self.density * self.n_items as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let (g1, c1, s) = (self.g1_size(), self.c1_size(), self.selections_per_user());
        if g1 == 0 || g1 >= self.n_users {
            return Err(Error::ConfigInfeasible(format!(
                "group fraction {} leaves an empty group of {} users",
                self.group_fraction, self.n_users
            )));
        }
        if c1 == 0 || c1 >= self.n_items {
            return Err(Error::ConfigInfeasible(format!(
                "category fraction {} leaves an empty category of {} items",
                self.category_fraction, self.n_items
            )));
        }
        for (name, rho) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::ConfigInfeasible(format!("{name} = {rho} is outside [0, 1]")));
            }
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(Error::ConfigInfeasible(format!("density {} is outside (0, 1)", self.density)));
        }
        let c2 = self.n_items - c1;
        for (group, rho, favored, other) in [(1, self.rho1, c1, c2), (2, self.rho2, c2, c1)] {
            let want_favored = (rho * s as f64).floor() as usize;
            let want_other = ((1.0 - rho) * s as f64).floor() as usize;
            if want_favored > favored || want_other > other {
                return Err(Error::ConfigInfeasible(format!(
                    "G{group} expects {want_favored}/{want_other} of {s} selections in categories of {favored}/{other} items"
                )));
            }
        }
        Ok(())
    }

    /// Resolved sizes, e.g. `G1=500 G2=500 C1=500 C2=500 s=50`.
    pub fn describe(&self) -> String {
        let (g1, c1) = (self.g1_size(), self.c1_size());
        format!(
            "G1={} G2={} C1={} C2={} s={}",
            g1,
            self.n_users.saturating_sub(g1),
            c1,
            self.n_items.saturating_sub(c1),
            self.selections_per_user()
        )
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub matrix: InteractionMatrix,
    pub labeling: Labeling,
    /// Draws that fell back to the other category because the picked one had no items left.
    pub exhausted_draws: usize,
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let (g1, c1, s) = (cfg.g1_size(), cfg.c1_size(), cfg.selections_per_user());
    let labeling = Labeling::two_blocks(cfg.n_users, g1, cfg.n_items, c1)?;
    let first: Vec<u32> = (0..c1 as u32).collect();
    let second: Vec<u32> = (c1 as u32..cfg.n_items as u32).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut exhausted_draws = 0;
    let mut rows = Vec::with_capacity(cfg.n_users);
    for user in 0..cfg.n_users {
        let (rho, mut favored, mut other) = if user < g1 {
            (cfg.rho1, first.clone(), second.clone())
        } else {
            (cfg.rho2, second.clone(), first.clone())
        };
        let mut row = Vec::with_capacity(s);
        for _ in 0..s {
            let mut pick_favored = rng.gen_bool(rho);
            if (pick_favored && favored.is_empty()) || (!pick_favored && other.is_empty()) {
                exhausted_draws += 1;
                pick_favored = !pick_favored;
            }
            let pool = if pick_favored { &mut favored } else { &mut other };
            let j = rng.gen_range(0..pool.len());
            row.push(pool.swap_remove(j));
        }
        rows.push(row);
    }
    if exhausted_draws > 0 {
        warn!("{}: {exhausted_draws} draws fell back to the other category", cfg.describe());
    }
    Ok(SyntheticDataset {
        matrix: InteractionMatrix::from_rows(cfg.n_items, rows)?,
        labeling,
        exhausted_draws,
    })
}

impl SyntheticDataset {
    /// Relabels users and items by uniform random permutations drawn from
    /// `seed`. Group and category sizes and every selection are preserved;
    /// only index order moves, and with it which users and items win
    /// index-based tie breaks.
    pub fn permuted(&self, seed: u64) -> Result<SyntheticDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (self.matrix.n_users(), self.matrix.n_items());
        let mut user_to: Vec<usize> = (0..n).collect();
        let mut item_to: Vec<u32> = (0..m as u32).collect();
        user_to.shuffle(&mut rng);
        item_to.shuffle(&mut rng);

        let mut rows = vec![Vec::new(); n];
        let mut groups = vec![0; n];
        let mut categories = vec![0; m];
        for (u, &to) in user_to.iter().enumerate() {
            rows[to] = self.matrix.row(u).iter().map(|&i| item_to[i as usize]).collect();
            groups[to] = self.labeling.group_of(u) as u32;
        }
        for (i, &to) in item_to.iter().enumerate() {
            categories[to as usize] = self.labeling.category_of(i) as u32;
        }
        Ok(SyntheticDataset {
            matrix: InteractionMatrix::from_rows(m, rows)?,
            labeling: Labeling::new(groups, categories)?,
            exhausted_draws: self.exhausted_draws,
        })
    }
}
