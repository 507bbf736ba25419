//! User-based K-nearest-neighbor recommendation with Jaccard similarity.
//!
//! For user `u` with neighborhood `N_K(u)`, the utility of an item `i` that
//! `u` has not selected is the similarity-weighted fraction of neighbors that
//! selected it:
//!
//! ```text
//! V(u,i) = Σ_{n∈N_K(u)} JSim(u,n)·S(n,i) / Σ_{n∈N_K(u)} JSim(u,n)
//! ```
//!
//! Ordering rules, all deterministic:
//! - neighbors: similarity descending, then user index ascending;
//! - candidates: utility descending, then item index ascending.
//!
//! Zero-similarity users may fill a neighborhood but carry no weight. A user
//! whose neighborhood has zero total similarity gets no candidates.
//!
//! Both sums run over neighbors in neighborhood order, so a utility has one
//! exact floating-point value regardless of how it is computed.

use std::cmp::Ordering;
use std::path::Path;

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{CategoryCounts, InteractionMatrix, Labeling};
use crate::table::{self, fmt_f64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub user: usize,
    pub similarity: f64,
}

/// `N_K(u)` in neighbor order.
pub type NeighborList = Vec<Neighbor>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    pub item: usize,
    pub utility: f64,
}

/// Utility descending, item ascending.
pub fn ranking_order(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    b.utility
        .total_cmp(&a.utility)
        .then_with(|| a.item.cmp(&b.item))
}

fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.user.cmp(&b.user))
}

/// `|a ∩ b| / |a ∪ b|` over sorted item rows; 0 when both are empty.
pub fn jaccard_similarity(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    jaccard_from_counts(common, a.len(), b.len())
}

fn jaccard_from_counts(common: usize, len_a: usize, len_b: usize) -> f64 {
    let union = len_a + len_b - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

fn select_top(mut all: Vec<Neighbor>, k: usize) -> NeighborList {
    if all.len() > k {
        all.select_nth_unstable_by(k, neighbor_order);
        all.truncate(k);
    }
    all.sort_unstable_by(neighbor_order);
    all
}

/// The `k` most Jaccard-similar users to `user`, excluding `user` itself.
pub fn top_k_neighbors(s: &InteractionMatrix, user: usize, k: usize) -> NeighborList {
    let own = s.row(user);
    let all = (0..s.n_users())
        .filter(|&v| v != user)
        .map(|v| Neighbor {
            user: v,
            similarity: jaccard_similarity(own, s.row(v)),
        })
        .collect();
    select_top(all, k)
}

/// Neighborhoods of every user.
///
/// Intersection sizes come from an inverted item → users index, so the cost
/// is driven by co-selections rather than by all user pairs.
pub fn all_neighbors(s: &InteractionMatrix, k: usize) -> Vec<NeighborList> {
    let columns = s.item_users();
    let n = s.n_users();
    (0..n)
        .into_par_iter()
        .map(|u| {
            let mut common = vec![0u32; n];
            for &item in s.row(u) {
                for &v in &columns[item as usize] {
                    common[v as usize] += 1;
                }
            }
            let own = s.row(u).len();
            let all = (0..n)
                .filter(|&v| v != u)
                .map(|v| Neighbor {
                    user: v,
                    similarity: jaccard_from_counts(common[v] as usize, own, s.row(v).len()),
                })
                .collect();
            select_top(all, k)
        })
        .collect()
}

/// `V(user, item)` for an item the user has not selected.
pub fn utility(s: &InteractionMatrix, user: usize, item: usize, neighbors: &[Neighbor]) -> Result<f64> {
    if s.contains(user, item) {
        return Err(Error::AlreadySelected { user, item });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for n in neighbors {
        if s.contains(n.user, item) {
            num += n.similarity;
        }
        den += n.similarity;
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Every positive-utility unselected item of one user, ranked.
fn rank_candidates(s: &InteractionMatrix, user: usize, neighbors: &[Neighbor], scratch: &mut [f64]) -> Vec<ScoredItem> {
    let mut den = 0.0;
    let mut touched: Vec<u32> = Vec::new();
    for n in neighbors {
        den += n.similarity;
        if n.similarity == 0.0 {
            continue;
        }
        for &item in s.row(n.user) {
            let acc = &mut scratch[item as usize];
            if *acc == 0.0 {
                touched.push(item);
            }
            *acc += n.similarity;
        }
    }
    let own = s.row(user);
    let mut ranked: Vec<ScoredItem> = touched
        .iter()
        .filter(|&&item| own.binary_search(&item).is_err())
        .map(|&item| ScoredItem {
            item: item as usize,
            utility: scratch[item as usize] / den,
        })
        .collect();
    for &item in &touched {
        scratch[item as usize] = 0.0;
    }
    ranked.sort_unstable_by(ranking_order);
    ranked
}

/// Per-user recommendations together with the full candidate ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRecommendations {
    /// All unselected items with positive utility, ranked.
    pub candidates: Vec<ScoredItem>,
    /// The recommended items, ranked. Initially the top `r` candidates.
    pub recommended: Vec<ScoredItem>,
}

impl UserRecommendations {
    pub fn is_recommended(&self, item: usize) -> bool {
        self.recommended.iter().any(|s| s.item == item)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationSet {
    r: usize,
    n_items: usize,
    users: Vec<UserRecommendations>,
}

pub const RECOMMENDATIONS_HEADER: [&str; 4] = ["user", "rank", "item", "utility"];

impl RecommendationSet {
    pub fn from_users(r: usize, n_items: usize, users: Vec<UserRecommendations>) -> Self {
        Self { r, n_items, users }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn user(&self, user: usize) -> &UserRecommendations {
        &self.users[user]
    }

    pub fn users(&self) -> &[UserRecommendations] {
        &self.users
    }

    pub(crate) fn user_mut(&mut self, user: usize) -> &mut UserRecommendations {
        &mut self.users[user]
    }

    pub fn recommended(&self, user: usize) -> &[ScoredItem] {
        &self.users[user].recommended
    }

    pub fn candidates(&self, user: usize) -> &[ScoredItem] {
        &self.users[user].candidates
    }

    /// Users that received fewer than `r` recommendations.
    pub fn short_users(&self) -> Vec<usize> {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.recommended.len() < self.r)
            .map(|(i, _)| i)
            .collect()
    }

    /// `R(u,i) = 1` iff `i` is recommended to `u`.
    pub fn to_interaction_matrix(&self) -> InteractionMatrix {
        let rows = self
            .users
            .iter()
            .map(|u| u.recommended.iter().map(|s| s.item as u32).collect())
            .collect();
        InteractionMatrix::from_rows(self.n_items, rows).expect("recommended items are distinct and in range")
    }

    /// `C(u,i) = 1` iff `i` has positive utility for `u`.
    pub fn candidate_matrix(&self) -> InteractionMatrix {
        let rows = self
            .users
            .iter()
            .map(|u| u.candidates.iter().map(|s| s.item as u32).collect())
            .collect();
        InteractionMatrix::from_rows(self.n_items, rows).expect("candidate items are distinct and in range")
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.users
            .iter()
            .enumerate()
            .flat_map(|(u, recs)| {
                recs.recommended.iter().enumerate().map(move |(rank, s)| {
                    vec![
                        u.to_string(),
                        (rank + 1).to_string(),
                        s.item.to_string(),
                        fmt_f64(s.utility),
                    ]
                })
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        table::emit_csv(path, &RECOMMENDATIONS_HEADER, &self.csv_rows())
    }
}

/// Top-`r` recommendations for every user from its `k` nearest neighbors.
pub fn recommend(s: &InteractionMatrix, k: usize, r: usize) -> RecommendationSet {
    let neighborhoods = all_neighbors(s, k);
    recommend_with_neighbors(s, &neighborhoods, r)
}

pub fn recommend_with_neighbors(s: &InteractionMatrix, neighborhoods: &[NeighborList], r: usize) -> RecommendationSet {
    let users: Vec<UserRecommendations> = neighborhoods
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0f64; s.n_items()],
            |scratch, (u, neighbors)| {
                let candidates = rank_candidates(s, u, neighbors, scratch);
                let recommended = candidates.iter().take(r).copied().collect();
                UserRecommendations {
                    candidates,
                    recommended,
                }
            },
        )
        .collect();
    let set = RecommendationSet::from_users(r, s.n_items(), users);
    for u in set.short_users() {
        debug!("user {u}: {} of {r} recommendations available", set.recommended(u).len());
    }
    set
}

/// Preference ratio of `group` for `category` over all candidate items
/// (every item with positive utility), each (user, item) pair counted once.
pub fn candidate_preference_ratio(
    s: &InteractionMatrix,
    k: usize,
    labels: &Labeling,
    group: usize,
    category: usize,
) -> Result<f64> {
    let candidates = recommend(s, k, 0).candidate_matrix();
    crate::metrics::preference_ratio(&candidates, labels, group, category)
}

/// Candidate preference ratios for all cells of an existing recommendation set.
pub fn candidate_counts(set: &RecommendationSet, labels: &Labeling) -> Result<CategoryCounts> {
    CategoryCounts::of(&set.candidate_matrix(), labels)
}
