#![allow(dead_code)]

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use biasdisp::synthgen::{self, SyntheticConfig, SyntheticDataset};
use biasdisp::recommender::{self, RecommendationSet, ScoredItem, UserRecommendations};
use biasdisp::{InteractionMatrix, Labeling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per user: ranked `(item, utility)` candidates, straight from the definition.
pub fn brute_force_candidates(s: &InteractionMatrix, k: usize) -> Vec<Vec<(usize, f64)>> {
    let sets: Vec<HashSet<u32>> = s.rows().iter().map(|r| r.iter().copied().collect()).collect();
    let n = s.n_users();
    (0..n)
        .map(|u| {
            let mut others: Vec<(usize, f64)> = (0..n)
                .filter(|&v| v != u)
                .map(|v| {
                    let inter = sets[u].intersection(&sets[v]).count();
                    let union = sets[u].union(&sets[v]).count();
                    let sim = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
                    (v, sim)
                })
                .collect();
            others.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            others.truncate(k);
            let den: f64 = others.iter().map(|x| x.1).sum();
            let mut scored = Vec::new();
            if den > 0.0 {
                for i in 0..s.n_items() {
                    if sets[u].contains(&(i as u32)) {
                        continue;
                    }
                    let mut num = 0.0;
                    for &(v, sim) in &others {
                        if sets[v].contains(&(i as u32)) {
                            num += sim;
                        }
                    }
                    let v = num / den;
                    if v > 0.0 {
                        scored.push((i, v));
                    }
                }
            }
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            scored
        })
        .collect()
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, m: usize, density: f64) -> InteractionMatrix {
    let rows = (0..n)
        .map(|_| (0..m as u32).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    InteractionMatrix::from_rows(m, rows).unwrap()
}

/// Default-size symmetric dataset with shuffled user and item indices.
pub fn shuffled(cfg: &SyntheticConfig) -> SyntheticDataset {
    synthgen::generate(cfg).unwrap().permuted(cfg.seed ^ 0x5eed).unwrap()
}

/// Writes MovieLens-1M style files: 40 male and 20 female users, Action,
/// Romance, dual-genre and Comedy titles, Latin-1 bytes in one title.
pub fn write_movielens_fixture(dir: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut movies: Vec<u8> = Vec::new();
    let genres = |id: usize| match id % 8 {
        0 | 1 | 2 => "Action|Thriller",
        3 | 4 | 5 => "Romance|Drama",
        6 => "Action|Romance",
        _ => "Comedy",
    };
    for id in 1..=80 {
        movies.extend_from_slice(format!("{id}::Movie {id}, The (199{})::{}\n", id % 10, genres(id)).as_bytes());
    }
    movies.extend_from_slice(b"81::Am\xe9lie (2001)::Comedy|Romance\n");

    let mut users = String::new();
    let mut ratings = String::new();
    for uid in 1..=60 {
        let male = uid <= 40;
        users.push_str(&format!("{uid}::{}::25::4::1000{uid}\n", if male { "M" } else { "F" }));
        let (pa, pr) = if male { (0.7, 0.3) } else { (0.45, 0.7) };
        for id in 1..=81 {
            let p = match id % 8 {
                0..=2 => pa,
                3..=5 => pr,
                _ => 0.5,
            };
            let p = if uid % 10 == 0 { p * 0.2 } else { p };
            if rng.gen_bool(p) {
                ratings.push_str(&format!("{uid}::{id}::{}::97830{uid:04}\n", rng.gen_range(1..=5)));
            }
        }
    }
    fs::write(dir.join("movies.dat"), movies).unwrap();
    fs::write(dir.join("users.dat"), users).unwrap();
    fs::write(dir.join("ratings.dat"), ratings).unwrap();
}

/// One user's ways of swapping out `j` shed-category recommendations for
/// `j` outside ones: (j, loss) for every choice of drop and add subsets.
pub fn user_options(u: &UserRecommendations, labels: &Labeling, shed: usize) -> Vec<(usize, f64)> {
    let drops: Vec<f64> = u
        .recommended
        .iter()
        .filter(|s| labels.category_of(s.item) == shed)
        .map(|s| s.utility)
        .collect();
    let adds: Vec<f64> = u
        .candidates
        .iter()
        .filter(|c| labels.category_of(c.item) != shed && !u.is_recommended(c.item))
        .map(|c| c.utility)
        .collect();
    let mut out = Vec::new();
    for dm in 0u32..1 << drops.len() {
        for am in 0u32..1 << adds.len() {
            if dm.count_ones() != am.count_ones() {
                continue;
            }
            let pick = |mask: u32, v: &[f64]| (0..v.len()).filter(|&i| mask >> i & 1 == 1).map(|i| v[i]).sum::<f64>();
            out.push((dm.count_ones() as usize, pick(dm, &drops) - pick(am, &adds)));
        }
    }
    out
}

/// Minimum total loss over every combination of per-user swap sets of total size `target`.
pub fn exhaustive_min(options: &[Vec<(usize, f64)>], target: usize) -> Option<f64> {
    fn go(options: &[Vec<(usize, f64)>], left: usize) -> Option<f64> {
        let Some((first, rest)) = options.split_first() else {
            return (left == 0).then_some(0.0);
        };
        first
            .iter()
            .filter(|(j, _)| *j <= left)
            .filter_map(|&(j, loss)| go(rest, left - j).map(|l| l + loss))
            .min_by(f64::total_cmp)
    }
    go(options, target)
}

pub fn random_gulm_fixture(rng: &mut impl Rng) -> (RecommendationSet, InteractionMatrix, Labeling) {
    let n_users = rng.gen_range(1..=3);
    let r = 3;
    // items 0..12: category 0 is 0..6; input selections use items 12..20
    let n_items = 20;
    let categories: Vec<u32> = (0..n_items).map(|i| u32::from(!(i < 6 || (12..16).contains(&i)))).collect();
    let labels = Labeling::new(vec![0; n_users], categories).unwrap();
    let mut users = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..n_users {
        let n_cand = rng.gen_range(r..=6);
        let mut items: Vec<usize> = (0..12).collect();
        for i in (1..items.len()).rev() {
            items.swap(i, rng.gen_range(0..=i));
        }
        let mut candidates: Vec<ScoredItem> = items[..n_cand]
            .iter()
            .map(|&item| ScoredItem {
                item,
                utility: rng.gen_range(1..=20) as f64 / 20.0,
            })
            .collect();
        candidates.sort_by(recommender::ranking_order);
        users.push(UserRecommendations {
            recommended: candidates[..r].to_vec(),
            candidates,
        });
        let in_first = rng.gen_range(0..=4);
        let mut row: Vec<u32> = (12..12 + in_first).collect();
        row.extend(16..16 + (4 - in_first).max(1));
        rows.push(row);
    }
    (
        RecommendationSet::from_users(r, n_items as usize, users),
        InteractionMatrix::from_rows(n_items as usize, rows).unwrap(),
        labels,
    )
}
