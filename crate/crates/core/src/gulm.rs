//! GULM (Group Utility Loss Minimization) re-ranking.
//!
//! For each group, the category whose share of the group's recommendations
//! exceeds its share of the group's input selections is "shed": recommended
//! items of that category are swapped, one at a time and within the same
//! user, for the best not-yet-recommended candidate of another category.
//! Every user offers one swap, pairing their lowest-ranked recommendation
//! in the shed category with their highest-ranked unrecommended candidate
//! outside it. The swap with the smallest utility loss
//! `V(u, drop) − V(u, add)` is executed, that user's offer is refreshed, and
//! the loop repeats until the group's output preference ratio matches its
//! input ratio to within one swap.
//!
//! A user's successive offers have non-decreasing losses (drops climb the
//! ranking while adds descend it), so always taking the global minimum picks
//! the cheapest set of swaps of the required size.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use log::warn;

use crate::error::Result;
use crate::metrics::{CategoryCounts, InteractionMatrix, Labeling};
use crate::recommender::{ranking_order, RecommendationSet, ScoredItem};
use crate::table::{self, fmt_f64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapCandidate {
    pub user: usize,
    /// Currently recommended, in the shed category.
    pub drop: ScoredItem,
    /// Not recommended, outside the shed category, positive utility.
    pub add: ScoredItem,
    /// `drop.utility − add.utility`; negative when the swap also gains utility.
    pub loss: f64,
}

/// Category to shed for one group and how many of its recommendations to swap out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapTarget {
    pub category: usize,
    pub count: usize,
}

/// `num / den` rounded half to even; `num ≥ 0`, `den > 0`.
fn round_half_even(num: i128, den: i128) -> i128 {
    let (q, r) = (num / den, num % den);
    match (2 * r).cmp(&den) {
        Ordering::Less => q,
        Ordering::Greater => q + 1,
        Ordering::Equal => q + (q & 1),
    }
}

fn recommended_counts(recs: &RecommendationSet, labels: &Labeling) -> Result<CategoryCounts> {
    CategoryCounts::of(&recs.to_interaction_matrix(), labels)
}

fn target_from_counts(out: &CategoryCounts, input: &CategoryCounts, group: usize, n_categories: usize) -> SwapTarget {
    let (total_out, total_in) = (out.group_total(group) as i128, input.group_total(group) as i128);
    if total_out == 0 || total_in == 0 {
        return SwapTarget { category: 0, count: 0 };
    }
    // excess(c) = count_R(G,c) − PR_S(G,c)·|R_G|, scaled by |S_G| to stay integral
    let scaled_excess = |c: usize| out.count(group, c) as i128 * total_in - input.count(group, c) as i128 * total_out;
    let category = (0..n_categories)
        .max_by(|&a, &b| scaled_excess(a).cmp(&scaled_excess(b)).then(b.cmp(&a)))
        .unwrap_or(0);
    let excess = scaled_excess(category);
    let count = if excess <= 0 {
        0
    } else {
        round_half_even(excess, total_in) as usize
    };
    SwapTarget { category, count }
}

/// Over-represented category of `group` in `recs` relative to `s`, and the
/// number of swaps that brings its share back to the input share
/// (half-to-even rounding).
pub fn target_swap_count(
    recs: &RecommendationSet,
    s: &InteractionMatrix,
    labels: &Labeling,
    group: usize,
) -> Result<SwapTarget> {
    let out = recommended_counts(recs, labels)?;
    let input = CategoryCounts::of(s, labels)?;
    Ok(target_from_counts(&out, &input, group, labels.n_categories()))
}

/// The swap `user` currently offers for shedding `shed`, if any.
pub fn user_swap_candidate(
    recs: &RecommendationSet,
    user: usize,
    labels: &Labeling,
    shed: usize,
) -> Option<SwapCandidate> {
    let u = recs.user(user);
    let drop = *u
        .recommended
        .iter()
        .rev()
        .find(|s| labels.category_of(s.item) == shed)?;
    let add = *u
        .candidates
        .iter()
        .find(|c| labels.category_of(c.item) != shed && c.utility > 0.0 && !u.is_recommended(c.item))?;
    Some(SwapCandidate {
        user,
        drop,
        add,
        loss: drop.utility - add.utility,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub group: usize,
    pub target: SwapTarget,
    /// Executed swaps in execution order.
    pub swaps: Vec<SwapCandidate>,
    pub total_loss: f64,
}

impl GroupPlan {
    /// Swaps that were wanted but had no candidate left.
    pub fn shortfall(&self) -> usize {
        self.target.count - self.swaps.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankPlan {
    pub groups: Vec<GroupPlan>,
}

pub const RERANK_PLAN_HEADER: [&str; 5] = ["group", "target_swaps", "executed_swaps", "total_loss", "shortfall"];

impl RerankPlan {
    pub fn total_loss(&self) -> f64 {
        self.groups.iter().map(|g| g.total_loss).sum()
    }

    pub fn has_shortfall(&self) -> bool {
        self.groups.iter().any(|g| g.shortfall() > 0)
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.groups
            .iter()
            .map(|g| {
                vec![
                    g.group.to_string(),
                    g.target.count.to_string(),
                    g.swaps.len().to_string(),
                    fmt_f64(g.total_loss),
                    g.shortfall().to_string(),
                ]
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        table::emit_csv(path, &RERANK_PLAN_HEADER, &self.csv_rows())
    }
}

/// Min-heap entry: smallest loss first, then lowest user index.
struct Offer(SwapCandidate);

impl PartialEq for Offer {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Offer {}

impl PartialOrd for Offer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Offer {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .loss
            .total_cmp(&self.0.loss)
            .then_with(|| other.0.user.cmp(&self.0.user))
    }
}

fn apply_swap(recs: &mut RecommendationSet, swap: &SwapCandidate) {
    let u = recs.user_mut(swap.user);
    u.recommended.retain(|s| s.item != swap.drop.item);
    let pos = u
        .recommended
        .partition_point(|s| ranking_order(s, &swap.add) == Ordering::Less);
    u.recommended.insert(pos, swap.add);
}

/// Re-ranks every group so that its output preference ratios match its
/// input preference ratios, at minimum total utility loss.
pub fn rerank(
    recs: &RecommendationSet,
    s: &InteractionMatrix,
    labels: &Labeling,
) -> Result<(RecommendationSet, RerankPlan)> {
    let out = recommended_counts(recs, labels)?;
    let input = CategoryCounts::of(s, labels)?;
    let mut reranked = recs.clone();
    let mut groups = Vec::with_capacity(labels.n_groups());

    for group in 0..labels.n_groups() {
        let target = target_from_counts(&out, &input, group, labels.n_categories());
        let mut plan = GroupPlan {
            group,
            target,
            swaps: Vec::with_capacity(target.count),
            total_loss: 0.0,
        };
        if target.count > 0 {
            let mut heap: BinaryHeap<Offer> = labels
                .group_members(group)
                .filter_map(|u| user_swap_candidate(&reranked, u, labels, target.category))
                .map(Offer)
                .collect();
            while plan.swaps.len() < target.count {
                let Some(Offer(swap)) = heap.pop() else { break };
                apply_swap(&mut reranked, &swap);
                plan.total_loss += swap.loss;
                plan.swaps.push(swap);
                if let Some(next) = user_swap_candidate(&reranked, swap.user, labels, target.category) {
                    heap.push(Offer(next));
                }
            }
            if plan.shortfall() > 0 {
                warn!(
                    "group {group}: {} of {} swaps possible",
                    plan.swaps.len(),
                    target.count
                );
            }
        }
        groups.push(plan);
    }
    Ok((reranked, RerankPlan { groups }))
}
