//! Preference ratio, bias and bias disparity of groups toward categories.
//!
//! For a selection matrix `M` (input data or recommendations), a user group
//! `G` and an item category `C`:
//!
//! ```text
//! PR(G, C) = Σ_{u∈G} Σ_{i∈C} M(u,i) / Σ_{u∈G} Σ_i M(u,i)
//! P(C)     = |C| / m
//! B(G, C)  = PR(G, C) / P(C)
//! BD(G, C) = (B_out − B_in) / B_in
//! ```
//!
//! A group without any selection has no defined preference ratio; such cells
//! are carried as `None` and serialized as `NA`.

mod data;

use std::path::Path;

pub use data::{InteractionMatrix, Labeling};

use crate::error::{Error, Result};
use crate::table::{self, fmt_opt};

/// Selection counts per (group, category).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryCounts {
    n_categories: usize,
    counts: Vec<u64>,
    group_totals: Vec<u64>,
}

impl CategoryCounts {
    pub fn of(m: &InteractionMatrix, labels: &Labeling) -> Result<Self> {
        labels.check_matrix(m)?;
        let n_categories = labels.n_categories();
        let mut counts = vec![0u64; labels.n_groups() * n_categories];
        let mut group_totals = vec![0u64; labels.n_groups()];
        for (user, row) in m.rows().iter().enumerate() {
            let g = labels.group_of(user);
            group_totals[g] += row.len() as u64;
            for &item in row {
                counts[g * n_categories + labels.category_of(item as usize)] += 1;
            }
        }
        Ok(Self {
            n_categories,
            counts,
            group_totals,
        })
    }

    pub fn count(&self, group: usize, category: usize) -> u64 {
        self.counts[group * self.n_categories + category]
    }

    pub fn group_total(&self, group: usize) -> u64 {
        self.group_totals[group]
    }

    /// `None` when the group has no selections.
    pub fn preference_ratio(&self, group: usize, category: usize) -> Option<f64> {
        match self.group_total(group) {
            0 => None,
            total => Some(self.count(group, category) as f64 / total as f64),
        }
    }
}

fn check_ids(labels: &Labeling, group: usize, category: usize) -> Result<()> {
    if group >= labels.n_groups() || category >= labels.n_categories() {
        return Err(Error::DimensionMismatch(format!(
            "(group {group}, category {category}) outside {} groups x {} categories",
            labels.n_groups(),
            labels.n_categories()
        )));
    }
    Ok(())
}

/// Fraction of the selections made by `group` that fall in `category`.
pub fn preference_ratio(
    m: &InteractionMatrix,
    labels: &Labeling,
    group: usize,
    category: usize,
) -> Result<f64> {
    check_ids(labels, group, category)?;
    CategoryCounts::of(m, labels)?
        .preference_ratio(group, category)
        .ok_or(Error::EmptyGroupActivity { group })
}

/// Probability `|C| / m` of hitting `category` when picking items uniformly.
pub fn category_prior(labels: &Labeling, category: usize) -> f64 {
    labels.category_size(category) as f64 / labels.n_items() as f64
}

pub fn bias(m: &InteractionMatrix, labels: &Labeling, group: usize, category: usize) -> Result<f64> {
    Ok(preference_ratio(m, labels, group, category)? / category_prior(labels, category))
}

/// Relative change from input bias to output bias.
pub fn bias_disparity(bias_input: f64, bias_output: f64) -> Result<f64> {
    if bias_input == 0.0 {
        return Err(Error::ZeroInputBias);
    }
    Ok((bias_output - bias_input) / bias_input)
}

/// Preference ratio and bias of every (group, category) for one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    n_groups: usize,
    n_categories: usize,
    pr: Vec<Option<f64>>,
    bias: Vec<Option<f64>>,
}

impl BiasTable {
    pub fn of(m: &InteractionMatrix, labels: &Labeling) -> Result<Self> {
        let counts = CategoryCounts::of(m, labels)?;
        let (n_groups, n_categories) = (labels.n_groups(), labels.n_categories());
        let mut pr = Vec::with_capacity(n_groups * n_categories);
        let mut bias = Vec::with_capacity(n_groups * n_categories);
        for g in 0..n_groups {
            for c in 0..n_categories {
                let ratio = counts.preference_ratio(g, c);
                pr.push(ratio);
                bias.push(ratio.map(|p| p / category_prior(labels, c)));
            }
        }
        Ok(Self {
            n_groups,
            n_categories,
            pr,
            bias,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn pr(&self, group: usize, category: usize) -> Option<f64> {
        self.pr[group * self.n_categories + category]
    }

    pub fn bias(&self, group: usize, category: usize) -> Option<f64> {
        self.bias[group * self.n_categories + category]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCell {
    pub group: usize,
    pub category: usize,
    pub pr_input: Option<f64>,
    pub pr_output: Option<f64>,
    pub bias_input: Option<f64>,
    pub bias_output: Option<f64>,
    pub bias_disparity: Option<f64>,
}

/// Input vs. output bias for every (group, category) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    n_categories: usize,
    cells: Vec<BiasCell>,
}

pub const BIAS_REPORT_HEADER: [&str; 7] = [
    "group",
    "category",
    "pr_in",
    "pr_out",
    "bias_in",
    "bias_out",
    "bias_disparity",
];

impl BiasReport {
    pub fn from_tables(input: &BiasTable, output: &BiasTable) -> Result<Self> {
        if input.n_groups != output.n_groups || input.n_categories != output.n_categories {
            return Err(Error::DimensionMismatch(
                "input and output bias tables differ in shape".into(),
            ));
        }
        let mut cells = Vec::with_capacity(input.n_groups * input.n_categories);
        for g in 0..input.n_groups {
            for c in 0..input.n_categories {
                let (bias_input, bias_output) = (input.bias(g, c), output.bias(g, c));
                let bias_disparity = match (bias_input, bias_output) {
                    (Some(bi), Some(bo)) => bias_disparity(bi, bo).ok(),
                    _ => None,
                };
                cells.push(BiasCell {
                    group: g,
                    category: c,
                    pr_input: input.pr(g, c),
                    pr_output: output.pr(g, c),
                    bias_input,
                    bias_output,
                    bias_disparity,
                });
            }
        }
        Ok(Self {
            n_categories: input.n_categories,
            cells,
        })
    }

    pub fn cells(&self) -> &[BiasCell] {
        &self.cells
    }

    pub fn cell(&self, group: usize, category: usize) -> &BiasCell {
        &self.cells[group * self.n_categories + category]
    }

    /// Rows in [`BIAS_REPORT_HEADER`] order. Labels default to numeric ids.
    pub fn csv_rows(&self, group_names: Option<&[String]>, category_names: Option<&[String]>) -> Vec<Vec<String>> {
        self.cells
            .iter()
            .map(|c| {
                vec![
                    group_names.map_or_else(|| c.group.to_string(), |n| n[c.group].clone()),
                    category_names.map_or_else(|| c.category.to_string(), |n| n[c.category].clone()),
                    fmt_opt(c.pr_input),
                    fmt_opt(c.pr_output),
                    fmt_opt(c.bias_input),
                    fmt_opt(c.bias_output),
                    fmt_opt(c.bias_disparity),
                ]
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        table::emit_csv(path, &BIAS_REPORT_HEADER, &self.csv_rows(None, None))
    }
}

/// Compares the bias of the input data `s` with that of the recommendations `r`.
pub fn bias_report(s: &InteractionMatrix, r: &InteractionMatrix, labels: &Labeling) -> Result<BiasReport> {
    if s.n_users() != r.n_users() || s.n_items() != r.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "input is {}x{}, recommendations are {}x{}",
            s.n_users(),
            s.n_items(),
            r.n_users(),
            r.n_items()
        )));
    }
    BiasReport::from_tables(&BiasTable::of(s, labels)?, &BiasTable::of(r, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (InteractionMatrix, Labeling) {
        // users 0,1 in group 0; user 2 in group 1. items 0,1 in category 0; 2,3 in category 1.
        let m = InteractionMatrix::from_rows(4, vec![vec![0, 1], vec![2], vec![0, 2, 3]]).unwrap();
        let l = Labeling::new(vec![0, 0, 1], vec![0, 0, 1, 1]).unwrap();
        (m, l)
    }

    #[test]
    fn preference_ratio_counts_group_selections() {
        let (m, l) = fixture();
        assert_eq!(preference_ratio(&m, &l, 0, 0).unwrap(), 2.0 / 3.0);
        assert_eq!(preference_ratio(&m, &l, 1, 1).unwrap(), 2.0 / 3.0);
        let all_in = InteractionMatrix::from_rows(4, vec![vec![0], vec![1], vec![]]).unwrap();
        assert_eq!(preference_ratio(&all_in, &l, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        let (_, l) = fixture();
        let m = InteractionMatrix::from_rows(4, vec![vec![0], vec![1], vec![]]).unwrap();
        assert!(matches!(
            preference_ratio(&m, &l, 1, 0),
            Err(Error::EmptyGroupActivity { group: 1 })
        ));
        assert!(bias(&m, &l, 1, 0).is_err());
    }

    #[test]
    fn priors() {
        let l = Labeling::two_blocks(2, 1, 1000, 500).unwrap();
        assert_eq!(category_prior(&l, 0), 0.5);
        let l = Labeling::two_blocks(2, 1, 1000, 100).unwrap();
        assert_eq!(category_prior(&l, 0), 0.1);
        let l = Labeling::two_blocks(2, 1, 1000, (0.3f64 * 1000.0).round() as usize).unwrap();
        assert_eq!(category_prior(&l, 0), 0.3);
    }

    #[test]
    fn bias_values() {
        // PR 0.7 over two equal categories
        let rows = vec![(0..10).map(|i| if i < 7 { i } else { 10 + i }).collect(), vec![0]];
        let m = InteractionMatrix::from_rows(20, rows).unwrap();
        let l = Labeling::two_blocks(2, 1, 20, 10).unwrap();
        assert!((bias(&m, &l, 0, 0).unwrap() - 1.4).abs() < 1e-12);

        // uniform: one selection in every item
        let m = InteractionMatrix::from_rows(4, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]]).unwrap();
        let l = Labeling::new(vec![0, 1], vec![0, 1, 1, 1]).unwrap();
        for g in 0..2 {
            for c in 0..2 {
                assert!((bias(&m, &l, g, c).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disparity_values() {
        assert!((bias_disparity(1.39, 1.67).unwrap() - 0.20).abs() < 0.005);
        // Table entries are rounded to two decimals; with 0.58/0.28 the
        // disparity is -0.517, and the ±0.005 input rounding spans [-0.53, -0.50].
        let bd = bias_disparity(0.58, 0.28).unwrap();
        assert!((bd + 0.5172).abs() < 1e-4);
        assert!((bd + 0.51).abs() < 0.01);
        assert_eq!(bias_disparity(1.3, 1.3).unwrap(), 0.0);
        assert!(matches!(bias_disparity(0.0, 1.0), Err(Error::ZeroInputBias)));
    }

    #[test]
    fn report_on_hand_fixture() {
        let (s, l) = fixture();
        let r = InteractionMatrix::from_rows(4, vec![vec![2], vec![3], vec![1]]).unwrap();
        let report = bias_report(&s, &r, &l).unwrap();

        // Worked by hand:
        // S: group 0 has 3 selections, 2 in cat 0; group 1 has 3, 1 in cat 0.
        // R: group 0 has 2 recs, 0 in cat 0; group 1 has 1, 1 in cat 0.
        // P(C) = 0.5 for both categories.
        let c = report.cell(0, 0);
        assert_eq!(c.pr_input, Some(2.0 / 3.0));
        assert_eq!(c.pr_output, Some(0.0));
        assert_eq!(c.bias_input, Some(4.0 / 3.0));
        assert_eq!(c.bias_output, Some(0.0));
        assert_eq!(c.bias_disparity, Some(-1.0));

        let c = report.cell(1, 0);
        assert_eq!(c.bias_input, Some(2.0 / 3.0));
        assert_eq!(c.bias_output, Some(2.0));
        assert!((c.bias_disparity.unwrap() - 2.0).abs() < 1e-12);

        let c = report.cell(0, 1);
        assert_eq!(c.bias_output, Some(2.0));
        assert!((c.bias_disparity.unwrap() - 2.0).abs() < 1e-12);

        let c = report.cell(1, 1);
        assert_eq!(c.bias_output, Some(0.0));
        assert_eq!(c.bias_disparity, Some(-1.0));
    }

    #[test]
    fn identical_matrices_have_no_disparity() {
        let (s, l) = fixture();
        let report = bias_report(&s, &s, &l).unwrap();
        assert!(report.cells().iter().all(|c| c.bias_disparity == Some(0.0)));
    }

    #[test]
    fn undefined_cells_are_na() {
        let (s, l) = fixture();
        let r = InteractionMatrix::from_rows(4, vec![vec![2], vec![], vec![]]).unwrap();
        let report = bias_report(&s, &r, &l).unwrap();
        assert_eq!(report.cell(1, 0).pr_output, None);
        assert_eq!(report.cell(1, 0).bias_disparity, None);
        let rows = report.csv_rows(None, None);
        assert_eq!(rows[2], vec!["1", "0", "0.333333", "NA", "0.666667", "NA", "NA"]);
    }

    #[test]
    fn dimension_mismatch() {
        let (s, l) = fixture();
        let r = InteractionMatrix::empty(3, 5);
        assert!(matches!(bias_report(&s, &r, &l), Err(Error::DimensionMismatch(_))));
    }
}
