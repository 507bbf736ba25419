use crate::error::{Error, Result};

/// Binary user × item selection matrix stored as sorted item rows.
///
/// `rows[u]` holds the items user `u` selected, strictly increasing. Sorted
/// rows make membership a binary search and Jaccard intersections a merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    n_items: usize,
    rows: Vec<Vec<u32>>,
}

impl InteractionMatrix {
    /// All-zero matrix.
    pub fn empty(n_users: usize, n_items: usize) -> Self {
        Self {
            n_items,
            rows: vec![Vec::new(); n_users],
        }
    }

    /// Builds a matrix from per-user item lists. Rows are sorted; duplicates
    /// and out-of-range items are rejected.
    pub fn from_rows(n_items: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut rows = rows;
        for (user, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if let Some(&last) = row.last() {
                if last as usize >= n_items {
                    return Err(Error::InvalidMatrix(format!(
                        "user {user} selected item {last}, but there are only {n_items} items"
                    )));
                }
            }
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "user {user} selected item {} twice",
                    w[0]
                )));
            }
        }
        Ok(Self { n_items, rows })
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn row(&self, user: usize) -> &[u32] {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        item < self.n_items && self.rows[user].binary_search(&(item as u32)).is_ok()
    }

    /// Total number of ones.
    pub fn nnz(&self) -> u64 {
        self.rows.iter().map(|r| r.len() as u64).sum()
    }

    /// Sets `S(user, item) = 1`. Returns false if it was already set.
    pub fn insert(&mut self, user: usize, item: usize) -> Result<bool> {
        if item >= self.n_items {
            return Err(Error::InvalidMatrix(format!(
                "item {item} out of range for {} items",
                self.n_items
            )));
        }
        let row = &mut self.rows[user];
        match row.binary_search(&(item as u32)) {
            Ok(_) => Ok(false),
            Err(pos) => {
                row.insert(pos, item as u32);
                Ok(true)
            }
        }
    }

    /// For every item, the users that selected it (ascending).
    pub fn item_users(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n_items];
        for (user, row) in self.rows.iter().enumerate() {
            for &item in row {
                cols[item as usize].push(user as u32);
            }
        }
        cols
    }

    /// `true` when every selection of `self` is also present in `other`.
    pub fn is_subset_of(&self, other: &InteractionMatrix) -> bool {
        self.n_users() == other.n_users()
            && self.n_items == other.n_items
            && self
                .rows
                .iter()
                .enumerate()
                .all(|(u, row)| row.iter().all(|&i| other.contains(u, i as usize)))
    }
}

/// User → group and item → category partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    user_group: Vec<u32>,
    item_category: Vec<u32>,
    group_sizes: Vec<u64>,
    category_sizes: Vec<u64>,
}

impl Labeling {
    /// Group and category ids must be dense: every id in `0..max` has at
    /// least one member.
    pub fn new(user_group: Vec<u32>, item_category: Vec<u32>) -> Result<Self> {
        let group_sizes = partition_sizes(&user_group, "group")?;
        let category_sizes = partition_sizes(&item_category, "category")?;
        Ok(Self {
            user_group,
            item_category,
            group_sizes,
            category_sizes,
        })
    }

    /// First `group_one` users form group 0, the rest group 1; first
    /// `category_one` items form category 0, the rest category 1.
    pub fn two_blocks(
        n_users: usize,
        group_one: usize,
        n_items: usize,
        category_one: usize,
    ) -> Result<Self> {
        let user_group = (0..n_users).map(|u| u32::from(u >= group_one)).collect();
        let item_category = (0..n_items).map(|i| u32::from(i >= category_one)).collect();
        Self::new(user_group, item_category)
    }

    pub fn n_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_category.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn n_categories(&self) -> usize {
        self.category_sizes.len()
    }

    pub fn group_of(&self, user: usize) -> usize {
        self.user_group[user] as usize
    }

    pub fn category_of(&self, item: usize) -> usize {
        self.item_category[item] as usize
    }

    pub fn user_groups(&self) -> &[u32] {
        &self.user_group
    }

    pub fn item_categories(&self) -> &[u32] {
        &self.item_category
    }

    pub fn group_size(&self, group: usize) -> u64 {
        self.group_sizes[group]
    }

    pub fn category_size(&self, category: usize) -> u64 {
        self.category_sizes[category]
    }

    pub fn group_members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.user_group
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g as usize == group)
            .map(|(u, _)| u)
    }

    pub(crate) fn check_matrix(&self, m: &InteractionMatrix) -> Result<()> {
        if m.n_users() != self.n_users() || m.n_items() != self.n_items() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, labeling covers {} users and {} items",
                m.n_users(),
                m.n_items(),
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(())
    }
}

fn partition_sizes(labels: &[u32], what: &str) -> Result<Vec<u64>> {
    let Some(&max) = labels.iter().max() else {
        return Err(Error::InvalidLabeling(format!("no {what} labels")));
    };
    let mut sizes = vec![0u64; max as usize + 1];
    for &l in labels {
        sizes[l as usize] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidLabeling(format!("{what} {empty} is empty")));
    }
    Ok(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_sorted_and_validated() {
        let m = InteractionMatrix::from_rows(5, vec![vec![3, 1], vec![]]).unwrap();
        assert_eq!(m.row(0), &[1, 3]);
        assert!(m.contains(0, 3));
        assert!(!m.contains(1, 3));
        assert!(InteractionMatrix::from_rows(3, vec![vec![3]]).is_err());
        assert!(InteractionMatrix::from_rows(5, vec![vec![2, 2]]).is_err());
    }

    #[test]
    fn insert_keeps_rows_sorted() {
        let mut m = InteractionMatrix::empty(1, 10);
        assert!(m.insert(0, 7).unwrap());
        assert!(m.insert(0, 2).unwrap());
        assert!(!m.insert(0, 7).unwrap());
        assert_eq!(m.row(0), &[2, 7]);
        assert_eq!(m.nnz(), 2);
        assert!(m.insert(0, 10).is_err());
    }

    #[test]
    fn labeling_rejects_empty_partitions() {
        assert!(Labeling::new(vec![0, 2], vec![0]).is_err());
        assert!(Labeling::new(vec![], vec![0]).is_err());
        let l = Labeling::two_blocks(4, 1, 3, 2).unwrap();
        assert_eq!(l.group_size(0), 1);
        assert_eq!(l.group_size(1), 3);
        assert_eq!(l.category_size(1), 1);
        assert_eq!(l.group_members(1).collect::<Vec<_>>(), vec![1, 2, 3]);
    }
}
