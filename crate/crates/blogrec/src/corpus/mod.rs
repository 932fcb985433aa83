//! Corpus ingestion and descriptive statistics.
//!
//! Input data arrives as TSV edge lists keyed by external string ids.
//! Ingestion interns ids into dense `u32` indices ([`Vocab`]) and builds
//! row-compressed sparse matrices ([`FollowGraph`], [`AppUsage`]) that the
//! model and evaluation code consume read-only. Indices are assigned in
//! first-seen order, so re-ingesting a file the crate wrote reproduces the
//! same indexing.

pub mod ingest;
pub mod stats;

pub use ingest::{
    ingest_apps, ingest_apps_from, ingest_follows, ingest_follows_from, write_apps, write_follows,
    AppIngest, FollowIngest,
};
pub use stats::{cross_heatmap, degree_histogram, CrossSimHeatmap, DegreeAxis, DegreeHistogram};

use std::collections::HashMap;

use thiserror::Error;

/// Default per-user cap on retained apps.
pub const DEFAULT_APP_TOP_K: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{source_name}:{line}: expected {expected} tab-separated fields")]
    FieldCount {
        source_name: String,
        line: usize,
        expected: usize,
    },
    #[error("{source_name}:{line}: invalid usage count {value:?}, expected a positive integer")]
    BadCount {
        source_name: String,
        line: usize,
        value: String,
    },
    #[error("{source_name}: no edges found")]
    Empty { source_name: String },
    #[error("degree histogram needs at least one entity")]
    EmptyDegrees,
    #[error("heatmap wants top {requested} {what}, corpus has {available}")]
    HeatmapSize {
        requested: usize,
        available: usize,
        what: &'static str,
    },
}

/// What an id names. Kept on [`Vocab`] so mixed-up lookups fail loudly in
/// debug builds rather than returning indices from the wrong space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    User,
    Blog,
    App,
}

/// Bidirectional map between external string ids and dense indices,
/// assigned in first-seen order.
#[derive(Debug, Clone)]
pub struct Vocab {
    kind: EntityKind,
    forward: HashMap<String, u32>,
    reverse: Vec<String>,
}

impl Vocab {
    pub fn new(kind: EntityKind) -> Self {
        Vocab {
            kind,
            forward: HashMap::new(),
            reverse: Vec::new(),
        }
    }

    /// Index for `id`, interning it if unseen.
    pub fn intern(&mut self, id: &str) -> u32 {
        if let Some(&idx) = self.forward.get(id) {
            return idx;
        }
        let idx = u32::try_from(self.reverse.len()).expect("vocab fits in u32");
        self.forward.insert(id.to_owned(), idx);
        self.reverse.push(id.to_owned());
        idx
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.forward.get(id).copied()
    }

    /// External id for `idx`. Panics if out of range.
    pub fn name(&self, idx: u32) -> &str {
        &self.reverse[idx as usize]
    }

    pub fn kind(&self) -> EntityKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    /// `(index, external id)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.reverse
            .iter()
            .enumerate()
            .map(|(i, s)| (i as u32, s.as_str()))
    }
}

/// Binary user-by-blog follow matrix in row-compressed form. `rows[u]`
/// holds the blogs user `u` follows, sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowGraph {
    blog_count: usize,
    rows: Vec<Vec<u32>>,
}

impl FollowGraph {
    /// Build from per-user blog lists. Rows are sorted and deduplicated;
    /// blog indices must be below `blog_count`.
    pub fn new(blog_count: usize, mut rows: Vec<Vec<u32>>) -> Self {
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                assert!(
                    (last as usize) < blog_count,
                    "blog index {last} out of range for blog_count {blog_count}"
                );
            }
        }
        FollowGraph { blog_count, rows }
    }

    pub fn user_count(&self) -> usize {
        self.rows.len()
    }

    pub fn blog_count(&self) -> usize {
        self.blog_count
    }

    /// Sorted blog indices followed by `user`.
    pub fn row(&self, user: u32) -> &[u32] {
        &self.rows[user as usize]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    /// Total number of follow edges.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn contains(&self, user: u32, blog: u32) -> bool {
        self.rows[user as usize].binary_search(&blog).is_ok()
    }

    /// Follows per user, indexed by user.
    pub fn followee_degrees(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.len() as u64).collect()
    }

    /// Followers per blog, indexed by blog.
    pub fn follower_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.blog_count];
        for row in &self.rows {
            for &b in row {
                deg[b as usize] += 1;
            }
        }
        deg
    }

    /// Column view: for each blog, the sorted users following it.
    pub fn blog_columns(&self) -> IncidenceColumns {
        let mut cols = vec![Vec::new(); self.blog_count];
        for (u, row) in self.rows.iter().enumerate() {
            for &b in row {
                cols[b as usize].push(u as u32);
            }
        }
        IncidenceColumns {
            user_count: self.rows.len(),
            cols,
        }
    }

    /// `(user, blog)` edges in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&b| (u as u32, b)))
    }
}

/// App-usage matrix in row-compressed form. `rows[u]` holds at most the
/// top-k `(app, count)` pairs for user `u`, sorted by app index, with
/// strictly positive counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppUsage {
    app_count: usize,
    rows: Vec<Vec<(u32, u32)>>,
}

impl AppUsage {
    pub fn new(app_count: usize, mut rows: Vec<Vec<(u32, u32)>>) -> Self {
        for row in &mut rows {
            row.sort_unstable_by_key(|&(a, _)| a);
            for w in row.windows(2) {
                assert!(w[0].0 != w[1].0, "duplicate app index {}", w[0].0);
            }
            for &(a, count) in row.iter() {
                assert!((a as usize) < app_count, "app index {a} out of range");
                assert!(count > 0, "usage counts must be positive");
            }
        }
        AppUsage { app_count, rows }
    }

    pub fn user_count(&self) -> usize {
        self.rows.len()
    }

    pub fn app_count(&self) -> usize {
        self.app_count
    }

    /// Sorted `(app, count)` pairs for `user`.
    pub fn row(&self, user: u32) -> &[(u32, u32)] {
        &self.rows[user as usize]
    }

    /// Sorted app indices used by `user`, counts dropped.
    pub fn apps_of(&self, user: u32) -> Vec<u32> {
        self.rows[user as usize].iter().map(|&(a, _)| a).collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// Users per app, indexed by app.
    pub fn app_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.app_count];
        for row in &self.rows {
            for &(a, _) in row {
                deg[a as usize] += 1;
            }
        }
        deg
    }

    /// Retained apps per user, indexed by user.
    pub fn user_degrees(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.len() as u64).collect()
    }

    /// Binary column view: for each app, the sorted users that use it.
    /// Counts are deliberately dropped; similarity works on incidence.
    pub fn app_columns(&self) -> IncidenceColumns {
        let mut cols = vec![Vec::new(); self.app_count];
        for (u, row) in self.rows.iter().enumerate() {
            for &(a, _) in row {
                cols[a as usize].push(u as u32);
            }
        }
        IncidenceColumns {
            user_count: self.rows.len(),
            cols,
        }
    }
}

/// Column-compressed view of a binary incidence matrix over a shared user
/// axis. Each column lists the users with a nonzero entry, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceColumns {
    user_count: usize,
    cols: Vec<Vec<u32>>,
}

impl IncidenceColumns {
    pub fn new(user_count: usize, mut cols: Vec<Vec<u32>>) -> Self {
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            if let Some(&last) = col.last() {
                assert!((last as usize) < user_count, "user index {last} out of range");
            }
        }
        IncidenceColumns { user_count, cols }
    }

    /// Length of the shared user axis.
    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.cols.len()
    }

    /// Sorted user indices with a nonzero entry in column `item`.
    pub fn column(&self, item: u32) -> &[u32] {
        &self.cols[item as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_interns_in_first_seen_order() {
        let mut v = Vocab::new(EntityKind::User);
        assert_eq!(v.intern("u9"), 0);
        assert_eq!(v.intern("u3"), 1);
        assert_eq!(v.intern("u9"), 0);
        assert_eq!(v.len(), 2);
        assert_eq!(v.name(1), "u3");
        assert_eq!(v.index_of("u3"), Some(1));
        assert_eq!(v.index_of("unknown"), None);
    }

    #[test]
    fn follow_graph_normalizes_rows() {
        let g = FollowGraph::new(4, vec![vec![3, 1, 3, 0], vec![]]);
        assert_eq!(g.row(0), &[0, 1, 3]);
        assert_eq!(g.row(1), &[] as &[u32]);
        assert_eq!(g.nnz(), 3);
        assert!(g.contains(0, 3));
        assert!(!g.contains(0, 2));
        assert_eq!(g.followee_degrees(), vec![3, 0]);
        assert_eq!(g.follower_degrees(), vec![1, 1, 0, 1]);
    }

    #[test]
    fn blog_columns_transpose_the_rows() {
        let g = FollowGraph::new(3, vec![vec![0, 2], vec![2], vec![1, 2]]);
        let cols = g.blog_columns();
        assert_eq!(cols.user_count(), 3);
        assert_eq!(cols.item_count(), 3);
        assert_eq!(cols.column(0), &[0]);
        assert_eq!(cols.column(1), &[2]);
        assert_eq!(cols.column(2), &[0, 1, 2]);
    }

    #[test]
    fn app_usage_sorts_by_app_index() {
        let u = AppUsage::new(5, vec![vec![(4, 2), (0, 7)], vec![(1, 1)]]);
        assert_eq!(u.row(0), &[(0, 7), (4, 2)]);
        assert_eq!(u.apps_of(0), vec![0, 4]);
        assert_eq!(u.app_degrees(), vec![1, 1, 0, 0, 1]);
        assert_eq!(u.user_degrees(), vec![2, 1]);
        let cols = u.app_columns();
        assert_eq!(cols.column(0), &[0]);
        assert_eq!(cols.column(4), &[0]);
        assert_eq!(cols.column(2), &[] as &[u32]);
    }

    #[test]
    #[should_panic(expected = "usage counts must be positive")]
    fn app_usage_rejects_zero_counts() {
        AppUsage::new(2, vec![vec![(0, 0)]]);
    }

    #[test]
    fn edges_iterate_row_major() {
        let g = FollowGraph::new(3, vec![vec![1, 2], vec![0]]);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 0)]);
    }
}
