//! Item-based neighborhood models over binary incidence columns.
//!
//! Similarities are computed between item columns (blog/blog or app/blog)
//! of the user incidence matrix, pruned to the top-K neighbors per item,
//! and used to score unseen blogs by accumulating similarity mass from the
//! items a user already has. An app-based and a blog-based score can be
//! blended with a weight learned on a holdout split.
//!
//! Pearson treats columns as full `m`-dimensional binary vectors, so two
//! items that never co-occur still get a (negative) correlation. For binary
//! data both measures reduce to integer counts `na`, `nb`, `inter`; the
//! closed forms below keep that integer arithmetic exact and defer to
//! floating point only for the final normalization.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::corpus::{AppUsage, FollowGraph, IncidenceColumns};
use crate::eval::{evaluate, BucketSpec, CandidateScorer, EvalSplit, ScorerError};
use crate::scalar::real;
use crate::Real;

/// Default neighborhood size.
pub const DEFAULT_K: usize = 50;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("neighborhood size must be at least 1, got {k}")]
    InvalidK { k: usize },
    #[error("incidence matrices disagree on the user axis: {left} vs {right}")]
    MismatchedUserAxis { left: usize, right: usize },
    #[error("blend weight must lie in [0, 1], got {value}")]
    InvalidAlpha { value: f64 },
    #[error("alpha grid is empty")]
    EmptyGrid,
    #[error("alpha search failed: {0}")]
    AlphaSearch(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{source_name}:{line}: malformed similarity row")]
    ParseRow { source_name: String, line: usize },
}

/// Similarity measure between binary columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Cosine,
    Pearson,
}

impl Measure {
    pub fn label(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Pearson => "pearson",
        }
    }
}

/// Number of users shared by two sorted columns.
fn intersection_size(a: &[u32], b: &[u32]) -> u64 {
    let mut n = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Cosine similarity between two sorted binary columns:
/// `|a ∩ b| / sqrt(|a| * |b|)`. Zero if either column is empty.
pub fn cosine_sim<S: Real>(a: &[u32], b: &[u32]) -> S {
    let inter = intersection_size(a, b);
    cosine_from_counts(a.len() as u64, b.len() as u64, inter)
}

fn cosine_from_counts<S: Real>(na: u64, nb: u64, inter: u64) -> S {
    if inter == 0 {
        return S::zero();
    }
    // na*nb stays exact in the scalar, so perfect squares divide cleanly
    let num = S::from_u64(inter).expect("count fits scalar");
    let den = S::from_u64(na * nb).expect("count fits scalar").sqrt();
    num / den
}

/// Pearson correlation between two binary columns embedded in `dim`
/// dimensions (zeros included). Columns with zero variance, i.e. empty or
/// full, correlate with nothing and yield 0.
pub fn pearson_sim<S: Real>(a: &[u32], b: &[u32], dim: usize) -> S {
    let inter = intersection_size(a, b);
    pearson_from_counts(a.len() as u64, b.len() as u64, inter, dim as u64)
}

fn pearson_from_counts<S: Real>(na: u64, nb: u64, inter: u64, m: u64) -> S {
    if na == 0 || nb == 0 || na == m || nb == m {
        return S::zero();
    }
    // m*cov = m*inter - na*nb, exact in integers
    let num = (m as i64) * (inter as i64) - (na as i64) * (nb as i64);
    if num == 0 {
        return S::zero();
    }
    let num = S::from_i64(num).expect("count fits scalar");
    let da = S::from_u64(na * (m - na)).expect("count fits scalar").sqrt();
    let db = S::from_u64(nb * (m - nb)).expect("count fits scalar").sqrt();
    num / (da * db)
}

/// Pruned similarity matrix: for each source item, at most `k` neighbors
/// with nonzero similarity, stored sorted by target index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix<S> {
    source_count: usize,
    target_count: usize,
    k: usize,
    measure: Measure,
    rows: Vec<Vec<(u32, S)>>,
}

impl<S: Real> SimMatrix<S> {
    fn from_rows(
        source_count: usize,
        target_count: usize,
        k: usize,
        measure: Measure,
        rows: Vec<Vec<(u32, S)>>,
    ) -> Self {
        debug_assert_eq!(rows.len(), source_count);
        debug_assert!(rows.iter().all(|r| r.len() <= k));
        debug_assert!(rows
            .iter()
            .all(|r| r.windows(2).all(|w| w[0].0 < w[1].0)));
        debug_assert!(rows
            .iter()
            .all(|r| r.iter().all(|&(t, s)| (t as usize) < target_count && s != S::zero())));
        SimMatrix {
            source_count,
            target_count,
            k,
            measure,
            rows,
        }
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    /// Retained neighbors of `source`, sorted by target index.
    pub fn row(&self, source: u32) -> &[(u32, S)] {
        &self.rows[source as usize]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// TSV rows `source<TAB>target<TAB>sim` with nine fractional digits,
    /// source-major, targets ascending.
    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, sim) in row {
                writeln!(w, "{s}\t{t}\t{sim:.9}")?;
            }
        }
        Ok(())
    }

    /// Parse what [`Self::write_tsv`] wrote. Values re-read this way carry
    /// only the printed precision.
    pub fn read_tsv(
        reader: impl BufRead,
        source_name: &str,
        source_count: usize,
        target_count: usize,
        k: usize,
        measure: Measure,
    ) -> Result<Self, KnnError> {
        let mut rows: Vec<Vec<(u32, S)>> = vec![Vec::new(); source_count];
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split('\t');
            let parsed = (|| {
                let s: usize = parts.next()?.parse().ok()?;
                let t: u32 = parts.next()?.parse().ok()?;
                let v: f64 = parts.next()?.parse().ok()?;
                if parts.next().is_some() || s >= source_count || (t as usize) >= target_count {
                    return None;
                }
                Some((s, t, v))
            })();
            let Some((s, t, v)) = parsed else {
                return Err(KnnError::ParseRow {
                    source_name: source_name.to_owned(),
                    line: lineno + 1,
                });
            };
            rows[s].push((t, real::<S>(v)));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(t, _)| t);
        }
        rows.iter_mut().for_each(|r| r.retain(|&(_, v)| v != S::zero()));
        Ok(SimMatrix::from_rows(source_count, target_count, k, measure, rows))
    }
}

/// Build the pruned similarity matrix between all columns of one incidence
/// matrix, excluding self-similarity. Ties on similarity keep the smaller
/// target index.
pub fn build_topk_sim<S: Real>(
    cols: &IncidenceColumns,
    k: usize,
    measure: Measure,
) -> Result<SimMatrix<S>, KnnError> {
    if k < 1 {
        return Err(KnnError::InvalidK { k });
    }
    let rows = topk_rows(cols, cols, k, measure, true);
    Ok(SimMatrix::from_rows(
        cols.item_count(),
        cols.item_count(),
        k,
        measure,
        rows,
    ))
}

/// Build the pruned similarity matrix from the columns of `source` to the
/// columns of `target` (e.g. apps to blogs). Both must share the user axis.
pub fn build_topk_cross_sim<S: Real>(
    source: &IncidenceColumns,
    target: &IncidenceColumns,
    k: usize,
    measure: Measure,
) -> Result<SimMatrix<S>, KnnError> {
    if k < 1 {
        return Err(KnnError::InvalidK { k });
    }
    if source.user_count() != target.user_count() {
        return Err(KnnError::MismatchedUserAxis {
            left: source.user_count(),
            right: target.user_count(),
        });
    }
    let rows = topk_rows(source, target, k, measure, false);
    Ok(SimMatrix::from_rows(
        source.item_count(),
        target.item_count(),
        k,
        measure,
        rows,
    ))
}

fn topk_rows<S: Real>(
    source: &IncidenceColumns,
    target: &IncidenceColumns,
    k: usize,
    measure: Measure,
    exclude_self: bool,
) -> Vec<Vec<(u32, S)>> {
    let m = source.user_count() as u64;
    let targets = target.item_count();
    let target_sizes: Vec<u64> = (0..targets as u32)
        .map(|t| target.column(t).len() as u64)
        .collect();

    // user -> target items, built in target order so walks are deterministic
    let mut by_user: Vec<Vec<u32>> = vec![Vec::new(); source.user_count()];
    for t in 0..targets as u32 {
        for &u in target.column(t) {
            by_user[u as usize].push(t);
        }
    }

    let mut inter = vec![0u64; targets];
    let mut touched: Vec<u32> = Vec::new();
    let mut rows = Vec::with_capacity(source.item_count());

    for s in 0..source.item_count() as u32 {
        let col = source.column(s);
        for &u in col {
            for &t in &by_user[u as usize] {
                if inter[t as usize] == 0 {
                    touched.push(t);
                }
                inter[t as usize] += 1;
            }
        }

        let na = col.len() as u64;
        let mut candidates: Vec<(u32, S)> = Vec::new();
        match measure {
            Measure::Cosine => {
                // only co-occurring targets can score nonzero
                for &t in &touched {
                    if exclude_self && t == s {
                        continue;
                    }
                    let sim =
                        cosine_from_counts::<S>(na, target_sizes[t as usize], inter[t as usize]);
                    if sim != S::zero() {
                        candidates.push((t, sim));
                    }
                }
                candidates.sort_unstable_by_key(|&(t, _)| t);
            }
            Measure::Pearson => {
                // non-co-occurring pairs correlate negatively, so every
                // target is a candidate
                for t in 0..targets as u32 {
                    if exclude_self && t == s {
                        continue;
                    }
                    let sim = pearson_from_counts::<S>(
                        na,
                        target_sizes[t as usize],
                        inter[t as usize],
                        m,
                    );
                    if sim != S::zero() {
                        candidates.push((t, sim));
                    }
                }
            }
        }

        for &t in &touched {
            inter[t as usize] = 0;
        }
        touched.clear();

        if candidates.len() > k {
            candidates.sort_unstable_by(|&(t1, s1), &(t2, s2)| {
                s2.partial_cmp(&s1).expect("similarities are finite").then(t1.cmp(&t2))
            });
            candidates.truncate(k);
            candidates.sort_unstable_by_key(|&(t, _)| t);
        }
        rows.push(candidates);
    }
    rows
}

/// Accumulate similarity mass into every target: `scores[t] = sum of
/// sim(s, t)` over the user's active source items `s`, added in ascending
/// source order.
pub fn score_user<S: Real>(active: &[u32], sim: &SimMatrix<S>) -> Vec<S> {
    let mut scores = vec![S::zero(); sim.target_count()];
    for &s in active {
        for &(t, v) in sim.row(s) {
            scores[t as usize] += v;
        }
    }
    scores
}

/// Blend weight `alpha` in `[0, 1]`: 1 scores purely from apps, 0 purely
/// from followed blogs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendWeight<S>(S);

impl<S: Real> BlendWeight<S> {
    pub fn new(alpha: f64) -> Result<Self, KnnError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(KnnError::InvalidAlpha { value: alpha });
        }
        Ok(BlendWeight(real::<S>(alpha)))
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// `alpha * (app_row . sim_app_blog) + (1 - alpha) * (blog_row . sim_blog_blog)`
/// over a shared blog target axis.
pub fn blend_score<S: Real>(
    app_row: &[u32],
    blog_row: &[u32],
    sim_app_blog: &SimMatrix<S>,
    sim_blog_blog: &SimMatrix<S>,
    alpha: BlendWeight<S>,
) -> Vec<S> {
    assert_eq!(
        sim_app_blog.target_count(),
        sim_blog_blog.target_count(),
        "blend needs a shared blog axis"
    );
    let a = alpha.value();
    let b = S::one() - a;
    let from_apps = score_user(app_row, sim_app_blog);
    let from_blogs = score_user(blog_row, sim_blog_blog);
    from_apps
        .into_iter()
        .zip(from_blogs)
        .map(|(x, y)| a * x + b * y)
        .collect()
}

/// Highest-scoring target indices, ties toward the smaller index, with
/// `exclude` (any order) removed before the cut.
pub fn recommend_topn<S: Real>(scores: &[S], exclude: &[u32], n: usize) -> Vec<u32> {
    let mut excluded = exclude.to_vec();
    excluded.sort_unstable();
    let mut order: Vec<u32> = (0..scores.len() as u32)
        .filter(|i| excluded.binary_search(i).is_err())
        .collect();
    order.sort_by(|&i, &j| {
        scores[j as usize]
            .partial_cmp(&scores[i as usize])
            .expect("scores are finite")
            .then(i.cmp(&j))
    });
    order.truncate(n);
    order
}

/// Scores candidates by blog/blog similarity to the user's followed blogs.
pub struct ItemCfScorer<'a, S> {
    pub train: &'a FollowGraph,
    pub sim: &'a SimMatrix<S>,
}

impl<S: Real> CandidateScorer<S> for ItemCfScorer<'_, S> {
    fn name(&self) -> &str {
        "itemcf"
    }

    fn score_candidates(&self, user: u32, candidates: &[u32]) -> Result<Vec<S>, ScorerError> {
        let dense = score_user(self.train.row(user), self.sim);
        gather(&dense, candidates)
    }
}

/// Scores candidates by the alpha blend of app/blog and blog/blog paths.
pub struct BlendedScorer<'a, S> {
    pub train: &'a FollowGraph,
    pub usage: &'a AppUsage,
    pub sim_app_blog: &'a SimMatrix<S>,
    pub sim_blog_blog: &'a SimMatrix<S>,
    pub alpha: BlendWeight<S>,
}

impl<S: Real> CandidateScorer<S> for BlendedScorer<'_, S> {
    fn name(&self) -> &str {
        "itemcf-app"
    }

    fn score_candidates(&self, user: u32, candidates: &[u32]) -> Result<Vec<S>, ScorerError> {
        let dense = blend_score(
            &self.usage.apps_of(user),
            self.train.row(user),
            self.sim_app_blog,
            self.sim_blog_blog,
            self.alpha,
        );
        gather(&dense, candidates)
    }
}

fn gather<S: Real>(dense: &[S], candidates: &[u32]) -> Result<Vec<S>, ScorerError> {
    candidates
        .iter()
        .map(|&c| {
            dense
                .get(c as usize)
                .copied()
                .ok_or_else(|| ScorerError(format!("candidate blog {c} out of range")))
        })
        .collect()
}

/// Pick the blend weight from `grid` that maximizes MRR on the holdout
/// split. Ties keep the smallest weight.
pub fn learn_alpha<S: Real>(
    sim_app_blog: &SimMatrix<S>,
    sim_blog_blog: &SimMatrix<S>,
    usage: &AppUsage,
    holdout: &EvalSplit,
    grid: &[f64],
) -> Result<BlendWeight<S>, KnnError> {
    if grid.is_empty() {
        return Err(KnnError::EmptyGrid);
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("grid values are finite"));
    let mut best: Option<(BlendWeight<S>, f64)> = None;
    for &alpha_f in &grid {
        let alpha = BlendWeight::new(alpha_f)?;
        let scorer = BlendedScorer {
            train: &holdout.train,
            usage,
            sim_app_blog,
            sim_blog_blog,
            alpha,
        };
        let report = evaluate(&scorer, holdout, &[1], &BucketSpec::default())
            .map_err(|e| KnnError::AlphaSearch(e.to_string()))?;
        if best.map_or(true, |(_, mrr)| report.mrr > mrr) {
            best = Some((alpha, report.mrr));
        }
    }
    Ok(best.expect("grid is nonempty").0)
}
