//! Protocol driver: rank each test user's pool, fold metrics overall and
//! per activity bucket.

use std::collections::BTreeMap;

use super::metrics::{precision_at, rank_by_score, reciprocal_rank};
use super::{BucketMetrics, BucketSpec, EvalError, EvalSplit, MetricReport, ScorerError};
use crate::corpus::FollowGraph;
use crate::Real;

/// A model that can score a user's candidate blogs. Implementations live
/// with their models; evaluation only needs this surface.
pub trait CandidateScorer<S: Real> {
    /// Stable identifier used in reports and output file names.
    fn name(&self) -> &str;

    /// Scores aligned with `candidates`, higher meaning more recommended.
    fn score_candidates(&self, user: u32, candidates: &[u32]) -> Result<Vec<S>, ScorerError>;
}

/// Reciprocal rank of one evaluated user, kept for paired significance
/// tests across models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRr {
    pub user: u32,
    pub rr: f64,
}

/// Evaluate `scorer` over every user with a nonempty test set.
///
/// The user's pool is their sampled candidates plus their held-out test
/// blogs, ranked together; precision is computed at each cutoff in `ns`.
/// Scorer failures abort the run with the offending user attached.
pub fn evaluate<S: Real, C: CandidateScorer<S> + ?Sized>(
    scorer: &C,
    split: &EvalSplit,
    ns: &[usize],
    buckets: &BucketSpec,
) -> Result<MetricReport, EvalError> {
    evaluate_detailed(scorer, split, ns, buckets).map(|(report, _)| report)
}

/// [`evaluate`], also returning per-user reciprocal ranks in user order.
pub fn evaluate_detailed<S: Real, C: CandidateScorer<S> + ?Sized>(
    scorer: &C,
    split: &EvalSplit,
    ns: &[usize],
    buckets: &BucketSpec,
) -> Result<(MetricReport, Vec<UserRr>), EvalError> {
    assert!(!ns.is_empty() && ns.iter().all(|&n| n > 0), "bad cutoffs");

    let mut overall = Fold::new(ns);
    let mut by_bucket: BTreeMap<String, Fold> = BTreeMap::new();
    let mut detailed = Vec::new();

    for u in 0..split.user_count() as u32 {
        let test = &split.test[u as usize];
        if test.is_empty() {
            continue;
        }
        let mut pool: Vec<u32> = Vec::with_capacity(test.len() + split.candidates[u as usize].len());
        pool.extend_from_slice(&split.candidates[u as usize]);
        pool.extend_from_slice(test);
        pool.sort_unstable();
        pool.dedup();

        let scores = scorer
            .score_candidates(u, &pool)
            .map_err(|e| EvalError::Scorer {
                user: u,
                message: e.0,
            })?;
        if scores.len() != pool.len() {
            return Err(EvalError::Scorer {
                user: u,
                message: format!(
                    "scorer returned {} scores for {} candidates",
                    scores.len(),
                    pool.len()
                ),
            });
        }

        let ranked = rank_by_score(&pool, &scores);
        let rr = reciprocal_rank(&ranked, test);
        let ps: Vec<f64> = ns.iter().map(|&n| precision_at(&ranked, test, n)).collect();

        overall.add(&ps, rr);
        let label = buckets.label_for(split.train.row(u).len() as u64);
        by_bucket
            .entry(label)
            .or_insert_with(|| Fold::new(ns))
            .add(&ps, rr);
        detailed.push(UserRr { user: u, rr });
    }

    if overall.count == 0 {
        return Err(EvalError::NoTestUsers);
    }

    let report = MetricReport {
        model: scorer.name().to_owned(),
        p_at: overall.mean_p(ns),
        mrr: overall.mean_rr(),
        buckets: by_bucket
            .into_iter()
            .map(|(label, fold)| {
                let metrics = BucketMetrics {
                    p_at: fold.mean_p(ns),
                    mrr: fold.mean_rr(),
                    count: fold.count,
                };
                (label, metrics)
            })
            .collect(),
        users_evaluated: overall.count,
    };
    Ok((report, detailed))
}

/// Running sums for one user group, folded in user index order.
struct Fold {
    p_sums: Vec<f64>,
    rr_sum: f64,
    count: usize,
}

impl Fold {
    fn new(ns: &[usize]) -> Self {
        Fold {
            p_sums: vec![0.0; ns.len()],
            rr_sum: 0.0,
            count: 0,
        }
    }

    fn add(&mut self, ps: &[f64], rr: f64) {
        for (sum, p) in self.p_sums.iter_mut().zip(ps) {
            *sum += p;
        }
        self.rr_sum += rr;
        self.count += 1;
    }

    fn mean_p(&self, ns: &[usize]) -> BTreeMap<usize, f64> {
        ns.iter()
            .zip(&self.p_sums)
            .map(|(&n, &sum)| (n, sum / self.count as f64))
            .collect()
    }

    fn mean_rr(&self) -> f64 {
        self.rr_sum / self.count as f64
    }
}

/// Popularity baseline: every candidate scores its train follower count,
/// identically for all users.
pub struct PopScorer {
    counts: Vec<u64>,
}

impl PopScorer {
    pub fn follower_count(&self, blog: u32) -> u64 {
        self.counts[blog as usize]
    }
}

/// Build the popularity baseline from train follower counts.
pub fn pop_baseline(train: &FollowGraph) -> PopScorer {
    PopScorer {
        counts: train.follower_degrees(),
    }
}

impl<S: Real> CandidateScorer<S> for PopScorer {
    fn name(&self) -> &str {
        "pop"
    }

    fn score_candidates(&self, _user: u32, candidates: &[u32]) -> Result<Vec<S>, ScorerError> {
        candidates
            .iter()
            .map(|&c| {
                self.counts
                    .get(c as usize)
                    .and_then(|&n| S::from_u64(n))
                    .ok_or_else(|| ScorerError(format!("candidate blog {c} out of range")))
            })
            .collect()
    }
}
