//! Per-user train/test splitting with sampled candidate pools.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalError, EvalSplit};
use crate::corpus::FollowGraph;
use crate::sample::sample_excluding;

/// Split each user's follows into train and test and draw a candidate pool
/// of `neg_mult` unfollowed blogs per test blog.
///
/// A user with `d` follows keeps `ceil(train_frac * d)` in train, so
/// single-follow users contribute train data but are never evaluated. The
/// candidate pool excludes everything the user follows and is capped by the
/// number of unfollowed blogs. One seeded RNG stream drives the per-user
/// shuffles and candidate draws in user index order, which makes the split
/// a pure function of `(graph, train_frac, neg_mult, seed)`.
pub fn split_follows(
    graph: &FollowGraph,
    train_frac: f64,
    neg_mult: usize,
    seed: u64,
) -> Result<EvalSplit, EvalError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(EvalError::InvalidConfig(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    if neg_mult < 1 {
        return Err(EvalError::InvalidConfig(
            "neg_mult must be at least 1".into(),
        ));
    }

    let n = graph.blog_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::with_capacity(graph.user_count());
    let mut test_rows = Vec::with_capacity(graph.user_count());
    let mut cand_rows = Vec::with_capacity(graph.user_count());

    for u in 0..graph.user_count() as u32 {
        let row = graph.row(u);
        let d = row.len();
        if d == 0 {
            train_rows.push(Vec::new());
            test_rows.push(Vec::new());
            cand_rows.push(Vec::new());
            continue;
        }
        let n_train = (train_frac * d as f64).ceil() as usize;
        let mut shuffled = row.to_vec();
        shuffled.shuffle(&mut rng);
        let mut train: Vec<u32> = shuffled[..n_train].to_vec();
        let mut test: Vec<u32> = shuffled[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();

        let want = neg_mult * test.len();
        let take = want.min(n - d);
        let mut candidates = sample_excluding(&mut rng, n, row, take);
        candidates.sort_unstable();

        train_rows.push(train);
        test_rows.push(test);
        cand_rows.push(candidates);
    }

    Ok(EvalSplit {
        train: FollowGraph::new(n, train_rows),
        test: test_rows,
        candidates: cand_rows,
        seed,
    })
}
