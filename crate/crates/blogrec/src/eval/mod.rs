//! Offline evaluation protocol.
//!
//! Follows are split per user into train and test; each user's test blogs
//! are ranked against a sampled candidate pool several times the test size,
//! which keeps ranking cost bounded while preserving relative model order.
//! Metrics (precision at N, MRR) are reported overall and bucketed by how
//! many train follows a user has, so cold-start behavior stays visible.

pub mod metrics;

mod evaluate;
mod split;
mod synth;

pub use evaluate::{evaluate, evaluate_detailed, pop_baseline, CandidateScorer, PopScorer, UserRr};
pub use metrics::{paired_sign_test, precision_at, rank_by_score, reciprocal_rank, SignTest};
pub use split::split_follows;
pub use synth::{synth_generate, SynthConfig, SynthCorpus};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ingest::write_follows, FollowGraph, Vocab};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("no user has a nonempty test set")]
    NoTestUsers,
    #[error("scorer failed on user {user}: {message}")]
    Scorer { user: u32, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Error a scorer reports for a single user; evaluation aborts on it.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ScorerError(pub String);

/// Per-user train/test split with sampled candidate pools.
///
/// `test[u]` and `candidates[u]` are sorted and disjoint from each other
/// and from the train row; users who contributed every follow to train
/// have empty entries.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub train: FollowGraph,
    pub test: Vec<Vec<u32>>,
    pub candidates: Vec<Vec<u32>>,
    pub seed: u64,
}

impl EvalSplit {
    pub fn user_count(&self) -> usize {
        self.train.user_count()
    }

    /// Users with a nonempty test set.
    pub fn test_user_count(&self) -> usize {
        self.test.iter().filter(|t| !t.is_empty()).count()
    }

    /// Write `train.tsv`, `test.tsv`, and `candidates.tsv` under `dir` in
    /// the follow edge format, so a run can be replayed exactly.
    pub fn export(&self, dir: &Path, users: &Vocab, blogs: &Vocab) -> io::Result<()> {
        let train = File::create(dir.join("train.tsv"))?;
        write_follows(BufWriter::new(train), users, blogs, &self.train)?;
        for (name, rows) in [("test.tsv", &self.test), ("candidates.tsv", &self.candidates)] {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            for (u, row) in rows.iter().enumerate() {
                for &b in row {
                    writeln!(w, "{}\t{}", users.name(u as u32), blogs.name(b))?;
                }
            }
        }
        Ok(())
    }
}

/// Activity buckets over train-follow counts. Thresholds `[5, 10, 20, 50,
/// 100]` produce half-open ranges G5 = [0,5), G10 = [5,10), ..., plus an
/// overflow bucket G100+ = [100, inf).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSpec {
    thresholds: Vec<u64>,
}

impl Default for BucketSpec {
    fn default() -> Self {
        BucketSpec {
            thresholds: vec![5, 10, 20, 50, 100],
        }
    }
}

impl BucketSpec {
    pub fn new(thresholds: Vec<u64>) -> Result<Self, EvalError> {
        if thresholds.is_empty() {
            return Err(EvalError::InvalidConfig("bucket thresholds are empty".into()));
        }
        if !thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(EvalError::InvalidConfig(
                "bucket thresholds must be strictly increasing".into(),
            ));
        }
        Ok(BucketSpec { thresholds })
    }

    /// Label for a user with `train_count` train follows.
    pub fn label_for(&self, train_count: u64) -> String {
        for &t in &self.thresholds {
            if train_count < t {
                return format!("G{t}");
            }
        }
        format!("G{}+", self.thresholds.last().expect("nonempty"))
    }

    /// All labels in ascending range order, overflow last.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.thresholds.iter().map(|t| format!("G{t}")).collect();
        out.push(format!("G{}+", self.thresholds.last().expect("nonempty")));
        out
    }
}

/// Metrics for one activity bucket.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BucketMetrics {
    pub p_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub count: usize,
}

/// Evaluation result for one model over one split.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricReport {
    pub model: String,
    pub p_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub buckets: BTreeMap<String, BucketMetrics>,
    pub users_evaluated: usize,
}
