//! Ranking metrics and the paired sign test.

use crate::Real;

/// Order pool items by score descending, breaking ties toward the smaller
/// index. `scores[i]` belongs to `pool[i]`.
pub fn rank_by_score<S: Real>(pool: &[u32], scores: &[S]) -> Vec<u32> {
    assert_eq!(pool.len(), scores.len(), "one score per pool item");
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .expect("scores are finite")
            .then(pool[i].cmp(&pool[j]))
    });
    order.into_iter().map(|i| pool[i]).collect()
}

/// Fraction of the first `n` ranked items that are relevant, always
/// divided by `n` even when fewer items exist. `relevant` must be sorted.
pub fn precision_at(ranked: &[u32], relevant: &[u32], n: usize) -> f64 {
    assert!(n > 0, "precision needs a positive cutoff");
    let hits = ranked
        .iter()
        .take(n)
        .filter(|b| relevant.binary_search(b).is_ok())
        .count();
    hits as f64 / n as f64
}

/// Inverse of the 1-based rank of the first relevant item, 0 when none
/// appears. `relevant` must be sorted.
pub fn reciprocal_rank(ranked: &[u32], relevant: &[u32]) -> f64 {
    for (i, b) in ranked.iter().enumerate() {
        if relevant.binary_search(b).is_ok() {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Two-sided paired sign test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub p_value: f64,
}

/// Exact two-sided sign test on paired observations. Ties are discarded;
/// the p-value is `2 * P[Bin(n, 1/2) >= max(wins)]` capped at 1, and 1 when
/// every pair ties.
pub fn paired_sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "sign test needs paired observations");
    let mut wins_a = 0;
    let mut wins_b = 0;
    let mut ties = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            wins_a += 1;
        } else if y > x {
            wins_b += 1;
        } else {
            ties += 1;
        }
    }
    let n = wins_a + wins_b;
    let p_value = if n == 0 {
        1.0
    } else {
        (2.0 * binom_half_tail(n, wins_a.max(wins_b))).min(1.0)
    };
    SignTest {
        wins_a,
        wins_b,
        ties,
        p_value,
    }
}

/// `P[Bin(n, 1/2) >= k]`, computed in log space so large `n` cannot
/// underflow before the tail sum.
fn binom_half_tail(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    // ln C(n, k) - n ln 2 via a product of ratios
    let mut ln_pmf = -(n as f64) * std::f64::consts::LN_2;
    for j in 1..=k {
        ln_pmf += ((n - k + j) as f64 / j as f64).ln();
    }
    let mut pmf = ln_pmf.exp();
    let mut tail = 0.0;
    for i in k..=n {
        tail += pmf;
        // C(n, i+1) = C(n, i) * (n - i) / (i + 1)
        pmf *= (n - i) as f64 / (i + 1) as f64;
    }
    tail.min(1.0)
}
