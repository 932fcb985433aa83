//! Shared reservoir-free sampling of indices outside an exclusion set.

use std::collections::HashSet;

use rand::Rng;

/// Draw `take` distinct indices from `0..n`, none of which appear in the
/// sorted slice `exclude`. `take` must not exceed `n - exclude.len()`.
///
/// Two strategies share one RNG stream: rejection sampling while the draw
/// space is sparse, otherwise a partial Fisher-Yates shuffle of the
/// materialized complement. Results come back in draw order.
pub(crate) fn sample_excluding<R: Rng>(
    rng: &mut R,
    n: usize,
    exclude: &[u32],
    take: usize,
) -> Vec<u32> {
    debug_assert!(exclude.windows(2).all(|w| w[0] < w[1]));
    let avail = n - exclude.len();
    assert!(take <= avail, "cannot draw {take} from {avail} free indices");
    if take == 0 {
        return Vec::new();
    }
    if take * 4 <= avail {
        let mut seen = HashSet::with_capacity(take);
        let mut out = Vec::with_capacity(take);
        while out.len() < take {
            let idx = rng.gen_range(0..n as u32);
            if exclude.binary_search(&idx).is_ok() || !seen.insert(idx) {
                continue;
            }
            out.push(idx);
        }
        out
    } else {
        let mut pool = Vec::with_capacity(avail);
        let mut next_excluded = 0;
        for idx in 0..n as u32 {
            if next_excluded < exclude.len() && exclude[next_excluded] == idx {
                next_excluded += 1;
            } else {
                pool.push(idx);
            }
        }
        for i in 0..take {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool
    }
}
