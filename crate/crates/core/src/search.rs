//! Lexicographic enumeration of fixed-size index subsets.
//!
//! Subsets of `0..n` of size `k` are ranked in lexicographic order, so a
//! search can be split over a plain integer range. The parallel path and the
//! sequential path return the same (lexicographically first) hit, which keeps
//! witnesses and examined-subset counts deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default number of subsets examined before a search gives up.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

/// Controls exhaustive subset searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Maximum number of subsets (rank tests / consistency tests) examined.
    pub budget: u64,
    /// Use the rayon thread pool. Ignored without the `parallel` feature.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: DEFAULT_BUDGET,
            parallel: cfg!(feature = "parallel"),
        }
    }
}

impl SearchConfig {
    pub fn sequential() -> Self {
        SearchConfig {
            parallel: false,
            ..Default::default()
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let left = k - slot - 1;
        let mut c = next;
        loop {
            let count = binomial(n - c - 1, left);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

/// Advances `subset` to its lexicographic successor; false when exhausted.
pub fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Indices of `0..n` not contained in the sorted `subset`.
pub fn complement(subset: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - subset.len());
    let mut it = subset.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Scans the first `limit` k-subsets of `0..n` in lexicographic order and
/// returns the first one for which `f` yields a value, together with its rank.
pub fn find_map_first<T, F>(
    n: usize,
    k: usize,
    limit: u64,
    cfg: &SearchConfig,
    f: F,
) -> Option<(u64, Vec<usize>, T)>
where
    T: Send,
    F: Fn(&[usize]) -> Option<T> + Sync + Send,
{
    let limit = limit.min(binomial(n, k));
    if limit == 0 {
        return None;
    }
    #[cfg(feature = "parallel")]
    if cfg.parallel && limit > 1 {
        return (0..limit).into_par_iter().find_map_first(|rank| {
            let subset = unrank(n, k, rank);
            f(&subset).map(|t| (rank, subset, t))
        });
    }
    let _ = cfg;
    let mut subset: Vec<usize> = (0..k).collect();
    let mut rank = 0;
    loop {
        if let Some(t) = f(&subset) {
            return Some((rank, subset, t));
        }
        rank += 1;
        if rank >= limit || !next_subset(&mut subset, n) {
            return None;
        }
    }
}

/// All hits of `f` among the first `limit` k-subsets, in lexicographic order.
pub fn filter_map_all<T, F>(
    n: usize,
    k: usize,
    limit: u64,
    cfg: &SearchConfig,
    f: F,
) -> Vec<(Vec<usize>, T)>
where
    T: Send,
    F: Fn(&[usize]) -> Option<T> + Sync + Send,
{
    let limit = limit.min(binomial(n, k));
    if limit == 0 {
        return Vec::new();
    }
    #[cfg(feature = "parallel")]
    if cfg.parallel && limit > 1 {
        return (0..limit)
            .into_par_iter()
            .filter_map(|rank| {
                let subset = unrank(n, k, rank);
                f(&subset).map(|t| (subset, t))
            })
            .collect();
    }
    let _ = cfg;
    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    let mut rank = 0;
    loop {
        if let Some(t) = f(&subset) {
            out.push((subset.clone(), t));
        }
        rank += 1;
        if rank >= limit || !next_subset(&mut subset, n) {
            return out;
        }
    }
}

/// Maps `f` over `items`, in parallel when configured. Output order follows input.
pub fn map_items<I, T, F>(items: &[I], cfg: &SearchConfig, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if cfg.parallel && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = cfg;
    items.iter().map(f).collect()
}
