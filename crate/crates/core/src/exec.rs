//! Execution policy: data-parallel (rayon) or sequential.
//!
//! Reductions are arranged as fixed pairwise trees over the index range, so the
//! result does not depend on the policy or on the number of worker threads.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// Whether parallel execution is actually available in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

/// Evaluates `f(i)` for every `i` in `0..n`, preserving order.
pub fn map_indexed<T, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = policy;
    (0..n).map(f).collect()
}

/// Pairwise tree reduction of `leaf(i)` over `lo..hi` (which must be non-empty).
///
/// The tree shape depends only on `lo` and `hi`, so floating-point results are
/// identical for sequential and parallel runs.
pub fn tree_reduce<T, L, M>(policy: ExecPolicy, lo: usize, hi: usize, leaf: &L, merge: &M) -> T
where
    T: Send,
    L: Fn(usize) -> T + Sync,
    M: Fn(T, T) -> T + Sync,
{
    assert!(hi > lo, "empty reduction range");
    if hi - lo == 1 {
        return leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        let (a, b) = rayon::join(
            || tree_reduce(policy, lo, mid, leaf, merge),
            || tree_reduce(policy, mid, hi, leaf, merge),
        );
        return merge(a, b);
    }
    let a = tree_reduce(policy, lo, mid, leaf, merge);
    let b = tree_reduce(policy, mid, hi, leaf, merge);
    merge(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_reduce_is_policy_independent() {
        let leaf = |i: usize| (i as f64 * 0.1).sin() * 1e-3 + 1.0 / (i as f64 + 1.0);
        let merge = |a: f64, b: f64| a + b;
        let s = tree_reduce(ExecPolicy::Sequential, 0, 1001, &leaf, &merge);
        let p = tree_reduce(ExecPolicy::Parallel, 0, 1001, &leaf, &merge);
        assert_eq!(s.to_bits(), p.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(ExecPolicy::Parallel, 100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }
}
