//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it they
//! run the same closures in index order. Results are always returned in
//! index order and reduced pairwise in a fixed tree, so the output does not
//! depend on the number of worker threads.

use crate::error::{Error, Result};

/// Applies `f` to every index in `0..n` and collects results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Runs `f` on a dedicated pool with `threads` workers (or the global pool
/// when `None`). Without the `parallel` feature this just calls `f`.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::config(format!("threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == Some(0) {
        return Err(Error::config("threads: must be at least 1"));
    }
    Ok(f())
}

/// Combines adjacent pairs until one value remains. The tree shape depends
/// only on `items.len()`.
pub fn pairwise_reduce<T>(mut items: Vec<T>, merge: impl Fn(T, T) -> T) -> Option<T> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut iter = items.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Pairwise summation of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order() {
        let v = map_indexed(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn pairwise_reduce_tree() {
        let s = pairwise_reduce(vec!["a", "b", "c"].into_iter().map(String::from).collect(), |a, b| {
            format!("({a}{b})")
        });
        assert_eq!(s.as_deref(), Some("((ab)c)"));
        assert_eq!(pairwise_reduce(Vec::<u8>::new(), |a, _| a), None);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let f = || pairwise_sum(&map_indexed(1000, |i| (i as f64).sqrt().sin()));
        let one = with_threads(Some(1), f).unwrap();
        let four = with_threads(Some(4), f).unwrap();
        assert_eq!(one.to_bits(), four.to_bits());
    }
}
