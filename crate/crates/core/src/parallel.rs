//! Order-preserving map helpers.
//!
//! With the `parallel` feature (on by default) these fan work out across
//! the rayon thread pool; without it they run sequentially. Results come
//! back in input order either way, and every reduction in this crate folds
//! them in that fixed order, so outputs are bit-identical across feature
//! settings and thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over a slice, collecting results in input order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map_collect(&items, |x| x * 2);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 2 * i as u64));
        let out = map_range(1000, |i| i as u64 * 3);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 3 * i as u64));
    }
}
