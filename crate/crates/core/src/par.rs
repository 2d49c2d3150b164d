//! Data-parallel map over independent items, with a sequential fallback
//! when the `parallel` feature is off.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `f(index, item)` for every item, results in input order.
pub fn map_indexed<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

/// Derives an independent stream seed for item `index` (splitmix64 finalizer).
pub fn item_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v: Vec<u32> = (0..1000).collect();
        let a = map_indexed(&v, Execution::Sequential, |i, x| i as u32 * 2 + x);
        let b = map_indexed(&v, Execution::Parallel, |i, x| i as u32 * 2 + x);
        assert_eq!(a, b);
        assert_eq!(a[10], 30);
    }

    #[test]
    fn seeds_differ_per_item() {
        assert_ne!(item_seed(1, 0), item_seed(1, 1));
        assert_ne!(item_seed(1, 0), item_seed(2, 0));
        assert_eq!(item_seed(5, 9), item_seed(5, 9));
    }
}
