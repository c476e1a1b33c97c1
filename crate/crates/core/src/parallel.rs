//! Deterministic trajectory-level parallelism.
//!
//! Work items are identified by their index. Results are always gathered in
//! index order and reduced sequentially, so the output does not depend on
//! the number of worker threads or on scheduling.

use rayon::prelude::*;

/// Number of items evaluated per parallel block before reduction.
pub const DEFAULT_BLOCK: usize = 256;

/// Maps `f` over `0..n` in parallel and returns the results in index order.
pub fn ordered_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n` block by block and folds every result into `acc`
/// strictly in index order. Memory is bounded by the block size.
pub fn ordered_fold<T, A, F, G>(n: usize, block: usize, mut acc: A, f: F, mut fold: G) -> A
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
    G: FnMut(&mut A, usize, T),
{
    let block = block.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let results: Vec<T> = (start..end).into_par_iter().map(&f).collect();
        for (offset, item) in results.into_iter().enumerate() {
            fold(&mut acc, start + offset, item);
        }
        start = end;
    }
    acc
}

/// Runs `op` inside a dedicated pool with `threads` workers (0 = rayon default).
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return op();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed for work item `index` of sub-stream
/// `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ 0x5354_4152_4b53_4844);
    let b = splitmix64(a ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03));
    splitmix64(b ^ index.wrapping_mul(0xa24b_aed4_963e_e407))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_order_is_index_order() {
        let seen = ordered_fold(
            1000,
            7,
            Vec::new(),
            |i| i * 2,
            |acc, i, v| {
                assert_eq!(v, 2 * i);
                acc.push(i);
            },
        );
        assert_eq!(seen, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn derived_seeds_differ() {
        let mut seeds: Vec<u64> = (0..10_000).map(|i| derive_seed(42, 0, i)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(42, 0, 3), derive_seed(42, 1, 3));
        assert_ne!(derive_seed(42, 0, 3), derive_seed(43, 0, 3));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let sum = |threads| with_threads(threads, || ordered_fold(5000, 64, 0.0f64, f, |acc, _, v| *acc += v));
        assert_eq!(sum(1).to_bits(), sum(3).to_bits());
    }
}
