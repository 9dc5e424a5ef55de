//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature the [`Parallelism::Parallel`] mode fans work out over
//! rayon; without it both modes run sequentially. Reductions always combine partial
//! results in index order so the two modes are bit-identical.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// `items.iter().map(f).collect()`, in parallel when enabled. Output order matches input.
pub fn map_collect<T, U, F>(mode: Parallelism, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Index-range variant of [`map_collect`].
pub fn map_range<U, F>(mode: Parallelism, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Splits `items` into fixed-size chunks, folds each chunk sequentially with `fold`,
/// then merges the chunk results left to right with `merge`. The chunk size, not the
/// thread count, fixes the floating-point summation order.
pub fn chunked_reduce<T, A, I, F, M>(
    mode: Parallelism,
    items: &[T],
    chunk: usize,
    init: I,
    fold: F,
    merge: M,
) -> Option<A>
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &T) + Sync + Send,
    M: Fn(&mut A, A),
{
    let chunk = chunk.max(1);
    let run = |c: &[T]| {
        let mut acc = init();
        for item in c {
            fold(&mut acc, item);
        }
        acc
    };
    let partials: Vec<A> = {
        #[cfg(feature = "parallel")]
        {
            if mode.is_parallel() {
                use rayon::prelude::*;
                items.par_chunks(chunk).map(run).collect()
            } else {
                items.chunks(chunk).map(run).collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = mode;
            items.chunks(chunk).map(run).collect()
        }
    };
    let mut iter = partials.into_iter();
    let mut total = iter.next()?;
    for p in iter {
        merge(&mut total, p);
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e3).collect();
        let sum = |mode| {
            chunked_reduce(mode, &xs, 7, || 0.0, |a, x| *a += x, |a, b| *a += b).unwrap()
        };
        assert_eq!(
            sum(Parallelism::Sequential).to_bits(),
            sum(Parallelism::Parallel).to_bits()
        );
        assert!(chunked_reduce(Parallelism::Parallel, &[] as &[f64], 4, || 0.0, |_, _| {}, |_, _| {})
            .is_none());
    }

    #[test]
    fn map_preserves_order() {
        let v = map_range(Parallelism::Parallel, 100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
