//! Thin data-parallel helpers that fall back to sequential code when the
//! `parallel` feature is off (e.g. on wasm).

/// Fixed chunk length for ordered reductions. Partial sums are formed per
/// chunk and combined left to right, so the result does not depend on how
/// many threads ran.
const CHUNK: usize = 4096;

pub(crate) fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sum of `f(i)` over `0..len`.
///
/// With `deterministic` the reduction order is fixed by [`CHUNK`]; otherwise
/// the work-stealing order of the thread pool decides the rounding.
pub(crate) fn sum_indexed<F>(len: usize, deterministic: bool, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if deterministic {
            let chunks = len.div_ceil(CHUNK);
            let partials: Vec<f64> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let end = ((c + 1) * CHUNK).min(len);
                    (c * CHUNK..end).map(&f).sum::<f64>()
                })
                .collect();
            partials.into_iter().sum()
        } else {
            (0..len).into_par_iter().map(f).sum()
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = deterministic;
        let mut total = 0.0;
        let mut start = 0;
        while start < len {
            let end = (start + CHUNK).min(len);
            total += (start..end).map(&f).sum::<f64>();
            start = end;
        }
        total
    }
}

/// Fixes the worker count of the global pool. Must run before any parallel
/// work; later calls fail.
#[cfg(feature = "parallel")]
pub fn set_threads(n: usize) -> crate::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| crate::Error::Domain(format!("cannot configure {n} threads: {e}")))
}

/// Sequential build: nothing to configure.
#[cfg(not(feature = "parallel"))]
pub fn set_threads(_n: usize) -> crate::Result<()> {
    Ok(())
}
