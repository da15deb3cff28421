//! Order-preserving parallel map, a no-op fallback when the `parallel`
//! feature is off (the wasm build). Outputs are collected in input order, so
//! results are byte-identical with and without the feature.

#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Cap the global rayon pool from the FRONTLAB_THREADS environment variable.
/// Safe to call more than once; only the first initialization wins.
#[cfg(feature = "parallel")]
pub fn init_threads() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(val) = std::env::var("FRONTLAB_THREADS") {
            if let Ok(n) = val.parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    });
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads() {}
