//! Deterministic parallel sample execution.
//!
//! Samples are split into fixed-size chunks claimed by worker threads through
//! an atomic cursor; per-chunk partial results are stored by chunk index and
//! folded sequentially at the end. The fold order is therefore a function of
//! the sample count alone, never of scheduling, so any statistic — integer or
//! floating point — aggregates identically for every worker count.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

const CHUNK: u64 = 1024;

/// Number of workers to use: explicit request, else the `CAPACITY_WORKERS`
/// environment variable, else the machine's available parallelism.
pub fn worker_count(requested: Option<usize>) -> usize {
    if let Some(w) = requested {
        return w.max(1);
    }
    if let Ok(s) = std::env::var("CAPACITY_WORKERS") {
        if let Ok(w) = s.trim().parse::<usize>() {
            return w.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Map every index in `0..n` through `map` and fold the results.
///
/// `map` must be a pure function of the index (draw randomness from a
/// per-index stream). The result equals the sequential left fold over
/// indices in increasing order.
pub fn parallel_fold<S, F>(n: u64, workers: usize, init: S, map: F, fold: fn(&mut S, &S)) -> S
where
    S: Send + Clone,
    F: Fn(u64, &mut S) + Sync,
{
    let workers = workers.max(1);
    if n == 0 {
        return init;
    }
    let n_chunks = n.div_ceil(CHUNK);
    if workers == 1 || n_chunks == 1 {
        let mut acc = init;
        for i in 0..n {
            map(i, &mut acc);
        }
        return acc;
    }
    let cursor = AtomicU64::new(0);
    let partials: Mutex<Vec<Option<S>>> = Mutex::new(vec![None; n_chunks as usize]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let template = init.clone();
            let cursor = &cursor;
            let partials = &partials;
            let map = &map;
            scope.spawn(move || loop {
                let c = cursor.fetch_add(1, Ordering::Relaxed);
                if c >= n_chunks {
                    break;
                }
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(n);
                let mut acc = template.clone();
                for i in lo..hi {
                    map(i, &mut acc);
                }
                partials.lock().unwrap()[c as usize] = Some(acc);
            });
        }
    });
    let mut acc = init;
    for p in partials.into_inner().unwrap() {
        fold(&mut acc, &p.expect("chunk not computed"));
    }
    acc
}
