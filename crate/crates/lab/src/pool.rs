//! Worker pool over independent cells. Results come back in input order,
//! so the thread count never changes a report.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub fn par_map<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(k, x)| f(k, x)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.min(items.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= items.len() {
                    break;
                }
                let r = f(k, &items[k]);
                slots.lock().unwrap()[k] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every cell ran")).collect()
}

/// Threads from the flag, else `MAGSLE_THREADS`, else the machine's parallelism.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("MAGSLE_THREADS").ok()?.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let xs: Vec<u64> = (0..50).collect();
        let a = par_map(1, &xs, |k, x| k as u64 * 100 + x);
        let b = par_map(4, &xs, |k, x| k as u64 * 100 + x);
        assert_eq!(a, b);
    }
}
