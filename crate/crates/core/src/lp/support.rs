//! Runtime check of the positive-support bound of optimal vertices.
//!
//! An optimal basic solution has at most `m` basic variables; every other
//! positive variable sits on a bound. When all positive bounds are at least
//! 1, each such variable contributes at least 1 to `‖x‖₁`, so
//! `#{x_j > 0} <= ⌈m + ‖x‖₁⌉`. LPs with fractional caps are counted as
//! skipped.

use std::sync::atomic::{AtomicU64, Ordering};

use super::standard::StandardFormLp;

/// Values above this count as positive.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

static CHECKED: AtomicU64 = AtomicU64::new(0);
static VIOLATED: AtomicU64 = AtomicU64::new(0);
static SKIPPED: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SupportStats {
    pub checked: u64,
    pub violated: u64,
    pub skipped: u64,
}

pub fn stats() -> SupportStats {
    SupportStats {
        checked: CHECKED.load(Ordering::Relaxed),
        violated: VIOLATED.load(Ordering::Relaxed),
        skipped: SKIPPED.load(Ordering::Relaxed),
    }
}

pub fn applies(lp: &StandardFormLp) -> bool {
    let ok = |b: f64| b == 0.0 || b.abs() >= 1.0;
    (0..lp.n).all(|j| ok(lp.lower[j]) && ok(lp.upper[j]))
}

/// `(support size, bound)` for a structural vector.
pub fn measure(m: usize, x: &[f64]) -> (usize, f64) {
    let support = x.iter().filter(|&&v| v > SUPPORT_THRESHOLD).count();
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    (support, (m as f64 + l1).ceil())
}

pub(crate) fn record(lp: &StandardFormLp, x: &[f64]) {
    if !applies(lp) {
        SKIPPED.fetch_add(1, Ordering::Relaxed);
        return;
    }
    let (support, bound) = measure(lp.m, x);
    CHECKED.fetch_add(1, Ordering::Relaxed);
    if support as f64 > bound {
        VIOLATED.fetch_add(1, Ordering::Relaxed);
        debug_assert!(false, "support {support} exceeds bound {bound}");
    }
}
