//! Exact best deviation on a price grid without scanning every point.
//!
//! In the capacity-limited games a seller's profit, as a function of his own
//! price, is concave between breakpoints where his ratio rank or his number
//! of servable buyers changes. The best grid price therefore sits next to a
//! breakpoint, next to the unconstrained optimum, or at an end of the
//! interval, and only those points need evaluating.

/// Best value of `f` over the grid `lo, lo + step, ...` capped at `hi`
/// (which is always included). `anchors` are the breakpoints and interior
/// optima of `f`; grid points within two steps of each are evaluated.
///
/// Returns `(price, value)`; `None` when `lo > hi`.
pub(crate) fn best_on_grid(lo: f64, hi: f64, step: f64, anchors: &[f64], f: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return None;
    }
    let last = ((hi - lo) / step).floor();
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |p: f64| {
        let v = f(p);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((p, v));
        }
    };
    consider(lo);
    consider(hi);
    for &a in anchors {
        if !(a.is_finite() && a >= lo - 2.0 * step && a <= hi + 2.0 * step) {
            continue;
        }
        let k = ((a - lo) / step).floor();
        for dk in -2..=2 {
            let kk = k + dk as f64;
            if kk >= 0.0 && kk <= last {
                consider(lo + kk * step);
            }
        }
    }
    best
}
