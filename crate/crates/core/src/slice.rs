//! Univariate slice sampling with stepping-out and shrinkage.

use rand::Rng;

/// Initial bracket width.
pub const DEFAULT_WIDTH: f64 = 1.0;
/// Maximum number of stepping-out expansions.
pub const DEFAULT_MAX_STEPS: usize = 50;

/// One slice-sampling transition from `x0` for the unnormalised log-density
/// `log_f`. Returns `x0` unchanged when `log_f(x0)` is not finite, since no
/// slice can be defined there.
pub fn slice_step<F, R>(x0: f64, log_f: F, width: f64, max_steps: usize, rng: &mut R) -> f64
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let f0 = log_f(x0);
    if !f0.is_finite() {
        return x0;
    }
    let u: f64 = rng.random();
    let level = f0 + u.ln();

    let v: f64 = rng.random();
    let mut lo = x0 - width * v;
    let mut hi = lo + width;
    let w: f64 = rng.random();
    let mut j = (max_steps as f64 * w).floor() as usize;
    let mut k = max_steps.saturating_sub(1) - j.min(max_steps.saturating_sub(1));
    while j > 0 && log_f(lo) > level {
        lo -= width;
        j -= 1;
    }
    while k > 0 && log_f(hi) > level {
        hi += width;
        k -= 1;
    }

    loop {
        let r: f64 = rng.random();
        let x = lo + r * (hi - lo);
        if log_f(x) > level {
            return x;
        }
        if x < x0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * x0.abs().max(1.0) {
            return x0;
        }
    }
}
