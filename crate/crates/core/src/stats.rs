//! Small numeric helpers shared by the estimators.

use serde::Serialize;

/// Arithmetic mean in input order. Every estimator that reports a plain
/// mean goes through here, so collapse identities hold bit for bit.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Quantile by linear interpolation between order statistics (type 7).
/// `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A value pushed back into [0, 1] or below some cap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipEvent {
    pub quantity: String,
    pub raw: f64,
    pub clipped: f64,
}

/// Clamp `raw` to `[lo, hi]`, logging when it moved.
pub fn clip_logged(quantity: &str, raw: f64, lo: f64, hi: f64, events: &mut Vec<ClipEvent>) -> f64 {
    let clipped = raw.clamp(lo, hi);
    if clipped != raw {
        events.push(ClipEvent {
            quantity: quantity.to_string(),
            raw,
            clipped,
        });
    }
    clipped
}
