use super::{AudioSeries, TickError};

pub const DEFAULT_WINDOW_HALF_WIDTH_S: f64 = 0.0025;

/// Samples `center-half ..= center+half`, zero where the range leaves the signal.
fn window(x: &[f64], center: usize, half: usize) -> Vec<f64> {
    (0..=2 * half)
        .map(|m| {
            let idx = (center + m).checked_sub(half);
            idx.and_then(|i| x.get(i)).copied().unwrap_or(0.0)
        })
        .collect()
}

fn valid_len(n: usize, center: usize, half: usize) -> usize {
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(n.saturating_sub(1));
    if center >= n {
        0
    } else {
        hi + 1 - lo
    }
}

/// Delay of `b` relative to `a` in samples, with parabolic sub-sample refinement.
///
/// Positive when the content of `b` sits later in its window than in `a`.
pub fn window_lag(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
    let n = a.len() as isize;
    let corr = |lag: isize| -> f64 {
        let mut s = 0.0;
        for m in 0.max(-lag)..n.min(n - lag) {
            s += a[m as usize] * b[(m + lag) as usize];
        }
        s
    };
    let max_lag = max_lag.min(a.len().saturating_sub(1)) as isize;
    let values: Vec<f64> = (-max_lag..=max_lag).map(corr).collect();
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        // ties go to the smallest |lag|
        let better = *v > values[best]
            || (*v == values[best] && (i as isize - max_lag).abs() < (best as isize - max_lag).abs());
        if better {
            best = i;
        }
    }
    let mut lag = best as f64 - max_lag as f64;
    if best > 0 && best + 1 < values.len() {
        let (l, c, r) = (values[best - 1], values[best], values[best + 1]);
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            lag += (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        }
    }
    lag
}

/// Onset times (seconds) from peak indices by chaining adjacent-window lags.
///
/// The first peak anchors the chain. Each later onset is the previous one
/// plus the raw peak spacing plus the measured lag between the two windows;
/// if that would not move forward, the raw spacing is used alone.
pub fn refine_onsets(series: &AudioSeries, peaks: &[usize], window_half_width: f64) -> Result<Vec<f64>, TickError> {
    if peaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TickError::InvalidParameter("peaks must be strictly ascending".into()));
    }
    let fs = series.sample_rate as f64;
    let x = &series.samples;
    let half = (window_half_width * fs).round().max(0.0) as usize;
    for &p in peaks {
        if valid_len(x.len(), p, half) < 2 {
            return Err(TickError::DegenerateWindow(p));
        }
    }
    let Some(&first) = peaks.first() else { return Ok(Vec::new()) };
    let max_lag = (half / 2).max(1);
    let mut onsets = Vec::with_capacity(peaks.len());
    let mut onset = first as f64;
    onsets.push(onset / fs);
    let mut prev = window(x, first, half);
    for pair in peaks.windows(2) {
        let next = window(x, pair[1], half);
        let spacing = (pair[1] - pair[0]) as f64;
        let lag = window_lag(&prev, &next, max_lag);
        let step = if spacing + lag > 0.0 { spacing + lag } else { spacing };
        onset += step;
        onsets.push(onset / fs);
        prev = next;
    }
    Ok(onsets)
}
