use super::{AudioSeries, TickError};

pub const ENVELOPE_WINDOW_S: f64 = 0.002;

/// Local maxima; a flat top counts once, at its (lower) middle sample.
/// The first and last samples are never maxima.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// For every sample, the minimum of `x` from just after the nearest strictly
/// greater sample on one side up to the sample itself. Popped stack entries
/// tile that range, so their minima combine in O(n) overall.
fn side_minima(x: &[f64], order: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut base = vec![0.0; x.len()];
    let mut stack: Vec<usize> = Vec::new();
    for i in order {
        let mut m = x[i];
        while let Some(&top) = stack.last() {
            if x[top] > x[i] {
                break;
            }
            m = m.min(base[top]);
            stack.pop();
        }
        base[i] = m;
        stack.push(i);
    }
    base
}

/// Topographic prominence of each peak in `peaks`.
///
/// A peak's base on each side is the lowest sample between it and the
/// nearest strictly higher sample (or the signal edge).
pub fn prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    let left = side_minima(x, 0..x.len());
    let right = side_minima(x, (0..x.len()).rev());
    peaks.iter().map(|&p| x[p] - left[p].max(right[p])).collect()
}

/// Centered moving RMS over `window` samples (rounded up to odd).
/// Samples outside the signal count as silence.
pub fn moving_rms(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0f64);
    for v in x {
        prefix.push(prefix.last().expect("non-empty") + v * v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            ((prefix[hi] - prefix[lo]).max(0.0) / (2 * half + 1) as f64).sqrt()
        })
        .collect()
}

pub fn envelope(series: &AudioSeries) -> Vec<f64> {
    let window = ((ENVELOPE_WINDOW_S * series.sample_rate as f64).round() as usize).max(1);
    moving_rms(&series.samples, window)
}

/// Drops peaks closer than `distance` samples to a higher kept peak.
/// Ties in height go to the earlier peak. Returns indices ascending.
pub fn prune_by_distance(x: &[f64], peaks: &[usize], distance: f64) -> Vec<usize> {
    if distance <= 1.0 {
        return peaks.to_vec();
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        let p = peaks[i];
        for j in (0..i).rev() {
            if ((p - peaks[j]) as f64) >= distance {
                break;
            }
            keep[j] = false;
        }
        for j in i + 1..peaks.len() {
            if ((peaks[j] - p) as f64) >= distance {
                break;
            }
            keep[j] = false;
        }
    }
    peaks.iter().zip(keep).filter(|(_, k)| *k).map(|(&p, _)| p).collect()
}

/// Core of [`detect_peaks`] on a bare signal; `min_distance` in samples.
pub fn find_peaks(x: &[f64], prominence: f64, min_distance: f64) -> Vec<usize> {
    let candidates = local_maxima(x);
    let prom = prominences(x, &candidates);
    let survivors: Vec<usize> =
        candidates.iter().zip(prom).filter(|(_, p)| *p >= prominence).map(|(&i, _)| i).collect();
    prune_by_distance(x, &survivors, min_distance)
}

/// Tick peaks of `series` (optionally of its RMS envelope), as sample indices.
pub fn detect_peaks(
    series: &AudioSeries,
    prominence: f64,
    min_distance: f64,
    use_envelope: bool,
) -> Result<Vec<usize>, TickError> {
    if series.samples.is_empty() {
        return Err(TickError::EmptySignal);
    }
    if !(prominence > 0.0) || !(min_distance >= 0.0) {
        return Err(TickError::InvalidParameter("prominence must be > 0 and min_distance >= 0".into()));
    }
    let distance = min_distance * series.sample_rate as f64;
    if use_envelope {
        Ok(find_peaks(&envelope(series), prominence, distance))
    } else {
        Ok(find_peaks(&series.samples, prominence, distance))
    }
}
