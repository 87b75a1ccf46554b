use serde::Serialize;

use super::synth::MIN_TICKS;
use super::TickError;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMethod {
    /// Least-squares slope over every tick.
    #[default]
    Regression,
    /// Last tick against first tick only.
    Endpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftFit {
    pub tick_indices: Vec<u64>,
    pub fitted_interval: f64,
    pub nominal_interval: f64,
    /// Positive means the watch runs slow.
    pub drift_s_per_day: f64,
    pub residual_rms: f64,
}

pub fn drift_from_interval(fitted: f64, nominal: f64) -> f64 {
    SECONDS_PER_DAY * (fitted - nominal) / nominal
}

/// Assigns each onset its tick number, allowing for missed ticks.
pub fn tick_indices(onsets: &[f64], nominal_interval: f64) -> Vec<u64> {
    let mut k = 0u64;
    let mut out = Vec::with_capacity(onsets.len());
    for (i, t) in onsets.iter().enumerate() {
        if i > 0 {
            let gap = ((t - onsets[i - 1]) / nominal_interval).round();
            k += (gap as u64).max(1);
        }
        out.push(k);
    }
    out
}

pub fn estimate_drift(onsets: &[f64], nominal_interval: f64, method: DriftMethod) -> Result<DriftFit, TickError> {
    if !(nominal_interval > 0.0 && nominal_interval.is_finite()) {
        return Err(TickError::InvalidParameter("nominal interval must be positive".into()));
    }
    if onsets.len() < MIN_TICKS {
        return Err(TickError::TooFewTicks(onsets.len()));
    }
    if let Some(i) = onsets.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(TickError::NonMonotonicOnsets(i + 1));
    }
    let ks = tick_indices(onsets, nominal_interval);
    let n = onsets.len() as f64;
    let kmean = ks.iter().map(|&k| k as f64).sum::<f64>() / n;
    let tmean = onsets.iter().sum::<f64>() / n;

    let (slope, intercept) = match method {
        DriftMethod::Regression => {
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for (&k, &t) in ks.iter().zip(onsets) {
                let dk = k as f64 - kmean;
                sxy += dk * (t - tmean);
                sxx += dk * dk;
            }
            let slope = sxy / sxx;
            (slope, tmean - slope * kmean)
        }
        DriftMethod::Endpoints => {
            let (k0, kn) = (ks[0] as f64, *ks.last().expect("non-empty") as f64);
            let slope = (onsets[onsets.len() - 1] - onsets[0]) / (kn - k0);
            (slope, onsets[0] - slope * k0)
        }
    };
    let rss: f64 = ks.iter().zip(onsets).map(|(&k, &t)| (t - (intercept + slope * k as f64)).powi(2)).sum();
    Ok(DriftFit {
        tick_indices: ks,
        fitted_interval: slope,
        nominal_interval,
        drift_s_per_day: drift_from_interval(slope, nominal_interval),
        residual_rms: (rss / n).sqrt(),
    })
}
