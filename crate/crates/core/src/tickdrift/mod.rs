//! Watch tick drift: the reference analysis shipped with the example deposition.
//!
//! Pipeline: [`detect_peaks`] (optionally on a moving-RMS envelope), then
//! [`refine_onsets`] by cross-correlating adjacent tick windows, then
//! [`estimate_drift`] from a line fit of onset time against tick number.
//! Drift is in seconds per day; positive means the watch runs slow.

mod drift;
mod onsets;
mod peaks;
mod synth;
mod wav;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use drift::{drift_from_interval, estimate_drift, tick_indices, DriftFit, DriftMethod, SECONDS_PER_DAY};
pub use onsets::{refine_onsets, window_lag, DEFAULT_WINDOW_HALF_WIDTH_S};
pub use peaks::{
    detect_peaks, envelope, find_peaks, local_maxima, moving_rms, prominences, prune_by_distance, ENVELOPE_WINDOW_S,
};
pub use synth::{click_shape, synth_ticks, SynthSpec, MIN_TICKS};
pub use wav::{read_wav, write_wav, WavFormat};

pub const DEFAULT_TICK_RATE: f64 = 6.0;
pub const DEFAULT_PROMINENCE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum TickError {
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("audio contains non-finite samples or a zero sample rate")]
    InvalidAudio,
    #[error("signal is empty")]
    EmptySignal,
    #[error("window around sample {0} is shorter than 2 samples")]
    DegenerateWindow(usize),
    #[error("{0} ticks found; at least 16 are needed")]
    TooFewTicks(usize),
    #[error("onset {0} is not after the previous one")]
    NonMonotonicOnsets(usize),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl TickError {
    /// Short label used in table cells.
    pub fn label(&self) -> &'static str {
        match self {
            TickError::InvalidSpec(_) => "invalid_spec",
            TickError::InvalidParameter(_) => "invalid_parameter",
            TickError::InvalidAudio => "invalid_audio",
            TickError::EmptySignal => "empty_signal",
            TickError::DegenerateWindow(_) => "degenerate_window",
            TickError::TooFewTicks(_) => "too_few_ticks",
            TickError::NonMonotonicOnsets(_) => "non_monotonic_onsets",
            TickError::Wav(_) => "wav_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSeries {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSeries {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<AudioSeries, TickError> {
        if sample_rate == 0 || samples.iter().any(|s| !s.is_finite()) {
            return Err(TickError::InvalidAudio);
        }
        Ok(AudioSeries { samples, sample_rate })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisParams {
    pub tick_rate: f64,
    pub prominence: f64,
    pub envelope: bool,
    /// Seconds; `None` means half the nominal interval.
    pub min_distance: Option<f64>,
    pub window_half_width: f64,
    pub method: DriftMethod,
}

impl AnalysisParams {
    pub fn new(tick_rate: f64) -> AnalysisParams {
        AnalysisParams {
            tick_rate,
            prominence: DEFAULT_PROMINENCE,
            envelope: false,
            min_distance: None,
            window_half_width: DEFAULT_WINDOW_HALF_WIDTH_S,
            method: DriftMethod::Regression,
        }
    }

    pub fn nominal_interval(&self) -> f64 {
        1.0 / self.tick_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub onsets: Vec<f64>,
    pub fitted_interval: f64,
    pub nominal_interval: f64,
    pub drift_s_per_day: f64,
    pub residual_rms: f64,
    pub n_ticks: usize,
    pub params: AnalysisParams,
}

pub fn analyze(series: &AudioSeries, params: &AnalysisParams) -> Result<DriftEstimate, TickError> {
    if !(params.tick_rate > 0.0 && params.tick_rate.is_finite()) {
        return Err(TickError::InvalidParameter("tick_rate must be positive".into()));
    }
    let nominal = params.nominal_interval();
    let min_distance = params.min_distance.unwrap_or(nominal / 2.0);
    // the recording is taken to be silent outside its bounds; padding by a
    // full envelope window lets a tick on the first sample still be a peak
    // with its full prominence
    let pad = (ENVELOPE_WINDOW_S * series.sample_rate as f64).ceil() as usize + 1;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(&series.samples);
    padded.resize(padded.len() + pad, 0.0);
    let padded = AudioSeries { samples: padded, sample_rate: series.sample_rate };
    let peaks: Vec<usize> = detect_peaks(&padded, params.prominence, min_distance, params.envelope)?
        .into_iter()
        .filter_map(|p| p.checked_sub(pad))
        .filter(|&p| p < series.samples.len())
        .collect();
    let onsets = refine_onsets(series, &peaks, params.window_half_width)?;
    let fit = estimate_drift(&onsets, nominal, params.method)?;
    Ok(DriftEstimate {
        n_ticks: onsets.len(),
        onsets,
        fitted_interval: fit.fitted_interval,
        nominal_interval: nominal,
        drift_s_per_day: fit.drift_s_per_day,
        residual_rms: fit.residual_rms,
        params: *params,
    })
}

/// Prominence by envelope grid used when none is given.
pub fn default_grid() -> Vec<(f64, bool)> {
    vec![(0.1, false), (0.1, true), (0.3, false), (0.3, true)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRow {
    pub dataset: String,
    pub prominence: f64,
    pub envelope: bool,
    pub n_ticks: Option<usize>,
    pub drift_s_per_day: Option<f64>,
    pub residual_rms: Option<f64>,
    /// Failure label when the cell could not be estimated.
    pub error: Option<String>,
}

/// One row per dataset and grid cell, in dataset-major order.
pub fn drift_table(datasets: &[(String, AudioSeries)], grid: &[(f64, bool)], base: &AnalysisParams) -> Vec<DriftRow> {
    let cells: Vec<(usize, f64, bool)> =
        (0..datasets.len()).flat_map(|d| grid.iter().map(move |&(p, e)| (d, p, e))).collect();
    cells
        .par_iter()
        .map(|&(d, prominence, envelope)| {
            let (name, series) = &datasets[d];
            let params = AnalysisParams { prominence, envelope, ..*base };
            let mut row = DriftRow {
                dataset: name.clone(),
                prominence,
                envelope,
                n_ticks: None,
                drift_s_per_day: None,
                residual_rms: None,
                error: None,
            };
            match analyze(series, &params) {
                Ok(est) => {
                    row.n_ticks = Some(est.n_ticks);
                    row.drift_s_per_day = Some(est.drift_s_per_day);
                    row.residual_rms = Some(est.residual_rms);
                }
                Err(e) => row.error = Some(e.label().to_string()),
            }
            row
        })
        .collect()
}

pub const TABLE_HEADER: [&str; 6] = ["dataset", "prominence", "envelope", "n_ticks", "drift_s_per_day", "residual_rms"];

/// Tab-separated table; a failed cell shows `error:<label>` in the drift column.
pub fn table_to_tsv(rows: &[DriftRow]) -> String {
    let mut out = TABLE_HEADER.join("\t");
    out.push('\n');
    for r in rows {
        let n = r.n_ticks.map_or("NA".to_string(), |n| n.to_string());
        let drift = match (&r.drift_s_per_day, &r.error) {
            (Some(d), _) => format!("{d:.6}"),
            (None, Some(e)) => format!("error:{e}"),
            (None, None) => "NA".into(),
        };
        let rms = r.residual_rms.map_or("NA".to_string(), |v| format!("{v:.6e}"));
        let _ = writeln!(out, "{}\t{}\t{}\t{n}\t{drift}\t{rms}", r.dataset, r.prominence, r.envelope);
    }
    out
}
