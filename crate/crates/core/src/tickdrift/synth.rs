use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AudioSeries, TickError};

pub const CLICK_FREQ_HZ: f64 = 1000.0;
pub const CLICK_DECAY_S: f64 = 0.001;
pub const CLICK_LENGTH_S: f64 = 0.005;
pub const MIN_TICKS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub sample_rate: u32,
    pub tick_rate: f64,
    pub duration: f64,
    pub drift_s_per_day: f64,
    /// `f64::INFINITY` means no noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> SynthSpec {
        SynthSpec {
            sample_rate: 44_100,
            tick_rate: 6.0,
            duration: 60.0,
            drift_s_per_day: 0.0,
            snr_db: f64::INFINITY,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn nominal_interval(&self) -> f64 {
        1.0 / self.tick_rate
    }

    pub fn actual_interval(&self) -> f64 {
        self.nominal_interval() * (1.0 + self.drift_s_per_day / 86_400.0)
    }

    fn validate(&self) -> Result<(), TickError> {
        let bad = |m: &str| Err(TickError::InvalidSpec(m.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if !(self.tick_rate > 0.0 && self.tick_rate.is_finite()) {
            return bad("tick_rate must be positive");
        }
        if !(self.duration.is_finite() && self.duration * self.tick_rate >= MIN_TICKS as f64) {
            return bad("duration * tick_rate must be at least 16");
        }
        if !(self.drift_s_per_day.is_finite() && self.drift_s_per_day > -86_400.0) {
            return bad("drift must be finite and above -86400 s/day");
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad("snr_db must be a number");
        }
        Ok(())
    }

    /// Ground-truth click positions in (fractional) samples.
    pub fn click_positions(&self) -> Vec<f64> {
        let period = self.sample_rate as f64 / self.tick_rate * (1.0 + self.drift_s_per_day / 86_400.0);
        let end = self.duration * self.sample_rate as f64;
        (0..).map(|k| k as f64 * period).take_while(|&p| p < end).collect()
    }

    /// Ground-truth click times in seconds.
    pub fn click_times(&self) -> Vec<f64> {
        let fs = self.sample_rate as f64;
        self.click_positions().into_iter().map(|p| p / fs).collect()
    }
}

/// Value of one click `tau` seconds after its onset (zero before it).
pub fn click_shape(tau: f64) -> f64 {
    if !(0.0..CLICK_LENGTH_S).contains(&tau) {
        return 0.0;
    }
    (2.0 * std::f64::consts::PI * CLICK_FREQ_HZ * tau).cos() * (-tau / CLICK_DECAY_S).exp()
}

pub fn synth_ticks(spec: &SynthSpec) -> Result<AudioSeries, TickError> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let n = (spec.duration * fs).round() as usize;
    let mut samples = vec![0.0f64; n];
    for pos in spec.click_positions() {
        let first = pos.ceil() as usize;
        let last = ((pos + CLICK_LENGTH_S * fs).ceil() as usize).min(n);
        for (i, s) in samples.iter_mut().enumerate().take(last).skip(first) {
            *s += click_shape((i as f64 - pos) / fs);
        }
    }
    if spec.snr_db.is_finite() {
        let power = samples.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let sigma = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| TickError::InvalidSpec(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }
    AudioSeries::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_places_sixty_clicks_on_the_grid() {
        let spec = SynthSpec { duration: 10.0, ..SynthSpec::default() };
        let s = synth_ticks(&spec).unwrap();
        let onsets: Vec<usize> = (1..s.samples.len()).filter(|&i| s.samples[i] == 1.0).collect();
        assert_eq!(s.samples[0], 1.0);
        assert_eq!(onsets.len(), 59);
        assert!(onsets.iter().enumerate().all(|(k, &i)| i == (k + 1) * 7350));
    }

    #[test]
    fn one_day_per_day_doubles_the_interval() {
        let spec = SynthSpec { duration: 10.0, drift_s_per_day: 86_400.0, ..SynthSpec::default() };
        let times = spec.click_times();
        assert_eq!(times.len(), 30);
        for (k, t) in times.iter().enumerate() {
            assert!((t - k as f64 * 2.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_determines_output() {
        let spec = SynthSpec { duration: 3.0, snr_db: 10.0, seed: 9, ..SynthSpec::default() };
        assert_eq!(synth_ticks(&spec).unwrap(), synth_ticks(&spec).unwrap());
        let other = SynthSpec { seed: 10, ..spec.clone() };
        assert_ne!(synth_ticks(&spec).unwrap(), synth_ticks(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SynthSpec { duration: 2.0, ..SynthSpec::default() },
            SynthSpec { tick_rate: 0.0, ..SynthSpec::default() },
            SynthSpec { snr_db: f64::NAN, ..SynthSpec::default() },
            SynthSpec { drift_s_per_day: -86_400.0, ..SynthSpec::default() },
        ] {
            assert!(matches!(synth_ticks(&spec), Err(TickError::InvalidSpec(_))), "{spec:?}");
        }
    }
}
