use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::{AudioSeries, TickError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads PCM (8 to 32 bit) or float-32 WAV; multi-channel input is averaged to mono.
pub fn read_wav(path: &Path) -> Result<AudioSeries, TickError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader.samples::<i32>().map(|s| s.map(|v| v as f64 / scale)).collect::<Result<_, _>>()?
        }
    };
    let samples = interleaved.chunks(channels).map(|frame| frame.iter().sum::<f64>() / channels as f64).collect();
    AudioSeries::new(samples, spec.sample_rate)
}

pub fn write_wav(path: &Path, series: &AudioSeries, format: WavFormat) -> Result<(), TickError> {
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec { channels: 1, sample_rate: series.sample_rate, bits_per_sample: bits, sample_format };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &series.samples {
        match format {
            WavFormat::Pcm16 => writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?,
            WavFormat::Float32 => writer.write_sample(s as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}
