//! Source signals for experiments: synthetic noise or recordings from disk.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{invalid, Error, Result};
use crate::gcc::Signal;
use crate::wav;

/// Lower and upper edge of the synthetic signal band, in Hz.
pub const SYNTH_BAND_HZ: (f64, f64) = (100.0, 6000.0);

/// Formant-like resonances of the speech-like signal: (centre Hz, bandwidth Hz, gain).
const RESONANCES: [(f64, f64, f64); 4] = [(500.0, 120.0, 6.0), (1500.0, 180.0, 4.0), (2500.0, 250.0, 3.0), (3500.0, 300.0, 2.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSource {
    /// White Gaussian noise restricted to [`SYNTH_BAND_HZ`].
    Noise {
        #[serde(default = "default_duration")]
        duration: f64,
    },
    /// Pink-weighted noise with four resonant peaks and a syllabic envelope.
    SpeechLike {
        #[serde(default = "default_duration")]
        duration: f64,
    },
    /// Mono WAV files from a directory; each trial picks one at random.
    WavDirectory { path: PathBuf },
}

fn default_duration() -> f64 {
    0.2
}

impl Default for SignalSource {
    fn default() -> Self {
        SignalSource::SpeechLike {
            duration: default_duration(),
        }
    }
}

/// Draws source signals; WAV files are loaded once up front.
#[derive(Debug, Clone)]
pub struct SignalBank {
    source: SignalSource,
    sample_rate: f64,
    recordings: Vec<Signal>,
}

impl SignalBank {
    pub fn new(source: SignalSource, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        let recordings = match &source {
            SignalSource::Noise { duration } | SignalSource::SpeechLike { duration } => {
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(invalid(format!("signal duration must be positive, got {duration}")));
                }
                Vec::new()
            }
            SignalSource::WavDirectory { path } => load_directory(path, sample_rate)?,
        };
        Ok(Self {
            source,
            sample_rate,
            recordings,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Signal> {
        match self.source {
            SignalSource::Noise { duration } => band_limited_noise(rng, self.len_for(duration), self.sample_rate),
            SignalSource::SpeechLike { duration } => speech_like(rng, self.len_for(duration), self.sample_rate),
            SignalSource::WavDirectory { .. } => Ok(self.recordings[rng.gen_range(0..self.recordings.len())].clone()),
        }
    }

    fn len_for(&self, duration: f64) -> usize {
        ((duration * self.sample_rate).round() as usize).max(1)
    }
}

fn load_directory(dir: &Path, sample_rate: f64) -> Result<Vec<Signal>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(format!("no WAV files in {}", dir.display())));
    }
    files
        .iter()
        .map(|f| {
            let s = wav::read_wav(f)?;
            if s.sample_rate() != sample_rate {
                return Err(Error::SampleRateMismatch(s.sample_rate(), sample_rate));
            }
            Ok(s)
        })
        .collect()
}

/// Shapes Gaussian noise in the frequency domain by `gain(f)` and normalizes
/// the result to unit RMS.
fn shaped_noise<R: Rng + ?Sized>(rng: &mut R, len: usize, fs: f64, gain: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let n = len.next_power_of_two().max(2);
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut spec = dsp::rfft(&white, n);
    let df = fs / n as f64;
    for (b, v) in spec.iter_mut().enumerate() {
        *v *= gain(b as f64 * df);
    }
    let mut x = dsp::irfft(&spec, n);
    x.truncate(len);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if !(rms > 0.0) {
        return Err(invalid("signal too short to carry any in-band energy"));
    }
    x.iter_mut().for_each(|v| *v /= rms);
    Ok(x)
}

fn in_band(f: f64) -> bool {
    f >= SYNTH_BAND_HZ.0 && f <= SYNTH_BAND_HZ.1
}

pub fn band_limited_noise<R: Rng + ?Sized>(rng: &mut R, len: usize, fs: f64) -> Result<Signal> {
    let x = shaped_noise(rng, len, fs, |f| if in_band(f) { 1.0 } else { 0.0 })?;
    Signal::new(fs, x)
}

pub fn speech_like<R: Rng + ?Sized>(rng: &mut R, len: usize, fs: f64) -> Result<Signal> {
    let gain = |f: f64| {
        if !in_band(f) {
            return 0.0;
        }
        let formants: f64 = RESONANCES
            .iter()
            .map(|&(fc, bw, g)| g / (1.0 + ((f - fc) / (bw / 2.0)).powi(2)))
            .sum();
        (1.0 + formants) / f.sqrt()
    };
    let mut x = shaped_noise(rng, len, fs, gain)?;
    // roughly four syllables per second
    let rate = 4.0;
    let phase = rng.gen_range(0.0..2.0 * PI);
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v *= 0.6 + 0.4 * (2.0 * PI * rate * t + phase).sin();
    }
    Signal::new(fs, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn band_energy_fraction(x: &Signal, lo: f64, hi: f64) -> f64 {
        let n = x.len().next_power_of_two();
        let spec = dsp::rfft(x.samples(), n);
        let df = x.sample_rate() / n as f64;
        let (mut inside, mut total) = (0.0, 0.0);
        for (b, v) in spec.iter().enumerate() {
            let e = v.norm_sqr();
            total += e;
            if (lo..=hi).contains(&(b as f64 * df)) {
                inside += e;
            }
        }
        inside / total
    }

    #[test]
    fn noise_is_band_limited_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = band_limited_noise(&mut rng, 4096, 16000.0).unwrap();
        assert_eq!(x.len(), 4096);
        assert!(band_energy_fraction(&x, 90.0, 6010.0) > 0.95);
        let again = band_limited_noise(&mut ChaCha8Rng::seed_from_u64(1), 4096, 16000.0).unwrap();
        assert_eq!(x, again);
    }

    #[test]
    fn speech_like_has_low_frequency_tilt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = speech_like(&mut rng, 8192, 44100.0).unwrap();
        let low = band_energy_fraction(&x, 100.0, 1000.0);
        let high = band_energy_fraction(&x, 5000.0, 6000.0);
        assert!(low > 5.0 * high, "low {low} high {high}");
    }

    #[test]
    fn bad_duration_rejected() {
        assert!(SignalBank::new(SignalSource::Noise { duration: 0.0 }, 16000.0).is_err());
    }

    #[test]
    fn wav_directory_checks_rate() {
        let dir = tempfile::tempdir().unwrap();
        let s = Signal::new(16000.0, vec![0.1, -0.2, 0.3]).unwrap();
        wav::write_wav_i16(dir.path().join("a.wav"), &s).unwrap();
        let src = SignalSource::WavDirectory {
            path: dir.path().to_path_buf(),
        };
        assert!(matches!(SignalBank::new(src.clone(), 44100.0), Err(Error::SampleRateMismatch(..))));
        let bank = SignalBank::new(src, 16000.0).unwrap();
        assert_eq!(bank.draw(&mut ChaCha8Rng::seed_from_u64(0)).unwrap().len(), 3);
    }
}
