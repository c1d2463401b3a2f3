//! PHAT-whitened cross-power spectra and generalized cross-correlation at
//! arbitrary (non-integer) lags.
//!
//! A [`CrossSpectrumPhat`] holds one whitened spectrum per microphone pair,
//! computed once over the whole recording. The correlation is then evaluated
//! directly as a frequency-domain sum at whatever lag a grid point asks for,
//! optionally restricted to a sub-band. Nothing is interpolated.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{invalid, Error, Result};

/// Default relative regularization of the PHAT denominator.
pub const DEFAULT_EPSILON_REL: f64 = 1e-12;

/// Bins between exact re-evaluations of the rotating phasor.
const PHASOR_REANCHOR: usize = 64;

/// A sampled mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    sample_rate: f64,
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if samples.is_empty() {
            return Err(invalid("signal has no samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("signal contains non-finite samples"));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, gain: f64) -> Signal {
        Signal {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|v| v * gain).collect(),
        }
    }
}

/// Angular frequency interval `[omega_min, omega_max]` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub omega_min: f64,
    pub omega_max: f64,
}

impl Band {
    pub fn new(omega_min: f64, omega_max: f64) -> Result<Self> {
        if !(omega_min >= 0.0 && omega_max > omega_min && omega_max.is_finite()) {
            return Err(invalid(format!(
                "band needs 0 <= omega_min < omega_max, got [{omega_min}, {omega_max}]"
            )));
        }
        Ok(Self { omega_min, omega_max })
    }

    pub fn from_hz(f_min: f64, f_max: f64) -> Result<Self> {
        Self::new(2.0 * PI * f_min, 2.0 * PI * f_max)
    }

    pub fn f_min(&self) -> f64 {
        self.omega_min / (2.0 * PI)
    }

    pub fn f_max(&self) -> f64 {
        self.omega_max / (2.0 * PI)
    }
}

/// Which correlation feeds the SRP sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GccMode {
    /// Integrate over the whole signal band.
    Standard,
    /// Cut the band at the per-point alias-free limit.
    BandLimited,
    /// Band-limited, rescaled by the fraction of the band that was kept.
    BandLimitedNormalized,
}

impl GccMode {
    pub const ALL: [GccMode; 3] = [
        GccMode::Standard,
        GccMode::BandLimited,
        GccMode::BandLimitedNormalized,
    ];

    /// Short label used in tables: `S`, `B` or `BN`.
    pub fn label(self) -> &'static str {
        match self {
            GccMode::Standard => "S",
            GccMode::BandLimited => "B",
            GccMode::BandLimitedNormalized => "BN",
        }
    }
}

impl std::fmt::Display for GccMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GccMode::Standard => "standard",
            GccMode::BandLimited => "band-limited",
            GccMode::BandLimitedNormalized => "band-limited-normalized",
        })
    }
}

impl std::str::FromStr for GccMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "s" | "S" => Ok(GccMode::Standard),
            "band-limited" | "b" | "B" => Ok(GccMode::BandLimited),
            "band-limited-normalized" | "bn" | "BN" => Ok(GccMode::BandLimitedNormalized),
            other => Err(invalid(format!("unknown GCC mode '{other}'"))),
        }
    }
}

/// Whitened cross-power spectrum of one microphone pair over the
/// non-negative DFT frequencies `0..=n_fft/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrumPhat {
    sample_rate: f64,
    n_fft: usize,
    bins: Vec<Complex64>,
}

impl CrossSpectrumPhat {
    /// Wraps precomputed half-spectrum bins. `bins.len()` must be `n_fft/2 + 1`.
    pub fn from_bins(sample_rate: f64, n_fft: usize, bins: Vec<Complex64>) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_multiple_of(2) || bins.len() != n_fft / 2 + 1 {
            return Err(invalid(format!(
                "expected {} bins for an even n_fft of {n_fft}, got {}",
                n_fft / 2 + 1,
                bins.len()
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(invalid("sample rate must be positive"));
        }
        Ok(Self { sample_rate, n_fft, bins })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Spacing between DFT bins in rad/s.
    pub fn bin_spacing(&self) -> f64 {
        2.0 * PI * self.sample_rate / self.n_fft as f64
    }

    /// Nyquist frequency in rad/s.
    pub fn nyquist(&self) -> f64 {
        PI * self.sample_rate
    }

    pub fn bin_omega(&self, b: usize) -> f64 {
        b as f64 * self.bin_spacing()
    }

    /// Indices of the first and last bins with `lo <= omega <= hi`.
    pub fn bin_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let last = self.bins.len() - 1;
        let first_at_or_above = |w: f64| -> usize {
            let mut b = (w / self.bin_spacing()).ceil().max(0.0).min((last + 1) as f64) as usize;
            while b > 0 && self.bin_omega(b - 1) >= w {
                b -= 1;
            }
            while b <= last && self.bin_omega(b) < w {
                b += 1;
            }
            b
        };
        let b_lo = first_at_or_above(lo);
        let mut b_hi = (hi / self.bin_spacing()).floor().max(0.0).min(last as f64) as usize;
        while b_hi < last && self.bin_omega(b_hi + 1) <= hi {
            b_hi += 1;
        }
        while b_hi > 0 && self.bin_omega(b_hi) > hi {
            b_hi -= 1;
        }
        if b_lo > last || b_lo > b_hi || self.bin_omega(b_hi) > hi {
            None
        } else {
            Some((b_lo, b_hi))
        }
    }

    /// Spectrum of the swapped pair.
    pub fn conj(&self) -> CrossSpectrumPhat {
        CrossSpectrumPhat {
            sample_rate: self.sample_rate,
            n_fft: self.n_fft,
            bins: self.bins.iter().map(|b| b.conj()).collect(),
        }
    }

    /// Accumulates the correlation sum from bin `b_lo` upwards and records
    /// the running value after each (ascending) last bin in `b_his`.
    fn partial_sums(&self, b_lo: usize, b_his: &[usize], tau: f64, out: &mut [f64]) {
        debug_assert_eq!(b_his.len(), out.len());
        let spacing = self.bin_spacing();
        let last = self.bins.len() - 1;
        let scale = spacing / PI;
        let rot = Complex64::from_polar(1.0, spacing * tau);
        let mut acc = 0.0;
        let mut phasor = Complex64::new(1.0, 0.0);
        let mut b = b_lo;
        for (slot, &b_hi) in out.iter_mut().zip(b_his) {
            while b <= b_hi {
                if (b - b_lo).is_multiple_of(PHASOR_REANCHOR) {
                    phasor = Complex64::from_polar(1.0, self.bin_omega(b) * tau);
                }
                let x = self.bins[b];
                let term = x.re * phasor.re - x.im * phasor.im;
                // DC and Nyquist have no negative-frequency mirror
                acc += if b == 0 || b == last { 0.5 * term } else { term };
                phasor *= rot;
                b += 1;
            }
            *slot = scale * acc;
        }
    }
}

/// PHAT-whitened `X_k * conj(X_l)` over one zero-padded DFT of the whole
/// recording.
///
/// `n_fft` is the next power of two at or above twice the longer input, so
/// the implied correlation is linear rather than circular. Bins whose
/// cross-power falls below `10 * epsilon_rel * max|X_k X_l*|` are zeroed;
/// all others are normalized to unit modulus.
pub fn cross_power_spectrum_phat(s_k: &Signal, s_l: &Signal, epsilon_rel: f64) -> Result<CrossSpectrumPhat> {
    if s_k.sample_rate() != s_l.sample_rate() {
        return Err(Error::SampleRateMismatch(s_k.sample_rate(), s_l.sample_rate()));
    }
    if !(epsilon_rel >= 0.0) {
        return Err(invalid(format!("epsilon_rel must be non-negative, got {epsilon_rel}")));
    }
    let n_fft = (2 * s_k.len().max(s_l.len())).next_power_of_two().max(2);
    let xk = dsp::rfft(s_k.samples(), n_fft);
    let xl = dsp::rfft(s_l.samples(), n_fft);
    let mut bins: Vec<Complex64> = xk.iter().zip(&xl).map(|(a, b)| a * b.conj()).collect();
    let peak = bins.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let threshold = 10.0 * epsilon_rel * peak;
    let last = bins.len() - 1;
    for (b, v) in bins.iter_mut().enumerate() {
        let m = v.norm();
        if m == 0.0 || m < threshold {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v /= m;
        }
        if b == 0 || b == last {
            v.im = 0.0;
        }
    }
    CrossSpectrumPhat::from_bins(s_k.sample_rate(), n_fft, bins)
}

/// Spectrum for the pair `(k, l)` oriented so that its correlation peaks at
/// the delay of `s_l` relative to `s_k`, i.e. at the pair TDOA of the source.
pub fn pair_spectrum(s_k: &Signal, s_l: &Signal) -> Result<CrossSpectrumPhat> {
    cross_power_spectrum_phat(s_l, s_k, DEFAULT_EPSILON_REL)
}

/// Correlation at lag `tau` (seconds) restricted to bins in `[omega_lo, omega_hi]`.
pub fn gcc_eval(spec: &CrossSpectrumPhat, omega_lo: f64, omega_hi: f64, tau: f64) -> Result<f64> {
    let mut out = [0.0];
    gcc_eval_cutoffs(spec, omega_lo, &[omega_hi], tau, &mut out)?;
    Ok(out[0])
}

/// Same as [`gcc_eval`] for several ascending upper limits sharing one lower
/// limit, in a single pass over the bins. Each output equals what
/// [`gcc_eval`] returns for that upper limit, bit for bit.
pub fn gcc_eval_cutoffs(
    spec: &CrossSpectrumPhat,
    omega_lo: f64,
    omega_his: &[f64],
    tau: f64,
    out: &mut [f64],
) -> Result<()> {
    if omega_his.len() != out.len() {
        return Err(invalid("one output slot per cutoff required"));
    }
    if !tau.is_finite() {
        return Err(invalid(format!("lag must be finite, got {tau}")));
    }
    let mut b_lo = usize::MAX;
    let mut b_his = Vec::with_capacity(omega_his.len());
    let mut prev = f64::NEG_INFINITY;
    for &hi in omega_his {
        if !(omega_lo < hi) || hi > spec.nyquist() * (1.0 + 1e-12) || hi < prev {
            return Err(invalid(format!(
                "need omega_lo < omega_hi <= Nyquist with ascending cutoffs, got [{omega_lo}, {hi}]"
            )));
        }
        prev = hi;
        let (lo_bin, hi_bin) = spec
            .bin_range(omega_lo, hi)
            .ok_or(Error::EmptyBand { lo: omega_lo, hi })?;
        b_lo = lo_bin;
        b_his.push(hi_bin);
    }
    if b_his.is_empty() {
        return Ok(());
    }
    spec.partial_sums(b_lo, &b_his, tau, out);
    Ok(())
}

/// Band-limited correlation rescaled by `(omega_max - omega_min) / (omega_hat_max - omega_min)`.
pub fn gcc_eval_normalized(spec: &CrossSpectrumPhat, band: Band, omega_hat_max: f64, tau: f64) -> Result<f64> {
    if !(band.omega_min < omega_hat_max && omega_hat_max <= band.omega_max) {
        return Err(invalid(format!(
            "omega_hat_max {omega_hat_max} outside ({}, {}]",
            band.omega_min, band.omega_max
        )));
    }
    let raw = gcc_eval(spec, band.omega_min, omega_hat_max, tau)?;
    Ok(normalization_factor(band, omega_hat_max) * raw)
}

pub(crate) fn normalization_factor(band: Band, omega_hat_max: f64) -> f64 {
    if omega_hat_max == band.omega_max {
        1.0
    } else {
        (band.omega_max - band.omega_min) / (omega_hat_max - band.omega_min)
    }
}

/// Dense scan of the correlation; returns `(tau, value)` for
/// `tau = -max_lag, -max_lag + step, ..., max_lag`.
pub fn gcc_scan(
    spec: &CrossSpectrumPhat,
    omega_lo: f64,
    omega_hi: f64,
    max_lag: f64,
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0 && max_lag >= 0.0) {
        return Err(invalid("scan needs step > 0 and max_lag >= 0"));
    }
    let n = (max_lag / step).floor() as i64;
    (-n..=n)
        .map(|i| {
            let tau = i as f64 * step;
            gcc_eval(spec, omega_lo, omega_hi, tau).map(|v| (tau, v))
        })
        .collect()
}
