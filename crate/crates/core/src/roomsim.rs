//! Microphone signal synthesis: free-field fractional delays and
//! image-method room impulse responses, plus Schroeder RT60 measurement.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{invalid, Error, Result};
use crate::gcc::Signal;
use crate::geometry::{ArrayGeometry, Point3, SoundSpeed};
use crate::srpmap::Bounds;

/// Half-width, in samples, of the windowed sinc used to place image taps.
pub const SINC_HALF_WIDTH: usize = 32;

/// Shoebox room with corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    /// Target reverberation time in seconds; 0 means anechoic.
    #[serde(default)]
    pub rt60: f64,
    #[serde(default)]
    pub c: SoundSpeed,
}

impl RoomSpec {
    pub fn new(dimensions: [f64; 3], rt60: f64, c: SoundSpeed) -> Result<Self> {
        let room = Self { dimensions, rt60, c };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(invalid(format!("room dimensions must be positive, got {:?}", self.dimensions)));
        }
        if !(self.rt60.is_finite() && self.rt60 >= 0.0) {
            return Err(invalid(format!("rt60 must be non-negative, got {}", self.rt60)));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            min: Point3::ORIGIN,
            max: self.dimensions.into(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [a, b, c] = self.dimensions;
        2.0 * (a * b + a * c + b * c)
    }

    pub fn is_anechoic(&self) -> bool {
        self.rt60 == 0.0
    }

    fn strictly_contains(&self, p: Point3) -> bool {
        let [a, b, c] = self.dimensions;
        p.x > 0.0 && p.x < a && p.y > 0.0 && p.y < b && p.z > 0.0 && p.z < c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub sample_rate: f64,
    pub taps: Vec<f64>,
}

impl Rir {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|v| v * v).sum()
    }
}

/// Delays `src` by `|source - mic| / c` with an exact frequency-domain phase
/// shift. Unit gain; the output has `out_len` samples.
pub fn freefield_propagate(src: &Signal, source: Point3, mic: Point3, c: SoundSpeed, out_len: usize) -> Result<Signal> {
    let delay = source.distance(mic) / c.get() * src.sample_rate();
    fractional_delay(src, delay, out_len)
}

/// Delays `src` by `delay` samples (any non-negative real) via the DFT shift
/// theorem on a zero-padded buffer.
pub fn fractional_delay(src: &Signal, delay: f64, out_len: usize) -> Result<Signal> {
    if out_len < src.len() {
        return Err(invalid(format!("out_len {out_len} shorter than input {}", src.len())));
    }
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(invalid(format!("delay must be non-negative, got {delay}")));
    }
    let span = out_len.max(src.len() + delay.ceil() as usize);
    let n = (2 * span).next_power_of_two();
    let mut spec = dsp::rfft(src.samples(), n);
    let last = spec.len() - 1;
    for (b, v) in spec.iter_mut().enumerate() {
        let phase = -2.0 * PI * b as f64 * delay / n as f64;
        if b == last {
            // the Nyquist bin must stay real
            *v *= phase.cos();
        } else {
            *v *= Complex64::from_polar(1.0, phase);
        }
    }
    let mut y = dsp::irfft(&spec, n);
    y.truncate(out_len);
    Signal::new(src.sample_rate(), y)
}

/// Uniform wall reflection coefficient from Sabine's formula.
pub fn rt60_to_reflection(room: &RoomSpec) -> Result<f64> {
    room.validate()?;
    if room.rt60 == 0.0 {
        return Err(invalid("rt60 must be positive to derive a reflection coefficient"));
    }
    let alpha = 0.161 * room.volume() / (room.surface() * room.rt60);
    if alpha >= 1.0 {
        return Err(Error::AbsorptionOutOfRange(alpha));
    }
    Ok((1.0 - alpha).max(0.0).sqrt())
}

/// Per-axis image index bound: `ceil(c * rt60 / min_dimension) + 1`.
pub fn default_max_order(room: &RoomSpec) -> usize {
    let min_dim = room.dimensions.iter().copied().fold(f64::INFINITY, f64::min);
    (room.c.get() * room.rt60 / min_dim).ceil() as usize + 1
}

/// Image-method RIR with the reflection coefficient implied by `room.rt60`
/// (direct path only when anechoic).
///
/// `max_order` bounds the image lattice index on each axis. The response is
/// `ceil(rt60 * fs)` samples past the direct-path delay, plus the sinc tail.
/// Reverberant responses go through the 100 Hz high-pass of Allen and
/// Berkley, which removes the DC build-up of the all-positive image sum.
pub fn image_method_rir(room: &RoomSpec, source: Point3, mic: Point3, fs: f64, max_order: usize) -> Result<Rir> {
    if room.is_anechoic() {
        image_method_rir_with(room, 0.0, source, mic, fs, max_order, 0.0, false)
    } else {
        let beta = rt60_to_reflection(room)?;
        image_method_rir_with(room, beta, source, mic, fs, max_order, room.rt60, true)
    }
}

/// Image-method RIR with an explicit uniform reflection coefficient and a
/// response duration of `duration` seconds past the direct path.
#[allow(clippy::too_many_arguments)]
pub fn image_method_rir_with(
    room: &RoomSpec,
    beta: f64,
    source: Point3,
    mic: Point3,
    fs: f64,
    max_order: usize,
    duration: f64,
    high_pass: bool,
) -> Result<Rir> {
    room.validate()?;
    for p in [source, mic] {
        if !room.strictly_contains(p) {
            return Err(Error::PositionOutsideRoom(p.x, p.y, p.z));
        }
    }
    if source.distance(mic) <= 1e-9 {
        return Err(invalid("source and microphone coincide"));
    }
    if !(fs > 0.0) || !(0.0..=1.0).contains(&beta) || !(duration >= 0.0) {
        return Err(invalid("need fs > 0, beta in [0, 1] and duration >= 0"));
    }
    let c = room.c.get();
    let direct = source.distance(mic) / c * fs;
    let len = direct.ceil() as usize + (duration * fs).ceil() as usize + SINC_HALF_WIDTH + 1;
    let max_delay = (len - SINC_HALF_WIDTH - 1) as f64;
    let max_dist = max_delay / fs * c;

    let dims = room.dimensions;
    let s = [source.x, source.y, source.z];
    let m = [mic.x, mic.y, mic.z];
    let order = max_order as i64;
    // per axis: (offset from mic, wall hits) for every lattice index and parity
    let axis_images = |a: usize| -> Vec<(f64, i32)> {
        let mut v = Vec::with_capacity(2 * (2 * max_order + 1));
        for n in -order..=order {
            for q in 0..2i64 {
                let pos = (1 - 2 * q) as f64 * s[a] + 2.0 * n as f64 * dims[a];
                let hits = ((n - q).abs() + n.abs()) as i32;
                v.push((pos - m[a], hits));
            }
        }
        v
    };
    let (xs, ys, zs) = (axis_images(0), axis_images(1), axis_images(2));
    let max_d2 = max_dist * max_dist;

    let mut taps = vec![0.0; len];
    for &(dx, hx) in &xs {
        if dx * dx > max_d2 {
            continue;
        }
        for &(dy, hy) in &ys {
            let dxy = dx * dx + dy * dy;
            if dxy > max_d2 {
                continue;
            }
            for &(dz, hz) in &zs {
                let d2 = dxy + dz * dz;
                if d2 > max_d2 {
                    continue;
                }
                let hits = hx + hy + hz;
                let gain = if hits == 0 { 1.0 } else { beta.powi(hits) };
                if gain == 0.0 {
                    continue;
                }
                let d = d2.sqrt();
                add_sinc_tap(&mut taps, d / c * fs, gain / (4.0 * PI * d));
            }
        }
    }
    if high_pass {
        allen_berkley_high_pass(&mut taps, fs);
    }
    Ok(Rir { sample_rate: fs, taps })
}

/// Two-pole, two-zero high-pass at 100 Hz, applied in place.
fn allen_berkley_high_pass(x: &mut [f64], fs: f64) {
    let w = 2.0 * PI * 100.0 / fs;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let mut y = [0.0; 3];
    for v in x.iter_mut() {
        y[2] = y[1];
        y[1] = y[0];
        y[0] = b1 * y[1] + b2 * y[2] + *v;
        *v = y[0] + a1 * y[1] + r1 * y[2];
    }
}

/// Adds `amp * hann(t - i) * sinc(t - i)` around fractional position `t`.
fn add_sinc_tap(taps: &mut [f64], t: f64, amp: f64) {
    let hw = SINC_HALF_WIDTH as f64;
    let start = (t - hw).ceil().max(0.0) as usize;
    let end = ((t + hw).floor() as usize).min(taps.len() - 1);
    for (i, tap) in taps.iter_mut().enumerate().take(end + 1).skip(start) {
        let x = i as f64 - t;
        if x.abs() >= hw {
            continue;
        }
        let window = 0.5 * (1.0 + (PI * x / hw).cos());
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        *tap += amp * window * sinc;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    /// Apply `1/(4 pi d)` spreading to anechoic propagation.
    pub attenuate: bool,
    /// Image lattice bound; [`default_max_order`] when `None`.
    pub max_order: Option<usize>,
}

/// One signal per microphone, all of equal length.
pub fn simulate_event(
    room: &RoomSpec,
    source: Point3,
    array: &ArrayGeometry,
    src_signal: &Signal,
    options: SimulationOptions,
) -> Result<Vec<Signal>> {
    room.validate()?;
    let fs = src_signal.sample_rate();
    let c = room.c;
    let mut outputs: Vec<Vec<f64>> = if room.is_anechoic() {
        let max_delay = array
            .mics()
            .iter()
            .map(|m| source.distance(*m) / c.get() * fs)
            .fold(0.0, f64::max);
        let out_len = src_signal.len() + max_delay.ceil() as usize + 1;
        array
            .mics()
            .par_iter()
            .map(|&mic| {
                let y = freefield_propagate(src_signal, source, mic, c, out_len)?;
                let gain = if options.attenuate {
                    1.0 / (4.0 * PI * source.distance(mic).max(1e-9))
                } else {
                    1.0
                };
                Ok(y.into_samples().into_iter().map(|v| v * gain).collect())
            })
            .collect::<Result<_>>()?
    } else {
        let order = options.max_order.unwrap_or_else(|| default_max_order(room));
        array
            .mics()
            .par_iter()
            .map(|&mic| {
                let rir = image_method_rir(room, source, mic, fs, order)?;
                Ok(dsp::convolve(src_signal.samples(), &rir.taps))
            })
            .collect::<Result<_>>()?
    };
    let len = outputs.iter().map(Vec::len).max().unwrap_or(0);
    for o in &mut outputs {
        o.resize(len, 0.0);
    }
    outputs.into_iter().map(|o| Signal::new(fs, o)).collect()
}

/// Reverberation time from the Schroeder energy decay curve: a least-squares
/// line through the -5 to -35 dB span, extrapolated to 60 dB.
pub fn schroeder_rt60(rir: &Rir) -> Result<f64> {
    let total: f64 = rir.taps.iter().map(|v| v * v).sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientDecay);
    }
    let mut edc = vec![0.0; rir.taps.len()];
    let mut acc = 0.0;
    for (i, v) in rir.taps.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    let db = |e: f64| 10.0 * (e / total).log10();
    let start = edc.iter().position(|&e| db(e) <= -5.0).ok_or(Error::InsufficientDecay)?;
    let end = edc.iter().position(|&e| db(e) < -35.0).ok_or(Error::InsufficientDecay)?;
    if end < start + 2 {
        return Err(Error::InsufficientDecay);
    }
    let n = (end - start) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &e) in edc.iter().enumerate().take(end).skip(start) {
        let t = i as f64 / rir.sample_rate;
        let y = db(e);
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if !(slope < 0.0) {
        return Err(Error::InsufficientDecay);
    }
    Ok(-60.0 / slope)
}
