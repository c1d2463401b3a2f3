use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use srp_phat::gcc::{gcc_eval, gcc_eval_normalized, pair_spectrum, CrossSpectrumPhat};
use srp_phat::roomsim::fractional_delay;
use srp_phat::{Band, Signal};

fn noise(n: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Signal::new(16000.0, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_spectrum(n_fft: usize, seed: u64) -> CrossSpectrumPhat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins = (0..=n_fft / 2)
        .map(|b| {
            if b == 0 || b == n_fft / 2 {
                Complex64::new(if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, 0.0)
            } else {
                Complex64::from_polar(1.0, rng.gen_range(-PI..PI))
            }
        })
        .collect();
    CrossSpectrumPhat::from_bins(16000.0, n_fft, bins).unwrap()
}

fn scaled(spec: &CrossSpectrumPhat, a: f64) -> CrossSpectrumPhat {
    CrossSpectrumPhat::from_bins(spec.sample_rate(), spec.n_fft(), spec.bins().iter().map(|v| v * a).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn linear_in_bins(seed in 0u64..1000, a in -3.0..3.0f64, tau in -0.01..0.01f64) {
        let s1 = random_spectrum(256, seed);
        let s2 = random_spectrum(256, seed + 7);
        let sum = CrossSpectrumPhat::from_bins(
            16000.0,
            256,
            s1.bins().iter().zip(s2.bins()).map(|(x, y)| x * a + y).collect(),
        )
        .unwrap();
        let (lo, hi) = (0.0, s1.nyquist());
        let lhs = gcc_eval(&sum, lo, hi, tau).unwrap();
        let rhs = a * gcc_eval(&s1, lo, hi, tau).unwrap() + gcc_eval(&s2, lo, hi, tau).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        prop_assert_eq!(gcc_eval(&scaled(&s1, 0.0), lo, hi, tau).unwrap(), 0.0);
    }

    #[test]
    fn bounded_by_bin_count(seed in 0u64..1000, tau in -0.02..0.02f64, f_lo in 0.0..3000.0f64, width in 100.0..5000.0f64) {
        let spec = random_spectrum(512, seed);
        let lo = 2.0 * PI * f_lo;
        let hi = (2.0 * PI * (f_lo + width)).min(spec.nyquist());
        prop_assume!(lo < hi);
        if let Some((b0, b1)) = spec.bin_range(lo, hi) {
            let bound = (b1 - b0 + 1) as f64 * spec.bin_spacing() / PI;
            prop_assert!(gcc_eval(&spec, lo, hi, tau).unwrap().abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn swapping_channels_mirrors_lag(seed in 0u64..200, tau in -0.005..0.005f64) {
        let a = noise(300, seed);
        let b = noise(300, seed + 1000);
        let ab = pair_spectrum(&a, &b).unwrap();
        let ba = pair_spectrum(&b, &a).unwrap();
        let band = (2.0 * PI * 100.0, 2.0 * PI * 6000.0);
        let x = gcc_eval(&ab, band.0, band.1, tau).unwrap();
        let y = gcc_eval(&ba, band.0, band.1, -tau).unwrap();
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    }
}

fn first_zero_after(spec: &CrossSpectrumPhat, lo: f64, hi: f64, tau0: f64, step: f64) -> f64 {
    let mut tau = tau0;
    while gcc_eval(spec, lo, hi, tau).unwrap() > 0.0 {
        tau += step;
    }
    tau - tau0
}

#[test]
fn narrowing_the_band_widens_the_main_lobe() {
    let fs = 16000.0;
    let x = noise(2000, 3);
    let delay = 3.76e-3;
    let a = fractional_delay(&x, 10.0, 2200).unwrap();
    let b = fractional_delay(&x, 10.0 + delay * fs, 2200).unwrap();
    let spec = pair_spectrum(&a, &b).unwrap();
    let lo = 2.0 * PI * 200.0;
    let mut prev = 0.0;
    for f_hi in [4000.0, 3000.0, 2000.0, 1000.0, 600.0] {
        let w = first_zero_after(&spec, lo, 2.0 * PI * f_hi, delay, 1e-6);
        assert!(w > prev, "{f_hi} Hz: width {w} not above {prev}");
        prev = w;
    }
}

#[test]
fn delayed_copy_peaks_at_delay_in_every_band() {
    let fs = 16000.0;
    let x = noise(4000, 5);
    let delay = 3.76e-3;
    let a = fractional_delay(&x, 10.0, 4200).unwrap();
    let b = fractional_delay(&x, 10.0 + delay * fs, 4200).unwrap();
    let spec = pair_spectrum(&a, &b).unwrap();
    for (lo, hi) in [(200.0, 4000.0), (200.0, 1000.0)] {
        let (lo, hi) = (2.0 * PI * lo, 2.0 * PI * hi);
        let best = (-600..=600)
            .map(|i| delay + i as f64 * 1e-6)
            .max_by(|&s, &t| gcc_eval(&spec, lo, hi, s).unwrap().total_cmp(&gcc_eval(&spec, lo, hi, t).unwrap()))
            .unwrap();
        assert!((best - delay).abs() <= 2e-6, "peak {best}");
    }
}

#[test]
fn normalization_restores_full_band_peak_height() {
    // a pure delay: every whitened bin contributes fully at the true lag
    let fs = 16000.0;
    let n_fft = 4096;
    let delay = 1.3e-3;
    let spec = CrossSpectrumPhat::from_bins(
        fs,
        n_fft,
        (0..=n_fft / 2)
            .map(|b| {
                let w = 2.0 * PI * b as f64 * fs / n_fft as f64;
                Complex64::from_polar(1.0, -w * delay)
            })
            .collect(),
    )
    .unwrap();
    let band = Band::from_hz(200.0, 4000.0).unwrap();
    let full = gcc_eval(&spec, band.omega_min, band.omega_max, delay).unwrap();
    let limited = gcc_eval_normalized(&spec, band, 2.0 * PI * 1000.0, delay).unwrap();
    assert!((limited / full - 1.0).abs() < 0.01, "{limited} vs {full}");
}
