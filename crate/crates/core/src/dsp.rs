//! Thin real-FFT helpers over rustfft.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Spectrum of `x` zero-padded to `n`, bins `0..=n/2`.
pub(crate) fn rfft(x: &[f64], n: usize) -> Vec<Complex64> {
    debug_assert!(x.len() <= n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

/// Real signal of length `n` from its half spectrum (`n/2 + 1` bins), scaled
/// so that `irfft(rfft(x, n), n) == x`.
pub(crate) fn irfft(half: &[Complex64], n: usize) -> Vec<f64> {
    debug_assert_eq!(half.len(), n / 2 + 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..half.len()].copy_from_slice(half);
    for b in 1..n.div_ceil(2) {
        buf[n - b] = half[b].conj();
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v.re * scale).collect()
}

/// Linear convolution through the frequency domain.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = rfft(a, n);
    let fb = rfft(b, n);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut y = irfft(&prod, n);
    y.truncate(out_len);
    y
}
