//! Cached FFT plans. All transforms here are unnormalized.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place `X[k] = sum_t x[t] exp(-i 2 pi k t / n)`.
pub(crate) fn forward(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place `x[t] = sum_k X[k] exp(+i 2 pi k t / n)`.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}
