//! Test-only reference computations shared by the integration targets.

#![allow(dead_code)]

use num_complex::Complex64;
use qudit_unruh::wightman::{accel_wightman, WorldlineParams};
use rustfft::FftPlanner;

/// Double sum `h² Σ_{j,l} x_j y_l K(t_j − t_l)` on the lattice `t_j = jh`,
/// `|t| ≤ 6T`, with `x = χ e^{iω₁t}`, `y = χ e^{iω₂t}`, evaluated for the full
/// kernel and for the kernel times a smoothed step `Θ_{a₀}(t − t')`.
/// The inner sum over `l` is a cross-correlation and goes through an FFT;
/// no factorisation of the Gaussian switching is used.
pub struct BruteForce {
    h: f64,
    half_len: usize,
    fft_len: usize,
    kernel: Vec<Complex64>,
    kernel_step: Vec<Complex64>,
    t: f64,
}

impl BruteForce {
    pub fn new(params: &WorldlineParams, a0: f64) -> Self {
        let t = params.switching_width;
        let h = params.i_epsilon / 5.0;
        let half_len = (6.0 * t / h).round() as usize;
        let n = 2 * half_len + 1;
        let fft_len = (2 * n).next_power_of_two();
        // lag k occupies slot k mod fft_len
        let mut kernel = vec![Complex64::new(0.0, 0.0); fft_len];
        let mut kernel_step = vec![Complex64::new(0.0, 0.0); fft_len];
        for lag in -(2 * half_len as i64)..=(2 * half_len as i64) {
            let u = lag as f64 * h;
            let w = accel_wightman(u, params);
            let slot = lag.rem_euclid(fft_len as i64) as usize;
            kernel[slot] = w;
            kernel_step[slot] = w * 0.5 * (1.0 + (u / a0).tanh());
        }
        Self { h, half_len, fft_len, kernel, kernel_step, t }
    }

    /// `(G(ω₁, ω₂), G^Θ(ω₁, ω₂, +))`
    pub fn pair(&self, omega1: f64, omega2: f64) -> (Complex64, Complex64) {
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(self.fft_len);
        let inv = planner.plan_fft_inverse(self.fft_len);
        let n = 2 * self.half_len + 1;
        let signal = |omega: f64| {
            let mut v = vec![Complex64::new(0.0, 0.0); self.fft_len];
            for (j, slot) in v.iter_mut().enumerate().take(n) {
                let t = (j as f64 - self.half_len as f64) * self.h;
                *slot = Complex64::from_polar((-(t / self.t).powi(2)).exp(), omega * t);
            }
            v
        };
        let mut x = signal(omega1);
        // correlate x against conj(ỹ) with ỹ = conj(y)
        let mut y: Vec<Complex64> = signal(omega2).into_iter().map(|z| z.conj()).collect();
        fwd.process(&mut x);
        fwd.process(&mut y);
        let mut c: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a * b.conj()).collect();
        inv.process(&mut c);
        let norm = self.h * self.h / self.fft_len as f64;
        let mut full = Complex64::new(0.0, 0.0);
        let mut step = Complex64::new(0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            full += self.kernel[k] * ck;
            step += self.kernel_step[k] * ck;
        }
        (full * norm, step * norm)
    }
}
