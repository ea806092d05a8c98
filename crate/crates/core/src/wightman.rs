//! Pulled-back Wightman functions of a massless scalar field in 3+1
//! dimensions, the vacuum/regular split of the accelerated kernel, and
//! Gaussian-windowed Fourier transforms of that kernel.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;

use crate::quadrature::{integrate, uniform_partition, Estimate, QuadOptions};
use crate::special::gaussian_ramp;
use crate::{Error, Result};

/// Below this value of `|au/2|` the regular part is evaluated from its
/// Taylor series.
pub const SERIES_THRESHOLD: f64 = 0.05;

// (1/s² − csch²s) = Σ c_k s^{2k}
const REGULAR_SERIES: [f64; 8] = [
    1.0 / 3.0,
    -1.0 / 15.0,
    2.0 / 189.0,
    -1.0 / 675.0,
    2.0 / 10395.0,
    -1382.0 / 58046625.0,
    4.0 / 1403325.0,
    -3617.0 / 10854718875.0,
];

/// Gaussian tails are dropped beyond this many switching widths.
const WINDOW_CUTOFF: f64 = 9.5;

/// Uniformly accelerated worldline with a Gaussian switching `e^{−τ²/T²}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldlineParams {
    pub accel: f64,
    pub i_epsilon: f64,
    pub switching_width: f64,
}

impl WorldlineParams {
    pub fn new(accel: f64, i_epsilon: f64, switching_width: f64) -> Result<Self> {
        for (name, value) in [("acceleration", accel), ("i_epsilon", i_epsilon), ("switching width", switching_width)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositive { name, value });
            }
        }
        if i_epsilon >= switching_width / 100.0 {
            warn!("i_epsilon = {i_epsilon} is not small against the switching width {switching_width}");
        }
        Ok(Self { accel, i_epsilon, switching_width })
    }

    /// Uses `ε = 10⁻⁶/a`.
    pub fn with_default_epsilon(accel: f64, switching_width: f64) -> Result<Self> {
        Self::new(accel, 1e-6 / accel, switching_width)
    }

    /// Inverse Unruh temperature `2π/a`.
    pub fn beta(&self) -> f64 {
        2.0 * PI / self.accel
    }
}

/// `1/sinh²(z)`, written in terms of `e^{−2|z|}` away from the origin so
/// that large arguments neither overflow nor lose the phase.
fn inv_sinh_sq(z: Complex64) -> Complex64 {
    let z = if z.re < 0.0 { -z } else { z };
    if z.re > 1.0 {
        let e = (-2.0 * z).exp();
        let d = 1.0 - e;
        4.0 * e / (d * d)
    } else {
        let s = z.sinh();
        1.0 / (s * s)
    }
}

/// `−a²/(16π²) · 1/sinh²(a(u − iε)/2)`.
pub fn accel_wightman(u: f64, params: &WorldlineParams) -> Complex64 {
    let a = params.accel;
    let z = Complex64::new(u, -params.i_epsilon) * (a / 2.0);
    -(a * a / (16.0 * PI * PI)) * inv_sinh_sq(z)
}

/// `−1/(4β²) · 1/sinh²(π(u − iε)/β)`: inertial detector in a thermal bath.
pub fn inertial_thermal_wightman(u: f64, beta: f64, epsilon: f64) -> Result<Complex64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::NonPositive { name: "beta", value: beta });
    }
    let z = Complex64::new(u, -epsilon) * (PI / beta);
    Ok(-inv_sinh_sq(z) / (4.0 * beta * beta))
}

/// Inertial vacuum kernel `−1/(4π²(u − iε)²)`.
pub fn vacuum_wightman(u: f64, epsilon: f64) -> Complex64 {
    let w = Complex64::new(u, -epsilon);
    -1.0 / (4.0 * PI * PI * w * w)
}

/// `1/s² − csch²(s)` for real `s`, even and smooth through the origin.
pub fn reduced_regular(s: f64) -> f64 {
    let s = s.abs();
    if s < SERIES_THRESHOLD {
        series(s * s)
    } else if s < 2.0 {
        // (sinh²s − s²)/(s² sinh²s) with sinh s − s summed directly
        let sh = s.sinh();
        let diff = sinh_minus_identity(s);
        diff * (sh + s) / (s * s * sh * sh)
    } else {
        let sh = s.sinh();
        1.0 / (s * s) - 1.0 / (sh * sh)
    }
}

fn sinh_minus_identity(s: f64) -> f64 {
    let s2 = s * s;
    let mut term = s * s2 / 6.0;
    let mut sum = term;
    let mut k = 3.0;
    while term > 1e-18 * sum {
        term *= s2 / ((k + 1.0) * (k + 2.0));
        sum += term;
        k += 2.0;
    }
    sum
}

fn series(s2: f64) -> f64 {
    REGULAR_SERIES.iter().rev().fold(0.0, |acc, c| acc * s2 + c)
}

fn series_complex(z2: Complex64) -> Complex64 {
    REGULAR_SERIES.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z2 + c)
}

/// Smooth remainder `1/(4π²u²) − a²/(16π²) csch²(au/2)` of the accelerated
/// kernel after removing the vacuum singularity.
pub fn regular_part(u: f64, accel: f64) -> f64 {
    accel * accel / (16.0 * PI * PI) * reduced_regular(accel * u / 2.0)
}

/// The regular part continued to `u − iε`, i.e. exactly
/// `accel_wightman − vacuum_wightman` at the same `ε`.
pub fn regular_part_shifted(u: f64, params: &WorldlineParams) -> Complex64 {
    let a = params.accel;
    let z = Complex64::new(u, -params.i_epsilon) * (a / 2.0);
    let r = if z.norm() < SERIES_THRESHOLD { series_complex(z * z) } else { 1.0 / (z * z) - inv_sinh_sq(z) };
    r * (a * a / (16.0 * PI * PI))
}

/// Evaluators for the split `W_a = W_M + W_reg` along one worldline.
#[derive(Clone, Copy, Debug)]
pub struct KernelSplit {
    pub params: WorldlineParams,
}

impl KernelSplit {
    pub fn new(params: WorldlineParams) -> Self {
        Self { params }
    }

    pub fn full(&self, u: f64) -> Complex64 {
        accel_wightman(u, &self.params)
    }

    pub fn vacuum(&self, u: f64) -> Complex64 {
        vacuum_wightman(u, self.params.i_epsilon)
    }

    /// The `ε → 0` regular part (real).
    pub fn regular(&self, u: f64) -> f64 {
        regular_part(u, self.params.accel)
    }

    /// The regular part at the same `ε` as [`KernelSplit::full`].
    pub fn regular_shifted(&self, u: f64) -> Complex64 {
        regular_part_shifted(u, &self.params)
    }
}

/// `∫ du e^{−u²/(2w²)} e^{iνu} W_M(u)` in the distributional limit `ε → 0⁺`.
pub fn vacuum_transform(nu: f64, window: f64) -> f64 {
    (2.0 * PI).sqrt() / (4.0 * PI * PI * window) * gaussian_ramp(nu * window / std::f64::consts::SQRT_2)
}

/// `∫_0^∞ du e^{−u²/(2w²)} e^{iνu} W_reg(u)`; the real part is half the
/// full-line transform of the (even) regular kernel.
pub fn regular_half_transform(nu: f64, accel: f64, window: f64, opts: &QuadOptions) -> Result<Estimate> {
    // u = 2s/a
    let width = accel * window;
    let k = 2.0 * nu / accel;
    let s_max = WINDOW_CUTOFF * width / 2.0;
    let mut step = 2.0_f64.min(width / 2.0);
    if k != 0.0 {
        step = step.min(PI / k.abs());
    }
    let mut points = vec![0.0];
    if s_max > 1.0 {
        points.extend(uniform_partition(1.0, s_max, step));
    } else {
        points.push(s_max);
    }
    let inv_w2 = 2.0 / (width * width);
    let est = integrate(
        |s| Complex64::from_polar((-s * s * inv_w2).exp() * reduced_regular(s), k * s),
        &points,
        opts,
    )?;
    Ok(est.scale(accel / (8.0 * PI * PI)))
}

/// Full-line windowed transform `F(ν) = ∫ du e^{−u²/(2w²)} e^{iνu} W_a(u)`
/// in the distributional limit.
pub fn windowed_transform(nu: f64, accel: f64, window: f64) -> Result<Estimate> {
    let reg = regular_half_transform(nu, accel, window, &QuadOptions::default())?;
    let vac = vacuum_transform(nu, window);
    Ok(Estimate::new(Complex64::new(vac + 2.0 * reg.value.re, 0.0), 2.0 * reg.error))
}

/// Windowed power spectrum of the accelerated kernel at `±ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KmsRatio {
    /// `W̃(ω) = ∫ du e^{−u²/(2w²)} W_a(u) e^{−iωu}`
    pub forward: Complex64,
    /// `W̃(−ω)`
    pub backward: Complex64,
    /// `|W̃(ω)| / |W̃(−ω)|`, to be compared with `e^{−2πω/a}`
    pub ratio: f64,
    /// Propagated absolute error bound on `ratio`.
    pub error: f64,
}

pub fn kms_fourier_ratio(omega: f64, params: &WorldlineParams, window_width: f64) -> Result<KmsRatio> {
    if omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(window_width > 0.0 && window_width.is_finite()) {
        return Err(Error::NonPositive { name: "window width", value: window_width });
    }
    if params.accel * window_width < 20.0 {
        warn!("window aT = {} is below 20; the power-spectrum ratio is window dominated", params.accel * window_width);
    }
    let fwd = windowed_transform(-omega, params.accel, window_width)?;
    let bwd = windowed_transform(omega, params.accel, window_width)?;
    let ratio = fwd.value.norm() / bwd.value.norm();
    let error = ratio * (fwd.error / fwd.value.norm() + bwd.error / bwd.value.norm());
    Ok(KmsRatio { forward: fwd.value, backward: bwd.value, ratio, error })
}
