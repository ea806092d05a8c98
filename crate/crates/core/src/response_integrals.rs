//! Gaussian-switched double-time transforms of the accelerated Wightman
//! function.
//!
//! With `χ(t) = e^{−t²/T²}` every double integral factorises in the null
//! coordinates `u = t − t'`, `v = t + t'`:
//!
//! ```text
//! G(ω₁, ω₂)  = √(π/2)·T·e^{−T²(ω₁+ω₂)²/8} · F((ω₁−ω₂)/2)
//! F(ν)       = ∫ du e^{−u²/(2T²)} e^{iνu} W_a(u)
//! H^±(ν)     = ∫ du Θ(±u) e^{−u²/(2T²)} e^{iνu} W_a(u)
//! ```
//!
//! so only one-dimensional transforms are ever integrated numerically.

use std::f64::consts::{PI, SQRT_2};

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::quadrature::{integrate, uniform_partition, Estimate, QuadOptions};
use crate::qudit_algebra::{transition_table, DetectorModel};
use crate::wightman::{accel_wightman, regular_half_transform, vacuum_transform, WorldlineParams};
use crate::{Error, Result};

const WINDOW_CUTOFF: f64 = 9.5;
/// Finite-ε kernels are dropped beyond this many acceleration lengths.
const KERNEL_CUTOFF: f64 = 60.0;

/// UV regularisation of the time-ordering step in the half-plane transforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegulatorScheme {
    /// Gaussian nascent delta of width `a₀` for the distributional δ′ term.
    /// Only available at zero relative frequency.
    NascentDelta(f64),
    /// `Θ_{a₀}(u) = (1 + tanh(u/a₀))/2`.
    TanhHeaviside(f64),
}

impl RegulatorScheme {
    pub fn a0(&self) -> f64 {
        match *self {
            RegulatorScheme::NascentDelta(a0) | RegulatorScheme::TanhHeaviside(a0) => a0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegulatorScheme::NascentDelta(_) => "nascent-delta",
            RegulatorScheme::TanhHeaviside(_) => "tanh",
        }
    }
}

/// Whether the kernel's `iε` is taken to zero analytically or kept finite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EpsilonMode {
    /// Closed-form vacuum pieces in the `ε → 0⁺` limit.
    #[default]
    Distributional,
    /// Direct quadrature of `W_a(u − iε)` at the worldline's `ε`.
    Finite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegralParams {
    pub worldline: WorldlineParams,
    pub regulator: RegulatorScheme,
    pub epsilon_mode: EpsilonMode,
    pub quadrature: QuadOptions,
}

impl IntegralParams {
    pub fn new(worldline: WorldlineParams, regulator: RegulatorScheme) -> Result<Self> {
        let a0 = regulator.a0();
        let t = worldline.switching_width;
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::NonPositive { name: "regulator scale a0", value: a0 });
        }
        if a0 >= t {
            return Err(Error::RegulatorScale { a0, switching: t });
        }
        if a0 > t / 20.0 {
            warn!("regulator scale a0 = {a0} is not small against T = {t}");
        }
        Ok(Self { worldline, regulator, epsilon_mode: EpsilonMode::Distributional, quadrature: QuadOptions::default() })
    }

    /// Tanh-regularised step with `a₀ = T/200`.
    pub fn with_default_regulator(worldline: WorldlineParams) -> Self {
        Self::new(worldline, RegulatorScheme::TanhHeaviside(worldline.switching_width / 200.0))
            .expect("T/200 is always a valid regulator scale")
    }

    pub fn finite_epsilon(mut self) -> Self {
        self.epsilon_mode = EpsilonMode::Finite;
        self
    }

    fn window(&self) -> f64 {
        self.worldline.switching_width
    }
}

/// A transform value, its quadrature error bound and (when the vacuum piece
/// is known in closed form) the vacuum contribution on its own.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub value: Complex64,
    pub error: f64,
    pub vacuum: Option<Complex64>,
}

impl Transform {
    fn scale(self, factor: f64) -> Self {
        Self { value: self.value * factor, error: self.error * factor.abs(), vacuum: self.vacuum.map(|v| v * factor) }
    }
}

/// `√(π/2)·T·e^{−T²(ω₁+ω₂)²/8}`
fn centre_of_mass_factor(omega1: f64, omega2: f64, t: f64) -> f64 {
    let s = omega1 + omega2;
    (PI / 2.0).sqrt() * t * (-t * t * s * s / 8.0).exp()
}

/// `F(ν)`.
pub fn relative_full_transform(nu: f64, p: &IntegralParams) -> Result<Transform> {
    let t = p.window();
    match p.epsilon_mode {
        EpsilonMode::Distributional => {
            let reg = regular_half_transform(nu, p.worldline.accel, t, &p.quadrature)?;
            let vac = Complex64::new(vacuum_transform(nu, t), 0.0);
            Ok(Transform { value: vac + 2.0 * reg.value.re, error: 2.0 * reg.error, vacuum: Some(vac) })
        }
        EpsilonMode::Finite => {
            let est = finite_transform(nu, p, |_| 1.0)?;
            Ok(Transform { value: est.value, error: est.error, vacuum: None })
        }
    }
}

/// `H^±(ν)`.
pub fn relative_half_transform(nu: f64, sign: Sign, p: &IntegralParams) -> Result<Transform> {
    let t = p.window();
    let s = sign.value();
    match (p.epsilon_mode, p.regulator) {
        (EpsilonMode::Distributional, RegulatorScheme::TanhHeaviside(a0)) => {
            let reg = regular_half_transform(nu, p.worldline.accel, t, &p.quadrature)?;
            let tanh_part = tanh_sine_transform(nu, a0, t, &p.quadrature)?;
            let odd = tanh_part.value.re / (4.0 * PI * PI) + 1.0 / (8.0 * PI * a0);
            let vac = Complex64::new(0.5 * vacuum_transform(nu, t), -s * odd);
            let regular = Complex64::new(reg.value.re, s * reg.value.im);
            Ok(Transform {
                value: vac + regular,
                error: reg.error + tanh_part.error / (4.0 * PI * PI),
                vacuum: Some(vac),
            })
        }
        (EpsilonMode::Distributional, RegulatorScheme::NascentDelta(a0)) => {
            if nu != 0.0 {
                return Err(Error::UnsupportedRegulator { scheme: "nascent-delta", frequency: nu });
            }
            let reg = regular_half_transform(0.0, p.worldline.accel, t, &p.quadrature)?;
            let odd = t * t / (4.0 * PI * (2.0 * PI).sqrt() * a0 * (a0 * a0 + t * t));
            let vac = Complex64::new(0.5 * vacuum_transform(0.0, t), -s * odd);
            Ok(Transform { value: vac + reg.value.re, error: reg.error, vacuum: Some(vac) })
        }
        (EpsilonMode::Finite, RegulatorScheme::TanhHeaviside(a0)) => {
            let est = finite_transform(nu, p, |u| 0.5 * (1.0 + (s * u / a0).tanh()))?;
            Ok(Transform { value: est.value, error: est.error, vacuum: None })
        }
        (EpsilonMode::Finite, RegulatorScheme::NascentDelta(_)) => {
            Err(Error::UnsupportedRegulator { scheme: "nascent-delta", frequency: nu })
        }
    }
}

/// `∫_0^∞ du tanh(u/a₀) e^{−u²/(2T²)} sin(νu)/u²`
fn tanh_sine_transform(nu: f64, a0: f64, t: f64, opts: &QuadOptions) -> Result<Estimate> {
    if nu == 0.0 {
        return Ok(Estimate::new(Complex64::new(0.0, 0.0), 0.0));
    }
    let u_max = WINDOW_CUTOFF * t;
    let step = (t / 2.0).min(PI / nu.abs());
    let mut points = uniform_partition(0.0, u_max, step);
    let mut grade = a0 / 4.0;
    while grade < u_max {
        points.push(grade);
        grade *= 2.0;
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let inv = 1.0 / (2.0 * t * t);
    integrate(
        |u| {
            let v = (u / a0).tanh() / u * (nu * u).sin() / u * (-u * u * inv).exp();
            Complex64::new(v, 0.0)
        },
        &points,
        opts,
    )
}

/// `∫ du step(u) e^{−u²/(2T²)} e^{iνu} W_a(u − iε)` by direct quadrature.
fn finite_transform<S: Fn(f64) -> f64>(nu: f64, p: &IntegralParams, step: S) -> Result<Estimate> {
    let t = p.window();
    let eps = p.worldline.i_epsilon;
    let a = p.worldline.accel;
    let u_max = (WINDOW_CUTOFF * t).min(KERNEL_CUTOFF / a);
    let mut width = (t / 2.0).min(2.0 / a);
    if nu != 0.0 {
        width = width.min(PI / nu.abs());
    }
    let mut positive = uniform_partition(0.0, u_max, width);
    for base in [eps, p.regulator.a0()] {
        let mut x = base;
        while x < u_max {
            positive.push(x);
            x *= 2.0;
        }
    }
    positive.sort_by(f64::total_cmp);
    positive.dedup();
    let mut points: Vec<f64> = positive.iter().rev().filter(|&&x| x > 0.0).map(|x| -x).collect();
    points.extend(positive);
    let inv = 1.0 / (2.0 * t * t);
    integrate(
        |u| Complex64::from_polar((-u * u * inv).exp() * step(u), nu * u) * accel_wightman(u, &p.worldline),
        &points,
        &p.quadrature,
    )
}

/// `G(ω₁, ω₂) = ∫∫ dt dt' χ(t)χ(t') e^{iω₁t + iω₂t'} W_a(t − t')`.
pub fn full_plane_transform(omega1: f64, omega2: f64, p: &IntegralParams) -> Result<Transform> {
    let rel = relative_full_transform(0.5 * (omega1 - omega2), p)?;
    Ok(rel.scale(centre_of_mass_factor(omega1, omega2, p.window())))
}

/// `G^Θ(ω₁, ω₂, ±)`: as [`full_plane_transform`] with `Θ(±(t − t'))` inserted.
pub fn half_plane_transform(omega1: f64, omega2: f64, sign: Sign, p: &IntegralParams) -> Result<Transform> {
    let rel = relative_half_transform(0.5 * (omega1 - omega2), sign, p)?;
    Ok(rel.scale(centre_of_mass_factor(omega1, omega2, p.window())))
}

/// `𝓘 = G(Ω, Ω)`.
pub fn integral_i(p: &IntegralParams, omega: f64) -> Result<Transform> {
    full_plane_transform(omega, omega, p)
}

/// `𝓛± = G(±Ω, ∓Ω)`; `𝓛₊` is the de-excitation and `𝓛₋` the excitation channel.
pub fn integral_l(p: &IntegralParams, sign: Sign, omega: f64) -> Result<Transform> {
    let s = sign.value();
    full_plane_transform(s * omega, -s * omega, p)
}

/// `𝓠 = G^Θ(Ω, Ω, +)`.
pub fn integral_q(p: &IntegralParams, omega: f64) -> Result<Transform> {
    half_plane_transform(omega, omega, Sign::Plus, p)
}

/// `𝓡± = G^Θ(±Ω, ∓Ω, +)`.
pub fn integral_r(p: &IntegralParams, sign: Sign, omega: f64) -> Result<Transform> {
    let s = sign.value();
    half_plane_transform(s * omega, -s * omega, Sign::Plus, p)
}

/// `𝓤_q = G(qΩ, 0)`.
pub fn integral_u(p: &IntegralParams, q: f64, omega: f64) -> Result<Transform> {
    full_plane_transform(q * omega, 0.0, p)
}

/// `𝓥^±_q = G^Θ(qΩ, 0, ±)`.
pub fn integral_v(p: &IntegralParams, q: f64, sign: Sign, omega: f64) -> Result<Transform> {
    half_plane_transform(q * omega, 0.0, sign, p)
}

/// `𝓛_q = G(qΩ, −qΩ)`.
pub fn integral_lq(p: &IntegralParams, q: f64, omega: f64) -> Result<Transform> {
    full_plane_transform(q * omega, -q * omega, p)
}

/// `𝓡_q = G^Θ(qΩ, −qΩ, +)`.
pub fn integral_rq(p: &IntegralParams, q: f64, omega: f64) -> Result<Transform> {
    half_plane_transform(q * omega, -q * omega, Sign::Plus, p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableKey {
    pub omega1: f64,
    pub omega2: f64,
    pub halfline: Option<Sign>,
}

impl TableKey {
    pub fn full(omega1: f64, omega2: f64) -> Self {
        Self { omega1, omega2, halfline: None }
    }

    pub fn half(omega1: f64, omega2: f64, sign: Sign) -> Self {
        Self { omega1, omega2, halfline: Some(sign) }
    }

    /// The key whose value is the complex conjugate of this one.
    pub fn conjugate_partner(&self) -> Self {
        Self { omega1: -self.omega2, omega2: -self.omega1, halfline: self.halfline.map(Sign::flipped) }
    }

    pub fn halfline_label(&self) -> &'static str {
        self.halfline.map_or("none", Sign::symbol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableEntry {
    pub key: TableKey,
    pub value: Complex64,
    pub error: f64,
}

/// Every full- and half-plane transform reachable from a set of Bohr
/// frequencies, computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseIntegralTable {
    gap: f64,
    params: IntegralParams,
    entries: Vec<TableEntry>,
}

impl ResponseIntegralTable {
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn params(&self) -> &IntegralParams {
        &self.params
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    fn matches(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * self.gap
    }

    pub fn entry(&self, key: TableKey) -> Result<&TableEntry> {
        self.entries
            .iter()
            .find(|e| {
                e.key.halfline == key.halfline && self.matches(e.key.omega1, key.omega1) && self.matches(e.key.omega2, key.omega2)
            })
            .ok_or_else(|| Error::MissingKey {
                omega1: key.omega1,
                omega2: key.omega2,
                halfline: key.halfline_label().to_string(),
            })
    }

    pub fn get(&self, key: TableKey) -> Result<Complex64> {
        self.entry(key).map(|e| e.value)
    }

    /// `G(ω₁, ω₂)`.
    pub fn full(&self, omega1: f64, omega2: f64) -> Result<Complex64> {
        self.get(TableKey::full(omega1, omega2))
    }

    /// `G^Θ(ω₁, ω₂, ±)`.
    pub fn half(&self, omega1: f64, omega2: f64, sign: Sign) -> Result<Complex64> {
        self.get(TableKey::half(omega1, omega2, sign))
    }

    pub fn worst_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.error))
    }

    /// Largest `|value(k) − conj(value(partner(k)))|` minus the combined
    /// error estimates; non-positive when the closure holds.
    pub fn conjugation_excess(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for e in &self.entries {
            if let Ok(partner) = self.entry(e.key.conjugate_partner()) {
                let gap = (e.value - partner.value.conj()).norm();
                worst = worst.max(gap - e.error - partner.error - 1e-14 * e.value.norm());
            }
        }
        worst
    }

    /// Largest `|G^Θ(+) + G^Θ(−) − G|` minus the combined error estimates.
    pub fn completeness_excess(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for e in self.entries.iter().filter(|e| e.key.halfline.is_none()) {
            let (w1, w2) = (e.key.omega1, e.key.omega2);
            if let (Ok(p), Ok(m)) =
                (self.entry(TableKey::half(w1, w2, Sign::Plus)), self.entry(TableKey::half(w1, w2, Sign::Minus)))
            {
                let gap = (p.value + m.value - e.value).norm();
                worst = worst.max(gap - p.error - m.error - e.error - 1e-14 * e.value.norm());
            }
        }
        worst
    }
}

/// Builds the table over the model's Bohr frequencies.
pub fn build_table(model: &DetectorModel, p: &IntegralParams) -> Result<ResponseIntegralTable> {
    build_table_for_frequencies(&transition_table(model).bohr_set(), model.gap(), p)
}

/// Builds the table over all ordered pairs of the given frequencies, with
/// every half-line flag. Half-line keys the regulator cannot evaluate are
/// left out; lookups for them fail with [`Error::MissingKey`].
pub fn build_table_for_frequencies(bohr: &[f64], gap: f64, p: &IntegralParams) -> Result<ResponseIntegralTable> {
    let mut relative: Vec<f64> = Vec::new();
    for &w1 in bohr {
        for &w2 in bohr {
            let nu = 0.5 * (w1 - w2);
            if !relative.contains(&nu) {
                relative.push(nu);
            }
        }
    }
    relative.sort_by(f64::total_cmp);

    type Slot = (Transform, Option<Transform>, Option<Transform>);
    let computed: Vec<Result<Slot>> = relative
        .par_iter()
        .map(|&nu| {
            let full = relative_full_transform(nu, p)?;
            let half = |sign| match relative_half_transform(nu, sign, p) {
                Ok(t) => Ok(Some(t)),
                Err(Error::UnsupportedRegulator { .. }) => Ok(None),
                Err(e) => Err(e),
            };
            Ok((full, half(Sign::Plus)?, half(Sign::Minus)?))
        })
        .collect();
    let mut by_nu = Vec::with_capacity(relative.len());
    for (nu, slot) in relative.iter().zip(computed) {
        by_nu.push((*nu, slot?));
    }

    let t = p.window();
    let mut entries = Vec::new();
    for &w1 in bohr {
        for &w2 in bohr {
            let nu = 0.5 * (w1 - w2);
            let (_, (full, plus, minus)) = by_nu.iter().find(|(n, _)| *n == nu).expect("every relative frequency was computed");
            let factor = centre_of_mass_factor(w1, w2, t);
            let candidates = [(None, Some(*full)), (Some(Sign::Plus), *plus), (Some(Sign::Minus), *minus)];
            for (halfline, transform) in candidates {
                if let Some(tr) = transform {
                    let tr = tr.scale(factor);
                    entries.push(TableEntry { key: TableKey { omega1: w1, omega2: w2, halfline }, value: tr.value, error: tr.error });
                }
            }
        }
    }
    let table = ResponseIntegralTable { gap, params: *p, entries };
    let excess = table.conjugation_excess();
    if excess > 0.0 {
        warn!("response table violates conjugation closure by {excess:.3e}");
    }
    Ok(table)
}

/// Vacuum piece of `𝓛±` in closed form: `(1/4π)(e^{−T²Ω²/2} ± √(π/2)ΩT·erfc(∓ΩT/√2))`.
pub fn l_vacuum_closed_form(sign: Sign, omega: f64, t: f64) -> f64 {
    let s = sign.value();
    let x = omega * t;
    ((-x * x / 2.0).exp() + s * (PI / 2.0).sqrt() * x * crate::special::erfc(-s * x / SQRT_2)) / (4.0 * PI)
}
