//! Transition probabilities, excitation-to-deexcitation ratios (EDRs),
//! trace distance to the Unruh-temperature Gibbs state, coherence norms and
//! secular-growth fits.

use log::warn;

use crate::perturbation::correction_from_table;
use crate::qudit_algebra::{gibbs_state, hermitian_eigenvalues, DensityMatrix, DetectorModel};
use crate::response_integrals::{build_table, integral_l, IntegralParams, ResponseIntegralTable, Sign};
use crate::wightman::WorldlineParams;
use crate::{CMatrix, Error, Result};

/// Both probabilities of a pair below this fraction of the largest table
/// entry (times λ²) make the pair indeterminate at this order.
pub const INDETERMINATE_FRACTION: f64 = 1e-3;

fn check_level(model: &DetectorModel, index: usize) -> Result<()> {
    if index >= model.dim() {
        return Err(Error::LevelOutOfRange { index, dim: model.dim() });
    }
    Ok(())
}

/// Probability of ending in `|j⟩` after preparing `|i⟩⟨i|`, at order λ².
pub fn transition_probability_from_table(
    model: &DetectorModel,
    table: &ResponseIntegralTable,
    i: usize,
    j: usize,
    coupling: f64,
) -> Result<f64> {
    check_level(model, i)?;
    check_level(model, j)?;
    let initial = DensityMatrix::basis(model.dim(), i)?;
    let report = correction_from_table(model, &initial, table, coupling)?;
    Ok(report.correction[(j, j)].re)
}

pub fn transition_probability(model: &DetectorModel, i: usize, j: usize, p: &IntegralParams, coupling: f64) -> Result<f64> {
    let table = build_table(model, p)?;
    transition_probability_from_table(model, &table, i, j, coupling)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdrRatio {
    Value(f64),
    /// Both directions vanish at order λ².
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdrVerdict {
    pub from_level: usize,
    pub to_level: usize,
    /// `P(from → to)`
    pub forward: f64,
    /// `P(to → from)`
    pub backward: f64,
    pub ratio: EdrRatio,
    /// `e^{−β(E_to − E_from)}` with `β = 2π/a`
    pub target: f64,
    /// `|ratio/target − 1|`, absent when indeterminate.
    pub residual: Option<f64>,
}

pub fn edr_from_table(
    model: &DetectorModel,
    table: &ResponseIntegralTable,
    i: usize,
    j: usize,
    coupling: f64,
) -> Result<EdrVerdict> {
    let forward = transition_probability_from_table(model, table, i, j, coupling)?;
    let backward = transition_probability_from_table(model, table, j, i, coupling)?;
    let beta = table.params().worldline.beta();
    let target = (-beta * (model.energies()[j] - model.energies()[i])).exp();
    let largest = table.entries().iter().fold(0.0f64, |m, e| m.max(e.value.norm()));
    let floor = INDETERMINATE_FRACTION * largest * coupling * coupling;
    let (ratio, residual) = if forward.abs() < floor && backward.abs() < floor {
        (EdrRatio::Indeterminate, None)
    } else {
        let r = forward / backward;
        (EdrRatio::Value(r), Some((r / target - 1.0).abs()))
    };
    Ok(EdrVerdict { from_level: i, to_level: j, forward, backward, ratio, target, residual })
}

pub fn edr(model: &DetectorModel, i: usize, j: usize, p: &IntegralParams, coupling: f64) -> Result<EdrVerdict> {
    let table = build_table(model, p)?;
    edr_from_table(model, &table, i, j, coupling)
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch { left: rho.nrows(), right: sigma.nrows() });
    }
    Ok(0.5 * hermitian_eigenvalues(&(rho - sigma)).iter().map(|x| x.abs()).sum::<f64>())
}

/// Trace distance to the model's Gibbs state at inverse temperature `beta`.
pub fn gibbs_distance(state: &DensityMatrix, model: &DetectorModel, beta: f64) -> Result<f64> {
    let gibbs = gibbs_state(model, beta)?;
    trace_distance(state.entries(), gibbs.entries())
}

/// ℓ1 norm of the off-diagonal entries.
pub fn coherence_norm(state: &CMatrix) -> f64 {
    let mut sum = 0.0;
    for r in 0..state.nrows() {
        for c in 0..state.ncols() {
            if r != c {
                sum += state[(r, c)].norm();
            }
        }
    }
    sum
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecularFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Every grid point satisfies `aT ≥ 50` and `ΩT ≥ 10`.
    pub in_regime: bool,
    pub switching_widths: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Least-squares line through the excitation probability `λ²𝓛₋(T)` at the
/// model gap, over the given switching widths. The acceleration, `iε` and
/// regulator are taken from `p`; a regulator scale that is not below a grid
/// width is an error.
pub fn secular_fit(model: &DetectorModel, p: &IntegralParams, coupling: f64, t_grid: &[f64]) -> Result<SecularFit> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDimension { expected: "at least two increasing widths", found: t_grid.len() });
    }
    let a = p.worldline.accel;
    let omega = model.gap();
    let in_regime = t_grid.iter().all(|&t| a * t >= 50.0 && omega * t >= 10.0);
    if !in_regime {
        warn!("secular fit grid leaves the aT >= 50, ΩT >= 10 regime");
    }
    let mut probabilities = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let wl = WorldlineParams::new(a, p.worldline.i_epsilon, t)?;
        let mut q = IntegralParams::new(wl, p.regulator)?;
        q.epsilon_mode = p.epsilon_mode;
        q.quadrature = p.quadrature;
        probabilities.push(coupling * coupling * integral_l(&q, Sign::Minus, omega)?.value.re);
    }
    let n = t_grid.len() as f64;
    let mx = t_grid.iter().sum::<f64>() / n;
    let my = probabilities.iter().sum::<f64>() / n;
    let sxx: f64 = t_grid.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = t_grid.iter().zip(&probabilities).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = probabilities.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SecularFit { slope, intercept, r_squared, in_regime, switching_widths: t_grid.to_vec(), probabilities })
}
