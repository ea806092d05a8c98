//! Order-λ² correction to the detector state, `ρ⁽²⁾ = ρ⁽¹'¹⁾ + ρ⁽²'⁰⁾ + ρ⁽⁰'²⁾`.
//!
//! With `O(t)_mn = O_mn e^{iω_mn t}` the three pieces reduce to
//!
//! ```text
//! ρ⁽¹'¹⁾_mn =  λ² Σ_kl O_mk ρ_kl O_ln · G(ω_ln, ω_mk)
//! ρ⁽²'⁰⁾_mn = −λ² Σ_kl O_mk O_kl ρ_ln · G^Θ(ω_mk, ω_kl, +)
//! ρ⁽⁰'²⁾    =  (ρ⁽²'⁰⁾)†
//! ```
//!
//! The module also carries hand transcriptions of the qutrit, ququint and
//! Heisenberg-Weyl matrices in terms of the named integrals; they are kept
//! independent of the generic sums so the two can be compared.

use log::warn;
use num_complex::Complex64;

use crate::qudit_algebra::{transition_table, DensityMatrix, DetectorModel};
use crate::response_integrals::{build_table, IntegralParams, ResponseIntegralTable, Sign, TableKey};
use crate::{CMatrix, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One table value entering a slot, possibly conjugated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProvenanceTerm {
    pub key: TableKey,
    pub conjugated: bool,
    pub coefficient: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotProvenance {
    pub row: usize,
    pub col: usize,
    pub terms: Vec<ProvenanceTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionReport {
    /// `ρ⁽²⁾`, including the factor λ².
    pub correction: CMatrix,
    /// `ρ⁽¹'¹⁾` on its own.
    pub one_one: CMatrix,
    /// `ρ⁽²'⁰⁾` on its own; `ρ⁽⁰'²⁾` is its adjoint.
    pub two_zero: CMatrix,
    /// Linear combination of table values behind every nonzero slot.
    pub provenance: Vec<SlotProvenance>,
    /// Largest propagated quadrature error over all slots.
    pub worst_error: f64,
}

impl CorrectionReport {
    fn from_parts(one_one: CMatrix, two_zero: CMatrix) -> Self {
        let correction = &one_one + &two_zero + two_zero.adjoint();
        Self { correction, one_one, two_zero, provenance: Vec::new(), worst_error: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.correction.nrows()
    }

    /// `ρ⁽⁰'²⁾`.
    pub fn zero_two(&self) -> CMatrix {
        self.two_zero.adjoint()
    }
}

fn add_term(terms: &mut Vec<ProvenanceTerm>, key: TableKey, conjugated: bool, coefficient: Complex64) {
    if let Some(t) = terms.iter_mut().find(|t| t.key == key && t.conjugated == conjugated) {
        t.coefficient += coefficient;
    } else {
        terms.push(ProvenanceTerm { key, conjugated, coefficient });
    }
}

/// Builds the response table for the model and assembles the correction.
pub fn second_order_correction(
    model: &DetectorModel,
    initial: &DensityMatrix,
    p: &IntegralParams,
    coupling: f64,
) -> Result<CorrectionReport> {
    let table = build_table(model, p)?;
    correction_from_table(model, initial, &table, coupling)
}

/// Assembles the correction from a precomputed table.
pub fn correction_from_table(
    model: &DetectorModel,
    initial: &DensityMatrix,
    table: &ResponseIntegralTable,
    coupling: f64,
) -> Result<CorrectionReport> {
    let d = model.dim();
    if initial.dim() != d {
        return Err(Error::DimensionMismatch { left: d, right: initial.dim() });
    }
    let rho = initial.entries();
    let lambda2 = coupling * coupling;
    let transitions = transition_table(model).entries;

    let mut one_one_terms: Vec<Vec<Vec<ProvenanceTerm>>> = vec![vec![Vec::new(); d]; d];
    let mut two_zero_terms: Vec<Vec<Vec<ProvenanceTerm>>> = vec![vec![Vec::new(); d]; d];

    for left in &transitions {
        for right in &transitions {
            // ρ⁽¹'¹⁾: left = (m, k), right = (l, n)
            let coeff = left.element * rho[(left.n, right.m)] * right.element * lambda2;
            if coeff != ZERO {
                let key = TableKey::full(right.bohr, left.bohr);
                add_term(&mut one_one_terms[left.m][right.n], key, false, coeff);
            }
            // ρ⁽²'⁰⁾: left = (m, k), right = (k, l)
            if right.m == left.n {
                let key = TableKey::half(left.bohr, right.bohr, Sign::Plus);
                for n in 0..d {
                    let coeff = -left.element * right.element * rho[(right.n, n)] * lambda2;
                    if coeff != ZERO {
                        add_term(&mut two_zero_terms[left.m][n], key, false, coeff);
                    }
                }
            }
        }
    }

    let evaluate = |terms: &[ProvenanceTerm]| -> Result<(Complex64, f64)> {
        let mut value = ZERO;
        let mut error = 0.0;
        for t in terms {
            let entry = table.entry(t.key)?;
            let v = if t.conjugated { entry.value.conj() } else { entry.value };
            value += t.coefficient * v;
            error += t.coefficient.norm() * entry.error;
        }
        Ok((value, error))
    };

    let mut one_one = CMatrix::zeros(d, d);
    let mut two_zero = CMatrix::zeros(d, d);
    let mut provenance = Vec::new();
    let mut worst_error: f64 = 0.0;
    for m in 0..d {
        for n in 0..d {
            let (v11, e11) = evaluate(&one_one_terms[m][n])?;
            let (v20, e20) = evaluate(&two_zero_terms[m][n])?;
            let (_, e02) = evaluate(&two_zero_terms[n][m])?;
            one_one[(m, n)] = v11;
            two_zero[(m, n)] = v20;
            worst_error = worst_error.max(e11 + e20 + e02);

            let mut terms = one_one_terms[m][n].clone();
            for t in &two_zero_terms[m][n] {
                add_term(&mut terms, t.key, false, t.coefficient);
            }
            for t in &two_zero_terms[n][m] {
                add_term(&mut terms, t.key, true, t.coefficient.conj());
            }
            terms.retain(|t| t.coefficient != ZERO);
            if !terms.is_empty() {
                provenance.push(SlotProvenance { row: m, col: n, terms });
            }
        }
    }
    let mut report = CorrectionReport::from_parts(one_one, two_zero);
    report.provenance = provenance;
    report.worst_error = worst_error;
    Ok(report)
}

/// Adds the correction to the initial state. Hermiticity and trace are
/// enforced; positivity is only reported, since truncation at λ² may leave
/// O(λ⁴) negative eigenvalues.
pub fn assemble_final_state(initial: &DensityMatrix, report: &CorrectionReport) -> Result<DensityMatrix> {
    if initial.dim() != report.dim() {
        return Err(Error::DimensionMismatch { left: initial.dim(), right: report.dim() });
    }
    let state = DensityMatrix::unchecked_positivity(initial.entries() + &report.correction)?;
    let min = state.min_eigenvalue();
    if min < -1e-10 {
        warn!("assembled state has a negative eigenvalue {min:.3e}");
    }
    Ok(state)
}

/// The spin-1 integrals at gap Ω: `𝓘, 𝓛±, 𝓠, 𝓡±`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QutritIntegrals {
    pub i: Complex64,
    pub l_plus: Complex64,
    pub l_minus: Complex64,
    pub q: Complex64,
    pub r_plus: Complex64,
    pub r_minus: Complex64,
}

impl QutritIntegrals {
    pub fn from_table(table: &ResponseIntegralTable) -> Result<Self> {
        let w = table.gap();
        Ok(Self {
            i: table.full(w, w)?,
            l_plus: table.full(w, -w)?,
            l_minus: table.full(-w, w)?,
            q: table.half(w, w, Sign::Plus)?,
            r_plus: table.half(w, -w, Sign::Plus)?,
            r_minus: table.half(-w, w, Sign::Plus)?,
        })
    }
}

fn check_populations(pops: &[f64]) -> Result<()> {
    let sum: f64 = pops.iter().sum();
    if pops.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidPopulations(pops.to_vec()));
    }
    Ok(())
}

fn matrix3(rows: [[Complex64; 3]; 3]) -> CMatrix {
    CMatrix::from_fn(3, 3, |r, c| rows[r][c])
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Spin-1 correction for a diagonal initial state `diag(a, b, c)`, λ² stripped.
pub fn qutrit_oracle_diagonal(a: f64, b: f64, c: f64, table: &ResponseIntegralTable) -> Result<CorrectionReport> {
    check_populations(&[a, b, c])?;
    let n = QutritIntegrals::from_table(table)?;
    let (lp, lm) = (n.l_plus, n.l_minus);
    let r11 = 0.5 * (b * lm - a * lp);
    let r22 = 0.5 * (a * lp + c * lm - b * (lm + lp));
    let r33 = 0.5 * (b * lp - c * lm);
    let r13 = 0.5 * (b * n.i - a * n.q.conj() - c * n.q);
    let m = matrix3([[r11, ZERO, r13], [ZERO, r22, ZERO], [r13.conj(), ZERO, r33]]);
    Ok(CorrectionReport { correction: m, ..CorrectionReport::from_parts(CMatrix::zeros(3, 3), CMatrix::zeros(3, 3)) })
}

/// Spin-1 correction for the initial state `(|1⟩ + |0⟩)/√2`, λ² stripped.
pub fn qutrit_oracle_coherent(table: &ResponseIntegralTable) -> Result<CorrectionReport> {
    let n = QutritIntegrals::from_table(table)?;
    let (i, lp, lm, q, rm) = (n.i, n.l_plus, n.l_minus, n.q, n.r_minus);
    let m = matrix3([
        [lm - lp, i - lp - rm.conj(), i - q.conj()],
        [i - lp - rm, -lm, lp - q.conj()],
        [i - q, lp - q, lp],
    ]) * re(0.25);
    Ok(CorrectionReport { correction: m, ..CorrectionReport::from_parts(CMatrix::zeros(3, 3), CMatrix::zeros(3, 3)) })
}

/// Spin-1 correction for the general initial state
/// `[[a, d, e], [d*, b, f], [e*, f*, c]]`, λ² stripped.
pub fn qutrit_oracle_general(
    a: f64,
    b: f64,
    c: f64,
    d: Complex64,
    e: Complex64,
    f: Complex64,
    table: &ResponseIntegralTable,
) -> Result<CorrectionReport> {
    let state = matrix3([[re(a), d, e], [d.conj(), re(b), f], [e.conj(), f.conj(), re(c)]]);
    DensityMatrix::new(state)?;
    let n = QutritIntegrals::from_table(table)?;
    let (i, lp, lm, q, rp, rm) = (n.i, n.l_plus, n.l_minus, n.q, n.r_plus, n.r_minus);
    let (ds, es, fs) = (d.conj(), e.conj(), f.conj());
    let m = matrix3([
        [
            -a * lp + b * lm - 2.0 * (e * q.conj()).re,
            ds * i - d * (lp + rm.conj()) + f * lm - fs * q,
            -a * q.conj() + b * i - c * q - e * (rm.conj() + rp),
        ],
        [
            d * i - ds * (lp + rm) + fs * lm - f * q.conj(),
            a * lp - b * (lm + lp) + c * lm + 2.0 * i * e.re,
            d * lp - ds * q.conj() - f * (lm + rp) + fs * i,
        ],
        [
            -a * q + b * i - c * q.conj() - es * (rp.conj() + rm),
            ds * lp - d * q - fs * (lm + rp.conj()) + f * i,
            b * lp - c * lm - 2.0 * (e * q).re,
        ],
    ]) * re(0.5);
    Ok(CorrectionReport { correction: m, ..CorrectionReport::from_parts(CMatrix::zeros(3, 3), CMatrix::zeros(3, 3)) })
}

/// Spin-2 state after starting in the middle level `|m = 0⟩`, correction
/// only (λ² stripped). The slots two levels away carry `𝓠` and the
/// inner off-diagonal slots carry `𝓘`, with the signs of the
/// reference, which is not Hermitian in the `(0,2)/(2,0)` pair; comparisons
/// against it should use the zero pattern and slot magnitudes.
pub fn ququint_oracle_middle(table: &ResponseIntegralTable) -> Result<CorrectionReport> {
    let n = QutritIntegrals::from_table(table)?;
    let k = 1.5f64.sqrt();
    let mut m = CMatrix::zeros(5, 5);
    m[(0, 2)] = -k * n.q;
    m[(1, 1)] = 1.5 * n.l_minus;
    m[(1, 3)] = 1.5 * n.i;
    m[(2, 0)] = k * n.q.conj();
    m[(2, 2)] = -1.5 * (n.l_plus + n.l_minus);
    m[(2, 4)] = -k * n.q.conj();
    m[(3, 1)] = 1.5 * n.i;
    m[(3, 3)] = 1.5 * n.l_plus;
    m[(4, 2)] = -k * n.q;
    Ok(CorrectionReport { correction: m, ..CorrectionReport::from_parts(CMatrix::zeros(5, 5), CMatrix::zeros(5, 5)) })
}

/// Heisenberg-Weyl qutrit integrals at `q = 3/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HwIntegrals {
    /// `𝓛_{+3/2}` (de-excitation)
    pub l_plus: Complex64,
    /// `𝓛_{−3/2}` (excitation)
    pub l_minus: Complex64,
    /// `𝓤_{−3/2}`
    pub u_minus: Complex64,
    pub u0: Complex64,
    /// `𝓥^±_{+3/2}`
    pub v_plus: Complex64,
    pub v_minus: Complex64,
    /// `𝓡_{−3/2}`
    pub r_minus: Complex64,
}

impl HwIntegrals {
    pub fn from_table(table: &ResponseIntegralTable) -> Result<Self> {
        let w = 1.5 * table.gap();
        Ok(Self {
            l_plus: table.full(w, -w)?,
            l_minus: table.full(-w, w)?,
            u_minus: table.full(-w, 0.0)?,
            u0: table.full(0.0, 0.0)?,
            v_plus: table.half(w, 0.0, Sign::Plus)?,
            v_minus: table.half(w, 0.0, Sign::Minus)?,
            r_minus: table.half(-w, w, Sign::Plus)?,
        })
    }
}

/// Heisenberg-Weyl qutrit correction for `diag(a, b, c)`, λ² stripped,
/// returned as `(ρ⁽¹'¹⁾, ρ⁽²'⁰⁾ + ρ⁽⁰'²⁾)` via the report's `one_one` and
/// `correction − one_one`.
pub fn hw_qutrit_oracle_diagonal(a: f64, b: f64, c: f64, table: &ResponseIntegralTable) -> Result<CorrectionReport> {
    check_populations(&[a, b, c])?;
    let n = HwIntegrals::from_table(table)?;
    let (lp, lm, u, u0, vp, vm, r) = (n.l_plus, n.l_minus, n.u_minus, n.u0, n.v_plus, n.v_minus, n.r_minus);
    let one_one = matrix3([[ZERO, ZERO, ZERO], [ZERO, lp, lp], [ZERO, lp, lp]]) * re(a)
        + matrix3([[lm, ZERO, u.conj()], [ZERO, ZERO, ZERO], [u, ZERO, u0]]) * re(b)
        + matrix3([[lm, u.conj(), ZERO], [u, u0, ZERO], [ZERO, ZERO, ZERO]]) * re(c);
    let ordered = matrix3([[2.0 * lp, vm, vm], [vm.conj(), ZERO, ZERO], [vm.conj(), ZERO, ZERO]]) * re(-a)
        + matrix3([[ZERO, vp, ZERO], [vp.conj(), u0 + lm, r.conj()], [ZERO, r, ZERO]]) * re(-b)
        + matrix3([[ZERO, ZERO, vp], [ZERO, ZERO, r], [vp.conj(), r.conj(), u0 + lm]]) * re(-c);
    let correction = &one_one + &ordered;
    Ok(CorrectionReport { correction, one_one, two_zero: CMatrix::zeros(3, 3), provenance: Vec::new(), worst_error: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit_algebra::{build_hw_model, build_su2_model, hermitian_eigenvalues, x_o_split};
    use crate::response_integrals::build_table;
    use crate::wightman::WorldlineParams;

    fn params(a: f64, t: f64) -> IntegralParams {
        IntegralParams::with_default_regulator(WorldlineParams::with_default_epsilon(a, t).unwrap())
    }

    fn max_rel(a: &CMatrix, b: &CMatrix) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale
    }

    fn setup_su2() -> (DetectorModel, ResponseIntegralTable) {
        let model = build_su2_model(1.0, 0.6).unwrap();
        let table = build_table(&model, &params(1.0, 6.0)).unwrap();
        (model, table)
    }

    #[test]
    fn diagonal_oracle_special_cases() {
        let (_, table) = setup_su2();
        let n = QutritIntegrals::from_table(&table).unwrap();
        let top = qutrit_oracle_diagonal(1.0, 0.0, 0.0, &table).unwrap().correction;
        assert_eq!(top[(0, 0)], -0.5 * n.l_plus);
        assert_eq!(top[(1, 1)], 0.5 * n.l_plus);
        assert_eq!(top[(2, 2)], ZERO);
        assert_eq!(top[(0, 2)], -0.5 * n.q.conj());
        let mid = qutrit_oracle_diagonal(0.0, 1.0, 0.0, &table).unwrap().correction;
        assert_eq!(mid[(0, 0)], 0.5 * n.l_minus);
        assert_eq!(mid[(1, 1)], -0.5 * (n.l_minus + n.l_plus));
        assert_eq!(mid[(2, 2)], 0.5 * n.l_plus);
        assert_eq!(mid[(0, 2)], 0.5 * n.i);
        assert!(qutrit_oracle_diagonal(0.5, 0.6, 0.0, &table).is_err());
    }

    #[test]
    fn general_oracle_reduces_to_diagonal() {
        let (_, table) = setup_su2();
        let g = qutrit_oracle_general(0.2, 0.3, 0.5, ZERO, ZERO, ZERO, &table).unwrap().correction;
        let d = qutrit_oracle_diagonal(0.2, 0.3, 0.5, &table).unwrap().correction;
        assert!(max_rel(&g, &d) < 1e-15);
        let coh = qutrit_oracle_general(0.5, 0.5, 0.0, re(0.5), ZERO, ZERO, &table).unwrap().correction;
        let reference = qutrit_oracle_coherent(&table).unwrap().correction;
        assert!(max_rel(&coh, &reference) < 1e-15);
    }

    #[test]
    fn engine_matches_diagonal_and_coherent_displays() {
        let (model, table) = setup_su2();
        let init = DensityMatrix::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let engine = correction_from_table(&model, &init, &table, 1.0).unwrap();
        let oracle = qutrit_oracle_diagonal(0.2, 0.3, 0.5, &table).unwrap();
        assert!(max_rel(&engine.correction, &oracle.correction) < 1e-12);

        let psi = DensityMatrix::pure(&[re(1.0), re(1.0), ZERO]).unwrap();
        let engine = correction_from_table(&model, &psi, &table, 1.0).unwrap();
        let oracle = qutrit_oracle_coherent(&table).unwrap();
        assert!(max_rel(&engine.correction, &oracle.correction) < 1e-12);
    }

    #[test]
    fn engine_matches_hw_display() {
        let model = build_hw_model(3, 0.7).unwrap();
        let table = build_table(&model, &params(1.0, 6.0)).unwrap();
        let (a, b, c) = (0.5, 0.3, 0.2);
        let init = DensityMatrix::diagonal(&[a, b, c]).unwrap();
        let engine = correction_from_table(&model, &init, &table, 1.0).unwrap();
        let oracle = hw_qutrit_oracle_diagonal(a, b, c, &table).unwrap();
        assert!(max_rel(&engine.one_one, &oracle.one_one) < 1e-12);
        assert!(max_rel(&engine.correction, &oracle.correction) < 1e-12);
        // ρ⁽¹'¹⁾ is a positive map of the initial state
        assert!(hermitian_eigenvalues(&engine.one_one)[0] > -1e-14);
    }

    #[test]
    fn provenance_reproduces_slots() {
        let (model, table) = setup_su2();
        let psi = DensityMatrix::pure(&[re(1.0), Complex64::new(0.3, 0.4), re(0.5)]).unwrap();
        let report = correction_from_table(&model, &psi, &table, 0.1).unwrap();
        let mut rebuilt = CMatrix::zeros(3, 3);
        for slot in &report.provenance {
            for t in &slot.terms {
                let v = table.get(t.key).unwrap();
                rebuilt[(slot.row, slot.col)] += t.coefficient * if t.conjugated { v.conj() } else { v };
            }
        }
        assert!(max_rel(&rebuilt, &report.correction) < 1e-14);
        assert!(report.worst_error >= 0.0);
    }

    #[test]
    fn x_block_initial_state_keeps_o_block_empty() {
        let (model, table) = setup_su2();
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = re(0.4);
        m[(1, 1)] = re(0.35);
        m[(2, 2)] = re(0.25);
        m[(0, 2)] = Complex64::new(0.1, 0.05);
        m[(2, 0)] = Complex64::new(0.1, -0.05);
        let init = DensityMatrix::new(m).unwrap();
        let report = correction_from_table(&model, &init, &table, 1.0).unwrap();
        let (_, o) = x_o_split(&report.correction).unwrap();
        assert!(o.iter().all(|z| z.norm() <= 1e-12));
    }

    #[test]
    fn ququint_zero_pattern() {
        let model = build_su2_model(2.0, 0.6).unwrap();
        let table = build_table(&model, &params(1.0, 6.0)).unwrap();
        let init = DensityMatrix::basis(5, 2).unwrap();
        let engine = correction_from_table(&model, &init, &table, 1.0).unwrap().correction;
        let oracle = ququint_oracle_middle(&table).unwrap().correction;
        let mut zeros = 0;
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(engine[(r, c)] == ZERO, oracle[(r, c)] == ZERO, "slot ({r}, {c})");
                if oracle[(r, c)] == ZERO {
                    zeros += 1;
                }
                let (x, y) = (engine[(r, c)].norm(), oracle[(r, c)].norm());
                assert!((x - y).abs() <= 1e-12 * y.max(1e-300), "slot ({r}, {c})");
            }
        }
        assert_eq!(zeros, 16);
    }

    #[test]
    fn assembly_checks() {
        let (model, table) = setup_su2();
        let init = DensityMatrix::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let zero = correction_from_table(&model, &init, &table, 0.0).unwrap();
        assert_eq!(assemble_final_state(&init, &zero).unwrap(), init);
        let small = correction_from_table(&model, &init, &table, 0.01).unwrap();
        let state = assemble_final_state(&init, &small).unwrap();
        assert!((state.trace().re - 1.0).abs() < 1e-10);
        assert!(state.min_eigenvalue() >= -1e-6);
        let wrong = DensityMatrix::basis(2, 0).unwrap();
        assert!(matches!(assemble_final_state(&wrong, &small), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(correction_from_table(&model, &wrong, &table, 1.0), Err(Error::DimensionMismatch { .. })));
    }
}
