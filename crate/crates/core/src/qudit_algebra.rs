//! Detector models, density matrices and the qutrit X/O block split.

use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;

/// Relative width used to merge Bohr frequencies that differ only by rounding.
const BOHR_MERGE: f64 = 1e-12;

/// A qudit detector: free spectrum (diagonal in the computational basis)
/// plus a Hermitian monopole operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    dim: usize,
    energies: Vec<f64>,
    monopole: CMatrix,
    gap: f64,
    label: String,
}

impl DetectorModel {
    /// Builds a model from raw parts, checking Hermiticity and finiteness.
    pub fn new(energies: Vec<f64>, monopole: CMatrix, gap: f64, label: impl Into<String>) -> Result<Self> {
        let dim = energies.len();
        if dim < 2 {
            return Err(Error::InvalidDimension { expected: ">= 2", found: dim });
        }
        if monopole.nrows() != dim || monopole.ncols() != dim {
            return Err(Error::DimensionMismatch { left: dim, right: monopole.nrows() });
        }
        if let Some(&bad) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::NonPositive { name: "energy (finite)", value: bad });
        }
        check_positive("gap", gap)?;
        let dev = hermiticity_deviation(&monopole);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { dim, energies, monopole, gap, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn monopole(&self) -> &CMatrix {
        &self.monopole
    }

    /// The frequency scale Ω the model was built with.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Matrix of Bohr frequencies `ω_mn = E_m − E_n`, with values that agree
    /// up to rounding collapsed onto one representative, so that equal gaps
    /// compare bitwise equal and `ω_nm = −ω_mn` exactly.
    pub fn bohr_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let scale = self.energies.iter().fold(self.gap, |m, e| m.max(e.abs()));
        let tol = BOHR_MERGE * scale;
        let mut reps: Vec<f64> = Vec::new();
        let mut raw = vec![vec![0.0; d]; d];
        for m in 0..d {
            for n in 0..d {
                let w = self.energies[m] - self.energies[n];
                raw[m][n] = w;
                if w.abs() > tol && !reps.iter().any(|r| (r - w.abs()).abs() <= tol) {
                    reps.push(w.abs());
                }
            }
        }
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|&w| {
                        if w.abs() <= tol {
                            0.0
                        } else {
                            let r = reps.iter().copied().find(|r| (r - w.abs()).abs() <= tol).unwrap_or(w.abs());
                            r.copysign(w)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

/// Largest entrywise `|M − M†|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()).scale(0.5);
    let mut values: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Spin-j model: monopole `J_x` in the Dicke basis ordered `m = +j … −j`,
/// free Hamiltonian `Ω(J_z + j)`.
pub fn build_su2_model(j: f64, gap: f64) -> Result<DetectorModel> {
    let twice = 2.0 * j;
    if !(twice >= 1.0 && twice.fract() == 0.0 && twice.is_finite()) {
        return Err(Error::InvalidSpin(j));
    }
    check_positive("gap", gap)?;
    let dim = twice as usize + 1;
    let m_of = |k: usize| j - k as f64;
    let mut jx = CMatrix::zeros(dim, dim);
    for k in 0..dim - 1 {
        // ⟨m|J_x|m−1⟩ = ½√(j(j+1) − m(m−1))
        let m = m_of(k);
        let v = 0.5 * (j * (j + 1.0) - m * (m - 1.0)).sqrt();
        jx[(k, k + 1)] = Complex64::new(v, 0.0);
        jx[(k + 1, k)] = Complex64::new(v, 0.0);
    }
    let energies = (0..dim).map(|k| gap * (m_of(k) + j)).collect();
    DetectorModel::new(energies, jx, gap, format!("su2-{j}"))
}

/// `J_z` and `J_y` in the same basis as [`build_su2_model`].
pub fn su2_generators(j: f64) -> Result<(CMatrix, CMatrix)> {
    let model = build_su2_model(j, 1.0)?;
    let dim = model.dim();
    let jz = CMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(j - r as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    // J_y = (J₊ − J₋)/(2i); J₊ is the strictly upper part of 2J_x
    let jy = CMatrix::from_fn(dim, dim, |r, c| {
        let x = model.monopole()[(r, c)];
        if c == r + 1 {
            x * Complex64::new(0.0, -1.0)
        } else if r == c + 1 {
            x * Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok((jz, jy))
}

/// Heisenberg-Weyl model: monopole `X + X†` with the shift `X|k⟩ = |k+1 mod d⟩`,
/// free Hamiltonian `Ω(Z + Z†)/2 = diag(Ω cos(2πk/d))`.
pub fn build_hw_model(dim: usize, gap: f64) -> Result<DetectorModel> {
    if dim < 2 {
        return Err(Error::InvalidDimension { expected: ">= 2", found: dim });
    }
    check_positive("gap", gap)?;
    let mut monopole = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        let next = (k + 1) % dim;
        monopole[(next, k)] += Complex64::new(1.0, 0.0);
        monopole[(k, next)] += Complex64::new(1.0, 0.0);
    }
    let energies = (0..dim).map(|k| gap * clock_cosine(k.min(dim - k), dim)).collect();
    DetectorModel::new(energies, monopole, gap, format!("hw-{dim}"))
}

/// `cos(2πk/d)`, snapped to the exact value when it is a multiple of ½.
fn clock_cosine(k: usize, dim: usize) -> f64 {
    let c = (2.0 * std::f64::consts::PI * k as f64 / dim as f64).cos();
    let snapped = (2.0 * c).round() / 2.0;
    if (c - snapped).abs() < 1e-14 {
        snapped
    } else {
        c
    }
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (exact-state slack).
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_slack(entries, POSITIVITY_TOL)
    }

    /// Like [`DensityMatrix::new`] with a caller-chosen negative-eigenvalue slack.
    pub fn with_slack(entries: CMatrix, slack: f64) -> Result<Self> {
        let state = Self::unchecked_positivity(entries)?;
        let min = state.min_eigenvalue();
        if min < -slack {
            return Err(Error::NotPositive(min));
        }
        Ok(state)
    }

    /// Checks Hermiticity and trace only.
    pub fn unchecked_positivity(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { left: entries.nrows(), right: entries.ncols() });
        }
        let dev = hermiticity_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::TraceNotOne(tr.re));
        }
        Ok(Self { entries })
    }

    /// `|i⟩⟨i|`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::LevelOutOfRange { index, dim });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self::new(m)
    }

    /// Diagonal state from non-negative populations summing to one.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let sum: f64 = populations.iter().sum();
        if populations.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidPopulations(populations.to_vec()));
        }
        let v: Vec<Complex64> = populations.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        Self::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)))
    }

    /// Projector onto a (normalised here) pure state.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::NonPositive { name: "state norm", value: norm });
        }
        let v = nalgebra::DVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|a| a / norm));
        Self::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)[0]
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }
}

/// One nonzero monopole element in the interaction picture,
/// `O(τ)_mn = element · e^{i·bohr·τ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub m: usize,
    pub n: usize,
    pub element: Complex64,
    pub bohr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTable {
    pub dim: usize,
    pub entries: Vec<Transition>,
}

impl TransitionTable {
    /// Reassembles `Σ O_mn |m⟩⟨n|`.
    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for t in &self.entries {
            m[(t.m, t.n)] = t.element;
        }
        m
    }

    /// Distinct Bohr frequencies, ascending.
    pub fn bohr_set(&self) -> Vec<f64> {
        let mut set: Vec<f64> = self.entries.iter().map(|t| t.bohr).collect();
        set.sort_by(f64::total_cmp);
        set.dedup();
        set
    }
}

/// Nonzero monopole elements with their Bohr frequencies, row-major.
pub fn transition_table(model: &DetectorModel) -> TransitionTable {
    let bohr = model.bohr_matrix();
    let mut entries = Vec::new();
    for m in 0..model.dim() {
        for n in 0..model.dim() {
            let element = model.monopole()[(m, n)];
            if element != Complex64::new(0.0, 0.0) {
                entries.push(Transition { m, n, element, bohr: bohr[m][n] });
            }
        }
    }
    TransitionTable { dim: model.dim(), entries }
}

/// Splits a qutrit matrix into its X-block (diagonal and the 1↔3 corners)
/// and O-block (the remaining four slots).
pub fn x_o_split(state: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if state.nrows() != 3 || state.ncols() != 3 {
        return Err(Error::InvalidDimension { expected: "3", found: state.nrows() });
    }
    let x = CMatrix::from_fn(3, 3, |r, c| if (r + c) % 2 == 0 { state[(r, c)] } else { Complex64::new(0.0, 0.0) });
    let o = CMatrix::from_fn(3, 3, |r, c| if (r + c) % 2 == 1 { state[(r, c)] } else { Complex64::new(0.0, 0.0) });
    Ok((x, o))
}

/// `e^{−βH}/tr e^{−βH}` for the model's free Hamiltonian.
pub fn gibbs_state(model: &DetectorModel, beta: f64) -> Result<DensityMatrix> {
    check_positive("beta", beta)?;
    let ground = model.energies().iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = model.energies().iter().map(|e| (-beta * (e - ground)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let pops: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let v: Vec<Complex64> = pops.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    DensityMatrix::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)))
}
