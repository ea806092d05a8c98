//! Run configuration, sweeps and CSV reports behind the `qudit-unruh` binary.
//!
//! A configuration is a TOML file with one level of sections:
//!
//! ```toml
//! [model]
//! kind = "su2"        # or "hw"
//! spin = 1.0          # su2 only
//! # dim = 3           # hw only
//! gap = 0.5
//!
//! [worldline]
//! accel = 1.0
//! switching = 50.0
//! # i_epsilon = 1e-6  # default 1e-6/accel
//!
//! [coupling]
//! lambda = 0.1
//!
//! [regulator]
//! scheme = "tanh"     # or "nascent-delta"
//! # a0 = 0.25         # default switching/200
//!
//! [initial]           # exactly one of basis, populations, real (+ imag)
//! basis = 2
//!
//! [sweep]             # optional
//! axis = "switching"  # accel | switching | gap | a0
//! start = 20.0
//! stop = 100.0
//! points = 5
//!
//! [kms]               # kms-check only
//! omegas = [0.25, 0.5, 1.0]
//! # window = 50.0     # default switching
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::diagnostics::{coherence_norm, edr_from_table, EdrRatio};
use crate::perturbation::{
    assemble_final_state, correction_from_table, hw_qutrit_oracle_diagonal, ququint_oracle_middle, qutrit_oracle_coherent,
    qutrit_oracle_diagonal, qutrit_oracle_general, CorrectionReport,
};
use crate::qudit_algebra::{build_hw_model, build_su2_model, transition_table, DensityMatrix, DetectorModel};
use crate::response_integrals::{
    build_table, integral_i, integral_l, integral_q, integral_r, integral_u, integral_v, IntegralParams, RegulatorScheme,
    ResponseIntegralTable, Sign, Transform,
};
use crate::wightman::{kms_fourier_ratio, WorldlineParams};
use crate::CMatrix;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Deviation allowed between the generic engine and a reference matrix.
pub const ORACLE_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "qudit-unruh", version, about = "Qudit detectors on uniformly accelerated worldlines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Named response integrals per sweep point
    Integrals(IoArgs),
    /// Initial state, correction and final state per sweep point
    Evolve(IoArgs),
    /// Excitation-to-deexcitation ratios for every ordered level pair
    EdrSweep(IoArgs),
    /// Windowed power-spectrum ratio against the Unruh temperature
    KmsCheck(IoArgs),
    /// Generic engine against the hand-transcribed reference matrices
    OracleCheck(IoArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    worldline: RawWorldline,
    coupling: Option<RawCoupling>,
    regulator: Option<RawRegulator>,
    initial: Option<RawInitial>,
    sweep: Option<RawSweep>,
    kms: Option<RawKms>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    spin: Option<f64>,
    dim: Option<usize>,
    gap: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorldline {
    accel: f64,
    switching: f64,
    i_epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegulator {
    scheme: String,
    a0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    basis: Option<usize>,
    populations: Option<Vec<f64>>,
    real: Option<Vec<Vec<f64>>>,
    imag: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    start: f64,
    stop: f64,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKms {
    omegas: Vec<f64>,
    window: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelSpec {
    Su2 { spin: f64 },
    Hw { dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Tanh,
    NascentDelta,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Basis(usize),
    Populations(Vec<f64>),
    Matrix(CMatrix),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Accel,
    Switching,
    Gap,
    A0,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Accel => "accel",
            SweepAxis::Switching => "switching",
            SweepAxis::Gap => "gap",
            SweepAxis::A0 => "a0",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub gap: f64,
    pub accel: f64,
    pub switching: f64,
    pub i_epsilon: Option<f64>,
    pub lambda: f64,
    pub scheme: SchemeKind,
    pub a0: Option<f64>,
    pub initial: Option<InitialSpec>,
    pub sweep: Option<Sweep>,
    pub kms_omegas: Vec<f64>,
    pub kms_window: Option<f64>,
}

/// Everything needed to evaluate one sweep point.
#[derive(Clone, Debug)]
pub struct Point {
    pub value: f64,
    pub model: DetectorModel,
    pub params: IntegralParams,
    pub lambda: f64,
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let gap = positive("model.gap", raw.model.gap)?;
        let model = match raw.model.kind.as_str() {
            "su2" => {
                let spin = raw.model.spin.ok_or_else(|| config_err("model.spin", "required for kind = \"su2\""))?;
                build_su2_model(spin, gap).map_err(|e| config_err("model.spin", e))?;
                ModelSpec::Su2 { spin }
            }
            "hw" => {
                let dim = raw.model.dim.ok_or_else(|| config_err("model.dim", "required for kind = \"hw\""))?;
                build_hw_model(dim, gap).map_err(|e| config_err("model.dim", e))?;
                ModelSpec::Hw { dim }
            }
            other => return Err(config_err("model.kind", format!("expected \"su2\" or \"hw\", got {other:?}"))),
        };
        let accel = positive("worldline.accel", raw.worldline.accel)?;
        let switching = positive("worldline.switching", raw.worldline.switching)?;
        let i_epsilon = raw.worldline.i_epsilon.map(|e| positive("worldline.i_epsilon", e)).transpose()?;
        let lambda = raw.coupling.map_or(Ok(1.0), |c| {
            if c.lambda.is_finite() {
                Ok(c.lambda)
            } else {
                Err(config_err("coupling.lambda", "must be finite"))
            }
        })?;
        let (scheme, a0) = match raw.regulator {
            None => (SchemeKind::Tanh, None),
            Some(r) => {
                let scheme = match r.scheme.as_str() {
                    "tanh" => SchemeKind::Tanh,
                    "nascent-delta" => SchemeKind::NascentDelta,
                    other => {
                        return Err(config_err("regulator.scheme", format!("expected \"tanh\" or \"nascent-delta\", got {other:?}")))
                    }
                };
                (scheme, r.a0.map(|v| positive("regulator.a0", v)).transpose()?)
            }
        };
        let dim = match model {
            ModelSpec::Su2 { spin } => (2.0 * spin) as usize + 1,
            ModelSpec::Hw { dim } => dim,
        };
        let initial = raw.initial.map(|i| parse_initial(i, dim)).transpose()?;
        let sweep = raw.sweep.map(parse_sweep).transpose()?;
        let (kms_omegas, kms_window) = match raw.kms {
            None => (Vec::new(), None),
            Some(k) => {
                if k.omegas.iter().any(|w| *w == 0.0 || !w.is_finite()) {
                    return Err(config_err("kms.omegas", "frequencies must be finite and nonzero"));
                }
                (k.omegas, k.window.map(|w| positive("kms.window", w)).transpose()?)
            }
        };
        let cfg = RunConfig {
            model,
            gap,
            accel,
            switching,
            i_epsilon,
            lambda,
            scheme,
            a0,
            initial,
            sweep,
            kms_omegas,
            kms_window,
        };
        for v in cfg.sweep_values() {
            cfg.point(v)?;
        }
        Ok(cfg)
    }

    /// Sweep values, or a single `0.0` placeholder without a sweep.
    pub fn sweep_values(&self) -> Vec<f64> {
        self.sweep.as_ref().map_or(vec![0.0], |s| s.values.clone())
    }

    pub fn axis_name(&self) -> &'static str {
        self.sweep.as_ref().map_or("point", |s| s.axis.name())
    }

    pub fn point(&self, value: f64) -> Result<Point, CliError> {
        let (mut gap, mut accel, mut switching, mut a0) = (self.gap, self.accel, self.switching, self.a0);
        if let Some(s) = &self.sweep {
            match s.axis {
                SweepAxis::Accel => accel = value,
                SweepAxis::Switching => switching = value,
                SweepAxis::Gap => gap = value,
                SweepAxis::A0 => a0 = Some(value),
            }
        }
        let model = match self.model {
            ModelSpec::Su2 { spin } => build_su2_model(spin, gap),
            ModelSpec::Hw { dim } => build_hw_model(dim, gap),
        }
        .map_err(|e| config_err("model", e))?;
        let eps = self.i_epsilon.unwrap_or(1e-6 / accel);
        let wl = WorldlineParams::new(accel, eps, switching).map_err(|e| config_err("worldline", e))?;
        let a0 = a0.unwrap_or(switching / 200.0);
        let regulator = match self.scheme {
            SchemeKind::Tanh => RegulatorScheme::TanhHeaviside(a0),
            SchemeKind::NascentDelta => RegulatorScheme::NascentDelta(a0),
        };
        let params = IntegralParams::new(wl, regulator).map_err(|e| config_err("regulator.a0", e))?;
        Ok(Point { value, model, params, lambda: self.lambda })
    }

    pub fn initial_state(&self, dim: usize) -> Result<DensityMatrix, CliError> {
        let spec = self.initial.as_ref().ok_or_else(|| config_err("initial", "section is required for this command"))?;
        let state = match spec {
            InitialSpec::Basis(i) => DensityMatrix::basis(dim, *i),
            InitialSpec::Populations(p) => DensityMatrix::diagonal(p),
            InitialSpec::Matrix(m) => DensityMatrix::new(m.clone()),
        };
        state.map_err(|e| config_err("initial", e))
    }
}

fn parse_initial(raw: RawInitial, dim: usize) -> Result<InitialSpec, CliError> {
    let given = [raw.basis.is_some(), raw.populations.is_some(), raw.real.is_some()].iter().filter(|b| **b).count();
    if given != 1 {
        return Err(config_err("initial", "give exactly one of basis, populations, real"));
    }
    let spec = if let Some(i) = raw.basis {
        InitialSpec::Basis(i)
    } else if let Some(p) = raw.populations {
        if p.len() != dim {
            return Err(config_err("initial.populations", format!("expected {dim} entries, got {}", p.len())));
        }
        InitialSpec::Populations(p)
    } else {
        let real = raw.real.unwrap_or_default();
        let imag = raw.imag.unwrap_or_else(|| vec![vec![0.0; dim]; dim]);
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == dim && rows.iter().all(|r| r.len() == dim);
        if !shape_ok(&real) || !shape_ok(&imag) {
            return Err(config_err("initial.real/imag", format!("expected {dim}x{dim} rows")));
        }
        InitialSpec::Matrix(CMatrix::from_fn(dim, dim, |r, c| Complex64::new(real[r][c], imag[r][c])))
    };
    let state = match &spec {
        InitialSpec::Basis(i) => DensityMatrix::basis(dim, *i),
        InitialSpec::Populations(p) => DensityMatrix::diagonal(p),
        InitialSpec::Matrix(m) => DensityMatrix::new(m.clone()),
    };
    state.map_err(|e| config_err("initial", e))?;
    Ok(spec)
}

fn parse_sweep(raw: RawSweep) -> Result<Sweep, CliError> {
    let axis = match raw.axis.as_str() {
        "accel" => SweepAxis::Accel,
        "switching" => SweepAxis::Switching,
        "gap" => SweepAxis::Gap,
        "a0" => SweepAxis::A0,
        other => return Err(config_err("sweep.axis", format!("expected accel, switching, gap or a0, got {other:?}"))),
    };
    if raw.points == 0 {
        return Err(config_err("sweep.points", "must be at least 1"));
    }
    positive("sweep.start", raw.start)?;
    let values = if raw.points == 1 {
        vec![raw.start]
    } else {
        if raw.stop.partial_cmp(&raw.start) != Some(std::cmp::Ordering::Greater) || !raw.stop.is_finite() {
            return Err(config_err("sweep.stop", "must exceed sweep.start"));
        }
        let step = (raw.stop - raw.start) / (raw.points - 1) as f64;
        (0..raw.points).map(|k| if k + 1 == raw.points { raw.stop } else { raw.start + k as f64 * step }).collect()
    };
    Ok(Sweep { axis, values })
}

/// Text produced by a subcommand plus the number of failed numerical cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub text: String,
    pub failures: usize,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        if self.failures == 0 {
            EXIT_OK
        } else {
            EXIT_NUMERICAL
        }
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn push_transform(row: &mut Vec<String>, t: &crate::Result<Transform>, failures: &mut usize) {
    match t {
        Ok(t) => {
            row.push(num(t.value.re));
            row.push(num(t.value.im));
            row.push(num(t.error));
        }
        Err(e) => {
            log::error!("integral failed: {e}");
            *failures += 1;
            row.extend(["NaN", "NaN", "NaN"].map(String::from));
        }
    }
}

fn largest_bohr_ratio(model: &DetectorModel) -> f64 {
    transition_table(model).bohr_set().iter().fold(0.0f64, |m, w| m.max(w.abs())) / model.gap()
}

/// One row per sweep point with Re/Im/error of 𝓘, 𝓛±, 𝓠, 𝓡± (and 𝓤, 𝓥 for
/// Heisenberg-Weyl models at `q` = largest Bohr frequency over the gap).
pub fn run_integrals(cfg: &RunConfig) -> Result<Report, CliError> {
    let is_hw = matches!(cfg.model, ModelSpec::Hw { .. });
    let mut names = vec!["I", "Lplus", "Lminus", "Q", "Rplus", "Rminus"];
    if is_hw {
        names.extend(["Uq", "Uminusq", "U0", "Vplusq", "Vminusq"]);
    }
    let mut header = vec![cfg.axis_name().to_string()];
    if is_hw {
        header.push("q".to_string());
    }
    for n in &names {
        header.extend([format!("{n}_re"), format!("{n}_im"), format!("{n}_err")]);
    }
    let points: Vec<Point> = cfg.sweep_values().into_iter().map(|v| cfg.point(v)).collect::<Result<_, _>>()?;
    let rows: Vec<(Vec<String>, usize)> = points
        .par_iter()
        .map(|pt| {
            let p = &pt.params;
            let w = pt.model.gap();
            let mut failures = 0;
            let mut row = vec![num(pt.value)];
            let mut values = vec![
                integral_i(p, w),
                integral_l(p, Sign::Plus, w),
                integral_l(p, Sign::Minus, w),
                integral_q(p, w),
                integral_r(p, Sign::Plus, w),
                integral_r(p, Sign::Minus, w),
            ];
            if is_hw {
                let q = largest_bohr_ratio(&pt.model);
                row.push(num(q));
                values.extend([
                    integral_u(p, q, w),
                    integral_u(p, -q, w),
                    integral_u(p, 0.0, w),
                    integral_v(p, q, Sign::Plus, w),
                    integral_v(p, q, Sign::Minus, w),
                ]);
            }
            for v in &values {
                push_transform(&mut row, v, &mut failures);
            }
            (row, failures)
        })
        .collect();
    Ok(render(header, rows))
}

fn render(header: Vec<String>, rows: Vec<(Vec<String>, usize)>) -> Report {
    let mut text = header.join(",");
    text.push('\n');
    let mut failures = 0;
    for (row, f) in rows {
        text.push_str(&row.join(","));
        text.push('\n');
        failures += f;
    }
    Report { text, failures }
}

fn flatten(prefix: &str, m: &CMatrix, header: &mut Vec<String>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            header.push(format!("{prefix}_{r}{c}_re"));
            header.push(format!("{prefix}_{r}{c}_im"));
        }
    }
}

fn flatten_values(m: &CMatrix, row: &mut Vec<String>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            row.push(num(m[(r, c)].re));
            row.push(num(m[(r, c)].im));
        }
    }
}

/// Initial state, correction and final state (row-major, Re/Im interleaved),
/// then trace, smallest eigenvalue and coherence norm of the final state.
pub fn run_evolve(cfg: &RunConfig) -> Result<Report, CliError> {
    let points: Vec<Point> = cfg.sweep_values().into_iter().map(|v| cfg.point(v)).collect::<Result<_, _>>()?;
    let dim = points[0].model.dim();
    let initial = cfg.initial_state(dim)?;
    let mut header = vec![cfg.axis_name().to_string()];
    let zeros = CMatrix::zeros(dim, dim);
    for prefix in ["initial", "correction", "final"] {
        flatten(prefix, &zeros, &mut header);
    }
    header.extend(["trace", "min_eigenvalue", "coherence", "worst_error"].map(String::from));
    let rows: Vec<(Vec<String>, usize)> = points
        .par_iter()
        .map(|pt| {
            let mut row = vec![num(pt.value)];
            flatten_values(initial.entries(), &mut row);
            let result = build_table(&pt.model, &pt.params)
                .and_then(|table| correction_from_table(&pt.model, &initial, &table, pt.lambda))
                .and_then(|report| assemble_final_state(&initial, &report).map(|s| (report, s)));
            match result {
                Ok((report, state)) => {
                    flatten_values(&report.correction, &mut row);
                    flatten_values(state.entries(), &mut row);
                    row.push(num(state.trace().re));
                    row.push(num(state.min_eigenvalue()));
                    row.push(num(coherence_norm(state.entries())));
                    row.push(num(report.worst_error));
                    (row, 0)
                }
                Err(e) => {
                    log::error!("evolution failed at {} = {}: {e}", cfg.axis_name(), pt.value);
                    row.extend(std::iter::repeat_n("NaN".to_string(), 4 * dim * dim + 4));
                    (row, 1)
                }
            }
        })
        .collect();
    Ok(render(header, rows))
}

/// Forward/backward probabilities, ratio (or `INDETERMINATE`), target
/// `e^{−βΔE}` and residual for every ordered level pair.
pub fn run_edr_sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let points: Vec<Point> = cfg.sweep_values().into_iter().map(|v| cfg.point(v)).collect::<Result<_, _>>()?;
    let header: Vec<String> =
        [cfg.axis_name(), "from", "to", "forward", "backward", "ratio", "target", "residual"].map(String::from).to_vec();
    let blocks: Vec<(Vec<Vec<String>>, usize)> = points
        .par_iter()
        .map(|pt| {
            let d = pt.model.dim();
            let table = match build_table(&pt.model, &pt.params) {
                Ok(t) => t,
                Err(e) => {
                    log::error!("table failed at {} = {}: {e}", cfg.axis_name(), pt.value);
                    return (Vec::new(), 1);
                }
            };
            let mut rows = Vec::new();
            let mut failures = 0;
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    let mut row = vec![num(pt.value), i.to_string(), j.to_string()];
                    match edr_from_table(&pt.model, &table, i, j, pt.lambda) {
                        Ok(v) => {
                            row.push(num(v.forward));
                            row.push(num(v.backward));
                            row.push(match v.ratio {
                                EdrRatio::Value(r) => num(r),
                                EdrRatio::Indeterminate => "INDETERMINATE".to_string(),
                            });
                            row.push(num(v.target));
                            row.push(num(v.residual.unwrap_or(f64::NAN)));
                        }
                        Err(e) => {
                            log::error!("EDR failed for ({i}, {j}): {e}");
                            failures += 1;
                            row.extend(std::iter::repeat_n("NaN".to_string(), 5));
                        }
                    }
                    rows.push(row);
                }
            }
            (rows, failures)
        })
        .collect();
    let mut rows = Vec::new();
    for (block, failures) in blocks {
        let n = block.len();
        for (k, row) in block.into_iter().enumerate() {
            rows.push((row, if k + 1 == n { failures } else { 0 }));
        }
        if n == 0 {
            rows.push((vec!["NaN".to_string(); 8], failures));
        }
    }
    Ok(render(header, rows))
}

/// `W̃(ω)`, `W̃(−ω)`, ratio, target `e^{−2πω/a}` and residual per frequency.
pub fn run_kms_check(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.kms_omegas.is_empty() {
        return Err(config_err("kms.omegas", "at least one frequency is required"));
    }
    let pt = cfg.point(cfg.sweep_values()[0])?;
    let wl = pt.params.worldline;
    let window = cfg.kms_window.unwrap_or(wl.switching_width);
    let header: Vec<String> = [
        "omega", "forward_re", "forward_im", "backward_re", "backward_im", "ratio", "target", "residual", "error",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<(Vec<String>, usize)> = cfg
        .kms_omegas
        .par_iter()
        .map(|&w| {
            let mut row = vec![num(w)];
            let target = (-2.0 * std::f64::consts::PI * w / wl.accel).exp();
            match kms_fourier_ratio(w, &wl, window) {
                Ok(k) => {
                    row.extend([k.forward.re, k.forward.im, k.backward.re, k.backward.im, k.ratio, target].map(num));
                    row.push(num((k.ratio / target - 1.0).abs()));
                    row.push(num(k.error));
                    (row, 0)
                }
                Err(e) => {
                    log::error!("KMS transform failed at ω = {w}: {e}");
                    row.extend(std::iter::repeat_n("NaN".to_string(), 8));
                    (row, 1)
                }
            }
        })
        .collect();
    Ok(render(header, rows))
}

/// Signature of the engine under test in [`oracle_suites_with`].
pub type Engine<'a> = dyn Fn(&DetectorModel, &DensityMatrix, &ResponseIntegralTable) -> crate::Result<CorrectionReport> + Sync + 'a;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub passed: bool,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn relative_deviation(engine: &CMatrix, oracle: &CMatrix) -> f64 {
    max_abs(&(engine - oracle)) / max_abs(oracle)
}

/// 100 reproducible random qutrit states (Ginibre ensemble).
pub fn random_qutrit_states(seed: u64, count: usize) -> Vec<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g = CMatrix::from_fn(3, 3, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let mut rho = &g * g.adjoint();
            let tr = rho.trace();
            rho /= tr;
            // remove rounding asymmetry before validation
            let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
            DensityMatrix::new(rho).expect("Ginibre states are valid")
        })
        .collect()
}

/// Runs the five engine-versus-reference comparisons with the given engine.
pub fn oracle_suites_with(cfg: &RunConfig, engine: &Engine<'_>) -> Result<Vec<SuiteResult>, CliError> {
    let pt = cfg.point(cfg.sweep_values()[0])?;
    let p = pt.params;
    let gap = cfg.gap;
    let num_err = |e: crate::Error| CliError::Numerical(e.to_string());
    let su2 = build_su2_model(1.0, gap).map_err(num_err)?;
    let su2_table = build_table(&su2, &p).map_err(num_err)?;
    let mut results = Vec::new();
    let mut push = |name: &'static str, dev: f64| {
        results.push(SuiteResult { name, max_deviation: dev, passed: dev <= ORACLE_THRESHOLD });
    };

    let mut dev: f64 = 0.0;
    for pops in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.2, 0.3, 0.5], [0.6, 0.1, 0.3]] {
        let init = DensityMatrix::diagonal(&pops).map_err(num_err)?;
        let e = engine(&su2, &init, &su2_table).map_err(num_err)?;
        let o = qutrit_oracle_diagonal(pops[0], pops[1], pops[2], &su2_table).map_err(num_err)?;
        dev = dev.max(relative_deviation(&e.correction, &o.correction));
    }
    push("su2-diagonal", dev);

    let one = Complex64::new(1.0, 0.0);
    let psi = DensityMatrix::pure(&[one, one, Complex64::new(0.0, 0.0)]).map_err(num_err)?;
    let e = engine(&su2, &psi, &su2_table).map_err(num_err)?;
    let o = qutrit_oracle_coherent(&su2_table).map_err(num_err)?;
    push("su2-coherent", relative_deviation(&e.correction, &o.correction));

    let mut dev: f64 = 0.0;
    for state in random_qutrit_states(20_240_601, 100) {
        let m = state.entries();
        let e = engine(&su2, &state, &su2_table).map_err(num_err)?;
        let o = qutrit_oracle_general(m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(0, 1)], m[(0, 2)], m[(1, 2)], &su2_table)
            .map_err(num_err)?;
        dev = dev.max(relative_deviation(&e.correction, &o.correction));
    }
    push("su2-general-random", dev);

    let spin2 = build_su2_model(2.0, gap).map_err(num_err)?;
    let spin2_table = build_table(&spin2, &p).map_err(num_err)?;
    let middle = DensityMatrix::basis(5, 2).map_err(num_err)?;
    let e = engine(&spin2, &middle, &spin2_table).map_err(num_err)?.correction;
    let o = ququint_oracle_middle(&spin2_table).map_err(num_err)?.correction;
    let scale = max_abs(&o);
    let mut dev: f64 = 0.0;
    for r in 0..5 {
        for c in 0..5 {
            let (x, y) = (e[(r, c)], o[(r, c)]);
            if (x == Complex64::new(0.0, 0.0)) != (y == Complex64::new(0.0, 0.0)) {
                dev = f64::INFINITY;
            }
            dev = dev.max((x.norm() - y.norm()).abs() / scale);
        }
    }
    push("ququint-pattern", dev);

    let hw = build_hw_model(3, gap).map_err(num_err)?;
    let hw_table = build_table(&hw, &p).map_err(num_err)?;
    let mut dev: f64 = 0.0;
    for pops in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.3, 0.2]] {
        let init = DensityMatrix::diagonal(&pops).map_err(num_err)?;
        let e = engine(&hw, &init, &hw_table).map_err(num_err)?;
        let o = hw_qutrit_oracle_diagonal(pops[0], pops[1], pops[2], &hw_table).map_err(num_err)?;
        dev = dev.max(relative_deviation(&e.correction, &o.correction));
        dev = dev.max(relative_deviation(&e.one_one, &o.one_one));
    }
    push("hw-diagonal", dev);
    Ok(results)
}

/// The generic second-order engine at unit coupling.
pub fn default_engine(model: &DetectorModel, initial: &DensityMatrix, table: &ResponseIntegralTable) -> crate::Result<CorrectionReport> {
    correction_from_table(model, initial, table, 1.0)
}

pub fn run_oracle_check_with(cfg: &RunConfig, engine: &Engine<'_>) -> Result<Report, CliError> {
    let results = oracle_suites_with(cfg, engine)?;
    let mut text = String::new();
    let mut failures = 0;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        if !r.passed {
            failures += 1;
        }
        let _ = writeln!(
            text,
            "suite {:<20} max deviation {:.3e}  threshold {:.0e}  {verdict}",
            r.name, r.max_deviation, ORACLE_THRESHOLD
        );
    }
    let _ = writeln!(text, "overall {}", if failures == 0 { "PASS" } else { "FAIL" });
    Ok(Report { text, failures })
}

pub fn run_oracle_check(cfg: &RunConfig) -> Result<Report, CliError> {
    run_oracle_check_with(cfg, &default_engine)
}

type Runner = fn(&RunConfig) -> Result<Report, CliError>;

/// Parses the configuration, runs the subcommand and writes its output.
/// Returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let (args, runner): (&IoArgs, Runner) = match &cli.command {
        Command::Integrals(a) => (a, run_integrals),
        Command::Evolve(a) => (a, run_evolve),
        Command::EdrSweep(a) => (a, run_edr_sweep),
        Command::KmsCheck(a) => (a, run_kms_check),
        Command::OracleCheck(a) => (a, run_oracle_check),
    };
    let outcome = RunConfig::load(&args.config).and_then(|cfg| runner(&cfg)).and_then(|report| {
        write_output(args.out.as_deref(), &report.text)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            if report.failures > 0 {
                eprintln!("{} numerical failure(s); affected cells are NaN", report.failures);
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
