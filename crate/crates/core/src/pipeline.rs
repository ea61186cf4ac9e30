//! Config-driven runs: discretize, minimize, build the coefficient oracle,
//! run the LCHS circuit and optionally compare with the classical engines.
//!
//! [`simulate`] and [`validate`] only compute; [`write_artifacts`] writes the
//! CSVs, heatmaps and report afterwards.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::circuit::{box_state_prep, Circuit, LchsOptions, LchsProgram};
use crate::config::{OutputField, RunConfig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mps::{coefficient_train, exact_coefficient_state, fidelity_with_dense, CoefficientTrain, CONTRACT_CAP};
use crate::output::{grid_field_csv, heatmap_ppm, value_range};
use crate::pde::{assemble, decode_field, encode_initial_state, positive_shift, DecodeTarget, DiagonalOperators, Family, PdeProblem};
use crate::qubit_op::{QubitOperator, Statevector, DENSE_CAP};
use crate::reference::{classical_fdm, expm_action, norm_trace, FdmOutput, TimeSeries};

/// Pixels per node in heatmaps.
const HEATMAP_SCALE: usize = 16;

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

fn time_label(step: usize, tau: f64) -> f64 {
    (step as f64 * tau * 1e9).round() / 1e9
}

fn decode_target(f: OutputField) -> DecodeTarget {
    match f {
        OutputField::U => DecodeTarget::U,
        OutputField::UDot => DecodeTarget::UDot,
        OutputField::Raw => DecodeTarget::Raw(0),
    }
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖x − y‖ / ‖y‖`, or the absolute difference when `y` vanishes.
fn relative_l2(x: &[f64], reference: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a - b).collect();
    let r = l2(reference);
    if r > 0.0 {
        l2(&diff) / r
    } else {
        l2(&diff)
    }
}

fn relative_state_error(x: &Statevector, reference: &Statevector) -> f64 {
    let r = reference.norm();
    if r > 0.0 {
        x.distance(reference) / r
    } else {
        x.distance(reference)
    }
}

/// Everything fixed by the config before any circuit is built.
#[derive(Clone, Debug)]
pub struct Discretized {
    pub problem: PdeProblem,
    /// The assembled `A`.
    pub a: QubitOperator,
    /// `A + shift·I`, whose Hermitian part is positive semidefinite.
    pub a_shifted: QubitOperator,
    pub shift: f64,
    pub diagonals: DiagonalOperators,
    pub u0: Vec<f64>,
    pub u_dot0: Option<Vec<f64>>,
    pub w0: Statevector,
    pub snapshot_steps: Vec<usize>,
}

pub fn discretize(cfg: &RunConfig) -> Result<Discretized, StageError> {
    let problem = cfg.problem().stage("grid")?;
    cfg.check_caps(&problem).stage("grid")?;
    let (u0, u_dot0) = cfg.initial_values(problem.grid()).stage("initial state")?;
    let (a, diagonals) = assemble(&problem).stage("discretize")?;
    let (a_shifted, shift) = positive_shift(&a).stage("discretize")?;
    let w0 = encode_initial_state(&problem, &u0, u_dot0.as_deref()).stage("initial state")?;
    let snapshot_steps = cfg.snapshot_steps(problem.tau(), problem.steps()).stage("config")?;
    Ok(Discretized { problem, a, a_shifted, shift, diagonals, u0, u_dot0, w0, snapshot_steps })
}

#[derive(Clone, Debug, Serialize)]
pub struct TermReport {
    pub name: String,
    /// `|I| + 1`.
    pub naive: usize,
    pub minimized: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientReport {
    pub n_anc: usize,
    pub n_frac: usize,
    pub r_phi: usize,
    pub r_psi: usize,
    pub bonds: Vec<usize>,
    /// Against the exact square-rooted weights, when `n_anc` permits.
    pub fidelity: Option<f64>,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub newton_converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GateReport {
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub multi_qubit: usize,
    pub evolutions: usize,
    pub controlled_evolutions: usize,
    pub total: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotReport {
    pub step: usize,
    pub t: f64,
    /// `‖w(t)‖` of the LCHS estimate.
    pub norm: f64,
}

/// One decoded field at one time from one engine.
#[derive(Clone, Debug)]
pub struct FieldSnapshot {
    pub field: OutputField,
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub discretized: Discretized,
    pub coefficients: CoefficientTrain,
    pub program: LchsProgram,
    /// `(step, estimate of w(t))`.
    pub states: Vec<(usize, Statevector)>,
    pub fields: Vec<FieldSnapshot>,
    pub report: RunReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub name: Option<String>,
    pub family: Family,
    pub system_qubits: usize,
    pub ancilla_qubits: usize,
    pub steps: usize,
    pub tau: f64,
    pub t_final: f64,
    /// Constant added to `A` to make its Hermitian part semidefinite.
    pub shift: f64,
    pub w0_norm: f64,
    pub weight_sum: f64,
    pub success_probability: f64,
    pub ancilla_leak: f64,
    pub a_terms: usize,
    pub coefficient: CoefficientReport,
    pub gates: GateReport,
    pub gates_per_step: GateReport,
    pub terms: Vec<TermReport>,
    pub snapshots: Vec<SnapshotReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
}

fn gate_report(c: crate::circuit::GateCounts) -> GateReport {
    GateReport {
        one_qubit: c.one_qubit,
        two_qubit: c.two_qubit,
        multi_qubit: c.multi_qubit,
        evolutions: c.evolutions,
        controlled_evolutions: c.controlled_evolutions,
        total: c.total(),
    }
}

fn build_coefficients(cfg: &RunConfig) -> Result<(CoefficientTrain, CoefficientReport)> {
    let l = &cfg.lchs;
    let ct = coefficient_train(l.n_anc, l.n_frac, &l.coefficient_options())?;
    let fidelity = if l.n_anc <= CONTRACT_CAP {
        Some(fidelity_with_dense(&ct.phi, &exact_coefficient_state(l.n_anc, l.n_frac)?)?)
    } else {
        None
    };
    let report = CoefficientReport {
        n_anc: l.n_anc,
        n_frac: l.n_frac,
        r_phi: l.r_phi,
        r_psi: l.r_psi,
        bonds: ct.phi.bonds(),
        fidelity,
        newton_iterations: ct.newton.iterations(),
        newton_residual: ct.newton.final_residual(),
        newton_converged: ct.newton.converged,
    };
    Ok((ct, report))
}

/// Decode the requested fields of a state; `w` is an estimate of `w(t)`.
fn decode_all(cfg: &RunConfig, p: &PdeProblem, w: &Statevector, t: f64) -> Result<Vec<FieldSnapshot>> {
    cfg.outputs
        .fields
        .iter()
        .map(|&field| Ok(FieldSnapshot { field, t, values: decode_field(w, p, decode_target(field))? }))
        .collect()
}

fn lchs_options(cfg: &RunConfig, snapshot_steps: &[usize]) -> LchsOptions {
    LchsOptions {
        n_frac: cfg.lchs.n_frac,
        order: cfg.lchs.order,
        max_angle: cfg.lchs.max_angle,
        prep: cfg.lchs.oracle_prep(),
        snapshot_steps: snapshot_steps.to_vec(),
    }
}

/// Build and run the LCHS circuit for `d`, returning `(step, w(t))` estimates.
fn run_circuit(
    cfg: &RunConfig,
    d: &Discretized,
    phi: &crate::mps::TensorTrain,
    tau: f64,
    steps: usize,
    snapshot_steps: &[usize],
) -> Result<(LchsProgram, crate::circuit::LchsOutcome, Vec<(usize, Statevector)>)> {
    let program = LchsProgram::build(&d.a_shifted, phi, tau, steps, &lchs_options(cfg, snapshot_steps))?;
    let outcome = program.run(&d.w0, snapshot_steps)?;
    let states = outcome
        .snapshots
        .iter()
        .map(|(s, branch)| {
            let mut w = outcome.rescale(branch);
            w.scale((d.shift * *s as f64 * tau).exp());
            (*s, w)
        })
        .collect();
    Ok((program, outcome, states))
}

/// The circuits of a run, built but not executed.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub discretized: Discretized,
    pub coefficients: CoefficientTrain,
    pub coefficient_report: CoefficientReport,
    pub program: LchsProgram,
    /// Preparation of `w(0)` when the initial condition is a single box the
    /// X/H/CX construction can express.
    pub state_prep: Option<Circuit>,
}

fn single_box(f: &crate::config::FieldConfig) -> Option<(Vec<(usize, usize)>, f64)> {
    match f.regions.as_slice() {
        [r] if f.default == 0.0 && r.value != 0.0 => r.range.as_ref().map(|b| (b.iter().map(|&[lo, hi]| (lo, hi)).collect(), r.value)),
        _ => None,
    }
}

fn initial_box_prep(cfg: &RunConfig, d: &Discretized) -> Option<Circuit> {
    let p = &d.problem;
    let (ranges, block) = match (p.family(), &cfg.initial.u_dot) {
        (Family::FirstOrder, None) => (single_box(&cfg.initial.u)?.0, 0),
        (Family::SecondOrder, Some(u_dot)) if cfg.initial.u.regions.is_empty() && cfg.initial.u.default == 0.0 => {
            // block 0 carries √ρ u̇, uniform on the box only when ρ is
            let (ranges, _) = single_box(u_dot)?;
            if !p.field("rho").ok()?.is_uniform() {
                return None;
            }
            (ranges, 0)
        }
        _ => return None,
    };
    box_state_prep(p.grid(), &p.layout(), &ranges, block).ok()
}

pub fn compile(cfg: &RunConfig) -> Result<Compiled, StageError> {
    let discretized = discretize(cfg)?;
    let p = &discretized.problem;
    let (coefficients, coefficient_report) = build_coefficients(cfg).stage("coefficient oracle")?;
    let program = LchsProgram::build(&discretized.a_shifted, &coefficients.phi, p.tau(), p.steps(), &lchs_options(cfg, &[]))
        .stage("lchs")?;
    let state_prep = initial_box_prep(cfg, &discretized);
    Ok(Compiled { discretized, coefficients, coefficient_report, program, state_prep })
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation, StageError> {
    let d = discretize(cfg)?;
    let p = &d.problem;
    let mut terms: Vec<TermReport> = d
        .diagonals
        .encodings
        .iter()
        .map(|(name, e)| TermReport { name: name.clone(), naive: e.naive_terms, minimized: e.cover.term_count() })
        .collect();
    terms.sort_by(|a, b| a.name.cmp(&b.name));
    let (coefficients, coefficient_report) = build_coefficients(cfg).stage("coefficient oracle")?;
    let (program, outcome, states) =
        run_circuit(cfg, &d, &coefficients.phi, p.tau(), p.steps(), &d.snapshot_steps).stage("lchs")?;
    let mut fields = Vec::new();
    let mut snapshots = Vec::new();
    for (s, w) in &states {
        let t = time_label(*s, p.tau());
        fields.extend(decode_all(cfg, p, w, t).stage("decode")?);
        snapshots.push(SnapshotReport { step: *s, t, norm: w.norm() });
    }
    let report = RunReport {
        name: cfg.name.clone(),
        family: p.family(),
        system_qubits: program.n_system,
        ancilla_qubits: program.n_ancilla,
        steps: p.steps(),
        tau: p.tau(),
        t_final: p.t_final(),
        shift: d.shift,
        w0_norm: outcome.w0_norm,
        weight_sum: outcome.weight_sum,
        success_probability: outcome.success_probability,
        ancilla_leak: outcome.ancilla_leak,
        a_terms: d.a.len(),
        coefficient: coefficient_report,
        gates: gate_report(program.counts()),
        gates_per_step: gate_report(program.step.counts()),
        terms,
        snapshots,
        validation: None,
    };
    Ok(Simulation { discretized: d, coefficients, program, states, fields, report })
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub t: f64,
    pub field: OutputField,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lchs_vs_dense: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lchs_vs_fdm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fdm_vs_dense: Option<f64>,
    /// `‖LCHS field‖ / ‖dense field‖`; below 1 means the LCHS magnitude is smaller.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub magnitude_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StateError {
    pub t: f64,
    /// `‖w_LCHS − w_dense‖ / ‖w_dense‖` over the whole state.
    pub relative_l2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// LCHS-vs-dense state errors at `T`.
    pub error: f64,
    pub error_half_tau: f64,
    /// `log₂(error / error_half_tau)`.
    pub tau_order: f64,
    /// The same for the normalized states, which removes the constant
    /// amplitude bias of the truncated quadrature and leaves the time
    /// discretization error.
    pub direction_error: f64,
    pub direction_error_half_tau: f64,
    pub direction_tau_order: f64,
    pub error_more_ancillas: f64,
    pub n_anc_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct ValidationReport {
    pub comparisons: Vec<Comparison>,
    pub state_errors: Vec<StateError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    pub fdm_warnings: Vec<String>,
    /// Engines that were skipped and why.
    pub notices: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Validation {
    pub simulation: Simulation,
    pub dense_fields: Vec<FieldSnapshot>,
    pub fdm_fields: Vec<FieldSnapshot>,
    pub dense_norms: Option<TimeSeries>,
}

/// Field values the FDM run provides for one output field.
fn fdm_field(p: &PdeProblem, out: &FdmOutput, i: usize, field: OutputField) -> Option<Vec<f64>> {
    let n = p.grid().n_nodes();
    match (p.family(), field) {
        (_, OutputField::U) => Some(out.u.states[i].clone()),
        (Family::SecondOrder, OutputField::UDot) => out.u_dot.as_ref().map(|s| s.states[i].clone()),
        (Family::SecondOrder, OutputField::Raw) => {
            let rho = p.field("rho").ok()?.values(n);
            out.u_dot.as_ref().map(|s| s.states[i].iter().zip(&rho).map(|(v, r)| v * r.sqrt()).collect())
        }
        (Family::FirstOrder, OutputField::Raw) => Some(out.u.states[i].clone()),
        (Family::FirstOrder, OutputField::UDot) => None,
    }
}

fn dense_state(d: &Discretized, t: f64) -> Result<Statevector> {
    Statevector::from_amplitudes(d.w0.n_qubits(), expm_action(&d.a, t, d.w0.amplitudes())?)
}

pub fn validate(cfg: &RunConfig) -> Result<Validation, StageError> {
    let mut sim = simulate(cfg)?;
    let d = &sim.discretized;
    let p = &d.problem;
    let mut report = ValidationReport::default();
    let use_dense = cfg.validation.dense && d.w0.n_qubits() <= DENSE_CAP;
    if cfg.validation.dense && !use_dense {
        report.notices.push(format!("dense comparison skipped: {} qubits exceed the cap of {DENSE_CAP}", d.w0.n_qubits()));
    }

    let mut dense_fields = Vec::new();
    let mut dense_norms = None;
    if use_dense {
        for (s, w) in &sim.states {
            let t = time_label(*s, p.tau());
            let exact = dense_state(d, *s as f64 * p.tau()).stage("dense reference")?;
            report.state_errors.push(StateError { t, relative_l2: relative_state_error(w, &exact) });
            dense_fields.extend(decode_all(cfg, p, &exact, t).stage("dense reference")?);
        }
        dense_norms = Some(norm_trace(&d.a, d.w0.amplitudes(), p.t_final(), cfg.validation.norm_samples).stage("dense reference")?);
    }

    let mut fdm_fields = Vec::new();
    if cfg.validation.fdm {
        let tau_fdm = cfg.validation.tau_fdm.unwrap_or(p.tau());
        let times: Vec<f64> = sim.states.iter().map(|(s, _)| time_label(*s, p.tau())).collect();
        let out = classical_fdm(p, &d.u0, d.u_dot0.as_deref(), &times, tau_fdm).stage("fdm reference")?;
        report.fdm_warnings = out.warnings.clone();
        for (i, &t) in times.iter().enumerate() {
            for &field in &cfg.outputs.fields {
                match fdm_field(p, &out, i, field) {
                    Some(values) => fdm_fields.push(FieldSnapshot { field, t, values }),
                    None => report.notices.push(format!("fdm has no `{}` field", field.label())),
                }
            }
        }
        report.notices.dedup();
    }

    let find = |list: &[FieldSnapshot], f: &FieldSnapshot| list.iter().find(|x| x.field == f.field && x.t == f.t).map(|x| x.values.clone());
    for f in &sim.fields {
        let dense = find(&dense_fields, f);
        let fdm = find(&fdm_fields, f);
        report.comparisons.push(Comparison {
            t: f.t,
            field: f.field,
            lchs_vs_dense: dense.as_ref().map(|x| relative_l2(&f.values, x)),
            lchs_vs_fdm: fdm.as_ref().map(|x| relative_l2(&f.values, x)),
            fdm_vs_dense: fdm.as_ref().zip(dense.as_ref()).map(|(x, y)| relative_l2(x, y)),
            magnitude_ratio: dense.as_ref().filter(|x| l2(x) > 0.0).map(|x| l2(&f.values) / l2(x)),
        });
    }

    if cfg.validation.convergence {
        if use_dense {
            report.convergence = Some(convergence(cfg, &sim).stage("convergence")?);
        } else {
            report.notices.push("convergence study skipped: it needs the dense reference".into());
        }
    }
    sim.report.validation = Some(report);
    Ok(Validation { simulation: sim, dense_fields, fdm_fields, dense_norms })
}

fn convergence(cfg: &RunConfig, sim: &Simulation) -> Result<ConvergenceReport> {
    let d = &sim.discretized;
    let p = &d.problem;
    let exact = dense_state(d, p.t_final())?;
    let exact_dir = exact.normalized()?.0;
    let errors_at_end = |states: &[(usize, Statevector)]| -> Result<(f64, f64)> {
        let (_, w) = states.last().ok_or_else(|| Error::Numerical("no final state".into()))?;
        Ok((relative_state_error(w, &exact), w.normalized()?.0.distance(&exact_dir)))
    };
    let (error, direction_error) = match sim.states.last() {
        Some((s, _)) if *s == p.steps() => errors_at_end(&sim.states)?,
        _ => errors_at_end(&run_circuit(cfg, d, &sim.coefficients.phi, p.tau(), p.steps(), &[p.steps()])?.2)?,
    };
    let (_, _, half) = run_circuit(cfg, d, &sim.coefficients.phi, p.tau() / 2.0, 2 * p.steps(), &[2 * p.steps()])?;
    let (error_half_tau, direction_error_half_tau) = errors_at_end(&half)?;
    let mut wider = cfg.clone();
    wider.lchs.n_anc += 2;
    let (ct, _) = build_coefficients(&wider)?;
    let (_, _, more) = run_circuit(&wider, d, &ct.phi, p.tau(), p.steps(), &[p.steps()])?;
    let (error_more_ancillas, _) = errors_at_end(&more)?;
    Ok(ConvergenceReport {
        error,
        error_half_tau,
        tau_order: (error / error_half_tau).log2(),
        direction_error,
        direction_error_half_tau,
        direction_tau_order: (direction_error / direction_error_half_tau).log2(),
        error_more_ancillas,
        n_anc_ratio: error / error_more_ancillas,
    })
}

fn file_time(t: f64) -> String {
    format!("{t}")
}

fn write(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes)?;
    written.push(path);
    Ok(())
}

fn write_fields(
    dir: &Path,
    grid: &Grid,
    groups: &[(&str, &[FieldSnapshot])],
    heatmaps: bool,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    for (suffix, fields) in groups {
        for f in fields.iter() {
            let stem = format!("{}_t{}{suffix}", f.field.label(), file_time(f.t));
            write(dir, &format!("{stem}.csv"), grid_field_csv(grid, &f.values)?.as_bytes(), written)?;
        }
    }
    if heatmaps && grid.dim() <= 2 {
        // one color range per field across engines and times
        for (suffix, fields) in groups {
            for f in fields.iter() {
                let range = value_range(
                    groups.iter().flat_map(|(_, g)| g.iter()).filter(|x| x.field == f.field).map(|x| x.values.as_slice()),
                );
                let stem = format!("{}_t{}{suffix}", f.field.label(), file_time(f.t));
                write(dir, &format!("{stem}.ppm"), &heatmap_ppm(grid, &f.values, range, HEATMAP_SCALE)?, written)?;
            }
        }
    }
    Ok(())
}

fn norms_csv(report: &RunReport) -> String {
    let mut out = String::from("t,norm\n");
    for s in &report.snapshots {
        out.push_str(&format!("{},{:.15e}\n", s.t, s.norm));
    }
    out
}

/// Write every artifact of a run into `dir`, returning the paths written.
pub fn write_artifacts(cfg: &RunConfig, sim: &Simulation, validation: Option<&Validation>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let grid = sim.discretized.problem.grid();
    let mut groups: Vec<(&str, &[FieldSnapshot])> = vec![("", &sim.fields)];
    if let Some(v) = validation {
        groups.push(("_dense", &v.dense_fields));
        groups.push(("_fdm", &v.fdm_fields));
    }
    write_fields(dir, grid, &groups, cfg.outputs.heatmaps, &mut written)?;
    write(dir, "norms.csv", norms_csv(&sim.report).as_bytes(), &mut written)?;
    if let Some(trace) = validation.and_then(|v| v.dense_norms.as_ref()) {
        write(dir, "norms_dense.csv", trace.norm_csv().as_bytes(), &mut written)?;
    }
    write(dir, "coefficients.train", sim.coefficients.phi.to_text().as_bytes(), &mut written)?;
    if cfg.outputs.circuit {
        write(dir, "circuit_coef.txt", sim.program.coef.to_text().as_bytes(), &mut written)?;
        write(dir, "circuit_step.txt", sim.program.step.to_text().as_bytes(), &mut written)?;
    }
    let report = toml::to_string(&sim.report).map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
    write(dir, "report.toml", report.as_bytes(), &mut written)?;
    Ok(written)
}
