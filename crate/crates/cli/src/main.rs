//! `lchs` command-line driver.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lchs_core::circuit::{coefficient_oracle, OraclePrep};
use lchs_core::config::{parse_field_file, RunConfig};
use lchs_core::grid::{PiecewiseField, Region};
use lchs_core::logic_min::{field_to_operator, FieldTransform};
use lchs_core::mps::{coefficient_train, exact_coefficient_state, fidelity_with_dense, CoefficientOptions, TensorTrain, CONTRACT_CAP};
use lchs_core::pipeline::{self, StageError};
use lchs_core::Error;

#[derive(Parser)]
#[command(name = "lchs", version, about = "Solve piecewise-constant PDEs with LCHS circuits")]
struct Cli {
    /// Output directory; overrides the one in the config.
    #[arg(long, short, global = true, env = "LCHS_OUTPUT_DIR")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the LCHS circuit and write field snapshots and a report.
    Simulate { config: PathBuf },
    /// Run the circuit, the dense exponential and the FDM baseline and compare them.
    Validate { config: PathBuf },
    /// Write the gate lists of the coefficient oracle, one step and the initial state preparation.
    ExportCircuit { config: PathBuf },
    /// Minimize a field given as a plain PBM bitmap or `index,value` CSV.
    Minimize {
        field: PathBuf,
        /// Qubits of the field; required for CSV input.
        #[arg(long)]
        n_bits: Option<usize>,
        /// Value of nodes a CSV leaves out.
        #[arg(long, default_value_t = 0.0)]
        default: f64,
    },
    /// Build the coefficient train and report its fidelity and gate count.
    CoefOracle {
        #[arg(long, default_value_t = 8)]
        n_anc: usize,
        #[arg(long, default_value_t = 1)]
        n_frac: usize,
        #[arg(long, default_value_t = 10)]
        r_psi: usize,
        #[arg(long, default_value_t = 2)]
        r_phi: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Prepare wide bonds with this many `χ = 2` layers instead of exact gates.
        #[arg(long)]
        layers: Option<usize>,
        /// Directory of cached trains, keyed by the parameters.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

/// A failure with the stage that raised it.
struct Failure {
    stage: &'static str,
    error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure { stage: e.stage, error: e.error }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

fn load(path: &Path, output: &Option<PathBuf>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path).stage("config")?;
    if let Some(dir) = output {
        cfg.outputs.directory = dir.clone();
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(Error::from).stage("output")
}

fn print_written(files: &[PathBuf]) {
    println!("wrote {} files", files.len());
    for f in files {
        println!("  {}", f.display());
    }
}

fn simulate(path: &Path, output: &Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(path, output)?;
    let sim = pipeline::simulate(&cfg)?;
    let r = &sim.report;
    println!(
        "{} system + {} ancilla qubits, {} steps, success probability {:.6e}",
        r.system_qubits, r.ancilla_qubits, r.steps, r.success_probability
    );
    for t in &r.terms {
        println!("field {}: {} terms naive, {} minimized", t.name, t.naive, t.minimized);
    }
    for s in &r.snapshots {
        println!("t = {}: |w| = {:.6e}", s.t, s.norm);
    }
    let files = pipeline::write_artifacts(&cfg, &sim, None, &cfg.outputs.directory).stage("output")?;
    print_written(&files);
    Ok(())
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

fn validate(path: &Path, output: &Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(path, output)?;
    let v = pipeline::validate(&cfg)?;
    let r = &v.simulation.report;
    println!("success probability {:.6e}", r.success_probability);
    if let Some(val) = &r.validation {
        for n in &val.notices {
            println!("notice: {n}");
        }
        for w in &val.fdm_warnings {
            println!("fdm warning: {w}");
        }
        println!("{:>8} {:>6} {:>11} {:>11} {:>11} {:>9}", "t", "field", "lchs-dense", "lchs-fdm", "fdm-dense", "ratio");
        for c in &val.comparisons {
            println!(
                "{:>8} {:>6} {:>11} {:>11} {:>11} {:>9}",
                c.t,
                c.field.label(),
                show(c.lchs_vs_dense),
                show(c.lchs_vs_fdm),
                show(c.fdm_vs_dense),
                c.magnitude_ratio.map_or_else(|| "-".into(), |m| format!("{m:.5}"))
            );
        }
        if let Some(conv) = &val.convergence {
            println!("tau halving: error {:.3e} -> {:.3e}, order {:.2}", conv.error, conv.error_half_tau, conv.tau_order);
            println!(
                "tau halving, normalized states: error {:.3e} -> {:.3e}, order {:.2}",
                conv.direction_error, conv.direction_error_half_tau, conv.direction_tau_order
            );
            println!("n_anc + 2: error {:.3e} -> {:.3e}, ratio {:.3}", conv.error, conv.error_more_ancillas, conv.n_anc_ratio);
        }
    }
    let files = pipeline::write_artifacts(&cfg, &v.simulation, Some(&v), &cfg.outputs.directory).stage("output")?;
    print_written(&files);
    Ok(())
}

fn export_circuit(path: &Path, output: &Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(path, output)?;
    let c = pipeline::compile(&cfg)?;
    let dir = &cfg.outputs.directory;
    std::fs::create_dir_all(dir).map_err(Error::from).stage("output")?;
    let p = &c.program;
    let mut files = vec![
        (dir.join("circuit_coef.txt"), p.coef.to_text()),
        (dir.join("circuit_coef_adjoint.txt"), p.coef_adjoint.to_text()),
        (dir.join("circuit_step.txt"), p.step.to_text()),
    ];
    if let Some(prep) = &c.state_prep {
        files.push((dir.join("circuit_state_prep.txt"), prep.to_text()));
    }
    for (path, text) in &files {
        write_file(path, text)?;
    }
    let k = p.counts();
    println!("{} system + {} ancilla qubits, {} steps", p.n_system, p.n_ancilla, p.steps);
    println!(
        "gates: {} one-qubit, {} two-qubit, {} multi-qubit, {} evolutions, {} controlled evolutions",
        k.one_qubit, k.two_qubit, k.multi_qubit, k.evolutions, k.controlled_evolutions
    );
    if c.state_prep.is_none() {
        println!("initial state is not a single box; no preparation circuit written");
    }
    print_written(&files.into_iter().map(|(p, _)| p).collect::<Vec<_>>());
    Ok(())
}

/// Most frequent value, smallest first on ties.
fn majority(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (0, sorted[0]);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| v.to_bits() == sorted[i].to_bits()).count();
        if j > best.0 {
            best = (j, sorted[i]);
        }
        i += j;
    }
    best.1
}

fn minimize(path: &Path, n_bits: Option<usize>, default: f64) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(Error::from).stage("field")?;
    let f = parse_field_file(&text, n_bits, default).stage("field")?;
    let base = majority(&f.values);
    let mut classes: Vec<(f64, Vec<usize>)> = Vec::new();
    for (j, &v) in f.values.iter().enumerate() {
        if v.to_bits() == base.to_bits() {
            continue;
        }
        match classes.iter_mut().find(|(c, _)| c.to_bits() == v.to_bits()) {
            Some((_, nodes)) => nodes.push(j),
            None => classes.push((v, vec![j])),
        }
    }
    let regions = classes.into_iter().map(|(v, nodes)| Region::new(nodes, v)).collect();
    let field = PiecewiseField::new("field", base, regions).stage("field")?;
    let enc = field_to_operator(&field, f.n_bits, FieldTransform::Identity).stage("minimize")?;

    println!("default {base}");
    for c in &enc.cover.cubes {
        println!("{c}");
    }
    println!("operator:");
    print!("{}", enc.operator.to_text());
    println!("terms: {} naive, {} minimized", enc.naive_terms, enc.cover.term_count());
    let diag = enc.operator.diagonal();
    let exact = f
        .values
        .iter()
        .enumerate()
        .all(|(j, &v)| enc.cover.evaluate(j) == v && (diag[j].re - v).abs() <= 1e-12 * v.abs().max(1.0) && diag[j].im == 0.0);
    if !exact {
        return Err(Failure { stage: "verify", error: Error::Numerical("cover does not reproduce the field".into()) });
    }
    println!("verified: exact on all {} nodes", f.values.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn coef_oracle(
    n_anc: usize,
    n_frac: usize,
    r_psi: usize,
    r_phi: usize,
    tol: f64,
    layers: Option<usize>,
    cache: Option<PathBuf>,
    output: &Option<PathBuf>,
) -> Result<(), Failure> {
    if n_anc == 0 || r_psi == 0 || r_phi == 0 || !(tol > 0.0) || layers == Some(0) {
        return Err(Failure { stage: "config", error: Error::Config("parameters must be positive".into()) });
    }
    let opts = CoefficientOptions { r_psi, r_phi, tol, ..Default::default() };
    let key = format!("coef_n{n_anc}_f{n_frac}_psi{r_psi}_phi{r_phi}_tol{tol:e}.train");
    let cached = cache.as_ref().map(|d| d.join(&key)).filter(|p| p.exists());
    let phi = match &cached {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(Error::from).stage("cache")?;
            let phi = TensorTrain::from_text(&text).stage("cache")?;
            if phi.n_sites() != n_anc {
                return Err(Failure { stage: "cache", error: Error::Parse(format!("{} has {} sites", p.display(), phi.n_sites())) });
            }
            println!("loaded {}", p.display());
            phi
        }
        None => {
            let ct = coefficient_train(n_anc, n_frac, &opts).stage("coefficient train")?;
            println!(
                "newton: {} iterations, residual {:.3e}{}",
                ct.newton.iterations(),
                ct.newton.final_residual(),
                if ct.newton.converged { "" } else { " (not converged)" }
            );
            ct.phi
        }
    };
    println!("bonds {:?}", phi.bonds());
    if n_anc <= CONTRACT_CAP {
        let exact = exact_coefficient_state(n_anc, n_frac).stage("coefficient train")?;
        let fid = fidelity_with_dense(&phi, &exact).stage("coefficient train")?;
        println!("fidelity {fid:.12}");
    } else {
        println!("fidelity not computed above {CONTRACT_CAP} ancillas");
    }
    let prep = layers.map_or(OraclePrep::Sequential, OraclePrep::Layered);
    let oracle = coefficient_oracle(&phi, prep).stage("coefficient oracle")?;
    let k = oracle.circuit.counts();
    println!("oracle gates: {} one-qubit, {} two-qubit, {} multi-qubit", k.one_qubit, k.two_qubit, k.multi_qubit);

    let text = phi.to_text();
    if let Some(dir) = &cache {
        if cached.is_none() {
            std::fs::create_dir_all(dir).map_err(Error::from).stage("cache")?;
            write_file(&dir.join(&key), &text)?;
        }
    }
    let dir = output.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(Error::from).stage("output")?;
    let path = dir.join("coefficients.train");
    write_file(&path, &text)?;
    write_file(&dir.join("circuit_coef.txt"), &oracle.circuit.to_text())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config } => simulate(&config, &cli.output),
        Command::Validate { config } => validate(&config, &cli.output),
        Command::ExportCircuit { config } => export_circuit(&config, &cli.output),
        Command::Minimize { field, n_bits, default } => minimize(&field, n_bits, default),
        Command::CoefOracle { n_anc, n_frac, r_psi, r_phi, tol, layers, cache } => {
            coef_oracle(n_anc, n_frac, r_psi, r_phi, tol, layers, cache, &cli.output)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.error.exit_code() as u8)
        }
    }
}
