//! Run configuration read from TOML.
//!
//! ```toml
//! schema = 1
//!
//! [problem]
//! family = "first-order"
//! grid = { n_bits = [4, 4], h = 1.0 }
//! boundary = [["dirichlet", "dirichlet"], ["dirichlet", "dirichlet"]]
//! time = { T = 10.0, tau = 0.1 }
//! fields.kappa = { default = 0.1 }
//!
//! [initial.u]
//! regions = [{ box = [[6, 8], [6, 10]], value = 0.3535533905932738 }]
//!
//! [lchs]
//! n_anc = 8
//! r_phi = 2
//!
//! [outputs]
//! times = [0.0, 5.0, 10.0]
//! ```
//!
//! Fields left out default to `rho = 1` and `0` for everything else. A
//! second-order problem may give the sound speed `c` instead of `rho`, in
//! which case `rho = 1/c²` and `kappa` defaults to 1.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{OraclePrep, TrotterOrder};
use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, BoundarySpec, Grid, PiecewiseField, Region};
use crate::mps::CoefficientOptions;
use crate::pde::{Family, PdeProblem};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest register (system plus ancilla) a run may simulate.
pub const MAX_RUN_QUBITS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub problem: ProblemConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub lchs: LchsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub family: Family,
    pub grid: GridConfig,
    /// `[lower, upper]` per axis.
    pub boundary: Vec<[BoundaryKind; 2]>,
    pub time: TimeConfig,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Optional, checked against `n_bits` when present.
    #[serde(default)]
    pub d: Option<usize>,
    pub n_bits: Vec<usize>,
    #[serde(default = "one")]
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub tau: f64,
}

/// A piecewise-constant field: a default plus constant regions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
}

/// Either a box of half-open ranges per axis or an explicit node list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub value: f64,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub range: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub u: FieldConfig,
    #[serde(default)]
    pub u_dot: Option<FieldConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LchsConfig {
    pub n_anc: usize,
    pub n_frac: usize,
    pub r_phi: usize,
    pub r_psi: usize,
    pub tol: f64,
    /// `χ = 2` layers for coefficient trains with wider bonds; exact
    /// sequential gates when absent.
    pub layers: Option<usize>,
    pub order: TrotterOrder,
    pub max_angle: f64,
    pub sweeps: usize,
}

impl Default for LchsConfig {
    fn default() -> Self {
        LchsConfig {
            n_anc: 8,
            n_frac: 1,
            r_phi: 2,
            r_psi: 10,
            tol: 1e-6,
            layers: None,
            order: TrotterOrder::Second,
            max_angle: 0.1,
            sweeps: 10,
        }
    }
}

impl LchsConfig {
    pub fn coefficient_options(&self) -> CoefficientOptions {
        CoefficientOptions { r_psi: self.r_psi, r_phi: self.r_phi, tol: self.tol, sweeps: self.sweeps, ..Default::default() }
    }

    pub fn oracle_prep(&self) -> OraclePrep {
        self.layers.map_or(OraclePrep::Sequential, OraclePrep::Layered)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputField {
    /// The solution `u`.
    U,
    /// `∂u/∂t`, second order only.
    UDot,
    /// Block 0 of the state as stored, without dividing by a coefficient.
    Raw,
}

impl OutputField {
    pub fn label(self) -> &'static str {
        match self {
            OutputField::U => "u",
            OutputField::UDot => "u_dot",
            OutputField::Raw => "raw",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Snapshot times; each must be a multiple of `tau` in `[0, T]`.
    pub times: Vec<f64>,
    /// Relative paths are taken from the working directory.
    pub directory: PathBuf,
    pub fields: Vec<OutputField>,
    pub heatmaps: bool,
    /// Also write the gate list of one step and of the oracles.
    pub circuit: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            times: Vec::new(),
            directory: PathBuf::from("out"),
            fields: vec![OutputField::U],
            heatmaps: false,
            circuit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Dense `exp(−At)` reference, skipped above the dense cap.
    pub dense: bool,
    pub fdm: bool,
    /// FDM time step; `tau` when absent.
    pub tau_fdm: Option<f64>,
    /// Rerun with `tau/2` and with `n_anc + 2` and report error ratios.
    pub convergence: bool,
    pub norm_samples: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { dense: true, fdm: true, tau_fdm: None, convergence: false, norm_samples: 20 }
    }
}

fn one() -> f64 {
    1.0
}

fn field(name: &str, cfg: &FieldConfig, grid: &Grid) -> Result<PiecewiseField> {
    let mut regions = Vec::with_capacity(cfg.regions.len());
    for (i, r) in cfg.regions.iter().enumerate() {
        let region = match (&r.range, &r.nodes) {
            (Some(b), None) => {
                let ranges: Vec<(usize, usize)> = b.iter().map(|&[lo, hi]| (lo, hi)).collect();
                Region::from_box(grid, &ranges, r.value)?
            }
            (None, Some(nodes)) => Region::new(nodes.clone(), r.value),
            _ => {
                return Err(Error::Config(format!("field `{name}` region {i} needs exactly one of `box` and `nodes`")));
            }
        };
        regions.push(region);
    }
    PiecewiseField::new(name, cfg.default, regions)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn check(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema {} is not supported (expected {SCHEMA_VERSION})", self.schema)));
        }
        let g = &self.problem.grid;
        if let Some(d) = g.d {
            if d != g.n_bits.len() {
                return Err(Error::Grid(format!("d = {d} but n_bits has {} entries", g.n_bits.len())));
            }
        }
        let l = &self.lchs;
        if l.n_anc == 0 || l.n_frac >= l.n_anc || l.r_phi == 0 || l.r_psi < 2 || !(l.tol > 0.0) || !(l.max_angle > 0.0) {
            return Err(Error::Config(format!(
                "lchs parameters out of range: n_anc {}, n_frac {}, r_phi {}, r_psi {}, tol {}, max_angle {}",
                l.n_anc, l.n_frac, l.r_phi, l.r_psi, l.tol, l.max_angle
            )));
        }
        if l.layers == Some(0) {
            return Err(Error::Config("lchs.layers must be at least 1".into()));
        }
        let allowed: &[&str] = match self.problem.family {
            Family::SecondOrder => &["rho", "c", "zeta", "kappa", "alpha"],
            Family::FirstOrder => &["kappa", "alpha"],
        };
        for name in self.problem.fields.keys() {
            let beta = self.problem.family == Family::FirstOrder
                && name.strip_prefix("beta").and_then(|m| m.parse::<usize>().ok()).is_some_and(|m| m < g.n_bits.len());
            if !allowed.contains(&name.as_str()) && !beta {
                return Err(Error::Config(format!("unknown field `{name}` for a {:?} problem", self.problem.family)));
            }
        }
        if self.problem.fields.contains_key("c") && self.problem.fields.contains_key("rho") {
            return Err(Error::Config("give either `rho` or `c`, not both".into()));
        }
        if self.initial.u_dot.is_some() && self.problem.family == Family::FirstOrder {
            return Err(Error::Config("initial.u_dot is only used by second-order problems".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.problem.grid.n_bits.clone(), self.problem.grid.h)
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        let grid = self.grid()?;
        let boundary = BoundarySpec::new(self.problem.boundary.iter().map(|&[lo, hi]| (lo, hi)).collect())?;
        let fields = &self.problem.fields;
        let get = |name: &str, fallback: f64| -> Result<PiecewiseField> {
            match fields.get(name) {
                Some(cfg) => field(name, cfg, &grid),
                None => Ok(PiecewiseField::uniform(name, fallback)),
            }
        };
        let time = &self.problem.time;
        match self.problem.family {
            Family::SecondOrder => {
                let (rho, kappa_default) = match fields.get("c") {
                    Some(cfg) => {
                        let c = field("c", cfg, &grid)?;
                        if c.min_value() <= 0.0 {
                            return Err(Error::Field { name: "c".into(), reason: "must be > 0 everywhere".into() });
                        }
                        (c.map("rho", |x| 1.0 / (x * x)), 1.0)
                    }
                    None => (get("rho", 1.0)?, 0.0),
                };
                PdeProblem::second_order(
                    grid.clone(),
                    boundary,
                    rho,
                    get("zeta", 0.0)?,
                    get("kappa", kappa_default)?,
                    get("alpha", 0.0)?,
                    time.t_final,
                    time.tau,
                )
            }
            Family::FirstOrder => {
                let beta = (0..grid.dim()).map(|mu| get(&format!("beta{mu}"), 0.0)).collect::<Result<Vec<_>>>()?;
                PdeProblem::first_order(grid.clone(), boundary, get("kappa", 0.0)?, beta, get("alpha", 0.0)?, time.t_final, time.tau)
            }
        }
    }

    /// Node values of `u(0)` and, when given, `u̇(0)`.
    pub fn initial_values(&self, grid: &Grid) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n = grid.n_nodes();
        let u = field("u", &self.initial.u, grid)?;
        u.check_grid(grid)?;
        let u_dot = match &self.initial.u_dot {
            Some(cfg) => {
                let f = field("u_dot", cfg, grid)?;
                f.check_grid(grid)?;
                Some(f.values(n))
            }
            None => None,
        };
        Ok((u.values(n), u_dot))
    }

    /// Snapshot times as step indices, sorted and deduplicated.
    pub fn snapshot_steps(&self, tau: f64, steps: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.outputs.times.len());
        for &t in &self.outputs.times {
            let s = (t / tau).round();
            if !(t >= 0.0) || (t / tau - s).abs() > 1e-9 * s.max(1.0) || s as usize > steps {
                return Err(Error::Config(format!("snapshot time {t} is not a multiple of tau = {tau} in [0, T]")));
            }
            out.push(s as usize);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Register width of the LCHS circuit, checked against [`MAX_RUN_QUBITS`].
    pub fn check_caps(&self, p: &PdeProblem) -> Result<usize> {
        let total = p.layout().total_qubits() + self.lchs.n_anc;
        if total > MAX_RUN_QUBITS {
            return Err(Error::CapExceeded { what: format!("{total}-qubit LCHS register"), cap: MAX_RUN_QUBITS });
        }
        Ok(total)
    }
}

/// A field read for minimization: node values on `n_bits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub n_bits: usize,
    pub values: Vec<f64>,
}

fn log2_exact(n: usize, what: &str) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Parse(format!("{what} {n} is not a power of two")));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Parse a plain PBM bitmap (`P1`) or `index,value` CSV rows.
///
/// Bitmap pixel `(col, row)` is node `col + width·(height − 1 − row)`, so
/// axis 0 runs left to right and axis 1 bottom to top; set pixels get value
/// 1. CSV input needs `n_bits`; unlisted nodes take `default`.
pub fn parse_field_file(text: &str, n_bits: Option<usize>, default: f64) -> Result<FieldFile> {
    let body: String = text.lines().map(|l| l.split('#').next().unwrap_or("")).collect::<Vec<_>>().join("\n");
    if body.trim_start().starts_with("P1") {
        let mut tokens = body.split_whitespace().skip(1);
        let mut dim = |what: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bitmap {what} missing")))
        };
        let (w, h) = (dim("width")?, dim("height")?);
        let bits = log2_exact(w, "bitmap width")? + log2_exact(h, "bitmap height")?;
        if n_bits.is_some_and(|n| n != bits) {
            return Err(Error::Parse(format!("a {w}x{h} bitmap has {bits} bits, not {}", n_bits.unwrap_or(0))));
        }
        let pixels: Vec<char> = body.split_whitespace().skip(3).flat_map(str::chars).collect();
        if pixels.len() != w * h {
            return Err(Error::Parse(format!("bitmap has {} pixels, expected {}", pixels.len(), w * h)));
        }
        let mut values = vec![0.0; w * h];
        for (i, ch) in pixels.iter().enumerate() {
            let (row, col) = (i / w, i % w);
            values[col + w * (h - 1 - row)] = match ch {
                '0' => 0.0,
                '1' => 1.0,
                _ => return Err(Error::Parse(format!("bitmap pixel `{ch}` is not 0 or 1"))),
            };
        }
        return Ok(FieldFile { n_bits: bits, values });
    }
    let n_bits = n_bits.ok_or_else(|| Error::Parse("CSV fields need the number of bits".into()))?;
    if n_bits > 24 {
        return Err(Error::CapExceeded { what: format!("{n_bits}-bit field"), cap: 24 });
    }
    let mut values = vec![default; 1 << n_bits];
    for (lineno, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (a, b) = (parts.next().unwrap_or(""), parts.next());
        let parsed = b.and_then(|b| Some((a.parse::<usize>().ok()?, b.parse::<f64>().ok()?)));
        match parsed {
            Some((j, v)) if parts.next().is_none() => {
                if j >= values.len() {
                    return Err(Error::IndexOutOfRange { index: j, bits: n_bits });
                }
                values[j] = v;
            }
            // a header line is allowed before the data
            None if lineno == 0 => {}
            _ => return Err(Error::Parse(format!("line {}: expected `index,value`, got `{line}`", lineno + 1))),
        }
    }
    Ok(FieldFile { n_bits, values })
}
