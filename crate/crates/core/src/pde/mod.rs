//! Problem definitions, discretized coefficient matrices and state encodings
//! for the two supported PDE families.
//!
//! Second order: `ϱ ü + ζ u̇ − ∇·κ∇u + α u = 0`, written as a first-order
//! system in `w = (√ϱ u̇, √κ ∇u, √α u)`.
//! First order: `u̇ − ∇·κ∇u + β·∇u + α u = 0` with `w = u`.
//!
//! Both are evolved as `dw/dt = −A w`.

mod assemble;
mod encode;
pub mod stencil;

pub use assemble::{assemble, assemble_first_order, assemble_second_order, divergence_operator, gradient_operator, DiagonalOperators};
pub use encode::{decode_field, encode_initial_state, observable_intensity, DecodeTarget};

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundarySpec, Grid, PiecewiseField};
use crate::qubit_op::{QubitOperator, DENSE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SecondOrder,
    FirstOrder,
}

/// Grid, boundaries, coefficient fields and time parameters of one run.
#[derive(Clone, Debug)]
pub struct PdeProblem {
    family: Family,
    grid: Grid,
    boundary: BoundarySpec,
    fields: BTreeMap<String, PiecewiseField>,
    t_final: f64,
    tau: f64,
}

/// Lowest value a field takes on the grid (the default only counts if some
/// node is left uncovered by regions).
fn field_min(f: &PiecewiseField, n_nodes: usize) -> f64 {
    let covered: usize = f.regions().iter().map(|r| r.nodes().len()).sum();
    let regions = f.regions().iter().map(|r| r.value()).fold(f64::INFINITY, f64::min);
    if covered < n_nodes {
        regions.min(f.default_value())
    } else {
        regions
    }
}

impl PdeProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn second_order(
        grid: Grid,
        boundary: BoundarySpec,
        rho: PiecewiseField,
        zeta: PiecewiseField,
        kappa: PiecewiseField,
        alpha: PiecewiseField,
        t_final: f64,
        tau: f64,
    ) -> Result<Self> {
        let fields = [("rho", rho), ("zeta", zeta), ("kappa", kappa), ("alpha", alpha)]
            .into_iter()
            .map(|(k, f)| (k.to_string(), f))
            .collect();
        Self::build(Family::SecondOrder, grid, boundary, fields, t_final, tau)
    }

    /// `beta` holds one velocity component per axis.
    pub fn first_order(
        grid: Grid,
        boundary: BoundarySpec,
        kappa: PiecewiseField,
        beta: Vec<PiecewiseField>,
        alpha: PiecewiseField,
        t_final: f64,
        tau: f64,
    ) -> Result<Self> {
        if beta.len() != grid.dim() {
            return Err(Error::Problem(format!("{} velocity components for a {}-d grid", beta.len(), grid.dim())));
        }
        let mut fields: BTreeMap<String, PiecewiseField> =
            [("kappa".to_string(), kappa), ("alpha".to_string(), alpha)].into_iter().collect();
        for (mu, b) in beta.into_iter().enumerate() {
            fields.insert(format!("beta{mu}"), b);
        }
        Self::build(Family::FirstOrder, grid, boundary, fields, t_final, tau)
    }

    fn build(
        family: Family,
        grid: Grid,
        boundary: BoundarySpec,
        fields: BTreeMap<String, PiecewiseField>,
        t_final: f64,
        tau: f64,
    ) -> Result<Self> {
        boundary.check_grid(&grid)?;
        let n = grid.n_nodes();
        for (name, f) in &fields {
            f.check_grid(&grid)?;
            let min = field_min(f, n);
            let ok = match name.as_str() {
                "rho" => min > 0.0,
                "zeta" | "kappa" | "alpha" => min >= 0.0,
                _ => true,
            };
            if !ok {
                let bound = if name == "rho" { "> 0" } else { "≥ 0" };
                return Err(Error::Field { name: name.clone(), reason: format!("must be {bound} everywhere, minimum is {min}") });
            }
        }
        if !(t_final > 0.0 && t_final.is_finite()) || !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Problem(format!("T and tau must be positive, got T={t_final}, tau={tau}")));
        }
        let ratio = t_final / tau;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Problem(format!("T/tau = {ratio} is not a positive integer")));
        }
        Ok(PdeProblem { family, grid, boundary, fields, t_final, tau })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn field(&self, name: &str) -> Result<&PiecewiseField> {
        self.fields
            .get(name)
            .ok_or_else(|| Error::Problem(format!("field `{name}` is not defined for this problem")))
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &PiecewiseField)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of steps `r = T/τ`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.tau).round() as usize
    }

    /// Copy with different time parameters.
    pub fn with_time(&self, t_final: f64, tau: f64) -> Result<Self> {
        Self::build(self.family, self.grid.clone(), self.boundary.clone(), self.fields.clone(), t_final, tau)
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self.family, &self.grid)
    }
}

/// Register map of the state vector `w`: block register above the system register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateLayout {
    pub family: Family,
    pub dim: usize,
    pub block_qubits: usize,
    pub system_qubits: usize,
}

impl StateLayout {
    pub fn new(family: Family, grid: &Grid) -> Self {
        let d = grid.dim();
        let block_qubits = match family {
            Family::SecondOrder => (d + 2).next_power_of_two().trailing_zeros() as usize,
            Family::FirstOrder => 0,
        };
        StateLayout { family, dim: d, block_qubits, system_qubits: grid.n_qubits() }
    }

    pub fn total_qubits(&self) -> usize {
        self.block_qubits + self.system_qubits
    }

    /// Blocks carrying data: `d + 2` for second order, one for first order.
    pub fn n_blocks(&self) -> usize {
        match self.family {
            Family::SecondOrder => self.dim + 2,
            Family::FirstOrder => 1,
        }
    }

    /// Amplitude index of node `j` in block `b`.
    pub fn index(&self, block: usize, node: usize) -> usize {
        (block << self.system_qubits) | node
    }
}

/// `(A + s·I, s)` with `s ≥ 0` chosen so the Hermitian part of the result is
/// positive semidefinite.
///
/// Uses the exact smallest eigenvalue up to the dense cap and a Gershgorin
/// bound beyond it.
pub fn positive_shift(a: &QubitOperator) -> Result<(QubitOperator, f64)> {
    let lambda_min = hermitian_part_lower_bound(a)?;
    // eigenvalues of a PSD matrix come back as tiny negatives from roundoff
    let shift = if lambda_min < -1e-12 { -lambda_min } else { 0.0 };
    let shifted = if shift > 0.0 {
        a.add(&QubitOperator::identity(a.n_qubits()).scale_real(shift))?
    } else {
        a.clone()
    };
    Ok((shifted, shift))
}

fn hermitian_part_lower_bound(a: &QubitOperator) -> Result<f64> {
    let (l, _) = a.hermitian_split();
    if l.is_empty() {
        return Ok(0.0);
    }
    if l.n_qubits() <= DENSE_CAP {
        let m = l.dense()?;
        let eig = nalgebra::SymmetricEigen::new(m);
        return Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(gershgorin_lower_bound(&l))
}

/// `min_i (L_ii − Σ_{j≠i} |L_ij|)` accumulated term by term.
pub fn gershgorin_lower_bound(l: &QubitOperator) -> f64 {
    let dim = 1usize << l.n_qubits();
    let mut diag = vec![0.0; dim];
    let mut radius = vec![0.0; dim];
    for (s, c) in l.terms() {
        let m = s.masks();
        for j in 0..dim {
            if !m.matches(j) {
                continue;
            }
            // column j contributes to row target(j)
            let row = m.target(j);
            if row == j {
                diag[j] += c.re;
            } else {
                radius[row] += c.norm();
            }
        }
    }
    diag.iter().zip(&radius).map(|(d, r)| d - r).fold(f64::INFINITY, f64::min)
}

/// `‖w‖` of a real node array, a convenience for reports.
pub fn real_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}
