use crate::error::{Error, Result};
use crate::qubit_op::Statevector;

use super::assemble::gradient_operator;
use super::{to_complex, Family, PdeProblem};

/// Initial `w(0)`, unnormalized.
///
/// Second order: block 0 = `√ϱ u̇0`, block `μ+1` = `√κ ∂_μ u0` with the same
/// gradient as the dynamics, block `d+1` = `√α u0`. First order: `w = u0`.
pub fn encode_initial_state(p: &PdeProblem, u0: &[f64], u_dot0: Option<&[f64]>) -> Result<Statevector> {
    let g = p.grid();
    let n = g.n_nodes();
    if u0.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: u0.len() });
    }
    let layout = p.layout();
    match p.family() {
        Family::FirstOrder => Statevector::from_real(layout.total_qubits(), u0),
        Family::SecondOrder => {
            let u_dot0 = u_dot0.ok_or_else(|| Error::Problem("second-order problems need an initial velocity".into()))?;
            if u_dot0.len() != n {
                return Err(Error::SizeMismatch { expected: n, got: u_dot0.len() });
            }
            let rho = p.field("rho")?.values(n);
            let kappa = p.field("kappa")?.values(n);
            let alpha = p.field("alpha")?.values(n);
            let mut amps = vec![num_complex::Complex64::default(); 1 << layout.total_qubits()];
            for j in 0..n {
                amps[layout.index(0, j)] = (rho[j].sqrt() * u_dot0[j]).into();
                amps[layout.index(g.dim() + 1, j)] = (alpha[j].sqrt() * u0[j]).into();
            }
            let u = to_complex(u0);
            for mu in 0..g.dim() {
                let grad = gradient_operator(p, mu)?.apply_slice(&u);
                for j in 0..n {
                    amps[layout.index(mu + 1, j)] = grad[j] * kappa[j].sqrt();
                }
            }
            Statevector::from_amplitudes(layout.total_qubits(), amps)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeTarget {
    /// `u̇ = w_0 / √ϱ`.
    UDot,
    /// `∂_μ u = w_{μ+1} / √κ`.
    Gradient(usize),
    /// `u = w_{d+1} / √α` (second order) or `w` itself (first order).
    U,
    /// The raw amplitudes of one block.
    Raw(usize),
}

/// Real part of one block, divided by the coefficient square root it carries.
pub fn decode_field(v: &Statevector, p: &PdeProblem, which: DecodeTarget) -> Result<Vec<f64>> {
    let layout = p.layout();
    if v.n_qubits() != layout.total_qubits() {
        return Err(Error::QubitMismatch { left: layout.total_qubits(), right: v.n_qubits() });
    }
    let n = p.grid().n_nodes();
    let d = p.grid().dim();
    let block = |b: usize| -> Vec<f64> { (0..n).map(|j| v.amplitudes()[layout.index(b, j)].re).collect() };
    let divide = |b: usize, field: &str| -> Result<Vec<f64>> {
        let c = p.field(field)?.values(n);
        if let Some(j) = c.iter().position(|&x| x <= 0.0) {
            return Err(Error::Field {
                name: field.to_string(),
                reason: format!("zero at node {j}; block {b} cannot be decoded"),
            });
        }
        Ok(block(b).iter().zip(&c).map(|(w, x)| w / x.sqrt()).collect())
    };
    match (p.family(), which) {
        (Family::FirstOrder, DecodeTarget::U | DecodeTarget::Raw(0)) => Ok(block(0)),
        (Family::FirstOrder, other) => Err(Error::Problem(format!("{other:?} is not defined for first-order problems"))),
        (Family::SecondOrder, DecodeTarget::UDot) => divide(0, "rho"),
        (Family::SecondOrder, DecodeTarget::Gradient(mu)) if mu < d => divide(mu + 1, "kappa"),
        (Family::SecondOrder, DecodeTarget::U) => divide(d + 1, "alpha"),
        (Family::SecondOrder, DecodeTarget::Raw(b)) if b < layout.n_blocks() => Ok(block(b)),
        (_, other) => Err(Error::Problem(format!("{other:?} is out of range for this layout"))),
    }
}

/// `Σ_{j∈region} c_j² |w_{0,j}|²`, the acoustic intensity on a set of nodes.
pub fn observable_intensity(v: &Statevector, region: &[usize], c_values: &[f64], p: &PdeProblem) -> Result<f64> {
    let layout = p.layout();
    let n = p.grid().n_nodes();
    if c_values.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: c_values.len() });
    }
    let mut total = 0.0;
    for &j in region {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, bits: p.grid().n_qubits() });
        }
        total += c_values[j].powi(2) * v.amplitudes()[layout.index(0, j)].norm_sqr();
    }
    Ok(total)
}
