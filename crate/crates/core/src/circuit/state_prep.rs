use nalgebra::{DMatrix, Matrix2 as RMatrix2, Matrix4 as RMatrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mps::TensorTrain;

use super::{Circuit, Gate};

/// Allowed deviation from right-orthogonality and unit norm of an input train.
const CANONICAL_TOL: f64 = 1e-8;

/// Unitary of dimension `dim` whose columns at the given positions are the
/// given vectors (after re-orthonormalization), completed by Gram–Schmidt on
/// the standard basis.
fn complete_unitary(dim: usize, given: &[(usize, Vec<f64>)]) -> Result<DMatrix<Complex64>> {
    let mut cols: Vec<Option<Vec<f64>>> = vec![None; dim];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let orthogonalize = |v: &mut [f64], basis: &[Vec<f64>]| {
        for b in basis {
            let d: f64 = b.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    for (pos, v) in given {
        let mut w = v.clone();
        let norm = orthogonalize(&mut w, &basis);
        if (norm - 1.0).abs() > CANONICAL_TOL {
            return Err(Error::Numerical(format!("core columns are not orthonormal (norm {norm})")));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        cols[*pos] = Some(w.clone());
        basis.push(w);
    }
    let mut next = 0;
    for slot in cols.iter_mut().filter(|c| c.is_none()) {
        loop {
            let mut e = vec![0.0; dim];
            e[next] = 1.0;
            next += 1;
            let norm = orthogonalize(&mut e, &basis);
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                *slot = Some(e.clone());
                basis.push(e);
                break;
            }
        }
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| Complex64::new(cols[j].as_ref().expect("every column filled")[i], 0.0)))
}

/// Qubits needed to hold a bond index.
fn bond_bits(bond: usize) -> usize {
    bond.next_power_of_two().trailing_zeros() as usize
}

fn check_canonical(t: &TensorTrain) -> Result<()> {
    let defect = if t.n_sites() > 1 { t.right_orthogonality_defect() } else { 0.0 };
    if defect > CANONICAL_TOL {
        return Err(Error::Numerical(format!("train is not right-canonical (defect {defect:.1e})")));
    }
    let norm = t.core(0).data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > CANONICAL_TOL {
        return Err(Error::Numerical(format!("train is not normalized (norm {norm})")));
    }
    Ok(())
}

/// Sequential circuit preparing a right-canonical, normalized train from
/// `|0…0⟩`, one isometry gate per site.
///
/// Site `i` (site 0 is the most significant bit) sits on qubit `n − 1 − i`.
/// The bond entering site `i` is held on the qubits of sites `i, i + 1, …`
/// and the gate of site `i` writes the physical index on its own qubit and
/// the outgoing bond on the next `⌈log₂ right⌉` qubits. A bond of `2^m`
/// therefore costs `(m + 1)`-qubit gates.
pub fn mps_to_circuit_sequential(t: &TensorTrain) -> Result<Circuit> {
    check_canonical(t)?;
    let n = t.n_sites();
    let qubit = |i: usize| n - 1 - i;
    let mut circ = Circuit::new(n);
    for i in 0..n {
        let core = t.core(i);
        let (bl, br) = (bond_bits(core.left()), bond_bits(core.right()));
        let width = 1 + br;
        if bl > width || i + br >= n {
            return Err(Error::Numerical(format!("bond profile {:?} has no isometric circuit", t.bonds())));
        }
        let given: Vec<(usize, Vec<f64>)> = (0..core.left())
            .map(|b| {
                let mut col = vec![0.0; 1 << width];
                for s in 0..2 {
                    for r in 0..core.right() {
                        col[s << br | r] = core.get(b, s, r);
                    }
                }
                (b << (width - bl), col)
            })
            .collect();
        let targets: Vec<usize> = (i..i + width).map(qubit).collect();
        circ.push(Gate::multi("u", targets, complete_unitary(1 << width, &given)?)?);
    }
    Ok(circ)
}

/// Sequential circuit for a right-canonical, normalized train with bonds of
/// at most 2: one- and two-qubit gates only.
pub fn mps_to_circuit_chi2(t: &TensorTrain) -> Result<Circuit> {
    if t.max_bond() > 2 {
        return Err(Error::Unsupported(format!("bond dimension {} exceeds 2", t.max_bond())));
    }
    mps_to_circuit_sequential(t)
}

/// Apply a circuit emitted by [`mps_to_circuit_chi2`] to a train.
fn apply_to_train(c: &Circuit, t: &mut TensorTrain) {
    let n = t.n_sites();
    for g in c.gates() {
        match g {
            Gate::One { qubit, matrix, .. } => {
                let m = RMatrix2::from_fn(|r, c| matrix[r][c].re);
                t.apply_one_site(n - 1 - qubit, &m);
            }
            Gate::Two { qubits, matrix, .. } => {
                let m = RMatrix4::from_fn(|r, c| matrix[r][c].re);
                t.apply_two_site(n - 1 - qubits[0], &m, None);
            }
            Gate::Multi { .. } | Gate::Evolution { .. } => unreachable!("χ = 2 circuits hold one- and two-qubit gates only"),
        }
    }
}

/// Disentangle the train layer by layer: each layer prepares the `χ = 2`
/// truncation of what is left, and its inverse is applied before the next.
pub fn mps_to_circuit_layered(t: &TensorTrain, layers: usize) -> Result<Circuit> {
    if layers == 0 {
        return Err(Error::Unsupported("at least one layer is needed".into()));
    }
    let (mut rest, _) = t.right_canonicalize(None).normalized()?;
    let mut parts = Vec::with_capacity(layers);
    for _ in 0..layers {
        let (approx, _) = rest.truncate(Some(2), 0.0).normalized()?;
        let layer = mps_to_circuit_chi2(&approx)?;
        apply_to_train(&layer.adjoint(), &mut rest);
        parts.push(layer);
    }
    let mut circ = Circuit::new(t.n_sites());
    for layer in parts.iter().rev() {
        circ.append(layer)?;
    }
    Ok(circ)
}

/// How a coefficient train with bonds above 2 becomes a circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OraclePrep {
    /// Exact sequential isometries, with gates on `1 + ⌈log₂ χ⌉` qubits.
    #[default]
    Sequential,
    /// The given number of `χ = 2` layers; one- and two-qubit gates only.
    Layered(usize),
}

/// Preparation circuit for the quadrature weights and its inverse, both on
/// the ancilla register alone.
#[derive(Clone, Debug)]
pub struct CoefficientOracle {
    pub circuit: Circuit,
    pub adjoint: Circuit,
}

/// `χ ≤ 2` trains are always prepared exactly by [`mps_to_circuit_chi2`].
pub fn coefficient_oracle(phi: &TensorTrain, prep: OraclePrep) -> Result<CoefficientOracle> {
    let norm = phi.norm();
    if (norm - 1.0).abs() > CANONICAL_TOL {
        return Err(Error::Numerical(format!("coefficient train is not normalized (norm {norm})")));
    }
    let canonical = phi.right_canonicalize(None);
    let circuit = match prep {
        _ if phi.max_bond() <= 2 => mps_to_circuit_chi2(&canonical)?,
        OraclePrep::Sequential => mps_to_circuit_sequential(&canonical)?,
        OraclePrep::Layered(layers) => mps_to_circuit_layered(phi, layers)?,
    };
    let adjoint = circuit.adjoint();
    Ok(CoefficientOracle { circuit, adjoint })
}
