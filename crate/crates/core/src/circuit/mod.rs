//! Gate lists and their statevector execution.
//!
//! Register map: system qubits are the low bits of an amplitude index and
//! ancilla qubits sit above them. Two-qubit matrices are indexed by
//! `2·b(q0) + b(q1)` for targets `[q0, q1]`; wider gates follow the same
//! rule with `q0` as the most significant bit.

mod lchs;
mod prep;
mod state_prep;
mod trotter;

pub use lchs::{run_lchs, select_oracle, substeps_for, LchsOptions, LchsOutcome, LchsProgram};
pub use prep::box_state_prep;
pub use state_prep::{
    coefficient_oracle, mps_to_circuit_chi2, mps_to_circuit_layered, mps_to_circuit_sequential, CoefficientOracle, OraclePrep,
};
pub use trotter::{exp_group_apply, group_hermitian_pairs, trotter_step, HermitianGroup, TrotterOrder, TrotterPlan, HERMITIAN_TOL};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qubit_op::Statevector;

/// Largest deviation from unitarity accepted for a stored matrix.
pub const UNITARY_TOL: f64 = 1e-12;

pub type Matrix2 = [[Complex64; 2]; 2];
pub type Matrix4 = [[Complex64; 4]; 4];

#[derive(Clone, Debug)]
pub enum Gate {
    One { name: &'static str, qubit: usize, matrix: Matrix2 },
    Two { name: &'static str, qubits: [usize; 2], matrix: Matrix4 },
    /// Dense gate on three or more qubits.
    Multi { name: &'static str, qubits: Vec<usize>, matrix: DMatrix<Complex64> },
    /// `exp(−iθ G)` with `G` acting on qubits `offset..offset + G.n_qubits()`,
    /// applied only where the control qubit is 1 when one is given.
    Evolution { group: Arc<HermitianGroup>, theta: f64, control: Option<usize>, offset: usize },
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn unitarity_defect<const N: usize>(m: &[[Complex64; N]; N]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            let dot: Complex64 = (0..N).map(|k| m[k][i].conj() * m[k][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).norm());
        }
    }
    worst
}

fn adjoint_matrix<const N: usize>(m: &[[Complex64; N]; N]) -> [[Complex64; N]; N] {
    let mut out = [[Complex64::default(); N]; N];
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            out[j][i] = x.conj();
        }
    }
    out
}

impl Gate {
    pub fn one(name: &'static str, qubit: usize, matrix: Matrix2) -> Result<Gate> {
        let defect = unitarity_defect(&matrix);
        if defect > UNITARY_TOL {
            return Err(Error::Numerical(format!("gate {name} on q{qubit} is not unitary (defect {defect:.1e})")));
        }
        Ok(Gate::One { name, qubit, matrix })
    }

    pub fn two(name: &'static str, qubits: [usize; 2], matrix: Matrix4) -> Result<Gate> {
        if qubits[0] == qubits[1] {
            return Err(Error::Unsupported(format!("gate {name} repeats q{}", qubits[0])));
        }
        let defect = unitarity_defect(&matrix);
        if defect > UNITARY_TOL {
            return Err(Error::Numerical(format!("gate {name} on q{} q{} is not unitary (defect {defect:.1e})", qubits[0], qubits[1])));
        }
        Ok(Gate::Two { name, qubits, matrix })
    }

    /// Dense gate on any number of distinct qubits. One and two targets give
    /// the fixed-size variants.
    pub fn multi(name: &'static str, qubits: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Gate> {
        let dim = 1usize << qubits.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::SizeMismatch { expected: dim, got: matrix.nrows() });
        }
        let mut sorted = qubits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != qubits.len() {
            return Err(Error::Unsupported(format!("gate {name} repeats a qubit in {qubits:?}")));
        }
        match qubits.len() {
            1 => Gate::one(name, qubits[0], std::array::from_fn(|i| std::array::from_fn(|j| matrix[(i, j)]))),
            2 => Gate::two(name, [qubits[0], qubits[1]], std::array::from_fn(|i| std::array::from_fn(|j| matrix[(i, j)]))),
            _ => {
                let defect = (matrix.adjoint() * &matrix - DMatrix::identity(dim, dim)).iter().map(|x| x.norm()).fold(0.0, f64::max);
                if defect > UNITARY_TOL {
                    return Err(Error::Numerical(format!("gate {name} on {qubits:?} is not unitary (defect {defect:.1e})")));
                }
                Ok(Gate::Multi { name, qubits, matrix })
            }
        }
    }

    pub fn x(qubit: usize) -> Gate {
        Gate::One { name: "x", qubit, matrix: [[c(0.0), c(1.0)], [c(1.0), c(0.0)]] }
    }

    pub fn h(qubit: usize) -> Gate {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Gate::One { name: "h", qubit, matrix: [[c(r), c(r)], [c(r), c(-r)]] }
    }

    pub fn cx(control: usize, target: usize) -> Gate {
        let mut m = [[c(0.0); 4]; 4];
        m[0][0] = c(1.0);
        m[1][1] = c(1.0);
        m[2][3] = c(1.0);
        m[3][2] = c(1.0);
        Gate::Two { name: "cx", qubits: [control, target], matrix: m }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::One { qubit, .. } => vec![*qubit],
            Gate::Two { qubits, .. } => qubits.to_vec(),
            Gate::Multi { qubits, .. } => qubits.clone(),
            Gate::Evolution { group, control, offset, .. } => {
                let mut q: Vec<usize> = (*offset..offset + group.n_qubits()).collect();
                q.extend(control);
                q
            }
        }
    }

    pub fn adjoint(&self) -> Gate {
        match self {
            Gate::One { name, qubit, matrix } => Gate::One { name, qubit: *qubit, matrix: adjoint_matrix(matrix) },
            Gate::Two { name, qubits, matrix } => Gate::Two { name, qubits: *qubits, matrix: adjoint_matrix(matrix) },
            Gate::Multi { name, qubits, matrix } => Gate::Multi { name, qubits: qubits.clone(), matrix: matrix.adjoint() },
            Gate::Evolution { group, theta, control, offset } => {
                Gate::Evolution { group: Arc::clone(group), theta: -theta, control: *control, offset: *offset }
            }
        }
    }

    fn shifted(&self, by: usize) -> Gate {
        match self {
            Gate::One { name, qubit, matrix } => Gate::One { name, qubit: qubit + by, matrix: *matrix },
            Gate::Two { name, qubits, matrix } => Gate::Two { name, qubits: [qubits[0] + by, qubits[1] + by], matrix: *matrix },
            Gate::Multi { name, qubits, matrix } => {
                Gate::Multi { name, qubits: qubits.iter().map(|q| q + by).collect(), matrix: matrix.clone() }
            }
            Gate::Evolution { group, theta, control, offset } => Gate::Evolution {
                group: Arc::clone(group),
                theta: *theta,
                control: control.map(|q| q + by),
                offset: offset + by,
            },
        }
    }
}

/// Gate census of a circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub multi_qubit: usize,
    pub evolutions: usize,
    pub controlled_evolutions: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.one_qubit + self.two_qubit + self.multi_qubit + self.evolutions + self.controlled_evolutions
    }

    /// Counts of `self` repeated `times`, plus `other`.
    pub fn repeat_add(&self, times: usize, other: &GateCounts) -> GateCounts {
        GateCounts {
            one_qubit: self.one_qubit * times + other.one_qubit,
            two_qubit: self.two_qubit * times + other.two_qubit,
            multi_qubit: self.multi_qubit * times + other.multi_qubit,
            evolutions: self.evolutions * times + other.evolutions,
            controlled_evolutions: self.controlled_evolutions * times + other.controlled_evolutions,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit { n_qubits, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Panics when the gate touches a qubit outside the register.
    pub fn push(&mut self, gate: Gate) {
        for q in gate.qubits() {
            assert!(q < self.n_qubits, "gate on q{q} in a {}-qubit circuit", self.n_qubits);
        }
        self.gates.push(gate);
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::QubitMismatch { left: self.n_qubits, right: other.n_qubits });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    /// The same gates on qubits `offset..offset + n_qubits` of a wider register.
    pub fn embed(&self, offset: usize, n_total: usize) -> Result<Circuit> {
        if offset + self.n_qubits > n_total {
            return Err(Error::QubitMismatch { left: n_total, right: offset + self.n_qubits });
        }
        Ok(Circuit { n_qubits: n_total, gates: self.gates.iter().map(|g| g.shifted(offset)).collect() })
    }

    /// The same gates on the lowest `n` qubits, when none touches a higher one.
    pub fn restrict(&self, n: usize) -> Option<Circuit> {
        let fits = self.gates.iter().all(|g| g.qubits().iter().all(|&q| q < n));
        (fits && n <= self.n_qubits).then(|| Circuit { n_qubits: n, gates: self.gates.clone() })
    }

    pub fn adjoint(&self) -> Circuit {
        Circuit { n_qubits: self.n_qubits, gates: self.gates.iter().rev().map(Gate::adjoint).collect() }
    }

    pub fn counts(&self) -> GateCounts {
        let mut k = GateCounts::default();
        for g in &self.gates {
            match g {
                Gate::One { .. } => k.one_qubit += 1,
                Gate::Two { .. } => k.two_qubit += 1,
                Gate::Multi { .. } => k.multi_qubit += 1,
                Gate::Evolution { control: None, .. } => k.evolutions += 1,
                Gate::Evolution { control: Some(_), .. } => k.controlled_evolutions += 1,
            }
        }
        k
    }

    pub fn execute(&self, v: &Statevector) -> Result<Statevector> {
        let mut out = v.clone();
        self.run(out.amplitudes_mut(), &mut Executor::default())?;
        Ok(out)
    }

    /// Apply the gates to raw amplitudes, reusing cached phase tables.
    pub fn run(&self, amps: &mut [Complex64], exec: &mut Executor) -> Result<()> {
        if amps.len() != 1usize << self.n_qubits {
            return Err(Error::SizeMismatch { expected: 1usize << self.n_qubits, got: amps.len() });
        }
        for g in &self.gates {
            exec.apply(g, amps);
        }
        Ok(())
    }

    /// Plain-text gate list: a `gate` header line per gate followed by its
    /// matrix rows (`re,im` pairs) or, for evolutions, its generator terms.
    pub fn to_text(&self) -> String {
        let mut out = format!("circuit {}\n", self.n_qubits);
        for g in &self.gates {
            match g {
                Gate::One { name, qubit, matrix } => {
                    let _ = writeln!(out, "gate {name} q{qubit}");
                    write_rows(&mut out, matrix.iter().map(|r| r.as_slice()));
                }
                Gate::Two { name, qubits, matrix } => {
                    let _ = writeln!(out, "gate {name} q{} q{}", qubits[0], qubits[1]);
                    write_rows(&mut out, matrix.iter().map(|r| r.as_slice()));
                }
                Gate::Multi { name, qubits, matrix } => {
                    let targets: Vec<String> = qubits.iter().map(|q| format!("q{q}")).collect();
                    let _ = writeln!(out, "gate {name} {}", targets.join(" "));
                    let rows: Vec<Vec<Complex64>> = matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
                    write_rows(&mut out, rows.iter().map(|r| r.as_slice()));
                }
                Gate::Evolution { group, theta, control, offset } => {
                    let ctrl = control.map(|q| format!(" ctrl q{q}")).unwrap_or_default();
                    let _ = writeln!(out, "gate evolve q{}..q{}{ctrl} theta {theta:e}", offset, offset + group.n_qubits() - 1);
                    match group.as_ref() {
                        HermitianGroup::Diagonal(terms) => {
                            for (s, v) in terms {
                                let _ = writeln!(out, "  {v:e} {s}");
                            }
                        }
                        HermitianGroup::Pair { string, coefficient } => {
                            let _ = writeln!(out, "  {:e},{:e} {string} +h.c.", coefficient.re, coefficient.im);
                        }
                    }
                }
            }
        }
        out
    }
}

fn write_rows<'a>(out: &mut String, rows: impl Iterator<Item = &'a [Complex64]>) {
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{:e},{:e}", x.re, x.im)).collect();
        let _ = writeln!(out, "  {}", cells.join(" "));
    }
}

/// Gate kernels plus a cache of diagonal phase tables keyed by group and angle.
#[derive(Default)]
pub struct Executor {
    tables: HashMap<(usize, u64), (Arc<HermitianGroup>, Vec<Complex64>)>,
}

impl Executor {
    pub fn apply(&mut self, gate: &Gate, amps: &mut [Complex64]) {
        match gate {
            Gate::One { qubit, matrix, .. } => apply_one(*qubit, matrix, amps),
            Gate::Two { qubits, matrix, .. } => apply_two(*qubits, matrix, amps),
            Gate::Multi { qubits, matrix, .. } => apply_multi(qubits, matrix, amps),
            Gate::Evolution { group, theta, control, offset } => match group.as_ref() {
                HermitianGroup::Pair { string, coefficient } => {
                    let mut m = string.masks();
                    m.care <<= offset;
                    m.value <<= offset;
                    m.flip <<= offset;
                    trotter::apply_pair(m, *coefficient, *theta, *control, amps);
                }
                HermitianGroup::Diagonal(terms) => {
                    let key = (Arc::as_ptr(group) as usize, theta.to_bits());
                    let (_, table) = self.tables.entry(key).or_insert_with(|| {
                        (Arc::clone(group), trotter::diagonal_phase_table(terms, *theta, group.n_qubits()))
                    });
                    trotter::apply_phase_table(table, *control, *offset, amps);
                }
            },
        }
    }
}

fn apply_one(q: usize, m: &Matrix2, amps: &mut [Complex64]) {
    let bit = 1usize << q;
    for j in 0..amps.len() {
        if j & bit != 0 {
            continue;
        }
        let k = j | bit;
        let (a, b) = (amps[j], amps[k]);
        amps[j] = m[0][0] * a + m[0][1] * b;
        amps[k] = m[1][0] * a + m[1][1] * b;
    }
}

fn apply_two(q: [usize; 2], m: &Matrix4, amps: &mut [Complex64]) {
    let (b0, b1) = (1usize << q[0], 1usize << q[1]);
    for j in 0..amps.len() {
        if j & (b0 | b1) != 0 {
            continue;
        }
        let idx = [j, j | b1, j | b0, j | b0 | b1];
        let x = idx.map(|i| amps[i]);
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2] + m[r][3] * x[3];
        }
    }
}

fn apply_multi(q: &[usize], m: &DMatrix<Complex64>, amps: &mut [Complex64]) {
    let k = q.len();
    let mask: usize = q.iter().map(|&b| 1usize << b).sum();
    // offsets[r] sets the bits of local index r, q[0] being the top bit
    let offsets: Vec<usize> =
        (0..1usize << k).map(|r| (0..k).filter(|&t| r >> (k - 1 - t) & 1 == 1).map(|t| 1usize << q[t]).sum()).collect();
    let mut x = vec![Complex64::default(); 1 << k];
    for j in 0..amps.len() {
        if j & mask != 0 {
            continue;
        }
        for (xi, &o) in x.iter_mut().zip(&offsets) {
            *xi = amps[j | o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            amps[j | o] = (0..x.len()).map(|c| m[(r, c)] * x[c]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary2(rng: &mut ChaCha8Rng) -> Matrix2 {
        let (a, b, p) = (rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0);
        let (s, co) = a.sin_cos();
        [
            [Complex64::from_polar(co, b), Complex64::from_polar(-s, p)],
            [Complex64::from_polar(s, -p), Complex64::from_polar(co, -b)],
        ]
    }

    fn kron2(a: &Matrix2, b: &Matrix2) -> Matrix4 {
        let mut m = [[Complex64::default(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = a[i / 2][j / 2] * b[i % 2][j % 2];
            }
        }
        m
    }

    #[test]
    fn basic_gates() {
        let v = Circuit { n_qubits: 2, gates: vec![Gate::x(0)] }.execute(&Statevector::basis(2, 0)).unwrap();
        assert_eq!(v, Statevector::basis(2, 1));
        let mut cc = Circuit::new(2);
        cc.push(Gate::x(1));
        cc.push(Gate::cx(1, 0));
        assert_eq!(cc.execute(&Statevector::basis(2, 0)).unwrap(), Statevector::basis(2, 3));
        let mut hh = Circuit::new(1);
        hh.push(Gate::h(0));
        hh.push(Gate::h(0));
        assert!(hh.execute(&Statevector::basis(1, 1)).unwrap().distance(&Statevector::basis(1, 1)) < 1e-15);
        assert!(Gate::one("bad", 0, [[c(1.0), c(1.0)], [c(0.0), c(1.0)]]).is_err());
    }

    #[test]
    fn two_qubit_gate_ordering_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (a, b) = (random_unitary2(&mut rng), random_unitary2(&mut rng));
        let v = Statevector::random(&mut rng, 4);
        let mut one = Circuit::new(4);
        one.push(Gate::one("a", 3, a).unwrap());
        one.push(Gate::one("b", 1, b).unwrap());
        let mut two = Circuit::new(4);
        two.push(Gate::two("ab", [3, 1], kron2(&a, &b)).unwrap());
        assert!(one.execute(&v).unwrap().distance(&two.execute(&v).unwrap()) < 1e-14);
    }

    #[test]
    fn norm_is_kept_over_many_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut circ = Circuit::new(6);
        for _ in 0..10_000 {
            let q = rng.random_range(0..6);
            if rng.random_bool(0.5) {
                circ.push(Gate::one("u", q, random_unitary2(&mut rng)).unwrap());
            } else {
                let r = (q + rng.random_range(1..6)) % 6;
                let m = kron2(&random_unitary2(&mut rng), &random_unitary2(&mut rng));
                circ.push(Gate::two("u", [q, r], m).unwrap());
                circ.push(Gate::cx(r, q));
            }
        }
        let v = Statevector::random(&mut rng, 6);
        let out = circ.execute(&v).unwrap();
        assert!((out.norm() - v.norm()).abs() < 1e-10 * v.norm());
        let back = circ.adjoint().execute(&out).unwrap();
        assert!(back.distance(&v) < 1e-9);
    }

    #[test]
    fn multi_qubit_gate_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (a, b, d) = (random_unitary2(&mut rng), random_unitary2(&mut rng), random_unitary2(&mut rng));
        let ab = kron2(&a, &b);
        let m = DMatrix::from_fn(8, 8, |i, j| ab[i / 2][j / 2] * d[i % 2][j % 2]);
        let v = Statevector::random(&mut rng, 5);
        let mut one = Circuit::new(5);
        for (q, u) in [(4, a), (0, b), (2, d)] {
            one.push(Gate::one("u", q, u).unwrap());
        }
        let mut multi = Circuit::new(5);
        multi.push(Gate::multi("abd", vec![4, 0, 2], m.clone()).unwrap());
        let out = multi.execute(&v).unwrap();
        assert!(one.execute(&v).unwrap().distance(&out) < 1e-14);
        assert!(multi.adjoint().execute(&out).unwrap().distance(&v) < 1e-14);
        assert_eq!(multi.counts().multi_qubit, 1);
        assert!(multi.to_text().contains("gate abd q4 q0 q2\n"));
        assert!(Gate::multi("bad", vec![0, 1, 1], m.clone()).is_err());
        assert!(Gate::multi("bad", vec![0, 1, 2], m * Complex64::new(2.0, 0.0)).is_err());
        assert!(matches!(Gate::multi("h", vec![3], DMatrix::identity(2, 2)).unwrap(), Gate::One { .. }));
    }

    #[test]
    fn embed_shifts_targets() {
        let mut c = Circuit::new(2);
        c.push(Gate::x(0));
        c.push(Gate::cx(0, 1));
        let wide = c.embed(3, 5).unwrap();
        assert_eq!(wide.execute(&Statevector::basis(5, 0)).unwrap(), Statevector::basis(5, 0b11000));
        assert!(c.embed(4, 5).is_err());
        assert_eq!(wide.counts(), GateCounts { one_qubit: 1, two_qubit: 1, ..Default::default() });
    }

    #[test]
    fn text_export_lists_every_gate() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(1));
        c.push(Gate::cx(1, 0));
        let text = c.to_text();
        assert!(text.starts_with("circuit 2\ngate h q1\n"));
        assert!(text.contains("gate cx q1 q0\n"));
        assert_eq!(text.lines().count(), 1 + 3 + 5);
    }
}
