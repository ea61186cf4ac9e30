//! Classical ground truth: dense matrix exponentials, the LCHS quadrature
//! with exact exponentials, norm traces and explicit finite differences.

mod fdm;

pub use fdm::{classical_fdm, FdmOutput};

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mps::{integration_point, quadrature_weights};
use crate::qubit_op::QubitOperator;

/// Largest dense dimension handled here.
pub const DENSE_DIM_CAP: usize = 1 << 13;

fn check_dim(n: usize) -> Result<()> {
    if n > DENSE_DIM_CAP {
        return Err(Error::CapExceeded { what: format!("dense matrix of dimension {n}"), cap: DENSE_DIM_CAP });
    }
    Ok(())
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(m)` by scaling and squaring with the degree-13 Padé approximant.
pub fn expm_dense(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::SizeMismatch { expected: n, got: m.ncols() });
    }
    check_dim(n)?;
    let norm = one_norm(m);
    let s = if norm > 5.371920351148152 { (norm / 5.371920351148152).log2().ceil() as i32 } else { 0 };
    let a = m * Complex64::new(0.5f64.powi(s), 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let b = |k: usize| Complex64::new(PADE13[k], 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let lu = (&v - &u).lu();
    let mut x = lu.solve(&(&v + &u)).ok_or_else(|| Error::Numerical("singular Padé denominator".into()))?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

/// `exp(−m t) v`.
pub fn expm_multiply(m: &DMatrix<Complex64>, t: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.len() != m.nrows() {
        return Err(Error::SizeMismatch { expected: m.nrows(), got: v.len() });
    }
    let e = expm_dense(&(m * Complex64::new(-t, 0.0)))?;
    Ok((e * DVector::from_column_slice(v)).iter().copied().collect())
}

/// Row lists of an operator's nonzero entries, duplicates merged.
struct SparseRows {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseRows {
    fn new(op: &QubitOperator) -> Self {
        let dim = 1usize << op.n_qubits();
        let mut triplets = Vec::new();
        for (s, c) in op.terms() {
            let masks = s.masks();
            triplets.extend((0..dim).filter(|&j| masks.matches(j)).map(|j| (masks.target(j), j, *c)));
        }
        triplets.sort_unstable_by_key(|&(r, j, _)| (r, j));
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (r, j, c) in triplets {
            match rows[r].last_mut() {
                Some((k, acc)) if *k == j => *acc += c,
                _ => rows[r].push((j, c)),
            }
        }
        SparseRows { rows }
    }

    /// Largest column sum of absolute values.
    fn one_norm(&self) -> f64 {
        let mut cols = vec![0.0; self.rows.len()];
        for row in &self.rows {
            for &(j, c) in row {
                cols[j] += c.norm();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, c)| c * v[j]).sum()).collect()
    }
}

/// `exp(−m t) v` by a truncated Taylor series on substeps of unit norm.
fn taylor_action(m: &SparseRows, t: f64, v: &[Complex64]) -> Vec<Complex64> {
    let steps = ((m.one_norm() * t.abs()).ceil() as usize).max(1);
    let dt = -t / steps as f64;
    let mut out = v.to_vec();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=60 {
            term = m.apply(&term);
            let f = dt / k as f64;
            term.iter_mut().for_each(|x| *x *= f);
            let size = term.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            acc.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
            let scale = acc.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if size <= 1e-17 * scale.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        out = acc;
    }
    out
}

/// `exp(−op·t) v` by a truncated Taylor series on a sparse copy of `op`,
/// without forming a dense matrix.
pub fn expm_action(op: &QubitOperator, t: f64, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if v.len() != 1usize << op.n_qubits() {
        return Err(Error::SizeMismatch { expected: 1 << op.n_qubits(), got: v.len() });
    }
    Ok(taylor_action(&SparseRows::new(op), t, v))
}

/// `Σ_a c_a exp(−i(h + k_a l)T) w0` with exact exponentials.
pub fn lchs_quadrature_dense(
    l: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    t: f64,
    n_anc: usize,
    n_frac: usize,
    w0: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = l.nrows();
    check_dim(n)?;
    if h.nrows() != n || w0.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: if h.nrows() != n { h.nrows() } else { w0.len() } });
    }
    let weights = quadrature_weights(n_anc, n_frac)?;
    let w = DVector::from_column_slice(w0);
    let mut acc = DVector::<Complex64>::zeros(n);
    let minus_i_t = Complex64::new(0.0, -t);
    if h.iter().all(|x| *x == Complex64::default()) {
        // exp(−i k l T) from one eigendecomposition of l
        let eig = l.clone().symmetric_eigen();
        let coeffs = eig.eigenvectors.adjoint() * &w;
        for (a, c) in weights.iter().enumerate() {
            let k = integration_point(a, n_anc, n_frac)?;
            let phased = DVector::from_fn(n, |j, _| coeffs[j] * (minus_i_t * k * eig.eigenvalues[j]).exp());
            acc += (&eig.eigenvectors * phased) * Complex64::new(*c, 0.0);
        }
    } else {
        for (a, c) in weights.iter().enumerate() {
            let k = integration_point(a, n_anc, n_frac)?;
            let gen = (h + l * Complex64::new(k, 0.0)) * minus_i_t;
            acc += expm_dense(&gen)? * &w * Complex64::new(*c, 0.0);
        }
    }
    Ok(acc.iter().copied().collect())
}

/// States and norms at increasing times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

impl TimeSeries {
    pub fn push(&mut self, t: f64, state: Vec<f64>, norm: f64) {
        self.times.push(t);
        self.states.push(state);
        self.norms.push(norm);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t,norm` rows with a header.
    pub fn norm_csv(&self) -> String {
        let mut out = String::from("t,norm\n");
        for (t, n) in self.times.iter().zip(&self.norms) {
            let _ = writeln!(out, "{t},{n:.15e}");
        }
        out
    }

    /// `node,value` rows of the state at index `i`.
    pub fn field_csv(&self, i: usize) -> String {
        field_csv(&self.states[i])
    }
}

pub fn field_csv(values: &[f64]) -> String {
    let mut out = String::from("node,value\n");
    for (j, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{j},{v:.15e}");
    }
    out
}

/// `‖exp(−A t_s) w0‖` at `t_s = s·T/samples` for `s = 0..=samples`. The
/// stored states are the real parts.
pub fn norm_trace(a: &QubitOperator, w0: &[Complex64], t_final: f64, samples: usize) -> Result<TimeSeries> {
    let dim = 1usize << a.n_qubits();
    check_dim(dim)?;
    if w0.len() != dim {
        return Err(Error::SizeMismatch { expected: dim, got: w0.len() });
    }
    let samples = samples.max(1);
    let dt = t_final / samples as f64;
    let m = SparseRows::new(a);
    let mut v = w0.to_vec();
    let mut out = TimeSeries::default();
    for s in 0..=samples {
        if s > 0 {
            v = taylor_action(&m, dt, &v);
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        out.push(s as f64 * dt, v.iter().map(|x| x.re).collect(), norm);
    }
    Ok(out)
}
