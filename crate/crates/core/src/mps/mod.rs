//! Real tensor trains (matrix product states) over qubit sites.
//!
//! Site 0 carries the most significant bit: a train on `n` sites represents
//! the vector `v[a]` with `a = Σ_i s_i 2^{n-1-i}`. Cores are stored row-major
//! with shape `left × 2 × right`.

mod coefficients;
mod mals;
mod operator;

pub use coefficients::{
    build_k_vector, build_one_plus_k_squared, coefficient_train, exact_coefficient_state, integration_point,
    newton_sqrt, quadrature_weights, solve_coefficient_train, CoefficientOptions, CoefficientTrain, NewtonReport,
    NewtonStart, PhiStrategy, WEIGHTS_CAP,
};
pub use mals::{mals_solve, MalsOptions, MalsReport};
pub use operator::{OpCore, TrainOperator, OPERATOR_DENSE_CAP};

use nalgebra::{DMatrix, Matrix2, Matrix4};

use crate::error::{Error, Result};

/// Largest train that [`TensorTrain::contract_to_vector`] will expand.
pub const CONTRACT_CAP: usize = 16;

/// Relative singular value floor used when splitting exact results.
pub(crate) const SVD_FLOOR: f64 = 1e-14;

/// One `left × 2 × right` core.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn zeros(left: usize, right: usize) -> Self {
        Core { left, right, data: vec![0.0; left * 2 * right] }
    }

    pub fn new(left: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || right == 0 {
            return Err(Error::Numerical("bond dimensions must be positive".into()));
        }
        if data.len() != left * 2 * right {
            return Err(Error::SizeMismatch { expected: left * 2 * right, got: data.len() });
        }
        Ok(Core { left, right, data })
    }

    pub fn from_fn(left: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut c = Core::zeros(left, right);
        for l in 0..left {
            for s in 0..2 {
                for r in 0..right {
                    c.data[(l * 2 + s) * right + r] = f(l, s, r);
                }
            }
        }
        c
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> f64 {
        self.data[(l * 2 + s) * self.right + r]
    }

    #[inline]
    pub fn set(&mut self, l: usize, s: usize, r: usize, v: f64) {
        self.data[(l * 2 + s) * self.right + r] = v;
    }

    /// `(left·2) × right` matricization.
    pub(crate) fn left_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left * 2, self.right, &self.data)
    }

    /// `left × (2·right)` matricization.
    pub(crate) fn right_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left, 2 * self.right, &self.data)
    }

    pub(crate) fn from_left_matrix(m: &DMatrix<f64>) -> Self {
        Core { left: m.nrows() / 2, right: m.ncols(), data: row_major(m) }
    }

    pub(crate) fn from_right_matrix(m: &DMatrix<f64>) -> Self {
        Core { left: m.nrows(), right: m.ncols() / 2, data: row_major(m) }
    }

    /// Squared Frobenius norm.
    fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalForm {
    None,
    /// All cores but the last are left-orthogonal.
    Left,
    /// All cores but the first are right-orthogonal.
    Right,
    /// Orthogonality center at the given site.
    Mixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
    form: CanonicalForm,
}

/// Number of singular values to keep: at most `cap`, at least one, and the
/// discarded tail has 2-norm at most `abs_tol`.
pub(crate) fn truncation_rank(s: &[f64], cap: Option<usize>, abs_tol: f64) -> usize {
    let mut keep = s.len();
    let mut tail = 0.0;
    while keep > 1 {
        let next = tail + s[keep - 1] * s[keep - 1];
        if next.sqrt() > abs_tol {
            break;
        }
        tail = next;
        keep -= 1;
    }
    keep.min(cap.unwrap_or(usize::MAX)).max(1)
}

/// Thin SVD with singular values sorted in descending order.
pub(crate) fn sorted_svd(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    (u, s, v_t)
}

impl TensorTrain {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Numerical("a tensor train needs at least one site".into()));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::Numerical("boundary bonds must be 1".into()));
        }
        for (i, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::Numerical(format!(
                    "bond mismatch between sites {i} and {}: {} vs {}",
                    i + 1,
                    w[0].right,
                    w[1].left
                )));
            }
        }
        Ok(TensorTrain { cores, form: CanonicalForm::None })
    }

    /// Rank-one train `⊗_i (f_i[0], f_i[1])`, most significant site first.
    pub fn product(factors: &[[f64; 2]]) -> Result<Self> {
        Self::from_cores(factors.iter().map(|f| Core { left: 1, right: 1, data: f.to_vec() }).collect())
    }

    pub fn constant(n_sites: usize, value: f64) -> Result<Self> {
        let mut factors = vec![[1.0, 1.0]; n_sites];
        if let Some(f) = factors.first_mut() {
            *f = [value, value];
        }
        Self::product(&factors)
    }

    pub fn ones(n_sites: usize) -> Result<Self> {
        Self::constant(n_sites, 1.0)
    }

    /// Successive SVD factorization of a dense vector of length `2^n`.
    pub fn from_dense(v: &[f64], cap: Option<usize>, rel_tol: f64) -> Result<Self> {
        if v.len() < 2 || !v.len().is_power_of_two() {
            return Err(Error::Numerical(format!("length {} is not a power of two ≥ 2", v.len())));
        }
        let n = v.len().trailing_zeros() as usize;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let per_cut = rel_tol * norm / ((n - 1).max(1) as f64).sqrt();
        let mut cores = Vec::with_capacity(n);
        let mut rest = DMatrix::from_row_slice(1, v.len(), v);
        for _ in 0..n - 1 {
            let left = rest.nrows();
            let cols = rest.ncols() / 2;
            let m = DMatrix::from_row_slice(left * 2, cols, &row_major(&rest));
            let (u, s, v_t) = sorted_svd(m);
            let k = truncation_rank(&s, cap, per_cut);
            let u = u.columns(0, k).into_owned();
            cores.push(Core::from_left_matrix(&u));
            rest = DMatrix::from_fn(k, cols, |r, c| s[r] * v_t[(r, c)]);
        }
        cores.push(Core { left: rest.nrows(), right: 1, data: row_major(&rest) });
        let mut t = Self::from_cores(cores)?;
        t.form = CanonicalForm::Left;
        Ok(t)
    }

    pub fn n_sites(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, i: usize) -> &Core {
        &self.cores[i]
    }

    pub fn form(&self) -> CanonicalForm {
        self.form
    }

    /// Inner bond dimensions, `n_sites - 1` entries.
    pub fn bonds(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bonds().into_iter().max().unwrap_or(1)
    }

    /// Entry at index `a` without expanding the train.
    pub fn value_at(&self, a: usize) -> f64 {
        let n = self.n_sites();
        let mut row = vec![1.0];
        for (i, c) in self.cores.iter().enumerate() {
            let s = (a >> (n - 1 - i)) & 1;
            let mut next = vec![0.0; c.right];
            for (l, x) in row.iter().enumerate() {
                if *x == 0.0 {
                    continue;
                }
                for (r, y) in next.iter_mut().enumerate() {
                    *y += x * c.get(l, s, r);
                }
            }
            row = next;
        }
        row[0]
    }

    /// Dense vector of length `2^n`.
    pub fn contract_to_vector(&self) -> Result<Vec<f64>> {
        if self.n_sites() > CONTRACT_CAP {
            return Err(Error::CapExceeded { what: format!("contraction of {} sites", self.n_sites()), cap: CONTRACT_CAP });
        }
        // rows indexed by the prefix of physical indices
        let mut acc = vec![1.0];
        let mut width = 1;
        for c in &self.cores {
            let rows = acc.len() / width;
            let mut next = vec![0.0; rows * 2 * c.right];
            for p in 0..rows {
                for s in 0..2 {
                    let out = &mut next[(p * 2 + s) * c.right..(p * 2 + s + 1) * c.right];
                    for l in 0..width {
                        let x = acc[p * width + l];
                        if x == 0.0 {
                            continue;
                        }
                        let src = &c.data[(l * 2 + s) * c.right..(l * 2 + s + 1) * c.right];
                        for (o, y) in out.iter_mut().zip(src) {
                            *o += x * y;
                        }
                    }
                }
            }
            acc = next;
            width = c.right;
        }
        Ok(acc)
    }

    pub fn dot(&self, other: &TensorTrain) -> Result<f64> {
        self.check_sites(other)?;
        let mut env = DMatrix::from_element(1, 1, 1.0);
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let mut next = DMatrix::zeros(a.right, b.right);
            for s in 0..2 {
                let am = DMatrix::from_fn(a.left, a.right, |l, r| a.get(l, s, r));
                let bm = DMatrix::from_fn(b.left, b.right, |l, r| b.get(l, s, r));
                next += am.transpose() * &env * bm;
            }
            env = next;
        }
        Ok(env[(0, 0)])
    }

    /// 2-norm, computed by orthogonalization so differences keep their accuracy.
    pub fn norm(&self) -> f64 {
        match self.form {
            CanonicalForm::Left => self.cores[self.n_sites() - 1].norm_sqr().sqrt(),
            CanonicalForm::Right => self.cores[0].norm_sqr().sqrt(),
            CanonicalForm::Mixed(k) => self.cores[k].norm_sqr().sqrt(),
            CanonicalForm::None => {
                let mut t = self.clone();
                t.left_orthogonalize();
                t.cores[t.n_sites() - 1].norm_sqr().sqrt()
            }
        }
    }

    fn check_sites(&self, other: &TensorTrain) -> Result<()> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::SizeMismatch { expected: self.n_sites(), got: other.n_sites() });
        }
        Ok(())
    }

    fn center(&self) -> usize {
        match self.form {
            CanonicalForm::Left => self.n_sites() - 1,
            CanonicalForm::Mixed(k) => k,
            _ => 0,
        }
    }

    pub fn scale(&self, factor: f64) -> TensorTrain {
        let mut t = self.clone();
        let k = t.center();
        for x in &mut t.cores[k].data {
            *x *= factor;
        }
        t
    }

    /// Unit-norm copy and the original norm.
    pub fn normalized(&self) -> Result<(TensorTrain, f64)> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero-norm train".into()));
        }
        Ok((self.scale(1.0 / norm), norm))
    }

    /// Sum as a direct sum of cores; bonds add.
    pub fn add(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.check_sites(other)?;
        let n = self.n_sites();
        if n == 1 {
            let data = self.cores[0].data.iter().zip(&other.cores[0].data).map(|(a, b)| a + b).collect();
            return Self::from_cores(vec![Core { left: 1, right: 1, data }]);
        }
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .enumerate()
            .map(|(i, (a, b))| {
                let left = if i == 0 { 1 } else { a.left + b.left };
                let right = if i == n - 1 { 1 } else { a.right + b.right };
                let mut c = Core::zeros(left, right);
                for s in 0..2 {
                    for l in 0..a.left {
                        for r in 0..a.right {
                            c.set(l, s, r, a.get(l, s, r));
                        }
                    }
                    let (lo, ro) = (if i == 0 { 0 } else { a.left }, if i == n - 1 { 0 } else { a.right });
                    for l in 0..b.left {
                        for r in 0..b.right {
                            let v = c.get(lo + l, s, ro + r) + b.get(l, s, r);
                            c.set(lo + l, s, ro + r, v);
                        }
                    }
                }
                c
            })
            .collect();
        Self::from_cores(cores)
    }

    pub fn sub(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.add(&other.scale(-1.0))
    }

    /// Elementwise product; bonds multiply.
    pub fn hadamard(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.check_sites(other)?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                Core::from_fn(a.left * b.left, a.right * b.right, |l, s, r| {
                    a.get(l / b.left, s, r / b.right) * b.get(l % b.left, s, r % b.right)
                })
            })
            .collect();
        Self::from_cores(cores)
    }

    /// QR sweep from the left; the represented vector is unchanged.
    pub fn left_orthogonalize(&mut self) {
        let n = self.n_sites();
        for i in 0..n - 1 {
            let m = self.cores[i].left_matrix();
            let qr = m.qr();
            let (q, r) = (qr.q(), qr.r());
            self.cores[i] = Core::from_left_matrix(&q);
            let next = self.cores[i + 1].right_matrix();
            self.cores[i + 1] = Core::from_right_matrix(&(r * next));
        }
        self.form = CanonicalForm::Left;
    }

    /// Right-canonical copy, optionally truncated to `cap` at every cut.
    ///
    /// Without a cap the represented vector is unchanged up to rounding.
    pub fn right_canonicalize(&self, cap: Option<usize>) -> TensorTrain {
        self.truncate(cap, 0.0)
    }

    /// Right-canonical copy with every cut truncated to at most `cap`
    /// singular values and a total discarded weight of at most
    /// `rel_tol · ‖t‖`.
    pub fn truncate(&self, cap: Option<usize>, rel_tol: f64) -> TensorTrain {
        let mut t = self.clone();
        t.left_orthogonalize();
        let n = t.n_sites();
        let per_cut = rel_tol * t.norm() / ((n.max(2) - 1) as f64).sqrt();
        for i in (1..n).rev() {
            let m = t.cores[i].right_matrix();
            let (u, s, v_t) = sorted_svd(m);
            let k = truncation_rank(&s, cap, per_cut);
            t.cores[i] = Core::from_right_matrix(&v_t.rows(0, k).into_owned());
            let us = DMatrix::from_fn(u.nrows(), k, |r, c| u[(r, c)] * s[c]);
            let prev = t.cores[i - 1].left_matrix();
            t.cores[i - 1] = Core::from_left_matrix(&(prev * us));
        }
        t.form = CanonicalForm::Right;
        t
    }

    /// Largest deviation from right-orthogonality over cores `1..n`.
    pub fn right_orthogonality_defect(&self) -> f64 {
        self.cores[1..]
            .iter()
            .map(|c| {
                let m = c.right_matrix();
                let g = &m * m.transpose() - DMatrix::identity(c.left, c.left);
                g.amax()
            })
            .fold(0.0, f64::max)
    }

    /// Apply a one-qubit gate to site `i` in place.
    pub fn apply_one_site(&mut self, i: usize, u: &Matrix2<f64>) {
        let c = &self.cores[i];
        self.cores[i] = Core::from_fn(c.left, c.right, |l, s, r| u[(s, 0)] * c.get(l, 0, r) + u[(s, 1)] * c.get(l, 1, r));
        self.form = CanonicalForm::None;
    }

    /// Apply a two-qubit gate to sites `(i, i+1)` and split the result by SVD.
    ///
    /// The gate matrix is indexed by `2·s_i + s_{i+1}`.
    pub fn apply_two_site(&mut self, i: usize, u: &Matrix4<f64>, cap: Option<usize>) {
        let (a, b) = (&self.cores[i], &self.cores[i + 1]);
        let (left, right) = (a.left, b.right);
        let mut theta = DMatrix::zeros(left * 2, 2 * right);
        for l in 0..left {
            for r in 0..right {
                let mut pair = [0.0; 4];
                for (s1, s2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    pair[2 * s1 + s2] = (0..a.right).map(|m| a.get(l, s1, m) * b.get(m, s2, r)).sum();
                }
                for out in 0..4 {
                    let v: f64 = (0..4).map(|inp| u[(out, inp)] * pair[inp]).sum();
                    theta[(l * 2 + out / 2, (out % 2) * right + r)] = v;
                }
            }
        }
        let scale = theta.norm();
        let (uu, s, v_t) = sorted_svd(theta);
        let k = truncation_rank(&s, cap, SVD_FLOOR * scale);
        self.cores[i] = Core::from_left_matrix(&uu.columns(0, k).into_owned());
        let sv = DMatrix::from_fn(k, v_t.ncols(), |r, c| s[r] * v_t[(r, c)]);
        self.cores[i + 1] = Core::from_right_matrix(&sv);
        self.form = CanonicalForm::None;
    }

    /// Text form: a header with the site count and bond profile, then one
    /// line of row-major entries per core.
    pub fn to_text(&self) -> String {
        let mut out = format!("tensor-train {}\n", self.n_sites());
        let bonds: Vec<String> = std::iter::once(1)
            .chain(self.bonds())
            .chain(std::iter::once(1))
            .map(|b| b.to_string())
            .collect();
        out.push_str(&format!("bonds {}\n", bonds.join(" ")));
        for c in &self.cores {
            let vals: Vec<String> = c.data.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TensorTrain> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |msg: &str| Error::Parse(format!("tensor train: {msg}"));
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("tensor-train "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("missing `tensor-train <sites>` header"))?;
        let bonds: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("bonds "))
            .ok_or_else(|| bad("missing bond profile"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("bad bond dimension")))
            .collect::<Result<_>>()?;
        if bonds.len() != n + 1 {
            return Err(bad("bond profile length does not match the site count"));
        }
        let mut cores = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| bad("missing core"))?;
            let data: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("bad core entry")))
                .collect::<Result<_>>()?;
            cores.push(Core::new(bonds[i], bonds[i + 1], data).map_err(|e| bad(&e.to_string()))?);
        }
        Self::from_cores(cores)
    }
}

/// `|⟨a|b⟩|² / (‖a‖²‖b‖²)` between a train and a dense vector.
pub fn fidelity_with_dense(t: &TensorTrain, v: &[f64]) -> Result<f64> {
    let x = t.contract_to_vector()?;
    if x.len() != v.len() {
        return Err(Error::SizeMismatch { expected: x.len(), got: v.len() });
    }
    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let na: f64 = x.iter().map(|a| a * a).sum();
    let nb: f64 = v.iter().map(|a| a * a).sum();
    Ok(dot * dot / (na * nb))
}
