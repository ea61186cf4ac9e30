use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{Core, TensorTrain};

/// Largest operator that [`TrainOperator::dense`] will expand.
pub const OPERATOR_DENSE_CAP: usize = 12;

/// One `left × 2 (out) × 2 (in) × right` operator core.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCore {
    left: usize,
    right: usize,
    data: Vec<f64>,
}

impl OpCore {
    pub fn from_fn(left: usize, right: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; left * 4 * right];
        for l in 0..left {
            for so in 0..2 {
                for si in 0..2 {
                    for r in 0..right {
                        data[((l * 2 + so) * 2 + si) * right + r] = f(l, so, si, r);
                    }
                }
            }
        }
        OpCore { left, right, data }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn get(&self, l: usize, so: usize, si: usize, r: usize) -> f64 {
        self.data[((l * 2 + so) * 2 + si) * self.right + r]
    }
}

/// Matrix product operator acting on trains with the same site ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOperator {
    cores: Vec<OpCore>,
}

impl TrainOperator {
    pub fn from_cores(cores: Vec<OpCore>) -> Result<Self> {
        if cores.is_empty() || cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::Numerical("operator train needs boundary bonds of 1".into()));
        }
        if cores.windows(2).any(|w| w[0].right != w[1].left) {
            return Err(Error::Numerical("operator train bond mismatch".into()));
        }
        Ok(TrainOperator { cores })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        Self::from_cores((0..n_sites).map(|_| OpCore::from_fn(1, 1, |_, so, si, _| f64::from(u8::from(so == si)))).collect())
    }

    /// `diag(v)`: each vector core `V[b,s,b']` lifts to `W[b,s,s',b'] = V[b,s,b']·δ(s,s')`.
    pub fn diag(v: &TensorTrain) -> Self {
        let cores = v
            .cores()
            .iter()
            .map(|c| OpCore::from_fn(c.left(), c.right(), |l, so, si, r| if so == si { c.get(l, so, r) } else { 0.0 }))
            .collect();
        TrainOperator { cores }
    }

    pub fn n_sites(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[OpCore] {
        &self.cores
    }

    pub fn bonds(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.right).collect()
    }

    pub fn scale(&self, factor: f64) -> TrainOperator {
        let mut op = self.clone();
        for x in &mut op.cores[0].data {
            *x *= factor;
        }
        op
    }

    /// `A x` as a train whose bonds are the products of the operand bonds.
    pub fn apply(&self, x: &TensorTrain) -> Result<TensorTrain> {
        if x.n_sites() != self.n_sites() {
            return Err(Error::SizeMismatch { expected: self.n_sites(), got: x.n_sites() });
        }
        let cores = self
            .cores
            .iter()
            .zip(x.cores())
            .map(|(w, c)| {
                Core::from_fn(w.left * c.left(), w.right * c.right(), |l, s, r| {
                    let (la, lx) = (l / c.left(), l % c.left());
                    let (ra, rx) = (r / c.right(), r % c.right());
                    (0..2).map(|si| w.get(la, s, si, ra) * c.get(lx, si, rx)).sum()
                })
            })
            .collect();
        TensorTrain::from_cores(cores)
    }

    /// Dense `2^n × 2^n` matrix, site 0 as the most significant bit.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.n_sites();
        if n > OPERATOR_DENSE_CAP {
            return Err(Error::CapExceeded { what: format!("dense operator on {n} sites"), cap: OPERATOR_DENSE_CAP });
        }
        let dim = 1usize << n;
        Ok(DMatrix::from_fn(dim, dim, |row, col| {
            let mut env = vec![1.0];
            for (i, w) in self.cores.iter().enumerate() {
                let (so, si) = ((row >> (n - 1 - i)) & 1, (col >> (n - 1 - i)) & 1);
                let mut next = vec![0.0; w.right];
                for (l, x) in env.iter().enumerate() {
                    for (r, y) in next.iter_mut().enumerate() {
                        *y += x * w.get(l, so, si, r);
                    }
                }
                env = next;
            }
            env[0]
        }))
    }
}
