//! Two-site alternating least squares for `A x = b` with trains.
//!
//! The unknown is kept in mixed canonical form, so each local problem is the
//! Galerkin projection of `A` onto the current two-site block. Local systems
//! are solved densely: Cholesky when the projection is symmetric, LU
//! otherwise, and an SVD pseudo-inverse as the last resort.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{sorted_svd, truncation_rank, Core, TensorTrain, TrainOperator, SVD_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MalsOptions {
    /// Bond cap on the solution.
    pub max_rank: usize,
    /// Full left-right-left sweeps.
    pub sweeps: usize,
    /// Target relative residual `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
}

impl Default for MalsOptions {
    fn default() -> Self {
        MalsOptions { max_rank: 10, sweeps: 10, tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MalsReport {
    /// Relative residual of the returned iterate.
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Three-index environment `(x, a, x')`.
#[derive(Clone, Debug)]
struct Env3 {
    d: [usize; 3],
    data: Vec<f64>,
}

impl Env3 {
    fn trivial() -> Self {
        Env3 { d: [1, 1, 1], data: vec![1.0] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.d[1] + j) * self.d[2] + k]
    }
}

/// Two-index environment `(x, b)`.
#[derive(Clone, Debug)]
struct Env2 {
    d: [usize; 2],
    data: Vec<f64>,
}

impl Env2 {
    fn trivial() -> Self {
        Env2 { d: [1, 1], data: vec![1.0] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d[1] + j]
    }
}

fn extend_left_a(env: &Env3, x: &Core, a: &super::OpCore) -> Env3 {
    let (lx, la, rx, ra) = (x.left(), a.left(), x.right(), a.right());
    // t1[l, a, s', r'] = Σ_{l'} env[l,a,l'] x[l',s',r']
    let mut t1 = vec![0.0; lx * la * 2 * rx];
    for l in 0..lx {
        for aa in 0..la {
            for lp in 0..lx {
                let e = env.at(l, aa, lp);
                if e == 0.0 {
                    continue;
                }
                for sp in 0..2 {
                    for rp in 0..rx {
                        t1[((l * la + aa) * 2 + sp) * rx + rp] += e * x.get(lp, sp, rp);
                    }
                }
            }
        }
    }
    // t2[l, s, c, r'] = Σ_{a,s'} t1[l,a,s',r'] A[a,s,s',c]
    let mut t2 = vec![0.0; lx * 2 * ra * rx];
    for l in 0..lx {
        for aa in 0..la {
            for s in 0..2 {
                for sp in 0..2 {
                    for c in 0..ra {
                        let w = a.get(aa, s, sp, c);
                        if w == 0.0 {
                            continue;
                        }
                        for rp in 0..rx {
                            t2[((l * 2 + s) * ra + c) * rx + rp] += w * t1[((l * la + aa) * 2 + sp) * rx + rp];
                        }
                    }
                }
            }
        }
    }
    // out[r, c, r'] = Σ_{l,s} x[l,s,r] t2[l,s,c,r']
    let mut out = vec![0.0; rx * ra * rx];
    for l in 0..lx {
        for s in 0..2 {
            for r in 0..rx {
                let xv = x.get(l, s, r);
                if xv == 0.0 {
                    continue;
                }
                let src = &t2[(l * 2 + s) * ra * rx..(l * 2 + s + 1) * ra * rx];
                for (o, v) in out[r * ra * rx..(r + 1) * ra * rx].iter_mut().zip(src) {
                    *o += xv * v;
                }
            }
        }
    }
    Env3 { d: [rx, ra, rx], data: out }
}

fn extend_right_a(env: &Env3, x: &Core, a: &super::OpCore) -> Env3 {
    let (lx, la, rx, ra) = (x.left(), a.left(), x.right(), a.right());
    // t1[l', s', c, r] = Σ_{r'} x[l',s',r'] env[r,c,r']
    let mut t1 = vec![0.0; lx * 2 * ra * rx];
    for lp in 0..lx {
        for sp in 0..2 {
            for c in 0..ra {
                for r in 0..rx {
                    t1[((lp * 2 + sp) * ra + c) * rx + r] = (0..rx).map(|rp| x.get(lp, sp, rp) * env.at(r, c, rp)).sum();
                }
            }
        }
    }
    // t2[a, s, l', r] = Σ_{s',c} A[a,s,s',c] t1[l',s',c,r]
    let mut t2 = vec![0.0; la * 2 * lx * rx];
    for aa in 0..la {
        for s in 0..2 {
            for sp in 0..2 {
                for c in 0..ra {
                    let w = a.get(aa, s, sp, c);
                    if w == 0.0 {
                        continue;
                    }
                    for lp in 0..lx {
                        for r in 0..rx {
                            t2[((aa * 2 + s) * lx + lp) * rx + r] += w * t1[((lp * 2 + sp) * ra + c) * rx + r];
                        }
                    }
                }
            }
        }
    }
    // out[l, a, l'] = Σ_{s,r} x[l,s,r] t2[a,s,l',r]
    let mut out = vec![0.0; lx * la * lx];
    for l in 0..lx {
        for aa in 0..la {
            for lp in 0..lx {
                let mut acc = 0.0;
                for s in 0..2 {
                    for r in 0..rx {
                        acc += x.get(l, s, r) * t2[((aa * 2 + s) * lx + lp) * rx + r];
                    }
                }
                out[(l * la + aa) * lx + lp] = acc;
            }
        }
    }
    Env3 { d: [lx, la, lx], data: out }
}

fn extend_left_b(env: &Env2, x: &Core, b: &Core) -> Env2 {
    let (lx, rx, lb, rb) = (x.left(), x.right(), b.left(), b.right());
    let mut out = vec![0.0; rx * rb];
    for l in 0..lx {
        for s in 0..2 {
            // t[b'] = Σ_β env[l,β] b[β,s,b']
            let t: Vec<f64> = (0..rb).map(|bp| (0..lb).map(|bb| env.at(l, bb) * b.get(bb, s, bp)).sum()).collect();
            for r in 0..rx {
                let xv = x.get(l, s, r);
                for (o, tv) in out[r * rb..(r + 1) * rb].iter_mut().zip(&t) {
                    *o += xv * tv;
                }
            }
        }
    }
    Env2 { d: [rx, rb], data: out }
}

fn extend_right_b(env: &Env2, x: &Core, b: &Core) -> Env2 {
    let (lx, rx, lb, rb) = (x.left(), x.right(), b.left(), b.right());
    let mut out = vec![0.0; lx * lb];
    for bb in 0..lb {
        for s in 0..2 {
            // t[r] = Σ_{b'} b[β,s,b'] env[r,b']
            let t: Vec<f64> = (0..rx).map(|r| (0..rb).map(|bp| b.get(bb, s, bp) * env.at(r, bp)).sum()).collect();
            for l in 0..lx {
                out[l * lb + bb] += (0..rx).map(|r| x.get(l, s, r) * t[r]).sum::<f64>();
            }
        }
    }
    Env2 { d: [lx, lb], data: out }
}

/// Dense local system for the block `(i, i+1)`.
fn local_system(
    la: &Env3,
    ra: &Env3,
    w1: &super::OpCore,
    w2: &super::OpCore,
    lb: &Env2,
    rb: &Env2,
    b1: &Core,
    b2: &Core,
) -> (DMatrix<f64>, DVector<f64>) {
    let (lx, rx) = (la.d[0], ra.d[0]);
    let mid = w1.right();
    // p1[(l,s1,l',s1'), c]
    let rows1 = lx * 2 * lx * 2;
    let mut p1: DMatrix<f64> = DMatrix::zeros(rows1, mid);
    for l in 0..lx {
        for s1 in 0..2 {
            for lp in 0..lx {
                for s1p in 0..2 {
                    let row = ((l * 2 + s1) * lx + lp) * 2 + s1p;
                    for c in 0..mid {
                        p1[(row, c)] = (0..la.d[1]).map(|a| la.at(l, a, lp) * w1.get(a, s1, s1p, c)).sum();
                    }
                }
            }
        }
    }
    // p2[c, (s2,r,s2',r')]
    let cols2 = 2 * rx * 2 * rx;
    let mut p2: DMatrix<f64> = DMatrix::zeros(mid, cols2);
    for c in 0..mid {
        for s2 in 0..2 {
            for r in 0..rx {
                for s2p in 0..2 {
                    for rp in 0..rx {
                        let col = ((s2 * rx + r) * 2 + s2p) * rx + rp;
                        p2[(c, col)] = (0..ra.d[1]).map(|e| w2.get(c, s2, s2p, e) * ra.at(r, e, rp)).sum();
                    }
                }
            }
        }
    }
    let p = p1 * p2;
    let n = lx * 4 * rx;
    let mut m = DMatrix::zeros(n, n);
    for l in 0..lx {
        for s1 in 0..2 {
            for lp in 0..lx {
                for s1p in 0..2 {
                    let prow = ((l * 2 + s1) * lx + lp) * 2 + s1p;
                    for s2 in 0..2 {
                        for r in 0..rx {
                            for s2p in 0..2 {
                                for rp in 0..rx {
                                    let pcol = ((s2 * rx + r) * 2 + s2p) * rx + rp;
                                    let row = ((l * 2 + s1) * 2 + s2) * rx + r;
                                    let col = ((lp * 2 + s1p) * 2 + s2p) * rx + rp;
                                    m[(row, col)] = p[(prow, pcol)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    // right-hand side: u1[(l,s1), γ] · u2[γ, (s2,r)]
    let gamma = b1.right();
    let u1: DMatrix<f64> = DMatrix::from_fn(lx * 2, gamma, |row, g| {
        let (l, s1) = (row / 2, row % 2);
        (0..lb.d[1]).map(|bb| lb.at(l, bb) * b1.get(bb, s1, g)).sum()
    });
    let u2: DMatrix<f64> = DMatrix::from_fn(gamma, 2 * rx, |g, col| {
        let (s2, r) = (col / rx, col % rx);
        (0..rb.d[1]).map(|d| b2.get(g, s2, d) * rb.at(r, d)).sum()
    });
    let f = u1 * u2;
    let rhs = DVector::from_iterator(n, (0..lx * 2).flat_map(|row| (0..2 * rx).map(move |col| (row, col))).map(|(r, c)| f[(r, c)]));
    (m, rhs)
}

fn solve_dense(m: DMatrix<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (&m - m.transpose()).amax();
    if asym <= 1e-12 * scale {
        if let Some(ch) = m.clone().cholesky() {
            return Ok(ch.solve(f));
        }
    }
    if let Some(x) = m.clone().lu().solve(f) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    m.svd(true, true)
        .solve(f, 1e-14 * scale)
        .map_err(|e| Error::Numerical(format!("local least-squares solve failed: {e}")))
}

fn relative_residual(a: &TrainOperator, x: &TensorTrain, b: &TensorTrain, b_norm: f64) -> Result<f64> {
    Ok(a.apply(x)?.sub(b)?.norm() / b_norm)
}

/// Solve `A x = b` with the bond dimension of `x` capped at `opts.max_rank`.
///
/// Returns the best iterate seen; `report.converged` tells whether it met
/// `opts.tol`.
pub fn mals_solve(
    a: &TrainOperator,
    b: &TensorTrain,
    x0: Option<&TensorTrain>,
    opts: &MalsOptions,
) -> Result<(TensorTrain, MalsReport)> {
    let n = b.n_sites();
    if a.n_sites() != n {
        return Err(Error::SizeMismatch { expected: n, got: a.n_sites() });
    }
    if opts.max_rank == 0 {
        return Err(Error::Numerical("MALS bond cap must be at least 1".into()));
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok((b.scale(0.0), MalsReport { residual: 0.0, sweeps: 0, converged: true }));
    }
    if n == 1 {
        let m = a.dense()?;
        let f = DVector::from_vec(b.contract_to_vector()?);
        let y = solve_dense(m, &f)?;
        let x = TensorTrain::product(&[[y[0], y[1]]])?;
        let residual = relative_residual(a, &x, b, b_norm)?;
        return Ok((x, MalsReport { residual, sweeps: 1, converged: residual <= opts.tol }));
    }

    let mut x = x0.unwrap_or(b).truncate(Some(opts.max_rank), 0.0);
    let mut cores: Vec<Core> = x.cores().to_vec();
    let (acores, bcores) = (a.cores(), b.cores());

    let mut left_a: Vec<Env3> = vec![Env3::trivial(); n + 1];
    let mut left_b: Vec<Env2> = vec![Env2::trivial(); n + 1];
    let mut right_a: Vec<Env3> = vec![Env3::trivial(); n + 1];
    let mut right_b: Vec<Env2> = vec![Env2::trivial(); n + 1];
    for i in (1..n).rev() {
        right_a[i] = extend_right_a(&right_a[i + 1], &cores[i], &acores[i]);
        right_b[i] = extend_right_b(&right_b[i + 1], &cores[i], &bcores[i]);
    }

    let mut best = (relative_residual(a, &x, b, b_norm)?, x.clone());
    let mut done = 0;
    let local = |i: usize, la: &Env3, ra: &Env3, lb: &Env2, rb: &Env2| -> Result<DMatrix<f64>> {
        let (m, f) = local_system(la, ra, &acores[i], &acores[i + 1], lb, rb, &bcores[i], &bcores[i + 1]);
        let y = solve_dense(m, &f)?;
        let (lx, rx) = (la.d[0], ra.d[0]);
        Ok(DMatrix::from_row_slice(lx * 2, 2 * rx, y.as_slice()))
    };

    while done < opts.sweeps && best.0 > opts.tol {
        for i in 0..n - 1 {
            let y = local(i, &left_a[i], &right_a[i + 2], &left_b[i], &right_b[i + 2])?;
            let scale = y.norm();
            let (u, s, v_t) = sorted_svd(y);
            let k = truncation_rank(&s, Some(opts.max_rank), SVD_FLOOR * scale);
            cores[i] = Core::from_left_matrix(&u.columns(0, k).into_owned());
            cores[i + 1] = Core::from_right_matrix(&DMatrix::from_fn(k, v_t.ncols(), |r, c| s[r] * v_t[(r, c)]));
            left_a[i + 1] = extend_left_a(&left_a[i], &cores[i], &acores[i]);
            left_b[i + 1] = extend_left_b(&left_b[i], &cores[i], &bcores[i]);
        }
        for i in (0..n - 1).rev() {
            let y = local(i, &left_a[i], &right_a[i + 2], &left_b[i], &right_b[i + 2])?;
            let scale = y.norm();
            let (u, s, v_t) = sorted_svd(y);
            let k = truncation_rank(&s, Some(opts.max_rank), SVD_FLOOR * scale);
            cores[i + 1] = Core::from_right_matrix(&v_t.rows(0, k).into_owned());
            cores[i] = Core::from_left_matrix(&DMatrix::from_fn(u.nrows(), k, |r, c| u[(r, c)] * s[c]));
            right_a[i + 1] = extend_right_a(&right_a[i + 2], &cores[i + 1], &acores[i + 1]);
            right_b[i + 1] = extend_right_b(&right_b[i + 2], &cores[i + 1], &bcores[i + 1]);
        }
        done += 1;
        x = TensorTrain::from_cores(cores.clone())?;
        x.form = super::CanonicalForm::Right;
        let res = relative_residual(a, &x, b, b_norm)?;
        if !res.is_finite() {
            return Err(Error::Numerical("MALS produced a non-finite iterate".into()));
        }
        if res < best.0 {
            best = (res, x.clone());
        }
    }
    let (residual, x) = best;
    Ok((x, MalsReport { residual, sweeps: done, converged: residual <= opts.tol }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::tests::random_train;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs_in_one_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random_train(&mut rng, 6, 3);
        let id = TrainOperator::identity(6).unwrap();
        let (x, rep) = mals_solve(&id, &b, Some(&TensorTrain::ones(6).unwrap()), &MalsOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.sweeps, 1);
        let (vx, vb) = (x.contract_to_vector().unwrap(), b.contract_to_vector().unwrap());
        assert!(vx.iter().zip(&vb).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn positive_diagonal_matches_dense_division() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 6;
        let d: Vec<f64> = (0..1 << n).map(|_| rng.random_range(0.5..3.0)).collect();
        let dt = TensorTrain::from_dense(&d, None, 0.0).unwrap();
        let b = random_train(&mut rng, n, 2);
        let opts = MalsOptions { max_rank: 8, sweeps: 10, tol: 1e-12 };
        let (x, rep) = mals_solve(&TrainOperator::diag(&dt), &b, None, &opts).unwrap();
        let (vx, vb) = (x.contract_to_vector().unwrap(), b.contract_to_vector().unwrap());
        for j in 0..1 << n {
            assert!((vx[j] - vb[j] / d[j]).abs() < 1e-8, "entry {j}");
        }
        assert!(rep.residual < 1e-10);
        assert!(x.max_bond() <= 8);
    }

    #[test]
    fn bond_cap_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = random_train(&mut rng, 7, 3).hadamard(&random_train(&mut rng, 7, 3)).unwrap();
        let shift = TensorTrain::constant(7, 20.0).unwrap();
        let a = TrainOperator::diag(&d.add(&shift).unwrap());
        let b = random_train(&mut rng, 7, 4);
        let (x, rep) = mals_solve(&a, &b, None, &MalsOptions { max_rank: 2, sweeps: 4, tol: 1e-14 }).unwrap();
        assert!(x.max_bond() <= 2);
        assert!(!rep.converged);
        assert!(rep.residual < 1.0);
    }

    #[test]
    fn zero_rhs_and_single_site() {
        let a = TrainOperator::identity(3).unwrap();
        let (x, rep) = mals_solve(&a, &TensorTrain::constant(3, 0.0).unwrap(), None, &MalsOptions::default()).unwrap();
        assert_eq!(x.norm(), 0.0);
        assert!(rep.converged);
        let d = TensorTrain::product(&[[2.0, 4.0]]).unwrap();
        let b = TensorTrain::product(&[[1.0, 1.0]]).unwrap();
        let (x, _) = mals_solve(&TrainOperator::diag(&d), &b, None, &MalsOptions::default()).unwrap();
        let v = x.contract_to_vector().unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.25).abs() < 1e-15);
        assert!(mals_solve(&a, &TensorTrain::ones(4).unwrap(), None, &MalsOptions::default()).is_err());
    }
}
