//! Shift operators on a binary-encoded axis and the finite-difference
//! operators assembled from them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LadderString, QubitOperator, SiteFactor};
use crate::error::{Error, Result};
use crate::grid::{BoundarySpec, Grid};

fn shift(n_bits: usize, periodic: bool, lower: SiteFactor, carry: SiteFactor) -> Result<QubitOperator> {
    if n_bits < 1 {
        return Err(Error::Grid("shift operator needs at least one bit".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut op = QubitOperator::zero(n_bits);
    // term j': identities above, `lower` at site j'-1, `carry` on the j'-1 sites below
    for jp in 1..=n_bits {
        let factors = (0..n_bits)
            .map(|site| match site.cmp(&(jp - 1)) {
                std::cmp::Ordering::Less => carry,
                std::cmp::Ordering::Equal => lower,
                std::cmp::Ordering::Greater => SiteFactor::Identity,
            })
            .collect();
        op.add_term(one, LadderString::new(factors));
    }
    if periodic {
        op.add_term(one, LadderString::new(vec![carry; n_bits]));
    }
    Ok(op)
}

/// `S⁻ = Σ_j |j−1><j|`, so `(S⁻u)_j = u_{j+1}`. With `periodic` the closure
/// `|2^n−1><0|` is added.
pub fn shift_minus(n_bits: usize, periodic: bool) -> Result<QubitOperator> {
    shift(n_bits, periodic, SiteFactor::P01, SiteFactor::P10)
}

/// `S⁺ = (S⁻)†`, so `(S⁺u)_j = u_{j−1}`.
pub fn shift_plus(n_bits: usize, periodic: bool) -> Result<QubitOperator> {
    shift(n_bits, periodic, SiteFactor::P10, SiteFactor::P01)
}

/// Place an operator acting on one axis's bits into the full system register.
pub fn embed_axis(op: &QubitOperator, grid: &Grid, axis: usize) -> QubitOperator {
    let low = grid.axis_offset(axis);
    let high = grid.n_qubits() - low - grid.axis_bits(axis);
    op.embed(high, low)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceScheme {
    /// `(u_{j+1} − u_j)/h`
    Forward,
    /// `(u_j − u_{j−1})/h`
    Backward,
    /// `(−u_{j+2} + 8u_{j+1} − 8u_{j−1} + u_{j−2})/(12h)`
    Central4,
}

/// First-derivative operator along `axis` on the full system register.
///
/// Out-of-domain neighbours read as zero on non-periodic axes; periodic axes
/// wrap around.
pub fn difference_operator(
    scheme: DifferenceScheme,
    axis: usize,
    grid: &Grid,
    boundary: &BoundarySpec,
) -> Result<QubitOperator> {
    if axis >= grid.dim() {
        return Err(Error::Grid(format!("axis {axis} out of range for a {}-d grid", grid.dim())));
    }
    boundary.check_grid(grid)?;
    let periodic = boundary.is_periodic(axis);
    let nb = grid.axis_bits(axis);
    let sm = embed_axis(&shift_minus(nb, periodic)?, grid, axis);
    let sp = embed_axis(&shift_plus(nb, periodic)?, grid, axis);
    let id = QubitOperator::identity(grid.n_qubits());
    let h = grid.h();
    let op = match scheme {
        DifferenceScheme::Forward => sm.sub(&id)?.scale_real(1.0 / h),
        DifferenceScheme::Backward => id.sub(&sp)?.scale_real(1.0 / h),
        DifferenceScheme::Central4 => {
            let sm2 = sm.mul(&sm)?;
            let sp2 = sp.mul(&sp)?;
            sm2.scale_real(-1.0)
                .add(&sm.scale_real(8.0))?
                .add(&sp.scale_real(-8.0))?
                .add(&sp2)?
                .scale_real(1.0 / (12.0 * h))
        }
    };
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryKind;
    use crate::qubit_op::tests::{c, max_diff};
    use crate::qubit_op::Statevector;
    use nalgebra::DMatrix;

    fn grid1(n: usize, h: f64) -> Grid {
        Grid::new(vec![n], h).unwrap()
    }

    #[test]
    fn two_bit_shift_matches_listing() {
        let s = shift_minus(2, false).unwrap();
        let mut expect = QubitOperator::parse_term(c(1.0), "-+").unwrap();
        expect.add_term(c(1.0), LadderString::parse("I-").unwrap());
        assert_eq!(s, expect);
        // |0><1| + |1><2| + |2><3|
        let d = s.dense().unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if col == r + 1 { 1.0 } else { 0.0 };
                assert_eq!(d[(r, col)].re, want);
            }
        }
    }

    #[test]
    fn one_bit_shift() {
        assert_eq!(shift_minus(1, false).unwrap(), QubitOperator::parse_term(c(1.0), "-").unwrap());
        assert!(shift_minus(0, false).is_err());
    }

    #[test]
    fn periodic_shift_is_cyclic_permutation() {
        let d = shift_minus(3, true).unwrap().dense().unwrap();
        let perm = DMatrix::from_fn(8, 8, |r, col| if col == (r + 1) % 8 { c(1.0) } else { c(0.0) });
        assert!(max_diff(&d, &perm) < 1e-15);
    }

    #[test]
    fn shift_adjoint_pairing() {
        for n in 1..=10 {
            for p in [false, true] {
                assert_eq!(shift_minus(n, p).unwrap().adjoint(), shift_plus(n, p).unwrap());
            }
        }
    }

    #[test]
    fn shift_moves_basis_state() {
        let s = shift_minus(3, false).unwrap();
        let out = s.apply(&Statevector::basis(3, 5)).unwrap();
        assert_eq!(out, Statevector::basis(3, 4));
    }

    #[test]
    fn forward_difference_on_constant_field() {
        let g = grid1(3, 0.5);
        let b = BoundarySpec::uniform(1, BoundaryKind::Dirichlet);
        let d = difference_operator(DifferenceScheme::Forward, 0, &g, &b).unwrap();
        let out = d.apply(&Statevector::from_real(3, &[1.0; 8]).unwrap()).unwrap();
        for j in 0..7 {
            assert!(out.amplitudes()[j].norm() < 1e-15);
        }
        assert!((out.amplitudes()[7].re + 1.0 / 0.5).abs() < 1e-14);
    }

    #[test]
    fn forward_difference_on_linear_field() {
        let g = grid1(3, 1.0);
        let b = BoundarySpec::uniform(1, BoundaryKind::Dirichlet);
        let d = difference_operator(DifferenceScheme::Forward, 0, &g, &b).unwrap();
        let u: Vec<f64> = (0..8).map(|j| j as f64).collect();
        let out = d.apply(&Statevector::from_real(3, &u).unwrap()).unwrap();
        for j in 0..7 {
            assert!((out.amplitudes()[j].re - 1.0).abs() < 1e-14);
        }
        assert!((out.amplitudes()[7].re + 7.0).abs() < 1e-14);
    }

    #[test]
    fn central4_matches_stencil_and_is_antisymmetric_when_periodic() {
        let g = Grid::new(vec![2, 3], 0.25).unwrap();
        let b = BoundarySpec::new(vec![
            (BoundaryKind::Dirichlet, BoundaryKind::Neumann),
            (BoundaryKind::Periodic, BoundaryKind::Periodic),
        ])
        .unwrap();
        for axis in 0..2 {
            let d = difference_operator(DifferenceScheme::Central4, axis, &g, &b).unwrap().dense().unwrap();
            let periodic = b.is_periodic(axis);
            let mut stencil = DMatrix::<num_complex::Complex64>::zeros(32, 32);
            for j in 0..32 {
                for (delta, w) in [(2isize, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0)] {
                    if let Some(k) = g.neighbor(j, axis, delta, periodic) {
                        stencil[(j, k)] += c(w / (12.0 * 0.25));
                    }
                }
            }
            assert!(max_diff(&d, &stencil) < 1e-12);
            if periodic {
                assert!(max_diff(&d, &(-d.transpose())) < 1e-12);
            }
        }
    }

    #[test]
    fn difference_rejects_bad_axis() {
        let g = grid1(2, 1.0);
        let b = BoundarySpec::uniform(1, BoundaryKind::Dirichlet);
        assert!(difference_operator(DifferenceScheme::Forward, 1, &g, &b).is_err());
    }
}
