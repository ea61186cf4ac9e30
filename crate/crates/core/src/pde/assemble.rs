use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Grid};
use crate::logic_min::{field_to_operator, DiagonalEncoding, FieldTransform};
use crate::qubit_op::{difference_operator, embed_axis, DifferenceScheme, LadderString, QubitOperator, SiteFactor};

use super::{Family, PdeProblem};

/// Minimized diagonal coefficient operators, keyed by name
/// (`rho^-1`, `rho^-1/2`, `kappa^1/2`, `alpha^1/2`, `zeta` for second order;
/// `kappa`, `alpha`, `beta+{μ}`, `beta-{μ}` for first order).
#[derive(Clone, Debug, Default)]
pub struct DiagonalOperators {
    pub encodings: BTreeMap<String, DiagonalEncoding>,
}

impl DiagonalOperators {
    pub fn build(p: &PdeProblem) -> Result<Self> {
        let n = p.grid().n_qubits();
        let mut encodings = BTreeMap::new();
        let mut put = |key: String, field: &crate::grid::PiecewiseField, t: FieldTransform| -> Result<()> {
            encodings.insert(key, field_to_operator(field, n, t)?);
            Ok(())
        };
        match p.family() {
            Family::SecondOrder => {
                put("rho^-1".into(), p.field("rho")?, FieldTransform::Inverse)?;
                put("rho^-1/2".into(), p.field("rho")?, FieldTransform::InverseSqrt)?;
                put("kappa^1/2".into(), p.field("kappa")?, FieldTransform::Sqrt)?;
                put("alpha^1/2".into(), p.field("alpha")?, FieldTransform::Sqrt)?;
                put("zeta".into(), p.field("zeta")?, FieldTransform::Identity)?;
            }
            Family::FirstOrder => {
                put("kappa".into(), p.field("kappa")?, FieldTransform::Identity)?;
                put("alpha".into(), p.field("alpha")?, FieldTransform::Identity)?;
                for mu in 0..p.grid().dim() {
                    let beta = p.field(&format!("beta{mu}"))?;
                    put(format!("beta+{mu}"), &beta.map(format!("beta+{mu}"), |b| b.max(0.0)), FieldTransform::Identity)?;
                    put(format!("beta-{mu}"), &beta.map(format!("beta-{mu}"), |b| b.min(0.0)), FieldTransform::Identity)?;
                }
            }
        }
        Ok(DiagonalOperators { encodings })
    }

    pub fn get(&self, key: &str) -> Result<&QubitOperator> {
        self.encodings
            .get(key)
            .map(|e| &e.operator)
            .ok_or_else(|| Error::Problem(format!("missing diagonal operator `{key}`")))
    }
}

/// Build the diagonal operators and the coefficient matrix `A` in one go.
pub fn assemble(p: &PdeProblem) -> Result<(QubitOperator, DiagonalOperators)> {
    let diag = DiagonalOperators::build(p)?;
    let a = match p.family() {
        Family::SecondOrder => assemble_second_order(p, &diag)?,
        Family::FirstOrder => assemble_first_order(p, &diag)?,
    };
    Ok((a, diag))
}

fn string_op(factors: Vec<SiteFactor>, coef: f64) -> QubitOperator {
    QubitOperator::from_term(num_complex::Complex64::new(coef, 0.0), LadderString::new(factors))
}

/// `σ^{⊗(n−1)} ⊗ (2σ − ladder)` on one axis, embedded in the system register.
/// `upper` selects the top face (`σ11`, `σ10`), otherwise the bottom face
/// (`σ00`, `σ01`).
fn edge_operator(grid: &Grid, axis: usize, upper: bool) -> QubitOperator {
    let nb = grid.axis_bits(axis);
    let (proj, ladder) = if upper { (SiteFactor::P11, SiteFactor::P10) } else { (SiteFactor::P00, SiteFactor::P01) };
    let mut diag = vec![proj; nb];
    let mut off = vec![proj; nb];
    off[0] = ladder;
    diag[0] = proj;
    let op = string_op(diag, 2.0).add(&string_op(off, -1.0)).expect("same width");
    embed_axis(&op, grid, axis)
}

/// Projector `σ^{⊗n_μ}` onto the bottom (`σ00`) or top (`σ11`) layer of an axis.
fn face_projector(grid: &Grid, axis: usize, upper: bool) -> QubitOperator {
    let proj = if upper { SiteFactor::P11 } else { SiteFactor::P00 };
    embed_axis(&string_op(vec![proj; grid.axis_bits(axis)], 1.0), grid, axis)
}

/// Gradient used by the `|μ+1><0|` row: the backward difference, switched to
/// the forward difference on the bottom row when that face is Neumann.
pub fn gradient_operator(p: &PdeProblem, axis: usize) -> Result<QubitOperator> {
    let g = p.grid();
    let mut op = difference_operator(DifferenceScheme::Backward, axis, g, p.boundary())?;
    if p.boundary().lower(axis) == BoundaryKind::Neumann {
        op = op.sub(&edge_operator(g, axis, false).scale_real(1.0 / g.h()))?;
    }
    Ok(op)
}

/// Divergence used by the `|0><μ+1|` row: the forward difference, switched to
/// the backward difference on the top row when that face is Dirichlet.
pub fn divergence_operator(p: &PdeProblem, axis: usize) -> Result<QubitOperator> {
    let g = p.grid();
    let mut op = difference_operator(DifferenceScheme::Forward, axis, g, p.boundary())?;
    if p.boundary().upper(axis) == BoundaryKind::Dirichlet {
        op = op.add(&edge_operator(g, axis, true).scale_real(1.0 / g.h()))?;
    }
    Ok(op)
}

fn check_family(p: &PdeProblem, want: Family) -> Result<()> {
    if p.family() != want {
        return Err(Error::Problem(format!("expected a {want:?} problem, got {:?}", p.family())));
    }
    Ok(())
}

/// Coefficient matrix of the second-order family on `block ⊗ system` qubits.
pub fn assemble_second_order(p: &PdeProblem, diag: &DiagonalOperators) -> Result<QubitOperator> {
    check_family(p, Family::SecondOrder)?;
    let layout = p.layout();
    let bq = layout.block_qubits;
    let d = layout.dim;
    let blk = |r: usize, c: usize| QubitOperator::ket_bra(bq, r, c);

    let rho_inv = diag.get("rho^-1")?;
    let rho_isqrt = diag.get("rho^-1/2")?;
    let kappa_sqrt = diag.get("kappa^1/2")?;
    let alpha_sqrt = diag.get("alpha^1/2")?;
    let zeta = diag.get("zeta")?;

    let mut a = blk(0, 0).kron(&rho_inv.mul(zeta)?);
    for mu in 0..d {
        let div = rho_isqrt.mul(&divergence_operator(p, mu)?)?.mul(kappa_sqrt)?;
        let grad = kappa_sqrt.mul(&gradient_operator(p, mu)?)?.mul(rho_isqrt)?;
        a = a.sub(&blk(0, mu + 1).kron(&div))?;
        a = a.sub(&blk(mu + 1, 0).kron(&grad))?;
    }
    let absorb = rho_isqrt.mul(alpha_sqrt)?;
    a = a.add(&blk(0, d + 1).kron(&absorb))?;
    a = a.sub(&blk(d + 1, 0).kron(&absorb))?;
    Ok(a)
}

/// Coefficient matrix of the first-order family on the system qubits.
pub fn assemble_first_order(p: &PdeProblem, diag: &DiagonalOperators) -> Result<QubitOperator> {
    check_family(p, Family::FirstOrder)?;
    let g = p.grid();
    let h = g.h();
    let kappa = diag.get("kappa")?;
    let mut a = diag.get("alpha")?.clone();
    for mu in 0..g.dim() {
        let fwd = difference_operator(DifferenceScheme::Forward, mu, g, p.boundary())?;
        let bwd = difference_operator(DifferenceScheme::Backward, mu, g, p.boundary())?;
        let diffusion = fwd.mul(kappa)?.mul(&bwd)?.add(&bwd.mul(kappa)?.mul(&fwd)?)?;
        a = a.sub(&diffusion.scale_real(0.5))?;
        a = a.add(&diag.get(&format!("beta+{mu}"))?.mul(&bwd)?)?;
        a = a.add(&diag.get(&format!("beta-{mu}"))?.mul(&fwd)?)?;

        let lower = face_projector(g, mu, false);
        let upper = face_projector(g, mu, true);
        match p.boundary().lower(mu) {
            BoundaryKind::Neumann => a = a.add(&fwd.mul(kappa)?.mul(&lower)?.scale_real(0.5 / h))?,
            BoundaryKind::Dirichlet => a = a.add(&kappa.mul(&lower)?.scale_real(0.5 / (h * h)))?,
            BoundaryKind::Periodic => {}
        }
        match p.boundary().upper(mu) {
            BoundaryKind::Neumann => a = a.sub(&bwd.mul(kappa)?.mul(&upper)?.scale_real(0.5 / h))?,
            BoundaryKind::Dirichlet => a = a.add(&kappa.mul(&upper)?.scale_real(0.5 / (h * h)))?,
            BoundaryKind::Periodic => {}
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundarySpec, PiecewiseField, Region};
    use crate::pde::stencil::dense_stencil_matrix;
    use crate::qubit_op::tests::{c, max_diff};
    use nalgebra::DMatrix;

    fn u(v: f64) -> PiecewiseField {
        PiecewiseField::uniform("f", v)
    }

    fn acoustic(c_field: PiecewiseField, n: Vec<usize>, b: BoundarySpec) -> PdeProblem {
        let g = Grid::new(n, 1.0).unwrap();
        let rho = c_field.map("rho", |c| 1.0 / (c * c));
        PdeProblem::second_order(g, b, rho, u(0.0), u(1.0), u(0.0), 1.0, 0.1).unwrap()
    }

    fn mixed_boundaries() -> BoundarySpec {
        // axis 0 (x0): Dirichlet left, Neumann right; axis 1 periodic
        BoundarySpec::new(vec![
            (BoundaryKind::Dirichlet, BoundaryKind::Neumann),
            (BoundaryKind::Periodic, BoundaryKind::Periodic),
        ])
        .unwrap()
    }

    #[test]
    fn acoustic_matrix_is_anti_hermitian() {
        let g = Grid::new(vec![3, 3], 1.0).unwrap();
        let region = Region::from_box(&g, &[(2, 4), (0, 8)], 10.0).unwrap();
        let cf = PiecewiseField::new("c", 1.0, vec![region]).unwrap();
        let p = acoustic(cf, vec![3, 3], mixed_boundaries());
        let (a, _) = assemble(&p).unwrap();
        let (l, h) = a.hermitian_split();
        assert!(l.is_empty(), "L has {} terms", l.len());
        // H = i Σ (|0><μ+1| ⊗ c D⁺ + |μ+1><0| ⊗ D⁻ c)
        let cdiag = field_to_operator(&PiecewiseField::new("c", 1.0, vec![Region::from_box(&g, &[(2, 4), (0, 8)], 10.0).unwrap()]).unwrap(), 6, FieldTransform::Identity).unwrap().operator;
        let mut expect = QubitOperator::zero(8);
        for mu in 0..2 {
            let f = difference_operator(DifferenceScheme::Forward, mu, &g, p.boundary()).unwrap();
            let b = difference_operator(DifferenceScheme::Backward, mu, &g, p.boundary()).unwrap();
            expect = expect.add(&QubitOperator::ket_bra(2, 0, mu + 1).kron(&cdiag.mul(&f).unwrap())).unwrap();
            expect = expect.add(&QubitOperator::ket_bra(2, mu + 1, 0).kron(&b.mul(&cdiag).unwrap())).unwrap();
        }
        let expect = expect.scale(num_complex::Complex64::new(0.0, 1.0));
        assert!(max_diff(&h.dense().unwrap(), &expect.dense().unwrap()) < 1e-12);
    }

    #[test]
    fn two_node_second_order_matches_hand_assembly() {
        let g = Grid::new(vec![1], 1.0).unwrap();
        let b = BoundarySpec::uniform(1, BoundaryKind::Dirichlet);
        let p = PdeProblem::second_order(g, b, u(1.0), u(0.0), u(1.0), u(0.0), 1.0, 0.1).unwrap();
        let (a, _) = assemble(&p).unwrap();
        let dense = a.dense().unwrap();
        // blocks: 0 = u̇, 1 = ∂u, 2 = u (α = 0), 3 unused
        // divergence with top-row backward replacement: rows [-1 1; -1 1]
        // gradient (bottom Dirichlet): rows [1 0; -1 1]
        let mut expect = DMatrix::from_element(8, 8, c(0.0));
        let div = [[-1.0, 1.0], [-1.0, 1.0]];
        let grad = [[1.0, 0.0], [-1.0, 1.0]];
        for r in 0..2 {
            for k in 0..2 {
                expect[(r, 2 + k)] = c(-div[r][k]);
                expect[(2 + r, k)] = c(-grad[r][k]);
            }
        }
        assert!(max_diff(&dense, &expect) < 1e-14);
    }

    #[test]
    fn zero_damping_leaves_block_00_empty() {
        let g = Grid::new(vec![2], 1.0).unwrap();
        let p = PdeProblem::second_order(g, BoundarySpec::uniform(1, BoundaryKind::Dirichlet), u(2.0), u(0.0), u(1.0), u(0.5), 1.0, 0.1).unwrap();
        let (a, _) = assemble(&p).unwrap();
        let d = a.dense().unwrap();
        for r in 0..4 {
            for k in 0..4 {
                assert_eq!(d[(r, k)], c(0.0));
            }
        }
    }

    #[test]
    fn heat_matrix_is_hermitian_psd() {
        let g = Grid::new(vec![3, 2], 1.0).unwrap();
        for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
            let p = PdeProblem::first_order(g.clone(), BoundarySpec::uniform(2, kind), u(0.1), vec![u(0.0), u(0.0)], u(0.0), 1.0, 0.1).unwrap();
            let (a, _) = assemble(&p).unwrap();
            let (l, h) = a.hermitian_split();
            assert!(h.is_empty());
            let eig = nalgebra::SymmetricEigen::new(l.dense().unwrap());
            assert!(eig.eigenvalues.iter().all(|&x| x >= -1e-10));
        }
    }

    #[test]
    fn heat_1d_matches_second_difference() {
        let g = Grid::new(vec![2], 1.0).unwrap();
        let p = PdeProblem::first_order(g, BoundarySpec::uniform(1, BoundaryKind::Dirichlet), u(0.5), vec![u(0.0)], u(0.0), 1.0, 0.1).unwrap();
        let (a, _) = assemble(&p).unwrap();
        let d = a.dense().unwrap();
        // −κ·(tridiag(1, −2, 1)) with ghost zeros
        for r in 0..4 {
            for k in 0..4 {
                let want = match (r as isize - k as isize).abs() {
                    0 => 2.0 * 0.5,
                    1 => -0.5,
                    _ => 0.0,
                };
                assert!((d[(r, k)].re - want).abs() < 1e-14, "({r},{k})");
            }
        }
    }

    #[test]
    fn pure_absorption_is_diagonal_decay() {
        let g = Grid::new(vec![2], 1.0).unwrap();
        let p = PdeProblem::first_order(g, BoundarySpec::uniform(1, BoundaryKind::Neumann), u(0.0), vec![u(0.0)], u(0.3), 1.0, 0.1).unwrap();
        let (a, _) = assemble(&p).unwrap();
        assert_eq!(a, QubitOperator::identity(2).scale_real(0.3));
    }

    #[test]
    fn assembly_matches_stencil_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let so = rng.random_bool(0.5);
            let p = crate::pde::stencil::random_problem(&mut rng, so, 6);
            let (a, _) = assemble(&p).unwrap();
            let oracle = dense_stencil_matrix(&p).unwrap();
            assert!(max_diff(&a.dense().unwrap(), &oracle) < 1e-12);
        }
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let g = Grid::new(vec![2], 1.0).unwrap();
        let p = PdeProblem::first_order(g, BoundarySpec::uniform(1, BoundaryKind::Neumann), u(1.0), vec![u(0.0)], u(0.0), 1.0, 0.1).unwrap();
        let diag = DiagonalOperators::build(&p).unwrap();
        assert!(assemble_second_order(&p, &diag).is_err());
        assert!(assemble_first_order(&p, &DiagonalOperators::default()).is_err());
    }
}
