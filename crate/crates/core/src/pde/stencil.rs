//! Direct dense assembly of the coefficient matrix from node stencils.
//!
//! Boundary handling is expressed with ghost values instead of operator
//! strings, which makes this an independent check on the symbolic assembly:
//!
//! * Dirichlet ghost nodes read `u = 0`; Neumann faces carry zero flux.
//! * Second order: the divergence row extrapolates the flux linearly past a
//!   Dirichlet top face, and the gradient row extrapolates the velocity
//!   linearly past a Neumann bottom face.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::BoundaryKind;
use crate::qubit_op::DENSE_CAP;

use super::{Family, PdeProblem};

/// `(node, weight)` pairs making up one stencil value.
type Combo = Vec<(usize, f64)>;

/// Dense `A` built from stencils, on the same register layout as the symbolic assembly.
pub fn dense_stencil_matrix(p: &PdeProblem) -> Result<DMatrix<Complex64>> {
    let layout = p.layout();
    if layout.total_qubits() > DENSE_CAP {
        return Err(Error::CapExceeded { what: "stencil oracle".into(), cap: DENSE_CAP });
    }
    let dim = 1usize << layout.total_qubits();
    let mut m = DMatrix::from_element(dim, dim, Complex64::default());
    match p.family() {
        Family::FirstOrder => first_order(p, &mut m)?,
        Family::SecondOrder => second_order(p, &mut m)?,
    }
    Ok(m)
}

fn values(p: &PdeProblem, name: &str) -> Result<Vec<f64>> {
    Ok(p.field(name)?.values(p.grid().n_nodes()))
}

/// The node on the other side of a face, or how the face closes.
enum Across {
    Node(usize),
    Closed(BoundaryKind),
}

fn across(p: &PdeProblem, j: usize, mu: usize, delta: isize) -> Across {
    let periodic = p.boundary().is_periodic(mu);
    match p.grid().neighbor(j, mu, delta, periodic) {
        Some(k) => Across::Node(k),
        None if delta > 0 => Across::Closed(p.boundary().upper(mu)),
        None => Across::Closed(p.boundary().lower(mu)),
    }
}

fn first_order(p: &PdeProblem, m: &mut DMatrix<Complex64>) -> Result<()> {
    let g = p.grid();
    let h = g.h();
    let kappa = values(p, "kappa")?;
    let alpha = values(p, "alpha")?;
    let mut add = |r: usize, c: usize, v: f64| m[(r, c)] += Complex64::new(v, 0.0);
    for j in 0..g.n_nodes() {
        add(j, j, alpha[j]);
        for mu in 0..g.dim() {
            let beta = values(p, &format!("beta{mu}"))?;
            // diffusion: −½ Σ_variants (F_{j+½} − F_{j−½})/h
            for right_weighted in [true, false] {
                // flux through the upper face, as a combo over nodes
                let upper: Combo = match across(p, j, mu, 1) {
                    Across::Node(k) => {
                        let kf = if right_weighted { kappa[k] } else { kappa[j] };
                        vec![(k, kf / h), (j, -kf / h)]
                    }
                    Across::Closed(BoundaryKind::Dirichlet) => vec![(j, -kappa[j] / h)],
                    Across::Closed(_) => vec![],
                };
                let lower: Combo = match across(p, j, mu, -1) {
                    Across::Node(k) => {
                        let kf = if right_weighted { kappa[j] } else { kappa[k] };
                        vec![(j, kf / h), (k, -kf / h)]
                    }
                    Across::Closed(BoundaryKind::Dirichlet) => vec![(j, kappa[j] / h)],
                    Across::Closed(_) => vec![],
                };
                for (k, w) in upper {
                    add(j, k, -0.5 * w / h);
                }
                for (k, w) in lower {
                    add(j, k, 0.5 * w / h);
                }
            }
            // upwind advection with zero ghosts
            let (bp, bm) = (beta[j].max(0.0), beta[j].min(0.0));
            add(j, j, bp / h - bm / h);
            if let Across::Node(k) = across(p, j, mu, -1) {
                add(j, k, -bp / h);
            }
            if let Across::Node(k) = across(p, j, mu, 1) {
                add(j, k, bm / h);
            }
        }
    }
    Ok(())
}

fn second_order(p: &PdeProblem, m: &mut DMatrix<Complex64>) -> Result<()> {
    let g = p.grid();
    let h = g.h();
    let layout = p.layout();
    let d = g.dim();
    let rho = values(p, "rho")?;
    let zeta = values(p, "zeta")?;
    let ks: Vec<f64> = values(p, "kappa")?.iter().map(|k| k.sqrt()).collect();
    let ri: Vec<f64> = rho.iter().map(|r| 1.0 / r.sqrt()).collect();
    let asq: Vec<f64> = values(p, "alpha")?.iter().map(|a| a.sqrt()).collect();
    let idx = |b: usize, j: usize| layout.index(b, j);
    let mut add = |r: usize, c: usize, v: f64| m[(r, c)] += Complex64::new(v, 0.0);

    for j in 0..g.n_nodes() {
        add(idx(0, j), idx(0, j), zeta[j] / rho[j]);
        add(idx(0, j), idx(d + 1, j), ri[j] * asq[j]);
        add(idx(d + 1, j), idx(0, j), -ri[j] * asq[j]);
        for mu in 0..d {
            // divergence of q = √κ w_{μ+1}: (q_{j+1} − q_j)/h
            let next: Combo = match across(p, j, mu, 1) {
                Across::Node(k) => vec![(k, 1.0)],
                Across::Closed(BoundaryKind::Dirichlet) => {
                    let prev = g.neighbor(j, mu, -1, false).expect("axis has at least two nodes");
                    vec![(j, 2.0), (prev, -1.0)]
                }
                Across::Closed(_) => vec![],
            };
            for (k, w) in next.into_iter().chain([(j, -1.0)]) {
                add(idx(0, j), idx(mu + 1, k), -ri[j] * w * ks[k] / h);
            }
            // gradient of v = ϱ^{-1/2} w_0: (v_j − v_{j−1})/h
            let prev: Combo = match across(p, j, mu, -1) {
                Across::Node(k) => vec![(k, 1.0)],
                Across::Closed(BoundaryKind::Neumann) => {
                    let next = g.neighbor(j, mu, 1, false).expect("axis has at least two nodes");
                    vec![(j, 2.0), (next, -1.0)]
                }
                Across::Closed(_) => vec![],
            };
            let terms = [(j, 1.0)].into_iter().chain(prev.into_iter().map(|(k, w)| (k, -w)));
            for (k, w) in terms {
                add(idx(mu + 1, j), idx(0, k), -ks[j] * w * ri[k] / h);
            }
        }
    }
    Ok(())
}

/// Random problem on at most `max_qubits` total qubits with piecewise-constant
/// coefficients and a random boundary mix.
#[cfg(test)]
pub(crate) fn random_problem(rng: &mut impl rand::Rng, second_order: bool, max_qubits: usize) -> PdeProblem {
    use crate::grid::{BoundarySpec, Grid, PiecewiseField};
    let d = rng.random_range(1..=2usize);
    let budget = if second_order { max_qubits - 2 } else { max_qubits };
    let n_bits: Vec<usize> = (0..d).map(|_| rng.random_range(1..=(budget / d).max(1))).collect();
    let h = [1.0, 0.5, 0.25][rng.random_range(0..3)];
    let grid = Grid::new(n_bits, h).unwrap();
    let kinds = [BoundaryKind::Dirichlet, BoundaryKind::Neumann];
    let faces = (0..d)
        .map(|_| {
            if rng.random_bool(0.25) {
                (BoundaryKind::Periodic, BoundaryKind::Periodic)
            } else {
                (kinds[rng.random_range(0..2)], kinds[rng.random_range(0..2)])
            }
        })
        .collect();
    let boundary = BoundarySpec::new(faces).unwrap();
    let n = grid.n_nodes();
    let mut field = |name: &str, lo: f64, hi: f64, zero_ok: bool| {
        let a = rng.random_range(lo..hi);
        let b = if zero_ok && rng.random_bool(0.3) { 0.0 } else { rng.random_range(lo..hi) };
        let vals: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { b } else { a }).collect();
        PiecewiseField::from_values(name, &vals).unwrap()
    };
    if second_order {
        let rho = field("rho", 0.5, 2.0, false);
        let zeta = field("zeta", 0.0, 1.0, true);
        let kappa = field("kappa", 0.1, 2.0, true);
        let alpha = field("alpha", 0.0, 1.0, true);
        PdeProblem::second_order(grid, boundary, rho, zeta, kappa, alpha, 1.0, 0.1).unwrap()
    } else {
        let kappa = field("kappa", 0.1, 2.0, true);
        let alpha = field("alpha", 0.0, 1.0, true);
        let beta = (0..d).map(|_| field("beta", -1.0, 1.0, true)).collect();
        PdeProblem::first_order(grid, boundary, kappa, beta, alpha, 1.0, 0.1).unwrap()
    }
}
