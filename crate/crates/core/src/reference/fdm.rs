use crate::error::{Error, Result};
use crate::pde::{assemble, divergence_operator, gradient_operator, real_norm, Family, PdeProblem};
use crate::qubit_op::QubitOperator;

use super::TimeSeries;

/// Real sparse rows `row -> [(col, value)]` of an operator.
struct Sparse {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Sparse {
    fn from_operator(op: &QubitOperator) -> Self {
        let dim = 1usize << op.n_qubits();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (s, c) in op.terms() {
            let m = s.masks();
            for j in 0..dim {
                if m.matches(j) {
                    rows[m.target(j)].push((j, c.re));
                }
            }
        }
        for r in &mut rows {
            r.sort_by_key(|&(j, _)| j);
            r.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Sparse { rows }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, x)| x * v[j]).sum()).collect()
    }

    fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|(_, x)| x.abs()).sum()).collect()
    }
}

/// Node fields sampled by an explicit scheme: `u` always, `u̇` for the
/// second-order family.
#[derive(Clone, Debug, Default)]
pub struct FdmOutput {
    pub u: TimeSeries,
    pub u_dot: Option<TimeSeries>,
    /// Stability diagnostics; the run still completes.
    pub warnings: Vec<String>,
}

/// Explicit time stepping on node values with step `tau_fdm`: leapfrog for
/// `ϱü + ζu̇ − ∇·κ∇u + αu = 0` and forward Euler for the first-order family.
/// Both use the spatial stencils of the assembled matrices.
pub fn classical_fdm(
    p: &PdeProblem,
    u0: &[f64],
    u_dot0: Option<&[f64]>,
    output_times: &[f64],
    tau_fdm: f64,
) -> Result<FdmOutput> {
    let n = p.grid().n_nodes();
    if u0.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: u0.len() });
    }
    if !(tau_fdm > 0.0 && tau_fdm.is_finite()) {
        return Err(Error::Problem(format!("FDM step must be positive, got {tau_fdm}")));
    }
    let mut marks: Vec<(usize, f64)> = Vec::new();
    for &t in output_times {
        let s = (t / tau_fdm).round();
        if t < 0.0 || (s * tau_fdm - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Problem(format!("output time {t} is not a multiple of the FDM step {tau_fdm}")));
        }
        marks.push((s as usize, t));
    }
    marks.sort_by(|a, b| a.0.cmp(&b.0));
    match p.family() {
        Family::FirstOrder => first_order(p, u0, &marks, tau_fdm),
        Family::SecondOrder => {
            let v0 = u_dot0.ok_or_else(|| Error::Problem("second-order FDM needs an initial rate".into()))?;
            if v0.len() != n {
                return Err(Error::SizeMismatch { expected: n, got: v0.len() });
            }
            second_order(p, u0, v0, &marks, tau_fdm)
        }
    }
}

fn first_order(p: &PdeProblem, u0: &[f64], marks: &[(usize, f64)], tau: f64) -> Result<FdmOutput> {
    let a = Sparse::from_operator(&assemble(p)?.0);
    let mut out = FdmOutput::default();
    let bound = a.row_sums().into_iter().fold(0.0, f64::max);
    if tau * bound > 2.0 {
        out.warnings.push(format!("forward Euler step {tau} exceeds the stability bound {:.3e}", 2.0 / bound));
    }
    let mut u = u0.to_vec();
    let last = marks.last().map_or(0, |m| m.0);
    let mut next = marks.iter().peekable();
    for step in 0..=last {
        while let Some(&&(s, t)) = next.peek() {
            if s != step {
                break;
            }
            out.u.push(t, u.clone(), real_norm(&u));
            next.next();
        }
        if step < last {
            let au = a.apply(&u);
            u.iter_mut().zip(&au).for_each(|(x, d)| *x -= tau * d);
        }
    }
    Ok(out)
}

fn second_order(p: &PdeProblem, u0: &[f64], v0: &[f64], marks: &[(usize, f64)], tau: f64) -> Result<FdmOutput> {
    let n = u0.len();
    let d = p.grid().dim();
    let rho = p.field("rho")?.values(n);
    let zeta = p.field("zeta")?.values(n);
    let kappa = p.field("kappa")?.values(n);
    let alpha = p.field("alpha")?.values(n);
    let grads: Vec<Sparse> = (0..d).map(|mu| gradient_operator(p, mu).map(|g| Sparse::from_operator(&g))).collect::<Result<_>>()?;
    let divs: Vec<Sparse> = (0..d).map(|mu| divergence_operator(p, mu).map(|g| Sparse::from_operator(&g))).collect::<Result<_>>()?;
    // ϱü = K u − ζu̇ with K u = Σ_μ Div_μ(κ Grad_μ u) − αu
    let k_apply = |u: &[f64]| -> Vec<f64> {
        let mut acc: Vec<f64> = u.iter().zip(&alpha).map(|(x, a)| -a * x).collect();
        for (g, dv) in grads.iter().zip(&divs) {
            let flux: Vec<f64> = g.apply(u).iter().zip(&kappa).map(|(x, k)| x * k).collect();
            acc.iter_mut().zip(dv.apply(&flux)).for_each(|(a, x)| *a += x);
        }
        acc
    };

    let mut out = FdmOutput { u_dot: Some(TimeSeries::default()), ..Default::default() };
    // Gershgorin bound on ϱ^{-1}K: |Div||κ||Grad| row sums
    let kmax = kappa.iter().copied().fold(0.0, f64::max);
    let mut rows = alpha.clone();
    for (g, dv) in grads.iter().zip(&divs) {
        let gmax = g.row_sums().into_iter().fold(0.0, f64::max);
        rows.iter_mut().zip(dv.row_sums()).for_each(|(r, x)| *r += x * kmax * gmax);
    }
    let bound = rows.iter().zip(&rho).map(|(r, p)| r / p).fold(0.0, f64::max);
    if tau * tau * bound > 4.0 {
        out.warnings.push(format!("leapfrog step {tau} may violate the CFL bound {:.3e}", 2.0 / bound.sqrt()));
    }

    let accel = |u: &[f64], v: &[f64]| -> Vec<f64> {
        k_apply(u).iter().enumerate().map(|(j, x)| (x - zeta[j] * v[j]) / rho[j]).collect()
    };
    let a0 = accel(u0, v0);
    let mut prev = u0.to_vec();
    let mut cur: Vec<f64> = (0..n).map(|j| u0[j] + tau * v0[j] + 0.5 * tau * tau * a0[j]).collect();
    let last = marks.last().map_or(0, |m| m.0);
    let record = |step: usize, u: &[f64], v: &[f64], out: &mut FdmOutput| {
        for &(_, t) in marks.iter().filter(|m| m.0 == step) {
            out.u.push(t, u.to_vec(), real_norm(u));
            out.u_dot.as_mut().expect("second order keeps rates").push(t, v.to_vec(), real_norm(v));
        }
    };
    record(0, u0, v0, &mut out);
    for step in 1..=last {
        // (ϱ/τ² + ζ/2τ) u⁺ = ϱ(2u − u⁻)/τ² + ζu⁻/2τ + K u
        let ku = k_apply(&cur);
        let next: Vec<f64> = (0..n)
            .map(|j| {
                let lhs = rho[j] / (tau * tau) + zeta[j] / (2.0 * tau);
                (rho[j] * (2.0 * cur[j] - prev[j]) / (tau * tau) + zeta[j] * prev[j] / (2.0 * tau) + ku[j]) / lhs
            })
            .collect();
        let rate: Vec<f64> = (0..n).map(|j| (next[j] - prev[j]) / (2.0 * tau)).collect();
        record(step, &cur, &rate, &mut out);
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(out)
}
