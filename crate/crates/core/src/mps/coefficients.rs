//! Square-rooted LCHS quadrature weights as a tensor train.
//!
//! The integration points are signed fixed-point numbers on the ancilla
//! register, `k_a = (−a_{n−1} 2^{n−1} + Σ_{m<n−1} a_m 2^m) 2^{−n_frac}`, and the
//! weights are `c_a = 2^{−n_frac} / (π (1 + k_a²))`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::{mals_solve, Core, MalsOptions, MalsReport, TensorTrain, TrainOperator};

/// Largest register for which dense weight vectors are produced.
pub const WEIGHTS_CAP: usize = 24;

/// Signed fixed-point value of ancilla index `a`.
pub fn integration_point(a: usize, n_anc: usize, n_frac: usize) -> Result<f64> {
    if n_anc == 0 || n_anc >= usize::BITS as usize {
        return Err(Error::Numerical(format!("invalid ancilla count {n_anc}")));
    }
    if a >> n_anc != 0 {
        return Err(Error::IndexOutOfRange { index: a, bits: n_anc });
    }
    let top = (a >> (n_anc - 1)) & 1;
    let low = a & ((1 << (n_anc - 1)) - 1);
    Ok((low as f64 - (top << (n_anc - 1)) as f64) * 2f64.powi(-(n_frac as i32)))
}

/// Dense `c_a` for every ancilla index.
pub fn quadrature_weights(n_anc: usize, n_frac: usize) -> Result<Vec<f64>> {
    if n_anc > WEIGHTS_CAP {
        return Err(Error::CapExceeded { what: format!("{n_anc}-qubit weight vector"), cap: WEIGHTS_CAP });
    }
    let scale = 2f64.powi(-(n_frac as i32)) / PI;
    (0..1usize << n_anc).map(|a| Ok(scale / (1.0 + integration_point(a, n_anc, n_frac)?.powi(2)))).collect()
}

/// `Σ_a √c_a |a⟩ / √‖c‖₁` as a dense vector.
pub fn exact_coefficient_state(n_anc: usize, n_frac: usize) -> Result<Vec<f64>> {
    let c = quadrature_weights(n_anc, n_frac)?;
    let total: f64 = c.iter().sum();
    Ok(c.iter().map(|x| (x / total).sqrt()).collect())
}

/// Weight of bit position `p` in the fixed-point value.
fn bit_weight(p: usize, n_anc: usize, n_frac: usize) -> f64 {
    let w = 2f64.powi(p as i32 - n_frac as i32);
    if p == n_anc - 1 {
        -w
    } else {
        w
    }
}

fn check_n_anc(n_anc: usize) -> Result<()> {
    if n_anc == 0 {
        return Err(Error::Numerical("the analytic trains need at least one ancilla qubit".into()));
    }
    Ok(())
}

/// The value `K[c, s, c']` of the analytic `k` train at site `i`.
///
/// Bond channel `c` names the bit position whose contribution the path
/// carries; every other site passes the channel through with weight 1.
fn k_entry(i: usize, n_anc: usize, n_frac: usize, c: usize, s: usize, cp: usize) -> f64 {
    let p = n_anc - 1 - i;
    let first = i == 0;
    let last = i == n_anc - 1;
    let channel = if first { cp } else { c };
    if !first && !last && c != cp {
        return 0.0;
    }
    if channel == p {
        s as f64 * bit_weight(p, n_anc, n_frac)
    } else {
        1.0
    }
}

/// Exact train for `Σ_a k_a |a⟩` with bond dimension `n_anc`.
pub fn build_k_vector(n_anc: usize, n_frac: usize) -> Result<TensorTrain> {
    check_n_anc(n_anc)?;
    let cores = (0..n_anc)
        .map(|i| {
            let left = if i == 0 { 1 } else { n_anc };
            let right = if i == n_anc - 1 { 1 } else { n_anc };
            Core::from_fn(left, right, |l, s, r| k_entry(i, n_anc, n_frac, l, s, r))
        })
        .collect();
    TensorTrain::from_cores(cores)
}

/// Exact train for `Σ_a (1 + k_a²) |a⟩` with bond dimension `n_anc² + 1`.
///
/// Channels `(c1, c2)` carry the Kronecker square of the `k` train and the
/// extra channel `n_anc²` carries the constant 1.
pub fn build_one_plus_k_squared(n_anc: usize, n_frac: usize) -> Result<TensorTrain> {
    check_n_anc(n_anc)?;
    if n_anc == 1 {
        // a single site has no bond to carry the constant on
        let k = bit_weight(0, 1, n_frac);
        return TensorTrain::product(&[[1.0, 1.0 + k * k]]);
    }
    let n = n_anc;
    let konst = n * n;
    let cores = (0..n)
        .map(|i| {
            let left = if i == 0 { 1 } else { konst + 1 };
            let right = if i == n - 1 { 1 } else { konst + 1 };
            Core::from_fn(left, right, |l, s, r| {
                let l_const = i != 0 && l == konst;
                let r_const = i != n - 1 && r == konst;
                match (i == 0, i == n - 1) {
                    (true, _) if r_const => 1.0,
                    (_, true) if l_const => 1.0,
                    (false, false) if l_const || r_const => f64::from(u8::from(l_const && r_const)),
                    _ => {
                        let (l1, l2) = if i == 0 { (0, 0) } else { (l / n, l % n) };
                        let (r1, r2) = if i == n - 1 { (0, 0) } else { (r / n, r % n) };
                        k_entry(i, n, n_frac, l1, s, r1) * k_entry(i, n, n_frac, l2, s, r2)
                    }
                }
            })
        })
        .collect();
    TensorTrain::from_cores(cores)
}

/// How the coefficient train is capped at `r_phi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhiStrategy {
    /// Solve with the cap `max(r_phi, r_psi)`, then round to `r_phi` by SVD.
    #[default]
    SolveThenRound,
    /// Solve with the cap `r_phi` directly.
    Direct,
}

/// Starting guess for the Newton square root. Both are `χ = 1` trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NewtonStart {
    /// The constant `√‖target‖₂`, which bounds `√target` from above, so the
    /// iterates decrease towards the root without overshooting.
    #[default]
    NormBound,
    /// The all-ones train. The first step jumps to `(1 + target)/2`, whose
    /// dynamic range rank truncation may not resolve.
    Ones,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientOptions {
    /// Bond cap of the square-root train.
    pub r_psi: usize,
    /// Bond cap of the coefficient train.
    pub r_phi: usize,
    /// Newton stopping threshold on `‖F(Ψ)‖`.
    pub tol: f64,
    /// MALS sweeps per linear solve.
    pub sweeps: usize,
    pub max_newton_iterations: usize,
    pub newton_start: NewtonStart,
    pub phi_strategy: PhiStrategy,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        CoefficientOptions {
            r_psi: 10,
            r_phi: 2,
            tol: 1e-6,
            sweeps: 10,
            max_newton_iterations: 60,
            newton_start: NewtonStart::NormBound,
            phi_strategy: PhiStrategy::SolveThenRound,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    /// `‖F(Ψ)‖` for the starting guess and after every step taken.
    pub residuals: Vec<f64>,
    /// Index into `residuals` of the returned iterate.
    pub best: usize,
    /// Whether the returned iterate meets the tolerance. When false the
    /// iteration stalled at the bond cap.
    pub converged: bool,
}

impl NewtonReport {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals[self.best]
    }
}

/// `F(Ψ) = diag(Ψ) Ψ − target`.
fn newton_residual(psi: &TensorTrain, target: &TensorTrain) -> Result<TensorTrain> {
    psi.hadamard(psi)?.sub(target)
}

/// Newton iteration for the elementwise square root of a positive train.
///
/// Each step solves `2 diag(Ψ) δ = −F(Ψ)` by MALS with the bond cap `r_psi`
/// and rounds `Ψ + δ` back to that cap. After the first step, three steps in
/// a row without a new best residual end the iteration. That is a stall when the best iterate improved on the
/// start, and divergence (an error) otherwise.
pub fn newton_sqrt(target: &TensorTrain, opts: &CoefficientOptions) -> Result<(TensorTrain, NewtonReport)> {
    if opts.r_psi < 2 {
        return Err(Error::Numerical("the square-root train needs a bond cap of at least 2".into()));
    }
    let target_norm = target.norm();
    if target_norm == 0.0 {
        return Err(Error::Numerical("square root of a zero train".into()));
    }
    let mut psi = match opts.newton_start {
        NewtonStart::NormBound => TensorTrain::constant(target.n_sites(), target_norm.sqrt())?,
        NewtonStart::Ones => TensorTrain::ones(target.n_sites())?,
    };
    let mut f = newton_residual(&psi, target)?;
    let mut residuals = vec![f.norm()];
    let mut best = (0, psi.clone());
    let mut since_best = 0;
    while residuals[best.0] > opts.tol && residuals.len() <= opts.max_newton_iterations {
        let rhs = f.scale(-1.0).truncate(None, 1e-14);
        // the step only needs to be accurate relative to the current residual
        let tol = (0.01 * opts.tol / f.norm()).min(1e-3);
        let mals = MalsOptions { max_rank: opts.r_psi, sweeps: opts.sweeps, tol };
        let a = TrainOperator::diag(&psi).scale(2.0);
        let (delta, _) = mals_solve(&a, &rhs, None, &mals)?;
        psi = psi.add(&delta)?.truncate(Some(opts.r_psi), 0.0);
        f = newton_residual(&psi, target)?;
        let res = f.norm();
        if !res.is_finite() {
            return Err(Error::Numerical("Newton iterate is not finite".into()));
        }
        residuals.push(res);
        let step = residuals.len() - 1;
        if step == 1 || res < residuals[best.0] {
            best = (step, psi.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 3 {
                if residuals[best.0] >= residuals[0] {
                    return Err(Error::NotConverged { what: "Newton square root diverged".into(), residual: res });
                }
                break;
            }
        }
    }
    let converged = residuals[best.0] <= opts.tol;
    Ok((best.1, NewtonReport { residuals, best: best.0, converged }))
}

/// Solve `diag(Ψ) Φ = √(2^{n_frac}/π) Σ_a |a⟩` and return the normalized,
/// right-canonical `Φ` with bonds at most `r_phi`.
///
/// The exact solution is `2^{n_frac} √c_a`; the factor disappears on
/// normalization.
pub fn solve_coefficient_train(
    psi: &TensorTrain,
    n_frac: usize,
    r_phi: usize,
    opts: &CoefficientOptions,
) -> Result<(TensorTrain, MalsReport)> {
    if r_phi == 0 {
        return Err(Error::Numerical("the coefficient train needs a bond cap of at least 1".into()));
    }
    let rhs = TensorTrain::constant(psi.n_sites(), (2f64.powi(n_frac as i32) / PI).sqrt())?;
    let solve_rank = match opts.phi_strategy {
        PhiStrategy::SolveThenRound => r_phi.max(opts.r_psi),
        PhiStrategy::Direct => r_phi,
    };
    let mals = MalsOptions { max_rank: solve_rank, sweeps: opts.sweeps, tol: opts.tol * 1e-2 };
    let (phi, report) = mals_solve(&TrainOperator::diag(psi), &rhs, None, &mals)?;
    let (phi, _) = phi.right_canonicalize(Some(r_phi)).normalized()?;
    Ok((phi, report))
}

/// Everything produced while building the coefficient train.
#[derive(Clone, Debug)]
pub struct CoefficientTrain {
    pub phi: TensorTrain,
    pub psi: TensorTrain,
    pub newton: NewtonReport,
    pub solve: MalsReport,
}

/// Build `1 + k²`, take its square root and solve for the normalized
/// coefficient train.
pub fn coefficient_train(n_anc: usize, n_frac: usize, opts: &CoefficientOptions) -> Result<CoefficientTrain> {
    let target = build_one_plus_k_squared(n_anc, n_frac)?;
    let (psi, newton) = newton_sqrt(&target, opts)?;
    let (phi, solve) = solve_coefficient_train(&psi, n_frac, opts.r_phi, opts)?;
    Ok(CoefficientTrain { phi, psi, newton, solve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::fidelity_with_dense;

    #[test]
    fn integration_points() {
        assert_eq!(integration_point(0, 3, 1).unwrap(), 0.0);
        assert_eq!(integration_point(4, 3, 1).unwrap(), -2.0);
        assert_eq!(integration_point(3, 3, 1).unwrap(), 1.5);
        assert!(integration_point(8, 3, 1).is_err());
        let ks: Vec<f64> = (0..16).map(|a| integration_point(a, 4, 2).unwrap()).collect();
        let (lo, hi) = ks.iter().fold((f64::MAX, f64::MIN), |(a, b), &k| (a.min(k), b.max(k)));
        assert_eq!((lo, hi), (-2.0, 2.0 - 0.25));
    }

    #[test]
    fn k_vector_example() {
        let t = build_k_vector(3, 1).unwrap();
        assert_eq!(t.contract_to_vector().unwrap(), vec![0.0, 0.5, 1.0, 1.5, -2.0, -1.5, -1.0, -0.5]);
        assert!(t.max_bond() <= 3);
        assert_eq!(build_k_vector(1, 0).unwrap().contract_to_vector().unwrap(), vec![0.0, -1.0]);
        assert_eq!(build_one_plus_k_squared(1, 0).unwrap().contract_to_vector().unwrap(), vec![1.0, 2.0]);
        assert!(build_k_vector(0, 0).is_err());
    }

    #[test]
    fn analytic_trains_are_exact() {
        for n in 2..=8 {
            for nf in 0..n {
                let k = build_k_vector(n, nf).unwrap();
                let s = build_one_plus_k_squared(n, nf).unwrap();
                assert!(k.bonds().iter().all(|&b| b <= n));
                assert!(s.bonds().iter().all(|&b| b <= n * n + 1));
                let (vk, vs) = (k.contract_to_vector().unwrap(), s.contract_to_vector().unwrap());
                for a in 0..1 << n {
                    let x = integration_point(a, n, nf).unwrap();
                    assert!((vk[a] - x).abs() < 1e-12);
                    assert!((vs[a] - 1.0 - x * x).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn newton_on_ones() {
        let ones = TensorTrain::ones(5).unwrap();
        let start_ones = CoefficientOptions { newton_start: NewtonStart::Ones, ..Default::default() };
        let (psi, rep) = newton_sqrt(&ones, &start_ones).unwrap();
        assert_eq!(rep.iterations(), 0);
        assert!(psi.contract_to_vector().unwrap().iter().all(|&x| x == 1.0));
        let (psi, rep) = newton_sqrt(&ones, &CoefficientOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(psi.contract_to_vector().unwrap().iter().all(|&x| (x - 1.0).abs() < 1e-9));
    }

    #[test]
    fn newton_square_root_small() {
        let target = build_one_plus_k_squared(4, 1).unwrap();
        let (psi, rep) = newton_sqrt(&target, &CoefficientOptions::default()).unwrap();
        assert!(rep.final_residual() <= 1e-6);
        let v = psi.contract_to_vector().unwrap();
        for (a, x) in v.iter().enumerate() {
            let want = (1.0 + integration_point(a, 4, 1).unwrap().powi(2)).sqrt();
            assert!((x - want).abs() < 1e-6, "a={a}: {x} vs {want}");
        assert!(*x > 0.0);
        }
        assert!(rep.converged);
        // monotone after the first step
        assert!(rep.residuals[1..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn uncapped_coefficient_train_is_exact() {
        let opts = CoefficientOptions::default();
        let target = build_one_plus_k_squared(6, 1).unwrap();
        let (psi, _) = newton_sqrt(&target, &CoefficientOptions { r_psi: 64, tol: 1e-12, ..opts }).unwrap();
        let (phi, _) = solve_coefficient_train(&psi, 1, 64, &CoefficientOptions { tol: 1e-12, ..opts }).unwrap();
        let exact = exact_coefficient_state(6, 1).unwrap();
        assert!(fidelity_with_dense(&phi, &exact).unwrap() >= 1.0 - 1e-10);
        assert!((phi.norm() - 1.0).abs() < 1e-12);
        assert!(phi.right_orthogonality_defect() < 1e-12);
    }

    #[test]
    fn weights_sum_and_state_norm() {
        let c = quadrature_weights(6, 1).unwrap();
        assert!((c[0] - 0.5 / PI).abs() < 1e-15);
        let s = exact_coefficient_state(6, 1).unwrap();
        assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(quadrature_weights(WEIGHTS_CAP + 1, 1).is_err());
    }
}
