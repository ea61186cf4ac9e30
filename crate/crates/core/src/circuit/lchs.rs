use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mps::{integration_point, quadrature_weights, TensorTrain};
use crate::pde::{positive_shift, PdeProblem};
use crate::qubit_op::{QubitOperator, Statevector, DENSE_CAP};

use super::{coefficient_oracle, Circuit, OraclePrep, Executor, GateCounts, TrotterOrder, TrotterPlan};

/// Number of equal Trotter steps for `exp(−iGt)` so that each covers at most
/// `max_angle` of rotation, measured by the plan's norm bound.
pub fn substeps_for(t: f64, norm_bound: f64, max_angle: f64) -> usize {
    ((t.abs() * norm_bound / max_angle).ceil() as usize).max(1)
}

/// Controlled evolutions `Π_m C_m[O_L(t_m)]` on `system + n_anc` qubits,
/// with `t_m = 2^{m − n_frac} τ` for the lower ancillas and
/// `t_top = −2^{n_anc − 1 − n_frac} τ` for the sign qubit, so ancilla state
/// `|a⟩` receives `exp(−i k_a L τ)`.
pub fn select_oracle(plan: &TrotterPlan, n_anc: usize, n_frac: usize, max_angle: f64) -> Result<Circuit> {
    if n_anc == 0 || n_frac >= n_anc {
        return Err(Error::Unsupported(format!("n_anc = {n_anc}, n_frac = {n_frac}")));
    }
    let n_sys = plan.generator().n_qubits();
    let mut circ = Circuit::new(n_sys + n_anc);
    let norm = plan.norm_bound();
    for m in 0..n_anc {
        // k of the basis state with only bit m set
        let t = integration_point(1 << m, n_anc, n_frac)? * plan.tau();
        plan.append(&mut circ, t, substeps_for(t, norm, max_angle), Some(n_sys + m));
    }
    Ok(circ)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LchsOptions {
    pub n_frac: usize,
    pub order: TrotterOrder,
    /// Largest rotation angle of one Trotter step inside the select oracle.
    pub max_angle: f64,
    /// Circuit construction for coefficient trains with bonds above 2.
    pub prep: OraclePrep,
    /// Steps after which the projected branch is recorded.
    pub snapshot_steps: Vec<usize>,
}

impl Default for LchsOptions {
    fn default() -> Self {
        LchsOptions { n_frac: 1, order: TrotterOrder::Second, max_angle: 0.1, prep: OraclePrep::Sequential, snapshot_steps: Vec::new() }
    }
}

/// The pieces of one LCHS run, built once and replayed for every step.
#[derive(Clone, Debug)]
pub struct LchsProgram {
    pub n_system: usize,
    pub n_ancilla: usize,
    pub coef: Circuit,
    pub coef_adjoint: Circuit,
    /// `coef` on the ancilla register alone.
    pub ancilla_prep: Circuit,
    /// `O_H(τ)` followed by `SEL_L(τ)`.
    pub step: Circuit,
    pub steps: usize,
    /// `‖c‖₁ = Σ_a c_a` of the exact quadrature weights.
    pub weight_sum: f64,
}

impl LchsProgram {
    pub fn build(a: &QubitOperator, phi: &TensorTrain, tau: f64, steps: usize, opts: &LchsOptions) -> Result<Self> {
        let n_sys = a.n_qubits();
        let n_anc = phi.n_sites();
        let (l, h) = a.hermitian_split();
        if n_sys <= DENSE_CAP && !l.is_empty() {
            let (_, shift) = positive_shift(&l)?;
            if shift > 1e-10 {
                return Err(Error::Numerical(format!("Hermitian part has eigenvalue {:.3e} < 0", -shift)));
            }
        }
        let total = n_sys + n_anc;
        let oracle = coefficient_oracle(phi, opts.prep)?;
        let coef = oracle.circuit.embed(n_sys, total)?;
        let coef_adjoint = oracle.adjoint.embed(n_sys, total)?;
        let h_plan = TrotterPlan::new(&h, opts.order, tau)?;
        let l_plan = TrotterPlan::new(&l, opts.order, tau)?;
        let mut step = h_plan.step_circuit(total);
        step.append(&select_oracle(&l_plan, n_anc, opts.n_frac, opts.max_angle)?)?;
        let weight_sum = quadrature_weights(n_anc, opts.n_frac)?.iter().sum();
        Ok(LchsProgram { n_system: n_sys, n_ancilla: n_anc, coef, coef_adjoint, ancilla_prep: oracle.circuit, step, steps, weight_sum })
    }

    /// Gate census of the whole run, without state preparation.
    pub fn counts(&self) -> GateCounts {
        let ends = self.coef.counts().repeat_add(1, &self.coef_adjoint.counts());
        self.step.counts().repeat_add(self.steps, &ends)
    }

    /// Full gate list: `coef`, `steps` copies of the step, `coef†`.
    pub fn full_circuit(&self) -> Result<Circuit> {
        let mut c = self.coef.clone();
        for _ in 0..self.steps {
            c.append(&self.step)?;
        }
        c.append(&self.coef_adjoint)?;
        Ok(c)
    }

    pub fn run(&self, w0: &Statevector, snapshot_steps: &[usize]) -> Result<LchsOutcome> {
        if w0.n_qubits() != self.n_system {
            return Err(Error::QubitMismatch { left: self.n_system, right: w0.n_qubits() });
        }
        let (w_hat, w0_norm) = w0.normalized()?;
        if let Some(step) = self.step.restrict(self.n_system) {
            return self.run_factorized(&step, w_hat, w0_norm, snapshot_steps);
        }
        let dim_sys = 1usize << self.n_system;
        let mut amps = vec![Complex64::default(); dim_sys << self.n_ancilla];
        amps[..dim_sys].copy_from_slice(w_hat.amplitudes());
        let mut exec = Executor::default();
        self.coef.run(&mut amps, &mut exec)?;
        let project = |amps: &[Complex64], exec: &mut Executor| -> Result<Statevector> {
            let mut copy = amps.to_vec();
            self.coef_adjoint.run(&mut copy, exec)?;
            copy.truncate(dim_sys);
            Statevector::from_amplitudes(self.n_system, copy)
        };
        let mut snapshots = Vec::new();
        if snapshot_steps.contains(&0) {
            snapshots.push((0, w_hat.clone()));
        }
        for s in 1..=self.steps {
            self.step.run(&mut amps, &mut exec)?;
            if s < self.steps && snapshot_steps.contains(&s) {
                snapshots.push((s, project(&amps, &mut exec)?));
            }
        }
        self.coef_adjoint.run(&mut amps, &mut exec)?;
        let projected = Statevector::from_amplitudes(self.n_system, amps[..dim_sys].to_vec())?;
        if snapshot_steps.contains(&self.steps) && self.steps > 0 {
            snapshots.push((self.steps, projected.clone()));
        }
        let success_probability = projected.norm().powi(2);
        let ancilla_leak = amps[dim_sys..].iter().map(|a| a.norm_sqr()).sum::<f64>();
        let state = if success_probability > 0.0 { projected.normalized()?.0 } else { projected.clone() };
        Ok(LchsOutcome {
            state,
            success_probability,
            projected,
            snapshots,
            ancilla_leak,
            weight_sum: self.weight_sum,
            w0_norm,
        })
    }

    /// When no step touches the ancillas (`L = 0`) the register stays a
    /// product state: the system evolves alone and `O_coef† O_coef` is
    /// applied to the ancillas once.
    fn run_factorized(&self, step: &Circuit, w_hat: Statevector, w0_norm: f64, snapshot_steps: &[usize]) -> Result<LchsOutcome> {
        let mut exec = Executor::default();
        let mut anc = Statevector::basis(self.n_ancilla, 0);
        self.ancilla_prep.run(anc.amplitudes_mut(), &mut exec)?;
        self.ancilla_prep.adjoint().run(anc.amplitudes_mut(), &mut exec)?;
        let overlap = anc.amplitudes()[0];
        let rest: f64 = anc.amplitudes()[1..].iter().map(|a| a.norm_sqr()).sum();
        let project = |sys: &Statevector| -> Result<Statevector> {
            Statevector::from_amplitudes(self.n_system, sys.amplitudes().iter().map(|a| a * overlap).collect())
        };
        let mut sys = w_hat;
        let mut snapshots = Vec::new();
        if snapshot_steps.contains(&0) {
            snapshots.push((0, sys.clone()));
        }
        for s in 1..=self.steps {
            step.run(sys.amplitudes_mut(), &mut exec)?;
            if snapshot_steps.contains(&s) {
                snapshots.push((s, project(&sys)?));
            }
        }
        let projected = project(&sys)?;
        let success_probability = projected.norm().powi(2);
        let state = if success_probability > 0.0 { projected.normalized()?.0 } else { projected.clone() };
        Ok(LchsOutcome {
            state,
            success_probability,
            projected,
            snapshots,
            ancilla_leak: sys.norm().powi(2) * rest,
            weight_sum: self.weight_sum,
            w0_norm,
        })
    }
}

#[derive(Clone, Debug)]
pub struct LchsOutcome {
    /// Renormalized system state after post-selection.
    pub state: Statevector,
    pub success_probability: f64,
    /// Unnormalized branch with the ancilla register on `|0…0⟩`.
    pub projected: Statevector,
    /// `(step, projected branch)` for each requested step.
    pub snapshots: Vec<(usize, Statevector)>,
    /// Weight left outside the `|0…0⟩` ancilla branch.
    pub ancilla_leak: f64,
    pub weight_sum: f64,
    pub w0_norm: f64,
}

impl LchsOutcome {
    /// Estimate of `exp(−At) w(0)` from a projected branch: undo the
    /// `1/‖c‖₁` of the weights and the normalization of `w(0)`.
    pub fn rescale(&self, branch: &Statevector) -> Statevector {
        let mut v = branch.clone();
        v.scale(self.weight_sum * self.w0_norm);
        v
    }
}

/// Run the LCHS circuit for `p.steps()` steps of `p.tau()` from `w0`.
///
/// `a` must already have a positive semidefinite Hermitian part.
pub fn run_lchs(p: &PdeProblem, a: &QubitOperator, phi: &TensorTrain, w0: &Statevector, opts: &LchsOptions) -> Result<LchsOutcome> {
    let program = LchsProgram::build(a, phi, p.tau(), p.steps(), opts)?;
    program.run(w0, &opts.snapshot_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{exact_coefficient_state, TensorTrain};
    use crate::qubit_op::tests::random_operator;
    use crate::reference::expm_dense;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_evolve(g: &DMatrix<Complex64>, t: f64, v: &[Complex64]) -> Vec<Complex64> {
        let u = expm_dense(&(g * Complex64::new(0.0, -t))).unwrap();
        (u * DVector::from_column_slice(v)).iter().copied().collect()
    }

    fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> QubitOperator {
        let a = random_operator(rng, n, 4);
        a.adjoint().mul(&a).unwrap()
    }

    #[test]
    fn select_oracle_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let l = random_psd(&mut rng, 3);
        let tau = 0.05;
        let plan = TrotterPlan::new(&l, TrotterOrder::Second, tau).unwrap();
        let sel = select_oracle(&plan, 2, 1, 0.1).unwrap();
        let dense = l.dense().unwrap();
        let psi = Statevector::random(&mut rng, 3).normalized().unwrap().0;
        for a in 0..4usize {
            let k = integration_point(a, 2, 1).unwrap();
            let input = Statevector::basis(2, a).kron(&psi);
            let out = sel.execute(&input).unwrap();
            let branch = &out.amplitudes()[a << 3..(a + 1) << 3];
            assert!(out.amplitudes().iter().enumerate().all(|(j, x)| j >> 3 == a || x.norm() < 1e-15));
            if a == 0 {
                assert_eq!(branch, psi.amplitudes());
            }
            let want = dense_evolve(&dense, k * tau, psi.amplitudes());
            let s = substeps_for(k * tau, plan.norm_bound(), 0.1);
            let bound = if a == 0 { 0.0 } else { plan.error_bound(k * tau, s) * 4.0 };
            assert!(dist(branch, &want) <= bound + 1e-14, "a={a}");
        }
        // top ancilla alone carries the negative point
        assert_eq!(integration_point(2, 2, 1).unwrap(), -1.0);
    }

    #[test]
    fn unitary_case_keeps_the_ancilla() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let h = random_operator(&mut rng, 3, 4);
        let a = h.scale(Complex64::new(0.0, 1.0)).add(&h.adjoint().scale(Complex64::new(0.0, 1.0))).unwrap();
        let (l, hh) = a.hermitian_split();
        assert!(l.is_empty());
        let phi = TensorTrain::from_dense(&exact_coefficient_state(4, 1).unwrap(), None, 0.0).unwrap();
        let w0 = Statevector::random(&mut rng, 3);
        let program = LchsProgram::build(&a, &phi, 0.01, 20, &LchsOptions::default()).unwrap();
        let out = program.run(&w0, &[]).unwrap();
        assert!((out.success_probability - 1.0).abs() < 1e-10);
        assert!(out.ancilla_leak < 1e-20);
        let plan = TrotterPlan::new(&hh, TrotterOrder::Second, 0.01).unwrap();
        let mut want = w0.normalized().unwrap().0;
        for _ in 0..20 {
            want = crate::circuit::trotter_step(&plan, &want).unwrap();
        }
        assert!(out.state.distance(&want) < 1e-10);

        // the factorized run agrees with executing every gate on the full register
        let full = program.full_circuit().unwrap();
        let mut wide = vec![Complex64::default(); 1 << 7];
        wide[..8].copy_from_slice(w0.normalized().unwrap().0.amplitudes());
        let wide = full.execute(&Statevector::from_amplitudes(7, wide).unwrap()).unwrap();
        assert!(dist(&wide.amplitudes()[..8], out.projected.amplitudes()) < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let phi = TensorTrain::from_dense(&exact_coefficient_state(4, 1).unwrap(), None, 0.0).unwrap();
        let neg = random_psd(&mut rng, 2).scale_real(-1.0);
        assert!(LchsProgram::build(&neg, &phi, 0.1, 1, &LchsOptions::default()).is_err());
        let ok = random_psd(&mut rng, 2);
        let program = LchsProgram::build(&ok, &phi, 0.1, 1, &LchsOptions::default()).unwrap();
        assert!(program.run(&Statevector::zero(2), &[]).is_err());
        assert!(program.run(&Statevector::basis(3, 0), &[]).is_err());
    }
}
