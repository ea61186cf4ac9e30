use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qubit_op::{LadderString, QubitOperator, Statevector, StringMasks};

use super::{Circuit, Gate};

/// Hermiticity tolerance for Trotter generators.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// One Hermitian Trotter factor.
#[derive(Clone, Debug, PartialEq)]
pub enum HermitianGroup {
    /// `Σ_s c_s s` over diagonal strings with real coefficients.
    Diagonal(Vec<(LadderString, f64)>),
    /// `c P + c̄ P†` for an off-diagonal ladder string `P`.
    Pair { string: LadderString, coefficient: Complex64 },
}

impl HermitianGroup {
    pub fn n_qubits(&self) -> usize {
        match self {
            HermitianGroup::Diagonal(terms) => terms.first().map_or(0, |(s, _)| s.len()),
            HermitianGroup::Pair { string, .. } => string.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, HermitianGroup::Diagonal(_))
    }

    /// The group written back as an operator on `n` qubits.
    pub fn to_operator(&self, n: usize) -> QubitOperator {
        let mut op = QubitOperator::zero(n);
        match self {
            HermitianGroup::Diagonal(terms) => {
                for (s, c) in terms {
                    op.add_term(Complex64::new(*c, 0.0), s.clone());
                }
            }
            HermitianGroup::Pair { string, coefficient } => {
                op.add_term(*coefficient, string.clone());
                op.add_term(coefficient.conj(), string.adjoint());
            }
        }
        op
    }

    /// Upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        match self {
            HermitianGroup::Diagonal(terms) => terms.iter().map(|(_, c)| c.abs()).sum(),
            HermitianGroup::Pair { coefficient, .. } => coefficient.norm(),
        }
    }

    /// Sort key: diagonal groups first, then by printed string.
    fn sort_key(&self) -> (u8, String) {
        match self {
            HermitianGroup::Diagonal(terms) => (0, terms.first().map(|(s, _)| s.to_string()).unwrap_or_default()),
            HermitianGroup::Pair { string, .. } => (1, string.to_string()),
        }
    }
}

/// Partition a Hermitian operator into factors `c P + c̄ P†` and singleton
/// diagonal strings.
pub fn group_hermitian_pairs(h: &QubitOperator) -> Result<Vec<HermitianGroup>> {
    let scale = h.terms().map(|(_, c)| c.norm()).fold(1.0, f64::max);
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: defect });
    }
    let mut groups = Vec::new();
    for (s, c) in h.terms() {
        if s.is_diagonal() {
            groups.push(HermitianGroup::Diagonal(vec![(s.clone(), c.re)]));
            continue;
        }
        let adj = s.adjoint();
        if *s < adj {
            groups.push(HermitianGroup::Pair { string: s.clone(), coefficient: *c });
        } else if h.coefficient(&adj).norm() == 0.0 {
            // partner dropped below the zero threshold; the defect check bounds |c|
            groups.push(HermitianGroup::Pair { string: adj, coefficient: c.conj() });
        }
    }
    groups.sort_by_key(|g| g.sort_key());
    Ok(groups)
}

/// Apply `exp(−iθ G)` to raw amplitudes, where `G` acts on the low qubits
/// and, when `control` is set, only where that bit is 1.
pub(crate) fn apply_pair(masks: StringMasks, coefficient: Complex64, theta: f64, control: Option<usize>, amps: &mut [Complex64]) {
    let mag = coefficient.norm();
    if mag == 0.0 || theta == 0.0 {
        return;
    }
    let (s, c) = (theta * mag).sin_cos();
    let phase = coefficient / mag;
    // G|j> = c|k>, G|k> = c̄|j>
    let to_k = Complex64::new(0.0, -s) * phase;
    let to_j = Complex64::new(0.0, -s) * phase.conj();
    let full = amps.len() - 1;
    let ctrl = control.map_or(0, |q| 1usize << q);
    let fixed = masks.value as usize | ctrl;
    let free = full & !(masks.care as usize) & !ctrl;
    let flip = masks.flip as usize;
    let mut sub = 0usize;
    loop {
        let j = fixed | sub;
        let k = j ^ flip;
        let (vj, vk) = (amps[j], amps[k]);
        amps[j] = vj * c + to_j * vk;
        amps[k] = vk * c + to_k * vj;
        sub = sub.wrapping_sub(free) & free;
        if sub == 0 {
            break;
        }
    }
}

/// Multiply by a phase table indexed by the bits above `offset`.
pub(crate) fn apply_phase_table(table: &[Complex64], control: Option<usize>, offset: usize, amps: &mut [Complex64]) {
    let low = table.len() - 1;
    match control {
        None => {
            for (j, a) in amps.iter_mut().enumerate() {
                *a *= table[(j >> offset) & low];
            }
        }
        Some(q) => {
            let ctrl = 1usize << q;
            let free = (amps.len() - 1) & !ctrl;
            let mut sub = 0usize;
            loop {
                let j = ctrl | sub;
                amps[j] *= table[(j >> offset) & low];
                sub = sub.wrapping_sub(free) & free;
                if sub == 0 {
                    break;
                }
            }
        }
    }
}

/// `exp(−iθ Σ c_s s)` evaluated on every basis state of `n` qubits.
pub(crate) fn diagonal_phase_table(terms: &[(LadderString, f64)], theta: f64, n: usize) -> Vec<Complex64> {
    let mut values = vec![0.0; 1 << n];
    for (s, c) in terms {
        let m = s.masks();
        for (j, v) in values.iter_mut().enumerate() {
            if m.matches(j) {
                *v += c;
            }
        }
    }
    values.iter().map(|v| Complex64::from_polar(1.0, -theta * v)).collect()
}

/// `exp(−iθ G) v`, exact for a single Hermitian factor.
pub fn exp_group_apply(group: &HermitianGroup, theta: f64, v: &Statevector) -> Result<Statevector> {
    if group.n_qubits() > v.n_qubits() {
        return Err(Error::QubitMismatch { left: group.n_qubits(), right: v.n_qubits() });
    }
    let mut out = v.clone();
    match group {
        HermitianGroup::Diagonal(terms) => {
            let table = diagonal_phase_table(terms, theta, group.n_qubits());
            apply_phase_table(&table, None, 0, out.amplitudes_mut());
        }
        HermitianGroup::Pair { string, coefficient } => {
            apply_pair(string.masks(), *coefficient, theta, None, out.amplitudes_mut());
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrotterOrder {
    First,
    #[default]
    Second,
}

/// Product formula for `exp(−i·generator·t)`.
#[derive(Clone, Debug)]
pub struct TrotterPlan {
    generator: QubitOperator,
    groups: Vec<HermitianGroup>,
    /// Factors as executed: all diagonal groups merged into one.
    factors: Vec<Arc<HermitianGroup>>,
    order: TrotterOrder,
    tau: f64,
}

impl TrotterPlan {
    pub fn new(generator: &QubitOperator, order: TrotterOrder, tau: f64) -> Result<Self> {
        let groups = group_hermitian_pairs(generator)?;
        let diag: Vec<(LadderString, f64)> = groups
            .iter()
            .filter_map(|g| match g {
                HermitianGroup::Diagonal(t) => Some(t.clone()),
                _ => None,
            })
            .flatten()
            .filter(|(_, c)| *c != 0.0)
            .collect();
        let mut factors = Vec::new();
        if !diag.is_empty() {
            factors.push(Arc::new(HermitianGroup::Diagonal(diag)));
        }
        factors.extend(groups.iter().filter(|g| !g.is_diagonal()).cloned().map(Arc::new));
        Ok(TrotterPlan { generator: generator.clone(), groups, factors, order, tau })
    }

    pub fn generator(&self) -> &QubitOperator {
        &self.generator
    }

    pub fn groups(&self) -> &[HermitianGroup] {
        &self.groups
    }

    pub fn order(&self) -> TrotterOrder {
        self.order
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_trivial(&self) -> bool {
        self.factors.is_empty()
    }

    /// `Σ_i ‖G_i‖`, a bound on the generator norm.
    pub fn norm_bound(&self) -> f64 {
        self.factors.iter().map(|g| g.norm_bound()).sum()
    }

    /// Rigorous bound on `‖S(t/s)^s − exp(−iGt)‖` for this plan with `s`
    /// substeps, from the nested-commutator bound with every commutator
    /// estimated by norms.
    pub fn error_bound(&self, t: f64, substeps: usize) -> f64 {
        let s = substeps.max(1) as f64;
        let x = (t / s).abs() * self.norm_bound();
        if self.factors.len() <= 1 {
            return 0.0;
        }
        match self.order {
            TrotterOrder::First => s * x * x,
            TrotterOrder::Second => s * x * x * x / 2.0,
        }
    }

    /// Append the product formula for `exp(−i·G·t)` with `substeps` equal steps.
    pub fn append(&self, circuit: &mut Circuit, t: f64, substeps: usize, control: Option<usize>) {
        let s = substeps.max(1);
        let dt = t / s as f64;
        let n = self.factors.len();
        if n == 0 || t == 0.0 {
            return;
        }
        let mut push = |g: &Arc<HermitianGroup>, theta: f64| {
            circuit.push(Gate::Evolution { group: Arc::clone(g), theta, control, offset: 0 });
        };
        match self.order {
            TrotterOrder::First => {
                for _ in 0..s {
                    for g in &self.factors {
                        push(g, dt);
                    }
                }
            }
            TrotterOrder::Second if n == 1 => push(&self.factors[0], t),
            TrotterOrder::Second => {
                // half steps forward then backward; adjacent halves of the same factor merge
                push(&self.factors[0], dt / 2.0);
                for step in 0..s {
                    for g in &self.factors[1..n - 1] {
                        push(g, dt / 2.0);
                    }
                    push(&self.factors[n - 1], dt);
                    for g in self.factors[1..n - 1].iter().rev() {
                        push(g, dt / 2.0);
                    }
                    push(&self.factors[0], if step + 1 == s { dt / 2.0 } else { dt });
                }
            }
        }
    }

    /// Circuit for one step of length `tau` on `n_qubits` qubits.
    pub fn step_circuit(&self, n_qubits: usize) -> Circuit {
        let mut c = Circuit::new(n_qubits);
        self.append(&mut c, self.tau, 1, None);
        c
    }
}

/// One step of length `plan.tau()`.
pub fn trotter_step(plan: &TrotterPlan, v: &Statevector) -> Result<Statevector> {
    plan.step_circuit(v.n_qubits()).execute(v)
}
