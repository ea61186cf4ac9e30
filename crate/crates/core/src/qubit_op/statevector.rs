use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex amplitude array of length `2^n`, little-endian basis ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn zero(n_qubits: usize) -> Self {
        Statevector { n_qubits, amps: vec![Complex64::default(); 1 << n_qubits] }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut v = Self::zero(n_qubits);
        v.amps[index] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::SizeMismatch { expected: 1 << n_qubits, got: amps.len() });
        }
        Ok(Statevector { n_qubits, amps })
    }

    pub fn from_real(n_qubits: usize, values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(n_qubits, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    #[cfg(test)]
    pub(crate) fn random(rng: &mut impl rand::Rng, n_qubits: usize) -> Self {
        let amps = (0..1usize << n_qubits)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Statevector { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Normalized copy together with the original norm.
    pub fn normalized(&self) -> Result<(Statevector, f64)> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero-norm state".into()));
        }
        let amps = self.amps.iter().map(|a| a / norm).collect();
        Ok((Statevector { n_qubits: self.n_qubits, amps }, norm))
    }

    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|<self|other>|^2` for normalized inputs.
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        let ip = self.inner(other).norm_sqr();
        ip / (self.norm().powi(2) * other.norm().powi(2))
    }

    /// `self ⊗ low`.
    pub fn kron(&self, low: &Statevector) -> Statevector {
        let mut amps = Vec::with_capacity(self.len() * low.len());
        for a in &self.amps {
            for b in &low.amps {
                amps.push(a * b);
            }
        }
        Statevector { n_qubits: self.n_qubits + low.n_qubits, amps }
    }

    pub fn distance(&self, other: &Statevector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }
}
