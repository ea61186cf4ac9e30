//! Symbolic operators built from tensor products of the single-site factors
//! `I`, `|0><0|`, `|0><1|`, `|1><0|` and `|1><1|`.
//!
//! Every operator in the pipeline (the discretized coefficient matrix, its
//! Hermitian parts, shift and difference operators, diagonal coefficient
//! operators) is a [`QubitOperator`]: a deduplicated weighted sum of
//! [`LadderString`]s. Qubits are little-endian: site 0 is the least
//! significant bit of a basis index and is printed rightmost.

mod shift;
mod statevector;

pub use shift::{difference_operator, embed_axis, shift_minus, shift_plus, DifferenceScheme};
pub use statevector::Statevector;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped after merging.
pub const ZERO_THRESHOLD: f64 = 1e-14;

/// Largest qubit count for which [`QubitOperator::dense`] will materialize a matrix.
pub const DENSE_CAP: usize = 12;

/// One of the five single-qubit factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteFactor {
    Identity,
    /// `|0><0|`
    P00,
    /// `|0><1|`, lowers `|1>` to `|0>`.
    P01,
    /// `|1><0|`, raises `|0>` to `|1>`.
    P10,
    /// `|1><1|`
    P11,
}

impl SiteFactor {
    pub const ALL: [SiteFactor; 5] = [
        SiteFactor::Identity,
        SiteFactor::P00,
        SiteFactor::P01,
        SiteFactor::P10,
        SiteFactor::P11,
    ];

    /// Matrix product `self * rhs`; `None` is the zero operator.
    pub fn mul(self, rhs: SiteFactor) -> Option<SiteFactor> {
        use SiteFactor::*;
        match (self, rhs) {
            (Identity, x) | (x, Identity) => Some(x),
            _ => {
                let (a, b) = self.ket_bra().expect("non-identity");
                let (c, d) = rhs.ket_bra().expect("non-identity");
                if b != c {
                    None
                } else {
                    Some(Self::from_ket_bra(a, d))
                }
            }
        }
    }

    pub fn adjoint(self) -> SiteFactor {
        match self {
            SiteFactor::P01 => SiteFactor::P10,
            SiteFactor::P10 => SiteFactor::P01,
            x => x,
        }
    }

    /// `(ket, bra)` bits of `|ket><bra|`, or `None` for the identity.
    pub fn ket_bra(self) -> Option<(u8, u8)> {
        match self {
            SiteFactor::Identity => None,
            SiteFactor::P00 => Some((0, 0)),
            SiteFactor::P01 => Some((0, 1)),
            SiteFactor::P10 => Some((1, 0)),
            SiteFactor::P11 => Some((1, 1)),
        }
    }

    pub fn from_ket_bra(ket: u8, bra: u8) -> SiteFactor {
        match (ket, bra) {
            (0, 0) => SiteFactor::P00,
            (0, 1) => SiteFactor::P01,
            (1, 0) => SiteFactor::P10,
            (1, 1) => SiteFactor::P11,
            _ => panic!("bits must be 0 or 1"),
        }
    }

    pub fn is_diagonal(self) -> bool {
        !matches!(self, SiteFactor::P01 | SiteFactor::P10)
    }

    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            SiteFactor::Identity => [[1.0, 0.0], [0.0, 1.0]],
            SiteFactor::P00 => [[1.0, 0.0], [0.0, 0.0]],
            SiteFactor::P01 => [[0.0, 1.0], [0.0, 0.0]],
            SiteFactor::P10 => [[0.0, 0.0], [1.0, 0.0]],
            SiteFactor::P11 => [[0.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Character used by the debug text format.
    pub fn symbol(self) -> char {
        match self {
            SiteFactor::Identity => 'I',
            SiteFactor::P00 => '0',
            SiteFactor::P11 => '1',
            SiteFactor::P10 => '+',
            SiteFactor::P01 => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<SiteFactor> {
        Some(match c {
            'I' => SiteFactor::Identity,
            '0' => SiteFactor::P00,
            '1' => SiteFactor::P11,
            '+' => SiteFactor::P10,
            '-' => SiteFactor::P01,
            _ => return None,
        })
    }
}

/// Bit masks describing how a ladder string acts on basis states:
/// `|j>` survives iff `j & care == value`, and is mapped to `|j ^ flip>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StringMasks {
    pub care: u64,
    pub value: u64,
    pub flip: u64,
}

impl StringMasks {
    #[inline]
    pub fn matches(&self, j: usize) -> bool {
        (j as u64) & self.care == self.value
    }

    #[inline]
    pub fn target(&self, j: usize) -> usize {
        j ^ self.flip as usize
    }

    pub fn is_diagonal(&self) -> bool {
        self.flip == 0
    }
}

/// Tensor product of site factors, indexed by site (site 0 = least significant qubit).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LadderString(Box<[SiteFactor]>);

impl LadderString {
    pub fn new(factors: Vec<SiteFactor>) -> Self {
        LadderString(factors.into_boxed_slice())
    }

    pub fn identity(n: usize) -> Self {
        LadderString(vec![SiteFactor::Identity; n].into_boxed_slice())
    }

    /// Parse the printed form, most significant site first.
    pub fn parse(s: &str) -> Result<Self> {
        let mut factors = s
            .chars()
            .map(|c| SiteFactor::from_symbol(c).ok_or_else(|| Error::Parse(format!("bad factor `{c}`"))))
            .collect::<Result<Vec<_>>>()?;
        factors.reverse();
        Ok(LadderString::new(factors))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[SiteFactor] {
        &self.0
    }

    pub fn site(&self, i: usize) -> SiteFactor {
        self.0[i]
    }

    pub fn adjoint(&self) -> Self {
        LadderString(self.0.iter().map(|f| f.adjoint()).collect())
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.iter().all(|f| f.is_diagonal())
    }

    /// Site-wise product, `None` when any site vanishes.
    pub fn mul(&self, rhs: &LadderString) -> Option<LadderString> {
        debug_assert_eq!(self.len(), rhs.len());
        self.0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| a.mul(*b))
            .collect::<Option<Vec<_>>>()
            .map(LadderString::new)
    }

    /// `self ⊗ low`, with `low` occupying the least significant sites.
    pub fn kron(&self, low: &LadderString) -> LadderString {
        let mut f = Vec::with_capacity(self.len() + low.len());
        f.extend_from_slice(&low.0);
        f.extend_from_slice(&self.0);
        LadderString::new(f)
    }

    pub fn masks(&self) -> StringMasks {
        let mut m = StringMasks { care: 0, value: 0, flip: 0 };
        for (i, f) in self.0.iter().enumerate() {
            let bit = 1u64 << i;
            if let Some((ket, bra)) = f.ket_bra() {
                m.care |= bit;
                if bra == 1 {
                    m.value |= bit;
                }
                if ket != bra {
                    m.flip |= bit;
                }
            }
        }
        m
    }
}

impl Ord for LadderString {
    fn cmp(&self, other: &Self) -> Ordering {
        // Compare in printed order: most significant site first.
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.iter().rev().cmp(other.0.iter().rev()))
    }
}

impl PartialOrd for LadderString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LadderString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0.iter().rev() {
            write!(f, "{}", s.symbol())?;
        }
        Ok(())
    }
}

/// A weighted sum of ladder strings on a fixed number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitOperator {
    n_qubits: usize,
    terms: BTreeMap<LadderString, Complex64>,
}

impl QubitOperator {
    pub fn zero(n_qubits: usize) -> Self {
        QubitOperator { n_qubits, terms: BTreeMap::new() }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::from_term(Complex64::new(1.0, 0.0), LadderString::identity(n_qubits))
    }

    pub fn from_term(coefficient: Complex64, string: LadderString) -> Self {
        let mut op = Self::zero(string.len());
        op.add_term(coefficient, string);
        op
    }

    /// Single-term operator from its printed factor string.
    pub fn parse_term(coefficient: Complex64, s: &str) -> Result<Self> {
        Ok(Self::from_term(coefficient, LadderString::parse(s)?))
    }

    /// Diagonal projector `|index><index|` on `n` qubits.
    pub fn projector(n_qubits: usize, index: usize) -> Self {
        let f = (0..n_qubits)
            .map(|i| if index >> i & 1 == 1 { SiteFactor::P11 } else { SiteFactor::P00 })
            .collect();
        Self::from_term(Complex64::new(1.0, 0.0), LadderString::new(f))
    }

    /// `|ket><bra|` on `n` qubits as a single string.
    pub fn ket_bra(n_qubits: usize, ket: usize, bra: usize) -> Self {
        let f = (0..n_qubits)
            .map(|i| SiteFactor::from_ket_bra((ket >> i & 1) as u8, (bra >> i & 1) as u8))
            .collect();
        Self::from_term(Complex64::new(1.0, 0.0), LadderString::new(f))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LadderString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, s: &LadderString) -> Complex64 {
        self.terms.get(s).copied().unwrap_or_default()
    }

    /// Merge a term, dropping the entry if the merged coefficient falls under
    /// [`ZERO_THRESHOLD`].
    pub fn add_term(&mut self, coefficient: Complex64, string: LadderString) {
        assert_eq!(string.len(), self.n_qubits, "term width must match operator width");
        let entry = self.terms.entry(string);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if coefficient.norm() >= ZERO_THRESHOLD {
                    v.insert(coefficient);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let c = *o.get() + coefficient;
                if c.norm() < ZERO_THRESHOLD {
                    o.remove();
                } else {
                    *o.get_mut() = c;
                }
            }
        }
    }

    fn check_width(&self, other: &QubitOperator) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch { left: self.n_qubits, right: other.n_qubits });
        }
        Ok(())
    }

    pub fn add(&self, other: &QubitOperator) -> Result<QubitOperator> {
        self.check_width(other)?;
        let mut out = self.clone();
        for (s, c) in &other.terms {
            out.add_term(*c, s.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &QubitOperator) -> Result<QubitOperator> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> QubitOperator {
        let mut out = QubitOperator::zero(self.n_qubits);
        for (s, c) in &self.terms {
            out.add_term(c * factor, s.clone());
        }
        out
    }

    pub fn scale_real(&self, factor: f64) -> QubitOperator {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Symbolic product `self * other`.
    pub fn mul(&self, other: &QubitOperator) -> Result<QubitOperator> {
        self.check_width(other)?;
        let mut out = QubitOperator::zero(self.n_qubits);
        for (sa, ca) in &self.terms {
            for (sb, cb) in &other.terms {
                if let Some(s) = sa.mul(sb) {
                    out.add_term(ca * cb, s);
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> QubitOperator {
        let mut out = QubitOperator::zero(self.n_qubits);
        for (s, c) in &self.terms {
            out.add_term(c.conj(), s.adjoint());
        }
        out
    }

    /// `self ⊗ low`.
    pub fn kron(&self, low: &QubitOperator) -> QubitOperator {
        let mut out = QubitOperator::zero(self.n_qubits + low.n_qubits);
        for (sa, ca) in &self.terms {
            for (sb, cb) in &low.terms {
                out.add_term(ca * cb, sa.kron(sb));
            }
        }
        out
    }

    /// Pad with identities: `I^{high} ⊗ self ⊗ I^{low}`.
    pub fn embed(&self, high: usize, low: usize) -> QubitOperator {
        QubitOperator::identity(high).kron(self).kron(&QubitOperator::identity(low))
    }

    /// Split `self = L + iH` into Hermitian `L = (A + A†)/2` and `H = (A − A†)/2i`.
    pub fn hermitian_split(&self) -> (QubitOperator, QubitOperator) {
        let adj = self.adjoint();
        let l = self.add(&adj).expect("same width").scale_real(0.5);
        let h = self.sub(&adj).expect("same width").scale(Complex64::new(0.0, -0.5));
        (l, h)
    }

    /// Largest `|c − c'|` between a term and the conjugate of its adjoint partner.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        let diff = self.sub(&adj).expect("same width");
        diff.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.keys().all(|s| s.is_diagonal())
    }

    /// Sum of coefficient magnitudes, an upper bound on the spectral norm.
    pub fn one_norm_bound(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Dense matrix (row = output index), capped at [`DENSE_CAP`] qubits.
    pub fn dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > DENSE_CAP {
            return Err(Error::CapExceeded { what: format!("{}-qubit dense realization", self.n_qubits), cap: DENSE_CAP });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (s, c) in &self.terms {
            let masks = s.masks();
            for j in 0..dim {
                if masks.matches(j) {
                    m[(masks.target(j), j)] += c;
                }
            }
        }
        Ok(m)
    }

    /// Diagonal entries of a diagonal operator, length `2^n`.
    pub fn diagonal(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut d = vec![Complex64::default(); dim];
        for (s, c) in &self.terms {
            let masks = s.masks();
            if !masks.is_diagonal() {
                continue;
            }
            for (j, dj) in d.iter_mut().enumerate() {
                if masks.matches(j) {
                    *dj += c;
                }
            }
        }
        d
    }

    /// `self · v`, applying each string as a weighted partial permutation.
    pub fn apply(&self, v: &Statevector) -> Result<Statevector> {
        if v.n_qubits() != self.n_qubits {
            return Err(Error::QubitMismatch { left: self.n_qubits, right: v.n_qubits() });
        }
        Ok(Statevector::from_amplitudes(self.n_qubits, self.apply_slice(v.amplitudes()))
            .expect("length preserved"))
    }

    /// Apply to a raw amplitude slice whose length is a multiple of `2^n`;
    /// extra high bits are spectators.
    pub fn apply_slice(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); v.len()];
        for (s, c) in &self.terms {
            let masks = s.masks();
            for (j, vj) in v.iter().enumerate() {
                if masks.matches(j) {
                    out[masks.target(j)] += c * vj;
                }
            }
        }
        out
    }

    /// Debug text form: one `(<re>,<im>) <factors>` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (string, c) in &self.terms {
            s.push_str(&format!("({:e},{:e}) {}\n", c.re, c.im, string));
        }
        s
    }

    pub fn from_text(n_qubits: usize, text: &str) -> Result<QubitOperator> {
        let mut op = QubitOperator::zero(n_qubits);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (coef, string) = line
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("missing factor string in `{line}`")))?;
            let coef = coef
                .strip_prefix('(')
                .and_then(|c| c.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("bad coefficient `{coef}`")))?;
            let (re, im) = coef.split_once(',').ok_or_else(|| Error::Parse(format!("bad coefficient `{coef}`")))?;
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{x}: {e}")));
            let string = LadderString::parse(string.trim())?;
            if string.len() != n_qubits {
                return Err(Error::QubitMismatch { left: n_qubits, right: string.len() });
            }
            op.add_term(Complex64::new(parse(re)?, parse(im)?), string);
        }
        Ok(op)
    }
}

impl fmt::Display for QubitOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
