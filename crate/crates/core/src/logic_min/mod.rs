//! Two-level logic minimization of piecewise-constant diagonal operators.
//!
//! A field taking value `c₁` on an index set `I` and `c₀` elsewhere is
//! `Σ_{j∈I} (c₁−c₀)|j><j| + c₀ I`. Minimizing the Boolean function whose
//! on-set is `I` collapses runs of projectors into cubes such as `1−0`, which
//! map to strings `σ11 ⊗ I ⊗ σ00`. Overlapping cubes would double-count the
//! coefficient, so every cover is made disjoint before it is emitted.

mod disjoint;
mod espresso;
mod qmc;

pub use disjoint::{resolve_duplicates, sharp};
pub use espresso::minimize_heuristic;
pub use qmc::{minimize_exact, prime_implicants};

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PiecewiseField;
use crate::qubit_op::{LadderString, QubitOperator, SiteFactor};

/// Largest width handled by the exact minimizer; wider on-sets use the heuristic.
pub const EXACT_MAX_BITS: usize = 16;

/// A product term over `{0, 1, −}^n` carrying a coefficient.
///
/// `care` marks the literal positions; `bits` holds their values (zero on
/// dash positions).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cube {
    n_bits: usize,
    care: u64,
    bits: u64,
    pub value: f64,
}

impl Cube {
    pub fn new(n_bits: usize, care: u64, bits: u64, value: f64) -> Self {
        let full = mask(n_bits);
        Cube { n_bits, care: care & full, bits: bits & care & full, value }
    }

    pub fn minterm(n_bits: usize, index: usize, value: f64) -> Self {
        Cube::new(n_bits, mask(n_bits), index as u64, value)
    }

    pub fn universe(n_bits: usize, value: f64) -> Self {
        Cube::new(n_bits, 0, 0, value)
    }

    /// Parse the printed form (most significant bit first).
    pub fn parse(s: &str, value: f64) -> Result<Self> {
        let n = s.chars().count();
        let (mut care, mut bits) = (0u64, 0u64);
        for (k, ch) in s.chars().enumerate() {
            let bit = 1u64 << (n - 1 - k);
            match ch {
                '0' => care |= bit,
                '1' => {
                    care |= bit;
                    bits |= bit;
                }
                '-' => {}
                _ => return Err(Error::Parse(format!("bad cube character `{ch}`"))),
            }
        }
        Ok(Cube::new(n, care, bits, value))
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn care(&self) -> u64 {
        self.care
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn dashes(&self) -> u32 {
        self.n_bits as u32 - self.care.count_ones()
    }

    /// Number of indices covered, `2^{dashes}`.
    pub fn size(&self) -> usize {
        1 << self.dashes()
    }

    pub fn contains(&self, index: usize) -> bool {
        (index as u64) & self.care == self.bits
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        other.care & self.care == self.care && other.bits & self.care == self.bits
    }

    pub fn intersects(&self, other: &Cube) -> bool {
        let common = self.care & other.care;
        self.bits & common == other.bits & common
    }

    /// Every covered index, ascending.
    pub fn indices(&self) -> Vec<usize> {
        let free = !self.care & mask(self.n_bits);
        let mut out = Vec::with_capacity(self.size());
        // enumerate subsets of the free mask
        let mut sub = 0u64;
        loop {
            out.push((self.bits | sub) as usize);
            if sub == free {
                break;
            }
            sub = (sub.wrapping_sub(free)) & free;
        }
        out
    }

    /// Projector string: `0 → σ00`, `1 → σ11`, `− → I`.
    pub fn to_string_factors(&self) -> LadderString {
        LadderString::new(
            (0..self.n_bits)
                .map(|i| {
                    let bit = 1u64 << i;
                    if self.care & bit == 0 {
                        SiteFactor::Identity
                    } else if self.bits & bit != 0 {
                        SiteFactor::P11
                    } else {
                        SiteFactor::P00
                    }
                })
                .collect(),
        )
    }

    pub fn pattern(&self) -> String {
        (0..self.n_bits)
            .rev()
            .map(|i| {
                let bit = 1u64 << i;
                if self.care & bit == 0 {
                    '-'
                } else if self.bits & bit != 0 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.pattern(), self.value)
    }
}

pub(crate) fn mask(n_bits: usize) -> u64 {
    if n_bits >= 64 {
        u64::MAX
    } else {
        (1u64 << n_bits) - 1
    }
}

/// Cubes plus the constant `c₀` they are offset from.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicantCover {
    pub n_bits: usize,
    pub cubes: Vec<Cube>,
    pub default_value: f64,
}

impl ImplicantCover {
    /// `c₀ + Σ_{cubes ∋ j} value`.
    pub fn evaluate(&self, index: usize) -> f64 {
        self.default_value + self.cubes.iter().filter(|c| c.contains(index)).map(|c| c.value).sum::<f64>()
    }

    /// Maximum number of cubes covering a single index.
    pub fn max_multiplicity(&self) -> usize {
        let mut count = vec![0usize; 1 << self.n_bits];
        for c in &self.cubes {
            for j in c.indices() {
                count[j] += 1;
            }
        }
        count.into_iter().max().unwrap_or(0)
    }

    /// Terms of `c₀ I + Σ cubes`: one per cube plus the identity, counted
    /// even when `c₀ = 0` so that it compares with the naive `|I| + 1`.
    pub fn term_count(&self) -> usize {
        self.cubes.len() + 1
    }

    pub fn to_operator(&self) -> QubitOperator {
        let mut op = QubitOperator::zero(self.n_bits);
        if self.default_value != 0.0 {
            op.add_term(Complex64::new(self.default_value, 0.0), LadderString::identity(self.n_bits));
        }
        for c in &self.cubes {
            op.add_term(Complex64::new(c.value, 0.0), c.to_string_factors());
        }
        op
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("default {}\n", self.default_value);
        for c in &self.cubes {
            s.push_str(&format!("{c}\n"));
        }
        s
    }
}

fn check_on_set(on_set: &[usize], n_bits: usize) -> Result<()> {
    if n_bits > 40 {
        return Err(Error::CapExceeded { what: format!("{n_bits}-bit on-set"), cap: 40 });
    }
    if let Some(&j) = on_set.iter().find(|&&j| j >> n_bits != 0) {
        return Err(Error::IndexOutOfRange { index: j, bits: n_bits });
    }
    Ok(())
}

/// Minimal sum-of-products cover of `on_set`. Cubes carry value 1.
///
/// Exact for widths up to [`EXACT_MAX_BITS`]; the heuristic beyond.
pub fn minimize_cover(on_set: &[usize], n_bits: usize) -> Result<Vec<Cube>> {
    check_on_set(on_set, n_bits)?;
    if n_bits <= EXACT_MAX_BITS {
        Ok(minimize_exact(on_set, n_bits)?.cubes)
    } else {
        minimize_heuristic(on_set, n_bits)
    }
}

/// Pointwise transforms applied to a field before encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldTransform {
    Identity,
    Sqrt,
    InverseSqrt,
    Inverse,
}

impl FieldTransform {
    pub fn apply(self, x: f64) -> Option<f64> {
        let y = match self {
            FieldTransform::Identity => x,
            FieldTransform::Sqrt if x >= 0.0 => x.sqrt(),
            FieldTransform::InverseSqrt if x > 0.0 => 1.0 / x.sqrt(),
            FieldTransform::Inverse if x > 0.0 => 1.0 / x,
            _ => return None,
        };
        y.is_finite().then_some(y)
    }
}

/// A field encoded as a diagonal operator, with its compression statistics.
#[derive(Clone, Debug)]
pub struct DiagonalEncoding {
    pub operator: QubitOperator,
    pub cover: ImplicantCover,
    /// `|I| + 1`: one projector per non-default node plus the identity.
    pub naive_terms: usize,
}

/// Encode `transform(f)` as a diagonal operator on `n_bits` qubits.
///
/// Each distinct region value is minimized against every other node as the
/// off-set and then made disjoint, so the diagonal is reproduced exactly.
pub fn field_to_operator(f: &PiecewiseField, n_bits: usize, transform: FieldTransform) -> Result<DiagonalEncoding> {
    let n_nodes = 1usize << n_bits;
    for r in f.regions() {
        if let Some(&j) = r.nodes().iter().find(|&&j| j >= n_nodes) {
            return Err(Error::IndexOutOfRange { index: j, bits: n_bits });
        }
    }
    let domain = |x: f64| {
        transform.apply(x).ok_or_else(|| Error::Field {
            name: f.name().to_string(),
            reason: format!("value {x} outside the domain of {transform:?}"),
        })
    };
    let base = domain(f.default_value())?;

    // value classes keyed by the bit pattern of the raw value
    let mut classes: BTreeMap<u64, (f64, Vec<usize>)> = BTreeMap::new();
    for r in f.regions() {
        let e = classes.entry(r.value().to_bits()).or_insert_with(|| (r.value(), Vec::new()));
        e.1.extend_from_slice(r.nodes());
    }

    let mut cubes = Vec::new();
    let mut naive = 1;
    for (_, (value, mut nodes)) in classes {
        nodes.sort_unstable();
        let delta = domain(value)? - base;
        if delta == 0.0 || nodes.is_empty() {
            continue;
        }
        naive += nodes.len();
        let cover = minimize_cover(&nodes, n_bits)?;
        let cover: Vec<Cube> = cover.into_iter().map(|c| Cube { value: delta, ..c }).collect();
        cubes.extend(resolve_duplicates(&cover));
    }
    let cover = ImplicantCover { n_bits, cubes, default_value: base };
    Ok(DiagonalEncoding { operator: cover.to_operator(), cover, naive_terms: naive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Region};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: the set of indices covered by any cube.
    fn covered(cubes: &[Cube], n: usize) -> Vec<bool> {
        (0..1usize << n).map(|j| cubes.iter().any(|c| c.contains(j))).collect()
    }

    fn indicator(on: &[usize], n: usize) -> Vec<bool> {
        let mut v = vec![false; 1 << n];
        for &j in on {
            v[j] = true;
        }
        v
    }

    #[test]
    fn cube_parse_and_print() {
        let c = Cube::parse("1-0", 2.0).unwrap();
        assert_eq!(c.pattern(), "1-0");
        assert_eq!(c.indices(), vec![0b100, 0b110]);
        assert_eq!(c.size(), 2);
        assert_eq!(c.to_string_factors().to_string(), "1I0");
    }

    #[test]
    fn full_on_set_is_one_cube() {
        let on: Vec<usize> = (0..16).collect();
        let cover = minimize_cover(&on, 4).unwrap();
        assert_eq!(cover.len(), 1);
        assert_eq!(cover[0].pattern(), "----");
    }

    #[test]
    fn adjacent_pair_merges() {
        let cover = minimize_cover(&[0b10, 0b11], 2).unwrap();
        assert_eq!(cover.len(), 1);
        assert_eq!(cover[0].pattern(), "1-");
    }

    #[test]
    fn out_of_range_index_rejected() {
        assert!(matches!(minimize_cover(&[4], 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn random_on_sets_are_covered_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = 10;
            let density = rng.random_range(0.05..0.6);
            let on: Vec<usize> = (0..1 << n).filter(|_| rng.random_bool(density)).collect();
            let cover = minimize_cover(&on, n).unwrap();
            assert_eq!(covered(&cover, n), indicator(&on, n));
            assert!(cover.len() <= on.len().max(1));
        }
    }

    #[test]
    fn aligned_box_is_one_cube() {
        let g = Grid::new(vec![4, 4], 1.0).unwrap();
        for (x0, x1, w0, w1) in [(0, 0, 4, 8), (8, 4, 8, 4), (6, 12, 2, 2), (0, 0, 16, 16)] {
            let r = Region::from_box(&g, &[(x0, x0 + w0), (x1, x1 + w1)], 3.0).unwrap();
            let cover = minimize_cover(r.nodes(), 8).unwrap();
            assert_eq!(cover.len(), 1, "box at ({x0},{x1}) size {w0}x{w1}");
        }
    }

    #[test]
    fn uniform_field_is_identity() {
        let f = PiecewiseField::uniform("k", 0.7);
        let enc = field_to_operator(&f, 3, FieldTransform::Identity).unwrap();
        assert_eq!(enc.operator.len(), 1);
        assert_eq!(enc.naive_terms, 1);
    }

    #[test]
    fn single_cube_maps_to_projector_string() {
        let nodes = Cube::parse("1-0", 1.0).unwrap().indices();
        let f = PiecewiseField::new("c", 0.0, vec![Region::new(nodes, 2.5)]).unwrap();
        let enc = field_to_operator(&f, 3, FieldTransform::Identity).unwrap();
        let expect = QubitOperator::parse_term(Complex64::new(2.5, 0.0), "1I0").unwrap();
        assert_eq!(enc.operator, expect);
    }

    #[test]
    fn transform_domain_violation() {
        let f = PiecewiseField::uniform("rho", 0.0);
        assert!(field_to_operator(&f, 2, FieldTransform::InverseSqrt).is_err());
        assert!(field_to_operator(&f, 2, FieldTransform::Sqrt).is_ok());
    }

    #[test]
    fn multi_valued_field_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let n = 8;
            let values: Vec<f64> = (0..1 << n).map(|_| [1.0, 2.0, 4.0][rng.random_range(0..3)]).collect();
            let f = PiecewiseField::from_values("rho", &values).unwrap();
            for t in [FieldTransform::Identity, FieldTransform::InverseSqrt, FieldTransform::Sqrt] {
                let enc = field_to_operator(&f, n, t).unwrap();
                assert_eq!(enc.cover.max_multiplicity(), 1);
                let diag = enc.operator.diagonal();
                for j in 0..1 << n {
                    let want = t.apply(values[j]).unwrap();
                    assert!((diag[j].re - want).abs() < 1e-12);
                    assert!((enc.cover.evaluate(j) - want).abs() < 1e-12);
                }
                assert!(enc.operator.len() <= enc.naive_terms);
            }
        }
    }

    #[test]
    fn two_valued_32x32_field_compresses() {
        // 128-node region: an aligned 8x8 block, a 16x2 strip and eight
        // scattered 2x2 blocks.
        let g = Grid::new(vec![5, 5], 1.0).unwrap();
        let mut nodes = Region::from_box(&g, &[(0, 8), (8, 16)], 10.0).unwrap().nodes().to_vec();
        nodes.extend(Region::from_box(&g, &[(16, 32), (2, 4)], 10.0).unwrap().nodes());
        for k in 0..8 {
            let (x, y) = (2 * k + 4, 20 + 2 * (k % 5));
            nodes.extend(Region::from_box(&g, &[(x, x + 2), (y, y + 2)], 10.0).unwrap().nodes());
        }
        nodes.sort_unstable();
        nodes.dedup();
        assert_eq!(nodes.len(), 128);
        let f = PiecewiseField::new("c", 1.0, vec![Region::new(nodes.clone(), 10.0)]).unwrap();
        let enc = field_to_operator(&f, 10, FieldTransform::Identity).unwrap();
        assert!(enc.operator.len() < 129);
        assert_eq!(enc.naive_terms, 129);
        let diag = enc.operator.diagonal();
        let vals = f.values(1 << 10);
        for j in 0..1 << 10 {
            assert!((diag[j].re - vals[j]).abs() < 1e-12);
        }
    }
}
