//! Disjoint-sharp decomposition used to remove overlaps from a cover.

use super::Cube;

/// `a \ b` as a list of pairwise-disjoint cubes. Each piece keeps `a.value`.
pub fn sharp(a: &Cube, b: &Cube) -> Vec<Cube> {
    if !a.intersects(b) {
        return vec![*a];
    }
    let mut out = Vec::new();
    let (mut care, mut bits) = (a.care, a.bits);
    let mut split = b.care & !a.care;
    while split != 0 {
        let bit = split & split.wrapping_neg();
        split ^= bit;
        // the half of `cur` that disagrees with b on this literal
        out.push(Cube::new(a.n_bits, care | bit, bits | (!b.bits & bit), a.value));
        care |= bit;
        bits |= b.bits & bit;
    }
    out
}

/// Rewrite a cover so no index is covered twice while keeping its union.
///
/// Larger cubes are kept whole; later cubes are sharped against everything
/// already emitted.
pub fn resolve_duplicates(cubes: &[Cube]) -> Vec<Cube> {
    let mut order: Vec<&Cube> = cubes.iter().collect();
    order.sort_by_key(|c| std::cmp::Reverse(c.dashes()));
    let mut out: Vec<Cube> = Vec::with_capacity(cubes.len());
    for c in order {
        let mut pieces = vec![*c];
        for o in &out {
            if pieces.is_empty() {
                break;
            }
            pieces = pieces.iter().flat_map(|p| sharp(p, o)).collect();
        }
        out.extend(pieces);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts(cubes: &[Cube], n: usize) -> Vec<usize> {
        (0..1usize << n).map(|j| cubes.iter().filter(|c| c.contains(j)).count()).collect()
    }

    #[test]
    fn overlapping_pair_becomes_disjoint() {
        let cover = vec![Cube::parse("1-", 1.0).unwrap(), Cube::parse("-1", 1.0).unwrap()];
        let out = resolve_duplicates(&cover);
        assert_eq!(counts(&out, 2), vec![0, 1, 1, 1]);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn sharp_of_contained_cube_is_empty() {
        let a = Cube::parse("10-", 1.0).unwrap();
        let b = Cube::parse("1--", 1.0).unwrap();
        assert!(sharp(&a, &b).is_empty());
        assert_eq!(sharp(&b, &a).len(), 1);
        assert_eq!(sharp(&b, &a)[0].pattern(), "11-");
    }

    #[test]
    fn random_covers_keep_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = 6;
            let cubes: Vec<Cube> = (0..rng.random_range(1..8))
                .map(|_| {
                    let care = rng.random_range(0..64u64);
                    Cube::new(n, care, rng.random_range(0..64u64), 1.0)
                })
                .collect();
            let out = resolve_duplicates(&cubes);
            let before = counts(&cubes, n);
            let after = counts(&out, n);
            for j in 0..64 {
                assert_eq!(after[j], usize::from(before[j] > 0));
            }
        }
    }

    #[test]
    fn disjoint_input_is_unchanged() {
        let cover = vec![Cube::parse("1--", 1.0).unwrap(), Cube::parse("01-", 1.0).unwrap()];
        let out = resolve_duplicates(&cover);
        assert_eq!(out, cover);
        assert_eq!(resolve_duplicates(&out), out);
    }
}
