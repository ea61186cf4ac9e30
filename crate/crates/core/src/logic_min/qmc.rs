//! Quine–McCluskey prime generation with an exact minimum-cover search.

use std::collections::HashSet;

use super::{mask, Cube};
use crate::error::{Error, Result};

/// Search budget (branch-and-bound nodes) before falling back to the best cover found.
const NODE_BUDGET: usize = 1_000;
/// Instances larger than this skip the search and use the greedy cover directly.
const MAX_SEARCH_COLUMNS: usize = 6_000;

/// Result of [`minimize_exact`].
#[derive(Clone, Debug)]
pub struct ExactCover {
    pub cubes: Vec<Cube>,
    /// `true` when the search proved minimality.
    pub optimal: bool,
}

/// All prime implicants of the on-set, by iterated merging of adjacent cubes.
pub fn prime_implicants(on_set: &[usize], n_bits: usize) -> Vec<Cube> {
    let full = mask(n_bits);
    let mut level: HashSet<(u64, u64)> = on_set.iter().map(|&j| (full, j as u64)).collect();
    let mut primes = Vec::new();
    while !level.is_empty() {
        let mut used: HashSet<(u64, u64)> = HashSet::new();
        let mut next: HashSet<(u64, u64)> = HashSet::new();
        for &(care, bits) in &level {
            let mut free_zero = care & !bits;
            while free_zero != 0 {
                let bit = free_zero & free_zero.wrapping_neg();
                free_zero ^= bit;
                let partner = (care, bits | bit);
                if level.contains(&partner) {
                    used.insert((care, bits));
                    used.insert(partner);
                    next.insert((care & !bit, bits));
                }
            }
        }
        let mut fresh: Vec<(u64, u64)> = level.difference(&used).copied().collect();
        fresh.sort_unstable();
        primes.extend(fresh.into_iter().map(|(care, bits)| Cube::new(n_bits, care, bits, 1.0)));
        level = next;
    }
    primes
}

/// Minimum-cardinality cover of the on-set by prime implicants.
pub fn minimize_exact(on_set: &[usize], n_bits: usize) -> Result<ExactCover> {
    if n_bits > super::EXACT_MAX_BITS {
        return Err(Error::CapExceeded { what: format!("exact minimization of {n_bits} bits"), cap: super::EXACT_MAX_BITS });
    }
    let mut rows: Vec<usize> = on_set.to_vec();
    rows.sort_unstable();
    rows.dedup();
    if rows.is_empty() {
        return Ok(ExactCover { cubes: Vec::new(), optimal: true });
    }
    if rows.len() == 1 << n_bits {
        return Ok(ExactCover { cubes: vec![Cube::universe(n_bits, 1.0)], optimal: true });
    }
    let primes = prime_implicants(&rows, n_bits);

    let mut row_of = vec![usize::MAX; 1 << n_bits];
    for (r, &j) in rows.iter().enumerate() {
        row_of[j] = r;
    }
    let col_rows: Vec<Vec<u32>> = primes
        .iter()
        .map(|p| p.indices().into_iter().map(|j| row_of[j] as u32).collect())
        .collect();
    let mut row_cols: Vec<Vec<u32>> = vec![Vec::new(); rows.len()];
    for (c, rs) in col_rows.iter().enumerate() {
        for &r in rs {
            row_cols[r as usize].push(c as u32);
        }
    }

    let problem = CoverProblem { col_rows, row_cols };
    let (chosen, optimal) = problem.solve();
    let mut cubes: Vec<Cube> = chosen.into_iter().map(|c| primes[c]).collect();
    cubes.sort_by_key(|c| (std::cmp::Reverse(c.dashes()), c.care(), c.bits()));
    Ok(ExactCover { cubes, optimal })
}

struct CoverProblem {
    col_rows: Vec<Vec<u32>>,
    row_cols: Vec<Vec<u32>>,
}

#[derive(Clone)]
struct State {
    row_live: Vec<bool>,
    col_live: Vec<bool>,
    chosen: Vec<usize>,
}

impl CoverProblem {
    fn solve(&self) -> (Vec<usize>, bool) {
        let greedy = self.greedy();
        if self.col_rows.len() > MAX_SEARCH_COLUMNS {
            return (greedy, false);
        }
        let mut search = Search { best: greedy, nodes: 0, exhausted: false };
        let state = State {
            row_live: vec![true; self.row_cols.len()],
            col_live: vec![true; self.col_rows.len()],
            chosen: Vec::new(),
        };
        self.branch(state, &mut search);
        (search.best, !search.exhausted)
    }

    fn greedy(&self) -> Vec<usize> {
        let mut covered = vec![false; self.row_cols.len()];
        let mut left = covered.len();
        let mut chosen = Vec::new();
        while left > 0 {
            // a row with a single option forces that column
            let forced = (0..covered.len()).find(|&r| !covered[r] && self.row_cols[r].len() == 1);
            let col = match forced {
                Some(r) => self.row_cols[r][0] as usize,
                None => (0..self.col_rows.len())
                    .max_by_key(|&c| self.col_rows[c].iter().filter(|&&r| !covered[r as usize]).count())
                    .expect("non-empty"),
            };
            for &r in &self.col_rows[col] {
                if !covered[r as usize] {
                    covered[r as usize] = true;
                    left -= 1;
                }
            }
            chosen.push(col);
        }
        chosen
    }

    fn live_cols_of_row<'a>(&'a self, s: &'a State, r: usize) -> impl Iterator<Item = usize> + 'a {
        self.row_cols[r].iter().map(|&c| c as usize).filter(move |&c| s.col_live[c])
    }

    fn select(&self, s: &mut State, c: usize) {
        s.chosen.push(c);
        s.col_live[c] = false;
        for &r in &self.col_rows[c] {
            s.row_live[r as usize] = false;
        }
    }

    /// Essential-column extraction and dominance removal until nothing changes.
    /// Returns `false` if some live row has no live column.
    fn reduce(&self, s: &mut State) -> bool {
        loop {
            let mut changed = false;
            for r in 0..s.row_live.len() {
                if !s.row_live[r] {
                    continue;
                }
                let (first, second) = {
                    let mut it = self.live_cols_of_row(s, r);
                    (it.next(), it.next())
                };
                match (first, second) {
                    (None, _) => return false,
                    (Some(c), None) => {
                        self.select(s, c);
                        changed = true;
                    }
                    _ => {}
                }
            }
            // column dominance: drop columns whose live rows are a subset of
            // another's; candidates share the first live row
            let live_cols: Vec<usize> = (0..s.col_live.len()).filter(|&c| s.col_live[c]).collect();
            let mut sets: Vec<Vec<u32>> = vec![Vec::new(); s.col_live.len()];
            for &c in &live_cols {
                sets[c] = self.col_rows[c].iter().copied().filter(|&r| s.row_live[r as usize]).collect();
            }
            for &a in &live_cols {
                let Some(&r0) = sets[a].first() else {
                    s.col_live[a] = false;
                    changed = true;
                    continue;
                };
                let dominated = self.row_cols[r0 as usize].iter().map(|&b| b as usize).any(|b| {
                    b != a
                        && s.col_live[b]
                        && (sets[a].len() < sets[b].len() || (sets[a].len() == sets[b].len() && a > b))
                        && is_subset(&sets[a], &sets[b])
                });
                if dominated {
                    s.col_live[a] = false;
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Rows whose live column sets are pairwise disjoint; each needs its own column.
    fn lower_bound(&self, s: &State) -> usize {
        let mut blocked = vec![false; s.col_live.len()];
        let mut rows: Vec<usize> = (0..s.row_live.len()).filter(|&r| s.row_live[r]).collect();
        rows.sort_by_key(|&r| self.live_cols_of_row(s, r).count());
        let mut bound = 0;
        for r in rows {
            if self.live_cols_of_row(s, r).all(|c| !blocked[c]) {
                bound += 1;
                for c in self.live_cols_of_row(s, r).collect::<Vec<_>>() {
                    blocked[c] = true;
                }
            }
        }
        bound
    }

    fn branch(&self, mut s: State, search: &mut Search) {
        search.nodes += 1;
        if search.nodes > NODE_BUDGET {
            search.exhausted = true;
            return;
        }
        if !self.reduce(&mut s) {
            return;
        }
        let pivot = (0..s.row_live.len())
            .filter(|&r| s.row_live[r])
            .min_by_key(|&r| self.live_cols_of_row(&s, r).count());
        let Some(pivot) = pivot else {
            if s.chosen.len() < search.best.len() {
                search.best = s.chosen.clone();
            }
            return;
        };
        if s.chosen.len() + self.lower_bound(&s) >= search.best.len() {
            return;
        }
        let mut options: Vec<usize> = self.live_cols_of_row(&s, pivot).collect();
        options.sort_by_key(|&c| {
            std::cmp::Reverse(self.col_rows[c].iter().filter(|&&r| s.row_live[r as usize]).count())
        });
        for c in options {
            let mut next = s.clone();
            self.select(&mut next, c);
            self.branch(next, search);
            // exclude `c` from later branches of this pivot
            s.col_live[c] = false;
            if search.exhausted {
                return;
            }
        }
    }
}

struct Search {
    best: Vec<usize>,
    nodes: usize,
    exhausted: bool,
}

fn is_subset(a: &[u32], b: &[u32]) -> bool {
    // both sorted ascending
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force: smallest subset of primes covering the on-set.
    fn brute_force_min(on: &[usize], n: usize) -> usize {
        let primes = prime_implicants(on, n);
        let m = primes.len();
        assert!(m <= 20);
        let mut best = usize::MAX;
        for subset in 0u32..(1 << m) {
            let k = subset.count_ones() as usize;
            if k >= best {
                continue;
            }
            let ok = on.iter().all(|&j| (0..m).any(|p| subset >> p & 1 == 1 && primes[p].contains(j)));
            if ok {
                best = k;
            }
        }
        best
    }

    #[test]
    fn primes_of_small_function() {
        // f = a + b'c over (a,b,c) = bits (2,1,0)
        let on: Vec<usize> = (0..8).filter(|&j| j & 4 != 0 || (j & 2 == 0 && j & 1 != 0)).collect();
        let mut pats: Vec<String> = prime_implicants(&on, 3).iter().map(|c| c.pattern()).collect();
        pats.sort();
        assert_eq!(pats, vec!["-01".to_string(), "1--".to_string()]);
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut checked = 0;
        while checked < 60 {
            let n = rng.random_range(3..=5);
            let on: Vec<usize> = (0..1 << n).filter(|_| rng.random_bool(0.45)).collect();
            if prime_implicants(&on, n).len() > 16 {
                continue;
            }
            let res = minimize_exact(&on, n).unwrap();
            assert!(res.optimal);
            assert_eq!(res.cubes.len(), brute_force_min(&on, n), "on={on:?}");
            checked += 1;
        }
    }

    #[test]
    fn cyclic_core_is_solved() {
        // classic cyclic function with no essential primes: m(0,1,2,5,6,7)
        let res = minimize_exact(&[0, 1, 2, 5, 6, 7], 3).unwrap();
        assert!(res.optimal);
        assert_eq!(res.cubes.len(), 3);
    }

    #[test]
    fn empty_on_set() {
        let res = minimize_exact(&[], 4).unwrap();
        assert!(res.cubes.is_empty());
    }
}
