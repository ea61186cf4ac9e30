//! Expand / irredundant heuristic for on-sets too wide for the exact search.

use std::collections::{HashMap, HashSet};

use super::{check_on_set, mask, Cube};
use crate::error::Result;

/// Heuristic cover of `on_set`. Not guaranteed minimum, always exact.
pub fn minimize_heuristic(on_set: &[usize], n_bits: usize) -> Result<Vec<Cube>> {
    check_on_set(on_set, n_bits)?;
    let mut on: Vec<usize> = on_set.to_vec();
    on.sort_unstable();
    on.dedup();
    if on.is_empty() {
        return Ok(Vec::new());
    }
    if n_bits < 64 && on.len() as u64 == 1u64 << n_bits {
        return Ok(vec![Cube::universe(n_bits, 1.0)]);
    }
    let set: HashSet<usize> = on.iter().copied().collect();
    let high_first: Vec<usize> = (0..n_bits).rev().collect();
    let low_first: Vec<usize> = (0..n_bits).collect();
    let mut best: Option<Vec<Cube>> = None;
    for order in [&high_first, &low_first] {
        let mut cover = expand_all(&on, &set, n_bits, order);
        irredundant(&mut cover);
        let mut cover = reexpand(cover, &set, n_bits, order);
        irredundant(&mut cover);
        if best.as_ref().is_none_or(|b| cover.len() < b.len()) {
            best = Some(cover);
        }
    }
    Ok(best.unwrap_or_default())
}

fn inside(c: &Cube, set: &HashSet<usize>) -> bool {
    c.size() <= set.len() && c.indices().iter().all(|j| set.contains(j))
}

/// Drop literals from `c` one at a time while it stays inside the on-set.
fn expand(c: Cube, set: &HashSet<usize>, order: &[usize]) -> Cube {
    let mut cur = c;
    for &i in order {
        let bit = 1u64 << i;
        if cur.care & bit == 0 {
            continue;
        }
        let trial = Cube::new(cur.n_bits, cur.care & !bit, cur.bits & !bit, cur.value);
        if inside(&trial, set) {
            cur = trial;
        }
    }
    cur
}

fn expand_all(on: &[usize], set: &HashSet<usize>, n_bits: usize, order: &[usize]) -> Vec<Cube> {
    let mut cover: Vec<Cube> = Vec::new();
    for &j in on {
        if cover.iter().any(|c| c.contains(j)) {
            continue;
        }
        cover.push(expand(Cube::minterm(n_bits, j, 1.0), set, order));
    }
    cover
}

/// Remove cubes whose indices are all covered by other cubes, smallest first.
fn irredundant(cover: &mut Vec<Cube>) {
    let mut count: HashMap<usize, usize> = HashMap::new();
    for c in cover.iter() {
        for j in c.indices() {
            *count.entry(j).or_default() += 1;
        }
    }
    cover.sort_by_key(|c| c.dashes());
    let mut keep = Vec::with_capacity(cover.len());
    for c in cover.drain(..) {
        let idx = c.indices();
        if idx.iter().all(|j| count[j] > 1) {
            for j in idx {
                *count.get_mut(&j).expect("counted") -= 1;
            }
        } else {
            keep.push(c);
        }
    }
    *cover = keep;
}

/// Shrink each cube to the supercube of the indices only it covers, then
/// expand again in the reverse literal order.
fn reexpand(cover: Vec<Cube>, set: &HashSet<usize>, n_bits: usize, order: &[usize]) -> Vec<Cube> {
    let reversed: Vec<usize> = order.iter().rev().copied().collect();
    let mut out = cover.clone();
    for k in 0..out.len() {
        let unique: Vec<usize> = out[k]
            .indices()
            .into_iter()
            .filter(|&j| out.iter().enumerate().all(|(m, c)| m == k || !c.contains(j)))
            .collect();
        let Some(&first) = unique.first() else { continue };
        // supercube of the unique indices
        let differ = unique.iter().fold(0u64, |acc, &j| acc | (j as u64 ^ first as u64));
        let care = mask(n_bits) & !differ;
        let reduced = Cube::new(n_bits, care, first as u64, 1.0);
        out[k] = expand(reduced, set, &reversed);
    }
    out
}
