use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pde::StateLayout;

use super::{Circuit, Gate};

/// Gates preparing the uniform superposition over `lo..hi` on the qubits
/// `offset..offset + bits` of one axis.
///
/// Aligned power-of-two ranges need X and H gates only. A range made of two
/// aligned halves that straddle a carry, like `{6, 7, 8, 9}`, puts an H on
/// the highest differing bit and copies it onto the lower differing bits with
/// CX gates.
fn axis_gates(lo: usize, hi: usize, bits: usize, offset: usize, circ: &mut Circuit) -> Result<()> {
    let len = hi - lo;
    if !len.is_power_of_two() {
        return Err(Error::Unsupported(format!("range {lo}..{hi} is not a power-of-two length")));
    }
    let k = len.trailing_zeros() as usize;
    if lo % len == 0 {
        for b in 0..k {
            circ.push(Gate::h(offset + b));
        }
        for b in k..bits {
            if lo >> b & 1 == 1 {
                circ.push(Gate::x(offset + b));
            }
        }
        return Ok(());
    }
    let half = len / 2;
    if lo % half != 0 {
        return Err(Error::Unsupported(format!("range {lo}..{hi} is not built from two aligned halves")));
    }
    let low_bits = k - 1;
    let (a, b) = (lo >> low_bits, (lo >> low_bits) + 1);
    let diff = a ^ b;
    let pivot = usize::BITS as usize - 1 - diff.leading_zeros() as usize;
    for q in 0..low_bits {
        circ.push(Gate::h(offset + q));
    }
    circ.push(Gate::h(offset + low_bits + pivot));
    for q in 0..(bits - low_bits) {
        if q != pivot && a >> q & 1 == 1 {
            circ.push(Gate::x(offset + low_bits + q));
        }
    }
    for q in (0..pivot).rev() {
        circ.push(Gate::cx(offset + low_bits + pivot, offset + low_bits + q));
    }
    Ok(())
}

/// Circuit mapping `|0…0⟩` to the normalized uniform state over the box
/// `ranges[μ].0 ≤ x_μ < ranges[μ].1`, with the block register set to `block`.
pub fn box_state_prep(grid: &Grid, layout: &StateLayout, ranges: &[(usize, usize)], block: usize) -> Result<Circuit> {
    if ranges.len() != grid.dim() {
        return Err(Error::Grid(format!("box has {} ranges for a {}-d grid", ranges.len(), grid.dim())));
    }
    if block >= layout.n_blocks() {
        return Err(Error::Problem(format!("block {block} does not exist in this layout")));
    }
    let mut circ = Circuit::new(layout.total_qubits());
    for (mu, &(lo, hi)) in ranges.iter().enumerate() {
        if lo >= hi || hi > grid.axis_len(mu) {
            return Err(Error::Grid(format!("box range {lo}..{hi} invalid on axis {mu}")));
        }
        axis_gates(lo, hi, grid.axis_bits(mu), grid.axis_offset(mu), &mut circ)?;
    }
    for b in 0..layout.block_qubits {
        if block >> b & 1 == 1 {
            circ.push(Gate::x(layout.system_qubits + b));
        }
    }
    Ok(circ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryKind, BoundarySpec, PiecewiseField, Region};
    use crate::pde::{encode_initial_state, Family, PdeProblem};
    use crate::qubit_op::Statevector;

    fn heat_problem() -> PdeProblem {
        let g = Grid::new(vec![4, 4], 1.0).unwrap();
        PdeProblem::first_order(
            g,
            BoundarySpec::uniform(2, BoundaryKind::Dirichlet),
            PiecewiseField::uniform("kappa", 0.1),
            vec![PiecewiseField::uniform("beta0", 0.0), PiecewiseField::uniform("beta1", 0.0)],
            PiecewiseField::uniform("alpha", 0.0),
            10.0,
            0.1,
        )
        .unwrap()
    }

    fn box_values(g: &Grid, ranges: &[(usize, usize)]) -> Vec<f64> {
        let r = Region::from_box(g, ranges, 1.0).unwrap();
        let mut u = vec![0.0; g.n_nodes()];
        for &j in r.nodes() {
            u[j] = 1.0;
        }
        u
    }

    #[test]
    fn heat_box_matches_encoded_state() {
        let p = heat_problem();
        let ranges = [(6, 8), (6, 10)];
        let c = box_state_prep(p.grid(), &p.layout(), &ranges, 0).unwrap();
        let got = c.execute(&Statevector::basis(8, 0)).unwrap();
        let want = encode_initial_state(&p, &box_values(p.grid(), &ranges), None).unwrap().normalized().unwrap().0;
        assert!(got.distance(&want) < 1e-14);
        // x0 axis: X X H on bits 2, 1, 0; x1 axis: H on the pivot, X X, H, two CX
        let names: Vec<String> = c.gates().iter().map(|g| format!("{:?}", g.qubits())).collect();
        assert_eq!(c.counts().two_qubit, 2);
        assert_eq!(c.counts().one_qubit, 3 + 4);
        assert!(names.contains(&"[7, 6]".to_string()) && names.contains(&"[7, 5]".to_string()));
    }

    #[test]
    fn single_node_and_whole_axis() {
        let p = heat_problem();
        let single = box_state_prep(p.grid(), &p.layout(), &[(5, 6), (9, 10)], 0).unwrap();
        assert!(single.gates().iter().all(|g| matches!(g, Gate::One { name: "x", .. })));
        assert_eq!(single.execute(&Statevector::basis(8, 0)).unwrap(), Statevector::basis(8, 9 << 4 | 5));
        let whole = box_state_prep(p.grid(), &p.layout(), &[(0, 16), (3, 4)], 0).unwrap();
        assert_eq!(whole.gates().iter().filter(|g| matches!(g, Gate::One { name: "h", .. })).count(), 4);
    }

    #[test]
    fn every_expressible_range_is_exact() {
        let g = Grid::new(vec![4], 1.0).unwrap();
        let layout = StateLayout::new(Family::FirstOrder, &g);
        for lo in 0..16 {
            for hi in lo + 1..=16 {
                let want = Statevector::from_real(4, &box_values(&g, &[(lo, hi)])).unwrap().normalized().unwrap().0;
                match box_state_prep(&g, &layout, &[(lo, hi)], 0) {
                    Ok(c) => assert!(c.execute(&Statevector::basis(4, 0)).unwrap().distance(&want) < 1e-14, "{lo}..{hi}"),
                    Err(e) => assert!(matches!(e, Error::Unsupported(_))),
                }
            }
        }
        assert!(box_state_prep(&g, &layout, &[(6, 10)], 0).is_ok());
        assert!(box_state_prep(&g, &layout, &[(5, 9)], 0).is_err());
        assert!(box_state_prep(&g, &layout, &[(3, 6)], 0).is_err());
    }

    #[test]
    fn block_register_is_set() {
        let g = Grid::new(vec![2, 2], 1.0).unwrap();
        let layout = StateLayout::new(Family::SecondOrder, &g);
        let c = box_state_prep(&g, &layout, &[(1, 2), (0, 1)], 3).unwrap();
        assert_eq!(c.execute(&Statevector::basis(6, 0)).unwrap(), Statevector::basis(6, layout.index(3, 1)));
        assert!(box_state_prep(&g, &layout, &[(1, 2), (0, 1)], 4).is_err());
    }
}
