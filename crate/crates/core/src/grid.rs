//! Regular grids, boundary specifications and piecewise-constant fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `d`-dimensional lattice with `2^{n_μ}` nodes along axis `μ` and spacing `h`.
///
/// Node `j` packs the axis coordinates little-endian: axis 0 occupies the
/// lowest `n_0` bits, axis 1 the next `n_1`, and so on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_bits: Vec<usize>,
    h: f64,
}

impl Grid {
    pub fn new(n_bits: Vec<usize>, h: f64) -> Result<Self> {
        if n_bits.is_empty() {
            return Err(Error::Grid("at least one axis is required".into()));
        }
        if let Some(axis) = n_bits.iter().position(|&n| n == 0) {
            return Err(Error::Grid(format!("axis {axis} has zero bits; every axis needs n_μ ≥ 1")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Grid(format!("spacing h must be positive, got {h}")));
        }
        if n_bits.iter().sum::<usize>() > 40 {
            return Err(Error::Grid("more than 40 system qubits".into()));
        }
        Ok(Grid { n_bits, h })
    }

    pub fn dim(&self) -> usize {
        self.n_bits.len()
    }

    pub fn n_bits(&self) -> &[usize] {
        &self.n_bits
    }

    pub fn axis_bits(&self, axis: usize) -> usize {
        self.n_bits[axis]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total system qubits `n = Σ n_μ`.
    pub fn n_qubits(&self) -> usize {
        self.n_bits.iter().sum()
    }

    pub fn n_nodes(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        1 << self.n_bits[axis]
    }

    /// Bit offset of axis `μ` inside a node index.
    pub fn axis_offset(&self, axis: usize) -> usize {
        self.n_bits[..axis].iter().sum()
    }

    pub fn coords(&self, node: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|mu| (node >> self.axis_offset(mu)) & (self.axis_len(mu) - 1))
            .collect()
    }

    pub fn coord(&self, node: usize, axis: usize) -> usize {
        (node >> self.axis_offset(axis)) & (self.axis_len(axis) - 1)
    }

    pub fn node(&self, coords: &[usize]) -> usize {
        coords.iter().enumerate().map(|(mu, &c)| c << self.axis_offset(mu)).sum()
    }

    /// Node displaced by `delta` along `axis`, or `None` if it leaves the grid
    /// (with wrap-around when `periodic`).
    pub fn neighbor(&self, node: usize, axis: usize, delta: isize, periodic: bool) -> Option<usize> {
        let len = self.axis_len(axis) as isize;
        let c = self.coord(node, axis) as isize + delta;
        let c = if periodic {
            c.rem_euclid(len)
        } else if (0..len).contains(&c) {
            c
        } else {
            return None;
        };
        let off = self.axis_offset(axis);
        let cleared = node & !((self.axis_len(axis) - 1) << off);
        Some(cleared | (c as usize) << off)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Periodic,
}

/// Boundary kinds on the two faces of every axis: `lower` is the face with
/// outward normal `−e_μ`, `upper` the face with outward normal `+e_μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    faces: Vec<(BoundaryKind, BoundaryKind)>,
}

impl BoundarySpec {
    pub fn new(faces: Vec<(BoundaryKind, BoundaryKind)>) -> Result<Self> {
        for (axis, &(lo, hi)) in faces.iter().enumerate() {
            if (lo == BoundaryKind::Periodic) != (hi == BoundaryKind::Periodic) {
                return Err(Error::Boundary(format!(
                    "axis {axis}: periodic on one face requires periodic on both"
                )));
            }
        }
        Ok(BoundarySpec { faces })
    }

    pub fn uniform(d: usize, kind: BoundaryKind) -> Self {
        BoundarySpec { faces: vec![(kind, kind); d] }
    }

    pub fn dim(&self) -> usize {
        self.faces.len()
    }

    pub fn lower(&self, axis: usize) -> BoundaryKind {
        self.faces[axis].0
    }

    pub fn upper(&self, axis: usize) -> BoundaryKind {
        self.faces[axis].1
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.faces[axis].0 == BoundaryKind::Periodic
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.dim() != grid.dim() {
            return Err(Error::Boundary(format!(
                "{} axes specified for a {}-dimensional grid",
                self.dim(),
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// A constant-valued set of nodes inside a [`PiecewiseField`].
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    nodes: Vec<usize>,
    value: f64,
}

impl Region {
    pub fn new(mut nodes: Vec<usize>, value: f64) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        Region { nodes, value }
    }

    /// Axis-aligned box given by inclusive-exclusive coordinate ranges per axis.
    pub fn from_box(grid: &Grid, ranges: &[(usize, usize)], value: f64) -> Result<Self> {
        if ranges.len() != grid.dim() {
            return Err(Error::Grid(format!("box has {} ranges for a {}-d grid", ranges.len(), grid.dim())));
        }
        for (mu, &(lo, hi)) in ranges.iter().enumerate() {
            if lo >= hi || hi > grid.axis_len(mu) {
                return Err(Error::Grid(format!("box range {lo}..{hi} invalid on axis {mu}")));
            }
        }
        let nodes = (0..grid.n_nodes())
            .filter(|&j| {
                ranges.iter().enumerate().all(|(mu, &(lo, hi))| (lo..hi).contains(&grid.coord(j, mu)))
            })
            .collect();
        Ok(Region::new(nodes, value))
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// A piecewise-constant scalar field: `default` everywhere except on the
/// listed disjoint regions.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseField {
    name: String,
    default: f64,
    regions: Vec<Region>,
}

impl PiecewiseField {
    pub fn uniform(name: impl Into<String>, value: f64) -> Self {
        PiecewiseField { name: name.into(), default: value, regions: Vec::new() }
    }

    pub fn new(name: impl Into<String>, default: f64, regions: Vec<Region>) -> Result<Self> {
        let name = name.into();
        if !default.is_finite() {
            return Err(Error::Field { name, reason: "default value is not finite".into() });
        }
        let mut seen = std::collections::HashSet::new();
        for r in &regions {
            if !r.value.is_finite() {
                return Err(Error::Field { name, reason: "region value is not finite".into() });
            }
            for &j in &r.nodes {
                if !seen.insert(j) {
                    return Err(Error::Field { name, reason: format!("node {j} belongs to two regions") });
                }
            }
        }
        Ok(PiecewiseField { name, default, regions })
    }

    /// Build from explicit per-node values, grouping equal values into regions
    /// and taking the most frequent value as the default.
    pub fn from_values(name: impl Into<String>, values: &[f64]) -> Result<Self> {
        let mut classes: Vec<(f64, Vec<usize>)> = Vec::new();
        for (j, &v) in values.iter().enumerate() {
            match classes.iter_mut().find(|(x, _)| x.to_bits() == v.to_bits()) {
                Some((_, nodes)) => nodes.push(j),
                None => classes.push((v, vec![j])),
            }
        }
        let default_pos = classes
            .iter()
            .enumerate()
            .max_by_key(|(i, (_, nodes))| (nodes.len(), std::cmp::Reverse(*i)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let default = classes.get(default_pos).map(|c| c.0).unwrap_or(0.0);
        let regions = classes
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != default_pos)
            .map(|(_, (v, nodes))| Region::new(nodes, v))
            .collect();
        Self::new(name, default, regions)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn is_uniform(&self) -> bool {
        self.regions.iter().all(|r| r.value == self.default)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let n = grid.n_nodes();
        for r in &self.regions {
            if let Some(&j) = r.nodes.iter().find(|&&j| j >= n) {
                return Err(Error::Field { name: self.name.clone(), reason: format!("node {j} outside the grid") });
            }
        }
        Ok(())
    }

    pub fn value_at(&self, node: usize) -> f64 {
        self.regions
            .iter()
            .find(|r| r.nodes.binary_search(&node).is_ok())
            .map_or(self.default, |r| r.value)
    }

    pub fn values(&self, n_nodes: usize) -> Vec<f64> {
        let mut v = vec![self.default; n_nodes];
        for r in &self.regions {
            for &j in &r.nodes {
                v[j] = r.value;
            }
        }
        v
    }

    /// Pointwise map, keeping the region structure.
    pub fn map(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> PiecewiseField {
        PiecewiseField {
            name: name.into(),
            default: f(self.default),
            regions: self.regions.iter().map(|r| Region { nodes: r.nodes.clone(), value: f(r.value) }).collect(),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.regions.iter().map(|r| r.value).fold(self.default, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.regions.iter().map(|r| r.value).fold(self.default, f64::max)
    }
}
