//! Physical partition of the domain into sign-signature classes of
//! quadrature points, with per-cell moments for neuron placement.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::linalg::sym_eigen2;
use crate::par;
use crate::problem::Mat2;
use crate::quadrature::{Point, QuadratureMesh};
use crate::spline_net::SplineNetwork;

/// Activation pattern of one point, one bit per neuron (bit set when
/// `ωᵢ·x − bᵢ > 0`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signature(Vec<u64>);

impl Signature {
    pub fn of(net: &SplineNetwork, x: &Point) -> Self {
        let n = net.neurons();
        let mut words = vec![0u64; n.div_ceil(64).max(1)];
        for i in 0..n {
            if net.preactivation(i, x) > 0.0 {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Signature(words)
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn hamming(&self, other: &Signature) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// `'0'`/`'1'` string of length `n`.
    pub fn to_bits(&self, n: usize) -> String {
        (0..n).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub signature: Signature,
    /// Indices into the interior quadrature points, ascending.
    pub members: Vec<usize>,
    pub weight: f64,
    pub centroid: Point,
    /// Weighted covariance; `[0][0]` only in one dimension.
    pub covariance: Mat2,
}

impl Cell {
    fn from_members(signature: Signature, members: Vec<usize>, mesh: &QuadratureMesh) -> Self {
        let mut weight = 0.0;
        let mut m = [0.0, 0.0];
        for &q in &members {
            let w = mesh.weights[q];
            let x = mesh.points[q];
            weight += w;
            m[0] += w * x[0];
            m[1] += w * x[1];
        }
        let centroid = [m[0] / weight, m[1] / weight];
        let mut cov = [[0.0; 2]; 2];
        for &q in &members {
            let w = mesh.weights[q];
            let dx = [mesh.points[q][0] - centroid[0], mesh.points[q][1] - centroid[1]];
            for r in 0..2 {
                for s in 0..2 {
                    cov[r][s] += w * dx[r] * dx[s];
                }
            }
        }
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= weight;
            }
        }
        Cell {
            signature,
            members,
            weight,
            centroid,
            covariance: cov,
        }
    }

    /// Lower and upper corners of the member points.
    pub fn bounding_box(&self, mesh: &QuadratureMesh) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for &q in &self.members {
            for j in 0..2 {
                lo[j] = lo[j].min(mesh.points[q][j]);
                hi[j] = hi[j].max(mesh.points[q][j]);
            }
        }
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalPartition {
    pub dim: usize,
    pub neurons: usize,
    /// Sorted by signature.
    pub cells: Vec<Cell>,
    /// Cell id of every interior quadrature point.
    pub cell_of_point: Vec<usize>,
}

/// Which principal axis becomes the normal of a new hyperplane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    #[default]
    MinVariance,
    MaxVariance,
}

/// Group interior points by activation pattern. Cells are ordered by
/// signature, so ids do not depend on the order of the points.
pub fn physical_partition(net: &SplineNetwork, mesh: &QuadratureMesh) -> Result<PhysicalPartition> {
    if net.dim() != mesh.dim {
        return Err(AneError::DimensionMismatch {
            expected: mesh.dim,
            got: net.dim(),
        });
    }
    if mesh.is_empty() {
        return Err(AneError::EmptyPartition);
    }
    let sigs: Vec<Signature> = par::map_chunks(mesh.len(), |range| {
        range
            .map(|q| Signature::of(net, &mesh.points[q]))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let mut classes: BTreeMap<Signature, Vec<usize>> = BTreeMap::new();
    for (q, s) in sigs.into_iter().enumerate() {
        classes.entry(s).or_default().push(q);
    }
    Ok(build(net, mesh, classes.into_iter().collect()))
}

fn build(net: &SplineNetwork, mesh: &QuadratureMesh, classes: Vec<(Signature, Vec<usize>)>) -> PhysicalPartition {
    let mut cell_of_point = vec![0; mesh.len()];
    let cells: Vec<Cell> = classes
        .into_iter()
        .enumerate()
        .map(|(id, (sig, members))| {
            for &q in &members {
                cell_of_point[q] = id;
            }
            Cell::from_members(sig, members, mesh)
        })
        .collect();
    PhysicalPartition {
        dim: mesh.dim,
        neurons: net.neurons(),
        cells,
        cell_of_point,
    }
}

/// Fold every cell with fewer than `min_points` points into the heaviest
/// cell whose signature differs in one bit. Cells without such a neighbour
/// are kept. The merged cell keeps the neighbour's signature.
pub fn merge_small_cells(
    partition: &PhysicalPartition,
    net: &SplineNetwork,
    mesh: &QuadratureMesh,
    min_points: usize,
) -> PhysicalPartition {
    let cells = &partition.cells;
    let mut target: Vec<usize> = (0..cells.len()).collect();
    for (id, cell) in cells.iter().enumerate() {
        if cell.members.len() >= min_points {
            continue;
        }
        let best = cells
            .iter()
            .enumerate()
            .filter(|(j, c)| {
                *j != id && c.members.len() >= min_points && c.signature.hamming(&cell.signature) == 1
            })
            .max_by(|a, b| a.1.weight.total_cmp(&b.1.weight).then(b.0.cmp(&a.0)));
        if let Some((j, _)) = best {
            target[id] = j;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, cell) in cells.iter().enumerate() {
        groups
            .entry(target[id])
            .or_default()
            .extend_from_slice(&cell.members);
    }
    let classes = groups
        .into_iter()
        .map(|(id, mut members)| {
            members.sort_unstable();
            (cells[id].signature.clone(), members)
        })
        .collect();
    build(net, mesh, classes)
}

impl PhysicalPartition {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `point,cell` rows.
    pub fn assignment_csv(&self) -> String {
        let mut s = String::from("point,cell\n");
        for (q, c) in self.cell_of_point.iter().enumerate() {
            let _ = writeln!(s, "{q},{c}");
        }
        s
    }

    /// One row per cell: id, point count, weight, centroid and signature bits.
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("cell,points,weight,cx,cy,signature\n");
        for (id, c) in self.cells.iter().enumerate() {
            let _ = writeln!(
                s,
                "{id},{},{},{},{},{}",
                c.members.len(),
                c.weight,
                c.centroid[0],
                c.centroid[1],
                c.signature.to_bits(self.neurons)
            );
        }
        s
    }
}

/// Normal of the hyperplane that splits `cell` along a principal axis.
/// One-dimensional cells always give `+1`.
pub fn principal_direction(cell: &Cell, dim: usize, mode: DirectionMode) -> Result<Point> {
    if cell.members.len() < 2 {
        return Err(AneError::DegenerateCell(format!(
            "cell has {} point(s)",
            cell.members.len()
        )));
    }
    if dim == 1 {
        return Ok([1.0, 0.0]);
    }
    let (_, vmin, _, vmax) = sym_eigen2(&cell.covariance);
    Ok(match mode {
        DirectionMode::MinVariance => vmin,
        DirectionMode::MaxVariance => vmax,
    })
}

/// Eigenvector of the smallest covariance eigenvalue.
pub fn min_variance_direction(cell: &Cell, dim: usize) -> Result<Point> {
    principal_direction(cell, dim, DirectionMode::MinVariance)
}

/// Break lines as `neuron,omega_x,omega_y,b` rows (`omega_y` is 0 in 1D).
pub fn breaklines_csv(net: &SplineNetwork) -> String {
    let mut s = String::from("neuron,omega_x,omega_y,b\n");
    for (i, (w, b)) in net.omegas().iter().zip(net.biases()).enumerate() {
        let _ = writeln!(s, "{i},{},{},{b}", w[0], w[1]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_interval_mesh;

    #[test]
    fn bisection_of_interval() {
        let mesh = build_interval_mesh(0.0, 1.0, 1000).unwrap();
        let net = SplineNetwork::with_hyperplanes(1, 1, 1, vec![], vec![0.5]).unwrap();
        let p = physical_partition(&net, &mesh).unwrap();
        assert_eq!(p.len(), 2);
        for c in &p.cells {
            assert!((c.weight - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn point_on_hyperplane_is_non_positive_side() {
        let net = SplineNetwork::with_hyperplanes(1, 1, 1, vec![], vec![0.5]).unwrap();
        assert!(!Signature::of(&net, &[0.5, 0.0]).get(0));
    }

    #[test]
    fn merge_absorbs_tiny_cell() {
        // Breakpoints 0.5 and 0.5005 isolate a single midpoint.
        let mesh = build_interval_mesh(0.0, 1.0, 1000).unwrap();
        let net = SplineNetwork::with_hyperplanes(1, 1, 1, vec![], vec![0.5, 0.5012]).unwrap();
        let raw = physical_partition(&net, &mesh).unwrap();
        assert_eq!(raw.len(), 3);
        assert!(raw.cells.iter().any(|c| c.members.len() == 1));
        let merged = merge_small_cells(&raw, &net, &mesh, 3);
        assert_eq!(merged.len(), 2);
        let total: usize = merged.cells.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, 1000);
    }

    #[test]
    fn degenerate_cell_is_reported() {
        let mesh = build_interval_mesh(0.0, 1.0, 4).unwrap();
        let cell = Cell::from_members(Signature(vec![0]), vec![0], &mesh);
        assert!(matches!(
            min_variance_direction(&cell, 1),
            Err(AneError::DegenerateCell(_))
        ));
    }
}
