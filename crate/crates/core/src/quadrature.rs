//! Computational domains and composite mid-point quadrature meshes.
//!
//! Every integral in the crate is a weighted sum over a [`QuadratureMesh`].
//! Points are stored as `[f64; 2]`; one-dimensional meshes leave the second
//! coordinate at zero.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};

pub type Point = [f64; 2];

/// Geometry of a built-in domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Interval { a: f64, b: f64 },
    PolarSector { r_max: f64, theta_min: f64, theta_max: f64 },
    UnitDisk,
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

/// Labels for the pieces a domain boundary is split into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPiece {
    Left,
    Right,
    Bottom,
    Top,
    Arc,
    /// Ray at `theta_min` of a sector.
    StartEdge,
    /// Ray at `theta_max` of a sector.
    EndEdge,
}

/// A domain together with its Dirichlet/Neumann boundary split. Pieces not
/// listed as Neumann are Dirichlet, so the two sets always partition the
/// boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    #[serde(default)]
    pub neumann: Vec<BoundaryPiece>,
}

const TWO_PI: f64 = 2.0 * PI;

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(AneError::InvalidRange { lo: a, hi: b });
        }
        Ok(Domain {
            shape: Shape::Interval { a, b },
            neumann: Vec::new(),
        })
    }

    pub fn polar_sector(r_max: f64, theta_min: f64, theta_max: f64) -> Result<Self> {
        if !(r_max > 0.0) {
            return Err(AneError::InvalidArgument(format!(
                "sector radius must be positive, got {r_max}"
            )));
        }
        if !(theta_min < theta_max) {
            return Err(AneError::InvalidRange {
                lo: theta_min,
                hi: theta_max,
            });
        }
        if theta_max - theta_min > TWO_PI + 1e-12 {
            return Err(AneError::InvalidArgument(
                "sector opening exceeds 2π".to_string(),
            ));
        }
        Ok(Domain {
            shape: Shape::PolarSector {
                r_max,
                theta_min,
                theta_max,
            },
            neumann: Vec::new(),
        })
    }

    pub fn unit_disk() -> Self {
        Domain {
            shape: Shape::UnitDisk,
            neumann: Vec::new(),
        }
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1) {
            return Err(AneError::InvalidRange { lo: x0, hi: x1 });
        }
        if !(y0 < y1) {
            return Err(AneError::InvalidRange { lo: y0, hi: y1 });
        }
        Ok(Domain {
            shape: Shape::Rectangle { x0, x1, y0, y1 },
            neumann: Vec::new(),
        })
    }

    pub fn with_neumann(mut self, pieces: &[BoundaryPiece]) -> Result<Self> {
        let valid = self.boundary_pieces();
        for p in pieces {
            if !valid.contains(p) {
                return Err(AneError::InvalidArgument(format!(
                    "{p:?} is not a boundary piece of {:?}",
                    self.shape
                )));
            }
            if !self.neumann.contains(p) {
                self.neumann.push(*p);
            }
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Boundary pieces of this shape in a fixed order.
    pub fn boundary_pieces(&self) -> Vec<BoundaryPiece> {
        use BoundaryPiece::*;
        match self.shape {
            Shape::Interval { .. } => vec![Left, Right],
            Shape::PolarSector {
                theta_min,
                theta_max,
                ..
            } => {
                if is_full_turn(theta_min, theta_max) {
                    vec![Arc]
                } else {
                    vec![Arc, StartEdge, EndEdge]
                }
            }
            Shape::UnitDisk => vec![Arc],
            Shape::Rectangle { .. } => vec![Bottom, Right, Top, Left],
        }
    }

    pub fn is_neumann(&self, piece: BoundaryPiece) -> bool {
        self.neumann.contains(&piece)
    }

    /// Analytic measure (length or area).
    pub fn measure(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::PolarSector {
                r_max,
                theta_min,
                theta_max,
            } => 0.5 * r_max * r_max * (theta_max - theta_min),
            Shape::UnitDisk => PI,
            Shape::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self.shape {
            Shape::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Shape::PolarSector { r_max, .. } => ([-r_max, -r_max], [r_max, r_max]),
            Shape::UnitDisk => ([-1.0, -1.0], [1.0, 1.0]),
            Shape::Rectangle { x0, x1, y0, y1 } => ([x0, y0], [x1, y1]),
        }
    }

    /// Closed-domain membership test used for plotting grids.
    pub fn contains(&self, p: &Point) -> bool {
        match self.shape {
            Shape::Interval { a, b } => p[0] >= a && p[0] <= b,
            Shape::PolarSector {
                r_max,
                theta_min,
                theta_max,
            } => {
                let r = p[0].hypot(p[1]);
                if r > r_max {
                    return false;
                }
                if r == 0.0 || is_full_turn(theta_min, theta_max) {
                    return true;
                }
                let mut th = p[1].atan2(p[0]);
                while th < theta_min {
                    th += TWO_PI;
                }
                th <= theta_max + 1e-14
            }
            Shape::UnitDisk => p[0].hypot(p[1]) <= 1.0,
            Shape::Rectangle { x0, x1, y0, y1 } => {
                p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
            }
        }
    }
}

fn is_full_turn(theta_min: f64, theta_max: f64) -> bool {
    (theta_max - theta_min - TWO_PI).abs() < 1e-12
}

/// Number of mid-point cells per direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshResolution {
    Interval { m: usize },
    Polar { m_r: usize, m_theta: usize },
    Grid { m_x: usize, m_y: usize },
}

impl MeshResolution {
    /// The same layout with every count multiplied by `factor`.
    pub fn refined(self, factor: usize) -> Self {
        match self {
            MeshResolution::Interval { m } => MeshResolution::Interval { m: m * factor },
            MeshResolution::Polar { m_r, m_theta } => MeshResolution::Polar {
                m_r: m_r * factor,
                m_theta: m_theta * factor,
            },
            MeshResolution::Grid { m_x, m_y } => MeshResolution::Grid {
                m_x: m_x * factor,
                m_y: m_y * factor,
            },
        }
    }
}

/// Quadrature nodes on one boundary class (all Dirichlet or all Neumann pieces).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Outward unit normals.
    pub normals: Vec<Point>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push(&mut self, p: Point, w: f64, n: Point) {
        self.points.push(p);
        self.weights.push(w);
        self.normals.push(n);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureMesh {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub dirichlet: BoundaryQuadrature,
    pub neumann: BoundaryQuadrature,
}

impl QuadratureMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted sum of `f` over the interior nodes.
    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// One CSV row per node: tag, coordinates, weight, normal components.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let d = self.dim;
        if d == 1 {
            out.push_str("tag,x,weight,nx\n");
        } else {
            out.push_str("tag,x,y,weight,nx,ny\n");
        }
        let mut row = |tag: &str, p: &Point, w: f64, n: &Point| {
            if d == 1 {
                let _ = writeln!(out, "{tag},{},{w},{}", p[0], n[0]);
            } else {
                let _ = writeln!(out, "{tag},{},{},{w},{},{}", p[0], p[1], n[0], n[1]);
            }
        };
        for (p, w) in self.points.iter().zip(&self.weights) {
            row("interior", p, *w, &[0.0, 0.0]);
        }
        for (tag, set) in [("dirichlet", &self.dirichlet), ("neumann", &self.neumann)] {
            for ((p, w), n) in set.points.iter().zip(&set.weights).zip(&set.normals) {
                row(tag, p, *w, n);
            }
        }
        out
    }
}

/// Mid-point rule on `(a, b)` with `m` cells; both endpoints are Dirichlet
/// nodes of unit weight.
pub fn build_interval_mesh(a: f64, b: f64, m: usize) -> Result<QuadratureMesh> {
    build_mesh(&Domain::interval(a, b)?, MeshResolution::Interval { m })
}

/// Mid-points of the uniform `(r, θ)` grid with polar Jacobian weights.
pub fn build_polar_mesh(domain: &Domain, m_r: usize, m_theta: usize) -> Result<QuadratureMesh> {
    build_mesh(domain, MeshResolution::Polar { m_r, m_theta })
}

pub fn build_mesh(domain: &Domain, res: MeshResolution) -> Result<QuadratureMesh> {
    let mut dirichlet = BoundaryQuadrature::default();
    let mut neumann = BoundaryQuadrature::default();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    {
        let mut boundary = |piece: BoundaryPiece, p: Point, w: f64, n: Point| {
            if domain.is_neumann(piece) {
                neumann.push(p, w, n);
            } else {
                dirichlet.push(p, w, n);
            }
        };

        match (&domain.shape, res) {
            (&Shape::Interval { a, b }, MeshResolution::Interval { m }) => {
                check_count("m", m)?;
                let h = (b - a) / m as f64;
                for j in 0..m {
                    points.push([a + (j as f64 + 0.5) * h, 0.0]);
                    weights.push(h);
                }
                boundary(BoundaryPiece::Left, [a, 0.0], 1.0, [-1.0, 0.0]);
                boundary(BoundaryPiece::Right, [b, 0.0], 1.0, [1.0, 0.0]);
            }
            (Shape::PolarSector { .. } | Shape::UnitDisk, MeshResolution::Polar { m_r, m_theta }) => {
                check_count("m_r", m_r)?;
                check_count("m_theta", m_theta)?;
                let (r_max, t0, t1) = match domain.shape {
                    Shape::PolarSector {
                        r_max,
                        theta_min,
                        theta_max,
                    } => (r_max, theta_min, theta_max),
                    _ => (1.0, 0.0, TWO_PI),
                };
                let dr = r_max / m_r as f64;
                let dt = (t1 - t0) / m_theta as f64;
                for i in 0..m_r {
                    let r = (i as f64 + 0.5) * dr;
                    for j in 0..m_theta {
                        let th = t0 + (j as f64 + 0.5) * dt;
                        points.push([r * th.cos(), r * th.sin()]);
                        weights.push(r * dr * dt);
                    }
                }
                for j in 0..m_theta {
                    let th = t0 + (j as f64 + 0.5) * dt;
                    let n = [th.cos(), th.sin()];
                    boundary(
                        BoundaryPiece::Arc,
                        [r_max * n[0], r_max * n[1]],
                        r_max * dt,
                        n,
                    );
                }
                if !is_full_turn(t0, t1) {
                    for (piece, th, n) in [
                        (BoundaryPiece::StartEdge, t0, [t0.sin(), -t0.cos()]),
                        (BoundaryPiece::EndEdge, t1, [-t1.sin(), t1.cos()]),
                    ] {
                        for i in 0..m_r {
                            let r = (i as f64 + 0.5) * dr;
                            boundary(piece, [r * th.cos(), r * th.sin()], dr, n);
                        }
                    }
                }
            }
            (&Shape::Rectangle { x0, x1, y0, y1 }, MeshResolution::Grid { m_x, m_y }) => {
                check_count("m_x", m_x)?;
                check_count("m_y", m_y)?;
                let hx = (x1 - x0) / m_x as f64;
                let hy = (y1 - y0) / m_y as f64;
                for i in 0..m_x {
                    let x = x0 + (i as f64 + 0.5) * hx;
                    for j in 0..m_y {
                        points.push([x, y0 + (j as f64 + 0.5) * hy]);
                        weights.push(hx * hy);
                    }
                }
                for i in 0..m_x {
                    let x = x0 + (i as f64 + 0.5) * hx;
                    boundary(BoundaryPiece::Bottom, [x, y0], hx, [0.0, -1.0]);
                }
                for j in 0..m_y {
                    let y = y0 + (j as f64 + 0.5) * hy;
                    boundary(BoundaryPiece::Right, [x1, y], hy, [1.0, 0.0]);
                }
                for i in 0..m_x {
                    let x = x0 + (i as f64 + 0.5) * hx;
                    boundary(BoundaryPiece::Top, [x, y1], hx, [0.0, 1.0]);
                }
                for j in 0..m_y {
                    let y = y0 + (j as f64 + 0.5) * hy;
                    boundary(BoundaryPiece::Left, [x0, y], hy, [-1.0, 0.0]);
                }
            }
            (shape, res) => {
                return Err(AneError::InvalidArgument(format!(
                    "resolution {res:?} does not fit domain {shape:?}"
                )))
            }
        }
    }
    Ok(QuadratureMesh {
        dim: domain.dim(),
        points,
        weights,
        dirichlet,
        neumann,
    })
}

fn check_count(name: &str, m: usize) -> Result<()> {
    if m == 0 {
        Err(AneError::InvalidArgument(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn interval_midpoints() {
        let mesh = build_interval_mesh(0.0, 1.0, 4).unwrap();
        let xs: Vec<f64> = mesh.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(mesh.weights.iter().all(|&w| w == 0.25));
        assert_eq!(mesh.dirichlet.len(), 2);
        assert_eq!(mesh.dirichlet.weights, vec![1.0, 1.0]);
        assert!(mesh.neumann.is_empty());
    }

    #[test]
    fn interval_thousand_points_sum_to_length() {
        let mesh = build_interval_mesh(0.0, 1.0, 1000).unwrap();
        assert_eq!(mesh.len(), 1000);
        assert!((mesh.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_exact_for_linear() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        assert!((mesh.integrate(|p| p[0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reversed_interval_is_rejected() {
        assert!(matches!(
            build_interval_mesh(1.0, 0.0, 4),
            Err(AneError::InvalidRange { .. })
        ));
        assert!(build_interval_mesh(0.0, 0.0, 4).is_err());
    }

    #[test]
    fn midpoint_error_is_second_order() {
        let exact = std::f64::consts::E - 1.0;
        let err = |m| {
            let mesh = build_interval_mesh(0.0, 1.0, m).unwrap();
            (mesh.integrate(|p| p[0].exp()) - exact).abs()
        };
        for m in [8, 16, 32, 64] {
            let ratio = err(m) / err(2 * m);
            assert!((3.5..=4.5).contains(&ratio), "m={m}: ratio {ratio}");
        }
    }

    #[test]
    fn disk_area() {
        let mesh = build_polar_mesh(&Domain::unit_disk(), 50, 360).unwrap();
        assert!(rel(mesh.total_weight(), PI) <= 1e-4);
        assert_eq!(mesh.len(), 18000);
        assert_eq!(mesh.dirichlet.len(), 360);
        // Mid-radius weights reproduce the area exactly.
        assert!(rel(mesh.total_weight(), PI) <= 1e-12);
    }

    #[test]
    fn lshape_sector_area() {
        let d = Domain::polar_sector(1.0, 0.0, 1.5 * PI).unwrap();
        let mesh = build_polar_mesh(&d, 50, 270).unwrap();
        assert!(rel(mesh.total_weight(), 0.75 * PI) <= 1e-4);
        // Arc plus two edges.
        assert_eq!(mesh.dirichlet.len(), 270 + 100);
        let boundary_len: f64 = mesh.dirichlet.weights.iter().sum();
        assert!(rel(boundary_len, 1.5 * PI + 2.0) < 1e-12);
    }

    #[test]
    fn single_cell_quarter_sector() {
        let d = Domain::polar_sector(1.0, 0.0, 0.5 * PI).unwrap();
        let mesh = build_polar_mesh(&d, 1, 1).unwrap();
        assert_eq!(mesh.len(), 1);
        let th = PI / 4.0;
        let p = mesh.points[0];
        assert!((p[0] - 0.5 * th.cos()).abs() < 1e-15);
        assert!((p[1] - 0.5 * th.sin()).abs() < 1e-15);
        assert!((mesh.weights[0] - 0.5 * PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn disk_normals_are_radial() {
        let mesh = build_polar_mesh(&Domain::unit_disk(), 10, 360).unwrap();
        for (p, n) in mesh.dirichlet.points.iter().zip(&mesh.dirichlet.normals) {
            let r = p[0].hypot(p[1]);
            assert!((n[0] - p[0] / r).abs() <= 1e-12);
            assert!((n[1] - p[1] / r).abs() <= 1e-12);
            assert!((n[0].hypot(n[1]) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn lshape_edge_normals_point_outward() {
        let d = Domain::polar_sector(1.0, 0.0, 1.5 * PI).unwrap();
        let mesh = build_polar_mesh(&d, 4, 12).unwrap();
        for (p, n) in mesh.dirichlet.points.iter().zip(&mesh.dirichlet.normals) {
            let eps = 1e-6;
            let out = [p[0] + eps * n[0], p[1] + eps * n[1]];
            let inn = [p[0] - eps * n[0], p[1] - eps * n[1]];
            assert!(!d.contains(&out) || out[0].hypot(out[1]) > 1.0, "{p:?} {n:?}");
            assert!(d.contains(&inn), "{p:?} {n:?}");
        }
    }

    #[test]
    fn neumann_split() {
        let d = Domain::rectangle(0.0, 1.0, 0.0, 2.0)
            .unwrap()
            .with_neumann(&[BoundaryPiece::Top])
            .unwrap();
        let mesh = build_mesh(&d, MeshResolution::Grid { m_x: 4, m_y: 8 }).unwrap();
        assert_eq!(mesh.neumann.len(), 4);
        assert_eq!(mesh.dirichlet.len(), 4 + 8 + 8);
        assert!(rel(mesh.total_weight(), 2.0) < 1e-12);
        assert!(d.clone().with_neumann(&[BoundaryPiece::Arc]).is_err());
    }

    #[test]
    fn mismatched_resolution_is_rejected() {
        let d = Domain::unit_disk();
        assert!(build_mesh(&d, MeshResolution::Interval { m: 3 }).is_err());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let mesh = build_interval_mesh(0.0, 1.0, 3).unwrap();
        let csv = mesh.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "tag,x,weight,nx");
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[4].starts_with("dirichlet,0,1,-1"));
    }
}
