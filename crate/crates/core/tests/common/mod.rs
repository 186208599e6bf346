#![allow(dead_code)]

use ane_core::quadrature::Point;
use ane_core::{build_mesh, Domain, MeshResolution, PdeProblem, QuadratureMesh, SplineNetwork};
use rand::Rng;
use std::f64::consts::PI;

/// Random network on `[0,1]` or the unit square neighbourhood.
pub fn random_net<R: Rng>(rng: &mut R, k: u32, dim: usize, out_dim: usize, n: usize) -> SplineNetwork {
    let biases: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..1.0)).collect();
    let out_weights: Vec<f64> = (0..n * out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let out_bias: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if dim == 1 {
        SplineNetwork::new_1d(k, out_dim, biases, out_weights, out_bias).unwrap()
    } else {
        let angles = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        SplineNetwork::new_2d(k, out_dim, angles, biases, out_weights, out_bias).unwrap()
    }
}

/// Network whose hyperplanes all pass through points drawn from `mesh`.
pub fn net_through_mesh<R: Rng>(rng: &mut R, mesh: &QuadratureMesh, k: u32, n: usize) -> SplineNetwork {
    let mut angles = Vec::new();
    let mut biases = Vec::new();
    for _ in 0..n {
        let p = mesh.points[rng.gen_range(0..mesh.len())];
        if mesh.dim == 1 {
            biases.push(p[0] + rng.gen_range(-1e-3..1e-3));
        } else {
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            angles.push(a);
            biases.push(a.cos() * p[0] + a.sin() * p[1] + rng.gen_range(-1e-3..1e-3));
        }
    }
    let w = vec![0.0; n];
    if mesh.dim == 1 {
        SplineNetwork::new_1d(k, 1, biases, w, vec![0.0]).unwrap()
    } else {
        SplineNetwork::new_2d(k, 1, angles, biases, w, vec![0.0]).unwrap()
    }
}

pub fn unit_interval() -> (PdeProblem, QuadratureMesh) {
    let domain = Domain::interval(0.0, 1.0).unwrap();
    let mesh = build_mesh(&domain, MeshResolution::Interval { m: 200 }).unwrap();
    let problem = PdeProblem::new(domain)
        .with_source(|x| (PI * x[0]).sin() * PI * PI)
        .with_penalties(100.0, 1.0);
    (problem, mesh)
}

/// Small L-shaped sector with a harmonic-ish right-hand side.
pub fn small_lshape() -> (PdeProblem, QuadratureMesh) {
    let domain = Domain::polar_sector(1.0, 0.0, 1.5 * PI).unwrap();
    let mesh = build_mesh(&domain, MeshResolution::Polar { m_r: 12, m_theta: 40 }).unwrap();
    let problem = PdeProblem::new(domain)
        .with_source(|x| 1.0 + x[0] * x[1])
        .with_dirichlet(|x| x[0] - 0.5 * x[1])
        .with_reaction(|x| 0.5 + x[0] * x[0])
        .with_penalties(50.0, 1.0);
    (problem, mesh)
}

pub fn unit_square(m: usize) -> (PdeProblem, QuadratureMesh) {
    let domain = Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
    let mesh = build_mesh(&domain, MeshResolution::Grid { m_x: m, m_y: m }).unwrap();
    (PdeProblem::new(domain), mesh)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
