//! Flux recovery, a posteriori indicators and marking.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::functionals::PrimalEnergy;
use crate::linalg::{spd_solve, SolveInfo};
use crate::par;
use crate::partition::PhysicalPartition;
use crate::problem::{dot, mat_mul, mat_vec, Mat2, PdeProblem, SampledProblem};
use crate::quadrature::{Point, QuadratureMesh};
use crate::spline_net::SplineNetwork;
use crate::trainer::{train, Objective, TrainConfig, TrainReport};

/// Weight `D` in the recovery norm `‖D^{-1/2}(τ + A∇u)‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxWeight {
    #[default]
    Identity,
    Diffusion,
    DiffusionSquared,
}

impl FluxWeight {
    /// `D^{-1}` at one node.
    fn inverse(self, a_inv: &Mat2) -> Mat2 {
        match self {
            FluxWeight::Identity => [[1.0, 0.0], [0.0, 1.0]],
            FluxWeight::Diffusion => *a_inv,
            FluxWeight::DiffusionSquared => mat_mul(a_inv, a_inv),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RecoveredFlux {
    pub net: SplineNetwork,
    pub weight: FluxWeight,
    /// `½‖D^{-1/2}(σ̂ + A∇u)‖²` after training.
    pub loss: f64,
    /// Loss right after the least-squares initialization.
    pub initial_loss: f64,
    pub train: TrainReport,
}

/// `½ Σ w (τ − t)ᵀ D⁻¹ (τ − t)` with target `t = −A∇u` fixed at each node.
struct RecoveryLoss<'a> {
    mesh: &'a QuadratureMesh,
    target: Vec<Point>,
    d_inv: Vec<Mat2>,
}

impl RecoveryLoss<'_> {
    fn eval(&self, net: &SplineNetwork, grad: Option<&mut [f64]>) -> f64 {
        let mesh = self.mesh;
        let width = if grad.is_some() { net.flat_len() } else { 0 };
        let dim = mesh.dim;
        let parts = par::map_chunks(mesh.len(), |range| {
            let mut g = vec![0.0; width];
            let mut s = 0.0;
            let mut v = [0.0; 2];
            let mut gv = [[0.0; 2]; 2];
            for q in range {
                let x = &mesh.points[q];
                let w = mesh.weights[q];
                net.eval_point(x, false, &mut v[..dim], &mut gv[..dim]);
                let t = self.target[q];
                let e = [v[0] - t[0], if dim == 2 { v[1] - t[1] } else { 0.0 }];
                let de = mat_vec(&self.d_inv[q], &e, dim);
                s += 0.5 * w * dot(&e, &de);
                if width > 0 {
                    let cot = [w * de[0], w * de[1]];
                    net.accumulate_adjoint(x, &cot[..dim], None, &mut g);
                }
            }
            (s, g)
        });
        let (total, g) = par::reduce_pairs(parts, width);
        if let Some(out) = grad {
            out.copy_from_slice(&g);
        }
        total
    }
}

impl Objective for RecoveryLoss<'_> {
    fn value_and_grad(&self, net: &SplineNetwork, grad: &mut [f64]) -> f64 {
        self.eval(net, Some(grad))
    }

    fn value(&self, net: &SplineNetwork) -> f64 {
        self.eval(net, None)
    }
}

/// Numerical flux `−A∇u` of a primal network at every interior node.
pub fn numerical_flux(data: &SampledProblem, mesh: &QuadratureMesh, net: &SplineNetwork) -> Vec<Point> {
    let mut v = [0.0];
    let mut gv = [[0.0; 2]];
    mesh.points
        .iter()
        .enumerate()
        .map(|(q, x)| {
            net.eval_point(x, true, &mut v, &mut gv);
            let s = mat_vec(&data.diffusion[q], &gv[0], data.dim);
            [-s[0], -s[1]]
        })
        .collect()
}

/// Output weights of `net` (hyperplanes fixed) minimizing
/// `Σ w (τ − t)ᵀ D⁻¹ (τ − t)`. Unknowns are ordered `(basis, component)`.
fn least_squares_output(
    net: &SplineNetwork,
    mesh: &QuadratureMesh,
    target: &[Point],
    d_inv: &[Mat2],
) -> Result<(SplineNetwork, SolveInfo)> {
    let o = net.out_dim();
    let nb = net.neurons() + 1;
    let size = nb * o;
    let parts = par::map_chunks(mesh.len(), |range| {
        let mut m = vec![0.0; size * size];
        let mut rhs = vec![0.0; size];
        let mut phi = Vec::with_capacity(nb);
        for q in range {
            let x = &mesh.points[q];
            let w = mesh.weights[q];
            phi.clear();
            phi.push((0usize, 1.0));
            for i in 0..net.neurons() {
                let b = net.basis(i, x);
                if b != 0.0 {
                    phi.push((i + 1, b));
                }
            }
            let di = &d_inv[q];
            let dt = mat_vec(di, &target[q], o);
            for &(i, pi) in &phi {
                for r in 0..o {
                    rhs[i * o + r] += w * pi * dt[r];
                }
                for &(j, pj) in &phi {
                    for r in 0..o {
                        for s in 0..o {
                            m[(i * o + r) * size + j * o + s] += w * pi * pj * di[r][s];
                        }
                    }
                }
            }
        }
        (m, rhs)
    });
    let mut m = vec![0.0; size * size];
    let mut rhs = vec![0.0; size];
    for (pm, pr) in parts {
        m.iter_mut().zip(&pm).for_each(|(a, b)| *a += b);
        rhs.iter_mut().zip(&pr).for_each(|(a, b)| *a += b);
    }
    let k = DMatrix::from_row_slice(size, size, &m);
    let f = DVector::from_vec(rhs);
    let (z, info) = spd_solve(&k, &f, false)?;
    let mut out = net.clone();
    out.set_output(&z.as_slice()[..o], &z.as_slice()[o..])?;
    Ok((out, info))
}

/// Train a flux network with the primal network's hyperplanes towards
/// `−A∇u_𝒯`. Output weights start from the least-squares fit.
pub fn recover_flux(
    problem: &PdeProblem,
    mesh: &QuadratureMesh,
    net: &SplineNetwork,
    weight: FluxWeight,
    cfg: &TrainConfig,
) -> Result<RecoveredFlux> {
    let data = problem.sample(mesh)?;
    let target = numerical_flux(&data, mesh, net);
    let d_inv: Vec<Mat2> = data.diffusion_inv.iter().map(|ai| weight.inverse(ai)).collect();
    let template = net.with_out_dim(mesh.dim)?;
    let (init, _) = least_squares_output(&template, mesh, &target, &d_inv)?;
    let loss = RecoveryLoss {
        mesh,
        target,
        d_inv,
    };
    let initial_loss = loss.value(&init);
    let (trained, report) = train(&init, &loss, cfg)?;
    Ok(RecoveredFlux {
        net: trained,
        weight,
        loss: report.final_loss,
        initial_loss,
        train: report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Recovery,
    LeastSquares,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum Marking {
    Average,
    Bulk { fraction: f64 },
}

impl Marking {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marking::Bulk { fraction } if !(fraction > 0.0 && fraction < 1.0) => Err(
                AneError::InvalidArgument(format!("bulk fraction must lie in (0, 1), got {fraction}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, indicators: &[f64]) -> Vec<usize> {
        match *self {
            Marking::Average => mark_average(indicators),
            Marking::Bulk { fraction } => mark_bulk(indicators, fraction),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub kind: EstimatorKind,
    /// Per-cell indicators, indexed like the partition's cells.
    pub indicators: Vec<f64>,
    /// `sqrt(Σ indicators²)`.
    pub estimator: f64,
    /// `‖σ̂_𝒯‖₀`.
    pub flux_norm: f64,
    /// `estimator / flux_norm`.
    pub relative: f64,
    pub marking: Option<Marking>,
    pub marked: Vec<usize>,
}

impl IndicatorReport {
    fn new(kind: EstimatorKind, sq: Vec<f64>, flux_norm: f64) -> Self {
        let total: f64 = sq.iter().sum();
        let estimator = total.sqrt();
        IndicatorReport {
            kind,
            indicators: sq.into_iter().map(f64::sqrt).collect(),
            estimator,
            flux_norm,
            relative: if flux_norm > 0.0 { estimator / flux_norm } else { f64::INFINITY },
            marking: None,
            marked: Vec::new(),
        }
    }

    pub fn mark(&mut self, marking: Marking) {
        self.marked = marking.apply(&self.indicators);
        self.marking = Some(marking);
    }

    /// `cell,indicator,marked` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cell,indicator,marked\n");
        let mut flags = vec![false; self.indicators.len()];
        for &m in &self.marked {
            flags[m] = true;
        }
        for (k, v) in self.indicators.iter().enumerate() {
            let _ = writeln!(s, "{k},{v},{}", u8::from(flags[k]));
        }
        s
    }
}

/// Squared per-cell sums of a per-node density.
fn cell_sums(partition: &PhysicalPartition, density: &[f64]) -> Vec<f64> {
    partition
        .cells
        .iter()
        .map(|c| c.members.iter().map(|&q| density[q]).sum())
        .collect()
}

fn check_partition(partition: &PhysicalPartition, mesh: &QuadratureMesh) -> Result<()> {
    if partition.is_empty() {
        return Err(AneError::EmptyPartition);
    }
    if partition.cell_of_point.len() != mesh.len() {
        return Err(AneError::DimensionMismatch {
            expected: mesh.len(),
            got: partition.cell_of_point.len(),
        });
    }
    Ok(())
}

/// Per-node values of `w |σ̂|²` and of `w eᵀ M e` with `e = σ̂ + A∇u`.
fn flux_densities(
    data: &SampledProblem,
    mesh: &QuadratureMesh,
    net: &SplineNetwork,
    flux: &SplineNetwork,
    metric: impl Fn(usize) -> Mat2,
) -> (Vec<f64>, Vec<f64>) {
    let dim = mesh.dim;
    let own = numerical_flux(data, mesh, net);
    let mut v = [0.0; 2];
    let mut gv = [[0.0; 2]; 2];
    let mut norm = Vec::with_capacity(mesh.len());
    let mut err = Vec::with_capacity(mesh.len());
    for (q, x) in mesh.points.iter().enumerate() {
        flux.eval_point(x, false, &mut v[..dim], &mut gv[..dim]);
        let s = [v[0], if dim == 2 { v[1] } else { 0.0 }];
        let e = [s[0] - own[q][0], s[1] - own[q][1]];
        let w = mesh.weights[q];
        norm.push(w * dot(&s, &s));
        err.push(w * dot(&e, &mat_vec(&metric(q), &e, dim)));
    }
    (norm, err)
}

/// Recovery indicators `ξ_K = ‖D^{-1/2}(σ̂ + A∇u)‖_{0,K}`.
pub fn recovery_indicators(
    problem: &PdeProblem,
    mesh: &QuadratureMesh,
    partition: &PhysicalPartition,
    net: &SplineNetwork,
    flux: &RecoveredFlux,
) -> Result<IndicatorReport> {
    check_partition(partition, mesh)?;
    let data = problem.sample(mesh)?;
    let weight = flux.weight;
    let (norm, err) = flux_densities(&data, mesh, net, &flux.net, |q| weight.inverse(&data.diffusion_inv[q]));
    let flux_norm = norm.iter().sum::<f64>().sqrt();
    Ok(IndicatorReport::new(
        EstimatorKind::Recovery,
        cell_sums(partition, &err),
        flux_norm,
    ))
}

/// Least-squares indicators
/// `η_K² = ‖A^{-1/2}(σ̂ + A∇u)‖²_K + ‖w(∇·σ̂ + cu − f)‖²_K`,
/// with `w = c^{-1/2}` when `c > 0` everywhere and `w = 1` otherwise.
pub fn ls_indicators(
    problem: &PdeProblem,
    mesh: &QuadratureMesh,
    partition: &PhysicalPartition,
    net: &SplineNetwork,
    flux: &RecoveredFlux,
) -> Result<IndicatorReport> {
    check_partition(partition, mesh)?;
    let data = problem.sample(mesh)?;
    let dim = mesh.dim;
    let (norm, mut dens) = flux_densities(&data, mesh, net, &flux.net, |q| data.diffusion_inv[q]);
    let scaled = data.reaction.iter().all(|&c| c > 0.0);
    let mut u = [0.0];
    let mut gu = [[0.0; 2]];
    let mut v = [0.0; 2];
    let mut gv = [[0.0; 2]; 2];
    for (q, x) in mesh.points.iter().enumerate() {
        net.eval_point(x, false, &mut u, &mut gu);
        flux.net.eval_point(x, true, &mut v[..dim], &mut gv[..dim]);
        let div = (0..dim).map(|r| gv[r][r]).sum::<f64>();
        let c = data.reaction[q];
        let r = div + c * u[0] - data.source[q];
        let wt = if scaled { 1.0 / c } else { 1.0 };
        dens[q] += mesh.weights[q] * wt * r * r;
    }
    let flux_norm = norm.iter().sum::<f64>().sqrt();
    Ok(IndicatorReport::new(
        EstimatorKind::LeastSquares,
        cell_sums(partition, &dens),
        flux_norm,
    ))
}

/// Indicators `≥` their mean. The comparison allows a relative slack of
/// `1e-12` so that equal indicators are all marked despite rounding in the mean.
pub fn mark_average(indicators: &[f64]) -> Vec<usize> {
    if indicators.is_empty() {
        return Vec::new();
    }
    let mean = indicators.iter().sum::<f64>() / indicators.len() as f64;
    let cut = mean - 1e-12 * mean.abs();
    indicators
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= cut)
        .map(|(k, _)| k)
        .collect()
}

/// Smallest set of largest indicators whose squares reach `fraction` of the
/// total. Ties are taken in ascending id order; the result is sorted by id.
pub fn mark_bulk(indicators: &[f64], fraction: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let total: f64 = indicators.iter().map(|v| v * v).sum();
    let goal = fraction * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if acc >= goal {
            break;
        }
        acc += indicators[k] * indicators[k];
        marked.push(k);
    }
    marked.sort_unstable();
    marked
}

/// Energy norm `‖u_𝒯‖_a` on the training mesh.
pub fn solution_energy_norm(energy: &PrimalEnergy<'_>, net: &SplineNetwork) -> f64 {
    energy.quadratic_form(net).sqrt()
}
