//! Discrete energy and complementary functionals, energy norms and the
//! relative errors reported against exact solutions.
//!
//! The fractional boundary norms of the continuous functionals are replaced by
//! boundary `L²` norms scaled by the penalty weights `γ_D` and `γ_N`.

use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::par;
use crate::problem::{dot, mat_vec, PdeProblem, SampledProblem};
use crate::quadrature::{Point, QuadratureMesh};
use crate::spline_net::SplineNetwork;
use crate::trainer::Objective;

/// Terms of a discrete functional.
///
/// `total = diffusion + reaction + boundary_penalty − source − boundary_linear`.
///
/// Primal: `½‖A^{1/2}∇v‖²`, `½‖c^{1/2}v‖²`, `½γ_D‖v − g_D‖²_{Γ_D}`, `(f, v)`,
/// `(g_N, v)_{Γ_N}`.
///
/// Dual: `½‖A^{-1/2}τ‖²`, `½‖c^{-1/2}(∇·τ − f)‖²`, `½γ_N‖τ·n + g_N‖²_{Γ_N}`,
/// `0`, `−(g_D, τ·n)_{Γ_D}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub diffusion: f64,
    pub reaction: f64,
    pub boundary_penalty: f64,
    pub source: f64,
    pub boundary_linear: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn finish(mut self) -> Self {
        self.total =
            self.diffusion + self.reaction + self.boundary_penalty - self.source - self.boundary_linear;
        self
    }
}

fn check_out_dim(net: &SplineNetwork, o: usize) -> Result<()> {
    if net.out_dim() != o {
        return Err(AneError::DimensionMismatch {
            expected: o,
            got: net.out_dim(),
        });
    }
    Ok(())
}

fn check_dim(net: &SplineNetwork, mesh: &QuadratureMesh) -> Result<()> {
    if net.dim() != mesh.dim {
        return Err(AneError::DimensionMismatch {
            expected: mesh.dim,
            got: net.dim(),
        });
    }
    Ok(())
}

/// Primal energy `J_𝒯` on a fixed mesh with coefficients sampled once.
pub struct PrimalEnergy<'a> {
    mesh: &'a QuadratureMesh,
    data: SampledProblem,
}

impl<'a> PrimalEnergy<'a> {
    pub fn new(problem: &PdeProblem, mesh: &'a QuadratureMesh) -> Result<Self> {
        Ok(PrimalEnergy {
            mesh,
            data: problem.sample(mesh)?,
        })
    }

    pub fn mesh(&self) -> &QuadratureMesh {
        self.mesh
    }

    pub fn data(&self) -> &SampledProblem {
        &self.data
    }

    /// Breakdown and, if requested, the flat parameter gradient of the total.
    pub fn evaluate(&self, net: &SplineNetwork, want_grad: bool) -> (EnergyBreakdown, Option<Vec<f64>>) {
        let mesh = self.mesh;
        let data = &self.data;
        let dim = data.dim;
        let width = if want_grad { net.flat_len() } else { 0 };
        let parts = par::map_chunks(mesh.len(), |range| {
            let mut g = vec![0.0; width];
            let mut terms = [0.0; 3];
            let mut v = [0.0];
            let mut gv = [[0.0; 2]];
            for q in range {
                let x = &mesh.points[q];
                let w = mesh.weights[q];
                net.eval_point(x, true, &mut v, &mut gv);
                let a_grad = mat_vec(&data.diffusion[q], &gv[0], dim);
                let c = data.reaction[q];
                let f = data.source[q];
                terms[0] += 0.5 * w * dot(&gv[0], &a_grad);
                terms[1] += 0.5 * w * c * v[0] * v[0];
                terms[2] += w * f * v[0];
                if want_grad {
                    let v_cot = [w * (c * v[0] - f)];
                    let g_cot = [[w * a_grad[0], w * a_grad[1]]];
                    net.accumulate_adjoint(x, &v_cot, Some(&g_cot), &mut g);
                }
            }
            (terms, g)
        });
        let mut e = EnergyBreakdown::default();
        let mut grad = vec![0.0; width];
        for (t, g) in parts {
            e.diffusion += t[0];
            e.reaction += t[1];
            e.source += t[2];
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }

        let mut v = [0.0];
        let mut gv = [[0.0; 2]];
        let bd = &mesh.dirichlet;
        for q in 0..bd.len() {
            let x = &bd.points[q];
            let w = bd.weights[q];
            net.eval_point(x, false, &mut v, &mut gv);
            let r = v[0] - data.g_dirichlet[q];
            e.boundary_penalty += 0.5 * data.gamma_d * w * r * r;
            if want_grad {
                net.accumulate_adjoint(x, &[data.gamma_d * w * r], None, &mut grad);
            }
        }
        let bn = &mesh.neumann;
        for q in 0..bn.len() {
            let x = &bn.points[q];
            let w = bn.weights[q];
            net.eval_point(x, false, &mut v, &mut gv);
            e.boundary_linear += w * data.g_neumann[q] * v[0];
            if want_grad {
                net.accumulate_adjoint(x, &[-w * data.g_neumann[q]], None, &mut grad);
            }
        }
        (e.finish(), want_grad.then_some(grad))
    }

    /// `a_𝒯(v, v)` including the `γ_D` boundary term.
    pub fn quadratic_form(&self, net: &SplineNetwork) -> f64 {
        let mesh = self.mesh;
        let data = &self.data;
        let mut v = [0.0];
        let mut gv = [[0.0; 2]];
        let mut s = 0.0;
        for q in 0..mesh.len() {
            net.eval_point(&mesh.points[q], true, &mut v, &mut gv);
            let ag = mat_vec(&data.diffusion[q], &gv[0], data.dim);
            s += mesh.weights[q] * (dot(&gv[0], &ag) + data.reaction[q] * v[0] * v[0]);
        }
        for q in 0..mesh.dirichlet.len() {
            net.eval_point(&mesh.dirichlet.points[q], false, &mut v, &mut gv);
            s += data.gamma_d * mesh.dirichlet.weights[q] * v[0] * v[0];
        }
        s
    }

    /// `f_𝒯(v) = (f, v) + (g_N, v)_{Γ_N} + γ_D (g_D, v)_{Γ_D}`.
    pub fn linear_form(&self, net: &SplineNetwork) -> f64 {
        let mesh = self.mesh;
        let data = &self.data;
        let mut v = [0.0];
        let mut gv = [[0.0; 2]];
        let mut s = 0.0;
        for q in 0..mesh.len() {
            net.eval_point(&mesh.points[q], false, &mut v, &mut gv);
            s += mesh.weights[q] * data.source[q] * v[0];
        }
        for q in 0..mesh.neumann.len() {
            net.eval_point(&mesh.neumann.points[q], false, &mut v, &mut gv);
            s += mesh.neumann.weights[q] * data.g_neumann[q] * v[0];
        }
        for q in 0..mesh.dirichlet.len() {
            net.eval_point(&mesh.dirichlet.points[q], false, &mut v, &mut gv);
            s += data.gamma_d * mesh.dirichlet.weights[q] * data.g_dirichlet[q] * v[0];
        }
        s
    }
}

impl Objective for PrimalEnergy<'_> {
    fn value_and_grad(&self, net: &SplineNetwork, grad: &mut [f64]) -> f64 {
        let (e, g) = self.evaluate(net, true);
        grad.copy_from_slice(&g.expect("gradient requested"));
        e.total
    }

    fn value(&self, net: &SplineNetwork) -> f64 {
        self.evaluate(net, false).0.total
    }
}

/// Complementary functional `J*_𝒯` for flux networks (`o = d`).
pub struct DualEnergy<'a> {
    mesh: &'a QuadratureMesh,
    data: SampledProblem,
}

impl<'a> DualEnergy<'a> {
    pub fn new(problem: &PdeProblem, mesh: &'a QuadratureMesh) -> Result<Self> {
        let data = problem.sample(mesh)?;
        if let Some(c) = data.reaction.iter().copied().find(|&c| !(c > 0.0)) {
            return Err(AneError::Precondition(format!(
                "the complementary functional needs c > 0 everywhere (found {c})"
            )));
        }
        Ok(DualEnergy { mesh, data })
    }

    pub fn mesh(&self) -> &QuadratureMesh {
        self.mesh
    }

    pub fn evaluate(&self, net: &SplineNetwork, want_grad: bool) -> (EnergyBreakdown, Option<Vec<f64>>) {
        let mesh = self.mesh;
        let data = &self.data;
        let dim = data.dim;
        let width = if want_grad { net.flat_len() } else { 0 };
        let parts = par::map_chunks(mesh.len(), |range| {
            let mut g = vec![0.0; width];
            let mut terms = [0.0; 2];
            let mut v = [0.0; 2];
            let mut gv = [[0.0; 2]; 2];
            for q in range {
                let x = &mesh.points[q];
                let w = mesh.weights[q];
                let vv = &mut v[..dim];
                let gg = &mut gv[..dim];
                net.eval_point(x, true, vv, gg);
                let tau = [vv[0], if dim == 2 { vv[1] } else { 0.0 }];
                let div = if dim == 2 { gg[0][0] + gg[1][1] } else { gg[0][0] };
                let ainv_tau = mat_vec(&data.diffusion_inv[q], &tau, dim);
                let c = data.reaction[q];
                let r = div - data.source[q];
                terms[0] += 0.5 * w * dot(&tau, &ainv_tau);
                terms[1] += 0.5 * w * r * r / c;
                if want_grad {
                    let v_cot = [w * ainv_tau[0], w * ainv_tau[1]];
                    let s = w * r / c;
                    let g_cot = [[s, 0.0], [0.0, s]];
                    net.accumulate_adjoint(x, &v_cot[..dim], Some(&g_cot[..dim]), &mut g);
                }
            }
            (terms, g)
        });
        let mut e = EnergyBreakdown::default();
        let mut grad = vec![0.0; width];
        for (t, g) in parts {
            e.diffusion += t[0];
            e.reaction += t[1];
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let mut v = [0.0; 2];
        let mut gv = [[0.0; 2]; 2];
        let bn = &mesh.neumann;
        for q in 0..bn.len() {
            let n = &bn.normals[q];
            let w = bn.weights[q];
            net.eval_point(&bn.points[q], false, &mut v[..dim], &mut gv[..dim]);
            let r = flux_normal(&v, n, dim) + data.g_neumann[q];
            e.boundary_penalty += 0.5 * data.gamma_n * w * r * r;
            if want_grad {
                let s = data.gamma_n * w * r;
                net.accumulate_adjoint(&bn.points[q], &[s * n[0], s * n[1]][..dim], None, &mut grad);
            }
        }
        let bd = &mesh.dirichlet;
        for q in 0..bd.len() {
            let n = &bd.normals[q];
            let w = bd.weights[q];
            net.eval_point(&bd.points[q], false, &mut v[..dim], &mut gv[..dim]);
            let g = data.g_dirichlet[q];
            e.boundary_linear -= w * g * flux_normal(&v, n, dim);
            if want_grad {
                let s = w * g;
                net.accumulate_adjoint(&bd.points[q], &[s * n[0], s * n[1]][..dim], None, &mut grad);
            }
        }
        (e.finish(), want_grad.then_some(grad))
    }

    /// `J*_𝒯` of an arbitrary field given pointwise as `(τ(x), ∇·τ(x))`,
    /// for instance the exact flux with `∇·σ = f − cu`.
    pub fn evaluate_field(&self, field: impl Fn(&Point) -> (Point, f64)) -> EnergyBreakdown {
        let mesh = self.mesh;
        let data = &self.data;
        let dim = data.dim;
        let mut e = EnergyBreakdown::default();
        for (q, x) in mesh.points.iter().enumerate() {
            let (tau, div) = field(x);
            let tau = [tau[0], if dim == 2 { tau[1] } else { 0.0 }];
            let w = mesh.weights[q];
            let r = div - data.source[q];
            e.diffusion += 0.5 * w * dot(&tau, &mat_vec(&data.diffusion_inv[q], &tau, dim));
            e.reaction += 0.5 * w * r * r / data.reaction[q];
        }
        let bn = &mesh.neumann;
        for q in 0..bn.len() {
            let r = flux_normal(&field(&bn.points[q]).0, &bn.normals[q], dim) + data.g_neumann[q];
            e.boundary_penalty += 0.5 * data.gamma_n * bn.weights[q] * r * r;
        }
        let bd = &mesh.dirichlet;
        for q in 0..bd.len() {
            let tn = flux_normal(&field(&bd.points[q]).0, &bd.normals[q], dim);
            e.boundary_linear -= bd.weights[q] * data.g_dirichlet[q] * tn;
        }
        e.finish()
    }

    /// `a*_𝒯(τ, τ)` including the `γ_N` boundary term.
    pub fn quadratic_form(&self, net: &SplineNetwork) -> f64 {
        let mesh = self.mesh;
        let data = &self.data;
        let dim = data.dim;
        let mut v = [0.0; 2];
        let mut gv = [[0.0; 2]; 2];
        let mut s = 0.0;
        for q in 0..mesh.len() {
            net.eval_point(&mesh.points[q], true, &mut v[..dim], &mut gv[..dim]);
            let tau = [v[0], if dim == 2 { v[1] } else { 0.0 }];
            let div = if dim == 2 { gv[0][0] + gv[1][1] } else { gv[0][0] };
            let at = mat_vec(&data.diffusion_inv[q], &tau, dim);
            s += mesh.weights[q] * (dot(&tau, &at) + div * div / data.reaction[q]);
        }
        let bn = &mesh.neumann;
        for q in 0..bn.len() {
            net.eval_point(&bn.points[q], false, &mut v[..dim], &mut gv[..dim]);
            let tn = flux_normal(&v, &bn.normals[q], dim);
            s += data.gamma_n * bn.weights[q] * tn * tn;
        }
        s
    }
}

#[inline]
fn flux_normal(v: &[f64; 2], n: &Point, dim: usize) -> f64 {
    if dim == 2 {
        v[0] * n[0] + v[1] * n[1]
    } else {
        v[0] * n[0]
    }
}

impl Objective for DualEnergy<'_> {
    fn value_and_grad(&self, net: &SplineNetwork, grad: &mut [f64]) -> f64 {
        let (e, g) = self.evaluate(net, true);
        grad.copy_from_slice(&g.expect("gradient requested"));
        e.total
    }

    fn value(&self, net: &SplineNetwork) -> f64 {
        self.evaluate(net, false).0.total
    }
}

/// `J_𝒯(v)` for a scalar network.
pub fn energy(problem: &PdeProblem, mesh: &QuadratureMesh, net: &SplineNetwork) -> Result<EnergyBreakdown> {
    check_out_dim(net, 1)?;
    check_dim(net, mesh)?;
    Ok(PrimalEnergy::new(problem, mesh)?.evaluate(net, false).0)
}

/// `J*_𝒯(τ)` for a flux network.
pub fn dual_energy(problem: &PdeProblem, mesh: &QuadratureMesh, fluxnet: &SplineNetwork) -> Result<EnergyBreakdown> {
    check_out_dim(fluxnet, mesh.dim)?;
    check_dim(fluxnet, mesh)?;
    Ok(DualEnergy::new(problem, mesh)?.evaluate(fluxnet, false).0)
}

/// `‖v‖_a = a_𝒯(v, v)^{1/2}`.
pub fn energy_norm(problem: &PdeProblem, mesh: &QuadratureMesh, net: &SplineNetwork) -> Result<f64> {
    check_out_dim(net, 1)?;
    check_dim(net, mesh)?;
    Ok(PrimalEnergy::new(problem, mesh)?.quadratic_form(net).sqrt())
}

/// `‖τ‖_{a*} = a*_𝒯(τ, τ)^{1/2}`.
pub fn flux_norm(problem: &PdeProblem, mesh: &QuadratureMesh, fluxnet: &SplineNetwork) -> Result<f64> {
    check_out_dim(fluxnet, mesh.dim)?;
    check_dim(fluxnet, mesh)?;
    Ok(DualEnergy::new(problem, mesh)?.quadratic_form(fluxnet).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    /// `‖u − u_𝒯‖₀ / ‖u‖₀`.
    pub rel_l2: f64,
    /// `‖A^{1/2}∇(u − u_𝒯)‖₀ / ‖A^{1/2}∇u‖₀`.
    pub rel_energy: f64,
    /// `‖A^{1/2}∇(u − u_𝒯)‖₀`.
    pub abs_energy: f64,
}

pub fn relative_errors(
    problem: &PdeProblem,
    reference: &QuadratureMesh,
    net: &SplineNetwork,
) -> Result<RelativeErrors> {
    check_out_dim(net, 1)?;
    check_dim(net, reference)?;
    let (u, gu) = match (&problem.exact, &problem.exact_grad) {
        (Some(u), Some(g)) => (u, g),
        _ => return Err(AneError::MissingExactSolution),
    };
    let dim = problem.dim();
    let parts = par::map_chunks(reference.len(), |range| {
        let mut acc = [0.0; 4];
        let mut v = [0.0];
        let mut gv = [[0.0; 2]];
        for q in range {
            let x = &reference.points[q];
            let w = reference.weights[q];
            net.eval_point(x, true, &mut v, &mut gv);
            let ue = u(x);
            let ge = gu(x);
            let a = (problem.diffusion)(x);
            let e = [ge[0] - gv[0][0], if dim == 2 { ge[1] - gv[0][1] } else { 0.0 }];
            let ge = [ge[0], if dim == 2 { ge[1] } else { 0.0 }];
            acc[0] += w * (ue - v[0]).powi(2);
            acc[1] += w * ue * ue;
            acc[2] += w * dot(&e, &mat_vec(&a, &e, dim));
            acc[3] += w * dot(&ge, &mat_vec(&a, &ge, dim));
        }
        acc
    });
    let mut acc = [0.0; 4];
    for p in parts {
        for j in 0..4 {
            acc[j] += p[j];
        }
    }
    Ok(RelativeErrors {
        rel_l2: (acc[0] / acc[1]).sqrt(),
        rel_energy: (acc[2] / acc[3]).sqrt(),
        abs_energy: acc[2].sqrt(),
    })
}

/// `‖σ − τ‖_{a*} / ‖σ‖_{a*}` against the exact flux `σ = −A∇u`, whose
/// divergence is `f − cu` by the equation itself. Requires `c > 0`.
pub fn relative_flux_error(
    problem: &PdeProblem,
    reference: &QuadratureMesh,
    fluxnet: &SplineNetwork,
) -> Result<f64> {
    check_out_dim(fluxnet, reference.dim)?;
    check_dim(fluxnet, reference)?;
    let u = problem.exact.as_ref().ok_or(AneError::MissingExactSolution)?;
    if problem.exact_grad.is_none() {
        return Err(AneError::MissingExactSolution);
    }
    let data = DualEnergy::new(problem, reference)?.data;
    let dim = data.dim;
    let parts = par::map_chunks(reference.len(), |range| {
        let mut acc = [0.0; 2];
        let mut v = [0.0; 2];
        let mut gv = [[0.0; 2]; 2];
        for q in range {
            let x = &reference.points[q];
            let w = reference.weights[q];
            let sigma = problem.exact_flux(x).expect("exact gradient checked above");
            let c = data.reaction[q];
            let div_sigma = data.source[q] - c * u(x);
            fluxnet.eval_point(x, true, &mut v[..dim], &mut gv[..dim]);
            let div = (0..dim).map(|r| gv[r][r]).sum::<f64>();
            let sigma = [sigma[0], if dim == 2 { sigma[1] } else { 0.0 }];
            let e = [sigma[0] - v[0], if dim == 2 { sigma[1] - v[1] } else { 0.0 }];
            let ai = &data.diffusion_inv[q];
            acc[0] += w * (dot(&e, &mat_vec(ai, &e, dim)) + (div_sigma - div).powi(2) / c);
            acc[1] += w * (dot(&sigma, &mat_vec(ai, &sigma, dim)) + div_sigma * div_sigma / c);
        }
        acc
    });
    let (mut num, mut den) = (0.0, 0.0);
    for p in parts {
        num += p[0];
        den += p[1];
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_interval_mesh, Domain};

    fn unit_problem() -> PdeProblem {
        PdeProblem::new(Domain::interval(0.0, 1.0).unwrap())
    }

    fn identity_hinge() -> SplineNetwork {
        SplineNetwork::new_1d(1, 1, vec![0.0], vec![1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn zero_network_has_zero_energy() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        let net = SplineNetwork::new_1d(1, 1, vec![0.5], vec![0.0], vec![0.0]).unwrap();
        let e = energy(&unit_problem(), &mesh, &net).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(energy_norm(&unit_problem(), &mesh, &net).unwrap(), 0.0);
    }

    #[test]
    fn identity_diffusion_term() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        let e = energy(&unit_problem(), &mesh, &identity_hinge()).unwrap();
        assert!((e.diffusion - 0.5).abs() < 1e-14);
    }

    #[test]
    fn identity_energy_norm() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        let n = energy_norm(&unit_problem(), &mesh, &identity_hinge()).unwrap();
        assert!((n - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn dual_energy_of_linear_flux() {
        let mesh = build_interval_mesh(0.0, 1.0, 1000).unwrap();
        let p = unit_problem().with_reaction(|_| 1.0);
        let e = dual_energy(&p, &mesh, &identity_hinge()).unwrap();
        assert!((e.total - 2.0 / 3.0).abs() < 1e-6, "{}", e.total);
        let zero = SplineNetwork::new_1d(1, 1, vec![0.5], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(dual_energy(&p, &mesh, &zero).unwrap().total, 0.0);
    }

    #[test]
    fn dual_needs_positive_reaction() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        let p = unit_problem().with_reaction(|x| if x[0] < 0.5 { 0.0 } else { 1.0 });
        assert!(matches!(
            dual_energy(&p, &mesh, &identity_hinge()),
            Err(AneError::Precondition(_))
        ));
    }

    #[test]
    fn relative_errors_need_exact_solution() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            relative_errors(&unit_problem(), &mesh, &identity_hinge()),
            Err(AneError::MissingExactSolution)
        ));
    }

    #[test]
    fn relative_errors_vanish_at_exact_linear() {
        let mesh = build_interval_mesh(0.0, 1.0, 20).unwrap();
        let p = unit_problem().with_exact(|x| 2.0 * x[0] + 1.0, |_| [2.0, 0.0]);
        let net = SplineNetwork::new_1d(1, 1, vec![-1.0], vec![2.0], vec![-1.0]).unwrap();
        let r = relative_errors(&p, &mesh, &net).unwrap();
        assert!(r.rel_l2 < 1e-15 && r.rel_energy < 1e-15);
    }

    #[test]
    fn wrong_output_dim_is_rejected() {
        let mesh = build_interval_mesh(0.0, 1.0, 10).unwrap();
        let net = SplineNetwork::new_1d(1, 2, vec![0.5], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(energy(&unit_problem(), &mesh, &net).is_err());
    }
}
