//! Initial layouts, the output-weight linear solve, the one-dimensional
//! nodal basis and PCA placement of new neurons.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AneError, Result};
use crate::linalg::{condition_number, spd_solve, SolveInfo};
use crate::par;
use crate::partition::{principal_direction, DirectionMode, PhysicalPartition};
use crate::problem::{dot, mat_vec, PdeProblem, SampledProblem};
use crate::quadrature::{Domain, Point, QuadratureMesh, Shape};
use crate::spline_net::SplineNetwork;

/// Placement of the first-stage hyperplanes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitLayout {
    /// Interior breakpoints `a + i(b − a)/(n + 1)` on intervals, lines through
    /// the origin at uniformly spaced angles on polar domains, families of
    /// parallel lines on rectangles.
    #[default]
    Uniform,
    /// Polar domains: chords at half the radius, normals at uniformly spaced
    /// angles. Elsewhere the same as `Uniform`.
    Chord,
    /// Intervals: breakpoints `a + i(b − a)/n` for `i = 0, …, n − 1`, so the
    /// first neuron is linear on the whole interval. Elsewhere the same as `Uniform`.
    LeftClosed,
}

/// Output weights of newly added neurons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewWeightInit {
    /// Re-solve all output weights from the stiffness system.
    #[default]
    Resolve,
    /// Zero for new neurons, unchanged for the others.
    Zero,
}

/// Uniform first-stage network with zero output weights.
///
/// `jitter` shifts each hyperplane by up to `jitter / 2` of its slot width
/// (in position for intervals and rectangles, in angle for polar domains).
pub fn init_uniform<R: Rng>(
    domain: &Domain,
    n: usize,
    k: u32,
    layout: InitLayout,
    jitter: f64,
    rng: &mut R,
) -> Result<SplineNetwork> {
    if n == 0 {
        return Err(AneError::InvalidArgument("at least one neuron is required".into()));
    }
    let mut shake = |width: f64| {
        if jitter > 0.0 {
            jitter * width * (rng.gen::<f64>() - 0.5)
        } else {
            0.0
        }
    };
    match domain.shape {
        Shape::Interval { a, b } => {
            let biases = if layout == InitLayout::LeftClosed {
                let h = (b - a) / n as f64;
                // The breakpoint at `a` only moves inwards.
                (0..n).map(|i| a + i as f64 * h + if i == 0 { shake(h).abs() } else { shake(h) }).collect()
            } else {
                let h = (b - a) / (n + 1) as f64;
                (1..=n).map(|i| a + i as f64 * h + shake(h)).collect()
            };
            SplineNetwork::with_hyperplanes(k, 1, 1, vec![], biases)
        }
        Shape::PolarSector { r_max, theta_min, theta_max } => {
            polar_layout(k, n, r_max, theta_min, theta_max - theta_min, layout, &mut shake)
        }
        Shape::UnitDisk => polar_layout(k, n, 1.0, 0.0, std::f64::consts::TAU, layout, &mut shake),
        Shape::Rectangle { x0, x1, y0, y1 } => {
            let dirs = (n as f64).sqrt().ceil() as usize;
            let mut angles = Vec::with_capacity(n);
            let mut biases = Vec::with_capacity(n);
            for j in 0..dirs {
                let count = (n - j).div_ceil(dirs);
                if count == 0 {
                    continue;
                }
                let phi = std::f64::consts::PI * j as f64 / dirs as f64;
                let w = [phi.cos(), phi.sin()];
                let proj = [x0 * w[0] + y0 * w[1], x1 * w[0] + y0 * w[1], x0 * w[0] + y1 * w[1], x1 * w[0] + y1 * w[1]];
                let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let h = (hi - lo) / (count + 1) as f64;
                for l in 1..=count {
                    angles.push(phi);
                    biases.push(lo + l as f64 * h + shake(h));
                }
            }
            SplineNetwork::with_hyperplanes(k, 2, 1, angles, biases)
        }
    }
}

fn polar_layout(
    k: u32,
    n: usize,
    r_max: f64,
    theta0: f64,
    opening: f64,
    layout: InitLayout,
    shake: &mut impl FnMut(f64) -> f64,
) -> Result<SplineNetwork> {
    let mut angles = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    match layout {
        InitLayout::Uniform | InitLayout::LeftClosed => {
            // A line through the origin covers two opposite rays, so on
            // sectors wider than a half-plane the lines sweep only [0, π).
            let span = opening.min(std::f64::consts::PI);
            let slot = span / n as f64;
            for j in 0..n {
                let psi = theta0 + (j as f64 + 0.5) * slot + shake(slot);
                angles.push(psi + std::f64::consts::FRAC_PI_2);
                biases.push(0.0);
            }
        }
        InitLayout::Chord => {
            let slot = opening / n as f64;
            for j in 0..n {
                angles.push(theta0 + (j as f64 + 0.5) * slot + shake(slot));
                biases.push(0.5 * r_max);
            }
        }
    }
    SplineNetwork::with_hyperplanes(k, 2, 1, angles, biases)
}

/// Stiffness matrix `K_ij = a_𝒯(φ_i, φ_j)` and load `F_i = f_𝒯(φ_i)` over
/// the basis `φ₀ ≡ 1, φ_i = τ_k(ω_i·x − b_i)`, optionally transformed by `T`.
#[derive(Clone, Debug)]
pub struct StiffnessSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Values and gradients of `φ₀, …, φ_n` at one point.
fn basis_at(net: &SplineNetwork, x: &Point, vals: &mut [f64], grads: &mut [Point]) {
    vals[0] = 1.0;
    grads[0] = [0.0, 0.0];
    for i in 0..net.neurons() {
        vals[i + 1] = net.basis(i, x);
        grads[i + 1] = net.basis_grad(i, x);
    }
}

fn apply_transform(t: &DMatrix<f64>, vals: &mut [f64], grads: &mut [Point], tmp_v: &mut [f64], tmp_g: &mut [Point]) {
    let m = vals.len();
    for j in 0..m {
        let mut v = 0.0;
        let mut g = [0.0, 0.0];
        for i in 0..m {
            let c = t[(j, i)];
            if c != 0.0 {
                v += c * vals[i];
                g[0] += c * grads[i][0];
                g[1] += c * grads[i][1];
            }
        }
        tmp_v[j] = v;
        tmp_g[j] = g;
    }
    vals.copy_from_slice(tmp_v);
    grads.copy_from_slice(tmp_g);
}

impl StiffnessSystem {
    pub fn assemble(data: &SampledProblem, mesh: &QuadratureMesh, net: &SplineNetwork) -> Self {
        Self::assemble_with(data, mesh, net, None)
    }

    /// Assembly in the basis `l = T φ`, evaluated point by point.
    pub fn assemble_with(
        data: &SampledProblem,
        mesh: &QuadratureMesh,
        net: &SplineNetwork,
        transform: Option<&DMatrix<f64>>,
    ) -> Self {
        let m = net.neurons() + 1;
        let dim = data.dim;
        let accumulate = |x: &Point, w_int: f64, w_mass: f64, w_load: f64, k: &mut [f64], f: &mut [f64], q: Option<usize>| {
            let mut vals = vec![0.0; m];
            let mut grads = vec![[0.0; 2]; m];
            basis_at(net, x, &mut vals, &mut grads);
            if let Some(t) = transform {
                let mut tv = vec![0.0; m];
                let mut tg = vec![[0.0; 2]; m];
                apply_transform(t, &mut vals, &mut grads, &mut tv, &mut tg);
            }
            let active: Vec<usize> = (0..m)
                .filter(|&i| vals[i] != 0.0 || grads[i] != [0.0, 0.0])
                .collect();
            let ag: Vec<Point> = match q {
                Some(q) => active.iter().map(|&i| mat_vec(&data.diffusion[q], &grads[i], dim)).collect(),
                None => Vec::new(),
            };
            for (a, &i) in active.iter().enumerate() {
                f[i] += w_load * vals[i];
                for &j in &active {
                    let mut s = w_mass * vals[i] * vals[j];
                    if q.is_some() {
                        s += w_int * dot(&grads[j], &ag[a]);
                    }
                    k[i * m + j] += s;
                }
            }
        };
        let parts = par::map_chunks(mesh.len(), |range| {
            let mut k = vec![0.0; m * m];
            let mut f = vec![0.0; m];
            for q in range {
                let w = mesh.weights[q];
                accumulate(
                    &mesh.points[q],
                    w,
                    w * data.reaction[q],
                    w * data.source[q],
                    &mut k,
                    &mut f,
                    Some(q),
                );
            }
            (k, f)
        });
        let mut k = vec![0.0; m * m];
        let mut f = vec![0.0; m];
        for (pk, pf) in parts {
            k.iter_mut().zip(&pk).for_each(|(a, b)| *a += b);
            f.iter_mut().zip(&pf).for_each(|(a, b)| *a += b);
        }
        let bd = &mesh.dirichlet;
        for q in 0..bd.len() {
            let w = data.gamma_d * bd.weights[q];
            accumulate(&bd.points[q], 0.0, w, w * data.g_dirichlet[q], &mut k, &mut f, None);
        }
        let bn = &mesh.neumann;
        for q in 0..bn.len() {
            accumulate(&bn.points[q], 0.0, 0.0, bn.weights[q] * data.g_neumann[q], &mut k, &mut f, None);
        }
        // Exact symmetry; both triangles were summed in the same order, so
        // this only removes rounding from the A∇φ products.
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (k[i * m + j] + k[j * m + i]);
                k[i * m + j] = s;
                k[j * m + i] = s;
            }
        }
        StiffnessSystem {
            matrix: DMatrix::from_row_slice(m, m, &k),
            rhs: DVector::from_vec(f),
        }
    }

    pub fn condition(&self) -> f64 {
        condition_number(&self.matrix)
    }
}

/// Change of basis from the one-dimensional hinges `φ` to local functions `l = T φ`.
#[derive(Clone, Debug)]
pub struct NodalTransform {
    /// Neuron indices sorted by breakpoint.
    pub order: Vec<usize>,
    /// `h_i = b_{i+1} − b_i` in sorted order; the last gap repeats the one before it.
    pub gaps: Vec<f64>,
    /// `(n+1) × (n+1)`, rows are `l₀, l₁, …` with `l_j` built from the
    /// `j`-th smallest breakpoint; columns follow the network's basis order.
    pub matrix: DMatrix<f64>,
}

pub fn nodal_transform(net: &SplineNetwork) -> Result<NodalTransform> {
    if net.dim() != 1 {
        return Err(AneError::Precondition(
            "the nodal basis exists only in one dimension".into(),
        ));
    }
    let n = net.neurons();
    let b = net.biases();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[i].total_cmp(&b[j]).then(i.cmp(&j)));
    for w in order.windows(2) {
        if b[w[1]] <= b[w[0]] {
            return Err(AneError::DuplicateBreakpoint(b[w[0]]));
        }
    }
    // Sorted position p (1-based) ↦ basis column order[p − 1] + 1.
    let col = |p: usize| order[p - 1] + 1;
    let mut gaps: Vec<f64> = (1..n).map(|p| b[order[p]] - b[order[p - 1]]).collect();
    gaps.push(gaps.last().copied().unwrap_or(1.0));
    let h = |p: usize| gaps[p - 1];
    let mut t = DMatrix::zeros(n + 1, n + 1);
    for p in 1..=n {
        if p + 2 <= n {
            t[(p, col(p))] = 1.0 / h(p);
            t[(p, col(p + 1))] = -(1.0 / h(p) + 1.0 / h(p + 1));
            t[(p, col(p + 2))] = 1.0 / h(p + 1);
        } else if p + 1 == n {
            t[(p, col(p))] = 1.0 / h(p);
            t[(p, col(p + 1))] = -1.0 / h(p);
        } else {
            t[(p, col(p))] = 1.0 / h(p);
        }
    }
    // l₀ = φ₀ − Σ_{p<n} l_p.
    t[(0, 0)] = 1.0;
    for p in 1..n {
        for c in 0..=n {
            let v = t[(p, c)];
            t[(0, c)] -= v;
        }
    }
    Ok(NodalTransform {
        order,
        gaps,
        matrix: t,
    })
}

/// How the output weights were obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSolveReport {
    pub info: SolveInfo,
    /// Solved in the one-dimensional nodal basis.
    pub nodal: bool,
    /// Two hyperplanes closer than `1e-10` in parameter space.
    pub near_duplicate: Option<(usize, usize)>,
}

fn closest_pair(net: &SplineNetwork) -> Option<(usize, usize)> {
    let n = net.neurons();
    for i in 0..n {
        for j in i + 1..n {
            let (wi, wj) = (net.omegas()[i], net.omegas()[j]);
            let d = (wi[0] - wj[0]).powi(2) + (wi[1] - wj[1]).powi(2) + (net.biases()[i] - net.biases()[j]).powi(2);
            if d.sqrt() <= 1e-10 {
                return Some((i, j));
            }
        }
    }
    None
}

/// Minimize `J_𝒯` over output weights with the hyperplanes of `net` fixed.
pub fn solve_output_weights(
    problem: &PdeProblem,
    mesh: &QuadratureMesh,
    net: &SplineNetwork,
    nodal_1d: bool,
) -> Result<(SplineNetwork, OutputSolveReport)> {
    if net.out_dim() != 1 {
        return Err(AneError::DimensionMismatch {
            expected: 1,
            got: net.out_dim(),
        });
    }
    let data = problem.sample(mesh)?;
    let near_duplicate = closest_pair(net);
    let transform = if nodal_1d && net.dim() == 1 && near_duplicate.is_none() {
        nodal_transform(net).ok()
    } else {
        None
    };
    let sys = StiffnessSystem::assemble_with(&data, mesh, net, transform.as_ref().map(|t| &t.matrix));
    let (sol, info) = spd_solve(&sys.matrix, &sys.rhs, near_duplicate.is_some())?;
    let c = match &transform {
        Some(t) => t.matrix.transpose() * sol,
        None => sol,
    };
    let mut out = net.clone();
    out.set_output(&c.as_slice()[..1], &c.as_slice()[1..])?;
    Ok((
        out,
        OutputSolveReport {
            info,
            nodal: transform.is_some(),
            near_duplicate,
        },
    ))
}

/// Minimize `J*_𝒯` over the output weights of a flux network (`o = d`)
/// with its hyperplanes fixed. Unknowns are ordered `(basis, component)`.
pub fn solve_dual_output_weights(
    problem: &PdeProblem,
    mesh: &QuadratureMesh,
    fluxnet: &SplineNetwork,
) -> Result<(SplineNetwork, SolveInfo)> {
    let d = mesh.dim;
    if fluxnet.out_dim() != d {
        return Err(AneError::DimensionMismatch {
            expected: d,
            got: fluxnet.out_dim(),
        });
    }
    let data = problem.sample(mesh)?;
    if data.reaction.iter().any(|&c| !(c > 0.0)) {
        return Err(AneError::Precondition(
            "the complementary functional needs c > 0 everywhere".into(),
        ));
    }
    let m = fluxnet.neurons() + 1;
    let size = m * d;
    let parts = par::map_chunks(mesh.len(), |range| {
        let mut k = vec![0.0; size * size];
        let mut f = vec![0.0; size];
        let mut vals = vec![0.0; m];
        let mut grads = vec![[0.0; 2]; m];
        for q in range {
            basis_at(fluxnet, &mesh.points[q], &mut vals, &mut grads);
            let w = mesh.weights[q];
            let c = data.reaction[q];
            let ai = &data.diffusion_inv[q];
            let active: Vec<usize> = (0..m).filter(|&i| vals[i] != 0.0).collect();
            for &i in &active {
                for r in 0..d {
                    let row = i * d + r;
                    f[row] += w * data.source[q] * grads[i][r] / c;
                    for &j in &active {
                        for s in 0..d {
                            k[row * size + j * d + s] +=
                                w * (vals[i] * vals[j] * ai[r][s] + grads[i][r] * grads[j][s] / c);
                        }
                    }
                }
            }
        }
        (k, f)
    });
    let mut k = vec![0.0; size * size];
    let mut f = vec![0.0; size];
    for (pk, pf) in parts {
        k.iter_mut().zip(&pk).for_each(|(a, b)| *a += b);
        f.iter_mut().zip(&pf).for_each(|(a, b)| *a += b);
    }
    let mut vals = vec![0.0; m];
    let mut grads = vec![[0.0; 2]; m];
    let bn = &mesh.neumann;
    for q in 0..bn.len() {
        basis_at(fluxnet, &bn.points[q], &mut vals, &mut grads);
        let w = bn.weights[q];
        let n = bn.normals[q];
        for i in 0..m {
            for r in 0..d {
                let row = i * d + r;
                f[row] -= data.gamma_n * w * data.g_neumann[q] * vals[i] * n[r];
                for j in 0..m {
                    for s in 0..d {
                        k[row * size + j * d + s] += data.gamma_n * w * vals[i] * vals[j] * n[r] * n[s];
                    }
                }
            }
        }
    }
    let bd = &mesh.dirichlet;
    for q in 0..bd.len() {
        basis_at(fluxnet, &bd.points[q], &mut vals, &mut grads);
        let w = bd.weights[q];
        for i in 0..m {
            for r in 0..d {
                f[i * d + r] -= w * data.g_dirichlet[q] * vals[i] * bd.normals[q][r];
            }
        }
    }
    let kmat = DMatrix::from_row_slice(size, size, &k);
    let (z, info) = spd_solve(&kmat, &DVector::from_vec(f), false)?;
    let mut out = fluxnet.clone();
    out.set_output(&z.as_slice()[..d], &z.as_slice()[d..])?;
    Ok((out, info))
}

/// Record of the neurons added in one enhancement step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnhanceReport {
    /// Per new neuron: the cell it splits, normal, bias, and whether the
    /// bounding-box fallback was used.
    pub added: Vec<AddedNeuron>,
    pub solve: Option<OutputSolveReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddedNeuron {
    pub cell: usize,
    pub omega: Point,
    pub bias: f64,
    pub fallback: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnhanceOptions {
    pub direction: DirectionMode,
    pub weights: NewWeightInit,
    pub nodal_1d: bool,
}

/// Add one neuron per marked cell through the cell's centroid.
pub fn enhance(
    net: &SplineNetwork,
    partition: &PhysicalPartition,
    marked: &[usize],
    problem: &PdeProblem,
    mesh: &QuadratureMesh,
    opts: &EnhanceOptions,
) -> Result<(SplineNetwork, EnhanceReport)> {
    if marked.is_empty() {
        return Err(AneError::InvalidArgument("no cells marked".into()));
    }
    let mut out = net.clone();
    let mut report = EnhanceReport::default();
    for &id in marked {
        let cell = partition
            .cells
            .get(id)
            .ok_or_else(|| AneError::InvalidArgument(format!("cell {id} does not exist")))?;
        let (omega, fallback) = match principal_direction(cell, mesh.dim, opts.direction) {
            Ok(w) => (w, false),
            Err(AneError::DegenerateCell(_)) => {
                let (lo, hi) = cell.bounding_box(mesh);
                let w = if mesh.dim == 1 || hi[0] - lo[0] >= hi[1] - lo[1] {
                    [1.0, 0.0]
                } else {
                    [0.0, 1.0]
                };
                (w, true)
            }
            Err(e) => return Err(e),
        };
        let bias = omega[0] * cell.centroid[0] + omega[1] * cell.centroid[1];
        out.push_neuron(omega[1].atan2(omega[0]), bias);
        report.added.push(AddedNeuron {
            cell: id,
            omega,
            bias,
            fallback,
        });
    }
    if opts.weights == NewWeightInit::Resolve {
        let (solved, rep) = solve_output_weights(problem, mesh, &out, opts.nodal_1d)?;
        out = solved;
        report.solve = Some(rep);
    }
    Ok((out, report))
}
