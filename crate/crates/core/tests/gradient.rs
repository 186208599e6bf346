mod common;

use ane_core::functionals::{DualEnergy, PrimalEnergy};
use ane_core::quadrature::{BoundaryPiece, Point};
use ane_core::trainer::Objective;
use ane_core::{build_mesh, Domain, MeshResolution, PdeProblem, SplineNetwork};
use common::{random_net, rel_diff, small_lshape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `L(θ) = Σ_q ⟨cot_q, u(x_q; θ)⟩`.
fn scalar(net: &SplineNetwork, points: &[Vec<f64>], cots: &[Vec<f64>]) -> f64 {
    let vals = net.evaluate(points).unwrap();
    vals.iter()
        .zip(cots)
        .map(|(v, c)| v.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

fn central_difference(net: &SplineNetwork, f: impl Fn(&SplineNetwork) -> f64, h: f64) -> Vec<f64> {
    let p = net.params();
    let mut work = net.clone();
    (0..p.len())
        .map(|j| {
            let mut q = p.clone();
            q[j] = p[j] + h;
            work.set_params(&q).unwrap();
            let up = f(&work);
            q[j] = p[j] - h;
            work.set_params(&q).unwrap();
            let down = f(&work);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Points whose preactivations all stay at least `gap` away from zero.
fn points_off_kinks(net: &SplineNetwork, rng: &mut ChaCha8Rng, count: usize, gap: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    while out.len() < count {
        let x: Point = [rng.gen_range(-0.3..1.3), rng.gen_range(-0.3..1.3)];
        let x = if net.dim() == 1 { [x[0], 0.0] } else { x };
        if (0..net.neurons()).all(|i| net.preactivation(i, &x).abs() > gap) {
            out.push(x[..net.dim()].to_vec());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn param_gradient_matches_central_differences(
        seed in any::<u64>(),
        k in 1u32..=3,
        dim in 1usize..=2,
        out_dim in 1usize..=2,
        n in 1usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, k, dim, out_dim, n);
        let points = points_off_kinks(&net, &mut rng, 12, 1e-3);
        let cots: Vec<Vec<f64>> = (0..points.len())
            .map(|_| (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let analytic = net.param_gradient(&cots, &points).unwrap();
        let fd = central_difference(&net, |m| scalar(m, &points, &cots), 1e-6);
        prop_assert!(rel_diff(&analytic, &fd) <= 1e-6, "rel err {}", rel_diff(&analytic, &fd));
    }

    #[test]
    fn spatial_gradient_matches_central_differences(
        seed in any::<u64>(),
        k in 1u32..=3,
        dim in 1usize..=2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, k, dim, 2, 5);
        let points = points_off_kinks(&net, &mut rng, 6, 1e-3);
        let grads = net.gradient_x(&points).unwrap();
        let h = 1e-6;
        for (p, g) in points.iter().zip(&grads) {
            for axis in 0..dim {
                let mut a = p.clone();
                let mut b = p.clone();
                a[axis] += h;
                b[axis] -= h;
                let va = &net.evaluate(&[a]).unwrap()[0];
                let vb = &net.evaluate(&[b]).unwrap()[0];
                for r in 0..2 {
                    let fd = (va[r] - vb[r]) / (2.0 * h);
                    prop_assert!((fd - g[r * dim + axis]).abs() <= 1e-6 * (1.0 + fd.abs()));
                }
            }
        }
    }
}

/// The primal energy gradient agrees with finite differences when the
/// activation is smooth enough that no node sits on a kink of `τ'`.
#[test]
fn primal_energy_gradient_matches_finite_differences() {
    let (problem, mesh) = small_lshape();
    let energy = PrimalEnergy::new(&problem, &mesh).unwrap();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 3, 2, 1, 6);
        let mut grad = vec![0.0; net.flat_len()];
        energy.value_and_grad(&net, &mut grad);
        let fd = central_difference(&net, |m| energy.value(m), 1e-6);
        assert!(rel_diff(&grad, &fd) <= 1e-6, "seed {seed}: {}", rel_diff(&grad, &fd));
    }
}

#[test]
fn primal_energy_gradient_in_one_dimension() {
    let (problem, mesh) = common::unit_interval();
    let energy = PrimalEnergy::new(&problem, &mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = random_net(&mut rng, 2, 1, 1, 5);
    let mut grad = vec![0.0; net.flat_len()];
    energy.value_and_grad(&net, &mut grad);
    let fd = central_difference(&net, |m| energy.value(m), 1e-7);
    assert!(rel_diff(&grad, &fd) <= 1e-5, "{}", rel_diff(&grad, &fd));
}

#[test]
fn dual_energy_gradient_matches_finite_differences() {
    let domain = Domain::rectangle(0.0, 1.0, 0.0, 1.0)
        .unwrap()
        .with_neumann(&[BoundaryPiece::Top, BoundaryPiece::Right])
        .unwrap();
    let mesh = build_mesh(&domain, MeshResolution::Grid { m_x: 15, m_y: 15 }).unwrap();
    let problem = PdeProblem::new(domain)
        .with_reaction(|x| 1.0 + x[0])
        .with_source(|x| x[0] * x[1])
        .with_dirichlet(|x| x[1])
        .with_neumann(|x| x[0] - 0.3)
        .with_penalties(10.0, 10.0);
    let energy = DualEnergy::new(&problem, &mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_net(&mut rng, 3, 2, 2, 4);
    let mut grad = vec![0.0; net.flat_len()];
    energy.value_and_grad(&net, &mut grad);
    let fd = central_difference(&net, |m| energy.value(m), 1e-6);
    assert!(rel_diff(&grad, &fd) <= 1e-6, "{}", rel_diff(&grad, &fd));
}
