//! Values printed in the original write-up of the method.

use ane_core::benchmarks::{self, kellogg, lshape, poisson1d};
use ane_core::enhancement::{init_uniform, solve_output_weights, InitLayout};
use ane_core::estimators::Marking;
use ane_core::functionals::relative_errors;
use ane_core::{build_mesh, MeshResolution, SplineNetwork};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn initial_ten_neuron_model_error() {
    // Ten breakpoints at i/10, i = 0..9, weights from the linear solve.
    let case = poisson1d();
    let mesh = build_mesh(&case.problem.domain, case.config.resolution).unwrap();
    let reference = build_mesh(&case.problem.domain, case.config.resolution.refined(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = init_uniform(&case.problem.domain, 10, 1, InitLayout::LeftClosed, 0.0, &mut rng).unwrap();
    let (net, _) = solve_output_weights(&case.problem, &mesh, &net, true).unwrap();
    let err = relative_errors(&case.problem, &reference, &net).unwrap();
    assert!((err.rel_energy - 0.522380).abs() <= 2e-3, "{}", err.rel_energy);
}

#[test]
fn parameter_counts_of_the_tables() {
    let net1 = |n| SplineNetwork::new_1d(1, 1, vec![0.5; n], vec![0.0; n], vec![0.0]).unwrap();
    let net2 = |n| SplineNetwork::new_2d(1, 1, vec![0.0; n], vec![0.5; n], vec![0.0; n], vec![0.0]).unwrap();
    assert_eq!(net1(25).param_count(), 51);
    assert_eq!(net1(50).param_count(), 101);
    assert_eq!(net2(20).param_count(), 61);
    assert_eq!(net2(42).param_count(), 127);
    assert_eq!(net2(86).param_count(), 259);
}

#[test]
fn benchmark_settings() {
    let p = poisson1d().config;
    assert_eq!(p.tolerance, 0.08);
    assert_eq!(p.start_neurons, 10);
    assert_eq!(p.marking, Marking::Average);
    assert_eq!(p.resolution, MeshResolution::Interval { m: 1000 });

    let l = lshape();
    assert_eq!(l.config.tolerance, 0.15);
    assert_eq!(l.config.start_neurons, 20);
    assert_eq!(l.config.marking, Marking::Bulk { fraction: 0.5 });
    assert_eq!(l.config.resolution, MeshResolution::Polar { m_r: 50, m_theta: 270 });
    assert_eq!(l.config.train.learning_rate, 0.001);
    assert_eq!(l.problem.gamma_d, 200.0);

    let k = kellogg();
    assert_eq!(k.config.tolerance, 0.6);
    assert_eq!(k.config.start_neurons, 20);
    assert_eq!(k.config.marking, Marking::Bulk { fraction: 0.7 });
    assert_eq!(k.config.resolution, MeshResolution::Polar { m_r: 50, m_theta: 360 });
    assert_eq!(k.config.train.learning_rate, 0.001);
    assert_eq!(k.problem.gamma_d, 200.0);
}

#[test]
fn kellogg_constants() {
    assert_eq!(benchmarks::KELLOGG_R, 161.4476387975881);
    assert_eq!(benchmarks::KELLOGG_BETA, 0.1);
    assert!((benchmarks::KELLOGG_RHO - std::f64::consts::FRAC_PI_4).abs() <= 1e-15);
    assert_eq!(benchmarks::KELLOGG_SIGMA, -14.92256510455152);
}
