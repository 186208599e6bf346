mod common;

use ane_core::partition::{merge_small_cells, physical_partition, Signature};
use ane_core::SplineNetwork;
use common::unit_square;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::f64::consts::PI;

/// Random lines, each through a random point of the square.
fn arrangement(rng: &mut ChaCha8Rng, n: usize) -> SplineNetwork {
    let mut angles = Vec::new();
    let mut biases = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.gen_range(0.0..2.0 * PI);
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        angles.push(a);
        biases.push(a.cos() * p[0] + a.sin() * p[1]);
    }
    SplineNetwork::new_2d(1, 1, angles, biases, vec![0.0; n], vec![0.0]).unwrap()
}

/// Independent classifier: the tuple of `ω·x − b > 0` flags.
fn classify(net: &SplineNetwork, x: &[f64; 2]) -> Vec<bool> {
    net.omegas()
        .iter()
        .zip(net.biases())
        .map(|(w, b)| w[0] * x[0] + w[1] * x[1] - b > 0.0)
        .collect()
}

#[test]
fn cell_counts_match_dense_classification() {
    let (_, mesh) = unit_square(120);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..50 {
        let n = rng.gen_range(1..=6);
        let net = arrangement(&mut rng, n);
        let part = physical_partition(&net, &mesh).unwrap();
        let oracle: HashSet<Vec<bool>> = mesh.points.iter().map(|x| classify(&net, x)).collect();
        assert_eq!(part.len(), oracle.len(), "trial {trial}");
        assert!(part.len() <= 1 + n + n * (n - 1) / 2, "trial {trial}: {} cells for {n} lines", part.len());

        let mut seen = vec![false; mesh.len()];
        for (id, cell) in part.cells.iter().enumerate() {
            let sig = classify(&net, &mesh.points[cell.members[0]]);
            for &q in &cell.members {
                assert!(!seen[q]);
                seen[q] = true;
                assert_eq!(part.cell_of_point[q], id);
                assert_eq!(classify(&net, &mesh.points[q]), sig);
            }
            let w: f64 = cell.members.iter().map(|&q| mesh.weights[q]).sum();
            assert!((w - cell.weight).abs() <= 1e-12);
        }
        assert!(seen.iter().all(|&s| s));
    }
}

#[test]
fn signatures_agree_with_classifier() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = arrangement(&mut rng, 70);
    let x = [0.31, 0.77];
    let sig = Signature::of(&net, &x);
    let flags = classify(&net, &x);
    for (i, f) in flags.iter().enumerate() {
        assert_eq!(sig.get(i), *f);
    }
    let bits = sig.to_bits(70);
    assert_eq!(bits.len(), 70);
}

#[test]
fn centroids_are_weighted_means() {
    let (_, mesh) = unit_square(40);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = arrangement(&mut rng, 4);
    let part = physical_partition(&net, &mesh).unwrap();
    for cell in &part.cells {
        let mut c = [0.0, 0.0];
        for &q in &cell.members {
            c[0] += mesh.weights[q] * mesh.points[q][0];
            c[1] += mesh.weights[q] * mesh.points[q][1];
        }
        assert!((c[0] / cell.weight - cell.centroid[0]).abs() <= 1e-12);
        assert!((c[1] / cell.weight - cell.centroid[1]).abs() <= 1e-12);
    }
}

#[test]
fn merging_only_removes_small_cells() {
    let (_, mesh) = unit_square(60);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let net = arrangement(&mut rng, 6);
        let raw = physical_partition(&net, &mesh).unwrap();
        let merged = merge_small_cells(&raw, &net, &mesh, 5);
        assert!(merged.len() <= raw.len());
        let total: usize = merged.cells.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, mesh.len());
        let big = raw.cells.iter().filter(|c| c.members.len() >= 5).count();
        assert!(merged.len() >= big);
    }
}

#[test]
fn interval_partition_counts_breakpoints() {
    let (_, mesh) = common::unit_interval();
    let net = SplineNetwork::new_1d(1, 1, vec![0.25, 0.5, 0.75, 2.0], vec![0.0; 4], vec![0.0]).unwrap();
    let part = physical_partition(&net, &mesh).unwrap();
    assert_eq!(part.len(), 4);
    let weights: Vec<f64> = part.cells.iter().map(|c| c.weight).collect();
    for w in weights {
        assert!((w - 0.25).abs() <= 1e-12);
    }
}
