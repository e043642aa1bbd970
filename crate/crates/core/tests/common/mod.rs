#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qdpack::domains::{make_archipelago, ArchipelagoSpec};
use qdpack::kernels::{KernelEvaluator, PointQuad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn two_disks(a: f64, r: f64) -> ArchipelagoSpec {
    make_archipelago(&[(c(-a, 0.0), r), (c(a, 0.0), r)]).unwrap()
}

pub fn unit_disk() -> ArchipelagoSpec {
    make_archipelago(&[(c(0.0, 0.0), 1.0)]).unwrap()
}

/// Point with modulus in `[1.1, 2]` times the guard radius.
pub fn guarded_point(ev: &KernelEvaluator, rng: &mut ChaCha8Rng) -> Complex64 {
    let g = ev.guard_radius();
    let rho = g * rng.random_range(1.1..2.0);
    Complex64::from_polar(rho, rng.random_range(0.0..std::f64::consts::TAU))
}

pub fn guarded_quads(ev: &KernelEvaluator, n: usize, seed: u64) -> Vec<PointQuad> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let p: Vec<Complex64> = (0..4).map(|_| guarded_point(ev, &mut r)).collect();
            PointQuad::new(p[0], p[1], p[2], p[3])
        })
        .collect()
}

/// Two or three disjoint disks with gaps of at least 0.2.
pub fn random_archipelago(seed: u64) -> ArchipelagoSpec {
    let mut r = rng(seed);
    let count = r.random_range(2..=3);
    let mut disks: Vec<(Complex64, f64)> = Vec::new();
    while disks.len() < count {
        let center = c(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let radius = r.random_range(0.4..1.2);
        if disks.iter().all(|(z, s)| (z - center).norm() > s + radius + 0.2) {
            disks.push((center, radius));
        }
    }
    make_archipelago(&disks).unwrap()
}

pub fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let ev = m.clone().schur().eigenvalues().expect("complex schur");
    ev.iter().copied().collect()
}

/// Largest distance in a greedy matching of two spectra.
pub fn spectral_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut left: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (i, d) = left
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        left.swap_remove(i);
    }
    worst
}
