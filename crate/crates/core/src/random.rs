//! Seeded random matrices for tests, oracles and randomized initialization.

use faer::c64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{CMat, RMat};
use crate::manifold::{self, UnitaryGate};

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        c64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

pub fn real_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMat {
    RMat::from_fn(n, n, |_, _| StandardNormal.sample(rng))
}

pub fn real_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Haar-distributed unitary (polar factor of a Ginibre matrix).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryGate {
    let g = ginibre(n, rng);
    UnitaryGate::reunitarize(&g).expect("Ginibre matrices are full rank almost surely")
}

/// Gaussian random tangent vector `V·𝔰(R)` at `v`.
pub fn tangent<R: Rng + ?Sized>(v: &UnitaryGate, rng: &mut R) -> CMat {
    let r = real_matrix(v.dim(), rng);
    v.matrix() * manifold::real_embed(&r).expect("square")
}

/// Random Hermitian matrix `(A + A†)/2` with `A` Ginibre.
pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = ginibre(n, rng);
    manifold::hermitian_part(&a).expect("square")
}
