#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use weak_teleport::linalg::{kron, ComplexMatrix};
use weak_teleport::DensityMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| gaussian(rng)).unwrap()
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    random_matrix(rng, dim).hermitian_part()
}

/// `G G† / tr(G G†)` with `G` of the given rank.
pub fn random_density(rng: &mut impl Rng, dim: usize, rank: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, j| if j < rank { gaussian(rng) } else { Complex64::new(0.0, 0.0) })
        .unwrap();
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr).hermitian_part()).unwrap()
}

pub fn random_unitary2(rng: &mut impl Rng) -> ComplexMatrix {
    let (a, b) = (gaussian(rng), gaussian(rng));
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    ComplexMatrix::from_row_major(vec![a * phase, -b.conj() * phase, b * phase, a.conj() * phase]).unwrap()
}

pub fn random_local_unitary(rng: &mut impl Rng) -> ComplexMatrix {
    kron(&random_unitary2(rng), &random_unitary2(rng)).unwrap()
}

/// Mixing probability of the Werner state left by one depolarized round.
pub fn decay(lambda: f64) -> f64 {
    0.5 * (1.0 - lambda + ((1.0 - lambda) * (1.0 + 3.0 * lambda)).sqrt())
}

/// `p|B1⟩⟨B1| + (1-p) I/4`, written out entrywise.
pub fn werner_matrix(p: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::diag(&[(1.0 + p) / 4.0, (1.0 - p) / 4.0, (1.0 - p) / 4.0, (1.0 + p) / 4.0]).unwrap();
    m[(0, 3)] = Complex64::new(p / 2.0, 0.0);
    m[(3, 0)] = Complex64::new(p / 2.0, 0.0);
    m
}
