//! Seeded sampling of test matrices.
//!
//! All sampled checks draw from a SplitMix64 stream so that a seed pins every
//! verdict. Gaussian entries come from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
pub use rand_xoshiro::SplitMix64;

use crate::linalg::{ComplexMatrix, C64, ZERO};

pub type SeededRng = SplitMix64;

pub fn seeded(seed: u64) -> SeededRng {
    SplitMix64::seed_from_u64(seed)
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Unit-modulus scalar with uniformly distributed phase.
pub fn phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Matrix with independent standard complex Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary: Gram–Schmidt on a Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    loop {
        let g = gaussian_matrix(rng, n, n);
        let mut cols: Vec<Vec<C64>> = (0..n).map(|j| (0..n).map(|i| g[(i, j)]).collect()).collect();
        let mut degenerate = false;
        for j in 0..n {
            for _ in 0..2 {
                for k in 0..j {
                    let c: C64 = cols[k].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum();
                    let (done, rest) = cols.split_at_mut(j);
                    for (x, y) in rest[0].iter_mut().zip(&done[k]) {
                        *x -= c * y;
                    }
                }
            }
            let norm = cols[j].iter().map(C64::norm_sqr).sum::<f64>().sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            for x in &mut cols[j] {
                *x /= norm;
            }
        }
        if !degenerate {
            return ComplexMatrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}

/// Diagonal matrix of independent random phases.
pub fn diagonal_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let d: Vec<C64> = (0..n).map(|_| phase(rng)).collect();
    ComplexMatrix::diagonal(&d)
}

/// Random combination of the given matrices with Gaussian coefficients.
pub fn combination<R: Rng + ?Sized>(rng: &mut R, basis: &[ComplexMatrix]) -> Option<ComplexMatrix> {
    let first = basis.first()?;
    let mut acc = ComplexMatrix::from_fn(first.rows(), first.cols(), |_, _| ZERO);
    for b in basis {
        acc = &acc + &b.scale(gaussian(rng));
    }
    Some(acc)
}
