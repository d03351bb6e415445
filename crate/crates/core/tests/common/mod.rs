//! Oracles built on nalgebra, independent of the crate's own linear algebra.

#![allow(dead_code)]

use fellkit::linalg::ComplexMatrix;
use nalgebra::{Complex, DMatrix};

pub type NaMatrix = DMatrix<Complex<f64>>;

pub const RANK_EPS: f64 = 1e-8;

pub fn to_na(m: &ComplexMatrix) -> NaMatrix {
    NaMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Rank of the family as vectors in `ℂ^{r·c}`.
pub fn span_rank(mats: &[ComplexMatrix]) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let len = mats[0].rows() * mats[0].cols();
    let mut stacked = NaMatrix::zeros(len, mats.len());
    for (k, m) in mats.iter().enumerate() {
        for (i, z) in m.as_slice().iter().enumerate() {
            stacked[(i, k)] = *z;
        }
    }
    stacked.rank(RANK_EPS)
}

/// Diagonal 0/1 projections onto consecutive blocks of the given sizes.
pub fn block_projections(dims: &[usize]) -> Vec<NaMatrix> {
    let n: usize = dims.iter().sum();
    let mut start = 0;
    dims.iter()
        .map(|&d| {
            let mut p = NaMatrix::zeros(n, n);
            for i in start..start + d {
                p[(i, i)] = Complex::new(1.0, 0.0);
            }
            start += d;
            p
        })
        .collect()
}

/// `dim ker(b ↦ Σ p b p)` from the rank of the map on matrix units.
pub fn expectation_kernel_dim(dims: &[usize]) -> usize {
    let n: usize = dims.iter().sum();
    let ps = block_projections(dims);
    let mut images = NaMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = NaMatrix::zeros(n, n);
            e[(i, j)] = Complex::new(1.0, 0.0);
            let pe = ps.iter().fold(NaMatrix::zeros(n, n), |acc, p| acc + p * &e * p);
            for (k, z) in pe.iter().enumerate() {
                images[(k, i * n + j)] = *z;
            }
        }
    }
    n * n - images.rank(RANK_EPS)
}

pub fn is_unitary(u: &NaMatrix, eps: f64) -> bool {
    (u.adjoint() * u - NaMatrix::identity(u.nrows(), u.ncols())).norm() < eps
}

/// Number of permutations of `n` points squaring to the identity, by trying
/// every map `{0..n} → {0..n}`.
pub fn brute_force_involutions(n: usize) -> usize {
    let total = n.pow(n as u32);
    (0..total)
        .filter(|&code| {
            let f: Vec<usize> = (0..n).map(|i| (code / n.pow(i as u32)) % n).collect();
            let mut seen = vec![false; n];
            f.iter().all(|&y| !std::mem::replace(&mut seen[y], true)) && (0..n).all(|x| f[f[x]] == x)
        })
        .count()
}
