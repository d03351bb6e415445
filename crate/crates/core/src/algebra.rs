//! Finite-dimensional C*-algebras `⊕ Mₙᵢ(ℂ)` in their block-diagonal
//! representation on `ℂ^N`.
//!
//! A summand may appear with multiplicity `k`, meaning `Mₙ` acts as
//! `x ↦ diag(x, …, x)` on `k` copies of `ℂⁿ`. The Fell bundle models only
//! produce multiplicity one; higher multiplicities exist so that embeddings
//! such as `ℂ·I ⊂ M₂` can be classified as well.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Tolerance, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraDescriptor", into = "AlgebraDescriptor")]
pub struct FiniteCStarAlgebra {
    block_dims: Vec<usize>,
    multiplicities: Vec<usize>,
    offsets: Vec<usize>,
    ambient_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AlgebraDescriptor {
    block_dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplicities: Option<Vec<usize>>,
}

impl TryFrom<AlgebraDescriptor> for FiniteCStarAlgebra {
    type Error = Error;
    fn try_from(d: AlgebraDescriptor) -> Result<Self> {
        match d.multiplicities {
            Some(m) => Self::with_multiplicities(d.block_dims, m),
            None => Self::new(d.block_dims),
        }
    }
}

impl From<FiniteCStarAlgebra> for AlgebraDescriptor {
    fn from(a: FiniteCStarAlgebra) -> Self {
        let multiplicities = a.multiplicities.iter().any(|&k| k != 1).then(|| a.multiplicities.clone());
        Self { block_dims: a.block_dims, multiplicities }
    }
}

/// Central projection onto one summand.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection {
    pub index: usize,
    pub matrix: ComplexMatrix,
}

impl FiniteCStarAlgebra {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        let ones = vec![1; block_dims.len()];
        Self::with_multiplicities(block_dims, ones)
    }

    pub fn with_multiplicities(block_dims: Vec<usize>, multiplicities: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidDescriptor("an algebra needs at least one block".into()));
        }
        if block_dims.len() != multiplicities.len() {
            return Err(Error::InvalidDescriptor(format!(
                "{} block dimensions but {} multiplicities",
                block_dims.len(),
                multiplicities.len()
            )));
        }
        if block_dims.iter().chain(&multiplicities).any(|&d| d == 0) {
            return Err(Error::InvalidDescriptor("block dimensions and multiplicities must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(block_dims.len());
        let mut acc = 0;
        for (n, k) in block_dims.iter().zip(&multiplicities) {
            offsets.push(acc);
            acc += n * k;
        }
        Ok(Self { block_dims, multiplicities, offsets, ambient_dim: acc })
    }

    /// The full matrix algebra `Mₙ`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// The diagonal masa of `Mₙ`.
    pub fn diagonal_masa(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// `ℂ·I` inside `Mₙ`.
    pub fn scalars_in(n: usize) -> Result<Self> {
        Self::with_multiplicities(vec![1], vec![n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn block_count(&self) -> usize {
        self.block_dims.len()
    }

    pub fn has_unit_multiplicity(&self) -> bool {
        self.multiplicities.iter().all(|&k| k == 1)
    }

    /// Linear dimension `Σ nᵢ²`.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Rows/columns of `ℂ^N` occupied by summand `i`.
    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start = self.offsets[i];
        start..start + self.block_dims[i] * self.multiplicities[i]
    }

    /// Index of the summand containing coordinate `row`.
    pub fn block_of(&self, row: usize) -> usize {
        (0..self.block_count()).rev().find(|&i| self.offsets[i] <= row).expect("row inside ambient space")
    }

    pub fn projection(&self, i: usize) -> BlockProjection {
        let r = self.block_range(i);
        let n = self.ambient_dim;
        BlockProjection {
            index: i,
            matrix: ComplexMatrix::from_fn(n, n, |a, b| if a == b && r.contains(&a) { ONE } else { ZERO }),
        }
    }

    pub fn projections(&self) -> Vec<BlockProjection> {
        (0..self.block_count()).map(|i| self.projection(i)).collect()
    }

    /// Places `x ∈ Mₙᵢ` into the ambient space as `diag(x, …, x)` on block `i`.
    pub fn embed_block(&self, i: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.block_dims[i];
        if x.shape() != (n, n) {
            return Err(Error::shape(format!("block {i} holds {n}x{n} matrices, got {:?}", x.shape())));
        }
        let mut out = ComplexMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for copy in 0..self.multiplicities[i] {
            let at = self.offsets[i] + copy * n;
            out.set_block(at, at, x);
        }
        Ok(out)
    }

    /// Embedded matrix units of every summand; a linear basis of the algebra.
    pub fn basis(&self) -> Vec<ComplexMatrix> {
        let mut out = Vec::with_capacity(self.dim());
        for (i, &n) in self.block_dims.iter().enumerate() {
            for s in 0..n {
                for t in 0..n {
                    let e = ComplexMatrix::unit(n, n, s, t);
                    out.push(self.embed_block(i, &e).expect("unit has block shape"));
                }
            }
        }
        out
    }

    fn check_ambient(&self, b: &ComplexMatrix) -> Result<()> {
        let n = self.ambient_dim;
        if b.shape() != (n, n) {
            return Err(Error::shape(format!("expected a {n}x{n} matrix, got {:?}", b.shape())));
        }
        Ok(())
    }

    /// `Σᵢ pᵢ b pᵢ`.
    pub fn compress(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_ambient(b)?;
        let mut out = ComplexMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for i in 0..self.block_count() {
            let r = self.block_range(i);
            out.set_block(r.start, r.start, &b.block(r.start, r.start, r.len(), r.len()));
        }
        Ok(out)
    }

    /// Trace-preserving conditional expectation onto the algebra: on each
    /// summand the `k` diagonal copies are averaged. With unit multiplicities
    /// this is exactly the compression `Σᵢ pᵢ b pᵢ`.
    pub fn expectation_of(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.has_unit_multiplicity() {
            return self.compress(b);
        }
        self.check_ambient(b)?;
        let mut out = ComplexMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for i in 0..self.block_count() {
            let n = self.block_dims[i];
            let k = self.multiplicities[i];
            let mut avg = ComplexMatrix::zeros(n, n);
            for copy in 0..k {
                let at = self.offsets[i] + copy * n;
                avg = &avg + &b.block(at, at, n, n);
            }
            let avg = avg.scale(C64::new(1.0 / k as f64, 0.0));
            out = &out + &self.embed_block(i, &avg)?;
        }
        Ok(out)
    }

    /// `‖b − E(b)‖`, zero exactly for members.
    pub fn membership_residual(&self, b: &ComplexMatrix) -> Result<f64> {
        Ok(b.distance(&self.expectation_of(b)?))
    }

    /// Membership test; with unit multiplicities this is block-diagonality.
    pub fn contains(&self, b: &ComplexMatrix, tol: Tolerance) -> Result<bool> {
        Ok(tol.accepts(self.membership_residual(b)?))
    }

    /// In finite dimension the unit of the ambient algebra lies in every
    /// summand decomposition, so the approximate unit is the identity.
    pub fn approximate_unit(&self) -> ComplexMatrix {
        ComplexMatrix::identity(self.ambient_dim)
    }
}

/// Membership test as a free function.
pub fn contains(b: &ComplexMatrix, algebra: &FiniteCStarAlgebra, tol: Tolerance) -> Result<bool> {
    algebra.contains(b, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, seeded};

    fn sum(ms: impl IntoIterator<Item = ComplexMatrix>, n: usize) -> ComplexMatrix {
        ms.into_iter().fold(ComplexMatrix::zeros(n, n), |a, b| &a + &b)
    }

    #[test]
    fn make_algebra_examples() {
        let a = FiniteCStarAlgebra::new(vec![2, 1]).unwrap();
        assert_eq!(a.ambient_dim(), 3);
        let ranks: Vec<usize> = a.projections().iter().map(|p| p.matrix.trace().re.round() as usize).collect();
        assert_eq!(ranks, vec![2, 1]);

        let c = FiniteCStarAlgebra::new(vec![1]).unwrap();
        assert_eq!((c.ambient_dim(), c.dim()), (1, 1));

        let a = FiniteCStarAlgebra::new(vec![2, 2, 2]).unwrap();
        assert_eq!(a.ambient_dim(), 6);
        let ps = a.projections();
        assert_eq!(sum(ps.iter().map(|p| p.matrix.clone()), 6), ComplexMatrix::identity(6));
        assert_eq!(a.offsets(), &[0, 2, 4]);
    }

    #[test]
    fn invalid_descriptors() {
        assert!(matches!(FiniteCStarAlgebra::new(vec![]), Err(Error::InvalidDescriptor(_))));
        assert!(matches!(FiniteCStarAlgebra::new(vec![2, 0]), Err(Error::InvalidDescriptor(_))));
        assert!(FiniteCStarAlgebra::with_multiplicities(vec![1], vec![1, 2]).is_err());
    }

    #[test]
    fn projections_are_orthogonal_idempotents() {
        let a = FiniteCStarAlgebra::new(vec![3, 1, 2]).unwrap();
        let ps = a.projections();
        for p in &ps {
            assert_eq!(&p.matrix * &p.matrix, p.matrix);
            assert_eq!(p.matrix.adjoint(), p.matrix);
            for q in &ps {
                if p.index != q.index {
                    assert_eq!(&p.matrix * &q.matrix, ComplexMatrix::zeros(6, 6));
                }
            }
        }
    }

    #[test]
    fn contains_examples() {
        let tol = Tolerance::default();
        let a = FiniteCStarAlgebra::new(vec![2, 1]).unwrap();
        let m2 = ComplexMatrix::from_fn(2, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let x =
            &a.embed_block(0, &m2).unwrap() + &a.embed_block(1, &ComplexMatrix::scalar(C64::new(0.0, 3.0))).unwrap();
        assert!(a.contains(&x, tol).unwrap());
        assert!(!a.contains(&ComplexMatrix::unit(3, 3, 0, 2), tol).unwrap());
        let b = gaussian_matrix(&mut seeded(3), 3, 3);
        for p in a.projections() {
            let pbp = &(&p.matrix * &b) * &p.matrix;
            assert!(a.contains(&pbp, tol).unwrap());
        }
        assert!(a.contains(&ComplexMatrix::zeros(2, 2), tol).is_err());
    }

    #[test]
    fn approximate_unit_is_member() {
        for dims in [vec![2, 1], vec![1], vec![1, 1, 1, 1], vec![3, 2]] {
            let a = FiniteCStarAlgebra::new(dims).unwrap();
            let u = a.approximate_unit();
            assert_eq!(u, ComplexMatrix::identity(a.ambient_dim()));
            assert!(a.contains(&u, Tolerance::default()).unwrap());
        }
    }

    #[test]
    fn compression_is_idempotent() {
        let a = FiniteCStarAlgebra::new(vec![2, 3]).unwrap();
        let b = gaussian_matrix(&mut seeded(11), 5, 5);
        let once = a.compress(&b).unwrap();
        let twice = a.compress(&once).unwrap();
        assert!(once.distance(&twice) <= 1e-12);
    }

    #[test]
    fn scalars_with_multiplicity() {
        let tol = Tolerance::default();
        let a = FiniteCStarAlgebra::scalars_in(2).unwrap();
        assert_eq!((a.ambient_dim(), a.dim()), (2, 1));
        assert!(a.contains(&ComplexMatrix::identity(2), tol).unwrap());
        assert!(!a.contains(&ComplexMatrix::unit(2, 2, 0, 0), tol).unwrap());
        let b = ComplexMatrix::from_real_rows(&[&[1.0, 5.0], &[7.0, 3.0]]).unwrap();
        let e = a.expectation_of(&b).unwrap();
        assert_eq!(e, ComplexMatrix::identity(2).scale(C64::new(2.0, 0.0)));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"block_dims":[1],"multiplicities":[2]}"#);
        let plain = FiniteCStarAlgebra::new(vec![2, 1]).unwrap();
        assert_eq!(serde_json::to_string(&plain).unwrap(), r#"{"block_dims":[2,1]}"#);
        let back: FiniteCStarAlgebra = serde_json::from_str(r#"{"block_dims":[2,1]}"#).unwrap();
        assert_eq!(back, plain);
        assert!(serde_json::from_str::<FiniteCStarAlgebra>(r#"{"block_dims":[]}"#).is_err());
    }
}
