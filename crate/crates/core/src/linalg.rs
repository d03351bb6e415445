//! Dense complex matrices and the numerical predicates built on them.
//!
//! Every exact equality of the algebraic theory is checked here as a residual
//! bound against a [`Tolerance`]. Residuals of matrix equalities are measured in
//! the Frobenius norm, which dominates the operator norm, so a residual that
//! passes here also passes in the C*-norm.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

const JACOBI_MAX_SWEEPS: usize = 80;

/// Absolute bound on residual norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    eps: f64,
}

impl Tolerance {
    pub const DEFAULT_EPS: f64 = 1e-9;

    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self { eps })
        } else {
            Err(Error::InvalidTolerance(eps))
        }
    }

    #[inline]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn accepts(&self, residual: f64) -> bool {
        residual <= self.eps
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { eps: Self::DEFAULT_EPS }
    }
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>9.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { row: k / cols, col: k % cols });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("ragged rows"));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|row| row.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| ZERO)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn scalar(z: C64) -> Self {
        Self { rows: 1, cols: 1, data: vec![z] }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    /// Matrix unit `e_{ij}` of the given shape.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        assert!(i < rows && j < cols, "unit index out of range");
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries; this is also the vectorisation used by span tests.
    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.cols).map(<[C64]>::to_vec).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * z).collect() }
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![ZERO; self.rows * rhs.cols];
        for i in 0..self.rows {
            let row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rk = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in row.iter_mut().zip(rk) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { rows: self.rows, cols: rhs.cols, data: out })
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(format!("shape mismatch {:?} vs {:?}", self.shape(), rhs.shape())));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - rhs`; infinite when the shapes differ.
    pub fn distance(&self, rhs: &Self) -> f64 {
        if self.shape() != rhs.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols, "block out of range");
        Self::from_fn(rows, cols, |i, j| self[(row0 + i, col0 + j)])
    }

    pub fn set_block(&mut self, row0: usize, col0: usize, block: &Self) {
        assert!(row0 + block.rows <= self.rows && col0 + block.cols <= self.cols, "block out of range");
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(row0 + i, col0 + j)] = block[(i, j)];
            }
        }
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.try_mul(rhs)?.try_sub(&rhs.try_mul(self)?)
    }

    /// Largest singular value: the C*-norm of the matrix.
    pub fn operator_norm(&self) -> f64 {
        singular_values(self).first().copied().unwrap_or(0.0)
    }

    pub fn is_unitary(&self, tol: Tolerance) -> bool {
        if !self.is_square() {
            return false;
        }
        let id = Self::identity(self.rows);
        let a = self.adjoint();
        tol.accepts((&a * self).distance(&id)) && tol.accepts((self * &a).distance(&id))
    }

    /// Residual `‖m m* m − m‖`.
    pub fn partial_isometry_residual(&self) -> f64 {
        (&(self * &self.adjoint()) * self).distance(self)
    }

    pub fn is_partial_isometry(&self, tol: Tolerance) -> bool {
        tol.accepts(self.partial_isometry_residual())
    }

    /// Residual of positivity: the larger of the skew part's norm and the
    /// negative part of the spectrum of the Hermitian part.
    pub fn positivity_residual(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::shape(format!("positivity needs a square matrix, got {}x{}", self.rows, self.cols)));
        }
        let a = self.adjoint();
        let skew = self.distance(&a);
        let herm = (self + &a).scale(C64::new(0.5, 0.0));
        let min = hermitian_eigenvalues(&herm).first().copied().unwrap_or(0.0);
        Ok(skew.max(-min).max(0.0))
    }

    pub fn is_positive_semidefinite(&self, tol: Tolerance) -> Result<bool> {
        Ok(tol.accepts(self.positivity_residual()?))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// Operator impls panic on shape mismatch; use the `try_*` methods when the
// shapes come from untrusted input.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(C64::norm_sqr).sum()
}

/// One-sided (Hestenes) Jacobi: rotates the columns in place until they are
/// mutually orthogonal. Afterwards the column norms are the singular values
/// and the non-negligible columns span the original column space.
fn orthogonalize_columns(cols: &mut [Vec<C64>]) {
    let n = cols.len();
    if n < 2 {
        return;
    }
    let threshold = f64::EPSILON * (cols[0].len() as f64).sqrt().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = norm_sqr(&cols[p]);
                let beta = norm_sqr(&cols[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g <= threshold * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Remove the phase of gamma so the 2x2 problem is real symmetric.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let yq = *y * phase.conj();
                    let xp = *x;
                    *x = xp * c - yq * s;
                    *y = xp * s + yq * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Upper-triangular factor of a Householder QR of a tall row-major matrix
/// (`rows >= cols`). Returns the `cols × cols` factor as a list of rows.
fn householder_r(mut a: Vec<Vec<C64>>, cols: usize) -> Vec<Vec<C64>> {
    let rows = a.len();
    for j in 0..cols.min(rows) {
        let norm: f64 = (j..rows).map(|i| a[i][j].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[j][j];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (j..rows).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vnorm = norm_sqr(&v).sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        for k in j..cols {
            let s: C64 = (j..rows).map(|i| v[i - j].conj() * a[i][k]).sum();
            for i in j..rows {
                let vi = v[i - j];
                a[i][k] -= vi * s * 2.0;
            }
        }
    }
    a.truncate(cols.min(rows));
    a
}

/// Orthogonal columns spanning the same space as `vectors` (all of length
/// `len`). When there are more vectors than coordinates the family is first
/// compressed by QR: with X the matrix whose rows are the conjugated vectors,
/// X = QR gives X* = R*Q*, so the columns of R* span the same space and carry
/// the same singular values.
fn orthogonal_spanning_columns(vectors: &[&[C64]], len: usize) -> Vec<Vec<C64>> {
    let mut cols: Vec<Vec<C64>> = if vectors.len() > len {
        let x: Vec<Vec<C64>> = vectors.iter().map(|v| v.iter().map(C64::conj).collect()).collect();
        householder_r(x, len).into_iter().map(|row| row.into_iter().map(|z| z.conj()).collect()).collect()
    } else {
        vectors.iter().map(|v| v.to_vec()).collect()
    };
    orthogonalize_columns(&mut cols);
    cols
}

/// Singular values in descending order (one-sided Jacobi).
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    // Work on whichever orientation has fewer columns.
    let cols: Vec<Vec<C64>> = if m.cols <= m.rows {
        (0..m.cols).map(|j| (0..m.rows).map(|i| m[(i, j)]).collect()).collect()
    } else {
        (0..m.rows).map(|i| (0..m.cols).map(|j| m[(i, j)].conj()).collect()).collect()
    };
    let len = cols.first().map_or(0, Vec::len);
    let refs: Vec<&[C64]> = cols.iter().map(Vec::as_slice).collect();
    let out = orthogonal_spanning_columns(&refs, len);
    let mut sigma: Vec<f64> = out.iter().map(|c| norm_sqr(c).sqrt()).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    sigma
}

/// Eigenvalues of a Hermitian matrix in ascending order (cyclic Jacobi).
/// Only the Hermitian part of the input is used.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    let n = m.rows;
    let mut a: Vec<Vec<C64>> = (0..n).map(|i| (0..n).map(|j| (m[(i, j)] + m[(j, i)].conj()) * 0.5).collect()).collect();
    let scale: f64 = a.iter().flatten().map(C64::norm_sqr).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= f64::EPSILON * scale {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[p][q];
                    let g = apq.norm();
                    if g == 0.0 {
                        continue;
                    }
                    let phase = apq / g;
                    let tau = (a[q][q].re - a[p][p].re) / (2.0 * g);
                    let t = if tau == 0.0 { 1.0 } else { tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt()) };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    // J = diag(1, conj(phase)) · [[c, s], [-s, c]] on (p, q).
                    let jpp = C64::new(c, 0.0);
                    let jpq = C64::new(s, 0.0);
                    let jqp = -phase.conj() * s;
                    let jqq = phase.conj() * c;
                    for row in a.iter_mut() {
                        let (x, y) = (row[p], row[q]);
                        row[p] = x * jpp + y * jqp;
                        row[q] = x * jpq + y * jqq;
                    }
                    for k in 0..n {
                        let (x, y) = (a[p][k], a[q][k]);
                        a[p][k] = jpp.conj() * x + jqp.conj() * y;
                        a[q][k] = jpq.conj() * x + jqq.conj() * y;
                    }
                    a[p][q] = ZERO;
                    a[q][p] = ZERO;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i].re).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

fn check_common_shape(mats: &[ComplexMatrix]) -> Result<Option<(usize, usize)>> {
    let Some(first) = mats.first() else {
        return Ok(None);
    };
    if let Some(bad) = mats.iter().find(|m| m.shape() != first.shape()) {
        return Err(Error::shape(format!("span family mixes shapes {:?} and {:?}", first.shape(), bad.shape())));
    }
    Ok(Some(first.shape()))
}

/// Orthonormal basis of the linear span of a family of equally shaped matrices.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    shape: (usize, usize),
    basis: Vec<Vec<C64>>,
    tol: Tolerance,
}

impl SpanBasis {
    /// Singular values below `eps · σ_max` are treated as zero.
    pub fn new(mats: &[ComplexMatrix], tol: Tolerance) -> Result<Self> {
        let shape = match check_common_shape(mats)? {
            Some(s) => s,
            None => return Ok(Self { shape: (0, 0), basis: Vec::new(), tol }),
        };
        let refs: Vec<&[C64]> = mats.iter().map(ComplexMatrix::as_slice).collect();
        Ok(Self::from_vectors(&refs, shape, tol))
    }

    fn from_vectors(vectors: &[&[C64]], shape: (usize, usize), tol: Tolerance) -> Self {
        let cols = orthogonal_spanning_columns(vectors, shape.0 * shape.1);
        let norms: Vec<f64> = cols.iter().map(|c| norm_sqr(c).sqrt()).collect();
        let smax = norms.iter().copied().fold(0.0, f64::max);
        let basis = if smax == 0.0 {
            Vec::new()
        } else {
            cols.into_iter()
                .zip(norms)
                .filter(|&(_, s)| s > tol.eps() * smax)
                .map(|(c, s)| c.into_iter().map(|z| z / s).collect())
                .collect()
        };
        Self { shape, basis, tol }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Least-squares residual of projecting `m` onto the span.
    pub fn residual(&self, m: &ComplexMatrix) -> Result<f64> {
        if self.basis.is_empty() {
            return Ok(m.frobenius_norm());
        }
        if m.shape() != self.shape {
            return Err(Error::shape(format!(
                "span of {:?} matrices cannot contain a {:?} matrix",
                self.shape,
                m.shape()
            )));
        }
        let mut r = m.as_slice().to_vec();
        // Two passes of projection removal keep the residual accurate.
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(q, &r);
                for (x, y) in r.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        Ok(norm_sqr(&r).sqrt())
    }

    pub fn contains(&self, m: &ComplexMatrix) -> Result<bool> {
        let res = self.residual(m)?;
        Ok(res <= self.tol.eps() * (1.0 + m.frobenius_norm()))
    }
}

/// Rank of the family viewed as vectors; an empty family has rank 0.
pub fn span_dimension(mats: &[ComplexMatrix], tol: Tolerance) -> Result<usize> {
    Ok(SpanBasis::new(mats, tol)?.dim())
}

pub fn is_in_span(m: &ComplexMatrix, mats: &[ComplexMatrix], tol: Tolerance) -> Result<bool> {
    if mats.is_empty() {
        return Ok(tol.accepts(m.frobenius_norm()));
    }
    SpanBasis::new(mats, tol)?.contains(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn adjoint_examples() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(m.adjoint(), expected);
        assert_eq!(ComplexMatrix::identity(2).adjoint(), ComplexMatrix::identity(2));
        assert_eq!(ComplexMatrix::scalar(c(0.0, 1.0)).adjoint(), ComplexMatrix::scalar(c(0.0, -1.0)));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(ComplexMatrix::new(2, 2, vec![ONE; 3]), Err(Error::Shape(_))));
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![ONE, c(f64::NAN, 0.0)]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(Tolerance::new(0.0).is_err());
        assert!(Tolerance::new(f64::INFINITY).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        for n in 1..5 {
            assert!((ComplexMatrix::identity(n).operator_norm() - 1.0).abs() < 1e-14);
        }
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]).unwrap();
        assert!((m.operator_norm() - 2.0).abs() < 1e-14);
        assert_eq!(ComplexMatrix::zeros(3, 2).operator_norm(), 0.0);
    }

    #[test]
    fn singular_values_of_wide_and_tall_agree() {
        let m = ComplexMatrix::from_fn(2, 5, |i, j| c((i + 2 * j) as f64, (i * j) as f64 - 1.0));
        let a = singular_values(&m);
        let b = singular_values(&m.adjoint());
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12 * a[0]);
        }
    }

    #[test]
    fn unitary_examples() {
        let tol = Tolerance::default();
        for k in 0..8 {
            let t = 0.7 * k as f64;
            let r = ComplexMatrix::from_real_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]]).unwrap();
            assert!(r.is_unitary(tol));
        }
        assert!(!ComplexMatrix::scalar(c(2.0, 0.0)).is_unitary(tol));
        assert!(!ComplexMatrix::zeros(2, 3).is_unitary(tol));
    }

    #[test]
    fn partial_isometry_examples() {
        let tol = Tolerance::default();
        assert!(ComplexMatrix::unit(2, 2, 0, 1).is_partial_isometry(tol));
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap();
        // m m* m − m = [[1,1],[0,0]], Frobenius norm √2.
        assert!((m.partial_isometry_residual() - 2f64.sqrt()).abs() < 1e-14);
        assert!(!m.is_partial_isometry(tol));
        let h = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]]).unwrap().scale(c(0.5f64.sqrt(), 0.0));
        assert!(h.is_partial_isometry(tol));
    }

    #[test]
    fn positivity_examples() {
        let tol = Tolerance::default();
        let a = ComplexMatrix::from_fn(3, 3, |i, j| c(i as f64 - j as f64, (i + j) as f64));
        assert!((&a.adjoint() * &a).is_positive_semidefinite(tol).unwrap());
        assert!(!(-&ComplexMatrix::identity(2)).is_positive_semidefinite(tol).unwrap());
        let d = ComplexMatrix::diagonal(&[ONE, ZERO, c(1e-12, 0.0)]);
        assert!(d.is_positive_semidefinite(tol).unwrap());
        let d = ComplexMatrix::diagonal(&[ONE, c(-1e-6, 0.0)]);
        assert!(!d.is_positive_semidefinite(tol).unwrap());
        assert!(matches!(ComplexMatrix::zeros(2, 3).is_positive_semidefinite(tol), Err(Error::Shape(_))));
    }

    #[test]
    fn span_examples() {
        let tol = Tolerance::default();
        let e = |i, j| ComplexMatrix::unit(2, 2, i, j);
        assert_eq!(span_dimension(&[e(0, 0), e(1, 1)], tol).unwrap(), 2);
        assert_eq!(span_dimension(&[e(0, 0), e(0, 0)], tol).unwrap(), 1);
        assert_eq!(span_dimension(&[], tol).unwrap(), 0);
        for n in 2..=5 {
            let units: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| ComplexMatrix::unit(n, n, i, j))).collect();
            assert_eq!(span_dimension(&units, tol).unwrap(), n * n);
        }
        assert!(span_dimension(&[e(0, 0), ComplexMatrix::zeros(2, 3)], tol).is_err());
    }

    #[test]
    fn membership_examples() {
        let tol = Tolerance::default();
        let e = |i, j| ComplexMatrix::unit(2, 2, i, j);
        assert!(is_in_span(&e(0, 1), &[e(0, 1), e(1, 0)], tol).unwrap());
        assert!(!is_in_span(&ComplexMatrix::identity(2), &[e(0, 1)], tol).unwrap());
        let mats = [
            ComplexMatrix::from_fn(2, 3, |i, j| c(i as f64, j as f64)),
            ComplexMatrix::from_fn(2, 3, |i, j| c((i * j) as f64, 1.0)),
        ];
        let combo = &mats[0].scale(c(0.3, -2.0)) + &mats[1].scale(c(-1.5, 0.25));
        assert!(is_in_span(&combo, &mats, tol).unwrap());
    }

    #[test]
    fn tall_families_are_compressed_without_losing_rank() {
        // 40 vectors in a 9-dimensional space spanning a 5-dimensional subspace.
        let tol = Tolerance::default();
        let gens: Vec<ComplexMatrix> = (0..5)
            .map(|k| {
                ComplexMatrix::from_fn(3, 3, |i, j| match 3 * i + j {
                    p if p == k => c(1.0, 0.0),
                    p if p == k + 4 => c(0.0, 0.5),
                    _ => ZERO,
                })
            })
            .collect();
        assert_eq!(span_dimension(&gens, tol).unwrap(), 5);
        let family: Vec<ComplexMatrix> = (0..40)
            .map(|t| {
                gens.iter().enumerate().fold(ComplexMatrix::zeros(3, 3), |acc, (k, g)| {
                    let w = c(((t * 3 + k * 5) % 11) as f64 - 5.0, ((t + k) % 3) as f64);
                    &acc + &g.scale(w)
                })
            })
            .collect();
        assert_eq!(span_dimension(&family, tol).unwrap(), 5);
        assert!(is_in_span(&gens[3], &family, tol).unwrap());
        let probe = ComplexMatrix::unit(3, 3, 2, 2);
        let enlarged = span_dimension(&[gens.clone(), vec![probe.clone()]].concat(), tol).unwrap();
        assert_eq!(is_in_span(&probe, &family, tol).unwrap(), enlarged == 5);
    }
}
