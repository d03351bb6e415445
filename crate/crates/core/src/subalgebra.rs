//! Normalizers of block-diagonal subalgebras and the classification of
//! inclusions `A ⊂ B = M_N` as diagonal, Cartan or neither.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::algebra::FiniteCStarAlgebra;
use crate::error::{Error, Result};
use crate::fellbundle::{ConditionalExpectation, ExpectationReport, FellBundleModel};
use crate::groupoid::Arrow;
use crate::linalg::{span_dimension, ComplexMatrix, SpanBasis, Tolerance};

/// An inclusion `A ⊂ B` together with an expectation `P: B → A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCandidate {
    a: FiniteCStarAlgebra,
    b: FiniteCStarAlgebra,
    p: ConditionalExpectation,
}

impl PairCandidate {
    pub fn new(a: FiniteCStarAlgebra, b: FiniteCStarAlgebra, p: ConditionalExpectation) -> Result<Self> {
        if b.block_count() != 1 || b.multiplicities()[0] != 1 {
            return Err(Error::InvalidDescriptor("ambient algebra must be a single full block".into()));
        }
        if a.ambient_dim() != b.ambient_dim() {
            return Err(Error::shape(format!(
                "subalgebra acts on dimension {}, ambient algebra on {}",
                a.ambient_dim(),
                b.ambient_dim()
            )));
        }
        if p.range() != &a || p.domain() != &b {
            return Err(Error::InvalidDescriptor("expectation must map B onto A".into()));
        }
        Ok(Self { a, b, p })
    }

    /// `A` inside the full matrix algebra on its ambient space, with the
    /// canonical expectation.
    pub fn canonical(a: FiniteCStarAlgebra) -> Self {
        let p = ConditionalExpectation::onto(a.clone());
        let b = p.domain().clone();
        Self { a, b, p }
    }

    /// `(C*(E⁰), C*(E))` with the restriction map.
    pub fn from_bundle(e: &FellBundleModel) -> Self {
        Self::canonical(e.diagonal_algebra())
    }

    pub fn a(&self) -> &FiniteCStarAlgebra {
        &self.a
    }

    pub fn b(&self) -> &FiniteCStarAlgebra {
        &self.b
    }

    pub fn p(&self) -> &ConditionalExpectation {
        &self.p
    }
}

fn check_ambient(b: &ComplexMatrix, a: &FiniteCStarAlgebra) -> Result<()> {
    let n = a.ambient_dim();
    if b.shape() != (n, n) {
        return Err(Error::shape(format!("expected a {n}x{n} matrix, got {:?}", b.shape())));
    }
    Ok(())
}

/// Largest membership residual of `b*ab` and `bab*` over a basis of `A`,
/// relative to `1 + ‖b‖²`.
pub fn normalizer_residual(b: &ComplexMatrix, a: &FiniteCStarAlgebra) -> Result<f64> {
    check_ambient(b, a)?;
    let bs = b.adjoint();
    let scale = 1.0 + b.frobenius_norm().powi(2);
    let mut worst: f64 = 0.0;
    for x in a.basis() {
        let left = &(&bs * &x) * b;
        let right = &(b * &x) * &bs;
        worst = worst.max(a.membership_residual(&left)?).max(a.membership_residual(&right)?);
    }
    Ok(worst / scale)
}

/// `b* A b ⊂ A` and `b A b* ⊂ A`, checked on a basis of `A`.
pub fn is_normalizer(b: &ComplexMatrix, a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<bool> {
    Ok(tol.accepts(normalizer_residual(b, a)?))
}

/// A normalizer with `b² = 0`.
pub fn is_free_normalizer(b: &ComplexMatrix, a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<bool> {
    if !is_normalizer(b, a, tol)? {
        return Ok(false);
    }
    let sq = b * b;
    Ok(tol.accepts(sq.operator_norm() / (1.0 + b.frobenius_norm().powi(2))))
}

/// `span(sample ∪ A) = B`. Every sample element must be a normalizer.
pub fn is_regular(pair: &PairCandidate, normalizer_sample: &[ComplexMatrix], tol: Tolerance) -> Result<bool> {
    for (i, m) in normalizer_sample.iter().enumerate() {
        if !is_normalizer(m, &pair.a, tol)? {
            return Err(Error::ContractViolation(format!("sample element {i} is not a normalizer of A")));
        }
    }
    Ok(regularity_span(pair, normalizer_sample, tol)? == pair.b.dim())
}

fn regularity_span(pair: &PairCandidate, sample: &[ComplexMatrix], tol: Tolerance) -> Result<usize> {
    let mut family = pair.a.basis();
    family.extend(sample.iter().cloned());
    span_dimension(&family, tol)
}

/// Dimension of the relative commutant `A' ∩ B`.
pub fn relative_commutant_dimension(a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<usize> {
    let n = a.ambient_dim();
    let basis = a.basis();
    let mut images = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let e = ComplexMatrix::unit(n, n, i, j);
            let mut stacked = ComplexMatrix::zeros(n * basis.len(), n);
            for (k, x) in basis.iter().enumerate() {
                stacked.set_block(k * n, 0, &e.commutator(x)?);
            }
            images.push(stacked);
        }
    }
    Ok(n * n - span_dimension(&images, tol)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairClass {
    Diagonal,
    Cartan,
    Neither,
}

impl std::fmt::Display for PairClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Diagonal => "diagonal",
            Self::Cartan => "cartan",
            Self::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class: PairClass,
    pub unit_in_a: bool,
    pub regular: bool,
    pub regularity_span: usize,
    pub dim_b: usize,
    pub rejected_sample: usize,
    pub expectation: ExpectationReport,
    /// `A' ∩ B` equals the centre of `A`, which makes `P` the only
    /// conditional expectation onto `A`.
    pub expectation_unique: bool,
    pub relative_commutant_dim: usize,
    pub block_count: usize,
    pub kernel_dim: usize,
    pub free_normalizers: usize,
    pub free_normalizer_span: usize,
    pub kernel_in_free_span: bool,
}

/// Seed for the sampled expectation checks inside [`classify_pair`].
pub const CLASSIFY_SEED: u64 = 0x5eed_ca47;
const CLASSIFY_SAMPLES: usize = 24;

/// Classifies the pair from the unit, regularity, the expectation checks
/// and the free normalizers found in the sample and among the matrix units
/// outside the diagonal blocks.
pub fn classify_pair(
    pair: &PairCandidate,
    normalizer_sample: &[ComplexMatrix],
    tol: Tolerance,
) -> Result<Classification> {
    classify_pair_with(pair, normalizer_sample, tol, &mut crate::random::seeded(CLASSIFY_SEED))
}

pub fn classify_pair_with<R: Rng + ?Sized>(
    pair: &PairCandidate,
    normalizer_sample: &[ComplexMatrix],
    tol: Tolerance,
    rng: &mut R,
) -> Result<Classification> {
    let a = &pair.a;
    let n = a.ambient_dim();

    let unit_in_a = a.contains(&ComplexMatrix::identity(n), tol)?;

    let mut normalizers = Vec::new();
    for m in normalizer_sample {
        if is_normalizer(m, a, tol)? {
            normalizers.push(m.clone());
        }
    }
    let rejected_sample = normalizer_sample.len() - normalizers.len();
    let regularity_span = regularity_span(pair, &normalizers, tol)?;
    let regular = regularity_span == pair.b.dim();

    let expectation = pair.p.verify(CLASSIFY_SAMPLES, tol, rng)?;
    let relative_commutant_dim = relative_commutant_dimension(a, tol)?;
    let expectation_unique = relative_commutant_dim == a.block_count();

    let mut free: Vec<ComplexMatrix> = Vec::new();
    for m in &normalizers {
        if is_free_normalizer(m, a, tol)? {
            free.push(m.clone());
        }
    }
    for i in 0..n {
        for j in 0..n {
            if a.block_of(i) != a.block_of(j) {
                free.push(ComplexMatrix::unit(n, n, i, j));
            }
        }
    }
    let kernel = pair.p.kernel_basis();
    let kernel_dim = span_dimension(&kernel, tol)?;
    let free_normalizer_span = span_dimension(&free, tol)?;
    let kernel_in_free_span = if free.is_empty() {
        kernel_dim == 0
    } else {
        let span = SpanBasis::new(&free, tol)?;
        kernel.iter().try_fold(true, |ok, k| Ok::<_, Error>(ok && span.contains(k)?))?
    };

    let cartan = unit_in_a && regular && expectation.all_passed() && expectation_unique;
    let class = match (cartan, kernel_in_free_span) {
        (true, true) => PairClass::Diagonal,
        (true, false) => PairClass::Cartan,
        (false, _) => PairClass::Neither,
    };
    Ok(Classification {
        class,
        unit_in_a,
        regular,
        regularity_span,
        dim_b: pair.b.dim(),
        rejected_sample,
        expectation,
        expectation_unique,
        relative_commutant_dim,
        block_count: a.block_count(),
        kernel_dim,
        free_normalizers: free.len(),
        free_normalizer_span,
        kernel_in_free_span,
    })
}

/// `B = A + span[B, A]`.
pub fn extension_property_check(pair: &PairCandidate, tol: Tolerance) -> Result<bool> {
    let a_basis = pair.a.basis();
    let mut family = a_basis.clone();
    for b in pair.b.basis() {
        for x in &a_basis {
            let c = b.commutator(x)?;
            if c.max_abs() > 0.0 {
                family.push(c);
            }
        }
    }
    Ok(span_dimension(&family, tol)? == pair.b.dim())
}

/// A linear space of normalizers, given by a spanning family.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    basis: Vec<ComplexMatrix>,
}

impl Slice {
    pub fn new(basis: Vec<ComplexMatrix>, a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<Self> {
        for (i, m) in basis.iter().enumerate() {
            if !is_normalizer(m, a, tol)? {
                return Err(Error::ContractViolation(format!("slice element {i} is not a normalizer of A")));
            }
        }
        Ok(Self { basis })
    }

    /// `A·u = {a·u : a ∈ A}` for a normalizing unitary `u`.
    pub fn from_unitary(u: &ComplexMatrix, a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<Self> {
        let basis = a.basis().iter().map(|x| x.try_mul(u)).collect::<Result<Vec<_>>>()?;
        Self::new(basis, a, tol)
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn dim(&self, tol: Tolerance) -> Result<usize> {
        span_dimension(&self.basis, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceReport {
    pub bimodule: bool,
    pub hilbert: bool,
    pub left_inner_span: usize,
    pub right_inner_span: usize,
    pub inner_products_in_a: bool,
    pub dim_a: usize,
}

/// `AM ⊂ M ⊃ MA`, and `M*M = A = MM*` with both products inside `A`.
pub fn slice_check(m: &Slice, a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<SliceReport> {
    let a_basis = a.basis();
    let dim_a = a.dim();
    if m.basis.is_empty() {
        return Ok(SliceReport {
            bimodule: true,
            hilbert: dim_a == 0,
            left_inner_span: 0,
            right_inner_span: 0,
            inner_products_in_a: true,
            dim_a,
        });
    }
    let span = SpanBasis::new(&m.basis, tol)?;
    let mut bimodule = true;
    'outer: for x in &a_basis {
        for v in &m.basis {
            if !span.contains(&x.try_mul(v)?)? || !span.contains(&v.try_mul(x)?)? {
                bimodule = false;
                break 'outer;
            }
        }
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut inside = true;
    for v in &m.basis {
        for w in &m.basis {
            let l = &v.adjoint() * w;
            let r = v * &w.adjoint();
            inside &= a.contains(&l, tol)? && a.contains(&r, tol)?;
            left.push(l);
            right.push(r);
        }
    }
    let left_inner_span = span_dimension(&left, tol)?;
    let right_inner_span = span_dimension(&right, tol)?;
    Ok(SliceReport {
        bimodule,
        hilbert: inside && left_inner_span == dim_a && right_inner_span == dim_a,
        left_inner_span,
        right_inner_span,
        inner_products_in_a: inside,
        dim_a,
    })
}

/// Block support `{(x,y) : ‖p_x b p_y‖ > eps}` over the summands of `A`;
/// fails unless it is a partial bijection.
pub fn normalizer_support(b: &ComplexMatrix, a: &FiniteCStarAlgebra, tol: Tolerance) -> Result<BTreeSet<Arrow>> {
    check_ambient(b, a)?;
    let mut support = BTreeSet::new();
    for x in 0..a.block_count() {
        let rx = a.block_range(x);
        for y in 0..a.block_count() {
            let ry = a.block_range(y);
            let block = b.block(rx.start, ry.start, rx.len(), ry.len());
            if !tol.accepts(block.frobenius_norm()) {
                support.insert(Arrow::new(x, y));
            }
        }
    }
    let ranges: BTreeSet<usize> = support.iter().map(|g| g.range).collect();
    let sources: BTreeSet<usize> = support.iter().map(|g| g.source).collect();
    if ranges.len() != support.len() || sources.len() != support.len() {
        let listed: Vec<String> = support.iter().map(|g| g.to_string()).collect();
        return Err(Error::SupportViolation(listed.join(" ")));
    }
    Ok(support)
}
