//! Spatial automorphisms of a finite C*-bundle, unitary assignments over the
//! pair groupoid, covariance groups generated by one bisection, 2-cocycles and
//! the dynamical checks built on them.
//!
//! A spatial automorphism over the permutation `f₀` is the block matrix `U`
//! whose block `(x, f₀(x))` is the fibre unitary `w_x` and whose other blocks
//! vanish. With the bisection product `g·h = (x ↦ h(g(x)))` this gives
//! `U_g U_h = U_{g·h}`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::algebra::FiniteCStarAlgebra;
use crate::error::{Error, Result};
use crate::fellbundle::{FellBundleModel, Twist};
use crate::groupoid::{compose, Arrow, Bisection, CyclicFlow, PairGroupoid};
use crate::linalg::{ComplexMatrix, SpanBasis, Tolerance, C64};
use crate::random;
use crate::subalgebra::{is_normalizer, normalizer_residual, normalizer_support, Slice};

fn offsets(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, &n| {
            let at = *acc;
            *acc += n;
            Some(at)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAutomorphism {
    f0: Bisection,
    fibre_maps: Vec<ComplexMatrix>,
    fibre_dims: Vec<usize>,
    u: ComplexMatrix,
}

/// Assembles `U` from a base permutation and one unitary per point.
pub fn make_spatial_automorphism(
    f0: Bisection,
    fibre_maps: Vec<ComplexMatrix>,
    fibre_dims: &[usize],
    tol: Tolerance,
) -> Result<SpatialAutomorphism> {
    let n = fibre_dims.len();
    if f0.points() != n || fibre_maps.len() != n {
        return Err(Error::Covariance(format!(
            "{} points, permutation on {}, {} fibre maps",
            n,
            f0.points(),
            fibre_maps.len()
        )));
    }
    for x in 0..n {
        let y = f0.apply(x);
        if fibre_dims[x] != fibre_dims[y] {
            return Err(Error::Covariance(format!(
                "point {} has fibre dimension {} but its image {} has {}",
                x + 1,
                fibre_dims[x],
                y + 1,
                fibre_dims[y]
            )));
        }
        let w = &fibre_maps[x];
        if w.shape() != (fibre_dims[x], fibre_dims[x]) {
            return Err(Error::Covariance(format!(
                "fibre map at {} has shape {:?}, expected {}x{}",
                x + 1,
                w.shape(),
                fibre_dims[x],
                fibre_dims[x]
            )));
        }
        if !w.is_unitary(tol) {
            return Err(Error::NotUnitary(format!("fibre map at point {}", x + 1)));
        }
    }
    let off = offsets(fibre_dims);
    let total: usize = fibre_dims.iter().sum();
    let mut u = ComplexMatrix::zeros(total, total);
    for (x, w) in fibre_maps.iter().enumerate() {
        u.set_block(off[x], off[f0.apply(x)], w);
    }
    Ok(SpatialAutomorphism { f0, fibre_maps, fibre_dims: fibre_dims.to_vec(), u })
}

impl SpatialAutomorphism {
    pub fn identity(fibre_dims: &[usize]) -> Self {
        let maps = fibre_dims.iter().map(|&n| ComplexMatrix::identity(n)).collect();
        make_spatial_automorphism(Bisection::identity(fibre_dims.len()), maps, fibre_dims, Tolerance::default())
            .expect("identity data is valid")
    }

    /// Recovers `(f₀, w)` from a unitary supported on the graph of a
    /// permutation.
    pub fn from_matrix(u: &ComplexMatrix, fibre_dims: &[usize], tol: Tolerance) -> Result<Self> {
        let a = FiniteCStarAlgebra::new(fibre_dims.to_vec())?;
        let support = normalizer_support(u, &a, tol)?;
        if support.len() != fibre_dims.len() {
            return Err(Error::Covariance(format!(
                "support has {} blocks, a permutation of {} points needs all rows",
                support.len(),
                fibre_dims.len()
            )));
        }
        let mut perm = vec![0; fibre_dims.len()];
        for g in &support {
            perm[g.range] = g.source;
        }
        let off = offsets(fibre_dims);
        let maps =
            (0..fibre_dims.len()).map(|x| u.block(off[x], off[perm[x]], fibre_dims[x], fibre_dims[perm[x]])).collect();
        make_spatial_automorphism(Bisection::new(perm)?, maps, fibre_dims, tol)
    }

    pub fn base(&self) -> &Bisection {
        &self.f0
    }

    pub fn fibre_maps(&self) -> &[ComplexMatrix] {
        &self.fibre_maps
    }

    pub fn fibre_dims(&self) -> &[usize] {
        &self.fibre_dims
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn inverse(&self) -> Self {
        let inv = self.f0.inverse();
        let maps: Vec<ComplexMatrix> =
            (0..self.fibre_dims.len()).map(|y| self.fibre_maps[inv.apply(y)].adjoint()).collect();
        Self { f0: inv, fibre_maps: maps, fibre_dims: self.fibre_dims.clone(), u: self.u.adjoint() }
    }

    /// `a ↦ U a U*`.
    pub fn conjugate(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.u.try_mul(a)?.try_mul(&self.u.adjoint())
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::identity(&self.fibre_dims), |acc, _| compose_automorphisms(&acc, self))
    }

    /// Block support of `U` as a set of arrows.
    pub fn support(&self) -> BTreeSet<Arrow> {
        self.f0.graph()
    }
}

/// `U = s.U · t.U` over the base `s.f₀ · t.f₀`.
pub fn compose_automorphisms(s: &SpatialAutomorphism, t: &SpatialAutomorphism) -> SpatialAutomorphism {
    let f0 = s.f0.then(&t.f0);
    let maps: Vec<ComplexMatrix> =
        (0..s.fibre_dims.len()).map(|x| &s.fibre_maps[x] * &t.fibre_maps[s.f0.apply(x)]).collect();
    SpatialAutomorphism { f0, fibre_maps: maps, fibre_dims: s.fibre_dims.clone(), u: &s.u * &t.u }
}

/// Random permutation preserving fibre dimensions.
pub fn random_bisection<R: Rng + ?Sized>(rng: &mut R, fibre_dims: &[usize]) -> Bisection {
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (x, &n) in fibre_dims.iter().enumerate() {
        classes.entry(n).or_default().push(x);
    }
    let mut perm = vec![0; fibre_dims.len()];
    for points in classes.values() {
        let mut images = points.clone();
        images.shuffle(rng);
        for (&x, &y) in points.iter().zip(&images) {
            perm[x] = y;
        }
    }
    Bisection::new(perm).expect("shuffle is a permutation")
}

pub fn random_spatial_automorphism<R: Rng + ?Sized>(rng: &mut R, fibre_dims: &[usize]) -> SpatialAutomorphism {
    let f0 = random_bisection(rng, fibre_dims);
    let maps = fibre_dims.iter().map(|&n| random::unitary(rng, n)).collect();
    make_spatial_automorphism(f0, maps, fibre_dims, Tolerance::default()).expect("sampled data is valid")
}

// ---------------------------------------------------------------------------
// Assignments and cocycles

/// `(x,y) ↦ u_{(x,y)}`, one unitary per arrow.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryAssignment {
    points: usize,
    map: BTreeMap<Arrow, ComplexMatrix>,
}

impl UnitaryAssignment {
    pub fn new(points: usize, map: BTreeMap<Arrow, ComplexMatrix>, tol: Tolerance) -> Result<Self> {
        let base = PairGroupoid::new(points)?;
        for (g, u) in &map {
            if !base.contains(*g) {
                return Err(Error::shape(format!("arrow {g} outside {points} points")));
            }
            if !u.is_unitary(tol) {
                return Err(Error::NotUnitary(format!("assignment value at {g}")));
            }
        }
        Ok(Self { points, map })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn get(&self, g: Arrow) -> Option<&ComplexMatrix> {
        self.map.get(&g)
    }

    pub fn map(&self) -> &BTreeMap<Arrow, ComplexMatrix> {
        &self.map
    }

    pub fn into_map(self) -> BTreeMap<Arrow, ComplexMatrix> {
        self.map
    }

    pub fn is_complete(&self) -> bool {
        self.map.len() == self.points * self.points
    }
}

/// 2-cocycle values on composable pairs. When extracted from an assignment
/// the assignment is kept to twist the cocycle identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle2 {
    points: usize,
    values: BTreeMap<(Arrow, Arrow), ComplexMatrix>,
    conjugators: Option<BTreeMap<Arrow, ComplexMatrix>>,
}

impl Cocycle2 {
    /// Cocycle from explicit values; missing pairs count as the identity.
    pub fn new(points: usize, values: BTreeMap<(Arrow, Arrow), ComplexMatrix>, tol: Tolerance) -> Result<Self> {
        for ((g, h), w) in &values {
            compose(*g, *h)?;
            if !is_diagonal_unitary(w, tol) {
                return Err(Error::NotATwist(format!("value at ({g},{h})")));
            }
        }
        Ok(Self { points, values, conjugators: None })
    }

    pub fn trivial(points: usize) -> Self {
        Self { points, values: BTreeMap::new(), conjugators: None }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn value(&self, g: Arrow, h: Arrow) -> Option<&ComplexMatrix> {
        self.values.get(&(g, h))
    }

    pub fn values(&self) -> &BTreeMap<(Arrow, Arrow), ComplexMatrix> {
        &self.values
    }

    pub fn conjugators(&self) -> Option<&BTreeMap<Arrow, ComplexMatrix>> {
        self.conjugators.as_ref()
    }

    /// Replaces one value without checks; used to build negative controls.
    pub fn with_value(mut self, g: Arrow, h: Arrow, w: ComplexMatrix) -> Self {
        self.values.insert((g, h), w);
        self
    }

    /// `ω ≡ 1`: the assignment it came from is a homomorphism.
    pub fn is_trivial(&self, tol: Tolerance) -> bool {
        self.values.values().all(|w| tol.accepts(w.distance(&ComplexMatrix::identity(w.rows()))))
    }

    /// Values as a bundle twist.
    pub fn to_twist(&self) -> Twist {
        self.values.clone()
    }

    /// Largest distance of a value from the identity.
    pub fn max_deviation(&self) -> f64 {
        self.values.values().map(|w| w.distance(&ComplexMatrix::identity(w.rows()))).fold(0.0, f64::max)
    }
}

fn is_diagonal_unitary(w: &ComplexMatrix, tol: Tolerance) -> bool {
    let n = w.rows();
    w.is_square()
        && (0..n).all(|i| (0..n).all(|j| i == j || tol.accepts(w[(i, j)].norm())))
        && (0..n).all(|i| tol.accepts((w[(i, i)].norm() - 1.0).abs()))
}

/// `ω(g,h) = u_g u_h u_{gh}*` on every composable pair.
///
/// Units need not map to the identity; the values only have to be diagonal
/// unitaries.
pub fn extract_cocycle(assignment: &UnitaryAssignment, tol: Tolerance) -> Result<Cocycle2> {
    if !assignment.is_complete() {
        let missing: Vec<Arrow> =
            PairGroupoid::new(assignment.points)?.arrows().filter(|g| !assignment.map.contains_key(g)).collect();
        return Err(Error::IncompleteSupport { missing });
    }
    let base = PairGroupoid::new(assignment.points)?;
    let mut values = BTreeMap::new();
    for (g, h) in base.composable_pairs() {
        let gh = compose(g, h)?;
        let w = assignment.map[&g].try_mul(&assignment.map[&h])?.try_mul(&assignment.map[&gh].adjoint())?;
        if !is_diagonal_unitary(&w, tol) {
            return Err(Error::NotATwist(format!("u_{g} u_{h} u_{gh}* is not a diagonal unitary")));
        }
        values.insert((g, h), w);
    }
    Ok(Cocycle2 { points: assignment.points, values, conjugators: Some(assignment.map.clone()) })
}

/// Largest residual of `ω(g,h)ω(gh,k) = u_g ω(h,k) u_g* ω(g,hk)` over all
/// composable triples (no conjugation without a stored assignment).
pub fn cocycle_identity_residual(w: &Cocycle2) -> Result<f64> {
    let base = PairGroupoid::new(w.points)?;
    let dim = w
        .values
        .values()
        .next()
        .map(|m| m.rows())
        .or_else(|| w.conjugators.as_ref().and_then(|c| c.values().next()).map(|m| m.rows()))
        .unwrap_or(1);
    let id = ComplexMatrix::identity(dim);
    let val = |g: Arrow, h: Arrow| w.values.get(&(g, h)).unwrap_or(&id);
    let mut worst: f64 = 0.0;
    for (g, h, k) in base.composable_triples() {
        let gh = compose(g, h)?;
        let hk = compose(h, k)?;
        let lhs = val(g, h).try_mul(val(gh, k))?;
        let inner = match &w.conjugators {
            Some(u) => u[&g].try_mul(val(h, k))?.try_mul(&u[&g].adjoint())?,
            None => val(h, k).clone(),
        };
        let rhs = inner.try_mul(val(g, hk))?;
        worst = worst.max(lhs.distance(&rhs));
    }
    Ok(worst)
}

pub fn cocycle_identity_check(w: &Cocycle2, tol: Tolerance) -> Result<bool> {
    Ok(tol.accepts(cocycle_identity_residual(w)?))
}

// ---------------------------------------------------------------------------
// Covariance groups

/// Prescribed holonomy `σ^L` around each cycle of the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Holonomy {
    /// Fibre maps are independent Haar unitaries.
    Free,
    /// The last map on each cycle closes it to the identity.
    Trivial,
    /// The last map on each cycle closes it to `λ·I`.
    Scalar(C64),
}

/// The cyclic group generated by one spatial automorphism `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGroup {
    flow: CyclicFlow,
    sigma: SpatialAutomorphism,
}

impl CovarianceGroup {
    pub fn new(sigma: SpatialAutomorphism) -> Self {
        Self { flow: CyclicFlow::new(sigma.f0.clone()), sigma }
    }

    /// Generator over `g` with the given fibre maps, indexed by point.
    pub fn from_fibre_maps(
        g: Bisection,
        fibre_maps: Vec<ComplexMatrix>,
        fibre_dims: &[usize],
        tol: Tolerance,
    ) -> Result<Self> {
        Ok(Self::new(make_spatial_automorphism(g, fibre_maps, fibre_dims, tol)?))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, g: Bisection, dim: usize, holonomy: Holonomy) -> Self {
        let n = g.points();
        let mut maps: Vec<ComplexMatrix> = (0..n).map(|_| random::unitary(rng, dim)).collect();
        let target = match holonomy {
            Holonomy::Free => None,
            Holonomy::Trivial => Some(ComplexMatrix::identity(dim)),
            Holonomy::Scalar(z) => Some(ComplexMatrix::identity(dim).scale(z)),
        };
        if let Some(t) = target {
            let mut seen = vec![false; n];
            for start in 0..n {
                if seen[start] {
                    continue;
                }
                let mut cycle = vec![start];
                seen[start] = true;
                let mut x = g.apply(start);
                while x != start {
                    seen[x] = true;
                    cycle.push(x);
                    x = g.apply(x);
                }
                let last = *cycle.last().expect("non-empty cycle");
                let partial =
                    cycle[..cycle.len() - 1].iter().fold(ComplexMatrix::identity(dim), |acc, &y| &acc * &maps[y]);
                maps[last] = &partial.adjoint() * &t;
            }
        }
        Self::from_fibre_maps(g, maps, &vec![dim; n], Tolerance::default()).expect("sampled data is valid")
    }

    pub fn flow(&self) -> &CyclicFlow {
        &self.flow
    }

    pub fn generator(&self) -> &Bisection {
        self.flow.generator()
    }

    pub fn sigma(&self) -> &SpatialAutomorphism {
        &self.sigma
    }

    pub fn order(&self) -> usize {
        self.flow.order()
    }

    pub fn fibre_dims(&self) -> &[usize] {
        self.sigma.fibre_dims()
    }

    /// `σ, σ², …, σ^{order}`.
    pub fn powers(&self) -> Vec<SpatialAutomorphism> {
        let mut out = Vec::with_capacity(self.order());
        let mut acc = self.sigma.clone();
        for _ in 0..self.order() {
            out.push(acc.clone());
            acc = compose_automorphisms(&acc, &self.sigma);
        }
        out
    }

    /// `σ^{order}` at point `x`: the parallel transport around the cycle.
    pub fn holonomy(&self, x: usize) -> ComplexMatrix {
        let top = self.sigma.pow(self.order());
        top.fibre_maps[x].clone()
    }

    /// `(x,y) ↦ p_x σ^m p_y` with `m ∈ 1..=order` the step taking `x` to `y`.
    /// Arrows outside the orbit are left out.
    pub fn power_assignment(&self) -> UnitaryAssignment {
        let mut map = BTreeMap::new();
        for s in self.powers() {
            for (x, w) in s.fibre_maps.iter().enumerate() {
                map.entry(Arrow::new(x, s.f0.apply(x))).or_insert_with(|| w.clone());
            }
        }
        UnitaryAssignment { points: self.sigma.fibre_dims.len(), map }
    }
}

// ---------------------------------------------------------------------------
// Unitary normalizers

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitaryNormalizerReport {
    pub spatial_tested: usize,
    pub spatial_unitary_normalizers: usize,
    pub spatial_max_residual: f64,
    pub candidates_tested: usize,
    pub candidates_normalizing: usize,
    pub normalizing_on_bisections: usize,
    pub mixed_tested: usize,
    pub mixed_rejected: usize,
    pub mixed_min_residual: f64,
}

impl UnitaryNormalizerReport {
    pub fn passed(&self) -> bool {
        self.spatial_unitary_normalizers == self.spatial_tested
            && self.normalizing_on_bisections == self.candidates_normalizing
            && self.mixed_rejected == self.mixed_tested
    }
}

/// Block-diagonal unitary whose two fibres `x ≠ y` are mixed by one Haar
/// unitary on `ℂ^{n_x} ⊕ ℂ^{n_y}`.
pub fn mixing_unitary<R: Rng + ?Sized>(rng: &mut R, fibre_dims: &[usize], x: usize, y: usize) -> ComplexMatrix {
    let off = offsets(fibre_dims);
    let total: usize = fibre_dims.iter().sum();
    let mut u = ComplexMatrix::zeros(total, total);
    for (z, &n) in fibre_dims.iter().enumerate() {
        if z != x && z != y {
            u.set_block(off[z], off[z], &random::unitary(rng, n));
        }
    }
    let (nx, ny) = (fibre_dims[x], fibre_dims[y]);
    let v = random::unitary(rng, nx + ny);
    u.set_block(off[x], off[x], &v.block(0, 0, nx, nx));
    u.set_block(off[x], off[y], &v.block(0, nx, nx, ny));
    u.set_block(off[y], off[x], &v.block(nx, 0, ny, nx));
    u.set_block(off[y], off[y], &v.block(nx, nx, ny, ny));
    u
}

/// Samples both inclusions between spatial automorphisms and unitary
/// normalizers of `A` in `B`.
///
/// Forward: random spatial automorphisms are unitary normalizers. Backward:
/// of random unitaries (half of them spatial automorphisms twisted by a
/// block-diagonal unitary, half Haar), those that normalize are supported
/// on a bisection. Unitaries mixing two fibres must all be rejected.
pub fn check_unitary_normalizer_theorem<R: Rng + ?Sized>(
    e: &FellBundleModel,
    samples: usize,
    tol: Tolerance,
    rng: &mut R,
) -> Result<UnitaryNormalizerReport> {
    let dims = e.fibre_dims().to_vec();
    let a = e.diagonal_algebra();
    let total: usize = dims.iter().sum();

    let mut spatial_ok = 0;
    let mut spatial_max: f64 = 0.0;
    for _ in 0..samples {
        let s = random_spatial_automorphism(rng, &dims);
        let r = normalizer_residual(s.matrix(), &a)?;
        spatial_max = spatial_max.max(r);
        if s.matrix().is_unitary(tol) && tol.accepts(r) {
            spatial_ok += 1;
        }
    }

    let mut normalizing = 0;
    let mut on_bisections = 0;
    for i in 0..samples {
        let candidate = if i % 2 == 0 {
            let s = random_spatial_automorphism(rng, &dims);
            let d = random_spatial_automorphism(rng, &dims);
            let diag = make_spatial_automorphism(Bisection::identity(dims.len()), d.fibre_maps().to_vec(), &dims, tol)?;
            diag.matrix() * s.matrix()
        } else {
            random::unitary(rng, total)
        };
        if is_normalizer(&candidate, &a, tol)? {
            normalizing += 1;
            if SpatialAutomorphism::from_matrix(&candidate, &dims, tol).is_ok() {
                on_bisections += 1;
            }
        }
    }

    let mut mixed_rejected = 0;
    let mut mixed_min = f64::INFINITY;
    let mixed_tested = if dims.len() >= 2 { samples } else { 0 };
    for _ in 0..mixed_tested {
        let x = rng.random_range(0..dims.len());
        let y = (x + rng.random_range(1..dims.len())) % dims.len();
        let u = mixing_unitary(rng, &dims, x, y);
        let r = normalizer_residual(&u, &a)?;
        mixed_min = mixed_min.min(r);
        if !tol.accepts(r) {
            mixed_rejected += 1;
        }
    }

    Ok(UnitaryNormalizerReport {
        spatial_tested: samples,
        spatial_unitary_normalizers: spatial_ok,
        spatial_max_residual: spatial_max,
        candidates_tested: samples,
        candidates_normalizing: normalizing,
        normalizing_on_bisections: on_bisections,
        mixed_tested,
        mixed_rejected,
        mixed_min_residual: if mixed_tested == 0 { 0.0 } else { mixed_min },
    })
}

// ---------------------------------------------------------------------------
// Generation, slices, partial isometries

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub minimal_flow: bool,
    pub span_dimension: usize,
    pub dim_b: usize,
    pub rounds: usize,
    pub generated: bool,
}

/// Grows `span{a₀ σ^{t₁} a₁ ⋯ σ^{t_k} a_k}` from a basis of `A`, one factor
/// `σ^t a` per round, for at most `|X|` rounds or until the span stops
/// growing, and compares with `dim B`.
pub fn a_dynamical_generation_check(
    gs: &CovarianceGroup,
    a: &FiniteCStarAlgebra,
    b: &FiniteCStarAlgebra,
    tol: Tolerance,
) -> Result<GenerationReport> {
    let sigma = gs.sigma().matrix();
    if sigma.rows() != a.ambient_dim() || b.ambient_dim() != a.ambient_dim() {
        return Err(Error::shape("covariance group and algebras act on different spaces"));
    }
    let a_basis = a.basis();
    let steps: Vec<ComplexMatrix> = gs.powers().iter().map(|s| s.matrix().clone()).collect();

    let mut kept: Vec<ComplexMatrix> = Vec::new();
    let mut span: Option<SpanBasis> = None;
    let admit = |m: ComplexMatrix, kept: &mut Vec<ComplexMatrix>, span: &mut Option<SpanBasis>| -> Result<bool> {
        if m.max_abs() == 0.0 {
            return Ok(false);
        }
        if let Some(s) = span.as_ref() {
            if s.contains(&m)? {
                return Ok(false);
            }
        }
        kept.push(m);
        *span = Some(SpanBasis::new(kept, tol)?);
        Ok(true)
    };
    for x in &a_basis {
        admit(x.clone(), &mut kept, &mut span)?;
    }
    let mut frontier = kept.clone();
    let mut rounds = 0;
    while rounds < a.ambient_dim().max(gs.fibre_dims().len()) && !frontier.is_empty() {
        rounds += 1;
        let mut next = Vec::new();
        for f in &frontier {
            for s in &steps {
                let fs = f * s;
                for x in &a_basis {
                    let m = &fs * x;
                    if admit(m.clone(), &mut kept, &mut span)? {
                        next.push(m);
                    }
                }
            }
        }
        frontier = next;
    }
    let span_dimension = kept.len();
    Ok(GenerationReport {
        minimal_flow: gs.generator().is_minimal_flow(),
        span_dimension,
        dim_b: b.dim(),
        rounds,
        generated: span_dimension == b.dim(),
    })
}

/// `M = span{a·U : a ∈ A}` for a self-adjoint base permutation.
pub fn slice_from_bisection(a: &FiniteCStarAlgebra, u: &SpatialAutomorphism, tol: Tolerance) -> Result<Slice> {
    if !u.base().is_self_adjoint() {
        return Err(Error::NotSelfAdjoint(format!("base permutation {} has order {}", u.base(), u.base().order())));
    }
    Slice::from_unitary(u.matrix(), a, tol)
}

/// `span{[U, a]} ⊆ M + A` for the slice `M` of `U`.
pub fn commutators_in_slice(a: &FiniteCStarAlgebra, u: &SpatialAutomorphism, tol: Tolerance) -> Result<bool> {
    let m = slice_from_bisection(a, u, tol)?;
    let mut family = m.basis().to_vec();
    family.extend(a.basis());
    let span = SpanBasis::new(&family, tol)?;
    for x in a.basis() {
        if !span.contains(&u.matrix().commutator(&x)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialIsometryReport {
    pub partial_isometry: bool,
    pub residual: f64,
    pub endomorphism: bool,
    pub invertible: bool,
}

/// Whether `a ↦ VaV*` is an endomorphism of `A` implemented by a partial
/// isometry, and whether it is implemented by a unitary.
pub fn partial_isometry_endomorphism_check(
    v: &ComplexMatrix,
    a: &FiniteCStarAlgebra,
    tol: Tolerance,
) -> Result<PartialIsometryReport> {
    let n = a.ambient_dim();
    if v.shape() != (n, n) {
        return Err(Error::shape(format!("expected a {n}x{n} matrix, got {:?}", v.shape())));
    }
    let residual = v.partial_isometry_residual();
    let vs = v.adjoint();
    let mut endomorphism = true;
    for x in a.basis() {
        if !a.contains(&(&(v * &x) * &vs), tol)? {
            endomorphism = false;
            break;
        }
    }
    Ok(PartialIsometryReport {
        partial_isometry: tol.accepts(residual),
        residual,
        endomorphism,
        invertible: v.is_unitary(tol),
    })
}
