//! Fell bundles over finite pair groupoids, realised as block decompositions of
//! a matrix algebra.
//!
//! For fibre dimensions `(n_x)` the enveloping algebra is `B = M_N` with
//! `N = Σ n_x`, and the fibre over the arrow `(x,y)` is the block `p_x B p_y`,
//! stored as an `n_x × n_y` matrix. The diagonal algebra `A = ⊕ M_{n_x}` is the
//! block-diagonal part and the canonical expectation `P(b) = Σ p_x b p_x`
//! restricts `B` to `A`.
//!
//! Two kinds of extra data change the bundle operations:
//!
//! * a **frame** `u: (x,y) ↦ u_{(x,y)}` of unitaries identifies the coefficient
//!   algebra with each fibre through `a ↦ a·u_g` (the semidirect picture,
//!   `α_g(a) = u_g a u_g*`). The involution written in frame coordinates,
//!   `(g,a)* = (g*, α_{g*}(a*))`, becomes `e ↦ u_{g*} u_g e*` on stored
//!   matrices. It agrees with the adjoint exactly when `u_{g*} = u_g*`.
//! * a **twist** `τ(g,h)` multiplies the plain matrix product,
//!   `e₁·e₂ = τ(g,h) e₁ e₂`. Values are diagonal unitaries (scalars for line
//!   bundles).

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::algebra::{BlockProjection, FiniteCStarAlgebra};
use crate::error::{Error, Result};
use crate::groupoid::{compose, Arrow, PairGroupoid};
use crate::linalg::{span_dimension, ComplexMatrix, SpanBasis, Tolerance, C64, ONE};
use crate::random;

pub type Frame = BTreeMap<Arrow, ComplexMatrix>;
pub type Twist = BTreeMap<(Arrow, Arrow), ComplexMatrix>;

/// A C*-bundle over a finite discrete space: one matrix algebra per point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CStarBundle {
    fibre_dims: Vec<usize>,
}

impl CStarBundle {
    pub fn new(fibre_dims: Vec<usize>) -> Result<Self> {
        if fibre_dims.is_empty() || fibre_dims.contains(&0) {
            return Err(Error::InvalidDescriptor(format!(
                "fibre dimensions must be a non-empty list of positive integers, got {fibre_dims:?}"
            )));
        }
        Ok(Self { fibre_dims })
    }

    pub fn constant(points: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; points])
    }

    pub fn points(&self) -> usize {
        self.fibre_dims.len()
    }

    pub fn fibre_dims(&self) -> &[usize] {
        &self.fibre_dims
    }

    /// The common fibre dimension, if the bundle is locally trivial.
    pub fn constant_dim(&self) -> Option<usize> {
        let d = self.fibre_dims[0];
        self.fibre_dims.iter().all(|&n| n == d).then_some(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FellBundleModel {
    base: PairGroupoid,
    fibre_dims: Vec<usize>,
    frame: Option<Frame>,
    twist: Option<Twist>,
    subspaces: BTreeMap<Arrow, Vec<ComplexMatrix>>,
}

/// Imprimitivity bundle: `E_{(x,y)}` is the full `n_x × n_y` bimodule,
/// multiplication is the matrix product and the involution the adjoint.
pub fn build_imprimitivity_bundle(dims: &[usize]) -> Result<FellBundleModel> {
    let e0 = CStarBundle::new(dims.to_vec())?;
    Ok(FellBundleModel {
        base: PairGroupoid::new(e0.points())?,
        fibre_dims: e0.fibre_dims,
        frame: None,
        twist: None,
        subspaces: BTreeMap::new(),
    })
}

/// Semidirect-product bundle over a locally trivial C*-bundle.
///
/// Every arrow needs a unitary frame element. Twist pairs that are absent
/// count as the identity; present values must be diagonal unitaries and
/// satisfy `τ(g,h)·conj(τ(h*,g*)) = 1`, which the involution axiom forces.
pub fn build_semidirect_bundle(
    e0: &CStarBundle,
    frame: Frame,
    twist: Option<Twist>,
    tol: Tolerance,
) -> Result<FellBundleModel> {
    let n = e0
        .constant_dim()
        .ok_or_else(|| Error::LocalTriviality(format!("fibre dimensions {:?} are not constant", e0.fibre_dims())))?;
    let base = PairGroupoid::new(e0.points())?;
    for g in base.arrows() {
        let u = frame.get(&g).ok_or_else(|| Error::Frame(format!("no frame element for arrow {g}")))?;
        if u.shape() != (n, n) {
            return Err(Error::Frame(format!("frame element at {g} has shape {:?}, expected {n}x{n}", u.shape())));
        }
        if !u.is_unitary(tol) {
            return Err(Error::Frame(format!("frame element at {g} is not unitary")));
        }
    }
    if let Some(frame_extra) = frame.keys().find(|g| !base.contains(**g)) {
        return Err(Error::Frame(format!("frame names arrow {frame_extra} outside the base")));
    }
    if let Some(tw) = &twist {
        validate_twist(&base, n, tw, tol)?;
    }
    Ok(FellBundleModel {
        base,
        fibre_dims: e0.fibre_dims.clone(),
        frame: Some(frame),
        twist,
        subspaces: BTreeMap::new(),
    })
}

fn validate_twist(base: &PairGroupoid, n: usize, tw: &Twist, tol: Tolerance) -> Result<()> {
    let id = ComplexMatrix::identity(n);
    for (&(g, h), w) in tw {
        if !base.contains(g) || !base.contains(h) || compose(g, h).is_err() {
            return Err(Error::Twist(format!("pair ({g},{h}) is not composable in the base")));
        }
        if w.shape() != (n, n) {
            return Err(Error::Twist(format!("value at ({g},{h}) has shape {:?}, expected {n}x{n}", w.shape())));
        }
        let off_diagonal = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)].norm())
            .fold(0.0, f64::max);
        if !tol.accepts(off_diagonal) || !w.is_unitary(tol) {
            return Err(Error::Twist(format!("value at ({g},{h}) is not a diagonal unitary")));
        }
        let partner = tw.get(&(h.inverse(), g.inverse())).unwrap_or(&id);
        let product = w * &partner.adjoint();
        if !tol.accepts(product.distance(&id)) {
            return Err(Error::Twist(format!(
                "value at ({g},{h}) is incompatible with the involution: \
                 τ(g,h)·conj(τ(h*,g*)) ≠ 1"
            )));
        }
    }
    Ok(())
}

/// Frame with every element the identity.
pub fn identity_frame(points: usize, dim: usize) -> Frame {
    PairGroupoid::new(points)
        .expect("positive point count")
        .arrows()
        .map(|g| (g, ComplexMatrix::identity(dim)))
        .collect()
}

/// Random frame with `u_{(x,x)} = I` and `u_{(y,x)} = u_{(x,y)}*`.
pub fn random_star_frame<R: Rng + ?Sized>(rng: &mut R, points: usize, dim: usize) -> Frame {
    let mut frame = Frame::new();
    for x in 0..points {
        frame.insert(Arrow::unit(x), ComplexMatrix::identity(dim));
        for y in x + 1..points {
            let u = random::unitary(rng, dim);
            frame.insert(Arrow::new(y, x), u.adjoint());
            frame.insert(Arrow::new(x, y), u);
        }
    }
    frame
}

impl FellBundleModel {
    pub fn base(&self) -> &PairGroupoid {
        &self.base
    }

    pub fn points(&self) -> usize {
        self.base.points()
    }

    pub fn fibre_dims(&self) -> &[usize] {
        &self.fibre_dims
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.frame.as_ref()
    }

    pub fn twist(&self) -> Option<&Twist> {
        self.twist.as_ref()
    }

    pub fn constant_dim(&self) -> Option<usize> {
        let d = self.fibre_dims[0];
        self.fibre_dims.iter().all(|&n| n == d).then_some(d)
    }

    pub fn fibre_shape(&self, g: Arrow) -> (usize, usize) {
        (self.fibre_dims[g.range], self.fibre_dims[g.source])
    }

    /// Replaces the fibre over `g` with the span of `basis` (a sub-bundle
    /// that is in general not closed under the operations). An empty basis
    /// is the zero fibre.
    pub fn with_fibre_subspace(mut self, g: Arrow, basis: Vec<ComplexMatrix>) -> Result<Self> {
        let shape = self.fibre_shape(g);
        if let Some(m) = basis.iter().find(|m| m.shape() != shape) {
            return Err(Error::shape(format!("fibre over {g} holds {shape:?} matrices, got {:?}", m.shape())));
        }
        self.subspaces.insert(g, basis);
        Ok(self)
    }

    pub fn with_zero_fibre(self, g: Arrow) -> Result<Self> {
        self.with_fibre_subspace(g, Vec::new())
    }

    /// Replaces the frame without validation; used to inject defects.
    pub fn with_frame_unchecked(mut self, frame: Frame) -> Self {
        self.frame = Some(frame);
        self
    }

    /// A linear basis of the fibre over `g`.
    pub fn fibre_basis(&self, g: Arrow) -> Vec<ComplexMatrix> {
        if let Some(b) = self.subspaces.get(&g) {
            return b.clone();
        }
        let (r, c) = self.fibre_shape(g);
        (0..r).flat_map(|i| (0..c).map(move |j| ComplexMatrix::unit(r, c, i, j))).collect()
    }

    pub fn fibre_dim(&self, g: Arrow) -> usize {
        match self.subspaces.get(&g) {
            Some(b) => span_dimension(b, Tolerance::default()).unwrap_or(0),
            None => {
                let (r, c) = self.fibre_shape(g);
                r * c
            }
        }
    }

    /// Distance of `e` from the fibre over `g` (infinite on a shape mismatch).
    pub fn fibre_residual(&self, g: Arrow, e: &ComplexMatrix) -> f64 {
        if e.shape() != self.fibre_shape(g) {
            return f64::INFINITY;
        }
        match self.subspaces.get(&g) {
            None => 0.0,
            Some(b) if b.is_empty() => e.frobenius_norm(),
            Some(b) => SpanBasis::new(b, Tolerance::default()).and_then(|s| s.residual(e)).unwrap_or(f64::INFINITY),
        }
    }

    fn check_element(&self, g: Arrow, e: &ComplexMatrix) -> Result<()> {
        if !self.base.contains(g) {
            return Err(Error::shape(format!("arrow {g} is not in the base")));
        }
        if e.shape() != self.fibre_shape(g) {
            return Err(Error::shape(format!(
                "element of the fibre over {g} must be {:?}, got {:?}",
                self.fibre_shape(g),
                e.shape()
            )));
        }
        Ok(())
    }

    /// Bundle multiplication `E_g × E_h → E_{gh}`.
    pub fn multiply(
        &self,
        g: Arrow,
        e1: &ComplexMatrix,
        h: Arrow,
        e2: &ComplexMatrix,
    ) -> Result<(Arrow, ComplexMatrix)> {
        let gh = compose(g, h)?;
        self.check_element(g, e1)?;
        self.check_element(h, e2)?;
        let mut p = e1 * e2;
        if let Some(w) = self.twist.as_ref().and_then(|t| t.get(&(g, h))) {
            p = w * &p;
        }
        Ok((gh, p))
    }

    /// Bundle involution `E_g → E_{g*}`.
    pub fn involution(&self, g: Arrow, e: &ComplexMatrix) -> Result<(Arrow, ComplexMatrix)> {
        self.check_element(g, e)?;
        let adj = e.adjoint();
        let out = match &self.frame {
            Some(f) => {
                let kappa = &f[&g.inverse()] * &f[&g];
                &kappa * &adj
            }
            None => adj,
        };
        Ok((g.inverse(), out))
    }

    /// The C*-norm of a fibre element.
    pub fn norm(&self, e: &ComplexMatrix) -> f64 {
        e.operator_norm()
    }

    /// Fibre element `a·u_g` for a coefficient `a ∈ E⁰_{r(g)}`; without a
    /// frame the coefficient is the element itself.
    pub fn section(&self, g: Arrow, coefficient: &ComplexMatrix) -> Result<ComplexMatrix> {
        match &self.frame {
            Some(f) => coefficient.try_mul(&f[&g]),
            None => {
                self.check_element(g, coefficient)?;
                Ok(coefficient.clone())
            }
        }
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, g: Arrow) -> ComplexMatrix {
        let (r, c) = self.fibre_shape(g);
        let basis = self.fibre_basis(g);
        random::combination(rng, &basis).unwrap_or_else(|| ComplexMatrix::zeros(r, c))
    }

    fn offsets(&self) -> Vec<usize> {
        self.fibre_dims
            .iter()
            .scan(0, |acc, &n| {
                let at = *acc;
                *acc += n;
                Some(at)
            })
            .collect()
    }

    /// Places a fibre element at its block of the enveloping algebra.
    pub fn embed(&self, g: Arrow, e: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_element(g, e)?;
        let n: usize = self.fibre_dims.iter().sum();
        let off = self.offsets();
        let mut out = ComplexMatrix::zeros(n, n);
        out.set_block(off[g.range], off[g.source], e);
        Ok(out)
    }

    /// The block `p_x b p_y` of an element of the enveloping algebra.
    pub fn fibre_component(&self, g: Arrow, b: &ComplexMatrix) -> ComplexMatrix {
        let off = self.offsets();
        let (r, c) = self.fibre_shape(g);
        b.block(off[g.range], off[g.source], r, c)
    }

    /// `B = C*(E)`: one full block over `H = ⊕ ℂ^{n_x}`.
    pub fn enveloping_algebra(&self) -> FiniteCStarAlgebra {
        FiniteCStarAlgebra::full(self.fibre_dims.iter().sum()).expect("positive dimension")
    }

    /// `A = C*(E⁰) = ⊕ M_{n_x}` inside `B`.
    pub fn diagonal_algebra(&self) -> FiniteCStarAlgebra {
        FiniteCStarAlgebra::new(self.fibre_dims.clone()).expect("validated dimensions")
    }

    pub fn restriction_expectation(&self) -> ConditionalExpectation {
        ConditionalExpectation::onto(self.diagonal_algebra())
    }

    /// Largest deviation of the frame from `u_{(x,x)} = I`, `u_{g*} = u_g*`.
    pub fn frame_defect(&self) -> f64 {
        let Some(f) = &self.frame else {
            return 0.0;
        };
        self.base
            .arrows()
            .map(|g| {
                if g.is_unit() {
                    f[&g].distance(&ComplexMatrix::identity(self.fibre_dims[g.range]))
                } else {
                    f[&g.inverse()].distance(&f[&g].adjoint())
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn enveloping_algebra(e: &FellBundleModel) -> FiniteCStarAlgebra {
    e.enveloping_algebra()
}

pub fn diagonal_algebra(e: &FellBundleModel) -> FiniteCStarAlgebra {
    e.diagonal_algebra()
}

pub fn restriction_expectation(e: &FellBundleModel) -> ConditionalExpectation {
    e.restriction_expectation()
}

// ---------------------------------------------------------------------------
// Axioms

pub const AXIOM_NAMES: [&str; 10] = [
    "base compatibility of products",
    "bilinearity",
    "associativity",
    "submultiplicativity of the norm",
    "base compatibility of the involution",
    "conjugate linearity of the involution",
    "involutivity",
    "anti-multiplicativity of the involution",
    "C*-identity",
    "positivity of e*e",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub axiom: usize,
    pub name: &'static str,
    pub passed: bool,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The check for axiom `k` (1-based).
    pub fn axiom(&self, k: usize) -> &AxiomCheck {
        &self.checks[k - 1]
    }

    pub fn failed(&self) -> Vec<usize> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.axiom).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max)
    }
}

struct Residuals([f64; 10]);

impl Residuals {
    fn record(&mut self, axiom: usize, r: f64) {
        let slot = &mut self.0[axiom - 1];
        // NaN counts as a failure.
        if r.is_nan() || r > *slot {
            *slot = if r.is_nan() { f64::INFINITY } else { r };
        }
    }

    fn into_report(self, samples: usize, tol: Tolerance) -> AxiomReport {
        AxiomReport {
            samples,
            checks: self
                .0
                .iter()
                .enumerate()
                .map(|(i, &r)| AxiomCheck {
                    axiom: i + 1,
                    name: AXIOM_NAMES[i],
                    passed: tol.accepts(r),
                    max_residual: r,
                })
                .collect(),
        }
    }
}

/// Elements used for each arrow, and how to pair them across arrows.
enum Pairing {
    /// The s-th sample of each arrow goes together.
    Zip(usize),
    /// Every combination of basis elements.
    Cartesian,
}

fn run_axioms(
    e: &FellBundleModel,
    elements: &BTreeMap<Arrow, Vec<ComplexMatrix>>,
    scalars: &[(C64, C64)],
    pairing: Pairing,
    tol: Tolerance,
) -> Result<AxiomReport> {
    let mut res = Residuals([0.0; 10]);
    let samples = match pairing {
        Pairing::Zip(s) => s,
        Pairing::Cartesian => elements.values().map(Vec::len).max().unwrap_or(0),
    };
    let pick = |g: &Arrow, s: usize| -> Option<&ComplexMatrix> {
        let v = &elements[g];
        if v.is_empty() {
            None
        } else {
            Some(&v[s % v.len()])
        }
    };
    let index_pairs = |g: &Arrow, h: &Arrow| -> Vec<(usize, usize)> {
        match pairing {
            Pairing::Zip(s) => (0..s).map(|i| (i, i)).collect(),
            Pairing::Cartesian => {
                let (a, b) = (elements[g].len(), elements[h].len());
                (0..a).flat_map(|i| (0..b).map(move |j| (i, j))).collect()
            }
        }
    };
    let mul = |g, a: &ComplexMatrix, h, b: &ComplexMatrix| e.multiply(g, a, h, b).map(|p| p.1);
    let star = |g, a: &ComplexMatrix| e.involution(g, a).map(|p| p.1);

    for (g, h) in e.base.composable_pairs() {
        let gh = compose(g, h)?;
        for (t, (i, j)) in index_pairs(&g, &h).into_iter().enumerate() {
            let (Some(e1), Some(e2)) = (pick(&g, i), pick(&h, j)) else {
                continue;
            };
            let (alpha, beta) = scalars[t % scalars.len()];
            let e1b = pick(&g, i + 1).expect("non-empty");
            let e2b = pick(&h, j + 1).expect("non-empty");
            let p = mul(g, e1, h, e2)?;

            res.record(1, e.fibre_residual(gh, &p));

            let lhs = mul(g, &(&e1.scale(alpha) + &e1b.scale(beta)), h, e2)?;
            let rhs = &p.scale(alpha) + &mul(g, e1b, h, e2)?.scale(beta);
            res.record(2, lhs.distance(&rhs));
            let lhs = mul(g, e1, h, &(&e2.scale(alpha) + &e2b.scale(beta)))?;
            let rhs = &p.scale(alpha) + &mul(g, e1, h, e2b)?.scale(beta);
            res.record(2, lhs.distance(&rhs));

            let excess = e.norm(&p) - e.norm(e1) * e.norm(e2);
            res.record(4, excess.max(0.0));

            let lhs = star(gh, &p)?;
            let rhs = mul(h.inverse(), &star(h, e2)?, g.inverse(), &star(g, e1)?)?;
            res.record(8, lhs.distance(&rhs));
        }
    }

    for (g, h, k) in e.base.composable_triples() {
        let triples: Vec<(usize, usize, usize)> = match pairing {
            Pairing::Zip(s) => (0..s).map(|i| (i, i, i)).collect(),
            Pairing::Cartesian => {
                let (a, b, c) = (elements[&g].len(), elements[&h].len(), elements[&k].len());
                (0..a).flat_map(|i| (0..b).flat_map(move |j| (0..c).map(move |l| (i, j, l)))).collect()
            }
        };
        let gh = compose(g, h)?;
        let hk = compose(h, k)?;
        for (i, j, l) in triples {
            let (Some(e1), Some(e2), Some(e3)) = (pick(&g, i), pick(&h, j), pick(&k, l)) else {
                continue;
            };
            let left = mul(gh, &mul(g, e1, h, e2)?, k, e3)?;
            let right = mul(g, e1, hk, &mul(h, e2, k, e3)?)?;
            res.record(3, left.distance(&right));
        }
    }

    for g in e.base.arrows() {
        let count = match pairing {
            Pairing::Zip(s) => s,
            Pairing::Cartesian => elements[&g].len(),
        };
        for i in 0..count {
            let Some(x) = pick(&g, i) else { continue };
            let (alpha, beta) = scalars[i % scalars.len()];
            let y = pick(&g, i + 1).expect("non-empty");
            let (gs, xs) = e.involution(g, x)?;

            res.record(5, if gs == g.inverse() { e.fibre_residual(gs, &xs) } else { f64::INFINITY });

            let lhs = star(g, &(&x.scale(alpha) + &y.scale(beta)))?;
            let rhs = &xs.scale(alpha.conj()) + &star(g, y)?.scale(beta.conj());
            res.record(6, lhs.distance(&rhs));

            res.record(7, star(gs, &xs)?.distance(x));

            let xsx = mul(gs, &xs, g, x)?;
            let nx = e.norm(x);
            res.record(9, (e.norm(&xsx) - nx * nx).abs());
            res.record(10, xsx.positivity_residual()?);
        }
    }
    Ok(res.into_report(samples, tol))
}

/// Samples `sample_count` elements per fibre and checks all ten axioms on
/// every composable pair and triple.
pub fn check_fell_axioms<R: Rng + ?Sized>(
    e: &FellBundleModel,
    sample_count: usize,
    tol: Tolerance,
    rng: &mut R,
) -> Result<AxiomReport> {
    if sample_count == 0 {
        return Err(Error::ContractViolation("axiom checks need at least one sample".into()));
    }
    let mut elements = BTreeMap::new();
    for g in e.base.arrows() {
        let v: Vec<ComplexMatrix> = if e.fibre_basis(g).is_empty() {
            Vec::new()
        } else {
            (0..sample_count).map(|_| e.random_element(rng, g)).collect()
        };
        elements.insert(g, v);
    }
    let scalars: Vec<(C64, C64)> = (0..sample_count).map(|_| (random::gaussian(rng), random::gaussian(rng))).collect();
    run_axioms(e, &elements, &scalars, Pairing::Zip(sample_count), tol)
}

/// Largest total dimension for which the basis-exhaustive check is offered.
pub const EXHAUSTIVE_MAX_POINTS: usize = 4;

/// Checks the axioms on every combination of fibre basis elements. The
/// multilinear axioms are then verified completely; the norm axioms on the
/// basis only.
pub fn check_fell_axioms_on_basis(e: &FellBundleModel, tol: Tolerance) -> Result<AxiomReport> {
    if e.points() > EXHAUSTIVE_MAX_POINTS {
        return Err(Error::EnumerationCap { n: e.points(), cap: EXHAUSTIVE_MAX_POINTS });
    }
    let elements: BTreeMap<Arrow, Vec<ComplexMatrix>> = e.base.arrows().map(|g| (g, e.fibre_basis(g))).collect();
    let scalars = [(C64::new(0.5, -1.5), C64::new(-2.0, 0.25))];
    run_axioms(e, &elements, &scalars, Pairing::Cartesian, tol)
}

/// `E_{g₁g₂} = span E_{g₁}·E_{g₂}` for every composable pair.
pub fn is_saturated(e: &FellBundleModel, tol: Tolerance) -> Result<bool> {
    for (g, h) in e.base.composable_pairs() {
        let target = {
            let (r, c) = e.fibre_shape(compose(g, h)?);
            r * c
        };
        let mut products = Vec::new();
        for a in e.fibre_basis(g) {
            for b in e.fibre_basis(h) {
                products.push(e.multiply(g, &a, h, &b)?.1);
            }
        }
        if span_dimension(&products, tol)? != target {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Dimension of `span{a·u·b}` with `a, b` over a basis of `A` and `u` over
/// the frame elements (or fibre basis elements) placed in `B`. For a
/// saturated bundle this equals `dim B`.
pub fn regularity_span_dimension(e: &FellBundleModel, tol: Tolerance) -> Result<usize> {
    let a = e.diagonal_algebra();
    let basis = a.basis();
    let mut movers = Vec::new();
    for g in e.base.arrows() {
        match &e.frame {
            Some(f) => movers.push(e.embed(g, &f[&g])?),
            None => {
                for u in e.fibre_basis(g) {
                    movers.push(e.embed(g, &u)?);
                }
            }
        }
    }
    let mut products = Vec::new();
    for x in &basis {
        for u in &movers {
            let xu = x * u;
            if xu.max_abs() == 0.0 {
                continue;
            }
            for y in &basis {
                let p = &xu * y;
                if p.max_abs() > 0.0 {
                    products.push(p);
                }
            }
        }
    }
    span_dimension(&products, tol)
}

// ---------------------------------------------------------------------------
// Conditional expectation

/// The conditional expectation of `B = M_N` onto a block-diagonal `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExpectation {
    domain: FiniteCStarAlgebra,
    range: FiniteCStarAlgebra,
    projections: Vec<BlockProjection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub passed: bool,
    pub max_residual: f64,
}

impl PropertyCheck {
    fn new(max_residual: f64, tol: Tolerance) -> Self {
        Self { passed: tol.accepts(max_residual), max_residual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationReport {
    pub samples: usize,
    pub identity_on_range: PropertyCheck,
    pub bimodule: PropertyCheck,
    pub positive: PropertyCheck,
    pub faithful: PropertyCheck,
    pub idempotent: PropertyCheck,
    pub contractive: PropertyCheck,
}

impl ExpectationReport {
    pub fn all_passed(&self) -> bool {
        [self.identity_on_range, self.bimodule, self.positive, self.faithful, self.idempotent, self.contractive]
            .iter()
            .all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        [self.identity_on_range, self.bimodule, self.positive, self.faithful, self.idempotent, self.contractive]
            .iter()
            .map(|c| c.max_residual)
            .fold(0.0, f64::max)
    }
}

impl ConditionalExpectation {
    /// The canonical expectation of the full algebra on `A`'s ambient space
    /// onto `A`.
    pub fn onto(range: FiniteCStarAlgebra) -> Self {
        let domain = FiniteCStarAlgebra::full(range.ambient_dim()).expect("positive dimension");
        let projections = range.projections();
        Self { domain, range, projections }
    }

    pub fn domain(&self) -> &FiniteCStarAlgebra {
        &self.domain
    }

    pub fn range(&self) -> &FiniteCStarAlgebra {
        &self.range
    }

    pub fn projections(&self) -> &[BlockProjection] {
        &self.projections
    }

    /// `P(b) = Σ pᵢ b pᵢ` (averaged over copies when a summand repeats).
    pub fn apply(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.range.expectation_of(b)
    }

    /// A basis of `ker P`. With unit multiplicities this is the set of matrix
    /// units outside the diagonal blocks.
    pub fn kernel_basis(&self) -> Vec<ComplexMatrix> {
        let n = self.domain.ambient_dim();
        let mut out: Vec<ComplexMatrix> = Vec::new();
        let mut span: Option<SpanBasis> = None;
        for i in 0..n {
            for j in 0..n {
                let e = ComplexMatrix::unit(n, n, i, j);
                let k = &e - &self.apply(&e).expect("ambient shape");
                if k.max_abs() == 0.0 {
                    continue;
                }
                if !self.range.has_unit_multiplicity() {
                    if let Some(s) = &span {
                        if s.contains(&k).unwrap_or(false) {
                            continue;
                        }
                    }
                }
                out.push(k);
                if !self.range.has_unit_multiplicity() {
                    span = SpanBasis::new(&out, Tolerance::default()).ok();
                }
            }
        }
        out
    }

    /// Samples the defining properties of a faithful conditional expectation.
    ///
    /// Faithfulness is witnessed quantitatively: `‖P(b*b)‖ ≥ ‖b‖²/c` where `c`
    /// counts the diagonal blocks (times the largest multiplicity).
    pub fn verify<R: Rng + ?Sized>(&self, samples: usize, tol: Tolerance, rng: &mut R) -> Result<ExpectationReport> {
        let n = self.domain.ambient_dim();
        let basis = self.range.basis();
        let copies: usize = self.range.multiplicities().iter().sum();
        let kmax = *self.range.multiplicities().iter().max().expect("non-empty");
        let bound = (copies * kmax) as f64;
        let (mut id, mut bi, mut pos, mut faith, mut idem, mut contr) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
        for _ in 0..samples {
            let a = random::combination(rng, &basis).expect("non-empty basis");
            let a1 = random::combination(rng, &basis).expect("non-empty basis");
            let a2 = random::combination(rng, &basis).expect("non-empty basis");
            let b = random::gaussian_matrix(rng, n, n);

            id = id.max(self.apply(&a)?.distance(&a));
            let pb = self.apply(&b)?;
            let lhs = self.apply(&(&(&a1 * &b) * &a2))?;
            let rhs = &(&a1 * &pb) * &a2;
            bi = bi.max(lhs.distance(&rhs));
            let bsb = &b.adjoint() * &b;
            let pbsb = self.apply(&bsb)?;
            pos = pos.max(pbsb.positivity_residual()?);
            let nb = b.operator_norm();
            faith = faith.max((nb * nb / bound - pbsb.operator_norm()).max(0.0));
            idem = idem.max(self.apply(&pb)?.distance(&pb));
            contr = contr.max((pb.operator_norm() - nb).max(0.0));
        }
        Ok(ExpectationReport {
            samples,
            identity_on_range: PropertyCheck::new(id, tol),
            bimodule: PropertyCheck::new(bi, tol),
            positive: PropertyCheck::new(pos, tol),
            faithful: PropertyCheck::new(faith, tol),
            idempotent: PropertyCheck::new(idem, tol),
            contractive: PropertyCheck::new(contr, tol),
        })
    }
}

pub fn kernel_basis(p: &ConditionalExpectation) -> Vec<ComplexMatrix> {
    p.kernel_basis()
}

/// Scalar twist value `λ·I` of the given size.
pub fn scalar_twist_value(lambda: C64, dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim).scale(lambda)
}

/// Twist of a line bundle from scalar values.
pub fn scalar_twist(values: impl IntoIterator<Item = ((Arrow, Arrow), C64)>) -> Twist {
    values.into_iter().filter(|(_, z)| *z != ONE).map(|(k, z)| (k, ComplexMatrix::scalar(z))).collect()
}
