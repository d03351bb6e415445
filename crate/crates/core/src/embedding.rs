//! The embedding invariant Φ: a sum of block partial isometries, one per pair
//! of points, from which the inclusion `A ⊂ B`, its expectation, a spanning
//! set of normalizers and the twist can be read off.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;

use crate::algebra::{BlockProjection, FiniteCStarAlgebra};
use crate::dynamics::{extract_cocycle, Cocycle2, CovarianceGroup, UnitaryAssignment};
use crate::error::{Error, Result};
use crate::fellbundle::{
    build_semidirect_bundle, check_fell_axioms, CStarBundle, ConditionalExpectation, FellBundleModel,
};
use crate::groupoid::{Arrow, PairGroupoid};
use crate::linalg::{singular_values, ComplexMatrix, Tolerance};
use crate::random;
use crate::subalgebra::{classify_pair, Classification, PairCandidate};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingInvariant {
    phi: ComplexMatrix,
    algebra: FiniteCStarAlgebra,
    subset: Option<BTreeSet<usize>>,
}

impl EmbeddingInvariant {
    /// Wraps a matrix with the block decomposition given by `fibre_dims`.
    pub fn new(phi: ComplexMatrix, fibre_dims: &[usize]) -> Result<Self> {
        let algebra = FiniteCStarAlgebra::new(fibre_dims.to_vec())?;
        if phi.shape() != (algebra.ambient_dim(), algebra.ambient_dim()) {
            return Err(Error::shape(format!(
                "Φ must be {n}x{n} for fibre dimensions {fibre_dims:?}",
                n = algebra.ambient_dim()
            )));
        }
        Ok(Self { phi, algebra, subset: None })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.phi
    }

    pub fn fibre_dims(&self) -> &[usize] {
        self.algebra.block_dims()
    }

    pub fn points(&self) -> usize {
        self.algebra.block_count()
    }

    pub fn projections(&self) -> Vec<BlockProjection> {
        self.algebra.projections()
    }

    pub fn subset(&self) -> Option<&BTreeSet<usize>> {
        self.subset.as_ref()
    }

    /// `u_{ij} = p_i Φ p_j` as an `n_i × n_j` matrix.
    pub fn block(&self, g: Arrow) -> ComplexMatrix {
        let (ri, rj) = (self.algebra.block_range(g.range), self.algebra.block_range(g.source));
        self.phi.block(ri.start, rj.start, ri.len(), rj.len())
    }

    pub fn blocks(&self) -> BTreeMap<Arrow, ComplexMatrix> {
        PairGroupoid::new(self.points()).expect("positive point count").arrows().map(|g| (g, self.block(g))).collect()
    }

    /// Arrows whose block is nonzero.
    pub fn support(&self, tol: Tolerance) -> BTreeSet<Arrow> {
        self.blocks().into_iter().filter(|(_, b)| !tol.accepts(b.frobenius_norm())).map(|(g, _)| g).collect()
    }

    /// `u_{ij}` placed in `B`.
    pub fn embedded_block(&self, g: Arrow) -> ComplexMatrix {
        let n = self.algebra.ambient_dim();
        let mut out = ComplexMatrix::zeros(n, n);
        out.set_block(
            self.algebra.block_range(g.range).start,
            self.algebra.block_range(g.source).start,
            &self.block(g),
        );
        out
    }
}

/// `Φ = Σ_{(i,j) ∈ Y×Y} u_{(i,j)}`. Units may be given in `B` or as
/// `n_i × n_j` blocks; each must be a partial isometry supported on its own
/// block.
pub fn phi_from_block_units(
    units: &BTreeMap<Arrow, ComplexMatrix>,
    fibre_dims: &[usize],
    subset: Option<&BTreeSet<usize>>,
    tol: Tolerance,
) -> Result<EmbeddingInvariant> {
    let algebra = FiniteCStarAlgebra::new(fibre_dims.to_vec())?;
    let n = algebra.ambient_dim();
    let mut phi = ComplexMatrix::zeros(n, n);
    for (&g, u) in units {
        if g.range >= fibre_dims.len() || g.source >= fibre_dims.len() {
            return Err(Error::shape(format!("arrow {g} outside {} points", fibre_dims.len())));
        }
        if let Some(y) = subset {
            if !y.contains(&g.range) || !y.contains(&g.source) {
                continue;
            }
        }
        let (ri, rj) = (algebra.block_range(g.range), algebra.block_range(g.source));
        let block = if u.shape() == (n, n) {
            let mut outside = u.clone();
            outside.set_block(ri.start, rj.start, &ComplexMatrix::zeros(ri.len(), rj.len()));
            if !tol.accepts(outside.frobenius_norm()) {
                return Err(Error::SupportViolation(format!("unit for {g} leaves its block")));
            }
            u.block(ri.start, rj.start, ri.len(), rj.len())
        } else if u.shape() == (ri.len(), rj.len()) {
            u.clone()
        } else {
            return Err(Error::shape(format!(
                "unit for {g} has shape {:?}, expected {}x{} or {n}x{n}",
                u.shape(),
                ri.len(),
                rj.len()
            )));
        };
        if !block.is_partial_isometry(tol) {
            return Err(Error::NotPartialIsometry(format!("unit for {g}")));
        }
        phi.set_block(ri.start, rj.start, &block);
    }
    Ok(EmbeddingInvariant { phi, algebra, subset: subset.cloned() })
}

/// `Φ = Σ_{m=1}^{n} σ^m` for a generator whose orbit covers `X × X`.
pub fn phi_from_covariance_group(gs: &CovarianceGroup) -> Result<EmbeddingInvariant> {
    let missing = gs.flow().missing_arrows();
    if !missing.is_empty() {
        return Err(Error::IncompleteSupport { missing });
    }
    let mut phi = ComplexMatrix::zeros(gs.sigma().matrix().rows(), gs.sigma().matrix().cols());
    for s in gs.powers() {
        phi = &phi + s.matrix();
    }
    EmbeddingInvariant::new(phi, gs.fibre_dims())
}

/// `Σ_m Π_{i=1}^m U_{g_i}` evaluated as a literal double loop over flow steps
/// and transports.
pub fn phi_expanded(gs: &CovarianceGroup) -> ComplexMatrix {
    let sigma = gs.sigma().matrix();
    let n = sigma.rows();
    let mut phi = ComplexMatrix::zeros(n, n);
    for m in 1..=gs.order() {
        let mut transport = ComplexMatrix::identity(n);
        for _ in 0..m {
            transport = &transport * sigma;
        }
        phi = &phi + &transport;
    }
    phi
}

/// Every block has full rank `min(n_i, n_j)`.
pub fn is_orientable(phi: &EmbeddingInvariant, tol: Tolerance) -> bool {
    phi.blocks().values().all(|b| {
        let k = b.rows().min(b.cols());
        let sv = singular_values(b);
        sv.len() >= k && sv[k - 1] > tol.eps()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadOff {
    pub a: FiniteCStarAlgebra,
    pub b: FiniteCStarAlgebra,
    pub p: ConditionalExpectation,
    pub normalizer_sample: Vec<ComplexMatrix>,
    /// `(x,y) ↦ u_{xy}` when every block is square.
    pub assignment: Option<UnitaryAssignment>,
    pub omega: Option<Cocycle2>,
}

impl ReadOff {
    pub fn pair(&self) -> PairCandidate {
        PairCandidate::canonical(self.a.clone())
    }

    /// `{a·u : a ∈ basis(A), u ∈ normalizer_sample}` without zeros: the
    /// slices spanned by the read-off blocks.
    pub fn slice_sample(&self) -> Vec<ComplexMatrix> {
        let basis = self.a.basis();
        self.normalizer_sample
            .iter()
            .flat_map(|u| basis.iter().map(move |x| x * u))
            .filter(|m| m.max_abs() > 0.0)
            .collect()
    }
}

/// Reads `(A, B, P, N(A), ω)` off an orientable Φ.
pub fn read_off_pair(phi: &EmbeddingInvariant, tol: Tolerance) -> Result<ReadOff> {
    if !is_orientable(phi, tol) {
        let vanishing: Vec<String> = phi
            .blocks()
            .into_iter()
            .filter(|(_, b)| {
                let k = b.rows().min(b.cols());
                singular_values(b).get(k - 1).is_none_or(|&s| s <= tol.eps())
            })
            .map(|(g, _)| g.to_string())
            .collect();
        return Err(Error::NotOrientable(format!("rank-deficient blocks {}", vanishing.join(" "))));
    }
    let blocks = phi.blocks();
    for (g, b) in &blocks {
        if !b.is_partial_isometry(tol) {
            return Err(Error::NotPartialIsometry(format!("block {g}; Φ is not supported on bisections")));
        }
    }
    let a = phi.algebra.clone();
    let p = ConditionalExpectation::onto(a.clone());
    let b = p.domain().clone();
    let normalizer_sample = blocks.keys().map(|&g| phi.embedded_block(g)).collect();
    let square = a.block_dims().iter().all(|&n| n == a.block_dims()[0]);
    let (assignment, omega) = if square {
        let assignment = UnitaryAssignment::new(phi.points(), blocks, tol)?;
        let omega = extract_cocycle(&assignment, tol)?;
        (Some(assignment), Some(omega))
    } else {
        (None, None)
    };
    Ok(ReadOff { a, b, p, normalizer_sample, assignment, omega })
}

/// The pair `(C*(E⁰), C*(E))` of a Fell bundle with its classification.
/// The normalizer sample is the fibre bases placed in `B`.
pub fn cartan_from_fell_bundle<R: Rng + ?Sized>(
    e: &FellBundleModel,
    samples: usize,
    tol: Tolerance,
    rng: &mut R,
) -> Result<(PairCandidate, Classification)> {
    let report = check_fell_axioms(e, samples, tol, rng)?;
    if !report.all_passed() {
        return Err(Error::InvalidBundle(format!("axioms {:?} fail", report.failed())));
    }
    let pair = PairCandidate::from_bundle(e);
    let mut sample = Vec::new();
    for g in e.base().arrows() {
        for x in e.fibre_basis(g) {
            sample.push(e.embed(g, &x)?);
        }
    }
    let c = classify_pair(&pair, &sample, tol)?;
    Ok((pair, c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeReport {
    pub dims_preserved: bool,
    pub omega_residual: f64,
    pub expectation_residual: f64,
    pub sigma_support_preserved: bool,
    pub sigma_residual: f64,
    pub bundle_axioms_passed: bool,
    pub passed: bool,
}

/// Covariance group → Φ → `(A, B, P, ω)` → Fell bundle → covariance group.
///
/// The bundle is built on the read-off assignment as its frame. Its realised
/// sections already satisfy `u_g u_h = ω(g,h) u_{gh}`, so no separate twist
/// is applied; `ω` is recovered from the bundle's frame sections.
pub fn bridge_round_trip<R: Rng + ?Sized>(
    gs: &CovarianceGroup,
    samples: usize,
    tol: Tolerance,
    rng: &mut R,
) -> Result<BridgeReport> {
    let dims = gs.fibre_dims().to_vec();
    let phi = phi_from_covariance_group(gs).map_err(|e| e.at_stage("phi"))?;
    let read = read_off_pair(&phi, tol).map_err(|e| e.at_stage("read-off"))?;
    let assignment = read
        .assignment
        .clone()
        .ok_or_else(|| Error::LocalTriviality("fibre dimensions differ".into()).at_stage("read-off"))?;
    let omega = read.omega.clone().expect("square blocks carry a cocycle");

    let e0 = CStarBundle::new(dims.clone()).map_err(|e| e.at_stage("bundle"))?;
    let bundle = build_semidirect_bundle(&e0, assignment.into_map(), None, tol).map_err(|e| e.at_stage("bundle"))?;
    let axioms = check_fell_axioms(&bundle, samples, tol, rng).map_err(|e| e.at_stage("bundle"))?;

    let frame = bundle.frame().expect("semidirect bundles carry a frame");
    let sections: BTreeMap<Arrow, ComplexMatrix> = frame
        .keys()
        .map(|&g| {
            let n = bundle.fibre_shape(g).0;
            bundle.section(g, &ComplexMatrix::identity(n)).map(|s| (g, s))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("recover"))?;
    let recovered =
        UnitaryAssignment::new(bundle.points(), sections.clone(), tol).map_err(|e| e.at_stage("recover"))?;
    let omega_back = extract_cocycle(&recovered, tol).map_err(|e| e.at_stage("recover"))?;
    let omega_residual = omega
        .values()
        .iter()
        .map(|(k, w)| omega_back.values().get(k).map_or(f64::INFINITY, |v| v.distance(w)))
        .fold(0.0, f64::max);

    let g = gs.generator();
    let mut sigma = ComplexMatrix::zeros(phi.matrix().rows(), phi.matrix().cols());
    for x in 0..dims.len() {
        let arrow = Arrow::new(x, g.apply(x));
        sigma = &sigma + &bundle.embed(arrow, &sections[&arrow]).map_err(|e| e.at_stage("recover"))?;
    }
    let sigma_residual = sigma.distance(gs.sigma().matrix());
    let a = FiniteCStarAlgebra::new(dims.clone())?;
    let support_back = crate::subalgebra::normalizer_support(&sigma, &a, tol).map_err(|e| e.at_stage("recover"))?;
    let sigma_support_preserved = support_back == gs.sigma().support();

    let original_p = ConditionalExpectation::onto(a);
    let recovered_p = bundle.restriction_expectation();
    let n = phi.matrix().rows();
    let mut expectation_residual: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let b = random::gaussian_matrix(rng, n, n);
        expectation_residual = expectation_residual.max(original_p.apply(&b)?.distance(&recovered_p.apply(&b)?));
    }

    let dims_preserved = bundle.fibre_dims() == dims.as_slice() && read.a.block_dims() == dims.as_slice();
    let passed = dims_preserved
        && tol.accepts(omega_residual)
        && tol.accepts(expectation_residual)
        && sigma_support_preserved
        && tol.accepts(sigma_residual)
        && axioms.all_passed();
    Ok(BridgeReport {
        dims_preserved,
        omega_residual,
        expectation_residual,
        sigma_support_preserved,
        sigma_residual,
        bundle_axioms_passed: axioms.all_passed(),
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Holonomy;
    use crate::fellbundle::build_imprimitivity_bundle;
    use crate::groupoid::Bisection;
    use crate::linalg::{C64, ONE};
    use crate::random::seeded;
    use crate::subalgebra::{is_normalizer, PairClass};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn all_ones_from_matrix_units() {
        let units: BTreeMap<Arrow, ComplexMatrix> =
            PairGroupoid::new(4).unwrap().arrows().map(|g| (g, ComplexMatrix::unit(4, 4, g.range, g.source))).collect();
        let phi = phi_from_block_units(&units, &[1; 4], None, tol()).unwrap();
        assert!(phi.matrix().as_slice().iter().all(|&z| z == ONE));
        assert_eq!(phi.support(tol()).len(), 16);
        assert!(is_orientable(&phi, tol()));

        let y: BTreeSet<usize> = [0, 1].into();
        let corner = phi_from_block_units(&units, &[1; 4], Some(&y), tol()).unwrap();
        assert_eq!(corner.support(tol()).len(), 4);
        assert!(!is_orientable(&corner, tol()));
    }

    #[test]
    fn unit_validation() {
        let mut units = BTreeMap::new();
        units.insert(Arrow::new(0, 1), ComplexMatrix::from_real_rows(&[&[1.0], &[0.0]]).unwrap());
        let phi = phi_from_block_units(&units, &[2, 1], None, tol()).unwrap();
        assert_eq!(phi.block(Arrow::new(0, 1)).shape(), (2, 1));

        units.insert(Arrow::new(1, 0), ComplexMatrix::from_real_rows(&[&[1.0, 1.0]]).unwrap());
        assert!(matches!(phi_from_block_units(&units, &[2, 1], None, tol()), Err(Error::NotPartialIsometry(_))));

        let mut units = BTreeMap::new();
        units.insert(Arrow::new(0, 1), ComplexMatrix::unit(3, 3, 0, 0));
        assert!(matches!(phi_from_block_units(&units, &[2, 1], None, tol()), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn covariance_presentation_matches_block_presentation() {
        let mut rng = seeded(11);
        let gs = CovarianceGroup::random(&mut rng, Bisection::shift(4), 2, Holonomy::Free);
        let phi = phi_from_covariance_group(&gs).unwrap();
        assert_eq!(phi.support(tol()).len(), 16);
        assert!(is_orientable(&phi, tol()));
        assert!(phi.matrix().distance(&phi_expanded(&gs)) < 1e-12);

        let n = phi.matrix().rows();
        let units: BTreeMap<Arrow, ComplexMatrix> = gs
            .powers()
            .iter()
            .flat_map(|s| {
                let a = FiniteCStarAlgebra::new(vec![2; 4]).unwrap();
                s.support()
                    .into_iter()
                    .map(|g| {
                        let mut m = ComplexMatrix::zeros(n, n);
                        let (ri, rj) = (a.block_range(g.range), a.block_range(g.source));
                        m.set_block(ri.start, rj.start, &s.matrix().block(ri.start, rj.start, 2, 2));
                        (g, m)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let blocks = phi_from_block_units(&units, &[2; 4], None, tol()).unwrap();
        assert_eq!(blocks.matrix(), phi.matrix());

        let id = CovarianceGroup::random(&mut rng, Bisection::identity(3), 1, Holonomy::Free);
        match phi_from_covariance_group(&id) {
            Err(Error::IncompleteSupport { missing }) => assert_eq!(missing.len(), 6),
            other => panic!("{other:?}"),
        }
        let one = CovarianceGroup::random(&mut rng, Bisection::identity(1), 2, Holonomy::Free);
        assert_eq!(phi_from_covariance_group(&one).unwrap().matrix(), one.sigma().matrix());
    }

    #[test]
    fn read_off_examples() {
        let mut rng = seeded(12);
        let gs = CovarianceGroup::random(&mut rng, Bisection::shift(4), 1, Holonomy::Free);
        let phi = phi_from_covariance_group(&gs).unwrap();
        let r = read_off_pair(&phi, tol()).unwrap();
        assert_eq!(r.a, FiniteCStarAlgebra::diagonal_masa(4).unwrap());
        assert_eq!(r.p.apply(&ComplexMatrix::unit(4, 4, 0, 3)).unwrap(), ComplexMatrix::zeros(4, 4));
        for m in &r.normalizer_sample {
            assert!(is_normalizer(m, &r.a, tol()).unwrap());
        }
        let w = r.omega.unwrap();
        let g = |x, y| Arrow::new(x, y);
        let u = r.assignment.unwrap();
        let lhs = &u.get(g(0, 1)).unwrap().clone() * u.get(g(1, 2)).unwrap();
        let rhs = &w.value(g(0, 1), g(1, 2)).unwrap().clone() * u.get(g(0, 2)).unwrap();
        assert!(lhs.distance(&rhs) < 1e-12);
        for v in u.map().values() {
            assert!((v[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }

        let zeroed = {
            let mut m = phi.matrix().clone();
            m[(0, 2)] = C64::default();
            EmbeddingInvariant::new(m, &[1; 4]).unwrap()
        };
        assert!(matches!(read_off_pair(&zeroed, tol()), Err(Error::NotOrientable(_))));

        let single = EmbeddingInvariant::new(ComplexMatrix::identity(2), &[2]).unwrap();
        let r = read_off_pair(&single, tol()).unwrap();
        assert_eq!(r.a, r.b);
        assert!(r.omega.unwrap().is_trivial(tol()));
    }

    #[test]
    fn cartan_pairs_from_bundles() {
        let mut rng = seeded(13);
        let (pair, c) =
            cartan_from_fell_bundle(&build_imprimitivity_bundle(&[2, 1]).unwrap(), 10, tol(), &mut rng).unwrap();
        assert_eq!(pair.a().block_dims(), &[2, 1]);
        assert_eq!(c.class, PairClass::Diagonal);
        let (_, c) =
            cartan_from_fell_bundle(&build_imprimitivity_bundle(&[1; 4]).unwrap(), 10, tol(), &mut rng).unwrap();
        assert_eq!(c.class, PairClass::Diagonal);
        assert_eq!(c.kernel_dim, 12);
    }

    #[test]
    fn bridge_examples() {
        let mut rng = seeded(14);
        for (n, dim) in [(4, 1), (3, 2), (2, 2)] {
            let gs = CovarianceGroup::random(&mut rng, Bisection::shift(n), dim, Holonomy::Trivial);
            let r = bridge_round_trip(&gs, 10, tol(), &mut rng).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let id = CovarianceGroup::random(&mut rng, Bisection::identity(3), 1, Holonomy::Free);
        assert!(matches!(bridge_round_trip(&id, 10, tol(), &mut rng), Err(Error::Stage { stage: "phi", .. })));
    }
}
