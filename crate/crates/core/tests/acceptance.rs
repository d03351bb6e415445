//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use fellkit::algebra::FiniteCStarAlgebra;
use fellkit::cli;
use fellkit::dynamics::{
    check_unitary_normalizer_theorem, cocycle_identity_check, cocycle_identity_residual, extract_cocycle,
    make_spatial_automorphism, slice_from_bisection, CovarianceGroup, Holonomy,
};
use fellkit::embedding::{bridge_round_trip, is_orientable, phi_from_covariance_group};
use fellkit::fellbundle::{
    build_imprimitivity_bundle, build_semidirect_bundle, check_fell_axioms, identity_frame, is_saturated,
    regularity_span_dimension, scalar_twist, CStarBundle, FellBundleModel,
};
use fellkit::groupoid::{Arrow, Bisection, PairGroupoid, ENUMERATION_CAP};
use fellkit::io::{preset, PresetParams};
use fellkit::linalg::{ComplexMatrix, Tolerance, C64};
use fellkit::random::{self, seeded};
use fellkit::subalgebra::{classify_pair, slice_check, PairCandidate, PairClass};
use serde_json::Value;

const SEED: u64 = 2024;

const AXIOM_TOL: f64 = 1e-9;
const EXPECTATION_TOL: f64 = 1e-9;
const OMEGA_TOL: f64 = 1e-10;
const COCYCLE_TOL: f64 = 1e-12;
const BRIDGE_TOL: f64 = 1e-9;

const AXIOM_SAMPLES: usize = 200;
const EXPECTATION_SAMPLES: usize = 500;
const NORMALIZER_SAMPLES: usize = 100;
const BRIDGE_INSTANCES: u64 = 20;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn tol(eps: f64) -> Tolerance {
    Tolerance::new(eps).expect("pinned tolerances are positive")
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn semidirect_preset() -> Result<FellBundleModel, String> {
    let params = PresetParams { n: Some(4), dim: Some(2), seed: SEED, ..PresetParams::default() };
    Ok(ok(preset("semidirect", &params))?.bundle)
}

fn embedded_fibres(e: &FellBundleModel) -> Result<Vec<ComplexMatrix>, String> {
    let mut out = Vec::new();
    for g in e.base().arrows() {
        for x in e.fibre_basis(g) {
            out.push(ok(e.embed(g, &x))?);
        }
    }
    Ok(out)
}

fn axiom_suite() -> Outcome {
    let t = tol(AXIOM_TOL);
    let bundles = [
        ("imprimitivity(2,1,3)", ok(build_imprimitivity_bundle(&[2, 1, 3]))?),
        ("semidirect(4x2)", semidirect_preset()?),
    ];
    let mut notes = Vec::new();
    for (name, e) in &bundles {
        let r = ok(check_fell_axioms(e, AXIOM_SAMPLES, t, &mut seeded(SEED)))?;
        ensure!(r.checks.len() == 10, "{name}: {} checks", r.checks.len());
        ensure!(r.all_passed(), "{name}: failed axioms {:?}", r.failed());
        ensure!(r.max_residual() < AXIOM_TOL, "{name}: residual {:e}", r.max_residual());
        notes.push(format!("{name} max {:.1e}", r.max_residual()));
    }

    let mut rng = seeded(SEED + 1);
    let mut frame = bundles[1].1.frame().expect("semidirect frame").clone();
    frame.insert(Arrow::new(1, 0), random::unitary(&mut rng, 2));
    let broken = ok(build_semidirect_bundle(&ok(CStarBundle::constant(4, 2))?, frame, None, t))?;
    let r = ok(check_fell_axioms(&broken, AXIOM_SAMPLES, t, &mut rng))?;
    ensure!(!r.axiom(8).passed, "broken frame passes axiom 8");

    // Involution compatible (i·conj(i) = 1) but τ(01,12)τ(02,20) ≠ τ(12,20)τ(01,10).
    let i = C64::new(0.0, 1.0);
    let twist = scalar_twist([((Arrow::new(0, 1), Arrow::new(1, 2)), i), ((Arrow::new(2, 1), Arrow::new(1, 0)), i)]);
    let twisted = ok(build_semidirect_bundle(&ok(CStarBundle::constant(3, 1))?, identity_frame(3, 1), Some(twist), t))?;
    let r = ok(check_fell_axioms(&twisted, AXIOM_SAMPLES, t, &mut rng))?;
    ensure!(!r.axiom(3).passed, "non-cocycle twist passes axiom 3");
    notes.push(format!("controls fail {:?}", r.failed()));
    Ok(notes.join(", "))
}

fn regularity() -> Outcome {
    let t = Tolerance::default();
    let mut notes = Vec::new();
    for (name, e, dims) in [
        ("imprimitivity", ok(build_imprimitivity_bundle(&[2, 1, 3]))?, vec![2usize, 1, 3]),
        ("semidirect", semidirect_preset()?, vec![2; 4]),
    ] {
        let n: usize = dims.iter().sum();
        ensure!(ok(is_saturated(&e, t))?, "{name} not saturated");
        let span = ok(regularity_span_dimension(&e, t))?;
        let fibres = embedded_fibres(&e)?;
        let products: Vec<ComplexMatrix> = fibres.iter().flat_map(|x| fibres.iter().map(move |y| x * y)).collect();
        let oracle = common::span_rank(&products);
        ensure!(span == n * n && oracle == n * n, "{name}: span {span}, oracle {oracle}, dim B {}", n * n);
        notes.push(format!("{name} {span}"));
    }
    Ok(notes.join(", "))
}

fn diagonal_kernel() -> Outcome {
    let t = Tolerance::default();
    let masa = ok(preset("diag-masa", &PresetParams { n: Some(4), ..PresetParams::default() }))?.bundle;
    let p = masa.restriction_expectation();
    let kernel = p.kernel_basis().len();
    let oracle = common::expectation_kernel_dim(&[1; 4]);
    ensure!(kernel == 12 && oracle == 12, "diag-masa kernel {kernel}, oracle {oracle}");
    let c = ok(classify_pair(&PairCandidate::from_bundle(&masa), &embedded_fibres(&masa)?, t))?;
    ensure!(c.class == PairClass::Diagonal, "diag-masa classified {}", c.class);
    ensure!(c.free_normalizer_span == 12 && c.kernel_in_free_span, "free normalizer span {}", c.free_normalizer_span);

    let imp = ok(build_imprimitivity_bundle(&[2, 1]))?;
    let k2 = imp.restriction_expectation().kernel_basis().len();
    let oracle2 = common::expectation_kernel_dim(&[2, 1]);
    ensure!(k2 == 4 && oracle2 == 4, "imprimitivity(2,1) kernel {k2}, oracle {oracle2}");
    Ok(format!("ker P = {kernel} = span N_f, class {}; (2,1) ker P = {k2}", c.class))
}

fn expectation_contract() -> Outcome {
    let t = tol(EXPECTATION_TOL);
    let cases = [
        ("imprimitivity", FiniteCStarAlgebra::new(vec![2, 1, 3])),
        ("masa", FiniteCStarAlgebra::diagonal_masa(4)),
        ("blocks 2x4", FiniteCStarAlgebra::new(vec![2; 4])),
    ];
    let mut worst: f64 = 0.0;
    for (name, a) in cases {
        let p = fellkit::fellbundle::ConditionalExpectation::onto(ok(a)?);
        let r = ok(p.verify(EXPECTATION_SAMPLES, t, &mut seeded(SEED)))?;
        for (prop, c) in [
            ("P(a)=a", r.identity_on_range),
            ("bimodule", r.bimodule),
            ("positive", r.positive),
            ("faithful", r.faithful),
        ] {
            ensure!(c.passed && c.max_residual < EXPECTATION_TOL, "{name}: {prop} residual {:e}", c.max_residual);
            worst = worst.max(c.max_residual);
        }
    }
    Ok(format!("3 expectations x {EXPECTATION_SAMPLES} samples, max residual {worst:.1e}"))
}

fn fourpoint() -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(["fellkit", "phi", "build", "--preset", "fourpoint", "--format", "json"], &mut out, &mut err);
    ensure!(code == cli::EXIT_PASS, "phi build exited {code}: {}", String::from_utf8_lossy(&err));
    let v: Value = ok(serde_json::from_slice(&out))?;
    let supports = &v["details"]["unitary_supports"];
    let as_list = |k: &str| -> Vec<String> {
        supports[k]
            .as_array()
            .map(|a| a.iter().filter_map(|s| s.as_str().map(String::from)).collect())
            .unwrap_or_default()
    };
    ensure!(as_list("U_g") == ["(1,2)", "(2,3)", "(3,4)", "(4,1)"], "U_g support {:?}", as_list("U_g"));
    ensure!(as_list("U_g^2") == ["(1,3)", "(2,4)", "(3,1)", "(4,2)"], "U_g^2 support {:?}", as_list("U_g^2"));

    let model = ok(preset("fourpoint", &PresetParams::default()))?;
    let gs = model.generator.expect("fourpoint has a generator");
    // The printed U_g: ones at (1,2),(2,3),(3,4),(4,1).
    let printed = ok(ComplexMatrix::from_real_rows(&[
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[1.0, 0.0, 0.0, 0.0],
    ]))?;
    ensure!(gs.sigma().matrix() == &printed, "U_g differs from the printed matrix");

    let t = Tolerance::default();
    let assignment = gs.power_assignment();
    let w = ok(extract_cocycle(&assignment, t))?;
    let (g, h, gh) = (Arrow::new(0, 1), Arrow::new(1, 2), Arrow::new(0, 2));
    let u = |a: Arrow| assignment.get(a).expect("complete assignment").clone();
    let omega = w.value(g, h).expect("composable pair").clone();
    let residual = (&u(g) * &u(h)).distance(&(&omega * &u(gh)));
    ensure!(residual < OMEGA_TOL, "u12 u23 - ω(12,23) u13 residual {residual:e}");

    let phi = ok(phi_from_covariance_group(&gs))?;
    let support = phi.support(t).len();
    ensure!(support == 16, "Φ supported on {support} blocks");
    ensure!(is_orientable(&phi, t), "Φ not orientable");
    Ok(format!("supports match, ω(12,23) = {:.3} residual {residual:.1e}, 16 blocks, orientable", omega[(0, 0)]))
}

fn unitary_normalizers() -> Outcome {
    let t = Tolerance::default();
    let mut notes = Vec::new();
    for (name, e) in
        [("imprimitivity", ok(build_imprimitivity_bundle(&[2, 1, 3]))?), ("semidirect", semidirect_preset()?)]
    {
        let r = ok(check_unitary_normalizer_theorem(&e, NORMALIZER_SAMPLES, t, &mut seeded(SEED)))?;
        ensure!(
            r.spatial_tested == NORMALIZER_SAMPLES && r.spatial_unitary_normalizers == NORMALIZER_SAMPLES,
            "{name}: {}/{} spatial automorphisms normalize",
            r.spatial_unitary_normalizers,
            r.spatial_tested
        );
        ensure!(
            r.mixed_tested == NORMALIZER_SAMPLES && r.mixed_rejected == NORMALIZER_SAMPLES,
            "{name}: {}/{} mixing unitaries rejected",
            r.mixed_rejected,
            r.mixed_tested
        );
        ensure!(r.passed(), "{name}: {r:?}");
        notes.push(format!("{name} min mixing residual {:.2e}", r.mixed_min_residual));
    }
    Ok(notes.join(", "))
}

fn cocycle_identity() -> Outcome {
    let t = tol(COCYCLE_TOL);
    let mut rng = seeded(SEED);
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        for dim in 1..=2 {
            for holonomy in [Holonomy::Trivial, Holonomy::Scalar(random::phase(&mut rng)), Holonomy::Free] {
                let g = random_cycle(&mut rng, n);
                let gs = CovarianceGroup::random(&mut rng, g, dim, holonomy);
                let w = match extract_cocycle(&gs.power_assignment(), Tolerance::default()) {
                    Ok(w) => w,
                    // Free holonomy in dimension > 1 need not give a central twist.
                    Err(_) if holonomy == Holonomy::Free && dim > 1 => continue,
                    Err(e) => return Err(format!("n={n} dim={dim} {holonomy:?}: {e}")),
                };
                let r = ok(cocycle_identity_residual(&w))?;
                ensure!(ok(cocycle_identity_check(&w, t))?, "n={n} dim={dim} {holonomy:?}: residual {r:e}");
                worst = worst.max(r);
                count += 1;
            }
        }
    }
    Ok(format!("{count} assignments, all composable triples, max residual {worst:.1e}"))
}

fn slices() -> Outcome {
    let t = Tolerance::default();
    let brute = common::brute_force_involutions(4);
    let bisections = ok(ok(PairGroupoid::new(4))?.self_adjoint_bisections(ENUMERATION_CAP))?;
    ensure!(brute == 10 && bisections.len() == 10, "enumerated {}, brute force {brute}", bisections.len());
    let mut rng = seeded(SEED);
    for dims in [vec![1usize; 4], vec![2; 4]] {
        let a = ok(FiniteCStarAlgebra::new(dims.clone()))?;
        for b in &bisections {
            let maps = dims.iter().map(|&d| random::unitary(&mut rng, d)).collect();
            let u = ok(make_spatial_automorphism(b.clone(), maps, &dims, t))?;
            let m = ok(slice_from_bisection(&a, &u, t))?;
            let r = ok(slice_check(&m, &a, t))?;
            ensure!(r.bimodule && r.hilbert, "bisection {b} on dims {dims:?}: {r:?}");
        }
    }
    Ok(format!(
        "{} self-adjoint bisections (brute force {brute}), bimodule and hilbert on dims 1 and 2",
        bisections.len()
    ))
}

fn generation() -> Outcome {
    let t = Tolerance::default();
    let dims = [1usize; 4];
    let a = ok(FiniteCStarAlgebra::diagonal_masa(4))?;
    let b = ok(FiniteCStarAlgebra::full(4))?;
    let dim_b = 4 * 4;
    let unit = || vec![ComplexMatrix::identity(1); 4];
    let mut notes = Vec::new();
    for (name, perm, expect) in [
        ("4-cycle", vec![2, 3, 4, 1], true),
        ("identity", vec![1, 2, 3, 4], false),
        ("2-cycle", vec![2, 1, 3, 4], false),
        ("two 2-cycles", vec![2, 1, 4, 3], false),
    ] {
        let gs = ok(CovarianceGroup::from_fibre_maps(ok(Bisection::from_one_line(&perm))?, unit(), &dims, t))?;
        let r = ok(fellkit::dynamics::a_dynamical_generation_check(&gs, &a, &b, t))?;
        ensure!(r.dim_b == dim_b, "dim B {}", r.dim_b);
        ensure!(r.generated == expect, "{name}: span {} of {dim_b}", r.span_dimension);
        notes.push(format!("{name} {}", r.span_dimension));
    }
    Ok(notes.join(", "))
}

fn bridge() -> Outcome {
    let t = tol(BRIDGE_TOL);
    let mut worst: f64 = 0.0;
    for k in 0..BRIDGE_INSTANCES {
        let mut rng = seeded(SEED + k);
        let n = 2 + (k as usize % 3);
        let dim = 1 + (k as usize / 3) % 2;
        let cycle = random_cycle(&mut rng, n);
        let gs = CovarianceGroup::random(&mut rng, cycle, dim, Holonomy::Trivial);
        let r = ok(bridge_round_trip(&gs, 20, t, &mut rng))?;
        ensure!(r.dims_preserved, "instance {k} (n={n}, dim={dim}): dims changed");
        ensure!(
            r.omega_residual < BRIDGE_TOL && r.expectation_residual < BRIDGE_TOL,
            "instance {k}: ω residual {:e}, P residual {:e}",
            r.omega_residual,
            r.expectation_residual
        );
        ensure!(r.passed, "instance {k}: {r:?}");
        worst = worst.max(r.omega_residual).max(r.expectation_residual);
    }
    Ok(format!("{BRIDGE_INSTANCES} instances, max residual {worst:.1e}"))
}

fn determinism() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let mut bodies = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("report{run}.json"));
        let path_str = path.to_string_lossy().into_owned();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let args =
            ["fellkit", "report", "--preset", "fourpoint", "--seed", "7", "--format", "json", "--out", &path_str];
        let code = cli::run(args, &mut out, &mut err);
        ensure!(code == cli::EXIT_PASS, "run {run} exited {code}: {}", String::from_utf8_lossy(&err));
        bodies.push(ok(std::fs::read(&path))?);
    }
    ensure!(bodies[0] == bodies[1], "reports differ");
    Ok(format!("{} bytes, identical", bodies[0].len()))
}

/// A uniformly random `n`-cycle.
fn random_cycle<R: rand::Rng>(rng: &mut R, n: usize) -> Bisection {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut perm = vec![0; n];
    for i in 0..n {
        perm[order[i]] = order[(i + 1) % n];
    }
    Bisection::new(perm).expect("a cycle is a permutation")
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("Fell axioms and negative controls", axiom_suite),
        ("saturation gives regularity", regularity),
        ("diagonal pair kernel", diagonal_kernel),
        ("conditional expectation contract", expectation_contract),
        ("four-point example", fourpoint),
        ("unitary normalizers are spatial", unitary_normalizers),
        ("cocycle identity", cocycle_identity),
        ("slices of self-adjoint bisections", slices),
        ("A-dynamical generation", generation),
        ("bridge round trip", bridge),
        ("CLI determinism", determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (k, (title, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let ms = t0.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {title} ({detail}) [{ms} ms]", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {title}: {why} [{ms} ms]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.2} s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
