//! The `fellkit` command line.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage or parse errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{
    a_dynamical_generation_check, check_unitary_normalizer_theorem, cocycle_identity_residual, extract_cocycle,
    Cocycle2,
};
use crate::embedding::{bridge_round_trip, is_orientable, phi_from_covariance_group, read_off_pair};
use crate::error::{Error, Result};
use crate::fellbundle::check_fell_axioms;
use crate::io::{matrix_json, preset, Model, PresetParams, Report};
use crate::linalg::{ComplexMatrix, Tolerance};
use crate::random::seeded;
use crate::subalgebra::{classify_pair, is_regular, PairCandidate, PairClass};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fellkit", version, about = "Fell bundles, Cartan pairs and the embedding invariant at desk scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a model file for a preset or re-emit an input model.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Run one verification suite.
    Check {
        kind: CheckKind,
        #[command(flatten)]
        common: Common,
    },
    /// Build Φ from the model's generator, read the pair off it, or run the
    /// full round trip.
    Phi {
        action: PhiAction,
        #[command(flatten)]
        common: Common,
    },
    /// Run every applicable check and emit one combined report.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Axioms,
    Pair,
    Cocycle,
    #[value(name = "theorem-3.13")]
    UnitaryNormalizers,
    Generation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhiAction {
    Build,
    Readoff,
    Roundtrip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// fourpoint, diag-masa, imprimitivity, semidirect or cycle.
    #[arg(long)]
    pub preset: Option<String>,
    /// Model JSON file.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub source: Source,
    /// Number of points (diag-masa, semidirect, cycle).
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated fibre dimensions (imprimitivity).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Fibre dimension (semidirect, cycle).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random samples per sampled check.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, env = "FELLKIT_EPS")]
    pub eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings shared by every check.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub tol: Tolerance,
    pub seed: u64,
    pub samples: usize,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let tol = match self.eps {
            Some(e) => Tolerance::new(e)?,
            None => Tolerance::default(),
        };
        if self.samples == 0 {
            return Err(Error::Parse("--samples must be positive".into()));
        }
        Ok(RunConfig { tol, seed: self.seed, samples: self.samples })
    }

    fn load(&self, tol: Tolerance) -> Result<Model> {
        match (&self.source.preset, &self.source.input) {
            (Some(name), None) => {
                preset(name, &PresetParams { n: self.n, dims: self.dims.clone(), dim: self.dim, seed: self.seed })
            }
            (None, Some(path)) => Model::from_json(&std::fs::read_to_string(path)?, tol),
            _ => Err(Error::Parse("give exactly one of --preset and --input".into())),
        }
    }
}

fn omega_table(w: &Cocycle2) -> BTreeMap<String, Value> {
    w.values()
        .iter()
        .map(|(&(g, h), m)| {
            let v = if m.rows() == 1 { json!([m[(0, 0)].re, m[(0, 0)].im]) } else { matrix_json(m) };
            (format!("({g},{h})"), v)
        })
        .collect()
}

fn arrows_json<'a>(arrows: impl IntoIterator<Item = &'a crate::groupoid::Arrow>) -> Vec<String> {
    arrows.into_iter().map(|g| g.to_string()).collect()
}

fn require_generator(model: &Model) -> Result<&crate::dynamics::CovarianceGroup> {
    model.generator.as_ref().ok_or_else(|| Error::ContractViolation("model has no generator".into()))
}

fn bundle_sample(model: &Model) -> Result<Vec<ComplexMatrix>> {
    let e = &model.bundle;
    let mut sample = Vec::new();
    for g in e.base().arrows() {
        for x in e.fibre_basis(g) {
            sample.push(e.embed(g, &x)?);
        }
        if let Some(f) = e.frame() {
            sample.push(e.embed(g, &f[&g])?);
        }
    }
    Ok(sample)
}

#[derive(Serialize)]
struct AxiomLine {
    axiom: usize,
    name: &'static str,
    pass: bool,
    max_residual: f64,
}

fn check_axioms(model: &Model, cfg: RunConfig) -> Result<Report> {
    let r = check_fell_axioms(&model.bundle, cfg.samples, cfg.tol, &mut seeded(cfg.seed))?;
    let lines: Vec<AxiomLine> = r
        .checks
        .iter()
        .map(|c| AxiomLine { axiom: c.axiom, name: c.name, pass: c.passed, max_residual: c.max_residual })
        .collect();
    let passed = lines.iter().filter(|l| l.pass).count();
    Ok(Report::new(
        "axioms",
        r.all_passed(),
        Some(r.max_residual()),
        json!({ "samples": r.samples, "passed": passed, "total": lines.len(), "axioms": lines }),
    ))
}

fn check_pair(model: &Model, cfg: RunConfig) -> Result<Report> {
    let pair = PairCandidate::from_bundle(&model.bundle);
    let c = classify_pair(&pair, &bundle_sample(model)?, cfg.tol)?;
    let residual = c.expectation.max_residual();
    Ok(Report::new(
        "pair",
        c.class != PairClass::Neither,
        Some(residual),
        json!({
            "classification": c.class,
            "fibre_dims": model.bundle.fibre_dims(),
            "evidence": c,
        }),
    ))
}

fn check_cocycle(model: &Model, cfg: RunConfig) -> Result<Report> {
    let (w, source) = match (&model.generator, model.bundle.twist()) {
        (Some(gs), _) => (extract_cocycle(&gs.power_assignment(), cfg.tol)?, "generator"),
        (None, Some(t)) => (Cocycle2::new(model.bundle.points(), t.clone(), cfg.tol)?, "twist"),
        (None, None) => (Cocycle2::trivial(model.bundle.points()), "trivial"),
    };
    let residual = cocycle_identity_residual(&w)?;
    Ok(Report::new(
        "cocycle",
        cfg.tol.accepts(residual),
        Some(residual),
        json!({ "source": source, "trivial": w.is_trivial(cfg.tol), "omega": omega_table(&w) }),
    ))
}

fn check_unitary_normalizers(model: &Model, cfg: RunConfig) -> Result<Report> {
    let r = check_unitary_normalizer_theorem(&model.bundle, cfg.samples, cfg.tol, &mut seeded(cfg.seed))?;
    Ok(Report::new("theorem-3.13", r.passed(), Some(r.spatial_max_residual), r))
}

fn check_generation(model: &Model, cfg: RunConfig) -> Result<Report> {
    let gs = require_generator(model)?;
    let e = &model.bundle;
    let r = a_dynamical_generation_check(gs, &e.diagonal_algebra(), &e.enveloping_algebra(), cfg.tol)?;
    let note = if r.minimal_flow { "minimal flow" } else { "flow is not minimal; generation is not expected" };
    Ok(Report::new(
        "generation",
        r.generated,
        None,
        json!({ "generator": gs.generator().one_line(), "note": note, "result": r }),
    ))
}

fn phi_build(model: &Model, cfg: RunConfig) -> Result<Report> {
    let gs = require_generator(model)?;
    let phi = phi_from_covariance_group(gs)?;
    let powers = gs.powers();
    let orientable = is_orientable(&phi, cfg.tol);
    let support = phi.support(cfg.tol);
    let mut u_supports = BTreeMap::new();
    for (m, s) in powers.iter().enumerate().take(2) {
        let name = if m == 0 { "U_g".to_string() } else { format!("U_g^{}", m + 1) };
        u_supports.insert(name, arrows_json(&s.support()));
    }
    Ok(Report::new(
        "phi-build",
        orientable,
        None,
        json!({
            "generator": gs.generator().one_line(),
            "fibre_dims": phi.fibre_dims(),
            "phi": matrix_json(phi.matrix()),
            "nonzero_blocks": support.len(),
            "support": arrows_json(&support),
            "orientable": orientable,
            "unitary_supports": u_supports,
        }),
    ))
}

fn phi_readoff(model: &Model, cfg: RunConfig) -> Result<Report> {
    let gs = require_generator(model)?;
    let phi = phi_from_covariance_group(gs)?;
    let r = read_off_pair(&phi, cfg.tol)?;
    let pair = r.pair();
    let regular = is_regular(&pair, &r.slice_sample(), cfg.tol)?;
    let (identity, table) = match &r.omega {
        Some(w) => (Some(cocycle_identity_residual(w)?), Some(omega_table(w))),
        None => (None, None),
    };
    let pass = regular && identity.is_none_or(|res| cfg.tol.accepts(res));
    Ok(Report::new(
        "phi-readoff",
        pass,
        identity,
        json!({
            "a_block_dims": r.a.block_dims(),
            "b_dim": r.b.dim(),
            "kernel_dim": r.p.kernel_basis().len(),
            "normalizers": r.normalizer_sample.len(),
            "regular": regular,
            "omega": table,
            "note": "orientability is full rank of every block",
        }),
    ))
}

fn phi_roundtrip(model: &Model, cfg: RunConfig) -> Result<Report> {
    let gs = require_generator(model)?;
    let r = bridge_round_trip(gs, cfg.samples, cfg.tol, &mut seeded(cfg.seed))?;
    let residual = r.omega_residual.max(r.expectation_residual).max(r.sigma_residual);
    Ok(Report::new("phi-roundtrip", r.passed, Some(residual), r))
}

type CheckFn = fn(&Model, RunConfig) -> Result<Report>;

fn run_one(name: &str, f: CheckFn, model: &Model, cfg: RunConfig) -> Report {
    f(model, cfg).unwrap_or_else(|e| Report::failure(name, &e))
}

fn check_fn(kind: CheckKind) -> (&'static str, CheckFn) {
    match kind {
        CheckKind::Axioms => ("axioms", check_axioms),
        CheckKind::Pair => ("pair", check_pair),
        CheckKind::Cocycle => ("cocycle", check_cocycle),
        CheckKind::UnitaryNormalizers => ("theorem-3.13", check_unitary_normalizers),
        CheckKind::Generation => ("generation", check_generation),
    }
}

fn phi_fn(action: PhiAction) -> (&'static str, CheckFn) {
    match action {
        PhiAction::Build => ("phi-build", phi_build),
        PhiAction::Readoff => ("phi-readoff", phi_readoff),
        PhiAction::Roundtrip => ("phi-roundtrip", phi_roundtrip),
    }
}

/// Every check that applies to the model, in a fixed order.
pub fn full_report(model: &Model, cfg: RunConfig) -> Vec<Report> {
    let mut out = Vec::new();
    for kind in [CheckKind::Axioms, CheckKind::Pair, CheckKind::Cocycle, CheckKind::UnitaryNormalizers] {
        let (name, f) = check_fn(kind);
        out.push(run_one(name, f, model, cfg));
    }
    if model.generator.is_some() {
        let (name, f) = check_fn(CheckKind::Generation);
        out.push(run_one(name, f, model, cfg));
        for action in [PhiAction::Build, PhiAction::Readoff, PhiAction::Roundtrip] {
            let (name, f) = phi_fn(action);
            out.push(run_one(name, f, model, cfg));
        }
    }
    out
}

fn render_text(reports: &[Report]) -> String {
    let mut s = String::new();
    for r in reports {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        match r.residual {
            Some(res) => s.push_str(&format!("{}: {} (residual {:.3e})\n", r.check, verdict, res)),
            None => s.push_str(&format!("{}: {}\n", r.check, verdict)),
        }
        if let Value::Object(map) = &r.details {
            for (k, v) in map {
                s.push_str(&format!("  {k}: {v}\n"));
            }
        }
    }
    s
}

fn emit(common: &Common, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn render(reports: &[Report], single: bool, format: Format) -> String {
    match format {
        Format::Text => render_text(reports),
        Format::Json if single => serde_json::to_string_pretty(&reports[0]).expect("reports serialize") + "\n",
        Format::Json => {
            let all = reports.iter().all(|r| r.pass);
            serde_json::to_string_pretty(&json!({ "pass": all, "reports": reports })).expect("reports serialize") + "\n"
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return if code == 0 { EXIT_PASS } else { EXIT_USAGE };
        }
    };
    let common = match &cli.command {
        Command::Generate { common } | Command::Report { common } => common,
        Command::Check { common, .. } | Command::Phi { common, .. } => common,
    };
    let loaded = common.config().and_then(|cfg| common.load(cfg.tol).map(|m| (cfg, m)));
    let (cfg, model) = match loaded {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "fellkit: {e}");
            return EXIT_USAGE;
        }
    };
    let (reports, single) = match cli.command {
        Command::Generate { .. } => {
            let body = model.to_json() + "\n";
            return match emit(common, &body, stdout) {
                Ok(()) => EXIT_PASS,
                Err(e) => {
                    let _ = writeln!(stderr, "fellkit: {e}");
                    EXIT_USAGE
                }
            };
        }
        Command::Check { kind, .. } => {
            let (name, f) = check_fn(kind);
            (vec![run_one(name, f, &model, cfg)], true)
        }
        Command::Phi { action, .. } => {
            let (name, f) = phi_fn(action);
            (vec![run_one(name, f, &model, cfg)], true)
        }
        Command::Report { .. } => (full_report(&model, cfg), false),
    };
    if let Err(e) = emit(common, &render(&reports, single, common.format), stdout) {
        let _ = writeln!(stderr, "fellkit: {e}");
        return EXIT_USAGE;
    }
    for r in reports.iter().filter(|r| !r.pass) {
        if let Some(Value::String(msg)) = r.details.get("error") {
            let _ = writeln!(stderr, "fellkit: {}: {msg}", r.check);
        }
    }
    if reports.iter().all(|r| r.pass) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
