//! JSON model files, presets and check reports.
//!
//! Complex numbers are `[re, im]`, matrices are row-major nested arrays, and
//! arrows are written 1-based as `"(x,y)"`; twist keys are `"((x,y),(y,z))"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CovarianceGroup, Holonomy};
use crate::error::{Error, Result};
use crate::fellbundle::{
    build_imprimitivity_bundle, build_semidirect_bundle, identity_frame, random_star_frame, CStarBundle,
    FellBundleModel, Frame, Twist,
};
use crate::groupoid::{Arrow, Bisection};
use crate::linalg::{ComplexMatrix, Tolerance, C64, ONE};
use crate::random::seeded;

/// Dense matrix as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<C64>>);

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        Self(m.to_rows())
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        ComplexMatrix::from_rows(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TwistValue {
    Scalar(C64),
    Matrix(MatrixJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorJson {
    /// One-line notation, 1-based.
    pub permutation: Vec<usize>,
    pub fibre_maps: Vec<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub points: usize,
    pub fibre_dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<BTreeMap<String, MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<BTreeMap<String, TwistValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorJson>,
}

/// A bundle together with an optional covariance generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub bundle: FellBundleModel,
    pub generator: Option<CovarianceGroup>,
}

fn parse_pair_key(key: &str) -> Result<(Arrow, Arrow)> {
    let inner = key
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("twist key {key:?} must look like ((x,y),(y,z))")))?;
    let split =
        inner.find("),").ok_or_else(|| Error::Parse(format!("twist key {key:?} must look like ((x,y),(y,z))")))?;
    Ok((Arrow::parse(&inner[..=split])?, Arrow::parse(&inner[split + 2..])?))
}

fn pair_key(g: Arrow, h: Arrow) -> String {
    format!("({g},{h})")
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialize")
    }

    pub fn into_model(self, tol: Tolerance) -> Result<Model> {
        if self.points != self.fibre_dims.len() {
            return Err(Error::Parse(format!(
                "points = {} but {} fibre dimensions given",
                self.points,
                self.fibre_dims.len()
            )));
        }
        let frame = self
            .frame
            .map(|f| f.into_iter().map(|(k, m)| Ok((Arrow::parse(&k)?, m.to_matrix()?))).collect::<Result<Frame>>())
            .transpose()?;
        let twist = self
            .twist
            .map(|t| {
                t.into_iter()
                    .map(|(k, v)| {
                        let (g, h) = parse_pair_key(&k)?;
                        let dim = self.fibre_dims.get(g.range).copied().unwrap_or(1);
                        let m = match v {
                            TwistValue::Scalar(z) => ComplexMatrix::identity(dim).scale(z),
                            TwistValue::Matrix(m) => m.to_matrix()?,
                        };
                        Ok(((g, h), m))
                    })
                    .collect::<Result<Twist>>()
            })
            .transpose()?;
        let bundle = match (frame, twist) {
            (None, None) => build_imprimitivity_bundle(&self.fibre_dims)?,
            (frame, twist) => {
                let e0 = CStarBundle::new(self.fibre_dims.clone())?;
                let dim = e0.constant_dim().ok_or_else(|| {
                    Error::LocalTriviality(format!("fibre dimensions {:?} are not constant", self.fibre_dims))
                })?;
                let frame = frame.unwrap_or_else(|| identity_frame(self.points, dim));
                build_semidirect_bundle(&e0, frame, twist, tol)?
            }
        };
        let generator = self
            .generator
            .map(|g| {
                let maps = g.fibre_maps.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
                CovarianceGroup::from_fibre_maps(Bisection::from_one_line(&g.permutation)?, maps, &self.fibre_dims, tol)
            })
            .transpose()?;
        Ok(Model { bundle, generator })
    }
}

impl Model {
    pub fn to_file(&self) -> ModelFile {
        let b = &self.bundle;
        ModelFile {
            points: b.points(),
            fibre_dims: b.fibre_dims().to_vec(),
            frame: b.frame().map(|f| f.iter().map(|(g, m)| (g.to_string(), MatrixJson::from(m))).collect()),
            twist: b.twist().map(|t| {
                t.iter()
                    .map(|(&(g, h), m)| {
                        let v =
                            if m.rows() == 1 { TwistValue::Scalar(m[(0, 0)]) } else { TwistValue::Matrix(m.into()) };
                        (pair_key(g, h), v)
                    })
                    .collect()
            }),
            generator: self.generator.as_ref().map(|gs| GeneratorJson {
                permutation: gs.generator().one_line(),
                fibre_maps: gs.sigma().fibre_maps().iter().map(MatrixJson::from).collect(),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }

    pub fn from_json(text: &str, tol: Tolerance) -> Result<Self> {
        ModelFile::from_json(text)?.into_model(tol)
    }
}

pub const PRESETS: [&str; 5] = ["fourpoint", "diag-masa", "imprimitivity", "semidirect", "cycle"];

/// Preset parameters; unused fields are ignored by a given preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PresetParams {
    pub n: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub dim: Option<usize>,
    pub seed: u64,
}

fn unit_generator(points: usize, dim: usize) -> CovarianceGroup {
    let maps = vec![ComplexMatrix::identity(dim); points];
    CovarianceGroup::from_fibre_maps(Bisection::shift(points), maps, &vec![dim; points], Tolerance::default())
        .expect("identity maps are unitary")
}

/// Builds a named preset.
///
/// * `fourpoint`: 4 points, 1-dimensional fibres, the 4-cycle
///   `1→2→3→4→1` with every fibre map equal to 1.
/// * `diag-masa`: `n` points (default 4) with 1-dimensional fibres.
/// * `imprimitivity`: fibre dimensions `dims` (default 2,1,3).
/// * `semidirect`: `n` points (default 4) of dimension `dim` (default 2)
///   with a random frame.
/// * `cycle`: `n` points (default 3) of dimension `dim` (default 2) with a
///   random cyclic generator of trivial holonomy.
pub fn preset(name: &str, p: &PresetParams) -> Result<Model> {
    let mut rng = seeded(p.seed);
    let tol = Tolerance::default();
    match name {
        "fourpoint" => {
            let maps = vec![ComplexMatrix::scalar(ONE); 4];
            let gs = CovarianceGroup::from_fibre_maps(Bisection::from_one_line(&[2, 3, 4, 1])?, maps, &[1; 4], tol)?;
            Ok(Model { bundle: build_imprimitivity_bundle(&[1; 4])?, generator: Some(gs) })
        }
        "diag-masa" => {
            let n = p.n.unwrap_or(4);
            Ok(Model {
                bundle: build_imprimitivity_bundle(&vec![1; n])?,
                generator: (n > 0).then(|| unit_generator(n, 1)),
            })
        }
        "imprimitivity" => {
            let dims = p.dims.clone().unwrap_or_else(|| vec![2, 1, 3]);
            let bundle = build_imprimitivity_bundle(&dims)?;
            let generator = bundle.constant_dim().map(|d| unit_generator(dims.len(), d));
            Ok(Model { bundle, generator })
        }
        "semidirect" => {
            let (n, dim) = (p.n.unwrap_or(4), p.dim.unwrap_or(2));
            let e0 = CStarBundle::constant(n, dim)?;
            let frame = random_star_frame(&mut rng, n, dim);
            let bundle = build_semidirect_bundle(&e0, frame, None, tol)?;
            let gs = CovarianceGroup::random(&mut rng, Bisection::shift(n), dim, Holonomy::Trivial);
            Ok(Model { bundle, generator: Some(gs) })
        }
        "cycle" => {
            let (n, dim) = (p.n.unwrap_or(3), p.dim.unwrap_or(2));
            let gs = CovarianceGroup::random(&mut rng, Bisection::shift(n), dim, Holonomy::Trivial);
            Ok(Model { bundle: build_imprimitivity_bundle(&vec![dim; n])?, generator: Some(gs) })
        }
        other => Err(Error::Parse(format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")))),
    }
}

/// Outcome of one check: `{check, pass, residual, details}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub pass: bool,
    pub residual: Option<f64>,
    pub details: serde_json::Value,
}

impl Report {
    pub fn new(check: impl Into<String>, pass: bool, residual: Option<f64>, details: impl Serialize) -> Self {
        Self {
            check: check.into(),
            pass,
            residual: residual.filter(|r| r.is_finite()),
            details: serde_json::to_value(details).expect("report details serialize"),
        }
    }

    pub fn failure(check: impl Into<String>, error: &Error) -> Self {
        Self {
            check: check.into(),
            pass: false,
            residual: None,
            details: serde_json::json!({ "error": error.to_string() }),
        }
    }
}

pub fn matrix_json(m: &ComplexMatrix) -> serde_json::Value {
    serde_json::to_value(MatrixJson::from(m)).expect("matrices serialize")
}
