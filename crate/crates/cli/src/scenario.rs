//! Scenario configuration: a single structured file describing the basis or
//! structure to load, the scalar mode, truncation bounds, grids and the
//! suites to run. Rationals are written as `p/q` strings so exact mode never
//! touches floats.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use bvflow_core::gl11::{sample_gl11, Gl11Structure, Nilpotency};
use bvflow_core::{Endomorphism, FreeModel, GradedBasis, GradedPoly, HbarSeries, Monomial, Scalar};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gl11: Option<FixtureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interaction: Option<Vec<TermLiteral>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_truncation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSpec {
    pub degrees: Vec<i32>,
    pub omega: Vec<Vec<Value>>,
}

/// Structure fixture: `F` is derived as the Euler endomorphism and the
/// structure is validated on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub degrees: Vec<i32>,
    pub omega: Vec<Vec<Value>>,
    pub q: Vec<Vec<Value>>,
    pub qbar: Vec<Vec<Value>>,
    pub h: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub dim: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nilpotent: Option<bool>,
}

/// Polynomial literal: coefficient, exponent vector, optional series power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermLiteral {
    pub coeff: Value,
    pub exponents: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar_power: Option<usize>,
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scalar: Option<String>,
    pub max_degree: Option<usize>,
    pub hbar_order: Option<usize>,
    pub grid: Option<String>,
    pub fd_step: Option<String>,
    pub steps: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub fixture: Option<String>,
    pub allow_truncation: bool,
}

pub fn parse_scalar_value<S: Scalar>(v: &Value) -> Result<S, CliError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => {
            return Err(CliError::parse(format!(
                "cannot interpret {other} as a scalar literal"
            )))
        }
    };
    S::parse(&text).map_err(|e| CliError::parse(format!("bad scalar literal `{text}`: {e}")))
}

fn parse_matrix<S: Scalar>(rows: &[Vec<Value>]) -> Result<Vec<Vec<S>>, CliError> {
    rows.iter()
        .map(|r| r.iter().map(parse_scalar_value::<S>).collect())
        .collect()
}

/// A scenario resolved against one scalar mode.
pub struct Resolved<S: Scalar> {
    pub model: FreeModel<S>,
    pub max_degree: usize,
    pub hbar_order: usize,
    pub grid: Vec<S>,
    pub fd_step: S,
    pub steps: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub samples: usize,
    pub interaction: Option<HbarSeries<S>>,
    pub checks: Vec<String>,
}

pub const KNOWN_CHECKS: &[&str] = &[
    "identities",
    "gl11",
    "free-flow",
    "extended",
    "perturbation",
    "reconstruct",
];

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read scenario {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("cannot parse scenario {}: {e}", path.display())))
}

pub fn load_fixture_file(path: &Path) -> Result<FixtureSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read fixture {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("cannot parse fixture {}: {e}", path.display())))
}

pub fn apply_overrides(file: &mut ScenarioFile, o: &Overrides) {
    if let Some(v) = &o.scalar {
        file.scalar = Some(v.clone());
    }
    if let Some(v) = o.max_degree {
        file.max_degree = Some(v);
    }
    if let Some(v) = o.hbar_order {
        file.hbar_order = Some(v);
    }
    if let Some(v) = &o.grid {
        file.grid = Some(
            v.split(',')
                .map(|s| Value::String(s.trim().to_string()))
                .collect(),
        );
    }
    if let Some(v) = &o.fd_step {
        file.fd_step = Some(Value::String(v.clone()));
    }
    if let Some(v) = o.steps {
        file.steps = Some(v);
    }
    if let Some(v) = o.tolerance {
        file.tolerance = Some(v);
    }
    if let Some(v) = o.seed {
        file.seed = Some(v);
    }
    if let Some(v) = &o.output {
        file.output = Some(v.clone());
    }
    if let Some(v) = &o.fixture {
        file.fixture = Some(v.clone());
    }
    if o.allow_truncation {
        file.allow_truncation = Some(true);
    }
}

fn build_basis<S: Scalar>(spec: &BasisSpec) -> Result<Arc<GradedBasis<S>>, CliError> {
    let omega = parse_matrix::<S>(&spec.omega)?;
    GradedBasis::new(spec.degrees.clone(), omega)
        .map_err(|e| CliError::parse(format!("invalid basis: {e}")))
}

pub fn build_structure<S: Scalar>(spec: &FixtureSpec) -> Result<Gl11Structure<S>, CliError> {
    let basis = build_basis::<S>(&BasisSpec {
        degrees: spec.degrees.clone(),
        omega: spec.omega.clone(),
    })?;
    let q = Endomorphism::new(basis.clone(), 1, parse_matrix::<S>(&spec.q)?)
        .map_err(|e| CliError::parse(format!("invalid Q: {e}")))?;
    let qbar = Endomorphism::new(basis.clone(), -1, parse_matrix::<S>(&spec.qbar)?)
        .map_err(|e| CliError::parse(format!("invalid Qbar: {e}")))?;
    let h = Endomorphism::new(basis.clone(), 0, parse_matrix::<S>(&spec.h)?)
        .map_err(|e| CliError::parse(format!("invalid H: {e}")))?;
    let f = Endomorphism::euler(basis);
    let structure = Gl11Structure::new(q, qbar, h, f)
        .map_err(|e| CliError::parse(format!("invalid structure: {e}")))?;
    let records = bvflow_core::gl11::validate_gl11(&structure)
        .map_err(|e| CliError::parse(format!("cannot validate structure: {e}")))?;
    if let Some(bad) = records.iter().find(|r| !r.pass) {
        return Err(CliError::parse(format!(
            "fixture violates the structure axiom `{}` (residual {})",
            bad.name, bad.residual
        )));
    }
    Ok(structure)
}

pub fn resolve<S: Scalar>(
    file: &ScenarioFile,
    scenario_dir: &Path,
) -> Result<Resolved<S>, CliError> {
    let structure = if let Some(inline) = &file.gl11 {
        build_structure::<S>(inline)?
    } else if let Some(path) = &file.fixture {
        let fixture_path = scenario_dir.join(path);
        let resolved_path = if fixture_path.exists() {
            fixture_path
        } else {
            Path::new(path).to_path_buf()
        };
        build_structure::<S>(&load_fixture_file(&resolved_path)?)?
    } else if let Some(sampler) = &file.sampler {
        let nil = match sampler.nilpotent {
            Some(true) => Nilpotency::Nilpotent,
            Some(false) => Nilpotency::NonNilpotent,
            None => Nilpotency::Any,
        };
        sample_gl11::<S>(sampler.dim, sampler.seed, nil, 4000)
            .map_err(|e| CliError::parse(format!("sampler failed: {e}")))?
    } else if let Some(basis) = &file.basis {
        Gl11Structure::zero(build_basis::<S>(basis)?)
    } else {
        return Err(CliError::parse(
            "scenario needs one of `gl11`, `fixture`, `sampler` or `basis`".into(),
        ));
    };
    let model = FreeModel::new(structure)
        .map_err(|e| CliError::parse(format!("invalid free model: {e}")))?;

    let grid: Vec<S> = match &file.grid {
        Some(values) => values
            .iter()
            .map(parse_scalar_value::<S>)
            .collect::<Result<_, _>>()?,
        None => vec![S::zero(), S::from_ratio(1, 2), S::one()],
    };
    if grid.len() < 2 {
        return Err(CliError::parse("grid needs at least two points".into()));
    }
    for w in grid.windows(2) {
        if w[1].sub(&w[0]).to_f64() <= 0.0 {
            return Err(CliError::parse("grid must be strictly increasing".into()));
        }
    }
    let fd_step = match &file.fd_step {
        Some(v) => parse_scalar_value::<S>(v)?,
        None => S::from_ratio(1, 10_000),
    };
    if fd_step.to_f64() <= 0.0 {
        return Err(CliError::parse("fd_step must be positive".into()));
    }
    let tolerance = file.tolerance.unwrap_or(if S::EXACT {
        0.0
    } else {
        bvflow_core::tol::STATIC_F64
    });
    if tolerance < 0.0 {
        return Err(CliError::parse("tolerance must be non-negative".into()));
    }
    let checks = file
        .checks
        .clone()
        .unwrap_or_else(|| vec!["identities".into(), "gl11".into(), "free-flow".into()]);
    for c in &checks {
        if !KNOWN_CHECKS.contains(&c.as_str()) {
            return Err(CliError::parse(format!(
                "unknown check `{c}`; known: {KNOWN_CHECKS:?}"
            )));
        }
    }
    let max_degree = file.max_degree.unwrap_or(bvflow_core::DEFAULT_MAX_DEGREE);
    let hbar_order = file.hbar_order.unwrap_or(bvflow_core::DEFAULT_HBAR_ORDER);
    let interaction = match &file.interaction {
        Some(terms) => Some(build_series::<S>(
            terms,
            model.basis().clone(),
            hbar_order,
        )?),
        None => None,
    };
    Ok(Resolved {
        model,
        max_degree,
        hbar_order,
        grid,
        fd_step,
        steps: file.steps.unwrap_or(100),
        tolerance,
        seed: file.seed.unwrap_or(0),
        samples: file.samples.unwrap_or(25),
        interaction,
        checks,
    })
}

fn build_series<S: Scalar>(
    terms: &[TermLiteral],
    basis: Arc<GradedBasis<S>>,
    order: usize,
) -> Result<HbarSeries<S>, CliError> {
    let mut series = HbarSeries::zero(basis.clone(), order);
    for term in terms {
        let power = term.hbar_power.unwrap_or(0);
        if power > order {
            return Err(CliError::parse(format!(
                "term power {power} exceeds the series order {order}"
            )));
        }
        if term.exponents.len() != basis.dim() {
            return Err(CliError::parse(format!(
                "term exponent count {} does not match dimension {}",
                term.exponents.len(),
                basis.dim()
            )));
        }
        let coeff = parse_scalar_value::<S>(&term.coeff)?;
        let poly = GradedPoly::from_terms(
            basis.clone(),
            [(Monomial::from_exponents(term.exponents.clone()), coeff)],
        )
        .map_err(|e| CliError::parse(format!("bad polynomial term: {e}")))?;
        let updated = series
            .coefficient(power)
            .add(&poly)
            .map_err(|e| CliError::parse(format!("bad polynomial term: {e}")))?;
        series.set_coefficient(power, updated);
    }
    Ok(series)
}
