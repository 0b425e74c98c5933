//! Problem-file schema. Everything here is validated before any numeric work.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use transport_core::codec::{jet_from_json, problem_from_json};
use transport_core::flow::SplitOrder;
use transport_core::{Field, Jet, ProblemData, SolverConfig};

use crate::output::CliError;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u64,
    #[serde(default = "real_field")]
    field: Field,
    problem: Option<Value>,
    sampler: Option<SamplerSpec>,
    solver: Option<SolverConfig>,
    grid: Option<RawGrid>,
    heat: Option<RawHeat>,
    wkb: Option<RawWkb>,
    estimates: Option<EstimateSpec>,
}

fn real_field() -> Field {
    Field::Real
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    /// Trajectories leaving this ball about the source are reported.
    pub region_radius: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    points: Vec<Vec<f64>>,
    #[serde(default)]
    config: RawFlowConfig,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlowConfig {
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    tail_tol: Option<f64>,
    max_horizon: Option<f64>,
    min_horizon: Option<f64>,
    split_order: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeat {
    potential: Value,
    terms: usize,
    order: usize,
    #[serde(default)]
    points: Vec<Vec<f64>>,
    nodes: Option<usize>,
    quad_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWkb {
    potential: Value,
    level: u32,
    terms: usize,
    normalization: Option<f64>,
}

/// `A(t) = a0 + perturbation · exp(decay_rate · t)` on `[−horizon, 0]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub a0: Vec<Vec<f64>>,
    pub perturbation: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub decay_rate: f64,
    pub eps: f64,
    #[serde(default)]
    pub t0: f64,
    pub horizon: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    50
}

pub enum AnyProblem {
    Real(ProblemData<f64>),
    Complex(ProblemData<Complex64>),
}

impl AnyProblem {
    pub fn n(&self) -> usize {
        match self {
            AnyProblem::Real(p) => p.n(),
            AnyProblem::Complex(p) => p.n(),
        }
    }
}

/// Flow settings from the file; unset entries keep the library defaults.
#[derive(Clone, Debug, Default)]
pub struct FlowOverrides {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub tail_tol: Option<f64>,
    pub max_horizon: Option<f64>,
    pub min_horizon: Option<f64>,
    pub split_order: Option<SplitOrder>,
}

pub struct GridSpec {
    pub points: Vec<Vec<f64>>,
    pub config: FlowOverrides,
}

pub struct HeatSpec {
    pub potential: Jet<f64>,
    pub terms: usize,
    pub order: usize,
    pub points: Vec<Vec<f64>>,
    pub nodes: usize,
    pub quad_tol: f64,
}

pub struct WkbSpec {
    pub potential: Jet<f64>,
    pub level: u32,
    pub terms: usize,
    pub normalization: f64,
}

pub struct ProblemFile {
    pub field: Field,
    pub problem: Option<AnyProblem>,
    pub sampler: SamplerSpec,
    pub solver: SolverConfig,
    pub grid: Option<GridSpec>,
    pub heat: Option<HeatSpec>,
    pub wkb: Option<WkbSpec>,
    pub estimates: Option<EstimateSpec>,
    /// Hex SHA-256 of the raw input bytes.
    pub sha256: String,
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        Self::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let sha256 = hex::encode(Sha256::digest(bytes));
        let mut de = serde_json::Deserializer::from_slice(bytes);
        let raw: RawFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::validation(e.into_inner().to_string())
            } else {
                CliError::validation(format!("{path}: {}", e.into_inner()))
            }
        })?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(CliError::validation(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                raw.schema_version
            )));
        }
        let problem = raw
            .problem
            .as_ref()
            .map(|v| match raw.field {
                Field::Real => problem_from_json(v, "problem").map(AnyProblem::Real),
                Field::Complex => problem_from_json(v, "problem").map(AnyProblem::Complex),
            })
            .transpose()?;
        let sampler = raw.sampler.unwrap_or_default();
        if let Some(r) = sampler.region_radius {
            positive(r, "sampler.region_radius")?;
        }
        let grid = raw.grid.map(grid_spec).transpose()?;
        if let (Some(g), Some(p)) = (&grid, &problem) {
            check_points(&g.points, p.n(), "grid.points")?;
        }
        let heat = raw.heat.map(heat_spec).transpose()?;
        let wkb = raw.wkb.map(wkb_spec).transpose()?;
        if let Some(e) = &raw.estimates {
            check_estimates(e)?;
        }
        Ok(ProblemFile {
            field: raw.field,
            problem,
            sampler,
            solver: raw.solver.unwrap_or_default(),
            grid,
            heat,
            wkb,
            estimates: raw.estimates,
            sha256,
        })
    }
}

fn positive(x: f64, at: &str) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{at}: must be positive, found {x}")))
    }
}

fn check_points(points: &[Vec<f64>], n: usize, at: &str) -> Result<(), CliError> {
    for (i, y) in points.iter().enumerate() {
        if y.len() != n {
            return Err(CliError::validation(format!(
                "{at}[{i}]: expected {n} coordinates, found {}",
                y.len()
            )));
        }
    }
    Ok(())
}

fn grid_spec(raw: RawGrid) -> Result<GridSpec, CliError> {
    let c = raw.config;
    for (x, at) in [
        (c.rel_tol, "grid.config.rel_tol"),
        (c.abs_tol, "grid.config.abs_tol"),
        (c.tail_tol, "grid.config.tail_tol"),
        (c.max_horizon, "grid.config.max_horizon"),
        (c.min_horizon, "grid.config.min_horizon"),
    ] {
        if let Some(x) = x {
            positive(x, at)?;
        }
    }
    let split_order = c
        .split_order
        .map(|v| match &v {
            Value::String(s) if s == "auto" => Ok(SplitOrder::Auto),
            Value::Number(k) if k.as_u64().is_some() => Ok(SplitOrder::Fixed(k.as_u64().unwrap() as usize)),
            other => Err(CliError::validation(format!(
                "grid.config.split_order: expected \"auto\" or a non-negative integer, found {other}"
            ))),
        })
        .transpose()?;
    Ok(GridSpec {
        points: raw.points,
        config: FlowOverrides {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            tail_tol: c.tail_tol,
            max_horizon: c.max_horizon,
            min_horizon: c.min_horizon,
            split_order,
        },
    })
}

fn heat_spec(raw: RawHeat) -> Result<HeatSpec, CliError> {
    let potential: Jet<f64> = jet_from_json(&raw.potential, "heat.potential")?;
    check_points(&raw.points, potential.n(), "heat.points")?;
    let quad_tol = raw.quad_tol.unwrap_or(1e-10);
    positive(quad_tol, "heat.quad_tol")?;
    let nodes = raw.nodes.unwrap_or(16);
    if nodes == 0 {
        return Err(CliError::validation("heat.nodes: must be positive"));
    }
    Ok(HeatSpec {
        potential,
        terms: raw.terms,
        order: raw.order,
        points: raw.points,
        nodes,
        quad_tol,
    })
}

fn wkb_spec(raw: RawWkb) -> Result<WkbSpec, CliError> {
    let potential: Jet<f64> = jet_from_json(&raw.potential, "wkb.potential")?;
    let normalization = raw.normalization.unwrap_or(1.0);
    if normalization == 0.0 || !normalization.is_finite() {
        return Err(CliError::validation("wkb.normalization: must be finite and nonzero"));
    }
    Ok(WkbSpec {
        potential,
        level: raw.level,
        terms: raw.terms,
        normalization,
    })
}

/// Square matrix from rows.
pub fn matrix(rows: &[Vec<f64>], at: &str) -> Result<DMatrix<f64>, CliError> {
    let k = rows.len();
    if k == 0 {
        return Err(CliError::validation(format!("{at}: empty matrix")));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != k {
            return Err(CliError::validation(format!(
                "{at}[{i}]: expected {k} entries, found {}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn check_estimates(e: &EstimateSpec) -> Result<(), CliError> {
    let a0 = matrix(&e.a0, "estimates.a0")?;
    if let Some(b) = &e.perturbation {
        let b = matrix(b, "estimates.perturbation")?;
        if b.nrows() != a0.nrows() {
            return Err(CliError::validation(format!(
                "estimates.perturbation: expected a {0}x{0} matrix",
                a0.nrows()
            )));
        }
    }
    positive(e.eps, "estimates.eps")?;
    positive(e.horizon, "estimates.horizon")?;
    if e.t0 > 0.0 {
        return Err(CliError::validation(format!(
            "estimates.t0: must be non-positive, found {}",
            e.t0
        )));
    }
    if e.samples < 2 {
        return Err(CliError::validation("estimates.samples: need at least 2"));
    }
    Ok(())
}
