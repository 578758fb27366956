//! TOML sweep configuration: circuit template, swept parameter and solver settings.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitSpec, CouplingElement, CouplingKind, GroundChoice, QubitParams};
use crate::error::{Error, Result};
use crate::spectrum::SolverOptions;
use crate::swt::DEFAULT_HYBRIDIZATION_THRESHOLD;

pub const DEFAULT_N_MAX: usize = 6;
pub const DEFAULT_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Every coupling element's γ.
    Gamma,
    /// α of both qubits.
    Alpha,
    /// β of both qubits.
    Beta,
    /// `E_J/E_C` of both qubits.
    R,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gamma => "gamma",
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::R => "r",
        }
    }

    /// Circuit at one sweep value.
    pub fn apply(self, template: &CircuitSpec, value: f64) -> CircuitSpec {
        let mut spec = template.clone();
        match self {
            Self::Gamma => spec.couplings.iter_mut().for_each(|c| c.gamma = value),
            Self::Alpha => {
                spec.qubit1.alpha = value;
                spec.qubit2.alpha = value;
            }
            Self::Beta => {
                spec.qubit1.beta = value;
                spec.qubit2.beta = value;
            }
            Self::R => {
                spec.qubit1.r = value;
                spec.qubit2.r = value;
            }
        }
        spec
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub circuit: CircuitSpec,
    pub variable: SweepVariable,
    /// Non-empty, strictly increasing.
    pub values: Vec<f64>,
    pub n_max: usize,
    pub k: usize,
    pub hybridization_threshold: f64,
    pub tolerance: f64,
    /// Report energies in units of qubit 1's `E_C` instead of GHz.
    pub dimensionless: bool,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQubit {
    alpha: f64,
    #[serde(default)]
    beta: f64,
    r: f64,
    e_c: f64,
    #[serde(default = "default_frustration")]
    frustration: f64,
}

fn default_frustration() -> f64 {
    QubitParams::DEFAULT_FRUSTRATION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrounds {
    qubit1: usize,
    qubit2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    kind: CouplingKind,
    node_a: usize,
    node_b: usize,
    #[serde(default)]
    gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: SweepVariable,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default = "default_n_max")]
    n_max: usize,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_threshold")]
    hybridization_threshold: f64,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default)]
    dimensionless: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_threshold() -> f64 {
    DEFAULT_HYBRIDIZATION_THRESHOLD
}

fn default_tolerance() -> f64 {
    SolverOptions::default().tol
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    qubit1: RawQubit,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit2: Option<RawQubit>,
    grounds: RawGrounds,
    #[serde(default, rename = "coupling")]
    couplings: Vec<RawCoupling>,
    sweep: RawSweep,
}

impl RawQubit {
    fn params(&self) -> QubitParams {
        QubitParams::new(self.alpha, self.beta, self.r, self.e_c).with_frustration(self.frustration)
    }

    fn from_params(p: &QubitParams) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
            r: p.r,
            e_c: p.e_c,
            frustration: p.frustration,
        }
    }
}

fn field(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigField {
        field: field.to_string(),
        message: message.into(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Explicit values, or `points` evenly spaced values from `start` to `stop`.
fn resolve_values(s: &RawSweep) -> Result<Vec<f64>> {
    let grid = s.start.is_some() || s.stop.is_some() || s.points.is_some();
    let values = match (&s.values, grid) {
        (Some(_), true) => {
            return Err(field(
                "sweep.values",
                "give either an explicit list or start/stop/points, not both",
            ))
        }
        (Some(v), false) => v.clone(),
        (None, true) => {
            let start = s.start.ok_or_else(|| field("sweep.start", "missing"))?;
            let stop = s.stop.ok_or_else(|| field("sweep.stop", "missing"))?;
            let points = s.points.ok_or_else(|| field("sweep.points", "missing"))?;
            if points < 1 {
                return Err(field("sweep.points", "must be at least 1"));
            }
            if points == 1 {
                vec![start]
            } else {
                let step = (stop - start) / (points - 1) as f64;
                (0..points)
                    .map(|i| if i + 1 == points { stop } else { start + step * i as f64 })
                    .collect()
            }
        }
        (None, false) => return Err(field("sweep.values", "missing; give values or start/stop/points")),
    };
    if values.is_empty() {
        return Err(field("sweep.values", "must not be empty"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(field("sweep.values", format!("non-finite value {bad}")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(field("sweep.values", "must be strictly increasing"));
    }
    Ok(values)
}

/// Parse and validate a configuration file's text.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let values = resolve_values(&raw.sweep)?;

    let q1 = raw.qubit1.params();
    let q2 = raw.qubit2.as_ref().map_or(q1, RawQubit::params);
    let circuit = CircuitSpec {
        qubit1: q1,
        qubit2: q2,
        ground1: GroundChoice::new(raw.grounds.qubit1),
        ground2: GroundChoice::new(raw.grounds.qubit2),
        couplings: raw
            .couplings
            .iter()
            .map(|c| CouplingElement {
                kind: c.kind,
                node_a: c.node_a,
                node_b: c.node_b,
                gamma: c.gamma,
            })
            .collect(),
    };
    circuit.validate().map_err(|e| field("circuit", e.to_string()))?;
    let s = &raw.sweep;
    if s.variable == SweepVariable::Gamma && circuit.couplings.is_empty() {
        return Err(field("sweep.variable", "a gamma sweep needs at least one [[coupling]]"));
    }
    if s.n_max < 1 {
        return Err(field("sweep.n_max", "must be at least 1"));
    }
    if s.k < 4 {
        return Err(field("sweep.k", "must be at least 4"));
    }
    if !(s.hybridization_threshold >= 0.0 && s.hybridization_threshold.is_finite()) {
        return Err(field("sweep.hybridization_threshold", "must be a finite number >= 0"));
    }
    if !(s.tolerance > 0.0 && s.tolerance.is_finite()) {
        return Err(field("sweep.tolerance", "must be > 0"));
    }
    for &v in &values {
        s.variable
            .apply(&circuit, v)
            .validate()
            .map_err(|e| field("sweep.values", format!("at {} = {v}: {e}", s.variable)))?;
    }
    Ok(SweepConfig {
        circuit,
        variable: s.variable,
        values,
        n_max: s.n_max,
        k: s.k,
        hybridization_threshold: s.hybridization_threshold,
        tolerance: s.tolerance,
        dimensionless: s.dimensionless,
        output: s.output.clone(),
    })
}

impl SweepConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tolerance,
            ..SolverOptions::default()
        }
    }

    /// The resolved configuration, every default filled in, in the input schema.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            qubit1: RawQubit::from_params(&self.circuit.qubit1),
            qubit2: Some(RawQubit::from_params(&self.circuit.qubit2)),
            grounds: RawGrounds {
                qubit1: self.circuit.ground1.node,
                qubit2: self.circuit.ground2.node,
            },
            couplings: self
                .circuit
                .couplings
                .iter()
                .map(|c| RawCoupling {
                    kind: c.kind,
                    node_a: c.node_a,
                    node_b: c.node_b,
                    gamma: c.gamma,
                })
                .collect(),
            sweep: RawSweep {
                variable: self.variable,
                start: None,
                stop: None,
                points: None,
                values: Some(self.values.clone()),
                n_max: self.n_max,
                k: self.k,
                hybridization_threshold: self.hybridization_threshold,
                tolerance: self.tolerance,
                dimensionless: self.dimensionless,
                output: self.output.clone(),
            },
        };
        toml::to_string(&raw).expect("config serializes")
    }
}
