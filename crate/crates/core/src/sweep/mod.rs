//! Parameter sweeps through the full pipeline, CSV tables and power-law fits.

mod config;
mod csv;
mod run;
mod scaling;

pub use self::config::{parse_config, SweepConfig, SweepVariable, DEFAULT_K, DEFAULT_N_MAX};
pub use self::csv::{read_csv, write_csv, write_csv_atomic, CSV_COLUMNS};
pub use self::run::{evaluate_row, run_sweep, PointFailure, SweepOutcome};
pub use self::scaling::{scaling_report, PowerLawFit, ScalingReport, MAGNITUDE_FLOOR};

use std::fmt;

use crate::pauli::PauliDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowStatus {
    Ok,
    /// Low- and high-energy subspaces mixed; no effective Hamiltonian.
    Hybridized,
    /// The point raised an error; see [`SweepOutcome::failures`].
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Hybridized => "hybridized",
            Self::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(Self::Ok),
            "hybridized" => Some(Self::Hybridized),
            "failed" => Some(Self::Failed),
            _ => None,
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sweep point. Energies are in GHz, or in units of qubit 1's `E_C` for
/// dimensionless sweeps. Coefficients and ratios are present only when
/// `status` is [`RowStatus::Ok`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub coefficients: Option<PauliDecomposition>,
    /// `(J_xx, J_yy, J_zz) / delta1`.
    pub ratios: Option<[f64; 3]>,
    pub subspace_gap: Option<f64>,
    pub min_singular: Option<f64>,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn failed(sweep_value: f64) -> Self {
        Self {
            sweep_value,
            delta1: None,
            delta2: None,
            coefficients: None,
            ratios: None,
            subspace_gap: None,
            min_singular: None,
            status: RowStatus::Failed,
        }
    }

    /// Diagonal couplings `(J_xx, J_yy, J_zz)`.
    pub fn diagonal_couplings(&self) -> Option<[f64; 3]> {
        self.coefficients.as_ref().map(|p| [p.j[0][0], p.j[1][1], p.j[2][2]])
    }
}
