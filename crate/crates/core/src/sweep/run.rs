use rayon::prelude::*;

use super::{write_csv_atomic, RowStatus, SweepConfig, SweepRow};
use crate::circuit::CircuitSpec;
use crate::error::{Error, Result};
use crate::pauli::PauliDecomposition;
use crate::pipeline::{evaluate_point, PipelineOptions};

/// A point whose evaluation raised an error.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub sweep_value: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// One row per sweep value, in sweep order.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<PointFailure>,
}

fn scaled(p: &PauliDecomposition, s: f64) -> PauliDecomposition {
    PauliDecomposition {
        e0: p.e0 * s,
        h1: p.h1.map(|x| x * s),
        h2: p.h2.map(|x| x * s),
        j: p.j.map(|row| row.map(|x| x * s)),
    }
}

/// Run the pipeline for one circuit and convert energies by `1/energy_unit`.
pub fn evaluate_row(spec: &CircuitSpec, sweep_value: f64, opts: &PipelineOptions, energy_unit: f64) -> Result<SweepRow> {
    let res = evaluate_point(spec, opts)?;
    let s = 1.0 / energy_unit;
    let coefficients = res.pauli.as_ref().map(|p| scaled(p, s));
    let ratios = res
        .pauli
        .as_ref()
        .map(|p| [p.j[0][0] / res.delta1, p.j[1][1] / res.delta1, p.j[2][2] / res.delta1]);
    Ok(SweepRow {
        sweep_value,
        delta1: Some(res.delta1 * s),
        delta2: Some(res.delta2 * s),
        status: if coefficients.is_some() {
            RowStatus::Ok
        } else {
            RowStatus::Hybridized
        },
        coefficients,
        ratios,
        subspace_gap: res.subspace_gap.map(|g| g * s),
        min_singular: Some(res.min_singular),
    })
}

/// Evaluate every sweep point on a pool of `threads` workers (all cores when
/// `None`) and write the CSV if the config names an output file.
pub fn run_sweep(cfg: &SweepConfig, threads: Option<usize>) -> Result<SweepOutcome> {
    let opts = PipelineOptions {
        n_max: cfg.n_max,
        k: cfg.k,
        hybridization_threshold: cfg.hybridization_threshold,
        solver: cfg.solver_options(),
    };
    let unit = if cfg.dimensionless { cfg.circuit.qubit1.e_c } else { 1.0 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let results: Vec<(f64, Result<SweepRow>)> = pool.install(|| {
        cfg.values
            .par_iter()
            .map(|&v| (v, evaluate_row(&cfg.variable.apply(&cfg.circuit, v), v, &opts, unit)))
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (v, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failures.push(PointFailure {
                    sweep_value: v,
                    message: e.to_string(),
                });
                rows.push(SweepRow::failed(v));
            }
        }
    }
    if let Some(path) = &cfg.output {
        write_csv_atomic(path, &rows)?;
    }
    Ok(SweepOutcome { rows, failures })
}
