//! Lowest eigenpairs of sparse Hermitian operators, cutoff convergence
//! scans and single-qubit spectra.

pub mod lanczos;

use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::basis::{assemble_hamiltonian, assemble_single_qubit, BasisConfig, SparseHermitian};
use crate::circuit::{
    bare_kinetic_block, build_capacitance_matrices, build_hamiltonian_terms, qubit_cosines,
    CircuitSpec, GroundChoice, QubitParams,
};
use crate::error::{Error, Result};

pub use lanczos::SolverOptions;
use lanczos::{dense_lowest, krylov_lowest, Operator};

#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Ascending, GHz.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl Operator<Complex64> for SparseHermitian {
    fn dim(&self) -> usize {
        self.dimension()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        SparseHermitian::apply(self, x, y)
    }
    fn upper_bound(&self) -> f64 {
        self.norm_bound()
    }
}

/// Real view of an operator whose entries are all real.
struct RealCsr<'a> {
    row_ptr: &'a [usize],
    cols: &'a [usize],
    vals: Vec<f64>,
    bound: f64,
}

impl Operator<f64> for RealCsr<'_> {
    fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }
    fn upper_bound(&self) -> f64 {
        self.bound
    }
}

fn residual(h: &SparseHermitian, value: f64, v: &[Complex64]) -> f64 {
    let hv = h.mul_vec(v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * value).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// The `k` lowest eigenpairs with default solver settings.
pub fn lowest_eigenpairs(h: &SparseHermitian, k: usize, tol: f64) -> Result<EigenSolution> {
    lowest_eigenpairs_with(
        h,
        k,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn lowest_eigenpairs_with(
    h: &SparseHermitian,
    k: usize,
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    let n = h.dimension();
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k,
        });
    }
    if n <= opts.dense_threshold {
        let (values, vectors) = dense_lowest(&h.to_dense(), k);
        let residuals = values
            .iter()
            .zip(&vectors)
            .map(|(&e, v)| residual(h, e, v))
            .collect();
        return Ok(EigenSolution {
            values,
            vectors,
            residuals,
        });
    }
    if h.is_real() {
        let (row_ptr, cols, vals) = h.csr();
        let op = RealCsr {
            row_ptr,
            cols,
            vals: vals.iter().map(|v| v.re).collect(),
            bound: h.norm_bound(),
        };
        let res = krylov_lowest::<f64, _>(&op, k, opts)?;
        Ok(EigenSolution {
            values: res.values,
            vectors: res
                .vectors
                .into_iter()
                .map(|v| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                .collect(),
            residuals: res.residuals,
        })
    } else {
        let res = krylov_lowest::<Complex64, _>(h, k, opts)?;
        Ok(EigenSolution {
            values: res.values,
            vectors: res.vectors,
            residuals: res.residuals,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitReport {
    /// `E₁ − E₀`, GHz.
    pub delta: f64,
    /// `E₂ − E₁`, GHz.
    pub e12: f64,
    /// `E₁₂ / Δ`.
    pub anharmonicity_ratio: f64,
}

/// Single-qubit Hamiltonian with the given kinetic block (bare if `None`).
pub fn single_qubit_hamiltonian(
    params: &QubitParams,
    ground: GroundChoice,
    kinetic_block: Option<Matrix2<f64>>,
    config: &BasisConfig,
) -> Result<SparseHermitian> {
    params.validate()?;
    let kinetic = match kinetic_block {
        Some(b) => b,
        None => bare_kinetic_block(params, ground)?,
    };
    assemble_single_qubit(config, &kinetic, &qubit_cosines(params, ground, 0))
}

/// Gap and anharmonicity. `renormalized_block` is the loaded kinetic block in
/// GHz (`4E_C` times the qubit's diagonal block of the inverse capacitance).
pub fn single_qubit_report(
    params: &QubitParams,
    ground: GroundChoice,
    renormalized_block: Option<Matrix2<f64>>,
    config: &BasisConfig,
) -> Result<SingleQubitReport> {
    let h = single_qubit_hamiltonian(params, ground, renormalized_block, config)?;
    let sol = lowest_eigenpairs(&h, 3, SolverOptions::default().tol)?;
    let delta = sol.values[1] - sol.values[0];
    let e12 = sol.values[2] - sol.values[1];
    Ok(SingleQubitReport {
        delta,
        e12,
        anharmonicity_ratio: e12 / delta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub k: usize,
    /// `(n_max, lowest k energies)`, ascending in `n_max`.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl ConvergenceTable {
    /// Largest relative change of any energy between consecutive rows; one
    /// entry per row after the first.
    pub fn drifts(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| {
                w[0].1
                    .iter()
                    .zip(&w[1].1)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["n_max".to_string()];
        header.extend((0..self.k).map(|i| format!("E{i}")));
        header.push("max_rel_drift".into());
        w.write_record(&header)?;
        let drifts = self.drifts();
        for (i, (n_max, energies)) in self.rows.iter().enumerate() {
            let mut rec = vec![n_max.to_string()];
            rec.extend(energies.iter().map(|e| format!("{e:.16e}")));
            rec.push(match i {
                0 => String::new(),
                _ => format!("{:.16e}", drifts[i - 1]),
            });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lowest `k` energies for each cutoff, with the operator built by `build`.
pub fn convergence_scan_with<F>(n_max_list: &[usize], k: usize, mut build: F) -> Result<ConvergenceTable>
where
    F: FnMut(usize) -> Result<SparseHermitian>,
{
    if n_max_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidCircuit(
            "n_max list must be strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_max_list.len());
    for &n_max in n_max_list {
        let h = build(n_max)?;
        let sol = lowest_eigenpairs(&h, k, SolverOptions::default().tol)?;
        rows.push((n_max, sol.values));
    }
    Ok(ConvergenceTable { k, rows })
}

/// Cutoff scan of the full coupled Hamiltonian.
pub fn convergence_scan(spec: &CircuitSpec, n_max_list: &[usize], k: usize) -> Result<ConvergenceTable> {
    let mats = build_capacitance_matrices(spec)?;
    let terms = build_hamiltonian_terms(spec, &mats);
    convergence_scan_with(n_max_list, k, |n_max| {
        assemble_hamiltonian(&BasisConfig::two_qubit(n_max), &terms, true)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitSpec;

    fn diag(values: &[f64]) -> SparseHermitian {
        SparseHermitian::from_triplets(
            values.len(),
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, i, Complex64::new(v, 0.0)))
                .collect(),
        )
    }

    #[test]
    fn diagonal_three_by_three() {
        let sol = lowest_eigenpairs(&diag(&[3.0, 1.0, 2.0]), 2, 1e-12).unwrap();
        assert_eq!(sol.values, vec![1.0, 2.0]);
        assert!((sol.vectors[0][1].norm() - 1.0).abs() < 1e-14);
        assert!((sol.vectors[1][2].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn iterative_matches_dense_on_single_qubit() {
        let p = QubitParams::new(0.7, 0.0, 50.0, 1.0);
        let cfg = BasisConfig::single_qubit(8);
        let h = single_qubit_hamiltonian(&p, GroundChoice::new(0), None, &cfg).unwrap();
        let (dense, _) = dense_lowest(&h.to_dense(), 6);
        let opts = SolverOptions {
            dense_threshold: 0,
            ..Default::default()
        };
        let sol = lowest_eigenpairs_with(&h, 6, &opts).unwrap();
        for (a, b) in sol.values.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} {b}");
        }
        assert!(sol.residuals.iter().all(|&r| r < opts.tol));
    }

    #[test]
    fn complex_operator_path() {
        let p = QubitParams::new(0.7, 0.0, 50.0, 1.0).with_frustration(0.47);
        let cfg = BasisConfig::single_qubit(8);
        let h = single_qubit_hamiltonian(&p, GroundChoice::new(0), None, &cfg).unwrap();
        assert!(!h.is_real());
        let (dense, _) = dense_lowest(&h.to_dense(), 4);
        let opts = SolverOptions {
            dense_threshold: 0,
            ..Default::default()
        };
        let sol = lowest_eigenpairs_with(&h, 4, &opts).unwrap();
        for (a, b) in sol.values.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = QubitParams::new(0.7, 0.0, 50.0, 1.0);
        let h = single_qubit_hamiltonian(&p, GroundChoice::new(0), None, &BasisConfig::single_qubit(8)).unwrap();
        let opts = SolverOptions {
            dense_threshold: 0,
            ..Default::default()
        };
        let a = lowest_eigenpairs_with(&h, 3, &opts).unwrap();
        let b = lowest_eigenpairs_with(&h, 3, &opts).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn single_qubit_cutoff_convergence() {
        let p = QubitParams::new(0.7, 0.0, 50.0, 1.0);
        let g = GroundChoice::new(0);
        let solve = |n| {
            let h = single_qubit_hamiltonian(&p, g, None, &BasisConfig::single_qubit(n)).unwrap();
            lowest_eigenpairs(&h, 3, 1e-11).unwrap().values
        };
        let (a, b) = (solve(7), solve(9));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6 * y.abs(), "{x} {y}");
        }
    }

    #[test]
    fn anharmonicity_grows_with_alpha() {
        let cfg = BasisConfig::single_qubit(8);
        let ratios: Vec<f64> = [0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9]
            .iter()
            .map(|&a| {
                single_qubit_report(&QubitParams::new(a, 0.0, 50.0, 1.0), GroundChoice::new(0), None, &cfg)
                    .unwrap()
                    .anharmonicity_ratio
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    }

    #[test]
    fn shunt_lowers_gap() {
        let cfg = BasisConfig::single_qubit(8);
        let rep = |b| {
            single_qubit_report(&QubitParams::new(0.7, b, 50.0, 1.0), GroundChoice::new(0), None, &cfg).unwrap()
        };
        assert!(rep(0.5).delta < rep(0.0).delta);
    }

    #[test]
    fn loaded_block_at_zero_gamma_equals_bare() {
        let p = QubitParams::new(0.7, 0.0, 50.0, 1.0);
        let g = GroundChoice::new(0);
        let cfg = BasisConfig::single_qubit(6);
        let spec = CircuitSpec::uncoupled(p, 0, 0)
            .with_coupling(crate::circuit::CouplingElement::capacitor(2, 1, 0.0));
        let mats = build_capacitance_matrices(&spec).unwrap();
        let block = mats.q1_block * (4.0 * p.e_c);
        let a = single_qubit_report(&p, g, Some(block), &cfg).unwrap();
        let b = single_qubit_report(&p, g, None, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ground_relabeling_keeps_spectrum() {
        let p = QubitParams::new(0.7, 0.0, 50.0, 1.0);
        let cfg = BasisConfig::single_qubit(8);
        let a = single_qubit_report(&p, GroundChoice::new(1), None, &cfg).unwrap();
        let b = single_qubit_report(&p, GroundChoice::new(2), None, &cfg).unwrap();
        assert!((a.delta - b.delta).abs() < 1e-9 * a.delta);
        assert!((a.e12 - b.e12).abs() < 1e-9 * a.e12);
    }

    #[test]
    fn convergence_scan_on_diagonal_operator() {
        let table = convergence_scan_with(&[1, 2, 3], 1, |n| {
            Ok(diag(&(0..(2 * n + 1)).map(|i| i as f64 + 0.5).collect::<Vec<_>>()))
        })
        .unwrap();
        assert!(table.rows.iter().all(|(_, e)| e == &vec![0.5]));
        assert_eq!(table.drifts(), vec![0.0, 0.0]);
    }

    #[test]
    fn convergence_scan_rejects_unsorted() {
        assert!(convergence_scan_with(&[3, 2], 1, |_| Ok(diag(&[1.0]))).is_err());
    }

    #[test]
    fn deeper_wells_need_larger_cutoff() {
        let cfg_drift = |r: f64| {
            let p = QubitParams::new(0.7, 0.0, r, 1.0);
            let table = convergence_scan_with(&[3, 4], 3, |n| {
                single_qubit_hamiltonian(&p, GroundChoice::new(0), None, &BasisConfig::single_qubit(n))
            })
            .unwrap();
            table.drifts()[0]
        };
        assert!(cfg_drift(85.0) > cfg_drift(15.0));
    }

    #[test]
    fn convergence_csv_layout() {
        let table = ConvergenceTable {
            k: 2,
            rows: vec![(1, vec![1.0, 2.0]), (2, vec![1.0, 2.5])],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n_max,E0,E1,max_rel_drift");
        assert!(lines[1].ends_with(','));
        assert_eq!(lines.len(), 3);
    }
}
