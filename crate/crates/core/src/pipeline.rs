//! One circuit point end to end: loaded qubit bases, coupled spectrum,
//! effective Hamiltonian and Pauli coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{assemble_hamiltonian, BasisConfig, SparseHermitian};
use crate::circuit::{build_capacitance_matrices, build_hamiltonian_terms, CircuitSpec, HamiltonianTerms};
use crate::error::{Error, Result};
use crate::pauli::{pauli_coefficients, product_basis, qubit_basis, PauliDecomposition, QubitBasis};
use crate::spectrum::{lowest_eigenpairs_with, EigenSolution, SolverOptions};
use crate::swt::{
    overlap_matrix, projected_hamiltonian, swt_projection_subspace, SwtResult, DEFAULT_HYBRIDIZATION_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub n_max: usize,
    /// Coupled eigenpairs computed; at least 5 so the subspace gap is known.
    pub k: usize,
    pub hybridization_threshold: f64,
    pub solver: SolverOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            n_max: 6,
            k: 8,
            hybridization_threshold: DEFAULT_HYBRIDIZATION_THRESHOLD,
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineOptions {
    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.hybridization_threshold = threshold;
        self
    }
}

/// Operators and reference basis of a coupled circuit.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub spec: CircuitSpec,
    pub config: BasisConfig,
    pub terms: HamiltonianTerms,
    pub qubit1: QubitBasis,
    pub qubit2: QubitBasis,
    /// `|gg⟩, |ge⟩, |eg⟩, |ee⟩`.
    pub basis0: Vec<Vec<Complex64>>,
    pub hamiltonian: SparseHermitian,
}

impl CoupledProblem {
    pub fn build(spec: &CircuitSpec, n_max: usize) -> Result<Self> {
        let mats = build_capacitance_matrices(spec)?;
        let terms = build_hamiltonian_terms(spec, &mats);
        let config = BasisConfig::two_qubit(n_max);
        let single = BasisConfig::single_qubit(n_max);
        let qubit1 = qubit_basis(&spec.qubit1, spec.ground1, &terms.kinetic_q1, &single)?;
        // qubit 2's cosines are stored on global modes 2, 3; its single-qubit
        // problem is rebuilt on local modes with the loaded block
        let qubit2 = qubit_basis(&spec.qubit2, spec.ground2, &terms.kinetic_q2, &single)?;
        let basis0 = product_basis(&qubit1, &qubit2)?;
        let hamiltonian = assemble_hamiltonian(&config, &terms, true)?;
        Ok(Self {
            spec: spec.clone(),
            config,
            terms,
            qubit1,
            qubit2,
            basis0,
            hamiltonian,
        })
    }

    /// `H₀`: the loaded single-qubit Hamiltonians without interaction.
    pub fn unperturbed(&self) -> Result<SparseHermitian> {
        assemble_hamiltonian(&self.config, &self.terms, false)
    }

    pub fn solve(&self, k: usize, solver: &SolverOptions) -> Result<EigenSolution> {
        lowest_eigenpairs_with(&self.hamiltonian, k, solver)
    }
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub delta1: f64,
    pub delta2: f64,
    pub energies: Vec<f64>,
    pub min_singular: f64,
    pub subspace_gap: Option<f64>,
    /// `None` when the low-energy subspaces have hybridized.
    pub swt: Option<SwtResult>,
    pub pauli: Option<PauliDecomposition>,
}

impl PointResult {
    pub fn h_eff(&self) -> Option<&DMatrix<Complex64>> {
        self.swt.as_ref().map(|s| &s.h_eff)
    }
}

/// Full pipeline for one circuit. Hybridization is reported in the result;
/// every other failure is an error.
pub fn evaluate_point(spec: &CircuitSpec, opts: &PipelineOptions) -> Result<PointResult> {
    let problem = CoupledProblem::build(spec, opts.n_max)?;
    let k = opts.k.max(problem.basis0.len());
    let sol = problem.solve(k, &opts.solver)?;
    let d = problem.basis0.len();
    let ov = overlap_matrix(&problem.basis0, &sol.vectors[..d])?;
    let mean = sol.values[..d].iter().sum::<f64>() / d as f64;
    let projected = projected_hamiltonian(&problem.hamiltonian, &sol.vectors[..d], mean)?;
    let base = PointResult {
        delta1: problem.qubit1.delta,
        delta2: problem.qubit2.delta,
        energies: sol.values.clone(),
        min_singular: 0.0,
        subspace_gap: None,
        swt: None,
        pauli: None,
    };
    match swt_projection_subspace(&ov, &projected, mean, &sol.values, opts.hybridization_threshold) {
        Ok(swt) => {
            let pauli = pauli_coefficients(&swt.h_eff)?;
            Ok(PointResult {
                min_singular: swt.min_singular,
                subspace_gap: swt.subspace_gap,
                pauli: Some(pauli),
                swt: Some(swt),
                ..base
            })
        }
        Err(Error::Hybridization {
            min_singular,
            subspace_gap,
            ..
        }) => Ok(PointResult {
            min_singular,
            subspace_gap,
            ..base
        }),
        Err(e) => Err(e),
    }
}
