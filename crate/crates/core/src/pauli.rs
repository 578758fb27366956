//! Gauge-fixed single-qubit bases, their product basis, and the Pauli
//! decomposition of a two-qubit effective Hamiltonian.
//!
//! Single-qubit basis order is `(g, e)` with `σᶻ = diag(−1, 1)`, so that a
//! bare qubit reads `(Δ/2)σᶻ` with `h_z = Δ > 0`. In the same ordering
//! `σˣ = [[0, 1], [1, 0]]` and `σʸ = [[0, i], [−i, 0]]`.
//!
//! Phase convention for the qubit states:
//! 1. each eigenvector is made invariant under charge reflection combined
//!    with complex conjugation (`ψ(n) = ψ(−n)*`), a symmetry of every qubit
//!    Hamiltonian at any flux; this leaves a sign;
//! 2. the ground state's largest amplitude (lowest index on ties) gets a
//!    positive real part, or a positive imaginary part if it is imaginary;
//! 3. the excited state's sign makes `⟨g|sin(φ₂ − φ₁ − 2πf)|e⟩` positive,
//!    the matrix element of the small-junction current.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::basis::{cosine_operator, BasisConfig};
use crate::circuit::{loop_current_term, GroundChoice, QubitParams};
use crate::error::{Error, Result};
use crate::spectrum::{lowest_eigenpairs, single_qubit_hamiltonian, SolverOptions};

/// Gaps below this are reported as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeCertificate {
    /// Basis index of the ground-state amplitude used to fix its sign.
    pub index: usize,
    pub amplitude: Complex64,
    /// `⟨g|sin(φ₂ − φ₁ − 2πf)|e⟩` after fixing.
    pub current_element: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitBasis {
    pub ground: Vec<Complex64>,
    pub excited: Vec<Complex64>,
    /// `(E₀, E₁)` in GHz.
    pub energies: [f64; 2],
    pub delta: f64,
    pub gauge_certificate: GaugeCertificate,
}

/// Rotates `v` so that `v(n) = v(−n)*`.
fn reflection_gauge(v: &mut [Complex64]) {
    let s: Complex64 = v
        .iter()
        .zip(v.iter().rev())
        .map(|(a, b)| a.conj() * b.conj())
        .sum();
    if s.norm() < 1e-6 {
        return;
    }
    let ph = (s / s.norm()).sqrt();
    for x in v.iter_mut() {
        *x *= ph;
    }
}

/// Sign-relevant component: the real part unless it is negligible.
fn sign_part(z: Complex64) -> f64 {
    if z.re.abs() > 1e-9 * z.norm() {
        z.re
    } else {
        z.im
    }
}

fn flip(v: &mut [Complex64]) {
    for x in v.iter_mut() {
        *x = -*x;
    }
}

fn largest_amplitude(v: &[Complex64]) -> usize {
    let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    v.iter()
        .position(|x| x.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0)
}

/// The two lowest states of the (loaded) single-qubit Hamiltonian, gauge-fixed.
pub fn qubit_basis(
    params: &QubitParams,
    ground: GroundChoice,
    renormalized_block: &Matrix2<f64>,
    config: &BasisConfig,
) -> Result<QubitBasis> {
    let h = single_qubit_hamiltonian(params, ground, Some(*renormalized_block), config)?;
    let sol = lowest_eigenpairs(&h, 3, SolverOptions::default().tol)?;
    let delta = sol.values[1] - sol.values[0];
    if delta.abs() < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateQubit { delta });
    }
    let mut g = sol.vectors[0].clone();
    let mut e = sol.vectors[1].clone();
    reflection_gauge(&mut g);
    reflection_gauge(&mut e);

    let index = largest_amplitude(&g);
    if sign_part(g[index]) < 0.0 {
        flip(&mut g);
    }
    let current = cosine_operator(config, &loop_current_term(params, ground))?;
    let mut element = current.matrix_element(&g, &e);
    if sign_part(element) < 0.0 {
        flip(&mut e);
        element = -element;
    }

    Ok(QubitBasis {
        gauge_certificate: GaugeCertificate {
            index,
            amplitude: g[index],
            current_element: element,
        },
        ground: g,
        excited: e,
        energies: [sol.values[0], sol.values[1]],
        delta,
    })
}

fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        out.extend(b.iter().map(|y| x * y));
    }
    out
}

/// `|gg⟩, |ge⟩, |eg⟩, |ee⟩` with qubit 1 on the slow tensor index.
pub fn product_basis(q1: &QubitBasis, q2: &QubitBasis) -> Result<Vec<Vec<Complex64>>> {
    if q1.ground.len() != q2.ground.len() {
        return Err(Error::DimensionMismatch {
            expected: q1.ground.len(),
            found: q2.ground.len(),
        });
    }
    Ok(vec![
        kron(&q1.ground, &q2.ground),
        kron(&q1.ground, &q2.excited),
        kron(&q1.excited, &q2.ground),
        kron(&q1.excited, &q2.excited),
    ])
}

/// `e0·I + Σ h1ᵢ/2 σⁱ⊗I + Σ h2ᵢ/2 I⊗σⁱ + Σ J_ij σⁱ⊗σʲ`, all GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliDecomposition {
    pub e0: f64,
    pub h1: [f64; 3],
    pub h2: [f64; 3],
    pub j: [[f64; 3]; 3],
}

/// `[σˣ, σʸ, σᶻ]` in the `(g, e)` ordering.
pub fn pauli_matrices() -> [Matrix2<Complex64>; 3] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        Matrix2::new(z, one, one, z),
        Matrix2::new(z, i, -i, z),
        Matrix2::new(-one, z, z, one),
    ]
}

fn kron2(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(4, 4, |r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

impl PauliDecomposition {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let s = pauli_matrices();
        let id = Matrix2::identity();
        let re = |x: f64| Complex64::new(x, 0.0);
        let mut m = DMatrix::identity(4, 4) * re(self.e0);
        for a in 0..3 {
            m += kron2(&s[a], &id) * re(self.h1[a] / 2.0);
            m += kron2(&id, &s[a]) * re(self.h2[a] / 2.0);
            for b in 0..3 {
                m += kron2(&s[a], &s[b]) * re(self.j[a][b]);
            }
        }
        m
    }

    /// Largest `|J_ij|`.
    pub fn max_coupling(&self) -> f64 {
        self.j.iter().flatten().fold(0.0, |a, x| a.max(x.abs()))
    }
}

pub fn pauli_coefficients(h_eff: &DMatrix<Complex64>) -> Result<PauliDecomposition> {
    if h_eff.nrows() != 4 || h_eff.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: h_eff.nrows().max(h_eff.ncols()),
        });
    }
    let scale = h_eff.camax().max(1.0);
    let asym = (h_eff - h_eff.adjoint()).camax();
    if asym > 1e-10 * scale {
        return Err(Error::NotHermitian(asym));
    }
    let s = pauli_matrices();
    let id = Matrix2::identity();
    let tr = |op: DMatrix<Complex64>| -> Result<f64> {
        let t = (op * h_eff).trace();
        if t.im.abs() > 1e-10 * scale {
            return Err(Error::NotHermitian(t.im.abs()));
        }
        Ok(t.re)
    };
    let mut out = PauliDecomposition {
        e0: h_eff.trace().re / 4.0,
        h1: [0.0; 3],
        h2: [0.0; 3],
        j: [[0.0; 3]; 3],
    };
    for a in 0..3 {
        out.h1[a] = tr(kron2(&s[a], &id))? / 2.0;
        out.h2[a] = tr(kron2(&id, &s[a]))? / 2.0;
        for b in 0..3 {
            out.j[a][b] = tr(kron2(&s[a], &s[b]))? / 4.0;
        }
    }
    Ok(out)
}
