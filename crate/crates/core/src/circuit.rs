//! Circuit description of two three-junction flux qubits and the reduction of
//! that description to capacitance matrices and Hamiltonian terms.
//!
//! Node labels per qubit: node 0 sits between the two big junctions, nodes 1
//! and 2 flank the small (α) junction. The shunt capacitor βC is in parallel
//! with the small junction. One node per qubit is grounded; the remaining two
//! free nodes of each qubit form the four modes of the coupled circuit,
//! ordered (q1 free nodes ascending, q2 free nodes ascending).
//!
//! Energies are in GHz with the charging-energy convention `E_C = e²/2C`, so
//! the kinetic term reads `4 E_C n·(C/C_ref)⁻¹·n` in Cooper-pair numbers `n`.
//! All capacitances are expressed in units of qubit 1's junction capacitance.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a single three-junction flux qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Small-junction ratio: the α junction has energy `αE_J` and capacitance `αC`.
    pub alpha: f64,
    /// Shunt capacitance in units of C, in parallel with the small junction.
    pub beta: f64,
    /// `E_J / E_C`.
    pub r: f64,
    /// Charging energy `e²/2C` in GHz.
    pub e_c: f64,
    /// External flux in units of the flux quantum.
    pub frustration: f64,
}

impl QubitParams {
    pub const DEFAULT_FRUSTRATION: f64 = 0.5;

    pub fn new(alpha: f64, beta: f64, r: f64, e_c: f64) -> Self {
        Self {
            alpha,
            beta,
            r,
            e_c,
            frustration: Self::DEFAULT_FRUSTRATION,
        }
    }

    pub fn with_frustration(mut self, frustration: f64) -> Self {
        self.frustration = frustration;
        self
    }

    /// Josephson energy of a big junction in GHz.
    pub fn e_j(&self) -> f64 {
        self.r * self.e_c
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidCircuit(what.to_string()))
            }
        };
        check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha must be > 0")?;
        check(self.beta >= 0.0 && self.beta.is_finite(), "beta must be >= 0")?;
        check(self.r > 0.0 && self.r.is_finite(), "r must be > 0")?;
        check(self.e_c > 0.0 && self.e_c.is_finite(), "e_c must be > 0")?;
        check(
            (0.0..1.0).contains(&self.frustration),
            "frustration must lie in [0, 1)",
        )
    }
}

/// Which of the three nodes of a qubit is grounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundChoice {
    pub node: usize,
}

impl GroundChoice {
    pub fn new(node: usize) -> Self {
        Self { node }
    }

    /// The two ungrounded nodes, ascending.
    pub fn free_nodes(&self) -> [usize; 2] {
        match self.node {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    /// Local mode index (0 or 1) of `node`, or `None` if it is the ground.
    pub fn mode_of(&self, node: usize) -> Option<usize> {
        self.free_nodes().iter().position(|&n| n == node)
    }

    fn validate(&self, which: &str) -> Result<()> {
        if self.node > 2 {
            return Err(Error::InvalidCircuit(format!(
                "{which} ground node must be 0, 1 or 2 (got {})",
                self.node
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Capacitor `γC` between the two nodes.
    Capacitor,
    /// Josephson junction `γE_J` between the two nodes; its capacitance is neglected.
    JosephsonJunction,
    /// Junction `γE_J` together with its own capacitance `γC`.
    JunctionWithCapacitor,
}

impl CouplingKind {
    pub fn has_capacitor(self) -> bool {
        matches!(self, Self::Capacitor | Self::JunctionWithCapacitor)
    }

    pub fn has_junction(self) -> bool {
        matches!(self, Self::JosephsonJunction | Self::JunctionWithCapacitor)
    }
}

/// A coupling element between node `node_a` of qubit 1 and node `node_b` of qubit 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingElement {
    pub kind: CouplingKind,
    pub node_a: usize,
    pub node_b: usize,
    pub gamma: f64,
}

impl CouplingElement {
    pub fn capacitor(node_a: usize, node_b: usize, gamma: f64) -> Self {
        Self {
            kind: CouplingKind::Capacitor,
            node_a,
            node_b,
            gamma,
        }
    }

    pub fn junction(node_a: usize, node_b: usize, gamma: f64) -> Self {
        Self {
            kind: CouplingKind::JosephsonJunction,
            node_a,
            node_b,
            gamma,
        }
    }

    pub fn junction_with_capacitor(node_a: usize, node_b: usize, gamma: f64) -> Self {
        Self {
            kind: CouplingKind::JunctionWithCapacitor,
            node_a,
            node_b,
            gamma,
        }
    }
}

/// Two flux qubits, their grounds and the elements coupling them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub qubit1: QubitParams,
    pub qubit2: QubitParams,
    pub ground1: GroundChoice,
    pub ground2: GroundChoice,
    pub couplings: Vec<CouplingElement>,
}

impl CircuitSpec {
    /// Two identical, uncoupled qubits.
    pub fn uncoupled(params: QubitParams, ground1: usize, ground2: usize) -> Self {
        Self {
            qubit1: params,
            qubit2: params,
            ground1: GroundChoice::new(ground1),
            ground2: GroundChoice::new(ground2),
            couplings: Vec::new(),
        }
    }

    pub fn with_coupling(mut self, element: CouplingElement) -> Self {
        self.couplings.push(element);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.qubit1.validate()?;
        self.qubit2.validate()?;
        self.ground1.validate("qubit 1")?;
        self.ground2.validate("qubit 2")?;
        for (i, c) in self.couplings.iter().enumerate() {
            if !(c.gamma >= 0.0 && c.gamma.is_finite()) {
                return Err(Error::InvalidCircuit(format!(
                    "coupling {i}: gamma must be >= 0 (got {})",
                    c.gamma
                )));
            }
            if c.node_a > 2 || c.node_b > 2 {
                return Err(Error::InvalidCircuit(format!(
                    "coupling {i}: node indices must be 0, 1 or 2"
                )));
            }
            if c.node_a == self.ground1.node {
                return Err(Error::InvalidCircuit(format!(
                    "coupling {i}: node {} of qubit 1 is grounded",
                    c.node_a
                )));
            }
            if c.node_b == self.ground2.node {
                return Err(Error::InvalidCircuit(format!(
                    "coupling {i}: node {} of qubit 2 is grounded",
                    c.node_b
                )));
            }
        }
        Ok(())
    }

    /// Same circuit with qubit labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            qubit1: self.qubit2,
            qubit2: self.qubit1,
            ground1: self.ground2,
            ground2: self.ground1,
            couplings: self
                .couplings
                .iter()
                .map(|c| CouplingElement {
                    node_a: c.node_b,
                    node_b: c.node_a,
                    ..*c
                })
                .collect(),
        }
    }

    /// Capacitance of qubit 2's junctions in units of qubit 1's.
    fn qubit2_scale(&self) -> f64 {
        self.qubit1.e_c / self.qubit2.e_c
    }
}

/// Capacitance matrices of the four free nodes, in units of C.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitanceMatrices {
    pub full: Matrix4<f64>,
    pub inverse_full: Matrix4<f64>,
    pub q1_block: Matrix2<f64>,
    pub q2_block: Matrix2<f64>,
    /// Rows index qubit 1 modes, columns qubit 2 modes.
    pub mutual_block: Matrix2<f64>,
}

/// A branch capacitance between two of the six circuit nodes (`3·qubit + node`).
#[derive(Debug, Clone, Copy)]
struct Branch {
    a: usize,
    b: usize,
    capacitance: f64,
}

fn branches(spec: &CircuitSpec) -> Vec<Branch> {
    let mut out = Vec::with_capacity(6 + spec.couplings.len());
    for (q, params, scale) in [
        (0, &spec.qubit1, 1.0),
        (1, &spec.qubit2, spec.qubit2_scale()),
    ] {
        let base = 3 * q;
        out.push(Branch {
            a: base,
            b: base + 1,
            capacitance: scale,
        });
        out.push(Branch {
            a: base,
            b: base + 2,
            capacitance: scale,
        });
        out.push(Branch {
            a: base + 1,
            b: base + 2,
            capacitance: scale * (params.alpha + params.beta),
        });
    }
    for c in spec.couplings.iter().filter(|c| c.kind.has_capacitor()) {
        out.push(Branch {
            a: c.node_a,
            b: 3 + c.node_b,
            capacitance: c.gamma,
        });
    }
    out
}

/// Global node index (0..6) of each of the four free modes.
fn free_node_indices(spec: &CircuitSpec) -> [usize; 4] {
    let [a, b] = spec.ground1.free_nodes();
    let [c, d] = spec.ground2.free_nodes();
    [a, b, 3 + c, 3 + d]
}

pub fn build_capacitance_matrices(spec: &CircuitSpec) -> Result<CapacitanceMatrices> {
    spec.validate()?;

    let mut node_matrix = SMatrix::<f64, 6, 6>::zeros();
    for br in branches(spec) {
        node_matrix[(br.a, br.a)] += br.capacitance;
        node_matrix[(br.b, br.b)] += br.capacitance;
        node_matrix[(br.a, br.b)] -= br.capacitance;
        node_matrix[(br.b, br.a)] -= br.capacitance;
    }
    let free = free_node_indices(spec);
    let full = Matrix4::from_fn(|i, j| node_matrix[(free[i], free[j])]);

    let inverse = match full.cholesky() {
        Some(chol) => chol.inverse(),
        None => {
            let eig = SymmetricEigen::new(full);
            let imin = eig.eigenvalues.imin();
            let direction = eig.eigenvectors.column(imin).iter().copied().collect();
            return Err(Error::SingularCapacitance { direction });
        }
    };
    let inverse_full = (inverse + inverse.transpose()) * 0.5;

    Ok(CapacitanceMatrices {
        full,
        q1_block: inverse_full.fixed_view::<2, 2>(0, 0).into_owned(),
        q2_block: inverse_full.fixed_view::<2, 2>(2, 2).into_owned(),
        mutual_block: inverse_full.fixed_view::<2, 2>(0, 2).into_owned(),
        inverse_full,
    })
}

/// `prefactor · cos(Σ direction·φ_mode − phase_offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineTerm {
    pub prefactor: f64,
    pub shifts: Vec<(usize, i8)>,
    pub phase_offset: f64,
}

impl CosineTerm {
    /// Same term with every mode index moved by `offset`.
    pub fn relabeled(&self, offset: isize) -> Self {
        Self {
            shifts: self
                .shifts
                .iter()
                .map(|&(m, d)| ((m as isize + offset) as usize, d))
                .collect(),
            ..self.clone()
        }
    }

    pub fn evaluate(&self, phases: &[f64]) -> f64 {
        let arg: f64 = self
            .shifts
            .iter()
            .map(|&(m, d)| f64::from(d) * phases[m])
            .sum();
        self.prefactor * (arg - self.phase_offset).cos()
    }
}

/// Kinetic matrices (GHz, already multiplied by `4E_C`) and cosine potentials.
///
/// Mode indices in every cosine list are global: 0, 1 for qubit 1 and 2, 3
/// for qubit 2. The capacitive interaction lives entirely in
/// `kinetic_mutual`; the full kinetic form contains it twice (both
/// off-diagonal blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerms {
    pub kinetic_q1: Matrix2<f64>,
    pub kinetic_q2: Matrix2<f64>,
    pub kinetic_mutual: Matrix2<f64>,
    pub cosines_q1: Vec<CosineTerm>,
    pub cosines_q2: Vec<CosineTerm>,
    pub cosines_int: Vec<CosineTerm>,
}

/// The three junctions of one qubit as `(from, to, relative energy, flux)`:
/// each contributes `−E·cos(φ_to − φ_from − flux)`.
fn qubit_junctions(params: &QubitParams) -> [(usize, usize, f64, f64); 3] {
    [
        (0, 1, 1.0, 0.0),
        (0, 2, 1.0, 0.0),
        (1, 2, params.alpha, 2.0 * PI * params.frustration),
    ]
}

fn branch_shifts(ground: GroundChoice, from: usize, to: usize, mode_base: usize) -> Vec<(usize, i8)> {
    let mut shifts = Vec::with_capacity(2);
    if let Some(m) = ground.mode_of(to) {
        shifts.push((mode_base + m, 1));
    }
    if let Some(m) = ground.mode_of(from) {
        shifts.push((mode_base + m, -1));
    }
    shifts
}

/// Cosine potential of one qubit on local modes `mode_base`, `mode_base + 1`.
pub fn qubit_cosines(params: &QubitParams, ground: GroundChoice, mode_base: usize) -> Vec<CosineTerm> {
    let e_j = params.e_j();
    qubit_junctions(params)
        .into_iter()
        .map(|(from, to, rel, flux)| CosineTerm {
            prefactor: -rel * e_j,
            shifts: branch_shifts(ground, from, to, mode_base),
            phase_offset: flux,
        })
        .collect()
}

/// `sin` of the small-junction phase `φ₂ − φ₁ − 2πf`, the loop-current
/// direction used to fix the relative sign of qubit states.
pub fn loop_current_term(params: &QubitParams, ground: GroundChoice) -> CosineTerm {
    CosineTerm {
        prefactor: 1.0,
        shifts: branch_shifts(ground, 1, 2, 0),
        phase_offset: 2.0 * PI * params.frustration + 0.5 * PI,
    }
}

pub fn build_hamiltonian_terms(spec: &CircuitSpec, mats: &CapacitanceMatrices) -> HamiltonianTerms {
    // matrices are in units of qubit 1's C
    let scale = 4.0 * spec.qubit1.e_c;
    let e_j_ref = spec.qubit1.e_j();
    let cosines_int = spec
        .couplings
        .iter()
        .filter(|c| c.kind.has_junction())
        .map(|c| {
            let mut shifts = Vec::with_capacity(2);
            if let Some(m) = spec.ground2.mode_of(c.node_b) {
                shifts.push((2 + m, 1));
            }
            if let Some(m) = spec.ground1.mode_of(c.node_a) {
                shifts.push((m, -1));
            }
            CosineTerm {
                prefactor: -c.gamma * e_j_ref,
                shifts,
                phase_offset: 0.0,
            }
        })
        .collect();

    HamiltonianTerms {
        kinetic_q1: mats.q1_block * scale,
        kinetic_q2: mats.q2_block * scale,
        kinetic_mutual: mats.mutual_block * scale,
        cosines_q1: qubit_cosines(&spec.qubit1, spec.ground1, 0),
        cosines_q2: qubit_cosines(&spec.qubit2, spec.ground2, 2),
        cosines_int,
    }
}

/// Kinetic block (GHz) of a bare, unloaded qubit.
///
/// Routed through the same 4×4 inversion as a coupled circuit so that a
/// coupled circuit at zero coupling reproduces it bit for bit.
pub fn bare_kinetic_block(params: &QubitParams, ground: GroundChoice) -> Result<Matrix2<f64>> {
    let spec = CircuitSpec {
        qubit1: *params,
        qubit2: *params,
        ground1: ground,
        ground2: ground,
        couplings: Vec::new(),
    };
    let mats = build_capacitance_matrices(&spec)?;
    Ok(mats.q1_block * (4.0 * params.e_c))
}

/// `U(φ₁, φ₂)` in GHz for a qubit grounded at node 0.
pub fn potential_energy(params: &QubitParams, phi1: f64, phi2: f64) -> f64 {
    let e_j = params.e_j();
    -e_j * phi1.cos() - e_j * phi2.cos()
        - params.alpha * e_j * (phi2 - phi1 - 2.0 * PI * params.frustration).cos()
}

/// Potential sampled on a periodic `grid × grid` lattice over `[−π, π)²`.
#[derive(Debug, Clone)]
pub struct PotentialLandscape {
    pub grid: usize,
    pub phases: Vec<f64>,
    /// Row-major: `values[i * grid + j] = U(phases[i], phases[j])`.
    pub values: Vec<f64>,
}

pub fn potential_landscape(params: &QubitParams, grid: usize) -> Result<PotentialLandscape> {
    if grid < 2 {
        return Err(Error::InvalidCircuit(format!("grid must be >= 2 (got {grid})")));
    }
    let phases: Vec<f64> = (0..grid)
        .map(|i| -PI + 2.0 * PI * i as f64 / grid as f64)
        .collect();
    let mut values = Vec::with_capacity(grid * grid);
    for &p1 in &phases {
        for &p2 in &phases {
            values.push(potential_energy(params, p1, p2));
        }
    }
    Ok(PotentialLandscape {
        grid,
        phases,
        values,
    })
}

impl PotentialLandscape {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid + j]
    }

    /// Local minima with periodic wrap-around, as `(φ₁, φ₂, U)`. Among
    /// neighbouring grid points of equal value only the first is reported.
    pub fn local_minima(&self) -> Vec<(f64, f64, f64)> {
        let n = self.grid as isize;
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tie = 1e-12 * scale;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let here = self.value(i as usize, j as usize);
                let idx = i * n + j;
                let is_min = (-1..=1)
                    .flat_map(|di| (-1..=1).map(move |dj| (di, dj)))
                    .filter(|&d| d != (0, 0))
                    .all(|(di, dj)| {
                        let ii = (i + di).rem_euclid(n);
                        let jj = (j + dj).rem_euclid(n);
                        let other = self.value(ii as usize, jj as usize);
                        if (other - here).abs() <= tie {
                            idx < ii * n + jj
                        } else {
                            here < other
                        }
                    });
                if is_min {
                    out.push((self.phases[i as usize], self.phases[j as usize], here));
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["phi1", "phi2", "U_GHz"])?;
        for (i, &p1) in self.phases.iter().enumerate() {
            for (j, &p2) in self.phases.iter().enumerate() {
                w.write_record([
                    format!("{p1:.16e}"),
                    format!("{p2:.16e}"),
                    format!("{:.16e}", self.value(i, j)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
