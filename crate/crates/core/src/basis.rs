//! Truncated charge basis and sparse Hermitian operators on it.
//!
//! Each mode carries Cooper-pair numbers `n ∈ [−n_max, n_max]`. The tensor
//! index varies fastest on the last mode:
//! `index = Σ_k (n_k + n_max)·m^(M−1−k)` with `m = 2n_max + 1`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::circuit::{CosineTerm, HamiltonianTerms};
use crate::error::{Error, Result};

/// Largest joint dimension assembled by default (`n_max = 10` for four modes).
pub const DEFAULT_DIMENSION_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisConfig {
    pub n_max: usize,
    pub mode_count: usize,
    pub dimension_limit: usize,
}

impl BasisConfig {
    pub fn new(n_max: usize, mode_count: usize) -> Self {
        Self {
            n_max,
            mode_count,
            dimension_limit: DEFAULT_DIMENSION_LIMIT,
        }
    }

    pub fn single_qubit(n_max: usize) -> Self {
        Self::new(n_max, 2)
    }

    pub fn two_qubit(n_max: usize) -> Self {
        Self::new(n_max, 4)
    }

    pub fn with_dimension_limit(mut self, limit: usize) -> Self {
        self.dimension_limit = limit;
        self
    }

    /// States per mode.
    pub fn mode_dim(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn dimension(&self) -> usize {
        self.mode_dim().pow(self.mode_count as u32)
    }

    fn stride(&self, mode: usize) -> usize {
        self.mode_dim().pow((self.mode_count - 1 - mode) as u32)
    }

    /// Charge of `mode` in basis state `index`.
    pub fn charge(&self, index: usize, mode: usize) -> i64 {
        ((index / self.stride(mode)) % self.mode_dim()) as i64 - self.n_max as i64
    }

    /// Basis index of the charge-reflected state `n → −n`.
    pub fn reflected_index(&self, index: usize) -> usize {
        self.dimension() - 1 - index
    }

    fn check(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::InvalidCircuit("n_max must be >= 1".into()));
        }
        if self.mode_count == 0 {
            return Err(Error::InvalidCircuit("mode_count must be >= 1".into()));
        }
        let dim = (self.mode_dim() as u128).pow(self.mode_count as u32);
        if dim > self.dimension_limit as u128 {
            return Err(Error::DimensionTooLarge {
                dimension: usize::try_from(dim).unwrap_or(usize::MAX),
                limit: self.dimension_limit,
                n_max: self.n_max,
            });
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count {
            return Err(Error::DimensionMismatch {
                expected: self.mode_count,
                found: mode + 1,
            });
        }
        Ok(())
    }
}

/// Hermitian operator in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dimension: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseHermitian {
    /// Builds from coordinate triplets, summing duplicates.
    pub fn from_triplets(dimension: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dimension + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dimension {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dimension,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn zeros(dimension: usize) -> Self {
        Self::from_triplets(dimension, Vec::new())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dimension).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = A·x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dimension);
        debug_assert_eq!(y.len(), self.dimension);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dimension];
        self.apply(x, &mut y);
        y
    }

    /// `⟨u|A|v⟩`.
    pub fn matrix_element(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let av = self.mul_vec(v);
        u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        Ok(Self::from_triplets(
            self.dimension,
            self.triplets().chain(other.triplets()).collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            vals: self.vals.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// `max |A − A†|` over stored entries.
    pub fn hermiticity_error(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// True when every stored entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[Complex64]) {
        (&self.row_ptr, &self.cols, &self.vals)
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dimension)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// `e^{−iθ}` with components that vanish analytically set to exact zero, so
/// that operators at `f ∈ {0, ½}` come out exactly real.
fn unit_phase(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    let clean = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Complex64::new(clean(c), -clean(s))
}

fn push_number(config: &BasisConfig, mode: usize, out: &mut Vec<(usize, usize, Complex64)>) {
    for i in 0..config.dimension() {
        let n = config.charge(i, mode) as f64;
        out.push((i, i, Complex64::new(n, 0.0)));
    }
}

fn push_cosine(config: &BasisConfig, term: &CosineTerm, out: &mut Vec<(usize, usize, Complex64)>) {
    let forward = unit_phase(term.phase_offset) * (0.5 * term.prefactor);
    let n_max = config.n_max as i64;
    let strides: Vec<(usize, i64, usize)> = term
        .shifts
        .iter()
        .map(|&(m, d)| (m, i64::from(d), config.stride(m)))
        .collect();
    'states: for i in 0..config.dimension() {
        let mut j = i as i64;
        for &(m, d, stride) in &strides {
            let n = config.charge(i, m) + d;
            if n.abs() > n_max {
                continue 'states;
            }
            j += d * stride as i64;
        }
        let j = j as usize;
        out.push((j, i, forward));
        out.push((i, j, forward.conj()));
    }
}

fn push_kinetic(
    config: &BasisConfig,
    block: &Matrix2<f64>,
    row_modes: [usize; 2],
    col_modes: [usize; 2],
    factor: f64,
    out: &mut Vec<(usize, usize, Complex64)>,
) {
    for i in 0..config.dimension() {
        let mut e = 0.0;
        for (a, &ma) in row_modes.iter().enumerate() {
            let na = config.charge(i, ma) as f64;
            for (b, &mb) in col_modes.iter().enumerate() {
                e += block[(a, b)] * na * config.charge(i, mb) as f64;
            }
        }
        out.push((i, i, Complex64::new(factor * e, 0.0)));
    }
}

pub fn number_operator(config: &BasisConfig, mode: usize) -> Result<SparseHermitian> {
    config.check()?;
    config.check_mode(mode)?;
    let mut t = Vec::with_capacity(config.dimension());
    push_number(config, mode, &mut t);
    Ok(SparseHermitian::from_triplets(config.dimension(), t))
}

pub fn cosine_operator(config: &BasisConfig, term: &CosineTerm) -> Result<SparseHermitian> {
    config.check()?;
    for &(m, _) in &term.shifts {
        config.check_mode(m)?;
    }
    let mut t = Vec::new();
    push_cosine(config, term, &mut t);
    Ok(SparseHermitian::from_triplets(config.dimension(), t))
}

/// `Σ_ab block_ab · n_{row_modes[a]} · n_{col_modes[b]}`.
pub fn kinetic_operator(
    config: &BasisConfig,
    block: &Matrix2<f64>,
    row_modes: [usize; 2],
    col_modes: [usize; 2],
) -> Result<SparseHermitian> {
    config.check()?;
    for &m in row_modes.iter().chain(&col_modes) {
        config.check_mode(m)?;
    }
    let mut t = Vec::with_capacity(config.dimension());
    push_kinetic(config, block, row_modes, col_modes, 1.0, &mut t);
    Ok(SparseHermitian::from_triplets(config.dimension(), t))
}

/// The interaction pieces alone: both off-diagonal kinetic blocks plus the
/// coupling cosines.
pub fn assemble_interaction(config: &BasisConfig, terms: &HamiltonianTerms) -> Result<SparseHermitian> {
    check_two_qubit(config)?;
    let mut t = Vec::new();
    push_kinetic(config, &terms.kinetic_mutual, [0, 1], [2, 3], 2.0, &mut t);
    for c in &terms.cosines_int {
        push_cosine(config, c, &mut t);
    }
    Ok(SparseHermitian::from_triplets(config.dimension(), t))
}

fn check_two_qubit(config: &BasisConfig) -> Result<()> {
    config.check()?;
    if config.mode_count != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: config.mode_count,
        });
    }
    Ok(())
}

/// `H₀` (loaded single-qubit blocks only) or the full `H`.
pub fn assemble_hamiltonian(
    config: &BasisConfig,
    terms: &HamiltonianTerms,
    include_interaction: bool,
) -> Result<SparseHermitian> {
    check_two_qubit(config)?;
    let dim = config.dimension();
    let mut t = Vec::with_capacity(dim * 16);
    push_kinetic(config, &terms.kinetic_q1, [0, 1], [0, 1], 1.0, &mut t);
    push_kinetic(config, &terms.kinetic_q2, [2, 3], [2, 3], 1.0, &mut t);
    for c in terms.cosines_q1.iter().chain(&terms.cosines_q2) {
        push_cosine(config, c, &mut t);
    }
    if include_interaction {
        push_kinetic(config, &terms.kinetic_mutual, [0, 1], [2, 3], 2.0, &mut t);
        for c in &terms.cosines_int {
            push_cosine(config, c, &mut t);
        }
    }
    Ok(SparseHermitian::from_triplets(dim, t))
}

/// Single-qubit Hamiltonian on modes 0, 1.
pub fn assemble_single_qubit(
    config: &BasisConfig,
    kinetic: &Matrix2<f64>,
    cosines: &[CosineTerm],
) -> Result<SparseHermitian> {
    config.check()?;
    if config.mode_count != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: config.mode_count,
        });
    }
    let mut t = Vec::with_capacity(config.dimension() * 7);
    push_kinetic(config, kinetic, [0, 1], [0, 1], 1.0, &mut t);
    for c in cosines {
        for &(m, _) in &c.shifts {
            config.check_mode(m)?;
        }
        push_cosine(config, c, &mut t);
    }
    Ok(SparseHermitian::from_triplets(config.dimension(), t))
}
