//! Thick-restart block Lanczos with full reorthogonalization.

use std::collections::VecDeque;

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Field the solver runs over: `f64` for real symmetric operators,
/// `Complex64` otherwise.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync {
    fn from_re(x: f64) -> Self;
    fn random(rng: &mut ChaCha8Rng) -> Self;
    fn into_complex(self) -> Complex64;
    fn conj_mul(self, other: Self) -> Self;
}

impl Scalar for f64 {
    fn from_re(x: f64) -> Self {
        x
    }
    fn random(rng: &mut ChaCha8Rng) -> Self {
        rng.random_range(-1.0..1.0)
    }
    fn into_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn conj_mul(self, other: Self) -> Self {
        self * other
    }
}

impl Scalar for Complex64 {
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }
    fn into_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn conj_mul(self, other: Self) -> Self {
        self.conj() * other
    }
}

/// Hermitian linear map `y = A·x`.
pub trait Operator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
    /// Any upper bound on the largest eigenvalue.
    fn upper_bound(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual norm `‖Hv − θv‖` required for every returned pair. Raised to
    /// the rounding floor `4·√n·ε·‖H‖` when that is larger.
    pub tol: f64,
    pub block_size: usize,
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
    /// Operators up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
    /// Degree of the Chebyshev polynomial used to generate new Krylov
    /// directions after the first cycle; 1 gives plain Lanczos.
    pub filter_degree: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            block_size: 4,
            max_basis: 40,
            max_restarts: 400,
            seed: 0x5eed,
            dense_threshold: 200,
            filter_degree: 16,
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += x.conj_mul(*y);
    }
    acc
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

fn scale<T: Scalar>(alpha: f64, x: &mut [T]) {
    let a = T::from_re(alpha);
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

/// `Σ_j coeffs[j] · basis[j]`.
fn combine<T: Scalar>(basis: &[Vec<T>], coeffs: impl Iterator<Item = T>, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (v, c) in basis.iter().zip(coeffs) {
        axpy(c, v, &mut out);
    }
    out
}

pub struct KrylovResult<T> {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<f64>,
}

/// Chebyshev polynomial `T_m((H − c)/e)` damping the interval `[c − e, c + e]`.
#[derive(Debug, Clone, Copy)]
struct Filter {
    degree: usize,
    center: f64,
    half_width: f64,
}

struct Workspace<'a, T, A: Operator<T>> {
    op: &'a A,
    n: usize,
    basis: Vec<Vec<T>>,
    images: Vec<Vec<T>>,
    queue: VecDeque<usize>,
    filter: Option<Filter>,
}

impl<'a, T: Scalar, A: Operator<T>> Workspace<'a, T, A> {
    fn image(&self, v: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.op.apply(v, &mut y);
        y
    }

    /// Next Krylov direction generated from basis vector `j`.
    fn expand(&self, j: usize) -> Vec<T> {
        let Some(f) = self.filter else {
            return self.images[j].clone();
        };
        let inv = 1.0 / f.half_width;
        let shifted = |x: &[T], hx: &[T], scale: f64| -> Vec<T> {
            hx.iter()
                .zip(x)
                .map(|(&h, &v)| (h - v * T::from_re(f.center)) * T::from_re(scale * inv))
                .collect()
        };
        let mut prev = self.basis[j].clone();
        let mut cur = shifted(&prev, &self.images[j], 1.0);
        for _ in 1..f.degree {
            let hx = self.image(&cur);
            let mut next = shifted(&cur, &hx, 2.0);
            for (n, p) in next.iter_mut().zip(&prev) {
                *n -= *p;
            }
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Orthogonalizes `v` against the basis (two classical Gram–Schmidt
    /// passes) and appends it unless it is numerically dependent.
    fn push(&mut self, mut v: Vec<T>) -> bool {
        let initial = norm(&v);
        if initial == 0.0 {
            return false;
        }
        for _ in 0..2 {
            let coeffs: Vec<T> = self.basis.iter().map(|b| dot(b, &v)).collect();
            for (b, c) in self.basis.iter().zip(coeffs) {
                axpy(-c, b, &mut v);
            }
        }
        let nv = norm(&v);
        if nv <= 1e-12 * initial {
            return false;
        }
        scale(1.0 / nv, &mut v);
        let hv = self.image(&v);
        self.basis.push(v);
        self.images.push(hv);
        self.queue.push_back(self.basis.len() - 1);
        true
    }

    fn rayleigh_ritz(&self) -> (Vec<f64>, DMatrix<T>) {
        let m = self.basis.len();
        let mut t = DMatrix::<T>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = dot(&self.basis[i], &self.images[j]);
                t[(i, j)] = v;
                t[(j, i)] = v.conjugate();
            }
        }
        for i in 0..m {
            t[(i, i)] = T::from_re(t[(i, i)].real());
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vecs)
    }

    fn ritz_residual(&self, theta: f64, s: &[T]) -> f64 {
        let mut r = combine(&self.images, s.iter().copied(), self.n);
        for (v, c) in self.basis.iter().zip(s) {
            axpy(T::from_re(-theta) * *c, v, &mut r);
        }
        norm(&r)
    }
}

/// Lowest `k` eigenpairs of a Hermitian operator.
pub fn krylov_lowest<T: Scalar, A: Operator<T>>(
    op: &A,
    k: usize,
    opts: &SolverOptions,
) -> Result<KrylovResult<T>> {
    let n = op.dim();
    let block = opts.block_size.max(1).min(n);
    // guard pairs past the k-th are carried along but not required to converge
    let target = (k + block).min(n);
    let max_basis = opts.max_basis.max(target + block + 1).min(n);
    let keep = (target + block).max(max_basis / 2).min(max_basis.saturating_sub(block)).max(target);

    let mut ws = Workspace {
        op,
        n,
        basis: Vec::with_capacity(max_basis),
        images: Vec::with_capacity(max_basis),
        queue: VecDeque::new(),
        filter: None,
    };
    let upper = op.upper_bound();
    let tol = opts.tol.max(4.0 * (n as f64).sqrt() * f64::EPSILON * upper.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    ws.push(vec![T::from_re(1.0 / (n as f64).sqrt()); n]);
    while ws.basis.len() < block {
        let v = (0..n).map(|_| T::random(&mut rng)).collect();
        ws.push(v);
    }

    let mut best = vec![f64::INFINITY; k];
    for _restart in 0..=opts.max_restarts {
        while ws.basis.len() < max_basis {
            match ws.queue.pop_front() {
                Some(j) => {
                    let cand = ws.expand(j);
                    ws.push(cand);
                }
                None => {
                    // invariant subspace: refill with a random direction
                    let v = (0..n).map(|_| T::random(&mut rng)).collect();
                    if !ws.push(v) {
                        break;
                    }
                }
            }
        }

        let (theta, s) = ws.rayleigh_ritz();
        let m = ws.basis.len();
        let kk = k.min(m);
        let tk = target.min(m);
        let residuals: Vec<f64> = (0..kk)
            .map(|i| ws.ritz_residual(theta[i], s.column(i).as_slice()))
            .collect();
        for (b, r) in best.iter_mut().zip(&residuals) {
            *b = b.min(*r);
        }

        let keep_now = keep.min(m);
        let kept: Vec<Vec<T>> = (0..keep_now)
            .map(|i| combine(&ws.basis, s.column(i).iter().copied(), n))
            .collect();

        if residuals.iter().all(|&r| r < tol) || m == n {
            let vectors: Vec<Vec<T>> = kept.into_iter().take(tk).collect();
            let residuals: Vec<f64> = vectors[..kk]
                .iter()
                .zip(&theta)
                .map(|(v, &t)| {
                    let mut r = ws.image(v);
                    axpy(T::from_re(-t), v, &mut r);
                    norm(&r)
                })
                .collect();
            if residuals.iter().all(|&r| r < tol) {
                return Ok(KrylovResult {
                    values: theta[..kk].to_vec(),
                    vectors: vectors.into_iter().take(kk).collect(),
                    residuals,
                });
            }
            // accumulated drift: restart from the Ritz vectors with fresh images
            ws.basis.clear();
            ws.images.clear();
            ws.queue.clear();
            for v in vectors {
                ws.push(v);
            }
            continue;
        }

        if opts.filter_degree > 1 {
            let cut = theta[(2 * k + block).min(keep_now).min(m - 1)];
            if cut < upper {
                ws.filter = Some(Filter {
                    degree: opts.filter_degree,
                    center: 0.5 * (upper + cut),
                    half_width: 0.5 * (upper - cut),
                });
            }
        }
        ws.basis.clear();
        ws.images.clear();
        ws.queue.clear();
        for v in kept {
            ws.push(v);
        }
        ws.queue.truncate(target.max(block).min(ws.basis.len()));
    }

    Err(Error::NotConverged {
        iterations: opts.max_restarts,
        residuals: best,
    })
}

/// Dense Hermitian diagonalization, ascending.
pub fn dense_lowest(m: &DMatrix<Complex64>, k: usize) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(DMatrix<Complex64>);

    impl Operator<Complex64> for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
            let v = &self.0 * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }
        fn upper_bound(&self) -> f64 {
            self.0.row_iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
        }
    }

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::random(&mut rng));
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn random_hermitian_matches_dense() {
        let m = random_hermitian(50, 7);
        let (dense, _) = dense_lowest(&m, 5);
        let opts = SolverOptions {
            dense_threshold: 0,
            max_basis: 30,
            ..Default::default()
        };
        let res = krylov_lowest(&Dense(m), 5, &opts).unwrap();
        for (a, b) in res.values.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        for r in &res.residuals {
            assert!(*r < 1e-10);
        }
        for i in 0..5 {
            for j in 0..5 {
                let ip = dot(&res.vectors[i], &res.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn reports_non_convergence() {
        let m = random_hermitian(300, 3);
        let opts = SolverOptions {
            tol: 1e-300,
            max_restarts: 2,
            max_basis: 20,
            ..Default::default()
        };
        assert!(matches!(
            krylov_lowest(&Dense(m), 3, &opts),
            Err(Error::NotConverged { iterations: 2, .. })
        ));
    }
}
