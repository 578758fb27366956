//! Rank-d Schrieffer–Wolff projection onto an uncoupled reference subspace,
//! and a dense full-space construction used to cross-check it.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::basis::SparseHermitian;
use crate::error::{Error, Result};

pub const DEFAULT_HYBRIDIZATION_THRESHOLD: f64 = 0.1;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `B_ij = ⟨ψ⁰_i|ψ_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    pub b: DMatrix<Complex64>,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwtResult {
    /// Unitary polar factor of `B`.
    pub a: DMatrix<Complex64>,
    /// Effective Hamiltonian (GHz) in the ordered reference basis.
    pub h_eff: DMatrix<Complex64>,
    pub singular_values: Vec<f64>,
    pub min_singular: f64,
    /// `E_d − E_{d−1}` when more than `d` coupled energies were supplied.
    pub subspace_gap: Option<f64>,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn overlap_matrix(basis0: &[Vec<Complex64>], basis: &[Vec<Complex64>]) -> Result<OverlapMatrix> {
    let d = basis0.len();
    if basis.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: basis.len(),
        });
    }
    let n = basis0.first().map_or(0, Vec::len);
    if let Some(bad) = basis0.iter().chain(basis).find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let b = DMatrix::from_fn(d, d, |i, j| inner(&basis0[i], &basis[j]));
    Ok(OverlapMatrix { b, d })
}

fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * c(0.5)
}

/// `A = WV†` from `B = WΣV†` and `h_eff = A·diag(E)·A†`.
///
/// `energies` must hold at least `d` ascending coupled energies in the same
/// order as the columns of `B`.
pub fn swt_projection(ov: &OverlapMatrix, energies: &[f64], hybridization_threshold: f64) -> Result<SwtResult> {
    let d = ov.d;
    if energies.len() < d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: energies.len(),
        });
    }
    // shift by the mean energy so rounding scales with the spread, not the offset
    let mean = energies[..d].iter().sum::<f64>() / d as f64;
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(d, energies[..d].iter().map(|&e| c(e - mean))));
    project(ov, &diag, mean, energies, hybridization_threshold)
}

/// Same as [`swt_projection`] with `diag(E)` replaced by `M = V†(H − s)V`
/// from [`projected_hamiltonian`]; `s` is added back at the end. Rotations
/// inside near-degenerate groups of approximate eigenvectors cancel exactly.
pub fn swt_projection_subspace(
    ov: &OverlapMatrix,
    projected: &DMatrix<Complex64>,
    shift: f64,
    energies: &[f64],
    hybridization_threshold: f64,
) -> Result<SwtResult> {
    let d = ov.d;
    if projected.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: projected.nrows(),
        });
    }
    if energies.len() < d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: energies.len(),
        });
    }
    project(ov, &hermitian_part(projected), shift, energies, hybridization_threshold)
}

/// `M_ij = ⟨ψ_i|H − shift|ψ_j⟩`. A shift near the subspace energies keeps
/// the rounding from non-orthonormality of the vectors at the level of the
/// spread instead of the absolute energy.
pub fn projected_hamiltonian(h: &SparseHermitian, vectors: &[Vec<Complex64>], shift: f64) -> Result<DMatrix<Complex64>> {
    let n = h.dimension();
    if let Some(bad) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let images: Vec<Vec<Complex64>> = vectors
        .iter()
        .map(|v| {
            let mut hv = h.mul_vec(v);
            for (y, x) in hv.iter_mut().zip(v) {
                *y -= x * shift;
            }
            hv
        })
        .collect();
    let d = vectors.len();
    Ok(DMatrix::from_fn(d, d, |i, j| inner(&vectors[i], &images[j])))
}

fn project(
    ov: &OverlapMatrix,
    m: &DMatrix<Complex64>,
    offset: f64,
    energies: &[f64],
    hybridization_threshold: f64,
) -> Result<SwtResult> {
    let d = ov.d;
    let svd = SVD::new(ov.b.clone(), true, true);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let min_singular = singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let subspace_gap = energies.get(d).map(|e| e - energies[d - 1]);
    if min_singular < hybridization_threshold {
        return Err(Error::Hybridization {
            min_singular,
            threshold: hybridization_threshold,
            subspace_gap,
        });
    }
    let (w, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let a = &w * &v_t;

    let mut h_eff = hermitian_part(&(&a * m * a.adjoint()));
    for i in 0..d {
        h_eff[(i, i)] += c(offset);
    }
    Ok(SwtResult {
        a,
        h_eff,
        singular_values,
        min_singular,
        subspace_gap,
    })
}

/// Dense eigenvectors of the `d` lowest states, as columns.
fn lowest_subspace(h: &DMatrix<Complex64>, d: usize) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(d);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(h.nrows(), d, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vecs)
}

/// Principal square root of a matrix whose spectrum avoids the closed
/// negative real axis, by Denman–Beavers iteration.
pub fn principal_sqrt(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    let scale = max_abs(m).max(1.0);
    let inverse = |x: &DMatrix<Complex64>| {
        x.clone()
            .try_inverse()
            .ok_or_else(|| Error::SquareRootBranch("singular iterate: eigenvalue on the negative real axis".into()))
    };
    let mut y = m.clone();
    let mut z = DMatrix::<Complex64>::identity(n, n);
    for _ in 0..100 {
        let (yi, zi) = (inverse(&y)?, inverse(&z)?);
        let y_next = (&y + zi) * c(0.5);
        let z_next = (&z + yi) * c(0.5);
        let step = max_abs(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if step <= 1e-14 * max_abs(&y).max(1.0) {
            let err = max_abs(&(&y * &y - m));
            if err > 1e-10 * scale {
                return Err(Error::SquareRootBranch(format!("iteration settled with |Y² − M| = {err:e}")));
            }
            return Ok(y);
        }
    }
    Err(Error::SquareRootBranch("iteration did not converge".into()))
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `H_eff = P₀UPHPU†P₀` with `U = √((2P₀−1)(2P−1))`, evaluated densely and
/// expressed in `basis0` (or in `h0`'s own lowest eigenvectors when `None`).
pub fn full_swt_oracle(
    h0: &SparseHermitian,
    h: &SparseHermitian,
    d: usize,
    basis0: Option<&[Vec<Complex64>]>,
    full_dim_limit: usize,
) -> Result<DMatrix<Complex64>> {
    let n = h0.dimension();
    if h.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.dimension(),
        });
    }
    if n > full_dim_limit {
        return Err(Error::DimensionTooLarge {
            dimension: n,
            limit: full_dim_limit,
            n_max: 0,
        });
    }
    let (_, v0) = lowest_subspace(&h0.to_dense(), d);
    let (e, v) = lowest_subspace(&h.to_dense(), d);
    let id = DMatrix::<Complex64>::identity(n, n);
    let p0 = &v0 * v0.adjoint();
    let p = &v * v.adjoint();
    let reflection = (&p0 * c(2.0) - &id) * (&p * c(2.0) - &id);
    let u = principal_sqrt(&reflection)?;

    let frame = match basis0 {
        Some(b) => {
            if b.len() != d || b.iter().any(|x| x.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: b.len(),
                });
            }
            DMatrix::from_fn(n, d, |r, k| b[k][r])
        }
        None => v0,
    };
    // ⟨ψ⁰_i|U P H P U†|ψ⁰_j⟩ with PHP = V·diag(E)·V†
    let x = v.adjoint() * u.adjoint() * &frame;
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(d, e.iter().map(|&x| c(x))));
    Ok(hermitian_part(&(x.adjoint() * diag * x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn orthonormalize(mut vs: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
        for i in 0..vs.len() {
            for j in 0..i {
                let p = inner(&vs[j], &vs[i]);
                let vj = vs[j].clone();
                for (x, y) in vs[i].iter_mut().zip(&vj) {
                    *x -= p * y;
                }
            }
            let nrm = inner(&vs[i], &vs[i]).re.sqrt();
            for x in vs[i].iter_mut() {
                *x /= nrm;
            }
        }
        vs
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<Complex64> {
        let cols = orthonormalize((0..d).map(|_| random_vec(rng, d)).collect());
        DMatrix::from_fn(d, d, |r, k| cols[k][r])
    }

    fn eig_sorted(m: &DMatrix<Complex64>) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn identical_bases_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = orthonormalize((0..4).map(|_| random_vec(&mut rng, 20)).collect());
        let ov = overlap_matrix(&b, &b).unwrap();
        assert!((ov.b - DMatrix::identity(4, 4)).camax() < 1e-14);
    }

    #[test]
    fn orthogonal_subspaces_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let all = orthonormalize((0..8).map(|_| random_vec(&mut rng, 20)).collect());
        let ov = overlap_matrix(&all[..4], &all[4..]).unwrap();
        assert!(ov.b.camax() < 1e-14);
    }

    #[test]
    fn overlap_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = orthonormalize((0..4).map(|_| random_vec(&mut rng, 20)).collect());
        let b = orthonormalize((0..4).map(|_| random_vec(&mut rng, 20)).collect());
        let ov = overlap_matrix(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..20 {
                    s += a[i][k].conj() * b[j][k];
                }
                assert!((ov.b[(i, j)] - s).norm() < 1e-14);
            }
        }
        assert!(ov.b.singular_values().iter().all(|&s| s <= 1.0 + 1e-12));
    }

    #[test]
    fn overlap_rejects_mismatch() {
        let v = vec![vec![c(1.0); 3]];
        let w = vec![vec![c(1.0); 4]];
        assert!(overlap_matrix(&v, &w).is_err());
        assert!(overlap_matrix(&v, &[]).is_err());
    }

    #[test]
    fn identity_overlap_gives_diagonal() {
        let ov = OverlapMatrix {
            b: DMatrix::identity(4, 4),
            d: 4,
        };
        let res = swt_projection(&ov, &[0.0, 1.0, 2.0, 3.0], 0.1).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(1.0), c(2.0), c(3.0)]));
        assert!((res.h_eff - want).camax() < 1e-15);
        assert_eq!(res.subspace_gap, None);
    }

    #[test]
    fn unitary_overlap_is_its_own_polar_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(&mut rng, 4);
        let e = [-1.0, 0.3, 0.5, 2.0, 4.0];
        let res = swt_projection(&OverlapMatrix { b: u.clone(), d: 4 }, &e, 0.1).unwrap();
        assert!((&res.a - &u).camax() < 1e-13);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(e[..4].iter().map(|&x| c(x)).collect()));
        assert!((res.h_eff - &u * diag * u.adjoint()).camax() < 1e-13);
        assert_eq!(res.subspace_gap, Some(2.0));
    }

    #[test]
    fn subspace_form_cancels_rotations_within_the_block() {
        let (h0, h) = toy_pair(9, 12, 0.2);
        let (_, v0) = lowest_subspace(&h0.to_dense(), 3);
        let (e, v) = lowest_subspace(&h.to_dense(), 3);
        let cols = |m: &DMatrix<Complex64>| (0..3).map(|k| m.column(k).iter().copied().collect()).collect::<Vec<Vec<_>>>();
        let exact = swt_projection(&overlap_matrix(&cols(&v0), &cols(&v)).unwrap(), &e, 0.1).unwrap().h_eff;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mixed = &v * random_unitary(&mut rng, 3);
        let m = projected_hamiltonian(&h, &cols(&mixed), 0.4).unwrap();
        let ov = overlap_matrix(&cols(&v0), &cols(&mixed)).unwrap();
        let got = swt_projection_subspace(&ov, &m, 0.4, &e, 0.1).unwrap().h_eff;
        assert!((got - exact).camax() < 1e-12);
    }

    #[test]
    fn small_singular_value_is_hybridization() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(1.0), c(1.0), c(1e-6)]));
        let err = swt_projection(&OverlapMatrix { b, d: 4 }, &[0.0, 1.0, 2.0, 3.0], 1e-3).unwrap_err();
        match err {
            Error::Hybridization { min_singular, .. } => assert!((min_singular - 1e-6).abs() < 1e-18),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn principal_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(&mut rng, 6);
        let phases: Vec<Complex64> = (0..6).map(|i| Complex64::from_polar(1.0, -2.5 + i as f64)).collect();
        let m = &u * DMatrix::from_diagonal(&DVector::from_vec(phases)) * u.adjoint();
        let r = principal_sqrt(&m).unwrap();
        assert!((&r * &r - &m).camax() < 1e-12);
        let minus = DMatrix::<Complex64>::identity(3, 3) * c(-1.0);
        assert!(matches!(principal_sqrt(&minus), Err(Error::SquareRootBranch(_))));
    }

    fn toy_pair(seed: u64, n: usize, eps: f64) -> (SparseHermitian, SparseHermitian) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t0 = Vec::new();
        let mut t = Vec::new();
        for i in 0..n {
            // low block at 0..3 well separated from the rest
            let e = if i < 3 { i as f64 * 0.4 } else { 5.0 + i as f64 };
            t0.push((i, i, c(e)));
            t.push((i, i, c(e)));
        }
        for i in 0..n {
            for j in i + 1..n {
                let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * eps;
                t.push((i, j, v));
                t.push((j, i, v.conj()));
            }
        }
        (SparseHermitian::from_triplets(n, t0), SparseHermitian::from_triplets(n, t))
    }

    fn rank_d(h0: &SparseHermitian, h: &SparseHermitian, d: usize) -> DMatrix<Complex64> {
        let (_, v0) = lowest_subspace(&h0.to_dense(), d);
        let (e, v) = lowest_subspace(&h.to_dense(), d);
        let cols = |m: &DMatrix<Complex64>| (0..d).map(|k| m.column(k).iter().copied().collect()).collect::<Vec<_>>();
        let ov = overlap_matrix(&cols(&v0), &cols(&v)).unwrap();
        swt_projection(&ov, &e, 0.1).unwrap().h_eff
    }

    #[test]
    fn oracle_with_unperturbed_operator() {
        let (h0, _) = toy_pair(6, 12, 0.0);
        let full = full_swt_oracle(&h0, &h0, 3, None, 100).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0), c(0.4), c(0.8)]));
        assert!((full - want).camax() < 1e-12);
    }

    #[test]
    fn toy_model_rank_d_matches_oracle() {
        let (h0, h) = toy_pair(7, 12, 0.3);
        let full = full_swt_oracle(&h0, &h, 3, None, 100).unwrap();
        let fast = rank_d(&h0, &h, 3);
        assert!((full - fast).camax() < 1e-10);
    }

    #[test]
    fn oracle_dimension_limit() {
        let (h0, h) = toy_pair(8, 12, 0.1);
        assert!(matches!(
            full_swt_oracle(&h0, &h, 3, None, 10),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn setup(seed: u64) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>, Vec<f64>) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 16;
            let base = orthonormalize((0..8).map(|_| random_vec(&mut rng, n)).collect());
            let basis0 = base[..4].to_vec();
            // coupled vectors: small rotation of the reference block
            let mix = random_unitary(&mut rng, 4);
            let mut coupled: Vec<Vec<Complex64>> = (0..4)
                .map(|i| {
                    let mut v = vec![c(0.0); n];
                    for j in 0..4 {
                        for (x, y) in v.iter_mut().zip(&base[j]) {
                            *x += y * mix[(j, i)];
                        }
                    }
                    for (x, y) in v.iter_mut().zip(&base[4 + i]) {
                        *x += y * 0.2;
                    }
                    v
                })
                .collect();
            coupled = orthonormalize(coupled);
            let mut e: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            e.sort_by(f64::total_cmp);
            (basis0, coupled, e)
        }

        proptest! {
            #[test]
            fn spectrum_is_preserved(seed in 0u64..1000) {
                let (b0, b, e) = setup(seed);
                let res = swt_projection(&overlap_matrix(&b0, &b).unwrap(), &e, 0.1).unwrap();
                let got = eig_sorted(&res.h_eff);
                for (x, y) in got.iter().zip(&e) {
                    prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
                }
                let ata = res.a.adjoint() * &res.a;
                prop_assert!((ata - DMatrix::identity(4, 4)).camax() < 1e-10);
            }

            #[test]
            fn coupled_phases_do_not_matter(seed in 0u64..1000, thetas in proptest::collection::vec(0.0f64..6.3, 4)) {
                let (b0, b, e) = setup(seed);
                let reference = swt_projection(&overlap_matrix(&b0, &b).unwrap(), &e, 0.1).unwrap().h_eff;
                let rotated: Vec<Vec<Complex64>> = b
                    .iter()
                    .zip(&thetas)
                    .map(|(v, &t)| v.iter().map(|x| x * Complex64::from_polar(1.0, t)).collect())
                    .collect();
                let h = swt_projection(&overlap_matrix(&b0, &rotated).unwrap(), &e, 0.1).unwrap().h_eff;
                prop_assert!((h - reference).camax() < 1e-10);
            }

            #[test]
            fn reference_phase_conjugates_entries(seed in 0u64..1000, theta in 0.0f64..6.3, i in 0usize..4) {
                let (mut b0, b, e) = setup(seed);
                let reference = swt_projection(&overlap_matrix(&b0, &b).unwrap(), &e, 0.1).unwrap().h_eff;
                let ph = Complex64::from_polar(1.0, theta);
                for x in b0[i].iter_mut() {
                    *x *= ph;
                }
                let h = swt_projection(&overlap_matrix(&b0, &b).unwrap(), &e, 0.1).unwrap().h_eff;
                let mut expected = reference.clone();
                for k in 0..4 {
                    if k != i {
                        expected[(i, k)] = reference[(i, k)] * ph.conj();
                        expected[(k, i)] = reference[(k, i)] * ph;
                    }
                }
                prop_assert!((h - expected).camax() < 1e-12);
            }
        }
    }
}
