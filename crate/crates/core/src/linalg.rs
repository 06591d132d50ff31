//! Dense linear-algebra kernels shared across the crate.
//!
//! Matrices are `nalgebra` dynamic matrices over `Complex64`. The heavy
//! decompositions (SVD, self-adjoint eigen) are routed through `faer`, which
//! is considerably faster at the bond dimensions reached by the trajectory
//! engine; the conversions are zero-copy on the input side since both
//! libraries use column-major storage.

use faer::linalg::solvers::{SelfAdjointEigen, Svd};
use faer::mat::MatRef;
use faer::Side;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::sync::Once;

static FAER_INIT: Once = Once::new();

/// Trajectory workers parallelize over trajectories; keep faer sequential so
/// the two levels of parallelism do not fight over cores.
fn faer_seq() {
    FAER_INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

fn as_faer(m: &DMatrix<C64>) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn from_faer(m: faer::mat::MatRef<'_, C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin singular value decomposition `m = u * diag(s) * v†`.
///
/// Singular values are returned in descending order.
pub fn svd_thin(m: &DMatrix<C64>) -> (DMatrix<C64>, DVector<f64>, DMatrix<C64>) {
    faer_seq();
    let svd = Svd::new_thin(as_faer(m)).expect("svd failed to converge");
    let u = from_faer(svd.U());
    let k = svd.S().dim();
    let s = DVector::from_fn(k, |i, _| svd.S()[i].re);
    let v = from_faer(svd.V());
    (u, s, v.adjoint())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns.
pub fn eigh(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    faer_seq();
    let e = SelfAdjointEigen::new(as_faer(m), Side::Lower).expect("eigh failed to converge");
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    let w: Vec<f64> = (0..n).map(|i| e.S()[i].re).collect();
    idx.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap());
    let vals = DVector::from_fn(n, |i, _| w[idx[i]]);
    let vecs = DMatrix::from_fn(n, n, |i, j| e.U()[(i, idx[j])]);
    (vals, vecs)
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &DMatrix<C64>) -> DVector<f64> {
    let (vals, _) = eigh(m);
    vals
}

/// `exp(-i * h * t)` for Hermitian `h`, through the eigendecomposition.
pub fn expm_i_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let (w, u) = eigh(h);
    let phases = DVector::from_fn(w.len(), |i, _| C64::from_polar(1.0, -w[i] * t));
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * u.adjoint()
}

/// General matrix exponential by scaling-and-squaring with a Padé(13)
/// approximant. Intended for superoperator generators in the dense oracles.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    // 1-norm based scaling
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let theta13 = 5.371920351148152;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.map(|x| x / C64::from(2f64.powi(s)));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (&a6 * C64::from(B[13]) + &a4 * C64::from(B[11]) + &a2 * C64::from(B[9]))
        + &a6 * C64::from(B[7])
        + &a4 * C64::from(B[5])
        + &a2 * C64::from(B[3])
        + &id * C64::from(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * C64::from(B[12]) + &a4 * C64::from(B[10]) + &a2 * C64::from(B[8]))
        + &a6 * C64::from(B[6])
        + &a4 * C64::from(B[4])
        + &a2 * C64::from(B[2])
        + &id * C64::from(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("expm: Padé denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Hermitian square root of a PSD matrix; eigenvalues clipped at zero.
pub fn sqrtm_psd(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (w, u) = eigh(m);
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::from(w[j].max(0.0).sqrt());
    }
    scaled * u.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
        DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = random_matrix(17, &mut rng);
        let (u, s, vt) = svd_thin(&m);
        let mut us = u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= C64::from(s[j]);
        }
        let err = (us * vt - &m).norm();
        assert!(err < 1e-12, "svd reconstruction error {err}");
        for i in 1..s.len() {
            assert!(s[i] <= s[i - 1] + 1e-14);
        }
    }

    #[test]
    fn eigh_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let m = random_matrix(13, &mut rng);
        let h = &m + m.adjoint();
        let (w, u) = eigh(&h);
        let mut uw = u.clone();
        for (j, mut col) in uw.column_iter_mut().enumerate() {
            col *= C64::from(w[j]);
        }
        let err = (uw * u.adjoint() - &h).norm();
        assert!(err < 1e-11, "eigh reconstruction error {err}");
    }

    #[test]
    fn expm_matches_hermitian_route() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = random_matrix(8, &mut rng);
        let h = &m + m.adjoint();
        let direct = expm_i_hermitian(&h, 0.37);
        let generic = expm(&(h.map(|x| x * C64::new(0.0, -0.37))));
        assert_abs_diff_eq!((direct - generic).norm(), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn expm_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.3, 0.1),
            C64::new(-1.2, 2.0),
        ]));
        let e = expm(&d);
        assert_abs_diff_eq!((e[(0, 0)] - d[(0, 0)].exp()).norm(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!((e[(1, 1)] - d[(1, 1)].exp()).norm(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(e[(0, 1)].norm(), 0.0, epsilon = 1e-15);
    }
}
