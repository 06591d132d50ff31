//! Dense state-vector and density-matrix helpers.
//!
//! Everything here works on full `d^L`-dimensional objects with site 0 as the
//! most significant digit (matching [`crate::mps::MpsState::to_dense`]). This
//! is the substrate for the brute-force oracles; none of it touches the MPS
//! code paths it is used to check.

use crate::linalg;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn identity(d: usize) -> DMatrix<C64> {
    DMatrix::identity(d, d)
}

pub fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[C64::default(), C64::from(1.0), C64::from(1.0), C64::default()])
}

pub fn pauli_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[
        C64::default(),
        C64::new(0.0, -1.0),
        C64::new(0.0, 1.0),
        C64::default(),
    ])
}

pub fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(1.0), C64::from(-1.0)]))
}

/// σ⁰..σ³ = 1, x, y, z.
pub fn pauli(i: usize) -> DMatrix<C64> {
    match i {
        0 => identity(2),
        1 => pauli_x(),
        2 => pauli_y(),
        3 => pauli_z(),
        _ => panic!("pauli index {i}"),
    }
}

/// Normalized Haar-ish random state of dimension `n` (Gaussian components).
pub fn random_state(n: usize, rng: &mut impl Rng) -> DVector<C64> {
    let mut v = DVector::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = v.norm();
    v /= C64::from(norm);
    v
}

/// Haar-random unitary via QR of a Ginibre matrix with phase fixing.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / C64::from(rjj.norm()) } else { C64::from(1.0) };
        let mut col = q.column_mut(j);
        col *= phase.conj();
    }
    q
}

/// Random density matrix (mixed, full rank) of dimension `n`.
pub fn random_density(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho / C64::from(tr)
}

/// Embed a single-site operator at `site` into the full `d^L` space.
pub fn embed_single_site(op: &DMatrix<C64>, length: usize, d: usize, site: usize) -> DMatrix<C64> {
    let left = d.pow(site as u32);
    let right = d.pow((length - site - 1) as u32);
    linalg::kron(&linalg::kron(&identity(left), op), &identity(right))
}

/// Embed a two-site operator at `(site, site+1)` into the full space.
pub fn embed_two_site(op: &DMatrix<C64>, length: usize, d: usize, left_site: usize) -> DMatrix<C64> {
    let left = d.pow(left_site as u32);
    let right = d.pow((length - left_site - 2) as u32);
    linalg::kron(&linalg::kron(&identity(left), op), &identity(right))
}

/// Apply a two-site gate to a dense state without building the full matrix.
pub fn apply_two_site(v: &DVector<C64>, length: usize, left_site: usize, gate: &DMatrix<C64>) -> DVector<C64> {
    let d = 2usize;
    let n = v.len();
    debug_assert_eq!(n, d.pow(length as u32));
    let right = d.pow((length - left_site - 2) as u32);
    let pair_stride = right;
    let mut out = DVector::from_element(n, C64::default());
    let block = d * d;
    let outer = n / (block * right);
    for a in 0..outer {
        for r in 0..right {
            // gather the 4 amplitudes of the two-site block
            let base = a * block * right + r;
            let mut amps = [C64::default(); 4];
            for (k, amp) in amps.iter_mut().enumerate() {
                *amp = v[base + k * pair_stride];
            }
            for i in 0..block {
                let mut acc = C64::default();
                for (k, amp) in amps.iter().enumerate() {
                    acc += gate[(i, k)] * amp;
                }
                out[base + i * pair_stride] += acc;
            }
        }
    }
    out
}

/// Apply a single-site operator to a dense state.
pub fn apply_single_site(v: &DVector<C64>, length: usize, site: usize, op: &DMatrix<C64>) -> DVector<C64> {
    let d = op.nrows();
    let n = v.len();
    let right = d.pow((length - site - 1) as u32);
    let mut out = DVector::from_element(n, C64::default());
    let outer = n / (d * right);
    for a in 0..outer {
        for r in 0..right {
            let base = a * d * right + r;
            for i in 0..d {
                let mut acc = C64::default();
                for k in 0..d {
                    acc += op[(i, k)] * v[base + k * right];
                }
                out[base + i * right] += acc;
            }
        }
    }
    out
}

/// Reduced density matrix of the first `cut` sites of a dense pure state.
pub fn reduced_density_dense(v: &DVector<C64>, length: usize, d: usize, cut: usize) -> DMatrix<C64> {
    let da = d.pow(cut as u32);
    let db = d.pow((length - cut) as u32);
    let mut rho = DMatrix::<C64>::zeros(da, da);
    for i in 0..da {
        for j in 0..da {
            let mut acc = C64::default();
            for b in 0..db {
                acc += v[i * db + b] * v[j * db + b].conj();
            }
            rho[(i, j)] = acc;
        }
    }
    rho
}

/// Partial trace over subsystem B of a density matrix on A⊗B.
pub fn partial_trace_b(rho: &DMatrix<C64>, da: usize, db: usize) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(da, da);
    for i in 0..da {
        for j in 0..da {
            let mut acc = C64::default();
            for b in 0..db {
                acc += rho[(i * db + b, j * db + b)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Von Neumann entropy (bits) of a density matrix.
pub fn entropy_of_density(rho: &DMatrix<C64>) -> f64 {
    let eig = linalg::eigvalsh(rho);
    crate::mps::entropy_of_squared(eig.iter().copied())
}

/// Trace distance `‖a − b‖₁ / 2`.
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let diff = a - b;
    let eig = linalg::eigvalsh(&diff);
    0.5 * eig.iter().map(|x| x.abs()).sum::<f64>()
}
