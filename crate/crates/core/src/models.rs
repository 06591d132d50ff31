//! Constructors for the systems under study: two-qubit dephasing, the noisy
//! random Brownian circuit, the discrete SWAP circuit on Bell pairs, and the
//! XX chain with and without fields.

use crate::channel::{BondTerm, ChannelKind, Hamiltonian, JumpTerm, KrausSet, LindbladModel};
use crate::dense;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mps::{MpsState, SiteTensor};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub fn sz_half() -> DMatrix<C64> {
    dense::pauli_z() * C64::from(0.5)
}

/// Noisy random Brownian circuit: per-step Gaussian two-site couplings on
/// every bond plus uniform `σᶻ/2` dephasing.
#[derive(Clone, Debug)]
pub struct RbcSpec {
    pub length: usize,
    /// White-noise strength of the couplings: per step the couplings are
    /// drawn with `Var(g) = variance / dt` so that the coherent dynamics has
    /// a dt-independent strength per unit time.
    pub variance: f64,
    pub dt: f64,
    pub gamma: f64,
}

impl RbcSpec {
    pub fn new(length: usize, gamma: f64) -> Self {
        // dt policy: 0.01 / max(γ, 1).
        Self { length, variance: 1.0, dt: 0.01 / gamma.max(1.0), gamma }
    }
}

/// Draw the two-site coupling matrices of one Brownian layer.
///
/// All 16 Pauli pairs `(o, p)` on every bond get an i.i.d. Gaussian
/// coefficient with variance `variance/dt` (white-noise normalization). The
/// identity⊗identity term only contributes a global phase but is kept for
/// covariance fidelity. Draw order: bonds ascending, `(o, p)` row-major.
pub fn rbc_sample_step_hamiltonian(
    length: usize,
    variance: f64,
    dt: f64,
    rng: &mut ChaCha12Rng,
) -> Vec<BondTerm> {
    let sd = (variance / dt).sqrt();
    let mut out = Vec::with_capacity(length - 1);
    for bond in 0..length - 1 {
        let mut h = DMatrix::<C64>::zeros(4, 4);
        for o in 0..4 {
            for p in 0..4 {
                let g: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
                if g != 0.0 {
                    h += linalg::kron(&dense::pauli(o), &dense::pauli(p)) * C64::from(g);
                }
            }
        }
        out.push(BondTerm { left_site: bond, matrix: h });
    }
    out
}

pub fn rbc_model(spec: &RbcSpec) -> LindbladModel {
    LindbladModel {
        length: spec.length,
        local_dim: 2,
        hamiltonian: Hamiltonian::Brownian { variance: spec.variance },
        jumps: (0..spec.length)
            .map(|s| JumpTerm { site: s, op: sz_half(), rate: spec.gamma })
            .collect(),
        dt: spec.dt,
    }
}

/// Two qubits, no Hamiltonian, both dephasing at rate `γ` with `c = σᶻ/2`.
pub fn bell_dephasing_model(gamma: f64, dt: f64) -> LindbladModel {
    LindbladModel {
        length: 2,
        local_dim: 2,
        hamiltonian: Hamiltonian::Static(vec![]),
        jumps: vec![
            JumpTerm { site: 0, op: sz_half(), rate: gamma },
            JumpTerm { site: 1, op: sz_half(), rate: gamma },
        ],
        dt,
    }
}

/// `cos(x)|11⟩ + sin(x)·e^{iν}|00⟩` as a two-qubit MPS.
pub fn x_state(x: f64, nu: f64, max_bond: usize) -> MpsState {
    let mut v = DVector::from_element(4, C64::default());
    v[0] = C64::from_polar(x.sin(), nu);
    v[3] = C64::from(x.cos());
    MpsState::from_dense(&v, 2, 2, max_bond, 0.0).expect("valid x-state")
}

/// The Bell pair `(|00⟩ + |11⟩)/√2` as an MPS.
pub fn bell_pair_state(max_bond: usize) -> MpsState {
    x_state(std::f64::consts::FRAC_PI_4, 0.0, max_bond)
}

/// Closed-form optimal mixing angle for a dephasing channel acting on an
/// x-state: `θ(x, dt) = arcsin[sec(2x)·√(γdt)/2]`, with optimal phase 0.
pub fn theta_opt_bell(x: f64, gamma: f64, dt: f64) -> Result<f64> {
    let sec = 1.0 / (2.0 * x).cos();
    let arg = sec * (gamma * dt).sqrt() / 2.0;
    if arg.abs() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "arcsin argument {arg:.4} outside [-1, 1]; x too close to π/4 for this γdt"
        )));
    }
    Ok(arg.asin())
}

/// Chain of nearest-neighbor Bell pairs `|Φ⁺⟩^{⊗L/2}` in Γλ form: entropy is
/// one bit at odd cuts, zero at even cuts.
pub fn initial_bell_chain(length: usize, max_bond: usize, trunc_tol: f64) -> Result<MpsState> {
    if length % 2 != 0 || length == 0 {
        return Err(Error::InvalidInput(format!("Bell chain needs even length, got {length}")));
    }
    let mut state = MpsState::basis_state(&vec![0; length], 2, max_bond, trunc_tol)?;
    let isq = 1.0 / 2.0_f64.sqrt();
    for pair in 0..length / 2 {
        let left = 2 * pair;
        // Γ_left[0, p, i] = δ_{p,i}, Γ_right[i, p, 0] = δ_{i,p}, λ = (1/√2, 1/√2)
        let gl = SiteTensor::from_fn(1, 2, 2, |_, p, r| if p == r { C64::from(1.0) } else { C64::default() });
        let gr = SiteTensor::from_fn(2, 2, 1, |l, p, _| if l == p { C64::from(1.0) } else { C64::default() });
        state.replace_pair(left, gl, gr, DVector::from_vec(vec![isq, isq]));
    }
    Ok(state)
}

/// Discrete SWAP circuit with per-site dephasing of strength `p`.
#[derive(Clone, Debug)]
pub struct SwapCircuitSpec {
    /// Number of Bell pairs in the finite window (2·pair_count qubits).
    pub pair_count: usize,
    /// Circuit depth in full steps.
    pub depth: usize,
    /// Dephasing strength `p ∈ [0, 1]` of `ρ → (1−p)ρ + p·σᶻρσᶻ`.
    pub dephasing: f64,
}

impl SwapCircuitSpec {
    /// Ballistically separated partners (distance `4n`) must stay inside the
    /// window for the middle cut to be exact.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dephasing) {
            return Err(Error::InvalidInput(format!("p = {} outside [0, 1]", self.dephasing)));
        }
        if self.pair_count < 4 * self.depth + 4 {
            return Err(Error::InvalidInput(format!(
                "window of {} pairs too small for depth {} (needs ≥ {})",
                self.pair_count,
                self.depth,
                4 * self.depth + 4
            )));
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        2 * self.pair_count
    }
}

pub fn swap_gate() -> DMatrix<C64> {
    let mut g = DMatrix::<C64>::zeros(4, 4);
    g[(0, 0)] = C64::from(1.0);
    g[(1, 2)] = C64::from(1.0);
    g[(2, 1)] = C64::from(1.0);
    g[(3, 3)] = C64::from(1.0);
    g
}

/// Naive gauge of the discrete dephasing channel:
/// `K₀ = √(1−p)·1`, `K₁ = √p·σᶻ`. Exactly complete.
pub fn discrete_dephasing_naive(p: f64, site: usize) -> KrausSet {
    KrausSet {
        site,
        ops: vec![
            DMatrix::<C64>::identity(2, 2) * C64::from((1.0 - p).sqrt()),
            dense::pauli_z() * C64::from(p.sqrt()),
        ],
        label: "discrete-naive".into(),
        kind: ChannelKind::DiscreteDephasing { p },
        completeness_tol: 1e-12,
        jump_op: None,
    }
}

/// Projector gauge of the same channel:
/// `K̃₀ = |0⟩⟨0| + (1−2p)|1⟩⟨1|`, `K̃₁ = 2√(p(1−p))·|1⟩⟨1|`. Exactly
/// complete, and exactly the `θ = arcsin(√p)` gauge of the naive set.
pub fn discrete_dephasing_projector(p: f64, site: usize) -> KrausSet {
    let k0 = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(1.0), C64::from(1.0 - 2.0 * p)]));
    let k1 = DMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::default(),
        C64::from(2.0 * (p * (1.0 - p)).sqrt()),
    ]));
    KrausSet {
        site,
        ops: vec![k0, k1],
        label: "discrete-projector".into(),
        kind: ChannelKind::DiscreteDephasing { p },
        completeness_tol: 1e-12,
        jump_op: None,
    }
}

/// XX chain with optional longitudinal (`Δ`) and transverse (`h`) fields,
/// `σᶻ/2` dephasing at rate `γ` on every site.
#[derive(Clone, Debug)]
pub struct XxSpec {
    pub length: usize,
    pub omega: f64,
    pub delta: f64,
    pub h_field: f64,
    pub gamma: f64,
    pub dt: f64,
}

/// `σ± = σˣ ± iσʸ` (no 1/2), matching the convention the hopping term is
/// written in. `σ⁺σ⁻ + h.c. = 2(σˣσˣ + σʸσʸ)`.
fn hopping_term() -> DMatrix<C64> {
    let sx = dense::pauli_x();
    let sy = dense::pauli_y();
    (linalg::kron(&sx, &sx) + linalg::kron(&sy, &sy)) * C64::from(2.0)
}

pub fn xx_model(spec: &XxSpec) -> LindbladModel {
    let length = spec.length;
    let field = dense::pauli_z() * C64::from(spec.delta) + dense::pauli_x() * C64::from(spec.h_field);
    let id = dense::identity(2);
    let bonds: Vec<BondTerm> = (0..length - 1)
        .map(|j| {
            let mut m = hopping_term() * C64::from(spec.omega);
            // absorb single-site fields into the adjacent bonds: half weight
            // in the bulk, full weight at the chain ends
            let wl = if j == 0 { 1.0 } else { 0.5 };
            let wr = if j + 1 == length - 1 { 1.0 } else { 0.5 };
            m += linalg::kron(&(field.clone() * C64::from(wl)), &id);
            m += linalg::kron(&id, &(field.clone() * C64::from(wr)));
            BondTerm { left_site: j, matrix: m }
        })
        .collect();
    LindbladModel {
        length,
        local_dim: 2,
        hamiltonian: Hamiltonian::Static(bonds),
        jumps: (0..length)
            .map(|s| JumpTerm { site: s, op: sz_half(), rate: spec.gamma })
            .collect(),
        dt: spec.dt,
    }
}

/// Dense Hamiltonian matrix of a static model (oracle use, small `L`).
pub fn dense_hamiltonian(bonds: &[BondTerm], length: usize) -> DMatrix<C64> {
    let dim = 1usize << length;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for b in bonds {
        h += dense::embed_two_site(&b.matrix, length, 2, b.left_site);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn rbc_sampler_statistics() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let dt = 0.01;
        let variance = 1.0;
        // α = 0 gives all-zero couplings
        let zero = rbc_sample_step_hamiltonian(3, 0.0, dt, &mut rng);
        assert!(zero.iter().all(|b| b.matrix.norm() == 0.0));

        // Mean ≈ 0 and Var(g)·dt ≈ α, pairwise covariances ≈ 0. Coefficients
        // are read back off the Pauli basis: g_{op} = tr(H·σᵒ⊗σᵖ)/4.
        let n = 20_000;
        let mut coeffs: Vec<[f64; 16]> = Vec::with_capacity(n);
        for _ in 0..n {
            let terms = rbc_sample_step_hamiltonian(2, variance, dt, &mut rng);
            let mut row = [0.0; 16];
            for o in 0..4 {
                for p in 0..4 {
                    let basis = linalg::kron(&dense::pauli(o), &dense::pauli(p));
                    row[4 * o + p] = (terms[0].matrix.clone() * basis).trace().re / 4.0;
                }
            }
            coeffs.push(row);
        }
        let sd = (variance / dt).sqrt();
        for k in 0..16 {
            let mean: f64 = coeffs.iter().map(|r| r[k]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.5 * sd / (n as f64).sqrt(), "mean[{k}] = {mean}");
            let var: f64 = coeffs.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n as f64;
            assert_abs_diff_eq!(var * dt / variance, 1.0, epsilon = 0.08);
        }
        for (a, b) in [(0usize, 5usize), (3, 12), (7, 9)] {
            let cov: f64 = coeffs.iter().map(|r| r[a] * r[b]).sum::<f64>() / n as f64;
            assert!((cov / (sd * sd)).abs() < 5.0 / (n as f64).sqrt() * 3.0, "cov({a},{b}) = {cov}");
        }
    }

    #[test]
    fn theta_opt_values() {
        // x = 0, γdt = 0.01 → arcsin(0.05)
        let t = theta_opt_bell(0.0, 1.0, 0.01).unwrap();
        assert_abs_diff_eq!(t, 0.05_f64.asin(), epsilon = 1e-15);
        assert_abs_diff_eq!(t, 0.050021, epsilon = 1e-6);

        // cos x = 0.98, γdt = 0.01 → sec(2x) = 1/(2·0.98² − 1)
        let x = 0.98_f64.acos();
        let t = theta_opt_bell(x, 1.0, 0.01).unwrap();
        let sec = 1.0 / (2.0 * 0.98_f64.powi(2) - 1.0);
        assert_abs_diff_eq!(t, (sec * 0.05).asin(), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.05433, epsilon = 5e-5);

        // domain violation near x = π/4
        assert!(theta_opt_bell(std::f64::consts::FRAC_PI_4 - 1e-4, 1.0, 0.01).is_err());
    }

    #[test]
    fn bell_chain_entropies() {
        let state = initial_bell_chain(4, 8, 0.0).unwrap();
        assert_abs_diff_eq!(state.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.entropy(1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.entropy(2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.entropy(3), 1.0, epsilon = 1e-12);
        assert!(state.canonical_residual() < 1e-12);
        // matches the dense construction
        let pair = DVector::from_vec(vec![
            C64::from(1.0 / 2f64.sqrt()),
            C64::default(),
            C64::default(),
            C64::from(1.0 / 2f64.sqrt()),
        ]);
        let dense_bell = DVector::from_fn(16, |i, _| pair[i / 4] * pair[i % 4]);
        assert!((state.to_dense() - dense_bell).norm() < 1e-12);
    }

    #[test]
    fn discrete_gauges_are_equivalent() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for &p in &[0.0, 0.01, 0.3, 0.5, 0.9] {
            let naive = discrete_dephasing_naive(p, 0);
            let proj = discrete_dephasing_projector(p, 0);
            naive.check_completeness().unwrap();
            proj.check_completeness().unwrap();
            let rho = dense::random_density(2, &mut rng);
            let a = naive.apply_to_density(&rho);
            let b = proj.apply_to_density(&rho);
            assert!((a - b).norm() < 1e-12, "gauge mismatch at p = {p}");
            // exact isometric relation at θ = arcsin(√p)
            let theta = p.sqrt().asin();
            let t = crate::channel::transform_kraus(
                &naive,
                &crate::channel::IsometryParams::TwoByTwo { theta, phi: 0.0 },
            )
            .unwrap();
            assert!((t.ops[0].clone() - &proj.ops[0]).norm() < 1e-12);
            assert!((t.ops[1].clone() - &proj.ops[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn xx_model_is_hermitian_and_validates() {
        let spec = XxSpec { length: 4, omega: 1.0, delta: 0.02, h_field: 0.02, gamma: 0.4, dt: 0.005 };
        let model = xx_model(&spec);
        model.validate().unwrap();
        if let Hamiltonian::Static(bonds) = &model.hamiltonian {
            assert_eq!(bonds.len(), 3);
            for b in bonds {
                assert!((b.matrix.clone() - b.matrix.adjoint()).norm() < 1e-14);
            }
            // total field weight sums to one per site
            let h_total = dense_hamiltonian(bonds, 4);
            assert!((h_total.clone() - h_total.adjoint()).norm() < 1e-12);
        } else {
            panic!("XX model should be static");
        }
    }

    #[test]
    fn swap_spec_window_invariant() {
        assert!(SwapCircuitSpec { pair_count: 12, depth: 2, dephasing: 0.1 }.validate().is_ok());
        assert!(SwapCircuitSpec { pair_count: 7, depth: 1, dephasing: 0.1 }.validate().is_err());
        assert!(SwapCircuitSpec { pair_count: 30, depth: 3, dephasing: 1.5 }.validate().is_err());
    }
}
