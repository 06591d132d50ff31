//! Quantum channels as Kraus sets, the isometric gauge freedom between
//! equivalent representations, and Trotterized discretization of Lindblad
//! generators into per-step channel sequences.
//!
//! A channel `ρ → Σ_α K_α ρ K_α†` is represented by the ordered operator list
//! `{K_α}`. Replacing the list by `R_α = Σ_β T_{αβ} K_β` with any right
//! unitary `T` (`T†T = 1`) leaves the channel invariant while changing the
//! pure-state ensemble a trajectory sampler produces — that gauge freedom is
//! what the adaptive strategies exploit.

use crate::dense;
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha12Rng;

/// What physical construction produced a Kraus set. Strategies that
/// substitute special gauges (the projector gauge in particular) need to
/// know this.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelKind {
    /// `K₀ = 1 − (γdt/2)c†c`, `K₁ = √(γdt)·c` from a Lindblad jump operator.
    LindbladPair { gamma: f64, dt: f64 },
    /// Discrete dephasing `ρ → (1−p)ρ + p σᶻρσᶻ` in its naive gauge.
    DiscreteDephasing { p: f64 },
    Generic,
}

/// An ordered Kraus representation of a single-site channel.
#[derive(Clone, Debug)]
pub struct KrausSet {
    pub site: usize,
    pub ops: Vec<DMatrix<C64>>,
    /// Strategy/construction tag for diagnostics and CSV output.
    pub label: String,
    pub kind: ChannelKind,
    /// Tolerance class for the completeness check: `10(γdt)²` for
    /// discretized pairs, `1e-12` for exact discrete channels.
    pub completeness_tol: f64,
    /// The jump operator behind a Lindblad pair, kept so adaptive strategies
    /// can rebuild the pair at probe time steps.
    pub jump_op: Option<DMatrix<C64>>,
}

impl KrausSet {
    pub fn branch_count(&self) -> usize {
        self.ops.len()
    }

    pub fn local_dim(&self) -> usize {
        self.ops[0].nrows()
    }

    /// `‖Σ K†K − 1‖` (Frobenius).
    pub fn completeness_residual(&self) -> f64 {
        let d = self.local_dim();
        let mut acc = DMatrix::<C64>::zeros(d, d);
        for k in &self.ops {
            acc += k.adjoint() * k;
        }
        (acc - DMatrix::<C64>::identity(d, d)).norm()
    }

    pub fn check_completeness(&self) -> Result<()> {
        let r = self.completeness_residual();
        if r > self.completeness_tol {
            return Err(Error::InvalidInput(format!(
                "Kraus completeness residual {r:.3e} exceeds tolerance {:.3e}",
                self.completeness_tol
            )));
        }
        Ok(())
    }

    /// Channel superoperator `Σ K ⊗ K̄` over the row-major vectorized index
    /// `|i⟩⟨j| → i·d + j`. Gauge-invariant by construction.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let d = self.local_dim();
        let mut s = DMatrix::<C64>::zeros(d * d, d * d);
        for k in &self.ops {
            s += linalg::kron(k, &k.map(|x| x.conj()));
        }
        s
    }

    /// Apply the channel to a density matrix (dense check path).
    pub fn apply_to_density(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
        for k in &self.ops {
            out += k * rho * k.adjoint();
        }
        out
    }
}

/// Angles and phases of a right-unitary `r×2` branch transform.
///
/// The matrices are materialized from the angles rather than stored, which
/// keeps the optimizers in unconstrained parameter space.
#[derive(Clone, Debug, PartialEq)]
pub enum IsometryParams {
    /// The minimal 2×2 class
    /// `[[cosθ, sinθ·e^{−iφ}], [sinθ, −cosθ·e^{−iφ}]]`.
    TwoByTwo { theta: f64, phi: f64 },
    /// 3×2 right unitaries with five parameters.
    ThreeByTwo { thetas: [f64; 3], alpha: f64, beta: f64 },
    /// 4×2 right unitaries with eight parameters.
    FourByTwo { thetas: [f64; 5], alpha: f64, beta: f64, gamma: f64 },
}

impl IsometryParams {
    pub fn identity() -> Self {
        Self::TwoByTwo { theta: 0.0, phi: 0.0 }
    }

    pub fn branch_count(&self) -> usize {
        match self {
            Self::TwoByTwo { .. } => 2,
            Self::ThreeByTwo { .. } => 3,
            Self::FourByTwo { .. } => 4,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Self::TwoByTwo { .. } => 2,
            Self::ThreeByTwo { .. } => 5,
            Self::FourByTwo { .. } => 8,
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            Self::TwoByTwo { theta, phi } => vec![*theta, *phi],
            Self::ThreeByTwo { thetas, alpha, beta } => {
                vec![thetas[0], thetas[1], thetas[2], *alpha, *beta]
            }
            Self::FourByTwo { thetas, alpha, beta, gamma } => vec![
                thetas[0], thetas[1], thetas[2], thetas[3], thetas[4], *alpha, *beta, *gamma,
            ],
        }
    }

    pub fn from_vector(branches: usize, v: &[f64]) -> Self {
        match branches {
            2 => Self::TwoByTwo { theta: v[0], phi: v[1] },
            3 => Self::ThreeByTwo { thetas: [v[0], v[1], v[2]], alpha: v[3], beta: v[4] },
            4 => Self::FourByTwo {
                thetas: [v[0], v[1], v[2], v[3], v[4]],
                alpha: v[5],
                beta: v[6],
                gamma: v[7],
            },
            _ => panic!("unsupported branch count {branches}"),
        }
    }

    /// Materialize the `r×2` matrix.
    pub fn materialize(&self) -> DMatrix<C64> {
        let e = |x: f64| C64::from_polar(1.0, x);
        match *self {
            Self::TwoByTwo { theta, phi } => {
                let (s, c) = theta.sin_cos();
                DMatrix::from_row_slice(2, 2, &[
                    C64::from(c),
                    C64::from(s) * e(-phi),
                    C64::from(s),
                    -C64::from(c) * e(-phi),
                ])
            }
            Self::ThreeByTwo { thetas: [t1, t2, t3], alpha, beta } => {
                let (s1, c1) = t1.sin_cos();
                let (s2, c2) = t2.sin_cos();
                let (s3, c3) = t3.sin_cos();
                DMatrix::from_row_slice(3, 2, &[
                    C64::from(c1),
                    C64::from(s1 * c2) * e(alpha),
                    C64::from(s1 * c3),
                    -C64::from(c1 * c2 * c3) * e(alpha) - C64::from(s2 * s3) * e(-beta),
                    C64::from(s1 * s3),
                    -C64::from(c1 * c2 * s3) * e(alpha) + C64::from(s2 * c3) * e(-beta),
                ])
            }
            Self::FourByTwo { thetas: [t1, t2, t3, t4, t5], alpha, beta, gamma } => {
                let (s1, c1) = t1.sin_cos();
                let (s2, c2) = t2.sin_cos();
                let (s3, c3) = t3.sin_cos();
                let (s4, c4) = t4.sin_cos();
                let (s5, c5) = t5.sin_cos();
                DMatrix::from_row_slice(4, 2, &[
                    C64::from(c1),
                    C64::from(s1 * c2) * e(alpha),
                    C64::from(s1 * c3),
                    C64::from(s2 * s3 * c5) * e(beta) - C64::from(c1 * c2 * c3) * e(alpha),
                    C64::from(s1 * s3 * c4),
                    C64::from(s2 * s4 * s5) * e(gamma) - C64::from(c1 * c2 * s3 * c4) * e(alpha)
                        - C64::from(s2 * c3 * c4 * c5) * e(beta),
                    C64::from(s1 * s3 * s4),
                    -C64::from(c1 * c2 * s3 * s4) * e(alpha) - C64::from(s2 * c3 * s4 * c5) * e(beta)
                        - C64::from(s2 * c4 * s5) * e(gamma),
                ])
            }
        }
    }

    /// `‖T†T − 1₂‖`: zero for exact right unitarity.
    pub fn right_unitarity_residual(&self) -> f64 {
        let t = self.materialize();
        (t.adjoint() * &t - DMatrix::<C64>::identity(2, 2)).norm()
    }
}

/// Gauge a Kraus set: `R_α = Σ_β T_{αβ} K_β`.
///
/// The channel action is preserved exactly; only the branch decomposition
/// changes.
pub fn transform_kraus(set: &KrausSet, params: &IsometryParams) -> Result<KrausSet> {
    let t = params.materialize();
    if t.ncols() != set.ops.len() {
        return Err(Error::DimensionMismatch(format!(
            "transform has {} columns, set has {} operators",
            t.ncols(),
            set.ops.len()
        )));
    }
    let d = set.local_dim();
    let mut ops = Vec::with_capacity(t.nrows());
    for a in 0..t.nrows() {
        let mut r = DMatrix::<C64>::zeros(d, d);
        for b in 0..t.ncols() {
            r += &set.ops[b] * t[(a, b)];
        }
        ops.push(r);
    }
    Ok(KrausSet {
        site: set.site,
        ops,
        label: format!("{}+gauge", set.label),
        kind: set.kind.clone(),
        completeness_tol: set.completeness_tol,
        jump_op: set.jump_op.clone(),
    })
}

/// The two-operator Kraus pair of a Trotterized decoherence channel:
/// `K₀ = 1 − (γdt/2)·c†c`, `K₁ = √(γdt)·c`. Completeness holds to
/// `O((γdt)²)`.
pub fn local_kraus_pair(c: &DMatrix<C64>, gamma: f64, dt: f64, site: usize) -> Result<KrausSet> {
    if gamma < 0.0 {
        return Err(Error::InvalidInput(format!("negative rate {gamma}")));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidInput(format!("non-positive time step {dt}")));
    }
    let d = c.nrows();
    let gdt = gamma * dt;
    let k0 = DMatrix::<C64>::identity(d, d) - c.adjoint() * c * C64::from(gdt / 2.0);
    let k1 = c * C64::from(gdt.sqrt());
    Ok(KrausSet {
        site,
        ops: vec![k0, k1],
        label: "jump".into(),
        kind: ChannelKind::LindbladPair { gamma, dt },
        completeness_tol: (10.0 * gdt * gdt).max(1e-12),
        jump_op: Some(c.clone()),
    })
}

/// The projector variant of the jump gauge for `σᶻ/2` dephasing:
/// `K̃₀ = 1 − (γdt/2)|1⟩⟨1|`, `K̃₁ = √(γdt)|1⟩⟨1|`.
///
/// Up to `O((γdt)²)` this is the gauge of [`local_kraus_pair`] transformed by
/// `θ(dt) = arcsin(√(γdt)/2)`, `φ = 0`; the two constructions coincide in the
/// small-step limit.
pub fn qj_projector_kraus(gamma: f64, dt: f64, site: usize) -> Result<KrausSet> {
    if gamma < 0.0 {
        return Err(Error::InvalidInput(format!("negative rate {gamma}")));
    }
    let gdt = gamma * dt;
    let one = DVector::from_vec(vec![C64::default(), C64::from(1.0)]);
    let proj = &one * one.adjoint();
    let k0 = DMatrix::<C64>::identity(2, 2) - &proj * C64::from(gdt / 2.0);
    let k1 = &proj * C64::from(gdt.sqrt());
    Ok(KrausSet {
        site,
        ops: vec![k0, k1],
        label: "jump-projector".into(),
        kind: ChannelKind::LindbladPair { gamma, dt },
        completeness_tol: (10.0 * gdt * gdt).max(1e-12),
        jump_op: None,
    })
}

/// The state-diffusion pair for `σᶻ/2` dephasing:
/// `R_± = (1/√2)[(1 − γdt/8)·1 ± e^{−iφ}√(γdt)·σᶻ/2]`,
/// i.e. the `θ = π/4` gauge of the standard pair.
pub fn qsd_kraus(gamma: f64, dt: f64, phi: f64, site: usize) -> Result<KrausSet> {
    let c = dense::pauli_z() * C64::from(0.5);
    let pair = local_kraus_pair(&c, gamma, dt, site)?;
    let mut out = transform_kraus(&pair, &IsometryParams::TwoByTwo { theta: std::f64::consts::FRAC_PI_4, phi })?;
    out.label = "qsd".into();
    Ok(out)
}

/// One nearest-neighbor Hamiltonian term, `d²×d²` over the composite index
/// `p_left·d + p_right`. Single-site fields are absorbed into bond terms by
/// the model constructors.
#[derive(Clone, Debug)]
pub struct BondTerm {
    pub left_site: usize,
    pub matrix: DMatrix<C64>,
}

/// One jump operator with its site and rate.
#[derive(Clone, Debug)]
pub struct JumpTerm {
    pub site: usize,
    pub op: DMatrix<C64>,
    pub rate: f64,
}

/// Coherent part of a Lindblad model.
#[derive(Clone, Debug)]
pub enum Hamiltonian {
    /// Fixed bond terms, Trotter gates precomputed once.
    Static(Vec<BondTerm>),
    /// Brownian couplings: every step draws fresh Gaussian Pauli-pair
    /// couplings on every bond with white-noise normalization
    /// `Var(g) = variance / dt`.
    Brownian { variance: f64 },
}

/// A Markovian master equation plus its time-step policy.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub length: usize,
    pub local_dim: usize,
    pub hamiltonian: Hamiltonian,
    pub jumps: Vec<JumpTerm>,
    pub dt: f64,
}

impl LindbladModel {
    /// Hard validation plus soft warnings (`dt·max γ > 0.05`).
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.dt <= 0.0 {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        let mut warnings = Vec::new();
        let mut max_rate = 0.0_f64;
        for j in &self.jumps {
            if j.rate < 0.0 {
                return Err(Error::InvalidInput(format!("negative rate at site {}", j.site)));
            }
            if j.site >= self.length {
                return Err(Error::InvalidInput(format!("jump site {} out of range", j.site)));
            }
            max_rate = max_rate.max(j.rate);
        }
        if self.dt * max_rate > 0.05 {
            warnings.push(format!(
                "dt·max(γ) = {:.3} is large; first-order Trotter error may dominate",
                self.dt * max_rate
            ));
        }
        Ok(warnings)
    }

    /// Hamiltonian bond terms for step `step`. Static models ignore the RNG;
    /// Brownian models draw fresh couplings (bond-ascending, operator pair
    /// `(o,p)` in row-major order — the draw order is part of the
    /// reproducibility contract).
    pub fn step_bond_terms(&self, rng: &mut ChaCha12Rng) -> Vec<BondTerm> {
        match &self.hamiltonian {
            Hamiltonian::Static(terms) => terms.clone(),
            Hamiltonian::Brownian { variance } => {
                crate::models::rbc_sample_step_hamiltonian(self.length, *variance, self.dt, rng)
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self.hamiltonian, Hamiltonian::Static(_))
    }
}

/// One element of a Trotterized step sequence.
#[derive(Clone, Debug)]
pub enum ChannelOp {
    /// Unitary two-site gate (a rank-1 channel): applied deterministically.
    Gate2 { left_site: usize, gate: DMatrix<C64> },
    /// A stochastic single-site channel.
    Kraus(KrausSet),
}

/// The ops of one Trotter step, in application order.
#[derive(Clone, Debug)]
pub struct TrotterStep {
    pub ops: Vec<ChannelOp>,
}

/// A reusable stepper for a Lindblad model: coherent gates (even bonds, then
/// odd bonds), then one Kraus channel per jump operator in site order.
#[derive(Clone, Debug)]
pub struct TrotterPlan {
    pub model: LindbladModel,
    static_gates: Option<Vec<(usize, DMatrix<C64>)>>,
    kraus: Vec<KrausSet>,
}

fn gates_from_bonds(bonds: &[BondTerm], dt: f64) -> Vec<(usize, DMatrix<C64>)> {
    let mut even: Vec<(usize, DMatrix<C64>)> = Vec::new();
    let mut odd: Vec<(usize, DMatrix<C64>)> = Vec::new();
    for b in bonds {
        let gate = linalg::expm_i_hermitian(&b.matrix, dt);
        if b.left_site % 2 == 0 {
            even.push((b.left_site, gate));
        } else {
            odd.push((b.left_site, gate));
        }
    }
    even.sort_by_key(|(s, _)| *s);
    odd.sort_by_key(|(s, _)| *s);
    even.extend(odd);
    even
}

impl TrotterPlan {
    pub fn new(model: LindbladModel) -> Result<Self> {
        model.validate()?;
        let mut kraus = Vec::new();
        let mut jumps = model.jumps.clone();
        jumps.sort_by_key(|j| j.site);
        for j in &jumps {
            kraus.push(local_kraus_pair(&j.op, j.rate, model.dt, j.site)?);
        }
        let static_gates = match &model.hamiltonian {
            Hamiltonian::Static(bonds) => Some(gates_from_bonds(bonds, model.dt)),
            Hamiltonian::Brownian { .. } => None,
        };
        Ok(Self { model, static_gates, kraus })
    }

    pub fn length(&self) -> usize {
        self.model.length
    }

    pub fn local_dim(&self) -> usize {
        self.model.local_dim
    }

    pub fn dt(&self) -> f64 {
        self.model.dt
    }

    pub fn num_channels(&self) -> usize {
        self.kraus.len()
    }

    /// Number of steps for an evolution time `t`; `t` must be an integer
    /// multiple of `dt` within 1e-9 relative.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        let n = t / self.model.dt;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "time {t} is not commensurate with dt {}",
                self.model.dt
            )));
        }
        Ok(rounded as usize)
    }

    /// Materialize one step. Brownian models consume `rng`; static models do
    /// not touch it.
    pub fn step(&self, rng: &mut ChaCha12Rng) -> TrotterStep {
        let gates = match &self.static_gates {
            Some(g) => g.clone(),
            None => gates_from_bonds(&self.model.step_bond_terms(rng), self.model.dt),
        };
        let mut ops: Vec<ChannelOp> =
            gates.into_iter().map(|(s, g)| ChannelOp::Gate2 { left_site: s, gate: g }).collect();
        ops.extend(self.kraus.iter().cloned().map(ChannelOp::Kraus));
        TrotterStep { ops }
    }

    /// The bond terms a step would use, for oracles that integrate the exact
    /// generator with the same piecewise Hamiltonian. Consumes the RNG in
    /// exactly the same way as [`step`](Self::step).
    pub fn step_bonds(&self, rng: &mut ChaCha12Rng) -> Vec<BondTerm> {
        self.model.step_bond_terms(rng)
    }
}

/// Ordered channel sequence for an evolution of duration `t`: the flattened
/// `n_steps × (gates + channels)` list.
pub fn trotter_sequence(model: &LindbladModel, t: f64, rng: &mut ChaCha12Rng) -> Result<Vec<TrotterStep>> {
    let plan = TrotterPlan::new(model.clone())?;
    let n = plan.steps_for(t)?;
    Ok((0..n).map(|_| plan.step(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn sz_half() -> DMatrix<C64> {
        dense::pauli_z() * C64::from(0.5)
    }

    #[test]
    fn kraus_pair_examples() {
        // γ = 0 → (1, 0)
        let set = local_kraus_pair(&sz_half(), 0.0, 0.1, 0).unwrap();
        assert!((set.ops[0].clone() - DMatrix::<C64>::identity(2, 2)).norm() < 1e-15);
        assert!(set.ops[1].norm() < 1e-15);

        // γdt = 0.01, c = σᶻ/2: K₀ = (1 − 0.00125)·1, K₁ = 0.05·σᶻ
        let set = local_kraus_pair(&sz_half(), 1.0, 0.01, 0).unwrap();
        assert_abs_diff_eq!(set.ops[0][(0, 0)].re, 1.0 - 0.00125, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[0][(1, 1)].re, 1.0 - 0.00125, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[1][(0, 0)].re, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[1][(1, 1)].re, -0.05, epsilon = 1e-15);

        // completeness residual: (γdt/2)²·‖(c†c)²‖ = 1.5625e-6·‖1/16·1‖
        let res = set.completeness_residual();
        let expected = (0.005_f64).powi(2) / 16.0 * 2.0_f64.sqrt();
        assert_abs_diff_eq!(res, expected, epsilon = 1e-18);
        set.check_completeness().unwrap();
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(local_kraus_pair(&sz_half(), -1.0, 0.1, 0).is_err());
    }

    #[test]
    fn isometries_are_right_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        use rand::Rng;
        for _ in 0..50 {
            let p2 = IsometryParams::TwoByTwo {
                theta: rng.gen::<f64>() * PI,
                phi: rng.gen::<f64>() * 2.0 * PI,
            };
            assert!(p2.right_unitarity_residual() < 1e-12);
            let p3 = IsometryParams::ThreeByTwo {
                thetas: [rng.gen::<f64>() * PI, rng.gen::<f64>() * PI, rng.gen::<f64>() * PI],
                alpha: rng.gen::<f64>() * 2.0 * PI,
                beta: rng.gen::<f64>() * 2.0 * PI,
            };
            assert!(p3.right_unitarity_residual() < 1e-12, "3x2 residual {}", p3.right_unitarity_residual());
            let p4 = IsometryParams::FourByTwo {
                thetas: [
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                ],
                alpha: rng.gen::<f64>() * 2.0 * PI,
                beta: rng.gen::<f64>() * 2.0 * PI,
                gamma: rng.gen::<f64>() * 2.0 * PI,
            };
            assert!(p4.right_unitarity_residual() < 1e-12, "4x2 residual {}", p4.right_unitarity_residual());
        }
    }

    #[test]
    fn transform_preserves_channel_action() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        use rand::Rng;
        let set = local_kraus_pair(&sz_half(), 2.0, 0.01, 0).unwrap();
        for _ in 0..20 {
            let params = IsometryParams::FourByTwo {
                thetas: [
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                    rng.gen::<f64>() * PI,
                ],
                alpha: rng.gen::<f64>() * 2.0 * PI,
                beta: rng.gen::<f64>() * 2.0 * PI,
                gamma: rng.gen::<f64>() * 2.0 * PI,
            };
            let transformed = transform_kraus(&set, &params).unwrap();
            // Σ R†R = Σ K†K exactly
            let sum = |s: &KrausSet| {
                let mut acc = DMatrix::<C64>::zeros(2, 2);
                for k in &s.ops {
                    acc += k.adjoint() * k;
                }
                acc
            };
            assert!((sum(&set) - sum(&transformed)).norm() < 1e-12);
            // channel action identical on a random density matrix
            let rho = dense::random_density(2, &mut rng);
            let a = set.apply_to_density(&rho);
            let b = transformed.apply_to_density(&rho);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_gauge_flips_second_branch() {
        // θ = 0, φ = 0 gives diag(1, −1): R₀ = K₀, R₁ = −K₁.
        let set = local_kraus_pair(&sz_half(), 1.0, 0.02, 0).unwrap();
        let t = transform_kraus(&set, &IsometryParams::identity()).unwrap();
        assert!((t.ops[0].clone() - &set.ops[0]).norm() < 1e-15);
        assert!((t.ops[1].clone() + &set.ops[1]).norm() < 1e-15);
    }

    #[test]
    fn qsd_gauge_is_plus_minus_combination() {
        let gamma = 1.0;
        let dt = 0.04;
        let set = local_kraus_pair(&sz_half(), gamma, dt, 0).unwrap();
        let qsd = qsd_kraus(gamma, dt, 0.0, 0).unwrap();
        let sqrt2 = 2.0_f64.sqrt();
        let r0 = (set.ops[0].clone() + &set.ops[1]) / C64::from(sqrt2);
        let r1 = (set.ops[0].clone() - &set.ops[1]) / C64::from(sqrt2);
        assert!((qsd.ops[0].clone() - r0).norm() < 1e-14);
        assert!((qsd.ops[1].clone() - r1).norm() < 1e-14);
        // γdt → 0: R_± → 1/√2
        let tiny = qsd_kraus(1.0, 1e-12, 0.0, 0).unwrap();
        let half = DMatrix::<C64>::identity(2, 2) / C64::from(sqrt2);
        assert!((tiny.ops[0].clone() - &half).norm() < 1e-6);
        assert!((tiny.ops[1].clone() - &half).norm() < 1e-6);
    }

    #[test]
    fn qsd_channel_action_matches_dephasing_to_first_order() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let gamma = 1.3;
        let dt = 1e-3;
        for phi in [0.0, FRAC_PI_4, 1.1] {
            let qsd = qsd_kraus(gamma, dt, phi, 0).unwrap();
            let pair = local_kraus_pair(&sz_half(), gamma, dt, 0).unwrap();
            let rho = dense::random_density(2, &mut rng);
            let a = qsd.apply_to_density(&rho);
            let b = pair.apply_to_density(&rho);
            // exact gauge equivalence (both are transforms of the same set)
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn projector_gauge_matches_paper_form() {
        // γdt = 0.04 → K̃₁ = 0.2·|1⟩⟨1|
        let set = qj_projector_kraus(1.0, 0.04, 0).unwrap();
        assert_abs_diff_eq!(set.ops[1][(1, 1)].re, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[1][(0, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[0][(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(set.ops[0][(1, 1)].re, 0.98, epsilon = 1e-15);
    }

    #[test]
    fn projector_gauge_agrees_with_transform_at_small_dt() {
        // The transform θ(dt) = arcsin(√(γdt)/2) reproduces the projector
        // pair up to O((γdt)²); at γdt = 1e-6 the two agree below 1e-12.
        let gamma = 1.0;
        for &dt in &[1e-6, 1e-2] {
            let gdt: f64 = gamma * dt;
            let direct = qj_projector_kraus(gamma, dt, 0).unwrap();
            let pair = local_kraus_pair(&sz_half(), gamma, dt, 0).unwrap();
            let theta = (gdt.sqrt() / 2.0).asin();
            let trans = transform_kraus(&pair, &IsometryParams::TwoByTwo { theta, phi: 0.0 }).unwrap();
            let diff = (direct.ops[0].clone() - &trans.ops[0]).norm()
                + (direct.ops[1].clone() - &trans.ops[1]).norm();
            assert!(diff < 3.0 * gdt * gdt, "diff {diff} at γdt = {gdt}");
            if gdt <= 1e-6 {
                assert!(diff < 1e-12, "diff {diff} at γdt = {gdt}");
            }
        }
    }

    #[test]
    fn projector_gauge_channel_action_matches_dephasing() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let gamma = 2.0;
        let dt = 0.005;
        let proj = qj_projector_kraus(gamma, dt, 0).unwrap();
        let pair = local_kraus_pair(&sz_half(), gamma, dt, 0).unwrap();
        let rho = dense::random_density(2, &mut rng);
        let a = proj.apply_to_density(&rho);
        let b = pair.apply_to_density(&rho);
        // Same dephasing channel to O((γdt)²).
        assert!((a - b).norm() < 10.0 * (gamma * dt).powi(2));
    }

    #[test]
    fn trotter_sequence_layout() {
        // H = 0, one dephasing site: every step is a single identical pair.
        let model = LindbladModel {
            length: 3,
            local_dim: 2,
            hamiltonian: Hamiltonian::Static(vec![]),
            jumps: vec![JumpTerm { site: 1, op: sz_half(), rate: 0.5 }],
            dt: 0.01,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let seq = trotter_sequence(&model, 0.05, &mut rng).unwrap();
        assert_eq!(seq.len(), 5);
        for step in &seq {
            assert_eq!(step.ops.len(), 1);
            match &step.ops[0] {
                ChannelOp::Kraus(k) => assert_eq!(k.site, 1),
                _ => panic!("expected a Kraus channel"),
            }
        }
        // non-commensurate time rejected
        assert!(trotter_sequence(&model, 0.053, &mut rng).is_err());
    }

    #[test]
    fn trotter_step_gate_ordering() {
        // Brownian model: L−1 gates (even bonds before odd) + L channels.
        let model = LindbladModel {
            length: 5,
            local_dim: 2,
            hamiltonian: Hamiltonian::Brownian { variance: 1.0 },
            jumps: (0..5)
                .map(|s| JumpTerm { site: s, op: sz_half(), rate: 1.0 })
                .collect(),
            dt: 0.01,
        };
        let plan = TrotterPlan::new(model).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let step = plan.step(&mut rng);
        assert_eq!(step.ops.len(), 4 + 5);
        let order: Vec<i64> = step
            .ops
            .iter()
            .map(|op| match op {
                ChannelOp::Gate2 { left_site, .. } => *left_site as i64,
                ChannelOp::Kraus(k) => 100 + k.site as i64,
            })
            .collect();
        assert_eq!(order, vec![0, 2, 1, 3, 100, 101, 102, 103, 104]);
    }

    #[test]
    fn large_rate_warns() {
        let model = LindbladModel {
            length: 2,
            local_dim: 2,
            hamiltonian: Hamiltonian::Static(vec![]),
            jumps: vec![JumpTerm { site: 0, op: sz_half(), rate: 10.0 }],
            dt: 0.01,
        };
        let warnings = model.validate().unwrap();
        assert_eq!(warnings.len(), 1);
    }
}
