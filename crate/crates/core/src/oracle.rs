//! Independent ground-truth engines: a dense master-equation integrator (two
//! algebraic routes), dense channel-sequence evolution, a brute-force
//! trajectory twin on dense state vectors, the two-qubit entanglement of
//! formation, and the discrete-circuit closed forms.
//!
//! Nothing in this module goes through the MPS code paths it is used to
//! validate.

use crate::channel::{ChannelOp, TrotterPlan, TrotterStep};
use crate::dense;
use crate::engine::{gauge_channel_dense, InitialState, RecordOptions, Strategy, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Dense form of a Lindblad generator with a (possibly per-step) dense
/// Hamiltonian.
pub struct DenseLindblad {
    pub length: usize,
    /// Hamiltonian for each step; a single entry means time-independent.
    pub hamiltonians: Vec<DMatrix<C64>>,
    /// Embedded jump operators with their rates.
    pub jumps: Vec<(DMatrix<C64>, f64)>,
    pub dt: f64,
}

impl DenseLindblad {
    /// Materialize the dense generator data from a Trotter plan, consuming
    /// the circuit RNG exactly like the trajectory engine does.
    pub fn from_plan(plan: &TrotterPlan, n_steps: usize, circuit_rng: &mut ChaCha12Rng) -> Result<Self> {
        let length = plan.length();
        if length > 10 {
            return Err(Error::TooLarge(length));
        }
        let hamiltonians = if plan.model.is_static() {
            let bonds = plan.model.step_bond_terms(circuit_rng);
            vec![models::dense_hamiltonian(&bonds, length)]
        } else {
            (0..n_steps)
                .map(|_| models::dense_hamiltonian(&plan.model.step_bond_terms(circuit_rng), length))
                .collect()
        };
        let jumps = plan
            .model
            .jumps
            .iter()
            .map(|j| (dense::embed_single_site(&j.op, length, 2, j.site), j.rate))
            .collect();
        Ok(Self { length, hamiltonians, jumps, dt: plan.dt() })
    }

    fn h_at(&self, step: usize) -> &DMatrix<C64> {
        if self.hamiltonians.len() == 1 {
            &self.hamiltonians[0]
        } else {
            &self.hamiltonians[step]
        }
    }

    /// `ℒ(ρ) = −i[H, ρ] + Σ γ (cρc† − ½{c†c, ρ})`.
    fn rhs(&self, h: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let i = C64::new(0.0, 1.0);
        let mut out = (h * rho - rho * h) * (-i);
        for (c, rate) in &self.jumps {
            let crc = c * rho * c.adjoint();
            let ctc = c.adjoint() * c;
            out += (crc - (&ctc * rho + rho * &ctc) * C64::from(0.5)) * C64::from(*rate);
        }
        out
    }
}

/// Adaptive Dormand–Prince RK45 over one interval with piecewise-constant
/// Hamiltonian; local error controlled at `tol`.
fn rk45_interval(gen: &DenseLindblad, h_step: &DMatrix<C64>, rho: &mut DMatrix<C64>, t_len: f64, tol: f64) {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut t = 0.0;
    let mut h = t_len;
    while t < t_len - 1e-15 * t_len.max(1.0) {
        if t + h > t_len {
            h = t_len - t;
        }
        let mut k: Vec<DMatrix<C64>> = Vec::with_capacity(7);
        k.push(gen.rhs(h_step, rho));
        for s in 0..6 {
            let mut arg = rho.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    arg += kj * C64::from(h * A[s][j]);
                }
            }
            k.push(gen.rhs(h_step, &arg));
        }
        let mut r5 = rho.clone();
        let mut err = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                r5 += kj * C64::from(h * B5[j]);
            }
            let db = B5[j] - B4[j];
            if db != 0.0 {
                err += kj * C64::from(h * db);
            }
        }
        let err_norm = err.norm();
        if err_norm <= tol || h < 1e-14 {
            *rho = r5;
            t += h;
        }
        let factor = if err_norm > 0.0 { 0.9 * (tol / err_norm).powf(0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }
}

/// Integrate the master equation and return the density matrix at the
/// recorded step boundaries (the initial state is always included).
///
/// The local RK error per interval is held at 1e-10, negligible against the
/// Monte Carlo error of any trajectory ensemble it is compared with.
pub fn dense_lindblad_evolve(
    gen: &DenseLindblad,
    rho0: &DMatrix<C64>,
    n_steps: usize,
    record_every: usize,
) -> Vec<DMatrix<C64>> {
    let mut rho = rho0.clone();
    let mut out = vec![rho.clone()];
    for step in 0..n_steps {
        let h = gen.h_at(step).clone();
        rk45_interval(gen, &h, &mut rho, gen.dt, 1e-10);
        if (step + 1) % record_every == 0 {
            out.push(rho.clone());
        }
    }
    out
}

/// Vectorized Lindblad superoperator (row-major convention
/// `vec(AρB) = (A ⊗ Bᵀ)·vec(ρ)`). Exact-exponential route for small
/// systems; cross-checks the RK integrator.
pub fn lindblad_superoperator(h: &DMatrix<C64>, jumps: &[(DMatrix<C64>, f64)]) -> DMatrix<C64> {
    let n = h.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let i = C64::new(0.0, 1.0);
    let mut sup = (linalg::kron(h, &id) - linalg::kron(&id, &h.transpose())) * (-i);
    for (c, rate) in jumps {
        let ctc = c.adjoint() * c;
        let mut term = linalg::kron(c, &c.map(|x| x.conj()));
        term -= (linalg::kron(&ctc, &id) + linalg::kron(&id, &ctc.transpose())) * C64::from(0.5);
        sup += term * C64::from(*rate);
    }
    sup
}

pub fn superop_evolve(sup: &DMatrix<C64>, rho0: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = rho0.nrows();
    let prop = linalg::expm(&(sup * C64::from(t)));
    let v = DVector::from_fn(n * n, |k, _| rho0[(k / n, k % n)]);
    let out = prop * v;
    DMatrix::from_fn(n, n, |i, j| out[i * n + j])
}

/// Deterministic dense twin of the Trotterized channel sequence: applies
/// every gate and every channel as an exact CP map, renormalizing the trace
/// each step. Trajectory ensembles are unbiased estimators of exactly this
/// evolution.
pub fn dense_channel_evolve(
    steps: &[TrotterStep],
    length: usize,
    rho0: &DMatrix<C64>,
    record_every: usize,
) -> Vec<DMatrix<C64>> {
    let mut rho = rho0.clone();
    let mut out = vec![rho.clone()];
    for (i, step) in steps.iter().enumerate() {
        for op in &step.ops {
            match op {
                ChannelOp::Gate2 { left_site, gate } => {
                    let u = dense::embed_two_site(gate, length, 2, *left_site);
                    rho = &u * rho * u.adjoint();
                }
                ChannelOp::Kraus(k) => {
                    let mut next = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
                    for op in &k.ops {
                        let e = dense::embed_single_site(op, length, 2, k.site);
                        next += &e * &rho * e.adjoint();
                    }
                    rho = next;
                }
            }
        }
        let tr = rho.trace().re;
        rho /= C64::from(tr);
        if (i + 1) % record_every == 0 {
            out.push(rho.clone());
        }
    }
    out
}

/// Two-qubit entanglement of formation in bits: concurrence from the
/// spin-flipped spectrum, then the binary entropy of
/// `(1 + √(1−C²))/2`. Exact for any two-qubit density matrix.
pub fn wootters_eof(rho: &DMatrix<C64>) -> Result<f64> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::DimensionMismatch("EoF needs a 4×4 density matrix".into()));
    }
    // PSD repair: clip eigenvalues in (−1e-10, 0) to zero, renormalize.
    let (eig, vecs) = linalg::eigh(rho);
    if eig[eig.len() - 1] < -1e-10 {
        return Err(Error::InvalidInput(format!(
            "density matrix has negative eigenvalue {:.3e}",
            eig[eig.len() - 1]
        )));
    }
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    let mut total = 0.0;
    for i in 0..4 {
        let v = eig[i].max(0.0);
        total += v;
        let col = vecs.column(i);
        rho += (&col * col.adjoint()) * C64::from(v);
    }
    rho /= C64::from(total);

    let yy = linalg::kron(&dense::pauli_y(), &dense::pauli_y());
    let rho_tilde = &yy * rho.map(|x| x.conj()) * &yy;
    let sq = linalg::sqrtm_psd(&rho);
    let m = &sq * rho_tilde * &sq;
    let eig = linalg::eigvalsh(&m);
    let mu: Vec<f64> = eig.iter().map(|x| x.max(0.0).sqrt()).collect();
    let c = (mu[0] - mu[1] - mu[2] - mu[3]).max(0.0);
    let x = (1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0;
    Ok(binary_entropy(x))
}

pub fn binary_entropy(x: f64) -> f64 {
    let mut e = 0.0;
    if x > 0.0 && x < 1.0 {
        e = -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
    }
    e
}

/// Closed-form EAEE of the projector-gauge trajectories of the discrete
/// SWAP/dephasing circuit at depth `n`:
/// `2n·[q·log₂q − q̃·log₂q̃ + ½]` with `q = (1+(1−2p)^{4n})/2` and
/// `q̃ = (1−2p)^{4n}/2`.
pub fn eaee_analytic_discrete(p: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("p = {p} outside [0, 1]")));
    }
    let w = (1.0 - 2.0 * p).powi(4 * n as i32);
    let q = (1.0 + w) / 2.0;
    let qt = w / 2.0;
    let xlog = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    Ok(2.0 * n as f64 * (xlog(q) - xlog(qt) + 0.5))
}

/// Brute-force twin of the trajectory engine on dense state vectors: same
/// strategies, same RNG stream layout, same sampling rule, but states,
/// entropies and optimization contexts all come from dense linear algebra.
pub fn dense_trajectory(
    steps: &[TrotterStep],
    length: usize,
    initial: &InitialState,
    strategy: &Strategy,
    opts: &RecordOptions,
    master_seed: u64,
    trajectory_index: u64,
    time_unit: f64,
) -> Result<TrajectoryRecord> {
    if length > 12 {
        return Err(Error::TooLarge(length));
    }
    let mut branches = crate::engine::branch_rng(master_seed, trajectory_index);
    let mut psi = initial.sample(&mut branches).to_dense();

    let mut rec = TrajectoryRecord {
        trajectory_index,
        times: Vec::new(),
        entropies: Vec::new(),
        observables: Vec::new(),
        snapshots: Vec::new(),
        branch_log: Vec::new(),
        discarded: Vec::new(),
        quarter_picks: 0,
        adaptive_picks: 0,
        max_bond_seen: 0,
    };
    let entropy_at = |psi: &DVector<C64>, cut: usize| -> f64 {
        let rho = dense::reduced_density_dense(psi, length, 2, cut);
        dense::entropy_of_density(&rho)
    };
    let record = |psi: &DVector<C64>, t: f64, rec: &mut TrajectoryRecord| {
        rec.times.push(t);
        rec.entropies.push(opts.cuts.iter().map(|&c| entropy_at(psi, c)).collect());
        rec.observables.push(
            opts.observables
                .iter()
                .map(|o| {
                    let mut v = psi.clone();
                    for (site, op) in &o.factors {
                        v = dense::apply_single_site(&v, length, *site, op);
                    }
                    psi.dotc(&v).re
                })
                .collect(),
        );
        if opts.snapshot_dense {
            rec.snapshots.push(psi.clone());
        }
        rec.discarded.push(0.0);
    };
    record(&psi, 0.0, &mut rec);

    for (si, step) in steps.iter().enumerate() {
        for op in &step.ops {
            match op {
                ChannelOp::Gate2 { left_site, gate } => {
                    psi = dense::apply_two_site(&psi, length, *left_site, gate);
                }
                ChannelOp::Kraus(k) => {
                    let (gauged, quarter) = gauge_channel_dense(&psi, length, k, strategy)?;
                    let branch_states: Vec<DVector<C64>> = gauged
                        .ops
                        .iter()
                        .map(|op| dense::apply_single_site(&psi, length, gauged.site, op))
                        .collect();
                    let weights: Vec<f64> = branch_states.iter().map(|b| b.norm_squared()).collect();
                    let total: f64 = weights.iter().sum();
                    if total < 1e-14 {
                        return Err(Error::DegenerateChannel(1e-14));
                    }
                    let u: f64 = branches.gen::<f64>() * total;
                    let mut acc = 0.0;
                    let mut chosen = weights.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            chosen = i;
                            break;
                        }
                    }
                    psi = branch_states[chosen].clone() / C64::from(weights[chosen].sqrt());
                    if opts.log_branches {
                        rec.branch_log.push(chosen as u32);
                    }
                    if let Some(q) = quarter {
                        rec.adaptive_picks += 1;
                        if q {
                            rec.quarter_picks += 1;
                        }
                    }
                }
            }
        }
        if (si + 1) % opts.record_every == 0 {
            record(&psi, (si + 1) as f64 * time_unit, &mut rec);
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Hamiltonian, JumpTerm, LindbladModel};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn bell_rho() -> DMatrix<C64> {
        let v = DVector::from_vec(vec![
            C64::from(1.0 / 2f64.sqrt()),
            C64::default(),
            C64::default(),
            C64::from(1.0 / 2f64.sqrt()),
        ]);
        &v * v.adjoint()
    }

    #[test]
    fn eof_examples() {
        assert_abs_diff_eq!(wootters_eof(&bell_rho()).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = DMatrix::<C64>::identity(4, 4) / C64::from(4.0);
        assert_abs_diff_eq!(wootters_eof(&mixed).unwrap(), 0.0, epsilon = 1e-12);
        // Werner state W(q) at q = 0.9: C = (3q−1)/2 computed independently.
        let q = 0.9;
        let w = bell_rho() * C64::from(q) + DMatrix::<C64>::identity(4, 4) * C64::from((1.0 - q) / 4.0);
        let c: f64 = (3.0 * q - 1.0) / 2.0;
        let expected = binary_entropy((1.0 + (1.0 - c * c).sqrt()) / 2.0);
        assert_abs_diff_eq!(wootters_eof(&w).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn analytic_discrete_eaee_endpoints() {
        for n in 1..=6 {
            assert_abs_diff_eq!(eaee_analytic_discrete(0.0, n).unwrap(), 2.0 * n as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(eaee_analytic_discrete(0.5, n).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert!(eaee_analytic_discrete(1.2, 1).is_err());
    }

    #[test]
    fn rk_matches_superoperator_exponential() {
        // Single-qubit dephasing of |+⟩⟨+|: off-diagonal decays as e^{−γt/2}
        // for c = σᶻ/2; the coefficient comes out of the superoperator
        // exponential rather than being assumed.
        let gamma = 1.7;
        let c = models::sz_half();
        let plus = DVector::from_vec(vec![C64::from(1.0 / 2f64.sqrt()), C64::from(1.0 / 2f64.sqrt())]);
        let rho0 = &plus * plus.adjoint();
        let gen = DenseLindblad {
            length: 1,
            hamiltonians: vec![DMatrix::zeros(2, 2)],
            jumps: vec![(c.clone(), gamma)],
            dt: 0.05,
        };
        let n_steps = 40;
        let rk = dense_lindblad_evolve(&gen, &rho0, n_steps, n_steps);
        let t = 0.05 * n_steps as f64;
        let sup = lindblad_superoperator(&DMatrix::zeros(2, 2), &[(c, gamma)]);
        let exact = superop_evolve(&sup, &rho0, t);
        assert!((rk[1].clone() - &exact).norm() < 1e-9);
        assert_abs_diff_eq!(rk[1][(0, 1)].re, 0.5 * (-gamma * t / 2.0).exp(), epsilon = 1e-9);
    }

    #[test]
    fn rk_matches_exponential_on_l2_model() {
        // H = 0 and γ = 0 leaves the state untouched; with dephasing the two
        // integrator routes agree at 1e-9 on L = 2.
        let model = LindbladModel {
            length: 2,
            local_dim: 2,
            hamiltonian: Hamiltonian::Static(vec![]),
            jumps: vec![
                JumpTerm { site: 0, op: models::sz_half(), rate: 0.0 },
                JumpTerm { site: 1, op: models::sz_half(), rate: 0.0 },
            ],
            dt: 0.1,
        };
        let plan = TrotterPlan::new(model).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let gen = DenseLindblad::from_plan(&plan, 10, &mut rng).unwrap();
        let rho0 = bell_rho();
        let series = dense_lindblad_evolve(&gen, &rho0, 10, 1);
        for rho in &series {
            assert!((rho.clone() - &rho0).norm() < 1e-10);
        }

        let gamma = 0.8;
        let model = crate::models::bell_dephasing_model(gamma, 0.05);
        let plan = TrotterPlan::new(model).unwrap();
        let gen = DenseLindblad::from_plan(&plan, 20, &mut rng).unwrap();
        let series = dense_lindblad_evolve(&gen, &rho0, 20, 20);
        let h = DMatrix::<C64>::zeros(4, 4);
        let jumps: Vec<(DMatrix<C64>, f64)> = vec![
            (dense::embed_single_site(&models::sz_half(), 2, 2, 0), gamma),
            (dense::embed_single_site(&models::sz_half(), 2, 2, 1), gamma),
        ];
        let sup = lindblad_superoperator(&h, &jumps);
        let exact = superop_evolve(&sup, &rho0, 1.0);
        assert!((series[1].clone() - exact).norm() < 1e-9);
    }

    #[test]
    fn bell_dephasing_steady_state() {
        // t → ∞ from |Φ⁺⟩: ½(|00⟩⟨00| + |11⟩⟨11|).
        let model = crate::models::bell_dephasing_model(1.0, 0.1);
        let plan = TrotterPlan::new(model).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let gen = DenseLindblad::from_plan(&plan, 400, &mut rng).unwrap();
        let series = dense_lindblad_evolve(&gen, &bell_rho(), 400, 400);
        let last = &series[1];
        let mut expect = DMatrix::<C64>::zeros(4, 4);
        expect[(0, 0)] = C64::from(0.5);
        expect[(3, 3)] = C64::from(0.5);
        assert!((last.clone() - expect).norm() < 1e-8);
        // EoF decreases monotonically along the way
        let series = dense_lindblad_evolve(&gen, &bell_rho(), 60, 10);
        let eofs: Vec<f64> = series.iter().map(|r| wootters_eof(r).unwrap()).collect();
        for w in eofs.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "EoF not monotone: {eofs:?}");
        }
    }

    #[test]
    fn channel_evolution_matches_lindblad_at_small_dt() {
        // First-order Trotter: halving dt halves the defect.
        let spec = crate::models::XxSpec {
            length: 3,
            omega: 1.0,
            delta: 0.02,
            h_field: 0.02,
            gamma: 0.4,
            dt: 0.02,
        };
        let mut defects = Vec::new();
        for halvings in 0..2 {
            let mut spec = spec.clone();
            spec.dt /= 2f64.powi(halvings);
            let model = crate::models::xx_model(&spec);
            let plan = TrotterPlan::new(model).unwrap();
            let n = plan.steps_for(0.4).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(3);
            let steps: Vec<TrotterStep> = (0..n).map(|_| plan.step(&mut rng)).collect();
            let psi0 = crate::models::initial_bell_chain(4, 16, 0.0).unwrap().to_dense();
            let rho0 = {
                // truncate to 3 sites: use |0⟩ on the last → simpler: use a product of Bell + |0⟩ is length 4;
                // instead build a 3-site pure state directly
                let v = dense::random_state(8, &mut ChaCha12Rng::seed_from_u64(7));
                let _ = psi0;
                &v * v.adjoint()
            };
            let chan = dense_channel_evolve(&steps, 3, &rho0, n);
            let mut rng = ChaCha12Rng::seed_from_u64(3);
            let gen = DenseLindblad::from_plan(&plan, n, &mut rng).unwrap();
            let lind = dense_lindblad_evolve(&gen, &rho0, n, n);
            defects.push(dense::trace_distance(&chan[1], &lind[1]));
        }
        assert!(defects[1] < 0.7 * defects[0], "no first-order convergence: {defects:?}");
    }
}
