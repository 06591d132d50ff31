//! Stochastic trajectory propagation through a channel sequence under a
//! pluggable branch-selection strategy.
//!
//! A trajectory owns its state and two counter-based RNG streams derived
//! from `(master_seed, trajectory_index)`: one for branch sampling and one
//! for circuit realizations (which can instead be pinned to a shared stream
//! when every trajectory must see the same disorder). Trajectories are
//! independent units of work; ensembles run data-parallel and aggregate by
//! reduction over immutable records.

use crate::channel::{
    transform_kraus, ChannelKind, ChannelOp, IsometryParams, KrausSet, TrotterPlan, TrotterStep,
};
use crate::error::{Error, Result};
use crate::geo::{self, OptimizerSettings};
use crate::models;
use crate::mps::MpsState;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_4;

/// Which bipartition an adaptive strategy optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutPolicy {
    /// The middle cut (default).
    Middle,
    /// The cut adjacent to the channel's site, on its middle-facing side.
    AdjacentToSite,
}

impl CutPolicy {
    pub fn cut_for(&self, site: usize, length: usize) -> usize {
        match self {
            CutPolicy::Middle => length / 2,
            CutPolicy::AdjacentToSite => {
                let c = if site < length / 2 { site + 1 } else { site };
                c.clamp(1, length - 1)
            }
        }
    }
}

/// Branch-selection strategy for the incoherent channels.
#[derive(Clone, Debug)]
pub enum Strategy {
    /// Standard gauge: the channel's Kraus set as emitted.
    QuantumJump,
    /// Projector gauge of dephasing channels (`K̃`).
    JumpProjector,
    /// Fixed diffusion gauge `θ = π/4` with phase `phi`.
    StateDiffusion { phi: f64 },
    /// Greedy minimization of the small-step EAEE rate.
    Gedo { cut_policy: CutPolicy, probe_h: Option<f64> },
    /// Greedy minimization of the post-step EAEE over `r×2` isometries.
    Geo { branches: usize, cut_policy: CutPolicy, settings: OptimizerSettings },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::QuantumJump => "jump".into(),
            Strategy::JumpProjector => "jump-projector".into(),
            Strategy::StateDiffusion { phi } => format!("qsd(phi={phi:.4})"),
            Strategy::Gedo { .. } => "gedo".into(),
            Strategy::Geo { branches, .. } => format!("{branches}-geo"),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, Strategy::Gedo { .. } | Strategy::Geo { .. })
    }

    pub fn geo() -> Self {
        Strategy::Geo { branches: 2, cut_policy: CutPolicy::Middle, settings: OptimizerSettings::fast() }
    }

    pub fn gedo() -> Self {
        Strategy::Gedo { cut_policy: CutPolicy::Middle, probe_h: None }
    }
}

impl OptimizerSettings {
    /// Looser settings for in-trajectory optimization (the acceptance-grade
    /// tolerances are only needed for closed-form comparisons).
    pub fn fast() -> Self {
        Self { max_iters: 40, grad_tol: 1e-8, extra_starts: Vec::new() }
    }
}

/// A product of single-site operators to record along the trajectory.
#[derive(Clone, Debug)]
pub struct ProductObservable {
    pub label: String,
    pub factors: Vec<(usize, DMatrix<C64>)>,
}

impl ProductObservable {
    /// `⟨σᶻ_a σᶻ_b⟩`.
    pub fn zz(a: usize, b: usize) -> Self {
        Self {
            label: format!("zz_{a}_{b}"),
            factors: vec![(a, crate::dense::pauli_z()), (b, crate::dense::pauli_z())],
        }
    }
}

/// What and when to record.
#[derive(Clone, Debug)]
pub struct RecordOptions {
    /// Record after every `record_every`-th step (the initial state is
    /// always recorded).
    pub record_every: usize,
    /// Cuts whose entropies are recorded.
    pub cuts: Vec<usize>,
    pub observables: Vec<ProductObservable>,
    /// Keep dense state snapshots at record times (small systems only).
    pub snapshot_dense: bool,
    /// Keep the chosen branch index of every stochastic channel.
    pub log_branches: bool,
}

impl RecordOptions {
    pub fn middle_cut(length: usize, record_every: usize) -> Self {
        Self {
            record_every,
            cuts: vec![length / 2],
            observables: Vec::new(),
            snapshot_dense: false,
            log_branches: false,
        }
    }

    pub fn all_cuts(length: usize, record_every: usize) -> Self {
        Self {
            record_every,
            cuts: (1..length).collect(),
            observables: Vec::new(),
            snapshot_dense: false,
            log_branches: false,
        }
    }
}

/// Per-trajectory result series.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub trajectory_index: u64,
    pub times: Vec<f64>,
    /// `[record][cut]` entropies in bits.
    pub entropies: Vec<Vec<f64>>,
    /// `[record][observable]` real parts.
    pub observables: Vec<Vec<f64>>,
    /// Dense snapshots at record times when requested.
    pub snapshots: Vec<DVector<C64>>,
    /// Chosen branch per stochastic channel when requested.
    pub branch_log: Vec<u32>,
    /// Cumulative truncation discarded weight per record interval.
    pub discarded: Vec<f64>,
    /// Adaptive diagnostics: θ=π/4 picks / total adaptive picks.
    pub quarter_picks: u64,
    pub adaptive_picks: u64,
    pub max_bond_seen: usize,
}

/// Anything the engine can step through: a Trotterized Lindblad model or a
/// discrete circuit.
pub trait EvolutionPlan: Sync {
    fn length(&self) -> usize;
    fn local_dim(&self) -> usize;
    /// Physical duration of one step (1.0 for discrete circuits).
    fn time_unit(&self) -> f64;
    fn step(&self, index: usize, circuit_rng: &mut ChaCha12Rng) -> TrotterStep;
}

impl EvolutionPlan for TrotterPlan {
    fn length(&self) -> usize {
        TrotterPlan::length(self)
    }

    fn local_dim(&self) -> usize {
        TrotterPlan::local_dim(self)
    }

    fn time_unit(&self) -> f64 {
        self.dt()
    }

    fn step(&self, _index: usize, circuit_rng: &mut ChaCha12Rng) -> TrotterStep {
        TrotterPlan::step(self, circuit_rng)
    }
}

/// Discrete SWAP-transport circuit with per-site dephasing: each step is
/// [odd-bond SWAPs, dephase all sites, even-bond SWAPs, dephase all sites].
#[derive(Clone, Debug)]
pub struct SwapPlan {
    pub spec: models::SwapCircuitSpec,
}

impl SwapPlan {
    pub fn new(spec: models::SwapCircuitSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }
}

impl EvolutionPlan for SwapPlan {
    fn length(&self) -> usize {
        self.spec.qubits()
    }

    fn local_dim(&self) -> usize {
        2
    }

    fn time_unit(&self) -> f64 {
        1.0
    }

    fn step(&self, _index: usize, _circuit_rng: &mut ChaCha12Rng) -> TrotterStep {
        let length = self.length();
        let gate = models::swap_gate();
        let mut ops = Vec::new();
        for parity in [1usize, 0] {
            let mut b = parity;
            while b + 1 < length {
                ops.push(ChannelOp::Gate2 { left_site: b, gate: gate.clone() });
                b += 2;
            }
            for site in 0..length {
                ops.push(ChannelOp::Kraus(models::discrete_dephasing_naive(self.spec.dephasing, site)));
            }
        }
        TrotterStep { ops }
    }
}

/// Gauge a channel according to the strategy, given the current state.
pub fn gauge_channel(
    state: &MpsState,
    kraus: &KrausSet,
    strategy: &Strategy,
    length: usize,
) -> Result<(KrausSet, Option<bool>)> {
    match strategy {
        Strategy::QuantumJump => Ok((kraus.clone(), None)),
        Strategy::JumpProjector => match kraus.kind {
            ChannelKind::LindbladPair { gamma, dt } => {
                let c = kraus.jump_op.as_ref().ok_or_else(|| {
                    Error::InvalidInput("projector gauge needs the jump operator".into())
                })?;
                let expected = models::sz_half();
                if (c - expected).norm() > 1e-12 {
                    return Err(Error::InvalidInput(
                        "projector gauge is defined for σᶻ/2 dephasing only".into(),
                    ));
                }
                Ok((crate::channel::qj_projector_kraus(gamma, dt, kraus.site)?, None))
            }
            ChannelKind::DiscreteDephasing { p } => {
                Ok((models::discrete_dephasing_projector(p, kraus.site), None))
            }
            ChannelKind::Generic => Err(Error::InvalidInput(
                "projector gauge undefined for generic channels".into(),
            )),
        },
        Strategy::StateDiffusion { phi } => Ok((
            transform_kraus(kraus, &IsometryParams::TwoByTwo { theta: FRAC_PI_4, phi: *phi })?,
            None,
        )),
        Strategy::Gedo { cut_policy, probe_h } => {
            let cut = cut_policy.cut_for(kraus.site, length);
            let choice = geo::gedo_select(state, kraus, cut, *probe_h)?;
            let gauged = transform_kraus(kraus, &choice.params)?;
            Ok((gauged, Some(choice.picked_quarter)))
        }
        Strategy::Geo { branches, cut_policy, settings } => {
            let cut = cut_policy.cut_for(kraus.site, length);
            let ctx = geo::build_context(state, kraus, cut)?;
            let opt = geo::minimize_eaee(&ctx, *branches, settings)?;
            let gauged = transform_kraus(kraus, &opt.params)?;
            Ok((gauged, None))
        }
    }
}

/// Dense-state twin of [`gauge_channel`] used by the brute-force trajectory
/// oracle: identical strategy semantics, but adaptive contexts come from
/// literal partial traces of dense branch vectors.
pub fn gauge_channel_dense(
    psi: &DVector<C64>,
    length: usize,
    kraus: &KrausSet,
    strategy: &Strategy,
) -> Result<(KrausSet, Option<bool>)> {
    match strategy {
        Strategy::QuantumJump | Strategy::JumpProjector | Strategy::StateDiffusion { .. } => {
            // No state dependence: reuse the MPS-side mapping with a dummy
            // state-free path.
            match strategy {
                Strategy::QuantumJump => Ok((kraus.clone(), None)),
                Strategy::JumpProjector => match kraus.kind {
                    ChannelKind::LindbladPair { gamma, dt } => {
                        Ok((crate::channel::qj_projector_kraus(gamma, dt, kraus.site)?, None))
                    }
                    ChannelKind::DiscreteDephasing { p } => {
                        Ok((models::discrete_dephasing_projector(p, kraus.site), None))
                    }
                    ChannelKind::Generic => Err(Error::InvalidInput(
                        "projector gauge undefined for generic channels".into(),
                    )),
                },
                Strategy::StateDiffusion { phi } => Ok((
                    transform_kraus(kraus, &IsometryParams::TwoByTwo { theta: FRAC_PI_4, phi: *phi })?,
                    None,
                )),
                _ => unreachable!(),
            }
        }
        Strategy::Gedo { cut_policy, probe_h } => {
            let cut = cut_policy.cut_for(kraus.site, length);
            let choice = geo::gedo_select_dense(psi, length, kraus, cut, *probe_h)?;
            Ok((transform_kraus(kraus, &choice.params)?, Some(choice.picked_quarter)))
        }
        Strategy::Geo { branches, cut_policy, settings } => {
            let cut = cut_policy.cut_for(kraus.site, length);
            let ctx = geo::build_context_dense(psi, length, kraus, cut)?;
            let opt = geo::minimize_eaee(&ctx, *branches, settings)?;
            Ok((transform_kraus(kraus, &opt.params)?, None))
        }
    }
}

/// Whether `k† k` is proportional to the identity (branch application then
/// reduces to a rescaling and preserves canonical form).
fn proportional_unitary(ktk: &DMatrix<C64>) -> Option<f64> {
    let d = ktk.nrows();
    let c = ktk.trace().re / d as f64;
    let dev = (ktk - DMatrix::<C64>::identity(d, d) * C64::from(c)).norm();
    if dev <= 1e-13 * c.max(1.0) {
        Some(c)
    } else {
        None
    }
}

/// One stochastic propagation through a (possibly adaptively re-gauged)
/// channel. Returns the chosen branch and its normalized weight.
pub fn propagate_step(
    state: &mut MpsState,
    kraus: &KrausSet,
    strategy: &Strategy,
    length: usize,
    rng: &mut ChaCha12Rng,
) -> Result<(usize, f64, Option<bool>)> {
    let (gauged, quarter) = gauge_channel(state, kraus, strategy, length)?;
    let site = gauged.site;
    let ktks: Vec<DMatrix<C64>> = gauged.ops.iter().map(|k| k.adjoint() * k).collect();
    let weights: Vec<f64> = ktks
        .iter()
        .map(|ktk| state.expect_product(&[(site, ktk.clone())]).re.max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if total < 1e-14 {
        return Err(Error::DegenerateChannel(1e-14));
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = i;
            break;
        }
    }
    state.apply_local_operator(site, &gauged.ops[chosen])?;
    match proportional_unitary(&ktks[chosen]) {
        Some(c) if c > 1e-14 => {
            let inv = DMatrix::<C64>::identity(state.local_dim(), state.local_dim())
                / C64::from(c.sqrt());
            state.apply_local_operator(site, &inv)?;
        }
        _ => {
            state.canonicalize()?;
        }
    }
    Ok((chosen, weights[chosen] / total, quarter))
}

/// RNG stream layout: branch sampling on stream `index`, circuit disorder on
/// stream `2^32 + index` (or a fixed shared stream when requested).
pub fn branch_rng(master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub fn circuit_rng(master_seed: u64, index: u64, shared: bool) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(if shared { 1u64 << 33 } else { (1u64 << 32) + index });
    rng
}

/// Initial condition: a pure state or a statistical mixture whose components
/// are sampled per trajectory.
#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(MpsState),
    Mixture(Vec<(f64, MpsState)>),
}

impl InitialState {
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> MpsState {
        match self {
            InitialState::Pure(s) => s.clone(),
            InitialState::Mixture(components) => {
                let total: f64 = components.iter().map(|(w, _)| w).sum();
                let u: f64 = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                for (w, s) in components {
                    acc += w;
                    if u < acc {
                        return s.clone();
                    }
                }
                components.last().unwrap().1.clone()
            }
        }
    }
}

/// Run a single trajectory. Fully deterministic given
/// `(master_seed, trajectory_index, plan, strategy, options)`.
pub fn run_trajectory<P: EvolutionPlan + ?Sized>(
    plan: &P,
    initial: &InitialState,
    strategy: &Strategy,
    opts: &RecordOptions,
    n_steps: usize,
    master_seed: u64,
    trajectory_index: u64,
    shared_circuit: bool,
) -> Result<TrajectoryRecord> {
    let length = plan.length();
    let mut branches = branch_rng(master_seed, trajectory_index);
    let mut circuit = circuit_rng(master_seed, trajectory_index, shared_circuit);
    let mut state = initial.sample(&mut branches);

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
        max_bond_seen: 1,
    };
    let mut interval_discarded = 0.0_f64;
    let record = |state: &MpsState, t: f64, discarded: &mut f64, rec: &mut TrajectoryRecord| {
        rec.times.push(t);
        rec.entropies.push(opts.cuts.iter().map(|&c| state.entropy(c)).collect());
        rec.observables.push(
            opts.observables
                .iter()
                .map(|o| state.expect_product(&o.factors).re)
                .collect(),
        );
        if opts.snapshot_dense {
            rec.snapshots.push(state.to_dense());
        }
        rec.discarded.push(*discarded);
        *discarded = 0.0;
    };
    record(&state, 0.0, &mut interval_discarded, &mut rec);

    for step in 0..n_steps {
        let tstep = plan.step(step, &mut circuit);
        for op in &tstep.ops {
            match op {
                ChannelOp::Gate2 { left_site, gate } => {
                    let info = state.apply_two_site_gate(*left_site, gate)?;
                    interval_discarded += info.discarded_weight;
                }
                ChannelOp::Kraus(k) => {
                    let (alpha, _, quarter) =
                        propagate_step(&mut state, k, strategy, length, &mut branches)?;
                    if opts.log_branches {
                        rec.branch_log.push(alpha as u32);
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
        rec.max_bond_seen = rec.max_bond_seen.max(state.max_bond_dim());
        if (step + 1) % opts.record_every == 0 {
            record(&state, (step + 1) as f64 * plan.time_unit(), &mut interval_discarded, &mut rec);
        }
    }
    Ok(rec)
}

/// Run `m` trajectories in parallel.
pub fn run_ensemble<P: EvolutionPlan + ?Sized>(
    plan: &P,
    initial: &InitialState,
    strategy: &Strategy,
    opts: &RecordOptions,
    n_steps: usize,
    master_seed: u64,
    m: usize,
    shared_circuit: bool,
) -> Result<Vec<TrajectoryRecord>> {
    (0..m as u64)
        .into_par_iter()
        .map(|i| {
            run_trajectory(plan, initial, strategy, opts, n_steps, master_seed, i, shared_circuit)
        })
        .collect()
}

/// Monte Carlo density-matrix estimate from dense snapshots.
#[derive(Clone, Debug)]
pub struct DensityEstimate {
    pub times: Vec<f64>,
    pub rho: Vec<DMatrix<C64>>,
    /// Elementwise standard errors of the estimator.
    pub elem_stderr: Vec<DMatrix<f64>>,
    /// Bootstrap estimate of the Monte Carlo trace-distance error.
    pub mc_error_td: Vec<f64>,
}

/// `ρ̂(t) = (1/M) Σ_ℓ |ψ_ℓ(t)⟩⟨ψ_ℓ(t)|` with elementwise standard errors and
/// a bootstrap estimate of the trace-distance sampling error.
pub fn estimate_density_matrix(records: &[TrajectoryRecord], bootstrap: usize) -> Result<DensityEstimate> {
    if records.is_empty() || records[0].snapshots.is_empty() {
        return Err(Error::InvalidInput("no dense snapshots recorded".into()));
    }
    let m = records.len();
    let n_t = records[0].snapshots.len();
    let dim = records[0].snapshots[0].len();
    let mut rhos = Vec::with_capacity(n_t);
    let mut stderrs = Vec::with_capacity(n_t);
    let mut mc_errors = Vec::with_capacity(n_t);
    let mut boot_rng = ChaCha12Rng::seed_from_u64(0x0b007);
    for t in 0..n_t {
        let mut mean = DMatrix::<C64>::zeros(dim, dim);
        for r in records {
            mean += &r.snapshots[t] * r.snapshots[t].adjoint();
        }
        mean /= C64::from(m as f64);
        // elementwise variance of ψψ† across trajectories
        let mut var = DMatrix::<f64>::zeros(dim, dim);
        for r in records {
            let outer = &r.snapshots[t] * r.snapshots[t].adjoint();
            for i in 0..dim {
                for j in 0..dim {
                    var[(i, j)] += (outer[(i, j)] - mean[(i, j)]).norm_sqr();
                }
            }
        }
        let stderr = var.map(|v| (v / (m as f64 * (m - 1).max(1) as f64)).sqrt());
        // bootstrap spread of the estimator in trace distance
        let mut td_acc = 0.0;
        for _ in 0..bootstrap {
            let mut resampled = DMatrix::<C64>::zeros(dim, dim);
            for _ in 0..m {
                let pick = boot_rng.gen_range(0..m);
                resampled += &records[pick].snapshots[t] * records[pick].snapshots[t].adjoint();
            }
            resampled /= C64::from(m as f64);
            td_acc += crate::dense::trace_distance(&resampled, &mean);
        }
        mc_errors.push(if bootstrap > 0 { td_acc / bootstrap as f64 } else { 0.0 });
        rhos.push(mean);
        stderrs.push(stderr);
    }
    Ok(DensityEstimate {
        times: records[0].times.clone(),
        rho: rhos,
        elem_stderr: stderrs,
        mc_error_td: mc_errors,
    })
}
