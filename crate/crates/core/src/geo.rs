//! Adaptive gauge choosers: greedy minimization of the post-step
//! ensemble-averaged entanglement entropy (EAEE) over branch isometries, and
//! the small-step-limit variant that minimizes the EAEE time derivative.
//!
//! For a two-operator channel acting on a state `|ψ⟩`, every gauge `T(θ,φ)`
//! produces a two-branch ensemble `φ̃_α = Σ_β T_{αβ} K_β |ψ⟩`. The EAEE of
//! that ensemble, as a function of the gauge parameters, only depends on
//! three fixed matrices built from the reference branches at the target cut.
//! This module computes those matrices by tensor-network contraction (cost
//! `O(χ³ d)` per transferred site), evaluates the EAEE and its analytic
//! gradient from them, and minimizes with BFGS.

use crate::channel::{ChannelKind, IsometryParams, KrausSet};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mps::{entropy_of_squared, MpsState, SCHMIDT_FLOOR_SQ};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

/// Everything the EAEE objective needs about (state, channel, cut).
///
/// `m00`, `m11` are Gram forms of the branch partial traces `tr_B ψ̃_α ψ̃_α†`
/// (isospectral, same traces); `cross` is the Gram form of the exchange term
/// `tr_B |ψ̃₁⟩⟨ψ̃₀|`. A gauged branch with row coefficients `(u, v)` has the
/// partial trace
///
/// ```text
/// M(u, v) = |u|²·m00 + ū·v·cross + u·v̄·cross† + |v|²·m11 .
/// ```
#[derive(Clone, Debug)]
pub struct GeoContext {
    pub m00: DMatrix<C64>,
    pub cross: DMatrix<C64>,
    pub m11: DMatrix<C64>,
    pub cut: usize,
    pub site: usize,
}

impl GeoContext {
    /// Weight of the first reference branch.
    pub fn q0(&self) -> f64 {
        self.m00.trace().re
    }

    /// Weight of the second reference branch.
    pub fn q1(&self) -> f64 {
        self.m11.trace().re
    }

    /// Overlap `⟨ψ̃₀|ψ̃₁⟩` of the reference branches.
    pub fn overlap(&self) -> C64 {
        self.cross.trace()
    }

    /// Magnitude and phase of the overlap.
    pub fn overlap_polar(&self) -> (f64, f64) {
        let o = self.overlap();
        (o.norm(), o.arg())
    }

    pub fn dim(&self) -> usize {
        self.m00.nrows()
    }

    fn check(&self) -> Result<()> {
        let herm = (self.m00.clone() - self.m00.adjoint()).norm()
            + (self.m11.clone() - self.m11.adjoint()).norm();
        if herm > 1e-10 {
            return Err(Error::NumericalContext(herm));
        }
        let min0 = linalg::eigvalsh(&self.m00).iter().copied().fold(f64::INFINITY, f64::min);
        let min1 = linalg::eigvalsh(&self.m11).iter().copied().fold(f64::INFINITY, f64::min);
        if min0 < -1e-10 || min1 < -1e-10 {
            return Err(Error::NumericalContext(min0.min(min1)));
        }
        Ok(())
    }
}

/// Build the optimization context for a two-operator channel at `site`,
/// targeting the bipartition at `cut`. The state must be canonical and
/// normalized.
pub fn build_context(state: &MpsState, channel: &KrausSet, cut: usize) -> Result<GeoContext> {
    if channel.ops.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "context needs a two-operator channel, got {}",
            channel.ops.len()
        )));
    }
    if cut == 0 || cut >= state.len() + 1 {
        return Err(Error::InvalidInput(format!("cut {cut} out of range")));
    }
    let site = channel.site;
    let k0 = &channel.ops[0];
    let k1 = &channel.ops[1];
    // P_{βα} = K_β† K_α
    let p00 = k0.adjoint() * k0;
    let p01 = k0.adjoint() * k1;
    let p11 = k1.adjoint() * k1;

    let d = state.local_dim();
    let (e00, e01, e11) = if site < cut {
        // Insert at `site`, transfer right to the cut with left-canonical
        // pieces λΓ.
        let insert = |p: &DMatrix<C64>| -> DMatrix<C64> {
            let mut a = state.site_tensor(site).clone();
            a.scale_left(state.lambda(site));
            let mut e = DMatrix::<C64>::zeros(a.dr, a.dr);
            for pp in 0..d {
                for pq in 0..d {
                    let coef = p[(pp, pq)];
                    if coef == C64::default() {
                        continue;
                    }
                    e += a.phys_slice(pp).adjoint() * a.phys_slice(pq) * coef;
                }
            }
            e
        };
        let mut e00 = insert(&p00);
        let mut e01 = insert(&p01);
        let mut e11 = insert(&p11);
        for j in site + 1..cut {
            let mut a = state.site_tensor(j).clone();
            a.scale_left(state.lambda(j));
            let transfer = |e: &DMatrix<C64>| {
                let mut out = DMatrix::<C64>::zeros(a.dr, a.dr);
                for p in 0..d {
                    let ap = a.phys_slice(p);
                    out += ap.adjoint() * e * ap;
                }
                out
            };
            e00 = transfer(&e00);
            e01 = transfer(&e01);
            e11 = transfer(&e11);
        }
        (e00, e01, e11)
    } else {
        // Insert at `site`, transfer left to the cut with right-canonical
        // pieces Γλ. Bra index first: E[i', i] = ⟨path i'| · |path i⟩.
        let insert = |p: &DMatrix<C64>| -> DMatrix<C64> {
            let mut b = state.site_tensor(site).clone();
            b.scale_right(state.lambda(site + 1));
            let mut e = DMatrix::<C64>::zeros(b.dl, b.dl);
            for pp in 0..d {
                for pq in 0..d {
                    let coef = p[(pp, pq)];
                    if coef == C64::default() {
                        continue;
                    }
                    e += b.phys_slice(pp).map(|x| x.conj()) * b.phys_slice(pq).transpose() * coef;
                }
            }
            e
        };
        let mut e00 = insert(&p00);
        let mut e01 = insert(&p01);
        let mut e11 = insert(&p11);
        for j in (cut..site).rev() {
            let mut b = state.site_tensor(j).clone();
            b.scale_right(state.lambda(j + 1));
            let transfer = |e: &DMatrix<C64>| {
                let mut out = DMatrix::<C64>::zeros(b.dl, b.dl);
                for p in 0..d {
                    let bp = b.phys_slice(p);
                    out += bp.map(|x| x.conj()) * e * bp.transpose();
                }
                out
            };
            e00 = transfer(&e00);
            e01 = transfer(&e01);
            e11 = transfer(&e11);
        }
        (e00, e01, e11)
    };

    let lam = state.lambda(cut);
    let weight = |e: &DMatrix<C64>| DMatrix::from_fn(e.nrows(), e.ncols(), |i, j| e[(i, j)] * C64::from(lam[i] * lam[j]));
    let m00 = weight(&e00);
    let cross = weight(&e01);
    let m11 = weight(&e11);
    let ctx = GeoContext {
        m00: (&m00 + m00.adjoint()) * C64::from(0.5),
        cross,
        m11: (&m11 + m11.adjoint()) * C64::from(0.5),
        cut,
        site,
    };
    ctx.check()?;
    Ok(ctx)
}

/// Dense twin of [`build_context`]: literal partial traces of the branch
/// vectors. Used by the brute-force trajectory oracle; shares nothing with
/// the MPS contraction path.
pub fn build_context_dense(
    psi: &DVector<C64>,
    length: usize,
    channel: &KrausSet,
    cut: usize,
) -> Result<GeoContext> {
    use crate::dense;
    if channel.ops.len() != 2 {
        return Err(Error::InvalidInput("context needs a two-operator channel".into()));
    }
    let b0 = dense::apply_single_site(psi, length, channel.site, &channel.ops[0]);
    let b1 = dense::apply_single_site(psi, length, channel.site, &channel.ops[1]);
    let da = 2usize.pow(cut as u32);
    let db = 2usize.pow((length - cut) as u32);
    let tr_b = |x: &DVector<C64>, y: &DVector<C64>| -> DMatrix<C64> {
        // tr_B |x⟩⟨y|
        let mut m = DMatrix::<C64>::zeros(da, da);
        for i in 0..da {
            for j in 0..da {
                let mut acc = C64::default();
                for b in 0..db {
                    acc += x[i * db + b] * y[j * db + b].conj();
                }
                m[(i, j)] = acc;
            }
        }
        m
    };
    let m00 = tr_b(&b0, &b0);
    let m11 = tr_b(&b1, &b1);
    // coefficient of ū·v is tr_B |ψ̃₁⟩⟨ψ̃₀|
    let cross = tr_b(&b1, &b0);
    let ctx = GeoContext { m00, cross, m11, cut, site: channel.site };
    ctx.check()?;
    Ok(ctx)
}

/// Row coefficients `(u_α, v_α)` of the materialized transform.
fn rows(params: &IsometryParams) -> Vec<(C64, C64)> {
    let t = params.materialize();
    (0..t.nrows()).map(|a| (t[(a, 0)], t[(a, 1)])).collect()
}

fn branch_matrix(ctx: &GeoContext, u: C64, v: C64) -> DMatrix<C64> {
    let mut m = &ctx.m00 * C64::from(u.norm_sqr()) + &ctx.m11 * C64::from(v.norm_sqr());
    let c = u.conj() * v;
    m += &ctx.cross * c;
    m += ctx.cross.adjoint() * c.conj();
    m
}

/// EAEE (bits) of the gauged ensemble.
pub fn eaee_objective(ctx: &GeoContext, params: &IsometryParams) -> Result<f64> {
    let mut total = 0.0;
    for (u, v) in rows(params) {
        let m = branch_matrix(ctx, u, v);
        let eig = linalg::eigvalsh(&m);
        let scale = eig[0].max(1e-300);
        if eig[eig.len() - 1] < -1e-10 * scale.max(1.0) {
            return Err(Error::NumericalContext(eig[eig.len() - 1]));
        }
        let p: f64 = eig.iter().map(|x| x.max(0.0)).sum();
        if p < 1e-14 {
            continue;
        }
        total += p * entropy_of_squared(eig.iter().map(|x| x.max(0.0) / p));
    }
    Ok(total)
}

/// Coefficient derivatives for the 2×2 class.
fn rows_dtheta_dphi(theta: f64, phi: f64) -> ([(C64, C64); 2], [(C64, C64); 2], [(C64, C64); 2]) {
    let e = C64::from_polar(1.0, -phi);
    let (s, c) = theta.sin_cos();
    let vals = [
        (C64::from(c), C64::from(s) * e),
        (C64::from(s), -C64::from(c) * e),
    ];
    let dtheta = [
        (-C64::from(s), C64::from(c) * e),
        (C64::from(c), C64::from(s) * e),
    ];
    let i = C64::new(0.0, 1.0);
    let dphi = [
        (C64::default(), -i * C64::from(s) * e),
        (C64::default(), i * C64::from(c) * e),
    ];
    (vals, dtheta, dphi)
}

/// EAEE and its gradient in the transform parameters.
///
/// The gradient is `∂E = −Σ_α tr[∂M_α · log₂(M_α/p_α)]`, evaluated through
/// the eigendecomposition of each branch matrix. For the 2×2 class the
/// parameter derivatives of `T` are analytic; the 3×2 and 4×2 classes
/// differentiate the materialized entries by high-order central differences
/// (the trig entries make that exact to machine precision) and reuse the
/// same trace formula.
pub fn eaee_objective_gradient(ctx: &GeoContext, params: &IsometryParams) -> Result<(f64, Vec<f64>)> {
    let n_par = params.parameter_count();
    let coeffs = rows(params);
    // d(row coefficients)/d(param) for every parameter.
    let dcoeffs: Vec<Vec<(C64, C64)>> = match params {
        IsometryParams::TwoByTwo { theta, phi } => {
            let (_, dt, dp) = rows_dtheta_dphi(*theta, *phi);
            vec![dt.to_vec(), dp.to_vec()]
        }
        _ => {
            let x = params.to_vector();
            let r = params.branch_count();
            let h = 1e-6;
            (0..n_par)
                .map(|k| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let tp = IsometryParams::from_vector(r, &xp).materialize();
                    let tm = IsometryParams::from_vector(r, &xm).materialize();
                    (0..r)
                        .map(|a| {
                            (
                                (tp[(a, 0)] - tm[(a, 0)]) / C64::from(2.0 * h),
                                (tp[(a, 1)] - tm[(a, 1)]) / C64::from(2.0 * h),
                            )
                        })
                        .collect()
                })
                .collect()
        }
    };

    let mut value = 0.0;
    let mut grad = vec![0.0; n_par];
    for (a, &(u, v)) in coeffs.iter().enumerate() {
        let m = branch_matrix(ctx, u, v);
        let (eig, vecs) = linalg::eigh(&m);
        let scale = eig[0].max(1e-300);
        if eig[eig.len() - 1] < -1e-10 * scale.max(1.0) {
            return Err(Error::NumericalContext(eig[eig.len() - 1]));
        }
        let p: f64 = eig.iter().map(|x| x.max(0.0)).sum();
        if p < 1e-14 {
            continue;
        }
        value += p * entropy_of_squared(eig.iter().map(|x| x.max(0.0) / p));
        for (k, dc) in dcoeffs.iter().enumerate() {
            let (du, dv) = dc[a];
            // dM = d(|u|²)m00 + d(ūv)cross + h.c. + d(|v|²)m11
            let d_uu = 2.0 * (u.conj() * du).re;
            let d_vv = 2.0 * (v.conj() * dv).re;
            let d_uv = du.conj() * v + u.conj() * dv;
            let mut dm = &ctx.m00 * C64::from(d_uu) + &ctx.m11 * C64::from(d_vv);
            dm += &ctx.cross * d_uv;
            dm += ctx.cross.adjoint() * d_uv.conj();
            let mut acc = 0.0;
            for i in 0..eig.len() {
                let nu = eig[i].max(0.0);
                if nu / p < SCHMIDT_FLOOR_SQ {
                    continue;
                }
                let y = vecs.column(i);
                let dnui = (y.adjoint() * &dm * y)[(0, 0)].re;
                acc -= dnui * (nu / p).log2();
            }
            grad[k] += acc;
        }
    }
    Ok((value, grad))
}

/// BFGS settings.
#[derive(Clone, Debug)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Extra starting points appended to the built-in restarts.
    pub extra_starts: Vec<Vec<f64>>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { max_iters: 80, grad_tol: 1e-11, extra_starts: Vec::new() }
    }
}

/// Result of a greedy EAEE minimization.
#[derive(Clone, Debug)]
pub struct GeoOptimum {
    pub params: IsometryParams,
    pub value: f64,
    pub converged: bool,
    /// (θ, φ, value) per accepted iterate of the best restart (2×2 only,
    /// populated when tracing is enabled).
    pub trace: Vec<(f64, f64, f64)>,
}

fn bfgs(
    ctx: &GeoContext,
    branches: usize,
    x0: &[f64],
    settings: &OptimizerSettings,
    trace: Option<&mut Vec<(f64, f64, f64)>>,
) -> Result<(Vec<f64>, f64, bool)> {
    let n = x0.len();
    let fg = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        eaee_objective_gradient(ctx, &IsometryParams::from_vector(branches, x))
    };
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    let mut local_trace: Vec<(f64, f64, f64)> = Vec::new();
    if n == 2 {
        local_trace.push((x[0], x[1], f));
    }
    for _ in 0..settings.max_iters {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= settings.grad_tol {
            converged = true;
            break;
        }
        // direction p = −H g
        let gv = DVector::from_column_slice(&g);
        let p = -&h * &gv;
        let slope: f64 = p.dot(&gv);
        let (p, slope) = if slope >= 0.0 {
            // H lost positive definiteness; fall back to steepest descent.
            h = DMatrix::identity(n, n);
            (-gv.clone(), -gv.dot(&gv))
        } else {
            (p, slope)
        };
        // Backtracking Armijo line search.
        let mut alpha = 1.0_f64;
        let c1 = 1e-4;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = (0..n).map(|i| x[i] + alpha * p[i]).collect();
            match fg(&xn) {
                Ok((fnew, gnew)) => {
                    if fnew <= f + c1 * alpha * slope {
                        accepted = Some((xn, fnew, gnew));
                        break;
                    }
                }
                Err(_) => {}
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            break; // line search failed; return best so far
        };
        // BFGS update
        let s = DVector::from_fn(n, |i, _| xn[i] - x[i]);
        let y = DVector::from_fn(n, |i, _| gnew[i] - g[i]);
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let left = &id - &s * y.transpose() * rho;
            let right = &id - &y * s.transpose() * rho;
            h = &left * h * &right + &s * s.transpose() * rho;
        }
        x = xn;
        f = fnew;
        g = gnew;
        if n == 2 {
            local_trace.push((x[0], x[1], f));
        }
    }
    if converged || g.iter().map(|v| v * v).sum::<f64>().sqrt() <= settings.grad_tol {
        converged = true;
    }
    if let Some(t) = trace {
        *t = local_trace;
    }
    Ok((x, f, converged))
}

/// Map 2×2 parameters into the canonical domain `θ ∈ [0, π/4]`,
/// `φ ∈ [0, 2π)` using the exact ensemble symmetries
/// `(−θ, φ) ≡ (θ, φ+π)`, `(π−θ, φ) ≡ (θ, φ+π)`, `(π/2−θ, φ+π) ≡ (θ, φ)`.
pub fn canonicalize_two_by_two(theta: f64, phi: f64) -> (f64, f64) {
    let mut t = theta.rem_euclid(2.0 * PI);
    let mut p = phi;
    if t > PI {
        // T(θ+π) = −T(θ): same ensemble
        t -= PI;
    }
    if t > PI / 2.0 {
        // (π−θ, φ) ≡ (θ, φ+π)
        t = PI - t;
        p += PI;
    }
    if t > FRAC_PI_4 {
        // branch swap
        t = PI / 2.0 - t;
        p += PI;
    }
    (t, p.rem_euclid(2.0 * PI))
}

/// Greedy EAEE minimization with BFGS restarts.
///
/// The built-in restart points for the 2×2 class are
/// `(θ, φ) ∈ {(1e-3, 0), (π/8, 0), (π/4, 0), (π/4, π/2)}`; the returned
/// optimum is never worse than the fixed gauges `θ = 0` and `θ = π/4`.
pub fn minimize_eaee(ctx: &GeoContext, branches: usize, settings: &OptimizerSettings) -> Result<GeoOptimum> {
    let starts: Vec<Vec<f64>> = match branches {
        2 => vec![
            vec![1e-3, 0.0],
            vec![FRAC_PI_8, 0.0],
            vec![FRAC_PI_4, 0.0],
            vec![FRAC_PI_4, PI / 2.0],
        ],
        3 => vec![
            vec![1e-3, 1e-3, 1e-3, 0.0, 0.0],
            vec![FRAC_PI_4, 0.0, 1e-3, 0.0, 0.0],
            vec![FRAC_PI_4, FRAC_PI_8, FRAC_PI_8, 0.0, 0.0],
            vec![FRAC_PI_8, FRAC_PI_4, FRAC_PI_4, PI / 2.0, PI / 2.0],
        ],
        4 => vec![
            vec![1e-3; 8],
            {
                let mut v = vec![1e-3; 8];
                v[0] = FRAC_PI_4;
                v
            },
            vec![FRAC_PI_8, FRAC_PI_8, FRAC_PI_4, FRAC_PI_8, FRAC_PI_4, 0.0, 0.0, 0.0],
        ],
        _ => return Err(Error::InvalidInput(format!("unsupported branch count {branches}"))),
    };

    let mut best: Option<(Vec<f64>, f64, bool, Vec<(f64, f64, f64)>)> = None;
    for start in starts.iter().chain(settings.extra_starts.iter()) {
        let n_par = match branches { 2 => 2, 3 => 5, _ => 8 };
        if start.len() != n_par {
            return Err(Error::InvalidInput("restart point has wrong dimension".into()));
        }
        let mut tr = Vec::new();
        let (x, f, conv) = bfgs(ctx, branches, start, settings, Some(&mut tr))?;
        if best.as_ref().map_or(true, |(_, bf, _, _)| f < *bf) {
            best = Some((x, f, conv, tr));
        }
    }
    let (mut x, mut f, converged, trace) = best.unwrap();

    // Fixed-gauge guard: never worse than θ = 0 or θ = π/4 (2×2 class).
    if branches == 2 {
        for cand in [[0.0, 0.0], [FRAC_PI_4, 0.0]] {
            let v = eaee_objective(ctx, &IsometryParams::TwoByTwo { theta: cand[0], phi: cand[1] })?;
            if v < f {
                f = v;
                x = cand.to_vec();
            }
        }
        let (t, p) = canonicalize_two_by_two(x[0], x[1]);
        x = vec![t, p];
    }
    Ok(GeoOptimum {
        params: IsometryParams::from_vector(branches, &x),
        value: f,
        converged,
        trace,
    })
}

/// Brute-force grid minimum over the 2×2 class (test oracle and landscape
/// dumps): scans `θ ∈ [0, π/4]`, `φ ∈ [0, 2π)`.
pub fn eaee_grid_min(ctx: &GeoContext, n_theta: usize, n_phi: usize) -> Result<(f64, f64, f64)> {
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..n_theta {
        let theta = FRAC_PI_4 * i as f64 / (n_theta - 1) as f64;
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let v = eaee_objective(ctx, &IsometryParams::TwoByTwo { theta, phi })?;
            if v < best.2 {
                best = (theta, phi, v);
            }
        }
    }
    Ok(best)
}

/// Rate extrapolation by fitting `r(h) = a + b·h + c·h²` through
/// `h, h/2, h/4`.
fn richardson(r1: f64, r2: f64, r4: f64) -> f64 {
    (8.0 * r4 - 6.0 * r2 + r1) / 3.0
}

fn golden_min(mut a: f64, mut b: f64, f: &mut impl FnMut(f64) -> f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { (x1, f1) } else { (x2, f2) }
}

/// Outcome of the derivative-based selector.
#[derive(Clone, Debug)]
pub struct GedoChoice {
    pub params: IsometryParams,
    /// Extrapolated EAEE rate (bits per unit time) of the chosen gauge.
    pub rate: f64,
    pub picked_quarter: bool,
}

/// The candidate comparison shared by the MPS and dense selectors: rates
/// from `(h_k, context_k)` probe pairs by Richardson extrapolation, phase
/// optimization at `θ = π/4` by golden sections on three windows of the full
/// period, ties below 1e-12 to `θ = π/4`.
pub fn gedo_select_core(e0: f64, contexts: &[(f64, GeoContext)]) -> Result<GedoChoice> {
    let rate_of = |theta: f64, phi: f64| -> Result<f64> {
        let mut rs = [0.0; 3];
        for (k, (hk, ctx)) in contexts.iter().enumerate() {
            let e = eaee_objective(ctx, &IsometryParams::TwoByTwo { theta, phi })?;
            rs[k] = (e - e0) / hk;
        }
        Ok(richardson(rs[0], rs[1], rs[2]))
    };

    let rate_jump = rate_of(0.0, 0.0)?;
    let mut best_phi = 0.0;
    let mut best_rate = f64::INFINITY;
    for w in 0..3 {
        let a = 2.0 * PI * w as f64 / 3.0;
        let b = 2.0 * PI * (w + 1) as f64 / 3.0;
        let mut f = |phi: f64| rate_of(FRAC_PI_4, phi).unwrap_or(f64::INFINITY);
        let (phi, r) = golden_min(a, b, &mut f, 1e-5);
        if r < best_rate {
            best_rate = r;
            best_phi = phi;
        }
    }

    let pick_quarter = best_rate <= rate_jump + 1e-12;
    if pick_quarter {
        Ok(GedoChoice {
            params: IsometryParams::TwoByTwo { theta: FRAC_PI_4, phi: best_phi },
            rate: best_rate,
            picked_quarter: true,
        })
    } else {
        Ok(GedoChoice {
            params: IsometryParams::TwoByTwo { theta: 0.0, phi: 0.0 },
            rate: rate_jump,
            picked_quarter: false,
        })
    }
}

fn probe_steps(channel: &KrausSet, probe_h: Option<f64>) -> Result<(DMatrix<C64>, f64, [f64; 3])> {
    let ChannelKind::LindbladPair { gamma, .. } = channel.kind else {
        return Err(Error::InvalidInput(
            "derivative selector needs a Lindblad pair channel".into(),
        ));
    };
    let Some(c) = &channel.jump_op else {
        return Err(Error::InvalidInput("channel lost its jump operator".into()));
    };
    let h = probe_h.unwrap_or(1e-4 / gamma.max(1e-12));
    Ok((c.clone(), gamma, [h, h / 2.0, h / 4.0]))
}

/// Greedy entanglement-derivative optimization: choose between the jump
/// gauge `θ = 0` and the diffusion gauge `θ = π/4` (with its phase
/// optimized) by the smaller small-step EAEE rate.
///
/// The rate is evaluated by Richardson extrapolation of
/// `[Ē(T, h) − E(ψ)]/h` over probe steps `h, h/2, h/4`; both candidate
/// gauges have integer-power expansions in `h`, so the quadratic fit is
/// exact to `O(h³)`.
pub fn gedo_select(
    state: &MpsState,
    channel: &KrausSet,
    cut: usize,
    probe_h: Option<f64>,
) -> Result<GedoChoice> {
    let (c, gamma, hs) = probe_steps(channel, probe_h)?;
    let e0 = state.entropy(cut);
    let mut contexts = Vec::with_capacity(3);
    for hk in hs {
        let probe = crate::channel::local_kraus_pair(&c, gamma, hk, channel.site)?;
        contexts.push((hk, build_context(state, &probe, cut)?));
    }
    gedo_select_core(e0, &contexts)
}

/// Dense-state twin of [`gedo_select`] for the brute-force oracle.
pub fn gedo_select_dense(
    psi: &DVector<C64>,
    length: usize,
    channel: &KrausSet,
    cut: usize,
    probe_h: Option<f64>,
) -> Result<GedoChoice> {
    let (c, gamma, hs) = probe_steps(channel, probe_h)?;
    let rho = crate::dense::reduced_density_dense(psi, length, 2, cut);
    let e0 = crate::dense::entropy_of_density(&rho);
    let mut contexts = Vec::with_capacity(3);
    for hk in hs {
        let probe = crate::channel::local_kraus_pair(&c, gamma, hk, channel.site)?;
        contexts.push((hk, build_context_dense(psi, length, &probe, cut)?));
    }
    gedo_select_core(e0, &contexts)
}
