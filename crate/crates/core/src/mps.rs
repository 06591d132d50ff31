//! Matrix product states in the Schmidt-canonical (Γλ) form.
//!
//! The state of an `L`-site chain with local dimension `d` is stored as
//!
//! ```text
//! Γ[0] — λ[1] — Γ[1] — λ[2] — ... — λ[L-1] — Γ[L-1]
//!   |            |                             |
//! ```
//!
//! with the Schmidt values at every cut kept explicitly so that entanglement
//! entropies are a read-off rather than a sweep. Edge spectra `λ[0]` and
//! `λ[L]` are the trivial `[1]`.
//!
//! Each `Γ[j]` is a rank-3 tensor `(left bond, physical, right bond)` stored
//! in a column-major buffer with the left bond fastest, so the two fused
//! matrix views used by gate application are free reshapes.
//!
//! In canonical form, `λ[j]·Γ[j]` contracts to a left isometry and
//! `Γ[j]·λ[j+1]` to a right isometry. Single-site operators that are not
//! proportional to a unitary break this property; callers are expected to
//! restore it with [`MpsState::canonicalize`] (or [`MpsState::normalize`])
//! before reading spectra again.

use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Schmidt values squared below this are treated as exactly zero: dropped in
/// truncation and skipped in entropies.
pub const SCHMIDT_FLOOR_SQ: f64 = 1e-14;

/// A rank-3 site tensor `(left, phys, right)`, left index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub dl: usize,
    pub d: usize,
    pub dr: usize,
    data: Vec<C64>,
}

impl SiteTensor {
    pub fn zeros(dl: usize, d: usize, dr: usize) -> Self {
        Self { dl, d, dr, data: vec![C64::default(); dl * d * dr] }
    }

    pub fn from_fn(dl: usize, d: usize, dr: usize, f: impl Fn(usize, usize, usize) -> C64) -> Self {
        let mut t = Self::zeros(dl, d, dr);
        for r in 0..dr {
            for p in 0..d {
                for l in 0..dl {
                    t.data[l + dl * (p + d * r)] = f(l, p, r);
                }
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, l: usize, p: usize, r: usize) -> C64 {
        self.data[l + self.dl * (p + self.d * r)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, p: usize, r: usize, v: C64) {
        self.data[l + self.dl * (p + self.d * r)] = v;
    }

    /// View as a `(dl*d) × dr` matrix, row index `l + dl*p`.
    pub fn lfused(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.dl * self.d, self.dr, &self.data)
    }

    /// View as a `dl × (d*dr)` matrix, column index `p + d*r`.
    pub fn rfused(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.dl, self.d * self.dr, &self.data)
    }

    pub fn from_lfused(m: &DMatrix<C64>, d: usize) -> Self {
        let dl = m.nrows() / d;
        assert_eq!(dl * d, m.nrows());
        Self { dl, d, dr: m.ncols(), data: m.as_slice().to_vec() }
    }

    pub fn from_rfused(m: &DMatrix<C64>, d: usize) -> Self {
        let dr = m.ncols() / d;
        assert_eq!(dr * d, m.ncols());
        Self { dl: m.nrows(), d, dr, data: m.as_slice().to_vec() }
    }

    /// The `dl × dr` matrix `Γ(p)` at a fixed physical index.
    pub fn phys_slice(&self, p: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.dl, self.dr, |l, r| self.get(l, p, r))
    }

    /// Apply a `d × d` operator to the physical index.
    pub fn apply_phys(&self, op: &DMatrix<C64>) -> Self {
        let mut out = Self::zeros(self.dl, self.d, self.dr);
        for r in 0..self.dr {
            for pp in 0..self.d {
                for p in 0..self.d {
                    let o = op[(pp, p)];
                    if o == C64::default() {
                        continue;
                    }
                    for l in 0..self.dl {
                        let v = out.get(l, pp, r) + o * self.get(l, p, r);
                        out.set(l, pp, r, v);
                    }
                }
            }
        }
        out
    }

    pub(crate) fn scale_left(&mut self, w: &DVector<f64>) {
        assert_eq!(w.len(), self.dl);
        for r in 0..self.dr {
            for p in 0..self.d {
                for l in 0..self.dl {
                    self.data[l + self.dl * (p + self.d * r)] *= C64::from(w[l]);
                }
            }
        }
    }

    pub(crate) fn scale_right(&mut self, w: &DVector<f64>) {
        assert_eq!(w.len(), self.dr);
        for r in 0..self.dr {
            let c = C64::from(w[r]);
            for p in 0..self.d {
                for l in 0..self.dl {
                    self.data[l + self.dl * (p + self.d * r)] *= c;
                }
            }
        }
    }
}

/// Schmidt spectrum at one bipartition.
#[derive(Clone, Debug)]
pub struct SchmidtSpectrum {
    /// Schmidt values, descending, unit 2-norm for normalized states.
    pub values: DVector<f64>,
    /// Number of sites in the left partition.
    pub cut_position: usize,
}

impl SchmidtSpectrum {
    pub fn check_normalized(&self) -> Result<()> {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "Schmidt spectrum has squared norm {s}, expected 1"
            )));
        }
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("negative Schmidt value".into()));
        }
        Ok(())
    }
}

/// Von Neumann entanglement entropy in bits of a normalized Schmidt spectrum.
///
/// `0·log 0` is taken as zero; values with `λ² < SCHMIDT_FLOOR_SQ` are
/// ignored.
pub fn von_neumann_entropy(spectrum: &SchmidtSpectrum) -> Result<f64> {
    spectrum.check_normalized()?;
    Ok(entropy_of_squared(spectrum.values.iter().map(|v| v * v)))
}

/// `−Σ p log₂ p` over probabilities, skipping entries below the floor.
pub fn entropy_of_squared(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p >= SCHMIDT_FLOOR_SQ)
        .map(|p| -p * p.log2())
        .sum()
}

/// Result of a two-site gate application.
#[derive(Clone, Copy, Debug, Default)]
pub struct TruncationInfo {
    /// Sum of the squared normalized Schmidt values that were dropped.
    pub discarded_weight: f64,
    /// Bond dimension kept at the updated cut.
    pub kept: usize,
}

/// A pure many-body state in Γλ form.
#[derive(Clone, Debug)]
pub struct MpsState {
    gammas: Vec<SiteTensor>,
    /// `lambdas[c]` is the spectrum at the cut between sites `c-1` and `c`;
    /// `lambdas[0]` and `lambdas[L]` are the trivial `[1]`.
    lambdas: Vec<DVector<f64>>,
    local_dim: usize,
    max_bond: usize,
    trunc_tol: f64,
}

impl MpsState {
    /// Product state `⊗_j |v_j⟩` from per-site kets (need not be normalized).
    pub fn product_state(kets: &[DVector<C64>], max_bond: usize, trunc_tol: f64) -> Result<Self> {
        if kets.is_empty() {
            return Err(Error::InvalidInput("empty chain".into()));
        }
        let d = kets[0].len();
        let mut gammas = Vec::with_capacity(kets.len());
        for k in kets {
            if k.len() != d {
                return Err(Error::DimensionMismatch("mixed local dimensions".into()));
            }
            let n = k.norm();
            if n < 1e-300 {
                return Err(Error::DegenerateBranch { norm: n });
            }
            gammas.push(SiteTensor::from_fn(1, d, 1, |_, p, _| k[p] / C64::from(n)));
        }
        let lambdas = vec![DVector::from_element(1, 1.0); kets.len() + 1];
        Ok(Self { gammas, lambdas, local_dim: d, max_bond, trunc_tol })
    }

    /// Computational basis state `|b_0 b_1 … b_{L-1}⟩`.
    pub fn basis_state(bits: &[usize], d: usize, max_bond: usize, trunc_tol: f64) -> Result<Self> {
        let kets: Vec<DVector<C64>> = bits
            .iter()
            .map(|&b| DVector::from_fn(d, |p, _| if p == b { C64::from(1.0) } else { C64::default() }))
            .collect();
        Self::product_state(&kets, max_bond, trunc_tol)
    }

    /// Exact MPS factorization of a dense state vector (big-endian site
    /// order: site 0 is the most significant digit).
    pub fn from_dense(vec: &DVector<C64>, length: usize, d: usize, max_bond: usize, trunc_tol: f64) -> Result<Self> {
        if vec.len() != d.pow(length as u32) {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} is not d^L = {}",
                vec.len(),
                d.pow(length as u32)
            )));
        }
        let mut state = Self::basis_state(&vec![0; length], d, max_bond, trunc_tol)?;
        // Cascaded thin SVDs, left to right; truncation only at the Schmidt floor.
        let mut rest = DMatrix::from_column_slice(1, vec.len(), vec.as_slice());
        let mut left_dim = 1usize;
        for j in 0..length {
            let cols = rest.ncols() / d;
            // rest is (left_dim) × (d^“remaining”), big-endian: current site is
            // the most significant digit of the column index.
            let m = DMatrix::from_fn(left_dim * d, cols, |lp, c| {
                let (l, p) = (lp % left_dim, lp / left_dim);
                rest[(l, p * cols + c)]
            });
            if j == length - 1 {
                let mut gamma = SiteTensor::from_lfused(&m, d);
                let inv_left = DVector::from_fn(left_dim, |i, _| {
                    let w = state.lambdas[j][i];
                    if w > 0.0 { 1.0 / w } else { 0.0 }
                });
                gamma.scale_left(&inv_left);
                state.gammas[j] = gamma;
                state.lambdas[j + 1] = DVector::from_element(1, 1.0);
                break;
            }
            let (u, s, vt) = linalg::svd_thin(&m);
            let total: f64 = s.iter().map(|x| x * x).sum();
            let keep = s
                .iter()
                .take_while(|&&x| x * x / total >= SCHMIDT_FLOOR_SQ)
                .count()
                .max(1);
            let u = u.columns(0, keep).into_owned();
            let s = s.rows(0, keep).into_owned();
            let vt = vt.rows(0, keep).into_owned();
            let snorm = s.norm();
            let mut gamma = SiteTensor::from_lfused(&u, d);
            let inv_left = DVector::from_fn(left_dim, |i, _| {
                let w = state.lambdas[j][i];
                if w > 0.0 { 1.0 / w } else { 0.0 }
            });
            gamma.scale_left(&inv_left);
            state.gammas[j] = gamma;
            state.lambdas[j + 1] = s.map(|x| x / snorm);
            let mut sv = vt;
            for (i, mut row) in sv.row_iter_mut().enumerate() {
                row *= C64::from(s[i]);
            }
            rest = sv;
            left_dim = keep;
        }
        // Norm is absorbed into the last tensor; rescale to unit norm there.
        let n = state.norm();
        if n < 1e-300 {
            return Err(Error::DegenerateBranch { norm: n });
        }
        let last = state.gammas[length - 1].lfused() / C64::from(n);
        state.gammas[length - 1] = SiteTensor::from_lfused(&last, d);
        Ok(state)
    }

    /// Assemble a state from explicit tensors and spectra. Dimensions are
    /// validated; canonicity is the caller's responsibility (run
    /// [`canonicalize`](Self::canonicalize) when unsure).
    pub fn from_parts(
        gammas: Vec<SiteTensor>,
        lambdas: Vec<DVector<f64>>,
        local_dim: usize,
        max_bond: usize,
        trunc_tol: f64,
    ) -> Result<Self> {
        if gammas.is_empty() || lambdas.len() != gammas.len() + 1 {
            return Err(Error::DimensionMismatch("tensor/spectrum count mismatch".into()));
        }
        for (j, g) in gammas.iter().enumerate() {
            if g.d != local_dim || g.dl != lambdas[j].len() || g.dr != lambdas[j + 1].len() {
                return Err(Error::DimensionMismatch(format!("site {j} tensor dims inconsistent")));
            }
        }
        Ok(Self { gammas, lambdas, local_dim, max_bond, trunc_tol })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn trunc_tol(&self) -> f64 {
        self.trunc_tol
    }

    pub fn set_max_bond(&mut self, chi: usize) {
        self.max_bond = chi;
    }

    pub fn bond_dim(&self, cut: usize) -> usize {
        self.lambdas[cut].len()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.lambdas.iter().map(|l| l.len()).max().unwrap_or(1)
    }

    pub fn site_tensor(&self, j: usize) -> &SiteTensor {
        &self.gammas[j]
    }

    pub fn lambda(&self, cut: usize) -> &DVector<f64> {
        &self.lambdas[cut]
    }

    /// Schmidt spectrum at `cut` (sites `< cut` on the left).
    pub fn schmidt_spectrum(&self, cut: usize) -> Result<SchmidtSpectrum> {
        if cut == 0 || cut >= self.len() + 1 {
            return Err(Error::InvalidInput(format!("cut {cut} out of range")));
        }
        Ok(SchmidtSpectrum { values: self.lambdas[cut].clone(), cut_position: cut })
    }

    /// Entanglement entropy in bits at `cut`, read off the stored spectrum.
    pub fn entropy(&self, cut: usize) -> f64 {
        entropy_of_squared(self.lambdas[cut].iter().map(|v| v * v))
    }

    /// Left-canonical site piece `λ[j]·Γ[j]` as a tensor.
    fn a_tensor(&self, j: usize) -> SiteTensor {
        let mut t = self.gammas[j].clone();
        t.scale_left(&self.lambdas[j]);
        t
    }

    /// Right-canonical site piece `Γ[j]·λ[j+1]` as a tensor.
    fn b_tensor(&self, j: usize) -> SiteTensor {
        let mut t = self.gammas[j].clone();
        t.scale_right(&self.lambdas[j + 1]);
        t
    }

    /// One-site center form `λ[j]·Γ[j]·λ[j+1]`.
    pub fn theta_one(&self, j: usize) -> SiteTensor {
        let mut t = self.gammas[j].clone();
        t.scale_left(&self.lambdas[j]);
        t.scale_right(&self.lambdas[j + 1]);
        t
    }

    /// `√⟨ψ|ψ⟩` by honest contraction (no canonical-form assumptions).
    pub fn norm(&self) -> f64 {
        let mut env = DMatrix::<C64>::from_element(1, 1, C64::from(1.0));
        for j in 0..self.len() {
            let a = self.a_tensor(j);
            let mut next = DMatrix::<C64>::zeros(a.dr, a.dr);
            for p in 0..a.d {
                let ap = a.phys_slice(p);
                next += ap.adjoint() * &env * ap;
            }
            env = next;
        }
        env[(0, 0)].re.max(0.0).sqrt()
    }

    /// Left environment `⟨A_i|A_j⟩` of the map from the bond at `cut` to the
    /// left block, excluding the spectrum at `cut`. Identity when canonical.
    fn left_env(&self, cut: usize) -> DMatrix<C64> {
        let mut env = DMatrix::<C64>::from_element(1, 1, C64::from(1.0));
        for j in 0..cut {
            let a = self.a_tensor(j);
            let mut next = DMatrix::<C64>::zeros(a.dr, a.dr);
            for p in 0..a.d {
                let ap = a.phys_slice(p);
                next += ap.adjoint() * &env * ap;
            }
            env = next;
        }
        env
    }

    /// Right environment of the map from the bond at `cut` to the right
    /// block, excluding the spectrum at `cut`. Identity when canonical.
    fn right_env(&self, cut: usize) -> DMatrix<C64> {
        let mut env = DMatrix::<C64>::from_element(1, 1, C64::from(1.0));
        for j in (cut..self.len()).rev() {
            let b = self.b_tensor(j);
            let mut next = DMatrix::<C64>::zeros(b.dl, b.dl);
            for p in 0..b.d {
                let bp = b.phys_slice(p);
                next += &bp * &env * bp.adjoint();
            }
            env = next;
        }
        env
    }

    /// Reduced density matrix of the left block, expressed over the bond
    /// basis at `cut` (dimension = bond dimension there). The result is
    /// Hermitian and isospectral to `tr_B |ψ⟩⟨ψ|`; its trace equals ⟨ψ|ψ⟩.
    ///
    /// Works for unnormalized and non-canonical states: the (generally
    /// non-orthonormal) block bases are corrected for via their Gram
    /// matrices.
    pub fn reduced_density(&self, cut: usize) -> Result<DMatrix<C64>> {
        if cut == 0 || cut >= self.len() + 1 {
            return Err(Error::InvalidInput(format!("cut {cut} out of range")));
        }
        let lam = &self.lambdas[cut];
        let left = self.left_env(cut);
        let right = self.right_env(cut);
        let n = lam.len();
        // ρ_A over the left-bond basis is Λ·R^T·Λ; a non-orthonormal left
        // basis with Gram L is folded in as L^{1/2}·ρ·L^{1/2}.
        let lr = DMatrix::from_fn(n, n, |i, j| lam[i] * lam[j] * right[(j, i)]);
        let canonical_left = {
            let id = DMatrix::<C64>::identity(n, n);
            (&left - &id).norm() < 1e-12
        };
        let rho = if canonical_left {
            lr
        } else {
            let sq = linalg::sqrtm_psd(&left);
            &sq * lr * &sq
        };
        // Symmetrize away roundoff.
        Ok((&rho + rho.adjoint()) * C64::from(0.5))
    }

    /// Apply a single-site operator; the state becomes unnormalized and, for
    /// non-unitary operators, non-canonical away from `site` until the next
    /// [`canonicalize`](Self::canonicalize). Stored spectra at other cuts are
    /// left untouched.
    pub fn apply_local_operator(&mut self, site: usize, op: &DMatrix<C64>) -> Result<()> {
        if site >= self.len() {
            return Err(Error::InvalidInput(format!("site {site} out of range")));
        }
        if op.nrows() != self.local_dim || op.ncols() != self.local_dim {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, local dimension is {}",
                op.nrows(),
                op.ncols(),
                self.local_dim
            )));
        }
        self.gammas[site] = self.gammas[site].apply_phys(op);
        Ok(())
    }

    /// Expectation `⟨ψ|O_{s1}·…·O_{sk}|ψ⟩` of a product of single-site
    /// operators at distinct sites, assuming canonical normalized form.
    pub fn expect_product(&self, ops: &[(usize, DMatrix<C64>)]) -> C64 {
        if ops.is_empty() {
            return C64::from(1.0);
        }
        let mut sorted: Vec<&(usize, DMatrix<C64>)> = ops.iter().collect();
        sorted.sort_by_key(|(s, _)| *s);
        let first = sorted[0].0;
        let last = sorted[sorted.len() - 1].0;
        let mut env = DMatrix::<C64>::identity(self.bond_dim(first), self.bond_dim(first));
        let mut k = 0usize;
        for j in first..=last {
            let a = self.a_tensor(j);
            let mut next = DMatrix::<C64>::zeros(a.dr, a.dr);
            if k < sorted.len() && sorted[k].0 == j {
                let op = &sorted[k].1;
                for pp in 0..a.d {
                    for p in 0..a.d {
                        let o = op[(pp, p)];
                        if o == C64::default() {
                            continue;
                        }
                        next += a.phys_slice(pp).adjoint() * &env * a.phys_slice(p) * o;
                    }
                }
                k += 1;
            } else {
                for p in 0..a.d {
                    let ap = a.phys_slice(p);
                    next += ap.adjoint() * &env * ap;
                }
            }
            env = next;
        }
        let lam = &self.lambdas[last + 1];
        let mut tot = C64::default();
        for i in 0..lam.len() {
            tot += env[(i, i)] * C64::from(lam[i] * lam[i]);
        }
        tot
    }

    /// Apply a two-site gate on `(left_site, left_site+1)`.
    ///
    /// The gate is a `d²×d²` matrix over the composite index `p_left·d +
    /// p_right`. The updated cut is re-SVD'd, truncated to the bond cap and
    /// the discarded-weight tolerance, and the new spectrum is renormalized
    /// to unit 2-norm.
    pub fn apply_two_site_gate(&mut self, left_site: usize, gate: &DMatrix<C64>) -> Result<TruncationInfo> {
        let d = self.local_dim;
        if left_site + 1 >= self.len() {
            return Err(Error::InvalidInput(format!("gate at {left_site} out of range")));
        }
        if gate.nrows() != d * d || gate.ncols() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "gate is {}x{}, expected {}x{}",
                gate.nrows(),
                gate.ncols(),
                d * d,
                d * d
            )));
        }
        let j = left_site;
        let chi_l = self.lambdas[j].len();
        let chi_r = self.lambdas[j + 2].len();

        // θ = λ[j]·Γ[j]·λ[j+1]·Γ[j+1]·λ[j+2], as (χl·d) × (d·χr).
        let mut a = self.a_tensor(j);
        a.scale_right(&self.lambdas[j + 1]);
        let b = self.b_tensor(j + 1);
        let theta = a.lfused() * b.rfused();

        // Gate application through a (d²) × (χl·χr) permuted view.
        let mut perm = DMatrix::<C64>::zeros(d * d, chi_l * chi_r);
        for r in 0..chi_r {
            for p2 in 0..d {
                for p1 in 0..d {
                    for l in 0..chi_l {
                        perm[(p1 * d + p2, l + chi_l * r)] = theta[(l + chi_l * p1, p2 + d * r)];
                    }
                }
            }
        }
        let gated = gate * perm;
        let mut theta2 = DMatrix::<C64>::zeros(chi_l * d, d * chi_r);
        for r in 0..chi_r {
            for p2 in 0..d {
                for p1 in 0..d {
                    for l in 0..chi_l {
                        theta2[(l + chi_l * p1, p2 + d * r)] = gated[(p1 * d + p2, l + chi_l * r)];
                    }
                }
            }
        }

        let (u, s, vt) = linalg::svd_thin(&theta2);
        let total: f64 = s.iter().map(|x| x * x).sum();
        if total < 1e-300 {
            return Err(Error::DegenerateBranch { norm: 0.0 });
        }
        // Keep within the bond cap, above the Schmidt floor, and stop early
        // once the remaining tail is already inside the discarded-weight
        // tolerance. Degenerate values tie-break toward the earlier index
        // (descending SVD order is kept as-is).
        let mut suffix = vec![0.0_f64; s.len() + 1];
        for i in (0..s.len()).rev() {
            suffix[i] = suffix[i + 1] + s[i] * s[i];
        }
        let mut keep = 0usize;
        while keep < s.len().min(self.max_bond) {
            if s[keep] * s[keep] / total < SCHMIDT_FLOOR_SQ {
                break;
            }
            if keep > 0 && suffix[keep] / total <= self.trunc_tol {
                break;
            }
            keep += 1;
        }
        let keep = keep.max(1);
        let discarded = suffix[keep] / total;

        let u = u.columns(0, keep).into_owned();
        let vt = vt.rows(0, keep).into_owned();
        let mut lam = DVector::from_fn(keep, |i, _| s[i]);
        let lnorm = lam.norm();
        lam /= lnorm;

        // Divide the environment spectra back out.
        let inv_l = DVector::from_fn(chi_l, |i, _| {
            let w = self.lambdas[j][i];
            if w > 1e-150 { 1.0 / w } else { 0.0 }
        });
        let inv_r = DVector::from_fn(chi_r, |i, _| {
            let w = self.lambdas[j + 2][i];
            if w > 1e-150 { 1.0 / w } else { 0.0 }
        });
        let mut gl = SiteTensor::from_lfused(&u, d);
        gl.scale_left(&inv_l);
        let mut gr = SiteTensor::from_rfused(&vt, d);
        gr.scale_right(&inv_r);

        self.gammas[j] = gl;
        self.gammas[j + 1] = gr;
        self.lambdas[j + 1] = lam;
        Ok(TruncationInfo { discarded_weight: discarded, kept: keep })
    }

    /// Rebuild the canonical Γλ form from scratch and normalize.
    ///
    /// Returns the norm that was divided out. Spectra at every cut are
    /// refreshed; values below the Schmidt floor are dropped.
    pub fn canonicalize(&mut self) -> Result<f64> {
        let length = self.len();
        let d = self.local_dim;
        // Raw right-form train Γ[j]·λ[j+1]; its plain product is the state.
        let mut train: Vec<SiteTensor> = (0..length).map(|j| self.b_tensor(j)).collect();

        // Left-to-right sweep: make sites 0..L-2 left isometries, pushing
        // weight (and the state norm) into the last site.
        for j in 0..length.saturating_sub(1) {
            let m = train[j].lfused();
            let (u, s, vt) = linalg::svd_thin(&m);
            let total: f64 = s.iter().map(|x| x * x).sum();
            if total < 1e-300 {
                return Err(Error::DegenerateBranch { norm: 0.0 });
            }
            let keep = s
                .iter()
                .take_while(|&&x| x * x / total >= SCHMIDT_FLOOR_SQ * 1e-2)
                .count()
                .max(1);
            let u = u.columns(0, keep).into_owned();
            train[j] = SiteTensor::from_lfused(&u, d);
            let mut sv = vt.rows(0, keep).into_owned();
            for (i, mut row) in sv.row_iter_mut().enumerate() {
                row *= C64::from(s[i]);
            }
            let next = sv * train[j + 1].rfused();
            train[j + 1] = SiteTensor::from_rfused(&next, d);
        }

        // Right-to-left sweep: extract the true Schmidt spectrum at every
        // cut, leaving right isometries behind and carrying U·S leftward.
        let mut lambdas = vec![DVector::from_element(1, 1.0); length + 1];
        for j in (1..length).rev() {
            let m = train[j].rfused();
            let (u, s, vt) = linalg::svd_thin(&m);
            let total: f64 = s.iter().map(|x| x * x).sum();
            if total < 1e-300 {
                return Err(Error::DegenerateBranch { norm: 0.0 });
            }
            let keep = s
                .iter()
                .enumerate()
                .take_while(|&(i, &x)| i < self.max_bond && x * x / total >= SCHMIDT_FLOOR_SQ)
                .count()
                .max(1);
            let mut lam = DVector::from_fn(keep, |i, _| s[i]);
            lam /= lam.norm();
            let vt = vt.rows(0, keep).into_owned();
            train[j] = SiteTensor::from_rfused(&vt, d);
            lambdas[j] = lam;
            let mut us = u.columns(0, keep).into_owned();
            for (i, mut col) in us.column_iter_mut().enumerate() {
                col *= C64::from(s[i]);
            }
            let prev = train[j - 1].lfused() * us;
            train[j - 1] = SiteTensor::from_lfused(&prev, d);
        }

        // The full norm now sits in site 0; divide it out.
        let final_m = train[0].lfused();
        let norm = final_m.norm();
        if norm < 1e-300 {
            return Err(Error::DegenerateBranch { norm });
        }
        train[0] = SiteTensor::from_lfused(&(final_m / C64::from(norm)), d);

        // Convert right-form pieces back to Γ by dividing λ[j+1] out.
        for j in 0..length {
            let mut g = train[j].clone();
            let inv = DVector::from_fn(lambdas[j + 1].len(), |i, _| {
                let w = lambdas[j + 1][i];
                if w > 1e-150 { 1.0 / w } else { 0.0 }
            });
            g.scale_right(&inv);
            self.gammas[j] = g;
        }
        self.lambdas = lambdas;
        Ok(norm)
    }

    /// Rescale to unit norm and restore canonical form with a full sweep.
    pub fn normalize(&mut self) -> Result<f64> {
        self.canonicalize()
    }

    /// Max deviation of the left/right isometry conditions over all sites.
    pub fn canonical_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.len() {
            let a = self.a_tensor(j);
            let mut acc = DMatrix::<C64>::zeros(a.dr, a.dr);
            for p in 0..a.d {
                let ap = a.phys_slice(p);
                acc += ap.adjoint() * ap;
            }
            worst = worst.max((acc - DMatrix::identity(a.dr, a.dr)).norm());
            let b = self.b_tensor(j);
            let mut acc = DMatrix::<C64>::zeros(b.dl, b.dl);
            for p in 0..b.d {
                let bp = b.phys_slice(p);
                acc += &bp * bp.adjoint();
            }
            worst = worst.max((acc - DMatrix::identity(b.dl, b.dl)).norm());
        }
        worst
    }

    /// Overwrite a neighboring tensor pair and the spectrum between them.
    /// The caller is responsible for the result being canonical; used by
    /// model constructors that build known states directly.
    pub(crate) fn replace_pair(
        &mut self,
        left: usize,
        gl: SiteTensor,
        gr: SiteTensor,
        lam: DVector<f64>,
    ) {
        self.gammas[left] = gl;
        self.gammas[left + 1] = gr;
        self.lambdas[left + 1] = lam;
    }

    /// Contract into a dense state vector (big-endian site order).
    pub fn to_dense(&self) -> DVector<C64> {
        let d = self.local_dim;
        let mut acc = DMatrix::<C64>::from_element(1, 1, C64::from(1.0));
        // acc: (configurations so far) × (current bond)
        for j in 0..self.len() {
            let a = if j == 0 { self.a_tensor(0) } else { self.a_tensor(j) };
            let rows = acc.nrows();
            let mut next = DMatrix::<C64>::zeros(rows * d, a.dr);
            for p in 0..d {
                let block = &acc * a.phys_slice(p);
                for r in 0..rows {
                    for c in 0..a.dr {
                        // big-endian: earlier sites are more significant
                        next[(r * d + p, c)] = block[(r, c)];
                    }
                }
            }
            acc = next;
        }
        DVector::from_fn(acc.nrows(), |i, _| acc[(i, 0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn bell_pair() -> MpsState {
        let v = DVector::from_vec(vec![
            C64::from(1.0 / 2f64.sqrt()),
            C64::default(),
            C64::default(),
            C64::from(1.0 / 2f64.sqrt()),
        ]);
        MpsState::from_dense(&v, 2, 2, 16, 0.0).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let s = SchmidtSpectrum { values: DVector::from_vec(vec![1.0]), cut_position: 1 };
        assert_eq!(von_neumann_entropy(&s).unwrap(), 0.0);

        let s = SchmidtSpectrum {
            values: DVector::from_vec(vec![1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()]),
            cut_position: 1,
        };
        assert_abs_diff_eq!(von_neumann_entropy(&s).unwrap(), 1.0, epsilon = 1e-12);

        let s = SchmidtSpectrum {
            values: DVector::from_vec(vec![0.9f64.sqrt(), 0.1f64.sqrt()]),
            cut_position: 1,
        };
        let expected = -(0.9_f64 * 0.9_f64.log2() + 0.1 * 0.1_f64.log2());
        assert_abs_diff_eq!(von_neumann_entropy(&s).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.4690, epsilon = 5e-5);
    }

    #[test]
    fn entropy_rejects_unnormalized() {
        let s = SchmidtSpectrum { values: DVector::from_vec(vec![1.0, 0.5]), cut_position: 1 };
        assert!(von_neumann_entropy(&s).is_err());
    }

    #[test]
    fn bell_state_properties() {
        let psi = bell_pair();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.entropy(1), 1.0, epsilon = 1e-12);
        let rho = psi.reduced_density(1).unwrap();
        assert_abs_diff_eq!(rho[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert!(psi.canonical_residual() < 1e-12);
    }

    #[test]
    fn x_state_reduced_density() {
        // cos(x)|11⟩ + sin(x)|00⟩ with cos x = 0.98
        let c = 0.98f64;
        let s = (1.0 - c * c).sqrt();
        let v = DVector::from_vec(vec![C64::from(s), C64::default(), C64::default(), C64::from(c)]);
        let psi = MpsState::from_dense(&v, 2, 2, 16, 0.0).unwrap();
        let rho = psi.reduced_density(1).unwrap();
        let mut eig: Vec<f64> = crate::linalg::eigvalsh(&rho).iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_abs_diff_eq!(eig[0], 0.9604, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 0.0396, epsilon = 1e-12);
    }

    #[test]
    fn product_state_entropy_zero_everywhere() {
        let psi = MpsState::basis_state(&[1, 0, 1, 1], 2, 8, 0.0).unwrap();
        for cut in 1..4 {
            assert_eq!(psi.entropy(cut), 0.0);
            assert_eq!(psi.bond_dim(cut), 1);
        }
    }

    #[test]
    fn local_identity_keeps_state() {
        let mut psi = bell_pair();
        let before = psi.to_dense();
        psi.apply_local_operator(0, &DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        assert!((psi.to_dense() - before).norm() < 1e-13);
    }

    #[test]
    fn local_sz_half_norm() {
        // σᶻ/2 on |1⟩: eigenvalue −1/2, squared norm 1/4.
        let mut psi = MpsState::basis_state(&[1], 2, 4, 0.0).unwrap();
        let sz_half = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(0.5), C64::from(-0.5)]));
        psi.apply_local_operator(0, &sz_half).unwrap();
        assert_abs_diff_eq!(psi.norm() * psi.norm(), 0.25, epsilon = 1e-13);
    }

    #[test]
    fn k1_branch_norm_on_plus_state() {
        // K₁ = √(γdt)·σᶻ/2 on |+⟩: squared norm γdt/4.
        let gdt = 0.013_f64;
        let plus = DVector::from_vec(vec![C64::from(1.0), C64::from(1.0)]);
        let mut psi = MpsState::product_state(&[plus], 8, 0.0).unwrap();
        let k1 = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(0.5), C64::from(-0.5)]))
            * C64::from(gdt.sqrt());
        psi.apply_local_operator(0, &k1).unwrap();
        assert_abs_diff_eq!(psi.norm() * psi.norm(), gdt / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn scaled_state_norm() {
        let mut psi = bell_pair();
        psi.apply_local_operator(0, &(DMatrix::identity(2, 2) * C64::from(2.0))).unwrap();
        assert_abs_diff_eq!(psi.norm(), 2.0, epsilon = 1e-12);
        let n = psi.normalize().unwrap();
        assert_abs_diff_eq!(n, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn swap_gate_on_product_block() {
        let mut psi = MpsState::basis_state(&[0, 1], 2, 4, 0.0).unwrap();
        let mut swap = DMatrix::<C64>::zeros(4, 4);
        swap[(0, 0)] = C64::from(1.0);
        swap[(1, 2)] = C64::from(1.0);
        swap[(2, 1)] = C64::from(1.0);
        swap[(3, 3)] = C64::from(1.0);
        psi.apply_two_site_gate(0, &swap).unwrap();
        let dense = psi.to_dense();
        // |01⟩ → |10⟩ (big-endian index 2)
        assert_abs_diff_eq!(dense[2].re, 1.0, epsilon = 1e-12);
        assert_eq!(psi.bond_dim(1), 1);
    }

    #[test]
    fn identity_gate_keeps_state() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let v = dense::random_state(8, &mut rng);
        let mut psi = MpsState::from_dense(&v, 3, 2, 16, 0.0).unwrap();
        let before = psi.to_dense();
        psi.apply_two_site_gate(1, &DMatrix::identity(4, 4)).unwrap();
        let after = psi.to_dense();
        let fid = before.dotc(&after).norm();
        assert!(fid > 1.0 - 1e-12, "fidelity {fid}");
    }

    #[test]
    fn random_gates_match_dense_evolution() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let length = 4;
        let v = dense::random_state(16, &mut rng);
        let mut psi = MpsState::from_dense(&v, length, 2, 64, 0.0).unwrap();
        let mut dense_v = v.clone();
        for step in 0..60 {
            let site = step % (length - 1);
            let g = dense::random_unitary(4, &mut rng);
            psi.apply_two_site_gate(site, &g).unwrap();
            dense_v = dense::apply_two_site(&dense_v, length, site, &g);
            let overlap = psi.to_dense().dotc(&dense_v).norm();
            assert!(overlap > 1.0 - 1e-10, "fidelity lost at step {step}: {overlap}");
        }
        assert!(psi.canonical_residual() < 1e-8);
    }

    #[test]
    fn truncation_reports_discarded_weight() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let v = dense::random_state(16, &mut rng);
        let mut psi = MpsState::from_dense(&v, 4, 2, 64, 0.0).unwrap();
        // Entangle, then cap the bond hard and verify the report.
        for site in [0usize, 1, 2, 1] {
            let g = dense::random_unitary(4, &mut rng);
            psi.apply_two_site_gate(site, &g).unwrap();
        }
        let spectrum_before = psi.lambda(2).clone();
        psi.set_max_bond(2);
        let info = psi.apply_two_site_gate(1, &DMatrix::identity(4, 4)).unwrap();
        let dropped: f64 = spectrum_before.iter().skip(2).map(|x| x * x).sum();
        assert_abs_diff_eq!(info.discarded_weight, dropped, epsilon = 1e-12);
        assert_eq!(info.kept, 2);
        // Spectrum renormalized after truncation.
        let s: f64 = psi.lambda(2).iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn canonicalize_after_nonunitary_op() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let v = dense::random_state(32, &mut rng);
        let mut psi = MpsState::from_dense(&v, 5, 2, 32, 0.0).unwrap();
        let op = DMatrix::from_fn(2, 2, |i, j| C64::new(0.3 * (i + j) as f64 + 0.2, 0.1 * i as f64));
        psi.apply_local_operator(2, &op).unwrap();
        let dense_after = {
            let full = dense::embed_single_site(&op, 5, 2, 2);
            &full * &v
        };
        let n = psi.normalize().unwrap();
        assert_abs_diff_eq!(n, dense_after.norm(), epsilon = 1e-12);
        assert!(psi.canonical_residual() < 1e-10);
        let overlap = psi.to_dense().dotc(&dense_after).norm() / dense_after.norm();
        assert!(overlap > 1.0 - 1e-11, "overlap {overlap}");
        // Spectra refreshed: entropy matches the dense reduced state.
        for cut in 1..5 {
            let rho = dense::reduced_density_dense(&psi.to_dense(), 5, 2, cut);
            let eig = crate::linalg::eigvalsh(&rho);
            let expected = entropy_of_squared(eig.iter().copied());
            assert_abs_diff_eq!(psi.entropy(cut), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn expect_product_matches_dense() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let v = dense::random_state(16, &mut rng);
        let psi = MpsState::from_dense(&v, 4, 2, 32, 0.0).unwrap();
        let sz = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(1.0), C64::from(-1.0)]));
        let got = psi.expect_product(&[(0, sz.clone()), (2, sz.clone())]);
        let o = dense::embed_single_site(&sz, 4, 2, 0) * dense::embed_single_site(&sz, 4, 2, 2);
        let want = (v.adjoint() * &o * &v)[(0, 0)];
        assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 1e-11);
    }
}
