//! Cross-trajectory aggregation: EAEE estimators, entanglement-exponent
//! histograms, steady-state detection, area/volume finite-size scaling fits,
//! and critical-rate extrapolation.

use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result};

/// Histogram with explicit bin edges; `density` integrates to one.
#[derive(Clone, Debug)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn build(samples: &[f64], bins: usize) -> Self {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &s in samples {
            let mut b = ((s - lo) / width) as usize;
            if b >= bins {
                b = bins - 1;
            }
            counts[b] += 1;
        }
        let total = samples.len() as f64;
        let density = counts.iter().map(|&c| c as f64 / total / width).collect();
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        Self { edges, density }
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .enumerate()
            .map(|(i, d)| d * (self.edges[i + 1] - self.edges[i]))
            .sum()
    }
}

/// Ensemble aggregates of an unweighted trajectory average (trajectories are
/// sampled with their physical probabilities, so the weights are uniform;
/// circuit disorder rides along since each trajectory carries its own
/// realization).
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Mean and standard error per time of the tracked cut (`cut_index` into
    /// the per-record cut list).
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per-cut profile: `[time][cut] (mean, stderr)`.
    pub per_cut: Vec<Vec<(f64, f64)>>,
    /// Histograms of the entanglement exponent `e^E` at each time.
    pub exponent_histograms: Vec<Histogram>,
    pub m: usize,
    /// Mean per-time observables, with standard errors.
    pub observables: Vec<Vec<(f64, f64)>>,
    /// Fraction of adaptive gauge decisions that picked `θ = π/4`.
    pub quarter_fraction: Option<f64>,
}

fn mean_stderr(samples: impl Iterator<Item = f64> + Clone, m: usize) -> (f64, f64) {
    let mean = samples.clone().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Aggregate records (all from the same schedule) into ensemble statistics.
pub fn aggregate(records: &[TrajectoryRecord], cut_index: usize, hist_bins: usize) -> Result<EnsembleStats> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records".into()));
    }
    let m = records.len();
    let n_t = records[0].times.len();
    let n_cuts = records[0].entropies[0].len();
    let n_obs = records[0].observables[0].len();
    if records.iter().any(|r| r.times.len() != n_t) {
        return Err(Error::InvalidInput("records disagree on the schedule".into()));
    }
    let mut stats = EnsembleStats {
        times: records[0].times.clone(),
        mean: Vec::with_capacity(n_t),
        stderr: Vec::with_capacity(n_t),
        per_cut: Vec::with_capacity(n_t),
        exponent_histograms: Vec::with_capacity(n_t),
        m,
        observables: Vec::with_capacity(n_t),
        quarter_fraction: None,
    };
    for t in 0..n_t {
        let (mean, err) = mean_stderr(records.iter().map(|r| r.entropies[t][cut_index]), m);
        stats.mean.push(mean);
        stats.stderr.push(err);
        stats.per_cut.push(
            (0..n_cuts)
                .map(|c| mean_stderr(records.iter().map(|r| r.entropies[t][c]), m))
                .collect(),
        );
        let exponents: Vec<f64> =
            records.iter().map(|r| 2f64.powf(r.entropies[t][cut_index])).collect();
        stats.exponent_histograms.push(Histogram::build(&exponents, hist_bins));
        stats.observables.push(
            (0..n_obs)
                .map(|o| mean_stderr(records.iter().map(|r| r.observables[t][o]), m))
                .collect(),
        );
    }
    let picks: u64 = records.iter().map(|r| r.adaptive_picks).sum();
    if picks > 0 {
        let quarters: u64 = records.iter().map(|r| r.quarter_picks).sum();
        stats.quarter_fraction = Some(quarters as f64 / picks as f64);
    }
    Ok(stats)
}

/// Weighted least squares `y = intercept + slope·x`.
/// Returns `(intercept, slope, var_i, var_s, cov_is)`.
fn wls(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput("need at least two points to fit a line".into()));
    }
    let w: Vec<f64> = sigmas
        .iter()
        .map(|s| {
            let s = s.max(1e-12);
            1.0 / (s * s)
        })
        .collect();
    let sw: f64 = w.iter().sum();
    let swx: f64 = w.iter().zip(xs).map(|(w, x)| w * x).sum();
    let swy: f64 = w.iter().zip(ys).map(|(w, y)| w * y).sum();
    let swxx: f64 = w.iter().zip(xs).map(|(w, x)| w * x * x).sum();
    let swxy: f64 = w.iter().zip(xs.iter().zip(ys)).map(|(w, (x, y))| w * x * y).sum();
    let det = sw * swxx - swx * swx;
    if det.abs() < 1e-300 {
        return Err(Error::InvalidInput("degenerate abscissas in linear fit".into()));
    }
    let intercept = (swxx * swy - swx * swxy) / det;
    let slope = (sw * swxy - swx * swy) / det;
    let var_i = swxx / det;
    let var_s = sw / det;
    let cov = -swx / det;
    Ok((intercept, slope, var_i, var_s, cov))
}

/// Steady-state detection: average over the trailing window (default last
/// quarter of the series) after checking that a linear drift fit there is
/// consistent with zero slope (`|slope| < 2σ_slope`).
pub fn steady_state_value(
    times: &[f64],
    mean: &[f64],
    stderr: &[f64],
    window_fraction: f64,
) -> Result<(f64, f64)> {
    let n = times.len();
    if n < 4 {
        return Err(Error::InvalidInput("series too short for steady-state detection".into()));
    }
    let start = ((n as f64) * (1.0 - window_fraction)).floor() as usize;
    let start = start.min(n - 3);
    let xs = &times[start..];
    let ys = &mean[start..];
    let ss = &stderr[start..];
    let nw = xs.len() as f64;
    let (_, slope, _, var_s, _) = wls(xs, ys, ss)?;
    let sigma_s = var_s.sqrt();
    // Fall back to the sample scatter when ensemble errors are degenerate.
    let scatter = {
        let m = ys.iter().sum::<f64>() / nw;
        (ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (nw - 1.0)).sqrt()
    };
    let span = xs[xs.len() - 1] - xs[0];
    let slope_scale = sigma_s.max(scatter / span.max(1e-12) / nw.sqrt());
    if slope.abs() > 2.0 * slope_scale {
        return Err(Error::NotConverged(format!(
            "trailing window drifts: slope {slope:.3e} vs scale {slope_scale:.3e}"
        )));
    }
    let value = ys.iter().sum::<f64>() / nw;
    let err_mean = (ss.iter().map(|s| s * s).sum::<f64>() / nw / nw).sqrt();
    let err = err_mean.max(scatter / nw.sqrt());
    Ok((value, err))
}

/// Finite-size scaling fit of the steady-state middle-cut EAEE,
/// `Ē = a + b·L`, in both parametrizations (direct, and `Ē/L` against
/// `1/L` whose slope is `a`).
#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub a: f64,
    pub a_err: f64,
    pub b: f64,
    pub b_err: f64,
    /// `a` from the `Ē/L` vs `1/L` parametrization; agrees with `a` within
    /// errors on consistent data.
    pub a_alt: f64,
    pub a_alt_err: f64,
    /// Set when `|b| < 2σ_b`.
    pub area_law: bool,
    /// Weighted mean square residual of the direct fit.
    pub residual: f64,
}

/// Fit `(L, Ē_SS ± err)` points to the area/volume ansatz.
pub fn area_volume_fit(points: &[(usize, f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("scaling fit needs at least two sizes".into()));
    }
    let mut sizes: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::InvalidInput("scaling fit needs at least two distinct sizes".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ss: Vec<f64> = points.iter().map(|p| p.2).collect();
    let (a, b, var_a, var_b, _) = wls(&xs, &ys, &ss)?;
    // Ē/L = b + a·(1/L)
    let xs2: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
    let ys2: Vec<f64> = ys.iter().zip(&xs).map(|(y, x)| y / x).collect();
    let ss2: Vec<f64> = ss.iter().zip(&xs).map(|(s, x)| s / x).collect();
    let (_, a_alt, _, var_a_alt, _) = wls(&xs2, &ys2, &ss2)?;
    let residual = {
        let mut acc = 0.0;
        for i in 0..xs.len() {
            let r = (ys[i] - a - b * xs[i]) / ss[i].max(1e-12);
            acc += r * r;
        }
        acc / xs.len() as f64
    };
    Ok(ScalingFit {
        a,
        a_err: var_a.sqrt(),
        b,
        b_err: var_b.sqrt(),
        a_alt,
        a_alt_err: var_a_alt.sqrt(),
        area_law: b.abs() < 2.0 * var_b.sqrt(),
        residual,
    })
}

/// Locate the critical decoherence rate from `(γ, a(γ) ± err)` by a linear
/// fit of `1/a` against `γ` and its zero crossing; the error is propagated
/// from the fit covariance.
pub fn gamma_star_extrapolate(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("extrapolation needs at least two rates".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| 1.0 / p.1).collect();
    let ss: Vec<f64> = points.iter().map(|p| p.2 / (p.1 * p.1)).collect();
    let (intercept, slope, var_i, var_s, cov) = wls(&xs, &ys, &ss)?;
    if slope <= 0.0 {
        return Err(Error::NoTransition(format!("non-positive slope {slope:.3e}")));
    }
    let gamma_star = -intercept / slope;
    let var = (var_i + gamma_star * gamma_star * var_s + 2.0 * gamma_star * cov) / (slope * slope);
    Ok((gamma_star, var.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn fake_record(entropy: f64, idx: u64, times: &[f64]) -> TrajectoryRecord {
        TrajectoryRecord {
            trajectory_index: idx,
            times: times.to_vec(),
            entropies: times.iter().map(|_| vec![entropy]).collect(),
            observables: times.iter().map(|_| vec![]).collect(),
            snapshots: vec![],
            branch_log: vec![],
            discarded: times.iter().map(|_| 0.0).collect(),
            quarter_picks: 0,
            adaptive_picks: 0,
            max_bond_seen: 1,
        }
    }

    #[test]
    fn identical_trajectories_have_zero_stderr() {
        let times = [0.0, 1.0, 2.0];
        let recs: Vec<_> = (0..50).map(|i| fake_record(0.7, i, &times)).collect();
        let stats = aggregate(&recs, 0, 8).unwrap();
        for (m, s) in stats.mean.iter().zip(&stats.stderr) {
            assert_abs_diff_eq!(*m, 0.7, epsilon = 1e-13);
            assert_abs_diff_eq!(*s, 0.0, epsilon = 1e-13);
        }
        for h in &stats.exponent_histograms {
            assert_abs_diff_eq!(h.integral(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stderr_halves_with_quadruple_samples() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let times = [0.0];
        let make = |m: usize, rng: &mut ChaCha12Rng| -> f64 {
            let recs: Vec<_> = (0..m)
                .map(|i| fake_record(1.0 + 0.3 * rng.sample::<f64, _>(StandardNormal), i as u64, &times))
                .collect();
            aggregate(&recs, 0, 4).unwrap().stderr[0]
        };
        let e1 = make(400, &mut rng);
        let e2 = make(1600, &mut rng);
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.35, "stderr ratio {ratio}");
    }

    #[test]
    fn steady_state_examples() {
        let times: Vec<f64> = (0..40).map(|i| i as f64).collect();
        // constant series → the constant
        let mean = vec![2.5; 40];
        let err = vec![0.05; 40];
        let (v, _) = steady_state_value(&times, &mean, &err, 0.25).unwrap();
        assert_abs_diff_eq!(v, 2.5, epsilon = 1e-12);

        // linearly growing series → not converged
        let growing: Vec<f64> = times.iter().map(|t| 0.3 * t).collect();
        assert!(matches!(
            steady_state_value(&times, &growing, &err, 0.25),
            Err(Error::NotConverged(_))
        ));

        // saturating curve A(1 − e^{−t/τ}) + noise recovers A within error
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let a = 3.0;
        let tau = 3.0;
        let times: Vec<f64> = (0..80).map(|i| i as f64 * 0.5).collect();
        let sigma = 0.02;
        let mean: Vec<f64> = times
            .iter()
            .map(|t| a * (1.0 - (-t / tau).exp()) + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let err = vec![sigma; times.len()];
        let (v, e) = steady_state_value(&times, &mean, &err, 0.25).unwrap();
        assert!((v - a).abs() < 4.0 * e.max(sigma), "recovered {v} ± {e}, truth {a}");
    }

    #[test]
    fn scaling_fit_examples() {
        // pure area law (a = 3, b = 0) + noise → area flag set
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let sizes = [8usize, 12, 16, 20, 24];
        let noisy = |a: f64, b: f64, rng: &mut ChaCha12Rng| -> Vec<(usize, f64, f64)> {
            sizes
                .iter()
                .map(|&l| {
                    (l, a + b * l as f64 + 0.02 * rng.sample::<f64, _>(StandardNormal), 0.02)
                })
                .collect()
        };
        let fit = area_volume_fit(&noisy(3.0, 0.0, &mut rng)).unwrap();
        assert!(fit.area_law);
        assert!((fit.a - 3.0).abs() < 4.0 * fit.a_err);
        assert!((fit.a - fit.a_alt).abs() < 3.0 * (fit.a_err + fit.a_alt_err));

        // volume law (b = 0.5) → area flag unset
        let fit = area_volume_fit(&noisy(1.0, 0.5, &mut rng)).unwrap();
        assert!(!fit.area_law);
        assert!((fit.b - 0.5).abs() < 4.0 * fit.b_err);

        // degenerate single-size input → error
        assert!(area_volume_fit(&[(8, 1.0, 0.1), (8, 1.1, 0.1)]).is_err());
    }

    #[test]
    fn gamma_star_examples() {
        // exact synthetic 1/a = 0.1(γ − 5) → γ* = 5
        let points: Vec<(f64, f64, f64)> = [6.0, 7.0, 8.0, 9.0]
            .iter()
            .map(|&g| {
                let inv_a = 0.1 * (g - 5.0);
                (g, 1.0 / inv_a, 1e-6)
            })
            .collect();
        let (gs, err) = gamma_star_extrapolate(&points).unwrap();
        assert_abs_diff_eq!(gs, 5.0, epsilon = 1e-6);
        assert!(err < 1e-3);

        // no crossing → error
        let flat: Vec<(f64, f64, f64)> = [6.0, 7.0, 8.0]
            .iter()
            .map(|&g| (g, 1.0 / (0.5 - 0.01 * g), 0.01))
            .collect();
        assert!(matches!(gamma_star_extrapolate(&flat), Err(Error::NoTransition(_))));
    }

    #[test]
    fn gamma_star_coverage() {
        // noisy synthetic: 95% coverage over 200 resamples
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let truth = 5.0;
        let mut covered = 0;
        let n_resample = 200;
        for _ in 0..n_resample {
            let points: Vec<(f64, f64, f64)> = [6.5, 7.5, 8.5, 9.5, 10.5]
                .iter()
                .map(|&g| {
                    let inv_a = 0.1 * (g - truth);
                    let a = 1.0 / inv_a;
                    let sigma = 0.03 * a;
                    (g, a + sigma * rng.sample::<f64, _>(StandardNormal), sigma)
                })
                .collect();
            if let Ok((gs, err)) = gamma_star_extrapolate(&points) {
                if (gs - truth).abs() < 1.96 * err {
                    covered += 1;
                }
            }
        }
        let coverage = covered as f64 / n_resample as f64;
        assert!(coverage > 0.85, "coverage {coverage}");
    }
}
