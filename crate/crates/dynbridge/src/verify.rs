//! Statistical checks that turn the exact-in-law statements behind the
//! construction into pass/fail reports: Kolmogorov–Smirnov machinery
//! (one-sample, censored, two-sample, weighted), the hitting-law check for
//! V(τ), marginal/increment/QV Brownianity checks for X, the zero-identity
//! check with its drift ablation, the pathwise comparison sandwiches, the
//! exact-vs-SDE law of R, and the closed-form kernel identity suite
//! including a finite-difference PDE residual.
//!
//! Every check derives its per-path randomness from (seed, path_index), so
//! re-running with the same seed reproduces each statistic bit-for-bit.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernels::{
    drift_h, ell, h_surv, p_htrans, q_killed, tau_posterior, z_posterior,
};
use crate::noise::NoiseBundle;
use crate::numerics::{adaptive_simpson, integrate_tail};
use crate::paths::{
    self, couple_compare, simulate_r_sde, simulate_sq_bessel, simulate_u, simulate_x,
    simulate_y, simulate_z, uniform_grid, StepController, TimeChangeCurves, XOptions,
};
use crate::timechange::TimeChangeSpec;

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub n: usize,
    pub seed: u64,
    pub passed: bool,
    pub details: String,
}

impl TestReport {
    pub fn new(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        n: usize,
        seed: u64,
        details: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            n,
            seed,
            passed: statistic <= threshold,
            details: details.into(),
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {} statistic={:.6e} threshold={:.3e} n={} seed={}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.n,
            self.seed,
            if self.details.is_empty() {
                String::new()
            } else {
                format!(" [{}]", self.details)
            }
        )
    }
}

/// Sorted sample together with its KS distance against a reference CDF.
#[derive(Debug, Clone)]
pub struct EcdfSummary {
    pub sorted: Vec<f64>,
    pub ks: f64,
}

pub fn ecdf_vs_cdf<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<EcdfSummary> {
    let ks = ks_statistic(sample, &cdf)?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(EcdfSummary { sorted, ks })
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: &F) -> Result<f64> {
    ks_censored(sample, sample.len(), cdf)
}

/// KS statistic when only `observed` out of `n_total` samples fall inside
/// the observation window; the remaining mass lies strictly beyond every
/// observed point, so the ECDF uses denominator `n_total` and the supremum
/// runs over the observed points only.
pub fn ks_censored<F: Fn(f64) -> f64>(observed: &[f64], n_total: usize, cdf: &F) -> Result<f64> {
    if observed.is_empty() || n_total < observed.len() {
        return Err(Error::Domain(format!(
            "KS needs a nonempty sample with n_total >= observed ({} vs {})",
            n_total,
            observed.len()
        )));
    }
    let mut sorted = observed.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = n_total as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Numeric(format!("CDF returned {f} at {x}")));
        }
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i + 1) as f64 / n).abs());
    }
    Ok(d)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("two-sample KS needs nonempty samples".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.total_cmp(y));
    sb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Weighted-ECDF KS statistic against a continuous CDF; weights are
/// normalized internally.
pub fn ks_weighted<F: Fn(f64) -> f64>(points: &[(f64, f64)], cdf: &F) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Domain("weighted KS needs a nonempty sample".into()));
    }
    let total: f64 = points.iter().map(|&(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::Domain(format!("weights sum to {total}")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    let mut d: f64 = 0.0;
    for &(x, w) in &sorted {
        let f = cdf(x);
        d = d.max((f - cum / total).abs());
        cum += w;
        d = d.max((f - cum / total).abs());
    }
    Ok(d)
}

/// (τ, V(τ)) per path, None when no crossing occurred inside the window.
pub fn hitting_samples(
    spec: &TimeChangeSpec,
    t_window: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Option<(f64, f64)>>> {
    let grid = uniform_grid(t_window, dt);
    (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseBundle::new(seed, k);
            let z = simulate_z(spec, &mut noise, &grid, true)?;
            Ok(z.tau.zip(z.v_tau))
        })
        .collect()
}

/// V(τ) has the law of T₁ (CDF 1 - H(·,1)) and τ the law of V⁻¹(T₁).
/// Paths without a crossing inside the window enter as right-censored mass.
pub fn check_hitting_law(
    spec: &TimeChangeSpec,
    t_window: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<TestReport>> {
    let hits = hitting_samples(spec, t_window, dt, n_paths, seed)?;
    check_hitting_law_from(spec, &hits, seed)
}

pub fn check_hitting_law_from(
    spec: &TimeChangeSpec,
    hits: &[Option<(f64, f64)>],
    seed: u64,
) -> Result<Vec<TestReport>> {
    let n_paths = hits.len();
    let taus: Vec<f64> = hits.iter().flatten().map(|&(t, _)| t).collect();
    let vtaus: Vec<f64> = hits.iter().flatten().map(|&(_, v)| v).collect();

    let ks_v = ks_censored(&vtaus, n_paths, &|v| 1.0 - h_surv(v, 1.0).unwrap())?;
    let survival_1 = hits
        .iter()
        .filter(|h| h.is_none_or(|(_, v)| v > 1.0))
        .count() as f64
        / n_paths as f64;
    let h11 = h_surv(1.0, 1.0)?;
    let ks_tau = ks_censored(&taus, n_paths, &|u| {
        1.0 - h_surv(spec.v_of(u).unwrap(), 1.0).unwrap()
    })?;

    Ok(vec![
        TestReport::new(
            "hitting/v_tau_ks",
            ks_v,
            0.03,
            n_paths,
            seed,
            format!("{} crossings in window", vtaus.len()),
        ),
        TestReport::new(
            "hitting/survival_at_1",
            (survival_1 - h11).abs(),
            0.02,
            n_paths,
            seed,
            format!("empirical {survival_1:.4} vs H(1,1) = {h11:.4}"),
        ),
        TestReport::new("hitting/tau_ks", ks_tau, 0.03, n_paths, seed, ""),
    ])
}

/// Necessary conditions for X being a standard Brownian motion started at 1:
/// Gaussian marginals at t = 0.5 and 1, uncorrelated increments, unit
/// quadratic variation over [0, 1].
pub fn check_brownian(
    spec: &TimeChangeSpec,
    n_paths: usize,
    seed: u64,
    ctrl: &StepController,
) -> Result<Vec<TestReport>> {
    let grid = uniform_grid(1.0, ctrl.dt_base);
    let rows: Vec<(f64, f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseBundle::new(seed, k);
            let z = simulate_z(spec, &mut noise, &grid, true)?;
            let x = simulate_x(spec, &mut noise, &z, ctrl, 1.0, XOptions::default())?;
            let x_half = x.value_at(0.5).ok_or_else(|| {
                Error::Numeric(format!("no value at 0.5 on path {k}"))
            })?;
            let x_one = x.value_at(1.0).ok_or_else(|| {
                Error::Numeric(format!("no value at 1.0 on path {k}"))
            })?;
            Ok((x_half, x_one, x.quadratic_variation(0.0, 1.0)))
        })
        .collect::<Result<_>>()?;

    let n = n_paths as f64;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ks_half = ks_statistic(
        &rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        &|x| normal.cdf((x - 1.0) / 0.5f64.sqrt()),
    )?;
    let ks_one = ks_statistic(
        &rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        &|x| normal.cdf(x - 1.0),
    )?;
    // Pearson correlation of the two increments
    let inc: Vec<(f64, f64)> = rows.iter().map(|r| (r.0 - 1.0, r.1 - r.0)).collect();
    let (m1, m2) = (
        inc.iter().map(|i| i.0).sum::<f64>() / n,
        inc.iter().map(|i| i.1).sum::<f64>() / n,
    );
    let (mut cov, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for &(a, b) in &inc {
        cov += (a - m1) * (b - m2);
        v1 += (a - m1) * (a - m1);
        v2 += (b - m2) * (b - m2);
    }
    let corr = cov / (v1 * v2).sqrt();
    let mean_qv = rows.iter().map(|r| r.2).sum::<f64>() / n;

    Ok(vec![
        TestReport::new("brownian/ks_x_half", ks_half, 0.03, n_paths, seed, ""),
        TestReport::new("brownian/ks_x_one", ks_one, 0.03, n_paths, seed, ""),
        TestReport::new(
            "brownian/increment_corr",
            corr.abs(),
            0.03,
            n_paths,
            seed,
            format!("corr = {corr:.5}"),
        ),
        TestReport::new(
            "brownian/mean_qv",
            (mean_qv - 1.0).abs(),
            0.02,
            n_paths,
            seed,
            format!("mean QV = {mean_qv:.5}"),
        ),
    ])
}

/// The first zero of X must coincide with V(τ) up to two effective grid
/// steps on at least 99% of bridged paths. With `ablation` the post-τ drift
/// is disabled and the report is expected to FAIL.
pub fn check_zero_identity(
    spec: &TimeChangeSpec,
    n_paths: usize,
    seed: u64,
    ctrl: &StepController,
    ablation: bool,
) -> Result<TestReport> {
    let t_z = 1.0;
    let horizon = spec.v_of(t_z)?;
    let grid = uniform_grid(t_z, ctrl.dt_base);
    let opts = XOptions {
        post_tau_drift: !ablation,
        continue_after_zero: true,
    };
    let outcomes: Vec<Option<bool>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseBundle::new(seed, k);
            let z = simulate_z(spec, &mut noise, &grid, true)?;
            if z.tau.is_none() {
                return Ok(None);
            }
            let x = simulate_x(spec, &mut noise, &z, ctrl, horizon, opts)?;
            let vt = x.v_tau.unwrap();
            let ok = x
                .absorbed_at
                .is_some_and(|a| (a - vt).abs() <= 2.0 * ctrl.dt_base);
            Ok(Some(ok))
        })
        .collect::<Result<_>>()?;
    let bridged: Vec<bool> = outcomes.into_iter().flatten().collect();
    if bridged.is_empty() {
        return Err(Error::Numeric("no path crossed inside the window".into()));
    }
    let frac = bridged.iter().filter(|&&b| b).count() as f64 / bridged.len() as f64;
    let name = if ablation {
        "zero_identity/ablated"
    } else {
        "zero_identity/main"
    };
    Ok(TestReport::new(
        name,
        1.0 - frac,
        0.01,
        bridged.len(),
        seed,
        format!("matched fraction {frac:.4}"),
    ))
}

/// Shared-noise pathwise sandwiches: R ≤ Y before τ, U ≤ Y^3 with U ≥ 0,
/// and the degenerate equal-drift sandwich. dt-halving of the Y-vs-R run
/// must not grow the violation.
pub fn check_comparisons(
    spec: &TimeChangeSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<TestReport>> {
    let ctrl = StepController::default();

    let y_vs_r = |dt: f64| -> Result<f64> {
        let grid = uniform_grid(1.0, dt);
        let gaps: Vec<f64> = (0..n_paths as u64)
            .into_par_iter()
            .map(|k| {
                let mut noise = NoiseBundle::new(seed, k);
                let z = simulate_z(spec, &mut noise, &grid, true)?;
                let mut nr = noise.clone();
                let r = simulate_r_sde(spec, &mut nr, &ctrl, 1.0, &grid)?;
                let mut ny = noise.clone();
                let y = simulate_y(spec, &mut ny, &z, &ctrl, 1.0, 1.0)?;
                let stop = z.tau.unwrap_or(1.0);
                Ok(couple_compare(&r, &y, stop)?.max_signed_gap.max(0.0))
            })
            .collect::<Result<_>>()?;
        Ok(gaps.into_iter().fold(0.0, f64::max))
    };
    let dt = 1e-3;
    let viol = y_vs_r(dt)?;
    let viol_half = y_vs_r(dt / 2.0)?;

    // U vs Y^3 needs a fine grid: the Euler dip of U below 0 scales like dt
    let dt_u = 2e-5;
    let horizon_u = 0.5;
    let grid_u = uniform_grid(horizon_u, dt_u);
    let n_u = n_paths.min(1000);
    let u_stats: Vec<(f64, f64)> = (0..n_u as u64)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseBundle::new(seed.wrapping_add(1), k);
            let z = simulate_z(spec, &mut noise, &grid_u, true)?;
            let mut nu = noise.clone();
            let u = simulate_u(spec, &mut nu, &z, 1.0, horizon_u)?;
            let mut nm = noise.clone();
            let ym = simulate_sq_bessel(&mut nm, 1.0, 3.0, &grid_u, horizon_u);
            let gap = couple_compare(&u, &ym, horizon_u)?.max_signed_gap.max(0.0);
            let min_u = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok((gap, min_u))
        })
        .collect::<Result<_>>()?;
    let u_gap = u_stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let u_min = u_stats.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);

    // degenerate sandwich: equal drifts on cloned noise are bitwise equal
    let grid_d = uniform_grid(1.0, 1e-3);
    let mut nd = NoiseBundle::new(seed, 0);
    let ya = simulate_sq_bessel(&mut nd.clone(), 1.0, 2.0, &grid_d, 1.0);
    let yb = simulate_sq_bessel(&mut nd, 1.0, 2.0, &grid_d, 1.0);
    let degenerate = couple_compare(&ya, &yb, 1.0)?
        .max_signed_gap
        .abs()
        .max(couple_compare(&yb, &ya, 1.0)?.max_signed_gap.abs());

    Ok(vec![
        TestReport::new(
            "compare/y_vs_r",
            viol,
            0.02,
            n_paths,
            seed,
            format!("max (R - Y)+ at dt = {dt}"),
        ),
        TestReport::new(
            "compare/y_vs_r_dt_halving",
            // shrinkage is only meaningful when the base violation is
            // material; below 5% of the slack the max over paths is noise
            viol_half - viol.max(1e-3),
            0.0,
            n_paths,
            seed,
            format!("violation {viol:.2e} -> {viol_half:.2e} under dt halving"),
        ),
        TestReport::new("compare/u_vs_y3", u_gap, 1e-3, n_u, seed, ""),
        TestReport::new(
            "compare/u_nonnegative",
            (-u_min).max(0.0),
            1e-3,
            n_u,
            seed,
            format!("min U = {u_min:.2e}"),
        ),
        TestReport::new("compare/degenerate_sandwich", degenerate, 0.0, 1, seed, ""),
    ])
}

/// The SDE for R and the exact construction λ(t)·‖W³(Λ(t))‖ must agree in
/// law at t = 1, and the exact sampler must hit the second-moment identity
/// λ(t)²·(y² + 3Λ(t)).
pub fn check_r_law(
    spec: &TimeChangeSpec,
    n_paths: usize,
    seed: u64,
    dt: f64,
) -> Result<Vec<TestReport>> {
    let ctrl = StepController::default();
    let grid = uniform_grid(1.0, dt);
    let curves = TimeChangeCurves::new(spec, &grid)?;
    let y0 = 1.0;
    let samples: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseBundle::new(seed, k);
            let sde = simulate_r_sde(spec, &mut noise, &ctrl, y0, &grid)?;
            let exact = paths::construct_r_exact(&curves, &mut noise, y0);
            Ok((*sde.values.last().unwrap(), *exact.values.last().unwrap()))
        })
        .collect::<Result<_>>()?;
    let sde_vals: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let exact_vals: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ks = ks_two_sample(&sde_vals, &exact_vals)?;

    let n = n_paths as f64;
    let sq: Vec<f64> = exact_vals.iter().map(|r| r * r).collect();
    let emp = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|s| (s - emp) * (s - emp)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let lam = *curves.lambda.last().unwrap();
    let target = lam * lam * (y0 * y0 + 3.0 * curves.big_lambda.last().unwrap());

    Ok(vec![
        TestReport::new("r_law/sde_vs_exact_ks", ks, 0.03, n_paths, seed, ""),
        TestReport::new(
            "r_law/second_moment",
            (emp - target).abs() / se,
            3.0,
            n_paths,
            seed,
            format!("E[R²] = {emp:.5} vs {target:.5} (SE {se:.2e}), in standard errors"),
        ),
    ])
}

/// Filtering vs the closed form: particle KS at the midpoint averaged over
/// observation paths, innovation quadratic variation, and the particle-count
/// scaling of the KS error (expected to roughly halve per quadrupling).
pub fn check_filtering(
    spec: &TimeChangeSpec,
    t: f64,
    dt: f64,
    n_particles: usize,
    n_obs: usize,
    seed: u64,
    ctrl: &StepController,
) -> Result<Vec<TestReport>> {
    use crate::filtering::{
        cloud_vs_closed_form, filter_run, innovation_path, simulate_conditioned_pair,
        FilterOptions,
    };
    let grid = uniform_grid(t * (1.0 - 1e-3), dt);
    let mid = t / 2.0;

    let run_one = |k: u64, n_p: usize| -> Result<(f64, f64)> {
        let mut noise = NoiseBundle::new(seed, k);
        let (obs, _) = simulate_conditioned_pair(spec, t, &grid, ctrl, &mut noise)?;
        let mut filter_noise = NoiseBundle::new(seed ^ 0x7a5c_93d1, k * 64 + n_p as u64 % 64);
        let opts = FilterOptions {
            snapshot_times: vec![mid],
            ..FilterOptions::default()
        };
        let out = filter_run(spec, &obs, n_p, ctrl, &opts, &mut filter_noise)?;
        let snap = &out.snapshots[0];
        let idx = obs.grid.partition_point(|&g| g < snap.time);
        let ks = cloud_vs_closed_form(snap, spec, t, obs.x_values[idx])?;
        let innovation = innovation_path(&obs, &out.trace)?;
        let qv: f64 = innovation
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum();
        let elapsed = obs.grid.last().unwrap() - obs.grid[0];
        Ok((ks, (qv - elapsed).abs() / elapsed))
    };

    let main: Vec<(f64, f64)> = (0..n_obs as u64)
        .into_par_iter()
        .map(|k| run_one(k, n_particles))
        .collect::<Result<_>>()?;
    let mean_ks = main.iter().map(|r| r.0).sum::<f64>() / n_obs as f64;
    let mean_qv_err = main.iter().map(|r| r.1).sum::<f64>() / n_obs as f64;

    // scaling: mean KS at 1000/4000/16000 particles on a smaller path batch
    let n_scale = 6usize.min(n_obs);
    let mean_ks_at = |n_p: usize| -> Result<f64> {
        let v: Vec<f64> = (0..n_scale as u64)
            .into_par_iter()
            .map(|k| run_one(k, n_p).map(|r| r.0))
            .collect::<Result<_>>()?;
        Ok(v.iter().sum::<f64>() / n_scale as f64)
    };
    let (ks_1k, ks_4k, ks_16k) = (mean_ks_at(1000)?, mean_ks_at(4000)?, mean_ks_at(16_000)?);
    // halving ±50% slack per quadrupling: each ratio must land in [1, 3]
    let ratio_penalty = |r: f64| -> f64 {
        if r < 1.0 {
            1.0 - r
        } else if r > 3.0 {
            r - 3.0
        } else {
            0.0
        }
    };
    let scaling_stat = ratio_penalty(ks_1k / ks_4k).max(ratio_penalty(ks_4k / ks_16k));

    Ok(vec![
        TestReport::new(
            "filter/ks_vs_closed_form",
            mean_ks,
            0.05,
            n_obs,
            seed,
            format!("mean midpoint KS at {n_particles} particles"),
        ),
        TestReport::new(
            "filter/innovation_qv",
            mean_qv_err,
            0.05,
            n_obs,
            seed,
            "mean relative QV error of the innovation",
        ),
        TestReport::new(
            "filter/ks_particle_scaling",
            scaling_stat,
            0.0,
            n_scale,
            seed,
            format!("mean KS {ks_1k:.4} -> {ks_4k:.4} -> {ks_16k:.4}"),
        ),
    ])
}

/// Finite-difference residual of the forward/backward PDE satisfied by
/// ρ(s, x, z) = p(V(t); s, V(s), x, z):
/// ρ_s + (H_x/H)(V(t)-s, x)·ρ_x + ½ρ_xx
///   = -σ²(s)·∂_z[(H_x/H)(V(t)-V(s), z)·ρ] + ½σ²(s)·ρ_zz,
/// normalized by the largest term magnitude.
pub fn pde_residual(spec: &TimeChangeSpec, t: f64, s: f64, x: f64, z: f64) -> Result<f64> {
    let vt = spec.v_of(t)?;
    let rho = |s_: f64, x_: f64, z_: f64| -> Result<f64> {
        p_htrans(vt, s_, spec.v_of(s_)?, x_, z_)
    };
    let hs = 1e-5;
    let h = 1e-4;
    let r0 = rho(s, x, z)?;
    let rho_s = (rho(s + hs, x, z)? - rho(s - hs, x, z)?) / (2.0 * hs);
    let rho_x = (rho(s, x + h, z)? - rho(s, x - h, z)?) / (2.0 * h);
    let rho_xx = (rho(s, x + h, z)? - 2.0 * r0 + rho(s, x - h, z)?) / (h * h);
    let rho_zz = (rho(s, x, z + h)? - 2.0 * r0 + rho(s, x, z - h)?) / (h * h);
    let g = |z_: f64| -> Result<f64> {
        Ok(drift_h(vt - spec.v_of(s)?, z_)? * rho(s, x, z_)?)
    };
    let g_z = (g(z + h)? - g(z - h)?) / (2.0 * h);
    let sig2 = spec.sigma_sq(s);
    let lhs = rho_s + drift_h(vt - s, x)? * rho_x + 0.5 * rho_xx;
    let rhs = -sig2 * g_z + 0.5 * sig2 * rho_zz;
    let scale = [rho_s.abs(), rho_xx.abs(), sig2 * rho_zz.abs(), 1.0]
        .into_iter()
        .fold(0.0, f64::max);
    Ok((lhs - rhs).abs() / scale)
}

/// Closed-form kernel identity suite: the three representations of H,
/// Chapman–Kolmogorov for q, posterior normalizations, the H_x/H drift vs a
/// finite difference of log H, and the PDE residual.
pub fn check_kernels(spec: &TimeChangeSpec, seed: u64) -> Result<Vec<TestReport>> {
    // H(t,a): erf closed form vs ∫_t^∞ ℓ vs ∫_0^∞ q(t,a,·)
    let mut h_err: f64 = 0.0;
    for &(t, a) in &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (4.0, 1.0)] {
        let h = h_surv(t, a)?;
        let via_ell = integrate_tail(&|u| ell(u, a).unwrap(), t, 1e-12)?;
        let hi = a + 12.0 * f64::sqrt(t);
        let via_q = adaptive_simpson(&|y| q_killed(t, a, y).unwrap(), 1e-14, hi, 1e-13);
        h_err = h_err.max(((via_ell - h) / h).abs()).max(((via_q - h) / h).abs());
    }

    let mut ck_err: f64 = 0.0;
    let triples: [(f64, f64, f64, f64); 3] =
        [(0.3, 0.7, 1.0, 1.5), (0.5, 0.5, 0.8, 0.8), (1.0, 0.2, 2.0, 0.5)];
    for &(s, t, x, y) in &triples {
        let hi = x.max(y) + 12.0 * f64::sqrt(s + t);
        let conv = adaptive_simpson(
            &|z| q_killed(s, x, z).unwrap() * q_killed(t, z, y).unwrap(),
            1e-14,
            hi,
            1e-13,
        );
        let direct = q_killed(s + t, x, y)?;
        ck_err = ck_err.max(((conv - direct) / direct).abs());
    }

    let mut norm_err: f64 = 0.0;
    for &(t, x) in &[(0.5, 1.0), (1.0, 1.2), (2.0, 0.7)] {
        let zp = z_posterior(spec, t, x)?;
        norm_err = norm_err.max((zp.cdf(zp.support_hi()) - 1.0).abs());
        let tp = tau_posterior(spec, t, x)?;
        let u_hi = spec.t_max * 0.98;
        let mass = adaptive_simpson(&|u| tp.density(u).unwrap(), t + 1e-12, u_hi, 1e-10);
        norm_err = norm_err.max((mass + tp.survival(u_hi)? - 1.0).abs());
    }

    let mut dh_err: f64 = 0.0;
    for &(delta, z) in &[(0.5, 0.4), (1.0, 1.0), (2.0, 1.7), (0.1, 0.9)] {
        let h = 1e-6 * z;
        let fd = (h_surv(delta, z + h)?.ln() - h_surv(delta, z - h)?.ln()) / (2.0 * h);
        dh_err = dh_err.max(((drift_h(delta, z)? - fd) / fd).abs());
    }

    let mut pde_err: f64 = 0.0;
    for &(t, s, x, z) in &[(1.0, 0.5, 1.2, 0.9), (1.0, 0.25, 0.8, 1.1), (2.0, 1.0, 1.0, 1.4)] {
        pde_err = pde_err.max(pde_residual(spec, t, s, x, z)?);
    }

    Ok(vec![
        TestReport::new("kernels/h_three_way", h_err, 1e-8, 4, seed, "max relative error"),
        TestReport::new("kernels/chapman_kolmogorov", ck_err, 1e-6, 3, seed, ""),
        TestReport::new("kernels/posterior_normalization", norm_err, 1e-6, 6, seed, ""),
        TestReport::new("kernels/drift_h_vs_fd", dh_err, 1e-6, 4, seed, ""),
        TestReport::new("kernels/pde_residual", pde_err, 1e-4, 3, seed, ""),
    ])
}
