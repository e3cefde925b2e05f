//! Bootstrap particle filter for the conditional law π^t_s of the signal
//! Z_s given the observation path X on [0, t), under the measure where the
//! pair is conditioned on the crossing happening after t.
//!
//! The conditioned signal follows dZ = dβ̃_v + (H_x/H)(V(t)-v, Z) dv in
//! V-time; the observation follows dX = dB + (q_x/q)(V(s)-s, X, Z) ds in
//! real time. Particles propagate by the signal dynamics and are reweighted
//! by the discrete Girsanov functional κ·ΔX - ½κ²Δ with
//! κ(z) = (q_x/q)(V(r)-r, X_r, z). The filtered law has a closed form —
//! the h-transformed transition density — which every run is compared to.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{drift_h, drift_pre, p_htrans};
use crate::noise::NoiseBundle;
use crate::numerics::adaptive_simpson;
use crate::paths::{Regime, SamplePath, StepController};
use crate::timechange::TimeChangeSpec;

/// Observed X path on a grid, simulated under the conditioned dynamics.
#[derive(Debug, Clone)]
pub struct ObservationRecord {
    pub grid: Vec<f64>,
    pub x_values: Vec<f64>,
    /// The conditioning horizon t (crossing happens after t).
    pub horizon: f64,
}

/// Weighted particle approximation of π^t_s.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub positions: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub time: f64,
    pub horizon: f64,
}

impl ParticleCloud {
    pub fn new(n: usize, z0: f64, horizon: f64) -> Self {
        Self {
            positions: vec![z0; n],
            log_weights: vec![0.0; n],
            time: 0.0,
            horizon,
        }
    }

    /// Normalized weights (sum exactly 1 up to rounding).
    pub fn weights(&self) -> Vec<f64> {
        let m = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = self.log_weights.iter().map(|&lw| (lw - m).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|w| w / total).collect()
    }

    pub fn ess(&self) -> f64 {
        let w = self.weights();
        1.0 / w.iter().map(|&x| x * x).sum::<f64>()
    }

    pub fn weighted_mean(&self) -> f64 {
        let w = self.weights();
        self.positions.iter().zip(&w).map(|(&z, &wi)| z * wi).sum()
    }

    pub fn weighted_sd(&self) -> f64 {
        let w = self.weights();
        let m: f64 = self.positions.iter().zip(&w).map(|(&z, &wi)| z * wi).sum();
        self.positions
            .iter()
            .zip(&w)
            .map(|(&z, &wi)| wi * (z - m) * (z - m))
            .sum::<f64>()
            .sqrt()
    }

    /// (position, normalized weight) pairs.
    pub fn weighted_points(&self) -> Vec<(f64, f64)> {
        self.positions
            .iter()
            .cloned()
            .zip(self.weights())
            .collect()
    }
}

/// Euler simulation of the conditioned pair (X, Z) started at (1, 1) on the
/// given grid (which must end strictly before the horizon t). Returns the
/// observation record and the Z path; positivity clamps are counted on the
/// Z path.
pub fn simulate_conditioned_pair(
    spec: &TimeChangeSpec,
    t: f64,
    grid: &[f64],
    ctrl: &StepController,
    noise: &mut NoiseBundle,
) -> Result<(ObservationRecord, SamplePath)> {
    let end = *grid.last().ok_or_else(|| Error::Domain("empty grid".into()))?;
    if end >= t {
        return Err(Error::Domain(format!(
            "conditioned simulation grid must end before the horizon ({end} >= {t})"
        )));
    }
    let vt = spec.v_of(t)?;
    let v: Vec<f64> = grid.iter().map(|&s| spec.v_of(s)).collect::<Result<_>>()?;
    let mut z_path = SamplePath {
        grid: grid.to_vec(),
        values: Vec::with_capacity(grid.len()),
        flags: vec![Regime::PreTau; grid.len()],
        tau: None,
        v_tau: None,
        absorbed_at: None,
        clamp_count: 0,
        positivity_violations: 0,
    };
    let mut x_values = Vec::with_capacity(grid.len());
    let mut z = 1.0;
    let mut x = 1.0;
    z_path.values.push(z);
    x_values.push(x);
    for i in 0..grid.len() - 1 {
        let dt = grid[i + 1] - grid[i];
        let dv = v[i + 1] - v[i];
        // observation first: its drift reads the current (pre-step) Z
        let s_mid = grid[i] + 0.5 * dt;
        let gap = spec.v_of(s_mid)? - s_mid;
        let dx = ctrl.cap(drift_pre(gap, x, z)?, dt, &mut z_path.clamp_count);
        x += dx * dt + dt.sqrt() * noise.normal_b();
        if x <= 0.0 {
            z_path.positivity_violations += 1;
            x = x.abs().max(1e-12);
        }
        // conditioned signal in V-time
        let dz = ctrl.cap(drift_h(vt - v[i], z)?, dv, &mut z_path.clamp_count);
        z += dz * dv + dv.sqrt() * noise.normal_w();
        if z <= 0.0 {
            z_path.positivity_violations += 1;
            z = z.abs().max(1e-12);
        }
        x_values.push(x);
        z_path.values.push(z);
    }
    Ok((
        ObservationRecord {
            grid: grid.to_vec(),
            x_values,
            horizon: t,
        },
        z_path,
    ))
}

#[derive(Debug, Clone)]
pub struct FilterOptions {
    /// Resample when ESS < threshold · n_particles.
    pub resample_threshold: f64,
    /// Stratified instead of systematic resampling.
    pub stratified: bool,
    /// Zero the observation gain (prediction-only ablation).
    pub kappa_zeroed: bool,
    /// Times at which to snapshot the full cloud.
    pub snapshot_times: Vec<f64>,
    /// Hard ESS floor below which the run aborts as degenerate.
    pub ess_floor: f64,
    /// Evaluate the closed-form posterior mean every `closed_form_every`
    /// steps (0 disables; it costs a quadrature per evaluation).
    pub closed_form_every: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            resample_threshold: 0.5,
            stratified: false,
            kappa_zeroed: false,
            snapshot_times: Vec::new(),
            ess_floor: 10.0,
            closed_form_every: 0,
        }
    }
}

/// Per-step trace row: posterior summaries, ESS, the filtered gain
/// π_r κ_r over the step just completed, and (optionally) the closed-form
/// posterior mean for comparison.
#[derive(Debug, Clone, Serialize)]
pub struct FilterStep {
    pub s: f64,
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    pub ess: f64,
    pub pi_kappa: f64,
    pub closed_form_mean: f64,
    pub resampled: bool,
}

#[derive(Debug)]
pub struct FilterOutput {
    pub trace: Vec<FilterStep>,
    pub snapshots: Vec<ParticleCloud>,
    pub final_cloud: ParticleCloud,
    pub clamp_count: u32,
    pub resample_count: u32,
}

/// Bootstrap filter along one observation path.
pub fn filter_run(
    spec: &TimeChangeSpec,
    obs: &ObservationRecord,
    n_particles: usize,
    ctrl: &StepController,
    opts: &FilterOptions,
    noise: &mut NoiseBundle,
) -> Result<FilterOutput> {
    if n_particles < 100 {
        return Err(Error::Domain(format!(
            "need at least 100 particles; got {n_particles}"
        )));
    }
    let t = obs.horizon;
    let vt = spec.v_of(t)?;
    let v: Vec<f64> = obs.grid.iter().map(|&s| spec.v_of(s)).collect::<Result<_>>()?;

    let mut cloud = ParticleCloud::new(n_particles, 1.0, t);
    let mut trace = Vec::with_capacity(obs.grid.len());
    let mut snapshots = Vec::new();
    let mut snapshot_iter = opts.snapshot_times.iter().cloned().peekable();
    let mut clamp_count = 0u32;
    let mut resample_count = 0u32;
    let mut kappa = vec![0.0f64; n_particles];

    for i in 0..obs.grid.len() - 1 {
        let r = obs.grid[i];
        let dt = obs.grid[i + 1] - r;
        let dv = v[i + 1] - v[i];
        let dx = obs.x_values[i + 1] - obs.x_values[i];
        let gap = v[i] - r;
        let x_r = obs.x_values[i];

        // gain per particle at the left endpoint
        for (k, z) in cloud.positions.iter().enumerate() {
            kappa[k] = drift_pre(gap.max(1e-12), x_r, *z)?;
        }
        let w_pre = cloud.weights();
        let pi_kappa: f64 = kappa.iter().zip(&w_pre).map(|(&k, &w)| k * w).sum();

        // Girsanov log-weight increment
        if !opts.kappa_zeroed {
            for (lw, &k) in cloud.log_weights.iter_mut().zip(&kappa) {
                *lw += k * dx - 0.5 * k * k * dt;
            }
        }

        let ess = cloud.ess();
        if ess < opts.ess_floor {
            return Err(Error::DegenerateFilter {
                s: r,
                ess,
                detail: format!(
                    "ESS collapsed below {} at step {i} of {}",
                    opts.ess_floor,
                    obs.grid.len() - 1
                ),
            });
        }
        let mut resampled = false;
        if ess < opts.resample_threshold * n_particles as f64 {
            resample(&mut cloud, opts.stratified, noise);
            resample_count += 1;
            resampled = true;
        }

        // propagate by the conditioned signal dynamics in V-time
        for z in cloud.positions.iter_mut() {
            let drift = ctrl.cap(drift_h(vt - v[i], *z)?, dv, &mut clamp_count);
            *z += drift * dv + dv.sqrt() * noise.normal_w();
            if *z <= 0.0 {
                clamp_count += 1;
                *z = z.abs().max(1e-12);
            }
        }
        cloud.time = obs.grid[i + 1];

        let closed_form_mean = if opts.closed_form_every > 0 && (i + 1) % opts.closed_form_every == 0
        {
            closed_posterior_mean(spec, t, obs.grid[i + 1], obs.x_values[i + 1])?
        } else {
            f64::NAN
        };
        trace.push(FilterStep {
            s: cloud.time,
            posterior_mean: cloud.weighted_mean(),
            posterior_sd: cloud.weighted_sd(),
            ess: cloud.ess(),
            pi_kappa,
            closed_form_mean,
            resampled,
        });

        while let Some(&st) = snapshot_iter.peek() {
            if st <= cloud.time {
                snapshots.push(cloud.clone());
                snapshot_iter.next();
            } else {
                break;
            }
        }
    }

    Ok(FilterOutput {
        trace,
        snapshots,
        final_cloud: cloud,
        clamp_count,
        resample_count,
    })
}

/// Systematic (or stratified) resampling; resets weights to uniform.
fn resample(cloud: &mut ParticleCloud, stratified: bool, noise: &mut NoiseBundle) {
    let n = cloud.positions.len();
    let w = cloud.weights();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &wi in &w {
        acc += wi;
        cum.push(acc);
    }
    let mut new_positions = Vec::with_capacity(n);
    let base = noise.uniform();
    let mut j = 0;
    for i in 0..n {
        let u = if stratified {
            (i as f64 + noise.uniform()) / n as f64
        } else {
            (i as f64 + base) / n as f64
        };
        while j < n - 1 && cum[j] < u {
            j += 1;
        }
        new_positions.push(cloud.positions[j]);
    }
    cloud.positions = new_positions;
    cloud.log_weights = vec![0.0; n];
}

/// Density of the closed-form posterior of Z_s given the observations up to
/// s (conditioned on crossing after t): z ↦ p(V(t); s, V(s), X_s, z).
pub fn closed_posterior_density(
    spec: &TimeChangeSpec,
    t: f64,
    s: f64,
    x_s: f64,
    z: f64,
) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    p_htrans(spec.v_of(t)?, s, spec.v_of(s)?, x_s, z)
}

pub fn closed_posterior_mean(spec: &TimeChangeSpec, t: f64, s: f64, x_s: f64) -> Result<f64> {
    let hi = x_s + 12.0 * spec.v_of(s)?.sqrt();
    Ok(adaptive_simpson(
        &|z| z * closed_posterior_density(spec, t, s, x_s, z).unwrap_or(0.0),
        1e-14,
        hi,
        1e-9,
    ))
}

/// Weighted KS distance between a particle cloud and a density given as a
/// callable; the reference CDF is accumulated by quadrature between
/// consecutive sorted particle positions.
pub fn weighted_ks_vs_density<F: Fn(f64) -> f64>(
    points: &[(f64, f64)],
    density: F,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Domain("weighted KS needs a nonempty cloud".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_w: f64 = sorted.iter().map(|&(_, w)| w).sum();
    let mut cdf = 0.0;
    let mut prev = 0.0;
    let mut cum_w = 0.0;
    let mut d: f64 = 0.0;
    for &(z, w) in &sorted {
        if z > prev {
            cdf += adaptive_simpson(&|y| density(y), prev, z, 1e-9);
            prev = z;
        }
        let f = cdf.clamp(0.0, 1.0);
        d = d.max((f - cum_w / total_w).abs());
        cum_w += w;
        d = d.max((f - cum_w / total_w).abs());
    }
    Ok(d)
}

/// KS distance of a cloud against the closed-form posterior at its time.
pub fn cloud_vs_closed_form(
    cloud: &ParticleCloud,
    spec: &TimeChangeSpec,
    t: f64,
    x_s: f64,
) -> Result<f64> {
    let s = cloud.time;
    weighted_ks_vs_density(&cloud.weighted_points(), |z| {
        closed_posterior_density(spec, t, s, x_s, z).unwrap_or(0.0)
    })
}

/// Innovation I_s = X_s - ∫₀^s π_r κ_r dr on the observation grid; I_0 = X_0.
pub fn innovation_path(obs: &ObservationRecord, trace: &[FilterStep]) -> Result<Vec<f64>> {
    if trace.len() != obs.grid.len() - 1 {
        return Err(Error::Domain(format!(
            "trace length {} does not match grid of {} steps",
            trace.len(),
            obs.grid.len() - 1
        )));
    }
    let mut innovation = Vec::with_capacity(obs.grid.len());
    innovation.push(obs.x_values[0]);
    for (i, step) in trace.iter().enumerate() {
        let dt = obs.grid[i + 1] - obs.grid[i];
        let dx = obs.x_values[i + 1] - obs.x_values[i];
        let last = *innovation.last().unwrap();
        innovation.push(last + dx - step.pi_kappa * dt);
    }
    Ok(innovation)
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorComparison {
    pub ks: f64,
    pub particle_mean: f64,
    pub closed_mean: f64,
    pub nonpositive_mass: f64,
}

/// Identify the particle posterior at s ↑ t with the unconditioned
/// conditional density of Z_t given survival: the same closed form with the
/// s-slot pushed to t.
pub fn posterior_to_unconditioned(
    cloud: &ParticleCloud,
    spec: &TimeChangeSpec,
    t: f64,
    x_t: f64,
) -> Result<PosteriorComparison> {
    let posterior = crate::kernels::z_posterior(spec, t, x_t)?;
    let pts = cloud.weighted_points();
    let ks = weighted_ks_vs_density(&pts, |z| posterior.density(z))?;
    let nonpositive_mass: f64 = pts.iter().filter(|&&(z, _)| z <= 0.0).map(|&(_, w)| w).sum();
    Ok(PosteriorComparison {
        ks,
        particle_mean: cloud.weighted_mean(),
        closed_mean: posterior.mean(),
        nonpositive_mass,
    })
}
