//! Path simulators for every process in the construction: the time-changed
//! signal Z with its hitting time τ, the dynamic bridge X (pre-τ filtering
//! drift, post-τ Bessel-bridge drift), the auxiliary processes Y and U used
//! by the comparison arguments, the scaled time-changed Bessel process R
//! (both as an SDE and by exact construction), and an exact 3-dimensional
//! Bessel bridge sampler for cross-validation.
//!
//! Z uses exact Gaussian increments in V-time, so only the drift-driven
//! processes carry Euler error. Time-dependent drifts are evaluated at the
//! midpoint time of each step, which tames the deterministic singularities
//! at s = 0 without changing the order of the scheme.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{drift_post, f_ratio};
use crate::noise::NoiseBundle;
use crate::timechange::TimeChangeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    PreTau,
    PostTau,
    Absorbed,
}

#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub flags: Vec<Regime>,
    /// First zero of Z (the signal hitting time).
    pub tau: Option<f64>,
    /// V(τ), the bridge terminal time.
    pub v_tau: Option<f64>,
    /// First zero of this path's own values.
    pub absorbed_at: Option<f64>,
    /// Number of drift-cap clamps applied while integrating.
    pub clamp_count: u32,
    /// Steps at which a theoretically-positive process went nonpositive.
    pub positivity_violations: u32,
}

impl SamplePath {
    fn with_capacity(n: usize) -> Self {
        Self {
            grid: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            flags: Vec::with_capacity(n),
            tau: None,
            v_tau: None,
            absorbed_at: None,
            clamp_count: 0,
            positivity_violations: 0,
        }
    }

    fn push(&mut self, t: f64, v: f64, flag: Regime) {
        self.grid.push(t);
        self.values.push(v);
        self.flags.push(flag);
    }

    /// Value at time `t` by linear interpolation; None outside the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if self.grid.is_empty() || t < self.grid[0] || t > *self.grid.last().unwrap() {
            return None;
        }
        let idx = self.grid.partition_point(|&g| g <= t);
        if idx == 0 {
            return Some(self.values[0]);
        }
        if idx >= self.grid.len() {
            return Some(*self.values.last().unwrap());
        }
        let (t0, t1) = (self.grid[idx - 1], self.grid[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Some(v0 + w * (v1 - v0))
    }

    /// Sum of squared increments over [a, b].
    pub fn quadratic_variation(&self, a: f64, b: f64) -> f64 {
        let mut qv = 0.0;
        for i in 1..self.grid.len() {
            if self.grid[i - 1] >= a && self.grid[i] <= b {
                let d = self.values[i] - self.values[i - 1];
                qv += d * d;
            }
        }
        qv
    }
}

/// Step-size policy for the drift-driven Euler schemes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepController {
    pub dt_base: f64,
    pub dt_min: f64,
    /// Per-step drift magnitude is capped at drift_cap/√dt.
    pub drift_cap: f64,
    /// Near the bridge terminal, dt ≤ terminal_guard·(V(τ) - s).
    pub terminal_guard: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            dt_base: 1e-3,
            dt_min: 1e-7,
            drift_cap: 5.0,
            // small enough that the Euler noise per bridge step stays well
            // below the typical distance to 0, keeping spurious early
            // crossings rare
            terminal_guard: 0.02,
        }
    }
}

impl StepController {
    pub(crate) fn cap(&self, drift: f64, dt: f64, clamps: &mut u32) -> f64 {
        let lim = self.drift_cap / dt.sqrt();
        if drift.abs() > lim {
            *clamps += 1;
            lim.copysign(drift)
        } else {
            drift
        }
    }
}

/// Uniform grid on [0, t_end] with step ≈ dt (last point exactly t_end).
pub fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt).round().max(1.0) as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| i as f64 * t_end / n as f64).collect();
    *g.last_mut().unwrap() = t_end;
    g
}

/// Time-changed signal Z_t = 1 + ∫₀ᵗ σ(s) dW_s with exact Gaussian
/// increments of variance ΔV per step. τ is the first grid crossing of 0,
/// refined by the Brownian-bridge sub-grid crossing probability
/// exp(-2·Z_i·Z_{i+1}/ΔV) in V-time.
pub fn simulate_z(
    spec: &TimeChangeSpec,
    noise: &mut NoiseBundle,
    grid: &[f64],
    bridge_correction: bool,
) -> Result<SamplePath> {
    if grid.first() != Some(&0.0) {
        return Err(Error::Domain("Z grid must start at 0".into()));
    }
    let v: Vec<f64> = grid.iter().map(|&t| spec.v_of(t)).collect::<Result<_>>()?;
    let mut path = SamplePath::with_capacity(grid.len());
    let mut z = 1.0;
    path.push(0.0, z, Regime::PreTau);
    let mut crossed = false;
    for i in 0..grid.len() - 1 {
        let dv = v[i + 1] - v[i];
        let z_next = z + dv.sqrt() * noise.normal_w();
        if !crossed {
            let mut v_cross = None;
            if z_next <= 0.0 {
                let theta = z / (z - z_next);
                v_cross = Some(v[i] + theta * dv);
            } else if bridge_correction {
                let p = (-2.0 * z * z_next / dv).exp();
                if noise.uniform() < p {
                    v_cross = Some(v[i] + 0.5 * dv);
                }
            }
            if let Some(vc) = v_cross {
                crossed = true;
                path.v_tau = Some(vc);
                path.tau = Some(spec.v_inverse(vc)?);
            }
        }
        z = z_next;
        path.push(
            grid[i + 1],
            z,
            if crossed { Regime::PostTau } else { Regime::PreTau },
        );
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy)]
pub struct XOptions {
    /// Disable the post-τ bridge drift (ablation for the zero-identity check).
    pub post_tau_drift: bool,
    /// Keep integrating pure Brownian increments after the first zero, as in
    /// the defining equation where both drift integrals stop at V(τ).
    pub continue_after_zero: bool,
}

impl Default for XOptions {
    fn default() -> Self {
        Self {
            post_tau_drift: true,
            continue_after_zero: true,
        }
    }
}

struct PreTauStepper<'a> {
    spec: &'a TimeChangeSpec,
    ctrl: &'a StepController,
}

impl PreTauStepper<'_> {
    /// One step of dX = dB + q_x/q(V(s)-s, X, Z) ds over [t0, t0+dt], with
    /// the drift evaluated at the midpoint time.
    ///
    /// The drift splits as (z-x)/gap + f(2xz/gap)/x with f ∈ (0, 1]. The
    /// regular part is explicit (and capped); the singular a/x part is
    /// drift-implicit, x' = (c + sqrt(c² + 4a·dt))/2, which keeps the step
    /// strictly positive — matching the true process, whose first zero comes
    /// only at V(τ).
    fn step(
        &self,
        t0: f64,
        dt: f64,
        x: f64,
        z: f64,
        xi: f64,
        clamps: &mut u32,
    ) -> Result<f64> {
        let s_mid = t0 + 0.5 * dt;
        let gap = self.spec.v_of(s_mid)? - s_mid;
        let z = z.max(0.0);
        let a = f_ratio(2.0 * x * z / gap);
        let reg = self.ctrl.cap((z - x) / gap, dt, clamps);
        let c = x + reg * dt + dt.sqrt() * xi;
        Ok(0.5 * (c + (c * c + 4.0 * a * dt).sqrt()))
    }
}

/// The dynamic bridge X driven by the B stream of `noise`, using τ and V(τ)
/// from a previously simulated Z path on the same bundle's W stream.
///
/// Pre-τ: Euler with the filtering drift q_x/q. Post-τ: Euler with the
/// Bessel-bridge drift and geometrically shrinking steps near V(τ); the final
/// step pins X to exactly 0 at V(τ). After its first zero the path continues
/// with pure Brownian increments (see `XOptions`).
pub fn simulate_x(
    spec: &TimeChangeSpec,
    noise: &mut NoiseBundle,
    z_path: &SamplePath,
    ctrl: &StepController,
    horizon: f64,
    opts: XOptions,
) -> Result<SamplePath> {
    simulate_drifted(spec, noise, z_path, ctrl, horizon, 1.0, Mode::Bridge(opts))
}

/// The auxiliary process Y: the same pre-τ drift as X, pure Brownian after τ.
/// No absorption clamp; nonpositive excursions are counted, not repaired.
pub fn simulate_y(
    spec: &TimeChangeSpec,
    noise: &mut NoiseBundle,
    z_path: &SamplePath,
    ctrl: &StepController,
    y0: f64,
    horizon: f64,
) -> Result<SamplePath> {
    simulate_drifted(spec, noise, z_path, ctrl, horizon, y0, Mode::Aux)
}

enum Mode {
    Bridge(XOptions),
    Aux,
}

fn simulate_drifted(
    spec: &TimeChangeSpec,
    noise: &mut NoiseBundle,
    z_path: &SamplePath,
    ctrl: &StepController,
    horizon: f64,
    x0: f64,
    mode: Mode,
) -> Result<SamplePath> {
    let z_end = *z_path.grid.last().ok_or_else(|| Error::Domain("empty Z path".into()))?;
    let tau = z_path.tau;
    let v_tau = z_path.v_tau;
    let pre_end = tau.unwrap_or(f64::INFINITY).min(horizon).min(z_end);
    let stepper = PreTauStepper { spec, ctrl };

    let mut path = SamplePath::with_capacity(z_path.grid.len() + 64);
    path.tau = tau;
    path.v_tau = v_tau;
    let mut x = x0;
    let mut s = 0.0;
    path.push(0.0, x, Regime::PreTau);

    // pre-τ phase on the Z grid, with a final partial step to pre_end
    let mut i = 0;
    while s < pre_end {
        let t_next = if i + 1 < z_path.grid.len() {
            z_path.grid[i + 1].min(pre_end)
        } else {
            pre_end
        };
        let dt = t_next - s;
        if dt <= 0.0 {
            i += 1;
            continue;
        }
        let z_here = z_path.values[i.min(z_path.values.len() - 1)];
        let xi = noise.normal_b();
        if path.absorbed_at.is_none() {
            if x > 0.0 {
                x = stepper.step(s, dt, x, z_here, xi, &mut path.clamp_count)?;
            } else {
                x += dt.sqrt() * xi;
            }
            if x <= 0.0 && path.absorbed_at.is_none() {
                match mode {
                    Mode::Bridge(_) => {
                        x = 0.0;
                        path.absorbed_at = Some(t_next);
                    }
                    Mode::Aux => {
                        path.positivity_violations += 1;
                    }
                }
            }
        } else {
            x += dt.sqrt() * xi;
        }
        s = t_next;
        let flag = if path.absorbed_at.is_some() {
            Regime::Absorbed
        } else {
            Regime::PreTau
        };
        path.push(s, x, flag);
        if i + 1 < z_path.grid.len() && (z_path.grid[i + 1] - s).abs() < 1e-15 {
            i += 1;
        }
    }

    match mode {
        Mode::Bridge(opts) => {
            if let (Some(_), Some(vt)) = (tau, v_tau) {
                if opts.post_tau_drift {
                    // bridge phase on [τ, V(τ)] with shrinking terminal steps
                    if path.absorbed_at.is_none() && s < vt.min(horizon) {
                        while s < vt.min(horizon) {
                            let rem = vt - s;
                            if rem <= ctrl.dt_min {
                                x = 0.0;
                                s = vt;
                                path.absorbed_at = Some(vt);
                                path.push(s, x, Regime::PostTau);
                                break;
                            }
                            // keep the per-step noise sd at least 5 standard
                            // deviations away from the boundary, so spurious
                            // Euler crossings are ~Φ(-5) events per step
                            let safe = (x * x / 25.0).max(ctrl.dt_min);
                            let mut dt = (ctrl.terminal_guard * rem)
                                .min(ctrl.dt_base)
                                .min(safe)
                                .max(ctrl.dt_min);
                            if s + dt > horizon {
                                dt = horizon - s;
                            }
                            if dt <= 0.0 {
                                break;
                            }
                            let xi = noise.normal_b();
                            let drift = if x > 0.0 {
                                let rem_mid = vt - (s + 0.5 * dt);
                                ctrl.cap(drift_post(rem_mid, x)?, dt, &mut path.clamp_count)
                            } else {
                                0.0
                            };
                            x += drift * dt + dt.sqrt() * xi;
                            s += dt;
                            if x <= 0.0 && path.absorbed_at.is_none() {
                                x = 0.0;
                                path.absorbed_at = Some(s);
                            }
                            let flag = if path.absorbed_at.is_some() {
                                Regime::Absorbed
                            } else {
                                Regime::PostTau
                            };
                            path.push(s, x, flag);
                            if path.absorbed_at.is_some() {
                                break;
                            }
                        }
                    }
                } else {
                    // ablation: no bridge drift, no pinning — free Brownian
                    // motion after τ with plain crossing detection
                    while s < horizon {
                        let dt = ctrl.dt_base.min(horizon - s);
                        x += dt.sqrt() * noise.normal_b();
                        s += dt;
                        if x <= 0.0 && path.absorbed_at.is_none() {
                            path.absorbed_at = Some(s);
                        }
                        let flag = if path.absorbed_at.is_some() {
                            Regime::Absorbed
                        } else {
                            Regime::PostTau
                        };
                        path.push(s, x, flag);
                    }
                }
            }
            // free Brownian continuation after the first zero
            if opts.continue_after_zero {
                if let Some(z0) = path.absorbed_at {
                    let mut s2 = s.max(z0);
                    while s2 < horizon {
                        let dt = ctrl.dt_base.min(horizon - s2);
                        x += dt.sqrt() * noise.normal_b();
                        s2 += dt;
                        path.push(s2, x, Regime::Absorbed);
                    }
                }
            }
        }
        Mode::Aux => {
            // pure Brownian after τ
            if let Some(tv) = tau {
                let mut s2 = s.max(tv);
                while s2 < horizon {
                    let dt = ctrl.dt_base.min(horizon - s2);
                    x += dt.sqrt() * noise.normal_b();
                    s2 += dt;
                    path.push(s2, x, Regime::PostTau);
                }
            }
        }
    }
    Ok(path)
}

/// The squared auxiliary process U with U₀ = y²:
/// dU = 2√|U| dB + (2·1_{τ>t}·√|U|·f(V(t)-t, √|U|, Z_t) + 1) dt.
/// The drift lies in [1, 3]; no capping is needed.
pub fn simulate_u(
    spec: &TimeChangeSpec,
    noise: &mut NoiseBundle,
    z_path: &SamplePath,
    y0: f64,
    horizon: f64,
) -> Result<SamplePath> {
    let tau = z_path.tau.unwrap_or(f64::INFINITY);
    let mut path = SamplePath::with_capacity(z_path.grid.len());
    path.tau = z_path.tau;
    path.v_tau = z_path.v_tau;
    let mut u = y0 * y0;
    path.push(0.0, u, Regime::PreTau);
    for i in 0..z_path.grid.len() - 1 {
        let t0 = z_path.grid[i];
        let t1 = z_path.grid[i + 1].min(horizon);
        let dt = t1 - t0;
        if dt <= 0.0 {
            break;
        }
        let pre = t0 < tau;
        let drift = if pre {
            let s_mid = t0 + 0.5 * dt;
            let gap = spec.v_of(s_mid)? - s_mid;
            let z_here = z_path.values[i].max(0.0);
            2.0 * f_ratio(2.0 * u.max(0.0).sqrt() * z_here / gap) + 1.0
        } else {
            1.0
        };
        // full truncation: zero diffusion below 0, so a negative excursion
        // is a single overshoot of depth at most ξ²·dt before drift recovery
        u += 2.0 * u.max(0.0).sqrt() * dt.sqrt() * noise.normal_b() + drift * dt;
        if u <= 0.0 && t1 <= tau {
            path.positivity_violations += 1;
        }
        path.push(t1, u, if pre { Regime::PreTau } else { Regime::PostTau });
        if t1 >= horizon {
            break;
        }
    }
    Ok(path)
}

/// Squared-Bessel-type comparison process dY = 2√(Y⁺) dB + m dt, Y₀ = y0_sq
/// (full-truncation Euler, same boundary treatment as `simulate_u`).
pub fn simulate_sq_bessel(
    noise: &mut NoiseBundle,
    y0_sq: f64,
    m: f64,
    grid: &[f64],
    horizon: f64,
) -> SamplePath {
    let mut path = SamplePath::with_capacity(grid.len());
    let mut y = y0_sq;
    path.push(0.0, y, Regime::PreTau);
    for i in 0..grid.len() - 1 {
        let t1 = grid[i + 1].min(horizon);
        let dt = t1 - grid[i];
        if dt <= 0.0 {
            break;
        }
        y += 2.0 * y.max(0.0).sqrt() * dt.sqrt() * noise.normal_b() + m * dt;
        path.push(t1, y, Regime::PreTau);
        if t1 >= horizon {
            break;
        }
    }
    path
}

/// Euler scheme for dR = dB + (1/R - R/(V(s)-s)) ds started at y.
/// The first step starts at dt_min; the drift has an integrable singularity
/// at s = 0 when (V(s)-s)⁻² is integrable there, so R is held at y on
/// [0, dt_min].
pub fn simulate_r_sde(
    spec: &TimeChangeSpec,
    noise: &mut NoiseBundle,
    ctrl: &StepController,
    y0: f64,
    grid: &[f64],
) -> Result<SamplePath> {
    let mut path = SamplePath::with_capacity(grid.len());
    let mut r = y0;
    path.push(0.0, r, Regime::PreTau);
    for i in 0..grid.len() - 1 {
        let t0 = grid[i].max(ctrl.dt_min);
        let t1 = grid[i + 1];
        let dt = t1 - t0;
        if dt <= 0.0 {
            path.push(t1, r, Regime::PreTau);
            continue;
        }
        let s_mid = t0 + 0.5 * dt;
        let gap = spec.v_of(s_mid)? - s_mid;
        // -r/gap explicit (capped), 1/r drift-implicit: the step stays
        // strictly positive, mirroring the pre-τ stepper's treatment of its
        // own singular term so shared-noise comparisons are not skewed by
        // boundary clamping.
        let reg = ctrl.cap(-r / gap, dt, &mut path.clamp_count);
        let c = r + reg * dt + dt.sqrt() * noise.normal_b();
        r = 0.5 * (c + (c * c + 4.0 * dt).sqrt());
        if r <= 0.0 {
            path.positivity_violations += 1;
            r = 1e-8;
        }
        path.push(t1, r, Regime::PreTau);
    }
    Ok(path)
}

/// Precomputed deterministic curves on a grid, shared across paths.
#[derive(Debug, Clone)]
pub struct TimeChangeCurves {
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub big_lambda: Vec<f64>,
}

impl TimeChangeCurves {
    pub fn new(spec: &TimeChangeSpec, grid: &[f64]) -> Result<Self> {
        let v = grid.iter().map(|&t| spec.v_of(t)).collect::<Result<_>>()?;
        let lambda = grid.iter().map(|&t| spec.lambda_of(t)).collect::<Result<_>>()?;
        let big_lambda = grid
            .iter()
            .map(|&t| spec.big_lambda_of(t))
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.to_vec(),
            v,
            lambda,
            big_lambda,
        })
    }
}

/// Exact-law construction R̃_t = λ(t)·‖W³(Λ(t))‖ with W³ a 3-dimensional
/// Brownian motion started at (y, 0, 0), using the auxiliary normal stream.
pub fn construct_r_exact(
    curves: &TimeChangeCurves,
    noise: &mut NoiseBundle,
    y0: f64,
) -> SamplePath {
    let mut path = SamplePath::with_capacity(curves.grid.len());
    let mut w = [y0, 0.0, 0.0];
    path.push(curves.grid[0], curves.lambda[0] * norm3(&w), Regime::PreTau);
    for i in 0..curves.grid.len() - 1 {
        let dl = curves.big_lambda[i + 1] - curves.big_lambda[i];
        let sd = dl.max(0.0).sqrt();
        for wj in w.iter_mut() {
            *wj += sd * noise.normal_aux();
        }
        path.push(
            curves.grid[i + 1],
            curves.lambda[i + 1] * norm3(&w),
            Regime::PreTau,
        );
    }
    path
}

fn norm3(w: &[f64; 3]) -> f64 {
    (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
}

/// Exact 3-dimensional Bessel bridge from x_start to 0 over
/// [t_start, t_end]: the norm of a 3-dimensional Brownian bridge from
/// (x_start, 0, 0) to the origin. The endpoint is exactly 0.
pub fn bessel_bridge_exact(
    x_start: f64,
    t_start: f64,
    t_end: f64,
    n_steps: usize,
    noise: &mut NoiseBundle,
) -> Result<SamplePath> {
    if !(t_end > t_start) || !(x_start > 0.0) || n_steps == 0 {
        return Err(Error::Domain(format!(
            "bessel bridge needs t_end > t_start, x_start > 0; got ({t_start}, {t_end}, {x_start})"
        )));
    }
    let len = t_end - t_start;
    let du = len / n_steps as f64;
    // raw Brownian paths for the three components
    let mut raw = vec![[0.0f64; 3]; n_steps + 1];
    for i in 1..=n_steps {
        let prev = raw[i - 1];
        for (j, p) in prev.iter().enumerate() {
            raw[i][j] = p + du.sqrt() * noise.normal_aux();
        }
    }
    let terminal = raw[n_steps];
    let mut path = SamplePath::with_capacity(n_steps + 1);
    for (i, r) in raw.iter().enumerate() {
        let u = i as f64 * du;
        let frac = u / len;
        let b = [
            x_start * (1.0 - frac) + r[0] - frac * terminal[0],
            r[1] - frac * terminal[1],
            r[2] - frac * terminal[2],
        ];
        let v = if i == n_steps { 0.0 } else { norm3(&b) };
        path.push(t_start + u, v, Regime::PostTau);
    }
    path.absorbed_at = Some(t_end);
    Ok(path)
}

/// Pointwise gap statistics between two paths expected to satisfy
/// lower ≤ upper on a common grid, up to `stop`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonSummary {
    /// max over the grid of (lower - upper); positive means a violation.
    pub max_signed_gap: f64,
    pub violation_fraction: f64,
    pub n_points: usize,
}

pub fn couple_compare(lower: &SamplePath, upper: &SamplePath, stop: f64) -> Result<ComparisonSummary> {
    let n = lower.grid.len().min(upper.grid.len());
    let mut max_gap = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let mut count = 0usize;
    for i in 0..n {
        if lower.grid[i] >= stop || upper.grid[i] >= stop {
            break;
        }
        if (lower.grid[i] - upper.grid[i]).abs() > 1e-12 {
            return Err(Error::Domain("couple_compare requires identical grids".into()));
        }
        let gap = lower.values[i] - upper.values[i];
        max_gap = max_gap.max(gap);
        if gap > 0.0 {
            violations += 1;
        }
        count += 1;
    }
    Ok(ComparisonSummary {
        max_signed_gap: max_gap,
        violation_fraction: if count > 0 {
            violations as f64 / count as f64
        } else {
            0.0
        },
        n_points: count,
    })
}

/// CSV export: one row per X grid point with the interpolated Z value.
pub fn export_pair_csv<W: std::io::Write>(
    out: &mut W,
    z_path: &SamplePath,
    x_path: &SamplePath,
) -> Result<()> {
    writeln!(out, "t,Z,X,regime")?;
    for i in 0..x_path.grid.len() {
        let t = x_path.grid[i];
        let z = z_path
            .value_at(t)
            .map(|v| format!("{v:.12e}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{t:.9},{z},{:.12e},{:?}",
            x_path.values[i], x_path.flags[i]
        )?;
    }
    Ok(())
}

const BIN_MAGIC: &[u8; 4] = b"DBRG";

/// Compact binary block: magic, version, seed, 32-byte config hash, point
/// count, then (t, value) pairs as little-endian f64.
pub fn write_binary<W: std::io::Write>(
    out: &mut W,
    path: &SamplePath,
    seed: u64,
    config_hash: &[u8; 32],
) -> Result<()> {
    out.write_all(BIN_MAGIC)?;
    out.write_all(&1u32.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(config_hash)?;
    out.write_all(&(path.grid.len() as u64).to_le_bytes())?;
    for i in 0..path.grid.len() {
        out.write_all(&path.grid[i].to_le_bytes())?;
        out.write_all(&path.values[i].to_le_bytes())?;
    }
    Ok(())
}

/// Decoded binary block: (seed, config hash, (t, value) pairs).
pub type BinaryBlock = (u64, [u8; 32], Vec<(f64, f64)>);

pub fn read_binary<R: std::io::Read>(input: &mut R) -> Result<BinaryBlock> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::Domain("bad binary block magic".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let mut hash = [0u8; 32];
    input.read_exact(&mut hash)?;
    input.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut b8)?;
        let t = f64::from_le_bytes(b8);
        input.read_exact(&mut b8)?;
        points.push((t, f64::from_le_bytes(b8)));
    }
    Ok((seed, hash, points))
}
