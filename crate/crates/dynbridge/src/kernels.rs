//! Closed-form densities and drift ratios around Brownian motion killed at 0:
//! the hitting density ℓ, its survival function H, the killed transition
//! density q, the h-transformed transition density p, and the drift ratios
//! q_x/q, ℓ_a/ℓ and H_x/H used by the path simulators.
//!
//! Everything is evaluated in log space where cancellation or underflow can
//! bite; the difference of exponentials in q is folded into a single expm1.

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::numerics;
use crate::timechange::TimeChangeSpec;

pub const SQRT_2PI: f64 = 2.5066282746310002;

fn require_pos(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) {
        return Err(Error::Domain(format!("{name} must be positive; got {v}")));
    }
    Ok(())
}

/// Density of the first passage time T_a of a standard BM to level a > 0:
/// ℓ(t,a) = a/√(2πt³) · exp(-a²/(2t)).
pub fn ell(t: f64, a: f64) -> Result<f64> {
    require_pos("t", t)?;
    require_pos("a", a)?;
    let log_ell = a.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 1.5 * t.ln()
        - a * a / (2.0 * t);
    Ok(log_ell.exp())
}

/// Survival function H(t,a) = P[T_a > t] = erf(a/√(2t)).
pub fn h_surv(t: f64, a: f64) -> Result<f64> {
    require_pos("t", t)?;
    require_pos("a", a)?;
    Ok(erf(a / (2.0 * t).sqrt()))
}

/// ∂H/∂a in closed form: √(2/(πt)) · exp(-a²/(2t)).
pub fn h_surv_da(t: f64, a: f64) -> Result<f64> {
    require_pos("t", t)?;
    require_pos("a", a)?;
    Ok((2.0 / (std::f64::consts::PI * t)).sqrt() * (-a * a / (2.0 * t)).exp())
}

/// Transition density of Brownian motion killed at 0.
///
/// q(t,x,y) = gaussian(t, x-y) · (1 - exp(-2xy/t)), with the parenthesis
/// computed as -expm1(-2xy/t) so that small 2xy/t keeps full relative
/// accuracy.
pub fn q_killed(t: f64, x: f64, y: f64) -> Result<f64> {
    require_pos("t", t)?;
    require_pos("x", x)?;
    require_pos("y", y)?;
    let d = x - y;
    let gauss = (-d * d / (2.0 * t)).exp() / (t.sqrt() * SQRT_2PI);
    Ok(gauss * (-f64::exp_m1(-2.0 * x * y / t)))
}

/// f(y) = y·e^{-y}/(1-e^{-y}) = y/(e^y - 1), the bounded factor in q_x/q.
/// Decreasing from f(0⁺) = 1 to 0; a 3-term series takes over below 1e-5.
pub fn f_ratio(yv: f64) -> f64 {
    if yv < 0.0 {
        return f64::NAN;
    }
    if yv < 1e-5 {
        return 1.0 - yv / 2.0 + yv * yv / 12.0;
    }
    let denom = f64::exp_m1(yv);
    if denom.is_infinite() {
        0.0
    } else {
        yv / denom
    }
}

/// Pre-τ drift ratio q_x/q(t,x,z) = (z-x)/t + f(2xz/t)/x.
/// At z = 0 this returns the analytic limit 1/x - x/t.
pub fn drift_pre(t: f64, x: f64, z: f64) -> Result<f64> {
    require_pos("t", t)?;
    if !(x > 0.0) {
        return Err(Error::Singularity(format!(
            "q_x/q evaluated at x = {x} <= 0"
        )));
    }
    if z < 0.0 {
        return Err(Error::Domain(format!("z = {z} negative")));
    }
    if z == 0.0 {
        return Ok(1.0 / x - x / t);
    }
    Ok((z - x) / t + f_ratio(2.0 * x * z / t) / x)
}

/// Post-τ (Bessel-bridge) drift ℓ_a/ℓ(t_remaining, x) = 1/x - x/t_remaining.
pub fn drift_post(t_remaining: f64, x: f64) -> Result<f64> {
    if !(t_remaining > 0.0) || !(x > 0.0) {
        return Err(Error::Singularity(format!(
            "bridge drift needs t_remaining > 0 and x > 0; got ({t_remaining}, {x})"
        )));
    }
    Ok(1.0 / x - x / t_remaining)
}

/// H_x/H(delta, z) from closed forms; for z ≫ √delta, H ≈ 1 and the
/// numerator is returned directly.
pub fn drift_h(delta: f64, z: f64) -> Result<f64> {
    require_pos("delta", delta)?;
    require_pos("z", z)?;
    let w = z / (2.0 * delta).sqrt();
    let hx = (2.0 / (std::f64::consts::PI * delta)).sqrt() * (-w * w).exp();
    if w > 7.0 {
        return Ok(hx);
    }
    Ok(hx / erf(w))
}

/// η(delta, y): the ratio of the two tail integrals
/// ∫_delta^∞ u^{-5/2} e^{-y²/2u} du / ∫_delta^∞ u^{-3/2} e^{-y²/2u} du,
/// computed by quadrature after the substitution u = delta/v², which turns
/// both into integrals of smooth functions over (0,1]:
/// η = ∫₀¹ v² e^{-cv²} dv / (delta · ∫₀¹ e^{-cv²} dv) with c = y²/(2·delta).
pub fn eta(delta: f64, y: f64) -> Result<f64> {
    require_pos("delta", delta)?;
    require_pos("y", y)?;
    let c = y * y / (2.0 * delta);
    // beyond v ≈ 30/√c the integrands underflow; shrink the interval so the
    // quadrature sees the mass
    let hi = if c > 900.0 { (30.0 / c.sqrt()).min(1.0) } else { 1.0 };
    let num = numerics::adaptive_simpson(&|v| v * v * (-c * v * v).exp(), 0.0, hi, 1e-12);
    let den = numerics::adaptive_simpson(&|v| (-c * v * v).exp(), 0.0, hi, 1e-12);
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::Numeric(format!(
            "eta quadrature failed at delta={delta}, y={y}"
        )));
    }
    Ok(num / (delta * den))
}

/// h-transformed killed-BM transition density
/// p(t; r, s, x, z) = q(s-r, x, z) · H(t-s, z) / H(t-r, x), in log space.
pub fn p_htrans(t_h: f64, r: f64, s: f64, x: f64, z: f64) -> Result<f64> {
    if !(r < s && s < t_h) {
        return Err(Error::Domain(format!(
            "need r < s < t; got r={r}, s={s}, t={t_h}"
        )));
    }
    require_pos("x", x)?;
    require_pos("z", z)?;
    let dt = s - r;
    let d = x - z;
    let log_q = (-f64::exp_m1(-2.0 * x * z / dt)).ln()
        - d * d / (2.0 * dt)
        - (dt.sqrt() * SQRT_2PI).ln();
    let log_h_num = erf(z / (2.0 * (t_h - s)).sqrt()).ln();
    let log_h_den = erf(x / (2.0 * (t_h - r)).sqrt()).ln();
    Ok((log_q + log_h_num - log_h_den).exp())
}

/// Conditional density of Z_t given G_t on [τ > t]:
/// z ↦ q(V(t)-t, x_t, z) / H(V(t)-t, x_t).
#[derive(Debug, Clone)]
pub struct ZPosterior {
    /// V(t) - t.
    pub delta: f64,
    /// Observed X_t.
    pub x: f64,
    norm: f64,
}

impl ZPosterior {
    pub fn density(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        q_killed(self.delta, self.x, z).unwrap_or(0.0) / self.norm
    }

    /// Upper integration bound beyond which the density is numerically zero.
    pub fn support_hi(&self) -> f64 {
        self.x + 12.0 * self.delta.sqrt()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let hi = z.min(self.support_hi());
        numerics::adaptive_simpson(&|y| self.density(y), 0.0, hi, 1e-10).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        numerics::adaptive_simpson(&|y| y * self.density(y), 0.0, self.support_hi(), 1e-10)
    }
}

pub fn z_posterior(spec: &TimeChangeSpec, t: f64, x_t: f64) -> Result<ZPosterior> {
    require_pos("x_t", x_t)?;
    let delta = spec.v_of(t)? - t;
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "V(t) - t = {delta} not positive at t = {t}"
        )));
    }
    Ok(ZPosterior {
        delta,
        x: x_t,
        norm: h_surv(delta, x_t)?,
    })
}

/// Conditional density of τ given G_t on [τ > t]:
/// u ↦ σ²(u) · ℓ(V(u)-t, x_t) / H(V(t)-t, x_t) for u > t.
#[derive(Debug, Clone)]
pub struct TauPosterior<'a> {
    spec: &'a TimeChangeSpec,
    pub t: f64,
    pub x: f64,
    norm: f64,
}

impl TauPosterior<'_> {
    pub fn density(&self, u: f64) -> Result<f64> {
        if u <= self.t {
            return Ok(0.0);
        }
        let vu = self.spec.v_of(u)?;
        Ok(self.spec.sigma_sq(u) * ell(vu - self.t, self.x)? / self.norm)
    }

    /// P[τ > u | G_t, τ > t] = H(V(u)-t, x) / H(V(t)-t, x), by the exact
    /// change of variable v = V(u) in the tail integral.
    pub fn survival(&self, u: f64) -> Result<f64> {
        if u <= self.t {
            return Ok(1.0);
        }
        Ok(h_surv(self.spec.v_of(u)? - self.t, self.x)? / self.norm)
    }
}

pub fn tau_posterior(spec: &TimeChangeSpec, t: f64, x_t: f64) -> Result<TauPosterior<'_>> {
    require_pos("x_t", x_t)?;
    let delta = spec.v_of(t)? - t;
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "V(t) - t = {delta} not positive at t = {t}"
        )));
    }
    Ok(TauPosterior {
        spec,
        t,
        x: x_t,
        norm: h_surv(delta, x_t)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{adaptive_simpson, integrate_tail};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ell_direct_value() {
        // e^{-1/2}/√(2π), frozen from a 30-digit evaluation
        assert_relative_eq!(ell(1.0, 1.0).unwrap(), 0.241970724519143350, max_relative = 1e-14);
        assert!(ell(0.0, 1.0).is_err());
        assert!(ell(1.0, -1.0).is_err());
    }

    #[test]
    fn ell_integrates_to_one() {
        for &a in &[0.5, 1.0, 2.0] {
            let head = adaptive_simpson(&|u| ell(u, a).unwrap(), 1e-12, 1.0, 1e-11);
            let tail = integrate_tail(&|u| ell(u, a).unwrap(), 1.0, 1e-10).unwrap();
            assert_relative_eq!(head + tail, 1.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn ell_is_minus_dh_dt() {
        for &(t, a) in &[(1.0, 1.0), (0.5, 2.0), (3.0, 0.7)] {
            let h = 1e-6 * t;
            let fd = -(h_surv(t + h, a).unwrap() - h_surv(t - h, a).unwrap()) / (2.0 * h);
            assert_relative_eq!(ell(t, a).unwrap(), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn h_surv_value_and_limits() {
        // statrs erf carries ~1e-11 relative error; the reference value is
        // exact to 18 digits
        assert_relative_eq!(h_surv(1.0, 1.0).unwrap(), 0.682689492137085897, max_relative = 1e-9);
        assert!(h_surv(1e-12, 1.0).unwrap() > 1.0 - 1e-12);
        assert!(h_surv(1.0, 2.0).unwrap() > h_surv(1.0, 1.0).unwrap());
    }

    #[test]
    fn h_two_integral_representations() {
        // erf closed form vs ∫_t^∞ ℓ(u,a)du vs ∫_0^∞ q(t,a,y)dy
        for &(t, a) in &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)] {
            let h = h_surv(t, a).unwrap();
            let via_ell = integrate_tail(&|u| ell(u, a).unwrap(), t, 1e-11).unwrap();
            let hi = a + 12.0 * t.sqrt();
            let via_q = adaptive_simpson(&|y| q_killed(t, a, y).unwrap(), 1e-14, hi, 1e-12);
            assert_relative_eq!(h, via_ell, max_relative = 1e-8);
            assert_relative_eq!(h, via_q, max_relative = 1e-8);
        }
    }

    #[test]
    fn q_killed_value_and_naive_oracle() {
        // (1 - e^{-2})/√(2π), frozen from a 30-digit evaluation
        assert_relative_eq!(
            q_killed(1.0, 1.0, 1.0).unwrap(),
            0.344951313888244626,
            max_relative = 1e-14
        );
        // naive two-exponential formula at moderate arguments
        let triples: [(f64, f64, f64); 3] = [(1.0, 1.0, 1.0), (0.5, 0.8, 1.3), (2.0, 2.0, 0.4)];
        for &(t, x, y) in &triples {
            let naive = ((-(x - y) * (x - y) / (2.0 * t)).exp()
                - (-(x + y) * (x + y) / (2.0 * t)).exp())
                / (t.sqrt() * SQRT_2PI);
            assert_relative_eq!(q_killed(t, x, y).unwrap(), naive, max_relative = 1e-12);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let quads: [(f64, f64, f64, f64); 3] =
            [(0.3, 0.7, 1.0, 1.5), (0.5, 0.5, 0.8, 0.8), (1.0, 0.2, 2.0, 0.5)];
        for &(s, t, x, y) in &quads {
            let hi = x.max(y) + 12.0 * (s + t).sqrt();
            let conv = adaptive_simpson(
                &|z| q_killed(s, x, z).unwrap() * q_killed(t, z, y).unwrap(),
                1e-14,
                hi,
                1e-12,
            );
            assert_relative_eq!(conv, q_killed(s + t, x, y).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn f_ratio_values_and_series() {
        assert_eq!(f_ratio(0.0), 1.0);
        assert_relative_eq!(f_ratio(2.0), 0.313035285499331304, max_relative = 1e-14);
        // series branch continuous across the switch point
        assert_relative_eq!(f_ratio(1e-5 - 1e-12), f_ratio(1e-5 + 1e-12), max_relative = 1e-10);
        assert_eq!(f_ratio(1e4), 0.0); // expm1 overflow branch
    }

    #[test]
    fn drift_pre_values_and_limit() {
        assert_relative_eq!(
            drift_pre(1.0, 1.0, 1.0).unwrap(),
            f_ratio(2.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(drift_pre(1.0, 2.0, 0.0).unwrap(), 0.5 - 2.0, max_relative = 1e-14);
        // z → 0 numeric limit matches drift_post
        let lim = drift_pre(1.0, 0.7, 1e-8).unwrap();
        assert_relative_eq!(lim, drift_post(1.0, 0.7).unwrap(), epsilon = 1e-6);
        assert!(drift_pre(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn drift_post_values() {
        assert_eq!(drift_post(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(drift_post(4.0, 1.0).unwrap(), 0.75);
        assert!(drift_post(0.0, 1.0).is_err());
        assert!(drift_post(1.0, 0.0).is_err());
    }

    #[test]
    fn drift_h_finite_difference_oracle() {
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift, plenty for test point generation
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let delta = 0.05 + 3.0 * next();
            let z = 0.1 + 3.0 * next();
            // far from the boundary H is 1 - tiny and the finite-difference
            // oracle loses all its digits to cancellation; the closed form
            // does not, so only moderate z/√(2δ) can be cross-checked
            if z / (2.0 * delta).sqrt() > 3.5 {
                continue;
            }
            let h = 1e-6 * z;
            let fd = (h_surv(delta, z + h).unwrap().ln() - h_surv(delta, z - h).unwrap().ln())
                / (2.0 * h);
            assert_relative_eq!(drift_h(delta, z).unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn drift_h_eta_identity() {
        assert_relative_eq!(eta(1.0, 1.0).unwrap(), 0.291125094772793211, max_relative = 1e-9);
        for &(delta, z) in &[(1.0, 1.0), (0.5, 0.3), (2.0, 1.7), (0.2, 2.5)] {
            let lhs = drift_h(delta, z).unwrap();
            let rhs = 1.0 / z - z * eta(delta, z).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-6);
        }
    }

    #[test]
    fn eta_bound_and_decay() {
        for &(delta, y) in &[(0.5, 0.2), (1.0, 1.0), (2.0, 3.0), (1e-3, 0.05)] {
            let e = eta(delta, y).unwrap();
            assert!(e >= 0.0 && e <= 1.0 / delta, "eta out of [0, 1/delta]");
        }
        let far = eta(1.0, 50.0).unwrap();
        assert!(far < 1e-3, "eta should vanish far from the boundary: {far}");
    }

    #[test]
    fn p_htrans_normalizes_and_limits() {
        let (t, r, s, x) = (4.0f64, 0.0f64, 2.0f64, 1.0f64);
        let hi = x + 12.0 * (s - r).sqrt();
        let total = adaptive_simpson(&|z| p_htrans(t, r, s, x, z).unwrap(), 1e-14, hi, 1e-12);
        assert_relative_eq!(total, 1.0, max_relative = 1e-6);

        // s ↑ t limit: p → q(t-r, x, z)/H(t-r, x)
        let s_near = t - 1e-6;
        for &z in &[0.5, 1.0, 2.0] {
            let p = p_htrans(t, r, s_near, x, z).unwrap();
            let lim = q_killed(t - r, x, z).unwrap() / h_surv(t - r, x).unwrap();
            assert_relative_eq!(p, lim, max_relative = 1e-4);
        }

        // near-delta concentration for s - r small: integrate over a window
        // wide enough for the quadrature to see the spike
        let (r2, s2) = (1.0, 1.0 + 1e-3);
        let mean = adaptive_simpson(
            &|z| z * p_htrans(t, r2, s2, x, z).unwrap(),
            x - 0.4,
            x + 0.4,
            1e-12,
        );
        assert!((mean - x).abs() < 1e-2, "mean = {mean}");
    }

    #[test]
    fn z_posterior_properties() {
        let spec = TimeChangeSpec::canonical(4.0);
        let post = z_posterior(&spec, 1.0, 1.2).unwrap();
        assert_relative_eq!(post.cdf(post.support_hi()), 1.0, max_relative = 1e-8);

        // drift_pre averaged under the posterior reproduces drift_h
        let avg = adaptive_simpson(
            &|z| drift_pre(post.delta, post.x, z).unwrap() * post.density(z),
            1e-12,
            post.support_hi(),
            1e-11,
        );
        assert_relative_eq!(avg, drift_h(post.delta, post.x).unwrap(), max_relative = 1e-6);

        // far from the boundary the killing is negligible
        let far = z_posterior(&spec, 0.01, 10.0).unwrap();
        assert!((far.mean() - 10.0).abs() / 10.0 < 0.01);
    }

    #[test]
    fn tau_posterior_properties() {
        let spec = TimeChangeSpec::canonical(50.0);
        let t = 1.0;
        let post = tau_posterior(&spec, t, 1.2).unwrap();
        // normalization via the V-substitution: density integrates to
        // 1 - survival(u_hi) over (t, u_hi]
        let u_hi = 40.0;
        let mass = adaptive_simpson(&|u| post.density(u).unwrap(), t + 1e-12, u_hi, 1e-10);
        assert_relative_eq!(
            mass,
            1.0 - post.survival(u_hi).unwrap(),
            max_relative = 1e-6
        );
        // nonnegative on a dense grid
        for i in 1..1000 {
            let u = t + i as f64 * 0.03;
            assert!(post.density(u).unwrap() >= 0.0);
        }
        // at t=0, x=1 the induced law of V(τ) is ℓ(·,1): survival = H(s,1)
        let post0 = tau_posterior(&spec, 1e-9, 1.0).unwrap();
        let s = 2.0;
        let u = spec.v_inverse(s).unwrap();
        assert_relative_eq!(
            post0.survival(u).unwrap(),
            h_surv(s, 1.0).unwrap(),
            max_relative = 1e-5
        );
    }

    #[test]
    fn stability_envelope_no_nan() {
        let ts = [1e-12, 1e-6, 1.0, 1e3, 1e6];
        let xs = [1e-8, 1e-3, 1.0, 1e2, 1e4];
        for &t in &ts {
            for &x in &xs {
                for &z in &xs {
                    assert!(q_killed(t, x, z).unwrap().is_finite());
                    assert!(ell(t, x).unwrap().is_finite());
                    assert!(h_surv(t, x).unwrap().is_finite());
                    assert!(drift_pre(t, x, z).unwrap().is_finite());
                    assert!(drift_h(t, x).unwrap().is_finite());
                }
            }
        }
    }

    proptest! {
        #[test]
        fn q_symmetric(t in 0.01f64..10.0, x in 0.01f64..10.0, y in 0.01f64..10.0) {
            let a = q_killed(t, x, y).unwrap();
            let b = q_killed(t, y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }

        #[test]
        fn f_ratio_decreasing(y1 in 0.0f64..20.0, gap in 1e-6f64..5.0) {
            prop_assert!(f_ratio(y1) > f_ratio(y1 + gap));
        }

        #[test]
        fn drift_pre_decreasing_in_x(
            t in 0.05f64..5.0,
            x in 0.1f64..5.0,
            dx in 1e-3f64..2.0,
            z in 0.0f64..5.0,
        ) {
            let a = drift_pre(t, x, z).unwrap();
            let b = drift_pre(t, x + dx, z).unwrap();
            prop_assert!(a > b, "q_x/q must decrease in x: {a} vs {b}");
        }

        #[test]
        fn drift_h_positive(delta in 1e-3f64..10.0, z in 1e-3f64..20.0) {
            let d = drift_h(delta, z).unwrap();
            prop_assert!(d.is_finite() && d >= 0.0);
            // the numerator only underflows to 0 deep in the tail
            if z / (2.0 * delta).sqrt() < 25.0 {
                prop_assert!(d > 0.0);
            }
        }
    }
}
