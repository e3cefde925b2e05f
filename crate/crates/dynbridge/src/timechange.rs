//! Deterministic time changes V(t) = ∫₀ᵗ σ²(s) ds and the derived
//! deterministic functions V⁻¹, λ and Λ.
//!
//! The canonical family is `PowerSingular` with σ²(s) = 1 + γ·s^(α-1), which
//! gives the closed form V(t) = t + (γ/α)·t^α. The gap V(t) - t then behaves
//! like t^α near 0, so the square-inverse-gap integral converges exactly when
//! α < 1/2. `Affine` is kept as a negative fixture: it passes the V(t) > t
//! check but its square-inverse-gap integral diverges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TimeChangeFamily {
    /// σ²(s) = 1 + gamma·s^(alpha-1) with gamma > 0, alpha in (0,1).
    #[serde(rename = "power")]
    PowerSingular { gamma: f64, alpha: f64 },
    /// σ²(s) = c with c > 1, so V(t) = c·t.
    Affine { c: f64 },
    /// Piecewise-constant σ² tabulated on `knots` (starting at 0); value
    /// `sigma_sq[i]` holds on [knots[i], knots[i+1]) and the last value
    /// extends to t_max. V is exact by summation.
    Custom { knots: Vec<f64>, sigma_sq: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChangeSpec {
    #[serde(flatten)]
    pub family: TimeChangeFamily,
    pub t_max: f64,
}

/// Outcome of checking the strict-gap condition (V(t) > t) and the
/// inverse-gap square integrability (∫₀^ε (V(t)-t)⁻² dt < ∞).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangeReport {
    pub strict_gap_ok: bool,
    pub inv_gap_sq_ok: bool,
    /// Value of ∫₀^ε (V(t)-t)⁻² dt, +∞ when divergent.
    pub inv_gap_sq_integral: f64,
    pub epsilon_used: f64,
}

impl TimeChangeReport {
    pub fn all_ok(&self) -> bool {
        self.strict_gap_ok && self.inv_gap_sq_ok
    }
}

impl TimeChangeSpec {
    pub fn power(gamma: f64, alpha: f64, t_max: f64) -> Result<Self> {
        if gamma <= 0.0 || !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
            return Err(Error::Domain(format!(
                "power family needs gamma > 0 and alpha in (0,1); got gamma={gamma}, alpha={alpha}"
            )));
        }
        Self::with_family(TimeChangeFamily::PowerSingular { gamma, alpha }, t_max)
    }

    pub fn affine(c: f64, t_max: f64) -> Result<Self> {
        if c <= 1.0 {
            return Err(Error::Domain(format!("affine family needs c > 1; got {c}")));
        }
        Self::with_family(TimeChangeFamily::Affine { c }, t_max)
    }

    pub fn custom(knots: Vec<f64>, sigma_sq: Vec<f64>, t_max: f64) -> Result<Self> {
        if knots.is_empty() || knots[0] != 0.0 || knots.len() != sigma_sq.len() {
            return Err(Error::Domain(
                "custom family needs knots starting at 0 and one sigma_sq per knot".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("custom knots must be strictly increasing".into()));
        }
        if sigma_sq.iter().any(|&v| v <= 0.0) {
            return Err(Error::Domain("sigma_sq values must be positive".into()));
        }
        Self::with_family(TimeChangeFamily::Custom { knots, sigma_sq }, t_max)
    }

    fn with_family(family: TimeChangeFamily, t_max: f64) -> Result<Self> {
        if t_max <= 0.0 {
            return Err(Error::Domain(format!("t_max must be positive; got {t_max}")));
        }
        Ok(Self { family, t_max })
    }

    /// The canonical experiment spec: PowerSingular(γ=1, α=1/3).
    pub fn canonical(t_max: f64) -> Self {
        Self::power(1.0, 1.0 / 3.0, t_max).expect("canonical parameters are valid")
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, {}]",
                self.t_max
            )));
        }
        Ok(())
    }

    /// σ²(t).
    pub fn sigma_sq(&self, t: f64) -> f64 {
        match &self.family {
            TimeChangeFamily::PowerSingular { gamma, alpha } => 1.0 + gamma * t.powf(alpha - 1.0),
            TimeChangeFamily::Affine { c } => *c,
            TimeChangeFamily::Custom { knots, sigma_sq } => {
                let idx = knots.partition_point(|&k| k <= t).saturating_sub(1);
                sigma_sq[idx]
            }
        }
    }

    /// V(t) = ∫₀ᵗ σ²(s) ds.
    pub fn v_of(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.v_unchecked(t))
    }

    fn v_unchecked(&self, t: f64) -> f64 {
        match &self.family {
            TimeChangeFamily::PowerSingular { gamma, alpha } => {
                t + gamma / alpha * t.powf(*alpha)
            }
            TimeChangeFamily::Affine { c } => c * t,
            TimeChangeFamily::Custom { knots, sigma_sq } => {
                let mut acc = 0.0;
                for i in 0..knots.len() {
                    let lo = knots[i];
                    if lo >= t {
                        break;
                    }
                    let hi = if i + 1 < knots.len() { knots[i + 1].min(t) } else { t };
                    acc += sigma_sq[i] * (hi - lo);
                }
                acc
            }
        }
    }

    /// V⁻¹(u), by monotone bracketing on [0, t_max].
    pub fn v_inverse(&self, u: f64) -> Result<f64> {
        if u < 0.0 {
            return Err(Error::Domain(format!("u = {u} negative")));
        }
        let v_max = self.v_unchecked(self.t_max);
        if u > v_max {
            return Err(Error::Domain(format!("u = {u} exceeds V(t_max) = {v_max}")));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        numerics::monotone_inverse(
            &|t| self.v_unchecked(t),
            u,
            0.0,
            self.t_max,
            1e-12 * (1.0 + u),
        )
    }

    /// Checks V(t) > t on a log-spaced grid and evaluates the integral
    /// ∫₀^ε (V(t)-t)⁻² dt (analytically for the known families).
    pub fn validate(&self, epsilon: f64) -> Result<TimeChangeReport> {
        if epsilon <= 0.0 || epsilon > self.t_max {
            return Err(Error::Domain(format!(
                "epsilon = {epsilon} outside (0, t_max]"
            )));
        }
        let strict_gap_ok = log_grid(self.t_max, 1000)
            .into_iter()
            .all(|t| self.v_unchecked(t) > t);
        let inv_gap_sq_integral = match &self.family {
            TimeChangeFamily::PowerSingular { gamma, alpha } => {
                if *alpha < 0.5 {
                    (alpha / gamma).powi(2) * epsilon.powf(1.0 - 2.0 * alpha)
                        / (1.0 - 2.0 * alpha)
                } else {
                    f64::INFINITY
                }
            }
            TimeChangeFamily::Affine { .. } => f64::INFINITY,
            TimeChangeFamily::Custom { .. } => {
                let integrand = |t: f64| {
                    let gap = self.v_unchecked(t) - t;
                    if gap <= 0.0 {
                        f64::INFINITY
                    } else {
                        1.0 / (gap * gap)
                    }
                };
                numerics::integrate_singular_origin(&integrand, epsilon, 1e-10).unwrap_or(f64::INFINITY)
            }
        };
        Ok(TimeChangeReport {
            strict_gap_ok,
            inv_gap_sq_ok: inv_gap_sq_integral.is_finite(),
            inv_gap_sq_integral,
            epsilon_used: epsilon,
        })
    }

    /// ∫₀ᵗ (V(s)-s)⁻¹ ds, the exponent of λ. Errors when the integral
    /// diverges at 0, i.e. when inverse-gap square integrability fails.
    fn inv_gap_integral(&self, t: f64) -> Result<f64> {
        match &self.family {
            TimeChangeFamily::PowerSingular { gamma, alpha } => {
                if *alpha >= 0.5 {
                    return Err(Error::Singularity(format!(
                        "lambda rejected for alpha = {alpha} >= 1/2: (V(t)-t)^-2 not integrable at 0"
                    )));
                }
                Ok(alpha / gamma * t.powf(1.0 - alpha) / (1.0 - alpha))
            }
            TimeChangeFamily::Affine { .. } => Err(Error::Singularity(
                "lambda integral diverges logarithmically for the affine family".into(),
            )),
            TimeChangeFamily::Custom { .. } => {
                let integrand = |s: f64| {
                    let gap = self.v_unchecked(s) - s;
                    if gap <= 0.0 {
                        f64::INFINITY
                    } else {
                        1.0 / gap
                    }
                };
                numerics::integrate_singular_origin(&integrand, t, 1e-10)
            }
        }
    }

    /// λ(t) = exp(-∫₀ᵗ (V(s)-s)⁻¹ ds); decreasing with λ(0) = 1.
    pub fn lambda_of(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(1.0);
        }
        Ok((-self.inv_gap_integral(t)?).exp())
    }

    /// Λ(t) = ∫₀ᵗ λ(s)⁻² ds; increasing with Λ(0) = 0.
    pub fn big_lambda_of(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        // λ⁻² is smooth and equals 1 at 0, so plain adaptive quadrature
        // suffices once inv_gap_integral has ruled out divergence.
        self.inv_gap_integral(t)?;
        let integrand = |s: f64| {
            if s == 0.0 {
                1.0
            } else {
                (2.0 * self.inv_gap_integral(s).unwrap_or(f64::INFINITY)).exp()
            }
        };
        Ok(numerics::adaptive_simpson(&integrand, 0.0, t, 1e-10))
    }
}

/// Log-spaced grid over (t_max·1e-9, t_max].
pub fn log_grid(t_max: f64, n: usize) -> Vec<f64> {
    let lo = (t_max * 1e-9).ln();
    let hi = t_max.ln();
    (0..n)
        // exp(ln x) can overshoot by an ulp; keep the grid inside the domain
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp().min(t_max))
        .collect()
}
