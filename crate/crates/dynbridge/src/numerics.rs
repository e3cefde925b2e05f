//! Quadrature and root-finding helpers shared by the kernel and time-change
//! modules. Everything here is deterministic and pure.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature on a finite interval.
///
/// `tol` is an absolute tolerance for the whole interval. The interval is
/// first split into 16 uniform panels so that a narrow bump between the
/// three top-level sample points cannot fool the refinement criterion into
/// premature convergence; each panel is then refined adaptively.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let mut total = 0.0;
    for i in 0..PANELS {
        let lo = a + (b - a) * i as f64 / PANELS as f64;
        let hi = a + (b - a) * (i + 1) as f64 / PANELS as f64;
        let fa = f(lo);
        let fb = f(hi);
        let m = 0.5 * (lo + hi);
        let fm = f(m);
        let whole = simpson(lo, hi, fa, fm, fb);
        total += simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 50);
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Integral of `f` over `[a, ∞)` for integrands with at least power-law decay
/// (exponent < -1). Panels double in width; summation stops once a panel
/// contributes less than `tol` relative to the running total.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<f64> {
    let mut lo = a;
    let mut width = if a > 0.0 { a } else { 1.0 };
    let mut total = 0.0f64;
    for _ in 0..200 {
        let hi = lo + width;
        let panel = adaptive_simpson(f, lo, hi, tol * (1.0 + total.abs()) * 1e-2);
        total += panel;
        if panel.abs() <= tol * (1.0 + total.abs()) {
            return Ok(total);
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Numeric(format!(
        "tail integral from {a} did not converge (total so far {total})"
    )))
}

/// Integral of `f` over `(0, b]` where `f` may blow up at 0. Panels halve
/// toward the origin; divergence is reported when panel contributions stop
/// decaying.
pub fn integrate_singular_origin<F: Fn(f64) -> f64>(f: &F, b: f64, tol: f64) -> Result<f64> {
    let mut hi = b;
    let mut total = 0.0;
    let mut prev_panel = f64::INFINITY;
    for k in 0..200 {
        let lo = 0.5 * hi;
        let panel = adaptive_simpson(f, lo, hi, tol * 1e-2);
        total += panel;
        if panel.abs() <= tol * (1.0 + total.abs()) {
            return Ok(total);
        }
        // After the first few panels a convergent integral must decay
        // geometrically; a non-shrinking panel signals divergence at 0.
        if k > 8 && panel.abs() >= 0.999 * prev_panel.abs() {
            return Err(Error::Singularity(format!(
                "integral over (0, {b}] diverges at the origin"
            )));
        }
        prev_panel = panel;
        hi = lo;
    }
    Err(Error::Singularity(format!(
        "integral over (0, {b}] did not converge after panel refinement"
    )))
}

/// Inverse of a strictly increasing function by bisection with a Newton-free
/// bracket shrink. `f(lo) <= target <= f(hi)` must hold.
pub fn monotone_inverse<F: Fn(f64) -> f64>(
    f: &F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if target < flo - tol || target > fhi + tol {
        return Err(Error::Domain(format!(
            "target {target} outside bracket [{flo}, {fhi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm - target).abs() <= tol {
            return Ok(mid);
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(0.5 * (lo + hi))
}
