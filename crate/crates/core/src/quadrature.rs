//! Adaptive composite Simpson quadrature.

use crate::error::{Result, ThermoError};

/// Recursion limit per panel.
pub const MAX_DEPTH: u32 = 30;
const INITIAL_PANELS: usize = 8;

/// Integrates `f` over `[a, b]` with an absolute error target `tol`.
///
/// The interval is cut into a few panels first; each panel is refined
/// recursively with Richardson correction. Fails with
/// [`ThermoError::ToleranceNotMet`] when some panel still misses its share of
/// the tolerance at [`MAX_DEPTH`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let h = (hi - lo) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut worst: Option<f64> = None;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 0..INITIAL_PANELS {
        let x1 = if i + 1 == INITIAL_PANELS { hi } else { lo + h * (i + 1) as f64 };
        let xm = 0.5 * (x0 + x1);
        let (fm, f1) = (f(xm), f(x1));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        match refine(&f, x0, f0, xm, fm, x1, f1, whole, panel_tol, MAX_DEPTH) {
            Ok(v) => total += v,
            Err(est) => {
                worst = Some(worst.map_or(est, |w: f64| w.max(est)));
            }
        }
        x0 = x1;
        f0 = f1;
    }
    match worst {
        Some(estimate) => Err(ThermoError::ToleranceNotMet { estimate, tol }),
        None => Ok(sign * total),
    }
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> std::result::Result<f64, f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let roundoff = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if delta.abs() <= 15.0 * tol || delta.abs() <= roundoff || lm <= a || rm >= b {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || !delta.is_finite() {
        return Err(if delta.is_finite() { delta.abs() / 15.0 } else { f64::INFINITY });
    }
    let l = refine(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1);
    let r = refine(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
    match (l, r) {
        (Ok(x), Ok(y)) => Ok(x + y),
        (Err(x), Err(y)) => Err(x.max(y)),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}
