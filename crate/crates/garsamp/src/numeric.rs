//! Shared numeric routines: bracketed root finding, golden-section
//! minimization, one-sided difference quotients and log-sum-exp.

use crate::error::{Error, Result};

pub const ROOT_TOL: f64 = 1e-12;
pub const ROOT_MAX_ITER: usize = 200;
pub const GOLDEN_TOL: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-6;

/// Root of `f` in `[lo, hi]` by bisection, refined by Newton steps when a
/// derivative is supplied. Requires a sign change on the bracket.
pub fn find_root(
    f: &dyn Fn(f64) -> f64,
    df: Option<&dyn Fn(f64) -> f64>,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite values at bracket [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numeric(format!(
            "no sign change on bracket [{lo}, {hi}]: f(lo) = {flo}, f(hi) = {fhi}"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        // Newton step when available and safely inside the bracket.
        let mut stepped = false;
        if let Some(df) = df {
            let fx = f(x);
            let dfx = df(x);
            if dfx.is_finite() && dfx != 0.0 {
                let x_new = x - fx / dfx;
                if x_new.is_finite() && x_new > lo && x_new < hi {
                    // Keep the bracket valid.
                    if fx.signum() == flo.signum() {
                        lo = x;
                        flo = fx;
                    } else {
                        hi = x;
                    }
                    x = x_new;
                    stepped = true;
                }
            }
        }
        if !stepped {
            let fx = f(x);
            if fx == 0.0 {
                return Ok(x);
            }
            if fx.signum() == flo.signum() {
                lo = x;
                flo = fx;
            } else {
                hi = x;
            }
            x = 0.5 * (lo + hi);
        }
        if (hi - lo).abs() <= ROOT_TOL * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "root finder did not converge after {ROOT_MAX_ITER} iterations; bracket [{lo}, {hi}]"
    )))
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_section_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo <= hi) {
        return Err(Error::Numeric(format!("invalid interval [{lo}, {hi}]")));
    }
    if lo == hi {
        let v = f(lo);
        return check_finite(lo, v);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    if !fc.is_finite() || !fd.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite objective in golden section: f({c}) = {fc}, f({d}) = {fd}"
        )));
    }
    while (b - a).abs() > GOLDEN_TOL * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if !fc.is_finite() || !fd.is_finite() {
            return Err(Error::Numeric(
                "non-finite objective in golden section".into(),
            ));
        }
    }
    let x = 0.5 * (a + b);
    check_finite(x, f(x))
}

fn check_finite(x: f64, v: f64) -> Result<(f64, f64)> {
    if v.is_finite() {
        Ok((x, v))
    } else {
        Err(Error::Numeric(format!(
            "non-finite objective value f({x}) = {v}"
        )))
    }
}

/// Minimum of `f` over `[lo, hi]` by dense grid scan followed by
/// golden-section refinement on the winning cell. Used when unimodality of
/// the objective is not certified.
pub fn grid_refine_min(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<(f64, f64)> {
    if lo == hi {
        let v = f(lo);
        return check_finite(lo, v);
    }
    let n = points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let x = lo + step * i as f64;
        let v = f(x);
        if v.is_nan() {
            return Err(Error::Numeric(format!("NaN objective at x = {x}")));
        }
        if v < best {
            best = v;
            best_i = i;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numeric("objective is +inf on the whole grid".into()));
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    golden_section_min(f, a, b)
}

/// Central difference quotient with step `h`.
pub fn central_diff(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// One-sided 3-point difference quotient on the given side of `x`
/// (`side = +1` uses points to the right, `-1` to the left).
pub fn one_sided_diff(f: &dyn Fn(f64) -> f64, x: f64, h: f64, side: f64) -> f64 {
    let s = side.signum();
    (-3.0 * f(x) + 4.0 * f(x + s * h) - f(x + 2.0 * s * h)) / (2.0 * s * h)
}

/// `log(sum(exp(v)))` with the usual max shift.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `n` equally spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Midpoints of `n` equal cells of `[lo, hi]`; stays strictly inside the
/// interval, which keeps grid checks away from branch endpoints.
pub fn open_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(|i| lo + step * (i as f64 + 0.5)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn root_of_exp_shift() {
        // exp(x) = 2 on [-5, 5]
        let f = |x: f64| x.exp() - 2.0;
        let df = |x: f64| x.exp();
        let r = find_root(&f, Some(&df), -5.0, 5.0).unwrap();
        assert_abs_diff_eq!(r, 2.0_f64.ln(), epsilon = 1e-11);
    }

    #[test]
    fn root_requires_sign_change() {
        let f = |x: f64| x * x + 1.0;
        assert!(find_root(&f, None, -1.0, 1.0).is_err());
    }

    #[test]
    fn golden_finds_quadratic_vertex() {
        let (x, v) = golden_section_min(&|x| (x - 2.0) * (x - 2.0), 0.0, 5.0).unwrap();
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn golden_handles_kink() {
        let (x, v) = golden_section_min(&|x: f64| x.abs(), -1.0, 3.0).unwrap();
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [0.1_f64, -2.0, 3.5];
        let direct: f64 = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_abs_diff_eq!(log_sum_exp(&v), direct, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_matches_smooth_derivative() {
        let f = |x: f64| x.exp();
        let d = one_sided_diff(&f, 0.3, FD_STEP, 1.0);
        assert_abs_diff_eq!(d, 0.3_f64.exp(), epsilon = 1e-7);
        let d = one_sided_diff(&f, 0.3, FD_STEP, -1.0);
        assert_abs_diff_eq!(d, 0.3_f64.exp(), epsilon = 1e-7);
    }
}
