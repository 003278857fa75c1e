//! Bracketed root finding for strictly monotone functions on open intervals.

use crate::error::{Error, Result};

/// Bisection stops once the bracket is narrower than this times `1 + |endpoint|`.
pub(crate) const BISECT_REL_WIDTH: f64 = 1e-13;
pub(crate) const MAX_NEWTON_STEPS: usize = 5;
const MAX_BISECTIONS: usize = 4096;
/// Newton stops once its step is below this times `1 + |x|`.
const NEWTON_STEP_TOL: f64 = 1e-15;

/// Bisection for a function that is negative just right of `lo` and positive
/// just left of `hi`. Only interior midpoints are evaluated, so the endpoints
/// may be poles. Returns the final bracket.
pub(crate) fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    for _ in 0..MAX_BISECTIONS {
        let width = hi - lo;
        let mid = lo + 0.5 * width;
        if width <= BISECT_REL_WIDTH * (1.0 + lo.abs().max(hi.abs())) || mid <= lo || mid >= hi {
            return Ok((lo, hi));
        }
        let v = f(mid);
        if v < 0.0 {
            lo = mid;
        } else if v > 0.0 {
            hi = mid;
        } else if v == 0.0 {
            return Ok((mid, mid));
        } else {
            return Err(Error::NoConvergence { lo, hi });
        }
    }
    Err(Error::NoConvergence { lo, hi })
}

/// Up to [`MAX_NEWTON_STEPS`] Newton steps from the bracket midpoint; a step is
/// kept only if it stays inside `[lo, hi]` and reduces the residual.
pub(crate) fn newton_polish<F>(mut value_and_slope: F, lo: f64, hi: f64) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = lo + 0.5 * (hi - lo);
    if lo == hi {
        return x;
    }
    let (mut fx, mut dfx) = value_and_slope(x);
    for _ in 0..MAX_NEWTON_STEPS {
        if fx == 0.0 || !(dfx.is_finite() && dfx != 0.0) {
            break;
        }
        let next = x - fx / dfx;
        if !(next >= lo && next <= hi) || next == x {
            break;
        }
        let (fn_, dfn) = value_and_slope(next);
        if !(fn_.abs() < fx.abs()) {
            break;
        }
        x = next;
        fx = fn_;
        dfx = dfn;
    }
    x
}

/// Root of an increasing `f` on `(lo, hi)`, either end possibly infinite.
/// Infinite ends are replaced by expanding steps `1, 2, 4, …, 2^60` away from
/// the finite end until the sign is right; the bracket is then refined by
/// [`safeguarded_newton`].
pub(crate) fn increasing_root<F, G>(mut f: F, value_and_slope: G, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    G: FnMut(f64) -> (f64, f64),
{
    let (lo, hi) = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => expand(&mut f, lo, 1.0)?,
        (false, true) => expand(&mut f, hi, -1.0)?,
        (false, false) => {
            let (a, b) = expand(&mut f, 0.0, 1.0).or_else(|_| expand(&mut f, 0.0, -1.0))?;
            (a, b)
        }
    };
    safeguarded_newton(value_and_slope, lo, hi)
}

/// Newton iteration confined to a shrinking bracket, for `f` negative just
/// right of `lo` and positive just left of `hi`. A bisection step replaces
/// Newton whenever the Newton point leaves the bracket or the step fails to
/// halve. Endpoints are never evaluated.
pub(crate) fn safeguarded_newton<G>(mut value_and_slope: G, mut lo: f64, mut hi: f64) -> Result<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    if lo == hi {
        return Ok(lo);
    }
    let mut x = lo + 0.5 * (hi - lo);
    let mut last_step = hi - lo;
    for _ in 0..MAX_BISECTIONS {
        let (fx, dfx) = value_and_slope(x);
        if fx < 0.0 {
            lo = x;
        } else if fx > 0.0 {
            hi = x;
        } else if fx == 0.0 {
            return Ok(x);
        } else {
            return Err(Error::NoConvergence { lo, hi });
        }
        let newton = x - fx / dfx;
        let step = (newton - x).abs();
        if step <= NEWTON_STEP_TOL * (1.0 + x.abs()) {
            return Ok(if newton >= lo && newton <= hi { newton } else { x });
        }
        let width = hi - lo;
        if width <= BISECT_REL_WIDTH * (1.0 + lo.abs().max(hi.abs())) {
            return Ok(x);
        }
        let use_newton = newton > lo && newton < hi && step <= 0.5 * last_step;
        let next = if use_newton { newton } else { lo + 0.5 * width };
        last_step = (next - x).abs();
        if next <= lo || next >= hi {
            return Ok(x);
        }
        x = next;
    }
    Err(Error::NoConvergence { lo, hi })
}

/// Walks from `anchor` in `direction` until `f` has the sign expected at the
/// open end, returning an ordered bracket.
fn expand<F>(f: &mut F, anchor: f64, direction: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut inner = anchor;
    let mut step = 1.0f64;
    for _ in 0..=60 {
        let probe = anchor + direction * step;
        let v = f(probe);
        let crossed = if direction > 0.0 { v > 0.0 } else { v < 0.0 };
        if crossed {
            return Ok(if direction > 0.0 { (inner, probe) } else { (probe, inner) });
        }
        if v == 0.0 {
            return Ok((probe, probe));
        }
        inner = probe;
        step *= 2.0;
    }
    let far = anchor + direction * step;
    Err(Error::NoConvergence {
        lo: anchor.min(far),
        hi: anchor.max(far),
    })
}
