//! Adaptive Simpson quadrature with a relative tolerance and a hard cap on
//! the number of accepted subintervals.

use crate::error::{MarketError, Result};

/// Default relative tolerance for integrals of age-cost curves.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Maximum number of accepted subintervals (2^20).
pub const MAX_SUBINTERVALS: usize = 1 << 20;

const MAX_DEPTH: u32 = 60;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// The absolute target is `rel_tol` times the magnitude of a coarse
/// estimate (with a floor of `rel_tol` itself), halved at each bisection.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(MarketError::InvalidArgument(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, rel_tol).map(|v| -v);
    }

    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);

    // Coarse 16-panel composite estimate sets the absolute target so that a
    // lucky zero on the single panel cannot shrink it.
    let coarse = {
        let n = 16;
        let h = (b - a) / n as f64;
        (0..n)
            .map(|i| {
                let lo = a + i as f64 * h;
                let hi = lo + h;
                simpson(lo, hi, f(lo), f(0.5 * (lo + hi)), f(hi)).abs()
            })
            .sum::<f64>()
    };
    let tol = rel_tol * coarse.max(whole.abs()).max(f64::MIN_POSITIVE);

    let mut stack = vec![Panel { a, b, fa, fm, fb, whole, tol, depth: 0 }];
    let mut total = 0.0;
    let mut accepted = 0usize;

    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;

        if delta.abs() <= 15.0 * p.tol || p.depth >= MAX_DEPTH {
            total += left + right + delta / 15.0;
            accepted += 1;
            if accepted > MAX_SUBINTERVALS {
                return Err(MarketError::QuadratureBudget { a, b, max_intervals: MAX_SUBINTERVALS });
            }
        } else {
            if accepted + stack.len() + 2 > MAX_SUBINTERVALS {
                return Err(MarketError::QuadratureBudget { a, b, max_intervals: MAX_SUBINTERVALS });
            }
            let half = 0.5 * p.tol;
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol: half,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol: half,
                depth: p.depth + 1,
            });
        }
    }
    Ok(total)
}
