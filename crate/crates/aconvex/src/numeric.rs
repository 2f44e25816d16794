//! One-sided limits and bracketed root finding.

/// Which side a limit or branch lookup approaches a point from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Approach from below (x ↑ point), or pick the branch left of a breakpoint.
    Left,
    /// Approach from above (x ↓ point), or pick the branch right of a breakpoint.
    Right,
}

/// One-sided limit of `f` at `point`, sampled along x_m = point ∓ 2^{-m} for
/// m = 20..=40 with first-order Richardson extrapolation R_m = 2 v_m - v_{m-1}.
///
/// For values converging like L - c·2^{-m} the raw samples are still ~2^{-40}
/// away from L at the end of the sweep, while the extrapolants carry O(4^{-m})
/// error; acceptance is on successive extrapolants differing by < 1e-9.
/// Returns the last extrapolant even when the acceptance test never fires
/// (callers compare against their own tolerances). `None` means no finite
/// limit: every sample failed, a sample blew past 1e12, or the extrapolants
/// were still wandering by >0.1% relative at the end of the sweep (square-root
/// blow-ups grow too slowly to hit the cap within 21 octaves, so divergence
/// must also be read off the trend).
pub fn one_sided_limit<F: FnMut(f64) -> Option<f64>>(mut f: F, point: f64, side: Side) -> Option<f64> {
    let sign = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let mut prev_value: Option<f64> = None;
    let mut extraps: (Option<f64>, Option<f64>) = (None, None); // (second-to-last, last)
    for m in 20..=40 {
        let x = point + sign * 2f64.powi(-m);
        let Some(v) = f(x) else { continue };
        if !v.is_finite() || v.abs() > 1e12 {
            return None;
        }
        if let Some(pv) = prev_value {
            let r = 2.0 * v - pv;
            if let Some(pr) = extraps.1 {
                if (r - pr).abs() < 1e-9 {
                    return Some(r);
                }
            }
            extraps = (extraps.1, Some(r));
        }
        prev_value = Some(v);
    }
    match extraps {
        (Some(prev), Some(last)) => {
            if (last - prev).abs() > 1e-3 * (1.0 + last.abs()) {
                None
            } else {
                Some(last)
            }
        }
        (None, Some(last)) => Some(last),
        _ => prev_value,
    }
}

/// Bisection for the preimage of `target` under a strictly increasing `f` on
/// [lo, hi], to absolute tolerance `tol` on the abscissa. Assumes
/// f(lo) ≤ target ≤ f(hi); the target is clamped to the bracket values.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, target: f64, tol: f64) -> f64 {
    debug_assert!(lo <= hi);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
