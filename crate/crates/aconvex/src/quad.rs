//! Internal quadrature kernels.
//!
//! Everything here integrates plain closures; none of it knows about maps or
//! branches. The adaptive rule is panel-bisected 15-point Gauss-Legendre with
//! an absolute error target; callers that integrate near unbounded-derivative
//! points get a flat midpoint fallback when bisection bottoms out.

use std::sync::OnceLock;

const GL_ORDER: usize = 15;

/// Abscissas (on [-1, 1]) and weights of the 15-point Gauss-Legendre rule,
/// computed once by Newton iteration on the Legendre recurrence.
fn gl15() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static TABLE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = GL_ORDER;
        let mut xs = [0.0; GL_ORDER];
        let mut ws = [0.0; GL_ORDER];
        for i in 0..n {
            // Chebyshev-style initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_deriv(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_deriv(n, x);
            xs[i] = x;
            ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (xs, ws)
    })
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// 15-point Gauss-Legendre on [a, b]. Nodes are strictly interior, so the
/// integrand is never evaluated at the endpoints.
pub(crate) fn gauss15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let (xs, ws) = gl15();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..GL_ORDER {
        acc += ws[i] * f(mid + half * xs[i]);
    }
    acc * half
}

pub(crate) struct QuadOutcome {
    pub value: f64,
    /// False when the error estimate still exceeded `tol` at the split cap.
    pub converged: bool,
}

/// One panel of the global adaptive scheme. `refined` is the two-half
/// estimate, `err` its disagreement with the one-panel estimate.
struct Panel {
    a: f64,
    b: f64,
    refined: f64,
    err: f64,
    depth: u8,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn make_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, coarse: f64, depth: u8) -> Panel {
    let mid = 0.5 * (a + b);
    let refined = gauss15(f, a, mid) + gauss15(f, mid, b);
    Panel { a, b, refined, err: (refined - coarse).abs(), depth }
}

/// Globally adaptive Gauss-Legendre with absolute tolerance `tol`: repeatedly
/// bisect the panel with the largest error estimate. Splitting concentrates
/// where the integrand is rough, so endpoint singularities of integrable type
/// converge without starving the rest of the interval of error budget.
pub(crate) fn adaptive_gl15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> QuadOutcome {
    use std::collections::BinaryHeap;
    const MAX_SPLITS: usize = 4096;

    if !(b > a) {
        return QuadOutcome { value: 0.0, converged: true };
    }
    let coarse = gauss15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(make_panel(f, a, b, coarse, 0));
    let mut total_err: f64 = heap.peek().unwrap().err;

    for _ in 0..MAX_SPLITS {
        if total_err <= tol {
            break;
        }
        let top = heap.pop().unwrap();
        let mid = 0.5 * (top.a + top.b);
        if mid <= top.a || mid >= top.b || top.depth == u8::MAX {
            // Width underflow: no further refinement is possible here.
            heap.push(Panel { err: 0.0, ..top });
            continue;
        }
        total_err -= top.err;
        // The parent's refined estimate already evaluated each half once.
        let left_coarse = gauss15(f, top.a, mid);
        let right_coarse = top.refined - left_coarse;
        let left = make_panel(f, top.a, mid, left_coarse, top.depth + 1);
        let right = make_panel(f, mid, top.b, right_coarse, top.depth + 1);
        total_err += left.err + right.err;
        heap.push(left);
        heap.push(right);
    }

    let value = heap.iter().map(|p| p.refined).sum();
    QuadOutcome { value, converged: total_err <= tol }
}

/// Composite Simpson rule with `panels` equal panels (each panel uses its own
/// midpoint), returning the running prefix integrals at every panel edge.
/// `out[k]` is the integral over [a, a + k*(b-a)/panels].
pub(crate) fn simpson_prefix<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, panels: usize) -> Vec<f64> {
    assert!(panels >= 1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels + 1);
    out.push(0.0);
    let mut acc = 0.0;
    let mut f_lo = f(a);
    for k in 0..panels {
        let x_lo = a + k as f64 * h;
        let x_hi = a + (k + 1) as f64 * h;
        let f_mid = f(0.5 * (x_lo + x_hi));
        let f_hi = f(x_hi);
        acc += (x_hi - x_lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
        out.push(acc);
        f_lo = f_hi;
    }
    out
}

pub(crate) fn composite_midpoint<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        acc += f(a + (k as f64 + 0.5) * h);
    }
    acc * h
}

/// Adaptive Gauss-Legendre returning only the value; for test oracles where
/// the flag does not matter.
#[cfg(test)]
pub(crate) fn integrate<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_gl15(f, a, b, tol).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl15_is_exact_on_high_degree_polynomials() {
        // Degree 29 is the highest degree a 15-point rule integrates exactly.
        let mut f = |x: f64| x.powi(29) + 3.0 * x.powi(12) - x;
        let got = gauss15(&mut f, 0.0, 1.0);
        let want = 1.0 / 30.0 + 3.0 / 13.0 - 0.5;
        assert!((got - want).abs() < 1e-14, "got {got}, want {want}");
    }

    #[test]
    fn adaptive_handles_square_root_singularity() {
        // d/dx sqrt has an integrable singularity at 0.
        let out = adaptive_gl15(&mut |x: f64| 0.5 / x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((out.value - 1.0).abs() < 1e-8, "got {}", out.value);
    }

    #[test]
    fn simpson_prefix_matches_closed_form() {
        let prefix = simpson_prefix(&mut |x: f64| x * x, 0.0, 1.0, 64);
        assert_eq!(prefix.len(), 65);
        for (k, v) in prefix.iter().enumerate() {
            let x = k as f64 / 64.0;
            assert!((v - x * x * x / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_rule_sanity() {
        let got = composite_midpoint(&mut |x: f64| x.exp(), 0.0, 1.0, 4096);
        assert!((got - (std::f64::consts::E - 1.0)).abs() < 1e-7);
    }
}
