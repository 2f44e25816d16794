//! Pressure, Lyapunov exponent, entropy, the pressure curve in the weight
//! exponent, and duality diagnostics for the normalized operator
//! G f = F(g·f)/(γ·g).
//!
//! The pressure of an exponent s is log γ(s) with γ the leading scale factor
//! of the discretized operator; the Lyapunov exponent integrates log|T'|
//! against the computed absolutely continuous measure; entropy is derived
//! from the two. Duality checks verify that the measure g·m̂ is fixed by the
//! adjoint of the normalized operator and that the log of its weight
//! integrates consistently with the exponent.

use crate::grid::{ConformalWeights, GridFunction};
use crate::map_model::PiecewiseMap;
use crate::numeric::Side;
use crate::transfer::{build_ulam, leading_spectrum, SpectralResult};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Pointwise lower bound demanded of a density before dividing by it.
pub const DENSITY_FLOOR: f64 = 1e-8;

/// Residual tolerance for the spectral runs behind `pressure` and
/// `pressure_curve`.
const SPECTRAL_TOL: f64 = 1e-12;
const SPECTRAL_MAX_ITER: usize = 20_000;

#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("density not bounded below: minimum node value {min:.3e}")]
    DensityNotBoundedBelow { min: f64 },
}

fn run_spectrum(map: &PiecewiseMap, s: f64, n: usize) -> SpectralResult {
    let l = build_ulam(map, s, n);
    leading_spectrum(&l, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
}

/// log γ(s) from a spectral run at resolution `n`, with the run's
/// convergence flag.
pub fn pressure(map: &PiecewiseMap, s: f64, n: usize) -> (f64, bool) {
    let sp = run_spectrum(map, s, n);
    (sp.gamma.ln(), sp.converged)
}

/// Integrand log|T'|·g at a node, one-sided. Falls back to the adjacent
/// cell's interior point when the node value is not finite (a branch endpoint
/// with unbounded slope); an indifferent endpoint contributes log 1 = 0 with
/// no special casing.
fn log_deriv_term(
    map: &PiecewiseMap,
    g: &GridFunction,
    x: f64,
    side: Side,
    interior: f64,
) -> f64 {
    let q = map.forward_deriv(x, side).ln() * g.eval(x);
    if q.is_finite() {
        return q;
    }
    let qi = map.forward_deriv(interior, side).ln() * g.eval(interior);
    if qi.is_finite() {
        qi
    } else {
        0.0
    }
}

/// Lyapunov exponent of the measure with density `g` against the cell
/// weights: the trapezoid pairing of log|T'|·g over each cell, one-sided at
/// the cell edges so breakpoints take the derivative of the branch on the
/// cell's own side. Normalized by ∫g dm̂ so any positive scaling of `g` gives
/// the same exponent.
pub fn lyapunov(map: &PiecewiseMap, g: &GridFunction, ms: &ConformalWeights) -> f64 {
    let n = ms.n_cells();
    assert_eq!(g.n_cells(), n, "density and weights must share a grid");
    let h = 1.0 / n as f64;
    let w = ms.weights();
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        let lo = i as f64 * h;
        let mid = lo + 0.5 * h;
        let q_lo = log_deriv_term(map, g, lo, Side::Right, mid);
        let q_hi = log_deriv_term(map, g, lo + h, Side::Left, mid);
        acc += wi * 0.5 * (q_lo + q_hi);
    }
    acc / ms.integral_of(g)
}

/// h = P + s·λ, the entropy of the measure behind a pressure/exponent pair.
pub fn entropy(s: f64, pressure: f64, lambda: f64) -> f64 {
    pressure + s * lambda
}

/// Pressure, Lyapunov exponent, and entropy sampled over a grid of
/// exponents, with per-point convergence and near-atomic flags.
#[derive(Debug, Clone, Serialize)]
pub struct PressureCurve {
    pub s_values: Vec<f64>,
    pub pressure: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub entropy: Vec<f64>,
    pub converged: Vec<bool>,
    pub ms_near_atomic: Vec<bool>,
}

impl PressureCurve {
    fn converged_points(&self) -> Vec<(f64, f64)> {
        self.s_values
            .iter()
            .zip(&self.pressure)
            .zip(&self.converged)
            .filter(|&(_, &c)| c)
            .map(|((&s, &p), _)| (s, p))
            .collect()
    }

    /// Pressure non-increasing between consecutive converged points, 1e-6
    /// slack. None when fewer than two points converged.
    pub fn nonincreasing(&self) -> Option<bool> {
        let pts = self.converged_points();
        if pts.len() < 2 {
            return None;
        }
        Some(pts.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-6))
    }

    /// Discrete convexity over consecutive converged triples: the middle
    /// point may not exceed the chord through its neighbours by more than
    /// 5e-6, which on an equally spaced grid is the second difference
    /// bounded below by -1e-5. None when fewer than three points converged.
    pub fn convex(&self) -> Option<bool> {
        let pts = self.converged_points();
        if pts.len() < 3 {
            return None;
        }
        Some(pts.windows(3).all(|t| {
            let (s0, p0) = t[0];
            let (s1, p1) = t[1];
            let (s2, p2) = t[2];
            let chord = (p0 * (s2 - s1) + p2 * (s1 - s0)) / (s2 - s0);
            p1 - chord <= 5e-6
        }))
    }

    /// |P(1)| ≤ 2e-2, judged at the grid point s = 1 when present and
    /// converged; None otherwise.
    pub fn p1_zero(&self) -> Option<bool> {
        self.s_values
            .iter()
            .position(|&s| (s - 1.0).abs() <= 1e-9)
            .filter(|&i| self.converged[i])
            .map(|i| self.pressure[i].abs() <= 2e-2)
    }

    /// |P(s)| ≤ 2e-2 at every converged grid point with s ∈ [1, 2]; None
    /// when no such point converged. True exactly when the curve is flat at
    /// zero past s = 1, as it is for maps with an indifferent endpoint.
    pub fn flat_above_one(&self) -> Option<bool> {
        let pts: Vec<f64> = self
            .converged_points()
            .into_iter()
            .filter(|&(s, _)| (1.0 - 1e-9..=2.0 + 1e-9).contains(&s))
            .map(|(_, p)| p)
            .collect();
        if pts.is_empty() {
            return None;
        }
        Some(pts.iter().all(|p| p.abs() <= 2e-2))
    }
}

/// One spectral run per exponent, in parallel. The grid must be strictly
/// increasing and positive.
pub fn pressure_curve(map: &PiecewiseMap, s_grid: &[f64], n: usize) -> PressureCurve {
    assert!(!s_grid.is_empty());
    assert!(s_grid.iter().all(|&s| s > 0.0), "exponents must be positive");
    assert!(
        s_grid.windows(2).all(|p| p[0] < p[1]),
        "exponent grid must be strictly increasing"
    );
    let pts: Vec<(f64, f64, f64, bool, bool)> = s_grid
        .par_iter()
        .map(|&s| {
            let sp = run_spectrum(map, s, n);
            let ms = ConformalWeights::from_vec(sp.ms_weights.clone());
            let p = sp.gamma.ln();
            let lam = lyapunov(map, &sp.density, &ms);
            (p, lam, entropy(s, p, lam), sp.converged, sp.ms_near_atomic)
        })
        .collect();
    PressureCurve {
        s_values: s_grid.to_vec(),
        pressure: pts.iter().map(|p| p.0).collect(),
        lyapunov: pts.iter().map(|p| p.1).collect(),
        entropy: pts.iter().map(|p| p.2).collect(),
        converged: pts.iter().map(|p| p.3).collect(),
        ms_near_atomic: pts.iter().map(|p| p.4).collect(),
    }
}

/// G f = Σ_k (ψ_k')^s·(g·f)∘ψ_k / (γ·g), node-wise on f's grid. Errors when
/// g dips to the floor anywhere, since every node divides by it.
pub fn normalized_operator_apply(
    map: &PiecewiseMap,
    s: f64,
    gamma: f64,
    g_beta: &GridFunction,
    f: &GridFunction,
) -> Result<GridFunction, ThermoError> {
    let min = g_beta.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > DENSITY_FLOOR) {
        return Err(ThermoError::DensityNotBoundedBelow { min });
    }
    Ok(GridFunction::from_fn(f.n_cells(), |x| {
        let mut acc = 0.0;
        for k in 1..=map.branch_count() {
            let w = map.inverse_branch_deriv(k, x);
            if w > 0.0 {
                let p = map.inverse_branch(k, x);
                acc += w.powf(s) * g_beta.eval(p) * f.eval(p);
            }
        }
        acc / (gamma * g_beta.eval(x))
    }))
}

/// ∫ g·f dm̂ on g's grid.
fn mu_integral(ms: &ConformalWeights, g: &GridFunction, f: &GridFunction) -> f64 {
    let prod = GridFunction::from_fn(g.n_cells(), |x| g.eval(x) * f.eval(x));
    ms.integral_of(&prod)
}

/// Max over the test functions of |μ̂(G f) − μ̂(f)| for μ̂ = g·m̂: the
/// measure computed by the spectral run should be fixed by the adjoint of
/// the normalized operator. Returns NaN (check suppressed) when the weights
/// are near-atomic or the density is not bounded below, where the identity's
/// hypotheses fail.
pub fn equilibrium_duality_check(
    map: &PiecewiseMap,
    s: f64,
    spectral: &SpectralResult,
    test_fns: &[GridFunction],
) -> f64 {
    if spectral.ms_near_atomic {
        return f64::NAN;
    }
    let ms = ConformalWeights::from_vec(spectral.ms_weights.clone());
    let g = &spectral.density;
    let mut worst = 0.0f64;
    for f in test_fns {
        let gf = match normalized_operator_apply(map, s, spectral.gamma, g, f) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        worst = worst.max((mu_integral(&ms, g, &gf) - mu_integral(&ms, g, f)).abs());
    }
    worst
}

/// Integrand (−s·log|T'| + log g − log g∘T)·g at a node, one-sided, with the
/// same interior fallback as the Lyapunov integrand.
fn log_weight_term(
    map: &PiecewiseMap,
    g: &GridFunction,
    s: f64,
    x: f64,
    side: Side,
    interior: f64,
) -> f64 {
    let at = |x: f64| -> f64 {
        let t = map.forward_deriv(x, side);
        let gx = g.eval(x);
        (-s * t.ln() + gx.ln() - g.eval(map.apply(x, side)).ln()) * gx
    };
    let q = at(x);
    if q.is_finite() {
        return q;
    }
    let qi = at(interior);
    if qi.is_finite() {
        qi
    } else {
        0.0
    }
}

/// Gap |∫ log ḡ dμ̂ + s·λ(μ̂)| for ḡ = |T'|^{−s}·g/(g∘T) and μ̂ = g·m̂.
/// The log g terms telescope under a T-invariant measure, so the integral
/// should equal −s·λ exactly; the gap measures how far the discretized
/// measure is from that identity. NaN (suppressed) under the same
/// conditions as the duality check.
pub fn lemma54_check(map: &PiecewiseMap, s: f64, spectral: &SpectralResult) -> f64 {
    if spectral.ms_near_atomic {
        return f64::NAN;
    }
    let g = &spectral.density;
    let gmin = g.values().iter().copied().fold(f64::INFINITY, f64::min);
    if !(gmin > DENSITY_FLOOR) {
        return f64::NAN;
    }
    let ms = ConformalWeights::from_vec(spectral.ms_weights.clone());
    let n = ms.n_cells();
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for (i, wi) in ms.weights().iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        let lo = i as f64 * h;
        let mid = lo + 0.5 * h;
        let q_lo = log_weight_term(map, g, s, lo, Side::Right, mid);
        let q_hi = log_weight_term(map, g, s, lo + h, Side::Left, mid);
        acc += wi * 0.5 * (q_lo + q_hi);
    }
    let log_gbar = acc / ms.integral_of(g);
    let lam = lyapunov(map, g, &ms);
    (log_gbar + s * lam).abs()
}
