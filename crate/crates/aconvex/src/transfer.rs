//! The spectral engine.
//!
//! Two discretizations of the weighted transfer operator
//! F_s f = Σ_k (ψ_k')^s · f∘ψ_k are kept side by side:
//!
//! * nodal collocation ([`apply_transfer`], [`Collocation`]) evaluates the
//!   sum at grid nodes with linear interpolation of f; cheap, used for
//!   function iteration, probes, and density refinement;
//! * the Ulam-type matrix ([`build_ulam`]) averages F_s over uniform cells,
//!   giving a non-negative matrix whose left and right leading vectors carry
//!   the conformal weights and the invariant density.
//!
//! They must agree on the leading eigenvalue; disagreement flags a
//! discretization artifact (typically near an indifferent fixed point).

use crate::grid::{ConformalWeights, GridFunction};
use crate::map_model::PiecewiseMap;
use crate::numeric::Side;
use crate::quad::{adaptive_gl15, composite_midpoint};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance for each Ulam entry's quadrature.
const ENTRY_TOL: f64 = 1e-10;
/// Hard cap on power-iteration steps, regardless of the caller's budget.
const ITER_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("density mass on [0,β] is {mass:.3e}; cannot normalize the restriction")]
    DensityVanishes { mass: f64 },
}

/// Sparse row-major Ulam matrix with its transpose cached for left iteration.
#[derive(Debug, Clone)]
pub struct UlamMatrix {
    n: usize,
    s: f64,
    rows: Vec<Vec<(u32, f64)>>,
    cols: Vec<Vec<(u32, f64)>>,
    fallback_entries: usize,
}

impl UlamMatrix {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    /// Entries whose adaptive quadrature failed to converge and fell back to
    /// a fixed midpoint rule.
    pub fn fallback_entries(&self) -> usize {
        self.fallback_entries
    }
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(i, v)| v * x[i as usize]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.cols
            .iter()
            .map(|col| col.iter().map(|&(j, v)| v * x[j as usize]).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(_, v)| v).sum())
            .collect()
    }

    pub fn row(&self, j: usize) -> &[(u32, f64)] {
        &self.rows[j]
    }
}

/// L_{ji} = (1/|I_j|) ∫_{I_j} Σ_k (ψ_k'(x))^s χ_{I_i}(ψ_k x) dx over uniform
/// cells. Per (row, branch), the x-interval where ψ_k lands in cell i is
/// bracketed by forward-mapping the cell edges, and the weight is integrated
/// adaptively there; rows are assembled in parallel.
pub fn build_ulam(map: &PiecewiseMap, s: f64, n: usize) -> UlamMatrix {
    assert!(n >= 16, "need at least 16 cells");
    assert!(s > 0.0, "the weight exponent must be positive");
    let h = 1.0 / n as f64;

    let assembled: Vec<(Vec<(u32, f64)>, usize)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut entries: Vec<(u32, f64)> = Vec::new();
            let mut fallbacks = 0usize;
            let (row_lo, row_hi) = (j as f64 * h, (j + 1) as f64 * h);
            for k in 1..=map.branch_count() {
                let (ilo, ihi) = map.branch_image(k);
                let w_lo = row_lo.max(ilo);
                let w_hi = row_hi.min(ihi);
                if w_hi <= w_lo {
                    continue;
                }
                // ψ_k is the true inverse on [w_lo, w_hi].
                let p_lo = map.inverse_branch(k, w_lo);
                let p_hi = map.inverse_branch(k, w_hi);
                let i_first = ((p_lo * n as f64).floor() as usize).min(n - 1);
                let i_last = ((p_hi * n as f64).floor() as usize).min(n - 1);
                for i in i_first..=i_last {
                    let c_lo = p_lo.max(i as f64 * h);
                    let c_hi = p_hi.min((i + 1) as f64 * h);
                    if c_hi <= c_lo {
                        continue;
                    }
                    let x_lo = map.branch_value(k, c_lo).clamp(w_lo, w_hi);
                    let x_hi = map.branch_value(k, c_hi).clamp(w_lo, w_hi);
                    if x_hi - x_lo <= f64::EPSILON * h {
                        continue;
                    }
                    let mut f = |x: f64| map.inverse_branch_deriv(k, x).powf(s);
                    let out = adaptive_gl15(&mut f, x_lo, x_hi, ENTRY_TOL);
                    let value = if out.converged {
                        out.value
                    } else {
                        fallbacks += 1;
                        composite_midpoint(&mut f, x_lo, x_hi, 1 << 10)
                    };
                    if value > 0.0 {
                        merge_entry(&mut entries, i as u32, value * n as f64);
                    }
                }
            }
            entries.sort_unstable_by_key(|&(i, _)| i);
            (entries, fallbacks)
        })
        .collect();

    let mut rows = Vec::with_capacity(n);
    let mut fallback_entries = 0;
    for (row, f) in assembled {
        rows.push(row);
        fallback_entries += f;
    }
    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (j, row) in rows.iter().enumerate() {
        for &(i, v) in row {
            cols[i as usize].push((j as u32, v));
        }
    }
    UlamMatrix { n, s, rows, cols, fallback_entries }
}

fn merge_entry(entries: &mut Vec<(u32, f64)>, i: u32, v: f64) {
    if let Some(e) = entries.iter_mut().find(|e| e.0 == i) {
        e.1 += v;
    } else {
        entries.push((i, v));
    }
}

/// Leading eigendata of the discretized operator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub s: f64,
    pub n: usize,
    pub gamma: f64,
    /// Discrete conformal weights (left vector, mass one).
    pub ms_weights: Vec<f64>,
    /// Invariant density (right vector at nodes, unit mass against
    /// `ms_weights`).
    pub density: GridFunction,
    pub residual_left: f64,
    pub residual_right: f64,
    pub iterations: usize,
    pub peripheral_count: usize,
    /// Union of cells carrying more than 10× the median weight density;
    /// heuristic support of the conformal measure.
    pub support_estimate: Vec<(f64, f64)>,
    pub converged: bool,
    pub cesaro_used: bool,
    /// More than 99% of the mass sits in two adjacent cells; equilibrium
    /// claims downstream are unreliable in this nearly-atomic regime.
    pub ms_near_atomic: bool,
}

struct PowerOutcome {
    vector: Vec<f64>,
    lambda: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    cesaro_used: bool,
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Power iteration with L¹ normalization. A Cesàro average over doubling
/// windows is tested alongside the plain iterate: near an indifferent fixed
/// point the plain ratio decays polynomially while the averaged iterate
/// settles first.
fn power_iterate<F: Fn(&[f64]) -> Vec<f64>>(
    op: F,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> PowerOutcome {
    let n = start.len();
    let mut x = start;
    let norm = l1(&x);
    assert!(norm > 0.0);
    x.iter_mut().for_each(|v| *v /= norm);

    let mut cesaro = vec![0.0; n];
    let mut cesaro_len = 0usize;
    let mut window = 64usize;
    let mut best: Option<PowerOutcome> = None;
    let max_iter = max_iter.min(ITER_CAP);

    let consider = |cand: PowerOutcome, best: &mut Option<PowerOutcome>| {
        if best.as_ref().is_none_or(|b| cand.residual < b.residual) {
            *best = Some(cand);
        }
    };

    for it in 1..=max_iter {
        let y = op(&x);
        let dot_xy: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        let dot_xx: f64 = x.iter().map(|v| v * v).sum();
        let lambda = dot_xy / dot_xx;
        let residual: f64 = y.iter().zip(&x).map(|(a, b)| (a - lambda * b).abs()).sum();
        let scale = lambda.abs().max(1e-300);
        if residual <= tol * scale {
            return PowerOutcome { vector: x, lambda, residual, iterations: it, converged: true, cesaro_used: false };
        }
        consider(
            PowerOutcome {
                vector: x.clone(),
                lambda,
                residual,
                iterations: it,
                converged: false,
                cesaro_used: false,
            },
            &mut best,
        );

        let y_norm = l1(&y);
        if !(y_norm > 1e-300) {
            // The operator annihilated the iterate (possible after
            // deflation): report a zero eigenvalue.
            return PowerOutcome { vector: x, lambda: 0.0, residual: 0.0, iterations: it, converged: true, cesaro_used: false };
        }
        x = y;
        x.iter_mut().for_each(|v| *v /= y_norm);

        for (c, v) in cesaro.iter_mut().zip(&x) {
            *c += v;
        }
        cesaro_len += 1;
        if cesaro_len == window {
            let mut c = cesaro.clone();
            let cn = l1(&c);
            if cn > 1e-300 {
                c.iter_mut().for_each(|v| *v /= cn);
                let yc = op(&c);
                let dot: f64 = yc.iter().zip(&c).map(|(a, b)| a * b).sum();
                let cc: f64 = c.iter().map(|v| v * v).sum();
                let lam = dot / cc;
                let res: f64 = yc.iter().zip(&c).map(|(a, b)| (a - lam * b).abs()).sum();
                if res <= tol * lam.abs().max(1e-300) {
                    return PowerOutcome { vector: c, lambda: lam, residual: res, iterations: it, converged: true, cesaro_used: true };
                }
                consider(
                    PowerOutcome { vector: c, lambda: lam, residual: res, iterations: it, converged: false, cesaro_used: true },
                    &mut best,
                );
            }
            cesaro.iter_mut().for_each(|v| *v = 0.0);
            cesaro_len = 0;
            window *= 2;
        }
    }
    let mut out = best.expect("at least one iteration ran");
    out.iterations = max_iter;
    out
}

/// Extract γ, the conformal weights, and the density from an Ulam matrix by
/// two-sided power iteration; peripheral eigenvalues are counted by Wielandt
/// deflation.
pub fn leading_spectrum(l: &UlamMatrix, tol: f64, max_iter: usize) -> SpectralResult {
    let n = l.n;
    let start = vec![1.0 / n as f64; n];
    let right = power_iterate(|x| l.matvec(x), start.clone(), tol, max_iter);
    let left = power_iterate(|x| l.matvec_transpose(x), start, tol, max_iter);

    // Both vectors arise from positive starts under a non-negative matrix;
    // strip sign noise.
    let mut u: Vec<f64> = right.vector.iter().map(|v| v.max(0.0)).collect();
    let w: Vec<f64> = left.vector.iter().map(|v| v.max(0.0)).collect();
    let w_mass = l1(&w);
    let ms_weights: Vec<f64> = w.iter().map(|v| v / w_mass).collect();

    // γ = ⟨w, L𝟙⟩ / ⟨w, 𝟙⟩ with the normalized left vector.
    let gamma: f64 = ms_weights
        .iter()
        .zip(l.row_sums())
        .map(|(w, rs)| w * rs)
        .sum();

    // Nodes from cell values; unit mass against the conformal weights.
    let u_mass = l1(&u);
    if u_mass > 0.0 {
        u.iter_mut().for_each(|v| *v /= u_mass);
    }
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(u[0]);
    for j in 1..n {
        nodes.push(0.5 * (u[j - 1] + u[j]));
    }
    nodes.push(u[n - 1]);
    let mut density = GridFunction::new(n, nodes);
    let weights = ConformalWeights::from_vec(ms_weights.clone());
    let mass = weights.integral_of(&density);
    if mass > 1e-300 {
        density.scale(1.0 / mass);
    }

    let peripheral_count = count_peripheral(l, gamma, &right.vector, &left.vector, tol);
    let support_estimate = support_from_weights(&ms_weights, n);
    let ms_near_atomic = ms_weights
        .windows(2)
        .any(|p| p[0] + p[1] > 0.99);

    SpectralResult {
        s: l.s,
        n,
        gamma,
        ms_weights,
        density,
        residual_left: left.residual,
        residual_right: right.residual,
        iterations: right.iterations.max(left.iterations),
        peripheral_count,
        support_estimate,
        converged: right.converged && left.converged,
        cesaro_used: right.cesaro_used || left.cesaro_used,
        ms_near_atomic,
    }
}

/// Count eigenvalues with modulus ≥ (1 − 10·tol)·γ by repeated Wielandt
/// deflation (at most 8), starting from the leading pair.
fn count_peripheral(l: &UlamMatrix, gamma: f64, u0: &[f64], w0: &[f64], tol: f64) -> usize {
    let n = l.n;
    let threshold = (1.0 - 10.0 * tol) * gamma;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = vec![(u0.to_vec(), w0.to_vec(), gamma)];
    let mut count = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);

    for _ in 0..8 {
        let deflate = |x: &[f64], transpose: bool| -> Vec<f64> {
            let mut y = if transpose { l.matvec_transpose(x) } else { l.matvec(x) };
            for (u, w, lam) in &pairs {
                let (proj_vec, onto) = if transpose { (u, w) } else { (w, u) };
                let denom: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
                if denom.abs() < 1e-300 {
                    continue;
                }
                let c: f64 = proj_vec.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / denom;
                for (yi, oi) in y.iter_mut().zip(onto) {
                    *yi -= lam * c * oi;
                }
            }
            y
        };
        let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sub = power_iterate(|x| deflate(x, false), start.clone(), tol.max(1e-10), 4000);
        if sub.lambda.abs() < threshold {
            break;
        }
        let sub_left = power_iterate(|x| deflate(x, true), start, tol.max(1e-10), 4000);
        count += 1;
        pairs.push((sub.vector, sub_left.vector, sub.lambda));
    }
    count
}

fn support_from_weights(w: &[f64], n: usize) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let cut = (10.0 / n as f64) * median;
    let h = 1.0 / n as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &wi) in w.iter().enumerate() {
        if wi > cut {
            let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
            match out.last_mut() {
                Some(last) if last.1 >= lo - 0.5 * h => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
    }
    out
}

/// One application of F_s at the nodes of `f`'s grid.
pub fn apply_transfer(map: &PiecewiseMap, s: f64, f: &GridFunction) -> GridFunction {
    assert!(s > 0.0);
    GridFunction::from_fn(f.n_cells(), |x| {
        (1..=map.branch_count())
            .map(|k| {
                let w = map.inverse_branch_deriv(k, x);
                if w > 0.0 {
                    w.powf(s) * f.eval(map.inverse_branch(k, x))
                } else {
                    0.0
                }
            })
            .sum()
    })
}

/// Precomputed collocation data: per node, the surviving branch terms as
/// (weight^s, preimage). Repeated applications of F_s then cost one
/// interpolation per term.
pub struct Collocation {
    n: usize,
    s: f64,
    terms: Vec<Vec<(f64, f64)>>,
}

pub fn collocation(map: &PiecewiseMap, s: f64, n: usize) -> Collocation {
    assert!(s > 0.0);
    let terms = (0..=n)
        .into_par_iter()
        .map(|j| {
            let x = j as f64 / n as f64;
            (1..=map.branch_count())
                .filter_map(|k| {
                    let w = map.inverse_branch_deriv(k, x);
                    (w > 0.0).then(|| (w.powf(s), map.inverse_branch(k, x)))
                })
                .collect()
        })
        .collect();
    Collocation { n, s, terms }
}

impl Collocation {
    pub fn n_cells(&self) -> usize {
        self.n
    }
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        assert_eq!(f.n_cells(), self.n);
        let values = self
            .terms
            .iter()
            .map(|terms| terms.iter().map(|&(w, p)| w * f.eval(p)).sum())
            .collect();
        GridFunction::new(self.n, values)
    }

    /// Growth rate of the iteration f ↦ F_s f started at 𝟙, read off the
    /// Lebesgue-integral ratio; Cesàro-averaged iterates take over when the
    /// plain ratio converges only polynomially.
    pub fn gamma_estimate(&self, tol: f64, max_iter: usize) -> (f64, bool, usize) {
        let mut f = GridFunction::ones(self.n);
        let mut cesaro = GridFunction::constant(self.n, 0.0);
        let mut cesaro_len = 0usize;
        let mut window = 64usize;
        let mut prev_ratio = f64::NAN;
        let mut prev_cesaro_gamma = f64::NAN;
        let mut last = f64::NAN;
        let max_iter = max_iter.min(ITER_CAP);

        for it in 1..=max_iter {
            let g = self.apply(&f);
            let ratio = g.integral() / f.integral();
            last = ratio;
            if (ratio - prev_ratio).abs() <= tol * ratio.abs().max(1e-300) {
                return (ratio, true, it);
            }
            prev_ratio = ratio;
            f = g;
            let mass = f.integral();
            if mass > 1e-300 {
                f.scale(1.0 / mass);
            }
            cesaro.axpy(1.0, &f);
            cesaro_len += 1;
            if cesaro_len == window {
                let gc = self.apply(&cesaro);
                let gamma_c = gc.integral() / cesaro.integral();
                if (gamma_c - prev_cesaro_gamma).abs() <= tol * gamma_c.abs().max(1e-300) {
                    return (gamma_c, true, it);
                }
                prev_cesaro_gamma = gamma_c;
                last = gamma_c;
                cesaro.scale(0.0);
                cesaro_len = 0;
                window *= 2;
            }
        }
        (last, false, max_iter)
    }
}

#[derive(Debug, Clone)]
pub struct DensityResult {
    pub density: GridFunction,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Non-increasing node values up to 1e-6 slack.
    pub in_cone: bool,
}

/// Invariant density by normalized collocation iteration from 𝟙, with a
/// Cesàro average tested over doubling windows; stops when successive
/// iterates differ by less than `tol` in L¹ against `weights`.
pub fn invariant_density(
    map: &PiecewiseMap,
    s: f64,
    n: usize,
    tol: f64,
    max_iter: usize,
    weights: &ConformalWeights,
) -> DensityResult {
    let coll = collocation(map, s, n);
    let (gamma, _, _) = coll.gamma_estimate(tol.min(1e-6), max_iter);
    let normalize = |f: &mut GridFunction| {
        let mass = weights.integral_of(f);
        if mass > 1e-300 {
            f.scale(1.0 / mass);
        }
    };

    let mut f = GridFunction::ones(n);
    normalize(&mut f);
    let mut cesaro = GridFunction::constant(n, 0.0);
    let mut cesaro_len = 0usize;
    let mut window = 64usize;
    let mut best: Option<(GridFunction, f64, usize)> = None;
    let max_iter = max_iter.min(ITER_CAP);
    let mut iterations = max_iter;
    let mut converged = false;

    for it in 1..=max_iter {
        let mut g = coll.apply(&f);
        normalize(&mut g);
        let mut diff = g.clone();
        diff.axpy(-1.0, &f);
        let step = weights.l1_of(&diff);
        if best.as_ref().is_none_or(|b| step < b.1) {
            best = Some((g.clone(), step, it));
        }
        f = g;
        if step < tol {
            iterations = it;
            converged = true;
            break;
        }
        cesaro.axpy(1.0, &f);
        cesaro_len += 1;
        if cesaro_len == window {
            let mut c = cesaro.clone();
            normalize(&mut c);
            let mut gc = coll.apply(&c);
            normalize(&mut gc);
            let mut diff = gc.clone();
            diff.axpy(-1.0, &c);
            let step_c = weights.l1_of(&diff);
            if best.as_ref().is_none_or(|b| step_c < b.1) {
                best = Some((c.clone(), step_c, it));
            }
            if step_c < tol {
                f = c;
                iterations = it;
                converged = true;
                break;
            }
            cesaro.scale(0.0);
            cesaro_len = 0;
            window *= 2;
        }
    }
    let density = if converged {
        let mut d = f;
        normalize(&mut d);
        d
    } else {
        best.expect("at least one iteration").0
    };
    let in_cone = density.is_nonincreasing(1e-6);
    DensityResult { density, gamma, iterations, converged, in_cone }
}

/// (g/A)·χ_{[0,β]} with A = ∫_{[0,β]} g dm̂; the restriction of the density
/// to the forward-invariant core.
pub fn restrict_density_gbeta(
    g: &GridFunction,
    beta: f64,
    weights: &ConformalWeights,
) -> Result<GridFunction, TransferError> {
    let n = g.n_cells();
    let chi = GridFunction::from_fn(n, |x| if x <= beta { g.eval(x) } else { 0.0 });
    // Mass of g on [0,β]: integrate the truncated function, crediting the cut
    // cell linearly.
    let mut mass = 0.0;
    let v = g.values();
    let h = 1.0 / n as f64;
    for (i, w) in weights.weights().iter().enumerate() {
        let lo = i as f64 * h;
        let frac = ((beta - lo) / h).clamp(0.0, 1.0);
        if frac > 0.0 {
            let right = v[i] + frac * (v[i + 1] - v[i]);
            mass += w * frac * 0.5 * (v[i] + right);
        }
    }
    if mass <= 1e-12 {
        return Err(TransferError::DensityVanishes { mass });
    }
    let mut out = chi;
    out.scale(1.0 / mass);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LasotaYorkeOutcome {
    pub alpha: f64,
    pub b_hat: f64,
    pub pass: bool,
    /// Index of the sample attaining b_hat.
    pub worst_sample: usize,
}

/// Probes V(F̄_s f) ≤ α·V(f) + b·‖f‖_{L¹(m̂)} over seeded random cone
/// functions, with α = (1/T'(0) + 1)/2; returns the smallest uniform b̂.
pub fn lasota_yorke_probe(
    map: &PiecewiseMap,
    s: f64,
    gamma: f64,
    weights: &ConformalWeights,
    samples: usize,
    seed: u64,
) -> LasotaYorkeOutcome {
    let n = weights.n_cells();
    let t0 = map.forward_deriv(0.0, Side::Right);
    let alpha = (1.0 / t0 + 1.0) / 2.0;
    let coll = collocation(map, s, n);

    let mut fs = vec![GridFunction::ones(n)];
    fs.extend(random_cone_functions(n, samples.saturating_sub(1), seed));

    let mut b_hat = f64::NEG_INFINITY;
    let mut worst = 0;
    let mut pass = alpha < 1.0;
    for (i, f) in fs.iter().enumerate() {
        let mut barred = coll.apply(f);
        barred.scale(1.0 / gamma);
        let quotient = (barred.variation() - alpha * f.variation()) / weights.l1_of(f);
        if !quotient.is_finite() {
            pass = false;
            continue;
        }
        if quotient > b_hat {
            b_hat = quotient;
            worst = i;
        }
    }
    pass = pass && b_hat.is_finite();
    LasotaYorkeOutcome { alpha, b_hat, pass, worst_sample: worst }
}

/// Endpoint gaps F̄ⁿ χ_{[0,a_k]}(0) − F̄ⁿ χ_{[0,a_k]}(1) for k = 1..N and
/// n = 1..n_iter; decay for every k is the stronger sufficient condition for
/// the endpoint-coupling hypothesis.
pub fn hulse_probe(
    map: &PiecewiseMap,
    s: f64,
    gamma: f64,
    n: usize,
    n_iter: usize,
) -> Vec<Vec<f64>> {
    let coll = collocation(map, s, n);
    map.breakpoints()[1..]
        .iter()
        .map(|&ak| {
            let mut f = GridFunction::indicator_upto(n, ak);
            let mut gaps = Vec::with_capacity(n_iter);
            for _ in 0..n_iter {
                f = coll.apply(&f);
                f.scale(1.0 / gamma);
                gaps.push(f.values()[0] - f.values()[n]);
            }
            gaps
        })
        .collect()
}

/// Seeded random members of the cone of non-negative non-increasing
/// functions: mixtures of downward steps, a linear descent, and a constant.
pub fn random_cone_functions(n: usize, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let steps = rng.gen_range(0..6);
            let mut cuts: Vec<(f64, f64)> = (0..steps)
                .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect();
            cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let slope: f64 = rng.gen_range(0.0..2.0);
            let base: f64 = rng.gen_range(0.0..0.5);
            GridFunction::from_fn(n, |x| {
                let step_part: f64 =
                    cuts.iter().filter(|&&(u, _)| x <= u).map(|&(_, c)| c).sum();
                base + slope * (1.0 - x) + step_part
            })
        })
        .collect()
}

/// Seeded random signed cell vectors for matrix-level identities.
pub fn random_cell_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}
