//! Symbolic dynamics over the branch partition: refined cylinder sets, the
//! decay probe for iterated characteristic functions, conditional
//! expectations against the conformal weights, and the scaling diagnostics
//! of the orbit climbing toward an indifferent endpoint.

use crate::grid::{ConformalWeights, GridFunction};
use crate::map_model::PiecewiseMap;
use crate::numeric::Side;
use crate::transfer::collocation;
use rayon::prelude::*;
use serde::Serialize;

/// Pullback intervals thinner than this are treated as empty words.
const WIDTH_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct Cylinder {
    /// Branch word d_1..d_r, 1-based.
    pub word: Vec<u32>,
    /// Left-closed interval [lo, hi).
    pub lo: f64,
    pub hi: f64,
    pub contains_beta: bool,
}

impl Cylinder {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn make_cylinder(word: Vec<u32>, lo: f64, hi: f64, beta: f64) -> Cylinder {
    // Left-closed test, except that the top cylinder keeps β when β sits at
    // the very end of the space (hi = 1 is not a left endpoint of anything).
    let contains_beta = lo <= beta && (beta < hi || (beta <= hi && hi >= 1.0 - 1e-12));
    Cylinder { word, lo, hi, contains_beta }
}

/// All nonempty depth-r cylinders in increasing position order, built by
/// pulling the depth-(r-1) intervals back through every extended inverse
/// branch and prepending the branch index.
pub fn refine_partition(map: &PiecewiseMap, r: usize, beta: f64) -> Vec<Cylinder> {
    assert!((1..=20).contains(&r), "cylinder count grows as N^r; depth capped at 20");
    let bp = map.breakpoints();
    let mut level: Vec<Cylinder> = (1..=map.branch_count())
        .map(|k| make_cylinder(vec![k as u32], bp[k - 1], bp[k], beta))
        .collect();
    for _ in 1..r {
        let mut next = Vec::with_capacity(level.len() * map.branch_count());
        for k in 1..=map.branch_count() {
            for cyl in &level {
                // ψ_k clamps outside the branch image, so this is exactly
                // I_k ∩ T_k⁻¹ of the old interval.
                let lo = map.inverse_branch(k, cyl.lo);
                let hi = map.inverse_branch(k, cyl.hi);
                if hi - lo > WIDTH_EPS {
                    let mut word = Vec::with_capacity(cyl.word.len() + 1);
                    word.push(k as u32);
                    word.extend_from_slice(&cyl.word);
                    next.push(make_cylinder(word, lo, hi, beta));
                }
            }
        }
        level = next;
    }
    level
}

/// Word of the depth-r cylinder whose interval contains x, by following the
/// forward orbit; breakpoints resolve to the branch on their right.
pub fn cylinder_containing(map: &PiecewiseMap, x: f64, r: usize) -> Vec<u32> {
    assert!((0.0..1.0).contains(&x), "x must lie in [0,1)");
    let mut word = Vec::with_capacity(r);
    let mut p = x;
    for _ in 0..r {
        word.push(map.branch_index_at(p, Side::Right) as u32);
        p = map.apply(p, Side::Right);
    }
    word
}

/// One transfer application evaluated at a single point.
fn transfer_at(map: &PiecewiseMap, s: f64, f: &GridFunction, x: f64) -> f64 {
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
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionBProbe {
    /// M̂_r for r = 1..len: the worst, over depth-r cylinders away from β,
    /// of the smallest normalized sup reached within the iteration budget.
    pub m_hat: Vec<f64>,
    pub nonincreasing: bool,
    /// Depth at which no eligible cylinder existed, truncating the sequence.
    pub truncated_at: Option<usize>,
}

/// For each depth r: M̂_r = max over cylinders with contains_beta = false of
/// min_{1≤n≤n_max} ‖F_sⁿ χ_cyl‖_∞ / γⁿ. Iterates are γ-normalized in place;
/// the sup is the node maximum refined by half-cell samples around the
/// forward orbit of the cylinder endpoints, where the jumps travel.
pub fn condition_b_probe(
    map: &PiecewiseMap,
    s: f64,
    gamma: f64,
    beta: f64,
    r_max: usize,
    n_max: usize,
    n_grid: usize,
) -> ConditionBProbe {
    assert!(gamma > 0.0);
    let coll = collocation(map, s, n_grid);
    let h = 1.0 / n_grid as f64;
    let mut m_hat = Vec::with_capacity(r_max);
    let mut truncated_at = None;

    for r in 1..=r_max {
        let eligible: Vec<Cylinder> = refine_partition(map, r, beta)
            .into_iter()
            .filter(|c| !c.contains_beta)
            .collect();
        if eligible.is_empty() {
            truncated_at = Some(r);
            break;
        }
        let worst = eligible
            .par_iter()
            .map(|cyl| {
                // Cell-averaged sampling of the indicator: node j carries the
                // fraction of [x_j - h/2, x_j + h/2] covered by the cylinder,
                // so the sampled function has exactly the cylinder's mass and
                // the iteration's plateau sits at the true measure instead of
                // half a cell below it.
                let vals: Vec<f64> = (0..=n_grid)
                    .map(|j| {
                        let x = j as f64 * h;
                        let b_lo = (x - 0.5 * h).max(0.0);
                        let b_hi = (x + 0.5 * h).min(1.0);
                        (cyl.hi.min(b_hi) - cyl.lo.max(b_lo)).max(0.0) / (b_hi - b_lo)
                    })
                    .collect();
                let mut f = GridFunction::new(n_grid, vals);
                let (mut lo_orbit, mut hi_orbit) = (cyl.lo, cyl.hi);
                let mut best = f64::INFINITY;
                let mut stall = 0usize;
                for _ in 1..=n_max {
                    let mut g = coll.apply(&f);
                    g.scale(1.0 / gamma);
                    lo_orbit = map.apply(lo_orbit, Side::Right);
                    hi_orbit = map.apply(hi_orbit, Side::Left);
                    let mut sup = g.sup_norm();
                    for p in [
                        lo_orbit - 0.5 * h,
                        lo_orbit + 0.5 * h,
                        hi_orbit - 0.5 * h,
                        hi_orbit + 0.5 * h,
                    ] {
                        if (0.0..=1.0).contains(&p) {
                            sup = sup.max(transfer_at(map, s, &f, p) / gamma);
                        }
                    }
                    f = g;
                    if sup < best * (1.0 - 1e-9) {
                        best = sup;
                        stall = 0;
                    } else {
                        best = best.min(sup);
                        stall += 1;
                        if stall >= 30 {
                            break;
                        }
                    }
                    if best < 1e-14 {
                        break;
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max);
        m_hat.push(worst);
    }

    let nonincreasing = m_hat
        .windows(2)
        .all(|p| p[1] <= p[0] * (1.0 + 1e-9) + 1e-12);
    ConditionBProbe { m_hat, nonincreasing, truncated_at }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicScaling {
    /// w_1..w_len with w_0 = 0 implicit; the inverse orbit under the branch
    /// fixing β.
    pub w: Vec<f64>,
    /// D_r = (Tʳ)'(w_{r+1}), accumulated with the chain rule.
    pub d: Vec<f64>,
    /// Log-log slope of D_r against r over the upper half of the range.
    pub theta_hat: f64,
    /// Same fit over the quarter-to-half window.
    pub theta_hat_early: f64,
    /// False when the two window slopes disagree badly, as they do for
    /// exponential growth.
    pub polynomial: bool,
}

fn loglog_slope(d: &[f64], lo_r: usize, hi_r: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (lo_r..=hi_r.min(d.len()))
        .filter(|&r| d[r - 1] > 0.0)
        .map(|r| ((r as f64).ln(), d[r - 1].ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    cov / var
}

/// Inverse orbit w_{r+1} = ψ_{N*}(w_r) from w_0 = 0 and the chained
/// derivatives D_r along it; the log-log fit of D_r against r estimates the
/// polynomial order of expansion at the endpoint (2 for a quadratic
/// tangency; expanding maps grow exponentially instead and are flagged).
pub fn parabolic_scaling(map: &PiecewiseMap, n_star: usize, r_max: usize) -> ParabolicScaling {
    assert!(r_max >= 4);
    // w_1..w_{r_max+1}: one extra point since D_r is evaluated at w_{r+1}.
    let mut w = Vec::with_capacity(r_max + 1);
    let mut cur = 0.0;
    for _ in 0..=r_max {
        let next = map.inverse_branch(n_star, cur);
        if !w.is_empty() && next <= cur + 1e-16 {
            break;
        }
        w.push(next);
        cur = next;
    }
    // D_r = Π_{k=2}^{r+1} T'(w_k).
    let mut d = Vec::with_capacity(w.len().saturating_sub(1));
    let mut prod = 1.0;
    for wk in w.iter().skip(1) {
        prod *= map.forward_deriv(*wk, Side::Right);
        d.push(prod);
    }
    let r_len = d.len();
    let theta_hat = loglog_slope(&d, (r_len / 2).max(2), r_len);
    let theta_hat_early = loglog_slope(&d, (r_len / 4).max(2), (r_len / 2).max(3));
    let polynomial = (theta_hat - theta_hat_early).abs() <= 0.35 * theta_hat.abs().max(1.0);
    w.truncate(r_max);
    ParabolicScaling { w, d, theta_hat, theta_hat_early, polynomial }
}

/// Node weights implied by the cell weights under the trapezoid pairing:
/// ω_0 = w_0/2, ω_j = (w_{j-1}+w_j)/2, ω_n = w_{n-1}/2.
fn node_weights(ms: &ConformalWeights) -> Vec<f64> {
    let w = ms.weights();
    let n = w.len();
    let mut omega = Vec::with_capacity(n + 1);
    omega.push(0.5 * w[0]);
    for j in 1..n {
        omega.push(0.5 * (w[j - 1] + w[j]));
    }
    omega.push(0.5 * w[n - 1]);
    omega
}

/// Index of the cylinder owning each grid node: left-closed intervals, the
/// final node going to the last cylinder.
fn assign_nodes(cyls: &[Cylinder], n: usize) -> Vec<usize> {
    let mut owner = Vec::with_capacity(n + 1);
    let mut c = 0usize;
    for j in 0..=n {
        let x = j as f64 / n as f64;
        while c + 1 < cyls.len() && x >= cyls[c].hi {
            c += 1;
        }
        owner.push(c);
    }
    owner
}

/// Projection onto functions constant on depth-r cylinders: each node takes
/// its cylinder's weighted average of f. Node membership and node weights
/// reuse the trapezoid pairing, which makes the projection exactly
/// idempotent. Cylinders carrying no weight give the value 0.
pub fn conditional_expectation(
    f: &GridFunction,
    r: usize,
    ms: &ConformalWeights,
    map: &PiecewiseMap,
    beta: f64,
) -> GridFunction {
    let n = f.n_cells();
    assert_eq!(ms.n_cells(), n);
    let cyls = refine_partition(map, r, beta);
    let omega = node_weights(ms);
    let owner = assign_nodes(&cyls, n);
    let mut num = vec![0.0; cyls.len()];
    let mut den = vec![0.0; cyls.len()];
    for j in 0..=n {
        num[owner[j]] += omega[j] * f.values()[j];
        den[owner[j]] += omega[j];
    }
    let avg: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(a, b)| if *b > 1e-300 { a / b } else { 0.0 })
        .collect();
    GridFunction::new(n, (0..=n).map(|j| avg[owner[j]]).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma46Outcome {
    pub pass: bool,
    /// ∫ |f − E(f | depth-r cylinders)| dm̂.
    pub lhs: f64,
    /// c · (M̂_r + m̂ of the all-(N*) word).
    pub rhs: f64,
    pub beta_word_mass: f64,
}

/// Coarse-graining bound: the conditional-expectation error of a function
/// with variation at most c is controlled by the decay sequence plus the
/// mass of the cylinder hugging β.
pub fn lemma46_check(
    f: &GridFunction,
    c: f64,
    r: usize,
    m_hat: &[f64],
    ms: &ConformalWeights,
    map: &PiecewiseMap,
    n_star: usize,
    beta: f64,
) -> Lemma46Outcome {
    assert!(f.variation() <= c + 1e-9, "c must dominate the variation of f");
    assert!(r >= 1 && r <= m_hat.len(), "need M̂_r for the requested depth");
    let e = conditional_expectation(f, r, ms, map, beta);
    let mut diff = f.clone();
    diff.axpy(-1.0, &e);
    let lhs = ms.l1_of(&diff);

    // Interval of the word (N*, N*, ..., N*) by repeated pullback.
    let bp = map.breakpoints();
    let (mut lo, mut hi) = (bp[n_star - 1], bp[n_star]);
    for _ in 1..r {
        lo = map.inverse_branch(n_star, lo);
        hi = map.inverse_branch(n_star, hi);
    }
    let beta_word_mass = (ms.mass_upto(hi) - ms.mass_upto(lo)).max(0.0);

    let rhs = c * (m_hat[r - 1] + beta_word_mass);
    let pass = lhs <= rhs * (1.0 + 1e-6) + 1e-8;
    Lemma46Outcome { pass, lhs, rhs, beta_word_mass }
}

/// Largest m̂-mass among depth-r cylinders away from β; a generating
/// partition drives this to zero as r grows.
pub fn max_cylinder_mass(map: &PiecewiseMap, r: usize, beta: f64, ms: &ConformalWeights) -> f64 {
    refine_partition(map, r, beta)
        .iter()
        .filter(|c| !c.contains_beta)
        .map(|c| (ms.mass_upto(c.hi) - ms.mass_upto(c.lo)).max(0.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::hypotheses::find_beta;
    use crate::transfer::{build_ulam, leading_spectrum, random_cone_functions};

    #[test]
    fn dyadic_cylinders_of_the_doubling_map() {
        let m = builtin("doubling").unwrap();
        let cyls = refine_partition(&m, 3, 1.0);
        assert_eq!(cyls.len(), 8);
        for (i, c) in cyls.iter().enumerate() {
            assert!((c.lo - i as f64 / 8.0).abs() < 1e-15);
            assert!((c.width() - 0.125).abs() < 1e-15);
            assert_eq!(c.word.len(), 3);
            // The word reads off the binary digits of the left endpoint.
            let digits: u32 = c.word.iter().fold(0, |acc, d| 2 * acc + (d - 1));
            assert_eq!(digits as usize, i);
        }
        assert!(cyls[7].contains_beta);
        assert!(cyls[..7].iter().all(|c| !c.contains_beta));
    }

    #[test]
    fn depth_one_matches_branch_domains() {
        let m = builtin("example22").unwrap();
        let cyls = refine_partition(&m, 1, 1.0);
        assert_eq!(cyls.len(), 2);
        assert_eq!((cyls[0].lo, cyls[0].hi), (0.0, 1.0 / 3.0));
        assert_eq!((cyls[1].lo, cyls[1].hi), (1.0 / 3.0, 1.0));
        assert!(!cyls[0].contains_beta);
        assert!(cyls[1].contains_beta);
    }

    #[test]
    fn non_markov_images_forbid_words() {
        let m = builtin("example24").unwrap();
        let cyls = refine_partition(&m, 2, 1.0);
        assert!(cyls.len() < 25);
        // Branch 4's image [1/2, 9/10] meets only the last cell, so exactly
        // 21 of the 25 candidate words survive.
        assert_eq!(cyls.len(), 21);
        let words_4: Vec<&Cylinder> = cyls.iter().filter(|c| c.word[0] == 4).collect();
        assert_eq!(words_4.len(), 1);
        assert_eq!(words_4[0].word, vec![4, 5]);
    }

    #[test]
    fn cylinders_partition_the_interval() {
        for name in ["example22", "example24", "doubling", "ly-convex"] {
            let m = builtin(name).unwrap();
            for r in [1, 2, 3] {
                let cyls = refine_partition(&m, r, 1.0);
                assert!((cyls[0].lo).abs() < 1e-12, "{name}");
                assert!((cyls.last().unwrap().hi - 1.0).abs() < 1e-12, "{name}");
                for pair in cyls.windows(2) {
                    assert!(
                        (pair[1].lo - pair[0].hi).abs() <= 1e-10,
                        "{name} r={r}: gap {} -> {}",
                        pair[0].hi,
                        pair[1].lo
                    );
                }
            }
        }
    }

    #[test]
    fn forward_orbits_of_endpoints_respect_the_word() {
        for name in ["example22", "example24", "doubling"] {
            let m = builtin(name).unwrap();
            let bp = m.breakpoints();
            for cyl in refine_partition(&m, 3, 1.0) {
                for endpoint in [cyl.lo, cyl.hi] {
                    let mut p = endpoint;
                    for &d in &cyl.word {
                        let (lo, hi) = (bp[d as usize - 1], bp[d as usize]);
                        assert!(
                            p >= lo - 1e-11 && p <= hi + 1e-11,
                            "{name}: endpoint orbit left cell {d} at {p}"
                        );
                        // Advance along the word's own branch: an endpoint can
                        // sit on a shared cell boundary where side-based
                        // dispatch would pick the neighbour.
                        p = m.branch_value(d as usize, p.clamp(lo, hi));
                    }
                }
            }
        }
    }

    #[test]
    fn containing_word_agrees_with_the_partition() {
        let m = builtin("doubling").unwrap();
        assert_eq!(cylinder_containing(&m, 0.0, 4), vec![1, 1, 1, 1]);

        let m = builtin("example22").unwrap();
        assert_eq!(cylinder_containing(&m, 0.99, 3), vec![2, 2, 2]);
        // Breakpoints take the branch on their right.
        assert_eq!(cylinder_containing(&m, 1.0 / 3.0, 1), vec![2]);

        // Interval lookup and orbit lookup agree on interior samples.
        let cyls = refine_partition(&m, 3, 1.0);
        for j in 0..50 {
            let x = (j as f64 + 0.31) / 50.0;
            let word = cylinder_containing(&m, x, 3);
            let holder = cyls
                .iter()
                .find(|c| c.lo <= x && x < c.hi)
                .expect("partition covers [0,1)");
            assert_eq!(word, holder.word, "x={x}");
        }
    }

    #[test]
    fn doubling_decay_probe_is_exactly_dyadic() {
        let m = builtin("doubling").unwrap();
        let probe = condition_b_probe(&m, 1.0, 1.0, 1.0, 10, 60, 1024);
        assert_eq!(probe.m_hat.len(), 10);
        assert!(probe.truncated_at.is_none());
        for (r, v) in probe.m_hat.iter().enumerate() {
            assert!(
                (v - 2f64.powi(-(r as i32 + 1))).abs() <= 1e-9,
                "r={}: {v}",
                r + 1
            );
        }
        assert!(probe.nonincreasing);
    }

    #[test]
    fn first_depth_is_bounded_by_the_largest_weight() {
        let m = builtin("example22").unwrap();
        let s = 0.5;
        let gamma = {
            let l = build_ulam(&m, s, 512);
            leading_spectrum(&l, 1e-10, 50_000).gamma
        };
        let probe = condition_b_probe(&m, s, gamma, 1.0, 1, 200, 512);
        // One application of F_s to any characteristic function is bounded
        // by the largest branch weight.
        let bound = (0..=512)
            .map(|j| {
                let x = j as f64 / 512.0;
                (1..=2)
                    .map(|k| m.inverse_branch_deriv(k, x).powf(s))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            / gamma;
        assert!(probe.m_hat[0] <= bound + 1e-9);
    }

    #[test]
    fn parabolic_map_decay_probe_decreases() {
        let m = builtin("example22").unwrap();
        let s = 0.5;
        let gamma = {
            let l = build_ulam(&m, s, 1024);
            leading_spectrum(&l, 1e-10, 50_000).gamma
        };
        let probe = condition_b_probe(&m, s, gamma, 1.0, 8, 2000, 1024);
        assert_eq!(probe.m_hat.len(), 8);
        for pair in probe.m_hat.windows(2) {
            assert!(pair[1] < pair[0], "expected strict decay: {:?}", probe.m_hat);
        }
    }

    #[test]
    fn scaling_exponent_of_the_parabolic_endpoint() {
        let m = builtin("example22").unwrap();
        let b = find_beta(&m).unwrap();
        let p = parabolic_scaling(&b.split_map, b.n_star, 30);
        assert_eq!(p.w.len(), 30);
        assert!((p.w[0] - 1.0 / 3.0).abs() < 1e-12);
        for pair in p.w.windows(2) {
            assert!(pair[1] > pair[0], "w must climb");
        }
        assert!(*p.w.last().unwrap() > 0.9 && *p.w.last().unwrap() < 1.0);
        assert!(p.polynomial, "theta {} vs early {}", p.theta_hat, p.theta_hat_early);
        assert!(
            p.theta_hat > 1.7 && p.theta_hat < 2.3,
            "quadratic tangency should give exponent near 2, got {}",
            p.theta_hat
        );
    }

    #[test]
    fn expanding_map_is_flagged_not_polynomial() {
        let m = builtin("doubling").unwrap();
        let p = parabolic_scaling(&m, 2, 30);
        assert!(!p.polynomial, "2^r growth must not pass as polynomial");
        // D_r = 2^r exactly.
        assert!((p.d[9] - 1024.0).abs() < 1e-6);
    }

    #[test]
    fn conditional_expectation_steps_and_idempotence() {
        let m = builtin("doubling").unwrap();
        let n = 1024;
        let ms = ConformalWeights::uniform(n);
        let f = GridFunction::from_fn(n, |x| x);
        let e = conditional_expectation(&f, 1, &ms, &m, 1.0);
        assert!((e.eval(0.2) - 0.25).abs() <= 1.0 / n as f64, "{}", e.eval(0.2));
        assert!((e.eval(0.8) - 0.75).abs() <= 1.0 / n as f64);

        // Projection of a projection changes nothing.
        let ee = conditional_expectation(&e, 1, &ms, &m, 1.0);
        for (a, b) in ee.values().iter().zip(e.values()) {
            assert!((a - b).abs() <= 1e-10);
        }

        // Constant functions are fixed points of the projection.
        let c = conditional_expectation(&GridFunction::constant(n, 2.5), 4, &ms, &m, 1.0);
        for v in c.values() {
            assert!((v - 2.5).abs() <= 1e-12);
        }

        // Depth 4 projection against a finer partition of the same function.
        let e4 = conditional_expectation(&f, 4, &ms, &m, 1.0);
        let word_mass = 1.0 / 16.0;
        assert!((e4.eval(0.5 + word_mass / 2.0) - (0.5 + word_mass / 2.0)).abs() < 2.0 / n as f64);
    }

    #[test]
    fn coarse_graining_bound_on_the_doubling_map() {
        let m = builtin("doubling").unwrap();
        let n = 1024;
        let ms = ConformalWeights::uniform(n);
        let probe = condition_b_probe(&m, 1.0, 1.0, 1.0, 6, 60, n);
        let f = GridFunction::from_fn(n, |x| 1.0 - x);
        let out = lemma46_check(&f, 1.0, 4, &probe.m_hat, &ms, &m, 2, 1.0);
        assert!(out.pass);
        // Sixteen linear pieces each contribute slope·width²/4.
        assert!((out.lhs - 1.0 / 64.0).abs() <= 1e-3, "lhs {}", out.lhs);
        assert!((out.beta_word_mass - 1.0 / 16.0).abs() <= 1e-9);
        assert!((out.rhs - 0.125).abs() <= 1e-9);

        let flat = GridFunction::constant(n, 0.7);
        let out = lemma46_check(&flat, 1.0, 3, &probe.m_hat, &ms, &m, 2, 1.0);
        assert!(out.pass);
        assert!(out.lhs <= 1e-12);
    }

    #[test]
    fn coarse_graining_bound_on_the_parabolic_map() {
        let m = builtin("example22").unwrap();
        let s = 0.5;
        let n = 1024;
        let spec = {
            let l = build_ulam(&m, s, n);
            leading_spectrum(&l, 1e-10, 50_000)
        };
        let ms = ConformalWeights::from_vec(spec.ms_weights.clone());
        let probe = condition_b_probe(&m, s, spec.gamma, 1.0, 6, 2000, n);
        for (i, f) in random_cone_functions(n, 20, 4601).into_iter().enumerate() {
            // Normalize to unit variation; flat samples are replaced by a
            // simple step to keep the precondition meaningful.
            let v = f.variation();
            let g = if v > 1e-9 {
                let base = f.values()[n];
                let mut g = f.clone();
                g.values_mut().iter_mut().for_each(|x| *x = (*x - base) / v);
                g
            } else {
                GridFunction::indicator_upto(n, 0.5)
            };
            for r in 1..=6 {
                let out = lemma46_check(&g, 1.0, r, &probe.m_hat, &ms, &m, 2, 1.0);
                assert!(
                    out.pass,
                    "sample {i}, depth {r}: lhs {} rhs {}",
                    out.lhs,
                    out.rhs
                );
            }
        }
    }

    #[test]
    fn cylinder_masses_shrink_with_depth() {
        // Generating-partition diagnostic on the built-ins.
        let m = builtin("doubling").unwrap();
        let ms = ConformalWeights::uniform(512);
        let masses: Vec<f64> = (1..=8).map(|r| max_cylinder_mass(&m, r, 1.0, &ms)).collect();
        for (r, pair) in masses.windows(2).enumerate() {
            assert!(pair[1] < pair[0] + 1e-12, "doubling r={}", r + 1);
        }
        assert!((masses[7] - 2f64.powi(-8)).abs() < 1e-6);

        let m = builtin("example24").unwrap();
        let ms = ConformalWeights::uniform(512);
        let masses: Vec<f64> = (1..=8).map(|r| max_cylinder_mass(&m, r, 1.0, &ms)).collect();
        for pair in masses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "example24: {masses:?}");
        }

        let m = builtin("example22").unwrap();
        let l = build_ulam(&m, 0.5, 512);
        let spec = leading_spectrum(&l, 1e-10, 50_000);
        assert!(!spec.ms_near_atomic);
        let ms = ConformalWeights::from_vec(spec.ms_weights);
        let masses: Vec<f64> = (1..=8).map(|r| max_cylinder_mass(&m, r, 1.0, &ms)).collect();
        for pair in masses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "example22: {masses:?}");
        }
    }
}
