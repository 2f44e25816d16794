//! Built-in maps.
//!
//! Four maps cover the behaviors the rest of the crate cares about: a
//! two-branch parabolic map with an indifferent fixed point at 1
//! (`example22`), a five-branch map whose last branch is defined implicitly
//! by requiring the inverse-branch derivatives to sum to one (`example24`),
//! the doubling map as the exactly-solvable control (`doubling`), and a
//! convex expanding pair (`ly-convex`).
//!
//! Every closed-form branch ships with its closed-form inverse: inverse
//! derivatives then come from symbolic differentiation of the inverse, which
//! stays accurate at endpoints where the forward slope blows up.

use crate::map_model::{Branch, BranchKind, BranchSpec, MapFile, MonotoneTable, PiecewiseMap};
use crate::quad::simpson_prefix;
use crate::expr;

pub const BUILTIN_NAMES: [&str; 4] = ["example22", "example24", "doubling", "ly-convex"];

/// Look up a built-in map by name.
pub fn builtin(name: &str) -> Option<PiecewiseMap> {
    match name {
        "example22" => Some(example22()),
        "example24" => Some(example24()),
        "doubling" => Some(doubling()),
        "ly-convex" => Some(ly_convex()),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &BUILTIN_NAMES
}

fn closed(expr: &str, inverse: &str) -> BranchSpec {
    BranchSpec::Closed { expr: expr.to_string(), inverse_expr: Some(inverse.to_string()) }
}

fn must_build(file: MapFile) -> PiecewiseMap {
    PiecewiseMap::from_map_file(&file).expect("built-in map must validate")
}

/// Two branches on [0, 1/3) and [1/3, 1]. The first has unbounded slope at
/// 1/3 and the second an indifferent fixed point at 1; the inverse
/// derivatives satisfy ψ₁' + ψ₂' = 1 identically.
fn example22() -> PiecewiseMap {
    must_build(MapFile {
        name: "example22".into(),
        breakpoints: vec!["0".into(), "1/3".into(), "1".into()],
        branches: vec![
            closed(
                "(2 + 3*x - 2*sqrt(1 - 3*x))/3",
                "(1 - (sqrt(4 - 3*x) - 1)^2)/3",
            ),
            closed("x - (3/4)*(1 - x)^2", "(5 - 2*sqrt(4 - 3*x))/3"),
        ],
    })
}

/// Slope-2 full branches; everything downstream has closed-form answers.
fn doubling() -> PiecewiseMap {
    must_build(MapFile {
        name: "doubling".into(),
        breakpoints: vec!["0".into(), "1/2".into(), "1".into()],
        branches: vec![closed("2*x", "x/2"), closed("2*x - 1", "(x + 1)/2")],
    })
}

/// Two convex increasing branches, each vanishing at its cell's lower edge,
/// with T'(0) = 3/2 and no indifferent fixed point.
fn ly_convex() -> PiecewiseMap {
    must_build(MapFile {
        name: "ly-convex".into(),
        breakpoints: vec!["0".into(), "1/2".into(), "1".into()],
        branches: vec![
            closed("x^2 + (3/2)*x", "(sqrt(9/4 + 4*x) - 3/2)/2"),
            closed("(x - 1/2)^2 + (x - 1/2)", "(sqrt(1 + 4*x) - 1)/2 + 1/2"),
        ],
    })
}

/// First inverse-branch derivative of `example24` in closed form:
/// ψ₁'(x) = 2w/(2w + 3) with w = (√(25 − 16x) − 3)/2.
fn ex24_psi1_deriv(x: f64) -> f64 {
    let w = 0.5 * ((25.0 - 16.0 * x).sqrt() - 3.0);
    2.0 * w / (2.0 * w + 3.0)
}

/// Five branches on breakpoints {0, 1/4, 17/60, 2/5, 32/75, 1}. Branches 1-4
/// are closed forms; branch 5 is pinned down by requiring
/// Σ ψᵢ' = 1, so ψ₅(x) = 32/75 + ∫₀ˣ (1 − Σ_{i≤4} ψᵢ') dt, tabulated by
/// Simpson prefix sums per smooth segment and served as a monotone table.
fn example24() -> PiecewiseMap {
    const A4: f64 = 32.0 / 75.0;
    let bp = [
        0.0,
        0.25,
        17.0 / 60.0,
        0.4,
        A4,
        1.0,
    ];

    let mut branches = Vec::with_capacity(5);
    let push_closed = |lo: f64, hi: f64, fwd: &str, inv: &str, k: usize, out: &mut Vec<Branch>| {
        let forward = expr::parse(fwd).unwrap();
        let deriv = expr::differentiate(&forward);
        let inverse = expr::parse(inv).unwrap();
        let inverse_deriv = expr::differentiate(&inverse);
        let kind = BranchKind::Closed {
            forward,
            deriv,
            inverse: Some(inverse),
            inverse_deriv: Some(inverse_deriv),
        };
        out.push(Branch::build(k, lo, hi, kind).expect("closed example24 branch"));
    };
    push_closed(
        bp[0],
        bp[1],
        "(3 - 3*sqrt(1 - 4*x) + 4*x)/4",
        "(1 - ((sqrt(25 - 16*x) - 3)/2)^2)/4",
        1,
        &mut branches,
    );
    push_closed(bp[1], bp[2], "15*x - 15/4", "x/15 + 1/4", 2, &mut branches);
    push_closed(bp[2], bp[3], "(15/2)*x - 17/8", "(2/15)*x + 17/60", 3, &mut branches);
    push_closed(bp[3], bp[4], "15*x - 11/2", "x/15 + 11/30", 4, &mut branches);

    // ψ₅' = 1 − ψ₁' − [x < 7/8]·(1/5 − 1/15) − [x < 9/10]·(1/15) piecewise:
    // the three linear branches contribute 1/15 + 2/15 below 7/8 (where the
    // 1/15 swaps from branch 2 to branch 4 at 1/2 without a jump), 1/15 on
    // [7/8, 9/10), and nothing above. Integrate each smooth segment
    // separately so panels never straddle a jump.
    let segments: [(f64, f64, f64, usize); 3] = [
        (0.0, 0.875, 0.2, 1 << 17),
        (0.875, 0.9, 1.0 / 15.0, 1 << 12),
        (0.9, 1.0, 0.0, 1 << 14),
    ];
    let mut xs = vec![0.0];
    let mut ys = vec![A4];
    for (lo, hi, linear_part, panels) in segments {
        let mut f = |x: f64| 1.0 - ex24_psi1_deriv(x) - linear_part;
        let prefix = simpson_prefix(&mut f, lo, hi, panels);
        let base = *ys.last().unwrap();
        let h = (hi - lo) / panels as f64;
        for (j, v) in prefix.iter().enumerate().skip(1) {
            xs.push(lo + j as f64 * h);
            ys.push(base + v);
        }
    }
    let tail = ys.last_mut().unwrap();
    debug_assert!((*tail - 1.0).abs() < 1e-9, "ψ₅ must reach 1, got {tail}");
    *tail = 1.0;
    *xs.last_mut().unwrap() = 1.0;
    let psi5 = MonotoneTable::new(xs, ys).expect("ψ₅ table is monotone");
    branches.push(Branch::build(5, A4, 1.0, BranchKind::Complement(psi5)).expect("complement branch"));

    PiecewiseMap::assemble("example24".into(), bp.to_vec(), branches).expect("example24 must validate")
}
