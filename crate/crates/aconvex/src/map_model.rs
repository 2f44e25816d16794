//! Piecewise monotone interval maps and their extended inverse branches.
//!
//! A map is a partition 0 = a_0 < … < a_N = 1 together with one strictly
//! increasing branch per cell [a_{k-1}, a_k). Each branch carries its image
//! interval, and every branch is queried through three public lenses:
//! forward value, forward derivative, and the extended inverse ψ_k which
//! clamps to a_{k-1} below the image and to a_k above it.
//!
//! Branch indices in the public API are 1-based throughout, matching the
//! breakpoint convention (branch k sits between a_{k-1} and a_k).

use crate::expr::{self, Expr};
use crate::numeric::{self, Side};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Number of sample pairs used for the load-time monotonicity check.
const MONOTONE_SAMPLES: usize = 10_000;
/// Abscissa tolerance for branch inversion by bisection.
const BISECT_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read map file: {0}")]
    Io(#[from] std::io::Error),
    #[error("map file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("breakpoint {index} (`{text}`) is not a constant arithmetic expression: {why}")]
    BadBreakpoint { index: usize, text: String, why: String },
    #[error("breakpoints must start at 0 and end at 1, got [{first}, …, {last}]")]
    BreakpointRange { first: f64, last: f64 },
    #[error("breakpoints must be strictly increasing; offender at index {index}")]
    UnorderedBreakpoints { index: usize },
    #[error("{got} branches for {expected} partition cells")]
    BranchCount { expected: usize, got: usize },
    #[error("branch {branch}: {source}")]
    BadExpr { branch: usize, source: expr::ParseError },
    #[error("branch {branch} is not strictly increasing near x = {x}")]
    NotIncreasing { branch: usize, x: f64 },
    #[error("branch {branch} failed to evaluate at x = {x}: {why}")]
    EvalFailure { branch: usize, x: f64, why: String },
    #[error("branch {branch} image endpoint {value} lies outside [0,1]")]
    ImageOutOfRange { branch: usize, value: f64 },
    #[error("branch {branch}: supplied inverse disagrees with the branch at x = {x} (|T(ψ(x)) - x| = {err:.3e})")]
    InverseMismatch { branch: usize, x: f64, err: f64 },
    #[error("branch {branch}: {why}")]
    BadTable { branch: usize, why: String },
    #[error("cannot split a branch at {point}: not interior to any partition cell")]
    BadSplitPoint { point: f64 },
}

/// Strictly increasing abscissas with non-decreasing values; evaluation is
/// piecewise linear, clamped outside the node range.
#[derive(Debug, Clone)]
pub struct MonotoneTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl MonotoneTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, String> {
        if xs.len() != ys.len() {
            return Err("node and value lists differ in length".into());
        }
        if xs.len() < 2 {
            return Err("a table needs at least two nodes".into());
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(format!("table abscissas not strictly increasing at x = {}", w[0]));
            }
        }
        for w in ys.windows(2) {
            if !(w[1] >= w[0]) || !w[1].is_finite() {
                return Err(format!("table values decrease near y = {}", w[0]));
            }
        }
        Ok(MonotoneTable { xs, ys })
    }

    fn segment(&self, x: f64) -> usize {
        // Index i with xs[i] <= x < xs[i+1], clamped to valid segments.
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.xs.len() - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.segment(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }

    /// Preimage of `y` under the interpolant (left-most when flat).
    pub fn eval_inverse(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y <= self.ys[0] {
            return self.xs[0];
        }
        if y >= self.ys[n - 1] {
            return self.xs[n - 1];
        }
        let i = match self.ys.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(mut i) => {
                while i > 0 && self.ys[i - 1] == y {
                    i -= 1;
                }
                return self.xs[i];
            }
            Err(i) => i - 1,
        };
        let dy = self.ys[i + 1] - self.ys[i];
        let t = (y - self.ys[i]) / dy;
        self.xs[i] + t * (self.xs[i + 1] - self.xs[i])
    }

    /// Slope of the segment containing `x`; `side` picks the segment at a node.
    pub fn slope_at(&self, x: f64, side: Side) -> f64 {
        let n = self.xs.len();
        let mut i = self.segment(x);
        if side == Side::Left && x <= self.xs[i] && i > 0 {
            i -= 1;
        }
        let _ = n;
        (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i])
    }

    pub fn first_x(&self) -> f64 {
        self.xs[0]
    }
    pub fn last_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }
    pub fn first_y(&self) -> f64 {
        self.ys[0]
    }
    pub fn last_y(&self) -> f64 {
        *self.ys.last().unwrap()
    }

    /// Restrict to [lo, hi] in the abscissa, inserting interpolated end nodes.
    fn clipped(&self, lo: f64, hi: f64) -> MonotoneTable {
        let mut xs = vec![lo];
        let mut ys = vec![self.eval(lo)];
        for (x, y) in self.xs.iter().zip(&self.ys) {
            if *x > lo && *x < hi {
                xs.push(*x);
                ys.push(*y);
            }
        }
        xs.push(hi);
        ys.push(self.eval(hi));
        MonotoneTable { xs, ys }
    }
}

/// How a branch computes its three lenses.
#[derive(Debug, Clone)]
pub enum BranchKind {
    /// Closed-form branch; derivatives are symbolic. When an inverse
    /// expression is supplied, ψ and ψ' come from it directly, which avoids
    /// the cancellation of 1/T'(ψ(x)) near endpoints with unbounded T'.
    Closed {
        forward: Expr,
        deriv: Expr,
        inverse: Option<Expr>,
        inverse_deriv: Option<Expr>,
    },
    /// Branch given as a table of (x, T x) nodes; all lenses are piecewise
    /// linear.
    Forward(MonotoneTable),
    /// Branch defined by its extended inverse ψ as a table, with
    /// ψ' = 1 − Σ_{j≠k} ψ_j' evaluated exactly at query time. Only valid
    /// while the images of all Complement branches in a map are disjoint.
    Complement(MonotoneTable),
}

#[derive(Debug, Clone)]
pub struct Branch {
    lo: f64,
    hi: f64,
    image_lo: f64,
    image_hi: f64,
    kind: BranchKind,
}

impl Branch {
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn image(&self) -> (f64, f64) {
        (self.image_lo, self.image_hi)
    }
    pub fn kind(&self) -> &BranchKind {
        &self.kind
    }
}

#[derive(Debug, Clone)]
pub struct PiecewiseMap {
    name: String,
    breakpoints: Vec<f64>,
    branches: Vec<Branch>,
}

/// On-disk schema: breakpoints are exact rational strings, each branch is
/// either a closed form (with optional closed-form inverse) or a node table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapFile {
    pub name: String,
    pub breakpoints: Vec<String>,
    pub branches: Vec<BranchSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BranchSpec {
    Closed {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inverse_expr: Option<String>,
    },
    Table { table: Vec<(f64, f64)> },
}

/// Load and validate a map from a JSON file.
pub fn load_map<P: AsRef<Path>>(path: P) -> Result<PiecewiseMap, MapError> {
    from_slice(&std::fs::read(path)?)
}

/// Load and validate a map from JSON bytes.
pub fn from_slice(bytes: &[u8]) -> Result<PiecewiseMap, MapError> {
    let file: MapFile = serde_json::from_slice(bytes)?;
    PiecewiseMap::from_map_file(&file)
}

fn parse_breakpoint(index: usize, text: &str) -> Result<f64, MapError> {
    let fail = |why: &str| MapError::BadBreakpoint {
        index,
        text: text.to_string(),
        why: why.to_string(),
    };
    let e = expr::parse(text).map_err(|err| fail(&err.to_string()))?;
    if expr::contains_var(&e) {
        return Err(fail("contains the variable x"));
    }
    expr::eval(&e, 0.0).map_err(|err| fail(&err.to_string()))
}

/// Robust expression evaluation: direct when finite, otherwise the one-sided
/// limit approaching from `side`.
fn eval_or_limit(e: &Expr, x: f64, side: Side) -> Option<f64> {
    if let Ok(v) = expr::eval(e, x) {
        return Some(v);
    }
    numeric::one_sided_limit(|t| expr::eval(e, t).ok().filter(|v| v.is_finite()), x, side)
}

impl PiecewiseMap {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }
    /// Branch k, 1-based.
    pub fn branch(&self, k: usize) -> &Branch {
        &self.branches[k - 1]
    }
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn from_map_file(file: &MapFile) -> Result<PiecewiseMap, MapError> {
        let mut breakpoints = Vec::with_capacity(file.breakpoints.len());
        for (i, text) in file.breakpoints.iter().enumerate() {
            breakpoints.push(parse_breakpoint(i, text)?);
        }
        if breakpoints.len() < 2 {
            return Err(MapError::BreakpointRange {
                first: breakpoints.first().copied().unwrap_or(f64::NAN),
                last: breakpoints.last().copied().unwrap_or(f64::NAN),
            });
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(MapError::BreakpointRange {
                first: breakpoints[0],
                last: *breakpoints.last().unwrap(),
            });
        }
        if let Some(i) = breakpoints.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(MapError::UnorderedBreakpoints { index: i + 1 });
        }
        let cells = breakpoints.len() - 1;
        if file.branches.len() != cells {
            return Err(MapError::BranchCount { expected: cells, got: file.branches.len() });
        }

        let mut branches = Vec::with_capacity(cells);
        for (i, spec) in file.branches.iter().enumerate() {
            let k = i + 1;
            let (lo, hi) = (breakpoints[i], breakpoints[i + 1]);
            let kind = match spec {
                BranchSpec::Closed { expr: src, inverse_expr } => {
                    let forward =
                        expr::parse(src).map_err(|source| MapError::BadExpr { branch: k, source })?;
                    let deriv = expr::differentiate(&forward);
                    let inverse = inverse_expr
                        .as_ref()
                        .map(|s| expr::parse(s))
                        .transpose()
                        .map_err(|source| MapError::BadExpr { branch: k, source })?;
                    let inverse_deriv = inverse.as_ref().map(expr::differentiate);
                    BranchKind::Closed { forward, deriv, inverse, inverse_deriv }
                }
                BranchSpec::Table { table } => {
                    let (xs, ys): (Vec<f64>, Vec<f64>) = table.iter().copied().unzip();
                    let t = MonotoneTable::new(xs, ys)
                        .map_err(|why| MapError::BadTable { branch: k, why })?;
                    if (t.first_x() - lo).abs() > 1e-9 || (t.last_x() - hi).abs() > 1e-9 {
                        return Err(MapError::BadTable {
                            branch: k,
                            why: format!(
                                "table spans [{}, {}] but the cell is [{lo}, {hi}]",
                                t.first_x(),
                                t.last_x()
                            ),
                        });
                    }
                    BranchKind::Forward(t)
                }
            };
            branches.push(Branch::build(k, lo, hi, kind)?);
        }
        PiecewiseMap::assemble(file.name.clone(), breakpoints, branches)
    }

    /// Construct from already-built parts; used by the built-in maps.
    pub(crate) fn assemble(
        name: String,
        breakpoints: Vec<f64>,
        branches: Vec<Branch>,
    ) -> Result<PiecewiseMap, MapError> {
        let map = PiecewiseMap { name, breakpoints, branches };
        map.check_inverses()?;
        Ok(map)
    }

    /// Supplied closed-form inverses must invert their branch.
    fn check_inverses(&self) -> Result<(), MapError> {
        for (i, b) in self.branches.iter().enumerate() {
            let k = i + 1;
            if !matches!(
                b.kind,
                BranchKind::Closed { inverse: Some(_), .. } | BranchKind::Complement(_)
            ) {
                continue;
            }
            let (ilo, ihi) = (b.image_lo, b.image_hi);
            if !(ihi > ilo) {
                continue;
            }
            for j in 1..100 {
                let x = ilo + (ihi - ilo) * j as f64 / 100.0;
                let psi = self.inverse_branch(k, x);
                let back = self.branch_forward(k, psi, Side::Right);
                let err = (back - x).abs();
                if err > 1e-9 {
                    return Err(MapError::InverseMismatch { branch: k, x, err });
                }
            }
        }
        Ok(())
    }

    /// One-sided branch lookup: the 1-based index whose cell contains x.
    pub fn branch_index_at(&self, x: f64, side: Side) -> usize {
        let n = self.branches.len();
        if x >= 1.0 {
            return n;
        }
        if x <= 0.0 {
            return 1;
        }
        // Partition cells are [a_{k-1}, a_k); Left at a breakpoint picks the
        // cell below.
        let i = match self.breakpoints.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => {
                if side == Side::Left {
                    i.saturating_sub(1).max(0)
                } else {
                    i
                }
            }
            Err(i) => i - 1,
        };
        (i + 1).min(n)
    }

    fn branch_forward(&self, k: usize, x: f64, side: Side) -> f64 {
        let b = &self.branches[k - 1];
        match &b.kind {
            BranchKind::Closed { forward, .. } => {
                eval_or_limit(forward, x, side).unwrap_or(f64::NAN)
            }
            BranchKind::Forward(t) => t.eval(x),
            BranchKind::Complement(psi) => {
                // T is the inverse of the ψ interpolant, windowed to the image.
                if x <= psi.first_y() {
                    return b.image_lo;
                }
                if x >= psi.last_y() {
                    return b.image_hi;
                }
                psi.eval_inverse(x).clamp(b.image_lo, b.image_hi)
            }
        }
    }

    /// Value of branch k's formula at x ∈ [a_{k-1}, a_k], approaching from
    /// inside the cell when the formula fails at an edge. Unlike [`apply`],
    /// the branch is chosen by the caller, which is what cell-edge
    /// computations against a specific branch need.
    ///
    /// [`apply`]: PiecewiseMap::apply
    pub fn branch_value(&self, k: usize, x: f64) -> f64 {
        let b = &self.branches[k - 1];
        let side = if x >= b.hi { Side::Left } else { Side::Right };
        self.branch_forward(k, x, side)
    }

    /// T(x), one-sided at breakpoints: Left takes the limit of the branch
    /// below, Right the value of the branch containing x.
    pub fn apply(&self, x: f64, side: Side) -> f64 {
        let k = self.branch_index_at(x, side);
        let b = &self.branches[k - 1];
        if x <= b.lo && side == Side::Right {
            return b.image_lo;
        }
        if x >= b.hi && side == Side::Left {
            return b.image_hi;
        }
        if x >= b.hi {
            // x = 1 on the last cell: closure value, the left limit.
            return b.image_hi;
        }
        self.branch_forward(k, x, side).clamp(0.0, 1.0)
    }

    /// T'(x), one-sided at breakpoints. Unbounded slopes report +∞.
    pub fn forward_deriv(&self, x: f64, side: Side) -> f64 {
        let k = self.branch_index_at(x, side);
        let b = &self.branches[k - 1];
        match &b.kind {
            BranchKind::Closed { deriv, .. } => {
                let inward = if x >= b.hi { Side::Left } else if x <= b.lo { Side::Right } else { side };
                eval_or_limit(deriv, x, inward).unwrap_or(f64::INFINITY)
            }
            BranchKind::Forward(t) => t.slope_at(x, side),
            BranchKind::Complement(_) => {
                let y = self.apply(x, side);
                let d = self.inverse_branch_deriv(k, y);
                if d > 0.0 {
                    1.0 / d
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Extended inverse ψ_k: a_{k-1} below the branch image, a_k above it,
    /// the true branch inverse in between.
    pub fn inverse_branch(&self, k: usize, x: f64) -> f64 {
        let b = &self.branches[k - 1];
        if x <= b.image_lo {
            return b.lo;
        }
        if x >= b.image_hi {
            return b.hi;
        }
        match &b.kind {
            BranchKind::Closed { inverse: Some(inv), .. } => {
                let side = if x - b.image_lo < b.image_hi - x { Side::Right } else { Side::Left };
                eval_or_limit(inv, x, side).map_or(b.lo, |v| v.clamp(b.lo, b.hi))
            }
            BranchKind::Closed { forward, .. } => {
                // Evaluation faults near the cell's top edge mean the formula
                // left its domain; steer the bracket left.
                let mut g = |t: f64| expr::eval(forward, t).unwrap_or(f64::INFINITY);
                numeric::bisect_increasing(&mut g, b.lo, b.hi, x, BISECT_TOL)
            }
            BranchKind::Forward(t) => t.eval_inverse(x),
            BranchKind::Complement(psi) => psi.eval(x).clamp(b.lo, b.hi),
        }
    }

    /// ψ_k': 1/T_k'(ψ_k(x)) inside the open branch image, 0 outside its
    /// closure, one-sided limit values at the image endpoints. Points with
    /// unbounded branch slope yield 0.
    pub fn inverse_branch_deriv(&self, k: usize, x: f64) -> f64 {
        let b = &self.branches[k - 1];
        if x < b.image_lo || x > b.image_hi {
            return 0.0;
        }
        let inward = if x - b.image_lo < b.image_hi - x { Side::Right } else { Side::Left };
        match &b.kind {
            BranchKind::Closed { inverse_deriv: Some(d), .. } => {
                eval_or_limit(d, x, inward).map_or(0.0, |v| v.max(0.0))
            }
            BranchKind::Closed { deriv, .. } => {
                let at = |y: f64| -> Option<f64> {
                    let psi = self.inverse_branch(k, y);
                    let tp = expr::eval(deriv, psi).ok().filter(|v| v.is_finite())?;
                    if tp > 0.0 {
                        Some(1.0 / tp)
                    } else {
                        None
                    }
                };
                match at(x) {
                    Some(v) => v,
                    None => numeric::one_sided_limit(at, x, inward).map_or(0.0, |v| v.max(0.0)),
                }
            }
            BranchKind::Forward(t) => {
                let side = if x >= b.image_hi { Side::Left } else { Side::Right };
                let psi = t.eval_inverse(x);
                let s = t.slope_at(psi, side);
                if s > 0.0 {
                    1.0 / s
                } else {
                    0.0
                }
            }
            BranchKind::Complement(_) => {
                let mut others = 0.0;
                for j in 1..=self.branches.len() {
                    if j == k || matches!(self.branches[j - 1].kind, BranchKind::Complement(_)) {
                        continue;
                    }
                    others += self.inverse_branch_deriv(j, x);
                }
                (1.0 - others).max(0.0)
            }
        }
    }

    /// Closure of the image of branch k.
    pub fn branch_image(&self, k: usize) -> (f64, f64) {
        self.branches[k - 1].image()
    }

    /// Copy with an extra breakpoint at `point`, which must be interior to a
    /// cell; the host branch splits into two branches sharing its formula.
    pub fn split_branch_at(&self, point: f64) -> Result<PiecewiseMap, MapError> {
        let k = self.branch_index_at(point, Side::Right);
        let b = &self.branches[k - 1];
        if !(point > b.lo && point < b.hi) {
            return Err(MapError::BadSplitPoint { point });
        }
        let mid_value = self.branch_forward(k, point, Side::Right).clamp(0.0, 1.0);

        let make = |lo: f64, hi: f64, image_lo: f64, image_hi: f64| -> Branch {
            let kind = match &b.kind {
                BranchKind::Forward(t) => BranchKind::Forward(t.clipped(lo, hi)),
                BranchKind::Complement(psi) => {
                    BranchKind::Complement(psi.clipped(image_lo, image_hi))
                }
                closed => closed.clone(),
            };
            Branch { lo, hi, image_lo, image_hi, kind }
        };
        let lower = make(b.lo, point, b.image_lo, mid_value);
        let upper = make(point, b.hi, mid_value, b.image_hi);

        let mut breakpoints = self.breakpoints.clone();
        breakpoints.insert(k, point);
        let mut branches = self.branches.clone();
        branches.splice(k - 1..k, [lower, upper]);
        Ok(PiecewiseMap { name: self.name.clone(), breakpoints, branches })
    }

    /// SHA-256 over a canonical rendering of the map definition.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0u8]);
        for bp in &self.breakpoints {
            h.update(bp.to_bits().to_le_bytes());
        }
        for b in &self.branches {
            h.update([1u8]);
            h.update(b.image_lo.to_bits().to_le_bytes());
            h.update(b.image_hi.to_bits().to_le_bytes());
            match &b.kind {
                BranchKind::Closed { forward, inverse, .. } => {
                    h.update(forward.to_string().as_bytes());
                    h.update([2u8]);
                    if let Some(inv) = inverse {
                        h.update(inv.to_string().as_bytes());
                    }
                }
                BranchKind::Forward(t) | BranchKind::Complement(t) => {
                    if matches!(b.kind, BranchKind::Complement(_)) {
                        h.update([4u8]);
                    }
                    for (x, y) in t.xs.iter().zip(&t.ys) {
                        h.update(x.to_bits().to_le_bytes());
                        h.update(y.to_bits().to_le_bytes());
                    }
                }
            }
            h.update([3u8]);
        }
        let mut out = String::with_capacity(64);
        for byte in h.finalize() {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

impl Branch {
    /// Validate monotonicity by sampling and compute the image interval.
    pub(crate) fn build(k: usize, lo: f64, hi: f64, kind: BranchKind) -> Result<Branch, MapError> {
        let (image_lo, image_hi) = match &kind {
            BranchKind::Closed { forward, .. } => {
                let mut prev: Option<(f64, f64)> = None;
                for j in 0..=MONOTONE_SAMPLES {
                    let x = lo + (hi - lo) * (j as f64 / (MONOTONE_SAMPLES as f64 + 1.0));
                    let v = expr::eval(forward, x).map_err(|e| MapError::EvalFailure {
                        branch: k,
                        x,
                        why: e.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(MapError::EvalFailure {
                            branch: k,
                            x,
                            why: "non-finite value".into(),
                        });
                    }
                    if let Some((px, pv)) = prev {
                        if !(v > pv) {
                            return Err(MapError::NotIncreasing { branch: k, x: px });
                        }
                    }
                    prev = Some((x, v));
                }
                let ilo = eval_or_limit(forward, lo, Side::Right).ok_or(MapError::EvalFailure {
                    branch: k,
                    x: lo,
                    why: "no right limit at the cell's lower edge".into(),
                })?;
                let ihi = eval_or_limit(forward, hi, Side::Left).ok_or(MapError::EvalFailure {
                    branch: k,
                    x: hi,
                    why: "no left limit at the cell's upper edge".into(),
                })?;
                (ilo, ihi)
            }
            BranchKind::Forward(t) => {
                for w in t.ys.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(MapError::NotIncreasing { branch: k, x: w[0] });
                    }
                }
                (t.first_y(), t.last_y())
            }
            BranchKind::Complement(psi) => {
                // ψ spans the image in x and the cell in y.
                if (psi.first_y() - lo).abs() > 1e-9 || (psi.last_y() - hi).abs() > 1e-9 {
                    return Err(MapError::BadTable {
                        branch: k,
                        why: "inverse table does not span its cell".into(),
                    });
                }
                (psi.first_x(), psi.last_x())
            }
        };
        for v in [image_lo, image_hi] {
            if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(MapError::ImageOutOfRange { branch: k, value: v });
            }
        }
        let image_lo = image_lo.clamp(0.0, 1.0);
        let image_hi = image_hi.clamp(0.0, 1.0);
        if !(image_hi > image_lo) {
            return Err(MapError::NotIncreasing { branch: k, x: lo });
        }
        Ok(Branch { lo, hi, image_lo, image_hi, kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling_json() -> &'static str {
        r#"{
            "name": "d",
            "breakpoints": ["0", "1/2", "1"],
            "branches": [
                { "expr": "2*x" },
                { "expr": "2*x - 1", "inverse_expr": "(x + 1)/2" }
            ]
        }"#
    }

    // Two branches with a square-root slope blow-up at the first cell's top
    // edge, mirroring the shape of the parabolic examples.
    fn curved_json() -> &'static str {
        r#"{
            "name": "curved",
            "breakpoints": ["0", "1/4", "1"],
            "branches": [
                { "expr": "1 - sqrt(1 - 4*x)", "inverse_expr": "(2*x - x^2)/4" },
                { "expr": "(4*x - 1)/3" }
            ]
        }"#
    }

    #[test]
    fn loads_and_reports_images() {
        let m = from_slice(doubling_json().as_bytes()).unwrap();
        assert_eq!(m.branch_count(), 2);
        assert_eq!(m.branch_image(1), (0.0, 1.0));
        assert_eq!(m.branch_image(2), (0.0, 1.0));
        let c = from_slice(curved_json().as_bytes()).unwrap();
        assert_eq!(c.branch_image(1), (0.0, 1.0));
        assert_eq!(c.branch_image(2), (0.0, 1.0));
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        let bad = r#"{
            "name": "bad",
            "breakpoints": ["0", "2/3", "1/3", "1"],
            "branches": [{ "expr": "x" }, { "expr": "x" }, { "expr": "x" }]
        }"#;
        assert!(matches!(
            from_slice(bad.as_bytes()),
            Err(MapError::UnorderedBreakpoints { index: 2 })
        ));
    }

    #[test]
    fn rejects_decreasing_branch() {
        let bad = r#"{
            "name": "bad",
            "breakpoints": ["0", "1"],
            "branches": [{ "expr": "1 - x" }]
        }"#;
        assert!(matches!(from_slice(bad.as_bytes()), Err(MapError::NotIncreasing { branch: 1, .. })));
    }

    #[test]
    fn rejects_wrong_inverse() {
        let bad = r#"{
            "name": "bad",
            "breakpoints": ["0", "1"],
            "branches": [{ "expr": "x", "inverse_expr": "x/2" }]
        }"#;
        assert!(matches!(from_slice(bad.as_bytes()), Err(MapError::InverseMismatch { branch: 1, .. })));
    }

    #[test]
    fn one_sided_application_at_a_breakpoint() {
        let m = from_slice(doubling_json().as_bytes()).unwrap();
        assert_eq!(m.apply(0.5, Side::Left), 1.0);
        assert_eq!(m.apply(0.5, Side::Right), 0.0);
        assert_eq!(m.apply(0.0, Side::Right), 0.0);
        assert_eq!(m.apply(1.0, Side::Left), 1.0);
        assert_eq!(m.apply(0.25, Side::Left), 0.5);
    }

    #[test]
    fn extended_inverse_clamps_and_inverts() {
        let c = from_slice(curved_json().as_bytes()).unwrap();
        // Branch 2 on [1/4, 1] has image [0, 1]: interior inversion by
        // bisection must agree with algebra.
        let x = 0.37;
        assert!((c.inverse_branch(2, x) - (3.0 * x + 1.0) / 4.0).abs() < 1e-12);
        // Branch 1 interior inversion through the supplied closed form.
        assert!((c.inverse_branch(1, 0.5) - (2.0 * 0.5 - 0.25) / 4.0).abs() < 1e-13);
        // Clamping outside the image.
        let m = {
            let half = r#"{
                "name": "half",
                "breakpoints": ["0", "1"],
                "branches": [{ "expr": "x/2" }]
            }"#;
            from_slice(half.as_bytes()).unwrap()
        };
        assert_eq!(m.inverse_branch(1, 0.75), 1.0);
        assert_eq!(m.branch_image(1), (0.0, 0.5));
    }

    #[test]
    fn inverse_derivative_three_cases() {
        let c = from_slice(curved_json().as_bytes()).unwrap();
        // Inside both images the derivatives sum over branches as pullback
        // weights; branch 1's symbolic inverse derivative is (2 - 2x)/4.
        let x = 0.4;
        assert!((c.inverse_branch_deriv(1, x) - (2.0 - 2.0 * x) / 4.0).abs() < 1e-12);
        assert!((c.inverse_branch_deriv(2, x) - 0.75).abs() < 1e-12);
        // At the top image endpoint branch 1's slope is unbounded: ψ' = 0.
        assert_eq!(c.inverse_branch_deriv(1, 1.0), 0.0);
        // Outside a narrower image the derivative vanishes.
        let half = r#"{
            "name": "half",
            "breakpoints": ["0", "1"],
            "branches": [{ "expr": "x/2" }]
        }"#;
        let m = from_slice(half.as_bytes()).unwrap();
        assert_eq!(m.inverse_branch_deriv(1, 0.75), 0.0);
        assert_eq!(m.inverse_branch_deriv(1, 0.25), 2.0);
    }

    #[test]
    fn bisection_matches_closed_form_inverse() {
        // Same branch with and without the closed-form inverse.
        let with = r#"{
            "name": "w",
            "breakpoints": ["0", "1"],
            "branches": [{ "expr": "x^2/2 + x/2", "inverse_expr": "sqrt(1/4 + 2*x) - 1/2" }]
        }"#;
        let without = r#"{
            "name": "wo",
            "breakpoints": ["0", "1"],
            "branches": [{ "expr": "x^2/2 + x/2" }]
        }"#;
        let a = from_slice(with.as_bytes()).unwrap();
        let b = from_slice(without.as_bytes()).unwrap();
        for j in 0..=20 {
            let x = j as f64 / 20.0;
            assert!(
                (a.inverse_branch(1, x) - b.inverse_branch(1, x)).abs() < 1e-12,
                "diverged at {x}"
            );
        }
    }

    #[test]
    fn table_branch_round_trips() {
        let spec = r#"{
            "name": "t",
            "breakpoints": ["0", "1"],
            "branches": [{ "table": [[0.0, 0.0], [0.25, 0.4], [0.5, 0.6], [1.0, 1.0]] }]
        }"#;
        let m = from_slice(spec.as_bytes()).unwrap();
        assert_eq!(m.apply(0.25, Side::Right), 0.4);
        assert!((m.apply(0.375, Side::Right) - 0.5).abs() < 1e-15);
        assert!((m.inverse_branch(1, 0.5) - 0.375).abs() < 1e-15);
        // Slopes: 1.6 then 0.8 then 0.8; ψ' is the reciprocal.
        assert!((m.forward_deriv(0.1, Side::Right) - 1.6).abs() < 1e-12);
        assert!((m.inverse_branch_deriv(1, 0.2) - 1.0 / 1.6).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip_across_the_image_grid() {
        let c = from_slice(curved_json().as_bytes()).unwrap();
        for k in 1..=2 {
            let (ilo, ihi) = c.branch_image(k);
            for j in 1..1000 {
                let x = ilo + (ihi - ilo) * j as f64 / 1000.0;
                let psi = c.inverse_branch(k, x);
                let back = c.apply(psi, Side::Right);
                assert!((back - x).abs() <= 1e-11, "branch {k} at {x}: {back}");
            }
        }
    }

    #[test]
    fn extended_inverse_is_monotone() {
        let c = from_slice(curved_json().as_bytes()).unwrap();
        for k in 1..=2 {
            let mut prev = f64::NEG_INFINITY;
            for j in 0..=10_000 {
                let x = j as f64 / 10_000.0;
                let v = c.inverse_branch(k, x);
                assert!(v >= prev - 1e-13, "branch {k} decreases at {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn inverse_derivative_matches_finite_differences() {
        let c = from_slice(curved_json().as_bytes()).unwrap();
        for k in 1..=2 {
            let (ilo, ihi) = c.branch_image(k);
            for j in 2..=18 {
                let x = ilo + (ihi - ilo) * j as f64 / 20.0;
                let h = 1e-6;
                let fd = (c.inverse_branch(k, x + h) - c.inverse_branch(k, x - h)) / (2.0 * h);
                let sym = c.inverse_branch_deriv(k, x);
                assert!(
                    (fd - sym).abs() <= 1e-4 * (1.0 + sym.abs()),
                    "branch {k} at {x}: fd {fd} vs {sym}"
                );
            }
        }
    }

    #[test]
    fn split_inserts_a_virtual_breakpoint() {
        let m = from_slice(doubling_json().as_bytes()).unwrap();
        let s = m.split_branch_at(0.75).unwrap();
        assert_eq!(s.branch_count(), 3);
        assert_eq!(s.breakpoints(), &[0.0, 0.5, 0.75, 1.0]);
        assert_eq!(s.branch_image(2), (0.0, 0.5));
        assert_eq!(s.branch_image(3), (0.5, 1.0));
        // Dynamics are unchanged.
        for j in 0..=64 {
            let x = j as f64 / 64.0;
            assert_eq!(m.apply(x, Side::Right), s.apply(x, Side::Right));
        }
        // ψ of the two halves clamps where the original kept going.
        assert_eq!(s.inverse_branch(2, 0.8), 0.75);
        assert_eq!(s.inverse_branch(3, 0.2), 0.75);
        assert!(m.split_branch_at(0.5).is_err());
    }

    #[test]
    fn content_hash_is_stable_and_sensitive() {
        let a = from_slice(doubling_json().as_bytes()).unwrap();
        let b = from_slice(doubling_json().as_bytes()).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = from_slice(curved_json().as_bytes()).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
