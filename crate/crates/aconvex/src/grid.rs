//! Grid functions on uniform nodes and discrete conformal weights.
//!
//! A [`GridFunction`] stores node values at x_j = j/n, j = 0..n, and
//! evaluates by linear interpolation. A [`ConformalWeights`] is a probability
//! vector over the n cells [j/n, (j+1)/n); integrals against it pair cell
//! weights with trapezoid node averages, so that uniform weights reproduce
//! the trapezoid rule exactly.

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GridFunction {
    n: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert!(n >= 1 && values.len() == n + 1, "need n+1 node values");
        GridFunction { n, values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        GridFunction { n, values: vec![c; n + 1] }
    }

    pub fn ones(n: usize) -> Self {
        Self::constant(n, 1.0)
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> Self {
        let values = (0..=n).map(|j| f(j as f64 / n as f64)).collect();
        GridFunction { n, values }
    }

    /// Indicator of [0, b] sampled at nodes (1 where x_j ≤ b, else 0).
    pub fn indicator_upto(n: usize, b: f64) -> Self {
        Self::from_fn(n, |x| if x <= b { 1.0 } else { 0.0 })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Piecewise-linear evaluation, clamped to [0,1].
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.values[0];
        }
        if x >= 1.0 {
            return self.values[self.n];
        }
        let t = x * self.n as f64;
        let j = (t as usize).min(self.n - 1);
        let frac = t - j as f64;
        self.values[j] + frac * (self.values[j + 1] - self.values[j])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Total variation; exact for the piecewise-linear interpolant.
    pub fn variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Trapezoid integral against Lebesgue measure.
    pub fn integral(&self) -> f64 {
        let inner: f64 = self.values[1..self.n].iter().sum();
        (0.5 * (self.values[0] + self.values[self.n]) + inner) / self.n as f64
    }

    /// Index of the first node where the values increase by more than
    /// `slack`, if any.
    pub fn first_increase(&self, slack: f64) -> Option<usize> {
        self.values.windows(2).position(|w| w[1] > w[0] + slack)
    }

    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.first_increase(slack).is_none()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// self ← self + c·other (same grid).
    pub fn axpy(&mut self, c: f64, other: &GridFunction) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }
}

/// Probability weights over the n uniform cells.
#[derive(Debug, Clone)]
pub struct ConformalWeights {
    weights: Vec<f64>,
}

impl ConformalWeights {
    pub fn uniform(n: usize) -> Self {
        ConformalWeights { weights: vec![1.0 / n as f64; n] }
    }

    /// Normalize a non-negative vector to total mass one.
    pub fn from_vec(mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0 && total.is_finite(), "weights must have positive finite mass");
        for w in &mut weights {
            *w /= total;
        }
        ConformalWeights { weights }
    }

    pub fn n_cells(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ f dm̂: cell weight times the trapezoid average of the cell's nodes.
    pub fn integral_of(&self, f: &GridFunction) -> f64 {
        assert_eq!(self.weights.len(), f.n_cells());
        let v = f.values();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * 0.5 * (v[i] + v[i + 1]))
            .sum()
    }

    /// ∫ |f| dm̂ under the same pairing.
    pub fn l1_of(&self, f: &GridFunction) -> f64 {
        assert_eq!(self.weights.len(), f.n_cells());
        let v = f.values();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * 0.5 * (v[i].abs() + v[i + 1].abs()))
            .sum()
    }

    /// Mass of [0, b]: full cells plus the linear share of the cut cell.
    pub fn mass_upto(&self, b: f64) -> f64 {
        let n = self.weights.len() as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let lo = i as f64 / n;
                let hi = (i + 1) as f64 / n;
                let frac = ((b - lo) / (hi - lo)).clamp(0.0, 1.0);
                w * frac
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_integral() {
        let f = GridFunction::from_fn(64, |x| 2.0 * x);
        assert_eq!(f.eval(0.5), 1.0);
        assert!((f.eval(0.3) - 0.6).abs() < 1e-15);
        assert!((f.integral() - 1.0).abs() < 1e-15);
        assert_eq!(f.variation(), 2.0);
        assert!(f.first_increase(1e-12).is_some());
    }

    #[test]
    fn variation_of_steps_and_monotone() {
        let chi = GridFunction::indicator_upto(10, 0.5);
        assert_eq!(chi.variation(), 1.0);
        assert!(GridFunction::ones(8).variation() == 0.0);
        let g = GridFunction::from_fn(32, |x| 1.0 - x * x);
        assert!((g.variation() - 1.0).abs() < 1e-15);
        assert!(g.is_nonincreasing(0.0));
    }

    #[test]
    fn weights_integrate() {
        let w = ConformalWeights::uniform(16);
        let f = GridFunction::from_fn(16, |x| x);
        assert!((w.integral_of(&f) - 0.5).abs() < 1e-15);
        assert!((w.l1_of(&f) - 0.5).abs() < 1e-15);
        assert!((w.mass_upto(0.25) - 0.25).abs() < 1e-15);
        assert!((w.mass_upto(1.0) - 1.0).abs() < 1e-12);
        let skew = ConformalWeights::from_vec(vec![3.0, 1.0]);
        assert_eq!(skew.weights(), &[0.75, 0.25]);
        assert!((skew.mass_upto(0.25) - 0.375).abs() < 1e-15);
    }
}
