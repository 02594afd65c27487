use serde::Serialize;

use crate::error::{invalid, Result};

/// Piecewise-constant function of time: `values[k]` holds on `(knots[k], knots[k+1]]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() + 1 {
            return invalid(format!(
                "step function needs one more knot than values ({} knots, {} values)",
                knots.len(),
                values.len()
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("step function knots must increase strictly");
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("step function values must be finite and nonnegative");
        }
        Ok(Self { knots, values })
    }

    /// The same value `v` on `[0, t_end]`.
    pub fn constant(v: f64, t_end: f64) -> Result<Self> {
        Self::new(vec![0.0, t_end], vec![v])
    }

    /// Values on a uniform grid `k·dt`.
    pub fn uniform(dt: f64, values: Vec<f64>) -> Result<Self> {
        let knots = (0..=values.len()).map(|k| k as f64 * dt).collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().expect("at least two knots")
    }

    fn check(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.end().abs());
        if t < self.start() - slack || t > self.end() + slack {
            return invalid(format!(
                "time {t} outside history range [{}, {}]",
                self.start(),
                self.end()
            ));
        }
        Ok(())
    }

    /// ∫_{t0}^{t1} of the step function, `t0 ≤ t1`.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64> {
        self.check(t0)?;
        self.check(t1)?;
        if t1 <= t0 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let lo = self.knots[k].max(t0);
            let hi = self.knots[k + 1].min(t1);
            if hi > lo {
                acc += v * (hi - lo);
            }
        }
        Ok(acc)
    }
}
