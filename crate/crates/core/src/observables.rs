use serde::Serialize;

use crate::grid::DensityField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub mass: f64,
    /// D(p) = α ∫_{|σ|>1} p.
    pub fluidity: f64,
    /// τ = ∫ σ p.
    pub mean_stress: f64,
    pub abs_moment: f64,
}

pub fn observables(field: &DensityField, alpha: f64) -> Observables {
    let g = field.grid();
    let dx = g.cell_width();
    let inner = g.inner_range();
    let v = field.values();
    let n = v.len();
    let (mut total, mut outer, mut first, mut abs) = (0.0, 0.0, 0.0, 0.0);
    // moments pair the cell at +σ with its mirror so even data give τ = 0 exactly
    for j in n / 2..n {
        let (hi, lo) = (v[j], v[n - 1 - j]);
        let c = g.center(j);
        total += hi + lo;
        if !inner.contains(&j) {
            outer += hi + lo;
        }
        first += c * (hi - lo);
        abs += c * (hi + lo);
    }
    Observables {
        mass: dx * total,
        fluidity: alpha * dx * outer,
        mean_stress: dx * first,
        abs_moment: dx * abs,
    }
}

/// α times the mass outside [−1, 1].
pub fn fluidity(field: &DensityField, alpha: f64) -> f64 {
    let g = field.grid();
    let inner = g.inner_range();
    let v = field.values();
    let outer: f64 = v[..inner.start].iter().sum::<f64>() + v[inner.end..].iter().sum::<f64>();
    alpha * g.cell_width() * outer
}

pub(crate) fn fluidity_of(values: &[f64], inner: std::ops::Range<usize>, dx: f64, alpha: f64) -> f64 {
    let outer: f64 = values[..inner.start].iter().sum::<f64>() + values[inner.end..].iter().sum::<f64>();
    alpha * dx * outer
}
