//! Stress-axis discretization and cell-averaged density fields.
//!
//! The grid is uniform on `[-L, L]` with an integer number of cells per unit
//! of stress, so the edges at σ = −1, 0 and +1 are exact in binary64. Every
//! field stores one average per cell; integrals are midpoint sums.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Physical and numerical parameters shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Mechanical fragility.
    pub alpha: f64,
    /// Viscosity floor added to the self-consistent diffusion coefficient.
    pub epsilon: f64,
    pub half_width: f64,
    pub n_cells: usize,
    pub tol_mass: f64,
    pub tol_root: f64,
    pub tol_ode: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            epsilon: 0.0,
            half_width: 8.0,
            n_cells: 1600,
            tol_mass: 1e-6,
            tol_root: 1e-12,
            tol_ode: 1e-6,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return invalid(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return invalid(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        for (name, tol) in [
            ("tol_mass", self.tol_mass),
            ("tol_root", self.tol_root),
            ("tol_ode", self.tol_ode),
        ] {
            if !(tol.is_finite() && tol > 0.0) {
                return invalid(format!("{name} must be positive, got {tol}"));
            }
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<StressGrid> {
        build_grid(self.half_width, self.n_cells)
    }
}

/// Uniform cell grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressGrid {
    n_cells: usize,
    per_unit: usize,
}

/// Builds a grid whose edges include σ = −1, 0, +1 exactly.
///
/// `n_cells / (2 · half_width)` must be a positive integer.
pub fn build_grid(half_width: f64, n_cells: usize) -> Result<StressGrid> {
    if !(half_width.is_finite() && half_width > 1.0) {
        return Err(Error::Grid(format!("half_width must exceed 1, got {half_width}")));
    }
    if n_cells == 0 || !n_cells.is_multiple_of(2) {
        return Err(Error::Grid(format!(
            "n_cells must be even and positive, got {n_cells}{}",
            nearest_hint(half_width, n_cells)
        )));
    }
    let ratio = n_cells as f64 / (2.0 * half_width);
    let per_unit = ratio.round();
    let aligned = per_unit >= 1.0 && (ratio - per_unit).abs() <= 1e-9 * ratio;
    if !aligned {
        return Err(Error::Grid(format!(
            "n_cells = {n_cells} does not place σ = ±1 on cell edges for half_width = {half_width} \
             (n_cells / (2·half_width) = {ratio} is not an integer){}",
            nearest_hint(half_width, n_cells)
        )));
    }
    Ok(StressGrid {
        n_cells,
        per_unit: per_unit as usize,
    })
}

/// Human-readable pointer to the closest admissible cell count.
fn nearest_hint(half_width: f64, n_cells: usize) -> String {
    match nearest_admissible_cells(half_width, n_cells) {
        Some(n) => format!("; nearest admissible n_cells is {n}"),
        None => {
            "; no admissible n_cells found near the request, choose a half_width with a small denominator"
                .into()
        }
    }
}

/// Closest cell count `n` with `n / (2·half_width)` a positive integer.
pub fn nearest_admissible_cells(half_width: f64, n_cells: usize) -> Option<usize> {
    if !(half_width.is_finite() && half_width > 1.0) {
        return None;
    }
    let mut best: Option<(usize, usize)> = None;
    for k in 1..=100_000usize {
        let n = 2.0 * half_width * k as f64;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n || !(rounded as usize).is_multiple_of(2) {
            continue;
        }
        let n = rounded as usize;
        let dist = n.abs_diff(n_cells);
        match best {
            Some((_, d)) if d <= dist => {
                if n > n_cells {
                    break;
                }
            }
            _ => best = Some((n, dist)),
        }
    }
    best.map(|(n, _)| n)
}

impl StressGrid {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cells per unit of stress.
    pub fn cells_per_unit(&self) -> usize {
        self.per_unit
    }

    pub fn half_width(&self) -> f64 {
        self.n_cells as f64 / (2.0 * self.per_unit as f64)
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    /// Edge `i` for `i` in `0..=n_cells`.
    pub fn edge(&self, i: usize) -> f64 {
        (i as i64 - (self.n_cells / 2) as i64) as f64 / self.per_unit as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (2 * i as i64 + 1 - self.n_cells as i64) as f64 / (2 * self.per_unit) as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.edge(i)).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Index range of cells inside `[-1, 1]`.
    pub fn inner_range(&self) -> std::ops::Range<usize> {
        let mid = self.n_cells / 2;
        mid - self.per_unit..mid + self.per_unit
    }

    /// Whether cell `i` lies in `{|σ| > 1}`.
    pub fn is_outer(&self, i: usize) -> bool {
        !self.inner_range().contains(&i)
    }

    /// The two cells sharing the edge σ = 0.
    pub fn zero_cells(&self) -> (usize, usize) {
        let mid = self.n_cells / 2;
        (mid - 1, mid)
    }

    /// Index of the cell containing `sigma` (clamped to the grid).
    pub fn locate(&self, sigma: f64) -> usize {
        let pos = (sigma + self.half_width()) * self.per_unit as f64;
        (pos.floor().max(0.0) as usize).min(self.n_cells - 1)
    }
}

/// Nonnegative cell averages of a density on a [`StressGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: StressGrid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: StressGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return invalid(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.n_cells()
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return invalid(format!("density value {v} at cell {i} is negative or not finite"));
        }
        Ok(Self { grid, values })
    }

    /// Construction for values already known to be valid.
    pub(crate) fn from_trusted(grid: StressGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn zeros(grid: StressGrid) -> Self {
        Self::from_trusted(grid, vec![0.0; grid.n_cells()])
    }

    /// Normalized indicator of `[a, b]`, cell-averaged exactly.
    pub fn uniform(grid: StressGrid, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return invalid(format!("uniform support [{a}, {b}] is empty"));
        }
        let height = 1.0 / (b - a);
        let values = (0..grid.n_cells())
            .map(|i| {
                let (el, eh) = (grid.edge(i), grid.edge(i + 1));
                let lo = el.max(a);
                let hi = eh.min(b);
                if lo == el && hi == eh {
                    height
                } else if hi > lo {
                    height * (hi - lo) / grid.cell_width()
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(grid, values)
    }

    /// Normal density with standard deviation `width`, exact cell averages.
    /// The part beyond the grid is dropped, not renormalized.
    pub fn gaussian(grid: StressGrid, mean: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && mean.is_finite()) {
            return invalid(format!(
                "gaussian needs a finite mean and positive width, got ({mean}, {width})"
            ));
        }
        let scale = width * std::f64::consts::SQRT_2;
        // Φ(b) − Φ(a) through erfc so far tails keep relative accuracy.
        let cell_mass = |lo: f64, hi: f64| -> f64 {
            let (zl, zh) = ((lo - mean) / scale, (hi - mean) / scale);
            if zl >= 0.0 {
                0.5 * (libm::erfc(zl) - libm::erfc(zh))
            } else if zh <= 0.0 {
                0.5 * (libm::erfc(-zh) - libm::erfc(-zl))
            } else {
                1.0 - 0.5 * (libm::erfc(-zl) + libm::erfc(zh))
            }
        };
        let dx = grid.cell_width();
        let values = (0..grid.n_cells())
            .map(|i| cell_mass(grid.edge(i), grid.edge(i + 1)).max(0.0) / dx)
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &StressGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.cell_width() * self.values.iter().sum::<f64>()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Rescales to unit mass, returning the factor applied.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return invalid("cannot normalize a field with zero mass");
        }
        let factor = 1.0 / m;
        let values = self.values.iter().map(|v| v * factor).collect();
        Ok((Self::from_trusted(self.grid, values), factor))
    }

    /// Mirror image σ ↦ −σ.
    pub fn reflected(&self) -> Self {
        let values = self.values.iter().rev().copied().collect();
        Self::from_trusted(self.grid, values)
    }

    /// Shift by an integer number of cells; mass leaving the grid is dropped.
    pub fn shifted_cells(&self, cells: i64) -> Self {
        let n = self.values.len() as i64;
        let values = (0..n)
            .map(|i| {
                let j = i - cells;
                if (0..n).contains(&j) {
                    self.values[j as usize]
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_trusted(self.grid, values)
    }

    /// Support edges `[first, last]` of the nonzero cells, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|v| *v > 0.0)?;
        let last = self.values.iter().rposition(|v| *v > 0.0)?;
        Some((self.grid.edge(first), self.grid.edge(last + 1)))
    }

    /// L² distance in σ.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (s * self.grid.cell_width()).sqrt()
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
