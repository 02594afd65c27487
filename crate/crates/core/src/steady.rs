//! Stationary solutions under constant shear and flow curves.
//!
//! For b > 0 and a fixed D > 0 the profile is exponential outside [−1, 1]
//! with rates β± and a combination of 1 and e^{(b/D)σ} inside. Internally
//! the inner pieces use the bases expm1(kσ)/k and expm1(k(σ−1))/k with
//! k = b/D, which stay bounded for both small and large k. Negative shear
//! is handled by σ ↦ −σ.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::evolve::{AdvectionFlux, SpatialOperator};
use crate::grid::{DensityField, StressGrid};
use crate::observables::observables;

/// Below this |b| (with α > 1/2) the zero-shear closed form is used.
pub const SMALL_SHEAR: f64 = 1e-6;
/// Relative bracket width at which the bisection stops.
pub const ROOT_REL_WIDTH: f64 = 1e-12;

/// Piecewise analytic stationary profile for shear b ≥ 0 (mirrored if
/// `mirrored`). Left tail c_l e^{β+(σ+1)}, right tail c_r e^{β−(σ−1)},
/// inner pieces a_l + b_l g(σ) on [−1, 0] and a_r + b_r h(σ) on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyProfile {
    pub d: f64,
    pub b: f64,
    pub alpha: f64,
    beta_plus: f64,
    beta_minus: f64,
    k: f64,
    c_l: f64,
    c_r: f64,
    a_l: f64,
    b_l: f64,
    a_r: f64,
    b_r: f64,
    mirrored: bool,
}

/// expm1(kx)/k, with the k = 0 limit x.
fn gk(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        x
    } else {
        (k * x).exp_m1() / k
    }
}

/// (k + expm1(−k))/k², i.e. −∫_{−1}^0 gk(k, x) dx.
fn phi(k: f64) -> f64 {
    if k < 1e-3 {
        0.5 - k / 6.0 + k * k / 24.0 - k * k * k / 120.0
    } else {
        (k + (-k).exp_m1()) / (k * k)
    }
}

/// sinh(x)/x − 1.
fn sinhc_m1(x: f64) -> f64 {
    let x2 = x * x;
    if x.abs() < 1e-2 {
        x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0))
    } else {
        x.sinh() / x - 1.0
    }
}

/// Mean of gk(k, ·) over [m − w/2, m + w/2].
fn gk_mean(k: f64, m: f64, w: f64) -> f64 {
    if k == 0.0 {
        return m;
    }
    let s1 = sinhc_m1(0.5 * k * w);
    (k * m).exp_m1() / k * (1.0 + s1) + s1 / k
}

/// Mean of e^{β(σ − r)} over [x0, x1].
fn exp_mean(beta: f64, r: f64, x0: f64, x1: f64) -> f64 {
    let m = 0.5 * (x0 + x1);
    let w = x1 - x0;
    (beta * (m - r)).exp() * (1.0 + sinhc_m1(0.5 * beta * w))
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut r: [f64; N]) -> Result<[f64; N]> {
    for c in 0..N {
        let p = (c..N)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("nonempty");
        if a[p][c] == 0.0 {
            return Err(Error::Numerical("singular matching system".into()));
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in c + 1..N {
            let f = a[i][c] / a[c][c];
            #[allow(clippy::needless_range_loop)]
            for j in c..N {
                a[i][j] -= f * a[c][j];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; N];
    for c in (0..N).rev() {
        let s: f64 = (c + 1..N).map(|j| a[c][j] * x[j]).sum();
        x[c] = (r[c] - s) / a[c][c];
    }
    Ok(x)
}

/// β+ and β− for b ≥ 0, D > 0, in cancellation-free form.
fn betas(d: f64, b: f64) -> (f64, f64) {
    let root = (b * b + 4.0 * d).sqrt();
    ((b + root) / (2.0 * d), -2.0 / (b + root))
}

impl SteadyProfile {
    /// Zero-shear profile for a given D > 0.
    pub fn zero_shear(alpha: f64, d: f64) -> Self {
        let s = d.sqrt();
        let h = 1.0 / (2.0 * alpha);
        Self {
            d,
            b: 0.0,
            alpha,
            beta_plus: 1.0 / s,
            beta_minus: -1.0 / s,
            k: 0.0,
            c_l: s * h,
            c_r: s * h,
            a_l: (s + 1.0) * h,
            b_l: h,
            a_r: s * h,
            b_r: -h,
            mirrored: false,
        }
    }

    /// Profile solving the stationary equation for shear b and a given
    /// D > 0, without imposing unit mass.
    pub fn sheared(alpha: f64, b: f64, d: f64) -> Result<Self> {
        if !(alpha > 0.0 && d > 0.0 && b.is_finite()) {
            return invalid(format!(
                "need alpha > 0, D > 0, finite b (alpha = {alpha}, D = {d}, b = {b})"
            ));
        }
        let bb = b.abs();
        if bb == 0.0 {
            return Ok(Self::zero_shear(alpha, d));
        }
        let (bp, bm) = betas(d, bb);
        let k = bb / d;
        // unknowns: c_l, c_r, a_l, b_l, a_r, b_r
        let m = [
            [1.0, 0.0, -1.0, -gk(k, -1.0), 0.0, 0.0],
            [bp, 0.0, 0.0, -(-k).exp(), 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
            [0.0, bm, 0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, 0.0, -1.0, -gk(k, -1.0)],
            [0.0, 0.0, 0.0, -1.0, 0.0, (-k).exp()],
        ];
        let r = [0.0, 0.0, 0.0, 0.0, 0.0, -1.0 / alpha];
        let [c_l, c_r, a_l, b_l, a_r, b_r] = solve_dense(m, r)?;
        Ok(Self {
            d,
            b,
            alpha,
            beta_plus: bp,
            beta_minus: bm,
            k,
            c_l,
            c_r,
            a_l,
            b_l,
            a_r,
            b_r,
            mirrored: b < 0.0,
        })
    }

    fn value_unmirrored(&self, s: f64) -> f64 {
        if s <= -1.0 {
            self.c_l * (self.beta_plus * (s + 1.0)).exp()
        } else if s <= 0.0 {
            self.a_l + self.b_l * gk(self.k, s)
        } else if s <= 1.0 {
            self.a_r + self.b_r * gk(self.k, s - 1.0)
        } else {
            self.c_r * (self.beta_minus * (s - 1.0)).exp()
        }
    }

    /// Point value p(σ).
    pub fn value(&self, sigma: f64) -> f64 {
        if self.mirrored {
            self.value_unmirrored(-sigma)
        } else {
            self.value_unmirrored(sigma)
        }
    }

    /// Exact mean over [x0, x1], which must not straddle −1, 0 or 1.
    fn mean_unmirrored(&self, x0: f64, x1: f64) -> f64 {
        let m = 0.5 * (x0 + x1);
        let w = x1 - x0;
        if x1 <= -1.0 {
            self.c_l * exp_mean(self.beta_plus, -1.0, x0, x1)
        } else if x1 <= 0.0 {
            self.a_l + self.b_l * gk_mean(self.k, m, w)
        } else if x1 <= 1.0 {
            self.a_r + self.b_r * gk_mean(self.k, m - 1.0, w)
        } else {
            self.c_r * exp_mean(self.beta_minus, 1.0, x0, x1)
        }
    }

    /// Cell averages on `grid`.
    pub fn cell_averages(&self, grid: &StressGrid) -> DensityField {
        let n = grid.n_cells();
        let even = self.k == 0.0 && self.c_l == self.c_r;
        let mut values: Vec<f64> = (0..n)
            .map(|i| {
                let (x0, x1) = (grid.edge(i), grid.edge(i + 1));
                if self.mirrored {
                    self.mean_unmirrored(-x1, -x0)
                } else {
                    self.mean_unmirrored(x0, x1)
                }
            })
            .map(|v| v.max(0.0))
            .collect();
        if even {
            for i in 0..n / 2 {
                values[i] = values[n - 1 - i];
            }
        }
        DensityField::from_trusted(*grid, values)
    }

    /// ∫ p over the real line.
    pub fn total_mass(&self) -> f64 {
        self.outer_mass() + self.a_l + self.a_r - (self.b_l + self.b_r) * phi(self.k)
    }

    /// ∫_{|σ|>1} p.
    pub fn outer_mass(&self) -> f64 {
        self.c_l / self.beta_plus - self.c_r / self.beta_minus
    }
}

/// Left side of the normalization condition
/// (D/b)·[(1 + β+) + (β− − 1)e^{−b/D}] / [β+ − β− e^{−b/D}] + D, for b > 0.
pub fn normalization_lhs(d: f64, b: f64) -> f64 {
    let b = b.abs();
    let (bp, bm) = betas(d, b);
    let k = b / d;
    let em = (-k).exp_m1();
    let ek = (-k).exp();
    // (1 + β+) + (β− − 1)(1 + expm1(−k)) = k + (β− − 1)·expm1(−k)
    let ratio = if k == 0.0 { -1.0 } else { em / k };
    (1.0 + (bm - 1.0) * ratio) / (bp - bm * ek) + d
}

/// The same left side as a function of z = b²/D:
/// f(z) = b²/z + (2b²/z)·[1 + z coth(z/2b)/2b + √(z² + 4z)/2b] / [z + √(z² + 4z) coth(z/2b)].
pub fn normalization_f(z: f64, b: f64) -> f64 {
    let b = b.abs();
    let coth = 1.0 / (z / (2.0 * b)).tanh();
    let root = (z * z + 4.0 * z).sqrt();
    let num = 1.0 + z * coth / (2.0 * b) + root / (2.0 * b);
    let den = z + root * coth;
    b * b / z + 2.0 * b * b / z * num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyDiagnostics {
    /// |lhs − α| of the normalization condition (0 for the zero-shear case,
    /// where the quadratic is solved in closed form).
    pub normalization_residual: f64,
    /// |∫ p − 1| of the analytic profile.
    pub analytic_mass_defect: f64,
    /// |mass − 1| of the cell averages on the grid.
    pub mass_defect: f64,
    /// |D(profile) − D| on the grid.
    pub self_consistency_gap: f64,
    pub bisection_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    pub d_value: f64,
    pub b_value: f64,
    #[serde(skip)]
    pub profile: DensityField,
    pub shape: SteadyProfile,
    pub tau: f64,
    pub residual: SteadyDiagnostics,
}

impl SteadyState {
    fn assemble(shape: SteadyProfile, grid: &StressGrid, normalization_residual: f64, steps: usize) -> Self {
        let profile = shape.cell_averages(grid);
        let o = observables(&profile, shape.alpha);
        Self {
            d_value: shape.d,
            b_value: shape.b,
            tau: o.mean_stress,
            residual: SteadyDiagnostics {
                normalization_residual,
                analytic_mass_defect: (shape.total_mass() - 1.0).abs(),
                mass_defect: (o.mass - 1.0).abs(),
                self_consistency_gap: (o.fluidity - shape.d).abs(),
                bisection_steps: steps,
            },
            profile,
            shape,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ZeroShear {
    /// The unique state with D > 0 (α > 1/2).
    Fluid(SteadyState),
    /// α ≤ 1/2: only densities supported in [−1, 1] are stationary.
    DegenerateFamily { alpha: f64 },
}

/// Positive root of D + √D = α − 1/2, or `None` when α ≤ 1/2.
pub fn zero_shear_fluidity(alpha: f64) -> Option<f64> {
    let c = alpha - 0.5;
    if !(c > 0.0) {
        return None;
    }
    // s² + s − c = 0 with s = √D; s = 2c/(1 + √(1 + 4c)) avoids cancellation
    let s = 2.0 * c / (1.0 + (1.0 + 4.0 * c).sqrt());
    Some(s * s)
}

pub fn steady_zero_shear(alpha: f64, grid: &StressGrid) -> Result<ZeroShear> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    Ok(match zero_shear_fluidity(alpha) {
        None => ZeroShear::DegenerateFamily { alpha },
        Some(d) => ZeroShear::Fluid(SteadyState::assemble(
            SteadyProfile::zero_shear(alpha, d),
            grid,
            0.0,
            0,
        )),
    })
}

/// Root of lhs(D) = α by geometric bracketing then bisection.
fn solve_fluidity(alpha: f64, b: f64) -> Result<(f64, usize)> {
    let g = |d: f64| normalization_lhs(d, b) - alpha;
    let (mut lo, mut hi) = (alpha.min(1.0) * 0.5, alpha.max(1.0));
    let mut steps = 0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > 2000 {
            return Err(Error::Numerical(format!(
                "no upper bracket for alpha = {alpha}, b = {b}"
            )));
        }
    }
    while g(lo) > 0.0 {
        lo *= 0.5;
        steps += 1;
        if lo < 1e-300 {
            return Err(Error::Numerical(format!(
                "no lower bracket for alpha = {alpha}, b = {b}"
            )));
        }
    }
    while hi - lo > ROOT_REL_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let mid = 0.5 * (lo + hi);
    Ok((mid, steps))
}

pub fn steady_sheared(alpha: f64, b: f64, grid: &StressGrid) -> Result<SteadyState> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if b == 0.0 || !b.is_finite() {
        return invalid(format!(
            "sheared steady state needs finite b ≠ 0, got {b}; b = 0 is the zero-shear problem"
        ));
    }
    if b.abs() < SMALL_SHEAR {
        if let Some(d) = zero_shear_fluidity(alpha) {
            let mut shape = SteadyProfile::zero_shear(alpha, d);
            shape.b = b;
            let res = (normalization_lhs(d, b) - alpha).abs();
            return Ok(SteadyState::assemble(shape, grid, res, 0));
        }
    }
    let (d, steps) = solve_fluidity(alpha, b)?;
    let shape = SteadyProfile::sheared(alpha, b, d)?;
    let res = (normalization_lhs(d, b) - alpha).abs();
    Ok(SteadyState::assemble(shape, grid, res, steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowPoint {
    pub b: f64,
    pub d: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowCurve {
    pub points: Vec<FlowPoint>,
    /// max |τ(b) + τ(−b)| over pairs present in the list.
    pub odd_symmetry_gap: f64,
}

pub fn flow_curve(alpha: f64, b_list: &[f64], grid: &StressGrid) -> Result<FlowCurve> {
    if let Some(z) = b_list.iter().find(|b| **b == 0.0) {
        return invalid(format!(
            "flow curve shear list contains {z}; use the zero-shear solver for b = 0"
        ));
    }
    let mut points: Vec<FlowPoint> = b_list
        .par_iter()
        .map(|&b| {
            let s = steady_sheared(alpha, b, grid)?;
            Ok(FlowPoint {
                b,
                d: s.d_value,
                tau: s.tau,
            })
        })
        .collect::<Result<_>>()?;
    points.sort_by(|x, y| x.b.total_cmp(&y.b));
    let mut gap: f64 = 0.0;
    for p in &points {
        if let Some(q) = points.iter().find(|q| q.b == -p.b) {
            gap = gap.max((p.tau + q.tau).abs());
        }
    }
    Ok(FlowCurve {
        points,
        odd_symmetry_gap: gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Largest cell residual of the discrete operator.
    pub max_norm: f64,
    /// Discrete L¹ norm of the running integral of the residual. The
    /// running integral is the edge-flux error, which is O(Δσ) on the few
    /// edges at the kinks σ = 0, ±1 and O(Δσ²) elsewhere.
    pub weak_norm: f64,
    pub self_consistency_gap: f64,
}

/// Applies the discrete spatial operator (central advection, D frozen at
/// `d_frozen`) to the cell averages of `state` on `grid`.
pub fn steady_residual_with(state: &SteadyState, grid: &StressGrid, d_frozen: f64) -> ResidualReport {
    let alpha = state.shape.alpha;
    let p = state.shape.cell_averages(grid);
    let op = SpatialOperator {
        grid: *grid,
        b: state.b_value,
        a: d_frozen,
        d_source: d_frozen,
        alpha,
        sink: true,
        source: true,
        flux: AdvectionFlux::Central,
    };
    let r = op.apply(p.values());
    let dx = grid.cell_width();
    let mut run = 0.0;
    let mut weak = 0.0;
    for v in &r {
        run += dx * v;
        weak += dx * f64::abs(run);
    }
    let o = observables(&p, alpha);
    ResidualReport {
        max_norm: r.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        weak_norm: weak,
        self_consistency_gap: (o.fluidity - state.d_value).abs(),
    }
}

pub fn steady_residual(state: &SteadyState, grid: &StressGrid) -> ResidualReport {
    steady_residual_with(state, grid, state.d_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateReport {
    pub admissible: bool,
    pub mass_defect: f64,
    /// Mass found outside [−1, 1].
    pub outer_mass: f64,
    pub min_value: f64,
}

/// Checks a user-supplied member of the degenerate zero-shear family:
/// nonnegative, unit mass within `tol`, no mass outside [−1, 1].
pub fn validate_degenerate_candidate(field: &DensityField, tol: f64) -> CandidateReport {
    let o = observables(field, 1.0);
    let mass_defect = (o.mass - 1.0).abs();
    let min_value = field.min_value();
    CandidateReport {
        admissible: mass_defect <= tol && o.fluidity == 0.0 && min_value >= 0.0,
        mass_defect,
        outer_mass: o.fluidity,
        min_value,
    }
}
