//! Gaussian kernels, comparison envelopes and a-priori bounds.
//!
//! Convolutions are direct sums against a kernel sampled on the cell
//! lattice and normalized to unit discrete mass. Below half a cell of width
//! the kernel degenerates to a point mass, distributed by linear
//! interpolation between the two nearest cell centers.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{DensityField, StressGrid};
use crate::history::StepFunction;
use crate::protocol::ShearProtocol;
use crate::special::normal_pdf;

pub use crate::special::erfc_unnorm;

/// Normal density with standard deviation `eta`, evaluated at `x`.
pub fn gaussian_kernel(eta: f64, x: f64) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid(format!("kernel width must be positive, got {eta}"));
    }
    Ok(normal_pdf(eta, x))
}

/// Kernels are cut where the normal density drops below 1e-300 of its peak.
const KERNEL_REACH: f64 = 37.5;

/// Weights w[m], m = `first`.., for a unit mass moved by `shift` and spread
/// with standard deviation `width`, on a lattice of spacing `dx`.
struct LatticeKernel {
    first: i64,
    weights: Vec<f64>,
}

impl LatticeKernel {
    fn new(dx: f64, width: f64, shift: f64) -> Self {
        let s = shift / dx;
        if width < 0.5 * dx {
            let q = s.floor();
            let f = s - q;
            return Self {
                first: q as i64,
                weights: vec![1.0 - f, f],
            };
        }
        let w = width / dx;
        let first = (s - KERNEL_REACH * w).floor() as i64;
        let last = (s + KERNEL_REACH * w).ceil() as i64;
        let mut weights: Vec<f64> = (first..=last)
            .map(|m| {
                let z = (m as f64 - s) / w;
                (-0.5 * z * z).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= total);
        Self { first, weights }
    }

    /// out[i] += scale · Σ_j v[j] w[i − j].
    fn convolve_into(&self, values: &[f64], scale: f64, out: &mut [f64]) {
        let n = values.len() as i64;
        for (j, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let base = j as i64 + self.first;
            let lo = (-base).max(0);
            let hi = (n - base).min(self.weights.len() as i64);
            if hi <= lo {
                continue;
            }
            let sv = scale * v;
            let dst = &mut out[(base + lo) as usize..(base + hi) as usize];
            for (o, w) in dst.iter_mut().zip(&self.weights[lo as usize..hi as usize]) {
                *o += sv * w;
            }
        }
    }
}

/// `values` convolved with a normal kernel of standard deviation `width`
/// and translated by `shift`. Mass leaving the grid is dropped.
pub fn smear_values(grid: &StressGrid, values: &[f64], width: f64, shift: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    LatticeKernel::new(grid.cell_width(), width, shift).convolve_into(values, 1.0, &mut out);
    out
}

/// Adds the density of `mass` placed at σ = `position` and spread with
/// standard deviation `width`.
pub fn add_point_source(grid: &StressGrid, out: &mut [f64], mass: f64, width: f64, position: f64) {
    let dx = grid.cell_width();
    // cell i has center (i − n/2)·dx + dx/2, so this is a lattice shift
    // relative to cell n/2 − 1/2.
    let kernel = LatticeKernel::new(dx, width, position - 0.5 * dx);
    let mid = (grid.n_cells() / 2) as i64;
    let n = out.len() as i64;
    let scale = mass / dx;
    for (k, w) in kernel.weights.iter().enumerate() {
        let i = mid + kernel.first + k as i64;
        if (0..n).contains(&i) {
            out[i as usize] += scale * w;
        }
    }
}

/// `p0` smeared by a centered normal kernel.
pub fn heat_smear(p0: &DensityField, width: f64, shift: f64) -> DensityField {
    let values = smear_values(p0.grid(), p0.values(), width, shift);
    DensityField::from_trusted(*p0.grid(), values)
}

/// Solution at time `t` of ∂t w = D(t) ∂σσ w − γ w started from `p0`.
pub fn heat_reconstruct(
    p0: &DensityField,
    d_trace: &StepFunction,
    gamma: f64,
    t: f64,
) -> Result<DensityField> {
    if !(gamma >= 0.0) {
        return invalid(format!("sink rate must be nonnegative, got {gamma}"));
    }
    let x = d_trace.integral(d_trace.start(), t)?;
    Ok(reconstruct_from_integral(p0, x, gamma, t))
}

/// Same as [`heat_reconstruct`] given x = ∫₀ᵗ D directly.
pub fn reconstruct_from_integral(p0: &DensityField, x: f64, gamma: f64, t: f64) -> DensityField {
    let decay = (-gamma * t).exp();
    if x <= 0.0 {
        let values = p0.values().iter().map(|v| decay * v).collect();
        return DensityField::from_trusted(*p0.grid(), values);
    }
    let mut values = smear_values(p0.grid(), p0.values(), (2.0 * x).sqrt(), 0.0);
    values.iter_mut().for_each(|v| *v *= decay);
    DensityField::from_trusted(*p0.grid(), values)
}

#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub lower: DensityField,
    pub upper: DensityField,
    pub t: f64,
}

/// Lower and upper comparison solutions at time `t`.
///
/// `a_history` is the diffusion coefficient actually used, `dq_history` the
/// fluidity feeding the source. The source released on `(t_k, t_{k+1}]` is
/// deposited at `t_{k+1}`, which is how the time stepper injects it.
pub fn envelopes(
    p0: &DensityField,
    a_history: &StepFunction,
    dq_history: &StepFunction,
    protocol: &ShearProtocol,
    alpha: f64,
    t: f64,
) -> Result<EnvelopePair> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if t < 0.0 || t > a_history.end() * (1.0 + 1e-12) || t > dq_history.end() * (1.0 + 1e-12) {
        return invalid(format!(
            "envelope time {t} outside the recorded history [0, {}]",
            a_history.end().min(dq_history.end())
        ));
    }
    let grid = *p0.grid();
    let chi_t = protocol.chi(t)?;
    let x = a_history.integral(0.0, t)?;
    let width = (2.0 * x).sqrt();
    let base = smear_values(&grid, p0.values(), width, chi_t);
    let decay = (-t).exp();
    let lower: Vec<f64> = base.iter().map(|v| decay * v).collect();
    let mut upper = base;

    let knots = dq_history.knots();
    for (k, &dq) in dq_history.values().iter().enumerate() {
        let (s0, s1) = (knots[k], knots[k + 1].min(t));
        if s0 >= t {
            break;
        }
        if dq == 0.0 || s1 <= s0 {
            continue;
        }
        let mass = dq * (s1 - s0) / alpha;
        let w = (2.0 * a_history.integral(s1, t)?).sqrt();
        let pos = chi_t - protocol.chi(s1)?;
        add_point_source(&grid, &mut upper, mass, w, pos);
    }
    Ok(EnvelopePair {
        lower: DensityField::from_trusted(grid, lower),
        upper: DensityField::from_trusted(grid, upper),
        t,
    })
}

/// Cumulative cell masses, `prefix[i] = Δσ Σ_{j<i} p_j`.
fn prefix_mass(p0: &DensityField) -> Vec<f64> {
    let dx = p0.grid().cell_width();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(p0.values().len() + 1);
    out.push(0.0);
    for v in p0.values() {
        acc += dx * v;
        out.push(acc);
    }
    out
}

/// ∫_{−∞}^{σ} p0 from the prefix table.
fn cdf_at(p0: &DensityField, prefix: &[f64], sigma: f64) -> f64 {
    let g = p0.grid();
    let (left, right) = (g.edge(0), g.edge(g.n_cells()));
    if sigma <= left {
        return 0.0;
    }
    if sigma >= right {
        return prefix[prefix.len() - 1];
    }
    let i = g.locate(sigma);
    prefix[i] + (sigma - g.edge(i)) * p0.values()[i]
}

/// Mass of `p0` in {|σ + χ| > 1}.
pub fn mass_outside_window(p0: &DensityField, chi: f64) -> f64 {
    let prefix = prefix_mass(p0);
    outside_with_prefix(p0, &prefix, chi)
}

fn outside_with_prefix(p0: &DensityField, prefix: &[f64], chi: f64) -> f64 {
    let total = prefix[prefix.len() - 1];
    let inside = cdf_at(p0, prefix, 1.0 - chi) - cdf_at(p0, prefix, -1.0 - chi);
    (total - inside).max(0.0)
}

/// Shifts χ for which p0 puts no mass in {|σ + χ| > 1}: `[−1 − s_lo, 1 − s_hi]`.
pub fn quiet_window(p0: &DensityField) -> Option<(f64, f64)> {
    let (lo, hi) = p0.support()?;
    let w = (-1.0 - lo, 1.0 - hi);
    (w.0 <= w.1).then_some(w)
}

/// Pieces of χ as (t_start, t_end, χ(t_start), rate); the last is unbounded.
fn chi_segments(protocol: &ShearProtocol) -> Vec<(f64, f64, f64, f64)> {
    let pieces = protocol.pieces();
    let mut chi = 0.0;
    let mut out = Vec::with_capacity(pieces.len());
    for (k, p) in pieces.iter().enumerate() {
        let end = pieces.get(k + 1).map_or(f64::INFINITY, |q| q.t_start);
        out.push((p.t_start, end, chi, p.rate));
        if end.is_finite() {
            chi += p.rate * (end - p.t_start);
        }
    }
    out
}

/// inf{t > 0 : χ(t) ∉ [lo, hi]}, assuming χ(0) = 0 lies in the window.
pub fn first_exit_time(protocol: &ShearProtocol, window: (f64, f64)) -> f64 {
    let (lo, hi) = window;
    for (t0, t1, chi0, rate) in chi_segments(protocol) {
        let hit = if rate > 0.0 {
            t0 + (hi - chi0).max(0.0) / rate
        } else if rate < 0.0 {
            t0 + (lo - chi0).min(0.0) / rate
        } else {
            continue;
        };
        if hit < t1 {
            return hit;
        }
    }
    f64::INFINITY
}

/// inf{t > 0 : χ(t) ∈ [lo, hi]}; 0 when the window already contains 0.
pub fn first_entry_time(protocol: &ShearProtocol, window: (f64, f64)) -> f64 {
    let (lo, hi) = window;
    if lo <= 0.0 && 0.0 <= hi {
        return 0.0;
    }
    for (t0, t1, chi0, rate) in chi_segments(protocol) {
        let hit = if chi0 < lo && rate > 0.0 {
            t0 + (lo - chi0) / rate
        } else if chi0 > hi && rate < 0.0 {
            t0 + (hi - chi0) / rate
        } else {
            continue;
        };
        if hit < t1 {
            return hit;
        }
    }
    f64::INFINITY
}

/// First time the shifted datum has no mass outside [−1, 1]; +∞ if never.
pub fn quiet_time(p0: &DensityField, protocol: &ShearProtocol) -> f64 {
    match quiet_window(p0) {
        Some(w) => first_entry_time(protocol, w),
        None => f64::INFINITY,
    }
}

/// Range of χ over [0, t].
fn chi_range(protocol: &ShearProtocol, t: f64) -> Result<(f64, f64)> {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    for s in protocol.breakpoints_before(t).into_iter().chain([t]) {
        let c = protocol.chi(s)?;
        lo = lo.min(c);
        hi = hi.max(c);
    }
    Ok((lo, hi))
}

/// min over t ∈ [t0, t1] of |χ(t) − target|.
fn min_distance_to(protocol: &ShearProtocol, t0: f64, t1: f64, target: f64) -> Result<f64> {
    let mut pts = vec![t0];
    pts.extend(protocol.breakpoints_before(t1).into_iter().filter(|&s| s > t0));
    pts.push(t1);
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let (a, b) = (protocol.chi(w[0])? - target, protocol.chi(w[1])? - target);
        if a == 0.0 || b == 0.0 || (a < 0.0) != (b < 0.0) {
            return Ok(0.0);
        }
        best = best.min(a.abs()).min(b.abs());
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    /// Lower bound on D over [0, min(T, t*/2)].
    pub nu1: f64,
    /// Lower bound on D over [t*/2, T]; present when T ≥ t*/2.
    pub nu2: Option<f64>,
    pub nu: f64,
    pub linf_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// t* used for `nu2`; `None` when the shifted datum never leaves the
    /// yielded region empty (t* = +∞).
    pub t_star_input: Option<f64>,
    /// Set when D(p0) = 0, in which case no positive floor exists.
    pub degenerate: bool,
}

/// A-priori bounds for the regularized problem on [0, T].
pub fn apriori_bounds(
    p0: &DensityField,
    protocol: &ShearProtocol,
    alpha: f64,
    t_end: f64,
) -> Result<BoundsReport> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid(format!("horizon must be positive, got {t_end}"));
    }
    let prefix = prefix_mass(p0);
    let sup = p0.max_value();
    let mass = prefix[prefix.len() - 1];
    let abs_moment = crate::observables::observables(p0, alpha).abs_moment;
    let sqrt_pi = PI.sqrt();
    let s1a = (1.0 + alpha).sqrt();
    let b_l2 = protocol.l2_norm(t_end);

    let linf_bound = sup + (alpha / PI).sqrt() * t_end.sqrt();
    let c1 = abs_moment
        + t_end.sqrt() * (2.0 * s1a / sqrt_pi + b_l2)
        + (2.0 / 3.0) * t_end.powf(1.5) * (1.0 + 2.0 * s1a / sqrt_pi);
    let c2 = sup + alpha.sqrt() * t_end.sqrt() / sqrt_pi;
    let c3 = sup * (0.5 + t_end) + alpha.sqrt() / sqrt_pi * t_end.powf(1.5);

    let degenerate = outside_with_prefix(p0, &prefix, 0.0) <= 0.0;
    let t_star = quiet_time(p0, protocol);

    let nu1_at = |horizon: f64| -> Result<f64> {
        let (lo, hi) = chi_range(protocol, horizon)?;
        let dx = p0.grid().cell_width();
        let mut m = outside_with_prefix(p0, &prefix, lo).min(outside_with_prefix(p0, &prefix, hi));
        // the outside mass is linear in χ between multiples of Δσ
        let mut k = (lo / dx).ceil() as i64;
        while (k as f64) * dx < hi {
            m = m.min(outside_with_prefix(p0, &prefix, k as f64 * dx));
            k += 1;
        }
        Ok(0.5 * alpha * (-horizon).exp() * m)
    };

    let (nu1, nu2) = if degenerate {
        (0.0, None)
    } else if !t_star.is_finite() || t_end < 0.5 * t_star {
        (nu1_at(t_end)?, None)
    } else {
        let half = 0.5 * t_star;
        let nu1 = nu1_at(half)?;
        let chi_star = protocol.chi(t_star)?;
        let den = (2.0 * t_star * nu1).sqrt();
        let c = min_distance_to(protocol, half, t_end, chi_star)?;
        let bracket = if den > 0.0 {
            erfc_unnorm((2.0 + c) / den) + erfc_unnorm((2.0 - c) / den)
        } else {
            0.0
        };
        // the bracket assumes the whole mass sits inside the quiet window
        let nu2 = alpha / sqrt_pi * (-t_end).exp() * bracket * mass.min(1.0);
        (nu1, Some(nu2))
    };
    let nu = nu2.map_or(nu1, |v| v.min(nu1));
    Ok(BoundsReport {
        nu1,
        nu2,
        nu,
        linf_bound,
        c1,
        c2,
        c3,
        t_star_input: t_star.is_finite().then_some(t_star),
        degenerate,
    })
}
