//! Degenerate data: the escape function F, the uniqueness criterion, escape
//! profiles z(t) and the branch family of solutions.
//!
//! F is integrated exactly cell by cell. On a run [a, b] of constant value
//! the inner erfc integral reduces to differences of
//! J(u) = ∫_u^∞ erfc(s) ds, so no quadrature error enters F itself.

use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use crate::analytic::{first_exit_time, quiet_window, reconstruct_from_integral};
use crate::error::{invalid, Error, Result};
use crate::grid::DensityField;
use crate::observables::fluidity;
use crate::protocol::ShearProtocol;
use crate::quadrature::GaussLegendre;
use crate::special::{erfc_unnorm, erfc_unnorm_tail};

/// F for one degenerate datum, with the cells merged into constant runs.
#[derive(Debug, Clone)]
pub struct EscapeFunction {
    alpha: f64,
    runs: Vec<(f64, f64, f64)>,
}

impl EscapeFunction {
    pub fn new(p0: &DensityField, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return invalid(format!("alpha must be positive, got {alpha}"));
        }
        let d0 = fluidity(p0, alpha);
        if d0 > 0.0 {
            return invalid(format!(
                "the escape function applies to degenerate data only, but D(p0) = {d0:e}"
            ));
        }
        let g = p0.grid();
        let mut runs: Vec<(f64, f64, f64)> = Vec::new();
        for i in g.inner_range() {
            let v = p0.values()[i];
            if v == 0.0 {
                continue;
            }
            let (lo, hi) = (g.edge(i), g.edge(i + 1));
            // values equal up to rounding share a run, averaged by mass
            match runs.last_mut() {
                Some(last) if last.1 == lo && (last.2 - v).abs() <= 1e-13 * v => {
                    let (wl, wc) = (last.1 - last.0, hi - lo);
                    last.2 = (last.2 * wl + v * wc) / (wl + wc);
                    last.1 = hi;
                }
                _ => runs.push((lo, hi, v)),
            }
        }
        if runs.is_empty() {
            return invalid("the initial datum has zero mass");
        }
        Ok(Self { alpha, runs })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// F(x) for x ≥ 0.
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let r = 2.0 * x.sqrt();
        let mut acc = 0.0;
        for &(a, b, v) in &self.runs {
            // ∫_a^b erfc((1+s)/r) ds and ∫_a^b erfc((1−s)/r) ds
            let left = erfc_unnorm_tail((1.0 + a) / r) - erfc_unnorm_tail((1.0 + b) / r);
            let right = erfc_unnorm_tail((1.0 - b) / r) - erfc_unnorm_tail((1.0 - a) / r);
            acc += v * (left + right);
        }
        self.alpha / PI.sqrt() * r * acc
    }

    /// c in F(x) ≈ c√x near 0: only the cells touching ±1 contribute.
    pub fn sqrt_prefactor(&self) -> f64 {
        let first = self.runs.first().expect("nonempty runs");
        let last = self.runs.last().expect("nonempty runs");
        let pl = if first.0 == -1.0 { first.2 } else { 0.0 };
        let pr = if last.1 == 1.0 { last.2 } else { 0.0 };
        self.alpha / PI.sqrt() * (pl + pr)
    }

    /// Distance from the support to the nearer of ±1.
    pub fn boundary_gap(&self) -> f64 {
        let lo = self.runs.first().expect("nonempty runs").0;
        let hi = self.runs.last().expect("nonempty runs").1;
        (1.0 + lo).min(1.0 - hi)
    }
}

/// F_{p0}(x).
pub fn f_eval(p0: &DensityField, x: f64, alpha: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return invalid(format!("F needs x ≥ 0, got {x}"));
    }
    Ok(EscapeFunction::new(p0, alpha)?.value(x))
}

/// F for the uniform datum on [−1, 1], in closed form.
pub fn f_uniform_closed(x: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0) {
        return invalid(format!("closed form needs x > 0, got {x}"));
    }
    let s = x.sqrt();
    Ok(2.0 * alpha / PI.sqrt() * (erfc_unnorm(1.0 / s) - 0.5 * s * (-1.0 / x).exp() + 0.5 * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Unique,
    NonUnique,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unique => "unique",
            Verdict::NonUnique => "non-unique",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// ∫₀¹ dx / F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CriterionIntegral {
    Finite { value: f64 },
    Divergent,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionPath {
    ExponentialDecay,
    ExponentFit,
    CutoffExtrapolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub verdict: Verdict,
    pub criterion_integral: CriterionIntegral,
    /// β in F(x) ≈ c·x^β over the fit window; absent under exponential decay.
    pub small_x_exponent: Option<f64>,
    pub fit_prefactor: Option<f64>,
    pub fit_residual: Option<f64>,
    pub decided_by: DecisionPath,
    #[serde(serialize_with = "serialize_time")]
    pub t_c: f64,
}

pub(crate) fn serialize_time<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_finite() {
        s.serialize_f64(*t)
    } else {
        s.serialize_str("inf")
    }
}

/// Thresholds of the classifier.
pub mod thresholds {
    pub const FIT_X_MIN: f64 = 1e-8;
    pub const FIT_X_MAX: f64 = 1e-2;
    pub const FIT_POINTS: usize = 61;
    /// Max |ln F − fit| for the power law to count as clean.
    pub const FIT_RESIDUAL: f64 = 0.05;
    /// β below this: integrable; above `BETA_DIVERGENT`: not.
    pub const BETA_CONVERGENT: f64 = 0.95;
    pub const BETA_DIVERGENT: f64 = 1.05;
    /// Ratio of successive per-decade cutoff increments.
    pub const RATIO_CONVERGENT: f64 = 0.8;
    pub const RATIO_DIVERGENT: f64 = 0.95;
}

/// Uniqueness verdict for the zero-shear problem.
pub fn classify(p0: &DensityField, alpha: f64) -> Result<DegeneracyReport> {
    classify_under(p0, alpha, &ShearProtocol::constant(0.0))
}

/// As [`classify`], with T_c taken for `protocol`.
pub fn classify_under(p0: &DensityField, alpha: f64, protocol: &ShearProtocol) -> Result<DegeneracyReport> {
    use thresholds::*;
    let f = EscapeFunction::new(p0, alpha)?;
    let t_c = critical_times(p0, protocol)?;

    let xs: Vec<f64> = (0..FIT_POINTS)
        .map(|k| {
            let s = k as f64 / (FIT_POINTS - 1) as f64;
            (FIT_X_MIN.ln() + s * (FIT_X_MAX.ln() - FIT_X_MIN.ln())).exp()
        })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();

    if fs.iter().any(|&v| v <= 0.0 || !v.is_normal()) {
        return Ok(DegeneracyReport {
            verdict: Verdict::Unique,
            criterion_integral: CriterionIntegral::Divergent,
            small_x_exponent: None,
            fit_prefactor: None,
            fit_residual: None,
            decided_by: DecisionPath::ExponentialDecay,
            t_c,
        });
    }

    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = fs.iter().map(|v| v.ln()).collect();
    let (beta, ln_c) = linear_fit(&lx, &ly);
    let residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (ln_c + beta * x)).abs())
        .fold(0.0, f64::max);

    let (verdict, criterion, path) = if residual <= FIT_RESIDUAL {
        if beta < BETA_CONVERGENT {
            let head = FIT_X_MIN.powf(1.0 - beta) / (ln_c.exp() * (1.0 - beta));
            let value = head + inverse_integral(&f, FIT_X_MIN, 1.0);
            (
                Verdict::NonUnique,
                CriterionIntegral::Finite { value },
                DecisionPath::ExponentFit,
            )
        } else if beta > BETA_DIVERGENT {
            (
                Verdict::Unique,
                CriterionIntegral::Divergent,
                DecisionPath::ExponentFit,
            )
        } else {
            (
                Verdict::Inconclusive,
                CriterionIntegral::Undetermined,
                DecisionPath::ExponentFit,
            )
        }
    } else {
        cutoff_extrapolation(&f)
    };
    Ok(DegeneracyReport {
        verdict,
        criterion_integral: criterion,
        small_x_exponent: Some(beta),
        fit_prefactor: Some(ln_c.exp()),
        fit_residual: Some(residual),
        decided_by: path,
        t_c,
    })
}

/// Least-squares slope and intercept.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// ∫_a^b dx / F by Gauss–Legendre in ln x, four panels per decade.
fn inverse_integral(f: &EscapeFunction, a: f64, b: f64) -> f64 {
    let gl = GaussLegendre::new(20);
    let (la, lb) = (a.ln(), b.ln());
    let panels = ((lb - la) / std::f64::consts::LN_10 * 4.0).ceil().max(1.0) as usize;
    gl.composite(
        |s| {
            let x = s.exp();
            let v = f.value(x);
            if v > 0.0 {
                x / v
            } else {
                f64::INFINITY
            }
        },
        la,
        lb,
        panels,
    )
}

/// Per-decade increments of ∫_{x_c}^1 dx/F as x_c decreases.
fn cutoff_extrapolation(f: &EscapeFunction) -> (Verdict, CriterionIntegral, DecisionPath) {
    use thresholds::*;
    let path = DecisionPath::CutoffExtrapolation;
    let mut total = inverse_integral(f, 1e-2, 1.0);
    let mut increments = Vec::new();
    for k in 2..12 {
        let hi = 10f64.powi(-k);
        let inc = inverse_integral(f, hi / 10.0, hi);
        if !inc.is_finite() {
            return (Verdict::Unique, CriterionIntegral::Divergent, path);
        }
        total += inc;
        increments.push(inc);
    }
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() - 3..];
    if tail.iter().all(|&r| r < RATIO_CONVERGENT) {
        let r = tail[tail.len() - 1];
        let value = total + increments[increments.len() - 1] * r / (1.0 - r);
        (Verdict::NonUnique, CriterionIntegral::Finite { value }, path)
    } else if tail.iter().all(|&r| r >= RATIO_DIVERGENT) {
        (Verdict::Unique, CriterionIntegral::Divergent, path)
    } else {
        (Verdict::Inconclusive, CriterionIntegral::Undetermined, path)
    }
}

/// T_c = inf{t : ∫_{|σ+χ(t)|>1} p0 > 0}; +∞ if the datum is never sheared out.
pub fn critical_times(p0: &DensityField, protocol: &ShearProtocol) -> Result<f64> {
    if fluidity(p0, 1.0) > 0.0 {
        return Ok(0.0);
    }
    match quiet_window(p0) {
        Some(w) => Ok(first_exit_time(protocol, w)),
        None => invalid("the initial datum has zero mass"),
    }
}

/// Options for [`escape_profile_with`].
#[derive(Debug, Clone, Copy)]
pub struct EscapeOptions {
    /// Number of uniform time steps in the reported table.
    pub intervals: usize,
    pub tol_ode: f64,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        Self {
            intervals: 1000,
            tol_ode: 1e-6,
        }
    }
}

const PANEL_POINTS: usize = 20;
const MAX_PANELS: usize = 10_000_000;

/// z(t) solving ∫₀^z dx/F = (1 − e^{−γt})/γ, or t when γ = 0.
#[derive(Debug, Clone)]
pub struct EscapeProfile {
    p0: DensityField,
    f: EscapeFunction,
    gamma: f64,
    t_end: f64,
    gl: GaussLegendre,
    /// Panel edges in u = √z and the cumulative G at each edge.
    u_edges: Vec<f64>,
    g_cum: Vec<f64>,
    /// Uniform (t, z) table.
    pub knots: Vec<(f64, f64)>,
    /// e^{−γt} F(z(t)) at the knots.
    pub rates: Vec<f64>,
    /// max over knots of |finite-difference z′ − e^{−γt}F(z)|.
    pub residual: f64,
}

pub fn escape_profile(p0: &DensityField, alpha: f64, gamma: f64, t_end: f64) -> Result<EscapeProfile> {
    escape_profile_with(p0, alpha, gamma, t_end, EscapeOptions::default())
}

pub fn escape_profile_with(
    p0: &DensityField,
    alpha: f64,
    gamma: f64,
    t_end: f64,
    opts: EscapeOptions,
) -> Result<EscapeProfile> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return invalid(format!("sink rate must be nonnegative, got {gamma}"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid(format!("horizon must be positive, got {t_end}"));
    }
    if opts.intervals < 4 {
        return invalid("escape table needs at least 4 intervals");
    }
    let report = classify(p0, alpha)?;
    if report.verdict != Verdict::NonUnique {
        return invalid(format!(
            "escape profiles exist only for non-unique data; classifier verdict is {}",
            report.verdict.as_str()
        ));
    }
    let f = EscapeFunction::new(p0, alpha)?;
    if f.sqrt_prefactor() <= 0.0 {
        return Err(Error::Numerical(
            "non-unique verdict but no mass adjacent to ±1; escape integral cannot be set up".into(),
        ));
    }
    let width = (0.5 * p0.grid().cell_width()).min(0.01);
    let mut prof = EscapeProfile {
        p0: p0.clone(),
        f,
        gamma,
        t_end,
        gl: GaussLegendre::new(PANEL_POINTS),
        u_edges: vec![0.0],
        g_cum: vec![0.0],
        knots: Vec::new(),
        rates: Vec::new(),
        residual: 0.0,
    };
    let target = prof.clock(t_end);
    while *prof.g_cum.last().expect("seeded") <= target {
        if prof.u_edges.len() > MAX_PANELS {
            return Err(Error::Numerical(
                "escape integral did not reach the horizon".into(),
            ));
        }
        let u0 = *prof.u_edges.last().expect("seeded");
        let u1 = u0 + width;
        let piece = prof.partial(u0, u1);
        let g = prof.g_cum.last().expect("seeded") + piece;
        prof.u_edges.push(u1);
        prof.g_cum.push(g);
    }

    let n = opts.intervals;
    let h = t_end / n as f64;
    let mut knots = Vec::with_capacity(n + 1);
    let mut rates = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let t = if j == n { t_end } else { j as f64 * h };
        let z = prof.z_at(t)?;
        knots.push((t, z));
        rates.push((-gamma * t).exp() * prof.f.value(z));
    }
    let z: Vec<f64> = knots.iter().map(|k| k.1).collect();
    let mut residual: f64 = 0.0;
    for j in 0..=n {
        // fourth-order differences, skewed near the ends
        let d = if j == 0 {
            (-25.0 * z[0] + 48.0 * z[1] - 36.0 * z[2] + 16.0 * z[3] - 3.0 * z[4]) / (12.0 * h)
        } else if j == 1 {
            (-3.0 * z[0] - 10.0 * z[1] + 18.0 * z[2] - 6.0 * z[3] + z[4]) / (12.0 * h)
        } else if j + 2 > n {
            let k = n;
            if j == n {
                (25.0 * z[k] - 48.0 * z[k - 1] + 36.0 * z[k - 2] - 16.0 * z[k - 3] + 3.0 * z[k - 4])
                    / (12.0 * h)
            } else {
                (3.0 * z[k] + 10.0 * z[k - 1] - 18.0 * z[k - 2] + 6.0 * z[k - 3] - z[k - 4]) / (12.0 * h)
            }
        } else {
            (-z[j + 2] + 8.0 * z[j + 1] - 8.0 * z[j - 1] + z[j - 2]) / (12.0 * h)
        };
        residual = residual.max((d - rates[j]).abs());
    }
    prof.knots = knots;
    prof.rates = rates;
    prof.residual = residual;
    if residual > opts.tol_ode {
        return Err(Error::Numerical(format!(
            "escape profile residual {residual:e} exceeds tol_ode = {:e}",
            opts.tol_ode
        )));
    }
    Ok(prof)
}

impl EscapeProfile {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn initial(&self) -> &DensityField {
        &self.p0
    }

    pub fn escape_function(&self) -> &EscapeFunction {
        &self.f
    }

    /// Right-hand side clock: t, or (1 − e^{−γt})/γ.
    fn clock(&self, t: f64) -> f64 {
        if self.gamma == 0.0 {
            t
        } else {
            -(-self.gamma * t).exp_m1() / self.gamma
        }
    }

    /// Integrand in u = √x: 2u / F(u²).
    fn integrand(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 2.0 / self.f.sqrt_prefactor();
        }
        2.0 * u / self.f.value(u * u)
    }

    fn partial(&self, u0: f64, u1: f64) -> f64 {
        self.gl.integrate(|u| self.integrand(u), u0, u1)
    }

    /// G(z) = ∫₀^z dx / F for z within the tabulated range.
    pub fn cumulative(&self, z: f64) -> f64 {
        let u = z.max(0.0).sqrt();
        let k = self.u_edges.partition_point(|&e| e <= u).saturating_sub(1);
        let k = k.min(self.u_edges.len() - 2);
        self.g_cum[k] + self.partial(self.u_edges[k], u)
    }

    /// z(t) by inverting G on its panel with safeguarded Newton steps.
    pub fn z_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.t_end * (1.0 + 1e-12) {
            return invalid(format!("escape time {t} outside [0, {}]", self.t_end));
        }
        let target = self.clock(t);
        if target <= 0.0 {
            return Ok(0.0);
        }
        let k = self.g_cum.partition_point(|&g| g <= target).saturating_sub(1);
        if k + 1 >= self.u_edges.len() {
            return Err(Error::Numerical(
                "escape table too short for requested time".into(),
            ));
        }
        let (mut lo, mut hi) = (self.u_edges[k], self.u_edges[k + 1]);
        let rest = target - self.g_cum[k];
        let base = self.u_edges[k];
        let mut u = lo + (hi - lo) * (rest / (self.g_cum[k + 1] - self.g_cum[k])).clamp(0.0, 1.0);
        for _ in 0..100 {
            let r = self.partial(base, u) - rest;
            if r > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let mut next = u - r / self.integrand(u);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - u).abs() <= 2.0 * f64::EPSILON * u || hi - lo <= 4.0 * f64::EPSILON * hi;
            u = next;
            if done {
                break;
            }
        }
        Ok(u * u)
    }

    /// dz/dt = e^{−γt} F(z(t)).
    pub fn rate_at(&self, t: f64) -> Result<f64> {
        Ok((-self.gamma * t).exp() * self.f.value(self.z_at(t)?))
    }

    /// Member q_{t0} of the solution family at time t.
    pub fn branch(&self, t0: f64, t: f64) -> Result<DensityField> {
        if !(t0 >= 0.0) {
            return invalid(format!("branch start must be ≥ 0, got {t0}"));
        }
        if t <= t0 {
            return Ok(self.p0.clone());
        }
        let s = t - t0;
        let z = self.z_at(s)?;
        Ok(reconstruct_from_integral(&self.p0, z, self.gamma, s))
    }
}

/// q_{t0}(t): the datum until t0, then the escaping solution shifted by t0.
pub fn branch_solution(p0: &DensityField, alpha: f64, gamma: f64, t0: f64, t: f64) -> Result<DensityField> {
    if !(t0 >= 0.0) {
        return invalid(format!("branch start must be ≥ 0, got {t0}"));
    }
    let report = classify(p0, alpha)?;
    if report.verdict != Verdict::NonUnique {
        return invalid(format!(
            "branch family exists only for non-unique data; classifier verdict is {}",
            report.verdict.as_str()
        ));
    }
    if t <= t0 {
        return Ok(p0.clone());
    }
    escape_profile(p0, alpha, gamma, t - t0)?.branch(t0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::quadrature::GaussLegendre;

    fn uniform() -> DensityField {
        DensityField::uniform(build_grid(8.0, 1600).unwrap(), -1.0, 1.0).unwrap()
    }

    /// Double integral of the definition by brute-force quadrature.
    fn f_oracle(a: f64, b: f64, height: f64, alpha: f64, x: f64) -> f64 {
        let gl = GaussLegendre::new(30);
        let r = 2.0 * x.sqrt();
        let inner = |s: f64| erfc_unnorm((1.0 + s) / r) + erfc_unnorm((1.0 - s) / r);
        alpha / PI.sqrt() * height * gl.composite(inner, a, b, 200)
    }

    #[test]
    fn frozen_uniform_value() {
        let v = f_uniform_closed(1.0, 1.0).unwrap();
        assert!((v - 0.513_935_041_887_744_065_9).abs() < 1e-14);
        assert!((f_eval(&uniform(), 1.0, 1.0).unwrap() - v).abs() < 1e-14);
    }

    #[test]
    fn closed_form_agrees_with_exact_cells() {
        let p = uniform();
        for k in 0..=40 {
            let x = 10f64.powf(-6.0 + 8.0 * k as f64 / 40.0);
            let a = f_uniform_closed(x, 1.0).unwrap();
            let b = f_eval(&p, x, 1.0).unwrap();
            assert!((a - b).abs() <= 1e-8 * (1.0 + a), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn exact_cells_agree_with_quadrature_oracle() {
        let g = build_grid(8.0, 1600).unwrap();
        let p = DensityField::uniform(g, -0.3, 0.9).unwrap();
        for &x in &[1e-3, 0.05, 0.7, 3.0] {
            let a = f_eval(&p, x, 1.7).unwrap();
            let b = f_oracle(-0.3, 0.9, 1.0 / 1.2, 1.7, x);
            assert!((a - b).abs() <= 1e-12 * (1.0 + b), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn f_basic_properties() {
        let p = uniform();
        assert_eq!(f_eval(&p, 0.0, 1.0).unwrap(), 0.0);
        assert!(f_eval(&p, -1.0, 1.0).is_err());
        let small = f_uniform_closed(1e-4, 1.0).unwrap();
        assert!((small / (1e-2 / PI.sqrt()) - 1.0).abs() < 0.01);
        for &x in &[1e-3, 0.5, 7.0] {
            let one = f_uniform_closed(x, 1.0).unwrap();
            assert!((f_uniform_closed(x, 2.0).unwrap() - 2.0 * one).abs() < 1e-15 * one);
        }
        assert!(f_uniform_closed(0.0, 1.0).is_err());
        let g = build_grid(8.0, 1600).unwrap();
        let wide = DensityField::uniform(g, -2.0, 2.0).unwrap();
        assert!(f_eval(&wide, 1.0, 1.0).is_err());
    }

    #[test]
    fn narrow_bump_tends_to_alpha() {
        let g = build_grid(8.0, 1600).unwrap();
        let bump = DensityField::uniform(g, -0.05, 0.05).unwrap();
        let v = f_eval(&bump, 1e4, 1.0).unwrap();
        // F(x) = α (1 − O(1/√x))
        assert!((v - 1.0).abs() < 0.02, "{v}");
        assert!(v < 1.0);
    }

    #[test]
    fn classifier_examples() {
        let g = build_grid(8.0, 1600).unwrap();
        let r = classify(&uniform(), 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::NonUnique);
        assert!((r.small_x_exponent.unwrap() - 0.5).abs() < 0.01);
        assert!(matches!(r.criterion_integral, CriterionIntegral::Finite { .. }));
        assert_eq!(r.t_c, f64::INFINITY);

        let inner = DensityField::uniform(g, -0.5, 0.5).unwrap();
        let r = classify(&inner, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Unique);
        assert_eq!(r.criterion_integral, CriterionIntegral::Divergent);

        let half = DensityField::uniform(g, 0.0, 1.0).unwrap();
        let r = classify(&half, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::NonUnique);
        assert!((r.small_x_exponent.unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn criterion_value_for_uniform() {
        // ∫₀¹ dx/F by an independent substitution x = u², uniform datum
        let gl = GaussLegendre::new(30);
        let oracle = gl.composite(
            |u| 2.0 * u / f_uniform_closed(u * u, 1.0).unwrap(),
            1e-12,
            1.0,
            200,
        );
        let r = classify(&uniform(), 1.0).unwrap();
        let CriterionIntegral::Finite { value } = r.criterion_integral else {
            panic!("expected finite integral");
        };
        assert!((value - oracle).abs() < 1e-6 * oracle, "{value} vs {oracle}");
    }

    #[test]
    fn critical_time_examples() {
        let g = build_grid(8.0, 1600).unwrap();
        let one = ShearProtocol::constant(1.0);
        assert_eq!(
            critical_times(&uniform(), &ShearProtocol::constant(0.0)).unwrap(),
            f64::INFINITY
        );
        assert_eq!(critical_times(&uniform(), &one).unwrap(), 0.0);
        let inner = DensityField::uniform(g, -0.5, 0.5).unwrap();
        assert_eq!(critical_times(&inner, &one).unwrap(), 0.5);
    }

    #[test]
    fn escape_profile_small_time_law_and_residual() {
        let p = uniform();
        let prof = escape_profile(&p, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(prof.knots[0], (0.0, 0.0));
        assert!(prof.residual < 1e-6, "{}", prof.residual);
        assert!(prof.knots.windows(2).all(|w| w[1].1 > w[0].1));
        let t = 1e-3;
        let law = (t / (2.0 * PI.sqrt())).powi(2);
        assert!((prof.z_at(t).unwrap() / law - 1.0).abs() < 0.02);
        // G(z(t)) = t
        for &t in &[0.01, 0.3, 1.0] {
            let z = prof.z_at(t).unwrap();
            assert!((prof.cumulative(z) - t).abs() < 1e-12);
        }
        let damped = escape_profile(&p, 1.0, 1.0, 1.0).unwrap();
        assert!(damped.residual < 1e-6);
        let z = damped.z_at(1.0).unwrap();
        assert!((damped.cumulative(z) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn escape_profile_rejects_unique_data() {
        let g = build_grid(8.0, 1600).unwrap();
        let inner = DensityField::uniform(g, -0.5, 0.5).unwrap();
        assert!(escape_profile(&inner, 1.0, 0.0, 1.0).is_err());
        assert!(escape_profile(&uniform(), 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn branches() {
        let p = uniform();
        let b0 = branch_solution(&p, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((b0.mass() - 1.0).abs() < 1e-10);
        let b1 = branch_solution(&p, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(b1.values(), p.values());
        assert!(b0.l2_distance(&b1) > 1e-3);
        let prof = escape_profile(&p, 1.0, 0.0, 1.0).unwrap();
        let q = prof.branch(0.25, 1.0).unwrap();
        let direct = reconstruct_from_integral(&p, prof.z_at(0.75).unwrap(), 0.0, 0.75);
        assert_eq!(q.values(), direct.values());
    }
}
