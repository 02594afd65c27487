//! Time stepping of the regularized equation
//! ∂t p = −b ∂σ p + (D(p) + ε) ∂σσ p − χ_{|σ|>1} p + (D(p)/α) δ₀.
//!
//! One step is split as: upwind advection, backward-Euler diffusion
//! (homogeneous Dirichlet at ±L), implicit sink on |σ| > 1, then the source
//! at σ = 0. The source uses the fluidity of the post-sink field, which is
//! exactly α/dt times the mass the sink removed, so the step conserves mass
//! up to what leaves through the walls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{envelopes, reconstruct_from_integral};
use crate::degeneracy::{classify, escape_profile, Verdict};
use crate::error::{invalid, Error, Result};
use crate::grid::{DensityField, StressGrid};
use crate::history::StepFunction;
use crate::observables::{fluidity_of, observables};
use crate::protocol::ShearProtocol;
use crate::tridiag::solve_tridiagonal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub epsilon: f64,
    /// Fixed-point sweeps for D within a step; 1 is the lagged scheme.
    pub picard_iters: usize,
    /// Store a snapshot every this many steps (the last step is always kept).
    pub record_every: usize,
    /// Loss term on |σ| > 1.
    pub sink: bool,
    /// Reinjection at σ = 0.
    pub source: bool,
    /// Extra uniform decay rate, used by the reduced model without sink.
    pub gamma: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            epsilon: 0.0,
            picard_iters: 1,
            record_every: 10,
            sink: true,
            source: true,
            gamma: 0.0,
        }
    }
}

impl EvolveConfig {
    /// Reduced model ∂t w = (D(w) + ε) ∂σσ w − γ w: no sink, no source.
    pub fn reduced(dt: f64, t_end: f64, epsilon: f64) -> Self {
        Self {
            dt,
            t_end,
            epsilon,
            sink: false,
            source: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return invalid(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.picard_iters == 0 {
            return invalid("picard_iters must be at least 1");
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return invalid(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        let steps = self.t_end / self.dt;
        let rounded = steps.round();
        if rounded < 1.0 || (steps - rounded).abs() > 1e-9 * steps {
            return invalid(format!(
                "t_end / dt = {steps} must be a positive integer (t_end = {}, dt = {})",
                self.t_end, self.dt
            ));
        }
        Ok(rounded as usize)
    }
}

/// Discretization of the advection term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionFlux {
    Upwind,
    Central,
}

/// Right-hand side of the equation on a grid with frozen coefficients.
#[derive(Debug, Clone, Copy)]
pub struct SpatialOperator {
    pub grid: StressGrid,
    pub b: f64,
    /// Diffusion coefficient D + ε.
    pub a: f64,
    /// Fluidity feeding the source.
    pub d_source: f64,
    pub alpha: f64,
    pub sink: bool,
    pub source: bool,
    pub flux: AdvectionFlux,
}

impl SpatialOperator {
    /// L(p) cell by cell, with zero Dirichlet data at ±L.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        let dx = self.grid.cell_width();
        let at = |i: isize| -> f64 {
            if i < 0 || i >= n as isize {
                0.0
            } else {
                p[i as usize]
            }
        };
        // edge flux F_{i−1/2} for i = 0..=n
        let flux: Vec<f64> = (0..=n as isize)
            .map(|e| {
                let (l, r) = (e - 1, e);
                let (pl, pr) = (at(l), at(r));
                match self.flux {
                    AdvectionFlux::Upwind => {
                        if self.b >= 0.0 {
                            self.b * pl
                        } else {
                            self.b * pr
                        }
                    }
                    AdvectionFlux::Central => {
                        // ghost values −p at the walls put the Dirichlet zero on the edge
                        if e == 0 || e == n as isize {
                            0.0
                        } else {
                            0.5 * self.b * (pl + pr)
                        }
                    }
                }
            })
            .collect();
        let inner = self.grid.inner_range();
        let (z0, z1) = self.grid.zero_cells();
        let r = self.a / (dx * dx);
        (0..n)
            .map(|i| {
                let left = if i == 0 { -p[0] } else { p[i - 1] };
                let right = if i + 1 == n { -p[n - 1] } else { p[i + 1] };
                let mut v = -(flux[i + 1] - flux[i]) / dx + r * (left - 2.0 * p[i] + right);
                if self.sink && !inner.contains(&i) {
                    v -= p[i];
                }
                if self.source && (i == z0 || i == z1) {
                    v += self.d_source / (2.0 * self.alpha * dx);
                }
                v
            })
            .collect()
    }
}

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: DensityField,
    /// D + ε used by the diffusion solve.
    pub a_used: f64,
    /// Fluidity that fed the source.
    pub d_source: f64,
    /// Mass that left through the walls during the step.
    pub leakage: f64,
}

/// Work arrays reused across steps.
struct Stepper {
    grid: StressGrid,
    alpha: f64,
    epsilon: f64,
    picard: usize,
    sink: bool,
    source: bool,
    gamma: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Stepper {
    fn new(grid: StressGrid, alpha: f64, cfg: &EvolveConfig) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            alpha,
            epsilon: cfg.epsilon,
            picard: cfg.picard_iters,
            sink: cfg.sink,
            source: cfg.source,
            gamma: cfg.gamma,
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    fn fluidity(&self, p: &[f64]) -> f64 {
        fluidity_of(p, self.grid.inner_range(), self.grid.cell_width(), self.alpha)
    }

    fn step(&mut self, p: &[f64], b: f64, dt: f64) -> Result<(Vec<f64>, f64, f64, f64)> {
        let dx = self.grid.cell_width();
        let courant = b.abs() * dt / dx;
        if courant > 1.0 + 1e-12 {
            return Err(Error::Cfl {
                product: b.abs() * dt,
                cell_width: dx,
                suggested_dt: dx / b.abs(),
            });
        }
        let mass_before: f64 = dx * p.iter().sum::<f64>();
        let mut d_iter = self.fluidity(p);
        let mut out = Vec::new();
        let mut a = 0.0;
        let mut leak = 0.0;
        for _ in 0..self.picard {
            a = d_iter + self.epsilon;
            let (q, l) = self.advect_diffuse(p, b, a, dt, courant)?;
            out = q;
            leak = l;
            if self.picard > 1 {
                d_iter = self.fluidity(&self.apply_sink(out.clone(), dt));
            }
        }
        out = self.apply_sink(out, dt);
        let d_src = self.fluidity(&out);
        if self.source && d_src > 0.0 {
            let (z0, z1) = self.grid.zero_cells();
            let add = dt * d_src / (2.0 * self.alpha * dx);
            out[z0] += add;
            out[z1] += add;
        }
        if self.gamma > 0.0 {
            let f = 1.0 / (1.0 + self.gamma * dt);
            out.iter_mut().for_each(|v| *v *= f);
        }
        debug_assert!(mass_before.is_finite());
        Ok((out, a, d_src, leak))
    }

    fn apply_sink(&self, mut p: Vec<f64>, dt: f64) -> Vec<f64> {
        if self.sink {
            let inner = self.grid.inner_range();
            let f = 1.0 / (1.0 + dt);
            for v in &mut p[..inner.start] {
                *v *= f;
            }
            for v in &mut p[inner.end..] {
                *v *= f;
            }
        }
        p
    }

    /// Upwind advection then implicit diffusion; returns the field and the
    /// mass lost through the walls.
    fn advect_diffuse(&mut self, p: &[f64], b: f64, a: f64, dt: f64, c: f64) -> Result<(Vec<f64>, f64)> {
        let n = p.len();
        let dx = self.grid.cell_width();
        let mut q = vec![0.0; n];
        let mut leak = 0.0;
        if b > 0.0 {
            q[0] = (1.0 - c) * p[0];
            for i in 1..n {
                q[i] = (1.0 - c) * p[i] + c * p[i - 1];
            }
            leak += c * p[n - 1] * dx;
        } else if b < 0.0 {
            for i in 0..n - 1 {
                q[i] = (1.0 - c) * p[i] + c * p[i + 1];
            }
            q[n - 1] = (1.0 - c) * p[n - 1];
            leak += c * p[0] * dx;
        } else {
            q.copy_from_slice(p);
        }
        if a > 0.0 {
            let before: f64 = q.iter().sum::<f64>() * dx;
            let r = a * dt / (dx * dx);
            self.lower.fill(-r);
            self.upper.fill(-r);
            self.diag.fill(1.0 + 2.0 * r);
            self.diag[0] = 1.0 + 3.0 * r;
            self.diag[n - 1] = 1.0 + 3.0 * r;
            solve_tridiagonal(&self.lower, &self.diag, &self.upper, &mut q)?;
            for v in q.iter_mut() {
                // the M-matrix solve is nonnegative; clip roundoff only
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let after: f64 = q.iter().sum::<f64>() * dx;
            leak += before - after;
        }
        Ok((q, leak))
    }
}

/// One step of the scheme from `field` with shear rate `b_now`.
pub fn step(
    field: &DensityField,
    b_now: f64,
    dt: f64,
    epsilon: f64,
    alpha: f64,
    picard_iters: usize,
) -> Result<StepOutcome> {
    let cfg = EvolveConfig {
        dt,
        t_end: dt,
        epsilon,
        picard_iters,
        ..EvolveConfig::default()
    };
    step_with(field, b_now, &cfg, alpha)
}

/// As [`step`], honoring the sink, source and decay switches of `cfg`.
pub fn step_with(field: &DensityField, b_now: f64, cfg: &EvolveConfig, alpha: f64) -> Result<StepOutcome> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if !(cfg.dt > 0.0) || cfg.picard_iters == 0 || !(cfg.epsilon >= 0.0) {
        return invalid("step needs dt > 0, epsilon ≥ 0 and at least one Picard sweep");
    }
    let mut st = Stepper::new(*field.grid(), alpha, cfg);
    let (values, a_used, d_source, leakage) = st.step(field.values(), b_now, cfg.dt)?;
    Ok(StepOutcome {
        field: DensityField::from_trusted(*field.grid(), values),
        a_used,
        d_source,
        leakage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub d: f64,
    pub chi: f64,
    pub tau: f64,
    pub mass: f64,
    pub max_p: f64,
    pub min_p: f64,
    pub abs_moment: f64,
    /// Mass lost through the walls up to `t`.
    pub leaked: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DiffusionTrace {
    pub records: Vec<TraceRecord>,
}

impl DiffusionTrace {
    pub fn max_mass_defect(&self, reference: f64) -> f64 {
        self.records
            .iter()
            .map(|r| (r.mass - reference).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_fluidity(&self) -> f64 {
        self.records.iter().map(|r| r.d).fold(f64::INFINITY, f64::min)
    }

    pub fn max_density(&self) -> f64 {
        self.records.iter().map(|r| r.max_p).fold(0.0, f64::max)
    }

    pub fn min_density(&self) -> f64 {
        self.records.iter().map(|r| r.min_p).fold(f64::INFINITY, f64::min)
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
    /// One record per step, starting at t = 0.
    pub trace: DiffusionTrace,
    /// D + ε used on each step interval.
    pub a_used: Vec<f64>,
    /// Source fluidity released on each step interval.
    pub d_source: Vec<f64>,
    pub dt: f64,
    pub alpha: f64,
    pub protocol: ShearProtocol,
    pub config: EvolveConfig,
}

impl Trajectory {
    pub fn initial(&self) -> &DensityField {
        &self.fields[0]
    }

    pub fn last(&self) -> &DensityField {
        self.fields.last().expect("at least the initial field")
    }

    pub fn a_history(&self) -> Result<StepFunction> {
        StepFunction::uniform(self.dt, self.a_used.clone())
    }

    pub fn dq_history(&self) -> Result<StepFunction> {
        StepFunction::uniform(self.dt, self.d_source.clone())
    }
}

/// Integrates from `p0` up to `config.t_end`.
pub fn simulate(
    p0: &DensityField,
    protocol: &ShearProtocol,
    config: &EvolveConfig,
    alpha: f64,
) -> Result<Trajectory> {
    let steps = config.validate()?;
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    let grid = *p0.grid();
    let dt = config.dt;
    let mut st = Stepper::new(grid, alpha, config);
    let mut p = p0.values().to_vec();
    let mut leaked = 0.0;
    let record = |t: f64, values: &[f64], leaked: f64| -> Result<TraceRecord> {
        let f = DensityField::from_trusted(grid, values.to_vec());
        let o = observables(&f, alpha);
        Ok(TraceRecord {
            t,
            d: o.fluidity,
            chi: protocol.chi(t)?,
            tau: o.mean_stress,
            mass: o.mass,
            max_p: f.max_value(),
            min_p: f.min_value(),
            abs_moment: o.abs_moment,
            leaked,
        })
    };
    let mut trace = DiffusionTrace::default();
    trace.records.push(record(0.0, &p, 0.0)?);
    let mut times = vec![0.0];
    let mut fields = vec![p0.clone()];
    let mut a_used = Vec::with_capacity(steps);
    let mut d_source = Vec::with_capacity(steps);
    for k in 0..steps {
        let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let b = protocol.mean_rate(t0, t1)?;
        let (q, a, d, leak) = st.step(&p, b, dt)?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite density at t = {t1}")));
        }
        p = q;
        leaked += leak;
        a_used.push(a);
        d_source.push(d);
        trace.records.push(record(t1, &p, leaked)?);
        if (k + 1) % config.record_every == 0 || k + 1 == steps {
            times.push(t1);
            fields.push(DensityField::from_trusted(grid, p.clone()));
        }
    }
    Ok(Trajectory {
        times,
        fields,
        trace,
        a_used,
        d_source,
        dt,
        alpha,
        protocol: protocol.clone(),
        config: config.clone(),
    })
}

/// First recorded time at which D is positive; 0 if D(p0) > 0 and the
/// horizon if D never activates. D is read as constant on [t_k, t_{k+1}).
pub fn stagnation_time(trace: &DiffusionTrace) -> Result<f64> {
    let Some(last) = trace.records.last() else {
        return invalid("empty trace");
    };
    Ok(trace.records.iter().find(|r| r.d > 0.0).map_or(last.t, |r| r.t))
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichEntry {
    pub t: f64,
    /// max over cells of (lower − p)₊.
    pub lower_violation: f64,
    /// max over cells of (p − upper)₊.
    pub upper_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub entries: Vec<SandwichEntry>,
    pub max_lower_violation: f64,
    pub max_upper_violation: f64,
}

impl SandwichReport {
    pub fn max_violation(&self) -> f64 {
        self.max_lower_violation.max(self.max_upper_violation)
    }
}

/// Compares every stored snapshot with the envelopes built from the
/// trajectory's own coefficient histories.
pub fn verify_sandwich(traj: &Trajectory, alpha: f64) -> Result<SandwichReport> {
    let a = traj.a_history()?;
    let dq = traj.dq_history()?;
    let p0 = traj.initial();
    let entries: Vec<SandwichEntry> = traj
        .times
        .par_iter()
        .zip(traj.fields.par_iter())
        .map(|(&t, f)| -> Result<SandwichEntry> {
            let env = envelopes(p0, &a, &dq, &traj.protocol, alpha, t)?;
            let mut lo: f64 = 0.0;
            let mut hi: f64 = 0.0;
            for ((p, l), u) in f.values().iter().zip(env.lower.values()).zip(env.upper.values()) {
                lo = lo.max(l - p);
                hi = hi.max(p - u);
            }
            Ok(SandwichEntry {
                t,
                lower_violation: lo,
                upper_violation: hi,
            })
        })
        .collect::<Result<_>>()?;
    let max_lower_violation = entries.iter().map(|e| e.lower_violation).fold(0.0, f64::max);
    let max_upper_violation = entries.iter().map(|e| e.upper_violation).fold(0.0, f64::max);
    Ok(SandwichReport {
        entries,
        max_lower_violation,
        max_upper_violation,
    })
}

/// L²(t, σ) distance between two snapshot sequences on common times,
/// trapezoidal in time, restricted to t ≥ `t_from`.
pub fn l2_time_distance(times: &[f64], a: &[DensityField], b: &[DensityField], t_from: f64) -> f64 {
    let sq: Vec<(f64, f64)> = times
        .iter()
        .zip(a.iter().zip(b))
        .filter(|(t, _)| **t >= t_from - 1e-12)
        .map(|(t, (x, y))| (*t, x.l2_distance(y).powi(2)))
        .collect();
    let total: f64 = sq
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    total.sqrt()
}

/// What the ε → 0 limit is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitReference {
    /// Nondegenerate data: only successive runs are compared.
    None,
    /// Degenerate data with a unique solution: the datum itself.
    Steady,
    /// Degenerate non-unique data: the branch leaving p0 at t = 0.
    Branch,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    /// d(p_{ε_k}, p_{ε_{k+1}}) over [t_from, T].
    pub successive: Vec<f64>,
    pub decreasing: bool,
    pub reference: LimitReference,
    /// Distance of each run to the reference, when there is one.
    pub to_reference: Vec<f64>,
    pub t_from: f64,
    pub min_fluidity: Vec<f64>,
}

/// Runs the same problem for each ε and measures how the runs approach
/// each other and, for degenerate data, the predicted limit.
///
/// The branch comparison needs the reduced model (`sink` and `source` off).
pub fn viscosity_sweep(
    p0: &DensityField,
    protocol: &ShearProtocol,
    alpha: f64,
    eps_list: &[f64],
    base: &EvolveConfig,
    t_from: f64,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return invalid("empty epsilon list");
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("epsilon list must be positive and strictly decreasing");
    }
    let runs: Vec<Trajectory> = eps_list
        .par_iter()
        .map(|&eps| {
            let cfg = EvolveConfig {
                epsilon: eps,
                ..base.clone()
            };
            simulate(p0, protocol, &cfg, alpha)
        })
        .collect::<Result<_>>()?;
    let times = runs[0].times.clone();
    let successive: Vec<f64> = runs
        .windows(2)
        .map(|w| l2_time_distance(&times, &w[0].fields, &w[1].fields, t_from))
        .collect();
    let decreasing = successive.windows(2).all(|w| w[1] < w[0]);

    let degenerate = crate::observables::fluidity(p0, alpha) == 0.0;
    let (reference, to_reference) = if !degenerate {
        (LimitReference::None, Vec::new())
    } else {
        let report = classify(p0, alpha)?;
        match report.verdict {
            Verdict::NonUnique => {
                if base.sink || base.source || !protocol.is_zero() {
                    return invalid(
                        "branch comparison applies to the reduced model: zero shear, sink and source off",
                    );
                }
                let prof = escape_profile(p0, alpha, base.gamma, base.t_end)?;
                let refs: Vec<DensityField> = times
                    .iter()
                    .map(|&t| {
                        let z = prof.z_at(t)?;
                        Ok(reconstruct_from_integral(p0, z, base.gamma, t))
                    })
                    .collect::<Result<_>>()?;
                let d = runs
                    .iter()
                    .map(|r| l2_time_distance(&times, &r.fields, &refs, t_from))
                    .collect();
                (LimitReference::Branch, d)
            }
            Verdict::Unique => {
                let refs = vec![p0.clone(); times.len()];
                let d = runs
                    .iter()
                    .map(|r| l2_time_distance(&times, &r.fields, &refs, t_from))
                    .collect();
                (LimitReference::Steady, d)
            }
            Verdict::Inconclusive => (LimitReference::None, Vec::new()),
        }
    };
    Ok(SweepReport {
        eps: eps_list.to_vec(),
        successive,
        decreasing,
        reference,
        to_reference,
        t_from,
        min_fluidity: runs.iter().map(|r| r.trace.min_fluidity()).collect(),
    })
}
