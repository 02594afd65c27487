//! C ABI over `hl_core`.
//!
//! Objects cross the boundary as opaque handles returned through out
//! pointers and released with the matching `hl_*_free`. Every fallible
//! call returns an [`HlStatus`]; on failure a message is kept per thread and
//! can be read with [`hl_last_error_message`]. Panics are caught and
//! reported as `HL_STATUS_PANIC`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hl_core::degeneracy::{classify, Verdict};
use hl_core::evolve::{simulate, stagnation_time, EvolveConfig, Trajectory};
use hl_core::steady::{steady_sheared, steady_zero_shear, ZeroShear};
use hl_core::{build_grid, observables, parse_config, DensityField, Error, Scenario, ShearProtocol};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Grid = 3,
    Cfl = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    BufferTooSmall = 8,
    /// Zero shear with alpha ≤ 1/2: no fluid stationary state exists.
    DegenerateFamily = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlVerdict {
    Unique = 0,
    NonUnique = 1,
    Inconclusive = 2,
    /// D(p0) > 0: the equation is not degenerate at t = 0.
    NotDegenerate = 3,
}

/// Cell-averaged density on a stress grid.
pub struct HlField {
    inner: DensityField,
}

/// Result of a time integration.
pub struct HlTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        Error::Grid(_) => HlStatus::Grid,
        Error::InvalidInput(_) => HlStatus::InvalidInput,
        Error::Cfl { .. } => HlStatus::Cfl,
        Error::Numerical(_) => HlStatus::Numerical,
        Error::Config(_) => HlStatus::Config,
        Error::Io(_) => HlStatus::Io,
    }
}

struct Failure(HlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            HlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(HlStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn field_arg<'a>(p: *const HlField) -> Result<&'a DensityField, Failure> {
    p.as_ref().map(|f| &f.inner).ok_or_else(|| null("field"))
}

fn boxed_field(f: DensityField) -> *mut HlField {
    Box::into_raw(Box::new(HlField { inner: f }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the calling thread's last error message, without the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn hl_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated). Fails with
/// `HL_STATUS_BUFFER_TOO_SMALL` if `len` cannot hold it.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hl_last_error_message(buf: *mut c_char, len: usize) -> HlStatus {
    if buf.is_null() {
        return HlStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if e.len() + 1 > len {
            return HlStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(e.as_ptr(), buf.cast(), e.len());
        *buf.add(e.len()) = 0;
        HlStatus::Ok
    })
}

/// Uniform density on [a, b] over a grid of `n_cells` on [−half_width, half_width].
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`hl_field_free`].
#[no_mangle]
pub unsafe extern "C" fn hl_field_uniform(
    half_width: f64,
    n_cells: usize,
    a: f64,
    b: f64,
    out: *mut *mut HlField,
) -> HlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = build_grid(half_width, n_cells)?;
        *out = boxed_field(DensityField::uniform(g, a, b)?);
        Ok(())
    })
}

/// Normal density with the given mean and standard deviation, cell-averaged
/// and renormalized to unit mass on the grid.
///
/// # Safety
/// As [`hl_field_uniform`].
#[no_mangle]
pub unsafe extern "C" fn hl_field_gaussian(
    half_width: f64,
    n_cells: usize,
    mean: f64,
    width: f64,
    out: *mut *mut HlField,
) -> HlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = build_grid(half_width, n_cells)?;
        *out = boxed_field(DensityField::gaussian(g, mean, width)?.normalized()?.0);
        Ok(())
    })
}

/// Field from `n_cells` nonnegative cell averages (not renormalized).
///
/// # Safety
/// `values` must point to `n_cells` readable doubles; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn hl_field_from_values(
    half_width: f64,
    n_cells: usize,
    values: *const f64,
    out: *mut *mut HlField,
) -> HlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let g = build_grid(half_width, n_cells)?;
        let v = std::slice::from_raw_parts(values, n_cells).to_vec();
        *out = boxed_field(DensityField::new(g, v)?);
        Ok(())
    })
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_field_len(field: *const HlField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.values().len())
}

/// Copies the cell averages into `buf`.
///
/// # Safety
/// `field` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_field_values(field: *const HlField, buf: *mut f64, len: usize) -> HlStatus {
    guard(|| {
        let f = field_arg(field)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = f.values();
        if len < v.len() {
            return Err(Failure(
                HlStatus::BufferTooSmall,
                format!("buffer holds {len} values, field has {}", v.len()),
            ));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// Mass, fluidity D, mean stress and absolute first moment of a field.
///
/// # Safety
/// `field` must be a live handle; each output pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn hl_field_observables(
    field: *const HlField,
    alpha: f64,
    mass: *mut f64,
    fluidity: *mut f64,
    mean_stress: *mut f64,
    abs_moment: *mut f64,
) -> HlStatus {
    guard(|| {
        let f = field_arg(field)?;
        if !(alpha > 0.0) {
            return Err(Failure(
                HlStatus::InvalidInput,
                format!("alpha must be positive, got {alpha}"),
            ));
        }
        let o = observables(f, alpha);
        for (p, v) in [
            (mass, o.mass),
            (fluidity, o.fluidity),
            (mean_stress, o.mean_stress),
            (abs_moment, o.abs_moment),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Releases a field handle; null is ignored.
///
/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_field_free(field: *mut HlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Integrates from `p0` under constant shear `rate` up to `t_end`.
///
/// # Safety
/// `p0` must be a live handle; `out` receives a handle to free with
/// [`hl_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn hl_simulate(
    p0: *const HlField,
    rate: f64,
    alpha: f64,
    epsilon: f64,
    dt: f64,
    t_end: f64,
    picard_iters: usize,
    record_every: usize,
    out: *mut *mut HlTrajectory,
) -> HlStatus {
    guard(|| {
        let p0 = field_arg(p0)?;
        let out = out_arg(out, "out")?;
        if !rate.is_finite() {
            return Err(Failure(HlStatus::InvalidInput, "rate must be finite".into()));
        }
        let cfg = EvolveConfig {
            dt,
            t_end,
            epsilon,
            picard_iters,
            record_every,
            ..EvolveConfig::default()
        };
        let traj = simulate(p0, &ShearProtocol::constant(rate), &cfg, alpha)?;
        *out = Box::into_raw(Box::new(HlTrajectory { inner: traj }));
        Ok(())
    })
}

/// Number of trace records (one per step plus the initial state), or 0 for
/// a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_trajectory_records(traj: *const HlTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.trace.records.len())
}

/// Copies the trace columns t, D, tau and mass. Any column pointer may be
/// null; non-null ones must hold `len` doubles.
///
/// # Safety
/// `traj` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hl_trajectory_trace(
    traj: *const HlTrajectory,
    t: *mut f64,
    fluidity: *mut f64,
    tau: *mut f64,
    mass: *mut f64,
    len: usize,
) -> HlStatus {
    guard(|| {
        let tr = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        let recs = &tr.inner.trace.records;
        if len < recs.len() {
            return Err(Failure(
                HlStatus::BufferTooSmall,
                format!("columns hold {len} values, trace has {}", recs.len()),
            ));
        }
        for (col, get) in [
            (t, (|r: &hl_core::evolve::TraceRecord| r.t) as fn(&_) -> f64),
            (fluidity, |r| r.d),
            (tau, |r| r.tau),
            (mass, |r| r.mass),
        ] {
            if !col.is_null() {
                for (k, r) in recs.iter().enumerate() {
                    *col.add(k) = get(r);
                }
            }
        }
        Ok(())
    })
}

/// First recorded time with D > 0 (0 if D(p0) > 0, the horizon if never).
///
/// # Safety
/// `traj` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hl_trajectory_stagnation_time(traj: *const HlTrajectory, out: *mut f64) -> HlStatus {
    guard(|| {
        let tr = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        *out_arg(out, "out")? = stagnation_time(&tr.inner.trace)?;
        Ok(())
    })
}

/// New field handle holding the final state.
///
/// # Safety
/// `traj` must be a live handle; `out` as in [`hl_field_uniform`].
#[no_mangle]
pub unsafe extern "C" fn hl_trajectory_final_field(
    traj: *const HlTrajectory,
    out: *mut *mut HlField,
) -> HlStatus {
    guard(|| {
        let tr = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        *out_arg(out, "out")? = boxed_field(tr.inner.last().clone());
        Ok(())
    })
}

/// Releases a trajectory handle; null is ignored.
///
/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hl_trajectory_free(traj: *mut HlTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Stationary state for shear `b` (b = 0 uses the zero-shear closed form and
/// returns `HL_STATUS_DEGENERATE_FAMILY` when alpha ≤ 1/2). `profile` may be
/// null; otherwise it receives the cell averages as a new field handle.
///
/// # Safety
/// Output pointers must be valid or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn hl_steady_state(
    alpha: f64,
    b: f64,
    half_width: f64,
    n_cells: usize,
    fluidity: *mut f64,
    tau: *mut f64,
    profile: *mut *mut HlField,
) -> HlStatus {
    guard(|| {
        let g = build_grid(half_width, n_cells)?;
        let state = if b == 0.0 {
            match steady_zero_shear(alpha, &g)? {
                ZeroShear::Fluid(s) => s,
                ZeroShear::DegenerateFamily { .. } => {
                    return Err(Failure(
                        HlStatus::DegenerateFamily,
                        format!("alpha = {alpha} ≤ 1/2: only densities supported in [-1, 1] are stationary"),
                    ))
                }
            }
        } else {
            steady_sheared(alpha, b, &g)?
        };
        *out_arg(fluidity, "fluidity")? = state.d_value;
        if let Some(t) = tau.as_mut() {
            *t = state.tau;
        }
        if let Some(p) = profile.as_mut() {
            *p = boxed_field(state.profile);
        }
        Ok(())
    })
}

/// Uniqueness verdict for zero-shear data; `exponent` receives the fitted
/// small-x exponent of F or NaN when none was fitted. May be null.
///
/// # Safety
/// `p0` must be a live handle, `verdict` valid.
#[no_mangle]
pub unsafe extern "C" fn hl_classify(
    p0: *const HlField,
    alpha: f64,
    verdict: *mut HlVerdict,
    exponent: *mut f64,
) -> HlStatus {
    guard(|| {
        let p0 = field_arg(p0)?;
        let verdict = out_arg(verdict, "verdict")?;
        if observables(p0, alpha).fluidity > 0.0 {
            *verdict = HlVerdict::NotDegenerate;
            if let Some(e) = exponent.as_mut() {
                *e = f64::NAN;
            }
            return Ok(());
        }
        let rep = classify(p0, alpha)?;
        *verdict = match rep.verdict {
            Verdict::Unique => HlVerdict::Unique,
            Verdict::NonUnique => HlVerdict::NonUnique,
            Verdict::Inconclusive => HlVerdict::Inconclusive,
        };
        if let Some(e) = exponent.as_mut() {
            *e = rep.small_x_exponent.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Runs a scenario from TOML text, as the `hl-lab` binary does. `scenario`
/// may be null to use the one declared in the text. Relative input paths
/// resolve against `base_dir` (null for the working directory).
///
/// # Safety
/// String arguments must be NUL-terminated UTF-8 or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn hl_run_config(
    config_text: *const c_char,
    scenario: *const c_char,
    base_dir: *const c_char,
    out_dir: *const c_char,
) -> HlStatus {
    guard(|| {
        let text = str_arg(config_text, "config_text")?;
        let out = str_arg(out_dir, "out_dir")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let scenario = if scenario.is_null() {
            None
        } else {
            let s = str_arg(scenario, "scenario")?;
            Some(match s {
                "evolve" => Scenario::Evolve,
                "steady" => Scenario::Steady,
                "flowcurve" => Scenario::Flowcurve,
                "degeneracy" => Scenario::Degeneracy,
                "sweep" => Scenario::Sweep,
                other => return Err(Failure(HlStatus::Config, format!("unknown scenario `{other}`"))),
            })
        };
        let cfg = parse_config(text, scenario, &[])?;
        hl_core::run(&cfg, Path::new(base), Path::new(out))?;
        Ok(())
    })
}

/// Numeric value of a status, for bindings that cannot use the enum.
#[no_mangle]
pub extern "C" fn hl_status_code(status: HlStatus) -> c_int {
    status as c_int
}
