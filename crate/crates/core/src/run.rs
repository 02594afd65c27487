//! Scenario dispatch and file emission.
//!
//! Every CSV has a one-line header and prints floats as `{:.16e}` (17
//! significant digits, exact round trip). JSON reports use serde_json's
//! shortest round-trip form. `manifest.toml` is the resolved configuration
//! and can be fed back to reproduce the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytic::{apriori_bounds, BoundsReport};
use crate::config::{RunConfig, Scenario};
use crate::degeneracy::{classify_under, escape_profile_with, DegeneracyReport, EscapeOptions, Verdict};
use crate::error::Result;
use crate::evolve::{simulate, stagnation_time, verify_sandwich, viscosity_sweep, SandwichReport};
use crate::grid::{DensityField, StressGrid};
use crate::observables::fluidity;
use crate::steady::{flow_curve, steady_residual, steady_sheared, steady_zero_shear, SteadyState, ZeroShear};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(header).map_err(csv_io)?;
    for r in rows {
        w.write_record(r.into_iter().map(num)).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.into()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// (σ, p) at cell centers.
fn write_field(path: &Path, f: &DensityField) -> Result<()> {
    let g = f.grid();
    write_csv(
        path,
        &["sigma", "p"],
        f.values().iter().enumerate().map(|(i, v)| vec![g.center(i), *v]),
    )
}

#[derive(Serialize)]
struct EvolveSummary {
    t_end: f64,
    steps: usize,
    stagnation_time: f64,
    min_fluidity: f64,
    max_density: f64,
    min_density: f64,
    max_mass_defect: f64,
    leaked: f64,
    snapshot_times: Vec<f64>,
    bounds: BoundsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    sandwich: Option<SandwichReport>,
}

#[derive(Serialize)]
struct SteadyOutput<'a> {
    kind: &'static str,
    alpha: f64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    state: Option<&'a SteadyState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_weak: Option<f64>,
}

#[derive(Serialize)]
struct DegeneracyOutput {
    degenerate: bool,
    fluidity: f64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    report: Option<DegeneracyReport>,
}

#[derive(Serialize)]
struct FlowSummary {
    alpha: f64,
    odd_symmetry_gap: f64,
}

/// Runs the scenario, writing into `out_dir`. Relative input paths are
/// resolved against `base_dir`. Returns the files written.
pub fn run(config: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let alpha = config.params.alpha;
    let grid = config.grid;
    match config.scenario {
        Scenario::Evolve => run_evolve(config, base_dir, out_dir, &mut files)?,
        Scenario::Steady => {
            let b = config.raw.steady.clone().unwrap_or_default().b;
            let state = if b == 0.0 {
                match steady_zero_shear(alpha, &grid)? {
                    ZeroShear::Fluid(s) => Some(s),
                    ZeroShear::DegenerateFamily { .. } => None,
                }
            } else {
                Some(steady_sheared(alpha, b, &grid)?)
            };
            if let Some(s) = &state {
                let p = out_dir.join("profile.csv");
                write_edge_profile(&p, s, &grid)?;
                files.push(p);
            }
            let out = SteadyOutput {
                kind: if state.is_some() {
                    "fluid"
                } else {
                    "degenerate-family"
                },
                alpha,
                state: state.as_ref(),
                residual_weak: state.as_ref().map(|s| steady_residual(s, &grid).weak_norm),
            };
            let p = out_dir.join("steady.json");
            write_json(&p, &out)?;
            files.push(p);
        }
        Scenario::Flowcurve => {
            let bs = config.raw.flowcurve.clone().unwrap_or_default().b;
            let curve = flow_curve(alpha, &bs, &grid)?;
            let p = out_dir.join("flowcurve.csv");
            write_csv(
                &p,
                &["b", "D", "tau"],
                curve.points.iter().map(|q| vec![q.b, q.d, q.tau]),
            )?;
            files.push(p);
            let p = out_dir.join("flowcurve.json");
            write_json(
                &p,
                &FlowSummary {
                    alpha,
                    odd_symmetry_gap: curve.odd_symmetry_gap,
                },
            )?;
            files.push(p);
        }
        Scenario::Degeneracy => {
            let p0 = config.initial_field(base_dir)?;
            let d0 = fluidity(&p0, alpha);
            let report = if d0 > 0.0 {
                None
            } else {
                Some(classify_under(&p0, alpha, &config.protocol)?)
            };
            if let Some(r) = &report {
                if r.verdict == Verdict::NonUnique {
                    let dg = config.raw.degeneracy.clone().unwrap_or_default();
                    let prof = escape_profile_with(
                        &p0,
                        alpha,
                        dg.gamma,
                        dg.t_end,
                        EscapeOptions {
                            intervals: dg.intervals,
                            tol_ode: config.params.tol_ode,
                        },
                    )?;
                    let p = out_dir.join("escape.csv");
                    write_csv(
                        &p,
                        &["t", "z", "rate"],
                        prof.knots
                            .iter()
                            .zip(&prof.rates)
                            .map(|((t, z), r)| vec![*t, *z, *r]),
                    )?;
                    files.push(p);
                }
            }
            let p = out_dir.join("degeneracy.json");
            write_json(
                &p,
                &DegeneracyOutput {
                    degenerate: d0 == 0.0,
                    fluidity: d0,
                    report,
                },
            )?;
            files.push(p);
        }
        Scenario::Sweep => {
            let p0 = config.initial_field(base_dir)?;
            let sw = config.raw.sweep.clone().unwrap_or_default();
            let base = config.evolve().to_config(config.params.epsilon);
            let rep = viscosity_sweep(&p0, &config.protocol, alpha, &sw.eps, &base, sw.t_from)?;
            let p = out_dir.join("sweep.json");
            write_json(&p, &rep)?;
            files.push(p);
        }
    }
    let p = out_dir.join("manifest.toml");
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest = format!(
        "# hl-lab {}\n# outputs: {}\n{}",
        env!("CARGO_PKG_VERSION"),
        names.join(", "),
        config.to_toml()
    );
    fs::write(&p, manifest)?;
    files.push(p);
    Ok(files)
}

/// Point values of the analytic profile at every cell edge, so σ = 0 and
/// ±1 appear as rows.
fn write_edge_profile(path: &Path, s: &SteadyState, grid: &StressGrid) -> Result<()> {
    write_csv(
        path,
        &["sigma", "p"],
        grid.edges().into_iter().map(|x| vec![x, s.shape.value(x)]),
    )
}

fn run_evolve(config: &RunConfig, base_dir: &Path, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let alpha = config.params.alpha;
    let p0 = config.initial_field(base_dir)?;
    let section = config.evolve();
    let cfg = section.to_config(config.params.epsilon);
    let traj = simulate(&p0, &config.protocol, &cfg, alpha)?;

    let p = out_dir.join("trace.csv");
    write_csv(
        &p,
        &["t", "D", "tau", "mass", "maxp", "chi"],
        traj.trace
            .records
            .iter()
            .map(|r| vec![r.t, r.d, r.tau, r.mass, r.max_p, r.chi]),
    )?;
    files.push(p);

    let wanted = config.raw.output.clone().unwrap_or_default().snapshot_times;
    let mut written = Vec::new();
    for (k, t) in wanted.iter().enumerate() {
        let j = traj
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        let p = out_dir.join(format!("profile_{k:03}.csv"));
        write_field(&p, &traj.fields[j])?;
        files.push(p);
        written.push(traj.times[j]);
    }

    let sandwich = if section.check_sandwich {
        Some(verify_sandwich(&traj, alpha)?)
    } else {
        None
    };
    let summary = EvolveSummary {
        t_end: cfg.t_end,
        steps: traj.a_used.len(),
        stagnation_time: stagnation_time(&traj.trace)?,
        min_fluidity: traj.trace.min_fluidity(),
        max_density: traj.trace.max_density(),
        min_density: traj.trace.min_density(),
        max_mass_defect: traj.trace.max_mass_defect(p0.mass()),
        leaked: traj.trace.records.last().map_or(0.0, |r| r.leaked),
        snapshot_times: written,
        bounds: apriori_bounds(&p0, &config.protocol, alpha, cfg.t_end)?,
        sandwich,
    };
    let p = out_dir.join("summary.json");
    write_json(&p, &summary)?;
    files.push(p);
    Ok(())
}
