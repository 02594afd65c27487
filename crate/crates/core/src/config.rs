//! Run configuration: a TOML document with one table per concern.
//!
//! ```toml
//! scenario = "evolve"          # optional when given on the command line
//!
//! [model]                      # ModelParams; every key optional
//! alpha = 1.0
//! half_width = 8.0
//! n_cells = 1600
//!
//! [initial]                    # evolve, degeneracy, sweep
//! kind = "gaussian"            # uniform | gaussian | steady | file
//! mean = 0.0
//! width = 1.0
//!
//! [protocol]                   # either `rate` or `pieces`
//! rate = 0.0
//! # pieces = [{ t_start = 0.0, rate = 1.0 }, { t_start = 0.5, rate = 0.0 }]
//!
//! [evolve]                     # EvolveConfig minus epsilon (taken from [model])
//! dt = 1e-3
//! t_end = 1.0
//!
//! [output]
//! snapshot_times = [0.0, 0.5, 1.0]
//! ```
//!
//! Scenario tables: `[steady] b`, `[flowcurve] b = [...]`,
//! `[degeneracy] t_end, gamma, intervals`, `[sweep] eps = [...], t_from`.
//! Unknown keys are rejected. Overrides use dotted paths, e.g.
//! `evolve.dt=5e-4` or `initial.kind="uniform"`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::grid::{DensityField, ModelParams, StressGrid};
use crate::protocol::{ShearPiece, ShearProtocol};
use crate::steady::{steady_sheared, steady_zero_shear, ZeroShear};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Evolve,
    Steady,
    Flowcurve,
    Degeneracy,
    Sweep,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Evolve => "evolve",
            Scenario::Steady => "steady",
            Scenario::Flowcurve => "flowcurve",
            Scenario::Degeneracy => "degeneracy",
            Scenario::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        mean: f64,
        width: f64,
    },
    /// Stationary profile for (alpha, b); alpha defaults to the model's.
    Steady {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default)]
        b: f64,
    },
    /// CSV with header `sigma,p`; linearly interpolated to cell centers,
    /// zero outside the sampled range.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<ShearPiece>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub dt: f64,
    pub t_end: f64,
    pub picard_iters: usize,
    pub record_every: usize,
    pub sink: bool,
    pub source: bool,
    pub gamma: f64,
    /// Also compare stored snapshots with the analytic envelopes.
    pub check_sandwich: bool,
}

impl Default for EvolveSection {
    fn default() -> Self {
        let e = EvolveConfig::default();
        Self {
            dt: e.dt,
            t_end: e.t_end,
            picard_iters: e.picard_iters,
            record_every: e.record_every,
            sink: e.sink,
            source: e.source,
            gamma: e.gamma,
            check_sandwich: false,
        }
    }
}

impl EvolveSection {
    pub fn to_config(&self, epsilon: f64) -> EvolveConfig {
        EvolveConfig {
            dt: self.dt,
            t_end: self.t_end,
            epsilon,
            picard_iters: self.picard_iters,
            record_every: self.record_every,
            sink: self.sink,
            source: self.source,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadySection {
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowcurveSection {
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegeneracySection {
    /// Horizon of the escape profile table (written for non-unique data).
    pub t_end: f64,
    pub gamma: f64,
    pub intervals: usize,
}

impl Default for DegeneracySection {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            gamma: 0.0,
            intervals: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    pub t_from: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eps: vec![1e-2, 1e-3, 1e-4],
            t_from: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Times at which evolve writes (sigma, p) profiles; the nearest stored
    /// snapshot is used.
    pub snapshot_times: Vec<f64>,
}

/// The document as written, before scenario checks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flowcurve: Option<FlowcurveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<DegeneracySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

/// Validated configuration for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    pub grid: StressGrid,
    pub protocol: ShearProtocol,
    pub raw: RawConfig,
}

impl RunConfig {
    /// The fully resolved document; parsing it again yields the same run.
    pub fn to_toml(&self) -> String {
        let mut raw = self.raw.clone();
        raw.scenario = Some(self.scenario);
        raw.protocol = Some(ProtocolSection {
            rate: None,
            pieces: Some(self.protocol.pieces().to_vec()),
        });
        match self.scenario {
            Scenario::Evolve => {
                raw.evolve.get_or_insert_with(EvolveSection::default);
                raw.output.get_or_insert_with(OutputSection::default);
            }
            Scenario::Degeneracy => {
                raw.degeneracy.get_or_insert_with(DegeneracySection::default);
            }
            Scenario::Sweep => {
                raw.evolve.get_or_insert_with(EvolveSection::default);
            }
            Scenario::Steady | Scenario::Flowcurve => {}
        }
        toml::to_string(&raw).expect("config serializes")
    }

    pub fn evolve(&self) -> EvolveSection {
        self.raw.evolve.clone().unwrap_or_default()
    }

    /// Builds the initial density on the grid. Renormalization to unit mass
    /// is applied here and logged with its factor.
    pub fn initial_field(&self, base_dir: &Path) -> Result<DensityField> {
        let Some(ic) = &self.raw.initial else {
            return Err(Error::Config("missing [initial] section".into()));
        };
        let g = self.grid;
        let field = match ic {
            InitialCondition::Uniform { a, b } => DensityField::uniform(g, *a, *b)?,
            InitialCondition::Gaussian { mean, width } => DensityField::gaussian(g, *mean, *width)?,
            InitialCondition::Steady { alpha, b } => {
                let a = alpha.unwrap_or(self.params.alpha);
                if *b == 0.0 {
                    match steady_zero_shear(a, &g)? {
                        ZeroShear::Fluid(s) => s.profile,
                        ZeroShear::DegenerateFamily { .. } => {
                            return Err(Error::Config(format!(
                                "initial.kind = \"steady\" with b = 0 needs alpha > 1/2, got {a}"
                            )))
                        }
                    }
                } else {
                    steady_sheared(a, *b, &g)?.profile
                }
            }
            InitialCondition::File { path } => load_profile_csv(&resolve(base_dir, path), g)?,
        };
        let (normalized, factor) = field.normalized()?;
        if factor != 1.0 {
            log::info!("initial condition renormalized by factor {factor:.16e}");
        }
        Ok(normalized)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads `sigma,p` samples and interpolates them to cell centers.
pub fn load_profile_csv(path: &Path, grid: StressGrid) -> Result<DensityField> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (k, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
        let (s, p) = rec.map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), k + 2)))?;
        if !(s.is_finite() && p.is_finite() && p >= 0.0) {
            return Err(Error::Config(format!(
                "{} row {}: need finite sigma and p ≥ 0, got ({s}, {p})",
                path.display(),
                k + 2
            )));
        }
        pts.push((s, p));
    }
    if pts.len() < 2 {
        return Err(Error::Config(format!(
            "{}: need at least two samples",
            path.display()
        )));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Config(format!(
            "{}: sigma must increase strictly",
            path.display()
        )));
    }
    let values = grid
        .centers()
        .into_iter()
        .map(|c| {
            if c < pts[0].0 || c > pts[pts.len() - 1].0 {
                return 0.0;
            }
            let j = pts.partition_point(|q| q.0 <= c).clamp(1, pts.len() - 1);
            let ((x0, y0), (x1, y1)) = (pts[j - 1], pts[j]);
            y0 + (y1 - y0) * (c - x0) / (x1 - x0)
        })
        .collect();
    DensityField::new(grid, values)
}

/// Applies `key=value` overrides to a parsed TOML table.
fn apply_override(doc: &mut toml::Table, item: &str) -> std::result::Result<(), String> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| format!("override `{item}` is not of the form key=value"))?;
    let key = key.trim();
    let value = value.trim();
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override key `{key}` has an empty segment"));
    }
    let mut cur = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("override `{key}`: `{p}` is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Parses and validates a configuration, returning every problem found.
pub fn parse_config_diagnostics(
    text: &str,
    scenario: Option<Scenario>,
    overrides: &[String],
) -> std::result::Result<RunConfig, Vec<String>> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| vec![e.to_string()])?;
    let mut diags = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut doc, o) {
            diags.push(e);
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let raw: RawConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| vec![e.to_string()])?;

    let scenario = match (scenario, raw.scenario) {
        (Some(a), Some(b)) if a != b => {
            diags.push(format!(
                "scenario `{}` requested but the config declares `{}`",
                a.as_str(),
                b.as_str()
            ));
            a
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            diags.push("no scenario: pass a subcommand or set `scenario`".into());
            return Err(diags);
        }
    };

    let params = raw.model.clone();
    let grid = match params.validate() {
        Ok(()) => params.grid().ok(),
        Err(e) => {
            diags.push(format!("[model] {e}"));
            None
        }
    };

    let protocol = match &raw.protocol {
        None => Some(ShearProtocol::constant(0.0)),
        Some(ProtocolSection {
            rate: Some(_),
            pieces: Some(_),
        }) => {
            diags.push("[protocol] give either `rate` or `pieces`, not both".into());
            None
        }
        Some(ProtocolSection { rate: Some(r), .. }) => {
            if r.is_finite() {
                Some(ShearProtocol::constant(*r))
            } else {
                diags.push(format!("[protocol] rate must be finite, got {r}"));
                None
            }
        }
        Some(ProtocolSection { pieces: Some(p), .. }) => match ShearProtocol::new(p.clone()) {
            Ok(p) => Some(p),
            Err(e) => {
                diags.push(format!("[protocol] {e}"));
                None
            }
        },
        Some(_) => Some(ShearProtocol::constant(0.0)),
    };

    let need = |present: bool, name: &str, diags: &mut Vec<String>| {
        if !present {
            diags.push(format!(
                "scenario `{}` needs a [{name}] section",
                scenario.as_str()
            ));
        }
    };
    match scenario {
        Scenario::Evolve => {
            need(raw.initial.is_some(), "initial", &mut diags);
            need(raw.evolve.is_some(), "evolve", &mut diags);
        }
        Scenario::Steady => need(raw.steady.is_some(), "steady", &mut diags),
        Scenario::Flowcurve => need(raw.flowcurve.is_some(), "flowcurve", &mut diags),
        Scenario::Degeneracy => need(raw.initial.is_some(), "initial", &mut diags),
        Scenario::Sweep => {
            need(raw.initial.is_some(), "initial", &mut diags);
            need(raw.sweep.is_some(), "sweep", &mut diags);
            need(raw.evolve.is_some(), "evolve", &mut diags);
        }
    }

    if let Some(ev) = &raw.evolve {
        if matches!(scenario, Scenario::Evolve | Scenario::Sweep) {
            if let Err(e) = ev.to_config(params.epsilon.max(0.0)).validate() {
                diags.push(format!("[evolve] {e}"));
            }
        }
    }
    if let Some(fc) = &raw.flowcurve {
        if fc.b.is_empty() {
            diags.push("[flowcurve] b list is empty".into());
        }
        if fc.b.contains(&0.0) {
            diags.push(
                "[flowcurve] b list contains 0: sheared states need b ≠ 0; use the steady scenario with b = 0 for the zero-shear state"
                    .into(),
            );
        }
        if fc.b.iter().any(|b| !b.is_finite()) {
            diags.push("[flowcurve] b values must be finite".into());
        }
    }
    if let Some(sw) = &raw.sweep {
        if sw.eps.is_empty() || sw.eps.iter().any(|e| !(*e > 0.0)) || sw.eps.windows(2).any(|w| w[1] >= w[0])
        {
            diags.push("[sweep] eps must be a nonempty, positive, strictly decreasing list".into());
        }
    }
    if let Some(dg) = &raw.degeneracy {
        if !(dg.t_end > 0.0) || !(dg.gamma >= 0.0) || dg.intervals < 4 {
            diags.push("[degeneracy] need t_end > 0, gamma ≥ 0 and intervals ≥ 4".into());
        }
    }
    if let Some(InitialCondition::Steady { alpha: Some(a), .. }) = &raw.initial {
        if !(*a > 0.0) {
            diags.push(format!("[initial] steady alpha must be positive, got {a}"));
        }
    }

    match (grid, protocol) {
        (Some(grid), Some(protocol)) if diags.is_empty() => Ok(RunConfig {
            scenario,
            params,
            grid,
            protocol,
            raw,
        }),
        _ => Err(diags),
    }
}

/// As [`parse_config_diagnostics`], folding diagnostics into one error.
pub fn parse_config(text: &str, scenario: Option<Scenario>, overrides: &[String]) -> Result<RunConfig> {
    parse_config_diagnostics(text, scenario, overrides).map_err(|d| Error::Config(d.join("\n")))
}
