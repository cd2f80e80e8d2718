//! Run configuration, command implementations and output writers behind the
//! `fpt2d` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convergence::{error_ladder, assembled_mse, Family, Ladder, Metric, Reference, RefinementPlan};
use crate::error::{Error, Result};
use crate::model::{Boundary, BoundaryKind, Component, DensityField, FieldMeta, GridSpec, GridSpecInput, Model};
use crate::monte_carlo::{density_estimate, samples_to_csv, simulate, SimConfig};
use crate::quad::QuadSpec;
use crate::solver::{assemble_absorbing, assemble_crossing, solve_with, ConditionalFpt, SolverOptions, SolverOutput};
use crate::special::{normal_pdf, SeriesControl};
use crate::wiener::{f_fpt_univ, joint_fpt_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            format: Format::Csv,
        }
    }
}

/// Refinement study settings; missing steps default to the run grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "default_rungs")]
    pub rungs: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub reference: Option<Reference>,
    /// Which ladders to run; all three by default.
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
}

fn default_rungs() -> usize {
    4
}

fn default_metric() -> Metric {
    Metric::MaxAbs
}

fn default_families() -> Vec<Family> {
    vec![Family::Time, Family::Space, Family::Joint]
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            h: None,
            r: None,
            rungs: default_rungs(),
            metric: default_metric(),
            reference: None,
            families: default_families(),
        }
    }
}

/// Whole-run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub boundary: Boundary,
    pub grid: GridSpecInput,
    #[serde(default)]
    pub quad: QuadSpec,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub converge: Option<ConvergeConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks every record before any computation.
    pub fn validate(&self, cmd: Command) -> Result<GridSpec> {
        self.model.validate()?;
        self.boundary.validate_for(self.model.start())?;
        let grid = GridSpec::from_input(&self.grid, &self.model)?;
        self.quad.validate()?;
        self.solver.validate()?;
        match cmd {
            Command::Analytic => {
                if self.model.as_wiener().is_none() {
                    return Err(Error::Unsupported(
                        "no closed form for this model; use the solve command".into(),
                    ));
                }
            }
            Command::Simulate => {
                self.sim
                    .as_ref()
                    .ok_or_else(|| Error::Config("the simulate command needs a [sim] table".into()))?
                    .validate()?;
            }
            Command::Converge => {
                self.plan(&grid)?.validate(&self.model)?;
            }
            Command::Solve => self.solver.check_grid(&grid)?,
        }
        Ok(grid)
    }

    pub fn plan(&self, grid: &GridSpec) -> Result<RefinementPlan> {
        let c = self.converge.clone().unwrap_or_default();
        if c.rungs < 2 {
            return Err(Error::param("converge.rungs", "need at least two rungs"));
        }
        if c.families.is_empty() {
            return Err(Error::param("converge.families", "need at least one ladder"));
        }
        let base = (c.h.unwrap_or(grid.h), c.r.unwrap_or(grid.r1.max(grid.r2)));
        let mut plan = RefinementPlan::standard(&self.model, base, grid.horizon, c.rungs)?;
        plan.ladders = c.families.iter().map(|&f| Ladder::halving(f, base, c.rungs)).collect();
        plan.extent = [grid.m1 as f64 * grid.r1, grid.m2 as f64 * grid.r2];
        if let Some(r) = c.reference {
            plan.reference = r;
        }
        plan.solver = SolverOptions {
            residuals: false,
            ..self.solver
        };
        Ok(plan)
    }

    /// SHA-256 of the canonical JSON form, leaving out the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serialises");
        Sha256::digest(json.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Analytic,
    Solve,
    Simulate,
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Converge => "converge",
        }
    }
}

/// Header lines written in front of every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    /// The command with the flags that affect results; `--threads` and
    /// `--out` are omitted so outputs do not depend on them.
    pub command: String,
}

impl Provenance {
    pub fn new(cfg: &RunConfig, cmd: Command) -> Self {
        let mut command = format!("fpt2d {}", cmd.name());
        if cmd == Command::Simulate {
            if let Some(s) = &cfg.sim {
                let _ = write!(command, " --seed {}", s.seed);
            }
        }
        let _ = write!(command, " --format {}", format_name(cfg.output.format));
        Provenance {
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            command,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# fpt2d {}\n# config-sha256 {}\n# command: {}\n",
            self.version, self.config_sha256, self.command
        )
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// A finished output, written only after every output of a command exists.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn field_csv(field: &DensityField, prov: &Provenance) -> String {
    let mut s = prov.csv_header();
    let _ = writeln!(s, "{},{},density", field.meta.axis1_name, field.meta.axis2_name);
    for (i, a) in field.axis1.iter().enumerate() {
        for (j, b) in field.axis2.iter().enumerate() {
            let _ = writeln!(s, "{a},{b},{}", num(field.get(i, j)));
        }
    }
    s
}

#[derive(Serialize)]
struct FieldJson<'a> {
    provenance: &'a Provenance,
    label: &'a str,
    notes: &'a [String],
    axis1_name: &'a str,
    axis1: &'a [f64],
    axis2_name: &'a str,
    axis2: &'a [f64],
    /// Rows follow `axis1`; non-finite cells are `null`.
    density: Vec<&'a [f64]>,
}

pub fn field_json(field: &DensityField, prov: &Provenance) -> String {
    let doc = FieldJson {
        provenance: prov,
        label: &field.meta.label,
        notes: &field.meta.notes,
        axis1_name: &field.meta.axis1_name,
        axis1: &field.axis1,
        axis2_name: &field.meta.axis2_name,
        axis2: &field.axis2,
        density: (0..field.axis1.len()).map(|i| field.row(i)).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("field serialises") + "\n"
}

fn field_file(stem: &str, field: &DensityField, prov: &Provenance, fmt: Format) -> OutputFile {
    match fmt {
        Format::Csv => OutputFile {
            name: format!("{stem}.csv"),
            contents: field_csv(field, prov),
        },
        Format::Json => OutputFile {
            name: format!("{stem}.json"),
            contents: field_json(field, prov),
        },
    }
}

/// A table with named numeric columns, written as CSV or JSON records.
fn table_file(stem: &str, columns: &[&str], rows: &[Vec<String>], prov: &Provenance, fmt: Format) -> OutputFile {
    match fmt {
        Format::Csv => {
            let mut s = prov.csv_header();
            s += &columns.join(",");
            s.push('\n');
            for r in rows {
                s += &r.join(",");
                s.push('\n');
            }
            OutputFile {
                name: format!("{stem}.csv"),
                contents: s,
            }
        }
        Format::Json => {
            let records: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| {
                    columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| {
                            let value = match v.parse::<f64>() {
                                Ok(x) => serde_json::json!(x),
                                Err(_) if v.is_empty() => serde_json::Value::Null,
                                Err(_) => serde_json::json!(v),
                            };
                            (c.to_string(), value)
                        })
                        .collect()
                })
                .collect();
            let doc = serde_json::json!({ "provenance": prov, "rows": records });
            OutputFile {
                name: format!("{stem}.json"),
                contents: serde_json::to_string_pretty(&doc).expect("table serialises") + "\n",
            }
        }
    }
}

fn json_file(stem: &str, value: serde_json::Value, prov: &Provenance) -> OutputFile {
    let doc = serde_json::json!({ "provenance": prov, "report": value });
    OutputFile {
        name: format!("{stem}.json"),
        contents: serde_json::to_string_pretty(&doc).expect("report serialises") + "\n",
    }
}

fn positive_times(grid: &GridSpec) -> Vec<f64> {
    (1..=grid.n()).map(|k| grid.time(k)).collect()
}

fn time_field(ts: &[f64], values: Vec<f64>, label: &str, notes: Vec<String>) -> Result<DensityField> {
    DensityField::new(
        ts.to_vec(),
        ts.to_vec(),
        values,
        FieldMeta {
            label: label.into(),
            axis1_name: "t1".into(),
            axis2_name: "t2".into(),
            notes,
        },
    )
}

/// Closed-form joint density on the positive knot times and both marginal
/// passage-time densities.
pub fn cmd_analytic(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let grid = cfg.validate(Command::Analytic)?;
    let prov = Provenance::new(cfg, Command::Analytic);
    let p = cfg.model.as_wiener().expect("validated");
    let b = &cfg.boundary;
    let ts = positive_times(&grid);
    let values = joint_fpt_grid(&ts, &ts, p, b, &cfg.quad, &SeriesControl::default())?;
    let notes = if p.is_driftless() {
        vec!["driftless closed form; infinite diagonal values are written as nulls".into()]
    } else {
        vec!["diagonal cells are not defined by the drifted formula and are written as nulls".into()]
    };
    let mut values = values;
    if !p.is_driftless() {
        let nt = ts.len();
        for k in 0..nt {
            values[k * nt + k] = f64::NAN;
        }
    }
    let joint = time_field(&ts, values, "f_(T1,T2) analytic", notes)?;
    let rows = ts
        .iter()
        .map(|&t| -> Result<Vec<String>> {
            Ok(vec![
                num(t),
                num(f_fpt_univ(Component::One, t, p, b, None)?),
                num(f_fpt_univ(Component::Two, t, p, b, None)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let fmt = cfg.output.format;
    Ok(vec![
        field_file("joint", &joint, &prov, fmt),
        table_file("marginals", &["t", "f1", "f2"], &rows, &prov, fmt),
    ])
}

/// Assembled joint density from a solver output, on the positive knot times.
pub fn assemble(out: &SolverOutput, model: &Model, b: &Boundary, quad: &QuadSpec) -> Result<DensityField> {
    let ts = positive_times(&out.grid);
    let cf = ConditionalFpt::for_model(model, b, &out.grid)?;
    match b.kind {
        BoundaryKind::Absorbing => assemble_absorbing(out, model, b, &ts, |j, t, x, s| cf.eval(j, t, x, s)),
        BoundaryKind::Crossing => assemble_crossing(
            out,
            model,
            b,
            &ts,
            |j, x, t, y, s| {
                // the crossed coordinate given the other reaches its level
                let free = j.other();
                let tr = model.transition(crate::solver::slice_point(j, y, b), t - s)?;
                let (mean, var) = tr.conditional(free, b.level(j));
                Ok(cf.eval(j, t, y, s)? * normal_pdf(x, mean, var.sqrt())?)
            },
            quad,
        ),
    }
}

/// Solver fields, the assembled joint density and a diagnostics report.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let grid = cfg.validate(Command::Solve)?;
    let prov = Provenance::new(cfg, Command::Solve);
    let started = Instant::now();
    let out = solve_with(&cfg.model, &cfg.boundary, &grid, &cfg.solver)?;
    let joint = assemble(&out, &cfg.model, &cfg.boundary, &cfg.quad)?;
    let mse = match cfg.model.as_wiener() {
        Some(_) if cfg.boundary.kind == BoundaryKind::Absorbing => {
            Some(assembled_mse(&out, &cfg.model, &cfg.boundary, &cfg.quad)?)
        }
        _ => None,
    };
    let d = &out.diagnostics;
    let report = serde_json::json!({
        "grid": { "h": grid.h, "Theta": grid.horizon, "r1": grid.r1, "r2": grid.r2, "m1": grid.m1, "m2": grid.m2 },
        "negative_count": d.negative_count,
        "min_value": d.min_value,
        "negative_mass": d.negative_mass,
        "first_step_ratio": d.first_step_ratio,
        "first_step_flagged": d.first_step_flagged,
        "total_mass": d.total_mass,
        "joint_mass": joint.mass(grid.h * grid.h),
        "residual": d.residual,
        "mse_vs_closed_form": mse,
        "wall_seconds": started.elapsed().as_secs_f64(),
    });
    let fmt = cfg.output.format;
    Ok(vec![
        field_file("f1", &out.f1, &prov, fmt),
        field_file("f2", &out.f2, &prov, fmt),
        field_file("joint", &joint, &prov, fmt),
        json_file("diagnostics", report, &prov),
    ])
}

/// Simulated passage times, their histogram on the solver time grid and a
/// summary.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let grid = cfg.validate(Command::Simulate)?;
    let prov = Provenance::new(cfg, Command::Simulate);
    let sim = cfg.sim.expect("validated");
    let samples = simulate(&cfg.model, &cfg.boundary, &sim)?;
    let edges: Vec<f64> = (0..=grid.n()).map(|k| grid.time(k)).collect();
    let density = density_estimate(&samples, &edges, None)?;
    let n = samples.len() as f64;
    let mut summary = serde_json::Map::new();
    for c in Component::BOTH {
        let done: Vec<f64> = samples.iter().filter(|s| !s.censored(c)).map(|s| s.t(c)).collect();
        let k = done.len() as f64;
        let mean = done.iter().sum::<f64>() / k;
        let var = done.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
        summary.insert(
            format!("T{}", c.index() + 1),
            serde_json::json!({
                "mean_uncensored": mean,
                "var_uncensored": var,
                "censored_fraction": 1.0 - k / n,
            }),
        );
    }
    summary.insert("paths".into(), serde_json::json!(samples.len()));
    let fmt = cfg.output.format;
    let samples_file = match fmt {
        Format::Csv => OutputFile {
            name: "samples.csv".into(),
            contents: prov.csv_header() + &samples_to_csv(&samples),
        },
        Format::Json => json_file("samples", serde_json::json!(samples), &prov),
    };
    Ok(vec![
        samples_file,
        field_file("density", &density, &prov, fmt),
        json_file("summary", serde_json::Value::Object(summary), &prov),
    ])
}

/// Error ladders and fitted orders.
pub fn cmd_converge(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let grid = cfg.validate(Command::Converge)?;
    let prov = Provenance::new(cfg, Command::Converge);
    let plan = cfg.plan(&grid)?;
    let metric = cfg.converge.as_ref().map(|c| c.metric).unwrap_or(Metric::MaxAbs);
    let table = error_ladder(&cfg.model, &cfg.boundary, &plan, metric)?;
    let mut slopes = serde_json::Map::new();
    for l in &plan.ladders {
        let fit = table.slope(l.family)?;
        slopes.insert(format!("{:?}", l.family).to_lowercase(), serde_json::json!(fit));
    }
    let fmt = cfg.output.format;
    let ladder = match fmt {
        Format::Csv => OutputFile {
            name: "ladder.csv".into(),
            contents: prov.csv_header() + &table.to_csv(),
        },
        Format::Json => json_file("ladder", serde_json::json!(table), &prov),
    };
    Ok(vec![ladder, json_file("slopes", serde_json::Value::Object(slopes), &prov)])
}

pub fn run(cfg: &RunConfig, cmd: Command) -> Result<Vec<OutputFile>> {
    match cmd {
        Command::Analytic => cmd_analytic(cfg),
        Command::Solve => cmd_solve(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Converge => cmd_converge(cfg),
    }
}

pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::Unsupported(_) | Error::Io(_) => 2,
        Error::Domain(_) | Error::SingularCovariance { .. } | Error::NoConvergence { .. } | Error::Numerical(_) => 3,
    }
}
