//! Command-line front end: integrate bundled systems, evaluate virial
//! relations, classify catalog fields, and list what ships with the crate.
//!
//! Exit codes: `0` when every requested relation passes, `2` when any
//! relation fails its verdict, `1` for configuration and integration errors
//! (including trajectories cut short by a domain guard or rejected for
//! energy drift).

use std::collections::BTreeMap;
use std::env;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_partial, IntegratorConfig, State, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::classify_vector_field;
use crate::systems::{preset, preset_names, resolve_relation, BundledSystem};
use crate::virial::{virial_residual, Observable, PartitionReport, RelationKind, VirialRelation};

/// JSON Schema describing the run report, shipped with the crate.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

pub const SCHEMA_VERSION: u64 = 1;

/// Default pass threshold on `|residual|`.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;

/// Environment variable overriding the integrator step-count limit.
pub const MAX_STEPS_ENV: &str = "VIRIAL_GEO_MAX_STEPS";

const CLASSIFY_SAMPLES: usize = 64;

#[derive(Parser)]
#[command(
    name = "virial-geo",
    version,
    about = "Symmetry classification and time-averaged virial balances for mechanical systems on curved charts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Integrate a system and evaluate virial relations along the trajectory
    Run(RunArgs),
    /// Classify catalog vector fields against the system metric
    Classify(ClassifyArgs),
    /// List bundled systems, their field catalogs, and reference fixtures
    ListSystems(ListSystemsArgs),
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    let value: f64 = value
        .parse()
        .map_err(|_| format!("parameter '{key}' has a non-numeric value '{value}'"))?;
    Ok((key.to_string(), value))
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    /// JSON run-configuration file; flags override its entries
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Bundled system name (see list-systems)
    #[arg(long)]
    pub system: Option<String>,
    /// Numeric system parameter, e.g. --param radius=2 (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Named reference initial state; defaults to the system's first fixture
    #[arg(long)]
    pub fixture: Option<String>,
    /// Relation to evaluate (repeatable); defaults to every catalog field
    #[arg(long = "relation", value_name = "NAME")]
    pub relations: Vec<String>,
    /// Integrator step size
    #[arg(long)]
    pub dt: Option<f64>,
    /// Integration window length
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Pass threshold on |residual|
    #[arg(long)]
    pub tol: Option<f64>,
    /// Kinetic homogeneity degree for the homogeneous relation
    #[arg(long)]
    pub mu: Option<f64>,
    /// Potential homogeneity degree for the homogeneous relation
    #[arg(long)]
    pub nu: Option<f64>,
    /// Seed for the classification sample draw
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving report.json and trajectory.csv
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Print the JSON report to stdout instead of the text summary
    #[arg(long)]
    pub json: bool,
    /// Keep every k-th trajectory sample in the CSV
    #[arg(long)]
    pub csv_every: Option<u64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct ClassifyArgs {
    /// Bundled system name
    #[arg(long)]
    pub system: String,
    /// Numeric system parameter (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Classify a single field instead of the whole catalog
    #[arg(long)]
    pub field: Option<String>,
    /// Number of guarded sample points
    #[arg(long, default_value_t = CLASSIFY_SAMPLES)]
    pub samples: usize,
    /// Classification tolerance (default picks 1e-8 analytic / 1e-5 finite-difference)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for the sample draw
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit JSON instead of text
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct ListSystemsArgs {
    /// Emit JSON instead of text
    #[arg(long)]
    pub json: bool,
}

/// One run, as read from `--config` JSON. Every field has a default, and
/// command-line flags override file entries one by one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSelect,
    pub initial: InitialSelect,
    /// Replaces the fixture's integrator settings when present.
    pub integrator: Option<IntegratorConfig>,
    pub relations: Vec<String>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    /// Pass threshold on |residual|.
    pub tolerance: f64,
    pub seed: u64,
    pub output: OutputSelect,
    /// CSV keeps every k-th recorded sample.
    pub csv_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemSelect::default(),
            initial: InitialSelect::default(),
            integrator: None,
            relations: Vec::new(),
            mu: None,
            nu: None,
            tolerance: DEFAULT_RESIDUAL_TOL,
            seed: 0,
            output: OutputSelect::default(),
            csv_every: 10,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSelect {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSelect {
    pub fixture: Option<String>,
    pub state: Option<StateSelect>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSelect {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSelect {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u64,
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub fixture: Option<String>,
    pub initial: StateSelect,
    pub seed: u64,
    pub residual_tol: f64,
    pub integrator: IntegratorConfig,
    pub trajectory: TrajectorySummary,
    pub relations: Vec<RelationReport>,
    pub verdict: &'static str,
}

#[derive(Debug, Serialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub span: f64,
    pub energy_initial: f64,
    pub energy_drift: f64,
    pub rejected: bool,
    pub abort_time: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RelationReport {
    pub name: String,
    pub kind: &'static str,
    /// Measured classification of the relation's field, when it has one.
    pub classified: Option<String>,
    pub residual: f64,
    pub value_half: f64,
    pub balance_check: Option<f64>,
    pub g_max: Option<f64>,
    pub converged: bool,
    pub convergence_tol: f64,
    pub verdict: &'static str,
    pub partition: Option<PartitionReport>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run_command(args),
        Command::Classify(args) => classify_command(args),
        Command::ListSystems(args) => list_systems_command(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(system) = &args.system {
        cfg.system.name = system.clone();
    }
    for (key, value) in &args.params {
        cfg.system.params.insert(key.clone(), *value);
    }
    if let Some(fixture) = &args.fixture {
        cfg.initial.fixture = Some(fixture.clone());
        cfg.initial.state = None;
    }
    if !args.relations.is_empty() {
        cfg.relations = args.relations.clone();
    }
    if let Some(tol) = args.tol {
        cfg.tolerance = tol;
    }
    if let Some(mu) = args.mu {
        cfg.mu = Some(mu);
    }
    if let Some(nu) = args.nu {
        cfg.nu = Some(nu);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(every) = args.csv_every {
        cfg.csv_every = every;
    }
    if let Some(dir) = &args.output {
        fs::create_dir_all(dir)?;
        cfg.output.csv = Some(dir.join("trajectory.csv"));
        cfg.output.json = Some(dir.join("report.json"));
    }
    if cfg.system.name.is_empty() {
        return Err(Error::invalid(format!(
            "no system selected; pass --system or a config file (available: {})",
            preset_names().join(", ")
        )));
    }
    if cfg.tolerance <= 0.0 || !cfg.tolerance.is_finite() {
        return Err(Error::invalid("tolerance must be positive and finite"));
    }
    if cfg.csv_every == 0 {
        return Err(Error::invalid("csv_every must be at least 1"));
    }
    Ok(cfg)
}

/// Initial state plus the integrator settings it starts from.
fn resolve_initial(
    bundled: &BundledSystem,
    cfg: &RunConfig,
) -> Result<(Option<String>, State, IntegratorConfig)> {
    match (&cfg.initial.fixture, &cfg.initial.state) {
        (Some(_), Some(_)) => Err(Error::invalid(
            "give either initial.fixture or initial.state, not both",
        )),
        (Some(name), None) => {
            let fixture = bundled.fixture(name)?;
            Ok((
                Some(fixture.name.clone()),
                fixture.state.clone(),
                fixture.config.clone(),
            ))
        }
        (None, Some(state)) => {
            let dim = bundled.spec.dim();
            if state.q.len() != dim || state.v.len() != dim {
                return Err(Error::invalid(format!(
                    "initial state must have {dim} position and velocity components"
                )));
            }
            Ok((
                None,
                State::from_slices(&state.q, &state.v),
                IntegratorConfig::default(),
            ))
        }
        (None, None) => {
            let fixture = bundled.fixtures.first().ok_or_else(|| {
                Error::invalid(format!("system '{}' has no fixtures", bundled.preset))
            })?;
            Ok((
                Some(fixture.name.clone()),
                fixture.state.clone(),
                fixture.config.clone(),
            ))
        }
    }
}

fn resolve_relations(cfg: &RunConfig, sys: &SystemSpec) -> Result<Vec<VirialRelation>> {
    let mut names = cfg.relations.clone();
    if names.is_empty() {
        names = sys.catalog.iter().map(|e| e.name.clone()).collect();
    }
    let wants_homogeneous = |n: &str| n == "homogeneous" || n == "homogeneous-partition";
    if cfg.mu.is_some() && cfg.nu.is_some() && !names.iter().any(|n| wants_homogeneous(n)) {
        names.push("homogeneous".into());
    }
    names
        .iter()
        .map(|name| {
            if wants_homogeneous(name) {
                let (Some(mu), Some(nu)) = (cfg.mu, cfg.nu) else {
                    return Err(Error::invalid(
                        "the homogeneous relation needs both mu and nu",
                    ));
                };
                Ok(VirialRelation::new(
                    "homogeneous",
                    RelationKind::HomogeneousPartition { mu, nu },
                ))
            } else {
                resolve_relation(sys, name)
            }
        })
        .collect()
}

fn apply_env_step_limit(cfg: &mut IntegratorConfig) -> Result<()> {
    if let Ok(raw) = env::var(MAX_STEPS_ENV) {
        cfg.max_steps = raw.parse().map_err(|_| {
            Error::invalid(format!("{MAX_STEPS_ENV} must be a step count, got '{raw}'"))
        })?;
    }
    Ok(())
}

fn run_command(args: RunArgs) -> Result<i32> {
    let cfg = load_run_config(&args)?;
    let bundled = preset(&cfg.system.name, &cfg.system.params)?;
    let sys = &bundled.spec;
    let (fixture_name, initial, mut integrator) = resolve_initial(&bundled, &cfg)?;
    if let Some(file_integrator) = &cfg.integrator {
        integrator = file_integrator.clone();
    }
    if let Some(dt) = args.dt {
        integrator.dt = dt;
    }
    if let Some(t_end) = args.t_end {
        integrator.t_end = t_end;
    }
    apply_env_step_limit(&mut integrator)?;
    integrator.validate()?;

    let relations = resolve_relations(&cfg, sys)?;
    let outcome = integrate_partial(sys, &initial, &integrator)?;
    let traj = &outcome.trajectory;

    let usable = outcome.abort.is_none() && !traj.is_rejected();
    let relation_reports = if usable {
        evaluate_relations(sys, traj, &relations, cfg.tolerance, cfg.seed)?
    } else {
        Vec::new()
    };

    let verdict = if !usable {
        "rejected"
    } else if relation_reports.iter().all(|r| r.verdict == "pass") {
        "pass"
    } else {
        "fail"
    };

    let report = Report {
        schema_version: SCHEMA_VERSION,
        system: bundled.preset.clone(),
        params: cfg.system.params.clone(),
        fixture: fixture_name,
        initial: StateSelect {
            q: initial.q.coords.as_slice().to_vec(),
            v: initial.v.as_slice().to_vec(),
        },
        seed: cfg.seed,
        residual_tol: cfg.tolerance,
        integrator: integrator.clone(),
        trajectory: TrajectorySummary {
            samples: traj.len(),
            span: traj.span(),
            energy_initial: traj.energy(0),
            energy_drift: traj.meta.max_drift,
            rejected: traj.is_rejected(),
            abort_time: outcome.abort.as_ref().map(|a| a.time),
        },
        relations: relation_reports,
        verdict,
    };

    if let Some(path) = &cfg.output.csv {
        write_atomic(path, render_csv(sys, traj, &relations, cfg.csv_every).as_bytes())?;
    }
    let report_json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &cfg.output.json {
        write_atomic(path, report_json.as_bytes())?;
    }
    if args.json {
        print!("{report_json}");
    } else {
        print!("{}", render_run_text(&report));
    }
    Ok(match verdict {
        "pass" => 0,
        "fail" => 2,
        _ => 1,
    })
}

fn evaluate_relations(
    sys: &SystemSpec,
    traj: &Trajectory,
    relations: &[VirialRelation],
    residual_tol: f64,
    seed: u64,
) -> Result<Vec<RelationReport>> {
    // One shared sample draw covers every field classification.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sys.random_guarded_points(&mut rng, CLASSIFY_SAMPLES).ok();
    let classified: Vec<Option<String>> = relations
        .iter()
        .map(|rel| {
            let field = rel.kind.field()?;
            let samples = samples.as_ref()?;
            let tol = crate::geometry::default_classify_tol(&sys.metric, field);
            classify_vector_field(field, &sys.metric, samples, tol, Some(sys.guard.as_ref()))
                .ok()
                .map(|c| c.kind.label().to_string())
        })
        .collect();
    let reports: Vec<_> = relations
        .par_iter()
        .map(|rel| virial_residual(sys, traj, rel))
        .collect::<Result<_>>()?;
    Ok(reports
        .into_iter()
        .zip(classified)
        .map(|(r, classified)| {
            let pass = r.converged && r.residual.abs() <= residual_tol;
            RelationReport {
                name: r.relation,
                kind: r.kind,
                classified,
                residual: r.residual,
                value_half: r.value_half,
                balance_check: r.balance_check,
                g_max: r.g_max,
                converged: r.converged,
                convergence_tol: r.tolerance,
                verdict: if pass { "pass" } else { "fail" },
                partition: r.partition,
            }
        })
        .collect())
}

/// Trajectory samples plus per-relation observables, one row per kept sample:
/// `t`, coordinates, velocities, energy, then `G_<name>` and `A_<name>`
/// columns for each relation (`G` only where the relation carries a field).
fn render_csv(
    sys: &SystemSpec,
    traj: &Trajectory,
    relations: &[VirialRelation],
    every: u64,
) -> String {
    let dim = traj.dim();
    let columns: Vec<(String, Option<Observable>, Observable)> = relations
        .iter()
        .map(|rel| {
            let g = rel
                .kind
                .field()
                .map(|f| Observable::affine(sys, f, format!("G_{}", rel.label)));
            (rel.label.clone(), g, rel.integrand(sys))
        })
        .collect();
    let mut header = String::from("t");
    for i in 0..dim {
        write!(header, ",q{i}").unwrap();
    }
    for i in 0..dim {
        write!(header, ",v{i}").unwrap();
    }
    header.push_str(",E");
    for (label, g, _) in &columns {
        if g.is_some() {
            write!(header, ",G_{label}").unwrap();
        }
        write!(header, ",A_{label}").unwrap();
    }
    let mut out = header;
    out.push('\n');
    for i in (0..traj.len()).step_by(every.max(1) as usize) {
        let state = traj.state(i);
        write!(out, "{:.16e}", traj.time(i)).unwrap();
        for x in state.q.coords.iter() {
            write!(out, ",{x:.16e}").unwrap();
        }
        for x in state.v.iter() {
            write!(out, ",{x:.16e}").unwrap();
        }
        write!(out, ",{:.16e}", traj.energy(i)).unwrap();
        for (_, g, a) in &columns {
            if let Some(g) = g {
                write!(out, ",{:.16e}", g.eval(&state)).unwrap();
            }
            write!(out, ",{:.16e}", a.eval(&state)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn render_run_text(report: &Report) -> String {
    let mut out = String::new();
    let fixture = report.fixture.as_deref().unwrap_or("custom state");
    writeln!(
        out,
        "{} / {}: {} samples over t = {}, energy drift {:.3e}",
        report.system,
        fixture,
        report.trajectory.samples,
        report.trajectory.span,
        report.trajectory.energy_drift
    )
    .unwrap();
    if let Some(t) = report.trajectory.abort_time {
        writeln!(out, "  aborted by the domain guard at t = {t:.6}").unwrap();
    }
    if report.trajectory.rejected {
        writeln!(
            out,
            "  trajectory rejected: energy drift exceeded {:.3e}",
            report.integrator.energy_drift_limit
        )
        .unwrap();
    }
    for rel in &report.relations {
        let balance = rel
            .balance_check
            .map(|b| format!("{b:+.3e}"))
            .unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "  {:<22} {:<22} residual {:+.6e}  balance {:>10}  {}",
            rel.name, rel.kind, rel.residual, balance, rel.verdict
        )
        .unwrap();
        if let Some(p) = &rel.partition {
            writeln!(
                out,
                "    <T> = {:+.6e} (predicted {:+.6e})   <V> = {:+.6e} (predicted {:+.6e})",
                p.avg_kinetic, p.predicted_kinetic, p.avg_potential, p.predicted_potential
            )
            .unwrap();
        }
    }
    writeln!(out, "verdict: {}", report.verdict).unwrap();
    out
}

/// Write through a sibling temp file and rename, so readers never observe a
/// partially written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct ClassifyFieldReport {
    name: String,
    expected: &'static str,
    classified: String,
    matches: bool,
    max_residual: f64,
    /// Uniform factor for homothetic fields.
    factor: Option<f64>,
    /// Range of the fitted pointwise factor for proper-conformal fields.
    factor_range: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct ClassifyReport {
    system: String,
    samples: usize,
    seed: u64,
    fields: Vec<ClassifyFieldReport>,
}

fn classify_command(args: ClassifyArgs) -> Result<i32> {
    let params: BTreeMap<String, f64> = args.params.iter().cloned().collect();
    let bundled = preset(&args.system, &params)?;
    let sys = &bundled.spec;
    let entries: Vec<_> = match &args.field {
        Some(name) => vec![sys.field(name)?.clone()],
        None => sys.catalog.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let samples = sys.random_guarded_points(&mut rng, args.samples)?;
    let mut fields = Vec::new();
    for entry in &entries {
        let result = sys.classify_entry(entry, &samples, args.tol)?;
        let (factor, factor_range) = match &result.kind {
            crate::geometry::ConformalKind::Homothetic { factor } => (Some(*factor), None),
            crate::geometry::ConformalKind::ProperConformal { factor_samples } => {
                let lo = factor_samples.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
                let hi = factor_samples
                    .iter()
                    .map(|(_, c)| *c)
                    .fold(f64::NEG_INFINITY, f64::max);
                (None, Some((lo, hi)))
            }
            _ => (None, None),
        };
        fields.push(ClassifyFieldReport {
            name: entry.name.clone(),
            expected: entry.expected.label(),
            classified: result.kind.label().to_string(),
            matches: result.kind.label() == entry.expected.label(),
            max_residual: result.max_residual,
            factor,
            factor_range,
        });
    }
    let report = ClassifyReport {
        system: bundled.preset.clone(),
        samples: samples.len(),
        seed: args.seed,
        fields,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{}: {} fields at {} sample points",
            report.system,
            report.fields.len(),
            report.samples
        );
        for f in &report.fields {
            let extra = match (f.factor, f.factor_range) {
                (Some(c), _) => format!("  f = {c:.6}"),
                (None, Some((lo, hi))) => format!("  f in [{lo:.6}, {hi:.6}]"),
                _ => String::new(),
            };
            let note = if f.matches {
                String::new()
            } else {
                format!("  (expected {})", f.expected)
            };
            println!(
                "  {:<22} {:<18} residual {:.3e}{}{}",
                f.name, f.classified, f.max_residual, extra, note
            );
        }
    }
    Ok(if report.fields.iter().all(|f| f.matches) {
        0
    } else {
        2
    })
}

#[derive(Serialize)]
struct SystemListing {
    name: String,
    dim: usize,
    summary: String,
    fields: Vec<FieldListing>,
    fixtures: Vec<FixtureListing>,
}

#[derive(Serialize)]
struct FieldListing {
    name: String,
    aliases: Vec<String>,
    expected: &'static str,
}

#[derive(Serialize)]
struct FixtureListing {
    name: String,
    q: Vec<f64>,
    v: Vec<f64>,
    dt: f64,
    t_end: f64,
}

fn list_systems_command(args: ListSystemsArgs) -> Result<i32> {
    let mut listings = Vec::new();
    for name in preset_names() {
        let bundled = preset(name, &BTreeMap::new())?;
        listings.push(SystemListing {
            name: bundled.preset.clone(),
            dim: bundled.spec.dim(),
            summary: bundled.summary.clone(),
            fields: bundled
                .spec
                .catalog
                .iter()
                .map(|e| FieldListing {
                    name: e.name.clone(),
                    aliases: e.aliases.clone(),
                    expected: e.expected.label(),
                })
                .collect(),
            fixtures: bundled
                .fixtures
                .iter()
                .map(|f| FixtureListing {
                    name: f.name.clone(),
                    q: f.state.q.coords.as_slice().to_vec(),
                    v: f.state.v.as_slice().to_vec(),
                    dt: f.config.dt,
                    t_end: f.config.t_end,
                })
                .collect(),
        });
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&listings)?);
        return Ok(0);
    }
    for s in &listings {
        println!("{}  (dim {})  {}", s.name, s.dim, s.summary);
        for f in &s.fields {
            let aliases = if f.aliases.is_empty() {
                String::new()
            } else {
                format!(" [{}]", f.aliases.join(", "))
            };
            println!("    field    {:<22} {}{}", f.name, f.expected, aliases);
        }
        for f in &s.fixtures {
            println!(
                "    fixture  {:<22} dt {:.0e}, t_end {}",
                f.name, f.dt, f.t_end
            );
        }
    }
    Ok(0)
}
