//! Command-line driver: map hypothesis checks, transfer-operator spectra,
//! invariant densities, cylinder statistics and pressure curves.
//!
//! Exit codes: 0 success; 1 a structural hypothesis fails for the requested
//! run; 2 an iteration gave up before its tolerance (data still emitted);
//! 3 usage or I/O errors. Diagnostics go to standard error, data to `--out`
//! or standard output. Identical invocations produce byte-identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use aconvex::builtins;
use aconvex::cylinders::{
    condition_b_probe, max_cylinder_mass, parabolic_scaling, refine_partition, ConditionBProbe,
    ParabolicScaling,
};
use aconvex::grid::{ConformalWeights, GridFunction};
use aconvex::hypotheses::{
    check_condition_1, check_condition_c, classify_beta, find_beta, validate, BetaType,
};
use aconvex::map_model::{self, PiecewiseMap};
use aconvex::thermo::{pressure_curve, PressureCurve};
use aconvex::transfer::{build_ulam, invariant_density, leading_spectrum, SpectralResult};

const SCHEMA_VERSION: u32 = 1;
const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_MAX_ITER: usize = 20_000;
/// Exponents probed by `validate`; condition (C) is s-dependent, so the
/// report carries one entry per value.
const VALIDATE_S_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Parser)]
#[command(
    name = "aconvex",
    version,
    about = "Transfer-operator analysis of piecewise monotone interval maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses of a map and classify its core
    /// endpoint; emits one JSON report.
    Validate(ValidateArgs),
    /// Leading eigenvalue, conformal weights and density of the discretized
    /// transfer operator at one exponent.
    Spectrum(SpectrumArgs),
    /// Invariant density by cone-constrained collocation iteration.
    Density(DensityArgs),
    /// Cylinder partition statistics and the normalized sup-norm decay probe.
    Cylinders(CylindersArgs),
    /// Pressure, Lyapunov exponent and entropy across an exponent grid.
    Pressure(PressureArgs),
    /// validate + spectrum + cylinders + pressure bundled into one JSON
    /// document; stops after a failed validation.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Builtin name (example22, example24, doubling, ly-convex) or a path to
    /// a JSON map file.
    #[arg(long)]
    map: String,
    /// Write the document here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded in the output; seeds any randomized probe functions.
    #[arg(long, default_value_t = 1729)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid nodes for the condition (C) and identity scans.
    #[arg(long, default_value_t = 2048)]
    cells: usize,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Geometric exponent of the weight (psi_k')^s.
    #[arg(long)]
    s: f64,
    #[arg(long, default_value_t = 4096)]
    cells: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// json: full eigendata; csv: density nodes only.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    s: f64,
    #[arg(long, default_value_t = 4096)]
    cells: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CylindersArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Refinement depth r; rows cover 1..=depth.
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Iteration budget per cylinder; defaults to 200, or 2000 when the core
    /// endpoint is indifferent and the decay is polynomial.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    cells: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct PressureArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 0.25)]
    s_min: f64,
    #[arg(long, default_value_t = 2.0)]
    s_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 8)]
    s_steps: usize,
    #[arg(long, default_value_t = 2048)]
    cells: usize,
    /// csv: one row per exponent plus a JSON verdict line; json: the full
    /// curve and verdicts.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Exponent for the spectrum and cylinder sections.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 1024)]
    cells: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    s_min: f64,
    #[arg(long, default_value_t = 2.0)]
    s_max: f64,
    #[arg(long, default_value_t = 8)]
    s_steps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

enum Failure {
    /// Exit 3: bad flags, unknown maps, unreadable or malformed files.
    Usage(String),
    /// Exit 1: a hypothesis required by the requested computation fails.
    Hypothesis(String),
    /// Exit 2: an iteration exhausted its budget before the tolerance.
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 3,
            Failure::Hypothesis(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Hypothesis(m) | Failure::Numeric(m) => m,
        }
    }
}

struct Output {
    document: String,
    out: Option<PathBuf>,
    exit: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests arrive as parse errors; everything
            // else is a usage problem.
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Validate(a) => run_validate(a),
        Command::Spectrum(a) => run_spectrum(a),
        Command::Density(a) => run_density(a),
        Command::Cylinders(a) => run_cylinders(a),
        Command::Pressure(a) => run_pressure(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(output) => match emit(output.out.as_deref(), &output.document) {
            Ok(()) => ExitCode::from(output.exit),
            Err(err) => {
                eprintln!("error: cannot write output: {err}");
                ExitCode::from(3)
            }
        },
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn emit(out: Option<&Path>, document: &str) -> std::io::Result<()> {
    use std::io::Write;
    match out {
        Some(path) => std::fs::write(path, document),
        None => std::io::stdout().write_all(document.as_bytes()),
    }
}

struct Loaded {
    map: PiecewiseMap,
    source: String,
    hash: String,
}

fn resolve_map(spec: &str) -> Result<Loaded, Failure> {
    let map = if let Some(map) = builtins::builtin(spec) {
        map
    } else if Path::new(spec).is_file() {
        map_model::load_map(spec).map_err(|err| Failure::Usage(format!("{spec}: {err}")))?
    } else {
        return Err(Failure::Usage(format!(
            "unknown map {spec:?}; builtins are {}, anything else must name a JSON file",
            builtins::builtin_names().join(", ")
        )));
    };
    let hash = map.content_hash();
    Ok(Loaded { map, source: spec.to_string(), hash })
}

fn check_cells(cells: usize) -> Result<(), Failure> {
    if cells.is_power_of_two() && (16..=65_536).contains(&cells) {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "--cells must be a power of two between 16 and 65536, got {cells}"
        )))
    }
}

fn check_s(name: &str, s: f64) -> Result<(), Failure> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{name} must be a positive real, got {s}")))
    }
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol > 0.0 && tol <= 1e-2 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--tol must lie in (0, 1e-2], got {tol}")))
    }
}

fn check_max_iter(max_iter: usize) -> Result<(), Failure> {
    if max_iter >= 1 {
        Ok(())
    } else {
        Err(Failure::Usage("--max-iter must be at least 1".to_string()))
    }
}

fn check_depth(depth: usize) -> Result<(), Failure> {
    // Words multiply per refinement level; the library caps recursion at 20
    // and anything past 12 is unusably slow for the probe anyway.
    if (1..=12).contains(&depth) {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--depth must lie in [1, 12], got {depth}")))
    }
}

/// The `config` block embedded in every JSON document: the resolved run
/// parameters plus the map's content hash. Unused slots serialize as null so
/// the schema is identical across subcommands.
#[allow(clippy::too_many_arguments)]
fn config_value(
    loaded: &Loaded,
    s: Value,
    cells: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    depth: Option<usize>,
    n_max: Option<usize>,
    format: Format,
    seed: u64,
) -> Value {
    json!({
        "map_source": loaded.source,
        "map_hash": loaded.hash,
        "s": s,
        "cells": cells,
        "tol": tol,
        "max_iter": max_iter,
        "depth": depth,
        "n_max": n_max,
        "output": format.name(),
        "seed": seed,
    })
}

fn json_document(config: Value, section: &str, payload: Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("schema".to_string(), json!(SCHEMA_VERSION));
    doc.insert("config".to_string(), config);
    doc.insert(section.to_string(), payload);
    pretty(&Value::Object(doc))
}

fn pretty<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("document serialization cannot fail");
    text.push('\n');
    text
}

/// Gate shared by `spectrum` and `density`: both iterate inside the cone of
/// non-increasing functions, which is only invariant under conditions 1
/// and (C).
fn gate_hypotheses(map: &PiecewiseMap, s: f64, cells: usize) -> Result<(), Failure> {
    let c1 = check_condition_1(map);
    if !c1.pass {
        return Err(Failure::Hypothesis(format!(
            "condition 1 fails: T'(0+) = {} (needs > 1 and positive branch start slopes)",
            c1.t_prime_at_zero
        )));
    }
    let cc = check_condition_c(map, s, cells);
    if !cc.pass {
        let detail = match cc.violation {
            Some((k, x)) => format!("; partial sum {k} increases near x = {x}"),
            None => String::new(),
        };
        return Err(Failure::Hypothesis(format!("condition (C) fails at s = {s}{detail}")));
    }
    Ok(())
}

fn run_validate(a: ValidateArgs) -> Result<Output, Failure> {
    check_cells(a.cells)?;
    let loaded = resolve_map(&a.common.map)?;
    let report = validate(&loaded.map, &VALIDATE_S_GRID, a.cells)
        .map_err(|err| Failure::Numeric(err.to_string()))?;
    // A non-Markov partition and s-dependent condition (C) failures are
    // findings, not errors; only the unconditional hypotheses gate the exit.
    let ok = report.cond1.pass && report.identity_32.pass;
    let config = config_value(
        &loaded,
        json!(VALIDATE_S_GRID.to_vec()),
        Some(a.cells),
        None,
        None,
        None,
        None,
        Format::Json,
        a.common.seed,
    );
    let document = json_document(config, "validate", to_value(&report));
    Ok(Output { document, out: a.common.out, exit: if ok { 0 } else { 1 } })
}

fn run_spectrum(a: SpectrumArgs) -> Result<Output, Failure> {
    check_cells(a.cells)?;
    check_s("--s", a.s)?;
    check_tol(a.tol)?;
    check_max_iter(a.max_iter)?;
    let loaded = resolve_map(&a.common.map)?;
    gate_hypotheses(&loaded.map, a.s, a.cells)?;
    let matrix = build_ulam(&loaded.map, a.s, a.cells);
    let spectral = leading_spectrum(&matrix, a.tol, a.max_iter);
    if !spectral.converged {
        eprintln!(
            "warning: power iteration missed tol {} within {} iterations",
            a.tol, a.max_iter
        );
    }
    let exit = if spectral.converged { 0 } else { 2 };
    let document = match a.format {
        Format::Json => {
            let config = config_value(
                &loaded,
                json!(a.s),
                Some(a.cells),
                Some(a.tol),
                Some(a.max_iter),
                None,
                None,
                a.format,
                a.common.seed,
            );
            json_document(config, "spectrum", to_value(&spectral))
        }
        Format::Csv => nodes_csv(&spectral.density),
    };
    Ok(Output { document, out: a.common.out, exit })
}

fn run_density(a: DensityArgs) -> Result<Output, Failure> {
    check_cells(a.cells)?;
    check_s("--s", a.s)?;
    check_tol(a.tol)?;
    check_max_iter(a.max_iter)?;
    let loaded = resolve_map(&a.common.map)?;
    gate_hypotheses(&loaded.map, a.s, a.cells)?;
    let matrix = build_ulam(&loaded.map, a.s, a.cells);
    let spectral = leading_spectrum(&matrix, a.tol, a.max_iter);
    let weights = ConformalWeights::from_vec(spectral.ms_weights.clone());
    let density = invariant_density(&loaded.map, a.s, a.cells, a.tol, a.max_iter, &weights);
    if !density.converged {
        eprintln!(
            "warning: collocation iteration missed tol {} within {} iterations",
            a.tol, a.max_iter
        );
    }
    let exit = if spectral.converged && density.converged { 0 } else { 2 };
    let document = match a.format {
        Format::Json => {
            let config = config_value(
                &loaded,
                json!(a.s),
                Some(a.cells),
                Some(a.tol),
                Some(a.max_iter),
                None,
                None,
                a.format,
                a.common.seed,
            );
            let payload = json!({
                "gamma": density.gamma,
                "iterations": density.iterations,
                "converged": density.converged,
                "in_cone": density.in_cone,
                "weights_converged": spectral.converged,
                "density": density.density,
            });
            json_document(config, "density", payload)
        }
        Format::Csv => nodes_csv(&density.density),
    };
    Ok(Output { document, out: a.common.out, exit })
}

#[derive(Serialize)]
struct CylinderRow {
    r: usize,
    count: usize,
    /// Probe value M_r; absent past the depth where every cylinder still
    /// meets the core endpoint.
    m_hat: Option<f64>,
    max_cyl_mass: f64,
}

#[derive(Serialize)]
struct CylinderStats {
    beta: f64,
    n_star: usize,
    beta_type: BetaType,
    gamma: f64,
    gamma_converged: bool,
    n_max: usize,
    rows: Vec<CylinderRow>,
    probe: ConditionBProbe,
    /// Preimage scaling toward the core endpoint; present only when it is
    /// indifferent.
    scaling: Option<ParabolicScaling>,
}

fn cylinder_stats(
    map: &PiecewiseMap,
    s: f64,
    depth: usize,
    n_max_flag: Option<usize>,
    cells: usize,
    spectral: &SpectralResult,
) -> Result<CylinderStats, Failure> {
    let beta = find_beta(map).map_err(|err| Failure::Numeric(err.to_string()))?;
    let class = classify_beta(&beta.split_map, beta.beta, beta.n_star);
    let weights = ConformalWeights::from_vec(spectral.ms_weights.clone());
    // Polynomial decay at an indifferent endpoint needs a far larger budget
    // than the exponential contraction elsewhere.
    let n_max = n_max_flag.unwrap_or(if class.beta_type == BetaType::Indifferent {
        2000
    } else {
        200
    });
    let probe = condition_b_probe(map, s, spectral.gamma, beta.beta, depth, n_max, cells);
    let rows = (1..=depth)
        .map(|r| CylinderRow {
            r,
            count: refine_partition(map, r, beta.beta).len(),
            m_hat: probe.m_hat.get(r - 1).copied(),
            max_cyl_mass: max_cylinder_mass(map, r, beta.beta, &weights),
        })
        .collect();
    let scaling = (class.beta_type == BetaType::Indifferent)
        .then(|| parabolic_scaling(&beta.split_map, beta.n_star, 30));
    Ok(CylinderStats {
        beta: beta.beta,
        n_star: beta.n_star,
        beta_type: class.beta_type,
        gamma: spectral.gamma,
        gamma_converged: spectral.converged,
        n_max,
        rows,
        probe,
        scaling,
    })
}

fn run_cylinders(a: CylindersArgs) -> Result<Output, Failure> {
    check_cells(a.cells)?;
    check_s("--s", a.s)?;
    check_tol(a.tol)?;
    check_max_iter(a.max_iter)?;
    check_depth(a.depth)?;
    if a.n_max == Some(0) {
        return Err(Failure::Usage("--n-max must be at least 1".to_string()));
    }
    let loaded = resolve_map(&a.common.map)?;
    let matrix = build_ulam(&loaded.map, a.s, a.cells);
    let spectral = leading_spectrum(&matrix, a.tol, a.max_iter);
    let stats = cylinder_stats(&loaded.map, a.s, a.depth, a.n_max, a.cells, &spectral)?;
    if !spectral.converged {
        eprintln!("warning: the eigenvalue normalizing the probe did not converge");
    }
    let exit = if spectral.converged { 0 } else { 2 };
    let document = match a.format {
        Format::Json => {
            let config = config_value(
                &loaded,
                json!(a.s),
                Some(a.cells),
                Some(a.tol),
                Some(a.max_iter),
                Some(a.depth),
                Some(stats.n_max),
                a.format,
                a.common.seed,
            );
            json_document(config, "cylinders", to_value(&stats))
        }
        Format::Csv => cylinders_csv(&stats),
    };
    Ok(Output { document, out: a.common.out, exit })
}

fn run_pressure(a: PressureArgs) -> Result<Output, Failure> {
    check_cells(a.cells)?;
    check_s("--s-min", a.s_min)?;
    check_s("--s-max", a.s_max)?;
    if !(1..=200).contains(&a.s_steps) {
        return Err(Failure::Usage(format!(
            "--s-steps must lie in [1, 200], got {}",
            a.s_steps
        )));
    }
    let grid = exponent_grid(a.s_min, a.s_max, a.s_steps)?;
    let loaded = resolve_map(&a.common.map)?;
    let curve = pressure_curve(&loaded.map, &grid, a.cells);
    let exit = if curve.converged.iter().all(|&c| c) { 0 } else { 2 };
    if exit == 2 {
        eprintln!("warning: some exponents did not converge; their rows are flagged");
    }
    let verdicts = json!({
        "nonincreasing": curve.nonincreasing(),
        "convex": curve.convex(),
        "P1_zero": curve.p1_zero(),
    });
    let document = match a.format {
        Format::Json => {
            let config = config_value(
                &loaded,
                json!(grid),
                Some(a.cells),
                None,
                None,
                None,
                None,
                a.format,
                a.common.seed,
            );
            let payload = json!({ "curve": curve, "verdicts": verdicts });
            json_document(config, "pressure", payload)
        }
        Format::Csv => pressure_csv(&curve, &verdicts),
    };
    Ok(Output { document, out: a.common.out, exit })
}

/// Section order is part of the contract: validation first, then the
/// sections whose meaning depends on it. Skipped sections are omitted.
#[derive(Serialize)]
struct ReportDoc {
    schema: u32,
    config: Value,
    validate: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cylinders: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pressure: Option<Value>,
}

fn run_report(a: ReportArgs) -> Result<Output, Failure> {
    check_cells(a.cells)?;
    check_s("--s", a.s)?;
    check_tol(a.tol)?;
    check_max_iter(a.max_iter)?;
    check_depth(a.depth)?;
    check_s("--s-min", a.s_min)?;
    check_s("--s-max", a.s_max)?;
    if !(1..=200).contains(&a.s_steps) {
        return Err(Failure::Usage(format!(
            "--s-steps must lie in [1, 200], got {}",
            a.s_steps
        )));
    }
    if a.n_max == Some(0) {
        return Err(Failure::Usage("--n-max must be at least 1".to_string()));
    }
    let grid = exponent_grid(a.s_min, a.s_max, a.s_steps)?;
    let loaded = resolve_map(&a.common.map)?;
    let config = config_value(
        &loaded,
        json!(a.s),
        Some(a.cells),
        Some(a.tol),
        Some(a.max_iter),
        Some(a.depth),
        a.n_max,
        Format::Json,
        a.common.seed,
    );

    let validation = validate(&loaded.map, &VALIDATE_S_GRID, a.cells)
        .map_err(|err| Failure::Numeric(err.to_string()))?;
    if !validation.cond1.pass || !validation.identity_32.pass {
        eprintln!("validation failed; skipping the dependent sections");
        let doc = ReportDoc {
            schema: SCHEMA_VERSION,
            config,
            validate: to_value(&validation),
            spectrum: None,
            cylinders: None,
            pressure: None,
        };
        return Ok(Output { document: pretty(&doc), out: a.common.out, exit: 1 });
    }

    let mut hypothesis_failed = false;
    let mut unconverged = false;

    // The spectrum section carries its own condition (C) gate: the cone
    // iteration behind it is meaningless when the condition fails at this
    // exponent, so the eigendata is withheld rather than emitted.
    let cc = check_condition_c(&loaded.map, a.s, a.cells);
    let (spectrum_section, spectral) = if cc.pass {
        let matrix = build_ulam(&loaded.map, a.s, a.cells);
        let spectral = leading_spectrum(&matrix, a.tol, a.max_iter);
        unconverged |= !spectral.converged;
        let section = json!({ "condition_c": cc, "spectral": spectral });
        (section, Some(spectral))
    } else {
        eprintln!("condition (C) fails at s = {}; spectral data withheld", a.s);
        hypothesis_failed = true;
        (json!({ "condition_c": cc, "spectral": null }), None)
    };

    let cylinders_section = match &spectral {
        Some(spectral) => {
            let stats = cylinder_stats(&loaded.map, a.s, a.depth, a.n_max, a.cells, spectral)?;
            Some(to_value(&stats))
        }
        None => None,
    };

    let curve = pressure_curve(&loaded.map, &grid, a.cells);
    unconverged |= !curve.converged.iter().all(|&c| c);
    let verdicts = json!({
        "nonincreasing": curve.nonincreasing(),
        "convex": curve.convex(),
        "P1_zero": curve.p1_zero(),
    });
    let pressure_section = json!({ "s_grid": grid, "curve": curve, "verdicts": verdicts });

    let exit = if hypothesis_failed {
        1
    } else if unconverged {
        2
    } else {
        0
    };
    let doc = ReportDoc {
        schema: SCHEMA_VERSION,
        config,
        validate: to_value(&validation),
        spectrum: Some(spectrum_section),
        cylinders: cylinders_section,
        pressure: Some(pressure_section),
    };
    Ok(Output { document: pretty(&doc), out: a.common.out, exit })
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("document serialization cannot fail")
}

fn exponent_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, Failure> {
    if count == 1 {
        return Ok(vec![lo]);
    }
    if hi <= lo {
        return Err(Failure::Usage(format!(
            "--s-max must exceed --s-min when --s-steps > 1, got [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (count - 1) as f64;
    let grid: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Failure::Usage("the exponent grid is too fine to resolve".to_string()));
    }
    Ok(grid)
}

/// Two-column node dump; `{:?}` prints the shortest decimal that round-trips,
/// keeping the files byte-stable across runs.
fn nodes_csv(density: &GridFunction) -> String {
    let n = density.n_cells();
    let mut text = String::from("x,density\n");
    for (j, v) in density.values().iter().enumerate() {
        let x = j as f64 / n as f64;
        writeln!(text, "{x:?},{v:?}").expect("writing to a String cannot fail");
    }
    text
}

fn cylinders_csv(stats: &CylinderStats) -> String {
    let mut text = String::from("r,count,m_hat,max_cyl_mass\n");
    for row in &stats.rows {
        let m = row.m_hat.map(|v| format!("{v:?}")).unwrap_or_default();
        writeln!(text, "{},{},{},{:?}", row.r, row.count, m, row.max_cyl_mass)
            .expect("writing to a String cannot fail");
    }
    if let Some(sc) = &stats.scaling {
        text.push('\n');
        text.push_str("r,w_r,d_r\n");
        for (i, w) in sc.w.iter().enumerate() {
            let d = sc.d.get(i).map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(text, "{},{w:?},{d}", i + 1).expect("writing to a String cannot fail");
        }
        text.push('\n');
        writeln!(text, "theta_hat,{:?}", sc.theta_hat).expect("writing to a String cannot fail");
        writeln!(text, "theta_hat_early,{:?}", sc.theta_hat_early)
            .expect("writing to a String cannot fail");
        writeln!(text, "polynomial,{}", sc.polynomial).expect("writing to a String cannot fail");
    }
    text
}

fn pressure_csv(curve: &PressureCurve, verdicts: &Value) -> String {
    let mut text = String::from("s,P,lambda,h,converged\n");
    for i in 0..curve.s_values.len() {
        writeln!(
            text,
            "{:?},{:?},{:?},{:?},{}",
            curve.s_values[i], curve.pressure[i], curve.lyapunov[i], curve.entropy[i],
            curve.converged[i]
        )
        .expect("writing to a String cannot fail");
    }
    text.push('\n');
    text.push_str(&serde_json::to_string(verdicts).expect("document serialization cannot fail"));
    text.push('\n');
    text
}
