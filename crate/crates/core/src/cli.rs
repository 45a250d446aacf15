//! Command-line front end: argument definitions and report rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::{classify, classify_batch, ClassificationReport};
use crate::ends::{component_census, components_csv, enumerate_ends};
use crate::error::{Error, Result};
use crate::graphspec::{parse_spec, GraphFamilySpec};
use crate::metric_graph::{format_f64, truncate};
use crate::radial;
use crate::scalar::Scalar;
use crate::series::SeriesSum;
use crate::spectral::{boundary_conditions, secular_eigenvalues, witness_nonclosed, VertexCondition};

#[derive(Debug, Parser)]
#[command(name = "qgends", version, about = "Ends, deficiency indices and Laplacian classification on infinite metric graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Seed echoed into reports; no command is randomized.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Dirichlet,
    Kirchhoff,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classification report with rule trace for one or more specs.
    Analyze {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
    },
    /// End enumeration, optionally with the truncation census.
    Ends {
        spec: PathBuf,
        /// Also write per-radius component counts (CSV) to this file.
        #[arg(long)]
        dump_components: Option<PathBuf>,
        /// Largest radius for the census.
        #[arg(long, default_value_t = 8)]
        radius: u32,
    },
    /// Eigenvalues of a truncation with Kirchhoff interior vertices.
    Spectrum {
        spec: PathBuf,
        /// Condition on the truncation boundary.
        #[arg(long, value_enum, default_value_t = BoundaryArg::Dirichlet)]
        bc: BoundaryArg,
        #[arg(long, default_value_t = 10.0)]
        kmax: f64,
        #[arg(long, default_value_t = 4)]
        depth: u32,
    },
    /// Sobolev-ratio rows along the shrinking subgraph sequence.
    Witness {
        spec: PathBuf,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 5)]
        levels: u64,
    },
    /// Radial tree tools.
    Tree {
        #[command(subcommand)]
        command: TreeCommand,
    },
    /// Same as `tree kernels`.
    #[command(name = "tree-kernels")]
    TreeKernels(KernelArgs),
    /// Truncation component counts for radius 1..=R.
    Components {
        spec: PathBuf,
        #[arg(long, default_value_t = 8)]
        radius: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum TreeCommand {
    /// Kernel end values, energies and decomposition multiplicities.
    Kernels(KernelArgs),
}

#[derive(Debug, clap::Args)]
pub struct KernelArgs {
    pub spec: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n_max: u64,
    /// Also write the step-weight breakpoints (JSON) to this file.
    #[arg(long)]
    pub breakpoints: Option<PathBuf>,
}

pub fn load_spec(path: &Path) -> Result<GraphFamilySpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_spec(&text)?)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}

fn json_text(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

fn table_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn tabular(format: Format, header: &[&str], rows: &[Vec<String>], json: Value) -> String {
    match format {
        Format::Json => json_text(&json),
        Format::Csv => csv_text(header, rows),
        Format::Table => table_text(header, rows),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

fn with_seed(mut v: Value, seed: Option<u64>) -> Value {
    if let (Some(s), Value::Object(m)) = (seed, &mut v) {
        m.insert("seed".into(), json!(s));
    }
    v
}

fn report_rows(reports: &[ClassificationReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            let citation = r
                .rule_trace
                .iter()
                .find(|e| e.rule == r.gaffney_status.rule)
                .map(|e| e.citation.clone())
                .unwrap_or_default();
            vec![
                r.name.clone().unwrap_or_else(|| r.variant.clone()),
                r.ends.total.to_string(),
                r.ends.finite_volume.to_string(),
                opt(r.volume),
                json_value_str(&r.kirchhoff_selfadjoint.verdict),
                json_value_str(&r.gaffney_status.status),
                r.markovian_unique.unique.to_string(),
                r.deficiency.gaffney_min.to_string(),
                citation,
            ]
        })
        .collect()
}

fn json_value_str(v: &impl Serialize) -> String {
    match serde_json::to_value(v).expect("serializes") {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn analyze(specs: &[PathBuf], format: Format, seed: Option<u64>) -> Result<String> {
    let loaded = specs.iter().map(|p| load_spec(p)).collect::<Result<Vec<_>>>()?;
    let reports = if loaded.len() == 1 {
        vec![classify(&loaded[0])?]
    } else {
        classify_batch(&loaded).into_iter().collect::<Result<Vec<_>>>()?
    };
    let header = [
        "name",
        "ends",
        "finite_volume_ends",
        "volume",
        "kirchhoff_selfadjoint",
        "gaffney_status",
        "markovian_unique",
        "gaffney_min",
        "citation",
    ];
    let json = if reports.len() == 1 {
        with_seed(serde_json::to_value(&reports[0]).expect("serializes"), seed)
    } else {
        let mut v = json!({ "reports": reports });
        v = with_seed(v, seed);
        v
    };
    Ok(tabular(format, &header, &report_rows(&reports), json))
}

fn ends(spec: &Path, dump: Option<&Path>, radius: u32, format: Format) -> Result<String> {
    let s = load_spec(spec)?;
    let summary = enumerate_ends(&s)?;
    if let Some(path) = dump {
        write_file(path, &components_csv(&component_census(&s, radius)?))?;
    }
    let rows: Vec<Vec<String>> = summary
        .descriptors
        .iter()
        .map(|d| {
            vec![
                d.id.to_string(),
                d.ray.clone(),
                d.multiplicity.to_string(),
                json_value_str(&d.volume_class).replace('"', ""),
                json_value_str(&d.freeness),
            ]
        })
        .collect();
    let header = ["id", "ray", "multiplicity", "volume_class", "freeness"];
    Ok(tabular(format, &header, &rows, serde_json::to_value(&summary).expect("serializes")))
}

fn spectrum(spec: &Path, bc: BoundaryArg, kmax: f64, depth: u32, format: Format) -> Result<String> {
    let g = truncate(&load_spec(spec)?, depth)?;
    let cond = match bc {
        BoundaryArg::Dirichlet => VertexCondition::Dirichlet,
        BoundaryArg::Kirchhoff => VertexCondition::Kirchhoff,
    };
    let pairs = secular_eigenvalues(&g, &boundary_conditions(&g, cond), kmax)?;
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                (i + 1).to_string(),
                format_f64(p.k),
                format_f64(p.lambda),
                p.multiplicity.to_string(),
            ]
        })
        .collect();
    let json = json!(pairs
        .iter()
        .enumerate()
        .map(|(i, p)| json!({"index": i + 1, "k": p.k, "lambda": p.lambda, "multiplicity": p.multiplicity}))
        .collect::<Vec<_>>());
    Ok(tabular(format, &["index", "k", "lambda", "multiplicity"], &rows, json))
}

fn witness(spec: &Path, lambda: f64, levels: u64, format: Format) -> Result<String> {
    let report = witness_nonclosed(&load_spec(spec)?, lambda, levels)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                format_f64(r.lambda),
                format_f64(r.sup_norm),
                format_f64(r.l2_sq),
                format_f64(r.grad_sq),
                format_f64(r.h_sq),
                format_f64(r.ratio),
                opt(r.growth),
                format_f64(r.boundary_value),
                r.layers.to_string(),
            ]
        })
        .collect();
    let header = [
        "level",
        "lambda",
        "sup_norm",
        "l2_sq",
        "grad_sq",
        "h_sq",
        "ratio",
        "growth",
        "boundary_value",
        "layers",
    ];
    Ok(tabular(format, &header, &rows, serde_json::to_value(&report).expect("serializes")))
}

fn scalar_cells(s: &Scalar) -> (String, String) {
    match s {
        Scalar::Exact(q) => (format_f64(s.to_f64()), q.to_string()),
        Scalar::Approx(x) => (format_f64(*x), String::new()),
    }
}

fn tree_kernels(args: &KernelArgs, format: Format) -> Result<String> {
    let data = radial::build(&load_spec(&args.spec)?)?;
    if let Some(path) = &args.breakpoints {
        write_file(path, &json_text(&data.breakpoints(args.n_max + 1)))?;
    }
    let rows_data = data.kernel_rows(args.n_max);
    let mut rows = Vec::with_capacity(rows_data.len());
    let mut json_rows = Vec::with_capacity(rows_data.len());
    for r in &rows_data {
        let (end, end_exact) = r.end_value.as_ref().map(scalar_cells).unwrap_or_default();
        let (energy, energy_exact) = match &r.energy {
            SeriesSum::Finite(v) => (
                format_f64(v.value),
                v.exact.as_ref().map(|q| q.to_string()).unwrap_or_default(),
            ),
            SeriesSum::Divergent => ("inf".to_string(), String::new()),
        };
        json_rows.push(json!({
            "n": r.n,
            "end_value": r.end_value.as_ref().map(Scalar::to_json),
            "energy": match &r.energy {
                SeriesSum::Finite(v) => v.exact.clone().map_or(json!(v.value), |q| Scalar::Exact(q).to_json()),
                SeriesSum::Divergent => json!("divergent"),
            },
            "multiplicity": r.multiplicity.to_string(),
        }));
        rows.push(vec![r.n.to_string(), end, end_exact, energy, energy_exact, r.multiplicity.to_string()]);
    }
    let header = ["n", "end_value", "end_value_exact", "energy", "energy_exact", "multiplicity"];
    Ok(tabular(format, &header, &rows, json!(json_rows)))
}

fn components(spec: &Path, radius: u32, format: Format) -> Result<String> {
    let levels = component_census(&load_spec(spec)?, radius)?;
    let rows: Vec<Vec<String>> = levels
        .iter()
        .map(|l| vec![l.radius.to_string(), l.components.len().to_string()])
        .collect();
    Ok(match format {
        Format::Csv => components_csv(&levels),
        _ => tabular(format, &["radius", "components"], &rows, serde_json::to_value(&levels).expect("serializes")),
    })
}

/// Runs one command and returns the text of its primary output.
pub fn render(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Analyze { specs } => analyze(specs, cli.format, cli.seed),
        Command::Ends {
            spec,
            dump_components,
            radius,
        } => ends(spec, dump_components.as_deref(), *radius, cli.format),
        Command::Spectrum { spec, bc, kmax, depth } => spectrum(spec, *bc, *kmax, *depth, cli.format),
        Command::Witness { spec, lambda, levels } => witness(spec, *lambda, *levels, cli.format),
        Command::Tree {
            command: TreeCommand::Kernels(args),
        }
        | Command::TreeKernels(args) => tree_kernels(args, cli.format),
        Command::Components { spec, radius } => components(spec, *radius, cli.format),
    }
}

/// Machine-readable error document written to stderr.
pub fn error_json(e: &Error) -> String {
    json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()}).to_string()
}

/// Runs the command, writes its output and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = render(cli).and_then(|text| match &cli.output {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

/// Caps the global worker pool at `QGENDS_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("QGENDS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("QGENDS_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}
