use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hessdisc::analysis::TableFormat;
use hessdisc::bench::{
    check_study, finest_stiffness, format_metadata, run_study, MeshSource, ProblemKind, RunConfig,
    SchemeKind,
};
use hessdisc::HessdiscError;

/// Convergence studies for Hessian discretisations of a fourth-order
/// distributed optimal control problem.
#[derive(Parser)]
#[command(name = "hessdisc", version, disable_help_subcommand = true)]
struct Cli {
    /// Discretisation: fvm, adini or gr.
    #[arg(long)]
    scheme: String,

    /// Benchmark problem: ex1 (smooth, unit square) or ex2 (L-shape).
    #[arg(long, default_value = "ex1")]
    problem: String,

    /// Number of refinement levels.
    #[arg(long, default_value_t = 3)]
    levels: usize,

    /// Override the control penalty parameter.
    #[arg(long)]
    alpha: Option<f64>,

    /// Override the lower control bound.
    #[arg(long)]
    lo: Option<f64>,

    /// Override the upper control bound.
    #[arg(long)]
    hi: Option<f64>,

    /// Mesh source: "builtin" (default) or a comma-separated list of mesh
    /// files, one per level, coarse to fine. A '*' in the final path
    /// component expands against the directory, sorted by name.
    #[arg(long, default_value = "builtin")]
    mesh: String,

    /// Stabilisation strength for the gradient-recovery scheme.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,

    /// Write the table to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format: csv or markdown.
    #[arg(long, default_value = "csv")]
    format: String,

    /// Enforce the acceptance tolerances on the computed orders.
    #[arg(long, default_value_t = false)]
    check: bool,

    /// Dump the finest-level stiffness matrix in MatrixMarket format.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

fn parse_mesh_source(spec: &str) -> Result<MeshSource, HessdiscError> {
    if spec == "builtin" {
        return Ok(MeshSource::Builtin);
    }
    let mut paths = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some(star) = part.rfind('*') {
            let path = PathBuf::from(part);
            let dir = path.parent().map(PathBuf::from).unwrap_or_else(|| ".".into());
            let pattern = path
                .file_name()
                .and_then(|f| f.to_str())
                .ok_or_else(|| HessdiscError::Config(format!("bad mesh pattern '{part}'")))?;
            let _ = star;
            let (prefix, suffix) = pattern.split_once('*').unwrap();
            let mut matched: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| HessdiscError::Config(format!("cannot read {}: {e}", dir.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|f| f.to_str())
                        .map(|f| f.starts_with(prefix) && f.ends_with(suffix))
                        .unwrap_or(false)
                })
                .collect();
            matched.sort();
            if matched.is_empty() {
                return Err(HessdiscError::Config(format!(
                    "mesh pattern '{part}' matched no files"
                )));
            }
            paths.extend(matched);
        } else {
            paths.push(PathBuf::from(part));
        }
    }
    if paths.is_empty() {
        return Err(HessdiscError::Config("empty mesh file list".into()));
    }
    Ok(MeshSource::Files(paths))
}

fn read_thread_cap() -> Result<usize, HessdiscError> {
    match std::env::var("HESSDISC_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                HessdiscError::Config(format!(
                    "HESSDISC_THREADS must be a positive integer, got '{v}'"
                ))
            }),
        Err(_) => Ok(1),
    }
}

fn run(cli: &Cli) -> Result<bool, HessdiscError> {
    // Assembly and solves run sequentially; the cap is validated and bounds
    // any future worker pool.
    let _threads = read_thread_cap()?;

    let scheme: SchemeKind = cli.scheme.parse()?;
    let problem: ProblemKind = cli.problem.parse()?;
    let format = match cli.format.as_str() {
        "csv" => TableFormat::Csv,
        "markdown" => TableFormat::Markdown,
        other => {
            return Err(HessdiscError::Config(format!(
                "unknown format '{other}' (expected csv or markdown)"
            )))
        }
    };

    let mut config = RunConfig::new(scheme, problem, cli.levels);
    config.alpha = cli.alpha;
    config.lo = cli.lo;
    config.hi = cli.hi;
    config.theta = cli.theta;
    config.mesh = parse_mesh_source(&cli.mesh)?;

    let out = run_study(&config)?;
    let mut text = format_metadata(&out.metadata);
    text.push_str(&out.table.emit(format));
    if let Some(err) = &out.failure {
        text.push_str(&format!("# incomplete: {err}\n"));
    }
    match &cli.out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }

    if let Some(path) = &cli.dump_matrix {
        let a = finest_stiffness(&config)?;
        let mut file = std::fs::File::create(path)?;
        a.write_matrix_market(&mut file)?;
    }

    if let Some(err) = out.failure {
        return Err(err);
    }

    if cli.check {
        let failures = check_study(&config, &out);
        if !failures.is_empty() {
            for f in &failures {
                eprintln!("check failed: {f}");
            }
            return Ok(false);
        }
        eprintln!("check passed");
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HessdiscError::PdasNonConvergence { .. } | HessdiscError::EigNonConvergence(_) => {
                    ExitCode::from(3)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}
