//! Finite volume study on uniform square meshes of the unit square.
//!
//! The two-point flux scheme with one unknown per cell reaches second
//! order for state and adjoint in L2, H1 and the discrete Laplacian,
//! first order for the control and second order for the post-processed
//! control. Runs in a few seconds.

use hessdisc::analysis::TableFormat;
use hessdisc::bench::{format_metadata, run_study, ProblemKind, RunConfig, SchemeKind};

fn main() {
    let config = RunConfig::new(SchemeKind::Fvm, ProblemKind::Ex1, 5);
    let out = run_study(&config).expect("study");
    if let Some(err) = &out.failure {
        eprintln!("level failed: {err}");
        std::process::exit(1);
    }
    print!("{}", format_metadata(&out.metadata));
    print!("{}", out.table.emit(TableFormat::Csv));
}
