//! Adini convergence study on the smooth unit-square benchmark.
//!
//! Runs five refinement levels of the nonconforming Adini rectangle and
//! prints the error table in markdown. State and adjoint converge at
//! second order in all three norms, the piecewise-constant control at
//! first order, and the post-processed control at second order.

use hessdisc::analysis::TableFormat;
use hessdisc::bench::{format_metadata, run_study, ProblemKind, RunConfig, SchemeKind};

fn main() {
    let config = RunConfig::new(SchemeKind::Adini, ProblemKind::Ex1, 5);
    let out = run_study(&config).expect("study");
    if let Some(err) = &out.failure {
        eprintln!("level failed: {err}");
        std::process::exit(1);
    }
    print!("{}", format_metadata(&out.metadata));
    println!();
    print!("{}", out.table.emit(TableFormat::Markdown));
}
