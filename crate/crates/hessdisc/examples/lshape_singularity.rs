//! Singular benchmark on the L-shaped domain.
//!
//! The exact solution behaves like r^(1+gamma) near the re-entrant
//! corner, with gamma the non-characteristic root of
//! sin^2(gamma w) = gamma^2 sin^2(w) for w = 3 pi / 2. The reduced
//! elliptic regularity caps the Hessian-seminorm rate below 1, while
//! the control keeps converging at about first order overall.

use hessdisc::analysis::TableFormat;
use hessdisc::bench::{format_metadata, run_study, ProblemKind, RunConfig, SchemeKind};
use hessdisc::exact::solve_gamma;

fn main() {
    let omega = 3.0 * std::f64::consts::PI / 2.0;
    println!("# singular exponent gamma = {:.10}", solve_gamma(omega).unwrap());

    for scheme in [SchemeKind::Adini, SchemeKind::Gr] {
        let config = RunConfig::new(scheme, ProblemKind::Ex2, 4);
        let out = run_study(&config).expect("study");
        if let Some(err) = &out.failure {
            eprintln!("level failed: {err}");
            std::process::exit(1);
        }
        print!("{}", format_metadata(&out.metadata));
        print!("{}", out.table.emit(TableFormat::Csv));
        println!();
    }
}
