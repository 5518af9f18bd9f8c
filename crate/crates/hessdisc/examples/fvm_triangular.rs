//! Finite volume study on the shipped Delta-adapted triangular meshes.
//!
//! Loads the structured acute family from fixtures/, validates the
//! two-point flux orthogonality condition on every level, and runs the
//! control problem. The skewed midpoint rule (circumcenters as sample
//! points) gives second-order state and adjoint errors.

use std::path::PathBuf;

use hessdisc::analysis::TableFormat;
use hessdisc::bench::{format_metadata, run_study, MeshSource, ProblemKind, RunConfig, SchemeKind};
use hessdisc::mesh::load_mesh;

fn fixture(level: usize) -> PathBuf {
    PathBuf::from(format!(
        "{}/../../fixtures/tri-acute-l{level}.txt",
        env!("CARGO_MANIFEST_DIR")
    ))
}

fn main() {
    let paths: Vec<PathBuf> = (0..5).map(fixture).collect();
    for path in &paths {
        let mesh = load_mesh(path).expect("fixture mesh");
        let report = mesh.validate_delta_adapted();
        println!(
            "# {}: {} cells, delta-adapted: {} ({})",
            path.file_name().unwrap().to_string_lossy(),
            mesh.n_cells(),
            report.passes,
            report.worst()
        );
    }
    let mut config = RunConfig::new(SchemeKind::Fvm, ProblemKind::Ex1, 5);
    config.mesh = MeshSource::Files(paths);
    let out = run_study(&config).expect("study");
    if let Some(err) = &out.failure {
        eprintln!("level failed: {err}");
        std::process::exit(1);
    }
    print!("{}", format_metadata(&out.metadata));
    print!("{}", out.table.emit(TableFormat::Csv));
}
