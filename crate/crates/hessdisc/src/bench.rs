//! Convergence-study driver shared by the CLI and the acceptance tests.

use std::path::PathBuf;

use crate::analysis::{compute_errors, ConvergenceTable, ErrorReport};
use crate::error::{HessdiscError, Result};
use crate::exact::{example1, example2, ExactTriple};
use crate::hd::{assemble_stiffness, HessianDiscretisation};
use crate::mesh::{Domain, MeshFamilyDescriptor, PolytopalMesh};
use crate::ocp::{optimality_residual, pdas_solve, KktSolution, OcpProblem};
use crate::schemes::{adini, fvm, gr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Fvm,
    Adini,
    Gr,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Fvm => "fvm",
            SchemeKind::Adini => "adini",
            SchemeKind::Gr => "gr",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = HessdiscError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fvm" => Ok(SchemeKind::Fvm),
            "adini" => Ok(SchemeKind::Adini),
            "gr" => Ok(SchemeKind::Gr),
            other => Err(HessdiscError::Config(format!(
                "unknown scheme '{other}' (expected fvm, adini or gr)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Ex1,
    Ex2,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Ex1 => "ex1",
            ProblemKind::Ex2 => "ex2",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            ProblemKind::Ex1 => Domain::UnitSquare,
            ProblemKind::Ex2 => Domain::LShape,
        }
    }

    pub fn instantiate(self) -> (OcpProblem, ExactTriple) {
        match self {
            ProblemKind::Ex1 => example1(),
            ProblemKind::Ex2 => example2(),
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = HessdiscError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(ProblemKind::Ex1),
            "ex2" => Ok(ProblemKind::Ex2),
            other => Err(HessdiscError::Config(format!(
                "unknown problem '{other}' (expected ex1 or ex2)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshSource {
    /// Scheme-appropriate generated family, refined by halving h.
    Builtin,
    /// Explicit mesh files, one per level, coarse to fine.
    Files(Vec<PathBuf>),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub problem: ProblemKind,
    pub levels: usize,
    pub alpha: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub mesh: MeshSource,
    /// Gradient-recovery stabilisation strength; ignored by the other schemes.
    pub theta: f64,
}

impl RunConfig {
    pub fn new(scheme: SchemeKind, problem: ProblemKind, levels: usize) -> Self {
        RunConfig {
            scheme,
            problem,
            levels,
            alpha: None,
            lo: None,
            hi: None,
            mesh: MeshSource::Builtin,
            theta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(HessdiscError::Config("levels must be at least 1".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(HessdiscError::Config("alpha must be positive".into()));
            }
        }
        if let (Some(lo), Some(hi)) = (self.lo, self.hi) {
            if lo > hi {
                return Err(HessdiscError::Config("lo must not exceed hi".into()));
            }
        }
        if self.scheme == SchemeKind::Gr && !(self.theta > 0.0) {
            return Err(HessdiscError::Config("theta must be positive".into()));
        }
        match &self.mesh {
            MeshSource::Builtin => {}
            MeshSource::Files(paths) => {
                if self.scheme == SchemeKind::Adini {
                    return Err(HessdiscError::Config(
                        "adini runs on the built-in rectangular family only".into(),
                    ));
                }
                if paths.len() < self.levels {
                    return Err(HessdiscError::Config(format!(
                        "{} mesh files provided for {} levels",
                        paths.len(),
                        self.levels
                    )));
                }
            }
        }
        Ok(())
    }

    fn initial_family(&self) -> Result<MeshFamilyDescriptor> {
        let domain = self.problem.domain();
        Ok(match &self.mesh {
            MeshSource::Files(paths) => MeshFamilyDescriptor::from_files(paths.clone()),
            MeshSource::Builtin => match self.scheme {
                SchemeKind::Adini => MeshFamilyDescriptor::squares(domain, 2),
                SchemeKind::Fvm => MeshFamilyDescriptor::squares(domain, 4),
                SchemeKind::Gr => MeshFamilyDescriptor::triangles(domain, 4),
            },
        })
    }

    fn apply_overrides(&self, problem: &mut OcpProblem) {
        if let Some(a) = self.alpha {
            problem.alpha = a;
        }
        if let Some(lo) = self.lo {
            problem.lo = lo;
        }
        if let Some(hi) = self.hi {
            problem.hi = hi;
        }
    }
}

/// Per-level facts recorded alongside the error table.
#[derive(Clone, Debug)]
pub struct LevelMetadata {
    pub h: f64,
    pub n_cells: usize,
    pub n_dofs: usize,
    pub quadrature_id: String,
    pub pdas_iterations: usize,
    pub optimality_residual: f64,
}

#[derive(Clone, Debug)]
pub struct StudyMetadata {
    pub scheme: &'static str,
    pub problem: &'static str,
    pub theta: Option<f64>,
    /// Direction of the GR stabilisation vector sigma_h.
    pub sigma_direction: Option<&'static str>,
    pub ordering_id: &'static str,
    pub levels: Vec<LevelMetadata>,
}

pub struct StudyOutput {
    pub table: ConvergenceTable,
    pub metadata: StudyMetadata,
    /// Set when a level failed; the table then holds only the completed levels.
    pub failure: Option<HessdiscError>,
}

pub fn mesh_size(mesh: &PolytopalMesh) -> f64 {
    mesh.cells
        .iter()
        .map(|c| c.diameter)
        .fold(0.0f64, f64::max)
}

pub fn build_hd_for(
    scheme: SchemeKind,
    mesh: &PolytopalMesh,
    theta: f64,
) -> Result<HessianDiscretisation> {
    match scheme {
        SchemeKind::Fvm => fvm::build_fvm_hd(mesh),
        SchemeKind::Adini => adini::build_adini_hd(mesh),
        SchemeKind::Gr => gr::build_gr_hd(mesh, theta),
    }
}

/// One solved refinement level.
pub struct LevelRun {
    pub mesh: PolytopalMesh,
    pub hd: HessianDiscretisation,
    pub solution: KktSolution,
    pub report: ErrorReport,
}

pub fn run_level(
    scheme: SchemeKind,
    problem: &OcpProblem,
    exact: &ExactTriple,
    mesh: PolytopalMesh,
    theta: f64,
) -> Result<LevelRun> {
    let hd = build_hd_for(scheme, &mesh, theta)?;
    let solution = pdas_solve(problem, &hd, &mesh)?;
    let report = compute_errors(&hd, &solution, exact, &mesh)?;
    Ok(LevelRun {
        mesh,
        hd,
        solution,
        report,
    })
}

/// Run a full coarse-to-fine study. Configuration problems surface as `Err`
/// before anything is solved; a failure at some level returns the completed
/// levels with `failure` set.
pub fn run_study(config: &RunConfig) -> Result<StudyOutput> {
    config.validate()?;
    let (mut problem, exact) = config.problem.instantiate();
    config.apply_overrides(&mut problem);
    problem.validate().map_err(|e| match e {
        HessdiscError::InvalidArgument(m) => HessdiscError::Config(m),
        other => other,
    })?;

    let mut family = config.initial_family()?;
    let mut table = ConvergenceTable::default();
    let mut metadata = StudyMetadata {
        scheme: config.scheme.name(),
        problem: config.problem.name(),
        theta: (config.scheme == SchemeKind::Gr).then_some(config.theta),
        sigma_direction: (config.scheme == SchemeKind::Gr).then_some("(1,1)/sqrt(2)"),
        ordering_id: "reverse-cuthill-mckee",
        levels: Vec::new(),
    };

    for level in 0..config.levels {
        let step = (|| -> Result<()> {
            let mesh = family.build()?;
            let run = run_level(config.scheme, &problem, &exact, mesh, config.theta)?;
            let h = mesh_size(&run.mesh);
            let residual = optimality_residual(&problem, &run.hd, &run.mesh, &run.solution);
            metadata.levels.push(LevelMetadata {
                h,
                n_cells: run.mesh.n_cells(),
                n_dofs: run.hd.n_dofs,
                quadrature_id: run.hd.quad.rule_id.clone(),
                pdas_iterations: run.solution.iterations,
                optimality_residual: residual,
            });
            table.push(h, &run.report);
            Ok(())
        })();
        if let Err(e) = step {
            return Ok(StudyOutput {
                table,
                metadata,
                failure: Some(e),
            });
        }
        if level + 1 < config.levels {
            family = family.refine()?;
        }
    }
    Ok(StudyOutput {
        table,
        metadata,
        failure: None,
    })
}

/// Text block summarising a study's metadata, emitted as comments above tables.
pub fn format_metadata(meta: &StudyMetadata) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "# scheme={} problem={} ordering={}\n",
        meta.scheme, meta.problem, meta.ordering_id
    ));
    if let (Some(theta), Some(dir)) = (meta.theta, meta.sigma_direction) {
        s.push_str(&format!("# theta={theta} sigma_direction={dir}\n"));
    }
    for (i, l) in meta.levels.iter().enumerate() {
        s.push_str(&format!(
            "# level={} h={:.6} cells={} dofs={} quadrature={} pdas_iterations={} kkt_residual={:.3e}\n",
            i, l.h, l.n_cells, l.n_dofs, l.quadrature_id, l.pdas_iterations, l.optimality_residual
        ));
    }
    s
}

/// Stiffness matrix of the study's finest level, for the debug matrix dump.
pub fn finest_stiffness(config: &RunConfig) -> Result<crate::sparse::SparseMatrix> {
    config.validate()?;
    let mut family = config.initial_family()?;
    for _ in 1..config.levels {
        family = family.refine()?;
    }
    let mesh = family.build()?;
    let hd = build_hd_for(config.scheme, &mesh, config.theta)?;
    assemble_stiffness(&hd)
}

/// Tolerance window for the EOC of one quantity over the last refinement pair.
#[derive(Clone, Copy, Debug)]
pub enum EocWindow {
    /// EOC must lie within `target ± tol`.
    Near { target: f64, tol: f64 },
    /// EOC must be at least this large.
    AtLeast(f64),
    /// EOC must stay below this and decrease between the last two pairs.
    BelowAndDecreasing(f64),
    /// The slope fitted through the first and last level must lie within
    /// `target ± tol`. Used on the singular domain, where per-pair orders
    /// oscillate around the asymptotic rate.
    FittedNear { target: f64, tol: f64 },
    Unchecked,
}

/// Expected last-pair EOC windows for a scheme/problem pair, in table
/// column order. `None` when no window is pinned for that combination.
pub fn eoc_windows(
    scheme: SchemeKind,
    problem: ProblemKind,
    mesh: &MeshSource,
) -> Option<[EocWindow; 8]> {
    use EocWindow::*;
    let near = |target, tol| Near { target, tol };
    match (scheme, problem) {
        (SchemeKind::Adini, ProblemKind::Ex1) => Some([
            near(2.1960, 0.2),
            near(2.1782, 0.2),
            near(2.0512, 0.2),
            near(0.9987, 0.2),
            near(1.9958, 0.2),
            near(1.9976, 0.2),
            near(1.9992, 0.2),
            near(1.9928, 0.2),
        ]),
        (SchemeKind::Fvm, ProblemKind::Ex1) => match mesh {
            MeshSource::Builtin => Some([
                near(2.0, 0.2),
                near(2.0, 0.2),
                near(2.0, 0.2),
                near(1.0, 0.1),
                near(2.0, 0.2),
                near(2.0, 0.2),
                near(2.0, 0.2),
                near(2.0, 0.3),
            ]),
            MeshSource::Files(_) => Some([
                AtLeast(1.8),
                near(1.0, 0.2),
                Unchecked,
                near(1.0, 0.15),
                AtLeast(1.8),
                near(1.0, 0.2),
                Unchecked,
                AtLeast(1.8),
            ]),
        },
        (SchemeKind::Gr, ProblemKind::Ex1) => Some([
            near(2.0, 0.25),
            near(2.0, 0.25),
            near(1.0, 0.25),
            near(1.0, 0.25),
            near(2.0, 0.25),
            near(2.0, 0.25),
            near(1.0, 0.25),
            near(2.0, 0.25),
        ]),
        (SchemeKind::Adini, ProblemKind::Ex2) => Some([
            Unchecked,
            Unchecked,
            BelowAndDecreasing(1.0),
            FittedNear { target: 1.0, tol: 0.15 },
            Unchecked,
            Unchecked,
            Unchecked,
            Unchecked,
        ]),
        (SchemeKind::Gr, ProblemKind::Ex2) => Some([
            Unchecked,
            Unchecked,
            BelowAndDecreasing(1.0),
            FittedNear { target: 1.0, tol: 0.25 },
            Unchecked,
            Unchecked,
            Unchecked,
            Unchecked,
        ]),
        _ => None,
    }
}

/// In-process acceptance check: last-pair EOC windows plus the per-level
/// optimality residual bound. Returns human-readable failure messages.
pub fn check_study(config: &RunConfig, out: &StudyOutput) -> Vec<String> {
    let mut failures = Vec::new();
    if let Some(err) = &out.failure {
        failures.push(format!("study incomplete: {err}"));
        return failures;
    }
    for (i, l) in out.metadata.levels.iter().enumerate() {
        if l.optimality_residual >= 1e-10 {
            failures.push(format!(
                "level {i}: PDAS fixed-point residual {:.3e} exceeds 1e-10",
                l.optimality_residual
            ));
        }
    }
    let n = out.table.hs.len();
    if n < 2 {
        return failures;
    }
    let windows = match eoc_windows(config.scheme, config.problem, &config.mesh) {
        Some(w) => w,
        None => return failures,
    };
    for (qi, window) in windows.iter().enumerate() {
        let name = crate::analysis::QUANTITIES[qi];
        let last = match out.table.order(n - 1, qi) {
            Some(o) => o,
            None => {
                failures.push(format!("{name}: last-pair EOC undefined"));
                continue;
            }
        };
        match *window {
            EocWindow::Near { target, tol } => {
                if (last - target).abs() > tol {
                    failures.push(format!(
                        "{name}: last-pair EOC {last:.4} outside {target} +/- {tol}"
                    ));
                }
            }
            EocWindow::AtLeast(min) => {
                if last < min {
                    failures.push(format!("{name}: last-pair EOC {last:.4} below {min}"));
                }
            }
            EocWindow::BelowAndDecreasing(cap) => {
                if last >= cap {
                    failures.push(format!("{name}: last-pair EOC {last:.4} not below {cap}"));
                }
                if n >= 3 {
                    if let Some(prev) = out.table.order(n - 2, qi) {
                        if last >= prev {
                            failures.push(format!(
                                "{name}: EOC {last:.4} did not decrease from {prev:.4}"
                            ));
                        }
                    }
                }
            }
            EocWindow::FittedNear { target, tol } => {
                let fitted = crate::analysis::compute_eoc(
                    out.table.hs[0],
                    out.table.rows[0][qi],
                    out.table.hs[n - 1],
                    out.table.rows[n - 1][qi],
                )
                .unwrap_or(f64::NAN);
                if !((fitted - target).abs() <= tol) {
                    failures.push(format!(
                        "{name}: fitted EOC {fitted:.4} outside {target} +/- {tol}"
                    ));
                }
            }
            EocWindow::Unchecked => {}
        }
    }
    failures
}
