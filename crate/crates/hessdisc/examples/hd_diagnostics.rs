//! Intrinsic accuracy measures of the Hessian discretisations.
//!
//! For Adini and gradient recovery on the unit square, prints the
//! coercivity estimate C_D together with the consistency measure S_D
//! and the limit-conformity measure W_D of the smooth benchmark state.
//! S_D and W_D decay with the mesh size while C_D stays bounded, which
//! is exactly what drives the convergence of the Hessian schemes.

use hessdisc::bench::{build_hd_for, SchemeKind};
use hessdisc::exact::example1;
use hessdisc::hd::{estimate_cd, measure_sd, measure_wd, MatrixField};
use hessdisc::mesh::{Domain, MeshFamilyDescriptor};

fn main() {
    let (_, exact) = example1();
    let hessian = MatrixField::from_hessian(&exact.state);
    for scheme in [SchemeKind::Adini, SchemeKind::Gr] {
        println!("{}:", scheme.name());
        let mut family = match scheme {
            SchemeKind::Adini => MeshFamilyDescriptor::squares(Domain::UnitSquare, 4),
            _ => MeshFamilyDescriptor::triangles(Domain::UnitSquare, 4),
        };
        for _ in 0..3 {
            let mesh = family.build().expect("mesh");
            let hd = build_hd_for(scheme, &mesh, 1.0).expect("hd");
            let cd = estimate_cd(&hd).expect("cd");
            let sd = measure_sd(&hd, &exact.state).expect("sd");
            let wd = measure_wd(&hd, &hessian).expect("wd");
            println!(
                "  cells={:5}  C_D={cd:.4}  S_D={sd:.5e}  W_D={wd:.5e}",
                mesh.n_cells()
            );
            family = family.refine().expect("refine");
        }
    }
}
