//! Energy of interpolated exact solutions under mesh refinement.

use varcons::defect::{compute_defect, LinearBackend, ProblemData};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, interpolate_function};
use varcons::riemann::{exact_riemann, RiemannProblem};

fn main() -> varcons::Result<()> {
    for (name, ul, ur) in [("rarefaction", -1.0, 1.0), ("shock", 1.0, -1.0)] {
        let exact = RiemannProblem::new(ul, ur, FluxModel::burgers())?;
        let mut last: Option<f64> = None;
        for n in [8, 16, 32, 64, 128] {
            let mesh = build_mesh(n, n, 1.0, -1.0, 1.0)?;
            let problem = ProblemData::riemann(mesh, FluxModel::burgers(), ul, ur)?
                .with_backend(LinearBackend::BandedDirect);
            let u = interpolate_function(&mesh, |t, x| exact_riemann(&exact, t, x))?;
            let e = compute_defect(&problem, &u, 1e-12)?.energy;
            let ratio = last.map_or("-".into(), |l| format!("{:.3}", l / e));
            println!("{name:<12} n = {n:>3}  E = {e:.4e}  ratio {ratio}");
            last = Some(e);
        }
    }
    Ok(())
}
