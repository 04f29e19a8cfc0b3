//! Viscous Burgers by Newton's method, the defect-to-solution ratio, and the
//! quadratic entropy production of the shock and the expansion shock.

use varcons::defect::{LinearBackend, ProblemData};
use varcons::entropy::{
    defect_proportionality_check, entropy_residual, viscous_newton_report, Bump, EntropyPair,
    NewtonOptions,
};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, interpolate_function};

fn main() -> varcons::Result<()> {
    let n = 64;
    let mesh = build_mesh(n, n, 1.0, -1.0, 1.0)?;
    let problem = ProblemData::riemann(mesh, FluxModel::burgers(), 1.0, -1.0)?
        .with_backend(LinearBackend::BandedDirect);

    println!("eps     Newton  residual    ‖v ∓ εu‖ / ε‖u‖");
    for eps in [0.2, 0.1, 0.05] {
        let r = viscous_newton_report(&problem, eps, 1e-10, &NewtonOptions::default())?;
        let d = defect_proportionality_check(&problem, &r.solution, eps)?;
        println!("{eps:<6}  {:>6}  {:.2e}    {d:.4}", r.iterations, r.residuals.last().unwrap());
    }

    let pair = EntropyPair::quadratic(problem.flux());
    let bump = Bump::new((0.5, 0.0), (0.25, 0.25))?;
    let shock = interpolate_function(&mesh, |_, x| if x < 0.0 { 1.0 } else { -1.0 })?;
    let expansion = shock.scaled(-1.0);
    println!("\nentropy production against a bump at (t, x) = (0.5, 0):");
    println!("  entropy shock      {:+.6e}", entropy_residual(&shock, &pair, &bump));
    println!("  expansion shock    {:+.6e}", entropy_residual(&expansion, &pair, &bump));
    Ok(())
}
