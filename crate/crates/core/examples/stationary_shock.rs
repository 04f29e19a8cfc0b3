//! Descent on the Burgers shock `(1, -1)`. The zero-speed jump should be
//! recovered near `x = 0`; the energy also separates it from a jump moving
//! at the wrong speed.

use varcons::defect::{compute_defect, LinearBackend, ProblemData};
use varcons::descent::{descend, DescentConfig};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, interpolate_function, NodalField};
use varcons::riemann::{exact_riemann, l2_error_vs_exact, RiemannProblem};

fn main() -> varcons::Result<()> {
    let n = 64;
    let mesh = build_mesh(n, n, 1.0, -1.0, 1.0)?;
    let problem = ProblemData::riemann(mesh, FluxModel::burgers(), 1.0, -1.0)?
        .with_backend(LinearBackend::BandedDirect);
    let exact = RiemannProblem::new(1.0, -1.0, FluxModel::burgers())?;

    for speed in [0.0, 0.125, 0.25] {
        let jump = interpolate_function(&mesh, |t, x| if x < speed * t { 1.0 } else { -1.0 })?;
        let e = compute_defect(&problem, &jump, 1e-12)?.energy;
        println!("jump at speed {speed:<5}  E = {e:.4e}");
    }
    let pi_h = interpolate_function(&mesh, |t, x| exact_riemann(&exact, t, x))?;
    println!("interpolated exact     E = {:.4e}", compute_defect(&problem, &pi_h, 1e-12)?.energy);

    let config = DescentConfig {
        max_iters: 200,
        ..DescentConfig::default()
    };
    let out = descend(&problem, &NodalField::zeros(mesh), &config)?;
    let profile: Vec<f64> = (0..=n)
        .map(|j| (0..=n).map(|i| out.field.at(i, j)).sum::<f64>() / (n + 1) as f64)
        .collect();
    let crossing = profile.windows(2).position(|w| w[0] * w[1] <= 0.0);
    println!(
        "\nafter {} iterations: E = {:.4e}, banded L2 error {:.4}, profile changes sign at node {:?} (x = 0 is node {})",
        out.history.iterations(),
        out.history.final_energy(),
        l2_error_vs_exact(&out.field, &exact, 3.0 * mesh.dx()),
        crossing,
        n / 2
    );
    Ok(())
}
