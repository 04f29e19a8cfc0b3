//! Steepest descent from `u ≡ 0` towards the Burgers rarefaction fan.
//!
//! ```text
//! cargo run --release --example rarefaction -- 64 200
//! ```

use varcons::defect::{LinearBackend, ProblemData};
use varcons::descent::{descend, DescentConfig};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, NodalField};
use varcons::riemann::{l2_error_vs_exact, RiemannProblem};

fn main() -> varcons::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let n = args.next().unwrap_or(64);
    let iters = args.next().unwrap_or(200);

    let mesh = build_mesh(n, n, 1.0, -1.0, 1.0)?;
    let problem = ProblemData::riemann(mesh, FluxModel::burgers(), -1.0, 1.0)?
        .with_backend(LinearBackend::BandedDirect);
    let config = DescentConfig {
        max_iters: iters,
        record_every: iters.max(1) / 4,
        ..DescentConfig::default()
    };
    let out = descend(&problem, &NodalField::zeros(mesh), &config)?;

    let exact = RiemannProblem::new(-1.0, 1.0, FluxModel::burgers())?;
    println!("iter  E                 L2 error (3-cell band)");
    for it in &out.iterates {
        let e = out.history.records[it.index].energy;
        println!("{:>4}  {e:.6e}  {:.4}", it.index, l2_error_vs_exact(&it.field, &exact, 3.0 * mesh.dx()));
    }
    println!(
        "final {}: E = {:.6e} ({:?})",
        out.history.iterations(),
        out.history.final_energy(),
        out.history.status
    );

    // final time slice next to the fan x/t on [-1, 1]
    println!("\nx        u(T, x)   exact");
    for j in (0..=n).step_by((n / 16).max(1)) {
        let x = mesh.x_min() + j as f64 * mesh.dx();
        println!("{x:+.3}   {:+.4}   {:+.4}", out.field.at(n, j), x.clamp(-1.0, 1.0));
    }
    Ok(())
}
