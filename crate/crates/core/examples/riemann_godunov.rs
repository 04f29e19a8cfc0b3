//! Exact Riemann solutions next to a first-order Godunov run.

use varcons::flux::FluxModel;
use varcons::riemann::{
    exact_riemann, godunov_reference, l1_distance_to_exact, GodunovGrid, RiemannProblem,
};

fn main() -> varcons::Result<()> {
    let cubic = FluxModel::polynomial(vec![0.0, 0.0, 0.5, 0.1])?;
    for (ul, ur, flux) in [
        (1.0, -1.0, FluxModel::burgers()),
        (-1.0, 1.0, FluxModel::burgers()),
        (-0.5, 1.0, cubic),
    ] {
        let p = RiemannProblem::new(ul, ur, flux)?;
        println!("({ul}, {ur}) with {}: {:?}", p.flux.name(), p.wave());
        for nx in [64, 256, 1024] {
            let grid = GodunovGrid { nx, x_min: -1.0, x_max: 1.0 };
            let sol = godunov_reference(&p, |x| if x < 0.0 { ul } else { ur }, grid, 1.0, 0.9, &[1.0])?;
            let (t, cells) = &sol.slices[0];
            println!(
                "  nx = {nx:>4}: {} steps, L1 distance at t = 1 {:.3e}, TV {:.4} -> {:.4}",
                sol.steps,
                l1_distance_to_exact(&p, *t, &sol.x_centers, cells, sol.dx),
                sol.total_variation[0],
                sol.total_variation.last().unwrap()
            );
        }
        let probe: Vec<String> = [-0.75, -0.25, 0.0, 0.25, 0.75]
            .iter()
            .map(|&x| format!("{:+.3}", exact_riemann(&p, 1.0, x)))
            .collect();
        println!("  u(1, -0.75 .. 0.75) = {}", probe.join(" "));
    }
    Ok(())
}
