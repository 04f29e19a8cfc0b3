//! The exact derivative of `E` against central differences in random directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcons::defect::{compute_defect, directional_derivative_with, LinearBackend, ProblemData};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, NodalField};

fn main() -> varcons::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let flux = FluxModel::polynomial(vec![0.0, 0.2, 0.5, 0.1])?;
    for n in [8, 16] {
        let mesh = build_mesh(n, n, 1.0, -1.0, 1.0)?;
        let problem = ProblemData::riemann(mesh, flux.clone(), 1.0, -0.5)?
            .with_backend(LinearBackend::BandedDirect);
        for _ in 0..3 {
            let mut random = || {
                NodalField::new(mesh, (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            };
            let (u, dir) = (random()?, random()?);
            let v = compute_defect(&problem, &u, 1e-14)?.v;
            let dd = directional_derivative_with(&problem, &u, &v, &dir);
            for h in [1e-2, 1e-3, 1e-4] {
                let ep = compute_defect(&problem, &u.add_scaled(h, &dir)?, 1e-14)?.energy;
                let em = compute_defect(&problem, &u.add_scaled(-h, &dir)?, 1e-14)?.energy;
                let fd = (ep - em) / (2.0 * h);
                println!("n = {n:>2}  h = {h:.0e}  dd = {dd:+.10e}  rel err = {:.2e}", (dd - fd).abs() / dd.abs());
            }
        }
    }
    Ok(())
}
