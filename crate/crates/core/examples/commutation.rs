//! Commutation of flux Jacobians: scalar laws commute trivially, a constant
//! anticommuting pair does not, and a diagonal system does.

use nalgebra::DMatrix;
use varcons::flux::{
    check_commutation, diagonal_example, state_grid, ConstantJacobians, FluxModel, FnSystemFlux,
    ScalarSystem,
};

fn main() -> varcons::Result<()> {
    let tol = 1e-12;
    let scalar = ScalarSystem {
        flux: FluxModel::burgers(),
        directions: vec![1.0, 0.5],
    };
    // commutator u0 u1 diag(1, -1): commutes only on the axes
    let shear = FnSystemFlux::new(2, 2, |j, u: &[f64]| match j {
        0 => DMatrix::from_row_slice(2, 2, &[1.0, u[0], 0.0, 1.0]),
        _ => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, u[1], 1.0]),
    });
    let anticommuting = ConstantJacobians::anticommuting_pair();
    let diagonal = diagonal_example();
    let cases: [(&str, &dyn varcons::flux::SystemFlux); 4] = [
        ("scalar", &scalar),
        ("anticommuting", &anticommuting),
        ("diagonal", &diagonal),
        ("shear", &shear),
    ];
    for (name, system) in cases {
        let samples = state_grid(system.state_dim(), -1.0, 1.0, 5);
        let r = check_commutation(system, &samples, tol)?;
        println!("{name:<14} max ‖[A_j, A_k]‖ = {:.6e}  commutes: {}", r.max_residual, r.commutes);
    }
    Ok(())
}
