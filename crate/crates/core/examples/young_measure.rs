//! Empirical Young measure of the tail of a rarefaction descent, its
//! moments, the averaged defect energy and the run label.

use varcons::defect::{LinearBackend, ProblemData};
use varcons::descent::{descend, DescentConfig};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, NodalField};
use varcons::young::{
    averaged_defect_energy, classify_run, empirical_measure, measure_moments, tail_window,
    ClassifierConfig,
};

fn main() -> varcons::Result<()> {
    let n = 32;
    let mesh = build_mesh(n, n, 1.0, -1.0, 1.0)?;
    let flux = FluxModel::burgers();
    let problem = ProblemData::riemann(mesh, flux.clone(), -1.0, 1.0)?
        .with_backend(LinearBackend::BandedDirect);
    let config = DescentConfig {
        max_iters: 150,
        record_every: 1,
        ..DescentConfig::default()
    };
    let out = descend(&problem, &NodalField::zeros(mesh), &config)?;
    let fields = out.iterate_fields();
    let tail = tail_window(&fields, 0.5);

    for coarsening in [1, 4] {
        let measure = empirical_measure(tail, coarsening, (-1.5, 1.5), 40)?;
        let cells = measure.num_cells();
        let peak = (0..cells).map(|c| measure.peak_weight(c)).sum::<f64>() / cells as f64;
        let moments = measure_moments(&measure, &flux);
        let averaged = averaged_defect_energy(&problem, &moments)?;
        println!(
            "coarsening {coarsening}: {cells} cells, mean peak weight {peak:.3}, averaged E {averaged:.3e}, clamped {}",
            measure.clamped
        );
    }
    let class = classify_run(&out.history, tail, &ClassifierConfig::default())?;
    println!("final E {:.3e}, label {}", class.final_energy, class.label.as_str());
    Ok(())
}
