use varcons::defect::{compute_defect, LinearBackend, ProblemData};
use varcons::descent::{descend, DescentConfig, DescentOutcome};
use varcons::entropy::{
    entropy_residual, viscous_newton_report, Bump, EntropyPair, NewtonOptions,
};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{build_mesh, interpolate_function, NodalField, SpaceTimeMesh};
use varcons::riemann::{exact_riemann, l2_error_vs_exact, RiemannProblem};
use varcons::young::{
    classify_run, empirical_measure, measure_moments, tail_window, ClassifierConfig, RunLabel,
};

fn mesh(n: usize) -> SpaceTimeMesh {
    build_mesh(n, n, 1.0, -1.0, 1.0).unwrap()
}

fn burgers(n: usize, ul: f64, ur: f64) -> ProblemData {
    ProblemData::riemann(mesh(n), FluxModel::burgers(), ul, ur)
        .unwrap()
        .with_backend(LinearBackend::BandedDirect)
}

fn rarefaction_run(n: usize, iters: usize, record_every: usize) -> DescentOutcome {
    let config = DescentConfig {
        max_iters: iters,
        record_every,
        ..DescentConfig::default()
    };
    descend(&burgers(n, -1.0, 1.0), &NodalField::zeros(mesh(n)), &config).unwrap()
}

#[test]
fn rarefaction_descent_approaches_the_fan() {
    let n = 32;
    let out = rarefaction_run(n, 150, 10);
    let e: Vec<f64> = out.history.records.iter().map(|r| r.energy).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]));
    assert!(out.history.final_energy() <= 1e-2 * out.history.initial_energy());
    let rp = RiemannProblem::new(-1.0, 1.0, FluxModel::burgers()).unwrap();
    let err = l2_error_vs_exact(&out.field, &rp, 3.0 * mesh(n).dx());
    assert!(err <= 0.2, "{err}");
}

#[test]
fn entropy_shock_has_lower_energy_than_a_misplaced_one() {
    let n = 32;
    let p = burgers(n, 1.0, -1.0);
    let rp = RiemannProblem::new(1.0, -1.0, FluxModel::burgers()).unwrap();
    let exact = interpolate_function(p.mesh(), |t, x| exact_riemann(&rp, t, x)).unwrap();
    let moving = interpolate_function(p.mesh(), |t, x| if x < 0.25 * t { 1.0 } else { -1.0 }).unwrap();
    let e_exact = compute_defect(&p, &exact, 1e-12).unwrap().energy;
    let e_moving = compute_defect(&p, &moving, 1e-12).unwrap().energy;
    assert!(e_exact < 0.2 * e_moving, "{e_exact:e} vs {e_moving:e}");
}

#[test]
fn viscous_shock_is_monotone_and_bounded() {
    let p = burgers(24, 1.0, -1.0);
    let report = viscous_newton_report(&p, 0.1, 1e-10, &NewtonOptions::default()).unwrap();
    assert!(*report.residuals.last().unwrap() <= 1e-10);
    let u = &report.solution;
    let m = *u.mesh();
    for i in 0..=m.nt() {
        for j in 0..m.nx() {
            assert!(u.at(i, j + 1) <= u.at(i, j) + 1e-9, "slice {i}, node {j}");
        }
        assert!((0..=m.nx()).all(|j| u.at(i, j).abs() <= 1.0 + 1e-9));
    }
}

#[test]
fn quadratic_entropy_production_changes_sign_with_the_shock() {
    let p = burgers(64, 1.0, -1.0);
    let pair = EntropyPair::quadratic(p.flux());
    let bump = Bump::new((0.5, 0.0), (0.25, 0.25)).unwrap();
    let shock = interpolate_function(p.mesh(), |_, x| if x < 0.0 { 1.0 } else { -1.0 }).unwrap();
    let expansion = shock.scaled(-1.0);
    let r_shock = entropy_residual(&shock, &pair, &bump);
    let r_expansion = entropy_residual(&expansion, &pair, &bump);
    assert!(r_shock < 0.0 && r_expansion > 0.0);
    // φ even, ψ odd: u ↦ −u flips the sign exactly
    assert!((r_shock + r_expansion).abs() <= 1e-12 * r_shock.abs());
}

#[test]
fn young_measure_of_rarefaction_tail_is_concentrated() {
    let n = 32;
    let out = rarefaction_run(n, 100, 1);
    let fields = out.iterate_fields();
    let tail = tail_window(&fields, 0.5);
    let measure = empirical_measure(tail, 1, (-1.5, 1.5), 40).unwrap();
    for c in 0..measure.num_cells() {
        let total: f64 = measure.cell_weights(c).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    let mean_peak: f64 =
        (0..measure.num_cells()).map(|c| measure.peak_weight(c)).sum::<f64>() / measure.num_cells() as f64;
    assert!(mean_peak >= 0.8, "{mean_peak}");

    let moments = measure_moments(&measure, &FluxModel::burgers());
    let final_q = out.field.values_at_quadrature();
    let gap = moments
        .at_quadrature()
        .0
        .iter()
        .zip(final_q.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 0.5, "{gap}");

    let label = classify_run(&out.history, tail, &ClassifierConfig::default()).unwrap().label;
    assert_eq!(label, RunLabel::ClassicalWeakCandidate);
}
