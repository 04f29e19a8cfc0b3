//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varcons::cli::commands::run_solve;
use varcons::cli::RunConfig;
use varcons::defect::{
    assemble_defect_rhs, compute_defect, directional_derivative_with, LinearBackend, ProblemData,
};
use varcons::descent::{descend, DescentConfig};
use varcons::entropy::{
    defect_proportionality_check, entropy_residual, viscous_newton_report, Bump, EntropyPair,
    NewtonOptions,
};
use varcons::flux::{
    check_commutation, diagonal_example, state_grid, ConstantJacobians, FluxModel, ScalarSystem,
};
use varcons::mesh_fem::{build_mesh, h1_seminorm, interpolate_function, NodalField, SpaceTimeMesh};
use varcons::riemann::{exact_riemann, l2_error_vs_exact, RiemannProblem};
use varcons::young::{empirical_measure, measure_moments};

type Criterion = (&'static str, f64, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn square(n: usize) -> SpaceTimeMesh {
    build_mesh(n, n, 1.0, -1.0, 1.0).unwrap()
}

fn burgers(mesh: SpaceTimeMesh, ul: f64, ur: f64, backend: LinearBackend) -> ProblemData {
    ProblemData::riemann(mesh, FluxModel::burgers(), ul, ur)
        .unwrap()
        .with_backend(backend)
}

fn interpolant(mesh: &SpaceTimeMesh, ul: f64, ur: f64) -> NodalField {
    let rp = RiemannProblem::new(ul, ur, FluxModel::burgers()).unwrap();
    interpolate_function(mesh, |t, x| exact_riemann(&rp, t, x)).unwrap()
}

fn energy(p: &ProblemData, u: &NodalField) -> f64 {
    compute_defect(p, u, 1e-12).unwrap().energy
}

fn gradient_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for n in [8, 16] {
        let mesh = square(n);
        let p = burgers(mesh, 1.0, -1.0, LinearBackend::BandedDirect);
        for _ in 0..10 {
            let mut random = || {
                let values = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                NodalField::new(mesh, values).unwrap()
            };
            let (u, dir) = (random(), random());
            let v = compute_defect(&p, &u, 1e-14).unwrap().v;
            let dd = directional_derivative_with(&p, &u, &v, &dir);
            let ep = energy(&p, &u.add_scaled(h, &dir).unwrap());
            let em = energy(&p, &u.add_scaled(-h, &dir).unwrap());
            let fd = (ep - em) / (2.0 * h);
            worst = worst.max((dd - fd).abs() / dd.abs().max(1e-12));
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.3e} (<= 1e-5)"))
}

/// Q1 stiffness of the H¹ seminorm as a Kronecker sum of 1-D matrices.
fn kronecker_stiffness(mesh: &SpaceTimeMesh) -> DMatrix<f64> {
    let one_d = |n: usize, h: f64| {
        let mut k = DMatrix::zeros(n + 1, n + 1);
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for e in 0..n {
            for (a, b) in [(e, e), (e + 1, e + 1), (e, e + 1), (e + 1, e)] {
                k[(a, b)] += if a == b { 1.0 / h } else { -1.0 / h };
                m[(a, b)] += if a == b { h / 3.0 } else { h / 6.0 };
            }
        }
        (k, m)
    };
    let (kt, mt) = one_d(mesh.nt(), mesh.dt());
    let (kx, mx) = one_d(mesh.nx(), mesh.dx());
    let mut a = kt.kronecker(&mx) + mt.kronecker(&kx);
    for j in 0..=mesh.nx() {
        let k = mesh.node_index(mesh.nt(), j);
        a.row_mut(k).fill(0.0);
        a.column_mut(k).fill(0.0);
        a[(k, k)] = 1.0;
    }
    a
}

fn solver_oracle() -> Outcome {
    let mesh = square(8);
    let p = burgers(mesh, 1.0, -1.0, LinearBackend::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = NodalField::new(mesh, values).unwrap();
    let rhs = DVector::from_vec(assemble_defect_rhs(&p, &u).unwrap());
    let dense = kronecker_stiffness(&mesh).lu().solve(&rhs).unwrap();
    let dense = NodalField::new(mesh, dense.iter().copied().collect()).unwrap();
    let v = compute_defect(&p, &u, 1e-13).unwrap().v;
    let rel = h1_seminorm(&v.add_scaled(-1.0, &dense).unwrap()) / h1_seminorm(&dense);
    outcome(rel <= 1e-10, format!("relative H1 difference {rel:.3e} (<= 1e-10)"))
}

fn exact_zero_set() -> Outcome {
    let mesh = square(16);
    let p = burgers(mesh, 0.3, 0.3, LinearBackend::BandedDirect);
    let e_const = energy(&p, &NodalField::constant(mesh, 0.3));
    let mut detail = format!("constant E {e_const:.3e} (<= 1e-20)");
    let mut pass = e_const <= 1e-20;
    for (name, ul, ur) in [("rarefaction", -1.0, 1.0), ("shock", 1.0, -1.0)] {
        let es: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let mesh = square(n);
                energy(&burgers(mesh, ul, ur, LinearBackend::BandedDirect), &interpolant(&mesh, ul, ur))
            })
            .collect();
        pass &= es.windows(2).all(|w| w[1] < w[0]);
        write!(detail, "; {name} E {:.3e} > {:.3e} > {:.3e}", es[0], es[1], es[2]).unwrap();
    }
    outcome(pass, detail)
}

fn rankine_hugoniot() -> Outcome {
    let mesh = square(64);
    let p = burgers(mesh, 1.0, -1.0, LinearBackend::BandedDirect);
    let right = energy(&p, &interpolant(&mesh, 1.0, -1.0));
    let moving = interpolate_function(&mesh, |t, x| if x < 0.25 * t { 1.0 } else { -1.0 }).unwrap();
    let wrong = energy(&p, &moving);
    let ratio = right / wrong;
    outcome(
        ratio <= 0.1,
        format!("E(speed 0) {right:.4e} / E(speed 0.25) {wrong:.4e} = {ratio:.4} (<= 0.1)"),
    )
}

/// Iteration budget of the figure reproductions; the example runs use 200.
const FIGURE_ITERS: usize = 200;

fn rarefaction_figure() -> Outcome {
    let mesh = square(64);
    let p = burgers(mesh, -1.0, 1.0, LinearBackend::BandedDirect);
    let config = DescentConfig {
        max_iters: FIGURE_ITERS,
        ..DescentConfig::default()
    };
    let out = descend(&p, &NodalField::zeros(mesh), &config).unwrap();
    let e: Vec<f64> = out.history.records.iter().map(|r| r.energy).collect();
    let decreasing = e.windows(2).all(|w| w[1] < w[0]);
    let ratio = out.history.final_energy() / out.history.initial_energy();
    let rp = RiemannProblem::new(-1.0, 1.0, FluxModel::burgers()).unwrap();
    let err = l2_error_vs_exact(&out.field, &rp, 3.0 * mesh.dx());
    outcome(
        ratio <= 1e-2 && err <= 0.2 && decreasing,
        format!(
            "{} iterations, E/E0 {ratio:.3e} (<= 1e-2), banded L2 error {err:.4} (<= 0.2), E strictly decreasing: {decreasing}",
            out.history.iterations()
        ),
    )
}

fn zero_crossing(u: &NodalField) -> Option<f64> {
    let m = *u.mesh();
    let profile: Vec<f64> = (0..=m.nx())
        .map(|j| (0..=m.nt()).map(|i| u.at(i, j)).sum::<f64>() / (m.nt() + 1) as f64)
        .collect();
    let j = profile.windows(2).position(|w| w[0] * w[1] <= 0.0)?;
    let (a, b) = (profile[j], profile[j + 1]);
    let s = if a == b { 0.5 } else { a / (a - b) };
    Some(m.x_min() + (j as f64 + s) * m.dx())
}

fn shock_figure() -> Outcome {
    let mesh = square(64);
    let p = burgers(mesh, 1.0, -1.0, LinearBackend::BandedDirect);
    let config = DescentConfig {
        max_iters: 500,
        record_every: 100,
        ..DescentConfig::default()
    };
    let out = descend(&p, &NodalField::zeros(mesh), &config).unwrap();
    let rp = RiemannProblem::new(1.0, -1.0, FluxModel::burgers()).unwrap();
    let at = out
        .iterates
        .iter()
        .find(|s| s.index == FIGURE_ITERS)
        .map(|s| &s.field)
        .unwrap_or(&out.field);
    let err = l2_error_vs_exact(at, &rp, 3.0 * mesh.dx());
    let err_cap = l2_error_vs_exact(&out.field, &rp, 3.0 * mesh.dx());
    let crossing = zero_crossing(at);
    let near = crossing.is_some_and(|x| x.abs() <= 2.0 * mesh.dx());
    outcome(
        near && err <= 0.25,
        format!(
            "at {FIGURE_ITERS} iterations: zero crossing x = {} (|x| <= {:.4}), banded L2 error {err:.4} (<= 0.25); \
             continued to {} iterations the error is {err_cap:.4}",
            crossing.map_or("none".into(), |x| format!("{x:.4}")),
            2.0 * mesh.dx(),
            out.history.iterations()
        ),
    )
}

fn entropy_identity() -> Outcome {
    let mesh = square(64);
    let p = burgers(mesh, 1.0, -1.0, LinearBackend::BandedDirect);
    let eps = 0.05;
    let options = NewtonOptions::default();
    let mut discrepancy = Vec::new();
    let mut detail = String::new();
    for tol in [1e-6, 1e-10] {
        let r = viscous_newton_report(&p, eps, tol, &options).unwrap();
        let d = defect_proportionality_check(&p, &r.solution, eps).unwrap();
        write!(detail, "newton_tol {tol:e}: {} Newton steps, discrepancy {d:.10}; ", r.iterations).unwrap();
        discrepancy.push(d);
    }
    let shrinks = discrepancy[1] < discrepancy[0];
    write!(detail, "target <= 0.05 and shrinking: {shrinks}").unwrap();
    outcome(discrepancy[1] <= 0.05 && shrinks, detail)
}

fn entropy_discrimination() -> Outcome {
    let mesh = square(64);
    let pair = EntropyPair::quadratic(&FluxModel::burgers());
    let bump = Bump::new((0.5, 0.0), (0.25, 0.25)).unwrap();
    let admissible = entropy_residual(&interpolant(&mesh, 1.0, -1.0), &pair, &bump);
    // the states of the entropy shock swapped, kept as a jump
    let expansion = interpolate_function(&mesh, |_, x| if x < 0.0 { -1.0 } else { 1.0 }).unwrap();
    let violating_shock = entropy_residual(&expansion, &pair, &bump);
    let ratio = violating_shock / admissible.abs().max(f64::MIN_POSITIVE);
    outcome(
        violating_shock > 0.0 && ratio >= 10.0,
        format!(
            "admissible {admissible:.5e}, expansion shock {violating_shock:.5e}, ratio {ratio:.4} (positive and >= 10)"
        ),
    )
}

fn young_algebra() -> Outcome {
    let mesh = build_mesh(4, 6, 1.0, -1.0, 1.0).unwrap();
    let flux = FluxModel::burgers();
    let (lo, hi, bins) = (-1.5, 1.5, 15);
    let half_bin = 0.5 * (hi - lo) / bins as f64;
    let oscillating: Vec<NodalField> = (0..10)
        .map(|k| NodalField::constant(mesh, if k % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    let m = empirical_measure(&oscillating, 1, (lo, hi), bins).unwrap();
    let mut weight_err = 0.0f64;
    for c in 0..m.num_cells() {
        let mut nonzero: Vec<f64> = m.cell_weights(c).iter().copied().filter(|w| *w > 0.0).collect();
        nonzero.resize(2, 0.0);
        weight_err = weight_err.max((nonzero[0] - 0.5).abs()).max((nonzero[1] - 0.5).abs());
    }
    let mom = measure_moments(&m, &flux);
    let u_err = mom.cell_u.iter().map(|u| u.abs()).fold(0.0, f64::max);
    // f(z) = z²/2 varies by at most |z| h on a bin of half-width h around ±1
    let f_err = mom.cell_f.iter().map(|f| (f - 0.5).abs()).fold(0.0, f64::max);

    let mut dirac_err = 0.0f64;
    for c in [-0.9, 0.33, 1.2] {
        let seq = vec![NodalField::constant(mesh, c); 3];
        let mom = measure_moments(&empirical_measure(&seq, 2, (lo, hi), bins).unwrap(), &flux);
        for (u, f) in mom.cell_u.iter().zip(&mom.cell_f) {
            dirac_err = dirac_err
                .max((u - c).abs() / half_bin)
                .max((f - flux.f(c)).abs() / (half_bin * (c.abs() + half_bin)));
        }
    }
    outcome(
        weight_err <= 1e-12 && u_err <= half_bin && f_err <= 1.5 * half_bin && dirac_err <= 1.0,
        format!(
            "weight error {weight_err:.1e} (<= 1e-12), |u_bar| {u_err:.1e}, |f_bar - 0.5| {f_err:.1e} (half bin {half_bin}), \
             Dirac error {dirac_err:.3} of the quantization bound (<= 1)"
        ),
    )
}

fn commutation() -> Outcome {
    let tol = 1e-12;
    let scalar = ScalarSystem {
        flux: FluxModel::burgers(),
        directions: vec![1.0, -0.5, 2.0],
    };
    let s = check_commutation(&scalar, &state_grid(1, -1.0, 1.0, 9), tol).unwrap();
    let a = check_commutation(&ConstantJacobians::anticommuting_pair(), &state_grid(2, -1.0, 1.0, 3), tol)
        .unwrap();
    let d = check_commutation(&diagonal_example(), &state_grid(2, -1.0, 1.0, 5), tol).unwrap();
    let target = 2.0 * 2f64.sqrt();
    outcome(
        s.max_residual == 0.0 && (a.max_residual - target).abs() <= 1e-12 && !a.commutes && d.commutes,
        format!(
            "scalar {:.1e} (= 0), anticommuting {:.15} (2√2 ± 1e-12) commutes {}, diagonal commutes {}",
            s.max_residual, a.max_residual, a.commutes, d.commutes
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let mut config = RunConfig::default();
        config.run.output_dir = tmp.path().join(name);
        let artifacts = run_solve(&config).unwrap();
        let mut csvs: Vec<(String, Vec<u8>)> = artifacts
            .files
            .iter()
            .filter(|f| f.extension().is_some_and(|e| e == "csv"))
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(f).unwrap()))
            .collect();
        csvs.sort();
        outputs.push(csvs);
    }
    let count = outputs[0].len();
    let same = count > 0 && outputs[0] == outputs[1];
    outcome(same, format!("{count} CSV files byte-identical across two runs: {same}"))
}

fn main() {
    // one worker thread for the whole suite
    std::env::set_var("VARCONS_THREADS", "1");
    let criteria: [Criterion; 11] = [
        ("gradient exactness", 10.0, gradient_exactness),
        ("solver oracle equivalence", 1.0, solver_oracle),
        ("exact-solution zero set", 30.0, exact_zero_set),
        ("Rankine-Hugoniot discriminator", 30.0, rankine_hugoniot),
        ("rarefaction descent", 60.0, rarefaction_figure),
        ("stationary shock descent", 60.0, shock_figure),
        ("viscous defect identity", 60.0, entropy_identity),
        ("entropy discrimination", 10.0, entropy_discrimination),
        ("Young-measure algebra", 5.0, young_algebra),
        ("commutation checker", 1.0, commutation),
        ("determinism", 60.0, determinism),
    ];
    let mut failed = 0;
    for (k, (name, limit, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let o = check();
        let secs = clock.elapsed().as_secs_f64();
        let pass = o.pass && secs <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {} | runtime {secs:.2} s (<= {limit} s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
