//! The subcommands. Each returns a report of named checks; any failing check
//! makes the process exit with status 2.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{CommutationCase, ConfigError, InitialGuess, RunConfig};
use super::output::{num, write_field, write_history, write_pgm, CsvWriter, Summary};
use crate::defect::{compute_defect, directional_derivative, LinearBackend, ProblemData};
use crate::descent::{descend, DescentOutcome};
use crate::entropy::{
    defect_proportionality_check, entropy_residual, perturbed_energy, viscous_newton_report,
    Bump, EntropyPair, NewtonOptions,
};
use crate::flux::{
    check_commutation, diagonal_example, state_grid, ConstantJacobians, ScalarSystem, SystemFlux,
};
use crate::mesh_fem::{
    h1_seminorm, interpolate_function, solve_spd_with, CgOptions, NodalField,
};
use crate::riemann::{exact_riemann, godunov_reference, l2_error_vs_exact, GodunovGrid, RiemannProblem};
use crate::young::{
    averaged_defect_energy, classify_run, empirical_measure, measure_moments, tail_window,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub measured: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn push(&mut self, name: impl Into<String>, measured: f64, target: impl Into<String>, pass: bool) {
        self.lines.push(CheckLine {
            name: name.into(),
            measured,
            target: target.into(),
            pass,
        });
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| !l.pass).count()
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.lines {
            let tag = if l.pass { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {} (target {})", l.name, num(l.measured), l.target)?;
        }
        Ok(())
    }
}

/// Worker count from `VARCONS_THREADS`; 0 lets rayon decide.
pub fn thread_count() -> Result<usize, ConfigError> {
    match std::env::var("VARCONS_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ConfigError::Invalid(format!(
                "VARCONS_THREADS must be a positive integer, got {s:?}"
            ))),
        },
        Err(_) => Ok(0),
    }
}

/// Worker pool for sweeps, sized by `VARCONS_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, ConfigError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn output_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config.run.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn riemann_problem(config: &RunConfig) -> Option<RiemannProblem> {
    let (ul, ur) = config.riemann_states()?;
    RiemannProblem::new(ul, ur, config.flux_model().ok()?).ok()
}

fn initial_guess(config: &RunConfig, problem: &ProblemData) -> crate::Result<NodalField> {
    match config.descent.init {
        InitialGuess::Zero => Ok(NodalField::zeros(*problem.mesh())),
        InitialGuess::Data => interpolate_function(problem.mesh(), |_, x| problem.u0(x)),
    }
}

fn run_descent(config: &RunConfig) -> Result<(ProblemData, DescentOutcome), CliError> {
    let problem = config.problem_on(config.mesh()?)?;
    let init = initial_guess(config, &problem)?;
    let outcome = descend(&problem, &init, &config.descent.to_config())?;
    Ok((problem, outcome))
}

/// Files written by [`run_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolveArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub final_energy: f64,
    pub l2_error: Option<f64>,
}

/// Descent from the configured start, then history, fields, comparison with
/// the exact solution (Riemann data only), heatmap and summary.
pub fn run_solve(config: &RunConfig) -> Result<SolveArtifacts, CliError> {
    let clock = Instant::now();
    let dir = output_dir(config)?;
    let (_problem, outcome) = run_descent(config)?;
    let mesh = *outcome.field.mesh();
    let mut files = Vec::new();
    let mut path = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };
    write_history(&path("history.csv"), &outcome.history)?;
    write_field(&path("field_final.csv"), &outcome.field, "u")?;
    write_field(&path("defect_final.csv"), &outcome.defect.v, "v")?;
    write_pgm(&path("heatmap.pgm"), &outcome.field)?;

    let mut summary = Summary::default();
    summary
        .put("status", outcome.history.status.as_str())
        .put("iterations", outcome.history.iterations())
        .put_num("initial_energy", outcome.history.initial_energy())
        .put_num("final_energy", outcome.history.final_energy())
        .put_num(
            "final_grad_norm",
            outcome.history.records.last().map_or(0.0, |r| r.gradient_norm),
        );

    let mut l2_error = None;
    if let Some(rp) = riemann_problem(config) {
        let mut csv = CsvWriter::create(&path("comparison.csv"), &["t", "x", "u", "u_exact", "abs_err"])?;
        for i in 0..=mesh.nt() {
            for j in 0..=mesh.nx() {
                let (t, x) = mesh.node(i, j);
                let (u, exact) = (outcome.field.at(i, j), exact_riemann(&rp, t, x));
                csv.floats(&[t, x, u, exact, (u - exact).abs()])?;
            }
        }
        csv.finish()?;

        let times: Vec<f64> = (0..=mesh.nt()).map(|i| mesh.t_at(i)).collect();
        let godunov = godunov_reference(
            &rp,
            |x| exact_riemann(&rp, 0.0, x),
            GodunovGrid {
                nx: mesh.nx(),
                x_min: mesh.x_min(),
                x_max: mesh.x_max(),
            },
            mesh.t_final(),
            0.9,
            &times,
        )?;
        let mut csv = CsvWriter::create(&path("godunov.csv"), &["t", "x_center", "u"])?;
        for (t, cells) in &godunov.slices {
            for (x, u) in godunov.x_centers.iter().zip(cells) {
                csv.floats(&[*t, *x, *u])?;
            }
        }
        csv.finish()?;

        let err = l2_error_vs_exact(&outcome.field, &rp, 0.0);
        let banded = l2_error_vs_exact(&outcome.field, &rp, 3.0 * mesh.dx());
        summary.put_num("l2_error", err).put_num("l2_error_band3", banded);
        l2_error = Some(err);
    }
    summary.put_num("wall_time_s", clock.elapsed().as_secs_f64());
    summary.write(&path("run_summary.txt"))?;
    Ok(SolveArtifacts {
        dir,
        files,
        final_energy: outcome.history.final_energy(),
        l2_error,
    })
}

fn random_field(mesh: crate::mesh_fem::SpaceTimeMesh, rng: &mut ChaCha8Rng) -> NodalField {
    let values = (0..mesh.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    NodalField::new(mesh, values).expect("finite")
}

/// Directional derivative against central differences of `E` for seeded
/// random `(u, U)` pairs.
pub fn gradient_check(config: &RunConfig) -> Result<CheckReport, CliError> {
    let dir = output_dir(config)?;
    let c = &config.checks;
    let mut csv = CsvWriter::create(&dir.join("gradient_check.csv"), &["n", "pair", "dd", "fd", "rel_err"])?;
    let mut report = CheckReport::default();
    for &n in &c.gradient_meshes {
        let mesh = config.mesh_with(n, n)?;
        let problem = config.problem_on(mesh)?.with_backend(LinearBackend::BandedDirect);
        let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed.wrapping_add(n as u64));
        let mut worst = 0.0f64;
        for pair in 0..c.gradient_pairs {
            let u = random_field(mesh, &mut rng);
            let dir_field = random_field(mesh, &mut rng);
            let dd = directional_derivative(&problem, &u, &dir_field)?;
            let e = |s: f64| -> crate::Result<f64> {
                Ok(compute_defect(&problem, &u.add_scaled(s, &dir_field)?, 1e-14)?.energy)
            };
            let fd = (e(c.fd_step)? - e(-c.fd_step)?) / (2.0 * c.fd_step);
            let rel = (dd - fd).abs() / dd.abs().max(1e-12);
            worst = worst.max(rel);
            csv.row(&[n.to_string(), pair.to_string(), num(dd), num(fd), num(rel)])?;
        }
        report.push(
            format!("gradient {n}x{n}, {} pairs, max relative error", c.gradient_pairs),
            worst,
            format!("<= {:e}", c.gradient_tol),
            worst <= c.gradient_tol,
        );
    }
    csv.finish()?;
    Ok(report)
}

/// Defect solve (conjugate gradients and banded LU) against a dense LU of
/// the same constrained system.
pub fn oracle_check(config: &RunConfig) -> Result<CheckReport, CliError> {
    let c = &config.checks;
    let mesh = config.mesh_with(c.oracle_n, c.oracle_n)?;
    let problem = config.problem_on(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let u = random_field(mesh, &mut rng);
    let rhs = crate::defect::assemble_defect_rhs(&problem, &u)?;
    let dense = dense_solve(&problem, &rhs)?;
    let mut report = CheckReport::default();
    let norm = h1_seminorm(&dense);
    let mut sys = problem.system().clone();
    sys.rhs = rhs.clone();
    let cg = solve_spd_with(&sys, &mesh, &CgOptions { rel_tol: config.descent.rel_tol, ..CgOptions::default() })?;
    let banded = NodalField::new(mesh, problem.clone().with_backend(LinearBackend::BandedDirect).solve(&rhs, 1e-10)?)?;
    for (name, field) in [("conjugate gradient", cg), ("banded LU", banded)] {
        let rel = h1_seminorm(&field.add_scaled(-1.0, &dense)?) / norm.max(f64::MIN_POSITIVE);
        report.push(
            format!("{name} vs dense LU on {0}x{0}, relative H1 difference", c.oracle_n),
            rel,
            format!("<= {:e}", c.oracle_tol),
            rel <= c.oracle_tol,
        );
    }
    Ok(report)
}

fn dense_solve(problem: &ProblemData, rhs: &[f64]) -> crate::Result<NodalField> {
    let a = problem.system().matrix.to_dense();
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let x = m
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(rhs))
        .ok_or(crate::Error::SingularMatrix(0))?;
    NodalField::new(*problem.mesh(), x.iter().copied().collect())
}

pub fn commutation_check(config: &RunConfig) -> Result<CheckReport, CliError> {
    let c = &config.checks;
    let mut report = CheckReport::default();
    for case in &c.commutation_cases {
        let (name, system): (&str, Box<dyn SystemFlux>) = match case {
            CommutationCase::Scalar => (
                "scalar",
                Box::new(ScalarSystem {
                    flux: config.flux_model()?,
                    directions: vec![1.0, -0.5, 2.0],
                }),
            ),
            CommutationCase::Anticommuting => ("anticommuting", Box::new(ConstantJacobians::anticommuting_pair())),
            CommutationCase::Diagonal => ("diagonal", Box::new(diagonal_example())),
        };
        let samples = state_grid(system.state_dim(), -1.0, 1.0, c.commutation_samples);
        let r = check_commutation(system.as_ref(), &samples, c.commutation_tol)?;
        report.push(
            format!("commutation ({name}), max commutator norm"),
            r.max_residual,
            format!("<= {:e}", c.commutation_tol),
            r.commutes,
        );
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyRow {
    pub epsilon: f64,
    pub energy: f64,
    pub perturbed: f64,
    pub discrepancy: f64,
    pub entropy_residual: f64,
    pub newton_iterations: usize,
}

/// Viscous solutions for every configured `ε`, solved in parallel.
pub fn entropy_sweep(config: &RunConfig) -> Result<(Vec<EntropyRow>, CheckReport), CliError> {
    let dir = output_dir(config)?;
    let pool = thread_pool()?;
    let problem = config.problem_on(config.mesh()?)?;
    let e = &config.entropy;
    let bump = Bump::new((e.bump_t, e.bump_x), (e.bump_rt, e.bump_rx))?;
    let pair = EntropyPair::quadratic(problem.flux());
    let options = NewtonOptions {
        max_iters: e.newton_max_iters,
        ..NewtonOptions::default()
    };
    let results: Vec<crate::Result<(EntropyRow, NodalField)>> = pool.install(|| {
        e.epsilons
            .par_iter()
            .map(|&eps| {
                let newton = viscous_newton_report(&problem, eps, e.newton_tol, &options)?;
                let u = newton.solution;
                Ok((
                    EntropyRow {
                        epsilon: eps,
                        energy: compute_defect(&problem, &u, crate::defect::DEFAULT_REL_TOL)?.energy,
                        perturbed: perturbed_energy(&problem, &u, eps)?,
                        discrepancy: defect_proportionality_check(&problem, &u, eps)?,
                        entropy_residual: entropy_residual(&u, &pair, &bump),
                        newton_iterations: newton.iterations,
                    },
                    u,
                ))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut csv = CsvWriter::create(
        &dir.join("entropy_sweep.csv"),
        &["epsilon", "E", "perturbed_E", "proportionality_discrepancy"],
    )?;
    let mut report = CheckReport::default();
    for (k, result) in results.into_iter().enumerate() {
        let (row, field) = result?;
        csv.floats(&[row.epsilon, row.energy, row.perturbed, row.discrepancy])?;
        let sub = dir.join(format!("eps_{k:02}"));
        std::fs::create_dir_all(&sub)?;
        write_field(&sub.join("field.csv"), &field, "u")?;
        report.push(
            format!("v = ±εu discrepancy at ε = {}", row.epsilon),
            row.discrepancy,
            format!("<= {}", e.proportionality_tol),
            row.discrepancy <= e.proportionality_tol,
        );
        rows.push(row);
    }
    csv.finish()?;
    Ok((rows, report))
}

/// `E(Π_h u_exact)` over the configured square meshes.
pub fn mesh_sweep(config: &RunConfig) -> Result<(Vec<(usize, f64)>, CheckReport), CliError> {
    let dir = output_dir(config)?;
    let rp = riemann_problem(config).ok_or_else(|| {
        ConfigError::Invalid("mesh-sweep needs Riemann data with a convex flux".into())
    })?;
    let pool = thread_pool()?;
    let sizes = config.checks.sweep_sizes.clone();
    let energies: Vec<Result<f64, CliError>> = pool.install(|| {
        sizes
            .par_iter()
            .map(|&n| {
                let mesh = config.mesh_with(n, n)?;
                let problem = config.problem_on(mesh)?;
                let u = interpolate_function(&mesh, |t, x| exact_riemann(&rp, t, x))?;
                Ok(compute_defect(&problem, &u, crate::defect::DEFAULT_REL_TOL)?.energy)
            })
            .collect()
    });
    let mut csv = CsvWriter::create(&dir.join("mesh_sweep.csv"), &["n", "E"])?;
    let mut rows = Vec::new();
    for (&n, e) in sizes.iter().zip(energies) {
        let e = e?;
        csv.row(&[n.to_string(), num(e)])?;
        rows.push((n, e));
    }
    csv.finish()?;
    let mut report = CheckReport::default();
    for w in rows.windows(2) {
        report.push(
            format!("E on {0}x{0} below E on {1}x{1}", w[1].0, w[0].0),
            w[1].1,
            format!("< {}", num(w[0].1)),
            w[1].1 < w[0].1,
        );
    }
    Ok((rows, report))
}

/// Young-measure diagnostics of a descent run.
pub fn ym_report(config: &RunConfig) -> Result<Summary, CliError> {
    let dir = output_dir(config)?;
    let (problem, outcome) = run_descent(config)?;
    let y = &config.ym;
    let fields = outcome.iterate_fields();
    let window = tail_window(&fields, y.tail_fraction);
    let measure = empirical_measure(window, y.coarsening, (y.z_min, y.z_max), y.bins)?;
    let moments = measure_moments(&measure, problem.flux());
    let averaged = averaged_defect_energy(&problem, &moments)?;
    let class = classify_run(&outcome.history, &fields, &y.classifier())?;

    write_history(&dir.join("history.csv"), &outcome.history)?;
    let mut csv = CsvWriter::create(&dir.join("measure.csv"), &["cell_t", "cell_x", "bin_center", "weight"])?;
    for cell in 0..measure.num_cells() {
        let (t, x) = measure.cell_center(cell);
        for (b, &w) in measure.cell_weights(cell).iter().enumerate() {
            if w > 0.0 {
                csv.floats(&[t, x, measure.bin_center(b), w])?;
            }
        }
    }
    csv.finish()?;
    let mesh = *problem.mesh();
    let mut csv = CsvWriter::create(&dir.join("moments.csv"), &["t", "x", "u_bar", "f_bar"])?;
    for i in 0..=mesh.nt() {
        for j in 0..=mesh.nx() {
            let (t, x) = mesh.node(i, j);
            csv.floats(&[t, x, moments.u_bar.at(i, j), moments.f_bar.at(i, j)])?;
        }
    }
    csv.finish()?;

    let concentrated = (0..measure.num_cells())
        .filter(|&c| measure.peak_weight(c) >= 0.9)
        .count() as f64
        / measure.num_cells() as f64;
    let mut summary = Summary::default();
    summary
        .put("label", class.label.as_str())
        .put("iterations", outcome.history.iterations())
        .put("window_iterates", window.len())
        .put("clamped_samples", measure.clamped)
        .put_num("final_energy", class.final_energy)
        .put_num("averaged_energy", averaged)
        .put_num("energy_tol", class.energy_tol)
        .put_num("energy_trend", class.energy_trend)
        .put_num("gradient_trend", class.gradient_trend)
        .put_num("cauchy_trend", class.cauchy_trend)
        .put_num("final_increment", class.final_increment)
        .put_num("increment_tol", class.increment_tol)
        .put_num("concentrated_cell_fraction", concentrated);
    summary.write(&dir.join("ym_summary.txt"))?;
    Ok(summary)
}

pub(crate) fn print_report(report: &CheckReport) -> Result<(), CliError> {
    print!("{report}");
    match report.failures() {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}
