//! Vanishing-viscosity selection: the perturbed energy
//! `E_ε(u) = (ε²/2)|u|²_{H¹} + E(u)`, the viscous equation
//! `−ε Δu + u_t + f(u)_x = 0` whose solutions minimize it, the identity
//! `v = ±ε u` between defect and minimizer, and entropy-pair residuals.

use std::sync::Arc;

use crate::defect::{compute_defect, ProblemData, ScalarFn, DEFAULT_REL_TOL};
use crate::descent::{run, DescentConfig, DescentOutcome, Regularization};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::mesh_fem::{
    field_derivatives, h1_seminorm, integrate_h1_pairing, quadrature_points, quadrature_weights,
    BandedLu, CsrMatrix, NodalField, ReferenceElement, QUAD_POINTS,
};

/// Convex entropy `φ` with entropy flux `ψ`, `ψ' = φ' f'`.
#[derive(Clone)]
pub struct EntropyPair {
    pub phi: ScalarFn,
    pub phi_prime: ScalarFn,
    pub psi: ScalarFn,
    pub psi_prime: ScalarFn,
}

impl std::fmt::Debug for EntropyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EntropyPair").finish_non_exhaustive()
    }
}

impl EntropyPair {
    /// `φ(u) = u²/2` and the matching flux `ψ(u) = ∫ z f'(z) dz`.
    pub fn quadratic(flux: &FluxModel) -> Self {
        let (a, b) = (flux.clone(), flux.clone());
        Self {
            phi: Arc::new(|u| 0.5 * u * u),
            phi_prime: Arc::new(|u| u),
            psi: Arc::new(move |u| a.quadratic_entropy_flux(u)),
            psi_prime: Arc::new(move |u| u * b.f_prime(u)),
        }
    }

    /// Checks convexity of `φ` (second differences ≥ −1e-10) and
    /// `|ψ' − φ' f'| ≤ 1e-10` on `samples` points of `[lo, hi]`.
    pub fn check(&self, flux: &FluxModel, lo: f64, hi: f64, samples: usize) -> Result<()> {
        let n = samples.max(3);
        let h = (hi - lo) / (n - 1) as f64;
        let z: Vec<f64> = (0..n).map(|k| lo + k as f64 * h).collect();
        for w in z.windows(3) {
            let second = (self.phi)(w[0]) - 2.0 * (self.phi)(w[1]) + (self.phi)(w[2]);
            if second < -1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "entropy is not convex near u = {}",
                    w[1]
                )));
            }
        }
        for &u in &z {
            let gap = ((self.psi_prime)(u) - (self.phi_prime)(u) * flux.f_prime(u)).abs();
            if gap > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "entropy flux incompatible at u = {u} (gap {gap:e})"
                )));
            }
        }
        Ok(())
    }
}

/// `(ε²/2) |u|²_{H¹} + E(u)`.
pub fn perturbed_energy(problem: &ProblemData, u: &NodalField, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let energy = compute_defect(problem, u, DEFAULT_REL_TOL)?.energy;
    Ok(0.5 * epsilon * epsilon * integrate_h1_pairing(u, u)? + energy)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Maximum number of step halvings per iteration.
    pub max_damping: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            max_damping: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub solution: NodalField,
    pub iterations: usize,
    /// Euclidean norm of the free-node residual, one entry per iterate.
    pub residuals: Vec<f64>,
}

/// Nodes carrying Dirichlet data: `t = 0` and both lateral sides.
fn dirichlet_nodes(problem: &ProblemData) -> Vec<bool> {
    let mesh = problem.mesh();
    (0..mesh.num_nodes())
        .map(|n| {
            let (i, j) = mesh.node_position(n);
            i == 0 || j == 0 || j == mesh.nx()
        })
        .collect()
}

fn dirichlet_value(problem: &ProblemData, node: usize) -> f64 {
    let mesh = problem.mesh();
    let (i, j) = mesh.node_position(node);
    let (t, x) = mesh.node(i, j);
    if i == 0 {
        problem.u0(x)
    } else if j == 0 {
        problem.u_left(t)
    } else {
        problem.u_right(t)
    }
}

/// Residual `∫ ε ∇u·∇φ_a + (u_t + f'(u) u_x) φ_a` on free nodes (zero on
/// Dirichlet nodes), and optionally its Jacobian.
fn viscous_residual(
    problem: &ProblemData,
    u: &NodalField,
    epsilon: f64,
    fixed: &[bool],
    jacobian: Option<&mut CsrMatrix>,
) -> Vec<f64> {
    let mesh = problem.mesh();
    let flux = problem.flux();
    let reference = ReferenceElement::new();
    let (dt, dx) = (mesh.dt(), mesh.dx());
    let area = mesh.element_area();
    let u_q = u.values_at_quadrature();
    let grad = field_derivatives(u);
    let mut res = vec![0.0; mesh.num_nodes()];
    let mut jac = jacobian;
    for (e, (ei, ej)) in mesh.elements().enumerate() {
        let nodes = mesh.element_nodes(ei, ej);
        for q in 0..QUAD_POINTS {
            let k = e * QUAD_POINTS + q;
            let w = reference.rule.weights[q] * area;
            let (z, ut, ux) = (u_q[k], grad.dt[k], grad.dx[k]);
            let (fp, fpp) = (flux.f_prime(z), flux.f_second(z));
            let phi = &reference.phi[q];
            let pt: [f64; 4] = std::array::from_fn(|l| reference.dphi_ds[q][l] / dt);
            let px: [f64; 4] = std::array::from_fn(|l| reference.dphi_dr[q][l] / dx);
            for a in 0..4 {
                if fixed[nodes[a]] {
                    continue;
                }
                res[nodes[a]] +=
                    w * (epsilon * (ut * pt[a] + ux * px[a]) + (ut + fp * ux) * phi[a]);
                if let Some(m) = jac.as_deref_mut() {
                    for b in 0..4 {
                        let value = epsilon * (pt[b] * pt[a] + px[b] * px[a])
                            + (pt[b] + fpp * phi[b] * ux + fp * px[b]) * phi[a];
                        m.add(nodes[a], nodes[b], w * value);
                    }
                }
            }
        }
    }
    if let Some(m) = jac {
        for (n, _) in fixed.iter().enumerate().filter(|(_, &f)| f) {
            m.add(n, n, 1.0);
        }
    }
    res
}

/// Newton solve of the viscous equation with `u₀` on `t = 0`, `u_L`, `u_R`
/// on the sides (the `t = 0` value wins at the corners) and a natural
/// condition at `t = T`. Stops once the residual norm is at most `newton_tol`.
pub fn viscous_newton_solve(problem: &ProblemData, epsilon: f64, newton_tol: f64) -> Result<NodalField> {
    viscous_newton_report(problem, epsilon, newton_tol, &NewtonOptions::default())
        .map(|r| r.solution)
}

pub fn viscous_newton_report(
    problem: &ProblemData,
    epsilon: f64,
    newton_tol: f64,
    options: &NewtonOptions,
) -> Result<NewtonReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(newton_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("newton_tol must be > 0, got {newton_tol}")));
    }
    let mesh = *problem.mesh();
    let fixed = dirichlet_nodes(problem);
    // initial guess: u₀(x) carried through time, Dirichlet values in place
    let mut values: Vec<f64> = (0..mesh.num_nodes())
        .map(|n| {
            if fixed[n] {
                dirichlet_value(problem, n)
            } else {
                let (_, x) = mesh.node_coords(n);
                problem.u0(x)
            }
        })
        .collect();
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u = NodalField::new(mesh, values.clone())?;
    let mut residual = viscous_residual(problem, &u, epsilon, &fixed, None);
    let mut r_norm = norm(&residual);
    let mut residuals = vec![r_norm];
    let mut iterations = 0;
    while r_norm > newton_tol {
        if iterations >= options.max_iters {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: r_norm,
            });
        }
        let mut jac = CsrMatrix::with_mesh_pattern(&mesh);
        viscous_residual(problem, &u, epsilon, &fixed, Some(&mut jac));
        let lu = BandedLu::factor_csr(&jac)?;
        let delta = lu.solve(&residual);
        let mut scale = 1.0;
        let mut damping = 0;
        loop {
            let trial: Vec<f64> = values.iter().zip(&delta).map(|(x, d)| x - scale * d).collect();
            if let Ok(field) = NodalField::new(mesh, trial.clone()) {
                let r = viscous_residual(problem, &field, epsilon, &fixed, None);
                let n = norm(&r);
                if n.is_finite() && (n < r_norm || damping >= options.max_damping) {
                    values = trial;
                    u = field;
                    residual = r;
                    r_norm = n;
                    break;
                }
            }
            damping += 1;
            if damping > options.max_damping {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: r_norm,
                });
            }
            scale *= 0.5;
        }
        iterations += 1;
        residuals.push(r_norm);
    }
    Ok(NewtonReport {
        solution: u,
        iterations,
        residuals,
    })
}

/// `min_± ‖v ∓ ε u‖_{H¹} / (ε ‖u‖_{H¹})` with `v` the defect of `u_eps`
/// (seminorms; `0/0` counts as 0, up to round-off).
pub fn defect_proportionality_check(
    problem: &ProblemData,
    u_eps: &NodalField,
    epsilon: f64,
) -> Result<f64> {
    let v = compute_defect(problem, u_eps, DEFAULT_REL_TOL)?.v;
    proportionality_with(&v, u_eps, epsilon)
}

pub(crate) fn proportionality_with(v: &NodalField, u: &NodalField, epsilon: f64) -> Result<f64> {
    // seminorms below this are round-off of a constant field
    let tiny = 1e-12 * (1.0 + u.max_abs()) * epsilon;
    let scale = epsilon * h1_seminorm(u);
    let best = [1.0, -1.0]
        .iter()
        .map(|sign| h1_seminorm(&v.add_scaled(-sign * epsilon, u).expect("same mesh")))
        .fold(f64::INFINITY, f64::min);
    if scale <= tiny {
        return if best <= tiny {
            Ok(0.0)
        } else {
            Err(Error::Degenerate(format!(
                "|u|_H1 = 0 while the defect is not (|v|_H1 = {best:e})"
            )))
        };
    }
    Ok(best / scale)
}

/// Nonnegative test function `w(t, x) = b((t − t_c)/r_t) b((x − x_c)/r_x)`
/// with `b(s) = exp(−1/(1 − s²))` on `|s| < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: (f64, f64),
    pub radius: (f64, f64),
}

fn bump_1d(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - s * s;
    let b = (-1.0 / d).exp();
    (b, -2.0 * s / (d * d) * b)
}

impl Bump {
    pub fn new(center: (f64, f64), radius: (f64, f64)) -> Result<Self> {
        if !(radius.0 > 0.0 && radius.1 > 0.0) {
            return Err(Error::InvalidArgument("bump radii must be positive".into()));
        }
        Ok(Self { center, radius })
    }

    /// `(w, w_t, w_x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (bt, dbt) = bump_1d((t - self.center.0) / self.radius.0);
        let (bx, dbx) = bump_1d((x - self.center.1) / self.radius.1);
        (bt * bx, dbt / self.radius.0 * bx, bt * dbx / self.radius.1)
    }
}

/// `−∫ (φ(u) w_t + ψ(u) w_x)`, the weak form of `∫ w (φ(u)_t + ψ(u)_x)`.
/// Each element is integrated with a `refine × refine` product Gauss rule.
pub fn entropy_residual(u: &NodalField, pair: &EntropyPair, test: &Bump) -> f64 {
    entropy_residual_refined(u, pair, test, 4)
}

pub fn entropy_residual_refined(u: &NodalField, pair: &EntropyPair, test: &Bump, refine: usize) -> f64 {
    if refine <= 1 {
        let u_q = u.values_at_quadrature();
        return -quadrature_points(u.mesh())
            .iter()
            .zip(quadrature_weights(u.mesh()))
            .zip(u_q)
            .map(|((&(t, x), w), z)| {
                let (_, wt, wx) = test.eval(t, x);
                w * ((pair.phi)(z) * wt + (pair.psi)(z) * wx)
            })
            .sum::<f64>();
    }
    let mesh = u.mesh();
    let line = crate::mesh_fem::gauss_line_2();
    let mut sub = Vec::new();
    for a in 0..refine {
        for &(s, ws) in &line {
            sub.push(((a as f64 + s) / refine as f64, ws / refine as f64));
        }
    }
    let area = mesh.element_area();
    let mut total = 0.0;
    for (ei, ej) in mesh.elements() {
        let nodes = mesh.element_nodes(ei, ej);
        let local = crate::mesh_fem::gather(u.values(), &nodes);
        let (t0, x0) = mesh.node(ei, ej);
        for &(s, ws) in &sub {
            for &(r, wr) in &sub {
                let (t, x) = (t0 + s * mesh.dt(), x0 + r * mesh.dx());
                let (_, wt, wx) = test.eval(t, x);
                if wt == 0.0 && wx == 0.0 {
                    continue;
                }
                let z = crate::mesh_fem::dot4(&crate::mesh_fem::bilinear(s, r), &local);
                total += ws * wr * area * ((pair.phi)(z) * wt + (pair.psi)(z) * wx);
            }
        }
    }
    -total
}

/// Steepest descent on `E_ε` with the Dirichlet nodes of the viscous problem
/// held at their data. Cross-check for [`viscous_newton_solve`].
pub fn descend_perturbed(
    problem: &ProblemData,
    u_init: &NodalField,
    epsilon: f64,
    config: &DescentConfig,
) -> Result<DescentOutcome> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let pinned = dirichlet_nodes(problem);
    let values = u_init
        .values()
        .iter()
        .enumerate()
        .map(|(n, &z)| if pinned[n] { dirichlet_value(problem, n) } else { z })
        .collect();
    let start = NodalField::new(*problem.mesh(), values)?;
    run(problem, &start, config, Some(&Regularization { epsilon, pinned }))
}
