//! The defect `v` of a candidate field `u`, the error `E(u) = ½∫|∇v|²` and
//! its exact discrete gradient.
//!
//! For `u` on the mesh, `v` vanishes at `t = T` and satisfies, for every test
//! function `w` vanishing at `t = T`,
//!
//! ```text
//! ∫ (v_t w_t + v_x w_x) = −∫ (u w_t + f(u) w_x) − ∫_{t=0} u₀ w
//!                         + ∫_{x=x_max} f(u_R) w − ∫_{x=x_min} f(u_L) w
//! ```
//!
//! Every weak solution with the prescribed data has `v = 0`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::mesh_fem::{
    apply_final_time_constraint, assemble_stiffness, conjugate_gradient, field_derivatives,
    gauss_line_2, integrate_h1_pairing, lumped_inner, lumped_mass, quadrature_weights, BandedLu,
    CgOptions, NodalField, QuadValues, ReferenceElement, SpaceTimeMesh, SparseSpdSystem,
    QUAD_POINTS,
};

/// Data function of one variable (`u₀(x)`, `u_L(t)` or `u_R(t)`).
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Linear solver used for the defect and linearized-defect problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearBackend {
    /// Conjugate gradients at the tolerance passed to each call.
    ConjugateGradient { jacobi: bool },
    /// Banded LU of the (constant) constrained stiffness matrix, factored once
    /// per problem.
    BandedDirect,
}

impl Default for LinearBackend {
    fn default() -> Self {
        LinearBackend::ConjugateGradient { jacobi: false }
    }
}

/// Default relative tolerance of every defect solve.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Everything that is fixed for a given conservation-law problem: mesh, flux,
/// initial and boundary data, plus the assembled (constrained) stiffness.
#[derive(Clone)]
pub struct ProblemData {
    flux: FluxModel,
    mesh: SpaceTimeMesh,
    u0: ScalarFn,
    u_left: ScalarFn,
    u_right: ScalarFn,
    riemann: Option<(f64, f64)>,
    backend: LinearBackend,
    operator: Arc<DefectOperator>,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("flux", &self.flux)
            .field("mesh", &self.mesh)
            .field("riemann", &self.riemann)
            .field("backend", &self.backend)
            .finish_non_exhaustive()
    }
}

struct DefectOperator {
    system: SparseSpdSystem,
    mass: Vec<f64>,
    data_load: Vec<f64>,
    direct: OnceLock<std::result::Result<BandedLu, String>>,
}

impl ProblemData {
    pub fn new(
        mesh: SpaceTimeMesh,
        flux: FluxModel,
        u0: ScalarFn,
        u_left: ScalarFn,
        u_right: ScalarFn,
    ) -> Result<Self> {
        let data_load = assemble_data_load(&mesh, &flux, &*u0, &*u_left, &*u_right)?;
        let system = apply_final_time_constraint(assemble_stiffness(&mesh), &mesh);
        let operator = DefectOperator {
            mass: lumped_mass(&mesh),
            system,
            data_load,
            direct: OnceLock::new(),
        };
        Ok(Self {
            flux,
            mesh,
            u0,
            u_left,
            u_right,
            riemann: None,
            backend: LinearBackend::default(),
            operator: Arc::new(operator),
        })
    }

    /// Constant states `u_left` / `u_right` on either side of `x = 0`, also
    /// used as boundary values. The initial value at `x = 0` is their mean.
    pub fn riemann(mesh: SpaceTimeMesh, flux: FluxModel, u_left: f64, u_right: f64) -> Result<Self> {
        let u0: ScalarFn = Arc::new(move |x: f64| {
            if x < 0.0 {
                u_left
            } else if x > 0.0 {
                u_right
            } else {
                0.5 * (u_left + u_right)
            }
        });
        let mut problem = Self::new(
            mesh,
            flux,
            u0,
            Arc::new(move |_| u_left),
            Arc::new(move |_| u_right),
        )?;
        problem.riemann = Some((u_left, u_right));
        Ok(problem)
    }

    /// Same problem, different linear solver.
    pub fn with_backend(mut self, backend: LinearBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn flux(&self) -> &FluxModel {
        &self.flux
    }

    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn backend(&self) -> LinearBackend {
        self.backend
    }

    /// `(u_L, u_R)` when the problem was built with [`ProblemData::riemann`].
    pub fn riemann_states(&self) -> Option<(f64, f64)> {
        self.riemann
    }

    pub fn u0(&self, x: f64) -> f64 {
        (self.u0)(x)
    }

    pub fn u_left(&self, t: f64) -> f64 {
        (self.u_left)(t)
    }

    pub fn u_right(&self, t: f64) -> f64 {
        (self.u_right)(t)
    }

    /// Constrained stiffness system (zero right-hand side).
    pub fn system(&self) -> &SparseSpdSystem {
        &self.operator.system
    }

    /// Lumped nodal masses `∫ φ_b`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.operator.mass
    }

    /// Load contributed by the initial and boundary data alone.
    pub fn data_load(&self) -> &[f64] {
        &self.operator.data_load
    }

    /// Solves `A x = rhs` on the free nodes; constrained entries are zero.
    pub fn solve(&self, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        let system = &self.operator.system;
        let mut x = match self.backend {
            LinearBackend::ConjugateGradient { jacobi } => {
                if !(rel_tol > 0.0 && rel_tol < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "relative tolerance must lie in (0, 1), got {rel_tol}"
                    )));
                }
                let options = CgOptions {
                    rel_tol,
                    max_iters: None,
                    jacobi,
                };
                let max_iters = 10 * system.free_count().max(1);
                conjugate_gradient(&system.matrix, rhs, None, max_iters, &options)?.x
            }
            LinearBackend::BandedDirect => {
                let lu = self
                    .operator
                    .direct
                    .get_or_init(|| BandedLu::factor_csr(&system.matrix).map_err(|e| e.to_string()));
                match lu {
                    Ok(lu) => lu.solve(rhs),
                    Err(msg) => return Err(Error::Degenerate(msg.clone())),
                }
            }
        };
        for &c in &system.constrained {
            x[c] = 0.0;
        }
        Ok(x)
    }

    fn check_field(&self, u: &NodalField) -> Result<()> {
        if *u.mesh() == self.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// `−∫_{t=0} u₀ w + ∫_{x=x_max} f(u_R) w − ∫_{x=x_min} f(u_L) w` for every basis
/// function, two Gauss points per boundary segment.
fn assemble_data_load(
    mesh: &SpaceTimeMesh,
    flux: &FluxModel,
    u0: &dyn Fn(f64) -> f64,
    u_left: &dyn Fn(f64) -> f64,
    u_right: &dyn Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut load = vec![0.0; mesh.num_nodes()];
    let line = gauss_line_2();
    let (dt, dx) = (mesh.dt(), mesh.dx());
    let finite = |value: f64, node: usize| {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite { node, value })
        }
    };
    for j in 0..mesh.nx() {
        let (a, b) = (mesh.node_index(0, j), mesh.node_index(0, j + 1));
        for &(r, w) in &line {
            let val = finite(u0(mesh.x_at(j) + r * dx), a)? * w * dx;
            load[a] -= val * (1.0 - r);
            load[b] -= val * r;
        }
    }
    for i in 0..mesh.nt() {
        let t0 = mesh.t_at(i);
        let (ra, rb) = (mesh.node_index(i, mesh.nx()), mesh.node_index(i + 1, mesh.nx()));
        let (la, lb) = (mesh.node_index(i, 0), mesh.node_index(i + 1, 0));
        for &(s, w) in &line {
            let t = t0 + s * dt;
            let right = flux.f(finite(u_right(t), ra)?) * w * dt;
            let left = flux.f(finite(u_left(t), la)?) * w * dt;
            load[ra] += right * (1.0 - s);
            load[rb] += right * s;
            load[la] -= left * (1.0 - s);
            load[lb] -= left * s;
        }
    }
    Ok(load)
}

/// Load vector from state and flux values given at the quadrature points:
/// `−∫ (u w_t + F w_x)` plus the data terms, zeroed on constrained nodes.
pub(crate) fn load_from_quadrature(
    problem: &ProblemData,
    state_q: &[f64],
    flux_q: &[f64],
) -> Vec<f64> {
    let mut rhs = problem.data_load().to_vec();
    add_domain_load(problem.mesh(), state_q, flux_q, &mut rhs);
    for &c in &problem.system().constrained {
        rhs[c] = 0.0;
    }
    rhs
}

/// Adds `−∫ (a w_t + b w_x)` for quadrature values `a`, `b`.
pub(crate) fn add_domain_load(mesh: &SpaceTimeMesh, a_q: &[f64], b_q: &[f64], rhs: &mut [f64]) {
    let reference = ReferenceElement::new();
    let (dt, dx) = (mesh.dt(), mesh.dx());
    let area = mesh.element_area();
    for (e, (ei, ej)) in mesh.elements().enumerate() {
        let nodes = mesh.element_nodes(ei, ej);
        for q in 0..QUAD_POINTS {
            let k = e * QUAD_POINTS + q;
            let w = reference.rule.weights[q] * area;
            let (a, b) = (a_q[k] * w / dt, b_q[k] * w / dx);
            for (l, &node) in nodes.iter().enumerate() {
                rhs[node] -= a * reference.dphi_ds[q][l] + b * reference.dphi_dr[q][l];
            }
        }
    }
}

/// Right-hand side of the defect problem for the field `u`.
pub fn assemble_defect_rhs(problem: &ProblemData, u: &NodalField) -> Result<Vec<f64>> {
    problem.check_field(u)?;
    let u_q = u.values_at_quadrature();
    let f_q: QuadValues = u_q.iter().map(|&z| problem.flux().f(z)).collect();
    Ok(load_from_quadrature(problem, &u_q, &f_q))
}

/// Defect of a field together with its energy and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectSolution {
    /// The defect, zero at `t = T`.
    pub v: NodalField,
    /// `E(u) = ½ ∫ (v_t² + v_x²)`.
    pub energy: f64,
    /// Lumped-mass representation of `E'(u) = −(v_t + f'(u) v_x)`.
    pub gradient: NodalField,
    /// Exact partial derivatives `∂E/∂u_b` of the discrete energy.
    pub nodal_derivative: Vec<f64>,
}

impl DefectSolution {
    /// `‖E'(u)‖` in the lumped-mass L² inner product.
    pub fn gradient_norm(&self, problem: &ProblemData) -> f64 {
        let g = self.gradient.values();
        lumped_inner(problem.lumped_mass(), g, g).max(0.0).sqrt()
    }
}

/// Solves for the defect of `u` and evaluates `E(u)` and `E'(u)`.
pub fn compute_defect(problem: &ProblemData, u: &NodalField, rel_tol: f64) -> Result<DefectSolution> {
    let rhs = assemble_defect_rhs(problem, u)?;
    let v = NodalField::new(*problem.mesh(), problem.solve(&rhs, rel_tol)?)?;
    defect_solution(problem, u, v)
}

pub(crate) fn defect_solution(
    problem: &ProblemData,
    u: &NodalField,
    v: NodalField,
) -> Result<DefectSolution> {
    let energy = 0.5 * integrate_h1_pairing(&v, &v)?;
    let nodal_derivative = energy_derivative(problem, u, &v);
    let gradient = NodalField::new(
        *problem.mesh(),
        nodal_derivative
            .iter()
            .zip(problem.lumped_mass())
            .map(|(g, m)| g / m)
            .collect(),
    )?;
    Ok(DefectSolution {
        v,
        energy,
        gradient,
        nodal_derivative,
    })
}

/// `−(v_t + f'(u) v_x)` at the quadrature points.
pub(crate) fn transport_of_defect(problem: &ProblemData, u: &NodalField, v: &NodalField) -> QuadValues {
    let u_q = u.values_at_quadrature();
    let grad_v = field_derivatives(v);
    u_q.iter()
        .enumerate()
        .map(|(k, &z)| -(grad_v.dt[k] + problem.flux().f_prime(z) * grad_v.dx[k]))
        .collect()
}

/// `∂E/∂u_b = −∫ φ_b (v_t + f'(u) v_x)` for every node.
fn energy_derivative(problem: &ProblemData, u: &NodalField, v: &NodalField) -> Vec<f64> {
    let mesh = problem.mesh();
    let density = transport_of_defect(problem, u, v);
    let reference = ReferenceElement::new();
    let area = mesh.element_area();
    let mut out = vec![0.0; mesh.num_nodes()];
    for (e, (ei, ej)) in mesh.elements().enumerate() {
        let nodes = mesh.element_nodes(ei, ej);
        for q in 0..QUAD_POINTS {
            let w = reference.rule.weights[q] * area * density[e * QUAD_POINTS + q];
            for (l, &node) in nodes.iter().enumerate() {
                out[node] += w * reference.phi[q][l];
            }
        }
    }
    out
}

/// `⟨E'(u), U⟩ = −∫ U (v_t + f'(u) v_x)`.
pub fn directional_derivative(
    problem: &ProblemData,
    u: &NodalField,
    direction: &NodalField,
) -> Result<f64> {
    problem.check_field(u)?;
    problem.check_field(direction)?;
    let defect = compute_defect(problem, u, DEFAULT_REL_TOL)?;
    Ok(directional_derivative_with(problem, u, &defect.v, direction))
}

/// As [`directional_derivative`] with an already computed defect.
pub fn directional_derivative_with(
    problem: &ProblemData,
    u: &NodalField,
    v: &NodalField,
    direction: &NodalField,
) -> f64 {
    let density = transport_of_defect(problem, u, v);
    let dir_q = direction.values_at_quadrature();
    quadrature_weights(problem.mesh())
        .iter()
        .zip(dir_q.iter().zip(&density))
        .map(|(w, (d, g))| w * d * g)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::build_mesh;

    fn constant_problem(c: f64, n: usize) -> ProblemData {
        let mesh = build_mesh(n, n, 1.0, -1.0, 1.0).unwrap();
        ProblemData::riemann(mesh, FluxModel::burgers(), c, c).unwrap()
    }

    #[test]
    fn constant_solution_has_zero_load_and_defect() {
        for c in [0.0, 0.3, -1.7] {
            let problem = constant_problem(c, 6);
            let u = NodalField::constant(*problem.mesh(), c);
            let rhs = assemble_defect_rhs(&problem, &u).unwrap();
            assert!(rhs.iter().all(|r| r.abs() < 1e-14), "{rhs:?}");
            let d = compute_defect(&problem, &u, 1e-10).unwrap();
            assert!(d.energy <= 1e-20);
            assert!(d.gradient.max_abs() < 1e-12);
            let dir = NodalField::constant(*problem.mesh(), 1.0);
            assert!(directional_derivative(&problem, &u, &dir).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn zero_direction_has_zero_derivative() {
        let mesh = build_mesh(4, 4, 1.0, -1.0, 1.0).unwrap();
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), -1.0, 1.0).unwrap();
        let u = NodalField::constant(mesh, 0.2);
        let dd = directional_derivative(&problem, &u, &NodalField::zeros(mesh)).unwrap();
        assert_eq!(dd, 0.0);
    }

    #[test]
    fn defect_vanishes_at_final_time_and_energy_is_positive() {
        let mesh = build_mesh(8, 8, 1.0, -1.0, 1.0).unwrap();
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), -1.0, 1.0).unwrap();
        let d = compute_defect(&problem, &NodalField::zeros(mesh), 1e-12).unwrap();
        assert!(d.energy > 0.0);
        for node in mesh.final_time_nodes() {
            assert_eq!(d.v.values()[node], 0.0);
        }
        let pairing = integrate_h1_pairing(&d.v, &d.v).unwrap();
        assert!((d.energy - 0.5 * pairing).abs() <= 1e-12 * d.energy);
    }

    #[test]
    fn backends_agree() {
        let mesh = build_mesh(8, 6, 1.0, -1.0, 1.0).unwrap();
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), 1.0, -1.0).unwrap();
        let u = crate::mesh_fem::interpolate_function(&mesh, |t, x| (t - x).sin()).unwrap();
        let cg = compute_defect(&problem, &u, 1e-13).unwrap();
        let direct = compute_defect(&problem.clone().with_backend(LinearBackend::BandedDirect), &u, 1e-13).unwrap();
        assert!((cg.energy - direct.energy).abs() <= 1e-11 * cg.energy);
    }

    #[test]
    fn rejects_field_on_other_mesh() {
        let problem = constant_problem(0.0, 4);
        let other = NodalField::zeros(build_mesh(5, 4, 1.0, -1.0, 1.0).unwrap());
        assert!(matches!(
            compute_defect(&problem, &other, 1e-10),
            Err(Error::MeshMismatch)
        ));
    }
}
