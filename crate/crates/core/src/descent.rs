//! Steepest descent on the error functional.
//!
//! Each step takes the direction `U = v_t + f'(u) v_x` (the negative gradient
//! in the lumped-mass inner product), solves for the linearized defect `V`
//! and moves by the Gauss–Newton step `ε = −(v, V)_{H¹} / (V, V)_{H¹}`,
//! halving it when the energy would not decrease.

use serde::{Deserialize, Serialize};

use crate::defect::{
    add_domain_load, compute_defect, DefectSolution, ProblemData, DEFAULT_REL_TOL,
};
use crate::error::{Error, Result};
use crate::mesh_fem::{field_derivatives, integrate_h1_pairing, lumped_inner, NodalField};

/// Denominators `(V, V)_{H¹}` at or below this are treated as zero.
pub const STEP_DENOMINATOR_FLOOR: f64 = 1e-28;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Backtracking {
    pub enabled: bool,
    pub shrink: f64,
    pub max_halvings: usize,
}

impl Default for Backtracking {
    fn default() -> Self {
        Self {
            enabled: true,
            shrink: 0.5,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub max_iters: usize,
    /// Stop once `E ≤ energy_tol`.
    pub energy_tol: f64,
    /// Stop once `‖E'‖_{L²} ≤ grad_tol`.
    pub grad_tol: f64,
    pub backtracking: Backtracking,
    /// Keep every `record_every`-th iterate for later diagnostics.
    pub record_every: usize,
    /// Upper bound on stored iterates; the oldest are dropped first.
    pub max_stored: usize,
    /// Relative tolerance of the inner linear solves.
    pub rel_tol: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            energy_tol: 1e-14,
            grad_tol: 1e-10,
            backtracking: Backtracking::default(),
            record_every: 10,
            max_stored: 200,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.energy_tol > 0.0) || !(self.grad_tol > 0.0) {
            return bad(format!(
                "tolerances must be positive (energy_tol = {}, grad_tol = {})",
                self.energy_tol, self.grad_tol
            ));
        }
        if !(self.backtracking.shrink > 0.0 && self.backtracking.shrink < 1.0) {
            return bad(format!("shrink must lie in (0, 1), got {}", self.backtracking.shrink));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    ConvergedEnergy,
    ConvergedGradient,
    MaxIters,
    Stalled,
}

impl DescentStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DescentStatus::ConvergedEnergy => "converged_energy",
            DescentStatus::ConvergedGradient => "converged_gradient",
            DescentStatus::MaxIters => "max_iters",
            DescentStatus::Stalled => "stalled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    /// Step accepted to reach this iterate (0 for the initial guess).
    pub step_size: f64,
    pub halvings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentHistory {
    pub records: Vec<IterationRecord>,
    pub status: DescentStatus,
}

impl DescentHistory {
    pub fn final_energy(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.energy)
    }

    pub fn initial_energy(&self) -> f64 {
        self.records.first().map_or(f64::NAN, |r| r.energy)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.index)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredIterate {
    pub index: usize,
    pub field: NodalField,
}

#[derive(Clone, Debug)]
pub struct DescentOutcome {
    pub field: NodalField,
    pub defect: DefectSolution,
    pub history: DescentHistory,
    pub iterates: Vec<StoredIterate>,
}

impl DescentOutcome {
    pub fn iterate_fields(&self) -> Vec<NodalField> {
        self.iterates.iter().map(|s| s.field.clone()).collect()
    }
}

/// Linearized defect `V` of `u` in the direction `U`:
/// `∫ (V_t w_t + V_x w_x) = −∫ (U w_t + f'(u) U w_x)`, `V(T, ·) = 0`.
pub fn linearized_defect(
    problem: &ProblemData,
    u: &NodalField,
    direction: &NodalField,
) -> Result<NodalField> {
    linearized_defect_with(problem, u, direction, DEFAULT_REL_TOL)
}

pub fn linearized_defect_with(
    problem: &ProblemData,
    u: &NodalField,
    direction: &NodalField,
    rel_tol: f64,
) -> Result<NodalField> {
    u.ensure_same_mesh(direction)?;
    if u.mesh() != problem.mesh() {
        return Err(Error::MeshMismatch);
    }
    let u_q = u.values_at_quadrature();
    let dir_q = direction.values_at_quadrature();
    let flux_q: Vec<f64> = u_q
        .iter()
        .zip(&dir_q)
        .map(|(&z, d)| problem.flux().f_prime(z) * d)
        .collect();
    let mut rhs = vec![0.0; problem.mesh().num_nodes()];
    add_domain_load(problem.mesh(), &dir_q, &flux_q, &mut rhs);
    for &c in &problem.system().constrained {
        rhs[c] = 0.0;
    }
    NodalField::new(*problem.mesh(), problem.solve(&rhs, rel_tol)?)
}

/// Gauss–Newton step `−(v, V)_{H¹} / (V, V)_{H¹}`.
pub fn exact_step(v: &NodalField, linearized: &NodalField) -> Result<f64> {
    let num = integrate_h1_pairing(v, linearized)?;
    let den = integrate_h1_pairing(linearized, linearized)?;
    step_from_pairings(num, den)
}

pub(crate) fn step_from_pairings(num: f64, den: f64) -> Result<f64> {
    if den <= STEP_DENOMINATOR_FLOOR {
        return Err(Error::ZeroDenominator(den));
    }
    Ok(-num / den)
}

/// Descent direction `U = −E'(u)` in nodal form.
pub fn descent_direction(defect: &DefectSolution) -> NodalField {
    defect.gradient.scaled(-1.0)
}

/// Runs steepest descent from `u_init`.
pub fn descend(
    problem: &ProblemData,
    u_init: &NodalField,
    config: &DescentConfig,
) -> Result<DescentOutcome> {
    run(problem, u_init, config, None)
}

/// Adds `(ε²/2) |u|²_{H¹}` to the objective and freezes the nodes in `pinned`.
pub(crate) struct Regularization {
    pub epsilon: f64,
    pub pinned: Vec<bool>,
}

struct Evaluation {
    defect: DefectSolution,
    /// Objective value (E, or E_ε when regularized).
    value: f64,
    /// Nodal gradient of the objective in the lumped-mass metric.
    gradient: Vec<f64>,
}

fn evaluate(
    problem: &ProblemData,
    u: &NodalField,
    rel_tol: f64,
    reg: Option<&Regularization>,
) -> Result<Evaluation> {
    let defect = compute_defect(problem, u, rel_tol)?;
    let Some(reg) = reg else {
        return Ok(Evaluation {
            value: defect.energy,
            gradient: defect.gradient.values().to_vec(),
            defect,
        });
    };
    let eps2 = reg.epsilon * reg.epsilon;
    let grad_u = field_derivatives(u);
    let neg_t: Vec<f64> = grad_u.dt.iter().map(|v| -v).collect();
    let neg_x: Vec<f64> = grad_u.dx.iter().map(|v| -v).collect();
    // ∫ ∇u · ∇φ_b for every node b
    let mut stiff_u = vec![0.0; u.values().len()];
    add_domain_load(problem.mesh(), &neg_t, &neg_x, &mut stiff_u);
    let seminorm2 = integrate_h1_pairing(u, u)?;
    let gradient = defect
        .nodal_derivative
        .iter()
        .zip(&stiff_u)
        .zip(problem.lumped_mass())
        .zip(&reg.pinned)
        .map(|(((g, k), m), &pinned)| if pinned { 0.0 } else { (g + eps2 * k) / m })
        .collect();
    Ok(Evaluation {
        value: 0.5 * eps2 * seminorm2 + defect.energy,
        gradient,
        defect,
    })
}

pub(crate) fn run(
    problem: &ProblemData,
    u_init: &NodalField,
    config: &DescentConfig,
    reg: Option<&Regularization>,
) -> Result<DescentOutcome> {
    config.validate()?;
    if u_init.mesh() != problem.mesh() {
        return Err(Error::MeshMismatch);
    }
    let mass = problem.lumped_mass();
    let norm_of = |g: &[f64]| lumped_inner(mass, g, g).max(0.0).sqrt();

    let mut u = u_init.clone();
    let mut eval = evaluate(problem, &u, config.rel_tol, reg)?;
    let mut records = vec![IterationRecord {
        index: 0,
        energy: eval.value,
        gradient_norm: norm_of(&eval.gradient),
        step_size: 0.0,
        halvings: 0,
    }];
    let mut iterates = vec![StoredIterate {
        index: 0,
        field: u.clone(),
    }];
    let mut iteration = 0;

    let status = loop {
        let gradient_norm = norm_of(&eval.gradient);
        if gradient_norm <= config.grad_tol {
            break DescentStatus::ConvergedGradient;
        }
        if eval.value <= config.energy_tol {
            break DescentStatus::ConvergedEnergy;
        }
        if iteration >= config.max_iters {
            break DescentStatus::MaxIters;
        }

        let direction = NodalField::new(
            *problem.mesh(),
            eval.gradient.iter().map(|g| -g).collect(),
        )?;
        let linearized = linearized_defect_with(problem, &u, &direction, config.rel_tol)?;
        let mut num = integrate_h1_pairing(&eval.defect.v, &linearized)?;
        let mut den = integrate_h1_pairing(&linearized, &linearized)?;
        if let Some(reg) = reg {
            let eps2 = reg.epsilon * reg.epsilon;
            num += eps2 * integrate_h1_pairing(&u, &direction)?;
            den += eps2 * integrate_h1_pairing(&direction, &direction)?;
        }
        let mut step = match step_from_pairings(num, den) {
            Ok(step) => step,
            Err(Error::ZeroDenominator(_)) => break DescentStatus::Stalled,
            Err(e) => return Err(e),
        };

        let mut halvings = 0;
        let accepted = loop {
            let candidate = u.add_scaled(step, &direction)?;
            let trial = evaluate(problem, &candidate, config.rel_tol, reg)?;
            if !config.backtracking.enabled || trial.value < eval.value {
                break Some((candidate, trial));
            }
            if halvings >= config.backtracking.max_halvings {
                break None;
            }
            step *= config.backtracking.shrink;
            halvings += 1;
        };
        let Some((candidate, trial)) = accepted else {
            break DescentStatus::Stalled;
        };

        iteration += 1;
        u = candidate;
        eval = trial;
        records.push(IterationRecord {
            index: iteration,
            energy: eval.value,
            gradient_norm: norm_of(&eval.gradient),
            step_size: step,
            halvings,
        });
        if iteration % config.record_every == 0 {
            iterates.push(StoredIterate {
                index: iteration,
                field: u.clone(),
            });
            if iterates.len() > config.max_stored.max(1) {
                iterates.remove(0);
            }
        }
    };

    if iterates.last().map(|s| s.index) != Some(iteration) {
        iterates.push(StoredIterate {
            index: iteration,
            field: u.clone(),
        });
        if iterates.len() > config.max_stored.max(1) {
            iterates.remove(0);
        }
    }

    Ok(DescentOutcome {
        field: u,
        defect: eval.defect,
        history: DescentHistory { records, status },
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxModel;
    use crate::mesh_fem::build_mesh;

    #[test]
    fn step_formula_arithmetic() {
        assert_eq!(step_from_pairings(2.0, 4.0).unwrap(), -0.5);
        assert!(matches!(
            step_from_pairings(1.0, 1e-30),
            Err(Error::ZeroDenominator(_))
        ));
        let mesh = build_mesh(4, 4, 1.0, -1.0, 1.0).unwrap();
        let v = crate::mesh_fem::interpolate_function(&mesh, |t, x| (1.0 - t) * x).unwrap();
        assert!((exact_step(&v, &v).unwrap() + 1.0).abs() < 1e-15);
        let zero = NodalField::zeros(mesh);
        assert!(matches!(exact_step(&v, &zero), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn zero_direction_gives_zero_linearized_defect() {
        let mesh = build_mesh(6, 6, 1.0, -1.0, 1.0).unwrap();
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), -1.0, 1.0).unwrap();
        let u = NodalField::constant(mesh, 0.4);
        let big_v = linearized_defect(&problem, &u, &NodalField::zeros(mesh)).unwrap();
        assert!(big_v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_solution_stops_immediately() {
        let mesh = build_mesh(8, 8, 1.0, -1.0, 1.0).unwrap();
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), 0.3, 0.3).unwrap();
        let out = descend(&problem, &NodalField::constant(mesh, 0.3), &DescentConfig::default())
            .unwrap();
        assert_eq!(out.history.status, DescentStatus::ConvergedGradient);
        assert_eq!(out.history.records.len(), 1);
        assert!(out.history.final_energy() <= 1e-20);
    }

    #[test]
    fn config_validation() {
        let mut c = DescentConfig::default();
        assert!(c.validate().is_ok());
        c.backtracking.shrink = 1.0;
        assert!(c.validate().is_err());
        let c = DescentConfig {
            energy_tol: 0.0,
            ..DescentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = DescentConfig {
            record_every: 0,
            ..DescentConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn energies_decrease_with_backtracking() {
        let mesh = build_mesh(12, 12, 1.0, -1.0, 1.0).unwrap();
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), 1.0, -1.0).unwrap();
        let config = DescentConfig {
            max_iters: 25,
            ..DescentConfig::default()
        };
        let out = descend(&problem, &NodalField::zeros(mesh), &config).unwrap();
        for pair in out.history.records.windows(2) {
            assert!(pair[1].energy < pair[0].energy);
            assert!(pair[1].step_size > 0.0);
        }
        let indices: Vec<usize> = out.iterates.iter().map(|s| s.index).collect();
        assert_eq!(indices, vec![0, 10, 20, 25]);
    }
}
