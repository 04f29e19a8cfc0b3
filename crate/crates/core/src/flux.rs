//! Scalar flux functions and the commutation check for system fluxes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The closed-form fluxes understood by the solver.
#[derive(Clone, Debug, PartialEq)]
pub enum FluxKind {
    /// `f(u) = u² / 2`.
    Burgers,
    /// `f(u) = a u`.
    Linear { speed: f64 },
    /// `f(u) = Σ c_k u^k`, constant term first.
    Polynomial { coeffs: Vec<f64> },
}

/// Scalar flux `f` with its exact derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxModel {
    kind: FluxKind,
}

impl FluxModel {
    pub fn burgers() -> Self {
        Self {
            kind: FluxKind::Burgers,
        }
    }

    pub fn linear(speed: f64) -> Result<Self> {
        if !speed.is_finite() {
            return Err(Error::FluxParams(format!("linear speed {speed} is not finite")));
        }
        Ok(Self {
            kind: FluxKind::Linear { speed },
        })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::FluxParams("polynomial needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::FluxParams("polynomial coefficients must be finite".into()));
        }
        Ok(Self {
            kind: FluxKind::Polynomial { coeffs },
        })
    }

    /// Looks up a builtin by name: `burgers` (no parameters), `linear`
    /// (`[a]`) or `polynomial` (coefficients, constant term first).
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        match name {
            "burgers" => {
                if params.is_empty() {
                    Ok(Self::burgers())
                } else {
                    Err(Error::FluxParams("burgers takes no parameters".into()))
                }
            }
            "linear" => match params {
                [a] => Self::linear(*a),
                _ => Err(Error::FluxParams(format!(
                    "linear takes exactly one speed, got {} values",
                    params.len()
                ))),
            },
            "polynomial" => Self::polynomial(params.to_vec()),
            other => Err(Error::UnknownFlux(other.to_string())),
        }
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FluxKind::Burgers => "burgers",
            FluxKind::Linear { .. } => "linear",
            FluxKind::Polynomial { .. } => "polynomial",
        }
    }

    /// Polynomial growth degree `p ≥ 1`.
    pub fn growth_degree(&self) -> usize {
        match &self.kind {
            FluxKind::Burgers => 2,
            FluxKind::Linear { .. } => 1,
            FluxKind::Polynomial { coeffs } => coeffs
                .iter()
                .rposition(|c| *c != 0.0)
                .unwrap_or(0)
                .max(1),
        }
    }

    /// `true` when `f'` is constant.
    pub fn is_linear(&self) -> bool {
        match &self.kind {
            FluxKind::Burgers => false,
            FluxKind::Linear { .. } => true,
            FluxKind::Polynomial { coeffs } => coeffs.iter().skip(2).all(|c| *c == 0.0),
        }
    }

    pub fn f(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 0.5 * u * u,
            FluxKind::Linear { speed } => speed * u,
            FluxKind::Polynomial { coeffs } => horner(coeffs.iter().copied(), u),
        }
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => u,
            FluxKind::Linear { speed } => *speed,
            FluxKind::Polynomial { coeffs } => horner(
                coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c),
                u,
            ),
        }
    }

    pub fn f_second(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => 1.0,
            FluxKind::Linear { .. } => 0.0,
            FluxKind::Polynomial { coeffs } => horner(
                coeffs
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, c)| (k * (k - 1)) as f64 * c),
                u,
            ),
        }
    }

    /// `ψ` with `ψ' = u f'(u)`, `ψ(0) = 0`: the flux paired with the entropy
    /// `u² / 2`.
    pub fn quadratic_entropy_flux(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Burgers => u * u * u / 3.0,
            FluxKind::Linear { speed } => 0.5 * speed * u * u,
            FluxKind::Polynomial { coeffs } => {
                // u f'(u) = Σ k c_k u^k  =>  ψ = Σ k c_k u^{k+1} / (k+1)
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c * u.powi(k as i32 + 1) / (k + 1) as f64)
                    .sum()
            }
        }
    }

    /// `true` when `f'' ≥ 0` at `samples` evenly spaced points of `[lo, hi]`.
    pub fn is_convex_on(&self, lo: f64, hi: f64, samples: usize) -> bool {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let n = samples.max(2);
        (0..n).all(|k| {
            let u = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            self.f_second(u) >= -1e-12
        })
    }
}

/// Evaluates `Σ a_k u^k` with coefficients given lowest order first.
fn horner(coeffs: impl DoubleEndedIterator<Item = f64>, u: f64) -> f64 {
    coeffs.rev().fold(0.0, |acc, c| acc * u + c)
}

/// Flux of an `N`-component system in `n` space dimensions, seen through its
/// Jacobians `Df_(j)(u)`.
pub trait SystemFlux {
    fn state_dim(&self) -> usize;
    fn space_dim(&self) -> usize;
    fn jacobian(&self, direction: usize, state: &[f64]) -> DMatrix<f64>;
}

/// A system whose Jacobians do not depend on the state.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantJacobians {
    jacobians: Vec<DMatrix<f64>>,
}

impl ConstantJacobians {
    pub fn new(jacobians: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = jacobians
            .first()
            .ok_or_else(|| Error::InvalidArgument("need at least one jacobian".into()))?;
        let dim = first.nrows();
        for (index, m) in jacobians.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    dim,
                });
            }
        }
        Ok(Self { jacobians })
    }

    /// From row-major nested vectors.
    pub fn from_rows(matrices: &[Vec<Vec<f64>>]) -> Result<Self> {
        let jacobians = matrices
            .iter()
            .map(|rows| {
                let nrows = rows.len();
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != ncols) {
                    return Err(Error::InvalidArgument("ragged jacobian rows".into()));
                }
                Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(jacobians)
    }

    /// `A₁ = [[0,1],[1,0]]`, `A₂ = [[1,0],[0,-1]]`.
    pub fn anticommuting_pair() -> Self {
        Self {
            jacobians: vec![
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            ],
        }
    }
}

impl SystemFlux for ConstantJacobians {
    fn state_dim(&self) -> usize {
        self.jacobians[0].nrows()
    }

    fn space_dim(&self) -> usize {
        self.jacobians.len()
    }

    fn jacobian(&self, direction: usize, _state: &[f64]) -> DMatrix<f64> {
        self.jacobians[direction].clone()
    }
}

/// A scalar law `u_t + Σ_j c_j f(u)_{x_j} = 0` seen as a 1-component system.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSystem {
    pub flux: FluxModel,
    pub directions: Vec<f64>,
}

impl SystemFlux for ScalarSystem {
    fn state_dim(&self) -> usize {
        1
    }

    fn space_dim(&self) -> usize {
        self.directions.len()
    }

    fn jacobian(&self, direction: usize, state: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.directions[direction] * self.flux.f_prime(state[0]))
    }
}

/// A system given by a closure returning each Jacobian.
pub struct FnSystemFlux<F> {
    state_dim: usize,
    space_dim: usize,
    jacobian: F,
}

impl<F> FnSystemFlux<F>
where
    F: Fn(usize, &[f64]) -> DMatrix<f64>,
{
    pub fn new(state_dim: usize, space_dim: usize, jacobian: F) -> Self {
        Self {
            state_dim,
            space_dim,
            jacobian,
        }
    }
}

impl<F> SystemFlux for FnSystemFlux<F>
where
    F: Fn(usize, &[f64]) -> DMatrix<f64>,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn space_dim(&self) -> usize {
        self.space_dim
    }

    fn jacobian(&self, direction: usize, state: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(direction, state)
    }
}

/// Two-component system with diagonal, state-dependent Jacobians
/// `Df₁ = diag(u₁, 2u₂)`, `Df₂ = diag(u₂², u₁)`.
pub fn diagonal_example() -> FnSystemFlux<impl Fn(usize, &[f64]) -> DMatrix<f64>> {
    FnSystemFlux::new(2, 2, |j, u: &[f64]| match j {
        0 => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![u[0], 2.0 * u[1]])),
        _ => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![u[1] * u[1], u[0]])),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutationReport {
    /// Largest Frobenius norm of `Df_(j) Df_(k) − Df_(k) Df_(j)`.
    pub max_residual: f64,
    pub commutes: bool,
    /// Pair `(j, k)` and sample index where the maximum was attained.
    pub worst: Option<(usize, usize, usize)>,
}

/// Checks pairwise commutation of the flux Jacobians at every sample state.
pub fn check_commutation(
    system: &dyn SystemFlux,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<CommutationReport> {
    let dim = system.state_dim();
    let space = system.space_dim();
    if dim == 0 || space == 0 {
        return Err(Error::InvalidArgument("state and space dimensions must be ≥ 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample state".into()));
    }
    let mut max_residual = 0.0f64;
    let mut worst = None;
    for (s, state) in samples.iter().enumerate() {
        if state.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "sample {s} has {} components, expected {dim}",
                state.len()
            )));
        }
        let jacobians = (0..space)
            .map(|j| {
                let m = system.jacobian(j, state);
                if m.nrows() != dim || m.ncols() != dim {
                    Err(Error::DimensionMismatch {
                        index: j,
                        rows: m.nrows(),
                        cols: m.ncols(),
                        dim,
                    })
                } else {
                    Ok(m)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for j in 0..space {
            for k in j + 1..space {
                let commutator = &jacobians[j] * &jacobians[k] - &jacobians[k] * &jacobians[j];
                let r = commutator.norm();
                if r > max_residual || worst.is_none() {
                    max_residual = max_residual.max(r);
                    worst = Some((j, k, s));
                }
            }
        }
    }
    Ok(CommutationReport {
        max_residual,
        commutes: max_residual <= tol,
        worst,
    })
}

/// Evenly spaced grid of states in the box `[lo, hi]^dim`, `per_axis` points
/// per axis.
pub fn state_grid(dim: usize, lo: f64, hi: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let per_axis = per_axis.max(1);
    let axis: Vec<f64> = (0..per_axis)
        .map(|k| {
            if per_axis == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (per_axis - 1) as f64
            }
        })
        .collect();
    let mut grid = vec![Vec::new()];
    for _ in 0..dim {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    grid
}
