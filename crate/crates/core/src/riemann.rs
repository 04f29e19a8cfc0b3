//! Reference solutions for Riemann problems with convex flux: the exact
//! entropy solution, a first-order Godunov scheme and error metrics.

use crate::error::{Error, Result};
use crate::flux::{FluxKind, FluxModel};
use crate::mesh_fem::{quadrature_points, quadrature_weights, NodalField};

/// Samples used for the convexity test of a flux.
const CONVEXITY_SAMPLES: usize = 201;

#[derive(Clone, Debug, PartialEq)]
pub struct RiemannProblem {
    pub u_left: f64,
    pub u_right: f64,
    pub flux: FluxModel,
}

/// The wave produced by a Riemann problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Wave {
    Constant,
    Shock { speed: f64 },
    Rarefaction { head: f64, tail: f64 },
}

impl RiemannProblem {
    pub fn new(u_left: f64, u_right: f64, flux: FluxModel) -> Result<Self> {
        if !(u_left.is_finite() && u_right.is_finite()) {
            return Err(Error::InvalidArgument("Riemann states must be finite".into()));
        }
        let (lo, hi) = (u_left.min(u_right), u_left.max(u_right));
        if !flux.is_convex_on(lo, hi, CONVEXITY_SAMPLES) {
            return Err(Error::NonConvexFlux { lo, hi });
        }
        Ok(Self {
            u_left,
            u_right,
            flux,
        })
    }

    pub fn wave(&self) -> Wave {
        let (ul, ur) = (self.u_left, self.u_right);
        if ul == ur {
            return Wave::Constant;
        }
        let (sl, sr) = (self.flux.f_prime(ul), self.flux.f_prime(ur));
        if ul > ur || sl >= sr {
            Wave::Shock {
                speed: (self.flux.f(ul) - self.flux.f(ur)) / (ul - ur),
            }
        } else {
            Wave::Rarefaction { tail: sl, head: sr }
        }
    }

    /// Characteristic speeds bounding the wave (`x / t` of its edges).
    pub fn wave_edges(&self) -> Vec<f64> {
        match self.wave() {
            Wave::Constant => Vec::new(),
            Wave::Shock { speed } => vec![speed],
            Wave::Rarefaction { head, tail } => vec![tail, head],
        }
    }

    /// Solves `f'(u) = xi` inside the fan.
    fn fan_state(&self, xi: f64) -> f64 {
        if let FluxKind::Burgers = self.flux.kind() {
            return xi;
        }
        let (mut lo, mut hi) = (self.u_left, self.u_right);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.flux.f_prime(mid) < xi {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Entropy solution at `(t, x)`. At a discontinuity, and at `t = 0, x = 0`,
/// the mean of the two states is returned.
pub fn exact_riemann(problem: &RiemannProblem, t: f64, x: f64) -> f64 {
    let (ul, ur) = (problem.u_left, problem.u_right);
    let mean = 0.5 * (ul + ur);
    if t <= 0.0 {
        return if x < 0.0 {
            ul
        } else if x > 0.0 {
            ur
        } else {
            mean
        };
    }
    match problem.wave() {
        Wave::Constant => ul,
        Wave::Shock { speed } => {
            let s = speed * t;
            if x < s {
                ul
            } else if x > s {
                ur
            } else {
                mean
            }
        }
        Wave::Rarefaction { head, tail } => {
            let xi = x / t;
            if xi <= tail {
                ul
            } else if xi >= head {
                ur
            } else {
                problem.fan_state(xi)
            }
        }
    }
}

/// Godunov flux for a convex `f`.
fn godunov_flux(flux: &FluxModel, a: f64, b: f64) -> f64 {
    if a <= b {
        // min of f on [a, b]
        if flux.f_prime(a) >= 0.0 {
            flux.f(a)
        } else if flux.f_prime(b) <= 0.0 {
            flux.f(b)
        } else {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if flux.f_prime(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            flux.f(0.5 * (lo + hi))
        }
    } else {
        flux.f(a).max(flux.f(b))
    }
}

/// Cell averages of a Godunov run.
#[derive(Clone, Debug, PartialEq)]
pub struct GodunovSolution {
    pub x_centers: Vec<f64>,
    pub dx: f64,
    /// `(t, cell averages)` at each requested time.
    pub slices: Vec<(f64, Vec<f64>)>,
    /// Total variation after every step, starting with the initial data.
    pub total_variation: Vec<f64>,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GodunovGrid {
    pub nx: usize,
    pub x_min: f64,
    pub x_max: f64,
}

/// First-order Godunov scheme with the exact Riemann flux at interfaces and
/// constant ghost states `u_left`, `u_right`.
pub fn godunov_reference<G>(
    problem: &RiemannProblem,
    u0: G,
    grid: GodunovGrid,
    t_final: f64,
    cfl: f64,
    sample_times: &[f64],
) -> Result<GodunovSolution>
where
    G: Fn(f64) -> f64,
{
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Cfl(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    if grid.nx == 0 || !(grid.x_min < grid.x_max) || !(t_final >= 0.0) {
        return Err(Error::InvalidDomain("bad Godunov grid".into()));
    }
    let dx = (grid.x_max - grid.x_min) / grid.nx as f64;
    let x_centers: Vec<f64> = (0..grid.nx)
        .map(|i| grid.x_min + (i as f64 + 0.5) * dx)
        .collect();
    let mut u: Vec<f64> = x_centers.iter().map(|&x| u0(x)).collect();
    let flux = &problem.flux;
    let mut times: Vec<f64> = sample_times.iter().copied().filter(|t| *t <= t_final).collect();
    times.sort_by(f64::total_cmp);

    let tv = |u: &[f64]| {
        let mut ext = Vec::with_capacity(u.len() + 2);
        ext.push(problem.u_left);
        ext.extend_from_slice(u);
        ext.push(problem.u_right);
        ext.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    };
    let mut total_variation = vec![tv(&u)];
    let mut slices = Vec::new();
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        slices.push((times[next], u.clone()));
        next += 1;
    }
    let mut t = 0.0;
    let mut steps = 0;
    let mut fluxes = vec![0.0; grid.nx + 1];
    while next < times.len() {
        let max_speed = u
            .iter()
            .chain([&problem.u_left, &problem.u_right])
            .fold(0.0f64, |m, &z| m.max(flux.f_prime(z).abs()));
        let target = times[next];
        let mut dt = if max_speed > 0.0 {
            cfl * dx / max_speed
        } else {
            target - t
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Cfl(format!("computed time step {dt} is not positive")));
        }
        if t + dt >= target {
            dt = target - t;
        }
        for (k, f) in fluxes.iter_mut().enumerate() {
            let a = if k == 0 { problem.u_left } else { u[k - 1] };
            let b = if k == grid.nx { problem.u_right } else { u[k] };
            *f = godunov_flux(flux, a, b);
        }
        let ratio = dt / dx;
        for (k, cell) in u.iter_mut().enumerate() {
            *cell -= ratio * (fluxes[k + 1] - fluxes[k]);
        }
        t = if t + dt >= target { target } else { t + dt };
        steps += 1;
        total_variation.push(tv(&u));
        while next < times.len() && times[next] <= t {
            slices.push((times[next], u.clone()));
            next += 1;
        }
    }
    Ok(GodunovSolution {
        x_centers,
        dx,
        slices,
        total_variation,
        steps,
    })
}

/// `Σ |u_i − u_exact(t, x_i)| dx` over the cells.
pub fn l1_distance_to_exact(problem: &RiemannProblem, t: f64, x: &[f64], u: &[f64], dx: f64) -> f64 {
    x.iter()
        .zip(u)
        .map(|(&x, &u)| (u - exact_riemann(problem, t, x)).abs() * dx)
        .sum()
}

/// L²(Ω) distance between a nodal field and the exact solution, skipping
/// quadrature points closer than `exclude_band / 2` (in x) to a shock or fan
/// edge. Each element is split into `refine × refine` sub-cells.
pub fn l2_error_vs_exact(field: &NodalField, problem: &RiemannProblem, exclude_band: f64) -> f64 {
    l2_error_refined(field, problem, exclude_band, 4)
}

pub fn l2_error_refined(
    field: &NodalField,
    problem: &RiemannProblem,
    exclude_band: f64,
    refine: usize,
) -> f64 {
    let mesh = field.mesh();
    let edges = problem.wave_edges();
    let half = 0.5 * exclude_band.max(0.0);
    let refine = refine.max(1);
    let (dt, dx) = (mesh.dt(), mesh.dx());
    let line = crate::mesh_fem::gauss_line_2();
    let mut sub = Vec::new();
    for a in 0..refine {
        for &(s, ws) in &line {
            sub.push(((a as f64 + s) / refine as f64, ws / refine as f64));
        }
    }
    let mut total = 0.0;
    for (ei, ej) in mesh.elements() {
        let nodes = mesh.element_nodes(ei, ej);
        let local = [
            field.values()[nodes[0]],
            field.values()[nodes[1]],
            field.values()[nodes[2]],
            field.values()[nodes[3]],
        ];
        let (t0, x0) = mesh.node(ei, ej);
        for &(s, ws) in &sub {
            let t = t0 + s * dt;
            for &(r, wr) in &sub {
                let x = x0 + r * dx;
                if half > 0.0 && edges.iter().any(|c| (x - c * t).abs() < half) {
                    continue;
                }
                let phi = crate::mesh_fem::bilinear(s, r);
                let uh = crate::mesh_fem::dot4(&phi, &local);
                let e = uh - exact_riemann(problem, t, x);
                total += ws * wr * dt * dx * e * e;
            }
        }
    }
    total.sqrt()
}

/// Plain 2x2-Gauss version of the L² distance, without exclusion.
pub fn l2_error_gauss(field: &NodalField, problem: &RiemannProblem) -> f64 {
    let values = field.values_at_quadrature();
    quadrature_points(field.mesh())
        .iter()
        .zip(quadrature_weights(field.mesh()))
        .zip(values)
        .map(|((&(t, x), w), u)| {
            let e = u - exact_riemann(problem, t, x);
            w * e * e
        })
        .sum::<f64>()
        .sqrt()
}
