//! Empirical Young measures of iterate sequences, their moments `ū`, `f̄`,
//! the defect energy of the averaged fields and a trend classifier for
//! descent runs.
//!
//! Samples live on the quadrant lattice: every element is split into four
//! quadrants, one per Gauss point. A measure cell groups `c × c` quadrants.

use serde::{Deserialize, Serialize};

use crate::defect::{load_from_quadrature, ProblemData};
use crate::descent::DescentHistory;
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::mesh_fem::{integrate_h1_pairing, l2_norm, NodalField, SpaceTimeMesh, QUAD_POINTS};

/// Histograms of sampled states, one per cell, normalized to probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalYoungMeasure {
    mesh: SpaceTimeMesh,
    coarsening: usize,
    cells_t: usize,
    cells_x: usize,
    z_range: (f64, f64),
    bins: usize,
    /// `weights[cell * bins + b]`, cells in row-major order (time first).
    weights: Vec<f64>,
    samples_per_cell: Vec<usize>,
    /// Samples outside `z_range` that were moved to an end bin.
    pub clamped: usize,
}

impl EmpiricalYoungMeasure {
    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn coarsening(&self) -> usize {
        self.coarsening
    }

    pub fn num_cells(&self) -> usize {
        self.cells_t * self.cells_x
    }

    pub fn cell_shape(&self) -> (usize, usize) {
        (self.cells_t, self.cells_x)
    }

    pub fn bin_width(&self) -> f64 {
        (self.z_range.1 - self.z_range.0) / self.bins as f64
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        self.z_range.0 + (b as f64 + 0.5) * self.bin_width()
    }

    pub fn cell_weights(&self, cell: usize) -> &[f64] {
        &self.weights[cell * self.bins..(cell + 1) * self.bins]
    }

    pub fn samples_in_cell(&self, cell: usize) -> usize {
        self.samples_per_cell[cell]
    }

    /// Center `(t, x)` of a cell (clipped to the domain).
    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (a, b) = (cell / self.cells_x, cell % self.cells_x);
        let (ht, hx) = (0.5 * self.mesh.dt(), 0.5 * self.mesh.dx());
        let c = self.coarsening;
        let rows = (2 * self.mesh.nt()).min((a + 1) * c) - a * c;
        let cols = (2 * self.mesh.nx()).min((b + 1) * c) - b * c;
        (
            (a * c) as f64 * ht + 0.5 * rows as f64 * ht,
            self.mesh.x_min() + (b * c) as f64 * hx + 0.5 * cols as f64 * hx,
        )
    }

    /// Largest single-bin weight of a cell.
    pub fn peak_weight(&self, cell: usize) -> f64 {
        self.cell_weights(cell).iter().copied().fold(0.0, f64::max)
    }

    /// Measure cell of every quadrature point.
    pub fn cell_of_quadrature_points(&self) -> Vec<usize> {
        quadrant_cells(&self.mesh, self.coarsening, self.cells_x)
    }
}

fn quadrant_cells(mesh: &SpaceTimeMesh, coarsening: usize, cells_x: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(mesh.num_elements() * QUAD_POINTS);
    for (ei, ej) in mesh.elements() {
        for q in 0..QUAD_POINTS {
            // quadrature points are ordered time-major within the element
            let (row, col) = (2 * ei + q / 2, 2 * ej + q % 2);
            out.push((row / coarsening) * cells_x + col / coarsening);
        }
    }
    out
}

/// Histogram of all iterates' quadrature-point values in each cell.
pub fn empirical_measure(
    iterates: &[NodalField],
    coarsening: usize,
    z_range: (f64, f64),
    bins: usize,
) -> Result<EmpiricalYoungMeasure> {
    let first = iterates.first().ok_or(Error::EmptySequence)?;
    if bins == 0 || coarsening == 0 {
        return Err(Error::InvalidArgument("bins and coarsening must be >= 1".into()));
    }
    if !(z_range.0 < z_range.1) || !z_range.0.is_finite() || !z_range.1.is_finite() {
        return Err(Error::InvalidArgument(format!("empty state range {z_range:?}")));
    }
    let mesh = *first.mesh();
    for it in iterates {
        first.ensure_same_mesh(it)?;
    }
    let cells_t = (2 * mesh.nt()).div_ceil(coarsening);
    let cells_x = (2 * mesh.nx()).div_ceil(coarsening);
    let cell_of = quadrant_cells(&mesh, coarsening, cells_x);
    let width = (z_range.1 - z_range.0) / bins as f64;
    let mut counts = vec![0usize; cells_t * cells_x * bins];
    let mut samples_per_cell = vec![0usize; cells_t * cells_x];
    let mut clamped = 0;
    for it in iterates {
        for (k, z) in it.values_at_quadrature().into_iter().enumerate() {
            let raw = ((z - z_range.0) / width).floor();
            let b = if raw < 0.0 {
                clamped += 1;
                0
            } else if raw >= bins as f64 {
                // the upper end point itself belongs to the last bin
                if z > z_range.1 {
                    clamped += 1;
                }
                bins - 1
            } else {
                raw as usize
            };
            counts[cell_of[k] * bins + b] += 1;
            samples_per_cell[cell_of[k]] += 1;
        }
    }
    let weights = counts
        .chunks(bins)
        .zip(&samples_per_cell)
        .flat_map(|(c, &n)| c.iter().map(move |&k| k as f64 / n as f64))
        .collect();
    Ok(EmpiricalYoungMeasure {
        mesh,
        coarsening,
        cells_t,
        cells_x,
        z_range,
        bins,
        weights,
        samples_per_cell,
        clamped,
    })
}

/// The last `fraction` of a sequence (at least one element).
pub fn tail_window<T>(items: &[T], fraction: f64) -> &[T] {
    let keep = ((items.len() as f64 * fraction.clamp(0.0, 1.0)).ceil() as usize)
        .clamp(items.len().min(1), items.len());
    &items[items.len() - keep..]
}

/// First moment and flux moment, per cell and prolonged to nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureMoments {
    pub u_bar: NodalField,
    pub f_bar: NodalField,
    pub cell_u: Vec<f64>,
    pub cell_f: Vec<f64>,
    cell_of_quadrature: Vec<usize>,
}

impl MeasureMoments {
    /// `(ū, f̄)` at every quadrature point (the value of its cell).
    pub fn at_quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.cell_of_quadrature.iter().map(|&c| self.cell_u[c]).collect(),
            self.cell_of_quadrature.iter().map(|&c| self.cell_f[c]).collect(),
        )
    }
}

/// Bin-midpoint moments `Σ w_b z_b` and `Σ w_b f(z_b)`.
pub fn measure_moments(measure: &EmpiricalYoungMeasure, flux: &FluxModel) -> MeasureMoments {
    let centers: Vec<f64> = (0..measure.bins).map(|b| measure.bin_center(b)).collect();
    let fluxes: Vec<f64> = centers.iter().map(|&z| flux.f(z)).collect();
    let n = measure.num_cells();
    let mut cell_u = Vec::with_capacity(n);
    let mut cell_f = Vec::with_capacity(n);
    for cell in 0..n {
        let w = measure.cell_weights(cell);
        cell_u.push(w.iter().zip(&centers).map(|(w, z)| w * z).sum());
        cell_f.push(w.iter().zip(&fluxes).map(|(w, f)| w * f).sum());
    }
    let mesh = measure.mesh;
    let cell_of = measure.cell_of_quadrature_points();
    let prolong = |cell_values: &[f64]| {
        let mut sum = vec![0.0; mesh.num_nodes()];
        let mut count = vec![0.0; mesh.num_nodes()];
        for (e, (ei, ej)) in mesh.elements().enumerate() {
            let nodes = mesh.element_nodes(ei, ej);
            // quadrant q touches corner q (same local ordering)
            for (q, &node) in nodes.iter().enumerate() {
                sum[node] += cell_values[cell_of[e * QUAD_POINTS + q]];
                count[node] += 1.0;
            }
        }
        let values = sum.iter().zip(&count).map(|(s, c)| s / c).collect();
        NodalField::new(mesh, values).expect("moments are finite")
    };
    MeasureMoments {
        u_bar: prolong(&cell_u),
        f_bar: prolong(&cell_f),
        cell_u,
        cell_f,
        cell_of_quadrature: cell_of,
    }
}

/// Defect energy with `(ū, f̄)` in place of `(u, f(u))`, using the cell
/// values at the quadrature points.
pub fn averaged_defect_energy(problem: &ProblemData, moments: &MeasureMoments) -> Result<f64> {
    if moments.u_bar.mesh() != problem.mesh() {
        return Err(Error::MeshMismatch);
    }
    let (u_q, f_q) = moments.at_quadrature();
    let rhs = load_from_quadrature(problem, &u_q, &f_q);
    let v = NodalField::new(*problem.mesh(), problem.solve(&rhs, crate::defect::DEFAULT_REL_TOL)?)?;
    Ok(0.5 * integrate_h1_pairing(&v, &v)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunLabel {
    ClassicalWeakCandidate,
    StrongYmCandidate,
    EPositiveNoSolution,
    Inconclusive,
}

impl RunLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunLabel::ClassicalWeakCandidate => "classical-weak-candidate",
            RunLabel::StrongYmCandidate => "strong-YM-candidate",
            RunLabel::EPositiveNoSolution => "E-positive-no-solution",
            RunLabel::Inconclusive => "inconclusive",
        }
    }
}

/// Relative thresholds of the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// `tol_E = energy_factor · E(u⁰)`.
    pub energy_factor: f64,
    /// Increment tolerance `increment_factor · max(‖u⁰‖, ‖u_last‖)`.
    pub increment_factor: f64,
    /// Gradient tolerance `gradient_factor · ‖E'(u⁰)‖`.
    pub gradient_factor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            energy_factor: 1e-4,
            increment_factor: 1e-3,
            gradient_factor: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunClassification {
    /// Last-quartile mean over first-quartile mean of `E`.
    pub energy_trend: f64,
    pub gradient_trend: f64,
    /// Same ratio for the L² increments between consecutive iterates.
    pub cauchy_trend: f64,
    pub final_energy: f64,
    pub energy_tol: f64,
    pub final_gradient: f64,
    pub gradient_tol: f64,
    pub final_increment: f64,
    pub increment_tol: f64,
    pub label: RunLabel,
}

fn quartile_ratio(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let q = values.len().div_ceil(4);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (first, last) = (mean(&values[..q]), mean(&values[values.len() - q..]));
    if first == 0.0 {
        if last == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        last / first
    }
}

/// Heuristic label for a descent run from its history and stored iterates.
pub fn classify_run(
    history: &DescentHistory,
    iterates: &[NodalField],
    config: &ClassifierConfig,
) -> Result<RunClassification> {
    let first = history.records.first().ok_or(Error::EmptySequence)?;
    let last = history.records.last().expect("nonempty");
    let energies: Vec<f64> = history.records.iter().map(|r| r.energy).collect();
    let gradients: Vec<f64> = history.records.iter().map(|r| r.gradient_norm).collect();
    let mut increments = Vec::new();
    for w in iterates.windows(2) {
        increments.push(l2_norm(&w[1].add_scaled(-1.0, &w[0])?));
    }
    let scale = match (iterates.first(), iterates.last()) {
        (Some(a), Some(b)) => l2_norm(a).max(l2_norm(b)),
        _ => 0.0,
    };
    let energy_tol = config.energy_factor * first.energy;
    let gradient_tol = config.gradient_factor * first.gradient_norm;
    let increment_tol = config.increment_factor * scale;
    // tail mean over the last quartile, not just the final pair
    let final_increment = if increments.is_empty() {
        0.0
    } else {
        let q = increments.len().div_ceil(4);
        increments[increments.len() - q..].iter().sum::<f64>() / q as f64
    };

    let e_small = last.energy <= energy_tol;
    let steady = final_increment <= increment_tol;
    let label = if e_small && steady {
        RunLabel::ClassicalWeakCandidate
    } else if e_small {
        RunLabel::StrongYmCandidate
    } else if last.gradient_norm <= gradient_tol {
        RunLabel::EPositiveNoSolution
    } else {
        RunLabel::Inconclusive
    };
    Ok(RunClassification {
        energy_trend: quartile_ratio(&energies),
        gradient_trend: quartile_ratio(&gradients),
        cauchy_trend: quartile_ratio(&increments),
        final_energy: last.energy,
        energy_tol,
        final_gradient: last.gradient_norm,
        gradient_tol,
        final_increment,
        increment_tol,
        label,
    })
}
