use super::field::NodalField;
use super::mesh::{ReferenceElement, SpaceTimeMesh, QUAD_POINTS};
use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the 9-point connectivity of a Q1 structured mesh.
    pub fn with_mesh_pattern(mesh: &SpaceTimeMesh) -> Self {
        let n = mesh.num_nodes();
        let (nt, nx) = (mesh.nt(), mesh.nx());
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(9 * n);
        row_ptr.push(0);
        for i in 0..=nt {
            for j in 0..=nx {
                for ii in i.saturating_sub(1)..=(i + 1).min(nt) {
                    for jj in j.saturating_sub(1)..=(j + 1).min(nx) {
                        col_idx.push(mesh.node_index(ii, jj));
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .binary_search(&col)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |k| self.values[k])
    }

    /// Adds to an entry inside the sparsity pattern.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let k = self
            .slot(row, col)
            .expect("entry outside the sparsity pattern");
        self.values[k] += value;
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for row in 0..self.n {
            for (col, v) in self.row(row) {
                worst = worst.max((v - self.get(col, row)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Half bandwidth `max |i - j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|row| self.row(row).map(move |(col, _)| row.abs_diff(col)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (row, dense_row) in dense.iter_mut().enumerate() {
            for (col, v) in self.row(row) {
                dense_row[col] = v;
            }
        }
        dense
    }
}

/// Matrix, load vector and the list of constrained (final-time) nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSpdSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constrained: Vec<usize>,
}

impl SparseSpdSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        Self {
            matrix,
            rhs,
            constrained: Vec::new(),
        }
    }

    pub fn free_count(&self) -> usize {
        self.matrix.dim() - self.constrained.len()
    }
}

/// Stiffness matrix `A[a][b] = ∫ (φ_a,t φ_b,t + φ_a,x φ_b,x)` of the bilinear
/// basis, integrated with 2x2 Gauss points.
pub fn assemble_stiffness(mesh: &SpaceTimeMesh) -> SparseSpdSystem {
    let mut matrix = CsrMatrix::with_mesh_pattern(mesh);
    let local = element_stiffness(mesh);
    for (ei, ej) in mesh.elements() {
        let nodes = mesh.element_nodes(ei, ej);
        for (a, &row) in nodes.iter().enumerate() {
            for (b, &col) in nodes.iter().enumerate() {
                matrix.add(row, col, local[a][b]);
            }
        }
    }
    let n = matrix.dim();
    SparseSpdSystem::new(matrix, vec![0.0; n])
}

fn element_stiffness(mesh: &SpaceTimeMesh) -> [[f64; 4]; 4] {
    let reference = ReferenceElement::new();
    let (dt, dx) = (mesh.dt(), mesh.dx());
    let area = mesh.element_area();
    let mut k = [[0.0; 4]; 4];
    for q in 0..QUAD_POINTS {
        let w = reference.rule.weights[q] * area;
        for a in 0..4 {
            for b in 0..4 {
                k[a][b] += w
                    * (reference.dphi_ds[q][a] * reference.dphi_ds[q][b] / (dt * dt)
                        + reference.dphi_dr[q][a] * reference.dphi_dr[q][b] / (dx * dx));
            }
        }
    }
    k
}

/// Replaces the rows and columns of the `t = T` nodes by the identity with a
/// zero right-hand side. Applying it twice is the same as applying it once.
pub fn apply_final_time_constraint(
    mut system: SparseSpdSystem,
    mesh: &SpaceTimeMesh,
) -> SparseSpdSystem {
    let constrained = mesh.final_time_nodes();
    let mut mask = vec![false; system.matrix.dim()];
    for &c in &constrained {
        mask[c] = true;
    }
    let m = &mut system.matrix;
    for row in 0..m.n {
        for k in m.row_ptr[row]..m.row_ptr[row + 1] {
            let col = m.col_idx[k];
            if mask[row] || mask[col] {
                m.values[k] = if row == col { 1.0 } else { 0.0 };
            }
        }
    }
    for &c in &constrained {
        system.rhs[c] = 0.0;
    }
    system.constrained = constrained;
    system
}

/// Conjugate-gradient settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Stop once `‖b − Ax‖ ≤ rel_tol ‖b‖`.
    pub rel_tol: f64,
    /// Defaults to `10 * n_free` when `None`.
    pub max_iters: Option<usize>,
    /// Diagonal preconditioning.
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters: None,
            jacobi: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// (Preconditioned) conjugate gradient from the initial guess `x0`.
pub fn conjugate_gradient(
    matrix: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    max_iters: usize,
    options: &CgOptions,
) -> Result<CgOutcome> {
    let n = matrix.dim();
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let inv_diag: Option<Vec<f64>> = options.jacobi.then(|| {
        matrix
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect()
    });
    let precondition = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((z, r), d)| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = matrix.mul_vec(&x);
    r.iter_mut().zip(rhs).for_each(|(r, b)| *r = b - *r);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let tol = options.rel_tol * b_norm;
    let mut res = norm(&r);
    let mut iterations = 0;
    while res > tol {
        if iterations >= max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: res / b_norm,
            });
        }
        matrix.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NoConvergence {
                iterations,
                residual: res / b_norm,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        res = norm(&r);
        iterations += 1;
    }
    Ok(CgOutcome {
        x,
        iterations,
        rel_residual: res / b_norm,
    })
}

/// Solves a constrained system by conjugate gradients. Constrained nodes come
/// back exactly zero.
pub fn solve_spd(system: &SparseSpdSystem, mesh: &SpaceTimeMesh, rel_tol: f64) -> Result<NodalField> {
    solve_spd_with(
        system,
        mesh,
        &CgOptions {
            rel_tol,
            ..CgOptions::default()
        },
    )
}

pub fn solve_spd_with(
    system: &SparseSpdSystem,
    mesh: &SpaceTimeMesh,
    options: &CgOptions,
) -> Result<NodalField> {
    if !(options.rel_tol > 0.0 && options.rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relative tolerance must lie in (0, 1), got {}",
            options.rel_tol
        )));
    }
    let max_iters = options.max_iters.unwrap_or(10 * system.free_count().max(1));
    let mut outcome = conjugate_gradient(&system.matrix, &system.rhs, None, max_iters, options)?;
    for &c in &system.constrained {
        outcome.x[c] = 0.0;
    }
    NodalField::new(*mesh, outcome.x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::build_mesh;

    #[test]
    fn unit_element_has_zero_row_sums() {
        let mesh = build_mesh(1, 1, 1.0, 0.0, 1.0).unwrap();
        let sys = assemble_stiffness(&mesh);
        assert_eq!(sys.matrix.dim(), 4);
        for row in 0..4 {
            let s: f64 = sys.matrix.row(row).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-14);
        }
        // unit square Q1 Laplacian diagonal is 2/3
        assert!((sys.matrix.get(0, 0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn assembly_is_exactly_symmetric() {
        let mesh = build_mesh(5, 7, 0.7, -2.0, 1.0).unwrap();
        let sys = assemble_stiffness(&mesh);
        assert_eq!(sys.matrix.asymmetry(), 0.0);
        let ones = vec![1.0; mesh.num_nodes()];
        assert!(sys.matrix.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constraint_marks_final_edge_and_is_idempotent() {
        let mesh = build_mesh(1, 1, 1.0, 0.0, 1.0).unwrap();
        let once = apply_final_time_constraint(assemble_stiffness(&mesh), &mesh);
        assert_eq!(once.constrained, vec![2, 3]);
        assert_eq!(once.matrix.get(2, 2), 1.0);
        assert_eq!(once.matrix.get(0, 2), 0.0);
        let twice = apply_final_time_constraint(once.clone(), &mesh);
        assert_eq!(once, twice);
    }

    #[test]
    fn homogeneous_system_has_zero_solution() {
        let mesh = build_mesh(4, 4, 1.0, -1.0, 1.0).unwrap();
        let sys = apply_final_time_constraint(assemble_stiffness(&mesh), &mesh);
        let x = solve_spd(&sys, &mesh, 1e-10).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_known_solution() {
        let mesh = build_mesh(6, 6, 1.0, -1.0, 1.0).unwrap();
        let mut sys = apply_final_time_constraint(assemble_stiffness(&mesh), &mesh);
        let x0: Vec<f64> = (0..mesh.num_nodes())
            .map(|k| {
                if mesh.is_final_time(k) {
                    0.0
                } else {
                    ((k * 37 % 11) as f64 - 5.0) / 3.0
                }
            })
            .collect();
        sys.rhs = sys.matrix.mul_vec(&x0);
        for jacobi in [false, true] {
            let opts = CgOptions {
                rel_tol: 1e-12,
                jacobi,
                ..CgOptions::default()
            };
            let x = solve_spd_with(&sys, &mesh, &opts).unwrap();
            let err = x
                .values()
                .iter()
                .zip(&x0)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-9, "jacobi={jacobi} err={err}");
        }
    }

    #[test]
    fn reports_non_convergence() {
        let mesh = build_mesh(8, 8, 1.0, -1.0, 1.0).unwrap();
        let mut sys = apply_final_time_constraint(assemble_stiffness(&mesh), &mesh);
        sys.rhs = (0..mesh.num_nodes())
            .map(|k| if mesh.is_final_time(k) { 0.0 } else { 1.0 })
            .collect();
        let opts = CgOptions {
            rel_tol: 1e-12,
            max_iters: Some(2),
            jacobi: false,
        };
        assert!(matches!(
            solve_spd_with(&sys, &mesh, &opts),
            Err(Error::NoConvergence { .. })
        ));
    }
}
