//! Dense oracles built from Kronecker products of 1-D matrices, independent
//! of the element loops in the crate.

use nalgebra::{DMatrix, DVector};
use varcons::defect::{assemble_defect_rhs, compute_defect, LinearBackend, ProblemData};
use varcons::flux::FluxModel;
use varcons::mesh_fem::{assemble_stiffness, build_mesh, NodalField, SpaceTimeMesh};

struct OneD {
    stiffness: DMatrix<f64>,
    mass: DMatrix<f64>,
    /// `C[a][b] = ∫ ψ_b ψ_a'`
    convection: DMatrix<f64>,
}

fn one_d(n: usize, h: f64) -> OneD {
    let mut stiffness = DMatrix::zeros(n + 1, n + 1);
    let mut mass = DMatrix::zeros(n + 1, n + 1);
    let mut convection = DMatrix::zeros(n + 1, n + 1);
    for e in 0..n {
        let idx = [e, e + 1];
        for a in 0..2 {
            for b in 0..2 {
                stiffness[(idx[a], idx[b])] += if a == b { 1.0 } else { -1.0 } / h;
                mass[(idx[a], idx[b])] += if a == b { h / 3.0 } else { h / 6.0 };
                convection[(idx[a], idx[b])] += if a == 0 { -0.5 } else { 0.5 };
            }
        }
    }
    OneD {
        stiffness,
        mass,
        convection,
    }
}

fn final_rows(mesh: &SpaceTimeMesh) -> Vec<usize> {
    (0..=mesh.nx()).map(|j| mesh.node_index(mesh.nt(), j)).collect()
}

fn constrain(a: &DMatrix<f64>, fixed: &[usize]) -> DMatrix<f64> {
    let mut c = a.clone();
    for &k in fixed {
        c.row_mut(k).fill(0.0);
        c.column_mut(k).fill(0.0);
        c[(k, k)] = 1.0;
    }
    c
}

fn mesh() -> SpaceTimeMesh {
    build_mesh(6, 8, 0.7, -0.4, 1.2).unwrap()
}

fn dense_stiffness(mesh: &SpaceTimeMesh) -> (OneD, OneD, DMatrix<f64>) {
    let t = one_d(mesh.nt(), mesh.dt());
    let x = one_d(mesh.nx(), mesh.dx());
    let a = t.stiffness.kronecker(&x.mass) + t.mass.kronecker(&x.stiffness);
    (t, x, a)
}

fn field(mesh: &SpaceTimeMesh, seed: u64) -> NodalField {
    // cheap deterministic pseudo-random values
    let mut state = seed;
    let values = (0..mesh.num_nodes())
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    NodalField::new(*mesh, values).unwrap()
}

#[test]
fn sparse_stiffness_matches_kronecker_form() {
    let mesh = mesh();
    let (_, _, dense) = dense_stiffness(&mesh);
    let sparse = assemble_stiffness(&mesh).matrix.to_dense();
    for r in 0..dense.nrows() {
        for c in 0..dense.ncols() {
            assert!((sparse[r][c] - dense[(r, c)]).abs() < 1e-13, "({r}, {c})");
        }
    }
}

/// Linear flux `f(u) = a u` with step data: load, defect, energy and exact
/// gradient all follow from dense linear algebra.
#[test]
fn linear_flux_defect_energy_and_gradient() {
    let mesh = mesh();
    let speed = 0.8;
    let (ul, ur) = (0.6, -0.3);
    let problem = ProblemData::riemann(mesh, FluxModel::linear(speed).unwrap(), ul, ur)
        .unwrap()
        .with_backend(LinearBackend::BandedDirect);
    let (t, x, a) = dense_stiffness(&mesh);
    let b = t.convection.kronecker(&x.mass) + (t.mass.kronecker(&x.convection)) * speed;

    // data terms
    let nx1 = mesh.nx() + 1;
    let mut c = DVector::zeros(mesh.num_nodes());
    for e in 0..mesh.nx() {
        let mid = mesh.x_min() + (e as f64 + 0.5) * mesh.dx();
        let u0 = if mid < 0.0 { ul } else { ur };
        c[e] -= 0.5 * u0 * mesh.dx();
        c[e + 1] -= 0.5 * u0 * mesh.dx();
    }
    let mt = &t.mass * DVector::from_element(mesh.nt() + 1, 1.0);
    for i in 0..=mesh.nt() {
        c[i * nx1 + mesh.nx()] += speed * ur * mt[i];
        c[i * nx1] -= speed * ul * mt[i];
    }

    let fixed = final_rows(&mesh);
    let ac = constrain(&a, &fixed);
    let lu = ac.clone().lu();
    for seed in 1..4 {
        let u = field(&mesh, seed);
        let uv = DVector::from_column_slice(u.values());
        let mut rhs = -(&b * &uv) + &c;
        for &k in &fixed {
            rhs[k] = 0.0;
        }
        let lib_rhs = assemble_defect_rhs(&problem, &u).unwrap();
        for k in 0..rhs.len() {
            assert!((lib_rhs[k] - rhs[k]).abs() < 1e-13, "rhs[{k}]");
        }

        let v = lu.solve(&rhs).unwrap();
        let energy = 0.5 * v.dot(&(&a * &v));
        let defect = compute_defect(&problem, &u, 1e-12).unwrap();
        assert!((defect.energy - energy).abs() <= 1e-11 * energy);

        // E = ½ vᵀAv with v = A_c⁻¹ P (c − B u)
        let mut pb = b.clone();
        for &k in &fixed {
            pb.row_mut(k).fill(0.0);
        }
        let jac = -lu.solve(&pb).unwrap();
        let grad = jac.transpose() * (&a * &v);
        for k in 0..grad.len() {
            assert!(
                (defect.nodal_derivative[k] - grad[k]).abs() < 1e-11,
                "dE/du[{k}]: {} vs {}",
                defect.nodal_derivative[k],
                grad[k]
            );
        }
    }
}

#[test]
fn backends_match_dense_solve() {
    let mesh = mesh();
    let (_, _, a) = dense_stiffness(&mesh);
    let fixed = final_rows(&mesh);
    let lu = constrain(&a, &fixed).lu();
    for backend in [
        LinearBackend::ConjugateGradient { jacobi: false },
        LinearBackend::ConjugateGradient { jacobi: true },
        LinearBackend::BandedDirect,
    ] {
        let problem = ProblemData::riemann(mesh, FluxModel::burgers(), 1.0, -1.0)
            .unwrap()
            .with_backend(backend);
        let u = field(&mesh, 9);
        let rhs = assemble_defect_rhs(&problem, &u).unwrap();
        let dense = lu.solve(&DVector::from_column_slice(&rhs)).unwrap();
        let v = compute_defect(&problem, &u, 1e-13).unwrap().v;
        let diff = DVector::from_column_slice(v.values()) - &dense;
        let rel = (diff.dot(&(&a * &diff)) / dense.dot(&(&a * &dense))).sqrt();
        assert!(rel < 1e-10, "{backend:?}: {rel:e}");
    }
}
