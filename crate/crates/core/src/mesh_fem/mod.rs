//! Structured space-time mesh, bilinear finite elements and the sparse
//! symmetric solve behind every defect computation.

mod banded;
mod field;
mod mesh;
mod sparse;

pub use banded::BandedLu;
pub use field::{
    field_derivatives, h1_seminorm, integrate_h1_pairing, interpolate_function, l2_norm,
    lumped_inner, lumped_mass, quadrature_points, quadrature_weights, NodalField, QuadGradients,
    QuadValues,
};
pub use mesh::{build_mesh, gauss_line_2, QuadratureRule, SpaceTimeMesh, QUAD_POINTS};
pub use sparse::{
    apply_final_time_constraint, assemble_stiffness, conjugate_gradient, solve_spd,
    solve_spd_with, CgOptions, CgOutcome, CsrMatrix, SparseSpdSystem,
};

pub(crate) use field::{dot4, gather};
pub(crate) use mesh::{bilinear, ReferenceElement};
