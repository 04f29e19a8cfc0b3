use super::mesh::{ReferenceElement, SpaceTimeMesh, QUAD_POINTS};
use crate::error::{Error, Result};

/// One real value per mesh node, interpreted as a bilinear interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    mesh: SpaceTimeMesh,
    values: Vec<f64>,
}

/// Values of some quantity at every quadrature point, stored element by
/// element (`element * 4 + q`).
pub type QuadValues = Vec<f64>;

/// Exact partial derivatives of a bilinear interpolant at the quadrature points.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadGradients {
    pub dt: QuadValues,
    pub dx: QuadValues,
}

impl NodalField {
    pub fn new(mesh: SpaceTimeMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::FieldLength {
                expected: mesh.num_nodes(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: SpaceTimeMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: SpaceTimeMesh, c: f64) -> Self {
        Self {
            mesh,
            values: vec![c; mesh.num_nodes()],
        }
    }

    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.node_index(i, j)]
    }

    pub fn ensure_same_mesh(&self, other: &NodalField) -> Result<()> {
        if self.mesh == other.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &NodalField) -> Result<NodalField> {
        self.ensure_same_mesh(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        NodalField::new(self.mesh, values)
    }

    pub fn scaled(&self, scale: f64) -> NodalField {
        NodalField {
            mesh: self.mesh,
            values: self.values.iter().map(|v| scale * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Interpolant values at every quadrature point.
    pub fn values_at_quadrature(&self) -> QuadValues {
        let reference = ReferenceElement::new();
        let mut out = Vec::with_capacity(self.mesh.num_elements() * QUAD_POINTS);
        for (ei, ej) in self.mesh.elements() {
            let nodes = self.mesh.element_nodes(ei, ej);
            for phi in &reference.phi {
                out.push(dot4(phi, &gather(&self.values, &nodes)));
            }
        }
        out
    }
}

pub(crate) fn gather(values: &[f64], nodes: &[usize; 4]) -> [f64; 4] {
    [
        values[nodes[0]],
        values[nodes[1]],
        values[nodes[2]],
        values[nodes[3]],
    ]
}

pub(crate) fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Physical-space derivatives of the interpolant at every quadrature point.
pub fn field_derivatives(field: &NodalField) -> QuadGradients {
    let mesh = field.mesh();
    let reference = ReferenceElement::new();
    let (inv_dt, inv_dx) = (1.0 / mesh.dt(), 1.0 / mesh.dx());
    let n = mesh.num_elements() * QUAD_POINTS;
    let mut dt = Vec::with_capacity(n);
    let mut dx = Vec::with_capacity(n);
    for (ei, ej) in mesh.elements() {
        let local = gather(field.values(), &mesh.element_nodes(ei, ej));
        for q in 0..QUAD_POINTS {
            dt.push(dot4(&reference.dphi_ds[q], &local) * inv_dt);
            dx.push(dot4(&reference.dphi_dr[q], &local) * inv_dx);
        }
    }
    QuadGradients { dt, dx }
}

/// Physical coordinates `(t, x)` of every quadrature point.
pub fn quadrature_points(mesh: &SpaceTimeMesh) -> Vec<(f64, f64)> {
    let reference = ReferenceElement::new();
    let (dt, dx) = (mesh.dt(), mesh.dx());
    let mut out = Vec::with_capacity(mesh.num_elements() * QUAD_POINTS);
    for (ei, ej) in mesh.elements() {
        let (t0, x0) = mesh.node(ei, ej);
        for &[s, r] in &reference.rule.points {
            out.push((t0 + s * dt, x0 + r * dx));
        }
    }
    out
}

/// Quadrature weight of every quadrature point (element area times the
/// reference weight).
pub fn quadrature_weights(mesh: &SpaceTimeMesh) -> Vec<f64> {
    let reference = ReferenceElement::new();
    let area = mesh.element_area();
    let mut out = Vec::with_capacity(mesh.num_elements() * QUAD_POINTS);
    for _ in 0..mesh.num_elements() {
        out.extend(reference.rule.weights.iter().map(|w| w * area));
    }
    out
}

/// `∫ (a_t b_t + a_x b_x)` over the whole space-time domain.
pub fn integrate_h1_pairing(a: &NodalField, b: &NodalField) -> Result<f64> {
    a.ensure_same_mesh(b)?;
    let ga = field_derivatives(a);
    let gb = field_derivatives(b);
    let weights = quadrature_weights(a.mesh());
    Ok(weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * (ga.dt[k] * gb.dt[k] + ga.dx[k] * gb.dx[k]))
        .sum())
}

/// H¹ seminorm `sqrt(∫ |∇a|²)`.
pub fn h1_seminorm(a: &NodalField) -> f64 {
    integrate_h1_pairing(a, a).unwrap_or(0.0).max(0.0).sqrt()
}

/// Lumped mass `∫ φ_b` of every node.
pub fn lumped_mass(mesh: &SpaceTimeMesh) -> Vec<f64> {
    let mut mass = vec![0.0; mesh.num_nodes()];
    let quarter = 0.25 * mesh.element_area();
    for (ei, ej) in mesh.elements() {
        for node in mesh.element_nodes(ei, ej) {
            mass[node] += quarter;
        }
    }
    mass
}

/// `Σ m_b a_b b_b`, the lumped-mass L² inner product.
pub fn lumped_inner(mass: &[f64], a: &[f64], b: &[f64]) -> f64 {
    mass.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum()
}

/// L² norm of a field by quadrature of its interpolant.
pub fn l2_norm(field: &NodalField) -> f64 {
    let weights = quadrature_weights(field.mesh());
    field
        .values_at_quadrature()
        .iter()
        .zip(&weights)
        .map(|(u, w)| w * u * u)
        .sum::<f64>()
        .sqrt()
}

/// Nodal interpolant of `g(t, x)`.
pub fn interpolate_function<G>(mesh: &SpaceTimeMesh, g: G) -> Result<NodalField>
where
    G: Fn(f64, f64) -> f64,
{
    let values = (0..mesh.num_nodes())
        .map(|node| {
            let (t, x) = mesh.node_coords(node);
            g(t, x)
        })
        .collect();
    NodalField::new(*mesh, values)
}
