use crate::error::{Error, Result};

/// Uniform tensor-product mesh of `(0, T) x (x_min, x_max)`.
///
/// The first coordinate is always time. Node `(i, j)` sits at
/// `(i * T / nt, x_min + j * (x_max - x_min) / nx)` and has the flat index
/// `i * (nx + 1) + j`, so a nodal array is stored row-major in `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeMesh {
    nt: usize,
    nx: usize,
    t_final: f64,
    x_min: f64,
    x_max: f64,
}

impl SpaceTimeMesh {
    pub fn new(nt: usize, nx: usize, t_final: f64, x_min: f64, x_max: f64) -> Result<Self> {
        if nt == 0 || nx == 0 {
            return Err(Error::InvalidDomain(format!(
                "element counts must be positive (nt = {nt}, nx = {nx})"
            )));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidDomain(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            nt,
            nx,
            t_final,
            x_min,
            x_max,
        })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn num_nodes(&self) -> usize {
        (self.nt + 1) * (self.nx + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.nt * self.nx
    }

    pub fn element_area(&self) -> f64 {
        self.dt() * self.dx()
    }

    pub fn area(&self) -> f64 {
        self.t_final * (self.x_max - self.x_min)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nt && j <= self.nx);
        i * (self.nx + 1) + j
    }

    /// `(i, j)` lattice position of a flat node index.
    pub fn node_position(&self, node: usize) -> (usize, usize) {
        (node / (self.nx + 1), node % (self.nx + 1))
    }

    pub fn t_at(&self, i: usize) -> f64 {
        if i == self.nt {
            self.t_final
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn x_at(&self, j: usize) -> f64 {
        if j == self.nx {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx()
        }
    }

    /// Coordinates `(t, x)` of node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.t_at(i), self.x_at(j))
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.node_position(node);
        self.node(i, j)
    }

    pub fn element_index(&self, ei: usize, ej: usize) -> usize {
        ei * self.nx + ej
    }

    /// Corner nodes of element `(ei, ej)` in the local order
    /// `(t0, x0), (t0, x1), (t1, x0), (t1, x1)`.
    pub fn element_nodes(&self, ei: usize, ej: usize) -> [usize; 4] {
        let a = self.node_index(ei, ej);
        let b = self.node_index(ei + 1, ej);
        [a, a + 1, b, b + 1]
    }

    /// Iterator over `(ei, ej)` in element-index order.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize)> {
        let nx = self.nx;
        (0..self.nt).flat_map(move |ei| (0..nx).map(move |ej| (ei, ej)))
    }

    pub fn is_final_time(&self, node: usize) -> bool {
        node / (self.nx + 1) == self.nt
    }

    /// Nodes on the `t = T` edge.
    pub fn final_time_nodes(&self) -> Vec<usize> {
        (0..=self.nx).map(|j| self.node_index(self.nt, j)).collect()
    }
}

/// Builds a [`SpaceTimeMesh`]; see [`SpaceTimeMesh::new`].
pub fn build_mesh(
    nt: usize,
    nx: usize,
    t_final: f64,
    x_min: f64,
    x_max: f64,
) -> Result<SpaceTimeMesh> {
    SpaceTimeMesh::new(nt, nx, t_final, x_min, x_max)
}

/// Tensor quadrature on the reference square `[0, 1]^2` (first coordinate is
/// the local time).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// 2x2 Gauss-Legendre; exact for bicubic integrands.
    pub fn gauss_2x2() -> Self {
        let line = gauss_line_2();
        let mut points = Vec::with_capacity(4);
        let mut weights = Vec::with_capacity(4);
        for &(s, ws) in &line {
            for &(r, wr) in &line {
                points.push([s, r]);
                weights.push(ws * wr);
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Two-point Gauss rule on `[0, 1]` as `(point, weight)` pairs.
pub fn gauss_line_2() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

/// Number of quadrature points per element used throughout the crate.
pub const QUAD_POINTS: usize = 4;

/// Bilinear basis tabulated at the 2x2 Gauss points.
#[derive(Clone, Debug)]
pub(crate) struct ReferenceElement {
    pub rule: QuadratureRule,
    /// `phi[q][k]`: basis `k` at point `q`.
    pub phi: [[f64; 4]; QUAD_POINTS],
    /// Derivative in local time.
    pub dphi_ds: [[f64; 4]; QUAD_POINTS],
    /// Derivative in local space.
    pub dphi_dr: [[f64; 4]; QUAD_POINTS],
}

impl ReferenceElement {
    pub fn new() -> Self {
        let rule = QuadratureRule::gauss_2x2();
        let mut phi = [[0.0; 4]; QUAD_POINTS];
        let mut dphi_ds = [[0.0; 4]; QUAD_POINTS];
        let mut dphi_dr = [[0.0; 4]; QUAD_POINTS];
        for (q, &[s, r]) in rule.points.iter().enumerate() {
            phi[q] = bilinear(s, r);
            dphi_ds[q] = [-(1.0 - r), -r, 1.0 - r, r];
            dphi_dr[q] = [-(1.0 - s), 1.0 - s, -s, s];
        }
        Self {
            rule,
            phi,
            dphi_ds,
            dphi_dr,
        }
    }
}

/// Bilinear shape functions at local `(s, r)` in corner order
/// `(0,0), (0,1), (1,0), (1,1)`.
pub(crate) fn bilinear(s: f64, r: f64) -> [f64; 4] {
    [(1.0 - s) * (1.0 - r), (1.0 - s) * r, s * (1.0 - r), s * r]
}
