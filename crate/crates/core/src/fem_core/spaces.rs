use super::quadrature::{tet_rule, QuadPoint};
use crate::geometry::{Mesh, Point, TET_EDGES};
use nalgebra::{Matrix3, Vector3};

/// Quadratic monomials `x_j x_k` of the pressure enrichment, as `(j, k)`.
pub const QUADRATIC_MONOMIALS: [(usize, usize); 6] =
    [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

pub fn quadratic_monomial(m: usize, x: &Point) -> f64 {
    let (j, k) = QUADRATIC_MONOMIALS[m];
    x[j] * x[k]
}

/// Pressure space paired with the P2 velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PressureSpace {
    /// Continuous P1 (Taylor–Hood).
    #[default]
    P1,
    /// P1 plus the six global quadratics `x_j x_k`. Centrifugal pressures `ρ|ω×x|²/2` are
    /// then representable, so discretely divergence-free fields are orthogonal to them.
    P1Quadratic,
}

impl std::str::FromStr for PressureSpace {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "p1" => Ok(PressureSpace::P1),
            "p1_quadratic" => Ok(PressureSpace::P1Quadratic),
            _ => Err(format!(
                "unknown pressure space {s:?} (expected p1|p1_quadratic)"
            )),
        }
    }
}

impl std::fmt::Display for PressureSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PressureSpace::P1 => "p1",
            PressureSpace::P1Quadratic => "p1_quadratic",
        })
    }
}

/// P2 velocity (vertex + edge-midpoint nodes, three components each) and P1 pressure,
/// optionally enriched with global quadratics.
///
/// Velocity dof of node `a`, component `i` is `3a + i`; nodes `0..nv` are the vertices and
/// `nv + e` is the midpoint of edge `e`. Pressure dof of vertex `c` is `num_velocity() + c`,
/// followed by the multiplier fixing the pressure mean and then the enrichment
/// coefficients.
#[derive(Debug, Clone)]
pub struct FunctionSpaces {
    pressure_space: PressureSpace,
    num_vertices: usize,
    num_edges: usize,
    nodes: Vec<Point>,
    tet_nodes: Vec<[usize; 10]>,
    boundary_node: Vec<bool>,
    boundary_nodes: Vec<usize>,
}

pub fn build_spaces(mesh: &Mesh) -> FunctionSpaces {
    build_spaces_with(mesh, PressureSpace::P1)
}

pub fn build_spaces_with(mesh: &Mesh, pressure_space: PressureSpace) -> FunctionSpaces {
    let nv = mesh.num_vertices();
    let ne = mesh.edges().len();
    let mut nodes = mesh.vertices().to_vec();
    nodes.extend(
        mesh.edges()
            .iter()
            .map(|e| 0.5 * (mesh.vertices()[e[0]] + mesh.vertices()[e[1]])),
    );
    let tet_nodes = mesh
        .tets()
        .iter()
        .zip(mesh.tet_edges())
        .map(|(t, te)| {
            let mut n = [0usize; 10];
            n[..4].copy_from_slice(t);
            for k in 0..6 {
                n[4 + k] = nv + te[k];
            }
            n
        })
        .collect();

    let mut boundary_node = vec![false; nv + ne];
    let edge_index: std::collections::HashMap<[usize; 2], usize> = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, i))
        .collect();
    for f in mesh.boundary_facets() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            boundary_node[a] = true;
            boundary_node[nv + edge_index[&[a.min(b), a.max(b)]]] = true;
        }
    }
    let boundary_nodes = (0..nv + ne).filter(|&n| boundary_node[n]).collect();
    FunctionSpaces {
        pressure_space,
        num_vertices: nv,
        num_edges: ne,
        nodes,
        tet_nodes,
        boundary_node,
        boundary_nodes,
    }
}

impl FunctionSpaces {
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Scalar P2 node count (vertices + edges).
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_velocity(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn num_pressure(&self) -> usize {
        self.num_vertices
    }

    pub fn pressure_space(&self) -> PressureSpace {
        self.pressure_space
    }

    /// Number of global quadratic pressure coefficients (0 or 6).
    pub fn num_enrichment(&self) -> usize {
        match self.pressure_space {
            PressureSpace::P1 => 0,
            PressureSpace::P1Quadratic => QUADRATIC_MONOMIALS.len(),
        }
    }

    /// Velocity + pressure + mean multiplier + enrichment.
    pub fn num_unknowns(&self) -> usize {
        self.num_velocity() + self.num_pressure() + 1 + self.num_enrichment()
    }

    pub fn enrichment_dof(&self, m: usize) -> usize {
        self.multiplier_dof() + 1 + m
    }

    pub fn pressure_dof(&self, vertex: usize) -> usize {
        self.num_velocity() + vertex
    }

    pub fn multiplier_dof(&self) -> usize {
        self.num_velocity() + self.num_pressure()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn tet_nodes(&self) -> &[[usize; 10]] {
        &self.tet_nodes
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.boundary_node[node]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Nodal interpolant of a vector field (exact for polynomials of degree ≤ 2).
    pub fn interpolate(&self, f: impl Fn(&Point) -> Vector3<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.num_velocity()];
        for (a, x) in self.nodes.iter().enumerate() {
            let v = f(x);
            out[3 * a..3 * a + 3].copy_from_slice(v.as_slice());
        }
        out
    }

    /// Interpolant of the rigid field ω×x.
    pub fn rigid(&self, omega: &Vector3<f64>) -> Vec<f64> {
        self.interpolate(|x| omega.cross(x))
    }

    /// P1 interpolant of a scalar field at the vertices.
    pub fn interpolate_pressure(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.nodes[..self.num_vertices].iter().map(f).collect()
    }
}

/// Constant per-tet data: volume and barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    pub grad_lambda: [Vector3<f64>; 4],
    pub points: [Point; 4],
}

impl TetGeometry {
    pub fn new(p: [Point; 4]) -> TetGeometry {
        let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
        let volume = j.determinant() / 6.0;
        let inv = j.try_inverse().expect("degenerate tet");
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        TetGeometry {
            volume,
            grad_lambda: [-(g1 + g2 + g3), g1, g2, g3],
            points: p,
        }
    }

    pub fn point(&self, bary: &[f64; 4]) -> Point {
        self.points[0] * bary[0]
            + self.points[1] * bary[1]
            + self.points[2] * bary[2]
            + self.points[3] * bary[3]
    }

    /// Gradients of the ten P2 basis functions at a barycentric point.
    pub fn p2_gradients(&self, bary: &[f64; 4]) -> [Vector3<f64>; 10] {
        let g = &self.grad_lambda;
        let mut out = [Vector3::zeros(); 10];
        for i in 0..4 {
            out[i] = g[i] * (4.0 * bary[i] - 1.0);
        }
        for (k, &(i, j)) in TET_EDGES.iter().enumerate() {
            out[4 + k] = (g[j] * bary[i] + g[i] * bary[j]) * 4.0;
        }
        out
    }
}

pub fn p2_values(bary: &[f64; 4]) -> [f64; 10] {
    let mut out = [0.0; 10];
    for i in 0..4 {
        out[i] = bary[i] * (2.0 * bary[i] - 1.0);
    }
    for (k, &(i, j)) in TET_EDGES.iter().enumerate() {
        out[4 + k] = 4.0 * bary[i] * bary[j];
    }
    out
}

/// The volume rule with P2 basis values cached at its points.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub points: Vec<QuadPoint<4>>,
    pub values: Vec<[f64; 10]>,
}

impl Default for ReferenceElement {
    fn default() -> Self {
        let points: Vec<_> = tet_rule().to_vec();
        let values = points.iter().map(|q| p2_values(&q.bary)).collect();
        ReferenceElement { points, values }
    }
}

pub fn tet_geometries(mesh: &Mesh) -> Vec<TetGeometry> {
    (0..mesh.num_tets())
        .map(|t| TetGeometry::new(mesh.tet_points(t)))
        .collect()
}

/// Gathers the ten nodal vectors of a velocity field on one tet.
pub fn local_vectors(u: &[f64], nodes: &[usize; 10]) -> [Vector3<f64>; 10] {
    let mut out = [Vector3::zeros(); 10];
    for (k, &n) in nodes.iter().enumerate() {
        out[k] = Vector3::new(u[3 * n], u[3 * n + 1], u[3 * n + 2]);
    }
    out
}

pub fn eval_field(vals: &[f64; 10], local: &[Vector3<f64>; 10]) -> Vector3<f64> {
    let mut s = Vector3::zeros();
    for k in 0..10 {
        s += local[k] * vals[k];
    }
    s
}

/// ∇u with entries (∇u)_{ij} = ∂_j u_i.
pub fn eval_gradient(grads: &[Vector3<f64>; 10], local: &[Vector3<f64>; 10]) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for k in 0..10 {
        m += local[k] * grads[k].transpose();
    }
    m
}
