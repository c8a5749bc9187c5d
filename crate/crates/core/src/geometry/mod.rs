//! Tetrahedral meshes of the cavity: validation, generators, text I/O and measures.

mod generate;
mod io;

pub use generate::{
    generate_cylinder_mesh, generate_ellipsoid_mesh, generate_mesh, ELLIPSOID_BASE_LEVELS,
    MAX_CYLINDER_REFINEMENT, MAX_ELLIPSOID_REFINEMENT,
};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};

use nalgebra::Vector3;
use std::collections::HashMap;
use std::path::PathBuf;

pub type Point = Vector3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{what} {index} references vertex {vertex}, but the mesh has {nv} vertices")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        vertex: usize,
        nv: usize,
    },
    #[error("tet {tet} has non-positive signed volume {volume:e}")]
    NonPositiveVolume { tet: usize, volume: f64 },
    #[error("boundary facet {facet} {vertices:?} is not a face of exactly one tet")]
    DanglingFacet { facet: usize, vertices: [usize; 3] },
    #[error(
        "boundary is not closed: tet face {0:?} is neither interior nor listed as a boundary facet"
    )]
    OpenBoundary([usize; 3]),
    #[error("face {0:?} is shared by more than two tets")]
    NonManifoldFace([usize; 3]),
    #[error("boundary facet {0} is oriented inward")]
    InwardFacet(usize),
    #[error("refinement {requested} exceeds the maximum {max}")]
    RefinementTooLarge { requested: u32, max: u32 },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CavityShape {
    Ellipsoid { a: f64, b: f64, c: f64 },
    Cylinder { radius: f64, height: f64 },
    FromFile { path: PathBuf },
}

impl CavityShape {
    pub fn validate(&self) -> Result<(), MeshError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(MeshError::InvalidShape(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match self {
            CavityShape::Ellipsoid { a, b, c } => {
                positive("semi-axis a", *a)?;
                positive("semi-axis b", *b)?;
                positive("semi-axis c", *c)
            }
            CavityShape::Cylinder { radius, height } => {
                positive("radius", *radius)?;
                positive("height", *height)
            }
            CavityShape::FromFile { .. } => Ok(()),
        }
    }
}

/// Local vertex pairs of the six tet edges, in the order used for quadratic edge nodes.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Local faces of a tet, each listed so that its normal points away from the opposite vertex
/// when the tet is positively oriented.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// A validated tetrahedral mesh with outward boundary facets and an edge table.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    boundary_facets: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    tet_edges: Vec<[usize; 6]>,
}

pub fn signed_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

/// Area-weighted normal `½ (b − a) × (c − a)`.
pub fn facet_area_normal(a: &Point, b: &Point, c: &Point) -> Point {
    0.5 * (b - a).cross(&(c - a))
}

fn sorted3(f: [usize; 3]) -> [usize; 3] {
    let mut s = f;
    s.sort_unstable();
    s
}

impl Mesh {
    /// Builds a mesh from explicit data and checks every invariant.
    pub fn new(
        vertices: Vec<Point>,
        tets: Vec<[usize; 4]>,
        boundary_facets: Vec<[usize; 3]>,
    ) -> Result<Mesh, MeshError> {
        let nv = vertices.len();
        for (i, t) in tets.iter().enumerate() {
            for &v in t {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        what: "tet",
                        index: i,
                        vertex: v,
                        nv,
                    });
                }
            }
        }
        for (i, f) in boundary_facets.iter().enumerate() {
            for &v in f {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        what: "boundary facet",
                        index: i,
                        vertex: v,
                        nv,
                    });
                }
            }
        }
        for (i, t) in tets.iter().enumerate() {
            let vol = signed_volume(
                &vertices[t[0]],
                &vertices[t[1]],
                &vertices[t[2]],
                &vertices[t[3]],
            );
            if !(vol > 0.0) {
                return Err(MeshError::NonPositiveVolume {
                    tet: i,
                    volume: vol,
                });
            }
        }

        // face -> (owning tet, count)
        let mut faces: HashMap<[usize; 3], (usize, u32)> = HashMap::with_capacity(tets.len() * 3);
        for (ti, t) in tets.iter().enumerate() {
            for lf in TET_FACES {
                let key = sorted3([t[lf[0]], t[lf[1]], t[lf[2]]]);
                let e = faces.entry(key).or_insert((ti, 0));
                e.1 += 1;
                if e.1 > 2 {
                    return Err(MeshError::NonManifoldFace(key));
                }
            }
        }
        let mut listed: HashMap<[usize; 3], usize> = HashMap::with_capacity(boundary_facets.len());
        for (fi, f) in boundary_facets.iter().enumerate() {
            let key = sorted3(*f);
            let owner = match faces.get(&key) {
                Some(&(owner, 1)) => owner,
                _ => {
                    return Err(MeshError::DanglingFacet {
                        facet: fi,
                        vertices: *f,
                    })
                }
            };
            if listed.insert(key, fi).is_some() {
                return Err(MeshError::DanglingFacet {
                    facet: fi,
                    vertices: *f,
                });
            }
            let t = tets[owner];
            let tc = (vertices[t[0]] + vertices[t[1]] + vertices[t[2]] + vertices[t[3]]) / 4.0;
            let (a, b, c) = (&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            let fc = (a + b + c) / 3.0;
            if !(facet_area_normal(a, b, c).dot(&(fc - tc)) > 0.0) {
                return Err(MeshError::InwardFacet(fi));
            }
        }
        let mut open: Vec<[usize; 3]> = faces
            .iter()
            .filter(|(k, &(_, n))| n == 1 && !listed.contains_key(*k))
            .map(|(k, _)| *k)
            .collect();
        if !open.is_empty() {
            open.sort_unstable();
            return Err(MeshError::OpenBoundary(open[0]));
        }

        let (edges, tet_edges) = build_edges(&tets);
        Ok(Mesh {
            vertices,
            tets,
            boundary_facets,
            edges,
            tet_edges,
        })
    }

    /// Builds a mesh from tets alone: flips negatively oriented tets and extracts the
    /// boundary facets (faces used once) with outward orientation.
    pub fn from_tets(vertices: Vec<Point>, mut tets: Vec<[usize; 4]>) -> Result<Mesh, MeshError> {
        let nv = vertices.len();
        for (i, t) in tets.iter_mut().enumerate() {
            if let Some(&v) = t.iter().find(|&&v| v >= nv) {
                return Err(MeshError::IndexOutOfRange {
                    what: "tet",
                    index: i,
                    vertex: v,
                    nv,
                });
            }
            let vol = signed_volume(
                &vertices[t[0]],
                &vertices[t[1]],
                &vertices[t[2]],
                &vertices[t[3]],
            );
            if vol < 0.0 {
                t.swap(2, 3);
            } else if !(vol > 0.0) {
                return Err(MeshError::NonPositiveVolume {
                    tet: i,
                    volume: vol,
                });
            }
        }
        let mut faces: HashMap<[usize; 3], ([usize; 3], u32)> =
            HashMap::with_capacity(tets.len() * 3);
        for t in &tets {
            for lf in TET_FACES {
                let f = [t[lf[0]], t[lf[1]], t[lf[2]]];
                let e = faces.entry(sorted3(f)).or_insert((f, 0));
                e.1 += 1;
            }
        }
        let mut boundary: Vec<[usize; 3]> = faces
            .into_values()
            .filter(|&(_, n)| n == 1)
            .map(|(f, _)| f)
            .collect();
        boundary.sort_unstable_by_key(|f| sorted3(*f));
        Mesh::new(vertices, tets, boundary)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_facets(&self) -> &[[usize; 3]] {
        &self.boundary_facets
    }

    /// Sorted vertex pairs; edge `e` carries the quadratic node `nv + e`.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge indices of each tet in [`TET_EDGES`] order.
    pub fn tet_edges(&self) -> &[[usize; 6]] {
        &self.tet_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        let v = self.tets[t];
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
            self.vertices[v[3]],
        ]
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        signed_volume(&p[0], &p[1], &p[2], &p[3])
    }

    /// Vertex indices lying on some boundary facet, sorted.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut on = vec![false; self.vertices.len()];
        for f in &self.boundary_facets {
            for &v in f {
                on[v] = true;
            }
        }
        (0..on.len()).filter(|&v| on[v]).collect()
    }

    /// Volume from the divergence theorem, `⅓ ∮ x·n dS` over the boundary facets.
    pub fn boundary_volume(&self) -> f64 {
        self.boundary_facets
            .iter()
            .map(|f| {
                let (a, b, c) = (
                    &self.vertices[f[0]],
                    &self.vertices[f[1]],
                    &self.vertices[f[2]],
                );
                ((a + b + c) / 3.0).dot(&facet_area_normal(a, b, c)) / 3.0
            })
            .sum()
    }

    /// Same mesh with every vertex mapped through `f` (must preserve orientation).
    pub fn transformed(&self, f: impl Fn(&Point) -> Point) -> Result<Mesh, MeshError> {
        Mesh::new(
            self.vertices.iter().map(f).collect(),
            self.tets.clone(),
            self.boundary_facets.clone(),
        )
    }
}

fn build_edges(tets: &[[usize; 4]]) -> (Vec<[usize; 2]>, Vec<[usize; 6]>) {
    let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(tets.len() * 2);
    let mut edges = Vec::new();
    let mut tet_edges = Vec::with_capacity(tets.len());
    for t in tets {
        let mut te = [0usize; 6];
        for (k, &(i, j)) in TET_EDGES.iter().enumerate() {
            let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
            te[k] = *index.entry([a, b]).or_insert_with(|| {
                edges.push([a, b]);
                edges.len() - 1
            });
        }
        tet_edges.push(te);
    }
    (edges, tet_edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMeasures {
    pub volume: f64,
    pub centroid: Point,
    pub min_tet_volume: f64,
    pub max_tet_volume: f64,
    pub boundary_area: f64,
}

pub fn mesh_measures(mesh: &Mesh) -> MeshMeasures {
    let mut volume = 0.0;
    let mut moment = Point::zeros();
    let mut min_v = f64::INFINITY;
    let mut max_v = 0.0f64;
    for t in 0..mesh.num_tets() {
        let p = mesh.tet_points(t);
        let v = signed_volume(&p[0], &p[1], &p[2], &p[3]);
        volume += v;
        moment += v * (p[0] + p[1] + p[2] + p[3]) / 4.0;
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    let boundary_area = mesh
        .boundary_facets()
        .iter()
        .map(|f| {
            let v = mesh.vertices();
            facet_area_normal(&v[f[0]], &v[f[1]], &v[f[2]]).norm()
        })
        .sum();
    MeshMeasures {
        volume,
        centroid: moment / volume,
        min_tet_volume: min_v,
        max_tet_volume: max_v,
        boundary_area,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tet() -> Mesh {
        Mesh::from_tets(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn reference_tet_measures() {
        let m = unit_tet();
        let mm = mesh_measures(&m);
        assert!((mm.volume - 1.0 / 6.0).abs() < 1e-15);
        assert!((mm.centroid - Point::new(0.25, 0.25, 0.25)).norm() < 1e-15);
        assert_eq!(m.boundary_facets().len(), 4);
        assert_eq!(m.edges().len(), 6);
        let area = 1.5 + 3f64.sqrt() / 2.0;
        assert!((mm.boundary_area - area).abs() < 1e-14);
        assert!((m.boundary_volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn from_tets_flips_negative_orientation() {
        let m = Mesh::from_tets(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1, 3]],
        )
        .unwrap();
        assert!(m.tet_volume(0) > 0.0);
    }

    #[test]
    fn rejects_negative_volume() {
        let v = unit_tet().vertices().to_vec();
        let err = Mesh::new(v, vec![[0, 2, 1, 3]], vec![]).unwrap_err();
        assert!(matches!(err, MeshError::NonPositiveVolume { tet: 0, .. }));
    }

    #[test]
    fn rejects_dangling_and_open_facets() {
        let m = unit_tet();
        let mut facets = m.boundary_facets().to_vec();
        facets.push([0, 1, 2]);
        let err = Mesh::new(m.vertices().to_vec(), m.tets().to_vec(), facets).unwrap_err();
        assert!(matches!(err, MeshError::DanglingFacet { .. }));

        let mut facets = m.boundary_facets().to_vec();
        facets.pop();
        let err = Mesh::new(m.vertices().to_vec(), m.tets().to_vec(), facets).unwrap_err();
        assert!(matches!(err, MeshError::OpenBoundary(_)));
    }

    #[test]
    fn rejects_inward_facet_and_bad_index() {
        let m = unit_tet();
        let mut facets = m.boundary_facets().to_vec();
        facets[0].swap(1, 2);
        let err = Mesh::new(m.vertices().to_vec(), m.tets().to_vec(), facets).unwrap_err();
        assert!(matches!(err, MeshError::InwardFacet(0)));

        let err = Mesh::new(m.vertices().to_vec(), vec![[0, 1, 2, 7]], vec![]).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { vertex: 7, .. }));
    }

    #[test]
    fn shape_parameters_must_be_positive() {
        assert!(CavityShape::Ellipsoid {
            a: 1.0,
            b: 0.0,
            c: 1.0
        }
        .validate()
        .is_err());
        assert!(CavityShape::Cylinder {
            radius: 1.0,
            height: -1.0
        }
        .validate()
        .is_err());
        assert!(CavityShape::Cylinder {
            radius: 1.0,
            height: 2.0
        }
        .validate()
        .is_ok());
    }
}
