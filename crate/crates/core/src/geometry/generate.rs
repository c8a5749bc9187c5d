use super::{CavityShape, Mesh, MeshError, Point};
use std::collections::HashMap;

/// Uniform subdivision levels already applied at ellipsoid refinement 0.
pub const ELLIPSOID_BASE_LEVELS: u32 = 2;
/// Refinement `k` of the ellipsoid has `512·8^k` tets; 3 gives 262144.
pub const MAX_ELLIPSOID_REFINEMENT: u32 = 3;
/// Refinement `k` of the cylinder uses `2^(k+1)` rings; 4 gives ~0.3M tets.
pub const MAX_CYLINDER_REFINEMENT: u32 = 4;

pub fn generate_mesh(shape: &CavityShape, refinement: u32) -> Result<Mesh, MeshError> {
    shape.validate()?;
    match shape {
        CavityShape::Ellipsoid { a, b, c } => generate_ellipsoid_mesh(*a, *b, *c, refinement),
        CavityShape::Cylinder { radius, height } => {
            generate_cylinder_mesh(*radius, *height, refinement)
        }
        CavityShape::FromFile { path } => super::load_mesh(path),
    }
}

type Lattice = [i64; 3];
type LatticeTet = [Lattice; 4];

fn mid(a: Lattice, b: Lattice) -> Lattice {
    [(a[0] + b[0]) / 2, (a[1] + b[1]) / 2, (a[2] + b[2]) / 2]
}

/// One step of Bey's red refinement (eight children, bounded number of similarity classes).
fn red_refine(t: &LatticeTet) -> [LatticeTet; 8] {
    let [x0, x1, x2, x3] = *t;
    let (x01, x02, x03) = (mid(x0, x1), mid(x0, x2), mid(x0, x3));
    let (x12, x13, x23) = (mid(x1, x2), mid(x1, x3), mid(x2, x3));
    [
        [x0, x01, x02, x03],
        [x01, x1, x12, x13],
        [x02, x12, x2, x23],
        [x03, x13, x23, x3],
        [x01, x02, x03, x13],
        [x01, x02, x12, x13],
        [x02, x03, x13, x23],
        [x02, x12, x13, x23],
    ]
}

/// Ball template: the octahedron |x|₁ ≤ 1 as eight octant tets, red-refined, mapped radially
/// onto the unit ball (x ↦ x·|x|₁/|x|₂) and scaled by the semi-axes.
///
/// The template is mirror-symmetric in all three coordinate planes, so centroids and
/// off-diagonal inertia vanish to roundoff.
pub fn generate_ellipsoid_mesh(a: f64, b: f64, c: f64, refinement: u32) -> Result<Mesh, MeshError> {
    CavityShape::Ellipsoid { a, b, c }.validate()?;
    if refinement > MAX_ELLIPSOID_REFINEMENT {
        return Err(MeshError::RefinementTooLarge {
            requested: refinement,
            max: MAX_ELLIPSOID_REFINEMENT,
        });
    }
    let levels = refinement + ELLIPSOID_BASE_LEVELS;
    let n = 1i64 << levels;
    let mut octant: Vec<LatticeTet> = vec![[[0, 0, 0], [n, 0, 0], [0, n, 0], [0, 0, n]]];
    for _ in 0..levels {
        octant = octant.iter().flat_map(red_refine).collect();
    }

    let mut index: HashMap<Lattice, usize> = HashMap::new();
    let mut lattice: Vec<Lattice> = Vec::new();
    let mut tets = Vec::with_capacity(octant.len() * 8);
    for sx in [1i64, -1] {
        for sy in [1i64, -1] {
            for sz in [1i64, -1] {
                for t in &octant {
                    let mut tet = [0usize; 4];
                    for (k, p) in t.iter().enumerate() {
                        let q = [sx * p[0], sy * p[1], sz * p[2]];
                        tet[k] = *index.entry(q).or_insert_with(|| {
                            lattice.push(q);
                            lattice.len() - 1
                        });
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let scale = Point::new(a, b, c);
    let vertices = lattice
        .iter()
        .map(|q| {
            let x = Point::new(q[0] as f64, q[1] as f64, q[2] as f64) / n as f64;
            let l1 = x.abs().sum();
            let l2 = x.norm();
            let y = if l2 > 0.0 { x * (l1 / l2) } else { x };
            y.component_mul(&scale)
        })
        .collect();
    Mesh::from_tets(vertices, tets)
}

/// Cylinder of radius R and height h centred at the origin with axis e₃: a hexagonal-ring disk
/// triangulation (6j points on ring j, points on the circle) extruded in z-layers, each prism
/// cut into three tets by the global vertex order so faces match between neighbours.
pub fn generate_cylinder_mesh(
    radius: f64,
    height: f64,
    refinement: u32,
) -> Result<Mesh, MeshError> {
    CavityShape::Cylinder { radius, height }.validate()?;
    if refinement > MAX_CYLINDER_REFINEMENT {
        return Err(MeshError::RefinementTooLarge {
            requested: refinement,
            max: MAX_CYLINDER_REFINEMENT,
        });
    }
    let rings = 1usize << (refinement + 1);
    let dr = radius / rings as f64;
    let layers = ((height / dr).ceil() as usize).max(1);

    // Disk points: index 0 is the centre; ring j has 6j points starting at angle 0.
    let ring_start = |j: usize| if j == 0 { 0 } else { 1 + 3 * j * (j - 1) };
    let disk_point = |j: usize, s: usize, i: usize| -> usize {
        // point i (0..=j) of sector s on ring j
        if j == 0 {
            0
        } else {
            ring_start(j) + (s * j + i) % (6 * j)
        }
    };
    let n_disk = ring_start(rings + 1);
    let mut disk = vec![(0.0f64, 0.0f64); n_disk];
    for j in 1..=rings {
        // Points on ring j are placed on the circle of radius j·dr.
        for k in 0..6 * j {
            let ang = std::f64::consts::PI / 3.0 * (k as f64 / j as f64);
            let r = j as f64 * dr;
            disk[ring_start(j) + k] = (r * ang.cos(), r * ang.sin());
        }
    }
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for s in 0..6 {
        for j in 1..=rings {
            for i in 0..j {
                tris.push([
                    disk_point(j - 1, s, i),
                    disk_point(j, s, i),
                    disk_point(j, s, i + 1),
                ]);
                if i + 1 < j {
                    tris.push([
                        disk_point(j - 1, s, i),
                        disk_point(j, s, i + 1),
                        disk_point(j - 1, s, i + 1),
                    ]);
                }
            }
        }
    }

    let mut vertices = Vec::with_capacity(n_disk * (layers + 1));
    for l in 0..=layers {
        let z = -0.5 * height + height * l as f64 / layers as f64;
        for &(x, y) in &disk {
            vertices.push(Point::new(x, y, z));
        }
    }
    let mut tets = Vec::with_capacity(tris.len() * layers * 3);
    for l in 0..layers {
        let (lo, hi) = (l * n_disk, (l + 1) * n_disk);
        for t in &tris {
            let mut s = *t;
            s.sort_unstable();
            let [a, b, c] = s;
            tets.push([lo + a, lo + b, lo + c, hi + c]);
            tets.push([lo + a, lo + b, hi + b, hi + c]);
            tets.push([lo + a, hi + a, hi + b, hi + c]);
        }
    }
    Mesh::from_tets(vertices, tets)
}
