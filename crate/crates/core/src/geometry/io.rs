//! `cavitymesh 1` text format.
//!
//! ```text
//! cavitymesh 1
//! <nv> <nt> <nb>
//! x y z            (nv lines, 17 significant digits)
//! v0 v1 v2 v3      (nt lines, 0-based, positive orientation)
//! v0 v1 v2         (nb lines, outward orientation)
//! ```

use super::{Mesh, MeshError, Point};
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("cavitymesh 1\n");
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_tets(),
        mesh.boundary_facets().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z);
    }
    for t in mesh.tets() {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    for f in mesh.boundary_facets() {
        let _ = writeln!(s, "{} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh(mesh)).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mesh(&text)
}

fn fields<T: std::str::FromStr>(line: &str, lineno: usize, n: usize) -> Result<Vec<T>, MeshError> {
    let out: Vec<T> = line
        .split_whitespace()
        .map(|w| w.parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| MeshError::Parse {
            line: lineno,
            msg: format!("cannot parse {line:?}"),
        })?;
    if out.len() != n {
        return Err(MeshError::Parse {
            line: lineno,
            msg: format!("expected {n} fields, found {}", out.len()),
        });
    }
    Ok(out)
}

pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "cavitymesh 1")) => {}
        Some((_, other)) => {
            return Err(MeshError::MalformedHeader(format!("unexpected {other:?}")))
        }
        None => return Err(MeshError::MalformedHeader("empty file".into())),
    }
    let (ln, counts) = lines
        .next()
        .ok_or_else(|| MeshError::MalformedHeader("missing count line".into()))?;
    let counts: Vec<usize> = fields(counts, ln, 3)
        .map_err(|_| MeshError::MalformedHeader(format!("bad count line {counts:?}")))?;
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| MeshError::Parse {
            line: 0,
            msg: format!("unexpected end of file while reading {what}"),
        })
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertices")?;
        let x: Vec<f64> = fields(l, ln, 3)?;
        vertices.push(Point::new(x[0], x[1], x[2]));
    }
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next("tets")?;
        let t: Vec<usize> = fields(l, ln, 4)?;
        tets.push([t[0], t[1], t[2], t[3]]);
    }
    let mut facets = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = next("boundary facets")?;
        let f: Vec<usize> = fields(l, ln, 3)?;
        facets.push([f[0], f[1], f[2]]);
    }
    Mesh::new(vertices, tets, facets)
}
