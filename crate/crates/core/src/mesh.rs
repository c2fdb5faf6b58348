//! Tetrahedral meshes: the structured unit-cube family, connectivity,
//! validation and a plain-text exchange format.
//!
//! Text format (lines starting with `#` are ignored):
//!
//! ```text
//! <vertex count>
//! x y z            (one line per vertex)
//! <tet count>
//! a b c d          (zero-based vertex indices, one line per tet)
//! ```

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::reference::{cross, sub, LOCAL_EDGES, LOCAL_FACES};

pub type Point = [f64; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Sorted vertex ids.
    pub vertices: [usize; 3],
    /// One entry for boundary faces, two for interior faces.
    pub tets: Vec<usize>,
    pub is_boundary: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Sorted vertex ids.
    pub vertices: [usize; 2],
    pub tets: Vec<usize>,
    pub is_boundary: bool,
}

#[derive(Clone, Debug, Default)]
pub struct TetMesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub faces: Vec<Face>,
    pub edges: Vec<Edge>,
    /// `tet_faces[t][i]` is the face opposite local vertex `i`.
    pub tet_faces: Vec<[usize; 4]>,
    /// `tet_edges[t][e]` follows [`LOCAL_EDGES`].
    pub tet_edges: Vec<[usize; 6]>,
    pub boundary_vertex: Vec<bool>,
}

impl TetMesh {
    /// Mesh with vertices and tets only; call [`TetMesh::derive_connectivity`]
    /// to populate faces and edges.
    pub fn from_raw(vertices: Vec<Point>, tets: Vec<[usize; 4]>) -> Self {
        Self {
            vertices,
            tets,
            ..Default::default()
        }
    }

    pub fn new(vertices: Vec<Point>, tets: Vec<[usize; 4]>) -> Result<Self> {
        Self::from_raw(vertices, tets).derive_connectivity()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn signed_volume(&self, t: usize) -> f64 {
        signed_volume(self.tet_points(t))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.signed_volume(t).abs()).sum()
    }

    pub fn num_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary).count()
    }

    /// Deduplicate faces and edges by sorted vertex ids and set boundary
    /// flags. A face referenced by more than two tets is rejected.
    pub fn derive_connectivity(mut self) -> Result<Self> {
        let nv = self.vertices.len();
        for (t, tet) in self.tets.iter().enumerate() {
            if let Some(&v) = tet.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "tet {t} references vertex {v} but the mesh has {nv} vertices"
                )));
            }
        }
        let mut face_ids: HashMap<[usize; 3], usize> = HashMap::new();
        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tet_faces = Vec::with_capacity(self.tets.len());
        let mut tet_edges = Vec::with_capacity(self.tets.len());
        for (t, tet) in self.tets.iter().enumerate() {
            let mut tf = [0usize; 4];
            for (i, local) in LOCAL_FACES.iter().enumerate() {
                let key = sorted3(local.map(|l| tet[l]));
                let id = *face_ids.entry(key).or_insert_with(|| {
                    faces.push(Face {
                        vertices: key,
                        tets: Vec::with_capacity(2),
                        is_boundary: false,
                    });
                    faces.len() - 1
                });
                faces[id].tets.push(t);
                if faces[id].tets.len() > 2 {
                    return Err(Error::NonManifold {
                        face: key,
                        count: faces[id].tets.len(),
                    });
                }
                tf[i] = id;
            }
            let mut te = [0usize; 6];
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = sorted2([tet[*a], tet[*b]]);
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: key,
                        tets: Vec::new(),
                        is_boundary: false,
                    });
                    edges.len() - 1
                });
                edges[id].tets.push(t);
                te[e] = id;
            }
            tet_faces.push(tf);
            tet_edges.push(te);
        }
        let mut boundary_vertex = vec![false; nv];
        for f in faces.iter_mut() {
            f.is_boundary = f.tets.len() == 1;
            if f.is_boundary {
                for &v in &f.vertices {
                    boundary_vertex[v] = true;
                }
                let [a, b, c] = f.vertices;
                for key in [sorted2([a, b]), sorted2([a, c]), sorted2([b, c])] {
                    edges[edge_ids[&key]].is_boundary = true;
                }
            }
        }
        self.faces = faces;
        self.edges = edges;
        self.tet_faces = tet_faces;
        self.tet_edges = tet_edges;
        self.boundary_vertex = boundary_vertex;
        Ok(self)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
        }
        writeln!(w, "{}", self.tets.len())?;
        for t in &self.tets {
            writeln!(w, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|s| (i + 1, s)))
            .filter(|res| match res {
                Ok((_, s)) => {
                    let s = s.trim();
                    !s.is_empty() && !s.starts_with('#')
                }
                Err(_) => true,
            });
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some(Ok(v)) => Ok(v),
                Some(Err(e)) => Err(e.into()),
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of input, expected {what}"),
                }),
            }
        };
        let (line, s) = next("vertex count")?;
        let nv: usize = parse_field(line, s.trim())?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, s) = next("vertex coordinates")?;
            let vals = parse_fields::<f64>(line, &s, 3)?;
            vertices.push([vals[0], vals[1], vals[2]]);
        }
        let (line, s) = next("tet count")?;
        let nt: usize = parse_field(line, s.trim())?;
        let mut tets = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, s) = next("tet vertex indices")?;
            let vals = parse_fields::<usize>(line, &s, 4)?;
            tets.push([vals[0], vals[1], vals[2], vals[3]]);
        }
        Self::new(vertices, tets)
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str, count: usize) -> Result<Vec<T>> {
    let vals: Vec<T> = s
        .split_whitespace()
        .map(|f| parse_field(line, f))
        .collect::<Result<_>>()?;
    if vals.len() != count {
        return Err(Error::Parse {
            line,
            msg: format!("expected {count} fields, found {}", vals.len()),
        });
    }
    Ok(vals)
}

pub fn signed_volume(p: [Point; 4]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    let c = sub(p[3], p[0]);
    dot(a, cross(b, c)) / 6.0
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sorted3(mut v: [usize; 3]) -> [usize; 3] {
    v.sort_unstable();
    v
}

fn sorted2(v: [usize; 2]) -> [usize; 2] {
    if v[0] <= v[1] {
        v
    } else {
        [v[1], v[0]]
    }
}

/// Unit cube split into `n³` cells, each cut into 12 tetrahedra by its
/// center vertex. Every cell face is halved along the diagonal through its
/// lowest corner, so neighbouring cells agree on shared faces.
pub fn build_cube_mesh(n: usize) -> Result<TetMesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("cube mesh needs n >= 1".into()));
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let grid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np + n * n * n);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    let mut tets = Vec::with_capacity(12 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let center = vertices.len();
                vertices.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h]);
                let corner = |d: [usize; 3]| grid(i + d[0], j + d[1], k + d[2]);
                for axis in 0..3 {
                    let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
                    let (ua, va) = (ua.min(va), ua.max(va));
                    for side in 0..2 {
                        let at = |u: usize, v: usize| {
                            let mut d = [0usize; 3];
                            d[axis] = side;
                            d[ua] = u;
                            d[va] = v;
                            corner(d)
                        };
                        let (p00, p10, p01, p11) = (at(0, 0), at(1, 0), at(0, 1), at(1, 1));
                        for tri in [[p00, p10, p11], [p00, p11, p01]] {
                            let mut tet = [tri[0], tri[1], tri[2], center];
                            if signed_volume(tet.map(|v| vertices[v])) < 0.0 {
                                tet.swap(1, 2);
                            }
                            tets.push(tet);
                        }
                    }
                }
            }
        }
    }
    TetMesh::new(vertices, tets)
}

/// Mesh of refinement level `level >= 1`: `2^(level-1)` cells per axis.
pub fn level_mesh(level: usize) -> Result<TetMesh> {
    if level == 0 {
        return Err(Error::InvalidMesh("levels start at 1".into()));
    }
    build_cube_mesh(1 << (level - 1))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonFiniteVertex { vertex: usize },
    VertexOutOfRange { tet: usize, vertex: usize },
    NonPositiveVolume { tet: usize, volume: f64 },
    NonManifoldFace { face: [usize; 3], count: usize },
    FaceListMismatch { detail: String },
    BoundaryFlag { face: usize },
    SameSideNeighbours { face: [usize; 3], tets: [usize; 2] },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFiniteVertex { vertex } => write!(f, "vertex {vertex} has non-finite coordinates"),
            Violation::VertexOutOfRange { tet, vertex } => {
                write!(f, "tet {tet} references missing vertex {vertex}")
            }
            Violation::NonPositiveVolume { tet, volume } => {
                write!(f, "tet {tet} has non-positive signed volume {volume:e}")
            }
            Violation::NonManifoldFace { face, count } => {
                write!(f, "face {face:?} is shared by {count} tets")
            }
            Violation::FaceListMismatch { detail } => write!(f, "face list inconsistent: {detail}"),
            Violation::BoundaryFlag { face } => write!(f, "face {face} has a wrong boundary flag"),
            Violation::SameSideNeighbours { face, tets } => write!(
                f,
                "tets {} and {} lie on the same side of shared face {face:?}",
                tets[0], tets[1]
            ),
        }
    }
}

/// All invariant violations of `mesh`. Face multiplicities are recounted from
/// the tet list, so this also diagnoses meshes whose connectivity could not
/// be derived.
pub fn validate(mesh: &TetMesh) -> Vec<Violation> {
    let mut out = Vec::new();
    for (v, p) in mesh.vertices.iter().enumerate() {
        if p.iter().any(|c| !c.is_finite()) {
            out.push(Violation::NonFiniteVertex { vertex: v });
        }
    }
    let nv = mesh.vertices.len();
    let mut usable = vec![true; mesh.tets.len()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        for &v in tet {
            if v >= nv {
                out.push(Violation::VertexOutOfRange { tet: t, vertex: v });
                usable[t] = false;
            }
        }
        if usable[t] {
            let vol = mesh.signed_volume(t);
            if vol.is_nan() || vol <= 0.0 {
                out.push(Violation::NonPositiveVolume { tet: t, volume: vol });
            }
        }
    }
    let mut incidence: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        if !usable[t] {
            continue;
        }
        for (i, local) in LOCAL_FACES.iter().enumerate() {
            incidence
                .entry(sorted3(local.map(|l| tet[l])))
                .or_default()
                .push((t, i));
        }
    }
    let mut keys: Vec<_> = incidence.keys().copied().collect();
    keys.sort_unstable();
    for key in &keys {
        let inc = &incidence[key];
        if inc.len() > 2 {
            out.push(Violation::NonManifoldFace {
                face: *key,
                count: inc.len(),
            });
        } else if inc.len() == 2 {
            // opposite vertices must lie on opposite sides of the face
            let side = |(t, i): (usize, usize)| {
                let tet = mesh.tets[t];
                let [a, b, c] = key.map(|v| mesh.vertices[v]);
                let n = cross(sub(b, a), sub(c, a));
                dot(n, sub(mesh.vertices[tet[i]], a))
            };
            if side(inc[0]) * side(inc[1]) >= 0.0 {
                out.push(Violation::SameSideNeighbours {
                    face: *key,
                    tets: [inc[0].0, inc[1].0],
                });
            }
        }
    }
    if !mesh.faces.is_empty() || !mesh.tet_faces.is_empty() {
        if mesh.faces.len() != keys.len() {
            out.push(Violation::FaceListMismatch {
                detail: format!("{} stored faces, {} distinct tet faces", mesh.faces.len(), keys.len()),
            });
        }
        for (id, f) in mesh.faces.iter().enumerate() {
            match incidence.get(&f.vertices) {
                None => out.push(Violation::FaceListMismatch {
                    detail: format!("stored face {id} {:?} is not a tet face", f.vertices),
                }),
                Some(inc) => {
                    if f.is_boundary != (inc.len() == 1) || f.tets.len() != inc.len() {
                        out.push(Violation::BoundaryFlag { face: id });
                    }
                }
            }
        }
    }
    out
}
