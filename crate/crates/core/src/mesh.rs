//! Tetrahedral meshes of the unit cube and the unit ball.
//!
//! Edges are stored as sorted vertex pairs; an edge's intrinsic direction runs
//! from its lower to its higher vertex index, and every tetrahedron records
//! the sign of each of its six local edges relative to that direction.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, centroid, dot, midpoint, norm, scale, signed_volume, sub, Point};

/// Local vertex pairs of the six tetrahedron edges.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// How boundary vertices created by refinement are placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryShape {
    /// New boundary vertices stay at edge midpoints.
    Polyhedral,
    /// New boundary vertices are projected onto the unit sphere.
    UnitSphere,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    tets: Vec<[usize; 4]>,
    region: Vec<i32>,
    edges: Vec<[usize; 2]>,
    tet_edges: Vec<[(usize, f64); 6]>,
    boundary_faces: Vec<[usize; 3]>,
    boundary_face_tet: Vec<usize>,
    volumes: Vec<f64>,
    shape: BoundaryShape,
}

impl Mesh {
    /// Builds a mesh from raw arrays, reorienting negatively oriented
    /// tetrahedra. Edges and boundary faces are derived.
    pub fn new(vertices: Vec<Point>, tets: Vec<[usize; 4]>, region: Vec<i32>) -> Result<Self> {
        Self::build(vertices, tets, region, true, None)
    }

    fn build(
        vertices: Vec<Point>,
        mut tets: Vec<[usize; 4]>,
        region: Vec<i32>,
        reorient: bool,
        shape: Option<BoundaryShape>,
    ) -> Result<Self> {
        if region.len() != tets.len() {
            return Err(Error::MalformedMesh(format!(
                "{} region tags for {} tetrahedra",
                region.len(),
                tets.len()
            )));
        }
        if tets.is_empty() {
            return Err(Error::MalformedMesh("mesh has no tetrahedra".into()));
        }
        let nv = vertices.len();
        let mut volumes = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            if tet.iter().any(|&v| v >= nv) {
                return Err(Error::MalformedMesh(format!(
                    "tetrahedron {t} references a missing vertex"
                )));
            }
            let p = tet.map(|v| vertices[v]);
            let mut vol = signed_volume(p[0], p[1], p[2], p[3]);
            if vol < 0.0 && reorient {
                tet.swap(2, 3);
                vol = -vol;
            }
            if vol <= 0.0 || !vol.is_finite() {
                return Err(Error::MalformedMesh(format!(
                    "tetrahedron {t} has signed volume {vol:e}"
                )));
            }
            volumes.push(vol);
        }

        let mut edges: Vec<[usize; 2]> = tets
            .iter()
            .flat_map(|t| LOCAL_EDGES.iter().map(move |&(a, b)| sorted2(t[a], t[b])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let edge_index = |a: usize, b: usize| edges.binary_search(&sorted2(a, b)).expect("edge present");
        let tet_edges = tets
            .iter()
            .map(|t| {
                LOCAL_EDGES.map(|(a, b)| {
                    let sign = if t[a] < t[b] { 1.0 } else { -1.0 };
                    (edge_index(t[a], t[b]), sign)
                })
            })
            .collect();

        let mut face_count: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for k in 0..4 {
                let key = sorted3(face_of(tet, k));
                face_count.entry(key).and_modify(|e| e.0 += 1).or_insert((1, t));
            }
        }
        if let Some((f, _)) = face_count.iter().find(|(_, &(c, _))| c > 2) {
            return Err(Error::MalformedMesh(format!(
                "face {f:?} shared by more than two tetrahedra"
            )));
        }
        let mut boundary_faces = Vec::new();
        let mut boundary_face_tet = Vec::new();
        for (t, tet) in tets.iter().enumerate() {
            for k in 0..4 {
                let face = face_of(tet, k);
                if face_count[&sorted3(face)].0 == 1 {
                    // face_of lists the face so that its right-hand normal
                    // points away from the opposite vertex of a positive tet.
                    boundary_faces.push(face);
                    boundary_face_tet.push(t);
                }
            }
        }

        let mut mesh = Self {
            vertices,
            tets,
            region,
            edges,
            tet_edges,
            boundary_faces,
            boundary_face_tet,
            volumes,
            shape: BoundaryShape::Polyhedral,
        };
        mesh.shape = match shape {
            Some(s) => s,
            None => {
                if mesh
                    .boundary_vertices()
                    .iter()
                    .all(|&v| (norm(mesh.vertices[v]) - 1.0).abs() < 1e-12)
                {
                    BoundaryShape::UnitSphere
                } else {
                    BoundaryShape::Polyhedral
                }
            }
        };
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn region(&self) -> &[i32] {
        &self.region
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge index and orientation sign of each local edge.
    pub fn tet_edges(&self) -> &[[(usize, f64); 6]] {
        &self.tet_edges
    }

    /// Outward-oriented boundary triangles (volume vertex indices).
    pub fn boundary_faces(&self) -> &[[usize; 3]] {
        &self.boundary_faces
    }

    pub fn boundary_face_tet(&self) -> &[usize] {
        &self.boundary_face_tet
    }

    /// Positive volume of every tetrahedron.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn shape(&self) -> BoundaryShape {
        self.shape
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn total_volume(&self) -> f64 {
        crate::sparse::pairwise_sum(&self.volumes)
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_centroid(&self, t: usize) -> Point {
        centroid(&self.tet_points(t))
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&sorted2(a, b)).ok()
    }

    /// Sorted list of vertices on the boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_faces.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for &v in self.boundary_faces.iter().flatten() {
            mask[v] = true;
        }
        mask
    }

    /// Sorted list of edges lying on the boundary surface.
    pub fn boundary_edges(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self
            .boundary_faces
            .iter()
            .flat_map(|f| [(0, 1), (1, 2), (0, 2)].map(|(a, b)| self.edge_index(f[a], f[b]).unwrap()))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn boundary_edge_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.edges.len()];
        for e in self.boundary_edges() {
            mask[e] = true;
        }
        mask
    }

    /// `V - E + F` of the boundary surface.
    pub fn boundary_euler_characteristic(&self) -> i64 {
        self.boundary_vertices().len() as i64 - self.boundary_edges().len() as i64 + self.boundary_faces.len() as i64
    }

    /// Every tetrahedron with positive volume, every face shared by at most
    /// two tetrahedra, and outward boundary orientation.
    pub fn check_invariants(&self) -> Result<()> {
        for (t, tet) in self.tets.iter().enumerate() {
            let p = tet.map(|v| self.vertices[v]);
            if signed_volume(p[0], p[1], p[2], p[3]) <= 0.0 {
                return Err(Error::MalformedMesh(format!("tetrahedron {t} not positively oriented")));
            }
        }
        for (f, face) in self.boundary_faces.iter().enumerate() {
            let p = face.map(|v| self.vertices[v]);
            let n = geometry::cross(sub(p[1], p[0]), sub(p[2], p[0]));
            let c = centroid(&p);
            let ct = self.tet_centroid(self.boundary_face_tet[f]);
            if dot(n, sub(c, ct)) <= 0.0 {
                return Err(Error::MalformedMesh(format!(
                    "boundary face {f} is not outward oriented"
                )));
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> MeshFile {
        MeshFile {
            version: 1,
            vertices: self.vertices.clone(),
            tets: self.tets.clone(),
            region: self.region.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: MeshFile = serde_json::from_str(s)?;
        file.into_mesh()
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk mesh document. Edges and boundary are recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub version: u32,
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub region: Vec<i32>,
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<Mesh> {
        if self.version != 1 {
            return Err(Error::Config(format!("unsupported mesh version {}", self.version)));
        }
        Mesh::new(self.vertices, self.tets, self.region)
    }
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Face opposite local vertex `k`, ordered so that for a positively oriented
/// tetrahedron its right-hand normal points outward.
fn face_of(t: &[usize; 4], k: usize) -> [usize; 3] {
    match k {
        0 => [t[1], t[2], t[3]],
        1 => [t[0], t[3], t[2]],
        2 => [t[0], t[1], t[3]],
        _ => [t[0], t[2], t[1]],
    }
}

/// Structured mesh of `[0,1]^3` with `n^3` subcubes, each split into six
/// tetrahedra sharing the main diagonal (Kuhn subdivision).
pub fn generate_cube_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("cube mesh needs n >= 1".into()));
    }
    let m = n + 1;
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [idx(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let region = vec![0; tets.len()];
    Mesh::build(vertices, tets, region, true, Some(BoundaryShape::Polyhedral))
}

/// Unit ball mesh. Level 0 is the octahedron around the origin subdivided
/// once (64 tetrahedra); each further level is one uniform refinement.
/// Boundary vertices are projected to the unit sphere at every step.
pub fn generate_ball_mesh(level: usize) -> Result<Mesh> {
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    for axis in 0..3 {
        for s in [1.0, -1.0] {
            let mut p = [0.0; 3];
            p[axis] = s;
            vertices.push(p);
        }
    }
    // vertex 1 + 2*axis is +e_axis, 2 + 2*axis is -e_axis
    let mut tets = Vec::new();
    for sx in 0..2 {
        for sy in 0..2 {
            for sz in 0..2 {
                tets.push([0, 1 + sx, 3 + sy, 5 + sz]);
            }
        }
    }
    let region = vec![0; tets.len()];
    let mut mesh = Mesh::build(vertices, tets, region, true, Some(BoundaryShape::UnitSphere))?;
    for _ in 0..=level {
        mesh = refine_uniform(&mesh)?;
    }
    Ok(mesh)
}

/// Red (1:8) refinement. The inner octahedron of each tetrahedron is split
/// along its shortest diagonal. Region tags are inherited and, for ball
/// meshes, new boundary vertices are projected onto the unit sphere.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.num_vertices();
    let boundary_edge = mesh.boundary_edge_mask();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(
        mesh.edges
            .iter()
            .map(|&[a, b]| midpoint(mesh.vertices[a], mesh.vertices[b])),
    );
    let mut tets = Vec::with_capacity(8 * mesh.num_tets());
    let mut region = Vec::with_capacity(8 * mesh.num_tets());
    for (t, tet) in mesh.tets.iter().enumerate() {
        let te = &mesh.tet_edges[t];
        // midpoint vertex of local edge (a, b)
        let m = |a: usize, b: usize| {
            let k = LOCAL_EDGES.iter().position(|&e| e == (a.min(b), a.max(b))).unwrap();
            nv + te[k].0
        };
        let (m01, m02, m03, m12, m13, m23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
        let [v0, v1, v2, v3] = *tet;
        let mut children = vec![
            [v0, m01, m02, m03],
            [m01, v1, m12, m13],
            [m02, m12, v2, m23],
            [m03, m13, m23, v3],
        ];
        let diagonals = [
            (m01, m23, [m02, m03, m13, m12]),
            (m02, m13, [m01, m03, m23, m12]),
            (m03, m12, [m01, m02, m23, m13]),
        ];
        let len = |a: usize, b: usize| norm(sub(vertices[a], vertices[b]));
        let mut best = 0;
        for d in 1..3 {
            if len(diagonals[d].0, diagonals[d].1) < len(diagonals[best].0, diagonals[best].1) {
                best = d;
            }
        }
        let (a, b, ring) = diagonals[best];
        for k in 0..4 {
            children.push([a, b, ring[k], ring[(k + 1) % 4]]);
        }
        for mut c in children {
            let p = c.map(|v| vertices[v]);
            if signed_volume(p[0], p[1], p[2], p[3]) < 0.0 {
                c.swap(2, 3);
            }
            tets.push(c);
            region.push(mesh.region[t]);
        }
    }
    if mesh.shape == BoundaryShape::UnitSphere {
        for (e, &on_boundary) in boundary_edge.iter().enumerate() {
            if on_boundary {
                let p = vertices[nv + e];
                vertices[nv + e] = scale(p, 1.0 / norm(p));
            }
        }
    }
    Mesh::build(vertices, tets, region, false, Some(mesh.shape))
}

/// Triangulated boundary surface with per-triangle geometry.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    /// Volume index of every surface vertex (sorted).
    pub vertices: Vec<usize>,
    /// Surface index of every volume vertex, `usize::MAX` for interior ones.
    pub surface_index: Vec<usize>,
    /// Triangles in surface vertex indices, outward oriented.
    pub triangles: Vec<[usize; 3]>,
    /// Triangles in volume vertex indices.
    pub volume_triangles: Vec<[usize; 3]>,
    pub normals: Vec<Point>,
    pub areas: Vec<f64>,
    /// Orthonormal tangent frame per triangle.
    pub tangents: Vec<[Point; 2]>,
    /// Surface gradients of the three barycentric coordinates per triangle.
    pub gradients: Vec<[Point; 3]>,
}

impl SurfaceMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        crate::sparse::pairwise_sum(&self.areas)
    }

    /// Lumped (row-sum) P1 mass of each surface vertex.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                m[v] += self.areas[t] / 3.0;
            }
        }
        m
    }
}

/// Extracts the closed, outward-oriented boundary surface of a mesh.
pub fn extract_boundary(mesh: &Mesh) -> Result<SurfaceMesh> {
    let vertices = mesh.boundary_vertices();
    let mut surface_index = vec![usize::MAX; mesh.num_vertices()];
    for (i, &v) in vertices.iter().enumerate() {
        surface_index[v] = i;
    }
    let mut edge_use: HashMap<[usize; 2], usize> = HashMap::new();
    for f in mesh.boundary_faces() {
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            *edge_use.entry(sorted2(f[a], f[b])).or_insert(0) += 1;
        }
    }
    if let Some((e, c)) = edge_use.iter().find(|(_, &c)| c != 2) {
        return Err(Error::MalformedMesh(format!(
            "surface edge {e:?} has {c} incident triangles; boundary is not closed"
        )));
    }
    let n = mesh.boundary_faces().len();
    let mut s = SurfaceMesh {
        vertices,
        surface_index,
        triangles: Vec::with_capacity(n),
        volume_triangles: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        areas: Vec::with_capacity(n),
        tangents: Vec::with_capacity(n),
        gradients: Vec::with_capacity(n),
    };
    for (f, face) in mesh.boundary_faces().iter().enumerate() {
        let p = face.map(|v| mesh.vertices[v]);
        let (grads, normal, area) = geometry::triangle_gradients(p);
        if !(area > 0.0) {
            return Err(Error::MalformedMesh(format!("boundary triangle {f} has zero area")));
        }
        let outward = dot(normal, sub(centroid(&p), mesh.tet_centroid(mesh.boundary_face_tet[f])));
        if outward <= 0.0 {
            return Err(Error::MalformedMesh(format!(
                "boundary triangle {f} is inward oriented"
            )));
        }
        let t1 = {
            let e = sub(p[1], p[0]);
            scale(e, 1.0 / norm(e))
        };
        let t2 = geometry::cross(normal, t1);
        s.triangles.push(face.map(|v| s.surface_index[v]));
        s.volume_triangles.push(*face);
        s.normals.push(normal);
        s.areas.push(area);
        s.tangents.push([t1, t2]);
        s.gradients.push(grads);
    }
    Ok(s)
}
