use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Point3, Transform};

/// Triangle mesh. Every face index is below `vertices.len()` and the three
/// indices of a face are distinct.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Appends `other`, keeping its vertices separate (no cross-item welding).
    pub fn append(&mut self, other: &Mesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
    }

    pub fn transformed(&self, t: &Transform) -> Mesh {
        let mut faces = self.faces.clone();
        if t.is_mirroring() {
            faces.iter_mut().for_each(|f| f.swap(1, 2));
        }
        Mesh { vertices: self.vertices.iter().map(|&p| t.apply(p)).collect(), faces }
    }

    /// Every undirected edge is used by exactly two faces.
    pub fn is_closed(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut edges: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().all(|&n| n == 2)
    }

    /// Signed volume from the divergence theorem (meaningful only when closed).
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) =
                    (self.vertices[f[0] as usize], self.vertices[f[1] as usize], self.vertices[f[2] as usize]);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }
}

/// Accumulates triangles for one representation item, welding vertices with
/// bit-identical coordinates.
#[derive(Default)]
pub(crate) struct MeshBuilder {
    mesh: Mesh,
    index: HashMap<[u64; 3], u32>,
}

impl MeshBuilder {
    pub(crate) fn vertex(&mut self, p: Point3) -> u32 {
        // -0.0 and 0.0 denote the same point
        let key = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
        let next = self.mesh.vertices.len() as u32;
        *self.index.entry(key).or_insert_with(|| {
            self.mesh.vertices.push(p);
            next
        })
    }

    /// Adds a triangle; degenerate index triples are dropped.
    pub(crate) fn triangle(&mut self, a: u32, b: u32, c: u32) {
        if a != b && b != c && a != c {
            self.mesh.faces.push([a, b, c]);
        }
    }

    pub(crate) fn finish(self) -> Mesh {
        self.mesh
    }
}

/// A volume together with whether it is only an approximation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub approximate: bool,
}

/// Enclosed volume of a closed mesh; the bounding-box volume, flagged
/// approximate, for open or empty meshes.
pub fn mesh_volume(mesh: &Mesh) -> VolumeEstimate {
    if mesh.is_closed() {
        VolumeEstimate { value: mesh.signed_volume().abs(), approximate: false }
    } else {
        VolumeEstimate { value: mesh_aabb(mesh).map(|b| b.volume()).unwrap_or(0.0), approximate: true }
    }
}

pub fn mesh_aabb(mesh: &Mesh) -> Result<Aabb, GeometryError> {
    Aabb::from_points(mesh.vertices.iter().copied()).ok_or(GeometryError::EmptyMesh)
}

/// Arithmetic mean of the mesh vertices. Vertices are welded per
/// representation item, so shared corners count once per item.
pub fn vertex_mean(mesh: &Mesh) -> Result<Point3, GeometryError> {
    if mesh.vertices.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let sum = mesh.vertices.iter().fold(Point3::ORIGIN, |s, &p| s + p);
    Ok(sum * (1.0 / mesh.vertices.len() as f64))
}

#[cfg(test)]
pub(crate) fn unit_cube() -> Mesh {
    let mut b = MeshBuilder::default();
    let v: Vec<u32> =
        (0..8).map(|i| b.vertex(Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))).collect();
    // outward-facing quads as (a, b, c, d) counter-clockwise
    for q in [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]] {
        b.triangle(v[q[0]], v[q[1]], v[q[2]]);
        b.triangle(v[q[0]], v[q[2]], v[q[3]]);
    }
    b.finish()
}
