//! Points, bounding boxes, meshes and the bounding-box adjacency test.

mod mesh;
mod repr;
mod transform;
mod triangulate;

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use mesh::{mesh_aabb, mesh_volume, vertex_mean, Mesh, VolumeEstimate};
pub use repr::{mesh_from_representation, BuiltMesh};
pub use transform::Transform;
pub use triangulate::triangulate_polygon;

/// A point or vector in meters.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Point3::new(
            v.first().copied().unwrap_or(0.0),
            v.get(1).copied().unwrap_or(0.0),
            v.get(2).copied().unwrap_or(0.0),
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > 1e-12 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn min(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Index<usize> for Point3 {
    type Output = f64;
    fn index(&self, axis: usize) -> &f64 {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Axis-aligned bounding box. `min <= max` on every axis.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// Builds a box, rejecting inverted or non-finite corners.
    pub fn new(min: Point3, max: Point3) -> Result<Self, GeometryError> {
        let ordered = (0..3).all(|k| min[k] <= max[k]);
        if !ordered || !min.is_finite() || !max.is_finite() {
            return Err(GeometryError::InvalidAabb { min, max });
        }
        Ok(Aabb { min, max })
    }

    pub fn point(p: Point3) -> Self {
        Aabb { min: p, max: p }
    }

    /// Smallest box holding every point; `None` for an empty iterator.
    pub fn from_points(points: impl IntoIterator<Item = Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Aabb::point(first), |b, p| Aabb { min: b.min.min(p), max: b.max.max(p) }))
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains_point(&self, p: Point3) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn translated(&self, v: Point3) -> Aabb {
        Aabb { min: self.min + v, max: self.max + v }
    }
}

/// Slack used by the adjacency test, in meters.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance(f64);

impl Tolerance {
    pub const DEFAULT: Tolerance = Tolerance(0.05);

    pub fn new(epsilon: f64) -> Result<Self, GeometryError> {
        if epsilon >= 0.0 && epsilon.is_finite() {
            Ok(Tolerance(epsilon))
        } else {
            Err(GeometryError::NegativeTolerance(epsilon))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::DEFAULT
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyKind {
    Intersect,
    Containment,
    FaceAdjacency,
    None,
}

/// `adjacent` is true exactly when `kind` is not [`AdjacencyKind::None`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyVerdict {
    pub adjacent: bool,
    pub kind: AdjacencyKind,
}

impl AdjacencyVerdict {
    fn of(kind: AdjacencyKind) -> Self {
        AdjacencyVerdict { adjacent: kind != AdjacencyKind::None, kind }
    }
}

/// Decides whether two boxes are connected.
///
/// With `containment` set, any overlap within `eps` counts (`Intersect`).
/// The separate containment branch follows the intersection branch and can
/// therefore never fire; it is kept so the test reads the same as its
/// published form. Face adjacency needs the faces on one axis within `eps`
/// and strict overlap, shrunk by `eps`, on both other axes.
pub fn boxes_adjacent(b1: &Aabb, b2: &Aabb, eps: Tolerance, containment: bool) -> AdjacencyVerdict {
    let e = eps.get();
    let (m1, big1) = (b1.min, b1.max);
    let (m2, big2) = (b2.min, b2.max);

    if containment {
        let intersects = (0..3).all(|i| big1[i] >= m2[i] - e && m1[i] <= big2[i] + e);
        if intersects {
            return AdjacencyVerdict::of(AdjacencyKind::Intersect);
        }
        let c1 = (0..3).all(|i| m1[i] <= m2[i] + e && big1[i] >= big2[i] - e);
        let c2 = (0..3).all(|i| m2[i] <= m1[i] + e && big2[i] >= big1[i] - e);
        if c1 || c2 {
            return AdjacencyVerdict::of(AdjacencyKind::Containment);
        }
    }

    for k in 0..3 {
        let touching = (big1[k] - m2[k]).abs() < e || (big2[k] - m1[k]).abs() < e;
        if touching {
            let overlap = (0..3).filter(|&j| j != k).all(|j| m1[j] < big2[j] - e && big1[j] > m2[j] + e);
            if overlap {
                return AdjacencyVerdict::of(AdjacencyKind::FaceAdjacency);
            }
        }
    }

    AdjacencyVerdict::of(AdjacencyKind::None)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("unsupported representation {0}")]
    UnsupportedRepresentation(String),
    #[error("malformed geometry at {entity}: {message}")]
    MalformedGeometry { entity: String, message: String },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("invalid bounding box {min} .. {max}")]
    InvalidAabb { min: Point3, max: Point3 },
    #[error("tolerance must be finite and non-negative, got {0}")]
    NegativeTolerance(f64),
}
