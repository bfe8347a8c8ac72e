use serde::{Deserialize, Serialize};

use super::{GeometryError, Point3};
use crate::step::{EntityId, StepFile};

/// Affine map `p -> origin + x*p.x + y*p.y + z*p.z`, translation in meters.
///
/// Transforms built from placements are rigid (orthonormal axes). Mapped
/// items may add a uniform or per-axis scale.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub x_axis: Point3,
    pub y_axis: Point3,
    pub z_axis: Point3,
    pub origin: Point3,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

/// Tolerance on the component of the reference direction orthogonal to the axis.
const GRAM_SCHMIDT_MIN: f64 = 1e-3;

impl Transform {
    pub const IDENTITY: Transform = Transform {
        x_axis: Point3::new(1.0, 0.0, 0.0),
        y_axis: Point3::new(0.0, 1.0, 0.0),
        z_axis: Point3::new(0.0, 0.0, 1.0),
        origin: Point3::ORIGIN,
    };

    pub fn translation(v: Point3) -> Self {
        Transform { origin: v, ..Transform::IDENTITY }
    }

    /// Right-handed frame from an axis (local Z) and a reference direction
    /// (local X), each defaulting to the global one.
    ///
    /// The reference direction is orthogonalized against the axis; `None` if
    /// either is degenerate or they are (nearly) parallel.
    pub fn from_axes(origin: Point3, axis: Option<Point3>, ref_direction: Option<Point3>) -> Option<Self> {
        let z = match axis {
            Some(a) => a.normalized()?,
            None => Point3::new(0.0, 0.0, 1.0),
        };
        let r = match ref_direction {
            Some(r) => r.normalized()?,
            None => {
                // default X, falling back when the axis itself points along X
                let x = Point3::new(1.0, 0.0, 0.0);
                if z.cross(x).norm() < GRAM_SCHMIDT_MIN {
                    Point3::new(0.0, 1.0, 0.0).cross(z)
                } else {
                    x
                }
            }
        };
        let x_raw = r - z * r.dot(z);
        if x_raw.norm() < GRAM_SCHMIDT_MIN {
            return None;
        }
        let x = x_raw.normalized()?;
        let y = z.cross(x);
        Some(Transform { x_axis: x, y_axis: y, z_axis: z, origin })
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        self.origin + self.x_axis * p.x + self.y_axis * p.y + self.z_axis * p.z
    }

    /// Applies only the linear part.
    pub fn apply_vector(&self, v: Point3) -> Point3 {
        self.x_axis * v.x + self.y_axis * v.y + self.z_axis * v.z
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Transform) -> Transform {
        Transform {
            x_axis: self.apply_vector(inner.x_axis),
            y_axis: self.apply_vector(inner.y_axis),
            z_axis: self.apply_vector(inner.z_axis),
            origin: self.apply(inner.origin),
        }
    }

    /// Row-major homogeneous matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let (x, y, z, o) = (self.x_axis, self.y_axis, self.z_axis, self.origin);
        [[x.x, y.x, z.x, o.x], [x.y, y.y, z.y, o.y], [x.z, y.z, z.z, o.z], [0.0, 0.0, 0.0, 1.0]]
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let (x, y, z) = (self.x_axis, self.y_axis, self.z_axis);
        [x.dot(x) - 1.0, y.dot(y) - 1.0, z.dot(z) - 1.0, x.dot(y), y.dot(z), x.dot(z)].iter().all(|d| d.abs() <= tol)
    }

    /// Whether the linear part flips orientation.
    pub fn is_mirroring(&self) -> bool {
        self.x_axis.cross(self.y_axis).dot(self.z_axis) < 0.0
    }
}

pub(crate) fn malformed(id: EntityId, message: impl Into<String>) -> GeometryError {
    GeometryError::MalformedGeometry { entity: id.to_string(), message: message.into() }
}

/// Reads `IFCCARTESIANPOINT` coordinates, scaled to meters.
pub(crate) fn read_point(file: &StepFile, id: EntityId, unit_scale: f64) -> Result<Point3, GeometryError> {
    let e = file.get(id).ok_or_else(|| malformed(id, "missing point"))?;
    if e.type_name != "IFCCARTESIANPOINT" {
        return Err(malformed(id, format!("expected IFCCARTESIANPOINT, found {}", e.type_name)));
    }
    let coords: Vec<f64> = e
        .attr_list(0)
        .ok_or_else(|| malformed(id, "point without coordinates"))?
        .iter()
        .filter_map(|v| v.as_f64())
        .collect();
    Ok(Point3::from_slice(&coords) * unit_scale)
}

/// Reads `IFCDIRECTION` ratios (not normalized, unitless).
pub(crate) fn read_direction(file: &StepFile, id: EntityId) -> Result<Point3, GeometryError> {
    let e = file.get(id).ok_or_else(|| malformed(id, "missing direction"))?;
    if e.type_name != "IFCDIRECTION" {
        return Err(malformed(id, format!("expected IFCDIRECTION, found {}", e.type_name)));
    }
    let ratios: Vec<f64> = e
        .attr_list(0)
        .ok_or_else(|| malformed(id, "direction without ratios"))?
        .iter()
        .filter_map(|v| v.as_f64())
        .collect();
    Ok(Point3::from_slice(&ratios))
}

/// Frame of an `IFCAXIS2PLACEMENT3D` or `IFCAXIS2PLACEMENT2D`.
pub(crate) fn axis2_placement(file: &StepFile, id: EntityId, unit_scale: f64) -> Result<Transform, GeometryError> {
    let e = file.get(id).ok_or_else(|| malformed(id, "missing placement"))?;
    let origin = match e.attr_ref(0) {
        Some(p) => read_point(file, p, unit_scale)?,
        None => Point3::ORIGIN,
    };
    let (axis, ref_dir) = match e.type_name.as_str() {
        "IFCAXIS2PLACEMENT3D" => (
            e.attr_ref(1).map(|d| read_direction(file, d)).transpose()?,
            e.attr_ref(2).map(|d| read_direction(file, d)).transpose()?,
        ),
        "IFCAXIS2PLACEMENT2D" => (None, e.attr_ref(1).map(|d| read_direction(file, d)).transpose()?),
        other => return Err(malformed(id, format!("unsupported placement {other}"))),
    };
    Transform::from_axes(origin, axis, ref_dir).ok_or_else(|| malformed(id, "degenerate placement axes"))
}

/// Frame of an `IFCCARTESIANTRANSFORMATIONOPERATOR3D` (optionally non-uniform).
pub(crate) fn transformation_operator(
    file: &StepFile,
    id: EntityId,
    unit_scale: f64,
) -> Result<Transform, GeometryError> {
    let e = file.get(id).ok_or_else(|| malformed(id, "missing operator"))?;
    let dir = |i: usize| e.attr_ref(i).map(|d| read_direction(file, d)).transpose();
    let (axis1, axis2) = (dir(0)?, dir(1)?);
    let origin = match e.attr_ref(2) {
        Some(p) => read_point(file, p, unit_scale)?,
        None => Point3::ORIGIN,
    };
    let scale = e.attr_f64(3).unwrap_or(1.0);
    let (axis3, scale2, scale3) = match e.type_name.as_str() {
        "IFCCARTESIANTRANSFORMATIONOPERATOR3D" => (dir(4)?, scale, scale),
        "IFCCARTESIANTRANSFORMATIONOPERATOR3DNONUNIFORM" => {
            (dir(4)?, e.attr_f64(5).unwrap_or(scale), e.attr_f64(6).unwrap_or(scale))
        }
        other => return Err(malformed(id, format!("unsupported operator {other}"))),
    };
    let z = axis3.unwrap_or(Point3::new(0.0, 0.0, 1.0));
    let x = axis1.unwrap_or(Point3::new(1.0, 0.0, 0.0));
    let frame =
        Transform::from_axes(origin, Some(z), Some(x)).ok_or_else(|| malformed(id, "degenerate operator axes"))?;
    // an explicit Axis2 opposite to Z x X mirrors the frame
    let y_sign = match axis2 {
        Some(a2) if a2.dot(frame.y_axis) < 0.0 => -1.0,
        _ => 1.0,
    };
    Ok(Transform {
        x_axis: frame.x_axis * scale,
        y_axis: frame.y_axis * (scale2 * y_sign),
        z_axis: frame.z_axis * scale3,
        origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn translations_compose() {
        let a = Transform::translation(Point3::new(0.0, 0.0, 2.7));
        let b = Transform::translation(Point3::new(1.0, 0.0, 0.0));
        let c = a.compose(&b);
        assert_eq!(c.apply(Point3::ORIGIN), Point3::new(1.0, 0.0, 2.7));
        assert_eq!(Transform::IDENTITY.compose(&c), c);
    }

    #[test]
    fn gram_schmidt_repairs_skewed_reference() {
        let t =
            Transform::from_axes(Point3::ORIGIN, Some(Point3::new(0.0, 0.0, 2.0)), Some(Point3::new(1.0, 0.0, 0.3)))
                .unwrap();
        assert!(t.is_orthonormal(1e-12));
        assert_abs_diff_eq!(t.x_axis.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_axes_rejected() {
        assert!(Transform::from_axes(
            Point3::ORIGIN,
            Some(Point3::new(0.0, 0.0, 1.0)),
            Some(Point3::new(0.0, 0.0, 1.0))
        )
        .is_none());
        assert!(Transform::from_axes(Point3::ORIGIN, Some(Point3::ORIGIN), None).is_none());
    }

    #[test]
    fn quarter_turn() {
        let t = Transform::from_axes(Point3::new(1.0, 0.0, 0.0), None, Some(Point3::new(0.0, 1.0, 0.0))).unwrap();
        let p = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        let m = t.to_matrix();
        assert_abs_diff_eq!(m[1][0], 1.0, epsilon = 1e-12);
        assert_eq!(m[3], [0.0, 0.0, 0.0, 1.0]);
    }
}
