//! Tessellation of the supported IFC shape representation items.

use super::mesh::MeshBuilder;
use super::transform::{axis2_placement, malformed, read_direction, read_point, transformation_operator};
use super::triangulate::triangulate_polygon;
use super::{GeometryError, Mesh, Point3, Transform};
use crate::step::{EntityId, StepEntity, StepFile, StepValue};

/// Mesh of one element in absolute meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuiltMesh {
    /// Items are welded individually and concatenated.
    pub mesh: Mesh,
    /// Set when a boolean result was replaced by its first operand.
    pub approximate: bool,
    /// Number of leaf representation items tessellated.
    pub items: usize,
}

/// Representation identifiers that never describe the solid body.
const NON_BODY: &[&str] = &["Box", "FootPrint", "Axis", "Annotation", "Profile", "Clearance", "Plan"];

/// Tessellates the body representation of a product.
///
/// `placement` is the absolute frame of the product (translation in meters);
/// `unit_scale` converts model lengths to meters.
pub fn mesh_from_representation(
    file: &StepFile,
    element: &StepEntity,
    placement: &Transform,
    unit_scale: f64,
) -> Result<BuiltMesh, GeometryError> {
    let shape_id =
        element.attr_ref(6).ok_or_else(|| GeometryError::UnsupportedRepresentation("no representation".into()))?;
    let shape = get(file, shape_id)?;
    let reps: Vec<&StepEntity> = shape
        .attr_ref_list(2)
        .into_iter()
        .filter_map(|id| file.get(id))
        .filter(|r| r.type_name == "IFCSHAPEREPRESENTATION")
        .collect();
    let identifier = |r: &StepEntity| r.attr_str(1).unwrap_or("").to_owned();
    let body = reps
        .iter()
        .find(|r| identifier(r) == "Body")
        .or_else(|| reps.iter().find(|r| !NON_BODY.contains(&identifier(r).as_str())))
        .ok_or_else(|| GeometryError::UnsupportedRepresentation("no body representation".into()))?;

    let mut ctx = Ctx { file, unit_scale, out: BuiltMesh::default() };
    for item in body.attr_ref_list(3) {
        ctx.item(item, placement, 0)?;
    }
    Ok(ctx.out)
}

fn get(file: &StepFile, id: EntityId) -> Result<&StepEntity, GeometryError> {
    file.get(id).ok_or_else(|| malformed(id, "missing entity"))
}

/// Mapped representations may nest; deeper chains are treated as cycles.
const MAX_DEPTH: usize = 16;

struct Ctx<'a> {
    file: &'a StepFile,
    unit_scale: f64,
    out: BuiltMesh,
}

impl Ctx<'_> {
    fn item(&mut self, id: EntityId, frame: &Transform, depth: usize) -> Result<(), GeometryError> {
        if depth > MAX_DEPTH {
            return Err(malformed(id, "representation nesting too deep"));
        }
        let e = get(self.file, id)?;
        match e.type_name.as_str() {
            "IFCEXTRUDEDAREASOLID" => self.push(self.extrusion(e, frame)?),
            "IFCFACETEDBREP" | "IFCFACETEDBREPWITHVOIDS" => {
                let mut b = MeshBuilder::default();
                let mut shells = vec![e.attr_ref(0).ok_or_else(|| malformed(id, "brep without shell"))?];
                if e.type_name == "IFCFACETEDBREPWITHVOIDS" {
                    shells.extend(e.attr_ref_list(1));
                }
                for shell in shells {
                    self.shell(&mut b, shell, frame)?;
                }
                self.push(b.finish());
            }
            "IFCSHELLBASEDSURFACEMODEL" | "IFCFACEBASEDSURFACEMODEL" => {
                let mut b = MeshBuilder::default();
                for shell in e.attr_ref_list(0) {
                    self.shell(&mut b, shell, frame)?;
                }
                self.push(b.finish());
            }
            "IFCPOLYGONALFACESET" => self.push(self.polygonal_face_set(e, frame)?),
            "IFCTRIANGULATEDFACESET" => self.push(self.triangulated_face_set(e, frame)?),
            "IFCMAPPEDITEM" => {
                let source = get(self.file, e.attr_ref(0).ok_or_else(|| malformed(id, "mapped item without source"))?)?;
                let origin = match source.attr_ref(0) {
                    Some(o) => axis2_placement(self.file, o, self.unit_scale)?,
                    None => Transform::IDENTITY,
                };
                let target = match e.attr_ref(1) {
                    Some(t) => transformation_operator(self.file, t, self.unit_scale)?,
                    None => Transform::IDENTITY,
                };
                let inner = frame.compose(&target).compose(&origin);
                let rep =
                    get(self.file, source.attr_ref(1).ok_or_else(|| malformed(id, "map without representation"))?)?;
                for sub in rep.attr_ref_list(3) {
                    self.item(sub, &inner, depth + 1)?;
                }
            }
            "IFCBOOLEANCLIPPINGRESULT" | "IFCBOOLEANRESULT" => {
                if e.attr_enum(0) != Some("DIFFERENCE") {
                    return Err(GeometryError::UnsupportedRepresentation(format!(
                        "{} with operator {}",
                        e.type_name,
                        e.attr_enum(0).unwrap_or("?")
                    )));
                }
                self.out.approximate = true;
                let first = e.attr_ref(1).ok_or_else(|| malformed(id, "boolean without first operand"))?;
                self.item(first, frame, depth + 1)?;
            }
            other => return Err(GeometryError::UnsupportedRepresentation(other.to_owned())),
        }
        Ok(())
    }

    fn push(&mut self, mesh: Mesh) {
        self.out.items += 1;
        self.out.mesh.append(&mesh);
    }

    fn extrusion(&self, e: &StepEntity, frame: &Transform) -> Result<Mesh, GeometryError> {
        let (outer, holes) =
            self.profile(e.attr_ref(0).ok_or_else(|| malformed(e.id, "extrusion without profile"))?)?;
        let position = match e.attr_ref(1) {
            Some(p) => axis2_placement(self.file, p, self.unit_scale)?,
            None => Transform::IDENTITY,
        };
        let direction =
            read_direction(self.file, e.attr_ref(2).ok_or_else(|| malformed(e.id, "extrusion without direction"))?)?
                .normalized()
                .ok_or_else(|| malformed(e.id, "zero extrusion direction"))?;
        let depth = e.attr_f64(3).ok_or_else(|| malformed(e.id, "extrusion without depth"))? * self.unit_scale;
        let t = frame.compose(&position);
        let offset = direction * depth;
        // upward extrusions keep the profile winding for the top cap
        let flip = (direction.z < 0.0) ^ t.is_mirroring();

        let mut b = MeshBuilder::default();
        let rings: Vec<&Vec<Point3>> = std::iter::once(&outer).chain(holes.iter()).collect();
        let bottom: Vec<Vec<u32>> = rings.iter().map(|r| r.iter().map(|&p| b.vertex(t.apply(p))).collect()).collect();
        let top: Vec<Vec<u32>> =
            rings.iter().map(|r| r.iter().map(|&p| b.vertex(t.apply(p + offset))).collect()).collect();
        let flat_bottom: Vec<u32> = bottom.iter().flatten().copied().collect();
        let flat_top: Vec<u32> = top.iter().flatten().copied().collect();
        let tri = |b: &mut MeshBuilder, x: u32, y: u32, z: u32| {
            if flip {
                b.triangle(x, z, y)
            } else {
                b.triangle(x, y, z)
            }
        };
        for [i, j, k] in triangulate_polygon(&outer, &holes) {
            tri(&mut b, flat_bottom[i], flat_bottom[k], flat_bottom[j]);
            tri(&mut b, flat_top[i], flat_top[j], flat_top[k]);
        }
        for (ring_b, ring_t) in bottom.iter().zip(&top) {
            let n = ring_b.len();
            for i in 0..n {
                let j = (i + 1) % n;
                tri(&mut b, ring_b[i], ring_b[j], ring_t[j]);
                tri(&mut b, ring_b[i], ring_t[j], ring_t[i]);
            }
        }
        Ok(b.finish())
    }

    /// Outer ring (counter-clockwise) and hole rings (clockwise) of a profile, in the
    /// profile plane with z = 0, meters.
    fn profile(&self, id: EntityId) -> Result<(Vec<Point3>, Vec<Vec<Point3>>), GeometryError> {
        let e = get(self.file, id)?;
        let (mut outer, mut holes) = match e.type_name.as_str() {
            "IFCRECTANGLEPROFILEDEF" => {
                let pos = match e.attr_ref(2) {
                    Some(p) => axis2_placement(self.file, p, self.unit_scale)?,
                    None => Transform::IDENTITY,
                };
                let hx = e.attr_f64(3).ok_or_else(|| malformed(id, "rectangle without XDim"))? * self.unit_scale / 2.0;
                let hy = e.attr_f64(4).ok_or_else(|| malformed(id, "rectangle without YDim"))? * self.unit_scale / 2.0;
                let corners = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)];
                (corners.iter().map(|&(x, y)| pos.apply(Point3::new(x, y, 0.0))).collect(), Vec::new())
            }
            "IFCARBITRARYCLOSEDPROFILEDEF" => {
                (self.curve(e.attr_ref(2).ok_or_else(|| malformed(id, "profile without curve"))?)?, Vec::new())
            }
            "IFCARBITRARYPROFILEDEFWITHVOIDS" => {
                let outer = self.curve(e.attr_ref(2).ok_or_else(|| malformed(id, "profile without curve"))?)?;
                let holes = e.attr_ref_list(3).into_iter().map(|c| self.curve(c)).collect::<Result<Vec<_>, _>>()?;
                (outer, holes)
            }
            other => return Err(GeometryError::UnsupportedRepresentation(other.to_owned())),
        };
        if signed_area_xy(&outer) < 0.0 {
            outer.reverse();
        }
        for h in holes.iter_mut().filter(|h| signed_area_xy(h) > 0.0) {
            h.reverse();
        }
        if outer.len() < 3 {
            return Err(malformed(id, "profile with fewer than three vertices"));
        }
        Ok((outer, holes))
    }

    /// Vertices of a closed polyline-type curve, without the repeated end point.
    fn curve(&self, id: EntityId) -> Result<Vec<Point3>, GeometryError> {
        let e = get(self.file, id)?;
        let mut pts = match e.type_name.as_str() {
            "IFCPOLYLINE" => e
                .attr_ref_list(0)
                .into_iter()
                .map(|p| read_point(self.file, p, self.unit_scale))
                .collect::<Result<Vec<_>, _>>()?,
            "IFCINDEXEDPOLYCURVE" => {
                let list = get(self.file, e.attr_ref(0).ok_or_else(|| malformed(id, "curve without points"))?)?;
                let coords = point_list(list, self.unit_scale);
                match e.attr_list(1) {
                    Some(segments) => {
                        let mut out = Vec::new();
                        for seg in segments {
                            let StepValue::Typed(kind, inner) = seg else {
                                return Err(malformed(id, "untyped curve segment"));
                            };
                            if kind != "IFCLINEINDEX" {
                                return Err(GeometryError::UnsupportedRepresentation(format!("{kind} segment")));
                            }
                            for idx in inner.as_list().unwrap_or(&[]).iter().filter_map(|v| v.as_f64()) {
                                let p = *coords
                                    .get((idx as usize).wrapping_sub(1))
                                    .ok_or_else(|| malformed(id, "curve index out of range"))?;
                                if out.last() != Some(&p) {
                                    out.push(p);
                                }
                            }
                        }
                        out
                    }
                    None => coords,
                }
            }
            other => return Err(GeometryError::UnsupportedRepresentation(other.to_owned())),
        };
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        Ok(pts)
    }

    fn shell(&self, b: &mut MeshBuilder, id: EntityId, frame: &Transform) -> Result<(), GeometryError> {
        let shell = get(self.file, id)?;
        for face_id in shell.attr_ref_list(0) {
            let face = get(self.file, face_id)?;
            let mut outer: Option<Vec<Point3>> = None;
            let mut holes = Vec::new();
            for bound_id in face.attr_ref_list(0) {
                let bound = get(self.file, bound_id)?;
                let lp = get(self.file, bound.attr_ref(0).ok_or_else(|| malformed(bound_id, "bound without loop"))?)?;
                if lp.type_name != "IFCPOLYLOOP" {
                    return Err(GeometryError::UnsupportedRepresentation(lp.type_name.clone()));
                }
                let mut ring = lp
                    .attr_ref_list(0)
                    .into_iter()
                    .map(|p| read_point(self.file, p, self.unit_scale).map(|q| frame.apply(q)))
                    .collect::<Result<Vec<_>, _>>()?;
                if bound.attr_enum(1) == Some("F") {
                    ring.reverse();
                }
                if bound.type_name == "IFCFACEOUTERBOUND" && outer.is_none() {
                    outer = Some(ring);
                } else {
                    holes.push(ring);
                }
            }
            let outer = match outer {
                Some(o) => o,
                None if !holes.is_empty() => holes.remove(0),
                None => continue,
            };
            let all: Vec<u32> = outer.iter().chain(holes.iter().flatten()).map(|&p| b.vertex(p)).collect();
            // rings are triangulated after transformation, so mirroring needs no fix-up
            for [i, j, k] in triangulate_polygon(&outer, &holes) {
                b.triangle(all[i], all[j], all[k]);
            }
        }
        Ok(())
    }

    fn polygonal_face_set(&self, e: &StepEntity, frame: &Transform) -> Result<Mesh, GeometryError> {
        let coords = self.face_set_points(e, frame)?;
        let pn = pn_index(e.attr_list(3));
        let resolve = |ring: &[StepValue]| -> Result<Vec<usize>, GeometryError> {
            ring.iter()
                .filter_map(|v| v.as_f64())
                .map(|i| resolve_index(i, &pn, coords.len()).ok_or_else(|| malformed(e.id, "face index out of range")))
                .collect()
        };
        let mut b = MeshBuilder::default();
        let idx: Vec<u32> = coords.iter().map(|&p| b.vertex(p)).collect();
        for face_id in e.attr_ref_list(2) {
            let face = get(self.file, face_id)?;
            let outer = resolve(face.attr_list(0).unwrap_or(&[]))?;
            let holes: Vec<Vec<usize>> = if face.type_name == "IFCINDEXEDPOLYGONALFACEWITHVOIDS" {
                face.attr_list(1)
                    .unwrap_or(&[])
                    .iter()
                    .map(|h| resolve(h.as_list().unwrap_or(&[])))
                    .collect::<Result<_, _>>()?
            } else {
                Vec::new()
            };
            let outer_pts: Vec<Point3> = outer.iter().map(|&i| coords[i]).collect();
            let hole_pts: Vec<Vec<Point3>> = holes.iter().map(|h| h.iter().map(|&i| coords[i]).collect()).collect();
            let flat: Vec<usize> = outer.iter().chain(holes.iter().flatten()).copied().collect();
            for [i, j, k] in triangulate_polygon(&outer_pts, &hole_pts) {
                b.triangle(idx[flat[i]], idx[flat[j]], idx[flat[k]]);
            }
        }
        Ok(b.finish())
    }

    fn triangulated_face_set(&self, e: &StepEntity, frame: &Transform) -> Result<Mesh, GeometryError> {
        let coords = self.face_set_points(e, frame)?;
        let pn = pn_index(e.attr_list(4));
        let flip = frame.is_mirroring();
        let mut b = MeshBuilder::default();
        let idx: Vec<u32> = coords.iter().map(|&p| b.vertex(p)).collect();
        for tri in e.attr_list(3).unwrap_or(&[]) {
            let v: Vec<usize> = tri
                .as_list()
                .unwrap_or(&[])
                .iter()
                .filter_map(|v| v.as_f64())
                .map(|i| {
                    resolve_index(i, &pn, coords.len()).ok_or_else(|| malformed(e.id, "triangle index out of range"))
                })
                .collect::<Result<_, _>>()?;
            if v.len() != 3 {
                return Err(malformed(e.id, "triangle with other than three indices"));
            }
            if flip {
                b.triangle(idx[v[0]], idx[v[2]], idx[v[1]]);
            } else {
                b.triangle(idx[v[0]], idx[v[1]], idx[v[2]]);
            }
        }
        Ok(b.finish())
    }

    fn face_set_points(&self, e: &StepEntity, frame: &Transform) -> Result<Vec<Point3>, GeometryError> {
        let list = get(self.file, e.attr_ref(0).ok_or_else(|| malformed(e.id, "face set without coordinates"))?)?;
        Ok(point_list(list, self.unit_scale).into_iter().map(|p| frame.apply(p)).collect())
    }
}

fn point_list(list: &StepEntity, unit_scale: f64) -> Vec<Point3> {
    list.attr_list(0)
        .unwrap_or(&[])
        .iter()
        .map(|c| {
            let v: Vec<f64> = c.as_list().unwrap_or(&[]).iter().filter_map(|x| x.as_f64()).collect();
            Point3::from_slice(&v) * unit_scale
        })
        .collect()
}

fn pn_index(list: Option<&[StepValue]>) -> Option<Vec<usize>> {
    list.map(|l| l.iter().filter_map(|v| v.as_f64()).map(|v| v as usize).collect())
}

/// 1-based face-set index to a 0-based coordinate index.
fn resolve_index(i: f64, pn: &Option<Vec<usize>>, len: usize) -> Option<usize> {
    let i = (i as usize).checked_sub(1)?;
    let j = match pn {
        Some(map) => map.get(i)?.checked_sub(1)?,
        None => i,
    };
    (j < len).then_some(j)
}

fn signed_area_xy(ring: &[Point3]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}
