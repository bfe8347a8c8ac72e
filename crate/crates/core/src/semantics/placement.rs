use std::collections::{HashMap, HashSet};

use super::SemanticsError;
use crate::geometry::{Point3, Transform};
use crate::step::{EntityId, StepEntity, StepFile};

/// Absolute frame of a product: the composition of every relative placement
/// from the product up to the root. Translations are in meters.
pub fn resolve_placement(file: &StepFile, element: &StepEntity, unit_scale: f64) -> Result<Transform, SemanticsError> {
    match element.attr_ref(5) {
        Some(id) => PlacementResolver::new(file, unit_scale).resolve(id),
        None => Ok(Transform::IDENTITY),
    }
}

/// Memoizing resolver for `IFCLOCALPLACEMENT` chains.
pub struct PlacementResolver<'a> {
    file: &'a StepFile,
    unit_scale: f64,
    cache: HashMap<EntityId, Transform>,
}

impl<'a> PlacementResolver<'a> {
    pub fn new(file: &'a StepFile, unit_scale: f64) -> Self {
        PlacementResolver { file, unit_scale, cache: HashMap::new() }
    }

    pub fn for_product(&mut self, element: &StepEntity) -> Result<Transform, SemanticsError> {
        match element.attr_ref(5) {
            Some(id) => self.resolve(id),
            None => Ok(Transform::IDENTITY),
        }
    }

    pub fn resolve(&mut self, placement: EntityId) -> Result<Transform, SemanticsError> {
        // walk up to the first cached or root placement, then fold back down
        let mut chain = Vec::new();
        let mut seen = HashSet::new();
        let mut cursor = Some(placement);
        let mut base = Transform::IDENTITY;
        while let Some(id) = cursor {
            if let Some(t) = self.cache.get(&id) {
                base = *t;
                break;
            }
            if !seen.insert(id) {
                return Err(SemanticsError::CyclicPlacement { entity: id });
            }
            let e = self
                .file
                .get(id)
                .ok_or(SemanticsError::MalformedPlacement { entity: id, message: "missing placement".into() })?;
            if e.type_name != "IFCLOCALPLACEMENT" {
                return Err(SemanticsError::MalformedPlacement {
                    entity: id,
                    message: format!("unsupported placement type {}", e.type_name),
                });
            }
            chain.push((id, self.relative(e)?));
            cursor = e.attr_ref(0);
        }
        for (id, local) in chain.into_iter().rev() {
            base = base.compose(&local);
            self.cache.insert(id, base);
        }
        Ok(base)
    }

    /// Relative frame of one `IFCLOCALPLACEMENT`.
    fn relative(&self, local: &StepEntity) -> Result<Transform, SemanticsError> {
        let Some(axis_id) = local.attr_ref(1) else {
            return Ok(Transform::IDENTITY);
        };
        let malformed = |message: String| SemanticsError::MalformedPlacement { entity: axis_id, message };
        let e = self.file.get(axis_id).ok_or_else(|| malformed("missing relative placement".into()))?;
        let vec_of = |idx: usize, ty: &str| -> Result<Option<Point3>, SemanticsError> {
            let Some(id) = e.attr_ref(idx) else {
                return Ok(None);
            };
            let v = self.file.get(id).ok_or_else(|| malformed(format!("missing {ty}")))?;
            let coords: Vec<f64> = v.attr_list(0).unwrap_or(&[]).iter().filter_map(|c| c.as_f64()).collect();
            Ok(Some(Point3::from_slice(&coords)))
        };
        let origin = vec_of(0, "location")?.unwrap_or(Point3::ORIGIN) * self.unit_scale;
        let (axis, ref_dir) = match e.type_name.as_str() {
            "IFCAXIS2PLACEMENT3D" => (vec_of(1, "axis")?, vec_of(2, "reference direction")?),
            "IFCAXIS2PLACEMENT2D" => (None, vec_of(1, "reference direction")?),
            other => return Err(malformed(format!("unsupported relative placement {other}"))),
        };
        Transform::from_axes(origin, axis, ref_dir)
            .ok_or_else(|| malformed("axis and reference direction are degenerate or parallel".into()))
    }

    /// Every placement id on the chain from `placement` to the root.
    pub fn chain(&self, placement: EntityId) -> Vec<EntityId> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut cursor = Some(placement);
        while let Some(id) = cursor {
            if !seen.insert(id) {
                break;
            }
            out.push(id);
            cursor = self.file.get(id).and_then(|e| e.attr_ref(0));
        }
        out
    }
}
