//! Buildings, storeys, elements and properties extracted from a parsed IFC file.

mod placement;
mod properties;
mod units;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::geometry::Transform;
use crate::geometry::{mesh_aabb, mesh_from_representation, mesh_volume, vertex_mean, Aabb, Mesh, Point3};
use crate::step::{EntityId, StepEntity, StepFile};
pub use placement::{resolve_placement, PlacementResolver};
pub use properties::{extract_properties, format_real, stringify_value, PropertyIndex, PropertyRecord};
pub use units::length_unit_scale;

/// 22-character IFC GlobalId, kept in its compressed base-64 form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Guid(String);

impl Guid {
    pub fn new(s: impl Into<String>) -> Self {
        Guid(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Whether the text has the shape of an IFC GlobalId.
    pub fn is_well_formed(&self) -> bool {
        self.0.len() == 22 && self.0.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'$')
    }
}

impl fmt::Display for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Guid {
    fn from(s: &str) -> Self {
        Guid(s.to_owned())
    }
}

/// Element classes, one relational table each.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementClass {
    Room,
    Wall,
    Door,
    Window,
    Slab,
    Column,
    Beam,
    Roof,
    Stair,
    Railing,
    Ceiling,
    Ramp,
    Transport,
}

impl ElementClass {
    pub const ALL: [ElementClass; 13] = [
        ElementClass::Beam,
        ElementClass::Ceiling,
        ElementClass::Column,
        ElementClass::Door,
        ElementClass::Railing,
        ElementClass::Ramp,
        ElementClass::Roof,
        ElementClass::Room,
        ElementClass::Slab,
        ElementClass::Stair,
        ElementClass::Transport,
        ElementClass::Wall,
        ElementClass::Window,
    ];

    /// Table name, also the lowercase serde form.
    pub fn table(self) -> &'static str {
        match self {
            ElementClass::Room => "room",
            ElementClass::Wall => "wall",
            ElementClass::Door => "door",
            ElementClass::Window => "window",
            ElementClass::Slab => "slab",
            ElementClass::Column => "column",
            ElementClass::Beam => "beam",
            ElementClass::Roof => "roof",
            ElementClass::Stair => "stair",
            ElementClass::Railing => "railing",
            ElementClass::Ceiling => "ceiling",
            ElementClass::Ramp => "ramp",
            ElementClass::Transport => "transport",
        }
    }

    pub fn from_table(name: &str) -> Option<Self> {
        ElementClass::ALL.into_iter().find(|c| c.table() == name)
    }

    /// Base IFC entity, as written in the property table.
    pub fn ifc_name(self) -> &'static str {
        match self {
            ElementClass::Room => "IfcSpace",
            ElementClass::Wall => "IfcWall",
            ElementClass::Door => "IfcDoor",
            ElementClass::Window => "IfcWindow",
            ElementClass::Slab => "IfcSlab",
            ElementClass::Column => "IfcColumn",
            ElementClass::Beam => "IfcBeam",
            ElementClass::Roof => "IfcRoof",
            ElementClass::Stair => "IfcStair",
            ElementClass::Railing => "IfcRailing",
            ElementClass::Ceiling => "IfcCovering",
            ElementClass::Ramp => "IfcRamp",
            ElementClass::Transport => "IfcTransportElement",
        }
    }

    /// Index of the PredefinedType attribute, for classes where it is kept.
    fn predefined_type_index(self) -> Option<usize> {
        match self {
            ElementClass::Door => Some(10),
            ElementClass::Slab | ElementClass::Ceiling | ElementClass::Roof => Some(8),
            _ => None,
        }
    }

    /// Rooms, doors, stairs and ramps form the topology graph.
    pub fn is_navigable(self) -> bool {
        matches!(self, ElementClass::Room | ElementClass::Door | ElementClass::Stair | ElementClass::Ramp)
    }
}

impl fmt::Display for ElementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.table())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub id: Guid,
    pub name: Option<String>,
    pub description: Option<String>,
    pub long_name: Option<String>,
    pub object_type: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreyRecord {
    pub id: Guid,
    pub name: Option<String>,
    pub description: Option<String>,
    pub long_name: Option<String>,
    /// Meters.
    pub elevation: f64,
    pub building_id: Guid,
}

/// One building element. `aabb.min <= centroid <= aabb.max`, `volume >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub id: Guid,
    pub class: ElementClass,
    pub name: Option<String>,
    pub description: Option<String>,
    pub storey_id: Guid,
    /// Mean of the welded mesh vertices; the placement origin without geometry.
    pub centroid: Point3,
    pub aabb: Aabb,
    /// Bounding-box volume, cubic meters.
    pub volume: f64,
    pub predefined_type: Option<String>,
    pub step_id: EntityId,
    pub has_geometry: bool,
}

/// Full tessellated geometry of an element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub element_id: Guid,
    pub element_type: String,
    pub mesh: Mesh,
    /// Enclosed volume, or the box volume when `approximate`.
    pub solid_volume: f64,
    pub approximate: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

/// Non-fatal ingest finding; serialized as one JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub severity: Severity,
    pub entity_id: Option<u64>,
    pub message: String,
}

impl IngestWarning {
    fn new(severity: Severity, entity: Option<EntityId>, message: impl Into<String>) -> Self {
        let w = IngestWarning { severity, entity_id: entity.map(|e| e.0), message: message.into() };
        log::warn!("{}", w.to_json_line());
        w
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("warning serializes")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractedModel {
    pub buildings: Vec<BuildingRecord>,
    pub storeys: Vec<StoreyRecord>,
    pub elements: Vec<ElementRecord>,
    pub properties: Vec<PropertyRecord>,
    pub meshes: Vec<MeshRecord>,
    pub warnings: Vec<IngestWarning>,
    pub unit_scale: f64,
}

impl ExtractedModel {
    pub fn elements_of(&self, class: ElementClass) -> impl Iterator<Item = &ElementRecord> {
        self.elements.iter().filter(move |e| e.class == class)
    }

    pub fn count(&self, class: ElementClass) -> usize {
        self.elements_of(class).count()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemanticsError {
    #[error("placement chain revisits {entity}")]
    CyclicPlacement { entity: EntityId },
    #[error("malformed placement {entity}: {message}")]
    MalformedPlacement { entity: EntityId, message: String },
    #[error("no length unit assigned")]
    MissingUnit,
    #[error("no storeys to assign elements to")]
    NoStoreys,
    #[error("model contains no IfcBuilding")]
    NoBuilding,
}

/// Slack on the storey elevation comparison.
const STOREY_SLACK: f64 = 1e-6;

/// Picks the storey with the greatest elevation at or below `centroid_z`,
/// or the lowest storey when the element sits below all of them.
pub fn assign_storey(centroid_z: f64, storeys: &[StoreyRecord]) -> Result<&StoreyRecord, SemanticsError> {
    let below = storeys
        .iter()
        .filter(|s| s.elevation <= centroid_z + STOREY_SLACK)
        .max_by(|a, b| a.elevation.total_cmp(&b.elevation));
    below.or_else(|| storeys.iter().min_by(|a, b| a.elevation.total_cmp(&b.elevation))).ok_or(SemanticsError::NoStoreys)
}

fn opt_text(e: &StepEntity, idx: usize) -> Option<String> {
    e.attr_str(idx).filter(|s| !s.is_empty()).map(str::to_owned)
}

/// IFC entity types feeding each class (subtypes are merged by the parser).
fn source_types(class: ElementClass) -> &'static [&'static str] {
    match class {
        ElementClass::Room => &["IFCSPACE"],
        ElementClass::Wall => &["IFCWALL"],
        ElementClass::Door => &["IFCDOOR"],
        ElementClass::Window => &["IFCWINDOW"],
        ElementClass::Slab => &["IFCSLAB"],
        ElementClass::Column => &["IFCCOLUMN"],
        ElementClass::Beam => &["IFCBEAM"],
        ElementClass::Roof => &["IFCROOF"],
        ElementClass::Stair => &["IFCSTAIR"],
        ElementClass::Railing => &["IFCRAILING"],
        ElementClass::Ceiling => &["IFCCOVERING"],
        ElementClass::Ramp => &["IFCRAMP"],
        ElementClass::Transport => &["IFCTRANSPORTELEMENT"],
    }
}

/// Extraction order of element classes.
const EXTRACTION_ORDER: [ElementClass; 13] = [
    ElementClass::Room,
    ElementClass::Wall,
    ElementClass::Door,
    ElementClass::Window,
    ElementClass::Slab,
    ElementClass::Column,
    ElementClass::Beam,
    ElementClass::Roof,
    ElementClass::Stair,
    ElementClass::Railing,
    ElementClass::Ceiling,
    ElementClass::Ramp,
    ElementClass::Transport,
];

/// Extracts every supported concept from `file`.
///
/// Per-element problems become warnings; only a file without any
/// `IfcBuilding` is rejected.
pub fn extract_model(file: &StepFile) -> Result<ExtractedModel, SemanticsError> {
    let mut warnings = Vec::new();
    let unit_scale = match length_unit_scale(file) {
        Ok(s) => s,
        Err(_) => {
            warnings.push(IngestWarning::new(Severity::Warning, None, "no length unit found, assuming meters"));
            1.0
        }
    };

    let building_entities = file.entities_of_type("IFCBUILDING", false);
    if building_entities.is_empty() {
        return Err(SemanticsError::NoBuilding);
    }
    let parents = parent_map(file);
    let mut resolver = PlacementResolver::new(file, unit_scale);

    let buildings: Vec<BuildingRecord> = building_entities
        .iter()
        .map(|b| {
            let id = Guid::new(b.attr_str(0).unwrap_or_default());
            if !id.is_well_formed() {
                warnings.push(IngestWarning::new(Severity::Warning, Some(b.id), format!("malformed GlobalId '{id}'")));
            }
            BuildingRecord {
                id,
                name: opt_text(b, 2),
                description: opt_text(b, 3),
                long_name: opt_text(b, 7),
                object_type: opt_text(b, 4),
            }
        })
        .collect();
    let building_steps: Vec<EntityId> = building_entities.iter().map(|b| b.id).collect();
    let building_placements: HashMap<EntityId, usize> =
        building_entities.iter().enumerate().filter_map(|(i, b)| b.attr_ref(5).map(|p| (p, i))).collect();

    // building index of a product: spatial parents first, then placement chain
    let mut storey_placements: HashMap<EntityId, usize> = HashMap::new();
    let owner_of =
        |e: &StepEntity, resolver: &PlacementResolver, storey_placements: &HashMap<EntityId, usize>| -> Option<usize> {
            let mut cursor = e.id;
            let mut seen = HashSet::new();
            while let Some(&parent) = parents.get(&cursor) {
                if !seen.insert(parent) {
                    break;
                }
                if let Some(i) = building_steps.iter().position(|&b| b == parent) {
                    return Some(i);
                }
                cursor = parent;
            }
            let chain = e.attr_ref(5).map(|p| resolver.chain(p)).unwrap_or_default();
            chain.iter().skip(1).find_map(|p| building_placements.get(p).or_else(|| storey_placements.get(p)).copied())
        };

    let mut storeys = Vec::new();
    let mut storeys_by_building: Vec<Vec<usize>> = vec![Vec::new(); buildings.len()];
    for s in file.entities_of_type("IFCBUILDINGSTOREY", false) {
        let building = match owner_of(s, &resolver, &storey_placements) {
            Some(b) => b,
            None => {
                if buildings.len() > 1 {
                    warnings.push(IngestWarning::new(
                        Severity::Warning,
                        Some(s.id),
                        "storey not linked to a building, attached to the first one",
                    ));
                }
                0
            }
        };
        let elevation = match s.attr_f64(9) {
            Some(e) => e * unit_scale,
            None => match resolver.for_product(s) {
                Ok(t) => t.origin.z,
                Err(err) => {
                    warnings.push(IngestWarning::new(Severity::Warning, Some(s.id), err.to_string()));
                    0.0
                }
            },
        };
        if let Some(p) = s.attr_ref(5) {
            storey_placements.insert(p, building);
        }
        storeys_by_building[building].push(storeys.len());
        storeys.push(StoreyRecord {
            id: Guid::new(s.attr_str(0).unwrap_or_default()),
            name: opt_text(s, 2),
            description: opt_text(s, 3),
            long_name: opt_text(s, 7),
            elevation,
            building_id: buildings[building].id.clone(),
        });
    }
    for group in &storeys_by_building {
        let mut elevations: Vec<f64> = group.iter().map(|&i| storeys[i].elevation).collect();
        elevations.sort_by(f64::total_cmp);
        if elevations.windows(2).any(|w| (w[1] - w[0]).abs() < STOREY_SLACK) {
            warnings.push(IngestWarning::new(Severity::Warning, None, "storeys share an elevation"));
        }
    }

    let property_index = PropertyIndex::build(file);
    let children = children_map(file);
    let mut elements = Vec::new();
    let mut properties = Vec::new();
    let mut meshes = Vec::new();

    for class in EXTRACTION_ORDER {
        for &ty in source_types(class) {
            for e in file.entities_of_type(ty, true) {
                let predefined = class.predefined_type_index().and_then(|i| e.attr_enum(i)).map(str::to_owned);
                if class == ElementClass::Ceiling && predefined.as_deref() != Some("CEILING") {
                    continue;
                }
                let id = Guid::new(e.attr_str(0).unwrap_or_default());
                if !id.is_well_formed() {
                    warnings.push(IngestWarning::new(
                        Severity::Warning,
                        Some(e.id),
                        format!("malformed GlobalId '{id}'"),
                    ));
                }
                let frame = match resolver.for_product(e) {
                    Ok(t) => t,
                    Err(err) => {
                        warnings.push(IngestWarning::new(Severity::Error, Some(e.id), format!("skipped: {err}")));
                        continue;
                    }
                };

                let mut built = mesh_from_representation(file, e, &frame, unit_scale);
                if built.as_ref().map_or(true, |b| b.mesh.is_empty()) {
                    if let Some(parts) = parts_mesh(file, e, &children, &mut resolver, unit_scale) {
                        built = Ok(parts);
                    }
                }
                let geometry = match built {
                    Ok(b) if !b.mesh.is_empty() => Some(b),
                    Ok(_) => {
                        warnings.push(IngestWarning::new(Severity::Warning, Some(e.id), "empty geometry"));
                        None
                    }
                    Err(err) => {
                        warnings.push(IngestWarning::new(Severity::Warning, Some(e.id), format!("no geometry: {err}")));
                        None
                    }
                };

                let (centroid, aabb) = match &geometry {
                    Some(b) => (
                        vertex_mean(&b.mesh).expect("mesh is not empty"),
                        mesh_aabb(&b.mesh).expect("mesh is not empty"),
                    ),
                    None => (frame.origin, Aabb::point(frame.origin)),
                };

                let building = owner_of(e, &resolver, &storey_placements).unwrap_or_else(|| {
                    if buildings.len() > 1 {
                        warnings.push(IngestWarning::new(
                            Severity::Warning,
                            Some(e.id),
                            "element not linked to a building, using the first one",
                        ));
                    }
                    0
                });
                let candidates: Vec<StoreyRecord> =
                    storeys_by_building[building].iter().map(|&i| storeys[i].clone()).collect();
                let storey_id = match assign_storey(centroid.z, &candidates) {
                    Ok(s) => s.id.clone(),
                    Err(err) => {
                        warnings.push(IngestWarning::new(Severity::Error, Some(e.id), format!("skipped: {err}")));
                        continue;
                    }
                };

                let has_geometry = geometry.is_some();
                if let Some(b) = geometry {
                    let v = mesh_volume(&b.mesh);
                    meshes.push(MeshRecord {
                        element_id: id.clone(),
                        element_type: class.ifc_name().to_owned(),
                        mesh: b.mesh,
                        solid_volume: v.value,
                        approximate: v.approximate || b.approximate,
                    });
                }
                properties.extend(extract_properties(file, &property_index, e, &id, class.ifc_name()));
                elements.push(ElementRecord {
                    id,
                    class,
                    name: opt_text(e, 2),
                    description: opt_text(e, 3),
                    storey_id,
                    centroid,
                    volume: aabb.volume(),
                    aabb,
                    predefined_type: predefined,
                    step_id: e.id,
                    has_geometry,
                });
            }
        }
    }
    Ok(ExtractedModel { buildings, storeys, elements, properties, meshes, warnings, unit_scale })
}

/// Child to spatial/aggregate parent, from `IFCRELAGGREGATES` and
/// `IFCRELCONTAINEDINSPATIALSTRUCTURE`.
fn parent_map(file: &StepFile) -> HashMap<EntityId, EntityId> {
    let mut parents = HashMap::new();
    for rel in file.entities_of_type("IFCRELAGGREGATES", false) {
        if let Some(parent) = rel.attr_ref(4) {
            for child in rel.attr_ref_list(5) {
                parents.entry(child).or_insert(parent);
            }
        }
    }
    for rel in file.entities_of_type("IFCRELCONTAINEDINSPATIALSTRUCTURE", false) {
        if let Some(parent) = rel.attr_ref(5) {
            for child in rel.attr_ref_list(4) {
                parents.entry(child).or_insert(parent);
            }
        }
    }
    parents
}

fn children_map(file: &StepFile) -> HashMap<EntityId, Vec<EntityId>> {
    let mut children: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
    for rel in file.entities_of_type("IFCRELAGGREGATES", false) {
        if let Some(parent) = rel.attr_ref(4) {
            children.entry(parent).or_default().extend(rel.attr_ref_list(5));
        }
    }
    children
}

/// Geometry of an assembly without its own body (e.g. a stair made of
/// flights): the concatenated meshes of its aggregated parts.
fn parts_mesh(
    file: &StepFile,
    e: &StepEntity,
    children: &HashMap<EntityId, Vec<EntityId>>,
    resolver: &mut PlacementResolver,
    unit_scale: f64,
) -> Option<crate::geometry::BuiltMesh> {
    let mut out = crate::geometry::BuiltMesh::default();
    for &child in children.get(&e.id)? {
        let Some(part) = file.get(child) else { continue };
        let Ok(frame) = resolver.for_product(part) else { continue };
        if let Ok(b) = mesh_from_representation(file, part, &frame, unit_scale) {
            out.mesh.append(&b.mesh);
            out.approximate |= b.approximate;
            out.items += b.items;
        }
    }
    (!out.mesh.is_empty()).then_some(out)
}
