//! Shared fixtures: the FZK-Haus model and a generator for small synthetic IFC files.
#![allow(dead_code)]

pub mod gate;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::OnceLock;

use ifcnav_core::geometry::{Aabb, Point3};
use ifcnav_core::semantics::{extract_model, ElementClass, ElementRecord, ExtractedModel, Guid};
use ifcnav_core::step::{EntityId, StepFile};

pub fn fzk_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/AC20-FZK-Haus.ifc")
}

pub fn fzk_file() -> &'static StepFile {
    static FILE: OnceLock<StepFile> = OnceLock::new();
    FILE.get_or_init(|| StepFile::open(fzk_path()).expect("fixture parses"))
}

pub fn fzk_model() -> &'static ExtractedModel {
    static MODEL: OnceLock<ExtractedModel> = OnceLock::new();
    MODEL.get_or_init(|| extract_model(fzk_file()).expect("fixture extracts"))
}

/// An axis-aligned box element, coordinates in meters.
#[derive(Clone, Debug)]
pub struct SynthBox {
    /// IFC entity keyword, e.g. `IFCSPACE`.
    pub entity: &'static str,
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub storey: usize,
    pub properties: Vec<(String, String)>,
}

impl SynthBox {
    pub fn new(entity: &'static str, name: &str, min: [f64; 3], max: [f64; 3]) -> Self {
        SynthBox { entity, name: name.to_owned(), min, max, storey: 0, properties: Vec::new() }
    }

    pub fn on_storey(mut self, storey: usize) -> Self {
        self.storey = storey;
        self
    }

    pub fn with_property(mut self, name: &str, value: &str) -> Self {
        self.properties.push((name.to_owned(), value.to_owned()));
        self
    }
}

/// A one-building model whose elements are extruded rectangles.
#[derive(Clone, Debug)]
pub struct SynthModel {
    pub millimetres: bool,
    /// Location of the building placement, meters.
    pub offset: [f64; 3],
    pub storeys: Vec<(String, f64)>,
    pub boxes: Vec<SynthBox>,
}

impl Default for SynthModel {
    fn default() -> Self {
        SynthModel { millimetres: false, offset: [0.0; 3], storeys: vec![("Ground".into(), 0.0)], boxes: Vec::new() }
    }
}

pub fn synth_guid(n: usize) -> String {
    format!("Synth{n:017}")
}

struct Writer {
    out: String,
    next: usize,
    guids: usize,
}

impl Writer {
    fn add(&mut self, body: impl AsRef<str>) -> usize {
        self.next += 1;
        writeln!(self.out, "#{}={};", self.next, body.as_ref()).unwrap();
        self.next
    }

    fn guid(&mut self) -> String {
        self.guids += 1;
        synth_guid(self.guids)
    }
}

fn real(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') {
        s.replace('e', "E")
    } else {
        format!("{s}.")
    }
}

impl SynthModel {
    fn len(&self, meters: f64) -> String {
        real(if self.millimetres { meters * 1000.0 } else { meters })
    }

    fn point(&self, w: &mut Writer, p: [f64; 3]) -> usize {
        w.add(format!("IFCCARTESIANPOINT(({},{},{}))", self.len(p[0]), self.len(p[1]), self.len(p[2])))
    }

    fn local_placement(&self, w: &mut Writer, parent: Option<usize>, at: [f64; 3]) -> usize {
        let p = self.point(w, at);
        let axes = w.add(format!("IFCAXIS2PLACEMENT3D(#{p},$,$)"));
        match parent {
            Some(rel) => w.add(format!("IFCLOCALPLACEMENT(#{rel},#{axes})")),
            None => w.add(format!("IFCLOCALPLACEMENT($,#{axes})")),
        }
    }

    pub fn to_ifc(&self) -> String {
        let mut w = Writer { out: String::new(), next: 0, guids: 0 };
        let prefix = if self.millimetres { ".MILLI." } else { "$" };
        let unit = w.add(format!("IFCSIUNIT(*,.LENGTHUNIT.,{prefix},.METRE.)"));
        let assignment = w.add(format!("IFCUNITASSIGNMENT((#{unit}))"));
        let g = w.guid();
        let project = w.add(format!("IFCPROJECT('{g}',$,'Project',$,$,$,$,(),#{assignment})"));
        let building_pl = self.local_placement(&mut w, None, self.offset);
        let g = w.guid();
        let building = w.add(format!("IFCBUILDING('{g}',$,'Synthetic',$,$,#{building_pl},$,$,.ELEMENT.,$,$,$)"));
        let g = w.guid();
        w.add(format!("IFCRELAGGREGATES('{g}',$,$,$,#{project},(#{building}))"));

        let mut storey_ids = Vec::new();
        let mut storey_pls = Vec::new();
        for (name, elevation) in &self.storeys {
            let pl = self.local_placement(&mut w, Some(building_pl), [0.0, 0.0, *elevation]);
            let g = w.guid();
            let id =
                w.add(format!("IFCBUILDINGSTOREY('{g}',$,'{name}',$,$,#{pl},$,$,.ELEMENT.,{})", self.len(*elevation)));
            storey_ids.push(id);
            storey_pls.push(pl);
        }
        let refs = storey_ids.iter().map(|i| format!("#{i}")).collect::<Vec<_>>().join(",");
        let g = w.guid();
        w.add(format!("IFCRELAGGREGATES('{g}',$,$,$,#{building},({refs}))"));

        let z_dir = w.add("IFCDIRECTION((0.,0.,1.))");
        let mut contained: Vec<Vec<usize>> = vec![Vec::new(); self.storeys.len()];
        for b in &self.boxes {
            let elevation = self.storeys[b.storey].1;
            let size = [b.max[0] - b.min[0], b.max[1] - b.min[1], b.max[2] - b.min[2]];
            let pl =
                self.local_placement(&mut w, Some(storey_pls[b.storey]), [b.min[0], b.min[1], b.min[2] - elevation]);
            let centre = w.add(format!("IFCCARTESIANPOINT(({},{}))", self.len(size[0] / 2.0), self.len(size[1] / 2.0)));
            let pos2 = w.add(format!("IFCAXIS2PLACEMENT2D(#{centre},$)"));
            let profile =
                w.add(format!("IFCRECTANGLEPROFILEDEF(.AREA.,$,#{pos2},{},{})", self.len(size[0]), self.len(size[1])));
            let origin = self.point(&mut w, [0.0; 3]);
            let pos3 = w.add(format!("IFCAXIS2PLACEMENT3D(#{origin},$,$)"));
            let solid = w.add(format!("IFCEXTRUDEDAREASOLID(#{profile},#{pos3},#{z_dir},{})", self.len(size[2])));
            let rep = w.add(format!("IFCSHAPEREPRESENTATION($,'Body','SweptSolid',(#{solid}))"));
            let shape = w.add(format!("IFCPRODUCTDEFINITIONSHAPE($,$,(#{rep}))"));
            let g = w.guid();
            let tail = match b.entity {
                "IFCDOOR" => "$,$,$,.DOOR.,$,$",
                "IFCCOVERING" => ".CEILING.",
                "IFCSLAB" => ".FLOOR.",
                _ => "$",
            };
            let id = w.add(format!("{}('{g}',$,'{}',$,$,#{pl},#{shape},$,{tail})", b.entity, b.name));
            contained[b.storey].push(id);
            if !b.properties.is_empty() {
                let props: Vec<usize> = b
                    .properties
                    .iter()
                    .map(|(n, v)| w.add(format!("IFCPROPERTYSINGLEVALUE('{n}',$,IFCLABEL('{v}'),$)")))
                    .collect();
                let refs = props.iter().map(|i| format!("#{i}")).collect::<Vec<_>>().join(",");
                let g = w.guid();
                let pset = w.add(format!("IFCPROPERTYSET('{g}',$,'Pset_Synthetic',$,({refs}))"));
                let g = w.guid();
                w.add(format!("IFCRELDEFINESBYPROPERTIES('{g}',$,$,$,(#{id}),#{pset})"));
            }
        }
        for (storey, elems) in storey_ids.iter().zip(&contained) {
            if elems.is_empty() {
                continue;
            }
            let refs = elems.iter().map(|i| format!("#{i}")).collect::<Vec<_>>().join(",");
            let g = w.guid();
            w.add(format!("IFCRELCONTAINEDINSPATIALSTRUCTURE('{g}',$,$,$,({refs}),#{storey})"));
        }
        format!(
            "ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION(('ViewDefinition [CoordinationView]'),'2;1');\n\
             FILE_NAME('synthetic.ifc','2024-01-01T00:00:00',('a'),('o'),'p','s','');\n\
             FILE_SCHEMA(('IFC4'));\nENDSEC;\nDATA;\n{}ENDSEC;\nEND-ISO-10303-21;\n",
            w.out
        )
    }

    pub fn parse(&self) -> StepFile {
        ifcnav_core::step::parse_step(self.to_ifc().as_bytes()).expect("synthetic model parses")
    }

    pub fn extract(&self) -> ExtractedModel {
        extract_model(&self.parse()).expect("synthetic model extracts")
    }
}

/// Two rooms joined by a door, with a wall between them and a second storey room.
pub fn two_room_house() -> SynthModel {
    SynthModel {
        storeys: vec![("Ground".into(), 0.0), ("Upper".into(), 3.0)],
        boxes: vec![
            SynthBox::new("IFCSPACE", "Kitchen", [0.0, 0.0, 0.0], [4.0, 4.0, 2.5]),
            SynthBox::new("IFCSPACE", "Living", [4.2, 0.0, 0.0], [8.0, 4.0, 2.5]),
            SynthBox::new("IFCWALL", "Partition", [4.0, 0.0, 0.0], [4.2, 4.0, 2.5]),
            SynthBox::new("IFCDOOR", "Door-1", [4.06, 1.5, 0.0], [4.14, 2.4, 2.0]).with_property("IsExternal", "False"),
            SynthBox::new("IFCSPACE", "Attic", [0.0, 0.0, 3.0], [8.0, 4.0, 5.0]).on_storey(1),
        ],
        ..SynthModel::default()
    }
}

/// Closed-box overlap decided by point sampling, without reference to the
/// adjacency code: dilate `b1` by `eps` and look for a sample point inside
/// both boxes. Each axis is sampled on a 20-point grid over the union of the
/// two ranges plus every interval endpoint, so any non-empty closed
/// intersection contains a sample.
pub fn sampled_overlap(b1: ([f64; 3], [f64; 3]), b2: ([f64; 3], [f64; 3]), eps: f64) -> bool {
    let d1 = (b1.0.map(|v| v - eps), b1.1.map(|v| v + eps));
    let axis = |i: usize| -> Vec<f64> {
        let lo = d1.0[i].min(b2.0[i]);
        let hi = d1.1[i].max(b2.1[i]);
        let mut s: Vec<f64> = (0..20).map(|k| lo + (hi - lo) * k as f64 / 19.0).collect();
        s.extend([d1.0[i], d1.1[i], b2.0[i], b2.1[i]]);
        s
    };
    let inside = |b: &([f64; 3], [f64; 3]), p: [f64; 3]| (0..3).all(|i| b.0[i] <= p[i] && p[i] <= b.1[i]);
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                let p = [x, y, z];
                if inside(&d1, p) && inside(&b2, p) {
                    return true;
                }
            }
        }
    }
    false
}

/// Random axis-aligned box with size 0.1..10 m on a 1/256 m lattice.
pub fn random_box(rng: &mut impl rand::Rng) -> ([f64; 3], [f64; 3]) {
    let q = |v: f64| (v * 256.0).round() / 256.0;
    let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let min = [0; 3].map(|_| q(rng.random_range(-5.0..5.0)));
    let size = [0; 3].map(|_| q(rng.random_range(0.1..=scale)));
    (min, [min[0] + size[0], min[1] + size[1], min[2] + size[2]])
}

/// A pair that is either random or deliberately touching or overlapping.
pub fn random_pair(rng: &mut impl rand::Rng) -> (([f64; 3], [f64; 3]), ([f64; 3], [f64; 3])) {
    let a = random_box(rng);
    let mut b = random_box(rng);
    match rng.random_range(0..4) {
        0 => {}
        1 => {
            // share a face plane on one axis
            let k = rng.random_range(0..3);
            let w = b.1[k] - b.0[k];
            b.0[k] = a.1[k];
            b.1[k] = a.1[k] + w;
        }
        2 => {
            // place near a face, within a few lattice steps
            let k = rng.random_range(0..3);
            let w = b.1[k] - b.0[k];
            let gap = rng.random_range(-16i32..=16) as f64 / 256.0;
            b.0[k] = a.1[k] + gap;
            b.1[k] = b.0[k] + w;
        }
        _ => {
            // start inside the first box
            for k in 0..3 {
                let w = b.1[k] - b.0[k];
                b.0[k] = a.0[k] + ((a.1[k] - a.0[k]) * 128.0 * rng.random::<f64>()).round() / 256.0;
                b.1[k] = b.0[k] + w;
            }
        }
    }
    (a, b)
}

/// A geometry-only element record with an axis-aligned box, for graph building.
pub fn box_record(i: usize, class: ElementClass, min: [f64; 3], size: [f64; 3]) -> ElementRecord {
    let lo = Point3::from_slice(&min);
    let hi = Point3::new(min[0] + size[0], min[1] + size[1], min[2] + size[2]);
    let aabb = Aabb::new(lo, hi).unwrap();
    ElementRecord {
        id: Guid::new(format!("N{i:021}")),
        class,
        name: Some(format!("e{i}")),
        description: None,
        storey_id: Guid::new("S"),
        centroid: aabb.center(),
        aabb,
        volume: aabb.volume(),
        predefined_type: None,
        step_id: EntityId(i as u64 + 1),
        has_geometry: true,
    }
}
