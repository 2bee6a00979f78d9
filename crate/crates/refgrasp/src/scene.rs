//! Symbolic scene representation for cluttered tabletop images: objects
//! with masks and grasps, pairwise spatial relations, and superlative
//! location labels.
//!
//! Coordinates are image pixels, x right and y down. Because the camera
//! looks at the table from a tilted pose, larger y means closer to the
//! viewer; "front" points along +y and "behind" along -y.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grasp::GraspRectangle;
use crate::mask::Mask;

pub type ObjectId = u32;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene {scene_id}: duplicate object id {id}")]
    DuplicateId { scene_id: String, id: ObjectId },
    #[error("scene {scene_id}: object {id} has a non-finite centroid")]
    BadCentroid { scene_id: String, id: ObjectId },
    #[error("scene {scene_id}: objects {a} and {b} share a centroid; spatial relations are undefined")]
    CoincidentCentroids {
        scene_id: String,
        a: ObjectId,
        b: ObjectId,
    },
    #[error("scene {scene_id}: object {id} has an empty mask")]
    EmptyMask { scene_id: String, id: ObjectId },
    #[error("scene {scene_id}: object {id} mask is {mw}x{mh}, image is {w}x{h}")]
    MaskSizeMismatch {
        scene_id: String,
        id: ObjectId,
        mw: u32,
        mh: u32,
        w: u32,
        h: u32,
    },
    #[error("scene {scene_id}: object {id} bbox {stored:?} is not the tight mask bbox {actual:?}")]
    BboxMismatch {
        scene_id: String,
        id: ObjectId,
        stored: (u32, u32, u32, u32),
        actual: (u32, u32, u32, u32),
    },
    #[error("scene {scene_id}: object {id} grasp center ({cx}, {cy}) outside image")]
    GraspOutsideImage {
        scene_id: String,
        id: ObjectId,
        cx: f64,
        cy: f64,
    },
    #[error("scene {scene_id}: object {id} has a degenerate grasp (width {width}, height {height})")]
    DegenerateGrasp {
        scene_id: String,
        id: ObjectId,
        width: f64,
        height: f64,
    },
    #[error("scene {scene_id}: unknown object id {id}")]
    UnknownObject { scene_id: String, id: ObjectId },
    #[error("scene {scene_id}: cached {what} disagree with recomputation")]
    StaleDerived { scene_id: String, what: String },
}

/// The nine spatial predicates. The eight planar ones tile the directions of
/// the image plane in 45-degree sectors; `On` comes from mask overlap plus a
/// depth gap and has no inverse in the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predicate {
    #[serde(rename = "right")]
    Right,
    #[serde(rename = "front right")]
    FrontRight,
    #[serde(rename = "front")]
    Front,
    #[serde(rename = "front left")]
    FrontLeft,
    #[serde(rename = "left")]
    Left,
    #[serde(rename = "rear left")]
    RearLeft,
    #[serde(rename = "behind")]
    Behind,
    #[serde(rename = "rear right")]
    RearRight,
    #[serde(rename = "on")]
    On,
}

/// Planar predicates indexed counterclockwise-in-angle from +x; the sector
/// centered on k*45 degrees is `SECTOR_ORDER[k]`.
pub const SECTOR_ORDER: [Predicate; 8] = [
    Predicate::Right,
    Predicate::FrontRight,
    Predicate::Front,
    Predicate::FrontLeft,
    Predicate::Left,
    Predicate::RearLeft,
    Predicate::Behind,
    Predicate::RearRight,
];

impl Predicate {
    pub fn is_planar(self) -> bool {
        self != Predicate::On
    }

    /// Swaps left/right and front/behind components. `On` has no inverse.
    pub fn planar_inverse(self) -> Option<Predicate> {
        let idx = SECTOR_ORDER.iter().position(|&p| p == self)?;
        Some(SECTOR_ORDER[(idx + 4) % 8])
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::Right => "right",
            Predicate::FrontRight => "front right",
            Predicate::Front => "front",
            Predicate::FrontLeft => "front left",
            Predicate::Left => "left",
            Predicate::RearLeft => "rear left",
            Predicate::Behind => "behind",
            Predicate::RearRight => "rear right",
            Predicate::On => "on",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// "subject is `predicate` of object".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub subject_id: ObjectId,
    pub object_id: ObjectId,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Leftmost,
    Rightmost,
    Closest,
    Furthest,
}

pub const LOCATION_KINDS: [LocationKind; 4] = [
    LocationKind::Leftmost,
    LocationKind::Rightmost,
    LocationKind::Closest,
    LocationKind::Furthest,
];

impl LocationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LocationKind::Leftmost => "leftmost",
            LocationKind::Rightmost => "rightmost",
            LocationKind::Closest => "closest",
            LocationKind::Furthest => "furthest",
        }
    }
}

impl fmt::Display for LocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Superlative label within a scope: a category name, or `None` for the
/// whole scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationLabel {
    pub object_id: ObjectId,
    pub label: LocationKind,
    pub scope: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, val, or test)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectNode {
    pub id: ObjectId,
    pub category: String,
    pub instance_name: String,
    pub name_synonyms: Vec<String>,
    pub color: Option<String>,
    /// Brand, flavor, texture, or similar instance-level descriptor.
    pub instance_attribute: Option<String>,
    pub centroid_px: (f64, f64),
    /// Mean depth over the mask, meters. Absent when no depth was captured.
    pub depth_m: Option<f64>,
    /// Tight axis-aligned bounding box (x, y, w, h) of the mask.
    pub bbox: (u32, u32, u32, u32),
    pub mask: Mask,
    pub grasps: Vec<GraspRectangle>,
}

/// Thresholds for relation resolution.
#[derive(Debug, Clone, Copy)]
pub struct RelationConfig {
    /// Rotates all eight sector boundaries, radians. Zero keeps "right"
    /// centered on +x.
    pub sector_offset_rad: f64,
    /// An object is "on" another when at least this fraction of its own
    /// mask overlaps the other's.
    pub on_overlap_frac: f64,
    /// Required depth gap (upper object closer by this many meters).
    pub on_depth_margin_m: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            sector_offset_rad: 0.0,
            on_overlap_frac: 0.5,
            on_depth_margin_m: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneGraph {
    pub scene_id: String,
    /// (height, width) in pixels.
    pub image_size: (u32, u32),
    pub rgb_path: String,
    pub depth_path: String,
    pub objects: Vec<ObjectNode>,
    /// Derived from objects, cached in canonical order.
    pub relations: Vec<RelationEdge>,
    /// Derived from objects, cached in canonical order.
    pub locations: Vec<LocationLabel>,
    pub split: Split,
}

impl SceneGraph {
    /// Validates the object set, computes relations and locations, and
    /// returns the finished scene. All derived state is cached here;
    /// consumers treat the scene as immutable afterwards.
    pub fn build(
        scene_id: String,
        image_size: (u32, u32),
        rgb_path: String,
        depth_path: String,
        objects: Vec<ObjectNode>,
        split: Split,
        config: &RelationConfig,
    ) -> Result<SceneGraph, SceneError> {
        validate_objects(&scene_id, image_size, &objects)?;
        let relations = resolve_pairwise_relations(&scene_id, &objects, config)?;
        let locations = resolve_absolute_locations(&objects);
        Ok(SceneGraph {
            scene_id,
            image_size,
            rgb_path,
            depth_path,
            objects,
            relations,
            locations,
            split,
        })
    }

    pub fn object(&self, id: ObjectId) -> Result<&ObjectNode, SceneError> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| SceneError::UnknownObject {
                scene_id: self.scene_id.clone(),
                id,
            })
    }

    /// Confirms the cached relations and locations agree with a fresh
    /// recomputation (used after deserialization).
    pub fn check_derived(&self, config: &RelationConfig) -> Result<(), SceneError> {
        let relations = resolve_pairwise_relations(&self.scene_id, &self.objects, config)?;
        if relations != self.relations {
            return Err(SceneError::StaleDerived {
                scene_id: self.scene_id.clone(),
                what: "relations".into(),
            });
        }
        let locations = resolve_absolute_locations(&self.objects);
        if locations != self.locations {
            return Err(SceneError::StaleDerived {
                scene_id: self.scene_id.clone(),
                what: "locations".into(),
            });
        }
        Ok(())
    }

    pub fn ambiguous_categories(&self) -> BTreeSet<String> {
        ambiguous_categories(&self.objects)
    }
}

fn validate_objects(
    scene_id: &str,
    image_size: (u32, u32),
    objects: &[ObjectNode],
) -> Result<(), SceneError> {
    let (h, w) = image_size;
    let mut seen = BTreeSet::new();
    for obj in objects {
        if !seen.insert(obj.id) {
            return Err(SceneError::DuplicateId {
                scene_id: scene_id.into(),
                id: obj.id,
            });
        }
        if !obj.centroid_px.0.is_finite() || !obj.centroid_px.1.is_finite() {
            return Err(SceneError::BadCentroid {
                scene_id: scene_id.into(),
                id: obj.id,
            });
        }
        if obj.mask.width() != w || obj.mask.height() != h {
            return Err(SceneError::MaskSizeMismatch {
                scene_id: scene_id.into(),
                id: obj.id,
                mw: obj.mask.width(),
                mh: obj.mask.height(),
                w,
                h,
            });
        }
        let actual = obj.mask.tight_bbox().ok_or_else(|| SceneError::EmptyMask {
            scene_id: scene_id.into(),
            id: obj.id,
        })?;
        if actual != obj.bbox {
            return Err(SceneError::BboxMismatch {
                scene_id: scene_id.into(),
                id: obj.id,
                stored: obj.bbox,
                actual,
            });
        }
        for g in &obj.grasps {
            if g.cx < 0.0 || g.cx >= w as f64 || g.cy < 0.0 || g.cy >= h as f64 {
                return Err(SceneError::GraspOutsideImage {
                    scene_id: scene_id.into(),
                    id: obj.id,
                    cx: g.cx,
                    cy: g.cy,
                });
            }
            // NaN and infinities must land here too, not pass silently.
            let usable = |v: f64| v.is_finite() && v > 0.0;
            if !usable(g.width) || !usable(g.height) {
                return Err(SceneError::DegenerateGrasp {
                    scene_id: scene_id.into(),
                    id: obj.id,
                    width: g.width,
                    height: g.height,
                });
            }
        }
    }
    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i + 1..] {
            if a.centroid_px == b.centroid_px {
                return Err(SceneError::CoincidentCentroids {
                    scene_id: scene_id.into(),
                    a: a.id,
                    b: b.id,
                });
            }
        }
    }
    Ok(())
}

/// Planar predicate for the displacement `v` (subject centroid minus object
/// centroid). Sectors are half-open: a displacement exactly on a boundary
/// belongs to the higher-angle sector.
pub fn planar_predicate(v: (f64, f64), sector_offset_rad: f64) -> Predicate {
    let angle = v.1.atan2(v.0) - sector_offset_rad;
    let deg = angle.to_degrees();
    let idx = ((deg + 22.5).rem_euclid(360.0) / 45.0).floor() as usize % 8;
    SECTOR_ORDER[idx]
}

/// Computes every pairwise relation. For each ordered pair of distinct
/// objects exactly one planar edge is emitted; `On` edges are added when
/// mask overlap and the depth gap qualify, and are skipped without error
/// when either object lacks depth. Output is sorted by (subject, object,
/// predicate).
pub fn resolve_pairwise_relations(
    scene_id: &str,
    objects: &[ObjectNode],
    config: &RelationConfig,
) -> Result<Vec<RelationEdge>, SceneError> {
    for obj in objects {
        if !obj.centroid_px.0.is_finite() || !obj.centroid_px.1.is_finite() {
            return Err(SceneError::BadCentroid {
                scene_id: scene_id.into(),
                id: obj.id,
            });
        }
    }
    let mut edges = Vec::new();
    for a in objects {
        for b in objects {
            if a.id == b.id {
                continue;
            }
            if a.centroid_px == b.centroid_px {
                return Err(SceneError::CoincidentCentroids {
                    scene_id: scene_id.into(),
                    a: a.id.min(b.id),
                    b: a.id.max(b.id),
                });
            }
            let v = (
                a.centroid_px.0 - b.centroid_px.0,
                a.centroid_px.1 - b.centroid_px.1,
            );
            edges.push(RelationEdge {
                subject_id: a.id,
                object_id: b.id,
                predicate: planar_predicate(v, config.sector_offset_rad),
            });
            if let (Some(da), Some(db)) = (a.depth_m, b.depth_m) {
                if db - da >= config.on_depth_margin_m {
                    let overlap = a
                        .mask
                        .intersection_area(&b.mask)
                        .map_err(|_| SceneError::MaskSizeMismatch {
                            scene_id: scene_id.into(),
                            id: a.id,
                            mw: a.mask.width(),
                            mh: a.mask.height(),
                            w: b.mask.width(),
                            h: b.mask.height(),
                        })?;
                    if (overlap as f64) >= config.on_overlap_frac * (a.mask.area() as f64) {
                        edges.push(RelationEdge {
                            subject_id: a.id,
                            object_id: b.id,
                            predicate: Predicate::On,
                        });
                    }
                }
            }
        }
    }
    edges.sort_by_key(|e| (e.subject_id, e.object_id, e.predicate));
    Ok(edges)
}

/// Picks the extreme member of a group for one superlative. Left and right
/// compare centroid x. Closest and furthest compare depth when every member
/// has it (closest = smallest depth); otherwise they fall back to centroid y
/// (closest = largest y, the bottom of a tilted tabletop view). Ties go to
/// the lowest id.
pub fn select_extreme<'a, I>(members: I, kind: LocationKind) -> Option<ObjectId>
where
    I: IntoIterator<Item = &'a ObjectNode>,
{
    let members: Vec<&ObjectNode> = members.into_iter().collect();
    if members.is_empty() {
        return None;
    }
    let all_depth = members.iter().all(|o| o.depth_m.is_some());
    let key = |o: &ObjectNode| -> f64 {
        match kind {
            LocationKind::Leftmost | LocationKind::Rightmost => o.centroid_px.0,
            LocationKind::Closest | LocationKind::Furthest => {
                if all_depth {
                    o.depth_m.unwrap()
                } else {
                    o.centroid_px.1
                }
            }
        }
    };
    let want_max = match kind {
        LocationKind::Leftmost => false,
        LocationKind::Rightmost => true,
        LocationKind::Closest => !all_depth,
        LocationKind::Furthest => all_depth,
    };
    let mut best = members[0];
    for &o in &members[1..] {
        let (ko, kb) = (key(o), key(best));
        let better = if want_max { ko > kb } else { ko < kb };
        if better || (ko == kb && o.id < best.id) {
            best = o;
        }
    }
    Some(best.id)
}

/// Like [`select_extreme`], but returns `None` when the winner shares its
/// key value with another member; generation uses this so superlative
/// wording is never ambiguous to a reader.
pub fn select_extreme_strict<'a, I>(members: I, kind: LocationKind) -> Option<ObjectId>
where
    I: IntoIterator<Item = &'a ObjectNode>,
{
    let members: Vec<&ObjectNode> = members.into_iter().collect();
    let winner = select_extreme(members.iter().copied(), kind)?;
    let all_depth = members.iter().all(|o| o.depth_m.is_some());
    let key = |o: &ObjectNode| -> f64 {
        match kind {
            LocationKind::Leftmost | LocationKind::Rightmost => o.centroid_px.0,
            LocationKind::Closest | LocationKind::Furthest => {
                if all_depth {
                    o.depth_m.unwrap()
                } else {
                    o.centroid_px.1
                }
            }
        }
    };
    let winner_key = key(members.iter().find(|o| o.id == winner).unwrap());
    let tied = members
        .iter()
        .filter(|o| key(o) == winner_key)
        .count();
    (tied == 1).then_some(winner)
}

/// Assigns the four superlatives within every category scope and the
/// all-objects scope. Singleton scopes still carry all four labels. Output
/// is sorted by (scope, label, object id), whole-scene labels first.
pub fn resolve_absolute_locations(objects: &[ObjectNode]) -> Vec<LocationLabel> {
    let mut labels = Vec::new();
    let mut scopes: Vec<(Option<String>, Vec<&ObjectNode>)> =
        vec![(None, objects.iter().collect())];
    let mut by_category: BTreeMap<&str, Vec<&ObjectNode>> = BTreeMap::new();
    for obj in objects {
        by_category.entry(&obj.category).or_default().push(obj);
    }
    for (category, members) in by_category {
        scopes.push((Some(category.to_string()), members));
    }
    for (scope, members) in scopes {
        for kind in LOCATION_KINDS {
            if let Some(id) = select_extreme(members.iter().copied(), kind) {
                labels.push(LocationLabel {
                    object_id: id,
                    label: kind,
                    scope: scope.clone(),
                });
            }
        }
    }
    labels.sort_by(|a, b| {
        (a.scope.as_deref(), a.label, a.object_id).cmp(&(b.scope.as_deref(), b.label, b.object_id))
    });
    labels
}

/// Categories present at least twice; referring by category alone cannot
/// single out these objects.
pub fn ambiguous_categories(objects: &[ObjectNode]) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for obj in objects {
        *counts.entry(&obj.category).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, n)| n >= 2)
        .map(|(c, _)| c.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Color,
    InstanceAttribute,
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrKind::Color => "color",
            AttrKind::InstanceAttribute => "instance_attribute",
        })
    }
}

/// Attributes of the target that no same-category rival shares: annotating
/// one of these is enough to discriminate the target from its rivals.
/// A rival lacking the attribute entirely counts as differing. Returns all
/// annotated attributes when the target has no rivals.
pub fn distinguishing_attributes(
    scene: &SceneGraph,
    target_id: ObjectId,
) -> Result<Vec<(AttrKind, String)>, SceneError> {
    let target = scene.object(target_id)?;
    let rivals: Vec<&ObjectNode> = scene
        .objects
        .iter()
        .filter(|o| o.id != target_id && o.category == target.category)
        .collect();
    let mut out = Vec::new();
    if let Some(color) = &target.color {
        if rivals.iter().all(|r| r.color.as_ref() != Some(color)) {
            out.push((AttrKind::Color, color.clone()));
        }
    }
    if let Some(attr) = &target.instance_attribute {
        if rivals.iter().all(|r| r.instance_attribute.as_ref() != Some(attr)) {
            out.push((AttrKind::InstanceAttribute, attr.clone()));
        }
    }
    Ok(out)
}
