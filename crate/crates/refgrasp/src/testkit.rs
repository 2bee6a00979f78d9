//! Scene builders shared by unit tests across modules.

use crate::grasp::GraspRectangle;
use crate::mask::Mask;
use crate::scene::{ObjectId, ObjectNode, RelationConfig, SceneGraph, Split};

/// A 7x7 square object on a 160x160 canvas. No color, depth, or grasps.
pub(crate) fn test_object(
    id: ObjectId,
    category: &str,
    instance: &str,
    cx: f64,
    cy: f64,
) -> ObjectNode {
    let mut mask = Mask::new(160, 160);
    mask.fill_rect(cx as u32 - 3, cy as u32 - 3, 7, 7);
    let bbox = mask.tight_bbox().unwrap();
    ObjectNode {
        id,
        category: category.into(),
        instance_name: instance.into(),
        name_synonyms: vec![],
        color: None,
        instance_attribute: None,
        centroid_px: (cx, cy),
        depth_m: None,
        bbox,
        mask,
        grasps: vec![],
    }
}

/// Same builder with one axis-aligned grasp pinned at the centroid.
pub(crate) fn grasped_object(
    id: ObjectId,
    category: &str,
    instance: &str,
    cx: f64,
    cy: f64,
) -> ObjectNode {
    let mut obj = test_object(id, category, instance, cx, cy);
    obj.grasps = vec![GraspRectangle::new(cx, cy, 0.0, 10.0, 6.0)];
    obj
}

pub(crate) fn scene_named(scene_id: &str, objects: Vec<ObjectNode>) -> SceneGraph {
    SceneGraph::build(
        scene_id.into(),
        (160, 160),
        String::new(),
        String::new(),
        objects,
        Split::Train,
        &RelationConfig::default(),
    )
    .unwrap()
}

pub(crate) fn scene_of(objects: Vec<ObjectNode>) -> SceneGraph {
    scene_named("s0", objects)
}
