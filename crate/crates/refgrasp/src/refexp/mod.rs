//! Referring-expression engine: structured programs over scene graphs, a
//! sub-template catalog with a paraphrase lexicon, seeded generation, and a
//! validator that re-executes and re-parses stored tuples.

pub mod generate;
pub mod templates;
pub mod validate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{
    select_extreme, AttrKind, LocationKind, ObjectId, ObjectNode, Predicate, SceneGraph,
};

#[derive(Debug, Error)]
pub enum RefExpError {
    #[error("anchor filter matched {count} objects, expected exactly 1")]
    AnchorResolution { count: usize },
    #[error("scene {scene_id}: no valid {family} program for object {target_id}")]
    NoValidProgram {
        scene_id: String,
        target_id: ObjectId,
        family: Family,
    },
    #[error("lexicon has no entry for {what}")]
    LexiconGap { what: String },
    #[error("unknown sub-template id {id}")]
    UnknownTemplate { id: u32 },
    #[error("template catalog invalid: {0}")]
    BadCatalog(String),
}

/// The five expression schemata, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Name,
    Attribute,
    Relation,
    Location,
    Mixed,
}

pub const FAMILIES: [Family; 5] = [
    Family::Name,
    Family::Attribute,
    Family::Relation,
    Family::Location,
    Family::Mixed,
];

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Name => "name",
            Family::Attribute => "attribute",
            Family::Relation => "relation",
            Family::Location => "location",
            Family::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "name" => Ok(Family::Name),
            "attribute" => Ok(Family::Attribute),
            "relation" => Ok(Family::Relation),
            "location" => Ok(Family::Location),
            "mixed" => Ok(Family::Mixed),
            other => Err(format!("unknown family {other:?}")),
        }
    }
}

/// What the head noun denotes: a category ("cereal box") or a specific
/// instance name ("choco crispies").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "lowercase")]
pub enum Concept {
    Category(String),
    Instance(String),
}

impl Concept {
    pub fn name(&self) -> &str {
        match self {
            Concept::Category(n) | Concept::Instance(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRef {
    pub kind: AttrKind,
    pub value: String,
}

/// One noun phrase's constraints. Filters apply in order: concept, then
/// attribute, then superlative location over whatever candidates remain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetFilter {
    pub concept: Concept,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<AttributeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationKind>,
}

impl TargetFilter {
    pub fn plain(concept: Concept) -> Self {
        Self {
            concept,
            attribute: None,
            location: None,
        }
    }

    pub fn is_decorated(&self) -> bool {
        self.attribute.is_some() || self.location.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub predicate: Predicate,
    pub filter: TargetFilter,
}

/// Executable logical form of a referring expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefProgram {
    pub family: Family,
    pub sub_template_id: u32,
    pub target: TargetFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferringExpression {
    pub text: String,
    pub scene_id: String,
    pub target_id: ObjectId,
    pub program: RefProgram,
    pub prefix: String,
}

/// One benchmark record: an expression with its dataset-wide id. Target
/// mask, bbox, and grasps are reached through (scene_id, target_id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub tuple_id: String,
    #[serde(flatten)]
    pub expr: ReferringExpression,
}

fn filter_candidates<'a>(filter: &TargetFilter, scene: &'a SceneGraph) -> Vec<&'a ObjectNode> {
    let mut cands: Vec<&ObjectNode> = scene
        .objects
        .iter()
        .filter(|o| match &filter.concept {
            Concept::Category(c) => &o.category == c,
            Concept::Instance(n) => &o.instance_name == n,
        })
        .collect();
    if let Some(attr) = &filter.attribute {
        cands.retain(|o| match attr.kind {
            AttrKind::Color => o.color.as_deref() == Some(attr.value.as_str()),
            AttrKind::InstanceAttribute => {
                o.instance_attribute.as_deref() == Some(attr.value.as_str())
            }
        });
    }
    if let Some(kind) = filter.location {
        let winner = select_extreme(cands.iter().copied(), kind);
        cands.retain(|o| Some(o.id) == winner);
    }
    cands
}

/// Runs a program against a scene and returns the surviving object ids.
///
/// Semantics: filter by the target concept, then attribute, then superlative
/// location over the remaining candidates; if an anchor is present, resolve
/// it first (it must match exactly one object) and keep only candidates
/// carrying the stated relation edge to it. Pure and deterministic.
pub fn execute_program(
    program: &RefProgram,
    scene: &SceneGraph,
) -> Result<BTreeSet<ObjectId>, RefExpError> {
    let mut cands = filter_candidates(&program.target, scene);
    if let Some(anchor) = &program.anchor {
        let anchors = filter_candidates(&anchor.filter, scene);
        if anchors.len() != 1 {
            return Err(RefExpError::AnchorResolution {
                count: anchors.len(),
            });
        }
        let anchor_id = anchors[0].id;
        cands.retain(|o| {
            scene.relations.iter().any(|e| {
                e.subject_id == o.id && e.object_id == anchor_id && e.predicate == anchor.predicate
            })
        });
    }
    Ok(cands.into_iter().map(|o| o.id).collect())
}
