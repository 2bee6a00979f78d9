//! Corpus-level counting: scenes, vocabulary coverage, and the
//! family-by-split breakdown of expression records.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::refexp::Family;
use crate::scene::Split;

use super::Dataset;

/// Unique values seen vs. total occurrences for one concept kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConceptCount {
    pub unique: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub scenes: usize,
    pub objects: usize,
    /// Distinct object categories across all scenes.
    pub categories: usize,
    /// Distinct instance names across all scenes.
    pub instances: usize,
    pub tuples: usize,
    /// Tuple counts per split and family. Every split and family key is
    /// present, zero-filled, so consumers never need default lookups.
    pub per_split: BTreeMap<Split, BTreeMap<Family, usize>>,
    /// Concept usage keyed by concept kind.
    pub concepts: BTreeMap<String, ConceptCount>,
}

impl StatsReport {
    pub fn family_total(&self, family: Family) -> usize {
        self.per_split.values().map(|m| m[&family]).sum()
    }

    pub fn split_total(&self, split: Split) -> usize {
        self.per_split[&split].values().sum()
    }
}

pub fn compute_stats(dataset: &Dataset) -> StatsReport {
    let mut per_split: BTreeMap<Split, BTreeMap<Family, usize>> = BTreeMap::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        per_split.insert(
            split,
            crate::refexp::FAMILIES.iter().map(|&f| (f, 0)).collect(),
        );
    }
    let splits = dataset.splits();
    for tuple in &dataset.tuples {
        if let Some(&split) = splits.get(&tuple.expr.scene_id) {
            *per_split
                .get_mut(&split)
                .expect("all splits prefilled")
                .get_mut(&tuple.expr.program.family)
                .expect("all families prefilled") += 1;
        }
    }

    let mut categories = BTreeSet::new();
    let mut instances = BTreeSet::new();
    let mut colors = BTreeSet::new();
    let mut attributes = BTreeSet::new();
    let mut predicates = BTreeSet::new();
    let mut location_labels = BTreeSet::new();
    let mut objects = 0usize;
    let mut with_color = 0usize;
    let mut with_attribute = 0usize;
    let mut edge_total = 0usize;
    let mut location_total = 0usize;
    for scene in dataset.scenes.values() {
        objects += scene.objects.len();
        for obj in &scene.objects {
            categories.insert(obj.category.clone());
            instances.insert(obj.instance_name.clone());
            if let Some(c) = &obj.color {
                colors.insert(c.clone());
                with_color += 1;
            }
            if let Some(a) = &obj.instance_attribute {
                attributes.insert(a.clone());
                with_attribute += 1;
            }
        }
        edge_total += scene.relations.len();
        for edge in &scene.relations {
            predicates.insert(edge.predicate);
        }
        location_total += scene.locations.len();
        for loc in &scene.locations {
            location_labels.insert((loc.label, loc.scope.clone()));
        }
    }

    let mut concepts = BTreeMap::new();
    let mut put = |key: &str, unique: usize, total: usize| {
        concepts.insert(key.to_string(), ConceptCount { unique, total });
    };
    put("category", categories.len(), objects);
    put("instance", instances.len(), objects);
    put("color", colors.len(), with_color);
    put("instance_attribute", attributes.len(), with_attribute);
    put("relation", predicates.len(), edge_total);
    put("location", location_labels.len(), location_total);

    StatsReport {
        scenes: dataset.scenes.len(),
        objects,
        categories: categories.len(),
        instances: instances.len(),
        tuples: dataset.tuples.len(),
        per_split,
        concepts,
    }
}
