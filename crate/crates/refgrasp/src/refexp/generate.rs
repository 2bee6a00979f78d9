//! Seeded expression generation. Programs are built so that execution
//! provably returns the target alone, then voiced through a sub-template
//! with sampled paraphrases.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;

use crate::refexp::templates::{Lexicon, TemplateCatalog};
use crate::refexp::{
    execute_program, AnchorSpec, AttributeRef, Concept, Family, RefExpError, RefProgram,
    ReferringExpression, TargetFilter, FAMILIES,
};
use crate::scene::{
    distinguishing_attributes, select_extreme_strict, LocationKind, ObjectId, ObjectNode,
    Predicate, SceneGraph, LOCATION_KINDS,
};
use crate::util::{derive_rng, token_count};

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    /// Expressions to attempt per family per scene, in canonical family
    /// order. A missing family generates nothing.
    pub quotas: std::collections::BTreeMap<Family, usize>,
    /// Hard cap on expressions per scene, across families.
    pub max_per_scene: usize,
    /// Whitespace-token budget per expression, prefix included.
    pub max_tokens: usize,
    pub lexicon: Lexicon,
    pub templates: TemplateCatalog,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn new(lexicon: Lexicon, seed: u64) -> Self {
        let quotas = FAMILIES.iter().map(|&f| (f, 4)).collect();
        Self {
            quotas,
            max_per_scene: 16,
            max_tokens: 20,
            lexicon,
            templates: TemplateCatalog::builtin(),
            seed,
        }
    }
}

/// True when referring to the object by instance name is unambiguous.
fn instance_unique(scene: &SceneGraph, obj: &ObjectNode) -> bool {
    scene
        .objects
        .iter()
        .filter(|o| o.instance_name == obj.instance_name)
        .count()
        == 1
}

fn category_count(scene: &SceneGraph, category: &str) -> usize {
    scene.objects.iter().filter(|o| o.category == category).count()
}

fn has_edge(scene: &SceneGraph, subject: ObjectId, predicate: Predicate, object: ObjectId) -> bool {
    scene
        .relations
        .iter()
        .any(|e| e.subject_id == subject && e.object_id == object && e.predicate == predicate)
}

/// A concept that picks out `obj` alone without decoration: its category if
/// unique in the scene, else its instance name if unique.
fn plain_unique_concept(scene: &SceneGraph, obj: &ObjectNode) -> Option<Concept> {
    if category_count(scene, &obj.category) == 1 {
        Some(Concept::Category(obj.category.clone()))
    } else if instance_unique(scene, obj) {
        Some(Concept::Instance(obj.instance_name.clone()))
    } else {
        None
    }
}

/// Predicates on edges from `subject` to `object`, in a fixed order.
fn edge_predicates(scene: &SceneGraph, subject: ObjectId, object: ObjectId) -> Vec<Predicate> {
    scene
        .relations
        .iter()
        .filter(|e| e.subject_id == subject && e.object_id == object)
        .map(|e| e.predicate)
        .collect()
}

/// Attributes annotated on the object, color first.
fn annotated_attributes(obj: &ObjectNode) -> Vec<AttributeRef> {
    let mut out = Vec::new();
    if let Some(c) = &obj.color {
        out.push(AttributeRef {
            kind: crate::scene::AttrKind::Color,
            value: c.clone(),
        });
    }
    if let Some(a) = &obj.instance_attribute {
        out.push(AttributeRef {
            kind: crate::scene::AttrKind::InstanceAttribute,
            value: a.clone(),
        });
    }
    out
}

/// Location kinds for which `target` is the strict superlative within
/// `members`.
fn strict_kinds(members: &[&ObjectNode], target: ObjectId) -> Vec<LocationKind> {
    LOCATION_KINDS
        .iter()
        .copied()
        .filter(|&k| select_extreme_strict(members.iter().copied(), k) == Some(target))
        .collect()
}

/// A decorated filter resolving `anchor` alone even though its category is
/// shared: category plus a distinguishing attribute, or category plus a
/// strict superlative within the category.
fn decorated_anchor_filter(
    scene: &SceneGraph,
    anchor: &ObjectNode,
    rng: &mut ChaCha12Rng,
) -> Option<TargetFilter> {
    let mut options: Vec<TargetFilter> = Vec::new();
    if let Ok(attrs) = distinguishing_attributes(scene, anchor.id) {
        for attr in attrs {
            options.push(TargetFilter {
                concept: Concept::Category(anchor.category.clone()),
                attribute: Some(AttributeRef {
                    kind: attr.0,
                    value: attr.1,
                }),
                location: None,
            });
        }
    }
    let members: Vec<&ObjectNode> = scene
        .objects
        .iter()
        .filter(|o| o.category == anchor.category)
        .collect();
    for kind in strict_kinds(&members, anchor.id) {
        options.push(TargetFilter {
            concept: Concept::Category(anchor.category.clone()),
            attribute: None,
            location: Some(kind),
        });
    }
    options.choose(rng).cloned()
}

fn pick_template(
    templates: &TemplateCatalog,
    program: &mut RefProgram,
    rng: &mut ChaCha12Rng,
) -> bool {
    let ids: Vec<u32> = templates
        .family(program.family)
        .filter(|t| t.matches_program(program))
        .map(|t| t.id)
        .collect();
    match ids.choose(rng) {
        Some(&id) => {
            program.sub_template_id = id;
            true
        }
        None => false,
    }
}

/// Builds a program of the requested family that provably refers to the
/// target alone. The returned program has already passed execution.
pub fn build_program(
    scene: &SceneGraph,
    target_id: ObjectId,
    family: Family,
    templates: &TemplateCatalog,
    rng: &mut ChaCha12Rng,
) -> Result<RefProgram, RefExpError> {
    let fail = || RefExpError::NoValidProgram {
        scene_id: scene.scene_id.clone(),
        target_id,
        family,
    };
    let target = scene.object(target_id).map_err(|_| fail())?;
    let ambiguous = scene.ambiguous_categories();
    // Every family except plain naming needs category ambiguity: if the
    // category alone suffices, the richer families would be vacuous.
    if family != Family::Name && !ambiguous.contains(&target.category) {
        return Err(fail());
    }
    let category_members: Vec<&ObjectNode> = scene
        .objects
        .iter()
        .filter(|o| o.category == target.category)
        .collect();

    let mut program = match family {
        Family::Name => {
            if !instance_unique(scene, target) {
                return Err(fail());
            }
            RefProgram {
                family,
                sub_template_id: 0,
                target: TargetFilter::plain(Concept::Instance(target.instance_name.clone())),
                anchor: None,
            }
        }
        Family::Attribute => {
            let attrs = distinguishing_attributes(scene, target_id).map_err(|_| fail())?;
            let attr = attrs
                .choose(rng)
                .ok_or_else(fail)?;
            RefProgram {
                family,
                sub_template_id: 0,
                target: TargetFilter {
                    concept: Concept::Category(target.category.clone()),
                    attribute: Some(AttributeRef {
                        kind: attr.0,
                        value: attr.1.clone(),
                    }),
                    location: None,
                },
                anchor: None,
            }
        }
        Family::Location => {
            let kinds = strict_kinds(&category_members, target_id);
            let kind = *kinds.choose(rng).ok_or_else(fail)?;
            RefProgram {
                family,
                sub_template_id: 0,
                target: TargetFilter {
                    concept: Concept::Category(target.category.clone()),
                    attribute: None,
                    location: Some(kind),
                },
                anchor: None,
            }
        }
        Family::Relation => {
            build_relational(scene, target, &category_members, None, rng).ok_or_else(fail)?
        }
        Family::Mixed => build_mixed(scene, target, &category_members, rng).ok_or_else(fail)?,
    };

    if !pick_template(templates, &mut program, rng) {
        return Err(fail());
    }
    // Belt and braces: only emit programs whose execution is the target.
    match execute_program(&program, scene) {
        Ok(ids) if ids.len() == 1 && ids.contains(&target_id) => Ok(program),
        _ => Err(fail()),
    }
}

/// Relation-family core, reused by mixed variants. `extra` optionally
/// constrains the target side (attribute or location already chosen);
/// uniqueness is then required within that constrained rival set.
fn build_relational(
    scene: &SceneGraph,
    target: &ObjectNode,
    category_members: &[&ObjectNode],
    extra: Option<&TargetFilter>,
    rng: &mut ChaCha12Rng,
) -> Option<RefProgram> {
    let rivals: Vec<&ObjectNode> = match extra {
        None => category_members
            .iter()
            .copied()
            .filter(|o| o.id != target.id)
            .collect(),
        Some(filter) => category_members
            .iter()
            .copied()
            .filter(|o| o.id != target.id)
            .filter(|o| match &filter.attribute {
                None => true,
                Some(a) => match a.kind {
                    crate::scene::AttrKind::Color => o.color.as_deref() == Some(a.value.as_str()),
                    crate::scene::AttrKind::InstanceAttribute => {
                        o.instance_attribute.as_deref() == Some(a.value.as_str())
                    }
                },
            })
            .collect(),
    };
    let mut anchors: Vec<&ObjectNode> =
        scene.objects.iter().filter(|o| o.id != target.id).collect();
    anchors.shuffle(rng);
    for anchor in anchors {
        let Some(concept) = plain_unique_concept(scene, anchor) else {
            continue;
        };
        let mut predicates = edge_predicates(scene, target.id, anchor.id);
        predicates.shuffle(rng);
        for predicate in predicates {
            // The relation must cut every rival that survives the target
            // filter, otherwise execution returns more than one object.
            if rivals
                .iter()
                .any(|r| has_edge(scene, r.id, predicate, anchor.id))
            {
                continue;
            }
            let mut target_filter = match extra {
                Some(f) => f.clone(),
                None => TargetFilter::plain(Concept::Category(target.category.clone())),
            };
            target_filter.concept = Concept::Category(target.category.clone());
            return Some(RefProgram {
                family: if extra.is_some() {
                    Family::Mixed
                } else {
                    Family::Relation
                },
                sub_template_id: 0,
                target: target_filter,
                anchor: Some(AnchorSpec {
                    predicate,
                    filter: TargetFilter::plain(concept),
                }),
            });
        }
    }
    None
}

fn build_mixed(
    scene: &SceneGraph,
    target: &ObjectNode,
    category_members: &[&ObjectNode],
    rng: &mut ChaCha12Rng,
) -> Option<RefProgram> {
    // Four shapes: attribute+location, attribute+relation, location+relation,
    // relation with a decorated anchor.
    let mut shapes = [0u8, 1, 2, 3];
    shapes.shuffle(rng);
    for shape in shapes {
        let built = match shape {
            0 => mixed_attribute_location(scene, target, category_members, rng),
            1 => mixed_attribute_relation(scene, target, category_members, rng),
            2 => mixed_location_relation(scene, target, category_members, rng),
            _ => mixed_decorated_anchor(scene, target, category_members, rng),
        };
        if built.is_some() {
            return built;
        }
    }
    None
}

fn mixed_attribute_location(
    scene: &SceneGraph,
    target: &ObjectNode,
    category_members: &[&ObjectNode],
    rng: &mut ChaCha12Rng,
) -> Option<RefProgram> {
    let _ = scene;
    let attrs = annotated_attributes(target);
    let attr = attrs.choose(rng)?.clone();
    let with_attr: Vec<&ObjectNode> = category_members
        .iter()
        .copied()
        .filter(|o| match attr.kind {
            crate::scene::AttrKind::Color => o.color.as_deref() == Some(attr.value.as_str()),
            crate::scene::AttrKind::InstanceAttribute => {
                o.instance_attribute.as_deref() == Some(attr.value.as_str())
            }
        })
        .collect();
    let kinds = strict_kinds(&with_attr, target.id);
    let kind = *kinds.choose(rng)?;
    Some(RefProgram {
        family: Family::Mixed,
        sub_template_id: 0,
        target: TargetFilter {
            concept: Concept::Category(target.category.clone()),
            attribute: Some(attr),
            location: Some(kind),
        },
        anchor: None,
    })
}

fn mixed_attribute_relation(
    scene: &SceneGraph,
    target: &ObjectNode,
    category_members: &[&ObjectNode],
    rng: &mut ChaCha12Rng,
) -> Option<RefProgram> {
    let attrs = annotated_attributes(target);
    let attr = attrs.choose(rng)?.clone();
    let filter = TargetFilter {
        concept: Concept::Category(target.category.clone()),
        attribute: Some(attr),
        location: None,
    };
    build_relational(scene, target, category_members, Some(&filter), rng)
}

fn mixed_location_relation(
    scene: &SceneGraph,
    target: &ObjectNode,
    category_members: &[&ObjectNode],
    rng: &mut ChaCha12Rng,
) -> Option<RefProgram> {
    // The superlative alone already pins the target; the relation is
    // truthful extra color. Execution order applies location before the
    // anchor check, so any true edge keeps exactly the target.
    let kinds = strict_kinds(category_members, target.id);
    let kind = *kinds.choose(rng)?;
    let mut anchors: Vec<&ObjectNode> =
        scene.objects.iter().filter(|o| o.id != target.id).collect();
    anchors.shuffle(rng);
    for anchor in anchors {
        let Some(concept) = plain_unique_concept(scene, anchor) else {
            continue;
        };
        let predicates = edge_predicates(scene, target.id, anchor.id);
        let Some(&predicate) = predicates.choose(rng) else {
            continue;
        };
        return Some(RefProgram {
            family: Family::Mixed,
            sub_template_id: 0,
            target: TargetFilter {
                concept: Concept::Category(target.category.clone()),
                attribute: None,
                location: Some(kind),
            },
            anchor: Some(AnchorSpec {
                predicate,
                filter: TargetFilter::plain(concept),
            }),
        });
    }
    None
}

fn mixed_decorated_anchor(
    scene: &SceneGraph,
    target: &ObjectNode,
    category_members: &[&ObjectNode],
    rng: &mut ChaCha12Rng,
) -> Option<RefProgram> {
    let rivals: Vec<&ObjectNode> = category_members
        .iter()
        .copied()
        .filter(|o| o.id != target.id)
        .collect();
    let mut anchors: Vec<&ObjectNode> = scene
        .objects
        .iter()
        .filter(|o| o.id != target.id)
        .filter(|o| crate::scene::ambiguous_categories(&scene.objects).contains(&o.category))
        .collect();
    anchors.shuffle(rng);
    for anchor in anchors {
        let Some(filter) = decorated_anchor_filter(scene, anchor, rng) else {
            continue;
        };
        let mut predicates = edge_predicates(scene, target.id, anchor.id);
        predicates.shuffle(rng);
        for predicate in predicates {
            if rivals
                .iter()
                .any(|r| has_edge(scene, r.id, predicate, anchor.id))
            {
                continue;
            }
            return Some(RefProgram {
                family: Family::Mixed,
                sub_template_id: 0,
                target: TargetFilter::plain(Concept::Category(target.category.clone())),
                anchor: Some(AnchorSpec { predicate, filter }),
            });
        }
    }
    None
}

fn choose<'a>(forms: &'a [String], rng: &mut ChaCha12Rng) -> &'a str {
    forms.choose(rng).map(|s| s.as_str()).unwrap_or("")
}

/// Expands the anchor noun phrase: optional superlative, optional
/// attribute, then the noun.
fn anchor_phrase(
    anchor: &AnchorSpec,
    lexicon: &Lexicon,
    rng: &mut ChaCha12Rng,
) -> Result<String, RefExpError> {
    let mut parts: Vec<String> = Vec::new();
    if let Some(kind) = anchor.filter.location {
        parts.push(choose(lexicon.location_forms(kind)?, rng).to_string());
    }
    if let Some(attr) = &anchor.filter.attribute {
        parts.push(attr.value.clone());
    }
    let noun_forms = lexicon.concept_forms(&anchor.filter.concept);
    parts.push(choose(&noun_forms, rng).to_string());
    Ok(parts.join(" "))
}

/// Voices a program through its sub-template. Returns the full text and the
/// sampled prefix. Deterministic given the rng state; lowercase,
/// single-spaced, no trailing punctuation.
pub fn realize_text(
    program: &RefProgram,
    lexicon: &Lexicon,
    templates: &TemplateCatalog,
    rng: &mut ChaCha12Rng,
) -> Result<(String, String), RefExpError> {
    let template = templates.by_id(program.sub_template_id)?;
    let prefix = choose(lexicon.prefix_forms()?, rng).to_string();
    let mut body = template.skeleton.clone();
    // Longest placeholder first so "{locside}" is not eaten by "{loc}".
    if body.contains("{locside}") {
        let kind = program
            .target
            .location
            .ok_or_else(|| RefExpError::LexiconGap {
                what: "location slot for a side-form template".into(),
            })?;
        body = body.replace("{locside}", lexicon.side_form(kind)?);
    }
    if body.contains("{loc}") {
        let kind = program
            .target
            .location
            .ok_or_else(|| RefExpError::LexiconGap {
                what: "location slot".into(),
            })?;
        body = body.replace("{loc}", choose(lexicon.location_forms(kind)?, rng));
    }
    if body.contains("{name}") || body.contains("{obj}") {
        let forms = lexicon.concept_forms(&program.target.concept);
        let form = choose(&forms, rng).to_string();
        body = body.replace("{name}", &form).replace("{obj}", &form);
    }
    if body.contains("{att}") {
        let attr = program
            .target
            .attribute
            .as_ref()
            .ok_or_else(|| RefExpError::LexiconGap {
                what: "attribute slot".into(),
            })?;
        body = body.replace("{att}", &attr.value);
    }
    if body.contains("{rel}") || body.contains("{anchor}") {
        let anchor = program.anchor.as_ref().ok_or_else(|| RefExpError::LexiconGap {
            what: "anchor slot".into(),
        })?;
        let rel = choose(lexicon.relation_forms(anchor.predicate)?, rng).to_string();
        let phrase = anchor_phrase(anchor, lexicon, rng)?;
        body = body.replace("{rel}", &rel).replace("{anchor}", &phrase);
    }
    let text = format!("{prefix} {body}")
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    Ok((text, prefix))
}

/// Generates expressions for one scene under the per-family quotas. The rng
/// stream is derived from (seed, scene id), so results do not depend on the
/// order scenes are processed in. Duplicate (text, target) pairs are
/// dropped. Output order: family order, then emission order.
pub fn generate_for_scene(
    scene: &SceneGraph,
    config: &GenerationConfig,
) -> Vec<ReferringExpression> {
    let mut rng = derive_rng(config.seed, &["refexp", &scene.scene_id]);
    let mut out: Vec<ReferringExpression> = Vec::new();
    let mut seen: std::collections::BTreeSet<(String, ObjectId)> = Default::default();
    for family in FAMILIES {
        let quota = config.quotas.get(&family).copied().unwrap_or(0);
        if quota == 0 {
            continue;
        }
        let mut emitted = 0usize;
        let mut targets: Vec<ObjectId> = scene.objects.iter().map(|o| o.id).collect();
        targets.sort_unstable();
        targets.shuffle(&mut rng);
        for target_id in targets {
            if emitted >= quota || out.len() >= config.max_per_scene {
                break;
            }
            let Ok(program) =
                build_program(scene, target_id, family, &config.templates, &mut rng)
            else {
                continue;
            };
            // A long draw (verbose phrases) can bust the token budget;
            // resampling the surface forms usually fixes it.
            for _attempt in 0..3 {
                match realize_text(&program, &config.lexicon, &config.templates, &mut rng) {
                    Ok((text, prefix)) => {
                        if token_count(&text) > config.max_tokens {
                            continue;
                        }
                        if seen.insert((text.clone(), target_id)) {
                            out.push(ReferringExpression {
                                text,
                                scene_id: scene.scene_id.clone(),
                                target_id,
                                program: program.clone(),
                                prefix,
                            });
                            emitted += 1;
                        }
                        break;
                    }
                    Err(_) => break,
                }
            }
        }
    }
    out
}
