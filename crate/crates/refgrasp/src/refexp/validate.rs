//! Structural audit of expression tuples against their scenes. Catches
//! broken references (execution no longer isolates the target), template
//! drift, and text that could not have been produced from the recorded
//! program under the given lexicon.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::refexp::templates::{Lexicon, TemplateCatalog};
use crate::refexp::{execute_program, Family, RefExpError, RefProgram, Tuple};
use crate::scene::SceneGraph;
use crate::util::token_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// scene_id not present in the dataset.
    UnknownScene,
    /// target_id not present in the scene.
    UnknownTarget,
    /// Executing the program does not yield exactly the target.
    NotUnique,
    /// Non-name family used although the category alone is unambiguous.
    VacuousFamily,
    /// sub_template_id missing, from the wrong family, or shaped
    /// differently than the program.
    TemplateMismatch,
    /// Text cannot be derived from the program with this lexicon.
    TextMismatch,
    /// Token count exceeds the budget.
    TokenBudget,
    /// Same (scene, text, target) or tuple_id appeared earlier.
    Duplicate,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnknownScene => "unknown_scene",
            Self::UnknownTarget => "unknown_target",
            Self::NotUnique => "not_unique",
            Self::VacuousFamily => "vacuous_family",
            Self::TemplateMismatch => "template_mismatch",
            Self::TextMismatch => "text_mismatch",
            Self::TokenBudget => "token_budget",
            Self::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub tuple_id: String,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Tuples examined.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violation counts keyed by kind, for summaries.
    pub fn histogram(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for v in &self.violations {
            *out.entry(v.kind.as_str()).or_insert(0) += 1;
        }
        out
    }
}

fn alternation(forms: &[String]) -> String {
    let parts: Vec<String> = forms
        .iter()
        .map(|f| regex::escape(&f.to_lowercase()))
        .collect();
    format!("(?:{})", parts.join("|"))
}

/// Builds an anchored regex matching every surface form the program can
/// take under the lexicon: prefix, then the skeleton with each slot
/// replaced by the alternation of its allowed fillers.
fn text_pattern(
    program: &RefProgram,
    prefix: &str,
    lexicon: &Lexicon,
    templates: &TemplateCatalog,
) -> Result<Regex, String> {
    let template = templates
        .by_id(program.sub_template_id)
        .map_err(|e| e.to_string())?;
    let slot = Regex::new(r"\{(locside|loc|name|obj|att|rel|anchor)\}").unwrap();
    let mut body = String::new();
    let mut last = 0usize;
    for m in slot.find_iter(&template.skeleton) {
        body.push_str(&regex::escape(&template.skeleton[last..m.start()].to_lowercase()));
        let filled = match m.as_str() {
            "{name}" | "{obj}" => alternation(&lexicon.concept_forms(&program.target.concept)),
            "{att}" => {
                let attr = program
                    .target
                    .attribute
                    .as_ref()
                    .ok_or("attribute slot without attribute")?;
                regex::escape(&attr.value.to_lowercase())
            }
            "{loc}" => {
                let kind = program.target.location.ok_or("location slot without location")?;
                alternation(lexicon.location_forms(kind).map_err(|e| e.to_string())?)
            }
            "{locside}" => {
                let kind = program.target.location.ok_or("side slot without location")?;
                regex::escape(&lexicon.side_form(kind).map_err(|e| e.to_string())?.to_lowercase())
            }
            "{rel}" => {
                let anchor = program.anchor.as_ref().ok_or("relation slot without anchor")?;
                alternation(
                    lexicon
                        .relation_forms(anchor.predicate)
                        .map_err(|e| e.to_string())?,
                )
            }
            "{anchor}" => {
                let anchor = program.anchor.as_ref().ok_or("anchor slot without anchor")?;
                let mut parts: Vec<String> = Vec::new();
                if let Some(kind) = anchor.filter.location {
                    parts.push(alternation(
                        lexicon.location_forms(kind).map_err(|e| e.to_string())?,
                    ));
                }
                if let Some(attr) = &anchor.filter.attribute {
                    parts.push(regex::escape(&attr.value.to_lowercase()));
                }
                parts.push(alternation(&lexicon.concept_forms(&anchor.filter.concept)));
                parts.join(" ")
            }
            other => return Err(format!("unknown slot {other}")),
        };
        body.push_str(&filled);
        last = m.end();
    }
    body.push_str(&regex::escape(&template.skeleton[last..].to_lowercase()));
    let full = format!("^{} {}$", regex::escape(&prefix.to_lowercase()), body);
    Regex::new(&full).map_err(|e| e.to_string())
}

/// Audits tuples against their scenes. Violations carry the offending
/// tuple id; an empty list means the corpus is internally consistent.
pub fn validate_tuples(
    scenes: &BTreeMap<String, SceneGraph>,
    tuples: &[Tuple],
    lexicon: &Lexicon,
    templates: &TemplateCatalog,
    max_tokens: usize,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen_ids: BTreeSet<&str> = BTreeSet::new();
    let mut seen_texts: BTreeSet<(String, String, u32)> = BTreeSet::new();
    for tuple in tuples {
        report.checked += 1;
        let mut flag = |kind: ViolationKind, detail: String| {
            report.violations.push(Violation {
                tuple_id: tuple.tuple_id.clone(),
                kind,
                detail,
            });
        };
        if !seen_ids.insert(&tuple.tuple_id) {
            flag(ViolationKind::Duplicate, "tuple id repeats".into());
        }
        let expr = &tuple.expr;
        if !seen_texts.insert((expr.scene_id.clone(), expr.text.clone(), expr.target_id)) {
            flag(
                ViolationKind::Duplicate,
                "same text and target seen earlier in this scene".into(),
            );
        }
        let Some(scene) = scenes.get(&expr.scene_id) else {
            flag(
                ViolationKind::UnknownScene,
                format!("scene {:?} not found", expr.scene_id),
            );
            continue;
        };
        let Ok(target) = scene.object(expr.target_id) else {
            flag(
                ViolationKind::UnknownTarget,
                format!("object {} not in scene", expr.target_id),
            );
            continue;
        };
        match execute_program(&expr.program, scene) {
            Ok(ids) => {
                if !(ids.len() == 1 && ids.contains(&expr.target_id)) {
                    flag(
                        ViolationKind::NotUnique,
                        format!("program resolves to {ids:?}, expected {{{}}}", expr.target_id),
                    );
                }
            }
            Err(RefExpError::AnchorResolution { count }) => {
                flag(
                    ViolationKind::NotUnique,
                    format!("anchor matches {count} objects"),
                );
            }
            Err(e) => flag(ViolationKind::NotUnique, e.to_string()),
        }
        if expr.program.family != Family::Name {
            let rivals = scene
                .objects
                .iter()
                .filter(|o| o.category == target.category)
                .count();
            if rivals < 2 {
                flag(
                    ViolationKind::VacuousFamily,
                    format!(
                        "family {} needs a category rival, {:?} is unique",
                        expr.program.family, target.category
                    ),
                );
            }
        }
        match templates.by_id(expr.program.sub_template_id) {
            Err(e) => flag(ViolationKind::TemplateMismatch, e.to_string()),
            Ok(template) => {
                if !template.matches_program(&expr.program) {
                    flag(
                        ViolationKind::TemplateMismatch,
                        format!(
                            "template {} does not fit the program shape",
                            template.id
                        ),
                    );
                } else {
                    match text_pattern(&expr.program, &expr.prefix, lexicon, templates) {
                        Err(e) => flag(ViolationKind::TextMismatch, e),
                        Ok(pattern) => {
                            if !lexicon.prefixes.contains(&expr.prefix) {
                                flag(
                                    ViolationKind::TextMismatch,
                                    format!("prefix {:?} not in lexicon", expr.prefix),
                                );
                            } else if !pattern.is_match(&expr.text) {
                                flag(
                                    ViolationKind::TextMismatch,
                                    format!("text {:?} does not fit the template", expr.text),
                                );
                            }
                        }
                    }
                }
            }
        }
        if token_count(&expr.text) > max_tokens {
            flag(
                ViolationKind::TokenBudget,
                format!("{} tokens, budget {max_tokens}", token_count(&expr.text)),
            );
        }
    }
    report
}
