//! Sub-template catalog and paraphrase lexicon. Both are plain data,
//! serializable to JSON so deployments can swap in their own phrasing.
//!
//! Skeleton placeholders: `{name}` instance name, `{obj}` category noun,
//! `{att}` attribute value, `{loc}` superlative ("leftmost"), `{locside}`
//! side noun ("left" in "on the left side"), `{rel}` relation phrase,
//! `{anchor}` the anchor noun phrase (its own location/attribute/noun,
//! expanded from the program's anchor filter).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::refexp::{Concept, Family, RefExpError, RefProgram};
use crate::scene::{AttrKind, LocationKind, Predicate};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTemplate {
    pub id: u32,
    pub family: Family,
    pub skeleton: String,
    /// The `{att}` slot only accepts a color ("red colored box" works,
    /// "chocolate colored box" would mislead).
    #[serde(default)]
    pub requires_color: bool,
    /// The anchor must carry its own attribute or location (mixed
    /// expressions whose complexity lives on the anchor side).
    #[serde(default)]
    pub anchor_decorated: bool,
}

/// Which placeholder kinds a skeleton uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotSignature {
    pub name: bool,
    pub obj: bool,
    pub att: bool,
    pub loc: bool,
    pub rel: bool,
}

pub fn slot_signature(skeleton: &str) -> SlotSignature {
    SlotSignature {
        name: skeleton.contains("{name}"),
        obj: skeleton.contains("{obj}"),
        att: skeleton.contains("{att}"),
        loc: skeleton.contains("{loc}") || skeleton.contains("{locside}"),
        rel: skeleton.contains("{rel}"),
    }
}

impl SubTemplate {
    /// True when this skeleton can voice the given program: same family,
    /// placeholder set congruent with the program's slots, and slot
    /// requirements met.
    pub fn matches_program(&self, program: &RefProgram) -> bool {
        if self.family != program.family {
            return false;
        }
        let sig = slot_signature(&self.skeleton);
        let target = &program.target;
        let is_instance = matches!(target.concept, Concept::Instance(_));
        if sig.name != is_instance || sig.obj == is_instance {
            return false;
        }
        if sig.att != target.attribute.is_some() {
            return false;
        }
        if sig.loc != target.location.is_some() {
            return false;
        }
        if sig.rel != program.anchor.is_some() {
            return false;
        }
        if self.requires_color
            && target.attribute.as_ref().map(|a| a.kind) != Some(AttrKind::Color)
        {
            return false;
        }
        if let Some(anchor) = &program.anchor {
            if anchor.filter.is_decorated() != self.anchor_decorated {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateCatalog {
    pub templates: Vec<SubTemplate>,
}

impl TemplateCatalog {
    pub fn by_id(&self, id: u32) -> Result<&SubTemplate, RefExpError> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or(RefExpError::UnknownTemplate { id })
    }

    pub fn family(&self, family: Family) -> impl Iterator<Item = &SubTemplate> {
        self.templates.iter().filter(move |t| t.family == family)
    }

    pub fn validate(&self) -> Result<(), RefExpError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.templates {
            if !seen.insert(t.id) {
                return Err(RefExpError::BadCatalog(format!("duplicate id {}", t.id)));
            }
            let sig = slot_signature(&t.skeleton);
            let ok = match t.family {
                Family::Name => sig.name && !sig.obj && !sig.att && !sig.loc && !sig.rel,
                Family::Attribute => sig.obj && sig.att && !sig.loc && !sig.rel && !sig.name,
                Family::Relation => sig.obj && sig.rel && !sig.att && !sig.loc && !sig.name,
                Family::Location => sig.obj && sig.loc && !sig.att && !sig.rel && !sig.name,
                Family::Mixed => {
                    let extras =
                        usize::from(sig.att) + usize::from(sig.loc) + usize::from(sig.rel);
                    sig.obj && !sig.name && (extras >= 2 || (sig.rel && t.anchor_decorated))
                }
            };
            if !ok {
                return Err(RefExpError::BadCatalog(format!(
                    "template {} skeleton {:?} does not fit family {}",
                    t.id, t.skeleton, t.family
                )));
            }
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("read {}: {e}", path.display()))?;
        let catalog: TemplateCatalog = serde_json::from_str(&text)
            .map_err(|e| format!("parse {}: {e}", path.display()))?;
        catalog.validate().map_err(|e| e.to_string())?;
        Ok(catalog)
    }

    pub fn save_json(&self, path: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).expect("catalog serializes");
        std::fs::write(path, text + "\n").map_err(|e| format!("write {}: {e}", path.display()))
    }

    /// The built-in catalog: 56 skeletons, 8 name + 8 attribute +
    /// 16 relation + 8 location + 16 mixed.
    pub fn builtin() -> Self {
        fn t(id: u32, family: Family, skeleton: &str) -> SubTemplate {
            SubTemplate {
                id,
                family,
                skeleton: skeleton.to_string(),
                requires_color: false,
                anchor_decorated: false,
            }
        }
        fn tc(id: u32, family: Family, skeleton: &str) -> SubTemplate {
            SubTemplate {
                requires_color: true,
                ..t(id, family, skeleton)
            }
        }
        fn td(id: u32, skeleton: &str) -> SubTemplate {
            SubTemplate {
                anchor_decorated: true,
                ..t(id, Family::Mixed, skeleton)
            }
        }
        use Family::*;
        let templates = vec![
            t(0, Name, "{name}"),
            t(1, Name, "{name} item"),
            t(2, Name, "{name} product"),
            t(3, Name, "{name} from the table"),
            t(4, Name, "{name} on the table"),
            t(5, Name, "{name} in the scene"),
            t(6, Name, "{name} in front of you"),
            t(7, Name, "{name} over there"),
            t(8, Attribute, "{att} {obj}"),
            t(9, Attribute, "{att} {obj} item"),
            t(10, Attribute, "{att} {obj} product"),
            t(11, Attribute, "{att} {obj} package"),
            tc(12, Attribute, "{att} colored {obj}"),
            tc(13, Attribute, "{obj} that is {att}"),
            tc(14, Attribute, "{obj} in {att} color"),
            t(15, Attribute, "{att} version of the {obj}"),
            t(16, Relation, "{obj} {rel} the {anchor}"),
            t(17, Relation, "{obj} that is {rel} the {anchor}"),
            t(18, Relation, "{obj} located {rel} the {anchor}"),
            t(19, Relation, "{obj} that is located {rel} the {anchor}"),
            t(20, Relation, "{obj} positioned {rel} the {anchor}"),
            t(21, Relation, "{obj} that is positioned {rel} the {anchor}"),
            t(22, Relation, "{obj} lying {rel} the {anchor}"),
            t(23, Relation, "{obj} that lies {rel} the {anchor}"),
            t(24, Relation, "{obj} sitting {rel} the {anchor}"),
            t(25, Relation, "{obj} that sits {rel} the {anchor}"),
            t(26, Relation, "{obj} item {rel} the {anchor}"),
            t(27, Relation, "{obj} item that is {rel} the {anchor}"),
            t(28, Relation, "{obj} product {rel} the {anchor}"),
            t(29, Relation, "{obj} product that is {rel} the {anchor}"),
            t(30, Relation, "{obj} you can see {rel} the {anchor}"),
            t(31, Relation, "{obj} standing {rel} the {anchor}"),
            t(32, Location, "{loc} {obj}"),
            t(33, Location, "{loc} {obj} item"),
            t(34, Location, "{loc} {obj} product"),
            t(35, Location, "{loc} {obj} on the table"),
            t(36, Location, "{loc} {obj} in the scene"),
            t(37, Location, "{obj} at the {loc} position"),
            t(38, Location, "{obj} on the {locside} side"),
            t(39, Location, "{obj} on the {locside} side of the table"),
            t(40, Mixed, "{loc} {att} {obj}"),
            t(41, Mixed, "{loc} {att} {obj} item"),
            t(42, Mixed, "{loc} {att} {obj} product"),
            t(43, Mixed, "{att} {obj} on the {locside} side"),
            t(44, Mixed, "{att} {obj} {rel} the {anchor}"),
            t(45, Mixed, "{att} {obj} that is {rel} the {anchor}"),
            t(46, Mixed, "{att} {obj} located {rel} the {anchor}"),
            t(47, Mixed, "{att} {obj} sitting {rel} the {anchor}"),
            t(48, Mixed, "{loc} {obj} {rel} the {anchor}"),
            t(49, Mixed, "{loc} {obj} that is {rel} the {anchor}"),
            t(50, Mixed, "{obj} on the {locside} side {rel} the {anchor}"),
            t(51, Mixed, "{loc} {obj} located {rel} the {anchor}"),
            td(52, "{obj} {rel} the {anchor}"),
            td(53, "{obj} that is {rel} the {anchor}"),
            td(54, "{obj} located {rel} the {anchor}"),
            td(55, "{obj} positioned {rel} the {anchor}"),
        ];
        let catalog = TemplateCatalog { templates };
        debug_assert!(catalog.validate().is_ok());
        catalog
    }
}

/// Surface vocabulary: directive prefixes, synonym lists per concept, and
/// phrase tables for relations and locations. Doubles as the dataset's
/// concept catalog. Synonym lists put the canonical form first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub prefixes: Vec<String>,
    pub categories: BTreeMap<String, Vec<String>>,
    pub instances: BTreeMap<String, Vec<String>>,
    pub colors: Vec<String>,
    pub instance_attributes: Vec<String>,
    pub relation_phrases: BTreeMap<Predicate, Vec<String>>,
    pub location_phrases: BTreeMap<LocationKind, Vec<String>>,
    pub location_side_forms: BTreeMap<LocationKind, String>,
}

impl Lexicon {
    /// Empty concept maps with the default phrase tables filled in.
    pub fn with_defaults() -> Self {
        let strs = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut relation_phrases = BTreeMap::new();
        relation_phrases.insert(
            Predicate::Right,
            strs(&["right of", "to the right of", "on the right of"]),
        );
        relation_phrases.insert(
            Predicate::Left,
            strs(&["left of", "to the left of", "on the left of"]),
        );
        relation_phrases.insert(
            Predicate::Front,
            strs(&["in front of", "to the front of"]),
        );
        relation_phrases.insert(
            Predicate::Behind,
            strs(&["behind", "to the rear of", "at the back of"]),
        );
        relation_phrases.insert(
            Predicate::FrontRight,
            strs(&["front right of", "to the front right of"]),
        );
        relation_phrases.insert(
            Predicate::FrontLeft,
            strs(&["front left of", "to the front left of"]),
        );
        relation_phrases.insert(
            Predicate::RearRight,
            strs(&["rear right of", "to the rear right of"]),
        );
        relation_phrases.insert(
            Predicate::RearLeft,
            strs(&["rear left of", "to the rear left of"]),
        );
        relation_phrases.insert(Predicate::On, strs(&["on top of", "on"]));

        let mut location_phrases = BTreeMap::new();
        location_phrases.insert(LocationKind::Leftmost, strs(&["leftmost", "left"]));
        location_phrases.insert(LocationKind::Rightmost, strs(&["rightmost", "right"]));
        location_phrases.insert(LocationKind::Closest, strs(&["closest", "nearest"]));
        location_phrases.insert(LocationKind::Furthest, strs(&["furthest", "farthest"]));

        let mut location_side_forms = BTreeMap::new();
        location_side_forms.insert(LocationKind::Leftmost, "left".to_string());
        location_side_forms.insert(LocationKind::Rightmost, "right".to_string());
        location_side_forms.insert(LocationKind::Closest, "near".to_string());
        location_side_forms.insert(LocationKind::Furthest, "far".to_string());

        Lexicon {
            prefixes: strs(&[
                "pick the",
                "pick up the",
                "grab the",
                "fetch the",
                "pass me the",
                "give me the",
                "hand me the",
                "bring me the",
            ]),
            categories: BTreeMap::new(),
            instances: BTreeMap::new(),
            colors: vec![],
            instance_attributes: vec![],
            relation_phrases,
            location_phrases,
            location_side_forms,
        }
    }

    /// Surface forms for a concept; at minimum the canonical name itself.
    pub fn concept_forms(&self, concept: &Concept) -> Vec<String> {
        let (map, name) = match concept {
            Concept::Category(n) => (&self.categories, n),
            Concept::Instance(n) => (&self.instances, n),
        };
        match map.get(name) {
            Some(forms) if !forms.is_empty() => forms.clone(),
            _ => vec![name.clone()],
        }
    }

    pub fn relation_forms(&self, p: Predicate) -> Result<&[String], RefExpError> {
        match self.relation_phrases.get(&p) {
            Some(forms) if !forms.is_empty() => Ok(forms),
            _ => Err(RefExpError::LexiconGap {
                what: format!("relation phrase for {p:?}"),
            }),
        }
    }

    pub fn location_forms(&self, k: LocationKind) -> Result<&[String], RefExpError> {
        match self.location_phrases.get(&k) {
            Some(forms) if !forms.is_empty() => Ok(forms),
            _ => Err(RefExpError::LexiconGap {
                what: format!("location phrase for {k:?}"),
            }),
        }
    }

    pub fn side_form(&self, k: LocationKind) -> Result<&str, RefExpError> {
        self.location_side_forms
            .get(&k)
            .map(|s| s.as_str())
            .ok_or_else(|| RefExpError::LexiconGap {
                what: format!("side form for {k:?}"),
            })
    }

    pub fn prefix_forms(&self) -> Result<&[String], RefExpError> {
        if self.prefixes.is_empty() {
            return Err(RefExpError::LexiconGap {
                what: "directive prefixes".into(),
            });
        }
        Ok(&self.prefixes)
    }

    pub fn load_json(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("parse {}: {e}", path.display()))
    }

    pub fn save_json(&self, path: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).expect("lexicon serializes");
        std::fs::write(path, text + "\n").map_err(|e| format!("write {}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refexp::{AnchorSpec, AttributeRef, TargetFilter};

    #[test]
    fn builtin_counts() {
        let catalog = TemplateCatalog::builtin();
        catalog.validate().unwrap();
        assert_eq!(catalog.templates.len(), 56);
        let count = |f: Family| catalog.family(f).count();
        assert_eq!(count(Family::Name), 8);
        assert_eq!(count(Family::Attribute), 8);
        assert_eq!(count(Family::Relation), 16);
        assert_eq!(count(Family::Location), 8);
        assert_eq!(count(Family::Mixed), 16);
    }

    #[test]
    fn signature_matching() {
        let catalog = TemplateCatalog::builtin();
        let name_program = RefProgram {
            family: Family::Name,
            sub_template_id: 0,
            target: TargetFilter::plain(Concept::Instance("corn flakes".into())),
            anchor: None,
        };
        assert!(catalog.by_id(0).unwrap().matches_program(&name_program));
        assert!(!catalog.by_id(8).unwrap().matches_program(&name_program));

        let attr_program = RefProgram {
            family: Family::Attribute,
            sub_template_id: 8,
            target: TargetFilter {
                concept: Concept::Category("box".into()),
                attribute: Some(AttributeRef {
                    kind: AttrKind::InstanceAttribute,
                    value: "chocolate".into(),
                }),
                location: None,
            },
            anchor: None,
        };
        assert!(catalog.by_id(8).unwrap().matches_program(&attr_program));
        // Color-only templates refuse a non-color attribute.
        assert!(!catalog.by_id(12).unwrap().matches_program(&attr_program));
    }

    #[test]
    fn decorated_anchor_split() {
        let catalog = TemplateCatalog::builtin();
        let plain = RefProgram {
            family: Family::Mixed,
            sub_template_id: 52,
            target: TargetFilter::plain(Concept::Category("box".into())),
            anchor: Some(AnchorSpec {
                predicate: Predicate::Left,
                filter: TargetFilter::plain(Concept::Category("bowl".into())),
            }),
        };
        // Mixed-with-plain-anchor fits no mixed template: the decoration
        // has to live somewhere.
        assert!(!catalog
            .family(Family::Mixed)
            .any(|t| t.matches_program(&plain)));
        let mut decorated = plain;
        decorated.anchor.as_mut().unwrap().filter.location = Some(LocationKind::Leftmost);
        assert!(catalog.by_id(52).unwrap().matches_program(&decorated));
        assert!(!catalog.by_id(16).unwrap().matches_program(&decorated));
    }

    #[test]
    fn lexicon_round_trip_and_gaps() {
        let lex = Lexicon::with_defaults();
        assert_eq!(lex.location_phrases.len(), 4);
        assert_eq!(
            lex.location_phrases.values().map(|v| v.len()).sum::<usize>(),
            8
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lexicon.json");
        lex.save_json(&path).unwrap();
        assert_eq!(Lexicon::load_json(&path).unwrap(), lex);

        let mut gappy = lex.clone();
        gappy.relation_phrases.remove(&Predicate::On);
        assert!(matches!(
            gappy.relation_forms(Predicate::On),
            Err(RefExpError::LexiconGap { .. })
        ));
        assert_eq!(
            gappy.concept_forms(&Concept::Category("widget".into())),
            vec!["widget".to_string()]
        );
    }

    #[test]
    fn catalog_json_round_trip() {
        let catalog = TemplateCatalog::builtin();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("templates.json");
        catalog.save_json(&path).unwrap();
        assert_eq!(TemplateCatalog::load_json(&path).unwrap(), catalog);
    }
}
