//! Canonical on-disk dataset format.
//!
//! Layout under a root directory:
//!
//! ```text
//! manifest.json            name, version, counts, split membership
//! catalog.json             concept vocabulary and phrase tables
//! scenes/<scene_id>.json   one scene graph per file
//! masks/<scene_id>/<object_id>.png   only for masks too large to inline
//! tuples/{train,val,test}.jsonl      one expression record per line
//! ```
//!
//! Writes are byte-deterministic: map keys are sorted, floats carry at most
//! six decimals (producers round at record build), and scene/tuple order is
//! canonical. `write → load → write` reproduces the first write exactly.

pub mod import;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grasp::GraspRectangle;
use crate::mask::{Mask, MaskError, RleMask};
use crate::refexp::generate::{generate_for_scene, GenerationConfig};
use crate::refexp::templates::Lexicon;
use crate::refexp::Tuple;
use crate::scene::{
    LocationLabel, ObjectNode, RelationConfig, RelationEdge, SceneError, SceneGraph, Split,
};
use crate::synth::{synthesize_scenes, Catalog, SynthConfig, SynthError};
use crate::util::derive_rng;

pub const FORMAT_VERSION: u32 = 1;
/// Masks with at most this many foreground pixels are stored inline as
/// run-length counts; larger ones become PNG files.
pub const INLINE_MASK_MAX_AREA: u64 = 1024;
pub const DEFAULT_SPLIT_RATIOS: (f64, f64, f64) = (0.7, 0.1, 0.2);

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("output root {path} is not empty and does not look like a dataset")]
    DirtyRoot { path: String },
    #[error("scene {scene_id}: mask for object {object_id} missing at {path}")]
    MissingMask {
        scene_id: String,
        object_id: u32,
        path: String,
    },
    #[error("scene {scene_id}: {detail}")]
    BadScene { scene_id: String, detail: String },
    #[error("tuple {tuple_id}: {detail}")]
    BadTuple { tuple_id: String, detail: String },
    #[error("corner file line {line}: {detail}")]
    CornerFormat { line: usize, detail: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, detail: impl ToString) -> DatasetError {
    DatasetError::Parse {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub scenes: BTreeMap<String, SceneGraph>,
    pub tuples: Vec<Tuple>,
    /// Concept vocabulary the expressions draw from.
    pub catalog: Lexicon,
}

impl Dataset {
    pub fn empty(name: &str) -> Self {
        Self {
            name: name.into(),
            scenes: BTreeMap::new(),
            tuples: Vec::new(),
            catalog: Lexicon::with_defaults(),
        }
    }

    /// Scene-to-split assignment, derived from the scenes themselves.
    pub fn splits(&self) -> BTreeMap<String, Split> {
        self.scenes
            .iter()
            .map(|(id, s)| (id.clone(), s.split))
            .collect()
    }

    pub fn tuples_in(&self, split: Split) -> impl Iterator<Item = &Tuple> {
        self.tuples.iter().filter(move |t| {
            self.scenes
                .get(&t.expr.scene_id)
                .is_some_and(|s| s.split == split)
        })
    }
}

// ---------------------------------------------------------------- DTOs --

#[derive(Serialize, Deserialize)]
struct Manifest {
    name: String,
    version: u32,
    scene_count: usize,
    tuple_count: usize,
    splits: BTreeMap<Split, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct MaskDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rle: Option<RleMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ObjectDto {
    id: u32,
    category: String,
    instance_name: String,
    #[serde(default)]
    name_synonyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance_attribute: Option<String>,
    centroid_px: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    depth_m: Option<f64>,
    bbox: (u32, u32, u32, u32),
    mask: MaskDto,
    grasps: Vec<GraspRectangle>,
}

#[derive(Serialize, Deserialize)]
struct SceneDto {
    scene_id: String,
    image_size: (u32, u32),
    #[serde(default)]
    rgb_path: String,
    #[serde(default)]
    depth_path: String,
    split: Split,
    objects: Vec<ObjectDto>,
    relations: Vec<RelationEdge>,
    locations: Vec<LocationLabel>,
}

// -------------------------------------------------------------- writing --

fn write_text(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e))?;
    write_text(path, &(text + "\n"))
}

/// Clears a previous dataset at `root`, or errors when `root` holds
/// anything else. A fresh or empty directory is always accepted.
fn prepare_root(root: &Path) -> Result<(), DatasetError> {
    if root.exists() {
        let has_entries = fs::read_dir(root)
            .map_err(|e| io_err(root, e))?
            .next()
            .is_some();
        if has_entries {
            if !root.join("manifest.json").is_file() {
                return Err(DatasetError::DirtyRoot {
                    path: root.display().to_string(),
                });
            }
            for sub in ["scenes", "masks", "tuples"] {
                let dir = root.join(sub);
                if dir.exists() {
                    fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                }
            }
            for file in ["manifest.json", "catalog.json"] {
                let f = root.join(file);
                if f.exists() {
                    fs::remove_file(&f).map_err(|e| io_err(&f, e))?;
                }
            }
        }
    }
    fs::create_dir_all(root.join("scenes")).map_err(|e| io_err(root, e))?;
    fs::create_dir_all(root.join("tuples")).map_err(|e| io_err(root, e))?;
    Ok(())
}

pub fn write_dataset(dataset: &Dataset, root: &Path) -> Result<(), DatasetError> {
    prepare_root(root)?;

    let mut splits: BTreeMap<Split, Vec<String>> = BTreeMap::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        splits.insert(split, Vec::new());
    }
    for (id, scene) in &dataset.scenes {
        splits.get_mut(&scene.split).expect("all splits present").push(id.clone());
    }
    let manifest = Manifest {
        name: dataset.name.clone(),
        version: FORMAT_VERSION,
        scene_count: dataset.scenes.len(),
        tuple_count: dataset.tuples.len(),
        splits,
    };
    json_file(&root.join("manifest.json"), &manifest)?;
    json_file(&root.join("catalog.json"), &dataset.catalog)?;

    for (id, scene) in &dataset.scenes {
        let mut objects = Vec::new();
        for obj in &scene.objects {
            let mask = if obj.mask.area() <= INLINE_MASK_MAX_AREA {
                MaskDto {
                    rle: Some(obj.mask.to_rle()),
                    path: None,
                }
            } else {
                let rel = format!("masks/{id}/{}.png", obj.id);
                let full = root.join(&rel);
                fs::create_dir_all(full.parent().expect("mask path has parent"))
                    .map_err(|e| io_err(&full, e))?;
                obj.mask.write_png(&full)?;
                MaskDto {
                    rle: None,
                    path: Some(rel),
                }
            };
            objects.push(ObjectDto {
                id: obj.id,
                category: obj.category.clone(),
                instance_name: obj.instance_name.clone(),
                name_synonyms: obj.name_synonyms.clone(),
                color: obj.color.clone(),
                instance_attribute: obj.instance_attribute.clone(),
                centroid_px: obj.centroid_px,
                depth_m: obj.depth_m,
                bbox: obj.bbox,
                mask,
                grasps: obj.grasps.clone(),
            });
        }
        let dto = SceneDto {
            scene_id: scene.scene_id.clone(),
            image_size: scene.image_size,
            rgb_path: scene.rgb_path.clone(),
            depth_path: scene.depth_path.clone(),
            split: scene.split,
            objects,
            relations: scene.relations.clone(),
            locations: scene.locations.clone(),
        };
        json_file(&root.join("scenes").join(format!("{id}.json")), &dto)?;
    }

    for split in [Split::Train, Split::Val, Split::Test] {
        let mut lines = String::new();
        for tuple in &dataset.tuples {
            let scene = dataset.scenes.get(&tuple.expr.scene_id).ok_or_else(|| {
                DatasetError::BadTuple {
                    tuple_id: tuple.tuple_id.clone(),
                    detail: format!("scene {:?} not in dataset", tuple.expr.scene_id),
                }
            })?;
            if scene.split != split {
                continue;
            }
            let line = serde_json::to_string(tuple)
                .map_err(|e| parse_err(root, format!("tuple {}: {e}", tuple.tuple_id)))?;
            lines.push_str(&line);
            lines.push('\n');
        }
        write_text(&root.join("tuples").join(format!("{split}.jsonl")), &lines)?;
    }
    Ok(())
}

// -------------------------------------------------------------- loading --

fn load_scene(root: &Path, id: &str) -> Result<SceneGraph, DatasetError> {
    let path = root.join("scenes").join(format!("{id}.json"));
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let dto: SceneDto = serde_json::from_str(&text).map_err(|e| parse_err(&path, e))?;
    if dto.scene_id != id {
        return Err(DatasetError::BadScene {
            scene_id: id.into(),
            detail: format!("file claims scene_id {:?}", dto.scene_id),
        });
    }
    let mut objects = Vec::new();
    for obj in dto.objects {
        let mask = match (&obj.mask.rle, &obj.mask.path) {
            (Some(rle), None) => Mask::from_rle(rle)?,
            (None, Some(rel)) => {
                let full = root.join(rel);
                if !full.is_file() {
                    return Err(DatasetError::MissingMask {
                        scene_id: id.into(),
                        object_id: obj.id,
                        path: rel.clone(),
                    });
                }
                Mask::read_png(&full)?
            }
            _ => {
                return Err(DatasetError::BadScene {
                    scene_id: id.into(),
                    detail: format!("object {} must have exactly one of rle or path", obj.id),
                })
            }
        };
        objects.push(ObjectNode {
            id: obj.id,
            category: obj.category,
            instance_name: obj.instance_name,
            name_synonyms: obj.name_synonyms,
            color: obj.color,
            instance_attribute: obj.instance_attribute,
            centroid_px: obj.centroid_px,
            depth_m: obj.depth_m,
            bbox: obj.bbox,
            mask,
            grasps: obj.grasps,
        });
    }
    let scene = SceneGraph::build(
        dto.scene_id,
        dto.image_size,
        dto.rgb_path,
        dto.depth_path,
        objects,
        dto.split,
        &RelationConfig::default(),
    )?;
    // The cached relations/locations in the file must agree with what the
    // objects imply; anything else means the record was edited by hand.
    if scene.relations != dto.relations || scene.locations != dto.locations {
        return Err(DatasetError::BadScene {
            scene_id: id.into(),
            detail: "cached relations or locations disagree with the recomputed ones".into(),
        });
    }
    Ok(scene)
}

pub fn load_dataset(root: &Path) -> Result<Dataset, DatasetError> {
    let manifest_path = root.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| parse_err(&manifest_path, e))?;
    if manifest.version != FORMAT_VERSION {
        return Err(parse_err(
            &manifest_path,
            format!("unsupported version {}", manifest.version),
        ));
    }
    let catalog_path = root.join("catalog.json");
    let text = fs::read_to_string(&catalog_path).map_err(|e| io_err(&catalog_path, e))?;
    let catalog: Lexicon = serde_json::from_str(&text).map_err(|e| parse_err(&catalog_path, e))?;

    let mut ids: Vec<(String, Split)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (&split, members) in &manifest.splits {
        for id in members {
            if !seen.insert(id.clone()) {
                return Err(parse_err(
                    &manifest_path,
                    format!("scene {id:?} listed in more than one split"),
                ));
            }
            ids.push((id.clone(), split));
        }
    }
    if ids.len() != manifest.scene_count {
        return Err(parse_err(
            &manifest_path,
            format!(
                "scene_count {} but split lists name {} scenes",
                manifest.scene_count,
                ids.len()
            ),
        ));
    }
    ids.sort();

    let scenes: BTreeMap<String, SceneGraph> = ids
        .par_iter()
        .map(|(id, split)| {
            let scene = load_scene(root, id)?;
            if scene.split != *split {
                return Err(DatasetError::BadScene {
                    scene_id: id.clone(),
                    detail: format!(
                        "manifest places it in {split} but the record says {}",
                        scene.split
                    ),
                });
            }
            Ok((id.clone(), scene))
        })
        .collect::<Result<_, _>>()?;

    let mut tuples = Vec::new();
    let mut tuple_ids = BTreeSet::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        let path = root.join("tuples").join(format!("{split}.jsonl"));
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let tuple: Tuple = serde_json::from_str(line)
                .map_err(|e| parse_err(&path, format!("line {}: {e}", lineno + 1)))?;
            if !tuple_ids.insert(tuple.tuple_id.clone()) {
                return Err(DatasetError::BadTuple {
                    tuple_id: tuple.tuple_id,
                    detail: "tuple id repeats".into(),
                });
            }
            let scene = scenes.get(&tuple.expr.scene_id).ok_or_else(|| {
                DatasetError::BadTuple {
                    tuple_id: tuple.tuple_id.clone(),
                    detail: format!("scene {:?} not in dataset", tuple.expr.scene_id),
                }
            })?;
            if scene.split != split {
                return Err(DatasetError::BadTuple {
                    tuple_id: tuple.tuple_id.clone(),
                    detail: format!(
                        "stored under {split} but its scene is in {}",
                        scene.split
                    ),
                });
            }
            scene
                .object(tuple.expr.target_id)
                .map_err(|_| DatasetError::BadTuple {
                    tuple_id: tuple.tuple_id.clone(),
                    detail: format!("target {} not in scene", tuple.expr.target_id),
                })?;
            tuples.push(tuple);
        }
    }
    if tuples.len() != manifest.tuple_count {
        return Err(parse_err(
            &manifest_path,
            format!(
                "tuple_count {} but files hold {}",
                manifest.tuple_count,
                tuples.len()
            ),
        ));
    }
    Ok(Dataset {
        name: manifest.name,
        scenes,
        tuples,
        catalog,
    })
}

// --------------------------------------------------- splits & synthesis --

/// Deterministic scene-level splitter. Input order does not matter: ids
/// are sorted before the seeded shuffle. Ratios are train/val/test shares.
pub fn assign_splits(
    scene_ids: &[String],
    seed: u64,
    ratios: (f64, f64, f64),
) -> BTreeMap<String, Split> {
    use rand::seq::SliceRandom;
    let mut ids: Vec<&String> = scene_ids.iter().collect();
    ids.sort();
    ids.dedup();
    let mut rng = derive_rng(seed, &["split"]);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_train = ((n as f64) * ratios.0).round() as usize;
    let n_val = (((n as f64) * ratios.1).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    ids.iter()
        .enumerate()
        .map(|(i, &id)| {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (id.clone(), split)
        })
        .collect()
}

/// Regenerates the expression records for every scene. Per-scene rng
/// streams make the result independent of scene order and thread count.
/// Tuple ids are `<scene_id>#<index>`.
pub fn regenerate_tuples(
    scenes: &BTreeMap<String, SceneGraph>,
    config: &GenerationConfig,
) -> Vec<Tuple> {
    let batches: Vec<(&String, Vec<crate::refexp::ReferringExpression>)> = scenes
        .par_iter()
        .map(|(id, scene)| (id, generate_for_scene(scene, config)))
        .collect();
    let mut tuples = Vec::new();
    for (id, batch) in batches {
        for (i, expr) in batch.into_iter().enumerate() {
            tuples.push(Tuple {
                tuple_id: format!("{id}#{i:03}"),
                expr,
            });
        }
    }
    tuples
}

/// Synthesizes scenes, assigns splits, and generates referring
/// expressions, yielding a ready-to-write dataset. Deterministic in the
/// two configs; scene order never influences per-scene rng streams.
pub fn build_synthetic(
    name: &str,
    catalog: &Catalog,
    synth_config: &SynthConfig,
    generation: &GenerationConfig,
) -> Result<Dataset, DatasetError> {
    let mut scenes = synthesize_scenes(catalog, synth_config)?;
    let ids: Vec<String> = scenes.iter().map(|s| s.scene_id.clone()).collect();
    let splits = assign_splits(&ids, synth_config.seed, DEFAULT_SPLIT_RATIOS);
    for scene in &mut scenes {
        scene.split = splits[&scene.scene_id];
    }
    let scenes: BTreeMap<String, SceneGraph> =
        scenes.into_iter().map(|s| (s.scene_id.clone(), s)).collect();
    let tuples = regenerate_tuples(&scenes, generation);
    Ok(Dataset {
        name: name.into(),
        scenes,
        tuples,
        catalog: generation.lexicon.clone(),
    })
}

/// SHA-256 over every file in a tree (relative path and contents), for
/// byte-level determinism checks.
pub fn hash_tree(root: &Path) -> Result<String, DatasetError> {
    fn walk(dir: &Path, base: &Path, files: &mut Vec<(String, Vec<u8>)>) -> Result<(), DatasetError> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(dir, e))?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                walk(&path, base, files)?;
            } else {
                let rel = path
                    .strip_prefix(base)
                    .expect("child of base")
                    .to_string_lossy()
                    .replace('\\', "/");
                let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
                files.push((rel, bytes));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, root, &mut files)?;
    let mut hasher = Sha256::new();
    for (rel, bytes) in files {
        hasher.update(rel.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_dataset(seed: u64) -> Dataset {
        let catalog = Catalog::builtin();
        // 320px canvas so large object masks spill into PNG files while
        // the small ones stay inline.
        let synth = SynthConfig {
            scenes: 8,
            image_size: (320, 320),
            seed,
            ..Default::default()
        };
        let gen = GenerationConfig::new(catalog.lexicon(), seed);
        build_synthetic("unit", &catalog, &synth, &gen).unwrap()
    }

    fn sorted_ids(dataset: &Dataset) -> Vec<String> {
        let mut ids: Vec<String> = dataset.tuples.iter().map(|t| t.tuple_id.clone()).collect();
        ids.sort();
        ids
    }

    #[test]
    fn round_trip_preserves_everything_and_bytes() {
        let dataset = small_dataset(3);
        assert!(!dataset.tuples.is_empty());
        let dir = tempdir().unwrap();
        let root = dir.path().join("ds");
        write_dataset(&dataset, &root).unwrap();
        let first = hash_tree(&root).unwrap();

        // Same value written again: identical bytes.
        let again = dir.path().join("ds2");
        write_dataset(&dataset, &again).unwrap();
        assert_eq!(first, hash_tree(&again).unwrap());

        // Both mask representations are actually present.
        assert!(root.join("masks").exists(), "no PNG masks were written");
        let any_inline = dataset
            .scenes
            .values()
            .flat_map(|s| &s.objects)
            .any(|o| o.mask.area() <= INLINE_MASK_MAX_AREA);
        assert!(any_inline, "test scenes should also exercise inline masks");

        let loaded = load_dataset(&root).unwrap();
        assert_eq!(loaded.name, dataset.name);
        assert_eq!(loaded.scenes.len(), dataset.scenes.len());
        assert_eq!(loaded.tuples.len(), dataset.tuples.len());
        assert_eq!(sorted_ids(&loaded), sorted_ids(&dataset));
        assert_eq!(loaded.catalog, dataset.catalog);
        for (id, scene) in &dataset.scenes {
            assert_eq!(format!("{:?}", loaded.scenes[id]), format!("{scene:?}"));
        }

        // Fixed point: writing the loaded dataset reproduces the bytes.
        let second = dir.path().join("ds3");
        write_dataset(&loaded, &second).unwrap();
        assert_eq!(first, hash_tree(&second).unwrap());
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dataset = Dataset::empty("nothing");
        let dir = tempdir().unwrap();
        let root = dir.path().join("empty");
        write_dataset(&dataset, &root).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["scene_count"], 0);
        let loaded = load_dataset(&root).unwrap();
        assert!(loaded.scenes.is_empty());
        assert!(loaded.tuples.is_empty());
    }

    #[test]
    fn rewrite_clears_stale_files_and_rejects_foreign_dirs() {
        let dataset = small_dataset(5);
        let dir = tempdir().unwrap();
        let root = dir.path().join("ds");
        write_dataset(&dataset, &root).unwrap();
        let baseline = hash_tree(&root).unwrap();
        // A second write into the same root must not leave leftovers.
        let mut smaller = dataset.clone();
        let drop_id = smaller.scenes.keys().last().unwrap().clone();
        smaller.scenes.remove(&drop_id);
        smaller.tuples.retain(|t| t.expr.scene_id != drop_id);
        write_dataset(&smaller, &root).unwrap();
        assert_ne!(hash_tree(&root).unwrap(), baseline);
        let reloaded = load_dataset(&root).unwrap();
        assert!(!reloaded.scenes.contains_key(&drop_id));

        let foreign = dir.path().join("foreign");
        fs::create_dir_all(&foreign).unwrap();
        fs::write(foreign.join("precious.txt"), "keep me").unwrap();
        assert!(matches!(
            write_dataset(&dataset, &foreign),
            Err(DatasetError::DirtyRoot { .. })
        ));
        assert!(foreign.join("precious.txt").exists());
    }

    #[test]
    fn missing_mask_file_names_the_scene() {
        let dataset = small_dataset(7);
        let dir = tempdir().unwrap();
        let root = dir.path().join("ds");
        write_dataset(&dataset, &root).unwrap();
        let masks = fs::read_dir(root.join("masks")).unwrap().next().unwrap().unwrap();
        let scene_id = masks.file_name().to_string_lossy().to_string();
        let victim = fs::read_dir(masks.path()).unwrap().next().unwrap().unwrap();
        fs::remove_file(victim.path()).unwrap();
        match load_dataset(&root) {
            Err(DatasetError::MissingMask { scene_id: got, .. }) => assert_eq!(got, scene_id),
            other => panic!("expected MissingMask, got {other:?}"),
        }
    }

    #[test]
    fn hand_edited_relations_fail_to_load() {
        let dataset = small_dataset(9);
        let dir = tempdir().unwrap();
        let root = dir.path().join("ds");
        write_dataset(&dataset, &root).unwrap();
        let scene_id = dataset.scenes.keys().next().unwrap();
        let path = root.join("scenes").join(format!("{scene_id}.json"));
        let text = fs::read_to_string(&path).unwrap();
        // Swap the first planar predicate for a different one.
        let tampered = if text.contains("\"front left\"") {
            text.replacen("\"front left\"", "\"rear right\"", 1)
        } else if text.contains("\"left\"") {
            text.replacen("\"left\"", "\"right\"", 1)
        } else {
            text.replacen("\"front\"", "\"behind\"", 1)
        };
        assert_ne!(text, tampered, "fixture needs at least one relation");
        fs::write(&path, tampered).unwrap();
        match load_dataset(&root) {
            Err(DatasetError::BadScene { scene_id: got, .. }) => assert_eq!(&got, scene_id),
            other => panic!("expected BadScene, got {other:?}"),
        }
    }

    #[test]
    fn tampered_tuple_target_fails_to_load() {
        let dataset = small_dataset(11);
        let dir = tempdir().unwrap();
        let root = dir.path().join("ds");
        write_dataset(&dataset, &root).unwrap();
        for split in ["train", "val", "test"] {
            let path = root.join("tuples").join(format!("{split}.jsonl"));
            let text = fs::read_to_string(&path).unwrap();
            if let Some(first) = text.lines().next() {
                let mut v: serde_json::Value = serde_json::from_str(first).unwrap();
                v["target_id"] = serde_json::json!(999);
                let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
                lines[0] = serde_json::to_string(&v).unwrap();
                fs::write(&path, lines.join("\n") + "\n").unwrap();
                assert!(matches!(
                    load_dataset(&root),
                    Err(DatasetError::BadTuple { .. })
                ));
                return;
            }
        }
        panic!("no tuples written at all");
    }

    #[test]
    fn splitter_partitions_and_ignores_input_order() {
        let ids: Vec<String> = (0..100).map(|i| format!("scene-{i:03}")).collect();
        let a = assign_splits(&ids, 42, DEFAULT_SPLIT_RATIOS);
        let mut reversed = ids.clone();
        reversed.reverse();
        let b = assign_splits(&reversed, 42, DEFAULT_SPLIT_RATIOS);
        assert_eq!(a, b);
        let count = |s: Split| a.values().filter(|&&v| v == s).count();
        assert_eq!(count(Split::Train), 70);
        assert_eq!(count(Split::Val), 10);
        assert_eq!(count(Split::Test), 20);
        let c = assign_splits(&ids, 43, DEFAULT_SPLIT_RATIOS);
        assert_ne!(a, c, "different seed should shuffle differently");
    }

    #[test]
    fn synthetic_build_is_deterministic_and_split_consistent() {
        let a = small_dataset(13);
        let b = small_dataset(13);
        assert_eq!(sorted_ids(&a), sorted_ids(&b));
        assert_eq!(a.splits(), b.splits());
        for t in &a.tuples {
            assert!(a.scenes.contains_key(&t.expr.scene_id));
        }
        // Thread-count invariance of the whole build.
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| small_dataset(13));
        let dir = tempdir().unwrap();
        let (ra, rc) = (dir.path().join("a"), dir.path().join("c"));
        write_dataset(&a, &ra).unwrap();
        write_dataset(&c, &rc).unwrap();
        assert_eq!(hash_tree(&ra).unwrap(), hash_tree(&rc).unwrap());
    }
}
