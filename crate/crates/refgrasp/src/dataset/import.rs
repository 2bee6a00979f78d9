//! Importers for foreign capture layouts.
//!
//! Two entry points: [`import_corner_grasps`] parses the classic
//! four-corners-per-rectangle text format, and [`import_scene_tree`] walks a
//! directory tree of per-scene folders (annotations, per-object mask PNGs,
//! optional corner-grasp files) into scene graphs ready for
//! [`write_dataset`](super::write_dataset).

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::grasp::{rect_from_corners, GraspRectangle};
use crate::mask::Mask;
use crate::scene::{ObjectNode, RelationConfig, SceneGraph, Split};
use crate::util::round6;

use super::DatasetError;

/// Corner files do not record which edge is the jaw opening; by convention
/// the longer edge is. Squares take the smaller-magnitude angle, and the
/// negative one when the magnitudes tie.
fn longer_edge_as_opening(r: GraspRectangle) -> GraspRectangle {
    let rotated = GraspRectangle::new(r.cx, r.cy, r.angle + FRAC_PI_2, r.height, r.width);
    let pick_rotated = match r.height.total_cmp(&r.width) {
        Ordering::Greater => true,
        Ordering::Equal => match rotated.angle.abs().total_cmp(&r.angle.abs()) {
            Ordering::Less => true,
            Ordering::Equal => rotated.angle < r.angle,
            Ordering::Greater => false,
        },
        Ordering::Less => false,
    };
    let out = if pick_rotated { rotated } else { r };
    GraspRectangle {
        cx: round6(out.cx),
        cy: round6(out.cy),
        angle: round6(out.angle),
        width: round6(out.width),
        height: round6(out.height),
    }
}

/// Parses grasp annotations given as one `x y` corner per line, four lines
/// per rectangle, corners in drawing order. Errors carry 1-based line
/// numbers.
pub fn import_corner_grasps(text: &str) -> Result<Vec<GraspRectangle>, DatasetError> {
    let lines: Vec<&str> = text.lines().collect();
    if !lines.len().is_multiple_of(4) {
        return Err(DatasetError::CornerFormat {
            line: lines.len(),
            detail: format!(
                "file ends mid-rectangle ({} lines; each rectangle takes 4)",
                lines.len()
            ),
        });
    }
    let mut out = Vec::with_capacity(lines.len() / 4);
    for (rect_idx, chunk) in lines.chunks_exact(4).enumerate() {
        let mut corners = [(0.0, 0.0); 4];
        for (i, raw) in chunk.iter().enumerate() {
            let line = rect_idx * 4 + i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(DatasetError::CornerFormat {
                    line,
                    detail: format!("expected two numeric fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64, DatasetError> {
                let v: f64 = s.parse().map_err(|_| DatasetError::CornerFormat {
                    line,
                    detail: format!("cannot parse {s:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(DatasetError::CornerFormat {
                        line,
                        detail: format!("{s:?} is not finite"),
                    });
                }
                Ok(v)
            };
            corners[i] = (parse(fields[0])?, parse(fields[1])?);
        }
        let rect = rect_from_corners(&corners);
        if rect.width < 1e-6 || rect.height < 1e-6 {
            return Err(DatasetError::CornerFormat {
                line: rect_idx * 4 + 1,
                detail: "rectangle is degenerate (zero-length edge)".into(),
            });
        }
        out.push(longer_edge_as_opening(rect));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct TreeObject {
    id: u32,
    category: String,
    instance_name: String,
    #[serde(default)]
    name_synonyms: Vec<String>,
    #[serde(default)]
    color: Option<String>,
    #[serde(default)]
    instance_attribute: Option<String>,
    #[serde(default)]
    depth_m: Option<f64>,
}

#[derive(Deserialize)]
struct TreeScene {
    split: Split,
    #[serde(default)]
    image_size: Option<(u32, u32)>,
    objects: Vec<TreeObject>,
}

fn rel_string(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn find_scene_dirs(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<(), DatasetError> {
    if dir.join("scene.json").is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| super::io_err(dir, e))?
        .collect::<Result<_, _>>()
        .map_err(|e| super::io_err(dir, e))?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            find_scene_dirs(&path, out)?;
        }
    }
    Ok(())
}

fn import_scene_dir(dir: &Path, root: &Path) -> Result<SceneGraph, DatasetError> {
    let scene_id = {
        let rel = rel_string(dir, root);
        if rel.is_empty() {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".into())
        } else {
            rel.replace('/', "-")
        }
    };
    let ann_path = dir.join("scene.json");
    let text = fs::read_to_string(&ann_path).map_err(|e| super::io_err(&ann_path, e))?;
    let ann: TreeScene =
        serde_json::from_str(&text).map_err(|e| super::parse_err(&ann_path, e))?;

    let mut image_size = ann.image_size;
    let mut objects = Vec::new();
    for obj in ann.objects {
        let mask_rel = format!("masks/{}.png", obj.id);
        let mask_path = dir.join(&mask_rel);
        if !mask_path.is_file() {
            return Err(DatasetError::MissingMask {
                scene_id,
                object_id: obj.id,
                path: rel_string(&mask_path, root),
            });
        }
        let mask = Mask::read_png(&mask_path)?;
        let size = (mask.height(), mask.width());
        let expected = *image_size.get_or_insert(size);
        if size != expected {
            return Err(DatasetError::BadScene {
                scene_id,
                detail: format!(
                    "object {} mask is {size:?} but the scene is {expected:?}",
                    obj.id
                ),
            });
        }
        let (cx, cy) = mask.centroid().ok_or_else(|| DatasetError::BadScene {
            scene_id: scene_id.clone(),
            detail: format!("object {} mask is empty", obj.id),
        })?;
        let bbox = mask.tight_bbox().expect("nonempty mask has a bbox");

        let grasp_path = dir.join(format!("grasps/{}.txt", obj.id));
        let grasps = if grasp_path.is_file() {
            let raw = fs::read_to_string(&grasp_path).map_err(|e| super::io_err(&grasp_path, e))?;
            import_corner_grasps(&raw).map_err(|e| match e {
                DatasetError::CornerFormat { line, detail } => DatasetError::CornerFormat {
                    line,
                    detail: format!("{detail} [{}]", rel_string(&grasp_path, root)),
                },
                other => other,
            })?
        } else {
            Vec::new()
        };

        objects.push(ObjectNode {
            id: obj.id,
            category: obj.category,
            instance_name: obj.instance_name,
            name_synonyms: obj.name_synonyms,
            color: obj.color,
            instance_attribute: obj.instance_attribute,
            centroid_px: (round6(cx), round6(cy)),
            depth_m: obj.depth_m.map(round6),
            bbox,
            mask,
            grasps,
        });
    }
    let image_size = image_size.ok_or_else(|| DatasetError::BadScene {
        scene_id: scene_id.clone(),
        detail: "scene has no objects and no image_size".into(),
    })?;
    let path_of = |name: &str| {
        let p = dir.join(name);
        if p.is_file() {
            rel_string(&p, root)
        } else {
            String::new()
        }
    };
    Ok(SceneGraph::build(
        scene_id,
        image_size,
        path_of("rgb.png"),
        path_of("depth.png"),
        objects,
        ann.split,
        &RelationConfig::default(),
    )?)
}

/// Walks `root` for scene folders (any directory holding a `scene.json`)
/// and imports each into a scene graph. Scene ids come from the folder's
/// path relative to `root`. Results are sorted by scene id.
pub fn import_scene_tree(root: &Path) -> Result<Vec<SceneGraph>, DatasetError> {
    let mut dirs = Vec::new();
    find_scene_dirs(root, &mut dirs)?;
    let mut scenes = dirs
        .iter()
        .map(|dir| import_scene_dir(dir, root))
        .collect::<Result<Vec<_>, _>>()?;
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Ok(scenes)
}
