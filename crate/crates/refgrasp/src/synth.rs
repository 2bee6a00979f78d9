//! Synthetic tabletop scenes with known ground truth, plus a noise-dialed
//! oracle predictor. Scenes are built per-index from a derived rng stream,
//! so a batch is reproducible and order-independent.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::grasp::GraspRectangle;
use crate::mask::Mask;
use crate::metrics::{Prediction, ScoredGrasp};
use crate::refexp::templates::Lexicon;
use crate::refexp::Tuple;
use crate::scene::{ObjectNode, RelationConfig, SceneError, SceneGraph, Split};
use crate::util::{derive_rng, round6};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad synthesis config: {0}")]
    Config(String),
    #[error("scene {scene_id}: could not place object {object_index} after {attempts} tries")]
    Placement {
        scene_id: String,
        object_index: usize,
        attempts: usize,
    },
    #[error("scene {scene_id}: could not place a grasp on object {object_id} after {attempts} tries")]
    GraspPlacement {
        scene_id: String,
        object_id: u32,
        attempts: usize,
    },
    #[error("tuple {tuple_id} points at missing scene {scene_id}")]
    MissingScene { tuple_id: String, scene_id: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// One spawnable object kind. Sizes are fractions of the short image side.
#[derive(Debug, Clone)]
pub struct Prototype {
    pub category: &'static str,
    pub instance_name: &'static str,
    pub name_synonyms: &'static [&'static str],
    pub color: Option<&'static str>,
    pub instance_attribute: Option<&'static str>,
    pub width_frac: (f64, f64),
    pub height_frac: (f64, f64),
    pub ellipse: bool,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub prototypes: Vec<Prototype>,
    pub category_synonyms: BTreeMap<&'static str, Vec<&'static str>>,
}

impl Catalog {
    /// Ten categories, eighteen instances. Deliberate stress cases:
    /// `cracker box` shares one color across instances (attribute
    /// expressions must fall back to the instance attribute) and
    /// `tissue pack` instances are indistinguishable by any attribute
    /// (location or relation expressions are the only way out).
    pub fn builtin() -> Self {
        #[allow(clippy::too_many_arguments)] // table-row constructor
        fn p(
            category: &'static str,
            instance_name: &'static str,
            name_synonyms: &'static [&'static str],
            color: Option<&'static str>,
            instance_attribute: Option<&'static str>,
            width_frac: (f64, f64),
            height_frac: (f64, f64),
            ellipse: bool,
        ) -> Prototype {
            Prototype {
                category,
                instance_name,
                name_synonyms,
                color,
                instance_attribute,
                width_frac,
                height_frac,
                ellipse,
            }
        }
        let box_w = (0.14, 0.22);
        let box_h = (0.10, 0.17);
        let round = (0.10, 0.16);
        let prototypes = vec![
            p("cereal box", "choco crispies", &["chocolate cereal"], Some("brown"), Some("chocolate"), box_w, box_h, false),
            p("cereal box", "corn flakes", &[], Some("yellow"), Some("honey"), box_w, box_h, false),
            p("cereal box", "berry crunch", &["berry cereal"], Some("red"), Some("fruity"), box_w, box_h, false),
            p("bowl", "blue bowl", &[], Some("blue"), None, round, round, true),
            p("bowl", "green bowl", &[], Some("green"), None, round, round, true),
            p("bowl", "white bowl", &[], Some("white"), None, round, round, true),
            p("mug", "red mug", &[], Some("red"), None, (0.08, 0.12), (0.08, 0.12), true),
            p("mug", "black mug", &[], Some("black"), None, (0.08, 0.12), (0.08, 0.12), true),
            p("apple", "gala apple", &[], Some("red"), None, (0.07, 0.10), (0.07, 0.10), true),
            p("apple", "granny smith", &["green apple"], Some("green"), None, (0.07, 0.10), (0.07, 0.10), true),
            p("juice box", "orange juice", &[], Some("orange"), None, (0.08, 0.11), (0.12, 0.16), false),
            p("juice box", "apple juice", &[], Some("green"), None, (0.08, 0.11), (0.12, 0.16), false),
            p("soda can", "cola can", &["cola"], Some("red"), None, (0.07, 0.09), (0.11, 0.14), false),
            p("soda can", "lemon soda", &[], Some("yellow"), None, (0.07, 0.09), (0.11, 0.14), false),
            p("cracker box", "salt crackers", &[], Some("brown"), Some("salted"), box_w, box_h, false),
            p("cracker box", "wheat crackers", &[], Some("brown"), Some("wholegrain"), box_w, box_h, false),
            p("tissue pack", "soft tissues", &[], Some("white"), None, (0.10, 0.15), (0.07, 0.10), false),
            p("tissue pack", "travel tissues", &[], Some("white"), None, (0.10, 0.15), (0.07, 0.10), false),
            p("sponge", "yellow sponge", &[], Some("yellow"), None, (0.10, 0.14), (0.06, 0.09), false),
            p("flashlight", "metal flashlight", &["torch"], Some("silver"), None, (0.15, 0.20), (0.05, 0.08), false),
        ];
        let mut category_synonyms: BTreeMap<&'static str, Vec<&'static str>> = BTreeMap::new();
        category_synonyms.insert("cereal box", vec!["cereal", "box of cereal"]);
        category_synonyms.insert("soda can", vec!["can"]);
        category_synonyms.insert("tissue pack", vec!["tissues"]);
        category_synonyms.insert("juice box", vec!["juice"]);
        Catalog {
            prototypes,
            category_synonyms,
        }
    }

    /// The vocabulary induced by this catalog: canonical names first,
    /// synonyms after, default phrase tables for everything else.
    pub fn lexicon(&self) -> Lexicon {
        let mut lex = Lexicon::with_defaults();
        for proto in &self.prototypes {
            lex.instances.entry(proto.instance_name.to_string()).or_insert_with(|| {
                std::iter::once(proto.instance_name)
                    .chain(proto.name_synonyms.iter().copied())
                    .map(str::to_string)
                    .collect()
            });
            lex.categories.entry(proto.category.to_string()).or_insert_with(|| {
                std::iter::once(proto.category)
                    .chain(
                        self.category_synonyms
                            .get(proto.category)
                            .into_iter()
                            .flatten()
                            .copied(),
                    )
                    .map(str::to_string)
                    .collect()
            });
            if let Some(c) = proto.color {
                if !lex.colors.iter().any(|x| x == c) {
                    lex.colors.push(c.to_string());
                }
            }
            if let Some(a) = proto.instance_attribute {
                if !lex.instance_attributes.iter().any(|x| x == a) {
                    lex.instance_attributes.push(a.to_string());
                }
            }
        }
        lex.colors.sort();
        lex.instance_attributes.sort();
        lex
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub scenes: usize,
    /// (height, width) in pixels.
    pub image_size: (u32, u32),
    /// Inclusive range of objects per scene.
    pub objects_per_scene: (usize, usize),
    /// Inclusive range of grasps per object.
    pub grasps_per_object: (usize, usize),
    /// Annotate every object with a metric depth derived from its vertical
    /// position (lower in the image means closer, hence smaller depth).
    pub with_depth: bool,
    /// Rejection-sampling budget for object and grasp placement.
    pub placement_retries: usize,
    /// Minimum pairwise distance between grasp centers across the scene.
    /// Zero disables the constraint.
    pub min_grasp_center_dist: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scenes: 10,
            image_size: (160, 160),
            objects_per_scene: (3, 7),
            grasps_per_object: (1, 3),
            with_depth: true,
            placement_retries: 200,
            min_grasp_center_dist: 0.0,
            seed: 0,
        }
    }
}

pub fn scene_id_for(index: usize) -> String {
    format!("synth-{index:05}")
}

fn sample_px(rng: &mut ChaCha12Rng, frac: (f64, f64), short_side: u32) -> u32 {
    let lo = (frac.0 * short_side as f64).round().max(5.0);
    let hi = (frac.1 * short_side as f64).round().max(lo + 1.0);
    rng.gen_range(lo as u32..=hi as u32)
}

fn bboxes_clash(a: (u32, u32, u32, u32), b: (u32, u32, u32, u32), gap: u32) -> bool {
    let (ax0, ay0, ax1, ay1) = a;
    let (bx0, by0, bx1, by1) = b;
    !(ax1 + gap < bx0 || bx1 + gap < ax0 || ay1 + gap < by0 || by1 + gap < ay0)
}

/// Builds one scene. Deterministic in (config.seed, index); object masks
/// never overlap; every object gets 1..=k grasps whose centers sit on its
/// mask.
pub fn synthesize_scene(
    catalog: &Catalog,
    config: &SynthConfig,
    index: usize,
) -> Result<SceneGraph, SynthError> {
    let scene_id = scene_id_for(index);
    let (img_h, img_w) = config.image_size;
    let short_side = img_h.min(img_w);
    let (obj_lo, obj_hi) = config.objects_per_scene;
    if obj_lo == 0 || obj_lo > obj_hi {
        return Err(SynthError::Config(format!(
            "objects_per_scene range ({obj_lo}, {obj_hi}) is empty or zero"
        )));
    }
    if obj_hi > catalog.prototypes.len() {
        return Err(SynthError::Config(format!(
            "objects_per_scene asks for up to {obj_hi} objects, catalog has {}",
            catalog.prototypes.len()
        )));
    }
    let (g_lo, g_hi) = config.grasps_per_object;
    if g_lo == 0 || g_lo > g_hi {
        return Err(SynthError::Config(format!(
            "grasps_per_object range ({g_lo}, {g_hi}) is empty or zero"
        )));
    }
    let mut rng = derive_rng(config.seed, &["synth", &scene_id]);
    let count = rng.gen_range(obj_lo..=obj_hi);
    let mut picks: Vec<usize> = (0..catalog.prototypes.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(count);
    picks.sort_unstable(); // object ids follow catalog order

    let mut objects: Vec<ObjectNode> = Vec::new();
    let mut bboxes: Vec<(u32, u32, u32, u32)> = Vec::new();
    for (obj_index, &pick) in picks.iter().enumerate() {
        let proto = &catalog.prototypes[pick];
        let mut placed = false;
        for _ in 0..config.placement_retries {
            let w = sample_px(&mut rng, proto.width_frac, short_side);
            let h = sample_px(&mut rng, proto.height_frac, short_side);
            if w + 4 >= img_w || h + 4 >= img_h {
                continue;
            }
            let x0 = rng.gen_range(2..img_w - w - 2);
            let y0 = rng.gen_range(2..img_h - h - 2);
            let bbox = (x0, y0, x0 + w - 1, y0 + h - 1);
            if bboxes.iter().any(|&b| bboxes_clash(bbox, b, 2)) {
                continue;
            }
            let mut mask = Mask::new(img_w, img_h);
            if proto.ellipse {
                mask.fill_ellipse(x0, y0, w, h);
            } else {
                mask.fill_rect(x0, y0, w, h);
            }
            let centroid = mask.centroid().expect("shape has pixels");
            let depth_m = config.with_depth.then(|| {
                let slope = 1.5 - 0.8 * (centroid.1 / img_h as f64);
                round6(slope + rng.gen_range(-0.02..0.02))
            });
            objects.push(ObjectNode {
                id: obj_index as u32,
                category: proto.category.to_string(),
                instance_name: proto.instance_name.to_string(),
                name_synonyms: proto.name_synonyms.iter().map(|s| s.to_string()).collect(),
                color: proto.color.map(str::to_string),
                instance_attribute: proto.instance_attribute.map(str::to_string),
                centroid_px: (round6(centroid.0), round6(centroid.1)),
                depth_m,
                bbox: mask.tight_bbox().expect("shape has pixels"),
                mask,
                grasps: vec![],
            });
            bboxes.push(bbox);
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::Placement {
                scene_id,
                object_index: obj_index,
                attempts: config.placement_retries,
            });
        }
    }

    // Grasps in a second pass so the cross-object spacing constraint can
    // see every accepted center.
    let mut centers: Vec<(f64, f64)> = Vec::new();
    for obj in &mut objects {
        let eroded = obj.mask.erode(2);
        let pool = if eroded.is_empty() { &obj.mask } else { &eroded };
        let (bx, by, bw_px, bh_px) = obj.bbox;
        let mut pixels: Vec<(u32, u32)> = Vec::new();
        for y in by..by + bh_px {
            for x in bx..bx + bw_px {
                if pool.get(x, y) {
                    pixels.push((x, y));
                }
            }
        }
        let (bw, bh) = (bw_px as f64, bh_px as f64);
        let want = rng.gen_range(g_lo..=g_hi);
        for _ in 0..want {
            let mut accepted = false;
            for _ in 0..config.placement_retries {
                let &(px, py) = pixels.choose(&mut rng).expect("pool not empty");
                let center = (px as f64, py as f64);
                if config.min_grasp_center_dist > 0.0
                    && centers.iter().any(|&(cx, cy)| {
                        let d = ((cx - center.0).powi(2) + (cy - center.1).powi(2)).sqrt();
                        d < config.min_grasp_center_dist
                    })
                {
                    continue;
                }
                let max_w = (0.9 * bw.min(bh)).max(6.0);
                let min_w = (0.6 * max_w).max(5.0);
                let width = round6(rng.gen_range(min_w..max_w));
                let height = round6(width * rng.gen_range(0.45..0.65));
                let angle = round6(rng.gen_range(-FRAC_PI_2..FRAC_PI_2));
                obj.grasps
                    .push(GraspRectangle::new(center.0, center.1, angle, width, height));
                centers.push(center);
                accepted = true;
                break;
            }
            if !accepted {
                return Err(SynthError::GraspPlacement {
                    scene_id,
                    object_id: obj.id,
                    attempts: config.placement_retries,
                });
            }
        }
    }

    Ok(SceneGraph::build(
        scene_id,
        config.image_size,
        String::new(),
        String::new(),
        objects,
        Split::Train,
        &RelationConfig::default(),
    )?)
}

/// Builds the whole batch in parallel. Scene i depends only on
/// (seed, i), so the result is identical for any thread count.
pub fn synthesize_scenes(
    catalog: &Catalog,
    config: &SynthConfig,
) -> Result<Vec<SceneGraph>, SynthError> {
    (0..config.scenes)
        .into_par_iter()
        .map(|i| synthesize_scene(catalog, config, i))
        .collect()
}

/// Degradations applied by [`oracle_predict`]. The default is the perfect
/// oracle. Angle offset and width scale are deterministic (every grasp is
/// shifted the same way); jitter, drops, and substitutions draw from the
/// per-tuple rng stream.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    /// Erode the predicted mask by this radius.
    pub mask_erosion: u32,
    /// Dilate the predicted mask by this radius (applied after erosion).
    pub mask_dilation: u32,
    /// Probability of predicting no mask at all.
    pub drop_mask_prob: f64,
    /// Probability of answering with a different object from the same
    /// scene (mask and grasps both swapped).
    pub substitute_prob: f64,
    /// Uniform per-axis center jitter, in pixels, drawn per grasp.
    pub center_jitter_px: f64,
    /// Added to every grasp angle, in degrees.
    pub angle_offset_deg: f64,
    /// Multiplies every grasp width.
    pub width_scale: f64,
    /// Junk grasps appended below the genuine ones in confidence.
    pub extra_random_grasps: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            mask_erosion: 0,
            mask_dilation: 0,
            drop_mask_prob: 0.0,
            substitute_prob: 0.0,
            center_jitter_px: 0.0,
            angle_offset_deg: 0.0,
            width_scale: 1.0,
            extra_random_grasps: 0,
        }
    }
}

/// Answers every tuple from the ground truth, degraded per `noise`. Each
/// tuple draws from its own rng stream keyed by (seed, tuple_id), so
/// predictions do not depend on tuple order or thread count. Genuine
/// grasps carry confidences 1.0, 0.999, ...; junk grasps sit below 0.5.
pub fn oracle_predict(
    scenes: &BTreeMap<String, SceneGraph>,
    tuples: &[Tuple],
    noise: &NoiseSpec,
    seed: u64,
) -> Result<Vec<Prediction>, SynthError> {
    tuples
        .par_iter()
        .map(|tuple| {
            let scene = scenes.get(&tuple.expr.scene_id).ok_or_else(|| {
                SynthError::MissingScene {
                    tuple_id: tuple.tuple_id.clone(),
                    scene_id: tuple.expr.scene_id.clone(),
                }
            })?;
            let mut rng = derive_rng(seed, &["oracle", &tuple.tuple_id]);
            let mut source = scene.object(tuple.expr.target_id)?;
            if noise.substitute_prob > 0.0 && rng.gen_bool(noise.substitute_prob.min(1.0)) {
                let mut others: Vec<&ObjectNode> = scene
                    .objects
                    .iter()
                    .filter(|o| o.id != tuple.expr.target_id)
                    .collect();
                others.sort_by_key(|o| o.id);
                if let Some(&swap) = others.as_slice().choose(&mut rng) {
                    source = swap;
                }
            }
            let mut mask = source.mask.clone();
            if noise.mask_erosion > 0 {
                mask = mask.erode(noise.mask_erosion);
            }
            if noise.mask_dilation > 0 {
                mask = mask.dilate(noise.mask_dilation);
            }
            let mask = if noise.drop_mask_prob > 0.0 && rng.gen_bool(noise.drop_mask_prob.min(1.0))
            {
                None
            } else {
                Some(mask)
            };
            let mut grasps: Vec<ScoredGrasp> = Vec::new();
            for (i, g) in source.grasps.iter().enumerate() {
                let jitter = |rng: &mut ChaCha12Rng, j: f64| {
                    if j > 0.0 {
                        rng.gen_range(-j..=j)
                    } else {
                        0.0
                    }
                };
                let dx = jitter(&mut rng, noise.center_jitter_px);
                let dy = jitter(&mut rng, noise.center_jitter_px);
                grasps.push(ScoredGrasp {
                    rect: GraspRectangle::new(
                        g.cx + dx,
                        g.cy + dy,
                        g.angle + noise.angle_offset_deg.to_radians(),
                        g.width * noise.width_scale,
                        g.height,
                    ),
                    confidence: 1.0 - i as f64 * 1e-3,
                });
            }
            let (img_h, img_w) = scene.image_size;
            for i in 0..noise.extra_random_grasps {
                grasps.push(ScoredGrasp {
                    rect: GraspRectangle::new(
                        rng.gen_range(0.0..img_w as f64),
                        rng.gen_range(0.0..img_h as f64),
                        rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
                        rng.gen_range(8.0..30.0),
                        rng.gen_range(5.0..15.0),
                    ),
                    confidence: 0.5 - i as f64 * 1e-3,
                });
            }
            Ok(Prediction {
                tuple_id: tuple.tuple_id.clone(),
                mask,
                grasps,
            })
        })
        .collect()
}
