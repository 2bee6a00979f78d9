//! Scoring for referring segmentation (mask IoU, Pr@X) and referring grasp
//! synthesis (J@1, J@Any). All reported values are percentages rounded to
//! six decimals; aggregation order is fixed so reports are byte-stable
//! regardless of thread count.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grasp::{angle_difference_deg, rect_iou, GraspRectangle};
use crate::mask::{Mask, MaskError};
use crate::refexp::{Family, Tuple, FAMILIES};
use crate::scene::{SceneError, SceneGraph, Split};
use crate::util::round6;

/// A predicted grasp counts as correct when both hold against some
/// reference grasp: angle within this tolerance...
pub const ANGLE_TOLERANCE_DEG: f64 = 30.0;
/// ...and rotated-rectangle IoU strictly above this floor.
pub const RECT_IOU_FLOOR: f64 = 0.25;
/// J@Any never looks past this many predictions per sample.
pub const MAX_TOP_N: usize = 25;
/// Pr@X thresholds reported by [`evaluate`].
pub const PRECISION_LEVELS: [u32; 5] = [50, 60, 70, 80, 90];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("precision threshold must be in 1..=99, got {x}")]
    BadThreshold { x: u32 },
    #[error("predictions reference unknown tuple ids: {}", ids.join(", "))]
    UnknownTupleIds { ids: Vec<String> },
    #[error("tuple id {id} predicted more than once")]
    DuplicatePrediction { id: String },
    #[error("tuple {tuple_id} points at missing scene {scene_id}")]
    MissingScene { tuple_id: String, scene_id: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Mask IoU with the missing-prediction convention: no mask scores zero.
pub fn ris_iou(pred: Option<&Mask>, truth: &Mask) -> Result<f64, MaskError> {
    match pred {
        None => Ok(0.0),
        Some(mask) => mask.iou(truth),
    }
}

/// Share of samples (in percent) whose IoU strictly exceeds x/100.
/// Empty input scores zero.
pub fn precision_at(ious: &[f64], x: u32) -> Result<f64, MetricsError> {
    if !(1..=99).contains(&x) {
        return Err(MetricsError::BadThreshold { x });
    }
    if ious.is_empty() {
        return Ok(0.0);
    }
    let threshold = f64::from(x) / 100.0;
    let hits = ious.iter().filter(|&&v| v > threshold).count();
    Ok(100.0 * hits as f64 / ious.len() as f64)
}

/// The standard rectangle criterion: angle within 30 degrees and rotated
/// IoU strictly above 0.25.
pub fn grasp_success(pred: &GraspRectangle, truth: &GraspRectangle) -> bool {
    angle_difference_deg(pred.angle, truth.angle) <= ANGLE_TOLERANCE_DEG
        && rect_iou(pred, truth) > RECT_IOU_FLOOR
}

fn matches_any(pred: &GraspRectangle, references: &[GraspRectangle]) -> bool {
    references.iter().any(|r| grasp_success(pred, r))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredGrasp {
    #[serde(flatten)]
    pub rect: GraspRectangle,
    pub confidence: f64,
}

/// One model output: segmentation mask and ranked grasps, either optional.
/// Serializes with the mask as run-length counts, so prediction files stay
/// line-oriented JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub tuple_id: String,
    #[serde(default, with = "mask_as_rle", skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
    pub grasps: Vec<ScoredGrasp>,
}

mod mask_as_rle {
    use crate::mask::{Mask, RleMask};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mask: &Option<Mask>, s: S) -> Result<S::Ok, S::Error> {
        match mask {
            Some(m) => s.serialize_some(&m.to_rle()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mask>, D::Error> {
        let rle: Option<RleMask> = Option::deserialize(d)?;
        rle.map(|r| Mask::from_rle(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Restrict to tuples whose scene carries this split.
    pub split: Option<Split>,
    /// Restrict to these expression families.
    pub families: Option<BTreeSet<Family>>,
    /// Predictions considered by J@Any, clamped to [`MAX_TOP_N`].
    pub top_n: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            split: None,
            families: None,
            top_n: MAX_TOP_N,
        }
    }
}

/// Aggregates for one slice of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub count: usize,
    /// Mean mask IoU, percent.
    pub mean_iou: f64,
    /// Pr@X keyed by threshold, percent.
    pub precision: BTreeMap<u32, f64>,
    /// Top-ranked grasp correct, percent.
    pub j_at_1: f64,
    /// Any top-N grasp correct, percent.
    pub j_at_any: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricBlock,
    pub per_family: BTreeMap<Family, MetricBlock>,
}

struct Sample {
    family: Family,
    iou: f64,
    j1: bool,
    jany: bool,
}

#[derive(Default)]
struct Acc {
    n: usize,
    iou_sum: f64,
    pr_hits: [usize; PRECISION_LEVELS.len()],
    j1_hits: usize,
    jany_hits: usize,
}

impl Acc {
    fn push(&mut self, s: &Sample) {
        self.n += 1;
        self.iou_sum += s.iou;
        for (slot, &level) in self.pr_hits.iter_mut().zip(PRECISION_LEVELS.iter()) {
            if s.iou > f64::from(level) / 100.0 {
                *slot += 1;
            }
        }
        self.j1_hits += usize::from(s.j1);
        self.jany_hits += usize::from(s.jany);
    }

    fn block(&self) -> MetricBlock {
        let pct = |hits: usize| {
            if self.n == 0 {
                0.0
            } else {
                round6(100.0 * hits as f64 / self.n as f64)
            }
        };
        let mean_iou = if self.n == 0 {
            0.0
        } else {
            round6(100.0 * self.iou_sum / self.n as f64)
        };
        MetricBlock {
            count: self.n,
            mean_iou,
            precision: PRECISION_LEVELS
                .iter()
                .zip(self.pr_hits.iter())
                .map(|(&level, &hits)| (level, pct(hits)))
                .collect(),
            j_at_1: pct(self.j1_hits),
            j_at_any: pct(self.jany_hits),
        }
    }
}

fn score_sample(
    tuple: &Tuple,
    scene: &SceneGraph,
    prediction: Option<&Prediction>,
    top_n: usize,
) -> Result<Sample, MetricsError> {
    let target = scene.object(tuple.expr.target_id)?;
    let family = tuple.expr.program.family;
    let Some(pred) = prediction else {
        return Ok(Sample {
            family,
            iou: 0.0,
            j1: false,
            jany: false,
        });
    };
    let iou = ris_iou(pred.mask.as_ref(), &target.mask)?;
    let mut ranked: Vec<&ScoredGrasp> = pred.grasps.iter().collect();
    ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let j1 = ranked
        .first()
        .is_some_and(|g| matches_any(&g.rect, &target.grasps));
    let jany = ranked
        .iter()
        .take(top_n.min(MAX_TOP_N))
        .any(|g| matches_any(&g.rect, &target.grasps));
    Ok(Sample {
        family,
        iou,
        j1,
        jany,
    })
}

/// Scores predictions against the ground truth. Tuples without a
/// prediction score zero on everything; predictions whose tuple_id is not
/// in `tuples` are an error (listing the offending ids). Parallel over
/// samples, but aggregation runs in input order, so the report is
/// identical for any thread count.
pub fn evaluate(
    scenes: &BTreeMap<String, SceneGraph>,
    tuples: &[Tuple],
    predictions: &[Prediction],
    options: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    let known: BTreeSet<&str> = tuples.iter().map(|t| t.tuple_id.as_str()).collect();
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    let mut unknown: Vec<String> = Vec::new();
    for p in predictions {
        if !known.contains(p.tuple_id.as_str()) {
            unknown.push(p.tuple_id.clone());
            continue;
        }
        if by_id.insert(p.tuple_id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicatePrediction {
                id: p.tuple_id.clone(),
            });
        }
    }
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(MetricsError::UnknownTupleIds { ids: unknown });
    }

    let mut selected: Vec<(&Tuple, &SceneGraph)> = Vec::new();
    for tuple in tuples {
        let scene = scenes.get(&tuple.expr.scene_id).ok_or_else(|| {
            MetricsError::MissingScene {
                tuple_id: tuple.tuple_id.clone(),
                scene_id: tuple.expr.scene_id.clone(),
            }
        })?;
        if options.split.is_some_and(|s| scene.split != s) {
            continue;
        }
        if options
            .families
            .as_ref()
            .is_some_and(|f| !f.contains(&tuple.expr.program.family))
        {
            continue;
        }
        selected.push((tuple, scene));
    }

    let samples: Vec<Sample> = selected
        .par_iter()
        .map(|(tuple, scene)| {
            score_sample(
                tuple,
                scene,
                by_id.get(tuple.tuple_id.as_str()).copied(),
                options.top_n,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut overall = Acc::default();
    let mut per_family: BTreeMap<Family, Acc> = FAMILIES.iter().map(|&f| (f, Acc::default())).collect();
    for sample in &samples {
        overall.push(sample);
        per_family.get_mut(&sample.family).expect("all families present").push(sample);
    }
    Ok(EvalReport {
        overall: overall.block(),
        per_family: per_family.iter().map(|(&f, acc)| (f, acc.block())).collect(),
    })
}
