//! Construction and evaluation toolkit for referring grasp synthesis: the
//! task of locating the one object in a cluttered tabletop scene that a
//! natural-language expression refers to, and producing a 4-DoF grasp for
//! it.
//!
//! The crate covers the full benchmark loop:
//!
//! * [`scene`] — scene graphs: objects with masks, centroids, grasp
//!   annotations, plus derived spatial relations (eight planar sectors and
//!   a depth-gated "on") and image-thirds location labels.
//! * [`refexp`] — template-based referring-expression generation across
//!   five families (name, attribute, relation, location, mixed), with a
//!   compiled program per expression and an independent validator that
//!   re-checks uniqueness and text/program agreement.
//! * [`grasp`] — oriented grasp rectangles, exact polygon-clipping IoU,
//!   and the pixel-map representation (quality / angle / width) with
//!   rendering, peak decoding, and 16-bit PNG round-tripping.
//! * [`metrics`] — referring-segmentation IoU and precision plus grasp
//!   metrics (J@1, J@Any) aggregated overall and per family.
//! * [`mask`] — bit masks with RLE and PNG codecs, morphology, and the
//!   geometry helpers everything else leans on.
//! * [`dataset`] — the on-disk corpus layout (manifest, scenes, masks,
//!   per-split record files), seeded split assignment, corpus statistics,
//!   and an importer for corner-format grasp annotations arranged in a
//!   scene tree.
//! * [`synth`] — a deterministic scene synthesizer and a noise-injecting
//!   oracle predictor, used to exercise the whole pipeline end to end.
//! * [`cli`] — the `refgrasp` binary: `synth`, `generate`, `validate`,
//!   `stats`, `evaluate`, `render-maps`, and `decode`.
//!
//! Everything seeded is reproducible byte for byte: the same seed yields
//! the same corpus, records, and reports at any thread count.
//!
//! The `examples/` directory demonstrates each capability as a runnable
//! program; start with `build_synthetic_dataset`.

pub mod cli;
pub mod dataset;
pub mod grasp;
pub mod mask;
pub mod metrics;
pub mod refexp;
pub mod scene;
pub mod synth;
#[cfg(test)]
pub(crate) mod testkit;
pub mod util;

pub use dataset::{build_synthetic, load_dataset, write_dataset, Dataset};
pub use grasp::{
    decode_grasps, rect_iou, render_grasp_maps, DecodeConfig, GraspMaps, GraspRectangle,
    RenderConfig,
};
pub use mask::Mask;
pub use metrics::{evaluate, grasp_success, EvalOptions, EvalReport, Prediction};
pub use refexp::generate::{generate_for_scene, GenerationConfig};
pub use refexp::validate::validate_tuples;
pub use refexp::{Family, ReferringExpression, Tuple};
pub use scene::{ObjectNode, Predicate, SceneGraph, Split};
pub use synth::{oracle_predict, synthesize_scenes, Catalog, NoiseSpec, SynthConfig};
