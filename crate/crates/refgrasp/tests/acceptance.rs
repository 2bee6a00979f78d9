//! The acceptance gate. Each test is one release criterion and prints a
//! single PASS (or SKIP) line; a failure panics with the evidence. Run as
//!
//!     cargo test --test acceptance -- --nocapture

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;

use refgrasp::dataset::{build_synthetic, load_dataset, Dataset};
use refgrasp::grasp::{
    decode_grasps, render_grasp_maps, rect_iou, DecodeConfig, GraspRectangle, RenderConfig,
};
use refgrasp::metrics::{evaluate, grasp_success, EvalOptions, Prediction, PRECISION_LEVELS};
use refgrasp::refexp::generate::GenerationConfig;
use refgrasp::refexp::templates::TemplateCatalog;
use refgrasp::refexp::validate::validate_tuples;
use refgrasp::refexp::{Family, FAMILIES};
use refgrasp::scene::{Predicate, SceneGraph, Split};
use refgrasp::synth::{oracle_predict, synthesize_scenes, Catalog, NoiseSpec, SynthConfig};
use refgrasp::util::derive_rng;

fn corpus(scenes: usize, seed: u64) -> Dataset {
    let catalog = Catalog::builtin();
    let synth = SynthConfig {
        scenes,
        seed,
        ..Default::default()
    };
    let generation = GenerationConfig::new(catalog.lexicon(), seed);
    build_synthetic("acceptance", &catalog, &synth, &generation).expect("synthetic corpus")
}

// ------------------------------------------------------------------ 1 --

/// Clipping-based rotated-rectangle IoU agrees with a 10x-resolution
/// rasterization oracle within 5e-3 on 1,000 seeded pairs, in under 1 s.
#[test]
fn criterion_1_rect_iou_matches_rasterization() {
    let mut rng = derive_rng(31415, &["acceptance", "rect-iou"]);
    let mut pairs = Vec::new();
    for _ in 0..1000 {
        let a = GraspRectangle::new(
            rng.gen_range(30.0..70.0),
            rng.gen_range(30.0..70.0),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(5.0..20.0),
            rng.gen_range(4.0..14.0),
        );
        let b = GraspRectangle::new(
            a.cx + rng.gen_range(-14.0..14.0),
            a.cy + rng.gen_range(-14.0..14.0),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(5.0..20.0),
            rng.gen_range(4.0..14.0),
        );
        pairs.push((a, b));
    }

    // Oracle: sample the overlap of the two axis-aligned bounding boxes on
    // a 0.1 px grid (cell centers); union from exact areas.
    let raster_iou = |a: &GraspRectangle, b: &GraspRectangle| -> f64 {
        let half = |r: &GraspRectangle| (r.width + r.height) / 2.0;
        let lo_x = (a.cx - half(a)).max(b.cx - half(b));
        let hi_x = (a.cx + half(a)).min(b.cx + half(b));
        let lo_y = (a.cy - half(a)).max(b.cy - half(b));
        let hi_y = (a.cy + half(a)).min(b.cy + half(b));
        if lo_x >= hi_x || lo_y >= hi_y {
            return 0.0;
        }
        const STEP: f64 = 0.1;
        let nx = ((hi_x - lo_x) / STEP).ceil() as usize;
        let ny = ((hi_y - lo_y) / STEP).ceil() as usize;
        let mut hits = 0u64;
        for iy in 0..ny {
            let y = lo_y + (iy as f64 + 0.5) * STEP;
            for ix in 0..nx {
                let x = lo_x + (ix as f64 + 0.5) * STEP;
                if a.contains(x, y) && b.contains(x, y) {
                    hits += 1;
                }
            }
        }
        let inter = hits as f64 * STEP * STEP;
        inter / (a.area() + b.area() - inter)
    };

    let start = Instant::now();
    let mut worst = 0.0f64;
    for (a, b) in &pairs {
        let gap = (rect_iou(a, b) - raster_iou(a, b)).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 5e-3,
            "pair {a:?} vs {b:?}: clip {} raster {} differ by {gap}",
            rect_iou(a, b),
            raster_iou(a, b)
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "1000-pair batch took {elapsed:?}, budget is 1 s"
    );
    println!(
        "ACCEPTANCE 1 PASS rect IoU vs rasterization: 1000 pairs, worst gap {worst:.2e}, {elapsed:?}"
    );
}

// ------------------------------------------------------------------ 2 --

/// Painted pixels of one grasp, for overlap attribution.
fn painted_pixels(g: &GraspRectangle, h: u32, w: u32) -> Vec<(usize, usize)> {
    let maps = render_grasp_maps(std::slice::from_ref(g), h, w, &RenderConfig::default())
        .expect("render single grasp");
    maps.quality
        .indexed_iter()
        .filter(|(_, &q)| q > 0.0)
        .map(|((y, x), _)| (y, x))
        .collect()
}

/// Over 500 synthetic scenes, decoding rendered ground truth recovers a
/// matching grasp for at least 99% of inputs, and every failure involves
/// overlapping painted regions.
#[test]
fn criterion_2_render_decode_round_trip() {
    let catalog = Catalog::builtin();
    let config = SynthConfig {
        scenes: 500,
        grasps_per_object: (1, 1),
        min_grasp_center_dist: 12.0,
        seed: 2222,
        ..Default::default()
    };
    let scenes = synthesize_scenes(&catalog, &config).expect("synth scenes");

    let decode_cfg = DecodeConfig::default();
    let mut total = 0usize;
    let mut failures: Vec<(String, GraspRectangle)> = Vec::new();
    for scene in &scenes {
        let truth: Vec<GraspRectangle> =
            scene.objects.iter().flat_map(|o| o.grasps.clone()).collect();
        let (h, w) = scene.image_size;
        let maps = render_grasp_maps(&truth, h, w, &RenderConfig::default()).expect("render");
        let decoded = decode_grasps(&maps, &decode_cfg).expect("decode");
        for gt in &truth {
            total += 1;
            let nearest = decoded.iter().min_by(|p, q| {
                let d = |r: &GraspRectangle| (r.cx - gt.cx).hypot(r.cy - gt.cy);
                d(&p.rect).total_cmp(&d(&q.rect))
            });
            let ok = nearest.is_some_and(|d| grasp_success(&d.rect, gt));
            if !ok {
                failures.push((scene.scene_id.clone(), *gt));
            }
        }
    }
    let rate = 100.0 * (total - failures.len()) as f64 / total as f64;
    assert!(
        rate >= 99.0,
        "round trip rate {rate:.2}% over {total} grasps ({} failures)",
        failures.len()
    );

    // Every failure must be explainable: its painted band intersects the
    // band of some other grasp in the same scene.
    for (scene_id, gt) in &failures {
        let scene = scenes.iter().find(|s| &s.scene_id == scene_id).unwrap();
        let (h, w) = scene.image_size;
        let mine: std::collections::BTreeSet<(usize, usize)> =
            painted_pixels(gt, h, w).into_iter().collect();
        let overlapped = scene
            .objects
            .iter()
            .flat_map(|o| &o.grasps)
            .filter(|other| *other != gt)
            .any(|other| painted_pixels(other, h, w).iter().any(|p| mine.contains(p)));
        assert!(
            overlapped,
            "scene {scene_id}: grasp {gt:?} failed the round trip without any painted overlap"
        );
    }
    println!(
        "ACCEPTANCE 2 PASS render/decode round trip: {total} grasps, {rate:.2}% matched, {} failures all overlap-attributable",
        failures.len()
    );
}

// ------------------------------------------------------------------ 3 --

/// Over 200 synthetic scenes every generated expression passes validation,
/// and every non-name expression targets a category with at least two
/// instances in its scene.
#[test]
fn criterion_3_generation_uniqueness() {
    let dataset = corpus(200, 3333);
    assert!(
        dataset.tuples.len() >= 1000,
        "corpus too small to be meaningful: {}",
        dataset.tuples.len()
    );
    let templates = TemplateCatalog::builtin();
    let report = validate_tuples(
        &dataset.scenes,
        &dataset.tuples,
        &dataset.catalog,
        &templates,
        20,
    );
    assert!(
        report.ok(),
        "validation found {} violations, first: {:?}",
        report.violations.len(),
        report.violations.first()
    );

    let mut ambiguous_targets = 0usize;
    let mut non_name = 0usize;
    for tuple in &dataset.tuples {
        if tuple.expr.program.family == Family::Name {
            continue;
        }
        non_name += 1;
        let scene = &dataset.scenes[&tuple.expr.scene_id];
        let target = scene.object(tuple.expr.target_id).expect("target exists");
        let rivals = scene
            .objects
            .iter()
            .filter(|o| o.category == target.category)
            .count();
        if rivals >= 2 {
            ambiguous_targets += 1;
        }
    }
    assert_eq!(
        ambiguous_targets, non_name,
        "some non-name expressions target singleton categories"
    );
    println!(
        "ACCEPTANCE 3 PASS generation uniqueness: {} records over 200 scenes, zero violations, {non_name}/{non_name} non-name records target ambiguous categories",
        report.checked
    );
}

// ------------------------------------------------------------------ 4 --

/// The zero-noise oracle scores a perfect 100.0 on every reported metric.
#[test]
fn criterion_4_oracle_fixed_point() {
    let dataset = corpus(40, 4444);
    let predictions =
        oracle_predict(&dataset.scenes, &dataset.tuples, &NoiseSpec::default(), 4444)
            .expect("oracle");
    let report = evaluate(
        &dataset.scenes,
        &dataset.tuples,
        &predictions,
        &EvalOptions::default(),
    )
    .expect("evaluate");

    let mut blocks = vec![("overall".to_string(), &report.overall)];
    for (family, block) in &report.per_family {
        if block.count > 0 {
            blocks.push((family.as_str().to_string(), block));
        }
    }
    for (name, block) in blocks {
        assert_eq!(block.mean_iou, 100.0, "{name} mean IoU");
        for x in PRECISION_LEVELS {
            assert_eq!(block.precision[&x], 100.0, "{name} Pr@{x}");
        }
        assert_eq!(block.j_at_1, 100.0, "{name} J@1");
        assert_eq!(block.j_at_any, 100.0, "{name} J@Any");
    }
    println!(
        "ACCEPTANCE 4 PASS oracle fixed point: {} samples, all metrics exactly 100.0",
        report.overall.count
    );
}

// ------------------------------------------------------------------ 5 --

/// Per-pixel mask IoU, written naively on purpose.
fn brute_iou(pred: Option<&refgrasp::mask::Mask>, truth: &refgrasp::mask::Mask) -> f64 {
    let Some(pred) = pred else { return 0.0 };
    let (mut inter, mut uni) = (0u64, 0u64);
    for y in 0..truth.height() {
        for x in 0..truth.width() {
            let (p, t) = (pred.get(x, y), truth.get(x, y));
            if p && t {
                inter += 1;
            }
            if p || t {
                uni += 1;
            }
        }
    }
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// On noise-corrupted predictions, the evaluator's aggregates equal a
/// from-scratch per-sample recomputation exactly; Pr@X is monotone in X
/// and J@Any never drops below J@1.
#[test]
fn criterion_5_metric_oracle_equivalence() {
    let catalog = Catalog::builtin();
    // Single-grasp targets so the deterministic angle offset can be
    // reasoned about; the jitter and drops exercise every code path.
    let synth = SynthConfig {
        scenes: 12,
        grasps_per_object: (1, 1),
        seed: 5555,
        ..Default::default()
    };
    let generation = GenerationConfig::new(catalog.lexicon(), 5555);
    let dataset =
        build_synthetic("acceptance-noise", &catalog, &synth, &generation).expect("corpus");
    assert!(dataset.tuples.len() >= 100, "need at least 100 samples");

    let noise = NoiseSpec {
        mask_erosion: 1,
        drop_mask_prob: 0.15,
        substitute_prob: 0.10,
        center_jitter_px: 3.0,
        angle_offset_deg: 12.0,
        width_scale: 0.9,
        extra_random_grasps: 2,
        ..Default::default()
    };
    let predictions =
        oracle_predict(&dataset.scenes, &dataset.tuples, &noise, 5555).expect("oracle");
    let options = EvalOptions::default();
    let report = evaluate(&dataset.scenes, &dataset.tuples, &predictions, &options)
        .expect("evaluate");

    // Independent recomputation: per-sample values, then naive averages.
    let by_id: BTreeMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.tuple_id.as_str(), p))
        .collect();
    let mut per_family: BTreeMap<Family, Vec<(f64, bool, bool)>> =
        FAMILIES.iter().map(|&f| (f, Vec::new())).collect();
    for tuple in &dataset.tuples {
        let scene = &dataset.scenes[&tuple.expr.scene_id];
        let target = scene.object(tuple.expr.target_id).expect("target");
        let pred = by_id.get(tuple.tuple_id.as_str()).copied();

        let iou = brute_iou(pred.and_then(|p| p.mask.as_ref()), &target.mask);

        let mut ranked: Vec<_> = pred.map(|p| p.grasps.clone()).unwrap_or_default();
        ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        let hit = |g: &GraspRectangle| target.grasps.iter().any(|t| grasp_success(g, t));
        let j1 = ranked.first().map(|g| hit(&g.rect)).unwrap_or(false);
        let depth = ranked.len().min(options.top_n).min(25);
        let jany = ranked[..depth].iter().any(|g| hit(&g.rect));
        per_family
            .get_mut(&tuple.expr.program.family)
            .unwrap()
            .push((iou, j1, jany));
    }

    let all: Vec<(f64, bool, bool)> = per_family.values().flatten().copied().collect();
    let expect_block = |samples: &[(f64, bool, bool)]| -> (f64, Vec<f64>, f64, f64) {
        let n = samples.len() as f64;
        let mean_iou = round6(100.0 * samples.iter().map(|s| s.0).sum::<f64>() / n);
        let mut precisions = Vec::new();
        for x in PRECISION_LEVELS {
            let hits = samples.iter().filter(|s| s.0 > f64::from(x) / 100.0).count();
            precisions.push(round6(100.0 * hits as f64 / n));
        }
        let j1 = round6(100.0 * samples.iter().filter(|s| s.1).count() as f64 / n);
        let jany = round6(100.0 * samples.iter().filter(|s| s.2).count() as f64 / n);
        (mean_iou, precisions, j1, jany)
    };

    let (mean_iou, precisions, j1, jany) = expect_block(&all);
    assert_eq!(report.overall.mean_iou, mean_iou, "overall mean IoU");
    for (i, x) in PRECISION_LEVELS.into_iter().enumerate() {
        assert_eq!(report.overall.precision[&x], precisions[i], "overall Pr@{x}");
    }
    assert_eq!(report.overall.j_at_1, j1, "overall J@1");
    assert_eq!(report.overall.j_at_any, jany, "overall J@Any");
    for (family, samples) in &per_family {
        if samples.is_empty() {
            continue;
        }
        let block = &report.per_family[family];
        let (mean_iou, precisions, j1, jany) = expect_block(samples);
        assert_eq!(block.mean_iou, mean_iou, "{family} mean IoU");
        for (i, x) in PRECISION_LEVELS.into_iter().enumerate() {
            assert_eq!(block.precision[&x], precisions[i], "{family} Pr@{x}");
        }
        assert_eq!(block.j_at_1, j1, "{family} J@1");
        assert_eq!(block.j_at_any, jany, "{family} J@Any");
    }

    // Structural sanity on every block of the report.
    let mut all_blocks = vec![&report.overall];
    all_blocks.extend(report.per_family.values());
    for block in all_blocks {
        let ordered: Vec<f64> = PRECISION_LEVELS.iter().map(|x| block.precision[x]).collect();
        assert!(
            ordered.windows(2).all(|w| w[0] >= w[1]),
            "Pr@X not monotone: {ordered:?}"
        );
        assert!(block.j_at_any >= block.j_at_1, "J@Any below J@1");
    }
    println!(
        "ACCEPTANCE 5 PASS metric oracle equivalence: {} noisy samples agree exactly; Pr@X monotone; J@Any >= J@1",
        report.overall.count
    );
}

// ------------------------------------------------------------------ 6 --

/// `synth`, `generate`, and `evaluate` produce byte-identical output at 1
/// vs 8 worker threads.
#[test]
fn criterion_6_thread_count_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_refgrasp");
    let dir = tempfile::tempdir().expect("tempdir");
    let path = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| {
        let out = Command::new(bin).args(args).output().expect("spawn refgrasp");
        assert!(
            out.status.success(),
            "refgrasp {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };

    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    run(&["synth", "--out", &s(&path("a")), "--seed", "9", "--scenes", "12", "--threads", "1"]);
    run(&["synth", "--out", &s(&path("b")), "--seed", "9", "--scenes", "12", "--threads", "8"]);
    let ha = refgrasp::dataset::hash_tree(&path("a")).unwrap();
    let hb = refgrasp::dataset::hash_tree(&path("b")).unwrap();
    assert_eq!(ha, hb, "synth trees differ across thread counts");

    run(&["generate", "--dataset", &s(&path("a")), "--out", &s(&path("ga")), "--seed", "4", "--threads", "1"]);
    run(&["generate", "--dataset", &s(&path("a")), "--out", &s(&path("gb")), "--seed", "4", "--threads", "8"]);
    let hga = refgrasp::dataset::hash_tree(&path("ga")).unwrap();
    let hgb = refgrasp::dataset::hash_tree(&path("gb")).unwrap();
    assert_eq!(hga, hgb, "generate trees differ across thread counts");

    // Predictions from the library's oracle, evaluated through the CLI.
    let dataset = load_dataset(&path("a")).expect("load synth output");
    let predictions =
        oracle_predict(&dataset.scenes, &dataset.tuples, &NoiseSpec::default(), 9)
            .expect("oracle");
    let mut lines = String::new();
    for p in &predictions {
        lines.push_str(&serde_json::to_string(p).unwrap());
        lines.push('\n');
    }
    std::fs::write(path("preds.jsonl"), lines).unwrap();
    let e1 = run(&["evaluate", "--dataset", &s(&path("a")), "--predictions", &s(&path("preds.jsonl")), "--format", "machine", "--threads", "1"]);
    let e8 = run(&["evaluate", "--dataset", &s(&path("a")), "--predictions", &s(&path("preds.jsonl")), "--format", "machine", "--threads", "8"]);
    assert_eq!(e1, e8, "evaluate output differs across thread counts");
    println!(
        "ACCEPTANCE 6 PASS determinism: synth {}.., generate {}.., evaluate bytes equal at 1 vs 8 threads",
        &ha[..8],
        &hga[..8]
    );
}

// ------------------------------------------------------------------ 7 --

/// When a converted real-world corpus is supplied via REFGRASP_OCID_VLG,
/// its statistics must reproduce the published counts exactly. Without the
/// corpus this criterion is skipped, never failed.
#[test]
fn criterion_7_real_corpus_counts() {
    let Some(root) = std::env::var_os("REFGRASP_OCID_VLG") else {
        println!("ACCEPTANCE 7 SKIP real-corpus counts: REFGRASP_OCID_VLG not set");
        return;
    };
    let dataset = load_dataset(std::path::Path::new(&root)).expect("load real corpus");
    let stats = refgrasp::dataset::stats::compute_stats(&dataset);
    assert_eq!(stats.scenes, 1763, "scene count");
    assert_eq!(stats.categories, 31, "category count");
    assert_eq!(stats.instances, 58, "instance count");
    assert_eq!(stats.tuples, 89639, "record count");
    let test = &stats.per_split[&Split::Test];
    let expected = [
        (Family::Name, 5809usize),
        (Family::Attribute, 781),
        (Family::Relation, 5769),
        (Family::Location, 2672),
        (Family::Mixed, 2718),
    ];
    for (family, count) in expected {
        assert_eq!(test[&family], count, "test-split {family} count");
    }
    println!("ACCEPTANCE 7 PASS real-corpus counts: 1763 scenes / 31 categories / 58 instances / 89639 records");
}

// ------------------------------------------------------------------ 8 --

/// Sector assignment by explicit range checks, independent of the floor
/// arithmetic used in production.
fn sector_oracle(dx: f64, dy: f64) -> Predicate {
    let mut deg = dy.atan2(dx).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    match deg {
        d if !(22.5..337.5).contains(&d) => Predicate::Right,
        d if d < 67.5 => Predicate::FrontRight,
        d if d < 112.5 => Predicate::Front,
        d if d < 157.5 => Predicate::FrontLeft,
        d if d < 202.5 => Predicate::Left,
        d if d < 247.5 => Predicate::RearLeft,
        d if d < 292.5 => Predicate::Behind,
        _ => Predicate::RearRight,
    }
}

fn planar_edges(scene: &SceneGraph) -> Vec<(u32, u32, Predicate)> {
    scene
        .relations
        .iter()
        .filter(|e| e.predicate.is_planar())
        .map(|e| (e.subject_id, e.object_id, e.predicate))
        .collect()
}

/// Over 100 synthetic scenes every pairwise planar predicate matches the
/// range-check oracle, and a global (+37, -12) px translation changes
/// nothing.
#[test]
fn criterion_8_relation_sectors_and_translation() {
    let catalog = Catalog::builtin();
    let config = SynthConfig {
        scenes: 100,
        seed: 8888,
        ..Default::default()
    };
    let scenes = synthesize_scenes(&catalog, &config).expect("synth scenes");
    let mut checked = 0usize;
    for scene in &scenes {
        for edge in scene.relations.iter().filter(|e| e.predicate.is_planar()) {
            let a = scene.object(edge.subject_id).unwrap();
            let b = scene.object(edge.object_id).unwrap();
            let expected = sector_oracle(
                a.centroid_px.0 - b.centroid_px.0,
                a.centroid_px.1 - b.centroid_px.1,
            );
            assert_eq!(
                edge.predicate, expected,
                "scene {} pair ({}, {})",
                scene.scene_id, edge.subject_id, edge.object_id
            );
            checked += 1;
        }

        let moved = {
            let mut objects = scene.objects.clone();
            for o in &mut objects {
                o.centroid_px = (o.centroid_px.0 + 37.0, o.centroid_px.1 - 12.0);
            }
            SceneGraph::build(
                scene.scene_id.clone(),
                scene.image_size,
                scene.rgb_path.clone(),
                scene.depth_path.clone(),
                objects,
                scene.split,
                &refgrasp::scene::RelationConfig::default(),
            )
            .expect("translated scene still builds")
        };
        assert_eq!(
            planar_edges(scene),
            planar_edges(&moved),
            "translation changed planar predicates in {}",
            scene.scene_id
        );
    }
    assert!(checked > 1000, "only {checked} edges checked");
    println!(
        "ACCEPTANCE 8 PASS relation sectors: {checked} edges match the range oracle; (+37, -12) translation is a no-op"
    );
}
