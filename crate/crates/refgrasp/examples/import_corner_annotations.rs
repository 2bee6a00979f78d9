//! Ingests grasps from the classic corner-list text format (four "x y"
//! lines per rectangle) and a minimal on-disk scene folder, then writes
//! the result in the canonical dataset layout.

use refgrasp::dataset::import::{import_corner_grasps, import_scene_tree};
use refgrasp::dataset::{load_dataset, write_dataset, Dataset};
use refgrasp::mask::Mask;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Corner lists leave the jaw-opening edge implicit; the importer takes
    // the longer edge and re-derives center, angle, and extents.
    let text = "\
40 45
60 45
60 55
40 55
82.3 10.1
95.0 22.8
88.6 29.2
75.9 16.5
";
    let grasps = import_corner_grasps(text)?;
    println!("parsed {} grasp rectangles:", grasps.len());
    for g in &grasps {
        println!(
            "  center ({:>5.1}, {:>5.1})  angle {:>7.3}  {:>5.1} x {:<5.1}",
            g.cx, g.cy, g.angle, g.width, g.height
        );
    }

    // A throwaway scene folder in the import layout: scene.json describing
    // the objects, one mask PNG per object, one corner file per object.
    let root = std::env::temp_dir().join("refgrasp-example-import");
    let scene_dir = root.join("tabletop/take1");
    std::fs::create_dir_all(scene_dir.join("masks"))?;
    std::fs::create_dir_all(scene_dir.join("grasps"))?;
    std::fs::write(
        scene_dir.join("scene.json"),
        serde_json::json!({
            "split": "test",
            "objects": [
                { "id": 1, "category": "cereal box", "instance_name": "corn flakes",
                  "color": "yellow", "depth_m": 0.92 },
                { "id": 2, "category": "bowl", "instance_name": "blue bowl",
                  "color": "blue", "depth_m": 0.88 },
            ],
        })
        .to_string(),
    )?;
    let mut mask = Mask::new(96, 96);
    mask.fill_rect(30, 35, 20, 14);
    mask.write_png(&scene_dir.join("masks/1.png"))?;
    let mut mask = Mask::new(96, 96);
    mask.fill_ellipse(55, 60, 18, 18);
    mask.write_png(&scene_dir.join("masks/2.png"))?;
    std::fs::write(scene_dir.join("grasps/1.txt"), "34 38\n50 38\n50 46\n34 46\n")?;

    let scenes = import_scene_tree(&root)?;
    println!();
    println!("imported {} scene(s):", scenes.len());
    for s in &scenes {
        println!(
            "  {}: {} objects, {} relation edges, {} location labels",
            s.scene_id,
            s.objects.len(),
            s.relations.len(),
            s.locations.len()
        );
    }

    let mut dataset = Dataset::empty("imported");
    for s in scenes {
        dataset.scenes.insert(s.scene_id.clone(), s);
    }
    let out = root.join("converted");
    write_dataset(&dataset, &out)?;
    let reloaded = load_dataset(&out)?;
    println!();
    println!(
        "canonical copy at {} reloads with {} scene(s)",
        out.display(),
        reloaded.scenes.len()
    );
    Ok(())
}
