//! Round-trips grasps through the pixel-map representation: rasterize a
//! set of rectangles into quality/angle/width maps, save them as 16-bit
//! PNGs, load them back, and decode peaks into ranked rectangles again.

use refgrasp::grasp::{
    decode_grasps, render_grasp_maps, DecodeConfig, GraspMaps, GraspRectangle, RenderConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = vec![
        GraspRectangle::new(40.0, 30.0, 0.5, 24.0, 12.0),
        GraspRectangle::new(90.0, 80.0, -0.9, 30.0, 14.0),
        GraspRectangle::new(30.0, 95.0, 0.0, 18.0, 10.0),
    ];

    let maps = render_grasp_maps(&truth, 128, 128, &RenderConfig::default())?;
    let painted = maps.quality.iter().filter(|&&q| q > 0.0).count();
    println!("rendered {} grasps; {painted} painted pixels", truth.len());

    let dir = std::env::temp_dir().join("refgrasp-example-maps");
    std::fs::create_dir_all(&dir)?;
    maps.save_png(&dir, "demo")?;
    println!("maps saved under {}", dir.join("demo_*.png").display());

    let reloaded = GraspMaps::load_png(&dir, "demo")?;
    let decoded = decode_grasps(&reloaded, &DecodeConfig::default())?;
    println!("decoded {} grasps back:", decoded.len());
    for d in &decoded {
        let r = d.rect;
        // Match each decoded grasp to its nearest source rectangle.
        let (best, dist) = truth
            .iter()
            .map(|t| ((t.cx - r.cx).hypot(t.cy - r.cy) * 1000.0) as i64)
            .enumerate()
            .min_by_key(|&(_, d)| d)
            .unwrap();
        println!(
            "  ({:>6.1}, {:>6.1}) angle {:>7.3} width {:>5.1}  -> source #{best} ({:.2}px off)",
            r.cx,
            r.cy,
            r.angle,
            r.width,
            dist as f64 / 1000.0
        );
    }
    assert_eq!(decoded.len(), truth.len());
    Ok(())
}
