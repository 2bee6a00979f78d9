//! Validates every expression record against its scene: does the program
//! still resolve to exactly its target, does the text fit the claimed
//! template, is anything duplicated or over budget? A fresh corpus passes
//! clean; a tampered one gets flagged.

use refgrasp::dataset::build_synthetic;
use refgrasp::refexp::generate::GenerationConfig;
use refgrasp::refexp::templates::TemplateCatalog;
use refgrasp::refexp::validate::validate_tuples;
use refgrasp::synth::{Catalog, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = Catalog::builtin();
    let synth = SynthConfig {
        scenes: 8,
        seed: 31,
        ..Default::default()
    };
    let generation = GenerationConfig::new(catalog.lexicon(), 31);
    let mut dataset = build_synthetic("audit", &catalog, &synth, &generation)?;
    let templates = TemplateCatalog::builtin();

    let report = validate_tuples(
        &dataset.scenes,
        &dataset.tuples,
        &dataset.catalog,
        &templates,
        generation.max_tokens,
    );
    println!(
        "fresh corpus: {} records checked, {} violations",
        report.checked,
        report.violations.len()
    );
    assert!(report.ok());

    // Sabotage: retarget one record at a different object and garble
    // another record's text.
    dataset.tuples[0].expr.target_id += 1;
    let n = dataset.tuples.len();
    dataset.tuples[n / 2].expr.text.push_str(" please");

    let report = validate_tuples(
        &dataset.scenes,
        &dataset.tuples,
        &dataset.catalog,
        &templates,
        generation.max_tokens,
    );
    println!();
    println!(
        "tampered corpus: {} records checked, {} violations",
        report.checked,
        report.violations.len()
    );
    for v in &report.violations {
        println!("  {}  {}  {}", v.tuple_id, v.kind.as_str(), v.detail);
    }
    assert!(!report.ok());
    Ok(())
}
