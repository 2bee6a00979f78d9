//! Command-line surface: one thin binary, each subcommand a short
//! delegation into the library.
//!
//! Exit codes: 0 on success, 1 when the run fails (unreadable or invalid
//! data, failed checks), 2 for usage errors. Every run echoes its resolved
//! seed and a digest of the effective configuration to stderr so outputs
//! can be matched to the runs that produced them. No subcommand writes
//! into the dataset root it reads from.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dataset::{
    build_synthetic, hash_tree, load_dataset, regenerate_tuples, write_dataset, Dataset,
};
use crate::dataset::stats::{compute_stats, StatsReport};
use crate::grasp::{decode_grasps, DecodeConfig, GraspMaps, RenderConfig};
use crate::metrics::{
    evaluate, EvalOptions, EvalReport, MetricBlock, Prediction, PRECISION_LEVELS,
};
use crate::refexp::generate::GenerationConfig;
use crate::refexp::templates::TemplateCatalog;
use crate::refexp::validate::{validate_tuples, ValidationReport};
use crate::refexp::{Family, FAMILIES};
use crate::scene::Split;
use crate::synth::{Catalog, SynthConfig};

/// Default dataset root when `--dataset` is not passed.
pub const DATASET_ROOT_ENV: &str = "REFGRASP_DATASET_ROOT";

#[derive(Parser)]
#[command(
    name = "refgrasp",
    version,
    about = "Referring grasp benchmark toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic dataset and write it under --out.
    Synth(SynthCmd),
    /// Regenerate referring expressions for an existing dataset into --out.
    Generate(GenerateCmd),
    /// Check every expression record against its scene.
    Validate(ValidateCmd),
    /// Count scenes, vocabulary, and expression records.
    Stats(StatsCmd),
    /// Score a predictions file against a dataset.
    Evaluate(EvaluateCmd),
    /// Rasterize per-record target grasp maps to PNG files.
    RenderMaps(RenderMapsCmd),
    /// Extract ranked grasps from rendered map files.
    Decode(DecodeCmd),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable text.
    Table,
    /// One JSON document on stdout.
    Machine,
}

#[derive(Args)]
struct RunFlags {
    /// Seed for anything randomized; echoed back even when unused.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses the rayon default. Never changes output bytes.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    out: PathBuf,
    /// Dataset name recorded in the manifest.
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 25)]
    scenes: usize,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct GenerateCmd {
    /// Dataset root to read scenes from (default: $REFGRASP_DATASET_ROOT).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Where the regenerated dataset goes; must differ from the input root.
    #[arg(long)]
    out: PathBuf,
    /// Only generate these families (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<Family>>,
    /// Cap on expressions per scene.
    #[arg(long)]
    max_per_scene: Option<usize>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct ValidateCmd {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Whitespace-token budget expressions must respect.
    #[arg(long, default_value_t = 20)]
    max_tokens: usize,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct StatsCmd {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct EvaluateCmd {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Predictions file: one JSON object per line.
    #[arg(long)]
    predictions: PathBuf,
    /// Restrict scoring to one split.
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    /// Restrict scoring to these families (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<Family>>,
    /// Predictions per sample considered by J@Any.
    #[arg(long, default_value_t = 25)]
    top_n: usize,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct RenderMapsCmd {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Only render records from one split.
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct DecodeCmd {
    /// Directory holding the map PNGs.
    dir: PathBuf,
    /// File stem the maps were saved under.
    stem: String,
    /// Keep only the best N grasps.
    #[arg(long)]
    top_n: Option<usize>,
    #[command(flatten)]
    run: RunFlags,
}

enum RunError {
    Usage(String),
    Failure(String),
}

fn fail(e: impl std::fmt::Display) -> RunError {
    RunError::Failure(e.to_string())
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code().clamp(0, 255) as u8;
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = dispatch(cli);
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Synth(cmd) => with_pool(cmd.run.threads, move || run_synth(cmd)),
        Command::Generate(cmd) => with_pool(cmd.run.threads, move || run_generate(cmd)),
        Command::Validate(cmd) => with_pool(cmd.run.threads, move || run_validate(cmd)),
        Command::Stats(cmd) => with_pool(cmd.run.threads, move || run_stats(cmd)),
        Command::Evaluate(cmd) => with_pool(cmd.run.threads, move || run_evaluate(cmd)),
        Command::RenderMaps(cmd) => with_pool(cmd.run.threads, move || run_render_maps(cmd)),
        Command::Decode(cmd) => with_pool(cmd.run.threads, move || run_decode(cmd)),
    }
}

/// Runs `f` on a scoped pool of the requested size so `--threads` never
/// leaks into later work; 0 keeps the process-wide default pool.
fn with_pool(
    threads: usize,
    f: impl FnOnce() -> Result<(), RunError> + Send,
) -> Result<(), RunError> {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(fail)?
        .install(f)
}

fn config_digest<T: Serialize>(command: &str, config: &T) -> String {
    let value = serde_json::json!({ "command": command, "config": config });
    let mut hasher = Sha256::new();
    hasher.update(value.to_string().as_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn announce<T: Serialize>(command: &str, seed: u64, config: &T) {
    eprintln!("seed: {seed}");
    eprintln!("config-digest: {}", config_digest(command, config));
}

fn dataset_root(flag: &Option<PathBuf>) -> Result<PathBuf, RunError> {
    if let Some(path) = flag {
        return Ok(path.clone());
    }
    match std::env::var_os(DATASET_ROOT_ENV) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => Err(RunError::Usage(format!(
            "no dataset root: pass --dataset or set {DATASET_ROOT_ENV}"
        ))),
    }
}

/// Output directories must never alias the dataset root being read.
fn guard_distinct(out: &PathBuf, root: &PathBuf) -> Result<(), RunError> {
    if let (Ok(a), Ok(b)) = (fs::canonicalize(out), fs::canonicalize(root)) {
        if a == b {
            return Err(RunError::Usage(
                "--out must differ from the dataset root".into(),
            ));
        }
    }
    Ok(())
}

fn load(root: &Path) -> Result<Dataset, RunError> {
    load_dataset(root).map_err(fail)
}

// ------------------------------------------------------------ commands --

fn run_synth(cmd: SynthCmd) -> Result<(), RunError> {
    let synth = SynthConfig {
        scenes: cmd.scenes,
        seed: cmd.run.seed,
        ..Default::default()
    };
    announce(
        "synth",
        cmd.run.seed,
        &serde_json::json!({
            "out": cmd.out.display().to_string(),
            "name": cmd.name,
            "scenes": cmd.scenes,
            "image_size": synth.image_size,
            "seed": cmd.run.seed,
        }),
    );
    let catalog = Catalog::builtin();
    let generation = GenerationConfig::new(catalog.lexicon(), cmd.run.seed);
    let dataset = build_synthetic(&cmd.name, &catalog, &synth, &generation).map_err(fail)?;
    write_dataset(&dataset, &cmd.out).map_err(fail)?;
    let digest = hash_tree(&cmd.out).map_err(fail)?;
    emit_write_summary(cmd.run.format, &dataset, &cmd.out.display().to_string(), &digest);
    Ok(())
}

fn run_generate(cmd: GenerateCmd) -> Result<(), RunError> {
    let root = dataset_root(&cmd.dataset)?;
    guard_distinct(&cmd.out, &root)?;
    announce(
        "generate",
        cmd.run.seed,
        &serde_json::json!({
            "dataset": root.display().to_string(),
            "out": cmd.out.display().to_string(),
            "families": cmd.families.as_ref().map(|fs| {
                fs.iter().map(|f| f.as_str()).collect::<Vec<_>>()
            }),
            "max_per_scene": cmd.max_per_scene,
            "seed": cmd.run.seed,
        }),
    );
    let mut dataset = load(&root)?;
    let mut generation = GenerationConfig::new(dataset.catalog.clone(), cmd.run.seed);
    if let Some(families) = &cmd.families {
        generation.quotas.retain(|f, _| families.contains(f));
    }
    if let Some(cap) = cmd.max_per_scene {
        generation.max_per_scene = cap;
    }
    dataset.tuples = regenerate_tuples(&dataset.scenes, &generation);
    write_dataset(&dataset, &cmd.out).map_err(fail)?;
    let digest = hash_tree(&cmd.out).map_err(fail)?;
    emit_write_summary(cmd.run.format, &dataset, &cmd.out.display().to_string(), &digest);
    Ok(())
}

fn run_validate(cmd: ValidateCmd) -> Result<(), RunError> {
    let root = dataset_root(&cmd.dataset)?;
    announce(
        "validate",
        cmd.run.seed,
        &serde_json::json!({
            "dataset": root.display().to_string(),
            "max_tokens": cmd.max_tokens,
        }),
    );
    let dataset = load(&root)?;
    let templates = TemplateCatalog::builtin();
    let report = validate_tuples(
        &dataset.scenes,
        &dataset.tuples,
        &dataset.catalog,
        &templates,
        cmd.max_tokens,
    );
    match cmd.run.format {
        Format::Machine => println!("{}", machine(&report)?),
        Format::Table => print!("{}", validation_table(&report)),
    }
    if report.ok() {
        Ok(())
    } else {
        Err(RunError::Failure(format!(
            "{} violation(s) across {} record(s)",
            report.violations.len(),
            report.checked
        )))
    }
}

fn run_stats(cmd: StatsCmd) -> Result<(), RunError> {
    let root = dataset_root(&cmd.dataset)?;
    announce(
        "stats",
        cmd.run.seed,
        &serde_json::json!({ "dataset": root.display().to_string() }),
    );
    let dataset = load(&root)?;
    let report = compute_stats(&dataset);
    match cmd.run.format {
        Format::Machine => println!("{}", machine(&report)?),
        Format::Table => print!("{}", stats_table(&report)),
    }
    Ok(())
}

fn run_evaluate(cmd: EvaluateCmd) -> Result<(), RunError> {
    let root = dataset_root(&cmd.dataset)?;
    announce(
        "evaluate",
        cmd.run.seed,
        &serde_json::json!({
            "dataset": root.display().to_string(),
            "predictions": cmd.predictions.display().to_string(),
            "split": cmd.split.map(|s| s.as_str()),
            "families": cmd.families.as_ref().map(|fs| {
                fs.iter().map(|f| f.as_str()).collect::<Vec<_>>()
            }),
            "top_n": cmd.top_n,
        }),
    );
    let dataset = load(&root)?;
    let text = fs::read_to_string(&cmd.predictions)
        .map_err(|e| RunError::Failure(format!("{}: {e}", cmd.predictions.display())))?;
    let mut predictions = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).map_err(|e| {
            RunError::Failure(format!(
                "{} line {}: {e}",
                cmd.predictions.display(),
                lineno + 1
            ))
        })?;
        predictions.push(p);
    }
    let options = EvalOptions {
        split: cmd.split,
        families: cmd.families.map(|fs| fs.into_iter().collect()),
        top_n: cmd.top_n,
    };
    let report = evaluate(&dataset.scenes, &dataset.tuples, &predictions, &options)
        .map_err(fail)?;
    match cmd.run.format {
        Format::Machine => println!("{}", machine(&report)?),
        Format::Table => print!("{}", eval_table(&report)),
    }
    Ok(())
}

fn run_render_maps(cmd: RenderMapsCmd) -> Result<(), RunError> {
    let root = dataset_root(&cmd.dataset)?;
    guard_distinct(&cmd.out, &root)?;
    announce(
        "render-maps",
        cmd.run.seed,
        &serde_json::json!({
            "dataset": root.display().to_string(),
            "out": cmd.out.display().to_string(),
            "split": cmd.split.map(|s| s.as_str()),
        }),
    );
    let dataset = load(&root)?;
    fs::create_dir_all(&cmd.out)
        .map_err(|e| RunError::Failure(format!("{}: {e}", cmd.out.display())))?;
    let mut rendered = 0usize;
    for tuple in &dataset.tuples {
        let scene = &dataset.scenes[&tuple.expr.scene_id];
        if cmd.split.is_some_and(|s| scene.split != s) {
            continue;
        }
        let target = scene.object(tuple.expr.target_id).map_err(fail)?;
        let (h, w) = scene.image_size;
        let mut maps =
            crate::grasp::render_grasp_maps(&target.grasps, h, w, &RenderConfig::default())
                .map_err(fail)?;
        maps.mask = Some(target.mask.clone());
        let stem = tuple.tuple_id.replace(['#', ':', '/'], "_");
        maps.save_png(&cmd.out, &stem).map_err(fail)?;
        rendered += 1;
    }
    match cmd.run.format {
        Format::Machine => println!(
            "{}",
            serde_json::json!({ "rendered": rendered, "out": cmd.out.display().to_string() })
        ),
        Format::Table => println!("rendered {rendered} record(s) into {}", cmd.out.display()),
    }
    Ok(())
}

fn run_decode(cmd: DecodeCmd) -> Result<(), RunError> {
    announce(
        "decode",
        cmd.run.seed,
        &serde_json::json!({
            "dir": cmd.dir.display().to_string(),
            "stem": cmd.stem,
            "top_n": cmd.top_n,
        }),
    );
    let maps = GraspMaps::load_png(&cmd.dir, &cmd.stem).map_err(fail)?;
    let config = DecodeConfig {
        top_n: cmd.top_n,
        ..Default::default()
    };
    let decoded = decode_grasps(&maps, &config).map_err(fail)?;
    match cmd.run.format {
        Format::Machine => println!("{}", serde_json::to_string(&decoded).map_err(fail)?),
        Format::Table => {
            println!(
                "{:>4}  {:>10} {:>10} {:>9} {:>8} {:>8} {:>7}",
                "rank", "cx", "cy", "angle", "width", "height", "quality"
            );
            for (i, g) in decoded.iter().enumerate() {
                println!(
                    "{:>4}  {:>10.3} {:>10.3} {:>9.4} {:>8.3} {:>8.3} {:>7.3}",
                    i + 1,
                    g.rect.cx,
                    g.rect.cy,
                    g.rect.angle,
                    g.rect.width,
                    g.rect.height,
                    g.quality
                );
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------------- rendering --

fn machine<T: Serialize>(value: &T) -> Result<String, RunError> {
    serde_json::to_string(value).map_err(fail)
}

fn emit_write_summary(format: Format, dataset: &Dataset, out: &str, digest: &str) {
    match format {
        Format::Machine => println!(
            "{}",
            serde_json::json!({
                "scenes": dataset.scenes.len(),
                "tuples": dataset.tuples.len(),
                "out": out,
                "tree_digest": digest,
            })
        ),
        Format::Table => {
            println!(
                "wrote {} scene(s), {} record(s) to {out}",
                dataset.scenes.len(),
                dataset.tuples.len()
            );
            println!("tree digest: {digest}");
        }
    }
}

fn validation_table(report: &ValidationReport) -> String {
    let mut out = format!(
        "checked     {}\nviolations  {}\n",
        report.checked,
        report.violations.len()
    );
    for (kind, count) in report.histogram() {
        out.push_str(&format!("  {kind:<18} {count}\n"));
    }
    const SHOWN: usize = 25;
    for v in report.violations.iter().take(SHOWN) {
        out.push_str(&format!("{}  {}  {}\n", v.tuple_id, v.kind.as_str(), v.detail));
    }
    if report.violations.len() > SHOWN {
        out.push_str(&format!("... and {} more\n", report.violations.len() - SHOWN));
    }
    out
}

fn stats_table(report: &StatsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenes      {}\n", report.scenes));
    out.push_str(&format!("objects     {}\n", report.objects));
    out.push_str(&format!("categories  {}\n", report.categories));
    out.push_str(&format!("instances   {}\n", report.instances));
    out.push_str(&format!("tuples      {}\n\n", report.tuples));

    out.push_str(&format!("{:<8}", "split"));
    for family in FAMILIES {
        out.push_str(&format!("{:>11}", family.as_str()));
    }
    out.push_str(&format!("{:>11}\n", "total"));
    let mut family_totals: BTreeMap<Family, usize> = FAMILIES.iter().map(|&f| (f, 0)).collect();
    for (split, families) in &report.per_split {
        out.push_str(&format!("{:<8}", split.as_str()));
        let mut total = 0;
        for family in FAMILIES {
            let n = families[&family];
            total += n;
            *family_totals.get_mut(&family).expect("prefilled") += n;
            out.push_str(&format!("{n:>11}"));
        }
        out.push_str(&format!("{total:>11}\n"));
    }
    out.push_str(&format!("{:<8}", "total"));
    for family in FAMILIES {
        out.push_str(&format!("{:>11}", family_totals[&family]));
    }
    out.push_str(&format!("{:>11}\n\n", report.tuples));

    out.push_str(&format!("{:<20}{:>8}{:>8}\n", "concept", "unique", "total"));
    for (kind, count) in &report.concepts {
        out.push_str(&format!("{kind:<20}{:>8}{:>8}\n", count.unique, count.total));
    }
    out
}

fn eval_table(report: &EvalReport) -> String {
    let mut out = format!("{:<11}{:>7}{:>8}", "slice", "count", "mIoU");
    for x in PRECISION_LEVELS {
        out.push_str(&format!("{:>8}", format!("Pr@{x}")));
    }
    out.push_str(&format!("{:>8}{:>8}\n", "J@1", "J@Any"));
    let mut row = |name: &str, block: &MetricBlock| {
        out.push_str(&format!("{name:<11}{:>7}{:>8.2}", block.count, block.mean_iou));
        for x in PRECISION_LEVELS {
            out.push_str(&format!("{:>8.2}", block.precision[&x]));
        }
        out.push_str(&format!("{:>8.2}{:>8.2}\n", block.j_at_1, block.j_at_any));
    };
    row("overall", &report.overall);
    for (family, block) in &report.per_family {
        row(family.as_str(), block);
    }
    out
}
