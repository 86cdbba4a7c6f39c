//! Command-line entry point: convert EMBER-style JSONL to OWL ABox files,
//! export the schema, generate fractional datasets and folds, evaluate
//! class expressions, compute threshold histograms and validate action
//! mappings.
//!
//! Exit codes: 0 success, 1 input/processing error, 2 usage error. Every
//! run prints JSON reports to standard error; results go to the requested
//! output files (or standard output).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use peo_core::actions::ApiActionMap;
use peo_core::features::DerivationConfig;
use peo_core::fraction::{self, FractionFiles, FractionSpec};
use peo_core::ingest::{IngestReport, RawSample, SampleStream};
use peo_core::kb::{self, BuildReport, KnowledgeBase, PEFileIndividual, SampleNotes};
use peo_core::query::{parse_expression, KbIndex, QueryResult};
use peo_core::rdf::emit::ExamplesDoc;
use peo_core::rdf::{emit_abox, emit_examples, load_abox, AboxOptions, Namespaces, RdfFormat};
use peo_core::report::{ingest_report_json, RunReport};
use peo_core::stats::{EntropyHistogram, ImportsHistogram};
use peo_core::vocab::Vocabulary;
use peo_core::DEFAULT_BASE_IRI;

#[derive(Parser)]
#[command(
    name = "peo",
    version,
    about = "PE malware ontology toolkit: EMBER-style JSONL records to OWL 2 knowledge graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a JSONL file into an OWL ABox plus an examples sidecar.
    Convert(ConvertArgs),
    /// Export the vocabulary (TBox) as Turtle.
    Tbox(TboxArgs),
    /// Generate balanced fractional datasets (three files per variant).
    Fractions(FractionsArgs),
    /// Split an examples file into stratified k folds.
    Folds(FoldsArgs),
    /// Evaluate a class expression against a converted knowledge base.
    Query(QueryArgs),
    /// Per-label histograms of section entropy or import counts.
    Stats(StatsArgs),
    /// Load an action mapping and validate it against the vocabulary.
    ValidateMap(ValidateMapArgs),
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Action mapping TSV (defaults to the bundled seed mapping).
    #[arg(long, value_name = "PATH")]
    action_map: Option<PathBuf>,
    /// LowImportsCount threshold: imports strictly below count as low.
    #[arg(long, value_name = "N", default_value_t = 10)]
    imports_threshold: u64,
    /// HighEntropy threshold: entropy strictly above counts as high.
    #[arg(long, value_name = "X", default_value_t = 7.0)]
    entropy_threshold: f64,
    /// File with one standard section name per line (replaces the default list).
    #[arg(long, value_name = "PATH")]
    standard_sections: Option<PathBuf>,
    /// Base IRI for emitted individuals.
    #[arg(long, value_name = "IRI", env = "PEO_BASE_IRI", default_value = DEFAULT_BASE_IRI)]
    base_iri: String,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Input JSONL file.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output ABox document; an `_examples.json` sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Output serialization.
    #[arg(long, value_enum, default_value_t = FormatArg::Turtle)]
    format: FormatArg,
    /// Omit links to derived-feature prototypes (data properties remain).
    #[arg(long)]
    ignore_derived: bool,
    /// Per-sample parallelism; output is identical for any value.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TboxArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output Turtle file.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct FractionsArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Input JSONL file (the labeled pool).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Sizes table as size:variants pairs. The default is the published
    /// table; most pools are smaller, so pass an explicit table.
    #[arg(
        long,
        value_name = "TABLE",
        value_parser = parse_sizes,
        default_value = "1000:10,10000:10,100000:10,800000:1"
    )]
    sizes: SizesTable,
    /// Seed for the pinned selection PRNG.
    #[arg(long, value_name = "SEED")]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct FoldsArgs {
    /// Examples JSON file ({"positive":[...],"negative":[...]}).
    #[arg(long, value_name = "PATH")]
    examples: PathBuf,
    /// Number of folds.
    #[arg(long, value_name = "K")]
    k: usize,
    /// Seed for the fold shuffle.
    #[arg(long, value_name = "SEED")]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Knowledge base document produced by `convert`.
    #[arg(long, value_name = "PATH")]
    kb: PathBuf,
    /// Class expression to evaluate.
    #[arg(long, value_name = "TEXT")]
    expr: String,
    /// Also score the expression against labeled examples.
    #[arg(long)]
    score: bool,
    /// Examples sidecar supplying labels (defaults to <kb>_examples.json).
    #[arg(long, value_name = "PATH")]
    examples: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Input JSONL file.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Which metric to histogram.
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Bin width: a real for entropy, an integer for imports.
    #[arg(long, value_name = "X")]
    bin_width: Option<f64>,
    /// Output CSV file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateMapArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Turtle,
    Ntriples,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Entropy,
    Imports,
}

#[derive(Clone)]
struct SizesTable(Vec<FractionSpec>);

fn parse_sizes(text: &str) -> Result<SizesTable, String> {
    let mut specs = Vec::new();
    for part in text.split(',') {
        let (size, variants) = part
            .split_once(':')
            .ok_or_else(|| format!("`{part}` is not size:variants"))?;
        let size: usize = size.trim().parse().map_err(|_| format!("bad size `{size}`"))?;
        let variants: u32 = variants
            .trim()
            .parse()
            .map_err(|_| format!("bad variant count `{variants}`"))?;
        if variants == 0 {
            return Err("variant count must be at least 1".into());
        }
        specs.push(FractionSpec { size, variants });
    }
    if specs.is_empty() {
        return Err("empty sizes table".into());
    }
    Ok(SizesTable(specs))
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(args) => run_convert(args),
        Command::Tbox(args) => run_tbox(args),
        Command::Fractions(args) => run_fractions(args),
        Command::Folds(args) => run_folds(args),
        Command::Query(args) => run_query(args),
        Command::Stats(args) => run_stats(args),
        Command::ValidateMap(args) => run_validate_map(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

struct Pipeline {
    cfg: DerivationConfig,
    vocab: Vocabulary,
    map: ApiActionMap,
    ns: Namespaces,
}

fn load_pipeline(args: &PipelineArgs) -> Result<Pipeline, String> {
    let mut cfg = DerivationConfig {
        imports_threshold: args.imports_threshold,
        entropy_threshold: args.entropy_threshold,
        ..DerivationConfig::default()
    };
    if cfg.imports_threshold == 0 {
        return Err("--imports-threshold must be positive".into());
    }
    if !(cfg.entropy_threshold > 0.0 && cfg.entropy_threshold < 8.0) {
        return Err("--entropy-threshold must lie in (0, 8)".into());
    }
    if let Some(path) = &args.standard_sections {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        cfg.standard_section_names = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
    }
    let vocab = Vocabulary::with_config(&cfg).map_err(|e| e.to_string())?;
    let map = match &args.action_map {
        Some(path) => ApiActionMap::load(path, &vocab).map_err(|e| e.to_string())?,
        None => ApiActionMap::builtin(&vocab),
    };
    let ns = Namespaces::new(&args.base_iri);
    Ok(Pipeline { cfg, vocab, map, ns })
}

/// Streams the input and builds individuals, optionally in parallel.
/// Results are assembled in input order, so output does not depend on the
/// job count.
fn ingest_individuals(
    input: &Path,
    cfg: &DerivationConfig,
    map: &ApiActionMap,
    jobs: usize,
) -> Result<(Vec<(PEFileIndividual, SampleNotes)>, IngestReport), String> {
    const CHUNK: usize = 4096;
    let mut stream =
        SampleStream::open(input).map_err(|e| e.to_string())?;
    let mut report = IngestReport::default();
    let mut individuals = Vec::new();
    let pool = if jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| e.to_string())?,
        )
    } else {
        None
    };

    loop {
        let mut chunk = Vec::with_capacity(CHUNK);
        while chunk.len() < CHUNK {
            match stream.next_raw_line() {
                Some(Ok(line)) => chunk.push(line),
                Some(Err(e)) => return Err(format!("read error: {e}")),
                None => break,
            }
        }
        if chunk.is_empty() {
            break;
        }
        let process = |(line_no, text): &(usize, String)| match peo_core::ingest::parse_sample(text)
        {
            Ok(sample) => Ok(kb::build_individual(&sample, cfg, map)),
            Err(kind) => Err((*line_no, kind)),
        };
        let results: Vec<_> = match &pool {
            Some(pool) => pool.install(|| chunk.par_iter().map(process).collect()),
            None => chunk.iter().map(process).collect(),
        };
        for result in results {
            match result {
                Ok(built) => {
                    report.ok += 1;
                    individuals.push(built);
                }
                Err((line, kind)) => {
                    report.skipped += 1;
                    log::warn!("line {line}: {kind}");
                }
            }
        }
    }
    Ok((individuals, report))
}

fn assemble(
    individuals: Vec<(PEFileIndividual, SampleNotes)>,
) -> (KnowledgeBase, BuildReport) {
    kb::assemble_kb(individuals)
}

fn examples_sidecar_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kb".to_string());
    out.with_file_name(format!("{stem}_examples.json"))
}

fn run_convert(args: ConvertArgs) -> Result<(), String> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let (individuals, ingest) =
        ingest_individuals(&args.input, &pipeline.cfg, &pipeline.map, args.jobs)?;
    let (kb, build) = assemble(individuals);

    let options = AboxOptions {
        include_derived: !args.ignore_derived,
        format: match args.format {
            FormatArg::Turtle => RdfFormat::Turtle,
            FormatArg::Ntriples => RdfFormat::NTriples,
        },
    };
    let doc = emit_abox(&kb, &pipeline.vocab, &pipeline.ns, &options)
        .map_err(|e| e.to_string())?;
    fs::write(&args.out, doc).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    let sidecar = examples_sidecar_path(&args.out);
    fs::write(&sidecar, emit_examples(&kb, &pipeline.ns))
        .map_err(|e| format!("cannot write {}: {e}", sidecar.display()))?;

    eprintln!("{}", ingest_report_json(ingest));
    eprintln!("{}", RunReport::from_parts(ingest, build).to_json());
    Ok(())
}

fn run_tbox(args: TboxArgs) -> Result<(), String> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let doc = pipeline
        .vocab
        .export_tbox(&pipeline.ns)
        .map_err(|e| e.to_string())?;
    fs::write(&args.out, doc).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    eprintln!(
        "{}",
        serde_json::json!({
            "classes": pipeline.vocab.class_count(),
            "object_properties": pipeline.vocab.object_properties().len(),
            "data_properties": pipeline.vocab.data_properties().len(),
            "action_leaves": pipeline.vocab.action_count(),
        })
    );
    eprintln!("{}", RunReport::default().to_json());
    Ok(())
}

fn run_fractions(args: FractionsArgs) -> Result<(), String> {
    let pipeline = load_pipeline(&args.pipeline)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;

    // Pass 1: collect the labeled pool (first occurrence per sha256).
    let mut stream = SampleStream::open(&args.input).map_err(|e| e.to_string())?;
    let mut pool: Vec<(String, i8)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut duplicates = 0u64;
    for (line, result) in &mut stream {
        match result {
            Ok(sample) => {
                if !seen.insert(sample.sha256.clone()) {
                    duplicates += 1;
                    continue;
                }
                if sample.label >= 0 {
                    pool.push((sample.sha256, sample.label));
                }
            }
            Err(e) => log::warn!("line {line}: {e}"),
        }
    }
    let ingest = stream.report();

    // Select all variants up front so pass 2 knows which lines to keep.
    let mut selections: Vec<(u32, usize, Vec<String>)> = Vec::new();
    let mut needed: BTreeSet<String> = BTreeSet::new();
    for spec in &args.sizes.0 {
        for variant in 1..=spec.variants {
            let ids = fraction::select_fraction(&pool, spec.size, variant, args.seed)
                .map_err(|e| e.to_string())?;
            needed.extend(ids.iter().cloned());
            selections.push((variant, spec.size, ids));
        }
    }

    // Pass 2: stash the original lines of selected samples, verbatim.
    let mut lines_by_sha: BTreeMap<String, String> = BTreeMap::new();
    let mut stream = SampleStream::open(&args.input).map_err(|e| e.to_string())?;
    while let Some(next) = stream.next_raw_line() {
        let (_, text) = next.map_err(|e| format!("read error: {e}"))?;
        if let Ok(sample) = peo_core::ingest::parse_sample(&text) {
            if needed.contains(&sample.sha256) {
                lines_by_sha.entry(sample.sha256).or_insert(text);
            }
        }
    }

    // Variants are independent; generate them in parallel when asked.
    let write_variant = |(variant, size, ids): &(u32, usize, Vec<String>)| -> Result<BuildReport, String> {
        let raw_lines: Vec<String> = ids
            .iter()
            .map(|sha| {
                lines_by_sha
                    .get(sha)
                    .cloned()
                    .ok_or_else(|| format!("selected sample {sha} disappeared from input"))
            })
            .collect::<Result<_, _>>()?;
        let samples: Vec<RawSample> = raw_lines
            .iter()
            .map(|line| peo_core::ingest::parse_sample(line).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let (kb, build) = kb::build_kb(samples.iter(), &pipeline.cfg, &pipeline.map);
        let abox = emit_abox(&kb, &pipeline.vocab, &pipeline.ns, &AboxOptions::default())
            .map_err(|e| e.to_string())?;
        let examples = emit_examples(&kb, &pipeline.ns);
        let files = FractionFiles::new(&args.out, *variant, *size);
        fraction::write_fraction(&files, &abox, &raw_lines, &examples)
            .map_err(|e| format!("cannot write dataset_{variant}_{size}: {e}"))?;
        Ok(build)
    };
    let builds_result: Result<Vec<BuildReport>, String> = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| selections.par_iter().map(write_variant).collect())
    } else {
        selections.iter().map(write_variant).collect()
    };
    let builds = builds_result?;
    let mut build_total = BuildReport::default();
    for build in builds {
        build_total.unmapped_imports += build.unmapped_imports;
        build_total.entry_point_unresolved += build.entry_point_unresolved;
    }
    build_total.duplicates = duplicates;

    eprintln!("{}", ingest_report_json(ingest));
    eprintln!("{}", RunReport::from_parts(ingest, build_total).to_json());
    Ok(())
}

fn run_folds(args: FoldsArgs) -> Result<(), String> {
    let text = fs::read_to_string(&args.examples)
        .map_err(|e| format!("cannot read {}: {e}", args.examples.display()))?;
    let doc: ExamplesDoc =
        serde_json::from_str(&text).map_err(|e| format!("bad examples file: {e}"))?;
    let mut labeled: Vec<(String, i8)> = Vec::new();
    labeled.extend(doc.positive.into_iter().map(|id| (id, 1)));
    labeled.extend(doc.negative.into_iter().map(|id| (id, 0)));
    let folds = fraction::kfold(&labeled, args.k, args.seed).map_err(|e| e.to_string())?;
    let mut output =
        serde_json::to_string_pretty(&serde_json::json!({ "folds": folds })).expect("folds json");
    output.push('\n');
    match &args.out {
        Some(path) => {
            fs::write(path, output).map_err(|e| format!("cannot write {}: {e}", path.display()))?
        }
        None => print!("{output}"),
    }
    eprintln!("{}", RunReport::default().to_json());
    Ok(())
}

fn run_query(args: QueryArgs) -> Result<(), String> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let text = fs::read_to_string(&args.kb)
        .map_err(|e| format!("cannot read {}: {e}", args.kb.display()))?;
    let (mut kb, namespace) = load_abox(&text, &pipeline.vocab).map_err(|e| e.to_string())?;
    let ns = Namespaces::new(&namespace);

    let examples_path = args
        .examples
        .clone()
        .unwrap_or_else(|| examples_sidecar_path(&args.kb));
    if args.score {
        let text = fs::read_to_string(&examples_path).map_err(|e| {
            format!(
                "--score needs labels; cannot read {}: {e}",
                examples_path.display()
            )
        })?;
        let doc: ExamplesDoc =
            serde_json::from_str(&text).map_err(|e| format!("bad examples file: {e}"))?;
        apply_labels(&mut kb, &doc, &ns);
    }

    let expr = parse_expression(&args.expr, &pipeline.vocab).map_err(|e| e.to_string())?;
    let index = KbIndex::new(&kb, &pipeline.vocab, &ns);
    let mut result = QueryResult {
        matches: index.evaluate_files(&expr).into_iter().collect(),
        score: None,
    };
    if args.score {
        result.score = Some(index.score(&expr).map_err(|e| e.to_string())?);
    }
    print!("{}", result.to_json());
    eprintln!("{}", RunReport::default().to_json());
    Ok(())
}

fn apply_labels(kb: &mut KnowledgeBase, doc: &ExamplesDoc, ns: &Namespaces) {
    let positives: BTreeSet<&str> = doc.positive.iter().map(String::as_str).collect();
    let negatives: BTreeSet<&str> = doc.negative.iter().map(String::as_str).collect();
    for file in &mut kb.files {
        let iri = file.iri(ns);
        if positives.contains(iri.as_str()) {
            file.label = 1;
        } else if negatives.contains(iri.as_str()) {
            file.label = 0;
        }
    }
}

fn run_stats(args: StatsArgs) -> Result<(), String> {
    let pipeline = load_pipeline(&args.pipeline)?;
    let mut stream = SampleStream::open(&args.input).map_err(|e| e.to_string())?;

    #[derive(serde::Serialize)]
    struct StatsReport {
        #[serde(flatten)]
        run: RunReport,
        metric: &'static str,
        threshold: f64,
        beyond_threshold_fraction: peo_core::stats::ThresholdReport,
    }

    let (csv, stats_report) = match args.metric {
        MetricArg::Entropy => {
            let width = args.bin_width.unwrap_or(0.1);
            if width <= 0.0 {
                return Err("--bin-width must be positive".into());
            }
            let mut hist = EntropyHistogram::new(width, pipeline.cfg.entropy_threshold);
            for (line, result) in &mut stream {
                match result {
                    Ok(sample) => hist.add_sample(&sample),
                    Err(e) => log::warn!("line {line}: {e}"),
                }
            }
            let mut buf = Vec::new();
            hist.write_csv(&mut buf).map_err(|e| e.to_string())?;
            (
                buf,
                (
                    "entropy",
                    pipeline.cfg.entropy_threshold,
                    hist.inner().threshold_report(),
                ),
            )
        }
        MetricArg::Imports => {
            let width = args.bin_width.unwrap_or(10.0);
            if width < 1.0 || width.fract() != 0.0 {
                return Err("--bin-width must be a positive integer for imports".into());
            }
            let mut hist = ImportsHistogram::new(width as u64, pipeline.cfg.imports_threshold);
            for (line, result) in &mut stream {
                match result {
                    Ok(sample) => hist.add_sample(&sample),
                    Err(e) => log::warn!("line {line}: {e}"),
                }
            }
            let mut buf = Vec::new();
            hist.write_csv(&mut buf).map_err(|e| e.to_string())?;
            (
                buf,
                (
                    "imports",
                    pipeline.cfg.imports_threshold as f64,
                    hist.inner().threshold_report(),
                ),
            )
        }
    };

    match &args.out {
        Some(path) => fs::write(path, csv)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => std::io::stdout()
            .write_all(&csv)
            .map_err(|e| e.to_string())?,
    }

    let ingest = stream.report();
    let report = StatsReport {
        run: RunReport::from_parts(ingest, BuildReport::default()),
        metric: stats_report.0,
        threshold: stats_report.1,
        beyond_threshold_fraction: stats_report.2,
    };
    eprintln!("{}", ingest_report_json(ingest));
    eprintln!("{}", serde_json::to_string(&report).expect("report json"));
    Ok(())
}

fn run_validate_map(args: ValidateMapArgs) -> Result<(), String> {
    let pipeline = load_pipeline(&args.pipeline)?;
    // load_pipeline already validated the map against the vocabulary; report
    // the outcome explicitly.
    println!(
        "{}",
        serde_json::json!({
            "entries": pipeline.map.len(),
            "valid": true,
        })
    );
    eprintln!("{}", RunReport::default().to_json());
    Ok(())
}
