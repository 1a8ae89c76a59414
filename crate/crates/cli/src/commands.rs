//! One function per subcommand. Summaries are returned as JSON values so the
//! binary and the tests share them.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use geonorm::embeddings::{kmeans_clusters, project_2d, purity, train, KMeansConfig};
use geonorm::pipeline::{bench as run_bench, evaluate as run_evaluate};
use geonorm::sequence::{read_corpus, read_sequences, write_sequences, LexiconRecognizer};
use geonorm::{fixtures, synth, AdPath, Document, Engine, Gazetteer, NormalizeOptions, SequenceExtractor};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::settings::Settings;

/// Documents normalized per batch when streaming JSONL.
const BATCH_LINES: usize = 4096;

#[derive(Args, Clone, Debug, Default)]
pub struct BuildGazetteerArgs {
    /// Gazetteer JSONL to validate; defaults to --gazetteer.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write the validated records, NFC-normalized and sorted by code.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn build_gazetteer(settings: &Settings, args: &BuildGazetteerArgs) -> Result<Value> {
    let g = match &args.input {
        Some(p) => Gazetteer::load(p).with_context(|| format!("loading gazetteer {}", p.display()))?,
        None => settings.gazetteer()?,
    };
    let mut per_level = [0usize; 3];
    let mut aliases = 0;
    for (_, r) in g.records() {
        per_level[r.level as usize - 1] += 1;
        aliases += r.aliases.len();
    }
    let mut surfaces = 0;
    let mut ambiguous = 0;
    let mut max_ambiguity = 0;
    for (_, ids) in g.surfaces() {
        surfaces += 1;
        ambiguous += usize::from(ids.len() > 1);
        max_ambiguity = max_ambiguity.max(ids.len());
    }
    if let Some(out) = &args.output {
        let mut w = BufWriter::new(File::create(out).with_context(|| out.display().to_string())?);
        for (_, r) in g.records() {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(json!({
        "records": g.len(),
        "per_level": per_level,
        "roots": g.roots().len(),
        "aliases": aliases,
        "surfaces": surfaces,
        "ambiguous_surfaces": ambiguous,
        "max_ambiguity": max_ambiguity,
    }))
}

#[derive(Args, Clone, Debug)]
pub struct ExtractArgs {
    /// Corpus JSONL with `doc_id` and `text` per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Sequences JSONL to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Location words, one per line; the bundled list when omitted.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

pub fn extract_sequences(settings: &Settings, args: &ExtractArgs) -> Result<Value> {
    let g = settings.gazetteer()?;
    let docs = read_corpus(&args.corpus)?;
    let words: Vec<String> = match &args.lexicon {
        Some(p) => fs::read_to_string(p)
            .with_context(|| p.display().to_string())?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
        None => fixtures::locations().into_iter().map(str::to_owned).collect(),
    };
    let recognizer = LexiconRecognizer::new(&g, &words);
    let seqs = SequenceExtractor::new(&g, Box::new(recognizer), settings.config.extract.clone())?
        .with_splitter(settings.config.text.splitter())
        .extract_corpus(&docs);
    write_sequences(&args.output, &seqs)?;
    Ok(json!({
        "documents": docs.len(),
        "sequences": seqs.len(),
        "items": seqs.iter().map(|s| s.len()).sum::<usize>(),
    }))
}

#[derive(Args, Clone, Debug)]
pub struct SequencesArgs {
    /// Sequences JSONL written by extract-sequences.
    #[arg(long)]
    pub sequences: PathBuf,
    /// Artifact to write; defaults to the configured artifact path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn train_embeddings(settings: &Settings, args: &SequencesArgs) -> Result<Value> {
    let out = Settings::output_path(
        args.output.as_deref(),
        settings.config.artifacts.embeddings.as_ref(),
        "embeddings",
    )?;
    let seqs = read_sequences(&args.sequences)?;
    let (table, report) = train(&seqs, &settings.config.train)?;
    table.save(&out)?;
    Ok(json!({
        "output": out,
        "vocab": table.len(),
        "dim": table.dim(),
        "pairs_per_epoch": report.pairs_per_epoch,
        "objective": report.objective,
    }))
}

pub fn build_roi(settings: &Settings, args: &SequencesArgs) -> Result<Value> {
    let out = Settings::output_path(
        args.output.as_deref(),
        settings.config.artifacts.roi_store.as_ref(),
        "the ROI store",
    )?;
    let g = settings.gazetteer()?;
    let seqs = read_sequences(&args.sequences)?;
    let store = geonorm::roi::build_roi(&seqs, &g, &settings.config.roi)?;
    store.save(&out)?;
    Ok(json!({ "output": out, "meta": store.meta }))
}

#[derive(Args, Clone, Debug, Default)]
pub struct NormalizeArgs {
    /// Text to normalize. Use --input for batches.
    pub text: Option<String>,
    /// Corpus JSONL (`-` for stdin); one result per line, in input order.
    #[arg(long, conflicts_with = "text")]
    pub input: Option<PathBuf>,
    /// Where to write batch results; stdout when omitted.
    #[arg(long, requires = "input")]
    pub output: Option<PathBuf>,
    /// Include per-stage timings.
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub no_inference: bool,
    #[arg(long)]
    pub no_roi: bool,
}

impl NormalizeArgs {
    fn options(&self, base: &NormalizeOptions) -> NormalizeOptions {
        NormalizeOptions {
            use_inference: base.use_inference && !self.no_inference,
            use_roi: base.use_roi && !self.no_roi,
            ..base.clone()
        }
    }
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin().lock()));
    }
    let f = File::open(path).with_context(|| path.display().to_string())?;
    Ok(Box::new(BufReader::new(f)))
}

/// Streams `input` through the engine in fixed-size batches. Returns the
/// number of documents written.
pub fn normalize_stream(
    engine: &Engine,
    input: impl BufRead,
    mut out: impl Write,
    workers: usize,
    timings: bool,
) -> Result<usize> {
    let mut batch: Vec<Document> = Vec::with_capacity(BATCH_LINES);
    let mut written = 0;
    let mut flush = |batch: &mut Vec<Document>, out: &mut dyn Write| -> Result<()> {
        for r in engine.normalize_batch(batch, workers) {
            let r = if timings { r } else { r.without_timings() };
            serde_json::to_writer(&mut *out, &r)?;
            out.write_all(b"\n")?;
        }
        written += batch.len();
        batch.clear();
        Ok(())
    };
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).with_context(|| format!("input line {}", i + 1))?;
        batch.push(doc);
        if batch.len() == BATCH_LINES {
            flush(&mut batch, &mut out)?;
        }
    }
    flush(&mut batch, &mut out)?;
    out.flush()?;
    Ok(written)
}

pub fn normalize(settings: &Settings, args: &NormalizeArgs, stdout: &mut dyn Write) -> Result<()> {
    let engine = settings.engine_with(args.options(&settings.config.normalize))?;
    match (&args.text, &args.input) {
        (Some(text), None) => {
            let r = engine.normalize(text);
            let r = if args.timings { r } else { r.without_timings() };
            serde_json::to_writer_pretty(&mut *stdout, &r)?;
            writeln!(stdout)?;
        }
        (None, Some(input)) => {
            let reader = open_input(input)?;
            let n = match &args.output {
                Some(p) => {
                    let f = File::create(p).with_context(|| p.display().to_string())?;
                    normalize_stream(&engine, reader, BufWriter::new(f), settings.workers(), args.timings)?
                }
                None => normalize_stream(&engine, reader, &mut *stdout, settings.workers(), args.timings)?,
            };
            log::info!("normalized {n} documents");
        }
        _ => bail!("give either TEXT or --input"),
    }
    Ok(())
}

#[derive(Args, Clone, Debug)]
pub struct EvaluateArgs {
    /// Gold JSONL: `{"doc_id": str, "path": [l1, l2, l3]}` with nulls for
    /// missing levels.
    #[arg(long)]
    pub gold: PathBuf,
    /// Normalize output JSONL to score.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    pub predictions: Option<PathBuf>,
    /// Corpus JSONL to normalize and score.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Include the per-document records.
    #[arg(long)]
    pub details: bool,
}

#[derive(Deserialize)]
struct GoldRow {
    doc_id: String,
    path: [Option<String>; 3],
}

#[derive(Deserialize)]
struct PredictionRow {
    doc_id: String,
    #[serde(rename = "final")]
    final_path: AdPath,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

pub fn evaluate(settings: &Settings, args: &EvaluateArgs) -> Result<Value> {
    let gold: Vec<(String, AdPath)> = read_rows::<GoldRow>(&args.gold)?
        .into_iter()
        .map(|r| (r.doc_id, AdPath::from_names(r.path.each_ref().map(Option::as_deref))))
        .collect();
    let predictions: Vec<(String, AdPath)> = match (&args.predictions, &args.corpus) {
        (Some(p), _) => read_rows::<PredictionRow>(p)?
            .into_iter()
            .map(|r| (r.doc_id, r.final_path))
            .collect(),
        (None, Some(c)) => {
            let docs = read_corpus(c)?;
            let engine = settings.engine()?;
            docs.iter()
                .zip(engine.normalize_batch(&docs, settings.workers()))
                .map(|(d, r)| (d.doc_id.clone(), r.final_path))
                .collect()
        }
        (None, None) => bail!("give --predictions or --corpus"),
    };
    let mut report = run_evaluate(&predictions, &gold)?;
    if !args.details {
        report.records.clear();
    }
    Ok(serde_json::to_value(report)?)
}

#[derive(Args, Clone, Debug)]
pub struct BenchArgs {
    /// Corpus JSONL; a synthetic news corpus of --bytes when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Size of the synthetic corpus.
    #[arg(long, default_value_t = 4 << 20)]
    pub bytes: usize,
    /// Worker counts for the parallel runs; defaults to --workers.
    #[arg(long, value_delimiter = ',')]
    pub parallel: Vec<usize>,
    /// Gazetteer and Confidence only.
    #[arg(long)]
    pub confidence_only: bool,
}

pub fn bench(settings: &Settings, args: &BenchArgs) -> Result<Value> {
    let docs = match &args.corpus {
        Some(p) => read_corpus(p)?,
        None => synth::news_corpus(&Gazetteer::bundled(), settings.config.run.seed, args.bytes),
    };
    ensure!(!docs.is_empty(), "bench corpus is empty");
    let engine = if args.confidence_only {
        Engine::confidence_only(settings.gazetteer()?)
    } else {
        settings.engine()?
    };
    let parallel = if args.parallel.is_empty() {
        vec![settings.workers()]
    } else {
        args.parallel.clone()
    };
    let report = run_bench(&engine, &docs, &parallel);
    let mut v = serde_json::to_value(&report)?;
    v["single_kb_per_sec"] = json!(report.single.bytes_per_sec / 1024.0);
    Ok(v)
}

#[derive(Args, Clone, Debug, Default)]
pub struct ClusterArgs {
    /// JSON file to write; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Number of clusters; defaults to the configured value, capped at the
    /// number of tokens.
    #[arg(long)]
    pub k: Option<usize>,
    /// Tokens to cluster, one per line; every vocabulary entry that names a
    /// division when omitted.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
}

/// k-means assignments and a 2-D projection of the embedding vectors, with
/// the province of every token that names a unique division.
pub fn emit_cluster_data(settings: &Settings, args: &ClusterArgs) -> Result<Value> {
    let g = settings.gazetteer()?;
    let table = settings.embeddings()?.context("emit-cluster-data needs --embeddings")?;
    let tokens: Vec<String> = match &args.tokens {
        Some(p) => fs::read_to_string(p)
            .with_context(|| p.display().to_string())?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
        None => table
            .vocab()
            .iter()
            .filter(|t| !g.lookup(t).is_empty())
            .cloned()
            .collect(),
    };
    let mut province: HashMap<String, String> = HashMap::new();
    for t in &tokens {
        if let [id] = g.lookup(t) {
            let chain = g.chain(*id)?;
            if let Some(root) = chain[0] {
                province.insert(t.clone(), g.record(root).name.clone());
            }
        }
    }
    let present = tokens.iter().filter(|t| table.contains(t)).count();
    ensure!(present > 0, "none of the tokens are in the vocabulary");
    let mut k = args.k.unwrap_or(settings.config.cluster.k);
    if k > present {
        log::warn!("k = {k} exceeds the {present} tokens present; using {present}");
        k = present;
    }
    let config = KMeansConfig {
        k,
        ..settings.config.cluster.clone()
    };
    let clustering = kmeans_clusters(&table, &tokens, &config)?;
    let names: Vec<&String> = clustering.assignments.keys().collect();
    let vectors: Vec<&[f64]> = names.iter().map(|t| table.vector(t).expect("clustered")).collect();
    let xy = project_2d(&vectors);
    let points: Vec<Value> = names
        .iter()
        .zip(xy)
        .map(|(t, (x, y))| {
            json!({
                "token": t,
                "cluster": clustering.assignments[*t],
                "province": province.get(*t),
                "x": x,
                "y": y,
            })
        })
        .collect();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clustering.assignments.values() {
        *sizes.entry(*c).or_default() += 1;
    }
    Ok(json!({
        "k": k,
        "seed": config.seed,
        "inertia": clustering.inertia,
        "iterations": clustering.iterations,
        "province_purity": purity(&clustering.assignments, &province),
        "cluster_sizes": sizes.values().collect::<Vec<_>>(),
        "points": points,
    }))
}
