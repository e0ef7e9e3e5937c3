use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use issue_radar::attend::{
    tag_transcript, AttentionHead, EncoderProvider, EncoderSpec, HashingEncoder,
};
use issue_radar::corpus::{load_embeddings, load_transcripts, save_embeddings, EmbeddingFormat};
use issue_radar::synth::evaluate;
use issue_radar::whiten::{fit, transform};
use issue_radar::{
    detect, generate, simgraph, Detection, EmbeddingSet, GroundTruth, RadarReport, RunConfig,
    SynthSpec, WhitenModel, Window,
};

use crate::args::{
    DetectArgs, EvalArgs, GraphArgs, InputArgs, PipelineArgs, RunArgs, SynthArgs, TagArgs,
    WhitenArgs,
};

/// A problem with the invocation itself rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn base_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let raw = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn validated(cfg: RunConfig) -> Result<RunConfig> {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

impl RunArgs {
    /// Config file (or defaults) with explicit flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = base_config(self.config.as_deref())?;
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.gamma_fraction {
            cfg.gamma_fraction = v;
        }
        if let Some(v) = self.radius {
            cfg.cluster_radius = v;
        }
        if let Some(v) = self.separation {
            cfg.cluster_separation = v;
        }
        if let Some(v) = self.top_k {
            cfg.top_k = v;
        }
        if let Some(v) = self.max_depth {
            cfg.max_bfs_depth = Some(v);
        }
        validated(cfg)
    }
}

fn load(path: &Path) -> Result<EmbeddingSet> {
    load_embeddings(path).with_context(|| format!("loading {}", path.display()))
}

fn load_input(input: &InputArgs) -> Result<EmbeddingSet> {
    match (&input.input, &input.previous, &input.current) {
        (Some(path), _, _) => load(path),
        (None, Some(prev), Some(cur)) => {
            Ok(EmbeddingSet::from_windows(load(prev)?, load(cur)?).context("joining windows")?)
        }
        _ => Err(usage("give --input, or both --previous and --current")),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| issue_radar::Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(())
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct TaggedRecord<'a> {
    id: &'a str,
    tagged_index: usize,
    window: Window,
    vector: &'a [f64],
    text: &'a str,
}

pub fn tag(args: &TagArgs) -> Result<()> {
    let mut cfg = base_config(args.config.as_deref())?;
    if let Some(n) = args.tag_window {
        cfg.tag_window_n = n;
    }
    let transcripts = load_transcripts(&args.input)
        .with_context(|| format!("loading {}", args.input.display()))?;
    let encoder: Box<dyn EncoderProvider> = match &args.encoder {
        Some(path) => EncoderSpec::load(path)?.build()?,
        None => Box::new(HashingEncoder::new(args.dim, args.seed)),
    };
    let head = match &args.head {
        Some(path) => AttentionHead::load(path)?,
        None => AttentionHead::random(encoder.dim(), args.seed),
    };
    if head.d_k() != encoder.dim() {
        return Err(issue_radar::Error::ShapeMismatch(format!(
            "attention key has {} components but the encoder produces {}",
            head.d_k(),
            encoder.dim()
        ))
        .into());
    }

    let mut out = String::new();
    for t in &transcripts {
        let tagged = tag_transcript(t, encoder.as_ref(), &head, &cfg)
            .with_context(|| format!("tagging {}", t.id))?;
        let record = TaggedRecord {
            id: &t.id,
            tagged_index: tagged.index,
            window: t.window,
            vector: &tagged.vector,
            text: &t.sentences[tagged.index].text,
        };
        out.push_str(&serde_json::to_string(&record).expect("finite vector"));
        out.push('\n');
    }
    emit(args.out.as_deref(), &out)?;
    eprintln!(
        "tagged {} transcripts (d = {})",
        transcripts.len(),
        encoder.dim()
    );
    Ok(())
}

fn save(set: &EmbeddingSet, path: &Path) -> Result<()> {
    save_embeddings(set, path, EmbeddingFormat::from_path(path))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn whiten(args: &WhitenArgs) -> Result<()> {
    let set = load(&args.input)?;
    let model = match &args.apply {
        Some(path) => WhitenModel::load(path)?,
        None => fit(&set, args.eps_rel)?,
    };
    let z = transform(&model, &set)?;
    save(&z, &args.out)?;
    if let Some(path) = &args.model {
        model.save(path)?;
    }
    eprintln!(
        "whitened {} x {} ({} eigenvalues floored)",
        z.len(),
        z.dim(),
        model.floored()
    );
    Ok(())
}

#[derive(Serialize)]
struct GraphSummary {
    n: usize,
    alpha: f64,
    edges: usize,
    isolated: usize,
    mean_degree: f64,
    degree_histogram: BTreeMap<usize, usize>,
}

pub fn graph(args: &GraphArgs) -> Result<()> {
    let mut cfg = base_config(args.config.as_deref())?;
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    let cfg = validated(cfg)?;
    let set = load(&args.input)?;
    let g = simgraph::build(&set, cfg.alpha)?;
    let histogram = g.degree_histogram();
    let summary = GraphSummary {
        n: g.n(),
        alpha: cfg.alpha,
        edges: g.edge_count(),
        isolated: histogram.get(&0).copied().unwrap_or(0),
        mean_degree: 2.0 * g.edge_count() as f64 / g.n() as f64,
        degree_histogram: histogram,
    };
    if let Some(path) = &args.edges_out {
        write_file(path, serde_json::to_string(&g.dump())?.as_bytes())?;
    }
    emit(args.out.as_deref(), &json_line(&summary))
}

fn finish_detection(
    det: &Detection,
    out: Option<&Path>,
    centrality_csv: Option<&Path>,
    scores_csv: Option<&Path>,
) -> Result<()> {
    if let Some(path) = centrality_csv {
        write_file(path, det.centrality.to_csv(&det.graph)?.as_bytes())?;
    }
    if let Some(path) = scores_csv {
        write_file(path, det.scores.to_csv(&det.graph)?.as_bytes())?;
    }
    let mut report = det.report.to_json_pretty();
    report.push('\n');
    emit(out, &report)?;
    eprintln!(
        "{} previous + {} current nodes, {} edges, gamma {:.3e}; {} trending, {} emerging clusters",
        det.report.n_previous,
        det.report.n_current,
        det.graph.edge_count(),
        det.gamma,
        det.report.trending.len(),
        det.report.emerging.len()
    );
    Ok(())
}

pub fn detect_cmd(args: &DetectArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let set = load_input(&args.input)?;
    let det = detect(&set, &cfg)?;
    finish_detection(
        &det,
        args.out.as_deref(),
        args.centrality_csv.as_deref(),
        args.scores_csv.as_deref(),
    )
}

pub fn pipeline(args: &PipelineArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let set = load_input(&args.input)?;
    let model = fit(&set, args.eps_rel)?;
    if let Some(path) = &args.model {
        model.save(path)?;
    }
    let z = transform(&model, &set)?;
    let det = detect(&z, &cfg)?;
    finish_detection(
        &det,
        args.out.as_deref(),
        args.centrality_csv.as_deref(),
        args.scores_csv.as_deref(),
    )
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let raw = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read spec {}: {e}", path.display())))?;
            serde_json::from_str::<SynthSpec>(&raw)
                .map_err(|e| usage(format!("bad spec {}: {e}", path.display())))?
        }
        None => SynthSpec::standard(0),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.distort |= args.distort;
    let (set, truth) = generate(&spec)?;
    save(&set, &args.out)?;
    truth.save(&args.truth)?;
    eprintln!(
        "generated {} points in d = {} ({} clusters, seed {})",
        set.len(),
        set.dim(),
        spec.n_clusters(),
        spec.seed
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if args.top_k == 0 {
        return Err(usage("--top-k must be positive"));
    }
    let raw = fs::read_to_string(&args.report).map_err(|e| issue_radar::Error::Io {
        path: args.report.clone(),
        source: e,
    })?;
    let report = RadarReport::from_json(&raw)
        .with_context(|| format!("reading {}", args.report.display()))?;
    let truth = GroundTruth::load(&args.truth)?;
    let metrics = evaluate(&report, &truth, args.top_k)?;
    emit(args.out.as_deref(), &json_line(&metrics))
}
