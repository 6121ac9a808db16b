//! Command-line front end: one subcommand per pipeline stage, all driven by
//! a single JSON run config.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::community::{em_loop, mixture_input, select_k, write_model, IterationReport, Mode};
use crate::corpus::{filter_users, ingest_corpus, Bias, Corpus, SocialEdges};
use crate::embedding::{read_checkpoint, write_checkpoint};
use crate::error::{Error, Result};
use crate::graph::{build_graph_with, InfoGraph, RelationKind};
use crate::lexicon::{
    annotate_corpus, build_frame_lexicon, build_subframe_indicators, bundled_subframe_config, indicator_bias_correlation,
    parse_subframe_map, Frame, SubframeIndicatorLexicon, SubframeMap,
};
use crate::metrics::{cell, write_artifact, Artifact, DfMode, Plot, PlotPoint, Table};
use crate::par::Execution;
use crate::synth::{generate, WorldSpec, WORLD_FILES};

pub use config::{LexiconConfig, Paths, ReportConfig, RunConfig, UserFilter, SEED_ENV};
pub use report::write_report;

/// File names inside the output directory.
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const COMMUNITIES_FILE: &str = "communities.bin";
pub const ITERATIONS_FILE: &str = "iterations.jsonl";
pub const FAILURE_FILE: &str = "failure.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_DIR: &str = "report";
pub const LEXICON_DIR: &str = "lexicon";

#[derive(Debug, Parser)]
#[command(name = "framescope", version, about = "Subframe lexicons, information-graph embedding and community analysis of news framing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate inputs and summarize the corpus and social edges.
    Ingest(ConfigArgs),
    /// Induce frame and subframe indicator lexicons from the seed corpus.
    Lexicon {
        #[command(flatten)]
        run: ConfigArgs,
        /// Add per-frame left/right indicator rank correlations.
        #[arg(long)]
        validate: bool,
    },
    /// Build the information graph and dump its edges.
    Graph(ConfigArgs),
    /// Train embeddings in the configured mode and write checkpoints.
    Train(ConfigArgs),
    /// Refit communities on a trained embedding checkpoint.
    Communities(ConfigArgs),
    /// Emit the metrics bundle from the checkpoints.
    Report {
        #[command(flatten)]
        run: ConfigArgs,
        /// Add shared, unshared and overall macro-F1 against document bias labels.
        #[arg(long)]
        gold: bool,
    },
    /// Generate a synthetic world with planted truth and a run config for it.
    Synth {
        /// World spec JSON; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// No cross-community shares, no off-side follows, every article shared.
        #[arg(long)]
        noiseless: bool,
    },
}

/// Config file plus flag overrides.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub t_n: Option<f64>,
    #[arg(long)]
    pub t_p: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub pmi_df_mode: Option<DfMode>,
    /// Zero co-occurrence fractions below 0.2.
    #[arg(long)]
    pub paper_compat: bool,
    #[arg(long)]
    pub sequential: bool,
}

impl ConfigArgs {
    /// Loads the config, then applies the seed variable and the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply_env()?;
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(d) = self.dim {
            cfg.train.dim = d;
        }
        let c = &mut cfg.community;
        c.t_n = self.t_n.unwrap_or(c.t_n);
        c.t_p = self.t_p.unwrap_or(c.t_p);
        c.threshold = self.threshold.unwrap_or(c.threshold);
        c.k_min = self.k_min.unwrap_or(c.k_min);
        c.k_max = self.k_max.unwrap_or(c.k_max);
        if let Some(m) = self.pmi_df_mode {
            cfg.report.context_pmi.df_mode = m;
        }
        if self.paper_compat {
            cfg.report.cooccurrence_floor = Some(0.2);
        }
        cfg.sequential |= self.sequential;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(&a.resolve()?),
        Command::Lexicon { run, validate } => cmd_lexicon(&run.resolve()?, *validate),
        Command::Graph(a) => cmd_graph(&a.resolve()?),
        Command::Train(a) => cmd_train(&a.resolve()?),
        Command::Communities(a) => cmd_communities(&a.resolve()?),
        Command::Report { run, gold } => cmd_report(&run.resolve()?, *gold),
        Command::Synth {
            spec,
            out,
            seed,
            noiseless,
        } => cmd_synth(spec.as_deref(), out, *seed, *noiseless),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Records the command and the effective config; the output directory is
/// written as `.` so that manifests of identical runs match byte for byte.
fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        command: &'a str,
        version: &'a str,
        config: RunConfig,
    }
    create_dir(&cfg.output_dir)?;
    let config = RunConfig {
        output_dir: PathBuf::from("."),
        ..cfg.clone()
    };
    write_json(
        &cfg.out(MANIFEST_FILE),
        &Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
        },
    )
}

/// Corpus, filtered edges, subframe map and graph of one run.
pub struct Inputs {
    pub corpus: Corpus,
    pub edges: SocialEdges,
    pub map: SubframeMap,
    pub graph: InfoGraph,
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    ingest_corpus(cfg.require("corpus", &cfg.paths.corpus)?, cfg.topic)
}

pub fn load_edges(cfg: &RunConfig) -> Result<SocialEdges> {
    let p = &cfg.paths;
    let raw = SocialEdges::load(p.shares.as_deref(), p.follows.as_deref(), p.affiliations.as_deref())?;
    Ok(filter_users(&raw, cfg.filter.min_shares, cfg.filter.max_shares.unwrap_or(usize::MAX)))
}

/// The configured map, else the topic's bundled one, else an empty map.
pub fn load_map(cfg: &RunConfig, lex: Option<&SubframeIndicatorLexicon>) -> Result<SubframeMap> {
    if let Some(p) = &cfg.paths.subframe_map {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        return parse_subframe_map(&text, lex);
    }
    match bundled_subframe_config(cfg.topic) {
        Some(json) => parse_subframe_map(json, lex),
        None => Ok(SubframeMap::default()),
    }
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let corpus = load_corpus(cfg)?;
    let edges = load_edges(cfg)?;
    let map = load_map(cfg, None)?;
    let graph = build_graph_with(&corpus, &edges, &map, cfg.execution())?;
    Ok(Inputs { corpus, edges, map, graph })
}

fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    #[derive(Serialize)]
    struct Summary {
        documents: usize,
        left: usize,
        right: usize,
        unlabelled: usize,
        dated: usize,
        paragraphs: usize,
        users_before_filter: usize,
        users: usize,
        shares: usize,
        follows: usize,
        influencers: usize,
    }
    let corpus = load_corpus(cfg)?;
    let p = &cfg.paths;
    let raw = SocialEdges::load(p.shares.as_deref(), p.follows.as_deref(), p.affiliations.as_deref())?;
    raw.validate(&corpus)?;
    let edges = load_edges(cfg)?;
    let docs = corpus.documents();
    let summary = Summary {
        documents: docs.len(),
        left: docs.iter().filter(|d| d.bias == Some(Bias::Left)).count(),
        right: docs.iter().filter(|d| d.bias == Some(Bias::Right)).count(),
        unlabelled: docs.iter().filter(|d| d.bias.is_none()).count(),
        dated: docs.iter().filter(|d| d.date.is_some()).count(),
        paragraphs: corpus.all_paragraphs().count(),
        users_before_filter: raw.users().len(),
        users: edges.users().len(),
        shares: edges.shares.len(),
        follows: edges.follows.len(),
        influencers: edges.affiliations.len(),
    };
    write_manifest(cfg, "ingest")?;
    write_json(&cfg.out("ingest.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_lexicon(cfg: &RunConfig, validate: bool) -> Result<()> {
    let seed_path = cfg.require("seed_corpus", &cfg.paths.seed_corpus)?;
    let seed = ingest_corpus(seed_path, cfg.topic)?;
    if seed.is_empty() {
        return Err(Error::Insufficient(format!(
            "{} has no documents on topic {}",
            seed_path.display(),
            cfg.topic
        )));
    }
    let mut frames = BTreeSet::new();
    for d in seed.documents() {
        if let Some(f) = &d.frame {
            frames.insert(f.parse::<Frame>()?);
        }
    }
    let frames: Vec<Frame> = frames.into_iter().collect();
    let frame_lex = build_frame_lexicon(&seed, &frames, &cfg.lexicon.frame)?;
    let target = match &cfg.paths.corpus {
        Some(p) => ingest_corpus(p, cfg.topic)?,
        None => seed.clone(),
    };
    let annotated = annotate_corpus(&target, &frame_lex, cfg.report.top_n);
    let indicators = build_subframe_indicators(&annotated, &cfg.lexicon.subframe);
    let dir = cfg.out(LEXICON_DIR);
    create_dir(&dir)?;
    write_manifest(cfg, "lexicon")?;
    write_json(&dir.join("frame_lexicon.json"), &frame_lex)?;
    write_json(&dir.join("subframe_indicators.json"), &indicators)?;

    let map = load_map(cfg, Some(&indicators))?;
    let mut coverage = Table::new(["subframe", "frame", "seeds", "seed_only"]);
    let mut plot = Plot::new("subframe", "seed_only_fraction");
    for s in &map.subframes {
        let only = s.indicators.iter().filter(|i| i.seed_only).count();
        coverage.push(vec![s.name.clone(), s.frame.name().into(), s.indicators.len().to_string(), only.to_string()]);
        let frac = if s.indicators.is_empty() { 0.0 } else { only as f64 / s.indicators.len() as f64 };
        plot.series.push(PlotPoint::new(s.name.clone(), frac, s.frame.name()));
    }
    write_artifact(
        &dir,
        &Artifact {
            name: "subframe_coverage".into(),
            table: coverage,
            plot,
        },
    )?;

    if validate {
        let frame_corr = indicator_bias_correlation(&target, &frame_lex);
        let sub_corr = indicator_bias_correlation(&target, &indicators);
        let mut table = Table::new(["frame", "frame_indicators", "subframe_indicators"]);
        let mut plot = Plot::new("frame", "rank_correlation");
        for f in Frame::ALL {
            let (a, b) = (frame_corr.get(&f).copied(), sub_corr.get(&f).copied());
            if a.is_none() && b.is_none() {
                continue;
            }
            table.push(vec![f.name().into(), cell(a), cell(b)]);
            for (series, v) in [("frame_indicators", a), ("subframe_indicators", b)] {
                if let Some(v) = v {
                    plot.series.push(PlotPoint::new(f.name(), v, series));
                }
            }
        }
        write_artifact(
            &dir,
            &Artifact {
                name: "validation".into(),
                table,
                plot,
            },
        )?;
    }
    println!(
        "frame lexicon: {} frames; subframe indicators: {}; written to {}",
        frame_lex.frames.len(),
        indicators.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_graph(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let g = &inputs.graph;
    create_dir(&cfg.output_dir)?;
    write_manifest(cfg, "graph")?;
    g.write_jsonl(&cfg.out("graph.jsonl"))?;
    let mut summary = BTreeMap::new();
    summary.insert("articles".to_string(), g.articles.len());
    summary.insert("users".to_string(), g.users.len());
    summary.insert("subframe_expressions".to_string(), g.subframes.len());
    summary.insert("influencers".to_string(), g.influencers.len());
    for rel in RelationKind::BASE {
        summary.insert(format!("{}_edges", rel.name()), g.edges(rel).len());
    }
    write_json(&cfg.out("graph_summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn remove_if_present(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path, e)),
        _ => Ok(()),
    }
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    create_dir(&cfg.output_dir)?;
    write_manifest(cfg, "train")?;
    remove_if_present(&cfg.out(FAILURE_FILE))?;
    let iter_path = cfg.out(ITERATIONS_FILE);
    let file = File::create(&iter_path).map_err(|e| Error::io(&iter_path, e))?;
    let mut lines = BufWriter::new(file);
    let mut write_err = None;
    let mut observe = |line: &IterationReport| {
        let res = serde_json::to_string(line)
            .map_err(Error::from)
            .and_then(|s| writeln!(lines, "{s}").and_then(|_| lines.flush()).map_err(|e| Error::io(&iter_path, e)));
        if let Err(e) = res {
            write_err.get_or_insert(e);
        }
    };
    let outcome = em_loop(&inputs.graph, &inputs.corpus, cfg.mode, &cfg.train, &cfg.community, cfg.execution(), &mut observe);
    if let Some(e) = write_err {
        return Err(e);
    }
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            if matches!(e, Error::NonFinite(_)) {
                // Completed iteration lines stay in the report next to this dump.
                write_json(
                    &cfg.out(FAILURE_FILE),
                    &serde_json::json!({ "mode": cfg.mode, "seed": cfg.train.seed, "error": e.to_string() }),
                )?;
            }
            return Err(e);
        }
    };
    write_checkpoint(&outcome.store, &cfg.out(EMBEDDINGS_FILE), &cfg.train)?;
    let model_path = cfg.out(COMMUNITIES_FILE);
    match &outcome.model {
        Some(model) => write_model(model, outcome.selection.as_ref(), &model_path)?,
        None => {
            remove_if_present(&model_path)?;
            remove_if_present(&model_path.with_extension("json"))?;
        }
    }
    println!(
        "{}: {} iteration(s), K = {}; checkpoints in {}",
        cfg.mode,
        outcome.report.len(),
        outcome.model.as_ref().map_or_else(|| "-".to_string(), |m| m.k().to_string()),
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_communities(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    let path = cfg.out(EMBEDDINGS_FILE);
    if !path.exists() {
        return Err(Error::Invalid(format!("no embedding checkpoint at {}; run `train` first", path.display())));
    }
    let mut store = read_checkpoint(&path, &corpus)?;
    let data = mixture_input(&store, cfg.community.normalize_users);
    let c = &cfg.community;
    let (selection, model) = select_k(&data, c.k_min..=c.k_max, c.t_n, &c.gmm, cfg.train.seed, cfg.execution())?;
    store.set_communities(&model.means);
    write_manifest(cfg, "communities")?;
    write_checkpoint(&store, &path, &cfg.train)?;
    write_model(&model, Some(&selection), &cfg.out(COMMUNITIES_FILE))?;
    if selection.fallback {
        warn!("no BIC knee above t_n; kept the lowest-BIC K");
    }
    println!("K = {} (BIC {:.3})", model.k(), model.bic());
    Ok(())
}

fn cmd_report(cfg: &RunConfig, gold: bool) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let emb = cfg.out(EMBEDDINGS_FILE);
    if !emb.exists() {
        return Err(Error::Invalid(format!("no embedding checkpoint at {}; run `train` first", emb.display())));
    }
    write_manifest(cfg, "report")?;
    let files = write_report(cfg, &inputs, gold)?;
    info!("report: {} files", files.len());
    println!("report written to {}", cfg.out(REPORT_DIR).display());
    Ok(())
}

fn cmd_synth(spec_path: Option<&Path>, out: &Path, seed: Option<u64>, noiseless: bool) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<WorldSpec>(&text).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => WorldSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if noiseless {
        spec = spec.noiseless();
    }
    let world = generate(&spec)?;
    world.write(out)?;
    write_json(&out.join("world.json"), &spec)?;
    let f = &WORLD_FILES;
    let cfg = RunConfig {
        paths: Paths {
            corpus: Some(f.corpus.into()),
            shares: Some(f.shares.into()),
            follows: Some(f.follows.into()),
            affiliations: Some(f.affiliations.into()),
            subframe_map: Some(f.subframes.into()),
            external_scores: Some(f.external.into()),
            truth: Some(f.truth.into()),
            ..Paths::default()
        },
        filter: UserFilter {
            min_shares: 0,
            max_shares: None,
        },
        ..RunConfig::default()
    };
    write_json(&out.join("run.json"), &cfg)?;
    println!(
        "world with {} articles, {} users and {} influencers written to {}; run config: {}",
        world.corpus.len(),
        world.truth.user_community.len(),
        world.edges.affiliations.len(),
        out.display(),
        out.join("run.json").display()
    );
    Ok(())
}
