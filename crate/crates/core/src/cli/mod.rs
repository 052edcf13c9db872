//! Command-line interface.
//!
//! Every subcommand reads the optional `--config` file first and then
//! applies its own flags on top. Artifacts go to files; progress goes to
//! standard error.

pub mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{AugmentMode, PipelineConfig};
use crate::corpus_io::ScoreScale;
use crate::error::{Error, Result};
use crate::text::LangPair;
use stages::{AugmentOutputs, CorpusFiles, MatchOutputs, Status};

#[derive(Debug, Parser)]
#[command(name = "lexmatcher", version, about = "Dictionary-pivoted parallel corpus curation")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deduplicate and filter a parallel corpus.
    Filter(FilterArgs),
    /// Retrieve the sense-balanced subset.
    Match(MatchArgs),
    /// List uncovered polysemous senses from a coverage report.
    Gaps(GapsArgs),
    /// Render prompts for uncovered senses and collect generated pairs.
    Augment(AugmentArgs),
    /// Write the instruction-tuning dataset.
    BuildSft(BuildSftArgs),
    /// Subset-size table and word-frequency profiles.
    Stats(StatsArgs),
    /// Run every stage in order, skipping those that are up to date.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args, Default)]
pub struct CorpusArgs {
    /// Source-side sentences, one per line.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Target-side sentences, aligned with `--src`.
    #[arg(long)]
    pub tgt: Option<PathBuf>,
    /// Language pair such as `en-zh`.
    #[arg(long)]
    pub langs: Option<LangPair>,
    /// Quality scores, one per line (blank for none).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Scale of `--scores`: `unit` or `percent`.
    #[arg(long, value_parser = parse_scale)]
    pub score_scale: Option<ScoreScale>,
}

#[derive(Debug, Args, Default)]
pub struct LexiconArgs {
    /// Dictionary TSV: source, target, POS, sense id, definition.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Aligned entity titles TSV: source, target.
    #[arg(long)]
    pub entities: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output files are `<prefix>.src`, `<prefix>.tgt`, `<prefix>.report.json`.
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
    /// Re-run even if the manifest is current.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// Per-sense context budget.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<i64>,
    /// Traverse in file order instead of by quality score.
    #[arg(long)]
    pub no_rank: bool,
    /// Directory for this stage's outputs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Re-run even if the manifest is current.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GapsArgs {
    /// `coverage.json` written by `match`.
    #[arg(long)]
    pub coverage: Option<PathBuf>,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// Language pair such as `en-zh`.
    #[arg(long)]
    pub langs: Option<LangPair>,
    /// Output JSONL of uncovered senses.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run even if the manifest is current.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// `gaps.jsonl` written by `gaps`.
    #[arg(long)]
    pub gaps: Option<PathBuf>,
    /// Language pair such as `en-zh`.
    #[arg(long)]
    pub langs: Option<LangPair>,
    /// Prompt template file replacing the built-in one.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Responses to ingest in offline mode.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// Call the configured chat endpoint instead of working offline.
    #[arg(long)]
    pub online: bool,
    /// Online mode: re-request only the prompts whose previous result was invalid.
    #[arg(long)]
    pub retry_invalid: bool,
    /// Directory for this stage's outputs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Re-run even if the manifest is current.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BuildSftArgs {
    /// Directory holding `subset.src`, `subset.tgt` and `matches.jsonl`.
    #[arg(long)]
    pub subset_dir: Option<PathBuf>,
    /// `augmented.jsonl` written by `augment`.
    #[arg(long)]
    pub augmented: Option<PathBuf>,
    /// Language pair such as `en-zh`.
    #[arg(long)]
    pub langs: Option<LangPair>,
    /// Output JSONL dataset.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run even if the manifest is current.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
    /// Directory holding `subset.src`.
    #[arg(long)]
    pub subset_dir: Option<PathBuf>,
    /// Comma-separated K values, ascending.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<i64>>,
    /// Directory for this stage's outputs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Re-run even if the manifest is current.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Directory for this stage's outputs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Re-run every stage even if its manifest is current.
    #[arg(long)]
    pub force: bool,
}

fn parse_scale(s: &str) -> std::result::Result<ScoreScale, String> {
    match s {
        "unit" => Ok(ScoreScale::Unit),
        "percent" => Ok(ScoreScale::Percent),
        _ => Err(format!("expected `unit` or `percent`, got `{s}`")),
    }
}

/// An error attributed to the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

fn at(stage: &'static str) -> impl FnOnce(Error) -> StageError {
    move |error| StageError { stage, error }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn apply_corpus(cfg: &mut PipelineConfig, a: &CorpusArgs) {
    let c = &mut cfg.corpus;
    if a.src.is_some() {
        c.source = a.src.clone();
        c.source_lemmas = None;
    }
    if a.tgt.is_some() {
        c.target = a.tgt.clone();
        c.target_lemmas = None;
    }
    if a.langs.is_some() {
        c.langs = a.langs.clone();
    }
    if a.scores.is_some() {
        c.scores = a.scores.clone();
    }
    if let Some(s) = a.score_scale {
        c.score_scale = s;
    }
}

fn apply_lexicon(cfg: &mut PipelineConfig, a: &LexiconArgs) {
    if a.dict.is_some() {
        cfg.resources.dictionary = a.dict.clone();
    }
    if a.entities.is_some() {
        cfg.resources.entities = a.entities.clone();
    }
}

fn apply_langs(cfg: &mut PipelineConfig, langs: &Option<LangPair>) {
    if langs.is_some() {
        cfg.corpus.langs = langs.clone();
    }
}

fn manifest_in(dir: &Path, stage: &str) -> PathBuf {
    dir.join("manifests").join(format!("{stage}.json"))
}

fn report(stage: &str, status: Status) {
    match status {
        Status::UpToDate => eprintln!("{stage}: up-to-date"),
        Status::Ran => eprintln!("{stage}: complete"),
    }
}

fn init_threads(threads: usize) {
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> std::result::Result<(), StageError> {
    let mut cfg = load_config(&cli).map_err(at("config"))?;
    init_threads(cfg.threads);
    match &cli.command {
        Command::Filter(a) => {
            apply_corpus(&mut cfg, &a.corpus);
            cfg.validate().map_err(at("filter"))?;
            let input = CorpusFiles::from_config(&cfg).map_err(at("filter"))?;
            let prefix = a.out_prefix.clone().unwrap_or_else(|| cfg.out_dir.join("filtered"));
            let manifest = stages::suffixed(&prefix, ".manifest.json");
            let s = stages::filter(&cfg, &input, &prefix, &manifest, a.force).map_err(at("filter"))?;
            report("filter", s);
        }
        Command::Match(a) => {
            apply_corpus(&mut cfg, &a.corpus);
            apply_lexicon(&mut cfg, &a.lexicon);
            if let Some(k) = a.k {
                cfg.matching.k = k;
            }
            if a.no_rank {
                cfg.matching.rank = false;
            }
            cfg.validate().map_err(at("match"))?;
            let input = CorpusFiles::from_config(&cfg).map_err(at("match"))?;
            let dir = a.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let s = stages::match_stage(&cfg, &input, &dir, &manifest_in(&dir, "match"), a.force).map_err(at("match"))?;
            report("match", s);
        }
        Command::Gaps(a) => {
            apply_lexicon(&mut cfg, &a.lexicon);
            apply_langs(&mut cfg, &a.langs);
            let coverage = a.coverage.clone().unwrap_or_else(|| cfg.out_dir.join("coverage.json"));
            let out = a.out.clone().unwrap_or_else(|| cfg.out_dir.join("gaps.jsonl"));
            let manifest = stages::suffixed(&out, ".manifest.json");
            let s = stages::gaps(&cfg, &coverage, &out, &manifest, a.force).map_err(at("gaps"))?;
            report("gaps", s);
        }
        Command::Augment(a) => {
            apply_langs(&mut cfg, &a.langs);
            if a.template.is_some() {
                cfg.augment.template = a.template.clone();
            }
            if a.responses.is_some() {
                cfg.augment.responses = a.responses.clone();
            }
            if a.online {
                cfg.augment.mode = AugmentMode::Online;
            }
            let gaps = a.gaps.clone().unwrap_or_else(|| cfg.out_dir.join("gaps.jsonl"));
            let dir = a.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let s = stages::augment(&cfg, &gaps, &dir, &manifest_in(&dir, "augment"), a.force, a.retry_invalid)
                .map_err(at("augment"))?;
            report("augment", s);
        }
        Command::BuildSft(a) => {
            apply_langs(&mut cfg, &a.langs);
            cfg.validate().map_err(at("build-sft"))?;
            let dir = a.subset_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let subset = MatchOutputs::in_dir(&dir);
            let out = a.out.clone().unwrap_or_else(|| cfg.out_dir.join("train.jsonl"));
            let manifest = stages::suffixed(&out, ".manifest.json");
            let s = stages::build_sft(&cfg, &subset, a.augmented.as_deref(), &out, &manifest, a.force)
                .map_err(at("build-sft"))?;
            report("build-sft", s);
        }
        Command::Stats(a) => {
            apply_corpus(&mut cfg, &a.corpus);
            apply_lexicon(&mut cfg, &a.lexicon);
            if let Some(ks) = &a.ks {
                cfg.stats.ks = ks.clone();
            }
            cfg.validate().map_err(at("stats"))?;
            let raw = CorpusFiles::from_config(&cfg).map_err(at("stats"))?;
            let subset_dir = a.subset_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let dir = a.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let s = stages::stats(&cfg, &raw, &subset_dir.join("subset.src"), &dir, &manifest_in(&dir, "stats"), a.force)
                .map_err(at("stats"))?;
            report("stats", s);
        }
        Command::Pipeline(a) => {
            if let Some(d) = &a.out_dir {
                cfg.out_dir = d.clone();
            }
            pipeline(&cfg, a.force)?;
        }
    }
    Ok(())
}

/// filter, match, gaps, augment, build-sft, stats.
pub fn pipeline(cfg: &PipelineConfig, force: bool) -> std::result::Result<(), StageError> {
    cfg.validate().map_err(at("config"))?;
    cfg.corpus.langs().map_err(at("config"))?;
    if cfg.resources.dictionary.is_none() {
        return Err(at("config")(Error::Config("resources.dictionary is not set".into())));
    }
    cfg.check_inputs_exist().map_err(at("config"))?;
    let dir = &cfg.out_dir;
    let manifest = |s: &str| manifest_in(dir, s);

    let input = CorpusFiles::from_config(cfg).map_err(at("filter"))?;
    let prefix = dir.join("filtered");
    let s = stages::filter(cfg, &input, &prefix, &manifest("filter"), force).map_err(at("filter"))?;
    report("filter", s);

    let filtered = CorpusFiles::filtered(&prefix, &input);
    let s = stages::match_stage(cfg, &filtered, dir, &manifest("match"), force).map_err(at("match"))?;
    report("match", s);

    let m = MatchOutputs::in_dir(dir);
    let gaps = dir.join("gaps.jsonl");
    let s = stages::gaps(cfg, &m.coverage, &gaps, &manifest("gaps"), force).map_err(at("gaps"))?;
    report("gaps", s);

    let s = stages::augment(cfg, &gaps, dir, &manifest("augment"), force, false).map_err(at("augment"))?;
    report("augment", s);

    let aug = AugmentOutputs::in_dir(dir);
    let train = dir.join("train.jsonl");
    let s = stages::build_sft(cfg, &m, Some(&aug.augmented), &train, &manifest("build-sft"), force)
        .map_err(at("build-sft"))?;
    report("build-sft", s);

    let s = stages::stats(cfg, &filtered, &m.subset_source, dir, &manifest("stats"), force).map_err(at("stats"))?;
    report("stats", s);
    Ok(())
}

/// Entry point for the `lexmatcher` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
