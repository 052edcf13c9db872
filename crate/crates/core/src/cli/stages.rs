//! Stage bodies shared by the single-stage subcommands and `pipeline`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{call_llm, HttpTransport, LlmOutcome};
use crate::augment::{
    ingest_responses, parse_and_validate, read_augmented, render_prompts, write_augmented, write_prompts,
    write_responses, GeneratedPair, PromptTemplate,
};
use crate::config::{AugmentMode, PipelineConfig};
use crate::corpus_io::{
    attach_scores, load_corpus, load_lemma_sidecar, read_jsonl, write_corpus, write_jsonl, write_lines,
    write_scores, Corpus, ScoreScale,
};
use crate::error::{Error, Result};
use crate::filter::run_filters;
use crate::lexicon::{load_dictionary_with, merge_entities, Lexicon, SensePair};
use crate::manifest::{config_digest, Manifest};
use crate::matcher::{coverage_gaps, retrieve, Analyzer, CoverageReport, MatchRecord, RetrieveOptions};
use crate::sft::{build_all, emit_dataset};
use crate::stats::{compare_profiles, frequency_profile, subset_size_table, write_rank_log_csv, ProfileSummary};
use crate::text::{LangPair, LanguageTools, PairTools};

pub type Files = Vec<(String, PathBuf)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ran,
    UpToDate,
}

/// Appends `suffix` to the file name of `prefix`.
pub fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn named(name: &str, path: &Path) -> (String, PathBuf) {
    (name.to_string(), path.to_path_buf())
}

fn push_opt(files: &mut Files, name: &str, path: &Option<PathBuf>) {
    if let Some(p) = path {
        files.push(named(name, p));
    }
}

/// Runs `body` unless the manifest at `manifest_path` shows the stage is
/// already up to date.
pub fn run_stage(
    stage: &str,
    manifest_path: &Path,
    config_sha: String,
    inputs: Files,
    force: bool,
    body: impl FnOnce() -> Result<Files>,
) -> Result<Status> {
    if !force {
        if let Some(m) = Manifest::load(manifest_path)? {
            if m.stage == stage && m.is_current(&config_sha, &inputs)? {
                return Ok(Status::UpToDate);
            }
        }
    }
    for (name, path) in &inputs {
        if !path.is_file() {
            return Err(Error::Config(format!("missing input {name}: {}", path.display())));
        }
    }
    log::info!("{stage}: running");
    let outputs = body()?;
    Manifest::build(stage, config_sha, &inputs, &outputs)?.write(manifest_path)?;
    Ok(Status::Ran)
}

fn tool_inputs(cfg: &PipelineConfig) -> Files {
    let r = &cfg.resources;
    let mut files = Vec::new();
    push_opt(&mut files, "source_stopwords", &r.source_stopwords);
    push_opt(&mut files, "target_stopwords", &r.target_stopwords);
    push_opt(&mut files, "source_lemma_exceptions", &r.source_lemma_exceptions);
    push_opt(&mut files, "target_lemma_exceptions", &r.target_lemma_exceptions);
    files
}

fn lexicon_inputs(cfg: &PipelineConfig) -> Result<Files> {
    let dict = cfg
        .resources
        .dictionary
        .as_ref()
        .ok_or_else(|| Error::Config("resources.dictionary is not set".into()))?;
    let mut files = vec![named("dictionary", dict)];
    push_opt(&mut files, "entities", &cfg.resources.entities);
    Ok(files)
}

pub fn load_lexicon(cfg: &PipelineConfig, tools: &PairTools) -> Result<Lexicon> {
    let langs = cfg.corpus.langs()?.clone();
    let dict = cfg
        .resources
        .dictionary
        .as_ref()
        .ok_or_else(|| Error::Config("resources.dictionary is not set".into()))?;
    let mut lex = load_dictionary_with(dict, langs, tools, cfg.matching.max_segment_len)?;
    if let Some(e) = &cfg.resources.entities {
        lex = merge_entities(lex, e, tools)?;
    }
    Ok(lex)
}

/// A corpus on disk plus its optional sidecars.
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub source: PathBuf,
    pub target: PathBuf,
    pub scores: Option<(PathBuf, ScoreScale)>,
    pub source_lemmas: Option<PathBuf>,
    pub target_lemmas: Option<PathBuf>,
}

impl CorpusFiles {
    /// The input corpus named in the config.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let c = &cfg.corpus;
        Ok(Self {
            source: c.source_path()?.to_path_buf(),
            target: c.target_path()?.to_path_buf(),
            scores: c.scores.clone().map(|p| (p, c.score_scale)),
            source_lemmas: c.source_lemmas.clone(),
            target_lemmas: c.target_lemmas.clone(),
        })
    }

    /// Files written by the filter stage under `prefix`.
    pub fn filtered(prefix: &Path, input: &CorpusFiles) -> Self {
        Self {
            source: suffixed(prefix, ".src"),
            target: suffixed(prefix, ".tgt"),
            scores: input.scores.as_ref().map(|_| (suffixed(prefix, ".scores"), ScoreScale::Unit)),
            source_lemmas: input.source_lemmas.as_ref().map(|_| suffixed(prefix, ".src.lemmas")),
            target_lemmas: input.target_lemmas.as_ref().map(|_| suffixed(prefix, ".tgt.lemmas")),
        }
    }

    fn files(&self, prefix: &str) -> Files {
        let mut files = vec![
            named(&format!("{prefix}source"), &self.source),
            named(&format!("{prefix}target"), &self.target),
        ];
        if let Some((p, _)) = &self.scores {
            files.push(named(&format!("{prefix}scores"), p));
        }
        push_opt(&mut files, &format!("{prefix}source_lemmas"), &self.source_lemmas);
        push_opt(&mut files, &format!("{prefix}target_lemmas"), &self.target_lemmas);
        files
    }

    pub fn load(&self, langs: &LangPair) -> Result<LoadedCorpus> {
        let mut corpus = load_corpus(&self.source, &self.target, langs.clone())?;
        if let Some((p, scale)) = &self.scores {
            corpus = attach_scores(corpus, p, *scale)?;
        }
        let source_lemmas = match &self.source_lemmas {
            Some(p) => Some(load_lemma_sidecar(p, corpus.line_count)?),
            None => None,
        };
        let target_lemmas = match &self.target_lemmas {
            Some(p) => Some(load_lemma_sidecar(p, corpus.line_count)?),
            None => None,
        };
        Ok(LoadedCorpus {
            corpus,
            source_lemmas,
            target_lemmas,
        })
    }
}

pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub source_lemmas: Option<Vec<Vec<String>>>,
    pub target_lemmas: Option<Vec<Vec<String>>>,
}

impl LoadedCorpus {
    pub fn analyzer<'a>(&'a self, tools: &'a PairTools) -> Analyzer<'a> {
        Analyzer {
            tools,
            source_lemmas: self.source_lemmas.as_deref(),
            target_lemmas: self.target_lemmas.as_deref(),
        }
    }
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_lines(path, [text.trim_end()])
}

pub fn filter(cfg: &PipelineConfig, input: &CorpusFiles, out_prefix: &Path, manifest: &Path, force: bool) -> Result<Status> {
    let langs = cfg.corpus.langs()?.clone();
    let mut inputs = input.files("");
    inputs.extend(tool_inputs(cfg));
    let digest = config_digest(&("filter", &langs, &cfg.filter))?;
    run_stage("filter", manifest, digest, inputs, force, || {
        let tools = cfg.tools()?;
        let loaded = input.load(&langs)?;
        let (kept, mut report) = run_filters(&loaded.corpus, &cfg.filter, &tools);
        log::info!(
            "filter: kept {} of {} pairs ({} skipped blank at load)",
            report.retained,
            report.input,
            loaded.corpus.skipped_blank
        );
        if input.scores.is_none() {
            report.unscored = report.input;
        }
        let out = CorpusFiles::filtered(out_prefix, input);
        write_corpus(&kept.pairs, &out.source, &out.target)?;
        if let Some((p, _)) = &out.scores {
            write_scores(&kept.pairs, p)?;
        }
        for (side, path) in [(&loaded.source_lemmas, &out.source_lemmas), (&loaded.target_lemmas, &out.target_lemmas)] {
            if let (Some(lemmas), Some(path)) = (side, path) {
                write_lines(path, kept.pairs.iter().map(|p| lemmas[p.index].join(" ")))?;
            }
        }
        let report_path = suffixed(out_prefix, ".report.json");
        write_json_pretty(&report_path, &report)?;
        let mut outputs = out.files("");
        outputs.push(named("report", &report_path));
        Ok(outputs)
    })
}

pub struct MatchOutputs {
    pub subset_source: PathBuf,
    pub subset_target: PathBuf,
    pub coverage: PathBuf,
    pub matches: PathBuf,
}

impl MatchOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            subset_source: dir.join("subset.src"),
            subset_target: dir.join("subset.tgt"),
            coverage: dir.join("coverage.json"),
            matches: dir.join("matches.jsonl"),
        }
    }
}

pub fn match_stage(cfg: &PipelineConfig, input: &CorpusFiles, out_dir: &Path, manifest: &Path, force: bool) -> Result<Status> {
    let langs = cfg.corpus.langs()?.clone();
    let mut inputs = input.files("");
    inputs.extend(lexicon_inputs(cfg)?);
    inputs.extend(tool_inputs(cfg));
    let digest = config_digest(&("match", &langs, &cfg.matching))?;
    run_stage("match", manifest, digest, inputs, force, || {
        let tools = cfg.tools()?;
        let lexicon = load_lexicon(cfg, &tools)?;
        let loaded = input.load(&langs)?;
        let opts = RetrieveOptions { rank: cfg.matching.rank };
        let r = retrieve(&loaded.corpus, &lexicon, cfg.matching.k, &loaded.analyzer(&tools), opts)?;
        log::info!(
            "match: selected {} of {} pairs; {} of {} senses covered",
            r.subset.len(),
            loaded.corpus.len(),
            r.report.covered.len(),
            lexicon.len()
        );
        let out = MatchOutputs::in_dir(out_dir);
        write_corpus(&r.subset.pairs, &out.subset_source, &out.subset_target)?;
        write_json_pretty(&out.coverage, &r.report)?;
        write_jsonl(&out.matches, &r.records)?;
        Ok(vec![
            named("subset_source", &out.subset_source),
            named("subset_target", &out.subset_target),
            named("coverage", &out.coverage),
            named("matches", &out.matches),
        ])
    })
}

pub fn gaps(cfg: &PipelineConfig, coverage: &Path, out: &Path, manifest: &Path, force: bool) -> Result<Status> {
    let langs = cfg.corpus.langs()?.clone();
    let mut inputs = vec![named("coverage", coverage)];
    inputs.extend(lexicon_inputs(cfg)?);
    inputs.extend(tool_inputs(cfg));
    let digest = config_digest(&("gaps", &langs, cfg.matching.max_segment_len))?;
    run_stage("gaps", manifest, digest, inputs, force, || {
        let tools = cfg.tools()?;
        let lexicon = load_lexicon(cfg, &tools)?;
        let text = std::fs::read_to_string(coverage).map_err(|e| Error::io(coverage, e))?;
        let report: CoverageReport = serde_json::from_str(&text)?;
        let gaps = coverage_gaps(&report, &lexicon);
        log::info!("gaps: {} uncovered polysemous noun/verb senses", gaps.len());
        write_jsonl(out, &gaps)?;
        Ok(vec![named("gaps", out)])
    })
}

pub struct AugmentOutputs {
    pub prompts: PathBuf,
    pub responses: PathBuf,
    pub augmented: PathBuf,
}

impl AugmentOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            prompts: dir.join("prompts.jsonl"),
            responses: dir.join("responses.jsonl"),
            augmented: dir.join("augmented.jsonl"),
        }
    }
}

pub fn augment(
    cfg: &PipelineConfig,
    gaps_path: &Path,
    out_dir: &Path,
    manifest: &Path,
    force: bool,
    retry_invalid: bool,
) -> Result<Status> {
    let langs = cfg.corpus.langs()?.clone();
    let a = &cfg.augment;
    let mut inputs = vec![named("gaps", gaps_path)];
    push_opt(&mut inputs, "template", &a.template);
    if a.mode == AugmentMode::Offline {
        push_opt(&mut inputs, "responses", &a.responses);
    }
    inputs.extend(tool_inputs(cfg));
    let digest = config_digest(&("augment", &langs, a.mode, &a.endpoint))?;
    let out = AugmentOutputs::in_dir(out_dir);
    let force = force || (retry_invalid && a.mode == AugmentMode::Online);
    run_stage("augment", manifest, digest, inputs, force, || {
        let tools = cfg.tools()?;
        let gaps: Vec<SensePair> = read_jsonl(gaps_path)?;
        let template = match &a.template {
            Some(p) => PromptTemplate::load(p)?,
            None => PromptTemplate::default(),
        };
        let prompts = render_prompts(&gaps, &template, &langs);
        write_prompts(&prompts, &out.prompts)?;
        let mut outputs = vec![named("prompts", &out.prompts)];
        let generated = match a.mode {
            AugmentMode::Offline => match &a.responses {
                Some(p) => {
                    let outcomes = ingest_responses(p, &prompts)?;
                    parse_and_validate(&outcomes, &prompts, &tools)
                }
                None => {
                    log::info!(
                        "augment: offline mode without a responses file; wrote {} prompts, no pairs generated",
                        prompts.len()
                    );
                    Vec::new()
                }
            },
            AugmentMode::Online => {
                let previous: Vec<GeneratedPair> = if retry_invalid && out.augmented.is_file() {
                    read_augmented(&out.augmented)?
                } else {
                    Vec::new()
                };
                let transport = HttpTransport::from_env(&a.endpoint)?;
                let keep: Vec<Option<&GeneratedPair>> = if previous.len() == prompts.len() {
                    previous.iter().map(|g| Some(g).filter(|g| g.valid)).collect()
                } else {
                    vec![None; prompts.len()]
                };
                let todo: Vec<_> = prompts
                    .iter()
                    .zip(&keep)
                    .filter(|(_, k)| k.is_none())
                    .map(|(p, _)| p.clone())
                    .collect();
                log::info!("augment: sending {} prompts", todo.len());
                let fresh = call_llm(&todo, &transport, &a.endpoint)?;
                let mut fresh_iter = fresh.into_iter();
                let outcomes: Vec<LlmOutcome> = keep
                    .iter()
                    .map(|k| match k {
                        Some(g) => LlmOutcome::Response(g.raw_response.clone()),
                        None => fresh_iter.next().expect("one outcome per prompt"),
                    })
                    .collect();
                write_responses(&outcomes, &prompts, &out.responses)?;
                outputs.push(named("responses", &out.responses));
                let mut pairs = parse_and_validate(&outcomes, &prompts, &tools);
                for (p, k) in pairs.iter_mut().zip(&keep) {
                    if let Some(g) = k {
                        *p = (*g).clone();
                    }
                }
                pairs
            }
        };
        let valid = generated.iter().filter(|g| g.valid).count();
        log::info!("augment: {valid} valid of {} generated pairs", generated.len());
        write_augmented(&generated, &out.augmented)?;
        outputs.push(named("augmented", &out.augmented));
        Ok(outputs)
    })
}

pub fn build_sft(
    cfg: &PipelineConfig,
    subset: &MatchOutputs,
    augmented: Option<&Path>,
    out: &Path,
    manifest: &Path,
    force: bool,
) -> Result<Status> {
    let langs = cfg.corpus.langs()?.clone();
    let mut inputs = vec![
        named("subset_source", &subset.subset_source),
        named("subset_target", &subset.subset_target),
        named("matches", &subset.matches),
    ];
    if let Some(a) = augmented {
        inputs.push(named("augmented", a));
    }
    inputs.extend(tool_inputs(cfg));
    let mut sft = cfg.sft.clone();
    sft.rng_seed = cfg.seed;
    let digest = config_digest(&("build-sft", &langs, &sft, cfg.seed))?;
    run_stage("build-sft", manifest, digest, inputs, force, || {
        let tools = cfg.tools()?;
        let mut corpus = load_corpus(&subset.subset_source, &subset.subset_target, langs.clone())?;
        let records: Vec<MatchRecord> = read_jsonl(&subset.matches)?;
        if records.len() != corpus.line_count || corpus.skipped_blank > 0 {
            return Err(Error::CountMismatch {
                path: subset.matches.clone(),
                expected: corpus.line_count,
                found: records.len(),
            });
        }
        for (pair, record) in corpus.pairs.iter_mut().zip(&records) {
            pair.index = record.pair_index;
        }
        let generated = match augmented {
            Some(p) => read_augmented(p)?,
            None => Vec::new(),
        };
        let samples = build_all(&corpus, &records, &generated, &tools, &sft)?;
        let constrained = samples.iter().filter(|s| !s.constraints.is_empty()).count();
        log::info!("build-sft: {} samples ({constrained} constrained)", samples.len());
        emit_dataset(&samples, out, cfg.seed)?;
        Ok(vec![named("train", out)])
    })
}

pub struct StatsOutputs {
    pub freq_subset: PathBuf,
    pub freq_random: PathBuf,
    pub freq_compare: PathBuf,
    pub subset_sizes: PathBuf,
    pub summary: PathBuf,
}

impl StatsOutputs {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            freq_subset: dir.join("freq_subset.csv"),
            freq_random: dir.join("freq_random.csv"),
            freq_compare: dir.join("freq_compare.csv"),
            subset_sizes: dir.join("subset_sizes.csv"),
            summary: dir.join("stats.json"),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StatsSummary {
    raw_size: usize,
    subset_size: usize,
    subset: ProfileSummary,
    random: ProfileSummary,
}

/// Lemmas of word tokens; punctuation-only tokens are left out.
pub fn profile_tokens(text: &str, tools: &LanguageTools) -> Vec<String> {
    let (surface, lemmas) = tools.analyze(text);
    surface
        .iter()
        .zip(lemmas)
        .filter(|(s, _)| s.chars().any(char::is_alphanumeric))
        .map(|(_, l)| l)
        .collect()
}

pub fn stats(
    cfg: &PipelineConfig,
    raw: &CorpusFiles,
    subset_source: &Path,
    out_dir: &Path,
    manifest: &Path,
    force: bool,
) -> Result<Status> {
    let langs = cfg.corpus.langs()?.clone();
    let mut inputs = raw.files("raw_");
    inputs.push(named("subset_source", subset_source));
    inputs.extend(lexicon_inputs(cfg)?);
    inputs.extend(tool_inputs(cfg));
    let digest = config_digest(&("stats", &langs, &cfg.stats, &cfg.matching, cfg.seed))?;
    let out = StatsOutputs::in_dir(out_dir);
    run_stage("stats", manifest, digest, inputs, force, || {
        let tools = cfg.tools()?;
        let lexicon = load_lexicon(cfg, &tools)?;
        let loaded = raw.load(&langs)?;
        let table = subset_size_table(
            &loaded.corpus,
            &lexicon,
            &cfg.stats.ks,
            &loaded.analyzer(&tools),
            RetrieveOptions { rank: cfg.matching.rank },
        )?;
        table.write_csv(&out.subset_sizes)?;

        let subset: Vec<String> = crate::corpus_io::read_lines(subset_source)?;
        let n = subset.len().min(loaded.corpus.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut picked = sample(&mut rng, loaded.corpus.len(), n).into_vec();
        picked.sort_unstable();
        let random: Vec<&str> = picked.iter().map(|&i| loaded.corpus.pairs[i].source_text.as_str()).collect();

        let tokenize = |s: &str| profile_tokens(s, &tools.source);
        let p_subset = frequency_profile(&subset, tokenize);
        let p_random = frequency_profile(&random, tokenize);
        p_subset.write_csv(&out.freq_subset)?;
        p_random.write_csv(&out.freq_random)?;
        write_rank_log_csv(&p_subset, &p_random, &out.freq_compare)?;
        let cmp = compare_profiles(&p_subset, &p_random);
        log::info!(
            "stats: subset has {} unique source lemmas, size-matched random sample has {}",
            cmp.a.unique_types,
            cmp.b.unique_types
        );
        write_json_pretty(
            &out.summary,
            &StatsSummary {
                raw_size: loaded.corpus.len(),
                subset_size: subset.len(),
                subset: cmp.a,
                random: cmp.b,
            },
        )?;
        Ok(vec![
            named("freq_subset", &out.freq_subset),
            named("freq_random", &out.freq_random),
            named("freq_compare", &out.freq_compare),
            named("subset_sizes", &out.subset_sizes),
            named("summary", &out.summary),
        ])
    })
}
