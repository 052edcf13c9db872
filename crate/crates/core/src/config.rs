//! Pipeline configuration file.
//!
//! A TOML file with one section per stage. Unknown keys are rejected.
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::EndpointConfig;
use crate::corpus_io::ScoreScale;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::sft::BuildConfig;
use crate::text::{LangPair, LanguageTools, Lemmatizer, PairTools, StopwordSet};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub langs: Option<LangPair>,
    pub scores: Option<PathBuf>,
    pub score_scale: ScoreScale,
    /// Pre-computed lemma sidecars, one line per corpus line.
    pub source_lemmas: Option<PathBuf>,
    pub target_lemmas: Option<PathBuf>,
}

impl CorpusSection {
    pub fn source_path(&self) -> Result<&Path> {
        self.source.as_deref().ok_or_else(|| Error::Config("corpus.source is not set".into()))
    }

    pub fn target_path(&self) -> Result<&Path> {
        self.target.as_deref().ok_or_else(|| Error::Config("corpus.target is not set".into()))
    }

    pub fn langs(&self) -> Result<&LangPair> {
        self.langs.as_ref().ok_or_else(|| Error::Config("corpus.langs is not set".into()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesSection {
    pub dictionary: Option<PathBuf>,
    pub entities: Option<PathBuf>,
    pub source_stopwords: Option<PathBuf>,
    pub target_stopwords: Option<PathBuf>,
    /// Extra `surface<TAB>lemma` exceptions for the source lemmatizer.
    pub source_lemma_exceptions: Option<PathBuf>,
    pub target_lemma_exceptions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSection {
    pub k: i64,
    /// Traverse by descending quality score.
    pub rank: bool,
    /// Longest entity segment, in tokens.
    pub max_segment_len: usize,
}

impl Default for MatchSection {
    fn default() -> Self {
        Self {
            k: 3,
            rank: true,
            max_segment_len: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    #[default]
    Offline,
    Online,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub mode: AugmentMode,
    /// Prompt template file; the built-in template when unset.
    pub template: Option<PathBuf>,
    /// Offline mode: stub or collected responses to ingest.
    pub responses: Option<PathBuf>,
    pub endpoint: EndpointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    /// K values for the subset-size table.
    pub ks: Vec<i64>,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self {
            ks: vec![1, 2, 3, 5, 10],
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub resources: ResourcesSection,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default, rename = "match")]
    pub matching: MatchSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub sft: BuildConfig,
    #[serde(default)]
    pub stats: StatsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            threads: 0,
            out_dir: default_out_dir(),
            corpus: CorpusSection::default(),
            resources: ResourcesSection::default(),
            filter: FilterConfig::default(),
            matching: MatchSection::default(),
            augment: AugmentSection::default(),
            sft: BuildConfig::default(),
            stats: StatsSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Parses the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.out_dir);
        fix_opt(&mut self.corpus.source);
        fix_opt(&mut self.corpus.target);
        fix_opt(&mut self.corpus.scores);
        fix_opt(&mut self.corpus.source_lemmas);
        fix_opt(&mut self.corpus.target_lemmas);
        let r = &mut self.resources;
        for p in [
            &mut r.dictionary,
            &mut r.entities,
            &mut r.source_stopwords,
            &mut r.target_stopwords,
            &mut r.source_lemma_exceptions,
            &mut r.target_lemma_exceptions,
        ] {
            fix_opt(p);
        }
        fix_opt(&mut self.augment.template);
        fix_opt(&mut self.augment.responses);
    }

    /// Value checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.sft.validate()?;
        if self.matching.k < 0 {
            return Err(Error::Config(format!("match.k must be non-negative, got {}", self.matching.k)));
        }
        if self.stats.ks.iter().any(|&k| k < 0) || self.stats.ks.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("stats.ks must be non-negative and ascending".into()));
        }
        Ok(())
    }

    /// Every configured input path that must exist before a run.
    pub fn input_paths(&self) -> Vec<(&'static str, &Path)> {
        let mut out = Vec::new();
        let r = &self.resources;
        for (key, p) in [
            ("corpus.source", &self.corpus.source),
            ("corpus.target", &self.corpus.target),
            ("corpus.scores", &self.corpus.scores),
            ("corpus.source_lemmas", &self.corpus.source_lemmas),
            ("corpus.target_lemmas", &self.corpus.target_lemmas),
            ("resources.dictionary", &r.dictionary),
            ("resources.entities", &r.entities),
            ("resources.source_stopwords", &r.source_stopwords),
            ("resources.target_stopwords", &r.target_stopwords),
            ("resources.source_lemma_exceptions", &r.source_lemma_exceptions),
            ("resources.target_lemma_exceptions", &r.target_lemma_exceptions),
            ("augment.template", &self.augment.template),
            ("augment.responses", &self.augment.responses),
        ] {
            if let Some(p) = p {
                out.push((key, p.as_path()));
            }
        }
        out
    }

    pub fn check_inputs_exist(&self) -> Result<()> {
        for (key, p) in self.input_paths() {
            if !p.is_file() {
                return Err(Error::Config(format!("{key}: file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Language tools with any configured stopword and exception files.
    pub fn tools(&self) -> Result<PairTools> {
        let langs = self.corpus.langs()?;
        let r = &self.resources;
        Ok(PairTools {
            source: side_tools(&langs.source, r.source_stopwords.as_deref(), r.source_lemma_exceptions.as_deref())?,
            target: side_tools(&langs.target, r.target_stopwords.as_deref(), r.target_lemma_exceptions.as_deref())?,
        })
    }
}

fn side_tools(lang: &str, stopwords: Option<&Path>, exceptions: Option<&Path>) -> Result<LanguageTools> {
    let mut tools = LanguageTools::for_language(lang);
    if let Some(p) = exceptions {
        let mut lemmatizer: Lemmatizer = tools.lemmatizer.clone();
        lemmatizer.load_exceptions(p)?;
        tools.lemmatizer = lemmatizer;
    }
    if let Some(p) = stopwords {
        tools.stopwords = StopwordSet::load(p)?;
    }
    tools.stopwords = tools.stopwords.with_lemmas(&tools.lemmatizer);
    Ok(tools)
}
