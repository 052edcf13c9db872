//! Rule-based corpus cleaning followed by a quality-estimate cut.
//!
//! Rules run in a fixed order (dedup, length, ratio, repeat, content words,
//! quality) and a rejected pair is charged to the first rule it fails, so
//! reports from different runs are directly comparable.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{first_occurrence_mask, Corpus, DedupMode, SentencePair};
use crate::error::{Error, Result};
use crate::text::{trim_punct, LanguageTools, PairTools};

/// An exact non-negative fraction, written as `"1/3"` or as a decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FractionRepr", into = "String")]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Config("fraction with zero denominator".into()));
        }
        Ok(Self { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Compares `a / b` against this fraction exactly.
    fn cmp_ratio(self, a: u64, b: u64) -> std::cmp::Ordering {
        (a as u128 * self.den as u128).cmp(&(b as u128 * self.num as u128))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl From<Fraction> for String {
    fn from(f: Fraction) -> String {
        f.to_string()
    }
}

impl std::str::FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot read `{s}` as a fraction"));
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse().map_err(|_| bad())?;
            let den = b.trim().parse().map_err(|_| bad())?;
            return Fraction::new(num, den);
        }
        // Decimal literal: "0.25" -> 25/100.
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Fraction::new(int * den + frac_v, den)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FractionRepr {
    Text(String),
    Int(u64),
    Float(f64),
}

impl TryFrom<FractionRepr> for Fraction {
    type Error = Error;

    fn try_from(r: FractionRepr) -> Result<Self> {
        match r {
            FractionRepr::Text(s) => s.parse(),
            FractionRepr::Int(n) => Fraction::new(n, 1),
            FractionRepr::Float(x) if x.is_finite() && x >= 0.0 => x.to_string().parse(),
            FractionRepr::Float(x) => Err(Error::Config(format!("invalid fraction {x}"))),
        }
    }
}

fn default_max_words() -> usize {
    100
}
fn default_max_word_chars() -> usize {
    40
}
fn default_min_len_ratio() -> Fraction {
    Fraction { num: 1, den: 3 }
}
fn default_max_len_ratio() -> Fraction {
    Fraction { num: 3, den: 1 }
}
fn default_max_repeat_ratio() -> f64 {
    0.3
}
fn default_content_lo() -> f64 {
    0.3
}
fn default_content_hi() -> f64 {
    0.8
}
fn default_min_quality() -> f64 {
    0.40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    #[serde(default = "default_max_word_chars")]
    pub max_word_chars: usize,
    #[serde(default = "default_min_len_ratio")]
    pub min_len_ratio: Fraction,
    #[serde(default = "default_max_len_ratio")]
    pub max_len_ratio: Fraction,
    #[serde(default = "default_max_repeat_ratio")]
    pub max_repeat_ratio: f64,
    #[serde(default = "default_content_lo")]
    pub content_word_lo: f64,
    #[serde(default = "default_content_hi")]
    pub content_word_hi: f64,
    /// Reject pairs whose content-word share lies inside the band instead
    /// of outside it.
    #[serde(default)]
    pub content_rule_inverted: bool,
    /// Unit scale.
    #[serde(default = "default_min_quality")]
    pub min_quality: f64,
    #[serde(default)]
    pub dedup: DedupMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_words: default_max_words(),
            max_word_chars: default_max_word_chars(),
            min_len_ratio: default_min_len_ratio(),
            max_len_ratio: default_max_len_ratio(),
            max_repeat_ratio: default_max_repeat_ratio(),
            content_word_lo: default_content_lo(),
            content_word_hi: default_content_hi(),
            content_rule_inverted: false,
            min_quality: default_min_quality(),
            dedup: DedupMode::Pair,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let one = |f: Fraction| f.num.cmp(&f.den);
        use std::cmp::Ordering::*;
        if self.min_len_ratio.num == 0 || one(self.min_len_ratio) != Less || one(self.max_len_ratio) != Greater {
            return Err(Error::Config(format!(
                "length ratios must satisfy 0 < min_len_ratio < 1 < max_len_ratio (got {} and {})",
                self.min_len_ratio, self.max_len_ratio
            )));
        }
        if !(self.max_repeat_ratio > 0.0 && self.max_repeat_ratio < 1.0) {
            return Err(Error::Config("max_repeat_ratio must lie in (0, 1)".into()));
        }
        if !(0.0 <= self.content_word_lo && self.content_word_lo < self.content_word_hi && self.content_word_hi <= 1.0) {
            return Err(Error::Config(
                "content word band must satisfy 0 <= content_word_lo < content_word_hi <= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_quality) {
            return Err(Error::Config("min_quality must lie in [0, 1] (unit scale)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Duplicate,
    Length,
    EmptySide,
    Ratio,
    Repeat,
    ContentWords,
    Quality,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::Duplicate,
        RejectReason::Length,
        RejectReason::EmptySide,
        RejectReason::Ratio,
        RejectReason::Repeat,
        RejectReason::ContentWords,
        RejectReason::Quality,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Reject(RejectReason),
}

impl Decision {
    pub fn is_keep(self) -> bool {
        matches!(self, Decision::Keep)
    }
}

fn side_too_long(text: &str, tools: &LanguageTools, cfg: &FilterConfig) -> bool {
    let words = tools.tokenizer.words(text);
    words.len() > cfg.max_words || words.iter().any(|w| w.chars().count() > cfg.max_word_chars)
}

pub fn rule_length(pair: &SentencePair, cfg: &FilterConfig, tools: &PairTools) -> Decision {
    if side_too_long(&pair.source_text, &tools.source, cfg) || side_too_long(&pair.target_text, &tools.target, cfg) {
        Decision::Reject(RejectReason::Length)
    } else {
        Decision::Keep
    }
}

pub fn rule_ratio(pair: &SentencePair, cfg: &FilterConfig, tools: &PairTools) -> Decision {
    let src = tools.source.tokenizer.words(&pair.source_text).len() as u64;
    let tgt = tools.target.tokenizer.words(&pair.target_text).len() as u64;
    if src == 0 || tgt == 0 {
        return Decision::Reject(RejectReason::EmptySide);
    }
    use std::cmp::Ordering::*;
    if cfg.min_len_ratio.cmp_ratio(src, tgt) == Less || cfg.max_len_ratio.cmp_ratio(src, tgt) == Greater {
        Decision::Reject(RejectReason::Ratio)
    } else {
        Decision::Keep
    }
}

/// Share of the most frequent token among all tokens; 0 for empty input.
pub fn repeat_ratio(tokens: &[&str]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    max as f64 / tokens.len() as f64
}

pub fn rule_repeat(pair: &SentencePair, cfg: &FilterConfig, tools: &PairTools) -> Decision {
    let over = |text: &str, t: &LanguageTools| repeat_ratio(&t.tokenizer.words(text)) > cfg.max_repeat_ratio;
    if over(&pair.source_text, &tools.source) || over(&pair.target_text, &tools.target) {
        Decision::Reject(RejectReason::Repeat)
    } else {
        Decision::Keep
    }
}

/// Share of tokens that are content words: not punctuation-only and not a
/// stopword either as written or after lemmatization.
pub fn content_word_share(text: &str, tools: &LanguageTools) -> f64 {
    let words = tools.tokenizer.words(text);
    if words.is_empty() {
        return 0.0;
    }
    let content = words
        .iter()
        .filter(|w| {
            let core = trim_punct(w);
            if core.is_empty() {
                return false;
            }
            let lower = core.to_lowercase();
            !tools.stopwords.contains(&lower) && !tools.stopwords.contains(&tools.lemmatizer.lemmatize(core))
        })
        .count();
    content as f64 / words.len() as f64
}

pub fn rule_content_words(pair: &SentencePair, cfg: &FilterConfig, tools: &PairTools) -> Decision {
    let in_band = |share: f64| share >= cfg.content_word_lo && share <= cfg.content_word_hi;
    let src = in_band(content_word_share(&pair.source_text, &tools.source));
    let tgt = in_band(content_word_share(&pair.target_text, &tools.target));
    let keep = if cfg.content_rule_inverted {
        !src && !tgt
    } else {
        src && tgt
    };
    if keep {
        Decision::Keep
    } else {
        Decision::Reject(RejectReason::ContentWords)
    }
}

/// Unscored pairs pass.
pub fn rule_quality(pair: &SentencePair, cfg: &FilterConfig) -> Decision {
    match pair.quality_score {
        Some(s) if s < cfg.min_quality => Decision::Reject(RejectReason::Quality),
        _ => Decision::Keep,
    }
}

/// All per-pair rules in pipeline order (dedup excluded).
pub fn evaluate(pair: &SentencePair, cfg: &FilterConfig, tools: &PairTools) -> Decision {
    let checks = [
        rule_length(pair, cfg, tools),
        rule_ratio(pair, cfg, tools),
        rule_repeat(pair, cfg, tools),
        rule_content_words(pair, cfg, tools),
        rule_quality(pair, cfg),
    ];
    checks.into_iter().find(|d| !d.is_keep()).unwrap_or(Decision::Keep)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    pub duplicate: usize,
    pub length: usize,
    pub empty_side: usize,
    pub ratio: usize,
    pub repeat: usize,
    pub content_words: usize,
    pub quality: usize,
}

impl RejectCounts {
    fn bump(&mut self, reason: RejectReason) {
        let slot = match reason {
            RejectReason::Duplicate => &mut self.duplicate,
            RejectReason::Length => &mut self.length,
            RejectReason::EmptySide => &mut self.empty_side,
            RejectReason::Ratio => &mut self.ratio,
            RejectReason::Repeat => &mut self.repeat,
            RejectReason::ContentWords => &mut self.content_words,
            RejectReason::Quality => &mut self.quality,
        };
        *slot += 1;
    }

    pub fn get(&self, reason: RejectReason) -> usize {
        match reason {
            RejectReason::Duplicate => self.duplicate,
            RejectReason::Length => self.length,
            RejectReason::EmptySide => self.empty_side,
            RejectReason::Ratio => self.ratio,
            RejectReason::Repeat => self.repeat,
            RejectReason::ContentWords => self.content_words,
            RejectReason::Quality => self.quality,
        }
    }

    pub fn total(&self) -> usize {
        RejectReason::ALL.iter().map(|r| self.get(*r)).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub retained: usize,
    pub rejected: RejectCounts,
    /// Retained or rejected pairs that carried no quality score.
    pub unscored: usize,
}

pub fn run_filters(corpus: &Corpus, cfg: &FilterConfig, tools: &PairTools) -> (Corpus, FilterReport) {
    let unique = first_occurrence_mask(&corpus.pairs, cfg.dedup);
    let decisions: Vec<Decision> = corpus
        .pairs
        .par_iter()
        .zip(unique.par_iter())
        .map(|(pair, &first)| {
            if first {
                evaluate(pair, cfg, tools)
            } else {
                Decision::Reject(RejectReason::Duplicate)
            }
        })
        .collect();

    let mut report = FilterReport {
        input: corpus.len(),
        ..FilterReport::default()
    };
    let mut kept = Vec::new();
    for (pair, decision) in corpus.pairs.iter().zip(decisions) {
        if pair.quality_score.is_none() {
            report.unscored += 1;
        }
        match decision {
            Decision::Keep => kept.push(pair.clone()),
            Decision::Reject(r) => report.rejected.bump(r),
        }
    }
    report.retained = kept.len();
    (corpus.with_pairs(kept), report)
}
