//! Tokenization, lemmatization and stopword handling shared by the
//! filtering and matching stages.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EN_STOPWORDS: &str = include_str!("../resources/en_stopwords.txt");
const ZH_STOPWORDS: &str = include_str!("../resources/zh_stopwords.txt");
const EN_LEMMA_EXCEPTIONS: &str = include_str!("../resources/en_lemma_exceptions.tsv");

/// A `src-tgt` language pair tag such as `en-zh`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangPair {
    pub source: String,
    pub target: String,
}

impl LangPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.target.clone(), self.source.clone())
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for LangPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() && !b.contains('-') => {
                Ok(Self::new(a.to_lowercase(), b.to_lowercase()))
            }
            _ => Err(Error::Parameter(format!(
                "language pair `{s}` must look like `en-zh`"
            ))),
        }
    }
}

impl TryFrom<String> for LangPair {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LangPair> for String {
    fn from(p: LangPair) -> String {
        p.to_string()
    }
}

/// English display name for a language tag, falling back to the tag itself.
pub fn language_name(tag: &str) -> String {
    let name = match tag {
        "en" => "English",
        "zh" => "Chinese",
        "de" => "German",
        "ru" => "Russian",
        "cs" => "Czech",
        "ja" => "Japanese",
        "fr" => "French",
        "es" => "Spanish",
        "it" => "Italian",
        "is" => "Icelandic",
        "uk" => "Ukrainian",
        "hr" => "Croatian",
        _ => return tag.to_string(),
    };
    name.to_string()
}

pub fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x3134F)
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !is_han(c))
}

/// Strips leading and trailing punctuation from a token. Returns an empty
/// string for punctuation-only tokens.
pub fn trim_punct(token: &str) -> &str {
    token.trim_matches(is_punct)
}

/// How a language's text is cut into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// Split on Unicode whitespace.
    #[default]
    Whitespace,
    /// Every Han character is its own token; other runs split on whitespace.
    Cjk,
}

impl Tokenizer {
    /// The default tokenizer for a language tag.
    pub fn for_language(tag: &str) -> Self {
        match tag {
            "zh" | "ja" | "yue" | "wuu" => Tokenizer::Cjk,
            _ => Tokenizer::Whitespace,
        }
    }

    /// Word-level tokens as used by the corpus filters. Punctuation stays
    /// attached to its word.
    pub fn words<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().collect(),
            Tokenizer::Cjk => {
                let mut out = Vec::new();
                for chunk in text.split_whitespace() {
                    split_han(chunk, &mut out);
                }
                out
            }
        }
    }

    /// Tokens used for lexicon matching: like [`Tokenizer::words`], with
    /// leading and trailing punctuation split off into separate tokens.
    pub fn match_tokens<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        for word in self.words(text) {
            split_edge_punct(word, &mut out);
        }
        out
    }
}

fn split_han<'a>(chunk: &'a str, out: &mut Vec<&'a str>) {
    let mut run_start: Option<usize> = None;
    for (i, c) in chunk.char_indices() {
        if is_han(c) {
            if let Some(s) = run_start.take() {
                out.push(&chunk[s..i]);
            }
            out.push(&chunk[i..i + c.len_utf8()]);
        } else if run_start.is_none() {
            run_start = Some(i);
        }
    }
    if let Some(s) = run_start {
        out.push(&chunk[s..]);
    }
}

fn split_edge_punct<'a>(word: &'a str, out: &mut Vec<&'a str>) {
    let core = trim_punct(word);
    if core.is_empty() {
        for (i, c) in word.char_indices() {
            out.push(&word[i..i + c.len_utf8()]);
        }
        return;
    }
    let start = core.as_ptr() as usize - word.as_ptr() as usize;
    let end = start + core.len();
    for (i, c) in word[..start].char_indices() {
        out.push(&word[i..i + c.len_utf8()]);
    }
    out.push(core);
    for (i, c) in word[end..].char_indices() {
        out.push(&word[end + i..end + i + c.len_utf8()]);
    }
}

/// A set of stopword lemmas for one language.
#[derive(Debug, Clone, Default)]
pub struct StopwordSet {
    words: HashSet<String>,
}

impl StopwordSet {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .collect();
        Self { words }
    }

    /// Loads a stopword file (one token per line, `#` comments allowed).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    /// Built-in list for languages that ship one, otherwise empty.
    pub fn builtin(lang: &str) -> Self {
        match lang {
            "en" => Self::new(EN_STOPWORDS.lines()),
            "zh" => Self::new(ZH_STOPWORDS.lines()),
            _ => Self::default(),
        }
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.words.contains(lemma)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Adds the lemmatized form of every entry so that both surface and
    /// lemma forms are recognized.
    pub fn with_lemmas(mut self, lemmatizer: &Lemmatizer) -> Self {
        let extra: Vec<String> = self.words.iter().map(|w| lemmatizer.lemmatize(w)).collect();
        self.words.extend(extra);
        self
    }
}

/// A suffix rewrite applied when no exception matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
    /// Minimum number of characters left after removing the suffix.
    pub min_stem: usize,
    /// Apply the consonant-undoubling / silent-e repair after stripping.
    pub repair: bool,
}

impl SuffixRule {
    fn new(suffix: &str, replacement: &str, min_stem: usize, repair: bool) -> Self {
        Self {
            suffix: suffix.into(),
            replacement: replacement.into(),
            min_stem,
            repair,
        }
    }
}

/// Table-plus-suffix-rule lemmatizer.
///
/// Lookup order for a lowercased word: known lemmas map to themselves,
/// exception-table entries map to their listed lemma, and everything else
/// is rewritten by the first applicable suffix rule until no rule applies.
/// Every rule strictly shortens the word, so the loop terminates, and its
/// result is a fixed point, which makes `lemmatize` idempotent.
#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
    protected: HashSet<String>,
    rules: Vec<SuffixRule>,
}

impl Lemmatizer {
    /// Lowercasing only.
    pub fn identity() -> Self {
        Self::default()
    }

    /// English rules plus the bundled exception table.
    pub fn english() -> Self {
        let mut lem = Self {
            exceptions: HashMap::new(),
            protected: HashSet::new(),
            rules: english_rules(),
        };
        lem.add_exceptions_tsv(EN_LEMMA_EXCEPTIONS);
        lem
    }

    pub fn for_language(tag: &str) -> Self {
        match tag {
            "en" => Self::english(),
            _ => Self::identity(),
        }
    }

    pub fn with_rules(rules: Vec<SuffixRule>) -> Self {
        Self {
            rules,
            ..Self::default()
        }
    }

    /// Adds `surface \t lemma` lines. Blank lines and `#` comments are skipped.
    pub fn add_exceptions_tsv(&mut self, text: &str) {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((surface, lemma)) = line.split_once('\t') {
                self.add_exception(surface.trim(), lemma.trim());
            }
        }
    }

    pub fn load_exceptions(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.add_exceptions_tsv(&text);
        Ok(())
    }

    pub fn add_exception(&mut self, surface: &str, lemma: &str) {
        let surface = surface.to_lowercase();
        let lemma = lemma.to_lowercase();
        if surface.is_empty() || lemma.is_empty() || self.protected.contains(&surface) {
            return;
        }
        self.exceptions.remove(&lemma);
        self.protected.insert(lemma.clone());
        if surface != lemma {
            self.exceptions.insert(surface, lemma);
        }
    }

    pub fn lemmatize(&self, word: &str) -> String {
        let mut w = word.to_lowercase();
        if self.rules.is_empty() && self.exceptions.is_empty() {
            return w;
        }
        loop {
            if self.protected.contains(&w) {
                return w;
            }
            if let Some(lemma) = self.exceptions.get(&w) {
                return lemma.clone();
            }
            match self.apply_rule(&w) {
                Some(next) => w = next,
                None => return w,
            }
        }
    }

    fn apply_rule(&self, w: &str) -> Option<String> {
        if !w.chars().all(char::is_alphabetic) {
            return None;
        }
        for rule in &self.rules {
            let Some(stem) = w.strip_suffix(rule.suffix.as_str()) else {
                continue;
            };
            if stem.chars().count() < rule.min_stem || !stem.chars().any(is_vowel) {
                continue;
            }
            let mut out = format!("{stem}{}", rule.replacement);
            if rule.repair {
                out = repair_stem(out);
            }
            // No-op rules (e.g. "ss" -> "ss") stop the search.
            return if out.len() < w.len() { Some(out) } else { None };
        }
        None
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

// Undo consonant doubling ("stopp" -> "stop") or restore a silent e on a
// short consonant-vowel-consonant stem ("mak" -> "make").
fn repair_stem(stem: String) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 2 {
        let (a, b) = (chars[n - 2], chars[n - 1]);
        if a == b && is_consonant(b) && !matches!(b, 'l' | 's' | 'z') {
            return chars[..n - 1].iter().collect();
        }
    }
    if stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz") {
        return format!("{stem}e");
    }
    if n == 3 {
        let (a, b, c) = (chars[0], chars[1], chars[2]);
        if is_consonant(a) && is_vowel(b) && b != 'y' && is_consonant(c) && !matches!(c, 'w' | 'x' | 'y') {
            return format!("{stem}e");
        }
    }
    stem
}

fn english_rules() -> Vec<SuffixRule> {
    vec![
        SuffixRule::new("sses", "ss", 1, false),
        SuffixRule::new("ies", "y", 2, false),
        SuffixRule::new("xes", "x", 2, false),
        SuffixRule::new("ches", "ch", 2, false),
        SuffixRule::new("shes", "sh", 2, false),
        SuffixRule::new("ss", "ss", 1, false),
        SuffixRule::new("us", "us", 1, false),
        SuffixRule::new("is", "is", 1, false),
        SuffixRule::new("s", "", 3, false),
        SuffixRule::new("ied", "y", 2, false),
        SuffixRule::new("eed", "ee", 3, false),
        SuffixRule::new("ed", "", 3, true),
        SuffixRule::new("ing", "", 3, true),
    ]
}

/// Tokenizer, lemmatizer and stopwords for one side of a corpus.
#[derive(Debug, Clone)]
pub struct LanguageTools {
    pub lang: String,
    pub tokenizer: Tokenizer,
    pub lemmatizer: Lemmatizer,
    pub stopwords: StopwordSet,
}

impl LanguageTools {
    /// Defaults for a language tag: built-in tokenizer, lemmatizer and
    /// stopword list.
    pub fn for_language(lang: &str) -> Self {
        let lemmatizer = Lemmatizer::for_language(lang);
        let stopwords = StopwordSet::builtin(lang).with_lemmas(&lemmatizer);
        Self {
            lang: lang.to_string(),
            tokenizer: Tokenizer::for_language(lang),
            lemmatizer,
            stopwords,
        }
    }

    /// Surface tokens and their lemmas for matching.
    pub fn analyze(&self, text: &str) -> (Vec<String>, Vec<String>) {
        let surface: Vec<String> = self
            .tokenizer
            .match_tokens(text)
            .into_iter()
            .map(str::to_string)
            .collect();
        let lemmas = surface.iter().map(|t| self.lemmatizer.lemmatize(t)).collect();
        (surface, lemmas)
    }

    pub fn lemmas(&self, text: &str) -> Vec<String> {
        self.analyze(text).1
    }

    pub fn is_stopword(&self, lemma: &str) -> bool {
        self.stopwords.contains(lemma)
    }
}

/// Language tools for both sides of a corpus.
#[derive(Debug, Clone)]
pub struct PairTools {
    pub source: LanguageTools,
    pub target: LanguageTools,
}

impl PairTools {
    pub fn for_langs(langs: &LangPair) -> Self {
        Self {
            source: LanguageTools::for_language(&langs.source),
            target: LanguageTools::for_language(&langs.target),
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

/// Replaces `{name}` slots in one pass; substituted values are never
/// re-scanned. Unknown slots are left as written.
pub fn fill_placeholders(text: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(text.len() + 64);
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let slot = after
            .find('}')
            .and_then(|close| values.iter().find(|(k, _)| *k == &after[..close]).map(|(_, v)| (*v, close)));
        match slot {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Whether `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_contiguous<T: PartialEq>(haystack: &[T], needle: &[T]) -> bool {
    if needle.is_empty() {
        return true;
    }
    if needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}
