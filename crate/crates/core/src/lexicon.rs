//! Bilingual dictionary and entity list, normalized to lemma keys and
//! indexed by source segment.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus_io::read_lines;
use crate::error::{Error, Result};
use crate::text::{LangPair, LanguageTools, PairTools, StopwordSet};

pub const DEFAULT_MAX_SEGMENT_LEN: usize = 8;
/// Longest source segment accepted from a dictionary (unigram or bigram).
pub const DICTIONARY_MAX_SOURCE_LEN: usize = 2;

/// Token id for lemmas that appear nowhere in the lexicon.
pub(crate) const UNKNOWN: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

impl Pos {
    /// Accepts full names and WordNet single-letter tags. Empty means none.
    pub fn parse(s: &str) -> Option<Pos> {
        match s.trim().to_lowercase().as_str() {
            "" | "-" | "_" => None,
            "n" | "noun" => Some(Pos::Noun),
            "v" | "verb" => Some(Pos::Verb),
            "a" | "s" | "adj" | "adjective" => Some(Pos::Adj),
            "r" | "adv" | "adverb" => Some(Pos::Adv),
            _ => Some(Pos::Other),
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adj => "adj",
            Pos::Adv => "adv",
            Pos::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Dictionary,
    Entity,
}

/// One dictionary sense: a source segment and one of its translations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensePair {
    /// Lemma sequence.
    pub source_segment: Vec<String>,
    /// Lemma sequence.
    pub target_segment: Vec<String>,
    /// The segments as written in the source file, trimmed.
    pub source_text: String,
    pub target_text: String,
    pub pos: Option<Pos>,
    pub sense_id: String,
    pub definition: Option<String>,
    pub origin: Origin,
}

impl SensePair {
    pub fn source_key(&self) -> String {
        self.source_segment.join(" ")
    }

    pub fn target_key(&self) -> String {
        self.target_segment.join(" ")
    }
}

/// Counts of entries dropped or skipped while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub stopword_only: usize,
    pub duplicates: usize,
    pub too_long: usize,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    langs: LangPair,
    max_segment_len: usize,
    entries: Vec<SensePair>,
    index: HashMap<String, Vec<usize>>,
    keys: HashSet<(String, String, String)>,
    pub stats: LoadStats,
    // Interned form used by the matcher.
    vocab: HashMap<String, u32>,
    id_index: HashMap<Vec<u32>, Vec<u32>>,
    long_prefixes: HashSet<Vec<u32>>,
    target_ids: Vec<Vec<u32>>,
    longest_source: usize,
}

impl Lexicon {
    pub fn new(langs: LangPair, max_segment_len: usize) -> Self {
        Self {
            langs,
            max_segment_len: max_segment_len.max(DICTIONARY_MAX_SOURCE_LEN),
            entries: Vec::new(),
            index: HashMap::new(),
            keys: HashSet::new(),
            stats: LoadStats::default(),
            vocab: HashMap::new(),
            id_index: HashMap::new(),
            long_prefixes: HashSet::new(),
            target_ids: Vec::new(),
            longest_source: 0,
        }
    }

    pub fn langs(&self) -> &LangPair {
        &self.langs
    }

    pub fn entries(&self) -> &[SensePair] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_segment_len(&self) -> usize {
        self.max_segment_len
    }

    /// Length of the longest source segment actually present.
    pub fn longest_source(&self) -> usize {
        self.longest_source
    }

    /// Adds an already-normalized entry. Returns `false` (and counts a
    /// duplicate or an over-long segment) when the entry is not added.
    pub fn insert(&mut self, entry: SensePair) -> bool {
        let limit = match entry.origin {
            Origin::Dictionary => DICTIONARY_MAX_SOURCE_LEN,
            Origin::Entity => self.max_segment_len,
        };
        if entry.source_segment.is_empty() || entry.target_segment.is_empty() || entry.source_segment.len() > limit {
            self.stats.too_long += 1;
            return false;
        }
        let key = (entry.source_key(), entry.target_key(), entry.sense_id.clone());
        if !self.keys.insert(key) {
            self.stats.duplicates += 1;
            return false;
        }
        let id = self.entries.len();
        let source_ids: Vec<u32> = entry.source_segment.iter().map(|t| self.intern(t)).collect();
        let target_ids: Vec<u32> = entry.target_segment.iter().map(|t| self.intern(t)).collect();

        // Dictionary entries precede entity entries under the same key.
        let list = self.index.entry(entry.source_key()).or_default();
        let at = match entry.origin {
            Origin::Dictionary => list.partition_point(|&j| self.entries[j].origin == Origin::Dictionary),
            Origin::Entity => list.len(),
        };
        list.insert(at, id);
        let fast = self.id_index.entry(source_ids.clone()).or_default();
        fast.insert(at, id as u32);

        if source_ids.len() > DICTIONARY_MAX_SOURCE_LEN {
            for l in 2..=source_ids.len() {
                self.long_prefixes.insert(source_ids[..l].to_vec());
            }
        }
        self.longest_source = self.longest_source.max(source_ids.len());
        self.target_ids.push(target_ids);
        self.entries.push(entry);
        true
    }

    fn intern(&mut self, token: &str) -> u32 {
        let next = self.vocab.len() as u32;
        *self.vocab.entry(token.to_string()).or_insert(next)
    }

    /// All senses whose source segment equals `segment`, dictionary
    /// entries first, each group in insertion order.
    pub fn lookup<S: AsRef<str>>(&self, segment: &[S]) -> Vec<&SensePair> {
        let key = segment.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
        self.index
            .get(&key)
            .map(|ids| ids.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// Finds an entry by its identity.
    pub fn find(&self, source_key: &str, target_key: &str, sense_id: &str) -> Option<usize> {
        self.index.get(source_key)?.iter().copied().find(|&i| {
            let e = &self.entries[i];
            e.sense_id == sense_id && e.target_key() == target_key
        })
    }

    pub(crate) fn token_id(&self, lemma: &str) -> u32 {
        self.vocab.get(lemma).copied().unwrap_or(UNKNOWN)
    }

    pub(crate) fn ids_for_source(&self, ids: &[u32]) -> Option<&[u32]> {
        self.id_index.get(ids).map(Vec::as_slice)
    }

    pub(crate) fn is_long_prefix(&self, ids: &[u32]) -> bool {
        self.long_prefixes.contains(ids)
    }

    pub(crate) fn target_ids(&self, entry: usize) -> &[u32] {
        &self.target_ids[entry]
    }

    /// Number of distinct sense ids sharing a source segment and POS.
    pub fn senses_per_group(&self) -> HashMap<(String, Option<Pos>), usize> {
        let mut groups: HashMap<(String, Option<Pos>), HashSet<&str>> = HashMap::new();
        for e in &self.entries {
            groups
                .entry((e.source_key(), e.pos))
                .or_default()
                .insert(e.sense_id.as_str());
        }
        groups.into_iter().map(|(k, v)| (k, v.len())).collect()
    }
}

fn normalize(text: &str, tools: &LanguageTools) -> Vec<String> {
    tools.lemmas(text)
}

fn all_stopwords(segment: &[String], stopwords: &StopwordSet) -> bool {
    segment.iter().all(|t| stopwords.contains(t))
}

/// Parses one dictionary line. `None` for blank and comment lines.
fn parse_dictionary_line(line: &str, path: &Path, line_no: usize) -> Result<Option<[String; 5]>> {
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() < 4 || fields.len() > 5 {
        return Err(Error::malformed(
            path,
            line_no,
            format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
        ));
    }
    for (i, name) in [(0, "source segment"), (1, "target segment"), (3, "sense id")] {
        if fields[i].is_empty() {
            return Err(Error::malformed(path, line_no, format!("empty {name}")));
        }
    }
    Ok(Some([
        fields[0].to_string(),
        fields[1].to_string(),
        fields[2].to_string(),
        fields[3].to_string(),
        fields.get(4).map(|s| s.to_string()).unwrap_or_default(),
    ]))
}

/// Loads a dictionary TSV: `source \t target \t pos \t sense_id [\t definition]`.
pub fn load_dictionary(path: &Path, langs: LangPair, tools: &PairTools) -> Result<Lexicon> {
    load_dictionary_with(path, langs, tools, DEFAULT_MAX_SEGMENT_LEN)
}

pub fn load_dictionary_with(path: &Path, langs: LangPair, tools: &PairTools, max_segment_len: usize) -> Result<Lexicon> {
    let mut lex = Lexicon::new(langs, max_segment_len);
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let Some([src, tgt, pos, sense_id, definition]) = parse_dictionary_line(line, path, i + 1)? else {
            continue;
        };
        let source_segment = normalize(&src, &tools.source);
        let target_segment = normalize(&tgt, &tools.target);
        if source_segment.is_empty() || target_segment.is_empty() {
            return Err(Error::malformed(path, i + 1, "segment has no tokens"));
        }
        if all_stopwords(&source_segment, &tools.source.stopwords) {
            log::warn!("{}:{}: dropping stopword-only entry `{src}`", path.display(), i + 1);
            lex.stats.stopword_only += 1;
            continue;
        }
        let entry = SensePair {
            source_segment,
            target_segment,
            source_text: src,
            target_text: tgt,
            pos: Pos::parse(&pos),
            sense_id,
            definition: Some(definition).filter(|d| !d.is_empty()),
            origin: Origin::Dictionary,
        };
        lex.insert(entry);
    }
    if lex.stats.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate entries ignored (first occurrence kept)",
            path.display(),
            lex.stats.duplicates
        );
    }
    Ok(lex)
}

/// Adds a two-column title list as entity senses.
pub fn merge_entities(mut lexicon: Lexicon, titles_path: &Path, tools: &PairTools) -> Result<Lexicon> {
    let before = lexicon.stats.too_long;
    for (i, line) in read_lines(titles_path)?.iter().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::malformed(
                titles_path,
                i + 1,
                "expected two non-empty tab-separated titles",
            ));
        }
        let source_segment = normalize(fields[0], &tools.source);
        let target_segment = normalize(fields[1], &tools.target);
        if source_segment.is_empty() || target_segment.is_empty() {
            return Err(Error::malformed(titles_path, i + 1, "title has no tokens"));
        }
        if all_stopwords(&source_segment, &tools.source.stopwords) {
            lexicon.stats.stopword_only += 1;
            continue;
        }
        lexicon.insert(SensePair {
            source_segment,
            target_segment,
            source_text: fields[0].to_string(),
            target_text: fields[1].to_string(),
            pos: None,
            sense_id: format!("entity:{}", i + 1),
            definition: None,
            origin: Origin::Entity,
        });
    }
    let dropped = lexicon.stats.too_long - before;
    if dropped > 0 {
        log::info!(
            "{}: dropped {dropped} titles longer than {} tokens",
            titles_path.display(),
            lexicon.max_segment_len
        );
    }
    Ok(lexicon)
}

/// Start/length spans of candidate segments in lookup order: all unigrams
/// left to right, then bigrams, then longer n-grams. Unigrams and bigrams
/// contain no stopword; longer spans (entity lookups only) must start and
/// end on a non-stopword and satisfy `extend_ok(start, len)`.
pub(crate) fn candidate_spans(
    n: usize,
    is_stop: impl Fn(usize) -> bool,
    max_len: usize,
    mut extend_ok: impl FnMut(usize, usize) -> bool,
    out: &mut Vec<(usize, usize)>,
) {
    out.clear();
    if max_len == 0 {
        return;
    }
    let stop: Vec<bool> = (0..n).map(&is_stop).collect();
    out.extend((0..n).filter(|&i| !stop[i]).map(|i| (i, 1)));
    if max_len >= 2 {
        out.extend(
            (0..n.saturating_sub(1))
                .filter(|&i| !stop[i] && !stop[i + 1])
                .map(|i| (i, 2)),
        );
    }
    for len in 3..=max_len.min(n) {
        for i in 0..=n - len {
            if !stop[i] && !stop[i + len - 1] && extend_ok(i, len) {
                out.push((i, len));
            }
        }
    }
}

/// Candidate segments of a lemmatized sentence as `(position, segment)`.
pub fn candidate_segments<S: AsRef<str>>(tokens: &[S], stopwords: &StopwordSet, max_len: usize) -> Vec<(usize, Vec<String>)> {
    let mut spans = Vec::new();
    candidate_spans(
        tokens.len(),
        |i| stopwords.contains(tokens[i].as_ref()),
        max_len,
        |_, _| true,
        &mut spans,
    );
    spans
        .into_iter()
        .map(|(i, l)| (i, tokens[i..i + l].iter().map(|t| t.as_ref().to_string()).collect()))
        .collect()
}
