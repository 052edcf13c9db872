//! Reading, writing and deduplicating line-aligned parallel corpora.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::LangPair;

/// One aligned sentence pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    /// 0-based line number in the files the pair was read from.
    pub index: usize,
    pub source_text: String,
    pub target_text: String,
    /// Unit-scale quality estimate, if one was attached.
    pub quality_score: Option<f64>,
}

impl SentencePair {
    pub fn new(index: usize, source_text: impl Into<String>, target_text: impl Into<String>) -> Self {
        Self {
            index,
            source_text: source_text.into(),
            target_text: target_text.into(),
            quality_score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.quality_score = Some(score);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub pairs: Vec<SentencePair>,
    pub langs: LangPair,
    /// Number of lines in each of the files the corpus came from. Sidecar
    /// files (scores, lemmas) are aligned to these lines.
    pub line_count: usize,
    /// Lines dropped at load time because one side was blank.
    pub skipped_blank: usize,
}

impl Corpus {
    /// Builds a corpus from in-memory pairs; `line_count` is taken to be one
    /// past the largest index.
    pub fn from_pairs(pairs: Vec<SentencePair>, langs: LangPair) -> Self {
        let line_count = pairs.iter().map(|p| p.index + 1).max().unwrap_or(0);
        Self {
            pairs,
            langs,
            line_count,
            skipped_blank: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same corpus metadata with a different pair list.
    pub fn with_pairs(&self, pairs: Vec<SentencePair>) -> Self {
        Self {
            pairs,
            langs: self.langs.clone(),
            line_count: self.line_count,
            skipped_blank: self.skipped_blank,
        }
    }
}

/// Scale of the numbers in a score sidecar file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScale {
    Unit,
    #[default]
    Percent,
}

impl ScoreScale {
    fn divisor(self) -> f64 {
        match self {
            ScoreScale::Unit => 1.0,
            ScoreScale::Percent => 100.0,
        }
    }
}

/// What counts as a duplicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupMode {
    /// Same normalized source and same normalized target.
    #[default]
    Pair,
    /// Same normalized source.
    Source,
    /// Same normalized target.
    Target,
}

/// Reads a text file and splits it into lines, dropping one trailing
/// newline and any `\r` before each `\n`.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(split_lines(&text))
}

fn split_lines(text: &str) -> Vec<String> {
    if text.is_empty() {
        return Vec::new();
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect()
}

pub fn load_corpus(source_path: &Path, target_path: &Path, langs: LangPair) -> Result<Corpus> {
    let src = read_lines(source_path)?;
    let tgt = read_lines(target_path)?;
    if src.len() != tgt.len() {
        return Err(Error::Alignment {
            source_lines: src.len(),
            target_lines: tgt.len(),
        });
    }
    let line_count = src.len();
    let mut skipped_blank = 0;
    let pairs = src
        .into_iter()
        .zip(tgt)
        .enumerate()
        .filter_map(|(index, (s, t))| {
            if s.trim().is_empty() || t.trim().is_empty() {
                skipped_blank += 1;
                None
            } else {
                Some(SentencePair::new(index, s, t))
            }
        })
        .collect();
    if skipped_blank > 0 {
        log::warn!(
            "{}: skipped {skipped_blank} line(s) with a blank side",
            source_path.display()
        );
    }
    Ok(Corpus {
        pairs,
        langs,
        line_count,
        skipped_blank,
    })
}

/// Parses a score sidecar: one decimal literal per line.
pub fn read_scores(path: &Path, scale: ScoreScale) -> Result<Vec<f64>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| Error::malformed(path, i + 1, format!("unparseable score `{line}`")))?;
            if !v.is_finite() {
                return Err(Error::malformed(path, i + 1, format!("non-finite score `{line}`")));
            }
            Ok(v / scale.divisor())
        })
        .collect()
}

pub fn attach_scores(mut corpus: Corpus, scores_path: &Path, scale: ScoreScale) -> Result<Corpus> {
    let scores = read_scores(scores_path, scale)?;
    if scores.len() != corpus.line_count {
        return Err(Error::CountMismatch {
            path: scores_path.to_path_buf(),
            expected: corpus.line_count,
            found: scores.len(),
        });
    }
    for pair in &mut corpus.pairs {
        pair.quality_score = Some(scores[pair.index]);
    }
    Ok(corpus)
}

/// Trims and collapses internal whitespace runs to one space.
pub fn normalize_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, w) in s.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// `true` for every pair that is the first occurrence of its dedup key.
pub fn first_occurrence_mask(pairs: &[SentencePair], mode: DedupMode) -> Vec<bool> {
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(pairs.len());
    pairs
        .iter()
        .map(|p| {
            let key = match mode {
                DedupMode::Pair => (normalize_ws(&p.source_text), normalize_ws(&p.target_text)),
                DedupMode::Source => (normalize_ws(&p.source_text), String::new()),
                DedupMode::Target => (String::new(), normalize_ws(&p.target_text)),
            };
            seen.insert(key)
        })
        .collect()
}

/// Keeps the first occurrence of every normalized (source, target) pair.
pub fn deduplicate(corpus: &Corpus) -> Corpus {
    deduplicate_by(corpus, DedupMode::Pair)
}

pub fn deduplicate_by(corpus: &Corpus, mode: DedupMode) -> Corpus {
    let mask = first_occurrence_mask(&corpus.pairs, mode);
    let pairs = corpus
        .pairs
        .iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|(p, _)| p.clone())
        .collect();
    corpus.with_pairs(pairs)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `lines` one per line with `\n` endings.
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut w = create(path)?;
    for line in lines {
        w.write_all(line.as_ref().as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus(pairs: &[SentencePair], source_path: &Path, target_path: &Path) -> Result<()> {
    write_lines(source_path, pairs.iter().map(|p| p.source_text.as_str()))?;
    write_lines(target_path, pairs.iter().map(|p| p.target_text.as_str()))
}

/// Writes unit-scale scores, one per pair. Pairs without a score get an
/// empty line, so only call this on fully scored corpora.
pub fn write_scores(pairs: &[SentencePair], path: &Path) -> Result<()> {
    write_lines(
        path,
        pairs
            .iter()
            .map(|p| p.quality_score.map(|s| s.to_string()).unwrap_or_default()),
    )
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::malformed(path, i + 1, e.to_string())))
        .collect()
}

/// Loads a lemma sidecar (one whitespace-joined lemma sequence per corpus
/// line).
pub fn load_lemma_sidecar(path: &Path, expected_lines: usize) -> Result<Vec<Vec<String>>> {
    let lines = read_lines(path)?;
    if lines.len() != expected_lines {
        return Err(Error::CountMismatch {
            path: path.to_path_buf(),
            expected: expected_lines,
            found: lines.len(),
        });
    }
    Ok(lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_lowercase).collect())
        .collect())
}
