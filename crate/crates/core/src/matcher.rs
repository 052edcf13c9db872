//! Dictionary-pivoted retrieval of a sense-balanced subset.
//!
//! The corpus is ranked by quality estimate and then traversed once. For
//! every candidate source segment of a sentence, each dictionary sense with
//! that source segment is counted if it has been matched fewer than `k`
//! times so far and its target segment occurs (as a contiguous lemma run)
//! in the target sentence. A sentence is kept when at least one sense was
//! counted while processing it.
//!
//! Lemmatization and candidate lookup are pure per sentence and run in
//! parallel ahead of the fold; count updates are applied strictly in ranked
//! order, so results are independent of the thread count.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{Corpus, SentencePair};
use crate::error::{Error, Result};
use crate::lexicon::{candidate_spans, Lexicon, Origin, Pos, SensePair};
use crate::text::{contains_contiguous, PairTools};

const CHUNK: usize = 8192;

/// Per-sense match counter, capped at `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    counts: Vec<u32>,
    k: u32,
}

impl CountTable {
    pub fn new(senses: usize, k: u32) -> Self {
        Self {
            counts: vec![0; senses],
            k,
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn get(&self, entry: usize) -> u32 {
        self.counts[entry]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    fn has_room(&self, entry: usize) -> bool {
        self.counts[entry] < self.k
    }

    fn increment(&mut self, entry: usize) {
        debug_assert!(self.counts[entry] < self.k);
        self.counts[entry] += 1;
    }
}

/// One sense counted while processing a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedSense {
    /// Position of the entry in the lexicon it was matched against.
    pub entry: usize,
    pub sense_id: String,
    /// Source lemma key (space-joined).
    pub source: String,
    /// Target lemma key (space-joined).
    pub target: String,
    /// Target segment as written in the dictionary.
    pub target_text: String,
    /// Token position of the segment in the source sentence.
    pub position: usize,
    /// Source tokens at that position, space-joined.
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub pair_index: usize,
    pub matched: Vec<MatchedSense>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseRef {
    pub sense_id: String,
    pub source: String,
    pub target: String,
    pub origin: Origin,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pos: Option<Pos>,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub k: u32,
    pub lexicon_size: usize,
    pub subset_size: usize,
    pub total_increments: u64,
    /// Final count value -> number of senses with that count.
    pub histogram: BTreeMap<u32, usize>,
    pub covered: Vec<SenseRef>,
    pub uncovered: Vec<SenseRef>,
}

impl CoverageReport {
    pub fn build(lexicon: &Lexicon, table: &CountTable, subset_size: usize) -> Self {
        let mut histogram = BTreeMap::new();
        let mut covered = Vec::new();
        let mut uncovered = Vec::new();
        let mut total = 0u64;
        for (i, e) in lexicon.entries().iter().enumerate() {
            let count = table.get(i);
            total += count as u64;
            *histogram.entry(count).or_insert(0) += 1;
            let r = SenseRef {
                sense_id: e.sense_id.clone(),
                source: e.source_key(),
                target: e.target_key(),
                origin: e.origin,
                pos: e.pos,
                count,
            };
            if count > 0 {
                covered.push(r);
            } else {
                uncovered.push(r);
            }
        }
        Self {
            k: table.k(),
            lexicon_size: lexicon.len(),
            subset_size,
            total_increments: total,
            histogram,
            covered,
            uncovered,
        }
    }
}

/// Where sentence lemmas come from: the language tools, or pre-computed
/// sidecar sequences indexed by corpus line.
#[derive(Debug, Clone, Copy)]
pub struct Analyzer<'a> {
    pub tools: &'a PairTools,
    pub source_lemmas: Option<&'a [Vec<String>]>,
    pub target_lemmas: Option<&'a [Vec<String>]>,
}

impl<'a> Analyzer<'a> {
    pub fn new(tools: &'a PairTools) -> Self {
        Self {
            tools,
            source_lemmas: None,
            target_lemmas: None,
        }
    }

    /// Surface tokens and lemmas of the source side.
    pub fn source(&self, pair: &SentencePair) -> (Vec<String>, Vec<String>) {
        match self.source_lemmas.and_then(|s| s.get(pair.index)) {
            Some(l) => (l.clone(), l.clone()),
            None => self.tools.source.analyze(&pair.source_text),
        }
    }

    pub fn target(&self, pair: &SentencePair) -> Vec<String> {
        match self.target_lemmas.and_then(|s| s.get(pair.index)) {
            Some(l) => l.clone(),
            None => self.tools.target.lemmas(&pair.target_text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrieveOptions {
    /// Rank by quality score before traversal.
    pub rank: bool,
}

impl Default for RetrieveOptions {
    fn default() -> Self {
        Self { rank: true }
    }
}

/// Orders by quality score descending, ties by original index; unscored
/// pairs go last in index order.
pub fn rank_corpus(corpus: &Corpus) -> Corpus {
    let mut pairs = corpus.pairs.clone();
    pairs.sort_by(rank_order);
    corpus.with_pairs(pairs)
}

fn rank_order(a: &SentencePair, b: &SentencePair) -> Ordering {
    match (a.quality_score, b.quality_score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    }
}

struct Hit<'l> {
    position: usize,
    len: usize,
    entries: &'l [u32],
}

struct Prepared<'l> {
    surface: Vec<String>,
    hits: Vec<Hit<'l>>,
    target: Vec<u32>,
}

fn prepare<'l>(pair: &SentencePair, lexicon: &'l Lexicon, analyzer: &Analyzer<'_>) -> Prepared<'l> {
    let (surface, lemmas) = analyzer.source(pair);
    let stop = &analyzer.tools.source.stopwords;
    let ids: Vec<u32> = lemmas.iter().map(|l| lexicon.token_id(l)).collect();
    let mut spans = Vec::new();
    candidate_spans(
        ids.len(),
        |i| stop.contains(&lemmas[i]),
        lexicon.longest_source(),
        |i, len| lexicon.is_long_prefix(&ids[i..i + len]),
        &mut spans,
    );
    let hits = spans
        .into_iter()
        .filter_map(|(position, len)| {
            lexicon
                .ids_for_source(&ids[position..position + len])
                .map(|entries| Hit {
                    position,
                    len,
                    entries,
                })
        })
        .collect();
    let target = analyzer
        .target(pair)
        .iter()
        .map(|l| lexicon.token_id(l))
        .collect();
    Prepared {
        surface,
        hits,
        target,
    }
}

fn apply(pair_index: usize, prepared: &Prepared<'_>, lexicon: &Lexicon, table: &mut CountTable) -> MatchRecord {
    let mut matched = Vec::new();
    for hit in &prepared.hits {
        for &e in hit.entries {
            let e = e as usize;
            if table.has_room(e) && contains_contiguous(&prepared.target, lexicon.target_ids(e)) {
                table.increment(e);
                let sense = &lexicon.entries()[e];
                let end = (hit.position + hit.len).min(prepared.surface.len());
                matched.push(MatchedSense {
                    entry: e,
                    sense_id: sense.sense_id.clone(),
                    source: sense.source_key(),
                    target: sense.target_key(),
                    target_text: sense.target_text.clone(),
                    position: hit.position,
                    surface: prepared.surface[hit.position..end].join(" "),
                });
            }
        }
    }
    MatchRecord {
        pair_index,
        selected: !matched.is_empty(),
        matched,
    }
}

// Selection only needs to know whether anything was counted.
fn apply_count_only(prepared: &Prepared<'_>, lexicon: &Lexicon, table: &mut CountTable) -> bool {
    let mut found = false;
    for hit in &prepared.hits {
        for &e in hit.entries {
            let e = e as usize;
            if table.has_room(e) && contains_contiguous(&prepared.target, lexicon.target_ids(e)) {
                table.increment(e);
                found = true;
            }
        }
    }
    found
}

/// Matches one sentence pair, updating `table` in place.
pub fn match_sentence(pair: &SentencePair, lexicon: &Lexicon, table: &mut CountTable, analyzer: &Analyzer<'_>) -> MatchRecord {
    let prepared = prepare(pair, lexicon, analyzer);
    apply(pair.index, &prepared, lexicon, table)
}

#[derive(Debug, Clone)]
pub struct Retrieval {
    /// Selected pairs in traversal order.
    pub subset: Corpus,
    pub report: CoverageReport,
    /// Records of the selected pairs, aligned with `subset.pairs`.
    pub records: Vec<MatchRecord>,
    pub counts: CountTable,
}

fn check_k(k: i64) -> Result<u32> {
    u32::try_from(k).map_err(|_| Error::Parameter(format!("k must be a non-negative 32-bit integer, got {k}")))
}

fn traversal_order(corpus: &Corpus, opts: RetrieveOptions) -> Vec<&SentencePair> {
    let mut order: Vec<&SentencePair> = corpus.pairs.iter().collect();
    if opts.rank {
        order.sort_by(|a, b| rank_order(a, b));
    }
    order
}

pub fn retrieve(corpus: &Corpus, lexicon: &Lexicon, k: i64, analyzer: &Analyzer<'_>, opts: RetrieveOptions) -> Result<Retrieval> {
    let k = check_k(k)?;
    let mut table = CountTable::new(lexicon.len(), k);
    let mut selected = Vec::new();
    let mut records = Vec::new();
    let order = traversal_order(corpus, opts);
    if k > 0 && !lexicon.is_empty() {
        for chunk in order.chunks(CHUNK) {
            let prepared: Vec<Prepared<'_>> = chunk.par_iter().map(|p| prepare(p, lexicon, analyzer)).collect();
            for (pair, prep) in chunk.iter().zip(&prepared) {
                let record = apply(pair.index, prep, lexicon, &mut table);
                if record.selected {
                    selected.push((*pair).clone());
                    records.push(record);
                }
            }
        }
    }
    let report = CoverageReport::build(lexicon, &table, selected.len());
    Ok(Retrieval {
        subset: corpus.with_pairs(selected),
        report,
        records,
        counts: table,
    })
}

/// Subset size for each `k` from a single traversal.
pub fn subset_sizes(corpus: &Corpus, lexicon: &Lexicon, ks: &[i64], analyzer: &Analyzer<'_>, opts: RetrieveOptions) -> Result<Vec<(u32, usize)>> {
    let ks: Vec<u32> = ks.iter().map(|&k| check_k(k)).collect::<Result<_>>()?;
    let mut tables: Vec<CountTable> = ks.iter().map(|&k| CountTable::new(lexicon.len(), k)).collect();
    let mut sizes = vec![0usize; ks.len()];
    let order = traversal_order(corpus, opts);
    if !lexicon.is_empty() && ks.iter().any(|&k| k > 0) {
        for chunk in order.chunks(CHUNK) {
            let prepared: Vec<Prepared<'_>> = chunk.par_iter().map(|p| prepare(p, lexicon, analyzer)).collect();
            for prep in &prepared {
                for (table, size) in tables.iter_mut().zip(sizes.iter_mut()) {
                    if apply_count_only(prep, lexicon, table) {
                        *size += 1;
                    }
                }
            }
        }
    }
    Ok(ks.into_iter().zip(sizes).collect())
}

/// Uncovered noun and verb senses whose (source segment, POS) group has
/// more than three distinct sense ids, sorted by source segment then sense
/// id.
pub fn coverage_gaps(report: &CoverageReport, lexicon: &Lexicon) -> Vec<SensePair> {
    let groups = lexicon.senses_per_group();
    let mut gaps: Vec<SensePair> = report
        .uncovered
        .iter()
        .filter_map(|r| lexicon.find(&r.source, &r.target, &r.sense_id))
        .map(|i| &lexicon.entries()[i])
        .filter(|e| matches!(e.pos, Some(Pos::Noun) | Some(Pos::Verb)))
        .filter(|e| groups.get(&(e.source_key(), e.pos)).copied().unwrap_or(0) > 3)
        .cloned()
        .collect();
    gaps.sort_by(|a, b| {
        a.source_key()
            .cmp(&b.source_key())
            .then_with(|| a.sense_id.cmp(&b.sense_id))
            .then_with(|| a.target_key().cmp(&b.target_key()))
    });
    gaps
}
