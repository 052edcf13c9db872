//! Rank-frequency profiles and subset-size tables.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Corpus;
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::matcher::{subset_sizes, Analyzer, RetrieveOptions};

/// Number of top ranks counted as the head of a distribution.
pub const HEAD_RANKS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    /// (token, count) in rank order; rank is position + 1.
    pub table: Vec<(String, u64)>,
    pub unique_types: usize,
    pub total_tokens: u64,
}

impl FrequencyProfile {
    pub fn from_counts(counts: HashMap<String, u64>) -> Self {
        let mut table: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        table.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total_tokens = table.iter().map(|(_, c)| c).sum();
        Self {
            unique_types: table.len(),
            table,
            total_tokens,
        }
    }

    /// Share of all tokens that fall in the first `ranks` ranks.
    pub fn head_mass(&self, ranks: usize) -> f64 {
        if self.total_tokens == 0 {
            return 0.0;
        }
        let head: u64 = self.table.iter().take(ranks).map(|(_, c)| c).sum();
        head as f64 / self.total_tokens as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        write_row(&mut w, path, &["rank", "token", "count"])?;
        for (i, (token, count)) in self.table.iter().enumerate() {
            write_row(&mut w, path, &[&(i + 1).to_string(), token, &count.to_string()])?;
        }
        flush(w, path)
    }
}

/// Counts tokens produced by `tokenize` over all sentences.
pub fn frequency_profile<S, F>(sentences: &[S], tokenize: F) -> FrequencyProfile
where
    S: AsRef<str> + Sync,
    F: Fn(&str) -> Vec<String> + Sync,
{
    let counts = sentences
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, s| {
            for t in tokenize(s.as_ref()) {
                *acc.entry(t).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    FrequencyProfile::from_counts(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub unique_types: usize,
    pub total_tokens: u64,
    pub head_mass: f64,
}

impl ProfileSummary {
    fn of(p: &FrequencyProfile) -> Self {
        Self {
            unique_types: p.unique_types,
            total_tokens: p.total_tokens,
            head_mass: p.head_mass(HEAD_RANKS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub a: ProfileSummary,
    pub b: ProfileSummary,
}

pub fn compare_profiles(a: &FrequencyProfile, b: &FrequencyProfile) -> ProfileComparison {
    ProfileComparison {
        a: ProfileSummary::of(a),
        b: ProfileSummary::of(b),
    }
}

/// `rank,log10_a,log10_b`; a column is blank past the end of its profile.
pub fn write_rank_log_csv(a: &FrequencyProfile, b: &FrequencyProfile, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &["rank", "log10_freq_a", "log10_freq_b"])?;
    let log = |p: &FrequencyProfile, i: usize| {
        p.table
            .get(i)
            .map(|(_, c)| format!("{:.6}", (*c as f64).log10()))
            .unwrap_or_default()
    };
    for i in 0..a.table.len().max(b.table.len()) {
        write_row(&mut w, path, &[&(i + 1).to_string(), &log(a, i), &log(b, i)])?;
    }
    flush(w, path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSizeTable {
    pub raw_size: usize,
    pub rows: Vec<(u32, usize)>,
}

impl SubsetSizeTable {
    /// `k,subset_size`, with the unfiltered size on a `raw` row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        write_row(&mut w, path, &["k", "subset_size"])?;
        write_row(&mut w, path, &["raw", &self.raw_size.to_string()])?;
        for (k, n) in &self.rows {
            write_row(&mut w, path, &[&k.to_string(), &n.to_string()])?;
        }
        flush(w, path)
    }
}

pub fn subset_size_table(
    corpus: &Corpus,
    lexicon: &Lexicon,
    ks: &[i64],
    analyzer: &Analyzer<'_>,
    opts: RetrieveOptions,
) -> Result<SubsetSizeTable> {
    if ks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Parameter("k values must be sorted ascending".into()));
    }
    Ok(SubsetSizeTable {
        raw_size: corpus.len(),
        rows: subset_sizes(corpus, lexicon, ks, analyzer, opts)?,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_row(w: &mut csv::Writer<std::fs::File>, path: &Path, row: &[&str]) -> Result<()> {
    w.write_record(row).map_err(|e| csv_err(path, e))
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}
