//! Instruction-tuning records built from the retrieved and synthesized pairs.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::GeneratedPair;
use crate::corpus_io::{write_jsonl, Corpus};
use crate::error::{Error, Result};
use crate::matcher::MatchRecord;
use crate::text::{contains_contiguous, fill_placeholders, language_name, LangPair, PairTools};

/// A source/target pair in corpus orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SftPair {
    pub source: String,
    pub target: String,
}

impl SftPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Retrieved pairs followed by the valid synthesized ones.
pub fn union_pairs(subset: &Corpus, augmented: &[GeneratedPair]) -> Vec<SftPair> {
    subset
        .pairs
        .iter()
        .map(|p| SftPair::new(&p.source_text, &p.target_text))
        .chain(
            augmented
                .iter()
                .filter(|g| g.valid)
                .map(|g| SftPair::new(&g.source_text, &g.target_text)),
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub instruction: String,
    pub input: String,
    pub output: String,
    /// (segment in `input`, segment in `output`).
    #[serde(skip)]
    pub constraints: Vec<(String, String)>,
    #[serde(skip, default = "default_direction")]
    pub direction: LangPair,
}

fn default_direction() -> LangPair {
    LangPair::new("", "")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    /// Instruction lists keyed by direction (`"en-zh"`), with `"*"` as the
    /// fallback. `{src}` and `{tgt}` expand to language names.
    pub general_templates: BTreeMap<String, Vec<String>>,
    /// Must contain `{constraints}`; also accepts `{src}` and `{tgt}`.
    pub constrained_template: String,
    pub max_constrained_per_direction: usize,
    pub max_constraints_per_sample: usize,
    /// Taken from the pipeline seed rather than the `[sft]` section.
    #[serde(skip)]
    pub rng_seed: u64,
    /// Directions to emit. Empty means the corpus direction and its reverse.
    pub directions: Vec<LangPair>,
    /// Drop the general sample of a pair that received a constrained one.
    pub constrained_replaces_general: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        let mut general_templates = BTreeMap::new();
        general_templates.insert(
            "*".to_string(),
            vec![
                "Translate the following sentence from {src} to {tgt}.".to_string(),
                "Translate the sentences from {src} to {tgt}.".to_string(),
                "Translate the following sentence to {tgt}.".to_string(),
            ],
        );
        Self {
            general_templates,
            constrained_template: "{constraints} Translate the following sentence from {src} to {tgt} using the given reference translations.".to_string(),
            max_constrained_per_direction: 10_000,
            max_constraints_per_sample: 3,
            rng_seed: 42,
            directions: Vec::new(),
            constrained_replaces_general: false,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.constrained_template.contains("{constraints}") {
            return Err(Error::Config("sft.constrained_template must contain {constraints}".into()));
        }
        for (dir, list) in &self.general_templates {
            if list.is_empty() {
                return Err(Error::Config(format!("sft.general_templates.\"{dir}\" is empty")));
            }
        }
        Ok(())
    }

    pub fn directions_for(&self, corpus_langs: &LangPair) -> Vec<LangPair> {
        if self.directions.is_empty() {
            vec![corpus_langs.clone(), corpus_langs.reversed()]
        } else {
            self.directions.clone()
        }
    }

    fn templates_for(&self, direction: &LangPair) -> Result<&[String]> {
        self.general_templates
            .get(&direction.to_string())
            .or_else(|| self.general_templates.get("*"))
            .filter(|l| !l.is_empty())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("no general template for direction {direction}")))
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn direction_rng(seed: u64, direction: &LangPair, salt: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&format!("{direction}/{salt}")))
}

fn expand(template: &str, direction: &LangPair, constraints: &str) -> String {
    let src = language_name(&direction.source);
    let tgt = language_name(&direction.target);
    fill_placeholders(template, &[("src", &src), ("tgt", &tgt), ("constraints", constraints)])
}

/// `Some(false)` keeps the corpus orientation, `Some(true)` swaps sides.
fn orientation(direction: &LangPair, corpus_langs: &LangPair) -> Result<bool> {
    if direction == corpus_langs {
        Ok(false)
    } else if *direction == corpus_langs.reversed() {
        Ok(true)
    } else {
        Err(Error::Config(format!(
            "direction {direction} does not match corpus languages {corpus_langs}"
        )))
    }
}

/// One sample per pair; instructions cycle through the direction's
/// templates starting at a seeded offset.
pub fn build_general(
    pairs: &[SftPair],
    direction: &LangPair,
    corpus_langs: &LangPair,
    cfg: &BuildConfig,
) -> Result<Vec<InstructionSample>> {
    let swap = orientation(direction, corpus_langs)?;
    let templates = cfg.templates_for(direction)?;
    let offset = direction_rng(cfg.rng_seed, direction, "general").gen_range(0..templates.len());
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (input, output) = if swap { (&p.target, &p.source) } else { (&p.source, &p.target) };
            InstructionSample {
                instruction: expand(&templates[(offset + i) % templates.len()], direction, ""),
                input: input.clone(),
                output: output.clone(),
                constraints: Vec::new(),
                direction: direction.clone(),
            }
        })
        .collect())
}

pub fn constraint_clause(constraints: &[(String, String)]) -> String {
    constraints
        .iter()
        .map(|(s, t)| format!("\"{s}\" means \"{t}\"."))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whether every constraint occurs, lemma by lemma, in its own side.
/// `tools` must be oriented like the sample.
pub fn constraints_hold(sample: &InstructionSample, tools: &PairTools) -> bool {
    let input = tools.source.lemmas(&sample.input);
    let output = tools.target.lemmas(&sample.output);
    sample.constraints.iter().all(|(s, t)| {
        let s = tools.source.lemmas(s);
        let t = tools.target.lemmas(t);
        !s.is_empty() && !t.is_empty() && contains_contiguous(&input, &s) && contains_contiguous(&output, &t)
    })
}

/// Constrained samples for one direction. `subset` and `records` come from
/// the same retrieval and must be aligned; `tools` is in corpus
/// orientation.
pub fn build_constrained(
    subset: &Corpus,
    records: &[MatchRecord],
    direction: &LangPair,
    tools: &PairTools,
    cfg: &BuildConfig,
) -> Result<Vec<InstructionSample>> {
    if records.len() != subset.pairs.len()
        || subset.pairs.iter().zip(records).any(|(p, r)| p.index != r.pair_index)
    {
        return Err(Error::Parameter("match records do not align with the subset".into()));
    }
    let swap = orientation(direction, &subset.langs)?;
    let oriented = if swap { tools.reversed() } else { tools.clone() };
    let eligible: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.matched.is_empty())
        .map(|(i, _)| i)
        .collect();
    let mut rng = direction_rng(cfg.rng_seed, direction, "constrained");
    let take = eligible.len().min(cfg.max_constrained_per_direction);
    let mut picked: Vec<usize> = sample(&mut rng, eligible.len(), take).into_iter().map(|i| eligible[i]).collect();
    picked.sort_unstable();

    let mut out = Vec::with_capacity(picked.len());
    for i in picked {
        let pair = &subset.pairs[i];
        let mut seen = HashSet::new();
        let candidates: Vec<(String, String)> = records[i]
            .matched
            .iter()
            .map(|m| (m.surface.clone(), m.target_text.clone()))
            .filter(|c| seen.insert(c.clone()))
            .collect();
        let n = candidates.len().min(cfg.max_constraints_per_sample);
        let mut chosen: Vec<usize> = sample(&mut rng, candidates.len(), n).into_vec();
        chosen.sort_unstable();
        let constraints: Vec<(String, String)> = chosen
            .into_iter()
            .map(|c| {
                let (s, t) = candidates[c].clone();
                if swap { (t, s) } else { (s, t) }
            })
            .collect();
        if constraints.is_empty() {
            continue;
        }
        let (input, output) = if swap {
            (&pair.target_text, &pair.source_text)
        } else {
            (&pair.source_text, &pair.target_text)
        };
        let sample = InstructionSample {
            instruction: expand(&cfg.constrained_template, direction, &constraint_clause(&constraints)),
            input: input.clone(),
            output: output.clone(),
            constraints,
            direction: direction.clone(),
        };
        if constraints_hold(&sample, &oriented) {
            out.push(sample);
        } else {
            log::warn!("pair {}: constraint failed containment check, skipped", pair.index);
        }
    }
    Ok(out)
}

/// General and constrained samples for every configured direction.
pub fn build_all(
    subset: &Corpus,
    records: &[MatchRecord],
    augmented: &[GeneratedPair],
    tools: &PairTools,
    cfg: &BuildConfig,
) -> Result<Vec<InstructionSample>> {
    cfg.validate()?;
    let mut samples = Vec::new();
    for direction in cfg.directions_for(&subset.langs) {
        let constrained = build_constrained(subset, records, &direction, tools, cfg)?;
        let pairs = if cfg.constrained_replaces_general {
            let swap = orientation(&direction, &subset.langs)?;
            let taken: HashSet<(&str, &str)> = constrained
                .iter()
                .map(|s| if swap { (s.output.as_str(), s.input.as_str()) } else { (s.input.as_str(), s.output.as_str()) })
                .collect();
            union_pairs(subset, augmented)
                .into_iter()
                .filter(|p| !taken.contains(&(p.source.as_str(), p.target.as_str())))
                .collect()
        } else {
            union_pairs(subset, augmented)
        };
        samples.extend(build_general(&pairs, &direction, &subset.langs, cfg)?);
        samples.extend(constrained);
    }
    Ok(samples)
}

/// Writes the samples as JSONL in an order shuffled by `seed`.
pub fn emit_dataset(samples: &[InstructionSample], path: &Path, seed: u64) -> Result<()> {
    let mut order: Vec<&InstructionSample> = samples.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    write_jsonl(path, order)
}
