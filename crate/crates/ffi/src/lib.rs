//! C interface to lexmatcher.
//!
//! Objects are exposed as opaque handles created by `lm_*_load` style
//! functions and released with the matching `lm_*_free`. Every fallible call
//! returns an [`LmStatus`]; on failure a description is available from
//! [`lm_last_error_message`] on the same thread. Strings returned to the
//! caller are owned by the caller and must be released with
//! [`lm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lexmatcher::corpus_io::{self, ScoreScale};
use lexmatcher::filter::{run_filters, FilterConfig};
use lexmatcher::lexicon::{load_dictionary_with, merge_entities};
use lexmatcher::matcher::{retrieve, Analyzer, RetrieveOptions};
use lexmatcher::text::{LangPair, PairTools};
use lexmatcher::{Corpus, Error, Lexicon, Retrieval};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read or written.
    Io = 3,
    /// An input file was malformed or the corpus sides were misaligned.
    MalformedInput = 4,
    /// A parameter or configuration value was rejected.
    InvalidArgument = 5,
    /// The library panicked; the handle arguments are left untouched.
    Panic = 6,
    Internal = 7,
}

/// Scale of the numbers in a score file.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmScoreScale {
    /// Scores in [0, 1].
    Unit = 0,
    /// Scores in [0, 100].
    Percent = 1,
}

/// A parallel corpus together with the language tools for its pair.
pub struct LmCorpus {
    corpus: Corpus,
    tools: PairTools,
}

pub struct LmLexicon {
    lexicon: Lexicon,
}

/// The result of one retrieval run.
pub struct LmRetrieval {
    retrieval: Retrieval,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => LmStatus::Io,
            Error::Alignment { .. } | Error::CountMismatch { .. } | Error::Malformed { .. } | Error::Json(_) => {
                LmStatus::MalformedInput
            }
            Error::Parameter(_) | Error::Config(_) => LmStatus::InvalidArgument,
            _ => LmStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            LmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LmStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    str_arg(p, what).map(PathBuf::from)
}

unsafe fn langs_arg(p: *const c_char) -> Result<LangPair, Failure> {
    let s = str_arg(p, "langs")?;
    s.parse::<LangPair>().map_err(Failure::from)
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|e| Failure(LmStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn json_failure(e: serde_json::Error) -> Failure {
    Failure::from(Error::from(e))
}

/// Message describing the most recent failure on this thread, or null if
/// none occurred. The pointer stays valid until the next failing call on
/// the same thread; do not free it.
#[no_mangle]
pub extern "C" fn lm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn lm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a line-aligned corpus. `langs` is a pair such as `"en-zh"`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be null or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn lm_corpus_load(
    source_path: *const c_char,
    target_path: *const c_char,
    langs: *const c_char,
    out: *mut *mut LmCorpus,
) -> LmStatus {
    guard(|| {
        let source = path_arg(source_path, "source_path")?;
        let target = path_arg(target_path, "target_path")?;
        let langs = langs_arg(langs)?;
        let tools = PairTools::for_langs(&langs);
        let corpus = corpus_io::load_corpus(&source, &target, langs)?;
        out_arg(out, LmCorpus { corpus, tools })
    })
}

/// Attaches one quality score per line from `scores_path`.
///
/// # Safety
/// `corpus` must be null or a live corpus handle; `scores_path` must be
/// null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lm_corpus_attach_scores(
    corpus: *mut LmCorpus,
    scores_path: *const c_char,
    scale: LmScoreScale,
) -> LmStatus {
    guard(|| {
        let handle = handle_mut(corpus, "corpus")?;
        let path = path_arg(scores_path, "scores_path")?;
        let scale = match scale {
            LmScoreScale::Unit => ScoreScale::Unit,
            LmScoreScale::Percent => ScoreScale::Percent,
        };
        handle.corpus = corpus_io::attach_scores(handle.corpus.clone(), &path, scale)?;
        Ok(())
    })
}

/// Number of sentence pairs in the corpus.
///
/// # Safety
/// `corpus` must be null or a live corpus handle; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_corpus_len(corpus: *const LmCorpus, out: *mut usize) -> LmStatus {
    guard(|| {
        let n = handle(corpus, "corpus")?.corpus.len();
        *handle_mut(out, "out")? = n;
        Ok(())
    })
}

/// Applies the filter pipeline and returns the retained pairs as a new
/// corpus. `config_json` may be null for the defaults. If `report_json` is
/// not null it receives the filter report as JSON.
///
/// # Safety
/// `corpus` must be null or a live corpus handle; `config_json` must be
/// null or NUL-terminated; `out` and `report_json` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_corpus_filter(
    corpus: *const LmCorpus,
    config_json: *const c_char,
    out: *mut *mut LmCorpus,
    report_json: *mut *mut c_char,
) -> LmStatus {
    guard(|| {
        let handle = handle(corpus, "corpus")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: FilterConfig = if config_json.is_null() {
            FilterConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)
                .map_err(|e| Failure(LmStatus::InvalidArgument, format!("filter config: {e}")))?
        };
        cfg.validate()?;
        let (kept, report) = run_filters(&handle.corpus, &cfg, &handle.tools);
        if !report_json.is_null() {
            write_string(report_json, serde_json::to_string(&report).map_err(json_failure)?)?;
        }
        out_arg(
            out,
            LmCorpus {
                corpus: kept,
                tools: handle.tools.clone(),
            },
        )
    })
}

/// # Safety
/// `corpus` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn lm_corpus_free(corpus: *mut LmCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Loads a tab-separated bilingual dictionary. `max_segment_len` bounds the
/// number of source tokens of entity entries merged later; pass 0 for the
/// default of 8.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_lexicon_load(
    dictionary_path: *const c_char,
    langs: *const c_char,
    max_segment_len: usize,
    out: *mut *mut LmLexicon,
) -> LmStatus {
    guard(|| {
        let path = path_arg(dictionary_path, "dictionary_path")?;
        let langs = langs_arg(langs)?;
        let tools = PairTools::for_langs(&langs);
        let max = if max_segment_len == 0 { 8 } else { max_segment_len };
        let lexicon = load_dictionary_with(&path, langs, &tools, max)?;
        out_arg(out, LmLexicon { lexicon })
    })
}

/// Merges aligned entity titles (`source<TAB>target` per line).
///
/// # Safety
/// `lexicon` must be null or a live lexicon handle; `titles_path` must be
/// null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lm_lexicon_merge_entities(lexicon: *mut LmLexicon, titles_path: *const c_char) -> LmStatus {
    guard(|| {
        let handle = handle_mut(lexicon, "lexicon")?;
        let path = path_arg(titles_path, "titles_path")?;
        let tools = PairTools::for_langs(handle.lexicon.langs());
        let lexicon = std::mem::replace(&mut handle.lexicon, Lexicon::new(LangPair::new("", ""), 0));
        match merge_entities(lexicon.clone(), &path, &tools) {
            Ok(merged) => {
                handle.lexicon = merged;
                Ok(())
            }
            Err(e) => {
                handle.lexicon = lexicon;
                Err(e.into())
            }
        }
    })
}

/// Number of sense entries in the lexicon.
///
/// # Safety
/// `lexicon` must be null or a live lexicon handle; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_lexicon_len(lexicon: *const LmLexicon, out: *mut usize) -> LmStatus {
    guard(|| {
        let n = handle(lexicon, "lexicon")?.lexicon.len();
        *handle_mut(out, "out")? = n;
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn lm_lexicon_free(lexicon: *mut LmLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Selects the sentence pairs that give each sense up to `k` contexts.
/// With `rank` non-zero, pairs are visited by descending quality score.
/// The corpus and lexicon must cover the same language pair.
///
/// # Safety
/// Handles must be null or live; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn lm_retrieve(
    corpus: *const LmCorpus,
    lexicon: *const LmLexicon,
    k: i64,
    rank: i32,
    out: *mut *mut LmRetrieval,
) -> LmStatus {
    guard(|| {
        let c = handle(corpus, "corpus")?;
        let l = handle(lexicon, "lexicon")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if c.corpus.langs != *l.lexicon.langs() {
            return Err(Failure(
                LmStatus::InvalidArgument,
                format!("corpus is {} but lexicon is {}", c.corpus.langs, l.lexicon.langs()),
            ));
        }
        let opts = RetrieveOptions { rank: rank != 0 };
        let retrieval = retrieve(&c.corpus, &l.lexicon, k, &Analyzer::new(&c.tools), opts)?;
        out_arg(out, LmRetrieval { retrieval })
    })
}

/// Number of selected sentence pairs.
///
/// # Safety
/// `retrieval` must be null or a live handle; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_retrieval_subset_len(retrieval: *const LmRetrieval, out: *mut usize) -> LmStatus {
    guard(|| {
        let n = handle(retrieval, "retrieval")?.retrieval.subset.len();
        *handle_mut(out, "out")? = n;
        Ok(())
    })
}

/// Copies the original line indices of the selected pairs, in selection
/// order, into `buf`. At most `capacity` values are written; `written`
/// receives the number copied. Call with `capacity` 0 to query nothing.
///
/// # Safety
/// `buf` must be null (only if `capacity` is 0) or valid for `capacity`
/// writes; `written` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn lm_retrieval_subset_indices(
    retrieval: *const LmRetrieval,
    buf: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> LmStatus {
    guard(|| {
        let r = handle(retrieval, "retrieval")?;
        let written = handle_mut(written, "written")?;
        if buf.is_null() && capacity > 0 {
            return Err(null("buf"));
        }
        let pairs = &r.retrieval.subset.pairs;
        let n = pairs.len().min(capacity);
        for (i, p) in pairs.iter().take(n).enumerate() {
            *buf.add(i) = p.index;
        }
        *written = n;
        Ok(())
    })
}

/// Final count of lexicon entry `entry`, in lexicon order.
///
/// # Safety
/// `retrieval` must be null or a live handle; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_retrieval_count(retrieval: *const LmRetrieval, entry: usize, out: *mut u32) -> LmStatus {
    guard(|| {
        let counts = handle(retrieval, "retrieval")?.retrieval.counts.counts();
        let value = *counts.get(entry).ok_or_else(|| {
            Failure(
                LmStatus::InvalidArgument,
                format!("entry {entry} out of range for {} senses", counts.len()),
            )
        })?;
        *handle_mut(out, "out")? = value;
        Ok(())
    })
}

/// The coverage report as a JSON string; release with [`lm_string_free`].
///
/// # Safety
/// `retrieval` must be null or a live handle; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lm_retrieval_coverage_json(retrieval: *const LmRetrieval, out: *mut *mut c_char) -> LmStatus {
    guard(|| {
        let r = handle(retrieval, "retrieval")?;
        write_string(out, serde_json::to_string(&r.retrieval.report).map_err(json_failure)?)
    })
}

/// # Safety
/// `retrieval` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn lm_retrieval_free(retrieval: *mut LmRetrieval) {
    if !retrieval.is_null() {
        drop(Box::from_raw(retrieval));
    }
}
