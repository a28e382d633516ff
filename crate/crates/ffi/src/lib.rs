//! C ABI over the label, cleaning and evaluation primitives.
//!
//! Every fallible function returns a [`PsStatus`]. On failure the message is
//! kept per thread and can be read with [`ps_last_error`]. Strings returned
//! through `char **` out-parameters are owned by the caller and must be
//! released with [`ps_string_free`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::Deserialize;
use serde_json::json;

use propscope::corpus::{dedup_corpus, parse_corpus, to_jsonl, DedupConfig, LabelSpace};
use propscope::eval::{fleiss_kappa, prf_multilabel, AgreementError};
use propscope::labels::Event;
use propscope::taxonomy::{NarrativeTaxonomy, TechniqueCatalog};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    NotFound = 4,
    Undefined = 5,
    Panic = 6,
}

/// A narrative taxonomy and technique catalog pair.
pub struct PsLabelSpace {
    taxonomy: NarrativeTaxonomy,
    catalog: TechniqueCatalog,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(PsStatus, String);

impl Failure {
    fn input(msg: impl ToString) -> Self {
        Failure(PsStatus::InvalidInput, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            PsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PsStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(PsStatus::NullArgument, format!("{what} is null")))
}

unsafe fn handle<'a>(p: *const PsLabelSpace) -> Result<&'a PsLabelSpace, Failure> {
    p.as_ref().ok_or_else(|| Failure(PsStatus::NullArgument, "label space is null".into()))
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a label space from the bundled taxonomy and catalog.
///
/// # Safety
/// `out_space` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_label_space_bundled(out_space: *mut *mut PsLabelSpace) -> PsStatus {
    guard(|| {
        let slot = out(out_space, "out_space")?;
        *slot = Box::into_raw(Box::new(PsLabelSpace {
            taxonomy: NarrativeTaxonomy::bundled(),
            catalog: TechniqueCatalog::bundled(),
        }));
        Ok(())
    })
}

/// Creates a label space from taxonomy and catalog JSON documents.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_space` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_label_space_from_json(
    taxonomy_json: *const c_char,
    catalog_json: *const c_char,
    out_space: *mut *mut PsLabelSpace,
) -> PsStatus {
    guard(|| {
        let slot = out(out_space, "out_space")?;
        let taxonomy = NarrativeTaxonomy::from_json(text(taxonomy_json, "taxonomy_json")?).map_err(Failure::input)?;
        let catalog = TechniqueCatalog::from_json(text(catalog_json, "catalog_json")?).map_err(Failure::input)?;
        *slot = Box::into_raw(Box::new(PsLabelSpace { taxonomy, catalog }));
        Ok(())
    })
}

/// Destroys a label space. NULL is ignored.
///
/// # Safety
/// `space` must come from a constructor above and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_label_space_free(space: *mut PsLabelSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Resolves a label to its canonical form.
///
/// `kind` is one of "bias", "narrative" or "technique"; `event` ("CAA" or
/// "FARMERS") is required for narratives and ignored otherwise. Writes the
/// canonical id (or bias label) to `out_label`.
///
/// # Safety
/// Pointers must be valid; `event` may be NULL unless `kind` is "narrative".
#[no_mangle]
pub unsafe extern "C" fn ps_resolve_label(
    space: *const PsLabelSpace,
    kind: *const c_char,
    event: *const c_char,
    raw: *const c_char,
    out_label: *mut *mut c_char,
) -> PsStatus {
    guard(|| {
        let space = handle(space)?;
        let kind = text(kind, "kind")?;
        let raw = text(raw, "raw")?;
        let slot = out(out_label, "out_label")?;
        let labels = LabelSpace::new(&space.taxonomy, &space.catalog);
        let resolved = match kind {
            "bias" => labels.bias(raw).map(|b| b.to_string()),
            "technique" => labels
                .technique(raw)
                .filter(|id| space.catalog.contains_technique(*id))
                .map(|id| id.to_string()),
            "narrative" => {
                let event: Event = text(event, "event")?.parse().map_err(Failure::input)?;
                labels
                    .narrative(event, raw)
                    .filter(|id| space.taxonomy.class(*id).is_some_and(|c| c.event == event))
                    .map(|id| id.to_string())
            }
            other => return Err(Failure::input(format!("unknown label kind `{other}`"))),
        };
        let label = resolved.ok_or_else(|| Failure(PsStatus::NotFound, format!("no {kind} label matches `{raw}`")))?;
        *slot = owned(label);
        Ok(())
    })
}

/// Fleiss' kappa over a row-major `items` x `categories` count matrix.
/// Returns `Undefined` when every rating falls in one category.
///
/// # Safety
/// `counts` must point to `items * categories` values; `out_kappa` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_fleiss_kappa(
    counts: *const usize,
    items: usize,
    categories: usize,
    out_kappa: *mut f64,
) -> PsStatus {
    guard(|| {
        let slot = out(out_kappa, "out_kappa")?;
        if counts.is_null() {
            return Err(Failure(PsStatus::NullArgument, "counts is null".into()));
        }
        let len = items
            .checked_mul(categories)
            .ok_or_else(|| Failure::input("matrix size overflows"))?;
        let flat = std::slice::from_raw_parts(counts, len);
        let matrix: Vec<Vec<usize>> = if categories == 0 {
            vec![Vec::new(); items]
        } else {
            flat.chunks(categories).map(<[usize]>::to_vec).collect()
        };
        *slot = fleiss_kappa(&matrix).map_err(|e| match e {
            AgreementError::Undefined => Failure(PsStatus::Undefined, e.to_string()),
            other => Failure::input(other),
        })?;
        Ok(())
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MultilabelRequest {
    gold: Vec<BTreeSet<String>>,
    pred: Vec<BTreeSet<String>>,
    universe: Vec<String>,
}

/// Multi-label precision/recall/F1.
///
/// Input: `{"gold": [[...], ...], "pred": [[...], ...], "universe": [...]}`.
/// Output: micro/macro/weighted averages and per-label rows as JSON.
///
/// # Safety
/// `request_json` must be NUL-terminated; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ps_multilabel_scores(request_json: *const c_char, out_json: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let req: MultilabelRequest = serde_json::from_str(text(request_json, "request_json")?).map_err(Failure::input)?;
        let scores = prf_multilabel(&req.gold, &req.pred, &req.universe).map_err(Failure::input)?;
        *slot = owned(serde_json::to_string(&scores).expect("scores serialize"));
        Ok(())
    })
}

/// Removes URL, title and near-duplicate-content duplicates from a JSONL
/// corpus. A `threshold` of 0 selects the default.
///
/// Output: `{"kept": "<jsonl>", "removed": [{duplicate_id, kept_id, reason, similarity?}, ...]}`.
///
/// # Safety
/// Pointers must be valid and `jsonl` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ps_dedup_jsonl(
    space: *const PsLabelSpace,
    jsonl: *const c_char,
    threshold: f64,
    out_json: *mut *mut c_char,
) -> PsStatus {
    guard(|| {
        let space = handle(space)?;
        let slot = out(out_json, "out_json")?;
        let config = if threshold == 0.0 {
            DedupConfig::default()
        } else {
            DedupConfig::new(threshold).map_err(Failure::input)?
        };
        let labels = LabelSpace::new(&space.taxonomy, &space.catalog);
        let articles = parse_corpus(text(jsonl, "jsonl")?, &labels).map_err(Failure::input)?;
        let outcome = dedup_corpus(&articles, &config);
        let body = json!({ "kept": to_jsonl(&outcome.kept), "removed": outcome.removed });
        *slot = owned(body.to_string());
        Ok(())
    })
}
