//! C ABI over the PE malware ontology toolkit.
//!
//! The API works with two opaque handles: a `PeoContext` (vocabulary,
//! derivation thresholds, action mapping, base IRI) and a `PeoKb` (an
//! assembled knowledge base). All functions return a `PeoStatus`; on any
//! non-OK status, `peo_last_error_message` yields a human-readable
//! description valid on the calling thread until the next failing call.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with `peo_string_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;

use libc::{c_char, size_t};

use peo_core::actions::ApiActionMap;
use peo_core::features::DerivationConfig;
use peo_core::ingest::SampleStream;
use peo_core::kb::{self, KnowledgeBase};
use peo_core::query::{parse_expression, KbIndex, QueryResult};
use peo_core::rdf::{emit_abox, emit_examples, load_abox, AboxOptions, Namespaces, RdfFormat};
use peo_core::vocab::Vocabulary;
use peo_core::DEFAULT_BASE_IRI;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    IoError = 3,
    ParseError = 4,
    InvalidExpression = 5,
    InternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).unwrap_or_default();
    });
}

/// Pipeline state shared across conversions and queries.
pub struct PeoContext {
    cfg: DerivationConfig,
    vocab: Vocabulary,
    map: ApiActionMap,
    ns: Namespaces,
}

/// An assembled knowledge base plus the namespace it was built under.
pub struct PeoKb {
    kb: KnowledgeBase,
    ns: Namespaces,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, PeoStatus> {
    if ptr.is_null() {
        set_error(format!("argument `{name}` is NULL"));
        return Err(PeoStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("argument `{name}` is not valid UTF-8"));
        PeoStatus::InvalidUtf8
    })
}

fn string_out(value: String, out: *mut *mut c_char) -> PeoStatus {
    if out.is_null() {
        set_error("output pointer is NULL");
        return PeoStatus::NullArgument;
    }
    match CString::new(value) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            PeoStatus::Ok
        }
        Err(_) => {
            set_error("result contains an interior NUL byte");
            PeoStatus::InternalError
        }
    }
}

/// Creates a context with the bundled vocabulary and seed action mapping.
///
/// `base_iri` may be NULL for the default base IRI. `action_map_path` may
/// be NULL for the bundled mapping.
///
/// # Safety
/// `base_iri` and `action_map_path`, when non-NULL, must point to
/// NUL-terminated strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_context_new(
    base_iri: *const c_char,
    action_map_path: *const c_char,
    out: *mut *mut PeoContext,
) -> PeoStatus {
    if out.is_null() {
        set_error("argument `out` is NULL");
        return PeoStatus::NullArgument;
    }
    let base_iri = if base_iri.is_null() {
        DEFAULT_BASE_IRI.to_string()
    } else {
        match cstr_arg(base_iri, "base_iri") {
            Ok(s) => s.to_string(),
            Err(status) => return status,
        }
    };
    let cfg = DerivationConfig::default();
    let vocab = match Vocabulary::with_config(&cfg) {
        Ok(v) => v,
        Err(e) => {
            set_error(e.to_string());
            return PeoStatus::InternalError;
        }
    };
    let map = if action_map_path.is_null() {
        ApiActionMap::builtin(&vocab)
    } else {
        let path = match cstr_arg(action_map_path, "action_map_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ApiActionMap::load(Path::new(path), &vocab) {
            Ok(map) => map,
            Err(e) => {
                set_error(e.to_string());
                return PeoStatus::ParseError;
            }
        }
    };
    let ns = Namespaces::new(&base_iri);
    *out = Box::into_raw(Box::new(PeoContext { cfg, vocab, map, ns }));
    PeoStatus::Ok
}

/// Releases a context. NULL is ignored.
///
/// # Safety
/// `ctx` must be NULL or a pointer returned by `peo_context_new` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn peo_context_free(ctx: *mut PeoContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Builds a knowledge base from an EMBER-style JSON-Lines file.
/// Undecodable lines are skipped, mirroring the CLI's behavior.
///
/// # Safety
/// `ctx` must be a live context, `path` a NUL-terminated string, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_kb_from_jsonl(
    ctx: *const PeoContext,
    path: *const c_char,
    out: *mut *mut PeoKb,
) -> PeoStatus {
    let Some(ctx) = ctx.as_ref() else {
        set_error("argument `ctx` is NULL");
        return PeoStatus::NullArgument;
    };
    if out.is_null() {
        set_error("argument `out` is NULL");
        return PeoStatus::NullArgument;
    }
    let path = match cstr_arg(path, "path") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let stream = match SampleStream::open(Path::new(path)) {
        Ok(stream) => stream,
        Err(e) => {
            set_error(e.to_string());
            return PeoStatus::IoError;
        }
    };
    let samples: Vec<_> = stream.filter_map(|(_, result)| result.ok()).collect();
    let (kb, _) = kb::build_kb(samples.iter(), &ctx.cfg, &ctx.map);
    *out = Box::into_raw(Box::new(PeoKb {
        kb,
        ns: ctx.ns.clone(),
    }));
    PeoStatus::Ok
}

/// Reconstructs a knowledge base from an ABox document emitted by this
/// toolkit (Turtle or N-Triples).
///
/// # Safety
/// `ctx` must be a live context, `document` a NUL-terminated string, `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_kb_from_document(
    ctx: *const PeoContext,
    document: *const c_char,
    out: *mut *mut PeoKb,
) -> PeoStatus {
    let Some(ctx) = ctx.as_ref() else {
        set_error("argument `ctx` is NULL");
        return PeoStatus::NullArgument;
    };
    if out.is_null() {
        set_error("argument `out` is NULL");
        return PeoStatus::NullArgument;
    }
    let document = match cstr_arg(document, "document") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match load_abox(document, &ctx.vocab) {
        Ok((kb, namespace)) => {
            *out = Box::into_raw(Box::new(PeoKb {
                kb,
                ns: Namespaces::new(&namespace),
            }));
            PeoStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            PeoStatus::ParseError
        }
    }
}

/// Releases a knowledge base. NULL is ignored.
///
/// # Safety
/// `kb` must be NULL or a pointer returned by a `peo_kb_*` constructor that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn peo_kb_free(kb: *mut PeoKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Number of PE file individuals in the knowledge base; 0 for NULL.
///
/// # Safety
/// `kb` must be NULL or a live knowledge base handle.
#[no_mangle]
pub unsafe extern "C" fn peo_kb_file_count(kb: *const PeoKb) -> size_t {
    kb.as_ref().map(|kb| kb.kb.files.len()).unwrap_or(0)
}

/// Serializes the vocabulary (TBox) as Turtle into `out`.
///
/// # Safety
/// `ctx` must be a live context and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_tbox_turtle(
    ctx: *const PeoContext,
    out: *mut *mut c_char,
) -> PeoStatus {
    let Some(ctx) = ctx.as_ref() else {
        set_error("argument `ctx` is NULL");
        return PeoStatus::NullArgument;
    };
    match ctx.vocab.export_tbox(&ctx.ns) {
        Ok(doc) => string_out(doc, out),
        Err(e) => {
            set_error(e.to_string());
            PeoStatus::InternalError
        }
    }
}

/// Serializes a knowledge base as Turtle (`ntriples` false) or N-Triples.
/// With `include_derived` false, derived-feature links are omitted.
///
/// # Safety
/// `ctx` and `kb` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_kb_serialize(
    ctx: *const PeoContext,
    kb: *const PeoKb,
    include_derived: bool,
    ntriples: bool,
    out: *mut *mut c_char,
) -> PeoStatus {
    let (Some(ctx), Some(kb)) = (ctx.as_ref(), kb.as_ref()) else {
        set_error("argument `ctx` or `kb` is NULL");
        return PeoStatus::NullArgument;
    };
    let options = AboxOptions {
        include_derived,
        format: if ntriples {
            RdfFormat::NTriples
        } else {
            RdfFormat::Turtle
        },
    };
    match emit_abox(&kb.kb, &ctx.vocab, &kb.ns, &options) {
        Ok(doc) => string_out(doc, out),
        Err(e) => {
            set_error(e.to_string());
            PeoStatus::InternalError
        }
    }
}

/// Emits the positive/negative examples sidecar JSON for a knowledge base.
///
/// # Safety
/// `kb` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_kb_examples_json(
    kb: *const PeoKb,
    out: *mut *mut c_char,
) -> PeoStatus {
    let Some(kb) = kb.as_ref() else {
        set_error("argument `kb` is NULL");
        return PeoStatus::NullArgument;
    };
    string_out(emit_examples(&kb.kb, &kb.ns), out)
}

/// Evaluates a class expression; the result is a JSON document with a
/// sorted `matches` array of PE file IRIs and, when `with_score` is set, a
/// `score` object computed against the knowledge base's labels.
///
/// # Safety
/// `ctx` and `kb` must be live handles, `expression` a NUL-terminated
/// string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn peo_query(
    ctx: *const PeoContext,
    kb: *const PeoKb,
    expression: *const c_char,
    with_score: bool,
    out: *mut *mut c_char,
) -> PeoStatus {
    let (Some(ctx), Some(kb)) = (ctx.as_ref(), kb.as_ref()) else {
        set_error("argument `ctx` or `kb` is NULL");
        return PeoStatus::NullArgument;
    };
    let expression = match cstr_arg(expression, "expression") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let expr = match parse_expression(expression, &ctx.vocab) {
        Ok(expr) => expr,
        Err(e) => {
            set_error(e.to_string());
            return PeoStatus::InvalidExpression;
        }
    };
    let index = KbIndex::new(&kb.kb, &ctx.vocab, &kb.ns);
    let mut result = QueryResult {
        matches: index.evaluate_files(&expr).into_iter().collect(),
        score: None,
    };
    if with_score {
        match index.score(&expr) {
            Ok(score) => result.score = Some(score),
            Err(e) => {
                set_error(e.to_string());
                return PeoStatus::InvalidExpression;
            }
        }
    }
    string_out(result.to_json(), out)
}

/// Last error message for this thread; empty until a call fails. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn peo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer produced by a `peo_*` function that hands
/// ownership to the caller, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn peo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
