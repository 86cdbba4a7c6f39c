//! Exercises the C ABI the way a foreign binding would: opaque handles in,
//! status codes and owned strings out.

use std::ffi::{CStr, CString};
use std::ptr;

use peo_ffi::{
    peo_context_free, peo_context_new, peo_kb_examples_json, peo_kb_file_count, peo_kb_free,
    peo_kb_from_document, peo_kb_from_jsonl, peo_kb_serialize, peo_last_error_message, peo_query,
    peo_string_free, peo_tbox_turtle, PeoContext, PeoKb, PeoStatus,
};

const LISTING_LINE: &str = include_str!("../../core/tests/data/listing1.json");

unsafe fn take_string(ptr: *mut libc::c_char) -> String {
    assert!(!ptr.is_null());
    let s = CStr::from_ptr(ptr).to_str().unwrap().to_string();
    peo_string_free(ptr);
    s
}

unsafe fn new_context() -> *mut PeoContext {
    let mut ctx: *mut PeoContext = ptr::null_mut();
    assert_eq!(
        peo_context_new(ptr::null(), ptr::null(), &mut ctx),
        PeoStatus::Ok
    );
    assert!(!ctx.is_null());
    ctx
}

#[test]
fn full_pipeline_through_the_c_abi() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.jsonl");
    let minimal = format!(r#"{{"sha256":"{}","label":0}}"#, "0".repeat(64));
    std::fs::write(&input, format!("{LISTING_LINE}\n{minimal}\n")).unwrap();
    let input_c = CString::new(input.to_str().unwrap()).unwrap();

    unsafe {
        let ctx = new_context();

        let mut kb: *mut PeoKb = ptr::null_mut();
        assert_eq!(
            peo_kb_from_jsonl(ctx, input_c.as_ptr(), &mut kb),
            PeoStatus::Ok
        );
        assert_eq!(peo_kb_file_count(kb), 2);

        let mut doc: *mut libc::c_char = ptr::null_mut();
        assert_eq!(peo_kb_serialize(ctx, kb, true, false, &mut doc), PeoStatus::Ok);
        let turtle = take_string(doc);
        assert!(turtle.contains("a peo:ExecutableFile"));
        assert!(turtle.contains("\"6.532932639432919\"^^xsd:double"));

        // Round-trip the document through the ABI.
        let doc_c = CString::new(turtle.clone()).unwrap();
        let mut kb2: *mut PeoKb = ptr::null_mut();
        assert_eq!(
            peo_kb_from_document(ctx, doc_c.as_ptr(), &mut kb2),
            PeoStatus::Ok
        );
        assert_eq!(peo_kb_file_count(kb2), 2);

        let mut nt: *mut libc::c_char = ptr::null_mut();
        assert_eq!(peo_kb_serialize(ctx, kb2, true, true, &mut nt), PeoStatus::Ok);
        let ntriples = take_string(nt);
        assert!(ntriples.contains("<https://example.org/pe-malware-ontology#mz_count>"));

        let mut examples: *mut libc::c_char = ptr::null_mut();
        assert_eq!(peo_kb_examples_json(kb, &mut examples), PeoStatus::Ok);
        let examples = take_string(examples);
        let parsed: serde_json::Value = serde_json::from_str(&examples).unwrap();
        assert_eq!(parsed["positive"].as_array().unwrap().len(), 1);
        assert_eq!(parsed["negative"].as_array().unwrap().len(), 1);

        let expr = CString::new("has_file_feature some {tls}").unwrap();
        let mut result: *mut libc::c_char = ptr::null_mut();
        assert_eq!(
            peo_query(ctx, kb, expr.as_ptr(), true, &mut result),
            PeoStatus::Ok
        );
        let result: serde_json::Value =
            serde_json::from_str(&take_string(result)).unwrap();
        assert_eq!(result["matches"].as_array().unwrap().len(), 1);
        assert_eq!(result["score"]["tp"], 1);

        peo_kb_free(kb2);
        peo_kb_free(kb);
        peo_context_free(ctx);
    }
}

#[test]
fn tbox_is_available_without_a_kb() {
    unsafe {
        let ctx = new_context();
        let mut doc: *mut libc::c_char = ptr::null_mut();
        assert_eq!(peo_tbox_turtle(ctx, &mut doc), PeoStatus::Ok);
        let tbox = take_string(doc);
        assert!(tbox.contains("peo:CreateProcess a owl:Class"));
        assert!(tbox.contains("peo:derived_as a owl:AnnotationProperty"));
        peo_context_free(ctx);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let ctx = new_context();

        let missing = CString::new("/nonexistent/nope.jsonl").unwrap();
        let mut kb: *mut PeoKb = ptr::null_mut();
        assert_eq!(
            peo_kb_from_jsonl(ctx, missing.as_ptr(), &mut kb),
            PeoStatus::IoError
        );
        let message = CStr::from_ptr(peo_last_error_message())
            .to_str()
            .unwrap()
            .to_string();
        assert!(message.contains("nope.jsonl"), "{message}");

        // Invalid expression against an empty KB built from a document.
        let empty_doc = CString::new(
            "@prefix owl: <http://www.w3.org/2002/07/owl#> .\n\
             @prefix peo: <https://example.org/pe-malware-ontology#> .\n\
             <https://example.org/pe-malware-ontology/abox> a owl:Ontology ;\n\
                 owl:imports <https://example.org/pe-malware-ontology> .\n",
        )
        .unwrap();
        let mut kb: *mut PeoKb = ptr::null_mut();
        assert_eq!(
            peo_kb_from_document(ctx, empty_doc.as_ptr(), &mut kb),
            PeoStatus::Ok
        );
        assert_eq!(peo_kb_file_count(kb), 0);

        let bad_expr = CString::new("NoSuchClass").unwrap();
        let mut out: *mut libc::c_char = ptr::null_mut();
        assert_eq!(
            peo_query(ctx, kb, bad_expr.as_ptr(), false, &mut out),
            PeoStatus::InvalidExpression
        );

        assert_eq!(
            peo_query(ptr::null(), kb, bad_expr.as_ptr(), false, &mut out),
            PeoStatus::NullArgument
        );

        peo_kb_free(kb);
        peo_context_free(ctx);
    }
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/peo.h"
    ))
    .expect("cbindgen header exists after build");
    for symbol in [
        "peo_context_new",
        "peo_context_free",
        "peo_kb_from_jsonl",
        "peo_kb_from_document",
        "peo_kb_free",
        "peo_kb_file_count",
        "peo_kb_serialize",
        "peo_kb_examples_json",
        "peo_tbox_turtle",
        "peo_query",
        "peo_string_free",
        "peo_last_error_message",
        "typedef struct PeoContext PeoContext",
        "typedef struct PeoKb PeoKb",
        "PEO_STATUS_OK",
    ] {
        assert!(header.contains(symbol), "header misses `{symbol}`");
    }
}
