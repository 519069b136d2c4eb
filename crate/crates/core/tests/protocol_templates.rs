mod common;

use tabprompt_core::protocols::{build_llm_guided_query, build_novel_mapping_query};

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}.txt", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn rendered_queries_match_golden_files() {
    assert_eq!(build_llm_guided_query("magic", &["fAlpha"]).unwrap().text, golden("llm_guided_single"));
    let cols = ["fLength", "fWidth", "fAlpha", "class"];
    let q = build_llm_guided_query("magic", &cols).unwrap();
    assert_eq!(q.text, golden("llm_guided_many"));
    assert_eq!(q.expected_count, 4);
    assert_eq!(build_novel_mapping_query(&["[2, 9]"], "physics").unwrap().text, golden("novel_mapping_single"));
    let q = build_novel_mapping_query(&["[0.5, 12]", "{a, b}", "[-3, 3]"], "life sciences").unwrap();
    assert_eq!(q.text, golden("novel_mapping_many"));
    assert_eq!(q.expected_count, 3);
}

#[test]
fn mapping_parser_fuzz_corpus() {
    common::fixtures::mapping_fuzz(50, 31).unwrap();
}
