use std::fs;
use std::path::Path;

use arts_core::report::finding::Severity;
use arts_core::report::license::{identify_text, LicenseKind, MATCH_THRESHOLD};
use arts_core::report::{self, ComplianceReport, Grade};
use proptest::prelude::*;

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// 2·LCS / (|a| + |b|) over word sequences.
fn lcs_ratio(a: &str, b: &str) -> f64 {
    let (a, b) = (words(a), words(b));
    let mut prev = vec![0usize; b.len() + 1];
    for x in &a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    2.0 * prev[b.len()] as f64 / (a.len() + b.len()) as f64
}

fn mit() -> &'static str {
    LicenseKind::Mit.canonical_text().unwrap()
}

#[test]
fn mit_with_edited_copyright_line() {
    let edited = mit().replace(
        "Copyright (c) <year> <copyright holders>",
        "Copyright (c) 2019-2026 Neural Prosthetics Systems Laboratory and contributors",
    );
    assert_ne!(edited, mit());
    let oracle = lcs_ratio(&edited, mit());
    assert!(oracle >= 0.9, "oracle ratio {oracle}");
    let id = identify_text(&edited);
    assert_eq!(id.id, LicenseKind::Mit);
    assert!(id.confidence >= MATCH_THRESHOLD, "{}", id.confidence);
    // both measures see the same small edit
    assert!((id.confidence - oracle).abs() < 0.08, "{} vs {oracle}", id.confidence);
}

#[test]
fn close_relatives_are_told_apart() {
    for k in LicenseKind::KNOWN {
        let id = identify_text(k.canonical_text().unwrap());
        assert_eq!(id.id, k);
    }
    let by = identify_text(LicenseKind::CcBy.canonical_text().unwrap());
    let by_sa = identify_text(LicenseKind::CcBySa.canonical_text().unwrap());
    assert_ne!(by.id, by_sa.id);
}

#[test]
fn half_a_license_is_unknown() {
    let text = mit();
    let id = identify_text(&text[..text.len() / 3]);
    assert_eq!(id.id, LicenseKind::Unknown);
    assert!(id.confidence < MATCH_THRESHOLD);
}

fn rewrap(text: &str, width: usize, sep: &str) -> String {
    let mut out = String::new();
    let mut line = 0;
    for w in text.split_whitespace() {
        if line > 0 && line + w.len() > width {
            out.push('\n');
            line = 0;
        } else if line > 0 {
            out.push_str(sep);
        }
        out.push_str(w);
        line += w.len() + 1;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detection_ignores_wrapping(width in 20usize..120, k in 0usize..8, sep in "[ \t]{1,3}") {
        let kind = LicenseKind::KNOWN[k];
        let text = kind.canonical_text().unwrap();
        let a = identify_text(text);
        let b = identify_text(&rewrap(text, width, &sep));
        prop_assert_eq!(a.id, b.id);
        prop_assert!((a.confidence - b.confidence).abs() < 1e-12);
    }
}

fn write(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, text).unwrap();
}

fn ids(r: &ComplianceReport, severity: Severity) -> Vec<&str> {
    r.findings.iter().filter(|f| f.severity == severity).map(|f| f.id.as_str()).collect()
}

#[test]
fn run_cmd_only_config() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "config.env", "ARTS_RUN_CMD=./run.sh\n");
    write(d.path(), "run.sh", "#!/bin/sh\n");
    let r = report::assess(d.path()).unwrap();
    let warns = ids(&r, Severity::Warn);
    assert!(warns.contains(&"readme.undeclared"), "{warns:?}");
    assert!(warns.contains(&"license.undeclared"), "{warns:?}");
    assert_ne!(r.grade, Grade::Pass);
}

#[test]
fn empty_directory_fails_on_config_only() {
    let d = tempfile::tempdir().unwrap();
    let r = report::assess(d.path()).unwrap();
    assert_eq!(ids(&r, Severity::Fail), ["config.missing"]);
    assert_eq!(r.grade, Grade::Fail);
}

#[test]
fn every_requirement_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let r = report::assess(d.path()).unwrap();
    let text = r.render_text();
    assert!(text.contains("archive.not_checkable"));
    assert_eq!(text.lines().filter(|l| l.starts_with('[')).count(), 7, "{text}");
    assert!(text.trim_end().ends_with("grade: fail (1 FAIL, 1 WARN, 2 INFO)"), "{text}");
}

#[test]
fn report_json_round_trips() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "config.env", arts_core::envconfig::emit_default());
    let r = report::assess(d.path()).unwrap();
    let back = ComplianceReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.to_json(), r.to_json());
}

#[test]
fn tampered_timestamp_store_is_a_failure() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "config.env", "ARTS_RUN_CMD=./run.sh\n");
    write(d.path(), "run.sh", "#!/bin/sh\n");
    write(d.path(), "timestamps.json", "[{\"path\": \"run.sh\"}]");
    let r = report::assess(d.path()).unwrap();
    assert!(ids(&r, Severity::Fail).contains(&"timestamp.records.invalid"));
}
