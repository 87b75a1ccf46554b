//! Compliance report over a deposition root.

pub mod archives;
pub mod finding;
pub mod license;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deposition::{command_script, validate_structure};
use crate::envconfig::{self, ConfigError, ConfigKey, LayoutEntry, ResolvedLayout};
use crate::gitlayer::{self, RepoKind};
use crate::runner;
use crate::tsa::{self, TsaError};
use finding::{checks, Finding, Requirement, Severity};
use license::LicenseKind;

pub use archives::{archive_matrix, ArchiveProfile};
pub use finding::Check;
pub use license::{detect_license, LicenseId};

pub const REPORT_FILE: &str = "arts-report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    Pass,
    Warn,
    Fail,
}

impl Grade {
    pub fn of(findings: &[Finding]) -> Grade {
        match findings.iter().map(|f| f.severity).max() {
            Some(Severity::Fail) => Grade::Fail,
            Some(Severity::Warn) => Grade::Warn,
            _ => Grade::Pass,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Pass => "pass",
            Grade::Warn => "warn",
            Grade::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub tool_version: String,
    /// Taken from `SOURCE_DATE_EPOCH` when set so reports stay reproducible.
    pub timestamp: Option<String>,
    pub grade: Grade,
    pub findings: Vec<Finding>,
}

impl ComplianceReport {
    pub fn new(findings: Vec<Finding>) -> ComplianceReport {
        ComplianceReport {
            tool_version: crate::TOOL_VERSION.to_string(),
            timestamp: report_timestamp(),
            grade: Grade::of(&findings),
            findings,
        }
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity == severity).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ComplianceReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for req in Requirement::ALL {
            let items: Vec<&Finding> = self.findings.iter().filter(|f| f.requirement == req).collect();
            let worst = items.iter().map(|f| f.severity).max();
            let mark = match worst {
                Some(Severity::Fail) => "FAIL",
                Some(Severity::Warn) => "WARN",
                _ => "ok",
            };
            let _ = writeln!(out, "[{mark}] {}", req.title());
            for f in items {
                let _ = writeln!(out, "    {f}");
            }
        }
        let _ = writeln!(
            out,
            "\ngrade: {} ({} FAIL, {} WARN, {} INFO)",
            self.grade.as_str(),
            self.count(Severity::Fail),
            self.count(Severity::Warn),
            self.count(Severity::Info)
        );
        out
    }
}

fn report_timestamp() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    let t = chrono::DateTime::from_timestamp(secs, 0)?;
    Some(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

/// Runs every local check against `root`.
pub fn assess(root: &Path) -> io::Result<ComplianceReport> {
    fs::read_dir(root)?;
    let mut findings = Vec::new();
    match envconfig::locate_and_resolve(root) {
        Ok(layout) => assess_layout(&layout, &mut findings),
        Err(e) => {
            let (check, msg) = match &e {
                ConfigError::ConfigNotFound(_) => (
                    &checks::CONFIG_MISSING,
                    "no config.env found (looked for config.env, .config.env, arts/config.env, arts/.config.env)".to_string(),
                ),
                ConfigError::PathEscape(_) => (&checks::CONFIG_PATH_ESCAPE, e.to_string()),
                ConfigError::Io { .. } => return Err(io::Error::other(e.to_string())),
                _ => (&checks::CONFIG_INVALID, e.to_string()),
            };
            findings.push(Finding::new(check, msg));
            findings.push(Finding::new(
                &checks::CONFIG_NOT_ASSESSED,
                "structure, documentation, licensing, version control and container checks need a valid config",
            ));
            timestamp_findings(root, &mut findings);
        }
    }
    findings.push(Finding::new(
        &checks::ARCHIVE_NOT_CHECKABLE,
        "archive accessibility, persistence and trust cannot be checked locally; see `arts archives`",
    ));
    Ok(ComplianceReport::new(findings))
}

fn assess_layout(layout: &ResolvedLayout, findings: &mut Vec<Finding>) {
    findings.extend(validate_structure(layout));
    if let Some(readme) = existing_file(layout, ConfigKey::ReadmePath) {
        findings.push(readme_finding(layout, &readme));
    }
    if let Some(file) = existing_file(layout, ConfigKey::LicensePath) {
        findings.push(license_finding(layout, &file));
    }
    git_findings(layout, findings);
    findings.extend(runner::check_contract(layout).findings);
    timestamp_findings(&layout.root, findings);
}

fn existing_file(layout: &ResolvedLayout, key: ConfigKey) -> Option<PathBuf> {
    match layout.entry(key)? {
        LayoutEntry::Local { path, exists: true, .. } if path.is_file() => Some(path.clone()),
        _ => None,
    }
}

fn rel(root: &Path, p: &Path) -> String {
    match p.strip_prefix(root) {
        Ok(r) if r.as_os_str().is_empty() => ".".into(),
        Ok(r) => r.to_string_lossy().into_owned(),
        Err(_) => p.to_string_lossy().into_owned(),
    }
}

/// Whether a README appears to say how to run the analysis.
pub fn mentions_run_instructions(readme: &str, run_cmd: Option<&str>) -> bool {
    let text = readme.to_lowercase();
    let mut needles = vec!["arts_run_cmd".to_string(), "to run".into(), "how to run".into(), "usage".into(), "reproduce".into()];
    if let Some(cmd) = run_cmd {
        needles.push(cmd.trim().to_lowercase());
        if let Some(script) = command_script(cmd) {
            needles.push(script.trim_start_matches("./").to_lowercase());
        }
    }
    needles.iter().any(|n| !n.is_empty() && text.contains(n.as_str()))
}

fn readme_finding(layout: &ResolvedLayout, path: &Path) -> Finding {
    let shown = rel(&layout.root, path);
    let text = String::from_utf8_lossy(&fs::read(path).unwrap_or_default()).into_owned();
    if text.trim().is_empty() {
        Finding::new(&checks::README_EMPTY, "README is empty").at(shown)
    } else if !mentions_run_instructions(&text, layout.config.get(ConfigKey::RunCmd)) {
        Finding::new(&checks::README_NO_RUN_INSTRUCTIONS, "README does not explain how to run the analysis").at(shown)
    } else {
        Finding::new(&checks::README_OK, "README present with run instructions").at(shown)
    }
}

fn license_finding(layout: &ResolvedLayout, path: &Path) -> Finding {
    let shown = rel(&layout.root, path);
    match detect_license(path) {
        Ok(LicenseId { id: LicenseKind::Unknown, confidence }) => Finding::new(
            &checks::LICENSE_UNRECOGNIZED,
            format!("license text not recognized (best match {confidence:.2})"),
        )
        .at(shown),
        Ok(LicenseId { id, confidence }) => {
            Finding::new(&checks::LICENSE_DETECTED, format!("{} (confidence {confidence:.2})", id.spdx())).at(shown)
        }
        Err(e) => Finding::new(&checks::LICENSE_UNRECOGNIZED, format!("license unreadable: {e}")).at(shown),
    }
}

fn git_findings(layout: &ResolvedLayout, findings: &mut Vec<Finding>) {
    let code = match layout.entry(ConfigKey::CodePath) {
        None => {
            findings.push(Finding::new(&checks::GIT_CODE_UNDECLARED, "ARTS_CODE_PATH is not set; no repository checked"));
            return;
        }
        Some(LayoutEntry::Local { path, exists: true, .. }) if path.is_dir() => path.clone(),
        // missing or external code paths are reported by the structure checks
        Some(_) => return,
    };
    let mut repos = Vec::new();
    if gitlayer::detect_kind(&code) != RepoKind::None {
        repos.push(code.clone());
    } else if let Ok(rd) = fs::read_dir(&code) {
        let mut children: Vec<PathBuf> = rd.flatten().map(|e| e.path()).filter(|p| p.is_dir()).collect();
        children.sort();
        repos.extend(children.into_iter().filter(|p| gitlayer::detect_kind(p) != RepoKind::None));
    }
    let shown = rel(&layout.root, &code);
    if repos.is_empty() {
        let has_content = fs::read_dir(&code)
            .map(|rd| rd.flatten().any(|e| e.file_name() != ".gitkeep"))
            .unwrap_or(false);
        findings.push(if has_content {
            Finding::new(&checks::GIT_REPO_MISSING, "code directory holds no git repository").at(shown)
        } else {
            Finding::new(&checks::GIT_CODE_EMPTY, "code directory is empty").at(shown)
        });
        return;
    }
    for repo in repos {
        match gitlayer::assess_repo(&repo) {
            Ok(a) => findings.extend(a.findings.into_iter().map(|mut f| {
                f.path = Some(rel(&layout.root, &repo));
                f
            })),
            Err(e) => findings.push(
                Finding::new(&checks::GIT_REPO_MISSING, format!("repository unreadable: {e}")).at(rel(&layout.root, &repo)),
            ),
        }
    }
}

fn timestamp_findings(root: &Path, findings: &mut Vec<Finding>) {
    let store = root.join(tsa::STORE_FILE);
    if !store.is_file() {
        findings.push(
            Finding::new(&checks::TIMESTAMP_RECORDS_MISSING, "no timestamps.json at the deposition root").at(tsa::STORE_FILE),
        );
        return;
    }
    let records = match tsa::read_records(&store) {
        Ok(r) => r,
        Err(e) => {
            findings.push(Finding::new(&checks::TIMESTAMP_RECORDS_INVALID, e.to_string()).at(tsa::STORE_FILE));
            return;
        }
    };
    let before = findings.len();
    for record in &records {
        let token = record.token_der().and_then(|der| tsa::parse_token_full(&der));
        let token = match token {
            Ok(t) => t,
            Err(e) => {
                findings.push(Finding::new(&checks::TIMESTAMP_TOKEN_INVALID, e.to_string()).at(record.path.clone()));
                continue;
            }
        };
        if hex::encode(&token.tst_info.message_imprint) != record.sha256.to_ascii_lowercase() {
            findings.push(
                Finding::new(&checks::TIMESTAMP_IMPRINT_MISMATCH, "token imprint differs from the recorded digest")
                    .at(record.path.clone()),
            );
            continue;
        }
        if record.path.starts_with("commit:") {
            continue;
        }
        match tsa::verify_record(root, record) {
            Ok(v) if v.pass => {}
            Ok(_) => findings.push(
                Finding::new(&checks::TIMESTAMP_DIGEST_MISMATCH, "file changed since it was timestamped")
                    .at(record.path.clone()),
            ),
            Err(TsaError::Io(e)) if e.kind() == io::ErrorKind::NotFound => findings.push(
                Finding::new(&checks::TIMESTAMP_FILE_MISSING, "timestamped file is not in the deposition")
                    .at(record.path.clone()),
            ),
            Err(e) => findings.push(Finding::new(&checks::TIMESTAMP_TOKEN_INVALID, e.to_string()).at(record.path.clone())),
        }
    }
    if findings.len() == before {
        findings.push(
            Finding::new(
                &checks::TIMESTAMP_RECORDS_OK,
                format!("{} record(s) verified (signatures not checked)", records.len()),
            )
            .at(tsa::STORE_FILE),
        );
    }
}
