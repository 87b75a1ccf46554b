//! Content manifests, structural validation and packaging of a deposition tree.

use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

use crate::envconfig::{ConfigKey, EntryKind, LayoutEntry, ResolvedLayout};
use crate::report::finding::{checks, Finding};

/// Name of the manifest embedded in packages.
pub const MANIFEST_FILE: &str = "arts-manifest.json";

#[derive(Debug, Error)]
pub enum DepositionError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("symlink {0} resolves outside the deposition root")]
    SymlinkEscape(PathBuf),
    #[error("path {0} is not valid UTF-8")]
    NonUtf8Path(PathBuf),
    #[error("invalid exclude pattern: {0}")]
    BadPattern(#[from] globset::Error),
    #[error("{0} changed since the manifest was built")]
    StaleManifest(String),
    #[error("deposition already contains {MANIFEST_FILE}; it is reserved for the package manifest")]
    ReservedPath,
    #[error("malformed manifest: {0}")]
    BadManifest(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

impl ManifestEntry {
    fn line(&self) -> String {
        serde_json::to_string(self).expect("manifest entries always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositionManifest {
    pub tool_version: String,
    pub entries: Vec<ManifestEntry>,
    pub root_digest: String,
}

/// SHA-256 over the entry lines exactly as they appear in the serialized manifest.
pub fn root_digest(entries: &[ManifestEntry]) -> String {
    let mut h = Sha256::new();
    for e in entries {
        h.update(e.line().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl DepositionManifest {
    pub fn from_entries(mut entries: Vec<ManifestEntry>) -> DepositionManifest {
        entries.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
        entries.dedup_by(|a, b| a.path == b.path);
        let root_digest = root_digest(&entries);
        DepositionManifest { tool_version: crate::TOOL_VERSION.to_string(), entries, root_digest }
    }

    /// Canonical text form: one entry object per line, sorted, LF-terminated.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        out.push_str(&format!(
            "  \"tool_version\": {},\n",
            serde_json::to_string(&self.tool_version).expect("string")
        ));
        if self.entries.is_empty() {
            out.push_str("  \"entries\": [],\n");
        } else {
            out.push_str("  \"entries\": [\n");
            let lines: Vec<String> = self.entries.iter().map(|e| format!("    {}", e.line())).collect();
            out.push_str(&lines.join(",\n"));
            out.push_str("\n  ],\n");
        }
        out.push_str(&format!("  \"root_digest\": \"{}\"\n}}\n", self.root_digest));
        out
    }

    pub fn from_json(text: &str) -> Result<DepositionManifest, DepositionError> {
        let m: DepositionManifest =
            serde_json::from_str(text).map_err(|e| DepositionError::BadManifest(e.to_string()))?;
        if !m.entries.windows(2).all(|w| w[0].path.as_bytes() < w[1].path.as_bytes()) {
            return Err(DepositionError::BadManifest("entries not strictly sorted".into()));
        }
        if root_digest(&m.entries) != m.root_digest {
            return Err(DepositionError::BadManifest("root_digest does not match entries".into()));
        }
        Ok(m)
    }

    pub fn get(&self, path: &str) -> Option<&ManifestEntry> {
        self.entries
            .binary_search_by(|e| e.path.as_bytes().cmp(path.as_bytes()))
            .ok()
            .map(|i| &self.entries[i])
    }
}

pub fn sha256_file(path: &Path) -> io::Result<(u64, String)> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut size = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        size += n as u64;
        h.update(&buf[..n]);
    }
    Ok((size, hex::encode(h.finalize())))
}

fn exclude_set(excludes: &[String]) -> Result<GlobSet, DepositionError> {
    let mut b = GlobSetBuilder::new();
    for pat in excludes {
        b.add(Glob::new(pat)?);
    }
    Ok(b.build()?)
}

fn relative_string(root: &Path, path: &Path) -> Result<String, DepositionError> {
    let rel = path.strip_prefix(root).expect("walk stays under root");
    let mut parts = Vec::new();
    for c in rel.components() {
        parts.push(c.as_os_str().to_str().ok_or_else(|| DepositionError::NonUtf8Path(path.into()))?);
    }
    Ok(parts.join("/"))
}

/// Lists the files a manifest of `root` would cover, as root-relative paths.
/// Directory symlinks are skipped (their targets are walked directly); file
/// symlinks are kept and resolved at hashing time.
pub fn scan_files(root: &Path, excludes: &[String]) -> Result<Vec<String>, DepositionError> {
    let set = exclude_set(excludes)?;
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            DepositionError::UnreadableFile { path, source: e.into() }
        })?;
        let ft = entry.file_type();
        if ft.is_dir() {
            continue;
        }
        if ft.is_symlink() && fs::metadata(entry.path()).map(|m| m.is_dir()).unwrap_or(false) {
            continue;
        }
        let rel = relative_string(root, entry.path())?;
        if !set.is_match(&rel) {
            files.push(rel);
        }
    }
    Ok(files)
}

fn hash_entry(root: &Path, canonical_root: &Path, rel: &str) -> Result<ManifestEntry, DepositionError> {
    let path = root.join(rel);
    let meta = fs::symlink_metadata(&path)
        .map_err(|source| DepositionError::UnreadableFile { path: path.clone(), source })?;
    let target = if meta.file_type().is_symlink() {
        let resolved = fs::canonicalize(&path)
            .map_err(|source| DepositionError::UnreadableFile { path: path.clone(), source })?;
        if !resolved.starts_with(canonical_root) {
            return Err(DepositionError::SymlinkEscape(path));
        }
        resolved
    } else {
        path.clone()
    };
    let (size, sha256) =
        sha256_file(&target).map_err(|source| DepositionError::UnreadableFile { path, source })?;
    Ok(ManifestEntry { path: rel.to_string(), size, sha256 })
}

/// Hashes the given root-relative files (in any order, concurrently) and
/// returns the sorted manifest.
pub fn manifest_from_files(root: &Path, files: &[String]) -> Result<DepositionManifest, DepositionError> {
    let canonical_root = fs::canonicalize(root)?;
    let entries = files
        .par_iter()
        .map(|rel| hash_entry(root, &canonical_root, rel))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DepositionManifest::from_entries(entries))
}

pub fn build_manifest(root: &Path, excludes: &[String]) -> Result<DepositionManifest, DepositionError> {
    let files = scan_files(root, excludes)?;
    manifest_from_files(root, &files)
}

fn display_rel(layout: &ResolvedLayout, path: &Path) -> String {
    path.strip_prefix(&layout.root)
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_else(|_| path.to_string_lossy().into_owned())
}

fn kind_name(k: EntryKind) -> &'static str {
    match k {
        EntryKind::File => "file",
        EntryKind::Dir => "directory",
    }
}

/// The local script a command starts with, if any (`./run.sh all` -> `run.sh`).
pub fn command_script(cmd: &str) -> Option<&str> {
    let first = cmd.split_whitespace().next()?;
    if first.starts_with('/') || !first.contains('/') {
        return None;
    }
    Some(first)
}

/// Checks the deposition tree against the structural rules of the config
/// contract. Problems are reported as findings, never as errors.
pub fn validate_structure(layout: &ResolvedLayout) -> Vec<Finding> {
    let mut out = vec![Finding::new(
        &checks::CONFIG_FOUND,
        format!("configuration read from {}", layout.config_location.relative_path()),
    )
    .at(layout.config_location.relative_path())];

    for w in &layout.warnings {
        out.push(Finding::new(&checks::CONFIG_DUPLICATE_KEY, w.to_string()));
    }

    for (key, entry) in &layout.entries {
        let (declared, path, exists, kind) = match entry {
            LayoutEntry::External { reference } => {
                out.push(Finding::new(
                    &checks::LAYOUT_EXTERNAL,
                    format!("{} refers to external resource {reference}", key.env_name()),
                ));
                continue;
            }
            LayoutEntry::Local { declared, path, exists, kind } => (declared, path, *exists, *kind),
        };
        let rel = display_rel(layout, path);
        let expected = key.expected_kind();
        if !exists {
            let check = match key {
                ConfigKey::ReadmePath => &checks::README_MISSING,
                ConfigKey::LicensePath => &checks::LICENSE_MISSING,
                _ => &checks::LAYOUT_MISSING,
            };
            out.push(
                Finding::new(check, format!("{}={declared} does not exist", key.env_name())).at(rel),
            );
        } else if expected.is_some() && kind != expected {
            out.push(
                Finding::new(
                    &checks::LAYOUT_KIND_MISMATCH,
                    format!(
                        "{}={declared} should be a {}",
                        key.env_name(),
                        kind_name(expected.expect("checked"))
                    ),
                )
                .at(rel),
            );
        }
    }

    if layout.entry(ConfigKey::ReadmePath).is_none() {
        out.push(Finding::new(
            &checks::README_UNDECLARED,
            "ARTS_README_PATH is not set; a top-level README is expected",
        ));
    }
    if layout.entry(ConfigKey::LicensePath).is_none() {
        out.push(Finding::new(
            &checks::LICENSE_UNDECLARED,
            "ARTS_LICENSE_PATH is not set; a deposition without a license is unusable",
        ));
    }

    for (key, check) in [
        (ConfigKey::RunCmd, &checks::RUN_CMD_TARGET_MISSING),
        (ConfigKey::SetupCmd, &checks::SETUP_CMD_TARGET_MISSING),
    ] {
        let Some(cmd) = layout.config.get(key) else { continue };
        let Some(script) = command_script(cmd) else { continue };
        let Some(parts) = crate::envconfig::normalize_relative(script) else {
            out.push(Finding::new(check, format!("{} script {script} is outside the root", key.env_name())));
            continue;
        };
        let mut path = layout.root.clone();
        path.extend(parts);
        if !path.is_file() {
            out.push(
                Finding::new(check, format!("{} script {script} does not exist", key.env_name()))
                    .at(display_rel(layout, &path)),
            );
        }
    }
    if layout.config.setup_cmd.is_none() {
        out.push(Finding::new(&checks::SETUP_CMD_UNDECLARED, "no ARTS_SETUP_CMD declared"));
    }
    out
}

fn zip_options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .compression_level(Some(6))
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644)
}

/// Writes a deterministic zip of the manifest's files plus the manifest itself.
/// Every file is re-hashed while it is copied; any difference from the
/// manifest aborts with [`DepositionError::StaleManifest`] and no archive is left behind.
pub fn package(root: &Path, manifest: &DepositionManifest, out: &Path) -> Result<String, DepositionError> {
    if manifest.get(MANIFEST_FILE).is_some() {
        return Err(DepositionError::ReservedPath);
    }
    let result = write_package(root, manifest, out);
    if result.is_err() {
        let _ = fs::remove_file(out);
    }
    result
}

fn write_package(root: &Path, manifest: &DepositionManifest, out: &Path) -> Result<String, DepositionError> {
    let canonical_root = fs::canonicalize(root)?;
    let mut zip = ZipWriter::new(File::create(out)?);
    for entry in &manifest.entries {
        let current = hash_entry(root, &canonical_root, &entry.path)
            .map_err(|_| DepositionError::StaleManifest(entry.path.clone()))?;
        if current != *entry {
            return Err(DepositionError::StaleManifest(entry.path.clone()));
        }
        let data = fs::read(root.join(&entry.path))?;
        // content may change between hashing and reading
        if hex::encode(Sha256::digest(&data)) != entry.sha256 {
            return Err(DepositionError::StaleManifest(entry.path.clone()));
        }
        zip.start_file(entry.path.as_str(), zip_options())?;
        zip.write_all(&data)?;
    }
    zip.start_file(MANIFEST_FILE, zip_options())?;
    zip.write_all(manifest.to_json().as_bytes())?;
    zip.finish()?.sync_all()?;
    Ok(sha256_file(out)?.1)
}
