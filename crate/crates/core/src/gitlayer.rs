//! Git repositories inside a deposition.
//!
//! Reading is native: a bare repository is checked for what a dumb HTTP
//! client needs (`info/refs`, loose objects, `objects/info/packs`). Writing
//! (clone, update-server-info) shells out to `git`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::report::finding::{checks, Finding};
use crate::tsa::{self, TimestampRecord, TsaError};

#[derive(Debug, Error)]
pub enum GitError {
    #[error("git executable not found")]
    GitUnavailable,
    #[error("git exited with {code}: {stderr}")]
    GitFailed { code: i32, stderr: String },
    #[error("a post-commit hook already exists at {0} (use --force to replace it)")]
    HookExists(PathBuf),
    #[error("{0} is not a git worktree")]
    NotAWorktree(PathBuf),
    #[error(transparent)]
    Tsa(#[from] TsaError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RepoKind {
    Bare,
    Worktree,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepoAssessment {
    pub kind: RepoKind,
    pub has_info_refs: bool,
    pub has_head: bool,
    pub has_objects_layout: bool,
    pub packed: bool,
    pub findings: Vec<Finding>,
}

impl RepoAssessment {
    fn none() -> RepoAssessment {
        RepoAssessment {
            kind: RepoKind::None,
            has_info_refs: false,
            has_head: false,
            has_objects_layout: false,
            packed: false,
            findings: Vec::new(),
        }
    }

    pub fn fail_count(&self) -> usize {
        self.findings.iter().filter(|f| f.is_fail()).count()
    }
}

fn is_bare_layout(dir: &Path) -> bool {
    dir.join("HEAD").is_file() && dir.join("objects").is_dir() && dir.join("refs").is_dir()
}

pub fn detect_kind(path: &Path) -> RepoKind {
    if is_bare_layout(path) {
        RepoKind::Bare
    } else if path.join(".git").exists() {
        RepoKind::Worktree
    } else {
        RepoKind::None
    }
}

fn is_object_id(s: &str) -> bool {
    (s.len() == 40 || s.len() == 64) && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Parses `info/refs`: one `<id>\t<refname>` per line.
pub fn parse_info_refs(text: &str) -> Result<Vec<(String, String)>, usize> {
    let mut refs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((id, name)) if is_object_id(id) && !name.is_empty() => refs.push((id.to_string(), name.to_string())),
            _ => return Err(i + 1),
        }
    }
    Ok(refs)
}

/// Pack names listed in `objects/info/packs` (`P pack-….pack` lines).
fn listed_packs(objects: &Path) -> io::Result<Vec<String>> {
    match fs::read_to_string(objects.join("info").join("packs")) {
        Ok(text) => Ok(text
            .lines()
            .filter_map(|l| l.strip_prefix("P "))
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

/// Refs as stored in the repository: `packed-refs` overlaid with loose files
/// under `refs/`. Symbolic refs are skipped.
fn stored_refs(repo: &Path) -> BTreeMap<String, String> {
    let mut refs = BTreeMap::new();
    if let Ok(text) = fs::read_to_string(repo.join("packed-refs")) {
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('^')) {
            if let Some((id, name)) = line.split_once(' ') {
                if is_object_id(id) {
                    refs.insert(name.to_string(), id.to_string());
                }
            }
        }
    }
    for entry in walkdir::WalkDir::new(repo.join("refs")).into_iter().flatten() {
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(repo) else { continue };
        let Ok(text) = fs::read_to_string(entry.path()) else { continue };
        let id = text.trim();
        if is_object_id(id) {
            let name: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
            refs.insert(name.join("/"), id.to_string());
        }
    }
    refs
}

fn loose_object_exists(objects: &Path, id: &str) -> bool {
    objects.join(&id[..2]).join(&id[2..]).is_file()
}

const PACK_IDX_MAGIC: [u8; 4] = [0xff, b't', b'O', b'c'];

/// Whether a version 2 pack index lists `id`. `None` when the index is not
/// a readable v2 file for ids of this length.
pub fn pack_index_contains(idx: &[u8], id: &str) -> Option<bool> {
    let want = hex::decode(id).ok()?;
    let width = want.len();
    if idx.len() < 8 + 256 * 4 || idx[..4] != PACK_IDX_MAGIC || idx[4..8] != [0, 0, 0, 2] {
        return None;
    }
    let fanout = |i: usize| -> usize {
        let o = 8 + 4 * i;
        u32::from_be_bytes(idx[o..o + 4].try_into().expect("4 bytes")) as usize
    };
    let total = fanout(255);
    let names = idx.get(8 + 256 * 4..8 + 256 * 4 + total * width)?;
    let lo = if want[0] == 0 { 0 } else { fanout(want[0] as usize - 1) };
    let hi = fanout(want[0] as usize);
    if lo > hi || hi > total {
        return None;
    }
    let slice: Vec<&[u8]> = names[lo * width..hi * width].chunks(width).collect();
    Some(slice.binary_search(&want.as_slice()).is_ok())
}

/// Classifies `path` and, for bare repositories, checks dumb-HTTP servability.
pub fn assess_repo(path: &Path) -> Result<RepoAssessment, GitError> {
    if !path.is_dir() {
        return Err(io::Error::new(io::ErrorKind::NotFound, format!("{} is not a directory", path.display())).into());
    }
    let shown = path.display().to_string();
    match detect_kind(path) {
        RepoKind::None => Ok(RepoAssessment::none()),
        RepoKind::Worktree => {
            let git_dir = path.join(".git");
            Ok(RepoAssessment {
                kind: RepoKind::Worktree,
                has_info_refs: git_dir.join("info").join("refs").is_file(),
                has_head: git_dir.join("HEAD").is_file(),
                has_objects_layout: git_dir.join("objects").is_dir(),
                packed: false,
                findings: vec![Finding::new(
                    &checks::GIT_NOT_BARE,
                    "repository is a worktree; deposit a bare clone prepared with update-server-info",
                )
                .at(shown)],
            })
        }
        RepoKind::Bare => assess_bare(path, shown),
    }
}

fn assess_bare(path: &Path, shown: String) -> Result<RepoAssessment, GitError> {
    let objects = path.join("objects");
    let mut a = RepoAssessment {
        kind: RepoKind::Bare,
        has_info_refs: false,
        has_head: true,
        has_objects_layout: true,
        packed: false,
        findings: Vec::new(),
    };

    let packs = listed_packs(&objects)?;
    let pack_dir = objects.join("pack");
    let mut packs_ok = !packs.is_empty();
    for pack in &packs {
        if !pack_dir.join(pack).is_file() {
            packs_ok = false;
            a.findings.push(
                Finding::new(&checks::GIT_PACK_MISSING, format!("objects/info/packs lists {pack}, which does not exist"))
                    .at(shown.clone()),
            );
        }
    }
    a.packed = !packs.is_empty()
        || fs::read_dir(&pack_dir)
            .map(|rd| rd.flatten().any(|e| e.file_name().to_string_lossy().ends_with(".pack")))
            .unwrap_or(false);

    let info_refs = path.join("info").join("refs");
    let text = match fs::read(&info_refs) {
        Ok(bytes) => bytes,
        Err(e) if matches!(e.kind(), io::ErrorKind::NotFound | io::ErrorKind::IsADirectory) => {
            a.findings.push(
                Finding::new(&checks::GIT_INFO_REFS_MISSING, "info/refs is missing; run `git update-server-info`")
                    .at(shown),
            );
            return Ok(a);
        }
        Err(e) => return Err(e.into()),
    };
    if info_refs.is_dir() {
        a.findings.push(Finding::new(&checks::GIT_INFO_REFS_MISSING, "info/refs is not a file").at(shown));
        return Ok(a);
    }
    a.has_info_refs = true;

    let refs = match std::str::from_utf8(&text).map_err(|_| 0).and_then(parse_info_refs) {
        Ok(r) => r,
        Err(line) => {
            a.findings.push(
                Finding::new(&checks::GIT_INFO_REFS_MALFORMED, format!("info/refs is malformed at line {line}"))
                    .at(shown),
            );
            return Ok(a);
        }
    };

    let indexes: Vec<Vec<u8>> = if packs_ok {
        packs.iter().filter_map(|p| fs::read(pack_dir.join(p.replace(".pack", ".idx"))).ok()).collect()
    } else {
        Vec::new()
    };
    let advertised: BTreeMap<String, String> = refs
        .iter()
        .filter(|(_, name)| !name.ends_with("^{}"))
        .map(|(id, name)| (name.clone(), id.clone()))
        .collect();
    let stored = stored_refs(path);
    if advertised != stored {
        let differing = stored
            .keys()
            .chain(advertised.keys())
            .filter(|n| stored.get(*n) != advertised.get(*n))
            .cloned()
            .collect::<std::collections::BTreeSet<_>>();
        let names: Vec<String> = differing.into_iter().collect();
        a.findings.push(
            Finding::new(
                &checks::GIT_INFO_REFS_STALE,
                format!("info/refs disagrees with refs/ on {}; rerun `git update-server-info`", names.join(", ")),
            )
            .at(shown.clone()),
        );
    }

    let before = a.findings.len();
    for (id, name) in &refs {
        if loose_object_exists(&objects, id) {
            continue;
        }
        let lookups: Vec<Option<bool>> = indexes.iter().map(|idx| pack_index_contains(idx, id)).collect();
        if lookups.contains(&Some(true)) {
            continue;
        }
        let unreadable = indexes.len() < packs.len() || lookups.contains(&None);
        let finding = if packs_ok && unreadable {
            Finding::new(&checks::GIT_OBJECT_UNVERIFIED, format!("{name} ({id}) is not loose and a pack index is unreadable"))
        } else {
            Finding::new(&checks::GIT_OBJECT_MISSING, format!("{name} ({id}) is not present in the object store"))
        };
        a.findings.push(finding.at(shown.clone()));
    }
    if a.findings.len() == before && !a.findings.iter().any(Finding::is_fail) {
        a.findings.push(
            Finding::new(&checks::GIT_REPO_OK, format!("bare repository with {} servable ref(s)", refs.len())).at(shown),
        );
    }
    Ok(a)
}

fn git() -> Command {
    let mut cmd = Command::new("git");
    cmd.env("GIT_TERMINAL_PROMPT", "0").env_remove("GIT_DIR").env_remove("GIT_WORK_TREE");
    cmd
}

fn run_git(cmd: &mut Command) -> Result<String, GitError> {
    let out = cmd.output().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => GitError::GitUnavailable,
        _ => GitError::Io(e),
    })?;
    if !out.status.success() {
        let stderr = String::from_utf8_lossy(&out.stderr);
        let excerpt: String = stderr.trim().chars().take(500).collect();
        return Err(GitError::GitFailed { code: out.status.code().unwrap_or(-1), stderr: excerpt });
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

pub fn git_available() -> bool {
    git().arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

pub fn rev_parse(repo: &Path, rev: &str) -> Result<String, GitError> {
    Ok(run_git(git().arg("-C").arg(repo).args(["rev-parse", "--verify", "--end-of-options", rev]))?
        .trim()
        .to_string())
}

/// Clones `worktree` to a bare repository at `dest` and makes it dumb-HTTP servable.
pub fn prepare_for_deposition(worktree: &Path, dest: &Path) -> Result<RepoAssessment, GitError> {
    if !git_available() {
        return Err(GitError::GitUnavailable);
    }
    run_git(git().args(["clone", "--bare", "--quiet", "--"]).arg(worktree).arg(dest))?;
    run_git(git().arg("-C").arg(dest).arg("update-server-info"))?;
    // hook samples are noise in a deposition
    let hooks = dest.join("hooks");
    if hooks.is_dir() {
        for entry in fs::read_dir(&hooks)?.flatten() {
            if entry.file_name().to_string_lossy().ends_with(".sample") {
                fs::remove_file(entry.path())?;
            }
        }
    }
    assess_repo(dest)
}

pub const HOOK_MARKER: &str = "# installed by arts: trusted timestamp on commit";

#[derive(Debug, Clone, Default)]
pub struct HookOptions {
    pub force: bool,
    /// Binary the hook invokes; defaults to the running executable.
    pub arts_bin: Option<PathBuf>,
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// `.git` directory of a worktree, following `gitdir:` files.
pub fn git_dir(worktree: &Path) -> Result<PathBuf, GitError> {
    let dot = worktree.join(".git");
    if dot.is_dir() {
        return Ok(dot);
    }
    if dot.is_file() {
        let text = fs::read_to_string(&dot)?;
        if let Some(p) = text.trim().strip_prefix("gitdir:") {
            let p = Path::new(p.trim());
            return Ok(if p.is_absolute() { p.to_path_buf() } else { worktree.join(p) });
        }
    }
    Err(GitError::NotAWorktree(worktree.to_path_buf()))
}

pub fn hook_script(arts_bin: &Path, tsa_url: &str) -> String {
    format!(
        "#!/bin/sh\n{HOOK_MARKER}\n\
         top=$(git rev-parse --show-toplevel) || exit 0\n\
         {} timestamp commit --repo \"$top\" --tsa {} || echo 'arts: timestamp request failed' >&2\n",
        shell_quote(&arts_bin.to_string_lossy()),
        shell_quote(tsa_url),
    )
}

/// Writes an executable post-commit hook that timestamps every new commit.
pub fn install_timestamp_hook(repo: &Path, tsa_url: &str, opts: &HookOptions) -> Result<PathBuf, GitError> {
    let hooks = git_dir(repo)?.join("hooks");
    fs::create_dir_all(&hooks)?;
    let hook = hooks.join("post-commit");
    if hook.exists() {
        if !opts.force {
            return Err(GitError::HookExists(hook));
        }
        let existing = fs::read_to_string(&hook).unwrap_or_default();
        if !existing.contains(HOOK_MARKER) {
            fs::rename(&hook, hooks.join("post-commit.bak"))?;
        }
    }
    let bin = match &opts.arts_bin {
        Some(b) => b.clone(),
        None => std::env::current_exe()?,
    };
    fs::write(&hook, hook_script(&bin, tsa_url))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&hook, fs::Permissions::from_mode(0o755))?;
    }
    Ok(hook)
}

/// Where commit timestamps of a worktree are recorded.
pub fn commit_store(repo: &Path) -> Result<PathBuf, GitError> {
    Ok(git_dir(repo)?.join("arts").join(tsa::STORE_FILE))
}

/// Timestamps HEAD of `repo` and appends the record to its commit store.
///
/// The digest is SHA-256 of the commit id's hex text; the record path is
/// `commit:<id>`.
pub fn timestamp_commit(repo: &Path, tsa_url: &str) -> Result<TimestampRecord, GitError> {
    let id = rev_parse(repo, "HEAD")?;
    let digest = Sha256::digest(id.as_bytes());
    let token = tsa::request_digest_timestamp(tsa_url, &digest)?;
    let record = TimestampRecord::from_token(format!("commit:{id}"), hex::encode(digest), tsa_url, &token);
    let store = commit_store(repo)?;
    fs::create_dir_all(store.parent().expect("store has a parent"))?;
    tsa::append_record(&store, record.clone())?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: &str = "0123456789abcdef0123456789abcdef01234567";

    fn fake_bare(dir: &Path) {
        fs::create_dir_all(dir.join("objects/info")).unwrap();
        fs::create_dir_all(dir.join("refs/heads")).unwrap();
        fs::write(dir.join("HEAD"), "ref: refs/heads/main\n").unwrap();
        fs::write(dir.join("refs/heads/main"), format!("{ID}\n")).unwrap();
    }

    fn ids(a: &RepoAssessment) -> Vec<&str> {
        a.findings.iter().map(|f| f.id.as_str()).collect()
    }

    #[test]
    fn empty_directory_is_none() {
        let d = tempfile::tempdir().unwrap();
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(a, RepoAssessment::none());
    }

    #[test]
    fn bare_without_info_refs_fails() {
        let d = tempfile::tempdir().unwrap();
        fake_bare(d.path());
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(a.kind, RepoKind::Bare);
        assert!(!a.has_info_refs);
        assert_eq!(ids(&a), ["git.info_refs.missing"]);
    }

    #[test]
    fn loose_object_resolves() {
        let d = tempfile::tempdir().unwrap();
        fake_bare(d.path());
        fs::create_dir_all(d.path().join("info")).unwrap();
        fs::write(d.path().join("info/refs"), format!("{ID}\trefs/heads/main\n")).unwrap();
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(ids(&a), ["git.object.missing"]);

        fs::create_dir_all(d.path().join("objects/01")).unwrap();
        fs::write(d.path().join("objects/01").join(&ID[2..]), b"x").unwrap();
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(ids(&a), ["git.repo.servable"]);
        assert_eq!(a.fail_count(), 0);
    }

    /// Minimal v2 pack index listing `ids` (offsets and CRCs left out).
    fn idx_v2(ids: &[&str]) -> Vec<u8> {
        let mut names: Vec<Vec<u8>> = ids.iter().map(|i| hex::decode(i).unwrap()).collect();
        names.sort();
        let mut out = vec![0xff, b't', b'O', b'c', 0, 0, 0, 2];
        for b in 0..256usize {
            let n = names.iter().filter(|x| (x[0] as usize) <= b).count() as u32;
            out.extend_from_slice(&n.to_be_bytes());
        }
        names.iter().for_each(|x| out.extend_from_slice(x));
        out
    }

    #[test]
    fn pack_index_lookup() {
        let other = "fedcba9876543210fedcba9876543210fedcba98";
        let idx = idx_v2(&[ID, other]);
        assert_eq!(pack_index_contains(&idx, ID), Some(true));
        assert_eq!(pack_index_contains(&idx, other), Some(true));
        assert_eq!(pack_index_contains(&idx, "0123456789abcdef0123456789abcdef01234568"), Some(false));
        assert_eq!(pack_index_contains(&idx_v2(&[]), ID), Some(false));
        assert_eq!(pack_index_contains(b"PACK", ID), None);
    }

    #[test]
    fn packed_refs_are_checked_against_the_index() {
        let d = tempfile::tempdir().unwrap();
        fake_bare(d.path());
        fs::create_dir_all(d.path().join("info")).unwrap();
        fs::create_dir_all(d.path().join("objects/pack")).unwrap();
        fs::write(d.path().join("info/refs"), format!("{ID}\trefs/heads/main\n")).unwrap();
        fs::write(d.path().join("objects/info/packs"), "P pack-1.pack\n\n").unwrap();
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(ids(&a), ["git.pack.missing", "git.object.missing"]);

        // pack present but no readable index
        fs::write(d.path().join("objects/pack/pack-1.pack"), b"PACK").unwrap();
        let a = assess_repo(d.path()).unwrap();
        assert!(a.packed);
        assert_eq!(ids(&a), ["git.object.unverified"]);

        fs::write(d.path().join("objects/pack/pack-1.idx"), idx_v2(&[])).unwrap();
        assert_eq!(ids(&assess_repo(d.path()).unwrap()), ["git.object.missing"]);

        fs::write(d.path().join("objects/pack/pack-1.idx"), idx_v2(&[ID])).unwrap();
        assert_eq!(ids(&assess_repo(d.path()).unwrap()), ["git.repo.servable"]);
    }

    #[test]
    fn info_refs_must_match_stored_refs() {
        let d = tempfile::tempdir().unwrap();
        fake_bare(d.path());
        fs::create_dir_all(d.path().join("info")).unwrap();
        fs::create_dir_all(d.path().join("objects/01")).unwrap();
        fs::write(d.path().join("objects/01").join(&ID[2..]), b"x").unwrap();
        let tag = "refs/tags/v1";
        fs::write(d.path().join("info/refs"), format!("{ID}\trefs/heads/main\n{ID}\t{tag}\n{ID}\t{tag}^{{}}\n")).unwrap();
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(ids(&a), ["git.info_refs.stale", "git.repo.servable"]);
        assert!(a.findings[0].message.contains(tag));

        // the tag lives in packed-refs, with its peeled line
        fs::write(d.path().join("packed-refs"), format!("# pack-refs with: peeled\n{ID} {tag}\n^{ID}\n")).unwrap();
        assert_eq!(ids(&assess_repo(d.path()).unwrap()), ["git.repo.servable"]);

        // a loose ref overrides its packed copy
        let other = "fedcba9876543210fedcba9876543210fedcba98";
        fs::create_dir_all(d.path().join("refs/tags")).unwrap();
        fs::write(d.path().join("refs/tags/v1"), format!("{other}\n")).unwrap();
        assert_eq!(ids(&assess_repo(d.path()).unwrap()), ["git.info_refs.stale", "git.repo.servable"]);
    }

    #[test]
    fn malformed_info_refs() {
        assert_eq!(parse_info_refs("zz\trefs/heads/x\n"), Err(1));
        assert_eq!(parse_info_refs(&format!("{ID}\trefs/a\n{ID} refs/b\n")), Err(2));
        assert_eq!(parse_info_refs("").unwrap(), vec![]);
    }

    #[test]
    fn worktree_warns() {
        let d = tempfile::tempdir().unwrap();
        fake_bare(&d.path().join(".git"));
        let a = assess_repo(d.path()).unwrap();
        assert_eq!(a.kind, RepoKind::Worktree);
        assert_eq!(ids(&a), ["git.not_bare"]);
    }

    #[test]
    fn hook_script_quotes() {
        let s = hook_script(Path::new("/opt/it's/arts"), "http://x/tsa");
        assert!(s.starts_with("#!/bin/sh\n"));
        assert!(s.contains(r"'/opt/it'\''s/arts' timestamp commit"));
        assert!(s.contains("--tsa 'http://x/tsa'"));
    }

    #[test]
    fn hook_refuses_then_backs_up() {
        let d = tempfile::tempdir().unwrap();
        fake_bare(&d.path().join(".git"));
        let hooks = d.path().join(".git/hooks");
        fs::create_dir_all(&hooks).unwrap();
        fs::write(hooks.join("post-commit"), "#!/bin/sh\necho mine\n").unwrap();
        let opts = HookOptions { force: false, arts_bin: Some("/bin/arts".into()) };
        assert!(matches!(install_timestamp_hook(d.path(), "http://x", &opts), Err(GitError::HookExists(_))));
        let opts = HookOptions { force: true, ..opts };
        install_timestamp_hook(d.path(), "http://x", &opts).unwrap();
        assert_eq!(fs::read_to_string(hooks.join("post-commit.bak")).unwrap(), "#!/bin/sh\necho mine\n");
        assert!(fs::read_to_string(hooks.join("post-commit")).unwrap().contains(HOOK_MARKER));
    }
}
