//! Container workflow contract and host-side execution of the declared commands.
//!
//! `ARTS_RUN_CMD` is run on the host through `sh -c` from the deposition root;
//! it is expected to launch the container engine itself.

use std::collections::BTreeSet;
use std::ffi::OsStr;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::deposition::{self, command_script, DepositionError, DepositionManifest};
use crate::envconfig::{ConfigKey, LayoutEntry, ResolvedLayout};
use crate::report::finding::{checks, Finding};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3600);
pub const CONTAINERFILE_NAMES: [&str; 2] = ["Containerfile", "Dockerfile"];
/// Workflow subcommands looked for in the run script.
pub const KNOWN_SUBCOMMANDS: [&str; 8] =
    ["generate-figures", "jupyter", "notebook", "lab", "ipython", "shell", "bash", "save-image"];
const INTERACTIVE_ENV: [&str; 3] = ["jupyter", "notebook", "lab"];
const INTERACTIVE_CLI: [&str; 3] = ["ipython", "shell", "bash"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineName {
    Podman,
    Docker,
}

impl EngineName {
    pub fn binary(self) -> &'static str {
        match self {
            EngineName::Podman => "podman",
            EngineName::Docker => "docker",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineInfo {
    /// `None` when neither engine was found.
    pub name: Option<EngineName>,
    pub version: String,
    pub available: bool,
}

fn parse_engine_version(text: &str) -> Option<String> {
    text.split_whitespace()
        .map(|t| t.trim_end_matches(','))
        .find(|t| t.starts_with(|c: char| c.is_ascii_digit()))
        .map(str::to_string)
}

fn find_executable(name: &str, search_path: &OsStr) -> Option<PathBuf> {
    std::env::split_paths(search_path).map(|d| d.join(name)).find(|p| {
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            p.metadata().map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0).unwrap_or(false)
        }
        #[cfg(not(unix))]
        {
            p.is_file()
        }
    })
}

/// Probes podman, then docker, on `search_path`.
pub fn detect_engine_in(search_path: &OsStr) -> EngineInfo {
    for name in [EngineName::Podman, EngineName::Docker] {
        let Some(exe) = find_executable(name.binary(), search_path) else { continue };
        let Ok(out) = Command::new(&exe).arg("--version").stdin(Stdio::null()).output() else { continue };
        if !out.status.success() {
            continue;
        }
        if let Some(version) = parse_engine_version(&String::from_utf8_lossy(&out.stdout)) {
            return EngineInfo { name: Some(name), version, available: true };
        }
    }
    EngineInfo { name: None, version: String::new(), available: false }
}

pub fn detect_engine() -> EngineInfo {
    detect_engine_in(&std::env::var_os("PATH").unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractCheck {
    pub containerfile_present: bool,
    pub env_dir_declared: bool,
    pub run_cmd_declared: bool,
    pub setup_cmd_declared: bool,
    pub declared_subcommands: BTreeSet<String>,
    pub findings: Vec<Finding>,
}

/// Known subcommand names appearing as whole tokens in `script`.
pub fn scan_subcommands(script: &str) -> BTreeSet<String> {
    script
        .lines()
        .map(|l| l.split_once('#').map_or(l, |(code, _)| code))
        .flat_map(|l| l.split(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_')))
        .filter(|t| KNOWN_SUBCOMMANDS.contains(t))
        .map(str::to_string)
        .collect()
}

pub fn check_contract(layout: &ResolvedLayout) -> ContractCheck {
    let cfg = &layout.config;
    let mut findings = Vec::new();

    let env_entry = layout.entry(ConfigKey::EnvPath);
    let env_dir_declared = env_entry.is_some();
    let search_dir = match env_entry {
        Some(LayoutEntry::Local { path, .. }) => Some(path.clone()),
        Some(LayoutEntry::External { .. }) => None,
        None => Some(layout.root.clone()),
    };
    let containerfile = search_dir
        .as_ref()
        .and_then(|d| CONTAINERFILE_NAMES.iter().map(|n| d.join(n)).find(|p| p.is_file()));
    let containerfile_present = containerfile.is_some();
    match (&search_dir, &containerfile) {
        (_, Some(p)) => findings.push(
            Finding::new(&checks::CONTAINER_DEFINITION_FOUND, "container definition present").at(rel(layout, p)),
        ),
        (Some(d), None) => findings.push(
            Finding::new(&checks::CONTAINER_DEFINITION_MISSING, "no Containerfile or Dockerfile found").at(rel(layout, d)),
        ),
        (None, None) => findings.push(Finding::new(
            &checks::CONTAINER_IMAGE_UNCHECKED,
            "environment is held externally; container definition not checked",
        )),
    }

    let run_cmd = cfg.get(ConfigKey::RunCmd);
    let mut declared_subcommands = BTreeSet::new();
    match run_cmd {
        None => findings.push(Finding::new(&checks::CONTAINER_RUN_CMD_MISSING, "ARTS_RUN_CMD is not declared")),
        Some(cmd) => {
            let script = command_script(cmd).map(|s| layout.root.join(s));
            match script.as_ref().and_then(|p| fs::read(p).ok()) {
                Some(bytes) => {
                    declared_subcommands = scan_subcommands(&String::from_utf8_lossy(&bytes));
                    let has = |set: &[&str]| set.iter().any(|s| declared_subcommands.contains(*s));
                    if !has(&INTERACTIVE_ENV) {
                        findings.push(Finding::new(
                            &checks::CONTAINER_INTERACTIVE_ENV_UNDECLARED,
                            "run script exposes no interactive development environment (e.g. jupyter)",
                        ));
                    }
                    if !has(&INTERACTIVE_CLI) {
                        findings.push(Finding::new(
                            &checks::CONTAINER_INTERACTIVE_CLI_UNDECLARED,
                            "run script exposes no interactive command line (e.g. ipython)",
                        ));
                    }
                }
                None => findings.push(Finding::new(
                    &checks::CONTAINER_WORKFLOWS_UNSCANNED,
                    format!("run command `{cmd}` is not a readable local script; workflows not scanned"),
                )),
            }
        }
    }

    ContractCheck {
        containerfile_present,
        env_dir_declared,
        run_cmd_declared: run_cmd.is_some(),
        setup_cmd_declared: cfg.get(ConfigKey::SetupCmd).is_some(),
        declared_subcommands,
        findings,
    }
}

fn rel(layout: &ResolvedLayout, p: &Path) -> String {
    let r = p.strip_prefix(&layout.root).unwrap_or(p);
    if r.as_os_str().is_empty() {
        ".".into()
    } else {
        r.to_string_lossy().into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Setup,
    Run,
}

impl RunMode {
    fn key(self) -> ConfigKey {
        match self {
            RunMode::Setup => ConfigKey::SetupCmd,
            RunMode::Run => ConfigKey::RunCmd,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Setup => "setup",
            RunMode::Run => "run",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{} is not declared", .0.env_name())]
    CommandMissing(ConfigKey),
    #[error("command timed out after {}s; logs in {}", .timeout.as_secs_f64(), .log_dir.display())]
    Timeout { timeout: Duration, log_dir: PathBuf },
    #[error("another workflow holds {0}")]
    Locked(PathBuf),
    #[error("ARTS_OUTPUT_PATH must be a local directory to diff outputs")]
    OutputNotLocal,
    #[error(transparent)]
    Manifest(#[from] DepositionError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub mode: RunMode,
    pub command: String,
    pub exit_code: i32,
    pub duration_secs: f64,
    pub stdout_path: PathBuf,
    pub stderr_path: PathBuf,
}

impl RunResult {
    pub fn success(&self) -> bool {
        self.exit_code == 0
    }
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(root: &Path) -> Result<Lock, RunError> {
        let dir = root.join(".arts");
        fs::create_dir_all(&dir)?;
        let path = dir.join("lock");
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(Lock(path));
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    if lock_is_stale(&path) {
                        let _ = fs::remove_file(&path);
                        continue;
                    }
                    return Err(RunError::Locked(path));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(RunError::Locked(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn lock_is_stale(path: &Path) -> bool {
    let Ok(text) = fs::read_to_string(path) else { return false };
    let Ok(pid) = text.trim().parse::<i32>() else { return true };
    // SAFETY: signal 0 only checks for existence
    let alive = unsafe { libc::kill(pid, 0) } == 0 || io::Error::last_os_error().raw_os_error() == Some(libc::EPERM);
    !alive
}

fn log_dir(root: &Path, mode: RunMode) -> io::Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = root.join(".arts").join("logs");
    for n in 0.. {
        let name = if n == 0 { format!("{stamp}-{}", mode.as_str()) } else { format!("{stamp}-{}-{n}", mode.as_str()) };
        let dir = base.join(name);
        match fs::create_dir_all(&base).and_then(|_| fs::create_dir(&dir)) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

fn kill_group(pgid: u32, signal: libc::c_int) {
    // SAFETY: plain syscall on a process group we created
    unsafe {
        libc::kill(-(pgid as i32), signal);
    }
}

/// Runs the setup or run command from the deposition root.
///
/// Every config key is exported to the child, plus `ARTS_ROOT`. Inherited
/// `ARTS_*` variables are dropped first so the child sees only the config.
/// On timeout the whole process group is terminated.
pub fn run_workflow(layout: &ResolvedLayout, mode: RunMode, timeout: Duration) -> Result<RunResult, RunError> {
    let command = layout.config.get(mode.key()).ok_or(RunError::CommandMissing(mode.key()))?.to_string();
    let root = &layout.root;
    let _lock = Lock::acquire(root)?;
    let logs = log_dir(root, mode)?;
    let stdout_path = logs.join("stdout.log");
    let stderr_path = logs.join("stderr.log");

    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(&command).current_dir(root).stdin(Stdio::null());
    for (k, _) in std::env::vars_os() {
        if k.to_string_lossy().starts_with("ARTS_") {
            cmd.env_remove(k);
        }
    }
    cmd.envs(layout.config.pairs()).env("ARTS_ROOT", root);
    cmd.stdout(File::create(&stdout_path)?).stderr(File::create(&stderr_path)?);
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }

    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pgid = child.id();
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break s;
        }
        if start.elapsed() >= timeout {
            kill_group(pgid, libc::SIGTERM);
            let grace = Instant::now();
            while grace.elapsed() < Duration::from_secs(2) {
                if child.try_wait()?.is_some() {
                    break;
                }
                std::thread::sleep(Duration::from_millis(20));
            }
            kill_group(pgid, libc::SIGKILL);
            let _ = child.wait();
            return Err(RunError::Timeout { timeout, log_dir: logs });
        }
        std::thread::sleep(Duration::from_millis(10));
    };

    let exit_code = status.code().unwrap_or_else(|| {
        #[cfg(unix)]
        {
            use std::os::unix::process::ExitStatusExt;
            128 + status.signal().unwrap_or(0)
        }
        #[cfg(not(unix))]
        {
            -1
        }
    });
    Ok(RunResult {
        mode,
        command,
        exit_code,
        duration_secs: start.elapsed().as_secs_f64(),
        stdout_path,
        stderr_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileStatus {
    Unchanged,
    Changed,
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDiff {
    pub path: String,
    pub status: FileStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reproduced,
    NotReproduced,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproductionReport {
    pub run: RunResult,
    pub files: Vec<FileDiff>,
    pub verdict: Verdict,
}

impl ReproductionReport {
    pub fn count(&self, status: FileStatus) -> usize {
        self.files.iter().filter(|f| f.status == status).count()
    }
}

/// Compares two manifests entry by entry, sorted by path.
pub fn diff_manifests(before: &DepositionManifest, after: &DepositionManifest) -> Vec<FileDiff> {
    let mut out = Vec::new();
    for e in &before.entries {
        let status = match after.get(&e.path) {
            None => FileStatus::Removed,
            Some(a) if a.sha256 == e.sha256 => FileStatus::Unchanged,
            Some(_) => FileStatus::Changed,
        };
        out.push(FileDiff { path: e.path.clone(), status });
    }
    for e in &after.entries {
        if before.get(&e.path).is_none() {
            out.push(FileDiff { path: e.path.clone(), status: FileStatus::Added });
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    out
}

fn snapshot(dir: &Path) -> Result<DepositionManifest, RunError> {
    if dir.is_dir() {
        Ok(deposition::build_manifest(dir, &[])?)
    } else {
        Ok(DepositionManifest::from_entries(Vec::new()))
    }
}

/// Reruns the analysis and diffs the output directory against what was there.
pub fn reproduce_and_diff(layout: &ResolvedLayout, timeout: Duration) -> Result<ReproductionReport, RunError> {
    if layout.config.get(ConfigKey::RunCmd).is_none() {
        return Err(RunError::CommandMissing(ConfigKey::RunCmd));
    }
    let output = match layout.entry(ConfigKey::OutputPath) {
        Some(LayoutEntry::Local { path, .. }) => path.clone(),
        Some(LayoutEntry::External { .. }) => return Err(RunError::OutputNotLocal),
        None => return Err(RunError::CommandMissing(ConfigKey::OutputPath)),
    };
    let before = snapshot(&output)?;
    let run = run_workflow(layout, RunMode::Run, timeout)?;
    let after = snapshot(&output)?;
    let files = diff_manifests(&before, &after);
    let broken = files.iter().any(|f| matches!(f.status, FileStatus::Changed | FileStatus::Removed));
    let verdict = if run.success() && !broken { Verdict::Reproduced } else { Verdict::NotReproduced };
    Ok(ReproductionReport { run, files, verdict })
}
