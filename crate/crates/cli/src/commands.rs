use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use arts_core::deposition::{self, DepositionManifest};
use arts_core::envconfig::{self, ResolvedLayout};
use arts_core::gitlayer::{self, GitError, HookOptions, RepoAssessment};
use arts_core::report::{self, license::LicenseKind, ComplianceReport, Grade, REPORT_FILE};
use arts_core::runner::{self, FileStatus, RunError, RunMode, Verdict};
use arts_core::tickdrift::{self, AnalysisParams, DriftMethod, SynthSpec, WavFormat};
use arts_core::tsa::{self, stub::StubTsa, TsaError};
use serde_json::json;

use crate::{
    Command, EnvelopeCells, Failure, GitCommand, Outcome, TickdriftCommand, TimestampCommand, WavOut,
};

const DEFAULT_EXCLUDES: [&str; 2] = [".arts/**", ".git/**"];

pub fn dispatch(command: Command) -> Result<Outcome, Failure> {
    match command {
        Command::Init(a) => init(&a.dir, a.license.as_deref(), a.force),
        Command::Validate(a) => validate(&a.root, a.write_report),
        Command::Manifest(a) => manifest(&a.root, &a.excludes, a.output.as_deref()),
        Command::Package(a) => package(&a.root, &a.output, &a.excludes),
        Command::Timestamp(t) => timestamp(t),
        Command::Git(g) => git(g),
        Command::Run(a) => run(a.setup, &a.root, a.timeout),
        Command::Reproduce(a) => reproduce(&a.root, a.timeout),
        Command::Archives(a) => archives(a.name.as_deref()),
        Command::Tickdrift(t) => tickdrift_cmd(t),
    }
}

const RUN_SH: &str = r#"#!/bin/sh
# Entry point for the analysis container.
set -e
IMAGE=${IMAGE:-arts-deposition}
ENGINE=${ENGINE:-$(command -v podman || command -v docker || true)}

case "${1:-generate-figures}" in
  generate-figures)
    echo "replace with the command that regenerates $ARTS_OUTPUT_PATH" ;;
  jupyter)
    "$ENGINE" run --rm -it -p 8888:8888 -v "$PWD":/work "$IMAGE" jupyter lab --ip=0.0.0.0 ;;
  ipython)
    "$ENGINE" run --rm -it -v "$PWD":/work "$IMAGE" ipython ;;
  save-image)
    "$ENGINE" save -o image.tar "$IMAGE" ;;
  *)
    echo "usage: $0 [generate-figures|jupyter|ipython|save-image]" >&2; exit 2 ;;
esac
"#;

const SETUP_SH: &str = r#"#!/bin/sh
# Builds the analysis image from the Containerfile.
set -e
ENGINE=${ENGINE:-$(command -v podman || command -v docker)}
"$ENGINE" build -t "${IMAGE:-arts-deposition}" -f "$ARTS_ENV_PATH/Containerfile" "$ARTS_ENV_PATH"
"#;

const CONTAINERFILE: &str = "FROM docker.io/library/python:3.12-slim\nWORKDIR /work\n";

const README: &str = "# Deposition\n\n\
Describe the data, code and outputs here.\n\n\
## Usage\n\n\
    ./setup.sh               # build the container image\n\
    ./run.sh generate-figures\n\
    ./run.sh jupyter         # interactive notebook\n\
    ./run.sh ipython         # interactive shell\n";

const LICENSE_PLACEHOLDER: &str = "Replace this file with the license text for the deposition.\n";

fn write_new(path: &Path, contents: &str, force: bool, created: &mut Vec<String>, root: &Path) -> Result<(), Failure> {
    if path.exists() && !force {
        return Ok(());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Failure::io)?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    created.push(path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned());
    Ok(())
}

#[cfg(unix)]
fn make_executable(path: &Path) -> Result<(), Failure> {
    use std::os::unix::fs::PermissionsExt;
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).map_err(Failure::io)
}

#[cfg(not(unix))]
fn make_executable(_: &Path) -> Result<(), Failure> {
    Ok(())
}

fn init(dir: &Path, license: Option<&str>, force: bool) -> Result<Outcome, Failure> {
    let license_text = match license {
        Some(id) => LicenseKind::from_spdx(id)
            .and_then(LicenseKind::canonical_text)
            .ok_or_else(|| Failure::io(format!("unknown license id {id}")))?,
        None => LICENSE_PLACEHOLDER,
    };
    fs::create_dir_all(dir).map_err(Failure::io)?;
    let mut created = Vec::new();
    let files: [(&str, &str); 11] = [
        ("config.env", envconfig::emit_default()),
        ("data/raw/.gitkeep", ""),
        ("data/deriv/.gitkeep", ""),
        ("code/.gitkeep", ""),
        ("output/.gitkeep", ""),
        ("env/Containerfile", CONTAINERFILE),
        ("README.md", README),
        ("LICENSE", license_text),
        ("run.sh", RUN_SH),
        ("setup.sh", SETUP_SH),
        (".gitignore", ".arts/\n"),
    ];
    for (rel, contents) in files {
        write_new(&dir.join(rel), contents, force, &mut created, dir)?;
    }
    for script in ["run.sh", "setup.sh"] {
        make_executable(&dir.join(script))?;
    }
    let mut text = String::new();
    for c in &created {
        let _ = writeln!(text, "created {c}");
    }
    if created.is_empty() {
        text.push_str("nothing to do; all files exist (use --force to overwrite)\n");
    }
    Ok(Outcome::ok(json!({ "root": dir.display().to_string(), "created": created }), text))
}

fn validate(root: &Path, write_report: bool) -> Result<Outcome, Failure> {
    let report = report::assess(root).map_err(|e| Failure::io(format!("{}: {e}", root.display())))?;
    if write_report {
        fs::write(root.join(REPORT_FILE), report.to_json()).map_err(Failure::io)?;
    }
    Ok(report_outcome(&report))
}

fn report_outcome(report: &ComplianceReport) -> Outcome {
    let code = if report.grade == Grade::Fail { 1 } else { 0 };
    Outcome { code, json: serde_json::to_value(report).expect("report"), text: report.render_text() }
}

fn excludes(extra: &[String]) -> Vec<String> {
    DEFAULT_EXCLUDES.iter().map(|s| s.to_string()).chain(extra.iter().cloned()).collect()
}

fn manifest(root: &Path, extra: &[String], output: Option<&Path>) -> Result<Outcome, Failure> {
    let m = deposition::build_manifest(root, &excludes(extra)).map_err(Failure::io)?;
    let rendered = m.to_json();
    if let Some(out) = output {
        fs::write(out, &rendered).map_err(Failure::io)?;
    }
    let mut text = String::new();
    for e in &m.entries {
        let _ = writeln!(text, "{}  {:>10}  {}", e.sha256, e.size, e.path);
    }
    let _ = writeln!(text, "root digest {} ({} files)", m.root_digest, m.entries.len());
    Ok(Outcome::ok(serde_json::to_value(&m).expect("manifest"), text))
}

fn package(root: &Path, out: &Path, extra: &[String]) -> Result<Outcome, Failure> {
    let mut ex = excludes(extra);
    // keep the archive out of itself when it is written inside the root
    if let (Ok(r), Some(parent)) = (root.canonicalize(), out.parent()) {
        let parent = if parent.as_os_str().is_empty() { Path::new(".") } else { parent };
        if let Ok(p) = parent.canonicalize() {
            if let Ok(rel) = p.join(out.file_name().unwrap_or_default()).strip_prefix(&r) {
                ex.push(rel.to_string_lossy().into_owned());
            }
        }
    }
    let m: DepositionManifest = deposition::build_manifest(root, &ex).map_err(Failure::io)?;
    let digest = deposition::package(root, &m, out).map_err(Failure::io)?;
    Ok(Outcome::ok(
        json!({
            "output": out.display().to_string(),
            "sha256": digest,
            "files": m.entries.len(),
            "root_digest": m.root_digest,
        }),
        format!("wrote {} ({} files)\nsha256 {digest}\n", out.display(), m.entries.len()),
    ))
}

fn tsa_failure(e: TsaError) -> Failure {
    match e {
        TsaError::Io(_) | TsaError::TransportError(_) | TsaError::SchemaError(_) => Failure::io(e),
        _ => Failure::verification(e),
    }
}

fn git_failure(e: GitError) -> Failure {
    match e {
        GitError::Tsa(t) => tsa_failure(t),
        other => Failure::io(other),
    }
}

fn timestamp(cmd: TimestampCommand) -> Result<Outcome, Failure> {
    match cmd {
        TimestampCommand::File { files, root, tsa } => {
            let store = root.join(tsa::STORE_FILE);
            let mut records = Vec::new();
            let mut text = String::new();
            for f in &files {
                let rec = tsa::request_timestamp(&tsa, &root, f).map_err(tsa_failure)?;
                tsa::append_record(&store, rec.clone()).map_err(tsa_failure)?;
                let _ = writeln!(text, "{}  {}  {}", rec.gen_time, rec.sha256, rec.path);
                records.push(rec);
            }
            Ok(Outcome::ok(json!({ "store": store.display().to_string(), "records": records }), text))
        }
        TimestampCommand::Verify { root } => {
            let records = tsa::read_records(&root.join(tsa::STORE_FILE)).map_err(tsa_failure)?;
            let mut verdicts = Vec::new();
            let mut text = String::new();
            let mut all_pass = true;
            for r in &records {
                let v = if r.path.starts_with("commit:") {
                    let token = r.token_der().and_then(|d| tsa::parse_token_full(&d));
                    let imprint_ok = token.as_ref().map(|t| hex_eq(&t.tst_info.message_imprint, &r.sha256)).unwrap_or(false);
                    json!({ "path": r.path, "imprint_match": imprint_ok, "pass": imprint_ok, "gen_time": r.gen_time })
                } else {
                    match tsa::verify_record(&root, r) {
                        Ok(v) => serde_json::to_value(v).expect("verdict"),
                        Err(e) => json!({ "path": r.path, "pass": false, "error": e.to_string() }),
                    }
                };
                let pass = v["pass"].as_bool().unwrap_or(false);
                all_pass &= pass;
                let _ = writeln!(text, "{} {}", if pass { "ok  " } else { "FAIL" }, r.path);
                verdicts.push(v);
            }
            let _ = writeln!(text, "{} record(s); signatures not checked", records.len());
            Ok(Outcome {
                code: if all_pass { 0 } else { 1 },
                json: json!({ "verdicts": verdicts, "pass": all_pass }),
                text,
            })
        }
        TimestampCommand::Hook { repo, tsa, force } => {
            let hook = gitlayer::install_timestamp_hook(&repo, &tsa, &HookOptions { force, arts_bin: None })
                .map_err(git_failure)?;
            Ok(Outcome::ok(json!({ "hook": hook.display().to_string() }), format!("installed {}\n", hook.display())))
        }
        TimestampCommand::Commit { repo, tsa } => {
            let rec = gitlayer::timestamp_commit(&repo, &tsa).map_err(git_failure)?;
            Ok(Outcome::ok(json!({ "record": rec }), format!("{}  {}\n", rec.gen_time, rec.path)))
        }
        TimestampCommand::Stub { addr } => {
            let stub = StubTsa::start_on(&addr).map_err(Failure::io)?;
            eprintln!("stub TSA (unsigned tokens) listening at {}", stub.url());
            stub.join();
            Ok(Outcome::ok(json!({}), ""))
        }
    }
}

fn hex_eq(bytes: &[u8], hex_str: &str) -> bool {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<String>() == hex_str.to_ascii_lowercase()
}

fn assessment_outcome(a: &RepoAssessment) -> Outcome {
    let mut text = format!("kind: {:?}\n", a.kind).to_lowercase();
    for f in &a.findings {
        let _ = writeln!(text, "{f}");
    }
    Outcome { code: if a.fail_count() > 0 { 1 } else { 0 }, json: serde_json::to_value(a).expect("assessment"), text }
}

fn git(cmd: GitCommand) -> Result<Outcome, Failure> {
    match cmd {
        GitCommand::Check { path } => {
            let a = gitlayer::assess_repo(&path).map_err(git_failure)?;
            Ok(assessment_outcome(&a))
        }
        GitCommand::Prepare { worktree, dest } => {
            let a = gitlayer::prepare_for_deposition(&worktree, &dest).map_err(git_failure)?;
            Ok(assessment_outcome(&a))
        }
    }
}

fn layout(root: &Path) -> Result<ResolvedLayout, Failure> {
    envconfig::locate_and_resolve(root).map_err(|e| Failure::io(format!("{}: {e}", root.display())))
}

fn timeout(secs: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(secs).map_err(|_| Failure::io("timeout must be a non-negative number of seconds"))
}

fn run_failure(e: RunError) -> Failure {
    match e {
        RunError::Timeout { .. } => Failure::verification(e),
        other => Failure::io(other),
    }
}

fn run(setup: bool, root: &Path, secs: f64) -> Result<Outcome, Failure> {
    let mode = if setup { RunMode::Setup } else { RunMode::Run };
    let r = runner::run_workflow(&layout(root)?, mode, timeout(secs)?).map_err(run_failure)?;
    let text = format!(
        "{} exited with {} after {:.2}s\nstdout: {}\nstderr: {}\n",
        r.command,
        r.exit_code,
        r.duration_secs,
        r.stdout_path.display(),
        r.stderr_path.display()
    );
    Ok(Outcome { code: if r.success() { 0 } else { 1 }, json: serde_json::to_value(&r).expect("run"), text })
}

fn reproduce(root: &Path, secs: f64) -> Result<Outcome, Failure> {
    let rep = runner::reproduce_and_diff(&layout(root)?, timeout(secs)?).map_err(run_failure)?;
    let mut text = String::new();
    for f in &rep.files {
        let _ = writeln!(text, "{:<9} {}", format!("{:?}", f.status).to_lowercase(), f.path);
    }
    let _ = writeln!(
        text,
        "{} ({} unchanged, {} changed, {} added, {} removed; run exited {})",
        match rep.verdict {
            Verdict::Reproduced => "reproduced",
            Verdict::NotReproduced => "NOT reproduced",
        },
        rep.count(FileStatus::Unchanged),
        rep.count(FileStatus::Changed),
        rep.count(FileStatus::Added),
        rep.count(FileStatus::Removed),
        rep.run.exit_code,
    );
    let code = if rep.verdict == Verdict::Reproduced { 0 } else { 1 };
    Ok(Outcome { code, json: serde_json::to_value(&rep).expect("reproduction"), text })
}

fn cell(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "yes",
        Some(false) => "no",
        None => "?",
    }
}

fn archives(name: Option<&str>) -> Result<Outcome, Failure> {
    let rows = report::archive_matrix(name);
    if rows.is_empty() {
        return Err(Failure::io(format!("unknown archive {}", name.unwrap_or_default())));
    }
    let mut text = String::new();
    let header = rows[0].criteria().map(|(k, _)| k);
    let _ = writeln!(text, "{:<30} {} storage_limit", "archive", header.join(" "));
    for r in &rows {
        let cells: Vec<String> =
            r.criteria().iter().map(|(k, v)| format!("{:<w$}", cell(*v), w = k.len())).collect();
        let _ = writeln!(text, "{:<30} {} {}", r.name, cells.join(" "), r.storage_limit.unwrap_or("?"));
    }
    text.push_str("? = not stated\n");
    Ok(Outcome::ok(json!({ "archives": rows }), text))
}

fn tick_failure(e: tickdrift::TickError) -> Failure {
    match e {
        tickdrift::TickError::Wav(_) | tickdrift::TickError::InvalidSpec(_) | tickdrift::TickError::InvalidParameter(_) => {
            Failure::io(e)
        }
        other => Failure::verification(other),
    }
}

fn dataset_name(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn tickdrift_cmd(cmd: TickdriftCommand) -> Result<Outcome, Failure> {
    match cmd {
        TickdriftCommand::Synth { output, duration, drift, snr, seed, tick_rate, sample_rate, format } => {
            let spec = SynthSpec {
                sample_rate,
                tick_rate,
                duration,
                drift_s_per_day: drift,
                snr_db: snr.unwrap_or(f64::INFINITY),
                seed,
            };
            let series = tickdrift::synth_ticks(&spec).map_err(tick_failure)?;
            let fmt = match format {
                WavOut::Pcm16 => WavFormat::Pcm16,
                WavOut::Float32 => WavFormat::Float32,
            };
            tickdrift::write_wav(&output, &series, fmt).map_err(tick_failure)?;
            Ok(Outcome::ok(
                json!({
                    "output": output.display().to_string(),
                    "samples": series.samples.len(),
                    "clicks": spec.click_times().len(),
                    "drift_s_per_day": drift,
                }),
                format!("wrote {} ({} clicks)\n", output.display(), spec.click_times().len()),
            ))
        }
        TickdriftCommand::Analyze { input, tick_rate, prominence, envelope, endpoints, window } => {
            let series = tickdrift::read_wav(&input).map_err(tick_failure)?;
            let params = AnalysisParams {
                prominence,
                envelope,
                window_half_width: window,
                method: if endpoints { DriftMethod::Endpoints } else { DriftMethod::Regression },
                ..AnalysisParams::new(tick_rate)
            };
            let est = tickdrift::analyze(&series, &params).map_err(tick_failure)?;
            let text = format!(
                "ticks {}\ninterval {:.9} s (nominal {:.9} s)\ndrift {:+.3} s/day\nresidual rms {:.3e} s\n",
                est.n_ticks, est.fitted_interval, est.nominal_interval, est.drift_s_per_day, est.residual_rms
            );
            Ok(Outcome::ok(serde_json::to_value(&est).expect("estimate"), text))
        }
        TickdriftCommand::Table { inputs, output, tick_rate, prominences, envelope } => {
            let mut datasets = Vec::new();
            for p in &inputs {
                datasets.push((dataset_name(p), tickdrift::read_wav(p).map_err(tick_failure)?));
            }
            let modes: &[bool] = match envelope {
                EnvelopeCells::Off => &[false],
                EnvelopeCells::On => &[true],
                EnvelopeCells::Both => &[false, true],
            };
            let grid: Vec<(f64, bool)> = prominences.iter().flat_map(|&p| modes.iter().map(move |&e| (p, e))).collect();
            let rows = tickdrift::drift_table(&datasets, &grid, &AnalysisParams::new(tick_rate));
            let tsv = tickdrift::table_to_tsv(&rows);
            if let Some(out) = &output {
                write_file(out, &tsv)?;
            }
            Ok(Outcome::ok(json!({ "rows": rows }), tsv))
        }
    }
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Failure::io)?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}
