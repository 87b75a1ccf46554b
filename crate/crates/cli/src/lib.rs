//! The `arts` command line.
//!
//! Exit codes: 0 success, 1 FAIL findings or a failed verification, 2 usage
//! or I/O error. With `--json` every subcommand prints exactly one JSON
//! document carrying `tool_version`.

mod commands;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub use arts_core::TOOL_VERSION;

#[derive(Debug, Parser)]
#[command(name = "arts", version, about = "Package, timestamp and validate ARTS research depositions")]
pub struct Cli {
    /// Machine-readable output (one JSON document on stdout)
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scaffold the deposition layout with a default config.env
    Init(InitArgs),
    /// Assess a deposition and print the compliance report
    Validate(ValidateArgs),
    /// Print the checksum manifest of a deposition
    Manifest(ManifestArgs),
    /// Write a deterministic zip of the deposition plus its manifest
    Package(PackageArgs),
    /// RFC 3161 timestamps
    #[command(subcommand)]
    Timestamp(TimestampCommand),
    /// Bare repository checks and preparation
    #[command(subcommand)]
    Git(GitCommand),
    /// Run ARTS_SETUP_CMD or ARTS_RUN_CMD from the deposition root
    Run(RunArgs),
    /// Rerun the analysis and diff the output directory
    Reproduce(ReproduceArgs),
    /// Archive feature matrix
    Archives(ArchivesArgs),
    /// Watch tick drift reference workload
    #[command(subcommand)]
    Tickdrift(TickdriftCommand),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(default_value = ".")]
    pub dir: PathBuf,
    /// SPDX id of the license text to write (e.g. MIT, CC-BY-4.0)
    #[arg(long)]
    pub license: Option<String>,
    /// Overwrite existing files
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(default_value = ".")]
    pub root: PathBuf,
    /// Also write arts-report.json into the root
    #[arg(long)]
    pub write_report: bool,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    #[arg(default_value = ".")]
    pub root: PathBuf,
    /// Glob of root-relative paths to leave out (repeatable)
    #[arg(long = "exclude")]
    pub excludes: Vec<String>,
    /// Write the manifest JSON to this file
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackageArgs {
    #[arg(default_value = ".")]
    pub root: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long = "exclude")]
    pub excludes: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum TimestampCommand {
    /// Timestamp files and record them in <root>/timestamps.json
    File {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long, env = "ARTS_TSA_URL")]
        tsa: String,
    },
    /// Check every record in <root>/timestamps.json against the files
    Verify {
        #[arg(default_value = ".")]
        root: PathBuf,
    },
    /// Install a post-commit hook that timestamps each commit
    Hook {
        #[arg(default_value = ".")]
        repo: PathBuf,
        #[arg(long, env = "ARTS_TSA_URL")]
        tsa: String,
        /// Replace an existing hook (kept as post-commit.bak)
        #[arg(long)]
        force: bool,
    },
    /// Timestamp HEAD of a worktree (what the hook runs)
    Commit {
        #[arg(long, default_value = ".")]
        repo: PathBuf,
        #[arg(long, env = "ARTS_TSA_URL")]
        tsa: String,
    },
    /// Serve the unsigned local test TSA until interrupted
    Stub {
        #[arg(long, default_value = "127.0.0.1:0")]
        addr: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum GitCommand {
    /// Assess a repository for dumb-HTTP servability
    Check { path: PathBuf },
    /// Bare-clone a worktree and run update-server-info
    Prepare { worktree: PathBuf, dest: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(default_value = ".")]
    pub root: PathBuf,
    /// Run ARTS_SETUP_CMD instead of ARTS_RUN_CMD
    #[arg(long)]
    pub setup: bool,
    /// Seconds before the process group is killed
    #[arg(long, default_value_t = 3600.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(default_value = ".")]
    pub root: PathBuf,
    #[arg(long, default_value_t = 3600.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct ArchivesArgs {
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WavOut {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvelopeCells {
    Off,
    On,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum TickdriftCommand {
    /// Write a synthetic tick recording
    Synth {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        drift: f64,
        /// Signal-to-noise ratio in dB; omit for a clean signal
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6.0)]
        tick_rate: f64,
        #[arg(long, default_value_t = 44_100)]
        sample_rate: u32,
        #[arg(long, value_enum, default_value = "pcm16")]
        format: WavOut,
    },
    /// Estimate drift from one recording
    Analyze {
        input: PathBuf,
        #[arg(long, default_value_t = 6.0)]
        tick_rate: f64,
        #[arg(long, default_value_t = 0.1)]
        prominence: f64,
        #[arg(long)]
        envelope: bool,
        /// Compare last tick with first instead of fitting all ticks
        #[arg(long)]
        endpoints: bool,
        /// Correlation window half-width in seconds
        #[arg(long, default_value_t = 0.0025)]
        window: f64,
    },
    /// Drift for every recording and parameter combination
    Table {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 6.0)]
        tick_rate: f64,
        #[arg(long = "prominence", default_values_t = [0.1, 0.3])]
        prominences: Vec<f64>,
        #[arg(long, value_enum, default_value = "both")]
        envelope: EnvelopeCells,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl fmt::Display) -> Failure {
        Failure { code: 2, message: message.to_string() }
    }

    pub fn verification(message: impl fmt::Display) -> Failure {
        Failure { code: 1, message: message.to_string() }
    }
}

/// Result of a subcommand: exit code, JSON payload and human text.
pub struct Outcome {
    pub code: i32,
    pub json: Value,
    pub text: String,
}

impl Outcome {
    pub fn ok(json: Value, text: impl Into<String>) -> Outcome {
        Outcome { code: 0, json, text: text.into() }
    }
}

fn with_version(mut v: Value) -> Value {
    match v.as_object_mut() {
        Some(map) => {
            map.insert("tool_version".into(), json!(TOOL_VERSION));
            v
        }
        None => json!({ "tool_version": TOOL_VERSION, "result": v }),
    }
}

/// Parses `args` and runs the command, writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
                // parsing failed, so look for the flag by hand
                if args.iter().skip(1).take_while(|a| *a != "--").any(|a| a == "--json") {
                    let first = rendered.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
                    let doc = json!({ "tool_version": TOOL_VERSION, "error": first, "exit_code": code });
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"));
                }
            }
            return code;
        }
    };
    let json_mode = cli.json;
    match commands::dispatch(cli.command) {
        Ok(o) => {
            if json_mode {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&with_version(o.json)).expect("json"));
            } else {
                let _ = write!(out, "{}", o.text);
            }
            o.code
        }
        Err(f) => {
            let _ = writeln!(err, "arts: {}", f.message);
            if json_mode {
                let doc = json!({ "tool_version": TOOL_VERSION, "error": f.message, "exit_code": f.code });
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"));
            }
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
