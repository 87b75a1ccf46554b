use std::fmt;

use serde::{Deserialize, Serialize};

/// The seven things a deposition must provide to be fully compatible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Archive,
    VersionControl,
    Timestamping,
    Documentation,
    Configuration,
    Container,
    Licensing,
}

impl Requirement {
    pub const ALL: [Requirement; 7] = [
        Requirement::Archive,
        Requirement::VersionControl,
        Requirement::Timestamping,
        Requirement::Documentation,
        Requirement::Configuration,
        Requirement::Container,
        Requirement::Licensing,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Requirement::Archive => {
                "Research outputs deposited in an accessible, persistent, and trusted archive"
            }
            Requirement::VersionControl => "All analysis code tracked under version control",
            Requirement::Timestamping => "Data and code provenance timestamped (e.g., RFC 3161)",
            Requirement::Documentation => "Clear documentation",
            Requirement::Configuration => "Configuration file and corresponding file structure",
            Requirement::Container => "Container definition and associated image",
            Requirement::Licensing => "Appropriate data and software licenses",
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Info,
    Warn,
    Fail,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "INFO",
            Severity::Warn => "WARN",
            Severity::Fail => "FAIL",
        })
    }
}

/// A registered check: the id, the requirement it belongs to and the
/// severity it reports at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Check {
    pub id: &'static str,
    pub requirement: Requirement,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub severity: Severity,
    pub requirement: Requirement,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl Finding {
    pub fn new(check: &Check, message: impl Into<String>) -> Finding {
        Finding {
            id: check.id.to_string(),
            severity: check.severity,
            requirement: check.requirement,
            message: message.into(),
            path: None,
        }
    }

    pub fn at(mut self, path: impl Into<String>) -> Finding {
        self.path = Some(path.into());
        self
    }

    pub fn is_fail(&self) -> bool {
        self.severity == Severity::Fail
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<4} {}: {}", self.severity, self.id, self.message)?;
        if let Some(p) = &self.path {
            write!(f, " [{p}]")?;
        }
        Ok(())
    }
}

macro_rules! checks {
    ($($name:ident = $id:literal, $req:ident, $sev:ident;)*) => {
        $(pub const $name: Check = Check {
            id: $id,
            requirement: Requirement::$req,
            severity: Severity::$sev,
        };)*

        /// Every check the toolkit can report.
        pub const ALL: &[Check] = &[$($name),*];
    };
}

/// Catalogue of finding ids.
pub mod checks {
    use super::{Check, Requirement, Severity};

    checks! {
        ARCHIVE_NOT_CHECKABLE = "archive.not_checkable", Archive, Info;

        CONFIG_MISSING = "config.missing", Configuration, Fail;
        CONFIG_INVALID = "config.invalid", Configuration, Fail;
        CONFIG_PATH_ESCAPE = "config.path_escape", Configuration, Fail;
        CONFIG_FOUND = "config.found", Configuration, Info;
        CONFIG_DUPLICATE_KEY = "config.duplicate_key", Configuration, Warn;
        LAYOUT_MISSING = "layout.missing", Configuration, Fail;
        LAYOUT_KIND_MISMATCH = "layout.kind_mismatch", Configuration, Fail;
        LAYOUT_EXTERNAL = "layout.external", Configuration, Info;
        RUN_CMD_TARGET_MISSING = "run_cmd.target.missing", Configuration, Fail;
        SETUP_CMD_TARGET_MISSING = "setup_cmd.target.missing", Configuration, Fail;
        SETUP_CMD_UNDECLARED = "setup_cmd.undeclared", Configuration, Info;
        CONFIG_NOT_ASSESSED = "config.dependent_checks.skipped", Configuration, Info;

        README_MISSING = "readme.missing", Documentation, Fail;
        README_UNDECLARED = "readme.undeclared", Documentation, Warn;
        README_EMPTY = "readme.empty", Documentation, Warn;
        README_NO_RUN_INSTRUCTIONS = "readme.run_instructions.missing", Documentation, Warn;
        README_OK = "readme.present", Documentation, Info;

        LICENSE_MISSING = "license.missing", Licensing, Fail;
        LICENSE_UNDECLARED = "license.undeclared", Licensing, Warn;
        LICENSE_UNRECOGNIZED = "license.unrecognized", Licensing, Warn;
        LICENSE_DETECTED = "license.detected", Licensing, Info;

        GIT_REPO_MISSING = "git.repo.missing", VersionControl, Fail;
        GIT_NOT_BARE = "git.not_bare", VersionControl, Warn;
        GIT_INFO_REFS_MISSING = "git.info_refs.missing", VersionControl, Fail;
        GIT_INFO_REFS_MALFORMED = "git.info_refs.malformed", VersionControl, Fail;
        GIT_INFO_REFS_STALE = "git.info_refs.stale", VersionControl, Warn;
        GIT_OBJECT_MISSING = "git.object.missing", VersionControl, Fail;
        GIT_OBJECT_UNVERIFIED = "git.object.unverified", VersionControl, Warn;
        GIT_PACK_MISSING = "git.pack.missing", VersionControl, Fail;
        GIT_REPO_OK = "git.repo.servable", VersionControl, Info;
        GIT_CODE_EMPTY = "git.code.empty", VersionControl, Info;
        GIT_CODE_UNDECLARED = "git.code.undeclared", VersionControl, Info;

        TIMESTAMP_RECORDS_MISSING = "timestamp.records.missing", Timestamping, Warn;
        TIMESTAMP_RECORDS_INVALID = "timestamp.records.invalid", Timestamping, Fail;
        TIMESTAMP_TOKEN_INVALID = "timestamp.token.invalid", Timestamping, Fail;
        TIMESTAMP_IMPRINT_MISMATCH = "timestamp.imprint.mismatch", Timestamping, Fail;
        TIMESTAMP_DIGEST_MISMATCH = "timestamp.digest.mismatch", Timestamping, Warn;
        TIMESTAMP_FILE_MISSING = "timestamp.file.missing", Timestamping, Warn;
        TIMESTAMP_RECORDS_OK = "timestamp.records.verified", Timestamping, Info;

        CONTAINER_DEFINITION_MISSING = "container.definition.missing", Container, Fail;
        CONTAINER_DEFINITION_FOUND = "container.definition.found", Container, Info;
        CONTAINER_RUN_CMD_MISSING = "container.run_cmd.missing", Container, Fail;
        CONTAINER_INTERACTIVE_ENV_UNDECLARED = "container.workflow.interactive_env.undeclared", Container, Warn;
        CONTAINER_INTERACTIVE_CLI_UNDECLARED = "container.workflow.interactive_cli.undeclared", Container, Warn;
        CONTAINER_WORKFLOWS_UNSCANNED = "container.workflow.unscanned", Container, Info;
        CONTAINER_IMAGE_UNCHECKED = "container.image.unchecked", Container, Info;
    }
}
