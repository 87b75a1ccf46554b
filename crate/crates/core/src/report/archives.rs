//! Static archive feature matrix.
//!
//! A point-in-time editorial comparison of research archives against the
//! framework's archive criteria. `None` marks a cell the source material does
//! not state. Each row carries a short provenance note for its known cells.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchiveProfile {
    pub name: &'static str,
    pub third_party_upload: Option<bool>,
    pub immutable: Option<bool>,
    pub doi: Option<bool>,
    pub purl: Option<bool>,
    pub geo_redundancy: Option<bool>,
    pub reviews: Option<bool>,
    pub nonprofit: Option<bool>,
    pub storage_limit: Option<&'static str>,
    pub bare_repo_clone: Option<bool>,
    pub container_pull: Option<bool>,
    pub provenance: &'static str,
}

impl ArchiveProfile {
    /// The boolean criteria in column order, paired with their names.
    pub fn criteria(&self) -> [(&'static str, Option<bool>); 9] {
        [
            ("third_party_upload", self.third_party_upload),
            ("immutable", self.immutable),
            ("doi", self.doi),
            ("purl", self.purl),
            ("geo_redundancy", self.geo_redundancy),
            ("reviews", self.reviews),
            ("nonprofit", self.nonprofit),
            ("bare_repo_clone", self.bare_repo_clone),
            ("container_pull", self.container_pull),
        ]
    }

    /// True when every boolean criterion is known to hold.
    pub fn fully_compatible(&self) -> bool {
        self.criteria().iter().all(|(_, v)| *v == Some(true))
    }
}

const UNKNOWN: ArchiveProfile = ArchiveProfile {
    name: "",
    third_party_upload: None,
    immutable: None,
    doi: None,
    purl: None,
    geo_redundancy: None,
    reviews: None,
    nonprofit: None,
    storage_limit: None,
    bare_repo_clone: None,
    // No surveyed archive hosts a container registry.
    container_pull: Some(false),
    provenance: "",
};

pub const ARCHIVES: &[ArchiveProfile] = &[
    ArchiveProfile {
        name: "Zenodo",
        third_party_upload: Some(true),
        immutable: Some(true),
        doi: Some(true),
        purl: Some(true),
        geo_redundancy: Some(true),
        reviews: Some(true),
        nonprofit: Some(true),
        storage_limit: Some("no fee; stricter limits than Dryad"),
        bare_repo_clone: Some(false),
        container_pull: Some(false),
        provenance: "supports every criterion except a container registry and direct git clones; \
                     serves depositions as a zip archive; no upload fee",
    },
    ArchiveProfile {
        name: "Internet Archive",
        third_party_upload: Some(true),
        immutable: Some(false),
        doi: Some(false),
        purl: Some(true),
        reviews: Some(false),
        bare_repo_clone: Some(true),
        provenance: "public uploads via tools such as rclone; exposes raw file structure so bare \
                     repositories can be cloned; no immutability or DOI support; no private \
                     review uploads; PURLs via purl.archive.org",
        ..UNKNOWN
    },
    ArchiveProfile {
        name: "Stanford Digital Repository",
        third_party_upload: Some(false),
        doi: Some(true),
        purl: Some(true),
        bare_repo_clone: Some(true),
        provenance: "only available to Stanford affiliates; exposes raw file structure so bare \
                     repositories can be cloned; mints DOIs and PURLs",
        ..UNKNOWN
    },
    ArchiveProfile {
        name: "Dryad",
        storage_limit: Some("300 GB per submission (fee)"),
        provenance: "up to 300 GB per submission with a publication fee; places depositions \
                     under CC0",
        ..UNKNOWN
    },
    ArchiveProfile {
        name: "figshare",
        storage_limit: Some("no fee; stricter limits than Dryad"),
        provenance: "no upload fee but stricter storage limits",
        ..UNKNOWN
    },
    ArchiveProfile {
        name: "Dataverse",
        purl: Some(true),
        bare_repo_clone: Some(false),
        provenance: "provides persistent identifiers; does not expose file structure in URLs, so \
                     git cloning is unsupported",
        ..UNKNOWN
    },
    ArchiveProfile {
        name: "DSpace",
        purl: Some(true),
        provenance: "provides persistent identifiers",
        ..UNKNOWN
    },
];

const ALIASES: &[(&str, &str)] = &[
    ("sdr", "Stanford Digital Repository"),
    ("ia", "Internet Archive"),
    ("archive.org", "Internet Archive"),
    ("dataverse project", "Dataverse"),
];

/// Looks up one archive by name (case-insensitive, with a few aliases).
pub fn find(name: &str) -> Option<&'static ArchiveProfile> {
    let wanted = name.trim();
    let canonical = ALIASES
        .iter()
        .find(|(alias, _)| alias.eq_ignore_ascii_case(wanted))
        .map_or(wanted, |(_, n)| n);
    ARCHIVES.iter().find(|a| a.name.eq_ignore_ascii_case(canonical))
}

/// The whole table, or the single named row. Unknown names yield an empty table.
pub fn archive_matrix(query: Option<&str>) -> Vec<&'static ArchiveProfile> {
    match query {
        None => ARCHIVES.iter().collect(),
        Some(name) => find(name).into_iter().collect(),
    }
}
