//! License text identification.
//!
//! Texts are reduced to lowercase word tokens and compared as multisets of
//! word bigrams using the Sørensen–Dice coefficient. Whitespace, line wrapping
//! and punctuation therefore never affect the score.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Scores below this are reported as [`LicenseKind::Unknown`].
pub const MATCH_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LicenseKind {
    #[serde(rename = "CC0-1.0")]
    Cc0,
    #[serde(rename = "CC-BY-4.0")]
    CcBy,
    #[serde(rename = "CC-BY-SA-4.0")]
    CcBySa,
    #[serde(rename = "MIT")]
    Mit,
    #[serde(rename = "BSD-3-Clause")]
    Bsd3,
    #[serde(rename = "Apache-2.0")]
    Apache2,
    #[serde(rename = "GPL-2.0")]
    Gpl2,
    #[serde(rename = "GPL-3.0")]
    Gpl3,
    Unknown,
}

impl LicenseKind {
    pub const KNOWN: [LicenseKind; 8] = [
        LicenseKind::Cc0,
        LicenseKind::CcBy,
        LicenseKind::CcBySa,
        LicenseKind::Mit,
        LicenseKind::Bsd3,
        LicenseKind::Apache2,
        LicenseKind::Gpl2,
        LicenseKind::Gpl3,
    ];

    pub fn spdx(self) -> &'static str {
        match self {
            LicenseKind::Cc0 => "CC0-1.0",
            LicenseKind::CcBy => "CC-BY-4.0",
            LicenseKind::CcBySa => "CC-BY-SA-4.0",
            LicenseKind::Mit => "MIT",
            LicenseKind::Bsd3 => "BSD-3-Clause",
            LicenseKind::Apache2 => "Apache-2.0",
            LicenseKind::Gpl2 => "GPL-2.0",
            LicenseKind::Gpl3 => "GPL-3.0",
            LicenseKind::Unknown => "Unknown",
        }
    }

    pub fn from_spdx(id: &str) -> Option<LicenseKind> {
        LicenseKind::KNOWN.into_iter().find(|k| k.spdx().eq_ignore_ascii_case(id))
    }

    /// Canonical text shipped with the toolkit.
    pub fn canonical_text(self) -> Option<&'static str> {
        Some(match self {
            LicenseKind::Cc0 => include_str!("../../licenses/CC0-1.0.txt"),
            LicenseKind::CcBy => include_str!("../../licenses/CC-BY-4.0.txt"),
            LicenseKind::CcBySa => include_str!("../../licenses/CC-BY-SA-4.0.txt"),
            LicenseKind::Mit => include_str!("../../licenses/MIT.txt"),
            LicenseKind::Bsd3 => include_str!("../../licenses/BSD-3-Clause.txt"),
            LicenseKind::Apache2 => include_str!("../../licenses/Apache-2.0.txt"),
            LicenseKind::Gpl2 => include_str!("../../licenses/GPL-2.0.txt"),
            LicenseKind::Gpl3 => include_str!("../../licenses/GPL-3.0.txt"),
            LicenseKind::Unknown => return None,
        })
    }

    pub fn recommendation(self) -> Option<&'static Recommendation> {
        RECOMMENDATIONS.iter().find(|r| r.license == self)
    }
}

impl fmt::Display for LicenseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spdx())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LicenseId {
    pub id: LicenseKind,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LicenseFamily {
    PublicDomain,
    Permissive,
    ShareAlike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AppliesTo {
    Data,
    Code,
}

/// Guidance for one of the recommended open licenses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub license: LicenseKind,
    pub family: LicenseFamily,
    pub usual_for: AppliesTo,
    pub attribution: bool,
    pub share_alike: bool,
}

pub const RECOMMENDATIONS: [Recommendation; 8] = [
    Recommendation { license: LicenseKind::Cc0, family: LicenseFamily::PublicDomain, usual_for: AppliesTo::Data, attribution: false, share_alike: false },
    Recommendation { license: LicenseKind::CcBy, family: LicenseFamily::Permissive, usual_for: AppliesTo::Data, attribution: true, share_alike: false },
    Recommendation { license: LicenseKind::CcBySa, family: LicenseFamily::ShareAlike, usual_for: AppliesTo::Data, attribution: true, share_alike: true },
    Recommendation { license: LicenseKind::Mit, family: LicenseFamily::Permissive, usual_for: AppliesTo::Code, attribution: true, share_alike: false },
    Recommendation { license: LicenseKind::Bsd3, family: LicenseFamily::Permissive, usual_for: AppliesTo::Code, attribution: true, share_alike: false },
    Recommendation { license: LicenseKind::Apache2, family: LicenseFamily::Permissive, usual_for: AppliesTo::Code, attribution: true, share_alike: false },
    Recommendation { license: LicenseKind::Gpl2, family: LicenseFamily::ShareAlike, usual_for: AppliesTo::Code, attribution: true, share_alike: true },
    Recommendation { license: LicenseKind::Gpl3, family: LicenseFamily::ShareAlike, usual_for: AppliesTo::Code, attribution: true, share_alike: true },
];

type Bigrams = HashMap<(String, String), u32>;

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn bigrams(text: &str) -> (Bigrams, u32) {
    let toks = tokens(text);
    let mut map = Bigrams::new();
    for pair in toks.windows(2) {
        *map.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
    }
    let total = toks.len().saturating_sub(1) as u32;
    (map, total)
}

fn dice(a: &(Bigrams, u32), b: &(Bigrams, u32)) -> f64 {
    if a.1 + b.1 == 0 {
        return 0.0;
    }
    let (small, large) = if a.0.len() <= b.0.len() { (a, b) } else { (b, a) };
    let shared: u32 = small
        .0
        .iter()
        .map(|(k, n)| (*n).min(large.0.get(k).copied().unwrap_or(0)))
        .sum();
    2.0 * shared as f64 / (a.1 + b.1) as f64
}

fn corpus() -> &'static [(LicenseKind, (Bigrams, u32))] {
    static CORPUS: OnceLock<Vec<(LicenseKind, (Bigrams, u32))>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        LicenseKind::KNOWN
            .into_iter()
            .map(|k| (k, bigrams(k.canonical_text().unwrap_or_default())))
            .collect()
    })
}

/// Similarity of `text` to one canonical license text.
pub fn score(text: &str, license: LicenseKind) -> f64 {
    let probe = bigrams(text);
    corpus()
        .iter()
        .find(|(k, _)| *k == license)
        .map_or(0.0, |(_, reference)| dice(&probe, reference))
}

pub fn identify_text(text: &str) -> LicenseId {
    let probe = bigrams(text);
    let (best, confidence) = corpus()
        .iter()
        .map(|(k, reference)| (*k, dice(&probe, reference)))
        .fold((LicenseKind::Unknown, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    if confidence < MATCH_THRESHOLD {
        LicenseId { id: LicenseKind::Unknown, confidence }
    } else {
        LicenseId { id: best, confidence }
    }
}

pub fn detect_license(file: &Path) -> std::io::Result<LicenseId> {
    let bytes = std::fs::read(file)?;
    Ok(identify_text(&String::from_utf8_lossy(&bytes)))
}
