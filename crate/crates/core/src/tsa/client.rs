use std::io::Read;
use std::path::Path;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use chrono::SecondsFormat;
use serde::Serialize;

use super::{build_request, parse_response, parse_token_full, TimeStampToken, TimestampRecord, TsaError};
use crate::deposition::sha256_file;

pub const CONTENT_TYPE_QUERY: &str = "application/timestamp-query";
pub const CONTENT_TYPE_REPLY: &str = "application/timestamp-reply";

const MAX_REPLY_BYTES: u64 = 1 << 20;

fn random_nonce() -> u64 {
    loop {
        let n: u64 = rand::random();
        if n != 0 {
            return n;
        }
    }
}

fn post(tsa_url: &str, body: &[u8]) -> Result<Vec<u8>, TsaError> {
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
    let resp = agent
        .post(tsa_url)
        .set("Content-Type", CONTENT_TYPE_QUERY)
        .send_bytes(body)
        .map_err(|e| TsaError::TransportError(e.to_string()))?;
    let ctype = resp.content_type().to_ascii_lowercase();
    if ctype != CONTENT_TYPE_REPLY {
        return Err(TsaError::TransportError(format!(
            "expected {CONTENT_TYPE_REPLY}, got {ctype}"
        )));
    }
    let mut buf = Vec::new();
    resp.into_reader().take(MAX_REPLY_BYTES).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Sends one request for `digest` and returns the checked token.
pub fn request_digest_timestamp(tsa_url: &str, digest: &[u8]) -> Result<TimeStampToken, TsaError> {
    let nonce = random_nonce();
    let request = build_request(digest, nonce)?;
    let reply = post(tsa_url, &request)?;
    let resp = parse_response(&reply)?;
    if !resp.status.is_granted() {
        return Err(TsaError::TsaRejected { status: resp.status.code(), fail_info: resp.fail_info });
    }
    let token_der = resp
        .token
        .ok_or_else(|| TsaError::NotATimestampToken("granted response carries no token".into()))?;
    let token = parse_token_full(&token_der)?;
    if token.tst_info.message_imprint != digest {
        return Err(TsaError::TokenMismatch);
    }
    if token.tst_info.nonce_u64() != Some(nonce) {
        return Err(TsaError::NonceMismatch);
    }
    Ok(token)
}

/// Timestamps `file`, recording its path relative to `root`.
pub fn request_timestamp(tsa_url: &str, root: &Path, file: &Path) -> Result<TimestampRecord, TsaError> {
    let (_, sha256) = sha256_file(file)?;
    let digest = hex::decode(&sha256).expect("hex we just produced");
    let token = request_digest_timestamp(tsa_url, &digest)?;
    let path = record_path(root, file);
    Ok(TimestampRecord::from_token(path, sha256, tsa_url, &token))
}

fn record_path(root: &Path, file: &Path) -> String {
    let rel = match (std::fs::canonicalize(root), std::fs::canonicalize(file)) {
        (Ok(r), Ok(f)) => f.strip_prefix(&r).map(Path::to_path_buf).ok(),
        _ => None,
    };
    let rel = rel.unwrap_or_else(|| file.to_path_buf());
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

impl TimestampRecord {
    pub fn from_token(path: String, sha256: String, tsa_url: &str, token: &TimeStampToken) -> TimestampRecord {
        TimestampRecord {
            path,
            sha256,
            tsa_url: tsa_url.to_string(),
            token_b64: BASE64.encode(&token.der),
            gen_time: token.tst_info.gen_time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            extra: Default::default(),
        }
    }

    pub fn token_der(&self) -> Result<Vec<u8>, TsaError> {
        BASE64.decode(self.token_b64.trim()).map_err(|_| TsaError::SchemaError("token_b64".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureCheck {
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub path: String,
    /// File content hashes to the recorded digest.
    pub digest_match: bool,
    /// The token's message imprint is the recorded digest.
    pub imprint_match: bool,
    /// Generation time parsed from the token.
    pub gen_time: String,
    pub signature: SignatureCheck,
    pub pass: bool,
}

pub fn verify_file(file: &Path, record: &TimestampRecord) -> Result<Verdict, TsaError> {
    let (_, actual) = sha256_file(file)?;
    let token = parse_token_full(&record.token_der()?)?;
    let recorded = hex::decode(&record.sha256).map_err(|_| TsaError::SchemaError("sha256".into()))?;
    let digest_match = actual.eq_ignore_ascii_case(&record.sha256);
    let imprint_match = token.tst_info.message_imprint == recorded;
    Ok(Verdict {
        path: record.path.clone(),
        digest_match,
        imprint_match,
        gen_time: token.tst_info.gen_time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        signature: SignatureCheck::NotChecked,
        pass: digest_match && imprint_match,
    })
}

/// Verifies a record against the file it names under `root`.
pub fn verify_record(root: &Path, record: &TimestampRecord) -> Result<Verdict, TsaError> {
    let parts = crate::envconfig::normalize_relative(&record.path)
        .ok_or_else(|| TsaError::SchemaError("path".into()))?;
    let mut file = root.to_path_buf();
    file.extend(parts);
    verify_file(&file, record)
}
