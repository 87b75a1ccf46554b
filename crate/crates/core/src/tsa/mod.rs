//! RFC 3161 trusted timestamping.
//!
//! Requests are built and responses parsed with the crate's own DER codec.
//! Verification is structural: the file digest, the token's message imprint
//! and the generation time are checked; the CMS signature chain is not.

mod client;
mod request;
mod store;
pub mod stub;
mod token;

use thiserror::Error;

use crate::der::DerError;

pub use client::{
    request_digest_timestamp, request_timestamp, verify_file, verify_record, SignatureCheck,
    Verdict, CONTENT_TYPE_QUERY, CONTENT_TYPE_REPLY,
};
pub use request::{build_request, parse_request, TimeStampReqData};
pub use store::{append_record, read_records, write_records, TimestampRecord, STORE_FILE};
pub use token::{
    parse_response, parse_token, parse_token_full, AlgorithmId, PkiStatus, SignedDataInfo,
    SignerSummary, TimeStampResp, TimeStampToken, TstInfo,
};

pub const OID_SHA256: &str = "2.16.840.1.101.3.4.2.1";
pub const OID_SIGNED_DATA: &str = "1.2.840.113549.1.7.2";
pub const OID_TST_INFO: &str = "1.2.840.113549.1.9.16.1.4";

#[derive(Debug, Error)]
pub enum TsaError {
    #[error("digest must be 32 bytes, got {0}")]
    BadDigestLength(usize),
    #[error("nonce must be non-zero")]
    ZeroNonce,
    #[error(transparent)]
    DerSyntax(#[from] DerError),
    #[error("not a timestamp token: {0}")]
    NotATimestampToken(String),
    #[error("unsupported message imprint algorithm {0}; only SHA-256 is accepted")]
    UnsupportedHashAlg(String),
    #[error("timestamp authority rejected the request (status {status}{})",
        fail_info.map(|f| format!(", failInfo {f:#x}")).unwrap_or_default())]
    TsaRejected { status: u64, fail_info: Option<u32> },
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("token message imprint does not match the submitted digest")]
    TokenMismatch,
    #[error("token nonce does not match the request nonce")]
    NonceMismatch,
    #[error("timestamps.json schema error at field `{0}`")]
    SchemaError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
