//! A local, unsigned RFC 3161 responder for tests and offline demos.
//!
//! Tokens carry a well-formed SignedData with an empty signerInfos set, so
//! they pass structural verification but prove nothing about time.

use std::io::Read;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{DateTime, Utc};

use super::{parse_request, TsaError, CONTENT_TYPE_REPLY, OID_SHA256, OID_SIGNED_DATA, OID_TST_INFO};
use crate::der::{self, Oid, TAG_GENERALIZED_TIME};

pub const STUB_POLICY: &str = "1.3.6.1.4.1.55555.1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubBehavior {
    Grant,
    /// Status 1, grantedWithMods.
    GrantWithMods,
    Reject { status: u64, fail_info: Option<u32> },
    /// Flips a byte of the message imprint.
    CorruptImprint,
    WrongNonce,
    OmitNonce,
    WrongContentType,
    HttpError(u16),
    /// Uses `1.2.3` as the encapsulated content type.
    WrongEContentType,
}

fn oid(dotted: &str) -> Vec<u8> {
    der::oid(&Oid::parse(dotted).expect("static oid"))
}

fn generalized_time(t: DateTime<Utc>) -> Vec<u8> {
    let mut s = t.format("%Y%m%d%H%M%S").to_string();
    let nanos = t.timestamp_subsec_nanos();
    if nanos != 0 {
        let frac = format!("{nanos:09}");
        s.push('.');
        s.push_str(frac.trim_end_matches('0'));
    }
    s.push('Z');
    der::tlv(TAG_GENERALIZED_TIME, s.as_bytes())
}

fn status_info(status: u64, fail_info: Option<u32>) -> Vec<u8> {
    let mut parts = vec![der::integer(status)];
    if let Some(flags) = fail_info {
        let mut bits = [0u8; 4];
        for i in 0..32 {
            if flags & (1 << i) != 0 {
                bits[i / 8] |= 0x80 >> (i % 8);
            }
        }
        let used = bits.iter().rposition(|&b| b != 0).map_or(0, |p| p + 1);
        let bits = &bits[..used];
        let unused = bits.last().map_or(0, |b| b.trailing_zeros() as u8);
        let mut value = vec![unused];
        value.extend_from_slice(bits);
        parts.push(der::tlv(der::TAG_BIT_STRING, &value));
    }
    der::sequence(&parts)
}

/// Builds an unsigned token (ContentInfo) around already-encoded TSTInfo.
pub fn wrap_tst_info(tst_info: &[u8], econtent_type: &str) -> Vec<u8> {
    let digest_algs = der::constructed(der::TAG_SET, &[der::sequence(&[oid(OID_SHA256), der::null()])]);
    let encap = der::sequence(&[
        oid(econtent_type),
        der::constructed(der::context(0), &[der::octet_string(tst_info)]),
    ]);
    let signed_data = der::sequence(&[
        der::integer(3),
        digest_algs,
        encap,
        der::constructed(der::TAG_SET, &[]),
    ]);
    der::sequence(&[oid(OID_SIGNED_DATA), der::constructed(der::context(0), &[signed_data])])
}

pub fn encode_tst_info(digest: &[u8], serial: u64, gen_time: DateTime<Utc>, nonce: Option<u64>) -> Vec<u8> {
    let mut parts = vec![
        der::integer(1),
        oid(STUB_POLICY),
        der::sequence(&[der::sequence(&[oid(OID_SHA256), der::null()]), der::octet_string(digest)]),
        der::integer(serial),
        generalized_time(gen_time),
    ];
    if let Some(n) = nonce {
        parts.push(der::integer(n));
    }
    der::sequence(&parts)
}

/// Computes the DER TimeStampResp the stub sends for `request`.
pub fn stub_response(
    request: &[u8],
    behavior: &StubBehavior,
    serial: u64,
    gen_time: DateTime<Utc>,
) -> Result<Vec<u8>, TsaError> {
    let req = parse_request(request)?;
    let status = match behavior {
        StubBehavior::Reject { status, fail_info } => {
            return Ok(der::sequence(&[status_info(*status, *fail_info)]));
        }
        StubBehavior::GrantWithMods => 1,
        _ => 0,
    };
    let mut digest = req.hashed_message.clone();
    if *behavior == StubBehavior::CorruptImprint {
        digest[0] ^= 0xff;
    }
    let nonce = match behavior {
        StubBehavior::OmitNonce => None,
        StubBehavior::WrongNonce => Some(req.nonce.unwrap_or(1).wrapping_add(1).max(1)),
        _ => req.nonce,
    };
    let econtent = if *behavior == StubBehavior::WrongEContentType { "1.2.3" } else { OID_TST_INFO };
    let token = wrap_tst_info(&encode_tst_info(&digest, serial, gen_time, nonce), econtent);
    Ok(der::sequence(&[status_info(status, None), token]))
}

struct Shared {
    behavior: Mutex<StubBehavior>,
    fixed_time: Mutex<Option<DateTime<Utc>>>,
    requests: AtomicU64,
    stop: AtomicBool,
}

/// HTTP responder bound to 127.0.0.1 on an ephemeral port.
pub struct StubTsa {
    url: String,
    shared: Arc<Shared>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

impl StubTsa {
    pub fn start() -> std::io::Result<StubTsa> {
        StubTsa::start_on("127.0.0.1:0")
    }

    pub fn start_on(addr: &str) -> std::io::Result<StubTsa> {
        let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
        let port = server.server_addr().to_ip().map(|a| a.port()).unwrap_or(0);
        let server = Arc::new(server);
        let shared = Arc::new(Shared {
            behavior: Mutex::new(StubBehavior::Grant),
            fixed_time: Mutex::new(None),
            requests: AtomicU64::new(0),
            stop: AtomicBool::new(false),
        });
        let handle = {
            let (server, shared) = (server.clone(), shared.clone());
            std::thread::spawn(move || serve(&server, &shared))
        };
        Ok(StubTsa { url: format!("http://127.0.0.1:{port}/tsa"), shared, server, handle: Some(handle) })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn set_behavior(&self, behavior: StubBehavior) {
        *self.shared.behavior.lock().unwrap() = behavior;
    }

    /// Pins the generation time instead of using the clock.
    pub fn set_time(&self, t: Option<DateTime<Utc>>) {
        *self.shared.fixed_time.lock().unwrap() = t;
    }

    pub fn request_count(&self) -> u64 {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Serves until the process is killed.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StubTsa {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(server: &tiny_http::Server, shared: &Shared) {
    while !shared.stop.load(Ordering::SeqCst) {
        let mut request = match server.recv_timeout(Duration::from_millis(200)) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => break,
        };
        let serial = shared.requests.fetch_add(1, Ordering::SeqCst) + 1;
        let behavior = shared.behavior.lock().unwrap().clone();
        let gen_time = shared.fixed_time.lock().unwrap().unwrap_or_else(Utc::now);
        let mut body = Vec::new();
        let _ = request.as_reader().take(1 << 16).read_to_end(&mut body);

        let reply = match behavior {
            StubBehavior::HttpError(code) => tiny_http::Response::from_data(Vec::new()).with_status_code(code),
            _ => match stub_response(&body, &behavior, serial, gen_time) {
                Ok(bytes) => {
                    let ctype = if behavior == StubBehavior::WrongContentType { "text/plain" } else { CONTENT_TYPE_REPLY };
                    let header = tiny_http::Header::from_bytes("Content-Type", ctype).expect("static header");
                    tiny_http::Response::from_data(bytes).with_header(header)
                }
                Err(_) => tiny_http::Response::from_data(b"bad request".to_vec()).with_status_code(400),
            },
        };
        let _ = request.respond(reply);
    }
}
