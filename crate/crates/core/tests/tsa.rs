use std::fs;
use std::path::{Path, PathBuf};

use arts_core::tsa::stub::{encode_tst_info, stub_response, wrap_tst_info, StubBehavior, StubTsa};
use arts_core::tsa::{
    self, build_request, parse_request, parse_response, parse_token_full, PkiStatus, SignatureCheck, TimestampRecord,
    TsaError, OID_SHA256, OID_TST_INFO,
};
use chrono::{TimeZone, Utc};
use der::{Decode, Encode};
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tsa").join(name)
}

fn openssl_token() -> Vec<u8> {
    fs::read(fixture("token.der")).unwrap()
}

// Values printed by `openssl ts -reply -text` when the fixture was made.
const FIXTURE_NONCE: u64 = 0x42BE_F820_162D_522F;
const FIXTURE_SERIAL: &str = "2b";

#[test]
fn openssl_reply_and_token() {
    let resp = parse_response(&fs::read(fixture("reply.tsr")).unwrap()).unwrap();
    assert_eq!(resp.status, PkiStatus::Granted);
    let token_der = resp.token.unwrap();
    assert_eq!(token_der, openssl_token());

    let t = parse_token_full(&token_der).unwrap();
    let data_digest = Sha256::digest(fs::read(fixture("data.txt")).unwrap());
    assert_eq!(t.tst_info.version, 1);
    assert_eq!(t.tst_info.policy_oid, "1.2.3.4.1");
    assert_eq!(t.tst_info.message_imprint_alg, OID_SHA256);
    assert_eq!(t.tst_info.message_imprint, data_digest.as_slice());
    assert_eq!(t.tst_info.serial_hex(), FIXTURE_SERIAL);
    assert_eq!(t.tst_info.gen_time, Utc.with_ymd_and_hms(2026, 10, 19, 3, 27, 33).unwrap());
    assert_eq!(t.tst_info.nonce_u64(), Some(FIXTURE_NONCE));
    assert_eq!(t.tst_info.accuracy.as_ref().unwrap().seconds, Some(1));
    assert!(!t.tst_info.ordering);
    assert!(t.tst_info.tsa_name.is_some());
    assert!(t.signed_data.certificates.is_some());
    assert_eq!(t.signed_data.signers.len(), 1);
    assert_eq!(t.signed_data.signers[0].digest_alg.oid, OID_SHA256);
    assert_eq!(t.signed_data.signers[0].signature.len(), 256);
    assert_eq!(t.der, token_der);
}

#[test]
fn openssl_fields_agree_with_independent_parser() {
    let der = openssl_token();
    let ours = parse_token_full(&der).unwrap().tst_info;
    let ci = cms::content_info::ContentInfo::from_der(&der).unwrap();
    let sd: cms::signed_data::SignedData = ci.content.decode_as().unwrap();
    let econtent = sd.encap_content_info.econtent.unwrap();
    assert_eq!(sd.encap_content_info.econtent_type.to_string(), OID_TST_INFO);
    let octets = der::asn1::OctetString::from_der(&econtent.to_der().unwrap()).unwrap();
    let theirs = x509_tsp::TstInfo::from_der(octets.as_bytes()).unwrap();
    assert_eq!(theirs.policy.to_string(), ours.policy_oid);
    assert_eq!(theirs.message_imprint.hashed_message.as_bytes(), ours.message_imprint.as_slice());
    assert_eq!(theirs.serial_number.as_bytes(), ours.serial.as_slice());
    assert_eq!(theirs.nonce.unwrap().as_bytes(), ours.nonce.unwrap().as_slice());
    assert_eq!(theirs.gen_time.to_unix_duration().as_secs() as i64, ours.gen_time.timestamp());
}

#[test]
fn openssl_request_parses() {
    let req = parse_request(&fs::read(fixture("request.tsq")).unwrap()).unwrap();
    assert_eq!(req.version, 1);
    assert_eq!(req.hash_alg, OID_SHA256);
    assert_eq!(req.hashed_message, Sha256::digest(fs::read(fixture("data.txt")).unwrap()).as_slice());
    assert_eq!(req.nonce, Some(FIXTURE_NONCE));
    assert!(req.cert_req);
}

#[test]
fn openssl_token_verifies_its_file() {
    let token = parse_token_full(&openssl_token()).unwrap();
    let digest = hex::encode(Sha256::digest(fs::read(fixture("data.txt")).unwrap()));
    let rec = TimestampRecord::from_token("data.txt".into(), digest, "http://tsa.invalid/", &token);
    assert_eq!(rec.gen_time, "2026-10-19T03:27:33Z");
    assert_eq!(rec.token_der().unwrap(), openssl_token());
    let v = tsa::verify_record(&fixture(""), &rec).unwrap();
    assert!(v.pass && v.digest_match && v.imprint_match);
    assert_eq!(v.signature, SignatureCheck::NotChecked);
}

#[test]
fn every_truncation_is_a_syntax_error() {
    let der = openssl_token();
    for len in 0..der.len() {
        match parse_token_full(&der[..len]) {
            Err(TsaError::DerSyntax(_)) => {}
            other => panic!("prefix of {len} bytes: {other:?}"),
        }
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> usize {
    haystack.windows(needle.len()).position(|w| w == needle).unwrap()
}

#[test]
fn content_type_mutations_are_not_tokens() {
    let der = openssl_token();
    // last arc of id-signedData (…7.2) and of id-ct-TSTInfo (…16.1.4)
    let signed_data = [0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x07, 0x02];
    let tst_info = [0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x09, 0x10, 0x01, 0x04];
    for pattern in [&signed_data[..], &tst_info[..]] {
        let mut m = der.clone();
        let at = find(&m, pattern) + pattern.len() - 1;
        m[at] ^= 0x01;
        assert!(matches!(parse_token_full(&m), Err(TsaError::NotATimestampToken(_))), "{pattern:x?}");
    }
}

#[test]
fn non_sha256_imprint_is_unsupported() {
    // turn the imprint's sha-256 OID into sha-384 (last byte 1 -> 2)
    let der = openssl_token();
    let tst_info_oid = [0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d, 0x01, 0x09, 0x10, 0x01, 0x04];
    let sha256 = [0x60, 0x86, 0x48, 0x01, 0x65, 0x03, 0x04, 0x02, 0x01];
    let econtent = find(&der, &tst_info_oid);
    let at = econtent + find(&der[econtent..], &sha256) + sha256.len() - 1;
    let mut m = der.clone();
    m[at] = 0x02;
    assert!(matches!(parse_token_full(&m), Err(TsaError::UnsupportedHashAlg(_))));
}

#[test]
fn any_single_byte_change_is_detected() {
    let der = openssl_token();
    let original = parse_token_full(&der).unwrap();
    for at in 0..der.len() {
        for flip in [0x01u8, 0x80] {
            let mut m = der.clone();
            m[at] ^= flip;
            if let Ok(t) = parse_token_full(&m) {
                assert!(
                    t.signed_data != original.signed_data || t.tst_info != original.tst_info,
                    "byte {at} ^ {flip:#x} parsed to the same token"
                );
            }
        }
    }
}

#[test]
fn stub_encodings_pass_strict_parsers() {
    let digest = Sha256::digest(b"stub");
    // the der crate only takes whole-second GeneralizedTime
    let t = Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap();
    let tst = encode_tst_info(&digest, 77, t, Some(9));
    let strict = x509_tsp::TstInfo::from_der(&tst).unwrap();
    assert_eq!(strict.to_der().unwrap(), tst);
    assert_eq!(strict.message_imprint.hashed_message.as_bytes(), digest.as_slice());

    let token = wrap_tst_info(&tst, OID_TST_INFO);
    let ci = cms::content_info::ContentInfo::from_der(&token).unwrap();
    assert_eq!(ci.to_der().unwrap(), token);
    let ours = parse_token_full(&token).unwrap();
    assert_eq!(ours.tst_info.gen_time, t);
    assert_eq!(ours.tst_info.nonce_u64(), Some(9));

    let req = build_request(&digest, 5).unwrap();
    let reply = stub_response(&req, &StubBehavior::Grant, 1, t).unwrap();
    assert_eq!(parse_response(&reply).unwrap().status, PkiStatus::Granted);
}

#[test]
fn fractional_gen_time_round_trips() {
    let t = Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap() + chrono::Duration::milliseconds(250);
    let token = wrap_tst_info(&encode_tst_info(&[7; 32], 1, t, Some(1)), OID_TST_INFO);
    assert_eq!(parse_token_full(&token).unwrap().tst_info.gen_time, t);
    // trailing zero dropped, so ".25" is what goes on the wire
    assert!(token.windows(17).any(|w| w == b"20260301120000.25"));
}

#[test]
fn client_against_misbehaving_stub() {
    let stub = StubTsa::start().unwrap();
    let digest = Sha256::digest(b"payload");
    let ask = || tsa::request_digest_timestamp(stub.url(), &digest);

    assert!(ask().is_ok());
    stub.set_behavior(StubBehavior::GrantWithMods);
    assert!(ask().is_ok());

    stub.set_behavior(StubBehavior::Reject { status: 2, fail_info: Some(1 << 5) });
    assert!(matches!(ask(), Err(TsaError::TsaRejected { status: 2, fail_info: Some(32) })));
    stub.set_behavior(StubBehavior::CorruptImprint);
    assert!(matches!(ask(), Err(TsaError::TokenMismatch)));
    stub.set_behavior(StubBehavior::WrongNonce);
    assert!(matches!(ask(), Err(TsaError::NonceMismatch)));
    stub.set_behavior(StubBehavior::OmitNonce);
    assert!(matches!(ask(), Err(TsaError::NonceMismatch)));
    stub.set_behavior(StubBehavior::WrongContentType);
    assert!(matches!(ask(), Err(TsaError::TransportError(_))));
    stub.set_behavior(StubBehavior::HttpError(503));
    assert!(matches!(ask(), Err(TsaError::TransportError(_))));
    stub.set_behavior(StubBehavior::WrongEContentType);
    assert!(matches!(ask(), Err(TsaError::NotATimestampToken(_))));
    assert_eq!(stub.request_count(), 9);
}

#[test]
fn unreachable_tsa_is_a_transport_error() {
    let stub = StubTsa::start().unwrap();
    let url = stub.url().to_string();
    drop(stub);
    assert!(matches!(tsa::request_digest_timestamp(&url, &[0; 32]), Err(TsaError::TransportError(_))));
}

#[test]
fn store_round_trip_and_mutation() {
    let stub = StubTsa::start().unwrap();
    stub.set_time(Some(Utc.with_ymd_and_hms(2026, 1, 2, 3, 4, 5).unwrap()));
    let root = tempfile::tempdir().unwrap();
    fs::create_dir_all(root.path().join("data")).unwrap();
    let file = root.path().join("data/a.csv");
    fs::write(&file, "x,y\n1,2\n").unwrap();
    let rec = tsa::request_timestamp(stub.url(), root.path(), &file).unwrap();
    assert_eq!(rec.path, "data/a.csv");
    assert_eq!(rec.gen_time, "2026-01-02T03:04:05Z");
    let store = root.path().join(tsa::STORE_FILE);
    tsa::append_record(&store, rec.clone()).unwrap();
    let back = tsa::read_records(&store).unwrap();
    assert_eq!(back, vec![rec.clone()]);
    assert!(tsa::verify_record(root.path(), &back[0]).unwrap().pass);

    fs::write(&file, "x,y\n1,3\n").unwrap();
    let v = tsa::verify_record(root.path(), &back[0]).unwrap();
    assert!(!v.pass && !v.digest_match && v.imprint_match);
}

#[test]
fn request_bytes_match_openssl() {
    let digest = Sha256::digest(fs::read(fixture("data.txt")).unwrap());
    let ours = build_request(&digest, FIXTURE_NONCE).unwrap();
    assert_eq!(hex::encode(ours), hex::encode(fs::read(fixture("request.tsq")).unwrap()));
}

#[test]
fn token_paired_with_another_file_fails() {
    let stub = StubTsa::start().unwrap();
    let root = tempfile::tempdir().unwrap();
    for (name, body) in [("a.txt", "first\n"), ("b.txt", "second\n")] {
        fs::write(root.path().join(name), body).unwrap();
    }
    let a = tsa::request_timestamp(stub.url(), root.path(), &root.path().join("a.txt")).unwrap();
    let b = tsa::request_timestamp(stub.url(), root.path(), &root.path().join("b.txt")).unwrap();
    let crossed = TimestampRecord { token_b64: b.token_b64.clone(), ..a.clone() };
    let v = tsa::verify_record(root.path(), &crossed).unwrap();
    assert!(v.digest_match && !v.imprint_match && !v.pass);
    assert!(tsa::verify_record(root.path(), &a).unwrap().pass);
}
