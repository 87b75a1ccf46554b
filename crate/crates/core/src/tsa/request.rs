use crate::der::{self, Oid, TAG_BOOLEAN, TAG_INTEGER, TAG_OCTET_STRING, TAG_OID, TAG_SEQUENCE};

use super::{TsaError, OID_SHA256};

/// Decoded TimeStampReq.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeStampReqData {
    pub version: u64,
    pub hash_alg: String,
    pub hashed_message: Vec<u8>,
    pub policy: Option<String>,
    pub nonce: Option<u64>,
    pub cert_req: bool,
}

/// DER TimeStampReq for a SHA-256 digest:
///
/// ```text
/// SEQUENCE { version 1, messageImprint { sha256 + NULL, digest }, nonce, certReq TRUE }
/// ```
pub fn build_request(digest: &[u8], nonce: u64) -> Result<Vec<u8>, TsaError> {
    if digest.len() != 32 {
        return Err(TsaError::BadDigestLength(digest.len()));
    }
    if nonce == 0 {
        return Err(TsaError::ZeroNonce);
    }
    let sha256 = Oid::parse(OID_SHA256).expect("static oid");
    let imprint = der::sequence(&[der::sequence(&[der::oid(&sha256), der::null()]), der::octet_string(digest)]);
    Ok(der::sequence(&[der::integer(1), imprint, der::integer(nonce), der::boolean_value(true)]))
}

pub fn parse_request(bytes: &[u8]) -> Result<TimeStampReqData, TsaError> {
    let outer = der::parse_single(bytes)?.expect(TAG_SEQUENCE)?;
    let mut r = outer.contents();
    let version = der::integer_u64(&r.read_tag(TAG_INTEGER)?)?;

    let imprint = r.read_tag(TAG_SEQUENCE)?;
    let mut ir = imprint.contents();
    let alg = ir.read_tag(TAG_SEQUENCE)?;
    let mut ar = alg.contents();
    let hash_alg = Oid::from_der(&ar.read()?)?.to_string();
    if let Some(params) = ar.read_optional(der::TAG_NULL)? {
        if !params.value.is_empty() {
            return Err(der::DerError { offset: params.offset, reason: "NULL with content" }.into());
        }
    }
    ar.finish()?;
    let hashed_message = ir.read_tag(TAG_OCTET_STRING)?.value.to_vec();
    ir.finish()?;

    let policy = r.read_optional(TAG_OID)?.map(|t| Oid::from_der(&t)).transpose()?.map(|o| o.to_string());
    let nonce = r.read_optional(TAG_INTEGER)?.map(|t| der::integer_u64(&t)).transpose()?;
    let cert_req = r.read_optional(TAG_BOOLEAN)?.map(|t| der::boolean(&t)).transpose()?.unwrap_or(false);
    // extensions [0] are accepted and ignored
    r.read_optional(der::context(0))?;
    r.finish()?;

    Ok(TimeStampReqData { version, hash_alg, hashed_message, policy, nonce, cert_req })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_digest_nonce_one() {
        let req = build_request(&[0u8; 32], 1).unwrap();
        assert_eq!(req[0], 0x30);
        let mut needle = vec![0x04, 0x20];
        needle.extend([0u8; 32]);
        assert!(req.windows(needle.len()).any(|w| w == needle.as_slice()));
        assert!(req.ends_with(&[0x02, 0x01, 0x01, 0x01, 0x01, 0xff]));
    }

    #[test]
    fn matches_openssl_query_layout() {
        // `openssl ts -query -data abc.txt -sha256 -cert` with nonce 0xF5F98DA6383224B3
        let expected = "30440201013031300d060960864801650304020105000420\
            ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad\
            020900f5f98da6383224b30101ff";
        let digest = hex::decode("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad").unwrap();
        let req = build_request(&digest, 0xF5F9_8DA6_3832_24B3).unwrap();
        assert_eq!(hex::encode(req), expected);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(build_request(&[0u8; 20], 1), Err(TsaError::BadDigestLength(20))));
        assert!(matches!(build_request(&[0u8; 32], 0), Err(TsaError::ZeroNonce)));
    }

    proptest! {
        #[test]
        fn round_trip(digest in proptest::array::uniform32(any::<u8>()), nonce in 1u64..) {
            let parsed = parse_request(&build_request(&digest, nonce).unwrap()).unwrap();
            prop_assert_eq!(parsed.version, 1);
            prop_assert_eq!(parsed.hash_alg.as_str(), OID_SHA256);
            prop_assert_eq!(parsed.hashed_message, digest.to_vec());
            prop_assert_eq!(parsed.nonce, Some(nonce));
            prop_assert!(parsed.cert_req);
            prop_assert_eq!(parsed.policy, None);
        }
    }
}
