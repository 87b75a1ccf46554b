//! TimeStampResp / TimeStampToken / TSTInfo decoding.
//!
//! The token is a CMS ContentInfo wrapping SignedData whose encapsulated
//! content is the DER TSTInfo. Every part of the envelope is extracted
//! (certificates, CRLs and signer infos are kept as raw DER) so that callers
//! can tell two tokens apart even though signatures are not verified here.

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Utc};

use crate::der::{
    self, DerError, Oid, Reader, Tlv, TAG_BIT_STRING, TAG_BOOLEAN, TAG_GENERALIZED_TIME,
    TAG_INTEGER, TAG_OCTET_STRING, TAG_OID, TAG_SEQUENCE, TAG_SET,
};

use super::{TsaError, OID_SHA256, OID_SIGNED_DATA, OID_TST_INFO};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgorithmId {
    pub oid: String,
    /// Raw DER of the parameters, if present.
    pub params: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Accuracy {
    pub seconds: Option<u64>,
    pub millis: Option<u64>,
    pub micros: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TstInfo {
    pub version: u64,
    pub policy_oid: String,
    pub message_imprint_alg: String,
    pub message_imprint: Vec<u8>,
    /// Serial number magnitude, big-endian.
    pub serial: Vec<u8>,
    pub gen_time: DateTime<Utc>,
    pub accuracy: Option<Accuracy>,
    pub ordering: bool,
    /// Nonce magnitude, big-endian.
    pub nonce: Option<Vec<u8>>,
    /// Raw `[0]` GeneralName of the TSA.
    pub tsa_name: Option<Vec<u8>>,
    /// Raw `[1]` extensions.
    pub extensions: Option<Vec<u8>>,
    /// Raw DER of trailing fields this parser does not know.
    pub unrecognized: Vec<Vec<u8>>,
}

impl TstInfo {
    pub fn serial_hex(&self) -> String {
        hex::encode(&self.serial)
    }

    pub fn nonce_u64(&self) -> Option<u64> {
        let n = self.nonce.as_ref()?;
        (n.len() <= 8).then(|| n.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignerSummary {
    pub version: u64,
    pub sid: Vec<u8>,
    pub digest_alg: AlgorithmId,
    pub signed_attrs: Option<Vec<u8>>,
    pub signature_alg: AlgorithmId,
    pub signature: Vec<u8>,
    pub unsigned_attrs: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedDataInfo {
    pub version: u64,
    pub digest_algorithms: Vec<AlgorithmId>,
    pub certificates: Option<Vec<u8>>,
    pub crls: Option<Vec<u8>>,
    pub signers: Vec<SignerSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeStampToken {
    pub signed_data: SignedDataInfo,
    pub tst_info: TstInfo,
    /// DER of the ContentInfo alone (without any response wrapper).
    pub der: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkiStatus {
    Granted,
    GrantedWithMods,
    Rejection,
    Waiting,
    RevocationWarning,
    RevocationNotification,
    Other(u64),
}

impl PkiStatus {
    pub fn from_code(code: u64) -> PkiStatus {
        match code {
            0 => PkiStatus::Granted,
            1 => PkiStatus::GrantedWithMods,
            2 => PkiStatus::Rejection,
            3 => PkiStatus::Waiting,
            4 => PkiStatus::RevocationWarning,
            5 => PkiStatus::RevocationNotification,
            n => PkiStatus::Other(n),
        }
    }

    pub fn code(self) -> u64 {
        match self {
            PkiStatus::Granted => 0,
            PkiStatus::GrantedWithMods => 1,
            PkiStatus::Rejection => 2,
            PkiStatus::Waiting => 3,
            PkiStatus::RevocationWarning => 4,
            PkiStatus::RevocationNotification => 5,
            PkiStatus::Other(n) => n,
        }
    }

    pub fn is_granted(self) -> bool {
        matches!(self, PkiStatus::Granted | PkiStatus::GrantedWithMods)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeStampResp {
    pub status: PkiStatus,
    pub status_text: Vec<String>,
    /// PKIFailureInfo bits; bit `n` of the named bit list is `1 << n`.
    pub fail_info: Option<u32>,
    /// DER of the embedded TimeStampToken, if any.
    pub token: Option<Vec<u8>>,
}

fn raw(tlv: &Tlv<'_>, whole: &[u8]) -> Vec<u8> {
    whole[tlv.offset..tlv.end()].to_vec()
}

fn algorithm(tlv: Tlv<'_>, whole: &[u8]) -> Result<AlgorithmId, TsaError> {
    let mut r = tlv.expect(TAG_SEQUENCE)?.contents();
    let oid = Oid::from_der(&r.read()?)?.to_string();
    let params = if r.is_empty() { None } else { Some(raw(&r.read()?, whole)) };
    r.finish()?;
    Ok(AlgorithmId { oid, params })
}

fn parse_generalized_time(tlv: &Tlv<'_>) -> Result<DateTime<Utc>, DerError> {
    let bad = DerError { offset: tlv.offset, reason: "invalid GeneralizedTime" };
    let s = std::str::from_utf8(tlv.value).map_err(|_| bad.clone())?;
    let body = s.strip_suffix('Z').ok_or(bad.clone())?;
    let (main, frac) = match body.split_once('.') {
        Some((m, f)) => (m, Some(f)),
        None => (body, None),
    };
    if main.len() != 14 || !main.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad);
    }
    let num = |r: std::ops::Range<usize>| main[r].parse::<u32>().map_err(|_| bad.clone());
    let date = NaiveDate::from_ymd_opt(num(0..4)? as i32, num(4..6)?, num(6..8)?).ok_or(bad.clone())?;
    let mut nanos = 0u32;
    if let Some(f) = frac {
        // DER: at least one digit, no trailing zeros
        if f.is_empty() || f.len() > 9 || f.ends_with('0') || !f.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad);
        }
        nanos = format!("{f:0<9}").parse().map_err(|_| bad.clone())?;
    }
    let time = NaiveTime::from_hms_nano_opt(num(8..10)?, num(10..12)?, num(12..14)?, nanos).ok_or(bad.clone())?;
    Ok(NaiveDateTime::new(date, time).and_utc())
}

fn parse_accuracy(tlv: Tlv<'_>) -> Result<Accuracy, TsaError> {
    let mut r = tlv.contents();
    let mut acc = Accuracy::default();
    if let Some(t) = r.read_optional(TAG_INTEGER)? {
        acc.seconds = Some(der::integer_u64(&t)?);
    }
    // millis and micros are IMPLICIT [0] / [1] INTEGER (primitive)
    if let Some(t) = r.read_optional(0x80)? {
        acc.millis = Some(der::integer_u64(&Tlv { tag: TAG_INTEGER, ..t })?);
    }
    if let Some(t) = r.read_optional(0x81)? {
        acc.micros = Some(der::integer_u64(&Tlv { tag: TAG_INTEGER, ..t })?);
    }
    r.finish()?;
    Ok(acc)
}

fn parse_tst_info(bytes: &[u8]) -> Result<TstInfo, TsaError> {
    let outer = der::parse_single(bytes)?.expect(TAG_SEQUENCE)?;
    let mut r = outer.contents();
    let version = der::integer_u64(&r.read_tag(TAG_INTEGER)?)?;
    if version != 1 {
        return Err(TsaError::NotATimestampToken(format!("TSTInfo version {version}")));
    }
    let policy_oid = Oid::from_der(&r.read()?)?.to_string();

    let imprint = r.read_tag(TAG_SEQUENCE)?;
    let mut ir = imprint.contents();
    let alg = algorithm(ir.read()?, bytes)?;
    let message_imprint = ir.read_tag(TAG_OCTET_STRING)?.value.to_vec();
    ir.finish()?;

    let serial = der::integer_bytes(&r.read_tag(TAG_INTEGER)?)?.to_vec();
    let gen_time = parse_generalized_time(&r.read_tag(TAG_GENERALIZED_TIME)?)?;

    let accuracy = r.read_optional(TAG_SEQUENCE)?.map(parse_accuracy).transpose()?;
    let ordering = match r.read_optional(TAG_BOOLEAN)? {
        Some(t) => {
            let v = der::boolean(&t)?;
            if !v {
                // DEFAULT FALSE must be omitted in DER
                return Err(DerError { offset: t.offset, reason: "explicit default boolean" }.into());
            }
            v
        }
        None => false,
    };
    let nonce = r.read_optional(TAG_INTEGER)?.map(|t| der::integer_bytes(&t).map(<[u8]>::to_vec)).transpose()?;
    let tsa_name = r.read_optional(der::context(0))?.map(|t| raw(&t, bytes));
    let extensions = r.read_optional(der::context(1))?.map(|t| raw(&t, bytes));
    let mut unrecognized = Vec::new();
    while !r.is_empty() {
        unrecognized.push(raw(&r.read()?, bytes));
    }

    if alg.oid != OID_SHA256 {
        return Err(TsaError::UnsupportedHashAlg(alg.oid));
    }
    // sha-256 parameters are absent or NULL
    if alg.params.as_deref().is_some_and(|p| p != [0x05, 0x00]) {
        return Err(TsaError::NotATimestampToken("message imprint algorithm has parameters".into()));
    }
    if message_imprint.len() != 32 {
        return Err(TsaError::BadDigestLength(message_imprint.len()));
    }

    Ok(TstInfo {
        version,
        policy_oid,
        message_imprint_alg: alg.oid,
        message_imprint,
        serial,
        gen_time,
        accuracy,
        ordering,
        nonce,
        tsa_name,
        extensions,
        unrecognized,
    })
}

fn parse_signer(tlv: Tlv<'_>, whole: &[u8]) -> Result<SignerSummary, TsaError> {
    let mut r = tlv.expect(TAG_SEQUENCE)?.contents();
    let version = der::integer_u64(&r.read_tag(TAG_INTEGER)?)?;
    let sid = raw(&r.read()?, whole);
    let digest_alg = algorithm(r.read()?, whole)?;
    let signed_attrs = r.read_optional(der::context(0))?.map(|t| raw(&t, whole));
    let signature_alg = algorithm(r.read()?, whole)?;
    let signature = r.read_tag(TAG_OCTET_STRING)?.value.to_vec();
    let unsigned_attrs = r.read_optional(der::context(1))?.map(|t| raw(&t, whole));
    r.finish()?;
    Ok(SignerSummary { version, sid, digest_alg, signed_attrs, signature_alg, signature, unsigned_attrs })
}

fn parse_content_info(tlv: Tlv<'_>, whole: &[u8]) -> Result<TimeStampToken, TsaError> {
    let mut r = tlv.expect(TAG_SEQUENCE)?.contents();
    let content_type = Oid::from_der(&r.read_tag(TAG_OID)?)?.to_string();
    if content_type != OID_SIGNED_DATA {
        return Err(TsaError::NotATimestampToken(format!("content type {content_type}")));
    }
    let explicit = r.read_tag(der::context(0))?;
    r.finish()?;
    let mut inner = explicit.contents();
    let sd = inner.read_tag(TAG_SEQUENCE)?;
    inner.finish()?;

    let mut s = sd.contents();
    let version = der::integer_u64(&s.read_tag(TAG_INTEGER)?)?;
    let set = s.read_tag(TAG_SET)?;
    let mut dr = set.contents();
    let mut digest_algorithms = Vec::new();
    while !dr.is_empty() {
        digest_algorithms.push(algorithm(dr.read()?, whole)?);
    }

    let encap = s.read_tag(TAG_SEQUENCE)?;
    let mut er = encap.contents();
    let econtent_type = Oid::from_der(&er.read_tag(TAG_OID)?)?.to_string();
    if econtent_type != OID_TST_INFO {
        return Err(TsaError::NotATimestampToken(format!("encapsulated content type {econtent_type}")));
    }
    let econtent = er
        .read_optional(der::context(0))?
        .ok_or_else(|| TsaError::NotATimestampToken("detached content".into()))?;
    er.finish()?;
    let mut oc = econtent.contents();
    let octets = oc.read_tag(TAG_OCTET_STRING)?;
    oc.finish()?;
    let tst_info = parse_tst_info(octets.value).map_err(|e| match e {
        // report offsets relative to the whole input
        TsaError::DerSyntax(d) => TsaError::DerSyntax(DerError { offset: d.offset + octets.value_offset, ..d }),
        other => other,
    })?;

    let certificates = s.read_optional(der::context(0))?.map(|t| raw(&t, whole));
    let crls = s.read_optional(der::context(1))?.map(|t| raw(&t, whole));
    let signer_set = s.read_tag(TAG_SET)?;
    let mut sr = signer_set.contents();
    let mut signers = Vec::new();
    while !sr.is_empty() {
        signers.push(parse_signer(sr.read()?, whole)?);
    }
    s.finish()?;

    Ok(TimeStampToken {
        signed_data: SignedDataInfo { version, digest_algorithms, certificates, crls, signers },
        tst_info,
        der: raw(&tlv, whole),
    })
}

fn parse_status(tlv: Tlv<'_>) -> Result<(PkiStatus, Vec<String>, Option<u32>), TsaError> {
    let mut r = tlv.expect(TAG_SEQUENCE)?.contents();
    let status = PkiStatus::from_code(der::integer_u64(&r.read_tag(TAG_INTEGER)?)?);
    let mut text = Vec::new();
    if let Some(seq) = r.read_optional(TAG_SEQUENCE)? {
        let mut tr = seq.contents();
        while !tr.is_empty() {
            let t = tr.read_tag(der::TAG_UTF8_STRING)?;
            text.push(String::from_utf8_lossy(t.value).into_owned());
        }
    }
    let fail_info = r.read_optional(TAG_BIT_STRING)?.map(|t| bit_string_flags(&t)).transpose()?;
    r.finish()?;
    Ok((status, text, fail_info))
}

fn bit_string_flags(t: &Tlv<'_>) -> Result<u32, DerError> {
    let (unused, bits) = t.value.split_first().ok_or(DerError { offset: t.offset, reason: "empty bit string" })?;
    if *unused > 7 || (bits.is_empty() && *unused != 0) {
        return Err(DerError { offset: t.offset, reason: "invalid bit string" });
    }
    let mut flags = 0u32;
    for (byte_idx, byte) in bits.iter().enumerate().take(4) {
        for bit in 0..8 {
            if byte & (0x80 >> bit) != 0 {
                flags |= 1 << (byte_idx * 8 + bit);
            }
        }
    }
    Ok(flags)
}

/// Parses a TimeStampResp (status plus optional token).
pub fn parse_response(bytes: &[u8]) -> Result<TimeStampResp, TsaError> {
    let outer = der::parse_single(bytes)?.expect(TAG_SEQUENCE)?;
    let mut r = outer.contents();
    let (status, status_text, fail_info) = parse_status(r.read()?)?;
    let token = r.read_optional(TAG_SEQUENCE)?.map(|t| raw(&t, bytes));
    r.finish()?;
    Ok(TimeStampResp { status, status_text, fail_info, token })
}

/// Parses either a bare TimeStampToken or a full TimeStampResp carrying one.
pub fn parse_token_full(bytes: &[u8]) -> Result<TimeStampToken, TsaError> {
    let outer = der::parse_single(bytes)?.expect(TAG_SEQUENCE)?;
    let first = outer.contents().read()?;
    match first.tag {
        TAG_OID => parse_content_info(outer, bytes),
        TAG_SEQUENCE => {
            let mut r: Reader<'_> = outer.contents();
            let (status, _, _) = parse_status(r.read()?)?;
            let token = r
                .read_optional(TAG_SEQUENCE)?
                .ok_or_else(|| TsaError::NotATimestampToken(format!("response without token (status {})", status.code())))?;
            r.finish()?;
            parse_content_info(token, bytes)
        }
        _ => Err(DerError { offset: first.offset, reason: "expected ContentInfo or TimeStampResp" }.into()),
    }
}

pub fn parse_token(bytes: &[u8]) -> Result<TstInfo, TsaError> {
    parse_token_full(bytes).map(|t| t.tst_info)
}
