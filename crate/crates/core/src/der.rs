//! Minimal DER reader and writer, enough for RFC 3161 requests, responses and
//! CMS SignedData envelopes.
//!
//! Only single-byte tags are supported. The reader rejects indefinite lengths
//! and non-minimal length encodings.

use std::fmt;

use thiserror::Error;

pub const TAG_BOOLEAN: u8 = 0x01;
pub const TAG_INTEGER: u8 = 0x02;
pub const TAG_BIT_STRING: u8 = 0x03;
pub const TAG_OCTET_STRING: u8 = 0x04;
pub const TAG_NULL: u8 = 0x05;
pub const TAG_OID: u8 = 0x06;
pub const TAG_UTF8_STRING: u8 = 0x0c;
pub const TAG_GENERALIZED_TIME: u8 = 0x18;
pub const TAG_SEQUENCE: u8 = 0x30;
pub const TAG_SET: u8 = 0x31;

/// Context-specific constructed tag `[n]`.
pub const fn context(n: u8) -> u8 {
    0xa0 | n
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("DER syntax error at offset {offset}: {reason}")]
pub struct DerError {
    pub offset: usize,
    pub reason: &'static str,
}

fn err<T>(offset: usize, reason: &'static str) -> Result<T, DerError> {
    Err(DerError { offset, reason })
}

/// One decoded TLV. `offset` is the absolute position of the tag byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tlv<'a> {
    pub tag: u8,
    pub offset: usize,
    pub value_offset: usize,
    pub value: &'a [u8],
}

impl<'a> Tlv<'a> {
    pub fn is_constructed(&self) -> bool {
        self.tag & 0x20 != 0
    }

    /// Reader over this TLV's contents.
    pub fn contents(&self) -> Reader<'a> {
        Reader { data: self.value, pos: 0, base: self.value_offset }
    }

    pub fn expect(self, tag: u8) -> Result<Tlv<'a>, DerError> {
        if self.tag == tag {
            Ok(self)
        } else {
            err(self.offset, "unexpected tag")
        }
    }

    pub fn end(&self) -> usize {
        self.value_offset + self.value.len()
    }
}

/// Sequential reader over a run of TLVs.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Reader<'a> {
        Reader { data, pos: 0, base: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    pub fn read(&mut self) -> Result<Tlv<'a>, DerError> {
        let start = self.offset();
        let tag = *self.data.get(self.pos).ok_or(DerError { offset: start, reason: "unexpected end of input" })?;
        if tag & 0x1f == 0x1f {
            return err(start, "multi-byte tags are not supported");
        }
        let mut p = self.pos + 1;
        let first = *self.data.get(p).ok_or(DerError { offset: start + 1, reason: "missing length" })?;
        p += 1;
        let len = if first < 0x80 {
            first as usize
        } else if first == 0x80 {
            return err(start + 1, "indefinite length");
        } else {
            let n = (first & 0x7f) as usize;
            if n > std::mem::size_of::<usize>() {
                return err(start + 1, "length too large");
            }
            let bytes = self
                .data
                .get(p..p + n)
                .ok_or(DerError { offset: start + 2, reason: "truncated length" })?;
            if bytes[0] == 0 {
                return err(start + 1, "non-minimal length");
            }
            let len = bytes.iter().fold(0usize, |acc, b| (acc << 8) | *b as usize);
            if len < 0x80 {
                return err(start + 1, "non-minimal length");
            }
            p += n;
            len
        };
        let end = p.checked_add(len).filter(|e| *e <= self.data.len());
        let Some(end) = end else {
            return err(start, "value runs past end of input");
        };
        let tlv = Tlv { tag, offset: start, value_offset: self.base + p, value: &self.data[p..end] };
        self.pos = end;
        Ok(tlv)
    }

    pub fn read_tag(&mut self, tag: u8) -> Result<Tlv<'a>, DerError> {
        self.read()?.expect(tag)
    }

    /// Reads the next TLV only if it carries `tag`.
    pub fn read_optional(&mut self, tag: u8) -> Result<Option<Tlv<'a>>, DerError> {
        if self.peek_tag() == Some(tag) {
            self.read().map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn finish(&self) -> Result<(), DerError> {
        if self.is_empty() {
            Ok(())
        } else {
            err(self.offset(), "trailing data")
        }
    }
}

/// Parses exactly one TLV spanning all of `data`.
pub fn parse_single(data: &[u8]) -> Result<Tlv<'_>, DerError> {
    let mut r = Reader::new(data);
    let tlv = r.read()?;
    r.finish()?;
    Ok(tlv)
}

/// Decodes an INTEGER's content bytes as an unsigned value, checking minimal form.
pub fn integer_bytes<'a>(tlv: &Tlv<'a>) -> Result<&'a [u8], DerError> {
    let v = tlv.value;
    match v {
        [] => err(tlv.offset, "empty integer"),
        [0, next, ..] if next & 0x80 == 0 => err(tlv.offset, "non-minimal integer"),
        [0xff, next, ..] if next & 0x80 != 0 => err(tlv.offset, "non-minimal integer"),
        [first, ..] if first & 0x80 != 0 => err(tlv.offset, "negative integer"),
        [0, rest @ ..] => Ok(rest),
        _ => Ok(v),
    }
}

pub fn integer_u64(tlv: &Tlv<'_>) -> Result<u64, DerError> {
    let bytes = integer_bytes(tlv)?;
    if bytes.len() > 8 {
        return err(tlv.offset, "integer exceeds 64 bits");
    }
    Ok(bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64))
}

pub fn boolean(tlv: &Tlv<'_>) -> Result<bool, DerError> {
    match tlv.value {
        [0x00] => Ok(false),
        [0xff] => Ok(true),
        _ => err(tlv.offset, "invalid boolean"),
    }
}

/// An object identifier kept as its arcs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Oid(pub Vec<u64>);

impl Oid {
    pub fn parse(dotted: &str) -> Option<Oid> {
        let arcs = dotted.split('.').map(|a| a.parse().ok()).collect::<Option<Vec<u64>>>()?;
        (arcs.len() >= 2 && arcs[0] <= 2 && (arcs[0] == 2 || arcs[1] < 40)).then_some(Oid(arcs))
    }

    pub fn from_der(tlv: &Tlv<'_>) -> Result<Oid, DerError> {
        let tlv = tlv.expect(TAG_OID)?;
        let v = tlv.value;
        if v.is_empty() || *v.last().expect("non-empty") & 0x80 != 0 {
            return err(tlv.offset, "malformed object identifier");
        }
        let mut raw = Vec::new();
        let mut acc: u64 = 0;
        let mut fresh = true;
        for b in v {
            if fresh && *b == 0x80 {
                return err(tlv.offset, "non-minimal object identifier arc");
            }
            acc = acc.checked_mul(128).ok_or(DerError { offset: tlv.offset, reason: "arc overflow" })?
                | (*b & 0x7f) as u64;
            fresh = b & 0x80 == 0;
            if fresh {
                raw.push(acc);
                acc = 0;
            }
        }
        let first = raw[0];
        let mut arcs = if first < 80 { vec![first / 40, first % 40] } else { vec![2, first - 80] };
        arcs.extend_from_slice(&raw[1..]);
        Ok(Oid(arcs))
    }

    pub fn encode_value(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut push_arc = |mut arc: u64| {
            let mut tmp = vec![(arc & 0x7f) as u8];
            arc >>= 7;
            while arc > 0 {
                tmp.push(0x80 | (arc & 0x7f) as u8);
                arc >>= 7;
            }
            out.extend(tmp.iter().rev());
        };
        push_arc(self.0[0] * 40 + self.0[1]);
        for a in &self.0[2..] {
            push_arc(*a);
        }
        out
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

// ---- writer ----

pub fn encode_length(out: &mut Vec<u8>, len: usize) {
    if len < 0x80 {
        out.push(len as u8);
    } else {
        let bytes = len.to_be_bytes();
        let skip = bytes.iter().take_while(|b| **b == 0).count();
        out.push(0x80 | (bytes.len() - skip) as u8);
        out.extend_from_slice(&bytes[skip..]);
    }
}

pub fn tlv(tag: u8, value: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(value.len() + 6);
    out.push(tag);
    encode_length(&mut out, value.len());
    out.extend_from_slice(value);
    out
}

/// Constructed TLV from already-encoded children.
pub fn constructed(tag: u8, children: &[Vec<u8>]) -> Vec<u8> {
    tlv(tag, &children.concat())
}

pub fn sequence(children: &[Vec<u8>]) -> Vec<u8> {
    constructed(TAG_SEQUENCE, children)
}

/// Non-negative INTEGER from big-endian magnitude bytes, minimally encoded.
pub fn integer_from_bytes(magnitude: &[u8]) -> Vec<u8> {
    let skip = magnitude.iter().take_while(|b| **b == 0).count();
    let mut v: Vec<u8> = magnitude[skip..].to_vec();
    if v.is_empty() || v[0] & 0x80 != 0 {
        v.insert(0, 0);
    }
    tlv(TAG_INTEGER, &v)
}

pub fn integer(n: u64) -> Vec<u8> {
    integer_from_bytes(&n.to_be_bytes())
}

pub fn boolean_value(b: bool) -> Vec<u8> {
    tlv(TAG_BOOLEAN, &[if b { 0xff } else { 0x00 }])
}

pub fn null() -> Vec<u8> {
    tlv(TAG_NULL, &[])
}

pub fn octet_string(bytes: &[u8]) -> Vec<u8> {
    tlv(TAG_OCTET_STRING, bytes)
}

pub fn oid(o: &Oid) -> Vec<u8> {
    tlv(TAG_OID, &o.encode_value())
}
