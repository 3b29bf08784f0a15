//! Binary model file.
//!
//! ```text
//! magic        b"NGLM"
//! version      u16
//! order        u32
//! tokenization u8        0 = words, 1 = chars
//! alpha        u32 len + UTF-8 decimal string
//! vocabulary   u32 count, then per entry u32 len + UTF-8 bytes
//! contexts     u32 count, then per context in lexicographic id order:
//!                u32 len, len × u32 ids,
//!                u32 pairs, pairs × (u32 token, u64 count) sorted by token
//! crc32        u32 over every preceding byte
//! ```
//!
//! All integers are little-endian. Identical models serialize to identical
//! bytes.

use std::collections::BTreeMap;

use super::{ContextCounts, NgramError, NgramModel, Tokenization};
use crate::lm::Vocabulary;

pub const MAGIC: &[u8; 4] = b"NGLM";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: usize = 6;
const CRC_LEN: usize = 4;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

pub(super) fn encode(model: &NgramModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(FORMAT_VERSION);
    w.u32(model.order as u32);
    w.u8(match model.tokenization {
        Tokenization::Words => 0,
        Tokenization::Chars => 1,
    });
    w.str(&model.alpha_text);
    let forms = model.vocabulary.surface_forms();
    w.u32(forms.len() as u32);
    for f in forms {
        w.str(f);
    }
    w.u32(model.counts.len() as u32);
    for (ctx, c) in &model.counts {
        w.u32(ctx.len() as u32);
        for &t in ctx {
            w.u32(t);
        }
        w.u32(c.counts.len() as u32);
        for &(t, n) in &c.counts {
            w.u32(t);
            w.u64(n);
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NgramError> {
        let end = self.pos.checked_add(n).ok_or(NgramError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(NgramError::Truncated)?;
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, NgramError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, NgramError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, NgramError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, NgramError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| NgramError::Malformed("string is not UTF-8".into()))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<NgramModel, NgramError> {
    if bytes.len() < MAGIC.len() {
        return Err(NgramError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(NgramError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(NgramError::Truncated);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(NgramError::UnsupportedVersion { found: version });
    }
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(NgramError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - CRC_LEN);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(NgramError::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader {
        buf: body,
        pos: HEADER_LEN,
    };
    let order = r.u32()? as usize;
    let tokenization = match r.u8()? {
        0 => Tokenization::Words,
        1 => Tokenization::Chars,
        other => return Err(NgramError::Malformed(format!("tokenization tag {other}"))),
    };
    let alpha_text = r.str()?;
    let vocab_len = r.u32()? as usize;
    let forms = (0..vocab_len)
        .map(|_| r.str())
        .collect::<Result<Vec<_>, _>>()?;
    let vocabulary = Vocabulary::new(forms)?;

    let num_contexts = r.u32()? as usize;
    let mut counts = BTreeMap::new();
    let mut prev: Option<Vec<u32>> = None;
    for _ in 0..num_contexts {
        let len = r.u32()? as usize;
        if order == 0 || len >= order {
            return Err(NgramError::Malformed(format!(
                "context length {len} for order {order}"
            )));
        }
        let ctx = (0..len)
            .map(|_| r.u32().and_then(|t| check_id(t, vocab_len)))
            .collect::<Result<Vec<_>, _>>()?;
        if prev.as_ref().is_some_and(|p| *p >= ctx) {
            return Err(NgramError::Malformed("contexts not strictly sorted".into()));
        }
        let pairs = r.u32()? as usize;
        let mut entries = Vec::with_capacity(pairs.min(vocab_len));
        let mut total = 0u64;
        for _ in 0..pairs {
            let t = check_id(r.u32()?, vocab_len)?;
            let n = r.u64()?;
            if entries.last().is_some_and(|&(last, _)| last >= t) {
                return Err(NgramError::Malformed("counts not strictly sorted".into()));
            }
            total = total
                .checked_add(n)
                .ok_or_else(|| NgramError::Malformed("count overflow".into()))?;
            entries.push((t, n));
        }
        prev = Some(ctx.clone());
        counts.insert(
            ctx,
            ContextCounts {
                total,
                counts: entries,
            },
        );
    }
    if r.pos != body.len() {
        return Err(NgramError::Malformed(
            "trailing bytes before checksum".into(),
        ));
    }
    NgramModel::from_parts(order, alpha_text, tokenization, vocabulary, counts)
}

fn check_id(t: u32, vocab_len: usize) -> Result<u32, NgramError> {
    if (t as usize) < vocab_len {
        Ok(t)
    } else {
        Err(NgramError::Malformed(format!("token id {t} out of range")))
    }
}
