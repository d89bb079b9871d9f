//! Per-sequence memorization scoring.
//!
//! A scan compares the true continuation of each training sequence against the
//! model's greedy continuation and records the outcome as a 64-bit match mask
//! (bit `i` set iff continuation token `i` matches). Scores at any threshold
//! `N <= valid_bits` are then a popcount of the low `N` bits.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::idset::IdSetBuilder;
use crate::model::{ScoreParams, SequenceId, MASK_BITS};
use crate::sets::MemorizedSet;

pub const TOKEN_MAGIC: &[u8; 4] = b"MTOK";
pub const TOKEN_VERSION: u32 = 1;
/// magic + version + M + N_max + record count
pub const TOKEN_HEADER_LEN: u64 = 4 + 4 + 1 + 1 + 8;

/// True tokens (prompt followed by continuation) and the greedy continuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRecord {
    pub seq_id: SequenceId,
    pub true_tokens: Vec<u32>,
    pub gen_tokens: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatchRecord {
    pub seq_id: SequenceId,
    pub mask: u64,
    pub valid_bits: u8,
}

impl MatchRecord {
    /// Builds a record, rejecting masks with bits set at or above `valid_bits`.
    pub fn new(seq_id: impl Into<SequenceId>, mask: u64, valid_bits: u8) -> Result<Self> {
        if valid_bits == 0 || valid_bits > MASK_BITS {
            return Err(Error::param(format!(
                "valid_bits {valid_bits} outside 1..=64"
            )));
        }
        if mask & !low_bits(valid_bits) != 0 {
            return Err(Error::param(format!(
                "mask {mask:#x} has bits beyond valid_bits {valid_bits}"
            )));
        }
        Ok(MatchRecord {
            seq_id: seq_id.into(),
            mask,
            valid_bits,
        })
    }
}

/// Mask with the low `n` bits set (`n <= 64`).
#[inline]
pub fn low_bits(n: u8) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Exact memorization score: `matched / out_of`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Score {
    pub matched: u8,
    pub out_of: u8,
}

impl Score {
    pub fn to_ratio(self) -> Ratio<u32> {
        Ratio::new(u32::from(self.matched), u32::from(self.out_of))
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.matched) / f64::from(self.out_of)
    }

    pub fn is_full(self) -> bool {
        self.matched == self.out_of
    }
}

fn check_threshold(rec: &MatchRecord, params: &ScoreParams) -> Result<()> {
    params.check()?;
    if params.cont_len > rec.valid_bits {
        return Err(Error::param(format!(
            "threshold N = {} exceeds the {} stored match bits of sequence {}",
            params.cont_len, rec.valid_bits, rec.seq_id
        )));
    }
    Ok(())
}

pub fn memorization_score(rec: &MatchRecord, params: &ScoreParams) -> Result<Score> {
    check_threshold(rec, params)?;
    let n = params.cont_len;
    Ok(Score {
        matched: (rec.mask & low_bits(n)).count_ones() as u8,
        out_of: n,
    })
}

/// `true` iff every one of the first `N` continuation tokens matched.
pub fn is_extractible(rec: &MatchRecord, params: &ScoreParams) -> Result<bool> {
    check_threshold(rec, params)?;
    let m = low_bits(params.cont_len);
    Ok(rec.mask & m == m)
}

/// Mask for one sequence given its continuation and the generated tokens.
#[inline]
pub fn match_mask(true_cont: &[u32], gen: &[u32]) -> u64 {
    debug_assert!(true_cont.len() == gen.len() && gen.len() <= 64);
    true_cont
        .iter()
        .zip(gen)
        .enumerate()
        .fold(0u64, |m, (i, (t, g))| m | (u64::from(t == g) << i))
}

/// Same as [`match_mask`] over little-endian encoded token bytes.
#[inline]
fn match_mask_le(true_cont: &[u8], gen: &[u8]) -> u64 {
    true_cont
        .chunks_exact(4)
        .zip(gen.chunks_exact(4))
        .enumerate()
        .fold(0u64, |m, (i, (t, g))| m | (u64::from(t == g) << i))
}

impl TokenRecord {
    pub fn match_record(&self, prompt_len: u8) -> MatchRecord {
        let n = self.gen_tokens.len();
        let m = usize::from(prompt_len);
        MatchRecord {
            seq_id: self.seq_id,
            mask: match_mask(&self.true_tokens[m..m + n], &self.gen_tokens),
            valid_bits: n as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenFileHeader {
    pub prompt_len: u8,
    pub cont_len: u8,
    pub count: u64,
}

impl TokenFileHeader {
    pub fn record_len(&self) -> u64 {
        8 + 4 * (2 * u64::from(self.cont_len) + u64::from(self.prompt_len))
    }

    fn encode(&self) -> [u8; TOKEN_HEADER_LEN as usize] {
        let mut b = [0u8; TOKEN_HEADER_LEN as usize];
        b[..4].copy_from_slice(TOKEN_MAGIC);
        b[4..8].copy_from_slice(&TOKEN_VERSION.to_le_bytes());
        b[8] = self.prompt_len;
        b[9] = self.cont_len;
        b[10..18].copy_from_slice(&self.count.to_le_bytes());
        b
    }

    fn decode(b: &[u8; TOKEN_HEADER_LEN as usize]) -> Result<Self> {
        if &b[..4] != TOKEN_MAGIC {
            return Err(Error::format(0, "bad magic, expected MTOK"));
        }
        let version = u32::from_le_bytes(b[4..8].try_into().unwrap());
        if version != TOKEN_VERSION {
            return Err(Error::UnsupportedVersion {
                kind: "token file",
                found: version,
                expected: TOKEN_VERSION,
            });
        }
        let h = TokenFileHeader {
            prompt_len: b[8],
            cont_len: b[9],
            count: u64::from_le_bytes(b[10..18].try_into().unwrap()),
        };
        if h.cont_len == 0 || h.cont_len > MASK_BITS {
            return Err(Error::format(
                9,
                format!("N_max {} outside 1..=64", h.cont_len),
            ));
        }
        Ok(h)
    }
}

/// Streaming writer for token files.
pub struct TokenWriter<W: Write> {
    inner: W,
    header: TokenFileHeader,
    written: u64,
}

impl<W: Write> TokenWriter<W> {
    pub fn new(mut inner: W, header: TokenFileHeader) -> Result<Self> {
        if header.cont_len == 0 || header.cont_len > MASK_BITS {
            return Err(Error::param(format!(
                "N_max {} outside 1..=64",
                header.cont_len
            )));
        }
        inner.write_all(&header.encode())?;
        Ok(TokenWriter {
            inner,
            header,
            written: 0,
        })
    }

    pub fn write(&mut self, rec: &TokenRecord) -> Result<()> {
        let m = usize::from(self.header.prompt_len);
        let n = usize::from(self.header.cont_len);
        if rec.true_tokens.len() != m + n || rec.gen_tokens.len() != n {
            return Err(Error::param(format!(
                "sequence {}: expected {} true and {} generated tokens, got {} and {}",
                rec.seq_id,
                m + n,
                n,
                rec.true_tokens.len(),
                rec.gen_tokens.len()
            )));
        }
        if self.written == self.header.count {
            return Err(Error::param("more records than the header declares"));
        }
        let mut buf = Vec::with_capacity(self.header.record_len() as usize);
        buf.extend_from_slice(&rec.seq_id.0.to_le_bytes());
        for t in rec.true_tokens.iter().chain(&rec.gen_tokens) {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.count {
            return Err(Error::param(format!(
                "header declares {} records, {} written",
                self.header.count, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_token_file(
    path: impl AsRef<Path>,
    prompt_len: u8,
    cont_len: u8,
    records: &[TokenRecord],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let header = TokenFileHeader {
        prompt_len,
        cont_len,
        count: records.len() as u64,
    };
    let mut w = TokenWriter::new(BufWriter::new(file), header)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Streaming token-file reader that yields raw record bytes, tracking the
/// byte offset for diagnostics.
struct RawTokenStream<R: Read> {
    inner: R,
    header: TokenFileHeader,
    offset: u64,
    remaining: u64,
    buf: Vec<u8>,
    done: bool,
}

impl<R: Read> RawTokenStream<R> {
    fn new(mut inner: R) -> Result<Self> {
        let mut hb = [0u8; TOKEN_HEADER_LEN as usize];
        let got = read_full(&mut inner, &mut hb)?;
        if got < hb.len() {
            return Err(Error::format(got as u64, "truncated token file header"));
        }
        let header = TokenFileHeader::decode(&hb)?;
        Ok(RawTokenStream {
            inner,
            header,
            offset: TOKEN_HEADER_LEN,
            remaining: header.count,
            buf: vec![0u8; header.record_len() as usize],
            done: false,
        })
    }

    /// Next record's bytes, `Ok(None)` at a clean end of input.
    fn next_raw(&mut self) -> Result<Option<&[u8]>> {
        if self.done {
            return Ok(None);
        }
        if self.remaining == 0 {
            self.done = true;
            let mut probe = [0u8; 1];
            if read_full(&mut self.inner, &mut probe)? != 0 {
                return Err(Error::format(
                    self.offset,
                    format!(
                        "data beyond the {} records declared in the header",
                        self.header.count
                    ),
                ));
            }
            return Ok(None);
        }
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got < self.buf.len() {
            self.done = true;
            return Err(Error::format(
                self.offset + got as u64,
                format!(
                    "truncated record {} starting at byte {} (header declares {} records)",
                    self.header.count - self.remaining,
                    self.offset,
                    self.header.count
                ),
            ));
        }
        self.offset += got as u64;
        self.remaining -= 1;
        Ok(Some(&self.buf))
    }
}

fn seq_id_of(raw: &[u8]) -> SequenceId {
    SequenceId(u64::from_le_bytes(raw[..8].try_into().unwrap()))
}

fn decode_token_record(raw: &[u8], header: &TokenFileHeader) -> TokenRecord {
    let m = usize::from(header.prompt_len);
    let n = usize::from(header.cont_len);
    let mut toks = raw[8..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()));
    let true_tokens = toks.by_ref().take(m + n).collect();
    let gen_tokens = toks.collect();
    TokenRecord {
        seq_id: seq_id_of(raw),
        true_tokens,
        gen_tokens,
    }
}

#[inline]
fn scan_raw(raw: &[u8], header: &TokenFileHeader) -> MatchRecord {
    let m = usize::from(header.prompt_len);
    let n = usize::from(header.cont_len);
    let cont_start = 8 + 4 * m;
    let gen_start = cont_start + 4 * n;
    MatchRecord {
        seq_id: seq_id_of(raw),
        mask: match_mask_le(&raw[cont_start..gen_start], &raw[gen_start..]),
        valid_bits: header.cont_len,
    }
}

/// Iterator over decoded [`TokenRecord`]s.
pub struct TokenReader<R: Read> {
    raw: RawTokenStream<R>,
}

impl<R: Read> TokenReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        Ok(TokenReader {
            raw: RawTokenStream::new(inner)?,
        })
    }

    pub fn header(&self) -> &TokenFileHeader {
        &self.raw.header
    }
}

impl<R: Read> Iterator for TokenReader<R> {
    type Item = Result<TokenRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let header = self.raw.header;
        match self.raw.next_raw() {
            Ok(Some(raw)) => Some(Ok(decode_token_record(raw, &header))),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

/// Streaming scan: one [`MatchRecord`] per token record, in input order.
pub struct TokenScan<R: Read> {
    raw: RawTokenStream<R>,
}

pub fn scan_tokens<R: Read>(input: R) -> Result<TokenScan<R>> {
    Ok(TokenScan {
        raw: RawTokenStream::new(input)?,
    })
}

impl<R: Read> TokenScan<R> {
    pub fn header(&self) -> &TokenFileHeader {
        &self.raw.header
    }
}

impl<R: Read> Iterator for TokenScan<R> {
    type Item = Result<MatchRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let header = self.raw.header;
        match self.raw.next_raw() {
            Ok(Some(raw)) => Some(Ok(scan_raw(raw, &header))),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

/// Records scanned per work unit in [`scan_token_file`].
pub const SCAN_CHUNK: u64 = 1 << 16;

/// Scans a token file on disk, splitting it into fixed-size record ranges that
/// are processed independently on the current rayon pool and handed to `sink`
/// in file order. The output does not depend on the number of workers.
pub fn scan_token_file(
    path: impl AsRef<Path>,
    mut sink: impl FnMut(&TokenFileHeader, &[MatchRecord]) -> Result<()>,
) -> Result<TokenFileHeader> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut hb = [0u8; TOKEN_HEADER_LEN as usize];
    let got = read_full(&mut BufReader::new(file), &mut hb)?;
    if got < hb.len() {
        return Err(Error::format(got as u64, "truncated token file header"));
    }
    let header = TokenFileHeader::decode(&hb)?;
    let rec_len = header.record_len();
    let expected = header
        .count
        .checked_mul(rec_len)
        .and_then(|p| p.checked_add(TOKEN_HEADER_LEN))
        .ok_or_else(|| Error::format(10, "record count overflows file size"))?;
    if len < expected {
        let complete = (len - TOKEN_HEADER_LEN) / rec_len;
        return Err(Error::format(
            TOKEN_HEADER_LEN + complete * rec_len,
            format!(
                "truncated record {complete} (header declares {} records)",
                header.count
            ),
        ));
    }
    if len > expected {
        return Err(Error::format(
            expected,
            format!(
                "data beyond the {} records declared in the header",
                header.count
            ),
        ));
    }

    let chunks = header.count.div_ceil(SCAN_CHUNK);
    let batch = (rayon::current_num_threads() as u64 * 4).max(1);
    let mut start = 0;
    while start < chunks {
        let end = (start + batch).min(chunks);
        let parts: Vec<Result<Vec<MatchRecord>>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let first = c * SCAN_CHUNK;
                let n = SCAN_CHUNK.min(header.count - first);
                let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
                f.seek(SeekFrom::Start(TOKEN_HEADER_LEN + first * rec_len))?;
                let mut buf = vec![0u8; (n * rec_len) as usize];
                f.read_exact(&mut buf)?;
                Ok(buf
                    .chunks_exact(rec_len as usize)
                    .map(|raw| scan_raw(raw, &header))
                    .collect())
            })
            .collect();
        for part in parts {
            sink(&header, &part?)?;
        }
        start = end;
    }
    Ok(header)
}

/// Ids of extractible sequences below `id_bound`. Input must be strictly
/// increasing in `seq_id`.
pub fn memorized_set<I>(
    records: I,
    params: &ScoreParams,
    id_bound: Option<SequenceId>,
) -> Result<MemorizedSet>
where
    I: IntoIterator<Item = Result<MatchRecord>>,
{
    let mut builder = IdSetBuilder::new();
    let mut prev: Option<SequenceId> = None;
    let mut span = 0u64;
    for (i, rec) in records.into_iter().enumerate() {
        let rec = rec?;
        if let Some(p) = prev {
            if rec.seq_id <= p {
                return Err(Error::format(
                    i as u64,
                    format!(
                        "records not strictly increasing: sequence {} follows {p} (record index {i})",
                        rec.seq_id
                    ),
                ));
            }
        }
        prev = Some(rec.seq_id);
        if id_bound.is_some_and(|b| rec.seq_id >= b) {
            continue;
        }
        span = rec.seq_id.0 + 1;
        if is_extractible(&rec, params)? {
            builder.push(rec.seq_id.0);
        }
    }
    let bound = id_bound.map_or(span, |b| b.0);
    Ok(MemorizedSet::new(
        builder.build(bound)?,
        bound,
        params.cont_len,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(mask: u64, bits: u8) -> MatchRecord {
        MatchRecord::new(0u64, mask, bits).unwrap()
    }

    fn p(n: u8) -> ScoreParams {
        ScoreParams::new(4, n).unwrap()
    }

    #[test]
    fn mask_above_valid_bits_rejected() {
        assert!(MatchRecord::new(0u64, 1 << 10, 10).is_err());
        assert!(MatchRecord::new(0u64, 0, 0).is_err());
        assert!(MatchRecord::new(0u64, u64::MAX, 64).is_ok());
    }

    #[test]
    fn threshold_beyond_valid_bits_is_param_error() {
        let r = rec(0b11, 10);
        assert!(matches!(
            memorization_score(&r, &p(11)),
            Err(Error::Param(_))
        ));
        assert!(matches!(is_extractible(&r, &p(11)), Err(Error::Param(_))));
    }

    #[test]
    fn full_mask_scores_one() {
        let r = rec(u64::MAX, 64);
        let s = memorization_score(&r, &p(32)).unwrap();
        assert_eq!(s.to_ratio(), Ratio::from_integer(1));
        assert!(s.is_full());
    }

    #[test]
    fn extractible_prefix_property() {
        let r = rec(low_bits(32), 64);
        assert!(is_extractible(&r, &p(32)).unwrap());
        assert!(!is_extractible(&r, &p(64)).unwrap());
    }

    #[test]
    fn memorized_set_bounds_and_order() {
        let recs = vec![
            rec(u64::MAX, 64),
            MatchRecord::new(1u64, low_bits(16), 64).unwrap(),
            MatchRecord::new(2u64, u64::MAX, 64).unwrap(),
        ];
        let s = memorized_set(recs.iter().cloned().map(Ok), &p(32), None).unwrap();
        assert_eq!(s.ids().iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(s.universe_bound(), 3);
        let s = memorized_set(recs.into_iter().map(Ok), &p(32), Some(SequenceId(2))).unwrap();
        assert_eq!(s.ids().iter().collect::<Vec<_>>(), vec![0]);

        let unsorted = vec![
            Ok(MatchRecord::new(5u64, 0, 64).unwrap()),
            Ok(MatchRecord::new(3u64, 0, 64).unwrap()),
        ];
        assert!(matches!(
            memorized_set(unsorted, &p(32), None),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn empty_token_file_scans_to_nothing() {
        let mut buf = Vec::new();
        let w = TokenWriter::new(
            &mut buf,
            TokenFileHeader {
                prompt_len: 32,
                cont_len: 32,
                count: 0,
            },
        )
        .unwrap();
        w.finish().unwrap();
        assert_eq!(scan_tokens(&buf[..]).unwrap().count(), 0);
    }

    #[test]
    fn truncated_token_file_reports_offset() {
        let mut buf = Vec::new();
        let header = TokenFileHeader {
            prompt_len: 1,
            cont_len: 2,
            count: 2,
        };
        let mut w = TokenWriter::new(&mut buf, header).unwrap();
        for id in 0..2u64 {
            w.write(&TokenRecord {
                seq_id: SequenceId(id),
                true_tokens: vec![1, 2, 3],
                gen_tokens: vec![2, 9],
            })
            .unwrap();
        }
        w.finish().unwrap();
        // record length 8 + 4 * 5 = 28; cut 5 bytes into the second record
        let cut = (TOKEN_HEADER_LEN + 28 + 5) as usize;
        let out: Vec<_> = scan_tokens(&buf[..cut]).unwrap().collect();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].as_ref().unwrap().mask, 0b01);
        match &out[1] {
            Err(Error::Format { offset, .. }) => assert_eq!(*offset, cut as u64),
            other => panic!("unexpected {other:?}"),
        }

        let mut longer = buf.clone();
        longer.push(0);
        let out: Vec<_> = scan_tokens(&longer[..]).unwrap().collect();
        assert!(out.last().unwrap().is_err());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = Vec::new();
        TokenWriter::new(
            &mut buf,
            TokenFileHeader {
                prompt_len: 1,
                cont_len: 1,
                count: 0,
            },
        )
        .unwrap()
        .finish()
        .unwrap();
        let mut v = buf.clone();
        v[4] = 2;
        assert!(matches!(
            scan_tokens(&v[..]),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        let mut m = buf;
        m[0] = b'X';
        assert!(matches!(
            scan_tokens(&m[..]),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
