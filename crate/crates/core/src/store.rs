//! Binary persistence of match records and memorized sets, plus CSV export.
//!
//! Match-record file (`MREC`, little-endian):
//!
//! ```text
//! "MREC" | version u32 | model_len u16 | model utf8 | label_len u16 | label utf8
//!        | M u8 | N_max u8 | count u64
//! count × (seq_id u64 | mask u64)
//! crc32 u32   (IEEE, over every preceding byte)
//! ```
//!
//! Memorized-set file (`MSET`):
//!
//! ```text
//! "MSET" | version u32 | N u8 | model_len u16 | model | label_len u16 | label
//!        | universe_bound u64 | count u64
//! count × seq_id u64 (strictly increasing)
//! crc32 u32
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crc32fast::Hasher;

use crate::error::{Error, Result};
use crate::idset::IdSet;
use crate::model::{CheckpointRef, ScoreParams, SequenceId, Suite, MASK_BITS};
use crate::scorer::{self, low_bits, MatchRecord};
use crate::sets::MemorizedSet;

pub const RECORD_MAGIC: &[u8; 4] = b"MREC";
pub const RECORD_VERSION: u32 = 1;
pub const RECORD_LEN: u64 = 16;
pub const SET_MAGIC: &[u8; 4] = b"MSET";
pub const SET_VERSION: u32 = 1;
const TRAILER_LEN: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordFileHeader {
    pub model: String,
    pub checkpoint: String,
    pub prompt_len: u8,
    pub cont_len: u8,
    pub count: u64,
}

impl RecordFileHeader {
    pub fn encoded_len(&self) -> u64 {
        4 + 4 + 2 + self.model.len() as u64 + 2 + self.checkpoint.len() as u64 + 1 + 1 + 8
    }

    /// Total file size implied by this header.
    pub fn file_len(&self) -> Option<u64> {
        self.count
            .checked_mul(RECORD_LEN)?
            .checked_add(self.encoded_len() + TRAILER_LEN)
    }

    fn encode(&self) -> Result<Vec<u8>> {
        if self.cont_len == 0 || self.cont_len > MASK_BITS {
            return Err(Error::param(format!(
                "N_max {} outside 1..=64",
                self.cont_len
            )));
        }
        let mut b = Vec::with_capacity(self.encoded_len() as usize);
        b.extend_from_slice(RECORD_MAGIC);
        b.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        put_str(&mut b, &self.model)?;
        put_str(&mut b, &self.checkpoint)?;
        b.push(self.prompt_len);
        b.push(self.cont_len);
        b.extend_from_slice(&self.count.to_le_bytes());
        Ok(b)
    }
}

fn put_str(b: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::param(format!("name longer than 65535 bytes: {s:.32}...")))?;
    b.extend_from_slice(&len.to_le_bytes());
    b.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Byte source that tracks its offset and a running CRC of everything read.
struct Source<R: Read> {
    inner: R,
    crc: Hasher,
    offset: u64,
}

impl<R: Read> Source<R> {
    fn new(inner: R) -> Self {
        Source {
            inner,
            crc: Hasher::new(),
            offset: 0,
        }
    }

    /// Reads exactly `buf.len()` bytes or fails with a truncation diagnostic.
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => {
                    return Err(Error::format(
                        self.offset + got as u64,
                        format!("unexpected end of file inside {what}"),
                    ))
                }
                Ok(k) => got += k,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.crc.update(buf);
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b, what)?;
        Ok(b[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.fill(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)?;
        let start = self.offset;
        let mut b = vec![0u8; usize::from(len)];
        self.fill(&mut b, what)?;
        String::from_utf8(b).map_err(|_| Error::format(start, format!("{what} is not UTF-8")))
    }

    fn magic(&mut self, expected: &[u8; 4], kind: &str) -> Result<()> {
        let mut b = [0u8; 4];
        self.fill(&mut b, "magic")?;
        if &b != expected {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {} file",
                    String::from_utf8_lossy(&b),
                    kind
                ),
            ));
        }
        Ok(())
    }

    fn version(&mut self, kind: &'static str, expected: u32) -> Result<()> {
        let found = self.u32("version")?;
        if found != expected {
            return Err(Error::UnsupportedVersion {
                kind,
                found,
                expected,
            });
        }
        Ok(())
    }

    /// Verifies the CRC trailer and that nothing follows it.
    fn finish(&mut self) -> Result<()> {
        let computed = self.crc.clone().finalize();
        let at = self.offset;
        let mut b = [0u8; 4];
        self.fill(&mut b, "checksum trailer")?;
        let stored = u32::from_le_bytes(b);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut probe = [0u8; 1];
        loop {
            match self.inner.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => {
                    return Err(Error::format(
                        at + TRAILER_LEN,
                        "unexpected data after checksum trailer",
                    ))
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
}

/// Streaming writer for match-record files.
pub struct RecordWriter<W: Write> {
    inner: W,
    crc: Hasher,
    header: RecordFileHeader,
    written: u64,
    prev: Option<SequenceId>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut inner: W, header: RecordFileHeader) -> Result<Self> {
        let bytes = header.encode()?;
        let mut crc = Hasher::new();
        crc.update(&bytes);
        inner.write_all(&bytes)?;
        Ok(RecordWriter {
            inner,
            crc,
            header,
            written: 0,
            prev: None,
        })
    }

    pub fn write(&mut self, rec: &MatchRecord) -> Result<()> {
        if self.written == self.header.count {
            return Err(Error::param(format!(
                "header declares {} records; refusing to write more",
                self.header.count
            )));
        }
        if rec.valid_bits != self.header.cont_len {
            return Err(Error::param(format!(
                "record for sequence {} has {} valid bits, file stores {}",
                rec.seq_id, rec.valid_bits, self.header.cont_len
            )));
        }
        if rec.mask & !low_bits(self.header.cont_len) != 0 {
            return Err(Error::param(format!(
                "mask of sequence {} has bits beyond N_max",
                rec.seq_id
            )));
        }
        if self.prev.is_some_and(|p| rec.seq_id <= p) {
            return Err(Error::param(format!(
                "unsorted ids: sequence {} after {}",
                rec.seq_id,
                self.prev.unwrap()
            )));
        }
        let mut b = [0u8; RECORD_LEN as usize];
        b[..8].copy_from_slice(&rec.seq_id.0.to_le_bytes());
        b[8..].copy_from_slice(&rec.mask.to_le_bytes());
        self.crc.update(&b);
        self.inner.write_all(&b)?;
        self.prev = Some(rec.seq_id);
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
        let crc = self.crc.finalize();
        self.inner.write_all(&crc.to_le_bytes())?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming reader; yields records and, after the last one, verifies the
/// checksum trailer. Memory use is independent of file size.
pub struct RecordReader<R: Read> {
    src: Source<R>,
    header: RecordFileHeader,
    remaining: u64,
    prev: Option<u64>,
    done: bool,
}

impl<R: Read> RecordReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut src = Source::new(inner);
        src.magic(RECORD_MAGIC, "MREC")?;
        src.version("match-record file", RECORD_VERSION)?;
        let model = src.string("model name")?;
        let checkpoint = src.string("checkpoint label")?;
        let prompt_len = src.u8("prompt length")?;
        let at = src.offset;
        let cont_len = src.u8("continuation length")?;
        if cont_len == 0 || cont_len > MASK_BITS {
            return Err(Error::format(
                at,
                format!("N_max {cont_len} outside 1..=64"),
            ));
        }
        let count = src.u64("record count")?;
        let header = RecordFileHeader {
            model,
            checkpoint,
            prompt_len,
            cont_len,
            count,
        };
        Ok(RecordReader {
            src,
            remaining: count,
            header,
            prev: None,
            done: false,
        })
    }

    pub fn header(&self) -> &RecordFileHeader {
        &self.header
    }

    fn read_one(&mut self) -> Result<MatchRecord> {
        let at = self.src.offset;
        let seq = self.src.u64("record")?;
        let mask = self.src.u64("record")?;
        if mask & !low_bits(self.header.cont_len) != 0 {
            return Err(Error::format(
                at + 8,
                format!(
                    "mask of sequence {seq} has bits set beyond N_max = {}",
                    self.header.cont_len
                ),
            ));
        }
        if self.prev.is_some_and(|p| seq <= p) {
            return Err(Error::format(
                at,
                format!(
                    "sequence ids not strictly increasing: {seq} after {}",
                    self.prev.unwrap()
                ),
            ));
        }
        self.prev = Some(seq);
        self.remaining -= 1;
        Ok(MatchRecord {
            seq_id: SequenceId(seq),
            mask,
            valid_bits: self.header.cont_len,
        })
    }

    /// Drains the stream, returning the first error if any.
    pub fn verify(self) -> Result<RecordFileHeader> {
        let header = self.header.clone();
        for r in self {
            r?;
        }
        Ok(header)
    }
}

impl RecordReader<BufReader<File>> {
    /// Opens a file, checking that its size matches the declared record count
    /// before any record is read.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let reader = RecordReader::new(BufReader::with_capacity(1 << 16, file))?;
        match reader.header.file_len() {
            Some(expected) if expected == len => Ok(reader),
            Some(expected) if expected > len => Err(Error::format(
                len,
                format!(
                    "file truncated: header declares {} records ({expected} bytes), file has {len}",
                    reader.header.count
                ),
            )),
            Some(expected) => Err(Error::format(
                expected,
                format!(
                    "file has {} bytes beyond the {} declared records",
                    len - expected,
                    reader.header.count
                ),
            )),
            None => Err(Error::format(
                reader.header.encoded_len() - 8,
                "record count overflows file size",
            )),
        }
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<MatchRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out = if self.remaining > 0 {
            self.read_one()
        } else {
            self.done = true;
            return self.src.finish().err().map(Err);
        };
        if out.is_err() {
            self.done = true;
        }
        Some(out)
    }
}

pub fn write_match_records<'a>(
    path: impl AsRef<Path>,
    header: &RecordFileHeader,
    records: impl IntoIterator<Item = &'a MatchRecord>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = RecordWriter::new(BufWriter::with_capacity(1 << 16, file), header.clone())?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_match_records(path: impl AsRef<Path>) -> Result<RecordReader<BufReader<File>>> {
    RecordReader::open(path)
}

/// Scans a token file straight into a match-record file.
pub fn score_token_file(
    tokens: impl AsRef<Path>,
    out: impl AsRef<Path>,
    model: &str,
    checkpoint: &str,
) -> Result<RecordFileHeader> {
    let out = out.as_ref();
    let tokens = tokens.as_ref();
    let file = File::open(tokens).map_err(|e| Error::io(tokens, e))?;
    let th = scorer::TokenReader::new(BufReader::new(file))?
        .header()
        .to_owned();
    let header = RecordFileHeader {
        model: model.to_string(),
        checkpoint: checkpoint.to_string(),
        prompt_len: th.prompt_len,
        cont_len: th.cont_len,
        count: th.count,
    };
    let f = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = RecordWriter::new(BufWriter::with_capacity(1 << 16, f), header.clone())?;
    scorer::scan_token_file(tokens, |_, recs| recs.iter().try_for_each(|r| w.write(r)))?;
    w.finish()?;
    Ok(header)
}

/// Memorized set of one suite checkpoint at the given threshold.
///
/// The universe is the evaluated span of the record file (last id + 1),
/// which the validator guarantees does not exceed `sequences_seen`.
pub fn load_memorized_set(
    suite: &Suite,
    r: &CheckpointRef,
    params: &ScoreParams,
) -> Result<MemorizedSet> {
    let (model, ckpt) = suite.resolve(r)?;
    let path = suite.record_path(ckpt);
    let reader = RecordReader::open(&path).map_err(|e| annotate(&path, e))?;
    let set = scorer::memorized_set(reader, params, None).map_err(|e| annotate(&path, e))?;
    if set.universe_bound() > ckpt.sequences_seen {
        return Err(Error::Manifest(format!(
            "{}: records extend to sequence {} but checkpoint {} saw only {}",
            path.display(),
            set.universe_bound() - 1,
            ckpt.label,
            ckpt.sequences_seen
        )));
    }
    Ok(set.with_owner(CheckpointRef::new(&model.name, &ckpt.label)))
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        Error::Checksum { stored, computed } => Error::Manifest(format!(
            "{}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})",
            path.display()
        )),
        other => other,
    }
}

pub fn write_memorized_set(path: impl AsRef<Path>, set: &MemorizedSet) -> Result<()> {
    let path = path.as_ref();
    let (model, label) = set
        .owner()
        .map_or(("", ""), |o| (o.model.as_str(), o.checkpoint.as_str()));
    let mut head = Vec::new();
    head.extend_from_slice(SET_MAGIC);
    head.extend_from_slice(&SET_VERSION.to_le_bytes());
    head.push(set.threshold());
    put_str(&mut head, model)?;
    put_str(&mut head, label)?;
    head.extend_from_slice(&set.universe_bound().to_le_bytes());
    head.extend_from_slice(&set.len().to_le_bytes());

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut crc = Hasher::new();
    crc.update(&head);
    w.write_all(&head)?;
    for id in set.ids().iter() {
        let b = id.to_le_bytes();
        crc.update(&b);
        w.write_all(&b)?;
    }
    w.write_all(&crc.finalize().to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_memorized_set_from<R: Read>(inner: R) -> Result<MemorizedSet> {
    let mut src = Source::new(inner);
    src.magic(SET_MAGIC, "MSET")?;
    src.version("memorized-set file", SET_VERSION)?;
    let at = src.offset;
    let threshold = src.u8("threshold")?;
    if threshold == 0 || threshold > MASK_BITS {
        return Err(Error::format(
            at,
            format!("threshold {threshold} outside 1..=64"),
        ));
    }
    let model = src.string("model name")?;
    let label = src.string("checkpoint label")?;
    let bound = src.u64("universe bound")?;
    let count = src.u64("id count")?;
    if count > bound {
        return Err(Error::format(
            src.offset - 8,
            format!("{count} ids cannot fit a universe of {bound}"),
        ));
    }
    let mut ids = Vec::new();
    let mut prev: Option<u64> = None;
    for _ in 0..count {
        let at = src.offset;
        let id = src.u64("id payload")?;
        if prev.is_some_and(|p| id <= p) || id >= bound {
            return Err(Error::format(
                at,
                format!("id {id} out of order or outside universe {bound}"),
            ));
        }
        prev = Some(id);
        ids.push(id);
    }
    src.finish()?;
    let mut set = MemorizedSet::new(IdSet::from_sorted(ids, bound)?, bound, threshold);
    if !(model.is_empty() && label.is_empty()) {
        set = set.with_owner(CheckpointRef::new(model, label));
    }
    Ok(set)
}

pub fn read_memorized_set(path: impl AsRef<Path>) -> Result<MemorizedSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_memorized_set_from(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(count: u64) -> RecordFileHeader {
        RecordFileHeader {
            model: "70M".into(),
            checkpoint: "final".into(),
            prompt_len: 32,
            cont_len: 64,
            count,
        }
    }

    fn encode(h: &RecordFileHeader, recs: &[MatchRecord]) -> Vec<u8> {
        let mut w = RecordWriter::new(Vec::new(), h.clone()).unwrap();
        for r in recs {
            w.write(r).unwrap();
        }
        w.finish().unwrap()
    }

    fn recs(n: u64) -> Vec<MatchRecord> {
        (0..n)
            .map(|i| MatchRecord {
                seq_id: SequenceId(i * 3),
                mask: i.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                valid_bits: 64,
            })
            .collect()
    }

    #[test]
    fn roundtrip_in_memory() {
        let rs = recs(50);
        let bytes = encode(&header(50), &rs);
        let reader = RecordReader::new(&bytes[..]).unwrap();
        assert_eq!(reader.header(), &header(50));
        let back: Vec<_> = reader.map(Result::unwrap).collect();
        assert_eq!(back, rs);
        assert_eq!(bytes.len() as u64, header(50).file_len().unwrap());
    }

    #[test]
    fn writer_enforces_contract() {
        let mut w = RecordWriter::new(Vec::new(), header(2)).unwrap();
        w.write(&recs(2)[1]).unwrap();
        assert!(w.write(&recs(2)[0]).is_err());
        let w = RecordWriter::new(Vec::new(), header(2)).unwrap();
        assert!(w.finish().is_err());
        let mut h = header(1);
        h.cont_len = 32;
        let mut w = RecordWriter::new(Vec::new(), h).unwrap();
        assert!(w.write(&recs(1)[0]).is_err());
    }

    #[test]
    fn version_bump_rejected() {
        let mut bytes = encode(&header(1), &recs(1));
        bytes[4] += 1;
        assert!(matches!(
            RecordReader::new(&bytes[..]),
            Err(Error::UnsupportedVersion {
                found: 2,
                expected: 1,
                ..
            })
        ));
    }

    #[test]
    fn truncation_names_offset() {
        let bytes = encode(&header(3), &recs(3));
        let hl = header(3).encoded_len();
        let cut = (hl + RECORD_LEN + 5) as usize;
        let out: Vec<_> = RecordReader::new(&bytes[..cut]).unwrap().collect();
        match out.last().unwrap() {
            Err(Error::Format { offset, .. }) => assert_eq!(*offset, cut as u64),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let mut bytes = encode(&header(3), &recs(3));
        let at = header(3).encoded_len() as usize + 9;
        bytes[at] ^= 0x10;
        let res: Result<Vec<_>> = RecordReader::new(&bytes[..]).unwrap().collect();
        assert!(matches!(res, Err(Error::Checksum { .. })));
    }

    #[test]
    fn memorized_set_file_roundtrip() {
        let set = MemorizedSet::from_ids(vec![1, 5, 99], 100, 32)
            .unwrap()
            .with_owner(CheckpointRef::new("12B", "146M"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mset");
        write_memorized_set(&p, &set).unwrap();
        let back = read_memorized_set(&p).unwrap();
        assert_eq!(back, set);

        let mut bytes = std::fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 12] ^= 1;
        assert!(read_memorized_set_from(&bytes[..]).is_err());
    }
}
