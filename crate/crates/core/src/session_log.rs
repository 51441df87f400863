//! Binary session log: a fixed header followed by back-to-back records.
//!
//! ```text
//! magic          8 bytes  "TRGYDAQ1"
//! version        u16 LE   (1)
//! record size    u16 LE   (228)
//! tick rate      u16 LE   Hz
//! scenario name  32 bytes UTF-8, zero padded
//! records        N × 228 bytes
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::record::{deserialize_record, serialize_record, RecordError, TelemetryRecord, RECORD_SIZE};

pub const MAGIC: [u8; 8] = *b"TRGYDAQ1";
pub const FORMAT_VERSION: u16 = 1;
pub const NAME_LEN: usize = 32;
pub const HEADER_SIZE: usize = 8 + 2 + 2 + 2 + NAME_LEN;
pub const DEFAULT_TICK_RATE_HZ: u16 = 10;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: RecordError,
    },
    #[error("sequence must increase: last {last}, got {got}")]
    SequenceError { last: u32, got: u32 },
    #[error("bad session log header: {0}")]
    BadHeader(String),
    #[error("log body of {0} bytes is not a whole number of records")]
    Truncated(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHeader {
    pub version: u16,
    pub tick_rate_hz: u16,
    pub scenario: String,
}

impl LogHeader {
    pub fn new(scenario: &str, tick_rate_hz: u16) -> Self {
        LogHeader {
            version: FORMAT_VERSION,
            tick_rate_hz,
            scenario: scenario.to_string(),
        }
    }

    fn encode(&self) -> Result<[u8; HEADER_SIZE], LogError> {
        let name = self.scenario.as_bytes();
        if name.len() > NAME_LEN {
            return Err(LogError::BadHeader(format!(
                "scenario name longer than {NAME_LEN} bytes"
            )));
        }
        let mut out = [0u8; HEADER_SIZE];
        out[..8].copy_from_slice(&MAGIC);
        out[8..10].copy_from_slice(&self.version.to_le_bytes());
        out[10..12].copy_from_slice(&(RECORD_SIZE as u16).to_le_bytes());
        out[12..14].copy_from_slice(&self.tick_rate_hz.to_le_bytes());
        out[14..14 + name.len()].copy_from_slice(name);
        Ok(out)
    }

    fn decode(buf: &[u8]) -> Result<Self, LogError> {
        if buf.len() < HEADER_SIZE {
            return Err(LogError::BadHeader(format!(
                "{} bytes is shorter than the {HEADER_SIZE}-byte header",
                buf.len()
            )));
        }
        if buf[..8] != MAGIC {
            return Err(LogError::BadHeader("wrong magic".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([buf[o], buf[o + 1]]);
        let version = u16_at(8);
        if version != FORMAT_VERSION {
            return Err(LogError::BadHeader(format!("unsupported version {version}")));
        }
        let record_size = u16_at(10) as usize;
        if record_size != RECORD_SIZE {
            return Err(LogError::BadHeader(format!("record size {record_size}")));
        }
        let tick_rate_hz = u16_at(12);
        if tick_rate_hz == 0 {
            return Err(LogError::BadHeader("zero tick rate".into()));
        }
        let name = &buf[14..14 + NAME_LEN];
        let end = name.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
        if name[end..].iter().any(|&b| b != 0) {
            return Err(LogError::BadHeader("scenario name padding not zero".into()));
        }
        let scenario = std::str::from_utf8(&name[..end])
            .map_err(|_| LogError::BadHeader("scenario name is not UTF-8".into()))?
            .to_string();
        Ok(LogHeader { version, tick_rate_hz, scenario })
    }
}

/// An in-memory session: header plus records in strictly increasing `seq`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    header: LogHeader,
    records: Vec<TelemetryRecord>,
}

impl SessionLog {
    pub fn new(scenario: &str, tick_rate_hz: u16) -> Self {
        SessionLog {
            header: LogHeader::new(scenario, tick_rate_hz),
            records: Vec::new(),
        }
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn tick_rate_hz(&self) -> u16 {
        self.header.tick_rate_hz
    }

    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_seq(&self) -> Option<u32> {
        self.records.last().map(|r| r.seq)
    }

    /// Size of the encoded file.
    pub fn byte_len(&self) -> usize {
        HEADER_SIZE + self.records.len() * RECORD_SIZE
    }

    /// Appends a record; `seq` must be strictly greater than the last one and
    /// the record must serialize.
    pub fn append(&mut self, rec: TelemetryRecord) -> Result<(), LogError> {
        if let Some(last) = self.last_seq() {
            if rec.seq <= last {
                return Err(LogError::SequenceError { last, got: rec.seq });
            }
        }
        rec.validate().map_err(|source| LogError::Record {
            index: self.records.len(),
            source,
        })?;
        self.records.push(rec);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, LogError> {
        let mut out = Vec::with_capacity(self.byte_len());
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LogError> {
        w.write_all(&self.header.encode()?)?;
        for (index, rec) in self.records.iter().enumerate() {
            let buf = serialize_record(rec).map_err(|source| LogError::Record { index, source })?;
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, LogError> {
        let header = LogHeader::decode(buf)?;
        let body = &buf[HEADER_SIZE..];
        if !body.len().is_multiple_of(RECORD_SIZE) {
            return Err(LogError::Truncated(body.len()));
        }
        let mut log = SessionLog { header, records: Vec::with_capacity(body.len() / RECORD_SIZE) };
        for (index, chunk) in body.chunks_exact(RECORD_SIZE).enumerate() {
            let rec = deserialize_record(chunk).map_err(|source| LogError::Record { index, source })?;
            log.append(rec)?;
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LogError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::sample_record;

    #[test]
    fn header_layout() {
        let log = SessionLog::new("slow_lap", 10);
        let bytes = log.to_bytes().unwrap();
        assert_eq!(bytes.len(), HEADER_SIZE);
        assert_eq!(HEADER_SIZE, 46);
        assert_eq!(&bytes[..8], b"TRGYDAQ1");
        assert_eq!(&bytes[8..14], &[1, 0, 228, 0, 10, 0]);
        assert_eq!(&bytes[14..22], b"slow_lap");
        assert!(bytes[22..].iter().all(|&b| b == 0));
    }

    #[test]
    fn append_grows_by_record_size() {
        let mut log = SessionLog::new("t", 10);
        for seq in 0..5 {
            let before = log.byte_len();
            log.append(sample_record(seq)).unwrap();
            assert_eq!(log.byte_len(), before + 228);
        }
        assert_eq!(log.to_bytes().unwrap().len(), HEADER_SIZE + 5 * 228);
    }

    #[test]
    fn non_monotonic_seq_rejected() {
        let mut log = SessionLog::new("t", 10);
        log.append(sample_record(4)).unwrap();
        assert!(matches!(
            log.append(sample_record(4)),
            Err(LogError::SequenceError { last: 4, got: 4 })
        ));
        assert!(matches!(log.append(sample_record(2)), Err(LogError::SequenceError { .. })));
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn bytes_roundtrip() {
        let mut log = SessionLog::new("crash", 10);
        for seq in [0, 1, 5, 9] {
            log.append(sample_record(seq)).unwrap();
        }
        let bytes = log.to_bytes().unwrap();
        assert_eq!(SessionLog::from_bytes(&bytes).unwrap(), log);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.daq");
        let mut log = SessionLog::new("fast_lap", 10);
        log.append(sample_record(0)).unwrap();
        log.save(&path).unwrap();
        assert_eq!(SessionLog::load(&path).unwrap(), log);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut log = SessionLog::new("x", 10);
        log.append(sample_record(0)).unwrap();
        let good = log.to_bytes().unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(SessionLog::from_bytes(&bad_magic), Err(LogError::BadHeader(_))));

        assert!(matches!(
            SessionLog::from_bytes(&good[..good.len() - 1]),
            Err(LogError::Truncated(227))
        ));

        let mut corrupt = good.clone();
        corrupt[HEADER_SIZE + 20] ^= 1;
        assert!(matches!(
            SessionLog::from_bytes(&corrupt),
            Err(LogError::Record { index: 0, source: RecordError::CorruptRecord(_) })
        ));

        assert!(matches!(SessionLog::from_bytes(&good[..10]), Err(LogError::BadHeader(_))));
    }

    #[test]
    fn long_scenario_name_rejected() {
        let log = SessionLog::new(&"n".repeat(33), 10);
        assert!(matches!(log.to_bytes(), Err(LogError::BadHeader(_))));
    }
}
