//! 32-byte radio packets: a 30-byte payload followed by a two-byte trailer
//! `(chunk_index, record_seq mod 256)`.

use crate::record::RECORD_SIZE;

use super::LinkError;

pub const PACKET_SIZE: usize = 32;
pub const PAYLOAD_SIZE: usize = 30;
/// Packets needed for one record: ceil(228 / 30).
pub const CHUNKS_PER_RECORD: usize = RECORD_SIZE.div_ceil(PAYLOAD_SIZE);
/// Bytes carried by the final chunk before its zero padding.
pub const LAST_CHUNK_LEN: usize = RECORD_SIZE - (CHUNKS_PER_RECORD - 1) * PAYLOAD_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub payload: [u8; PAYLOAD_SIZE],
    pub chunk_index: u8,
    pub record_seq8: u8,
}

impl Packet {
    pub fn to_bytes(&self) -> [u8; PACKET_SIZE] {
        let mut out = [0u8; PACKET_SIZE];
        out[..PAYLOAD_SIZE].copy_from_slice(&self.payload);
        out[PAYLOAD_SIZE] = self.chunk_index;
        out[PAYLOAD_SIZE + 1] = self.record_seq8;
        out
    }

    /// Decodes any 32-byte frame. The trailer is not range-checked here; the
    /// reassembler discards out-of-range chunk indices.
    pub fn from_bytes(buf: &[u8; PACKET_SIZE]) -> Self {
        let mut payload = [0u8; PAYLOAD_SIZE];
        payload.copy_from_slice(&buf[..PAYLOAD_SIZE]);
        Packet {
            payload,
            chunk_index: buf[PAYLOAD_SIZE],
            record_seq8: buf[PAYLOAD_SIZE + 1],
        }
    }

    pub fn has_valid_index(&self) -> bool {
        (self.chunk_index as usize) < CHUNKS_PER_RECORD
    }
}

/// Splits one serialized record into its eight packets.
pub fn chunk_record(buf: &[u8], seq: u32) -> Result<[Packet; CHUNKS_PER_RECORD], LinkError> {
    if buf.len() != RECORD_SIZE {
        return Err(LinkError::BadLength { expected: RECORD_SIZE, actual: buf.len() });
    }
    let seq8 = (seq % 256) as u8;
    let mut out = [Packet { payload: [0; PAYLOAD_SIZE], chunk_index: 0, record_seq8: seq8 }; CHUNKS_PER_RECORD];
    for (i, (pkt, chunk)) in out.iter_mut().zip(buf.chunks(PAYLOAD_SIZE)).enumerate() {
        pkt.payload[..chunk.len()].copy_from_slice(chunk);
        pkt.chunk_index = i as u8;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent splitter: walk the record byte by byte.
    fn brute_force_split(buf: &[u8]) -> Vec<[u8; PAYLOAD_SIZE]> {
        let mut chunks = Vec::new();
        let mut cur = [0u8; PAYLOAD_SIZE];
        let mut fill = 0;
        for &b in buf {
            cur[fill] = b;
            fill += 1;
            if fill == PAYLOAD_SIZE {
                chunks.push(cur);
                cur = [0u8; PAYLOAD_SIZE];
                fill = 0;
            }
        }
        if fill > 0 {
            chunks.push(cur);
        }
        chunks
    }

    fn ramp() -> Vec<u8> {
        (0..RECORD_SIZE).map(|k| (k % 256) as u8).collect()
    }

    #[test]
    fn sizes() {
        assert_eq!(CHUNKS_PER_RECORD, 8);
        assert_eq!(LAST_CHUNK_LEN, 18);
        let pkts = chunk_record(&ramp(), 5).unwrap();
        assert_eq!(pkts.len(), 8);
        for p in &pkts {
            assert_eq!(p.to_bytes().len(), 32);
        }
    }

    #[test]
    fn matches_brute_force_splitter() {
        let buf = ramp();
        let pkts = chunk_record(&buf, 300).unwrap();
        let oracle = brute_force_split(&buf);
        assert_eq!(oracle.len(), pkts.len());
        for (i, (p, o)) in pkts.iter().zip(&oracle).enumerate() {
            assert_eq!(&p.payload, o);
            assert_eq!(p.chunk_index as usize, i);
            assert_eq!(p.record_seq8, 44);
        }
        assert_eq!(&pkts[3].payload[..], &buf[90..120]);
    }

    #[test]
    fn tail_is_zero_padded() {
        let buf = vec![0xAB; RECORD_SIZE];
        let pkts = chunk_record(&buf, 0).unwrap();
        assert_eq!(&pkts[7].payload[..18], &buf[210..228]);
        assert!(pkts[7].payload[18..].iter().all(|&b| b == 0));
    }

    #[test]
    fn wire_format() {
        let pkts = chunk_record(&ramp(), 0x1_02).unwrap();
        let wire = pkts[6].to_bytes();
        assert_eq!(&wire[..30], &ramp()[180..210]);
        assert_eq!(wire[30], 6);
        assert_eq!(wire[31], 2);
        assert_eq!(Packet::from_bytes(&wire), pkts[6]);
    }

    #[test]
    fn wrong_length() {
        assert!(matches!(
            chunk_record(&[0u8; 227], 0),
            Err(LinkError::BadLength { expected: 228, actual: 227 })
        ));
    }
}
