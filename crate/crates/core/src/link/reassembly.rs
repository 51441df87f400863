//! Base-station reassembly of 8-packet records.
//!
//! The reassembler keeps a sliding window over the most recent `W` record
//! sequence numbers (mod 256). Packets land in their record's slot by chunk
//! index, so arrival order inside the window does not matter. When the window
//! slides forward, any record leaving it without having completed is reported
//! lost, which covers both partially received records and records whose
//! packets never showed up at all.
//!
//! A forward jump larger than `max_jump` records is only accepted once a
//! second packet confirms it. This keeps a single packet with a damaged
//! sequence byte from flushing the whole window.

use std::collections::VecDeque;

use serde::Serialize;

use crate::record::{deserialize_record, TelemetryRecord, RECORD_SIZE};

use super::packet::{Packet, CHUNKS_PER_RECORD, PAYLOAD_SIZE};

pub const DEFAULT_WINDOW: usize = 4;
pub const DEFAULT_MAX_JUMP: u8 = 16;
const FORWARD_LIMIT: u8 = 128;
const FULL_MASK: u8 = 0xFF;

/// Counters shared by the sender, channel and receiver sides of a link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReassemblyStats {
    pub records_sent: u64,
    pub records_delivered: u64,
    /// Records that will never be delivered, including those rejected by the
    /// CRC check.
    pub records_lost: u64,
    /// Subset of `records_lost` that completed but failed the CRC check.
    pub records_corrupt: u64,
    pub packets_dropped: u64,
    /// Packets discarded for an out-of-range trailer or an unconfirmed jump.
    pub packets_corrupt_rejected: u64,
    pub duplicates_ignored: u64,
    /// Packets for records that already left the window.
    pub late_ignored: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReassemblyEvent {
    Delivered {
        seq8: u8,
        record: TelemetryRecord,
        bytes: Box<[u8; RECORD_SIZE]>,
    },
    Lost {
        seq8: u8,
    },
    Corrupt {
        seq8: u8,
    },
}

#[derive(Debug)]
enum Slot {
    Unseen,
    Partial { mask: u8, buf: Box<[u8; CHUNKS_PER_RECORD * PAYLOAD_SIZE]> },
    Done,
}

#[derive(Debug)]
pub struct Reassembler {
    window: usize,
    max_jump: u8,
    newest: Option<u8>,
    // slots[len - 1] holds `newest`, slots[len - 1 - k] holds `newest - k`
    slots: VecDeque<Slot>,
    far_candidate: Option<Packet>,
    stats: ReassemblyStats,
}

impl Default for Reassembler {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl Reassembler {
    pub fn new(window: usize) -> Self {
        assert!((1..=FORWARD_LIMIT as usize).contains(&window), "window must be in 1..=128");
        Reassembler {
            window,
            max_jump: DEFAULT_MAX_JUMP.max(window as u8),
            newest: None,
            slots: VecDeque::with_capacity(window + 1),
            far_candidate: None,
            stats: ReassemblyStats::default(),
        }
    }

    /// Tells the receiver which record sequence comes first, so that records
    /// lost before the first received packet are still accounted for.
    pub fn expecting(mut self, first_seq8: u8) -> Self {
        self.newest = Some(first_seq8.wrapping_sub(1));
        self
    }

    pub fn with_max_jump(mut self, max_jump: u8) -> Self {
        self.max_jump = max_jump.clamp(1, FORWARD_LIMIT);
        self
    }

    pub fn stats(&self) -> ReassemblyStats {
        self.stats
    }

    /// Records inside the window that are neither delivered nor written off.
    pub fn open_records(&self) -> usize {
        self.slots.iter().filter(|s| !matches!(s, Slot::Done)).count()
    }

    pub fn push(&mut self, pkt: Packet) -> Vec<ReassemblyEvent> {
        let mut out = Vec::new();
        self.push_into(pkt, &mut out);
        out
    }

    pub fn push_into(&mut self, pkt: Packet, out: &mut Vec<ReassemblyEvent>) {
        if !pkt.has_valid_index() {
            self.stats.packets_corrupt_rejected += 1;
            return;
        }
        let Some(newest) = self.newest else {
            self.newest = Some(pkt.record_seq8);
            self.slots.push_back(Slot::Unseen);
            self.insert(0, &pkt, out);
            return;
        };

        let forward = pkt.record_seq8.wrapping_sub(newest);
        if forward == 0 || forward > FORWARD_LIMIT {
            self.reject_candidate();
            let back = newest.wrapping_sub(pkt.record_seq8) as usize;
            if back < self.slots.len() {
                let idx = self.slots.len() - 1 - back;
                self.insert(idx, &pkt, out);
            } else {
                self.stats.late_ignored += 1;
            }
            return;
        }

        if forward > self.max_jump {
            match self.far_candidate.take() {
                Some(cand) if pkt.record_seq8.wrapping_sub(cand.record_seq8) <= self.window as u8
                    || cand.record_seq8.wrapping_sub(pkt.record_seq8) <= self.window as u8 =>
                {
                    // confirmed: slide to the later of the two, then place both
                    let a = cand.record_seq8.wrapping_sub(newest);
                    self.advance(a.max(forward), out);
                    for p in [cand, pkt] {
                        self.place_in_window(&p, out);
                    }
                }
                Some(_) => {
                    self.stats.packets_corrupt_rejected += 1;
                    self.far_candidate = Some(pkt);
                }
                None => self.far_candidate = Some(pkt),
            }
            return;
        }

        self.reject_candidate();
        self.advance(forward, out);
        let last = self.slots.len() - 1;
        self.insert(last, &pkt, out);
    }

    /// Writes off every record still open and empties the window.
    pub fn flush(&mut self) -> Vec<ReassemblyEvent> {
        let mut out = Vec::new();
        self.flush_into(&mut out);
        out
    }

    pub fn flush_into(&mut self, out: &mut Vec<ReassemblyEvent>) {
        self.reject_candidate();
        let Some(newest) = self.newest else { return };
        let n = self.slots.len();
        for (i, slot) in self.slots.drain(..).enumerate() {
            let seq8 = newest.wrapping_sub((n - 1 - i) as u8);
            if !matches!(slot, Slot::Done) {
                self.stats.records_lost += 1;
                out.push(ReassemblyEvent::Lost { seq8 });
            }
        }
    }

    fn reject_candidate(&mut self) {
        if self.far_candidate.take().is_some() {
            self.stats.packets_corrupt_rejected += 1;
        }
    }

    fn place_in_window(&mut self, pkt: &Packet, out: &mut Vec<ReassemblyEvent>) {
        let newest = self.newest.expect("window initialised");
        let back = newest.wrapping_sub(pkt.record_seq8) as usize;
        if back < self.slots.len() {
            let idx = self.slots.len() - 1 - back;
            self.insert(idx, pkt, out);
        } else {
            self.stats.late_ignored += 1;
        }
    }

    fn advance(&mut self, by: u8, out: &mut Vec<ReassemblyEvent>) {
        let mut newest = self.newest.expect("window initialised");
        for _ in 0..by {
            newest = newest.wrapping_add(1);
            self.slots.push_back(Slot::Unseen);
            if self.slots.len() > self.window {
                let evicted = self.slots.pop_front().expect("non-empty");
                if !matches!(evicted, Slot::Done) {
                    let seq8 = newest.wrapping_sub(self.window as u8);
                    self.stats.records_lost += 1;
                    out.push(ReassemblyEvent::Lost { seq8 });
                }
            }
        }
        self.newest = Some(newest);
    }

    fn insert(&mut self, idx: usize, pkt: &Packet, out: &mut Vec<ReassemblyEvent>) {
        let bit = 1u8 << pkt.chunk_index;
        let slot = &mut self.slots[idx];
        match slot {
            Slot::Done => {
                self.stats.duplicates_ignored += 1;
                return;
            }
            Slot::Unseen => {
                *slot = Slot::Partial {
                    mask: 0,
                    buf: Box::new([0u8; CHUNKS_PER_RECORD * PAYLOAD_SIZE]),
                };
            }
            Slot::Partial { mask, .. } if *mask & bit != 0 => {
                self.stats.duplicates_ignored += 1;
                return;
            }
            Slot::Partial { .. } => {}
        }
        let Slot::Partial { mask, buf } = slot else { unreachable!() };
        let off = pkt.chunk_index as usize * PAYLOAD_SIZE;
        buf[off..off + PAYLOAD_SIZE].copy_from_slice(&pkt.payload);
        *mask |= bit;
        if *mask != FULL_MASK {
            return;
        }

        let tail_clean = buf[RECORD_SIZE..].iter().all(|&b| b == 0);
        let mut bytes = Box::new([0u8; RECORD_SIZE]);
        bytes.copy_from_slice(&buf[..RECORD_SIZE]);
        *slot = Slot::Done;

        let seq8 = pkt.record_seq8;
        match deserialize_record(&bytes[..]) {
            Ok(record) if tail_clean => {
                self.stats.records_delivered += 1;
                out.push(ReassemblyEvent::Delivered { seq8, record, bytes });
            }
            _ => {
                self.stats.records_corrupt += 1;
                self.stats.records_lost += 1;
                out.push(ReassemblyEvent::Corrupt { seq8 });
            }
        }
    }
}

/// Reassembles a finished packet stream, flushing at the end.
pub fn reassemble(packets: impl IntoIterator<Item = Packet>) -> (Vec<ReassemblyEvent>, ReassemblyStats) {
    let mut r = Reassembler::default();
    let mut out = Vec::new();
    for p in packets {
        r.push_into(p, &mut out);
    }
    r.flush_into(&mut out);
    (out, r.stats())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::packet::chunk_record;
    use crate::record::{serialize_record, tests::sample_record};

    fn packets(seq: u32) -> [Packet; 8] {
        chunk_record(&serialize_record(&sample_record(seq)).unwrap(), seq).unwrap()
    }

    fn delivered_seqs(events: &[ReassemblyEvent]) -> Vec<u32> {
        events
            .iter()
            .filter_map(|e| match e {
                ReassemblyEvent::Delivered { record, .. } => Some(record.seq),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn in_order_roundtrip() {
        let bytes = serialize_record(&sample_record(11)).unwrap();
        let (events, stats) = reassemble(packets(11));
        assert_eq!(events.len(), 1);
        match &events[0] {
            ReassemblyEvent::Delivered { bytes: got, .. } => assert_eq!(**got, bytes),
            e => panic!("{e:?}"),
        }
        assert_eq!(stats.records_delivered, 1);
    }

    #[test]
    fn reverse_order_roundtrip() {
        let mut p = packets(12).to_vec();
        p.reverse();
        let (events, _) = reassemble(p);
        assert_eq!(delivered_seqs(&events), vec![12]);
    }

    #[test]
    fn missing_chunk_is_reported_when_window_slides() {
        let mut r = Reassembler::default();
        let mut events = Vec::new();
        for p in packets(5).iter().filter(|p| p.chunk_index != 3) {
            r.push_into(*p, &mut events);
        }
        for seq in 6..=9 {
            for p in packets(seq) {
                r.push_into(p, &mut events);
            }
        }
        assert!(events.contains(&ReassemblyEvent::Lost { seq8: 5 }));
        assert_eq!(delivered_seqs(&events), vec![6, 7, 8, 9]);
        assert!(r.flush().is_empty());
        assert_eq!(r.stats().records_lost, 1);
    }

    #[test]
    fn wholly_missing_record_counts_as_lost() {
        let mut stream: Vec<Packet> = Vec::new();
        for seq in [0, 1, 3, 4, 5, 6, 7] {
            stream.extend(packets(seq));
        }
        let (events, stats) = reassemble(stream);
        assert!(events.contains(&ReassemblyEvent::Lost { seq8: 2 }));
        assert_eq!(stats.records_delivered, 7);
        assert_eq!(stats.records_lost, 1);
    }

    #[test]
    fn duplicates_are_ignored() {
        let mut stream: Vec<Packet> = packets(3).to_vec();
        stream.extend(packets(3));
        stream.insert(2, stream[1]);
        let (events, stats) = reassemble(stream);
        assert_eq!(delivered_seqs(&events), vec![3]);
        assert_eq!(stats.duplicates_ignored, 9);
    }

    #[test]
    fn malformed_trailer_discarded() {
        let mut p = packets(0);
        p[4].chunk_index = 9;
        let (events, stats) = reassemble(p);
        assert_eq!(stats.packets_corrupt_rejected, 1);
        assert_eq!(events, vec![ReassemblyEvent::Lost { seq8: 0 }]);
    }

    #[test]
    fn corrupt_payload_never_delivered() {
        let mut p = packets(0);
        p[2].payload[7] ^= 0x10;
        let (events, stats) = reassemble(p);
        assert_eq!(events, vec![ReassemblyEvent::Corrupt { seq8: 0 }]);
        assert_eq!(stats.records_corrupt, 1);
        assert_eq!(stats.records_lost, 1);
    }

    #[test]
    fn sequence_wraps() {
        let mut stream = Vec::new();
        for seq in 250..262 {
            stream.extend(packets(seq));
        }
        let (events, stats) = reassemble(stream);
        assert_eq!(delivered_seqs(&events), (250..262).collect::<Vec<_>>());
        assert_eq!(stats.records_lost, 0);
    }

    #[test]
    fn single_damaged_sequence_byte_does_not_flush_window() {
        let mut stream: Vec<Packet> = Vec::new();
        for seq in 0..6 {
            let mut p = packets(seq);
            if seq == 2 {
                p[5].record_seq8 = 90;
            }
            stream.extend(p);
        }
        let (events, stats) = reassemble(stream);
        assert_eq!(delivered_seqs(&events), vec![0, 1, 3, 4, 5]);
        assert_eq!(stats.records_lost, 1);
        assert_eq!(stats.packets_corrupt_rejected, 1);
    }

    #[test]
    fn long_outage_resynchronises() {
        let mut stream: Vec<Packet> = Vec::new();
        for seq in (0..3).chain(40..45) {
            stream.extend(packets(seq));
        }
        let mut r = Reassembler::default().expecting(0);
        let mut events = Vec::new();
        for p in stream {
            r.push_into(p, &mut events);
        }
        r.flush_into(&mut events);
        assert_eq!(delivered_seqs(&events), vec![0, 1, 2, 40, 41, 42, 43, 44]);
        let s = r.stats();
        assert_eq!(s.records_lost, 37);
        assert_eq!(s.records_delivered + s.records_lost, 45);
    }

    #[test]
    fn expecting_counts_leading_losses() {
        let mut r = Reassembler::default().expecting(0);
        for seq in 2..8 {
            for p in packets(seq) {
                r.push(p);
            }
        }
        r.flush();
        assert_eq!(r.stats().records_lost, 2);
        assert_eq!(r.stats().records_delivered, 6);
    }
}
