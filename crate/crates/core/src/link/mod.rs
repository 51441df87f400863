//! Record framing over a 32-byte packet radio and base-station reassembly.

pub mod channel;
pub mod packet;
pub mod reassembly;

use std::sync::mpsc;
use std::thread;

use thiserror::Error;

use crate::record::{serialize_record, RecordError, TelemetryRecord, RECORD_SIZE};

pub use channel::{transmit, ChannelConfig, ChannelStats, DataRate, LossyChannel};
pub use packet::{chunk_record, Packet, CHUNKS_PER_RECORD, PACKET_SIZE, PAYLOAD_SIZE};
pub use reassembly::{reassemble, ReassemblyEvent, ReassemblyStats, Reassembler};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("expected a {expected}-byte record, got {actual} bytes")]
    BadLength { expected: usize, actual: usize },
    #[error("invalid channel configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Result of sending a batch of records across a simulated link.
#[derive(Debug, Clone)]
pub struct LinkReport {
    pub delivered: Vec<TelemetryRecord>,
    pub delivered_bytes: Vec<[u8; RECORD_SIZE]>,
    pub lost_seq8: Vec<u8>,
    pub stats: ReassemblyStats,
    pub channel: ChannelStats,
}

fn collect(events: Vec<ReassemblyEvent>, report: &mut LinkReport) {
    for e in events {
        match e {
            ReassemblyEvent::Delivered { record, bytes, .. } => {
                report.delivered.push(record);
                report.delivered_bytes.push(*bytes);
            }
            ReassemblyEvent::Lost { seq8 } | ReassemblyEvent::Corrupt { seq8 } => {
                report.lost_seq8.push(seq8)
            }
        }
    }
}

fn empty_report() -> LinkReport {
    LinkReport {
        delivered: Vec::new(),
        delivered_bytes: Vec::new(),
        lost_seq8: Vec::new(),
        stats: ReassemblyStats::default(),
        channel: ChannelStats::default(),
    }
}

fn finish_stats(mut stats: ReassemblyStats, sent: u64, channel: &ChannelStats) -> ReassemblyStats {
    stats.records_sent = sent;
    stats.packets_dropped = channel.dropped;
    stats
}

/// Chunks, transmits and reassembles `records` on the calling thread.
pub fn transmit_records(records: &[TelemetryRecord], cfg: &ChannelConfig) -> Result<LinkReport, LinkError> {
    let mut ch = LossyChannel::new(cfg.clone())?;
    let mut rx = match records.first() {
        Some(r) => Reassembler::default().expecting(r.seq as u8),
        None => Reassembler::default(),
    };
    let mut report = empty_report();
    let mut wire = Vec::with_capacity(16);
    let mut events = Vec::new();

    for rec in records {
        let bytes = serialize_record(rec)?;
        for p in chunk_record(&bytes, rec.seq)? {
            ch.push(p, &mut wire);
        }
        for p in wire.drain(..) {
            rx.push_into(p, &mut events);
        }
    }
    ch.finish(&mut wire);
    for p in wire.drain(..) {
        rx.push_into(p, &mut events);
    }
    rx.flush_into(&mut events);

    collect(events, &mut report);
    report.channel = ch.stats();
    report.stats = finish_stats(rx.stats(), records.len() as u64, &report.channel);
    Ok(report)
}

/// Same pipeline as [`transmit_records`], with the chunker, the channel and
/// the reassembler each on its own thread joined by ordered channels.
pub fn transmit_records_pipelined(
    records: Vec<TelemetryRecord>,
    cfg: &ChannelConfig,
) -> Result<LinkReport, LinkError> {
    let mut ch = LossyChannel::new(cfg.clone())?;
    let first = records.first().map(|r| r.seq as u8);
    let sent = records.len() as u64;
    let (to_channel, channel_in) = mpsc::sync_channel::<[Packet; CHUNKS_PER_RECORD]>(64);
    let (to_rx, rx_in) = mpsc::sync_channel::<Vec<Packet>>(64);

    let producer = thread::spawn(move || -> Result<(), LinkError> {
        for rec in &records {
            let bytes = serialize_record(rec)?;
            if to_channel.send(chunk_record(&bytes, rec.seq)?).is_err() {
                break;
            }
        }
        Ok(())
    });

    let channel = thread::spawn(move || {
        for batch in channel_in {
            let mut out = Vec::with_capacity(16);
            for p in batch {
                ch.push(p, &mut out);
            }
            if to_rx.send(out).is_err() {
                return ch.stats();
            }
        }
        let mut out = Vec::new();
        ch.finish(&mut out);
        let _ = to_rx.send(out);
        ch.stats()
    });

    let consumer = thread::spawn(move || {
        let mut rx = match first {
            Some(s) => Reassembler::default().expecting(s),
            None => Reassembler::default(),
        };
        let mut events = Vec::new();
        for batch in rx_in {
            for p in batch {
                rx.push_into(p, &mut events);
            }
        }
        rx.flush_into(&mut events);
        (events, rx.stats())
    });

    producer.join().expect("producer thread panicked")?;
    let channel_stats = channel.join().expect("channel thread panicked");
    let (events, stats) = consumer.join().expect("consumer thread panicked");

    let mut report = empty_report();
    collect(events, &mut report);
    report.channel = channel_stats;
    report.stats = finish_stats(stats, sent, &channel_stats);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::{arb_record, sample_record};
    use proptest::prelude::*;

    fn records(n: u32) -> Vec<TelemetryRecord> {
        (0..n).map(sample_record).collect()
    }

    #[test]
    fn lossless_pipeline_is_identity() {
        let recs = records(300);
        let report = transmit_records(&recs, &ChannelConfig::lossless()).unwrap();
        assert_eq!(report.delivered, recs);
        assert_eq!(report.stats.records_lost, 0);
        assert_eq!(report.stats.records_sent, 300);
    }

    #[test]
    fn pipelined_matches_sequential() {
        let recs = records(500);
        let cfg = ChannelConfig {
            drop_prob: 0.03,
            duplicate_prob: 0.02,
            reorder_window: 5,
            corrupt_prob: 0.01,
            seed: 77,
            ..Default::default()
        };
        let a = transmit_records(&recs, &cfg).unwrap();
        let b = transmit_records_pipelined(recs, &cfg).unwrap();
        assert_eq!(a.delivered, b.delivered);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn hostile_channel_conserves() {
        let recs = records(2000);
        let cfg = ChannelConfig {
            drop_prob: 0.02,
            duplicate_prob: 0.05,
            reorder_window: 6,
            corrupt_prob: 0.02,
            seed: 5,
            ..Default::default()
        };
        let r = transmit_records(&recs, &cfg).unwrap();
        let s = r.stats;
        assert_eq!(s.records_delivered + s.records_lost, s.records_sent);
        assert!(s.records_corrupt > 0);
        for (rec, bytes) in r.delivered.iter().zip(&r.delivered_bytes) {
            assert_eq!(rec, &recs[rec.seq as usize]);
            assert_eq!(bytes, &serialize_record(&recs[rec.seq as usize]).unwrap());
        }
    }

    proptest! {
        #[test]
        fn any_permutation_reassembles(rec in arb_record(), perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
            let bytes = serialize_record(&rec).unwrap();
            let pkts = chunk_record(&bytes, rec.seq).unwrap();
            let (events, _) = reassemble(perm.iter().map(|&i| pkts[i]));
            prop_assert_eq!(events.len(), 1);
            match &events[0] {
                ReassemblyEvent::Delivered { bytes: got, .. } => prop_assert_eq!(&**got, &bytes),
                e => prop_assert!(false, "unexpected {:?}", e),
            }
        }

        #[test]
        fn conservation_under_loss(seed in any::<u64>(), drop in 0.0..0.3f64, w in 0usize..4) {
            let recs = records(200);
            let cfg = ChannelConfig { drop_prob: drop, reorder_window: w, seed, ..Default::default() };
            let s = transmit_records(&recs, &cfg).unwrap().stats;
            prop_assert_eq!(s.records_delivered + s.records_lost, s.records_sent);
        }
    }
}
