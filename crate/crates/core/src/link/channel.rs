//! Seeded lossy radio channel: independent drop, duplicate and bit-flip
//! corruption per packet, plus bounded reordering.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::packet::{Packet, PACKET_SIZE};
use super::LinkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum DataRate {
    Kbps250,
    #[default]
    Mbps1,
    Mbps2,
}

impl DataRate {
    pub fn bps(self) -> u32 {
        match self {
            DataRate::Kbps250 => 250_000,
            DataRate::Mbps1 => 1_000_000,
            DataRate::Mbps2 => 2_000_000,
        }
    }

    /// Time on air for one 32-byte packet.
    pub fn packet_airtime_s(self) -> f64 {
        (PACKET_SIZE * 8) as f64 / self.bps() as f64
    }
}

impl TryFrom<u32> for DataRate {
    type Error = LinkError;

    fn try_from(bps: u32) -> Result<Self, LinkError> {
        match bps {
            250_000 => Ok(DataRate::Kbps250),
            1_000_000 => Ok(DataRate::Mbps1),
            2_000_000 => Ok(DataRate::Mbps2),
            other => Err(LinkError::BadConfig(format!("unsupported data rate {other} bps"))),
        }
    }
}

impl From<DataRate> for u32 {
    fn from(r: DataRate) -> u32 {
        r.bps()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub drop_prob: f64,
    pub duplicate_prob: f64,
    pub reorder_window: usize,
    pub corrupt_prob: f64,
    #[serde(rename = "data_rate_bps")]
    pub data_rate: DataRate,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            drop_prob: 0.0,
            duplicate_prob: 0.0,
            reorder_window: 0,
            corrupt_prob: 0.0,
            data_rate: DataRate::default(),
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        for (name, p) in [
            ("drop_prob", self.drop_prob),
            ("duplicate_prob", self.duplicate_prob),
            ("corrupt_prob", self.corrupt_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(LinkError::BadConfig(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ChannelStats {
    pub packets_in: u64,
    pub packets_out: u64,
    pub dropped: u64,
    pub duplicated: u64,
    pub corrupted: u64,
    pub airtime_s: f64,
}

#[derive(Debug)]
pub struct LossyChannel {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    pending: BinaryHeap<Reverse<(u64, u64, [u8; PACKET_SIZE])>>,
    index: u64,
    order: u64,
    stats: ChannelStats,
}

impl LossyChannel {
    pub fn new(cfg: ChannelConfig) -> Result<Self, LinkError> {
        cfg.validate()?;
        Ok(LossyChannel {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            pending: BinaryHeap::new(),
            index: 0,
            order: 0,
            stats: ChannelStats::default(),
        })
    }

    pub fn stats(&self) -> ChannelStats {
        self.stats
    }

    pub fn push(&mut self, pkt: Packet, out: &mut Vec<Packet>) {
        let i = self.index;
        self.index += 1;
        self.stats.packets_in += 1;
        self.stats.airtime_s += self.cfg.data_rate.packet_airtime_s();

        if self.rng.random::<f64>() < self.cfg.drop_prob {
            self.stats.dropped += 1;
        } else {
            let copies = if self.rng.random::<f64>() < self.cfg.duplicate_prob {
                self.stats.duplicated += 1;
                2
            } else {
                1
            };
            for _ in 0..copies {
                let mut wire = pkt.to_bytes();
                if self.rng.random::<f64>() < self.cfg.corrupt_prob {
                    let bit = self.rng.random_range(0..PACKET_SIZE * 8);
                    wire[bit / 8] ^= 1 << (bit % 8);
                    self.stats.corrupted += 1;
                }
                let delay = if self.cfg.reorder_window > 0 {
                    self.rng.random_range(0..=self.cfg.reorder_window as u64)
                } else {
                    0
                };
                self.pending.push(Reverse((i + delay, self.order, wire)));
                self.order += 1;
            }
        }
        self.release(Some(i), out);
    }

    /// Drains everything still held back for reordering.
    pub fn finish(&mut self, out: &mut Vec<Packet>) {
        self.release(None, out);
    }

    fn release(&mut self, upto: Option<u64>, out: &mut Vec<Packet>) {
        while let Some(Reverse((at, _, _))) = self.pending.peek() {
            if upto.is_some_and(|u| *at > u) {
                break;
            }
            let Reverse((_, _, wire)) = self.pending.pop().expect("peeked");
            self.stats.packets_out += 1;
            out.push(Packet::from_bytes(&wire));
        }
    }
}

/// Passes a whole packet stream through a fresh channel.
pub fn transmit(
    packets: impl IntoIterator<Item = Packet>,
    cfg: &ChannelConfig,
) -> Result<(Vec<Packet>, ChannelStats), LinkError> {
    let mut ch = LossyChannel::new(cfg.clone())?;
    let mut out = Vec::new();
    for p in packets {
        ch.push(p, &mut out);
    }
    ch.finish(&mut out);
    Ok((out, ch.stats()))
}
