//! Packet-level FIFO simulation of a feedforward network, used to check
//! that computed bounds are never exceeded.
//!
//! A server transmits packets non-preemptively in arrival order at its rate
//! `R` and then holds each packet for `T − L/R`, so it offers the service
//! curve `β_{R,T}` as long as the packet size `L` is at most `R·T`. Sources
//! are greedy: with packet size `L ≤ b`, packet `k` of a flow leaves its
//! source at `offset + max(0, ((k+1)·L − b)/r)`, the earliest time its
//! token bucket allows. Packets arriving at the same instant are ordered
//! with the flow of interest last.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netmodel::ServerGraph;
use crate::to_f64;

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Sources stop releasing packets after this time.
    pub horizon: f64,
    /// Packet size; the largest admissible size when `None`.
    pub packet_size: Option<f64>,
    /// Number of runs. The first has all sources start at 0, later ones
    /// draw start offsets from `[0, max_offset]`.
    pub runs: usize,
    pub max_offset: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 20.0,
            packet_size: None,
            runs: 4,
            max_offset: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid network")]
    Invalid,
    #[error("packet size {0} exceeds a burst or R·T; the simulated curves would not conform")]
    PacketTooLarge(f64),
    #[error("no admissible packet size (a burst or latency is zero)")]
    NoPacketSize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    /// Largest end-to-end delay seen per flow.
    pub max_delay: Vec<f64>,
    pub packets: usize,
}

/// Largest packet size for which sources and servers conform to their
/// curves.
pub fn admissible_packet_size(net: &ServerGraph) -> Option<f64> {
    let bursts = net.flows.iter().map(|f| to_f64(&f.burst));
    let servers = net.servers.iter().map(|s| to_f64(&s.rate) * to_f64(&s.latency));
    let l = bursts.chain(servers).fold(f64::INFINITY, f64::min);
    (l > 0.0 && l.is_finite()).then_some(l)
}

#[derive(Clone, Copy)]
struct Packet {
    flow: usize,
    release: f64,
    /// Arrival at the current hop.
    at: f64,
    hop: usize,
}

fn run(net: &ServerGraph, order: &[usize], offsets: &[f64], size: f64, horizon: f64) -> (Vec<f64>, usize) {
    let mut queues: Vec<Vec<Packet>> = vec![Vec::new(); net.servers.len()];
    let mut count = 0;
    for (f, flow) in net.flows.iter().enumerate() {
        let (r, b) = (to_f64(&flow.rate), to_f64(&flow.burst));
        for k in 0.. {
            let t = offsets[f] + (((k + 1) as f64 * size - b) / r).max(0.0);
            if t > horizon || r <= 0.0 && k > 0 {
                break;
            }
            queues[flow.path[0]].push(Packet {
                flow: f,
                release: t,
                at: t,
                hop: 0,
            });
            count += 1;
        }
    }
    let foi = net.foi;
    let mut max_delay = vec![0.0f64; net.flows.len()];
    for &s in order {
        let mut q = std::mem::take(&mut queues[s]);
        q.sort_by(|a, b| {
            a.at.total_cmp(&b.at)
                .then_with(|| (Some(a.flow) == foi).cmp(&(Some(b.flow) == foi)))
                .then_with(|| a.flow.cmp(&b.flow))
                .then_with(|| a.release.total_cmp(&b.release))
        });
        let rate = to_f64(&net.servers[s].rate);
        let tx = size / rate;
        let hold = to_f64(&net.servers[s].latency) - tx;
        let mut free = f64::NEG_INFINITY;
        for p in q {
            let finish = p.at.max(free) + tx;
            free = finish;
            let out = finish + hold;
            let path = &net.flows[p.flow].path;
            if p.hop + 1 < path.len() {
                queues[path[p.hop + 1]].push(Packet {
                    at: out,
                    hop: p.hop + 1,
                    ..p
                });
            } else {
                let d = out - p.release;
                if d > max_delay[p.flow] {
                    max_delay[p.flow] = d;
                }
            }
        }
    }
    (max_delay, count)
}

/// Simulates `net` and reports the worst delay per flow over all runs.
pub fn simulate(net: &ServerGraph, cfg: &SimConfig) -> Result<SimReport, SimError> {
    net.validate().map_err(|_| SimError::Invalid)?;
    let order = net.topological_order().ok_or(SimError::Invalid)?;
    let limit = admissible_packet_size(net).ok_or(SimError::NoPacketSize)?;
    let size = cfg.packet_size.unwrap_or(limit);
    if size > limit * (1.0 + 1e-12) || size <= 0.0 {
        return Err(SimError::PacketTooLarge(size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = vec![0.0f64; net.flows.len()];
    let mut packets = 0;
    for i in 0..cfg.runs.max(1) {
        let offsets: Vec<f64> = (0..net.flows.len())
            .map(|_| if i == 0 { 0.0 } else { rng.gen_range(0.0..=cfg.max_offset) })
            .collect();
        let (d, n) = run(net, &order, &offsets, size, cfg.horizon);
        packets += n;
        for (w, x) in worst.iter_mut().zip(d) {
            *w = w.max(x);
        }
    }
    Ok(SimReport {
        max_delay: worst,
        packets,
    })
}
