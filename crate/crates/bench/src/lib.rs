//! Workload builders shared by the benchmarks.

use dragoncast::coding::{encode_window, CodedPacket, DecoderState, SourcePacket};
use dragoncast::Field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn source_packets(generation: usize, payload_size: usize, seed: u64) -> Vec<SourcePacket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=generation)
        .map(|index| {
            let mut payload = vec![0u8; payload_size];
            rng.fill(&mut payload[..]);
            SourcePacket { index, payload }
        })
        .collect()
}

/// Coded packets over sliding windows of width `window`, advancing by one
/// packet per draw, enough to give a receiver full rank with some slack.
pub fn windowed_stream(field: Field, packets: &[SourcePacket], window: usize, seed: u64) -> Vec<CodedPacket> {
    let generation = packets.len();
    let payload_size = packets.first().map_or(0, |p| p.payload.len());
    let mut holder = DecoderState::new(field, generation, payload_size);
    for p in packets {
        holder.ingest(&CodedPacket::systematic(field, generation, p).expect("valid packet")).expect("same session");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(generation * 5 / 4);
    for i in 0..generation * 5 / 4 {
        let hi = (i + 1).min(generation);
        let lo = hi.saturating_sub(window - 1).max(1);
        if let Ok(p) = encode_window(&holder, lo, hi, &mut rng) {
            out.push(p);
        }
    }
    out
}
