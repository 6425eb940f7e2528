//! Coded packets, windowed random encoding and the highest-index-pivot
//! decoder.
//!
//! Source packets are numbered `1..=D`. Every decoder row is stored under its
//! pivot, the highest source index with a nonzero coefficient, and an
//! incoming vector is always reduced on its own highest index first. A stored
//! row therefore never acquires a higher index than the one it was filed
//! under, and whenever rows exist for every index `1..=j` the first `j`
//! source packets can be recovered without waiting for full rank.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::galois::Field;

/// Redraws allowed when a random combination comes out all-zero.
pub const ZERO_DRAW_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodingError {
    #[error("encoding vector is zero")]
    ZeroVector,
    #[error("source index {index} outside 1..={generation}")]
    IndexOutOfRange { index: usize, generation: usize },
    #[error("packet for {got_field} / D={got_generation} does not match session {field} / D={generation}")]
    SessionMismatch { field: Field, generation: usize, got_field: Field, got_generation: usize },
    #[error("payload length {got} does not match session payload size {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("coefficient {value} is not in {field}")]
    BadCoefficient { field: Field, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    /// No stored row fits the window, or every draw was the zero vector.
    #[error("nothing eligible to send in window")]
    NothingToSend,
    #[error("invalid window [{lo}, {hi}]")]
    InvalidWindow { lo: usize, hi: usize },
}

/// An original packet produced by the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePacket {
    pub index: usize,
    pub payload: Vec<u8>,
}

/// Lowest and highest source index with a nonzero coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketSupport {
    pub lowest: usize,
    pub highest: usize,
}

/// Global encoding vector over source packets `1..=generation`.
///
/// Stored densely: one bit per coefficient over GF(2), one byte over GF(256).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodingVector {
    field: Field,
    generation: usize,
    data: Vec<u8>,
}

impl EncodingVector {
    pub fn zero(field: Field, generation: usize) -> Self {
        let len = match field {
            Field::Gf2 => generation.div_ceil(8),
            Field::Gf256 => generation,
        };
        EncodingVector { field, generation, data: vec![0; len] }
    }

    pub fn unit(field: Field, generation: usize, index: usize) -> Result<Self, CodingError> {
        let mut v = Self::zero(field, generation);
        v.try_set(index, 1)?;
        Ok(v)
    }

    /// Builds a vector from `(source index, coefficient)` pairs.
    pub fn from_coefficients(
        field: Field,
        generation: usize,
        coefficients: impl IntoIterator<Item = (usize, u8)>,
    ) -> Result<Self, CodingError> {
        let mut v = Self::zero(field, generation);
        for (index, value) in coefficients {
            v.try_set(index, value)?;
        }
        Ok(v)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn get(&self, index: usize) -> u8 {
        debug_assert!(index >= 1 && index <= self.generation);
        let i = index - 1;
        match self.field {
            Field::Gf2 => self.data[i / 8] >> (i % 8) & 1,
            Field::Gf256 => self.data[i],
        }
    }

    pub fn try_set(&mut self, index: usize, value: u8) -> Result<(), CodingError> {
        if index == 0 || index > self.generation {
            return Err(CodingError::IndexOutOfRange { index, generation: self.generation });
        }
        if !self.field.contains(value) {
            return Err(CodingError::BadCoefficient { field: self.field, value });
        }
        self.set(index, value);
        Ok(())
    }

    fn set(&mut self, index: usize, value: u8) {
        let i = index - 1;
        match self.field {
            Field::Gf2 => {
                let mask = 1 << (i % 8);
                if value == 0 {
                    self.data[i / 8] &= !mask;
                } else {
                    self.data[i / 8] |= mask;
                }
            }
            Field::Gf256 => self.data[i] = value,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    pub fn highest(&self) -> Option<usize> {
        let pos = self.data.iter().rposition(|&b| b != 0)?;
        Some(match self.field {
            Field::Gf2 => pos * 8 + (7 - self.data[pos].leading_zeros() as usize) + 1,
            Field::Gf256 => pos + 1,
        })
    }

    pub fn lowest(&self) -> Option<usize> {
        let pos = self.data.iter().position(|&b| b != 0)?;
        Some(match self.field {
            Field::Gf2 => pos * 8 + self.data[pos].trailing_zeros() as usize + 1,
            Field::Gf256 => pos + 1,
        })
    }

    pub fn support(&self) -> Result<PacketSupport, CodingError> {
        match (self.lowest(), self.highest()) {
            (Some(lowest), Some(highest)) => Ok(PacketSupport { lowest, highest }),
            _ => Err(CodingError::ZeroVector),
        }
    }

    /// Nonzero `(index, coefficient)` pairs in ascending index order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        (1..=self.generation).filter_map(move |i| {
            let c = self.get(i);
            (c != 0).then_some((i, c))
        })
    }

    /// Nonzero pairs restricted to `lo..=hi`.
    fn nonzeros_in(&self, lo: usize, hi: usize) -> impl Iterator<Item = (usize, u8)> + '_ {
        (lo..=hi.min(self.generation)).filter_map(move |i| {
            let c = self.get(i);
            (c != 0).then_some((i, c))
        })
    }

    /// Storage byte range covering source indices `lo..=hi`.
    fn span(&self, lo: usize, hi: usize) -> std::ops::Range<usize> {
        match self.field {
            Field::Gf2 => (lo - 1) / 8..(hi - 1) / 8 + 1,
            Field::Gf256 => lo - 1..hi,
        }
    }

    /// `self += c * other`, touching only the storage of `lo..=hi`, which
    /// must cover the support of `other`.
    fn mul_add_span(&mut self, other: &EncodingVector, c: u8, lo: usize, hi: usize) {
        let span = self.span(lo, hi);
        self.field.mul_add_slice(&mut self.data[span.clone()], &other.data[span], c);
    }

    fn scale(&mut self, c: u8) {
        self.field.scale_slice(&mut self.data, c);
    }

    /// Raw storage: bit-packed LSB-first over GF(2), one byte per
    /// coefficient over GF(256).
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

/// Payload plus the global encoding vector describing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub vector: EncodingVector,
    pub payload: Vec<u8>,
}

impl CodedPacket {
    /// The uncoded form of a source packet.
    pub fn systematic(field: Field, generation: usize, src: &SourcePacket) -> Result<Self, CodingError> {
        Ok(CodedPacket { vector: EncodingVector::unit(field, generation, src.index)?, payload: src.payload.clone() })
    }
}

/// Returns the lowest and highest nonzero source index of `vector`.
pub fn support(vector: &EncodingVector) -> Result<PacketSupport, CodingError> {
    vector.support()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    Innovative,
    Redundant,
}

#[derive(Debug, Clone)]
struct Row {
    vector: EncodingVector,
    payload: Vec<u8>,
    /// Lowest nonzero index; the pivot (highest) is the map key.
    low: usize,
}

/// Incremental decoder. Rows are keyed by pivot (highest nonzero index) and
/// normalized so the pivot coefficient is 1. Source packets `1..=prefix`
/// are fully recovered and kept apart from the pending rows.
#[derive(Debug, Clone)]
pub struct DecoderState {
    field: Field,
    generation: usize,
    payload_size: usize,
    rows: BTreeMap<usize, Row>,
    decoded: Vec<Vec<u8>>,
    emitted: usize,
}

impl DecoderState {
    pub fn new(field: Field, generation: usize, payload_size: usize) -> Self {
        DecoderState {
            field,
            generation,
            payload_size,
            rows: BTreeMap::new(),
            decoded: Vec::new(),
            emitted: 0,
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn payload_size(&self) -> usize {
        self.payload_size
    }

    /// Dimension of the received span.
    pub fn rank(&self) -> usize {
        self.decoded.len() + self.rows.len()
    }

    /// Length of the contiguous decoded prefix; this is the advertised low
    /// index.
    pub fn low_index(&self) -> usize {
        self.decoded.len()
    }

    /// Highest pivot among rows not yet in the decoded prefix, 0 if none.
    pub fn high_index(&self) -> usize {
        self.rows.keys().next_back().copied().unwrap_or(0)
    }

    /// Minimum lowest index over pending rows, 0 if none. Diagnostic only.
    pub fn min_lowest_index(&self) -> usize {
        self.rows.values().map(|r| r.low).min().unwrap_or(0)
    }

    /// Highest source index this node can put into a combination.
    pub fn extent(&self) -> usize {
        self.high_index().max(self.low_index())
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.generation
    }

    /// Pending rows as `(pivot, vector)`, ascending by pivot.
    pub fn pending_rows(&self) -> impl Iterator<Item = (usize, &EncodingVector)> {
        self.rows.iter().map(|(&p, r)| (p, &r.vector))
    }

    /// Payload of a recovered source packet.
    pub fn decoded_payload(&self, index: usize) -> Option<&[u8]> {
        index.checked_sub(1).and_then(|i| self.decoded.get(i)).map(Vec::as_slice)
    }

    fn check(&self, pkt: &CodedPacket) -> Result<(), CodingError> {
        let v = &pkt.vector;
        if v.field != self.field || v.generation != self.generation {
            return Err(CodingError::SessionMismatch {
                field: self.field,
                generation: self.generation,
                got_field: v.field,
                got_generation: v.generation,
            });
        }
        if pkt.payload.len() != self.payload_size {
            return Err(CodingError::PayloadLength { expected: self.payload_size, got: pkt.payload.len() });
        }
        // Trailing bits past D in the last packed byte would name index > D.
        if let Some(h) = v.highest() {
            if h > self.generation {
                return Err(CodingError::IndexOutOfRange { index: h, generation: self.generation });
            }
        }
        Ok(())
    }

    /// Subtracts every recovered source packet out of `vector`/`payload`.
    fn strip_decoded(&self, vector: &mut EncodingVector, payload: &mut [u8], upto: usize) {
        let Some(low) = vector.lowest() else { return };
        if low > upto {
            return;
        }
        let hits: Vec<(usize, u8)> = vector.nonzeros_in(low, upto).collect();
        for (i, c) in hits {
            self.field.mul_add_slice(payload, &self.decoded[i - 1], c);
            vector.set(i, 0);
        }
    }

    /// Adds a received packet. Reduction always eliminates the current
    /// highest index, so the candidate's highest index strictly decreases
    /// until it either vanishes or lands on a free pivot.
    pub fn ingest(&mut self, pkt: &CodedPacket) -> Result<IngestOutcome, CodingError> {
        self.check(pkt)?;
        let mut vector = pkt.vector.clone();
        let mut payload = pkt.payload.clone();
        let prefix = self.decoded.len();
        self.strip_decoded(&mut vector, &mut payload, prefix);

        let pivot = loop {
            let Some(h) = vector.highest() else {
                return Ok(IngestOutcome::Redundant);
            };
            let Some(row) = self.rows.get(&h) else { break h };
            let c = vector.get(h);
            vector.mul_add_span(&row.vector, c, row.low, h);
            self.field.mul_add_slice(&mut payload, &row.payload, c);
            debug_assert!(vector.highest().is_none_or(|nh| nh < h));
        };

        let lead = vector.get(pivot);
        if lead != 1 {
            let inv = self.field.inv(lead).expect("nonzero lead");
            vector.scale(inv);
            self.field.scale_slice(&mut payload, inv);
        }
        let low = vector.lowest().expect("nonzero");
        self.rows.insert(pivot, Row { vector, payload, low });
        self.advance_prefix();
        Ok(IngestOutcome::Innovative)
    }

    /// Moves rows into the decoded prefix while the pivot right after the
    /// prefix is present; such a row has only that index left once the
    /// prefix has been stripped from it.
    fn advance_prefix(&mut self) {
        let start = self.decoded.len();
        while let Some(mut row) = self.rows.remove(&(self.decoded.len() + 1)) {
            let index = self.decoded.len() + 1;
            // Indices recovered earlier in this loop may still be present.
            let hits: Vec<(usize, u8)> = row.vector.nonzeros_in(row.low, index - 1).collect();
            for (i, c) in hits {
                self.field.mul_add_slice(&mut row.payload, &self.decoded[i - 1], c);
                row.vector.set(i, 0);
            }
            debug_assert_eq!(row.vector.lowest(), Some(index));
            self.decoded.push(row.payload);
        }
        let end = self.decoded.len();
        if end == start {
            return;
        }
        // Keep pending rows free of recovered indices so their lowest index
        // reflects what they still need.
        let field = self.field;
        let decoded = &self.decoded;
        for row in self.rows.values_mut() {
            if row.low > end {
                continue;
            }
            let hits: Vec<(usize, u8)> = row.vector.nonzeros_in(row.low, end).collect();
            for (i, c) in hits {
                field.mul_add_slice(&mut row.payload, &decoded[i - 1], c);
                row.vector.set(i, 0);
            }
            row.low = row.vector.lowest().expect("pivot survives");
        }
    }

    /// Source packets recovered since the previous call, in index order.
    pub fn decoded_packets(&mut self) -> Vec<SourcePacket> {
        let fresh = (self.emitted..self.decoded.len())
            .map(|i| SourcePacket { index: i + 1, payload: self.decoded[i].clone() })
            .collect();
        self.emitted = self.decoded.len();
        fresh
    }

    /// Number of stored items (recovered packets and pending rows) whose
    /// support lies inside `lo..=hi`.
    pub fn eligible_count(&self, lo: usize, hi: usize) -> usize {
        let prefix = self.decoded.len();
        let decoded = if lo <= hi.min(prefix) { hi.min(prefix) - lo + 1 } else { 0 };
        let pending = self.rows.range(lo..=hi).filter(|(_, r)| r.low >= lo).count();
        decoded + pending
    }

    /// Random combination of every stored item whose support lies inside
    /// `lo..=hi`. Coefficients are uniform over the field; an all-zero draw
    /// is retried up to [`ZERO_DRAW_RETRIES`] times.
    pub fn encode_window<R: Rng + ?Sized>(&self, lo: usize, hi: usize, rng: &mut R) -> Result<CodedPacket, EncodeError> {
        if lo == 0 || lo > hi || hi > self.generation {
            return Err(EncodeError::InvalidWindow { lo, hi });
        }
        let prefix = self.decoded.len();
        let decoded_hi = hi.min(prefix);
        let pending: Vec<(usize, &Row)> = self.rows.range(lo..=hi).filter(|(_, r)| r.low >= lo).map(|(&p, r)| (p, r)).collect();
        let n_decoded = if lo <= decoded_hi { decoded_hi - lo + 1 } else { 0 };
        let n = n_decoded + pending.len();
        if n == 0 {
            return Err(EncodeError::NothingToSend);
        }

        let mut coeffs = vec![0u8; n];
        for _ in 0..ZERO_DRAW_RETRIES {
            for c in coeffs.iter_mut() {
                *c = match self.field {
                    Field::Gf2 => rng.random::<bool>() as u8,
                    Field::Gf256 => rng.random::<u8>(),
                };
            }
            if coeffs.iter().all(|&c| c == 0) {
                continue;
            }
            let mut vector = EncodingVector::zero(self.field, self.generation);
            let mut payload = vec![0u8; self.payload_size];
            for (k, &c) in coeffs[..n_decoded].iter().enumerate() {
                if c != 0 {
                    let index = lo + k;
                    vector.set(index, c);
                    self.field.mul_add_slice(&mut payload, &self.decoded[index - 1], c);
                }
            }
            for (&c, (pivot, row)) in coeffs[n_decoded..].iter().zip(&pending) {
                if c != 0 {
                    vector.mul_add_span(&row.vector, c, row.low, *pivot);
                    self.field.mul_add_slice(&mut payload, &row.payload, c);
                }
            }
            // Rows are independent, so a nonzero draw gives a nonzero vector.
            debug_assert!(!vector.is_zero());
            return Ok(CodedPacket { vector, payload });
        }
        Err(EncodeError::NothingToSend)
    }
}

/// Free-function form of [`DecoderState::encode_window`].
pub fn encode_window<R: Rng + ?Sized>(
    buffer: &DecoderState,
    lo: usize,
    hi: usize,
    rng: &mut R,
) -> Result<CodedPacket, EncodeError> {
    buffer.encode_window(lo, hi, rng)
}
