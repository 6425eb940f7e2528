//! Little-endian frame layout:
//!
//! ```text
//! symbol_bits u8 | D u16 | window_lo u16 | window_len u16
//! | coefficients of window_lo..window_lo+window_len (bit-packed LSB-first
//! |   for GF(2), one byte each for GF(256))
//! | sender u16 | rank u16 | low_index u16 | lifetime_ms u32 | flags u8
//! | payload
//! ```
//!
//! `symbol_bits` is 1 for GF(2) and 8 for GF(256). Control frames have
//! `window_lo = window_len = 0` and no payload.

use std::time::Duration;

use thiserror::Error;

use crate::coding::{CodedPacket, EncodingVector};
use crate::galois::Field;

use super::{Frame, PiggybackHeader};

pub const VECTOR_PREAMBLE_LEN: usize = 7;
pub const HEADER_LEN: usize = 11;

const FLAG_CONTROL: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown symbol width {0}")]
    SymbolWidth(u8),
    #[error("window {lo}+{len} exceeds generation {generation}")]
    Window { lo: usize, len: usize, generation: usize },
    #[error("control flag does not match frame contents")]
    ControlMismatch,
    #[error("value {0} does not fit the wire field")]
    Overflow(usize),
}

fn symbol_bits(field: Field) -> u8 {
    match field {
        Field::Gf2 => 1,
        Field::Gf256 => 8,
    }
}

fn coefficient_bytes(field: Field, len: usize) -> usize {
    match field {
        Field::Gf2 => len.div_ceil(8),
        Field::Gf256 => len,
    }
}

/// Encoding window actually carried by a data frame: the packet support.
fn carried_window(frame: &Frame) -> (usize, usize) {
    match &frame.body {
        Some(pkt) => {
            let s = pkt.vector.support().expect("transmitted vectors are nonzero");
            (s.lowest, s.highest - s.lowest + 1)
        }
        None => (0, 0),
    }
}

/// Bytes spent on everything except the payload.
pub fn overhead_len(frame: &Frame) -> usize {
    let (_, len) = carried_window(frame);
    VECTOR_PREAMBLE_LEN + coefficient_bytes(frame.field, len) + HEADER_LEN
}

pub fn wire_len(frame: &Frame) -> usize {
    overhead_len(frame) + frame.body.as_ref().map_or(0, |p| p.payload.len())
}

fn u16_of(v: usize) -> Result<u16, WireError> {
    u16::try_from(v).map_err(|_| WireError::Overflow(v))
}

pub fn encode(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(wire_len(frame));
    let (lo, len) = carried_window(frame);
    out.push(symbol_bits(frame.field));
    out.extend_from_slice(&u16_of(frame.generation)?.to_le_bytes());
    out.extend_from_slice(&u16_of(lo)?.to_le_bytes());
    out.extend_from_slice(&u16_of(len)?.to_le_bytes());
    if let Some(pkt) = &frame.body {
        let mut coeffs = vec![0u8; coefficient_bytes(frame.field, len)];
        for k in 0..len {
            let c = pkt.vector.get(lo + k);
            match frame.field {
                Field::Gf2 => coeffs[k / 8] |= c << (k % 8),
                Field::Gf256 => coeffs[k] = c,
            }
        }
        out.extend_from_slice(&coeffs);
    }
    let h = &frame.header;
    out.extend_from_slice(&h.sender.to_le_bytes());
    out.extend_from_slice(&u16_of(h.rank)?.to_le_bytes());
    out.extend_from_slice(&u16_of(h.low_index)?.to_le_bytes());
    let lifetime_ms = u32::try_from(h.lifetime.as_millis()).map_err(|_| WireError::Overflow(usize::MAX))?;
    out.extend_from_slice(&lifetime_ms.to_le_bytes());
    out.push(if h.is_control { FLAG_CONTROL } else { 0 });
    if let Some(pkt) = &frame.body {
        out.extend_from_slice(&pkt.payload);
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(WireError::Truncated { need: end, have: self.buf.len() });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let field = match cur.u8()? {
        1 => Field::Gf2,
        8 => Field::Gf256,
        other => return Err(WireError::SymbolWidth(other)),
    };
    let generation = cur.u16()? as usize;
    let lo = cur.u16()? as usize;
    let len = cur.u16()? as usize;
    if len > 0 && (lo == 0 || lo + len - 1 > generation) {
        return Err(WireError::Window { lo, len, generation });
    }
    let vector = if len > 0 {
        let raw = cur.take(coefficient_bytes(field, len))?;
        let mut v = EncodingVector::zero(field, generation);
        for k in 0..len {
            let c = match field {
                Field::Gf2 => raw[k / 8] >> (k % 8) & 1,
                Field::Gf256 => raw[k],
            };
            if c != 0 {
                v.try_set(lo + k, c).map_err(|_| WireError::Window { lo, len, generation })?;
            }
        }
        Some(v)
    } else {
        None
    };
    let sender = cur.u16()?;
    let rank = cur.u16()? as usize;
    let low_index = cur.u16()? as usize;
    let lifetime = Duration::from_millis(cur.u32()? as u64);
    let is_control = cur.u8()? & FLAG_CONTROL != 0;
    let payload = bytes[cur.pos..].to_vec();
    let body = match (vector, is_control) {
        (Some(vector), false) => Some(CodedPacket { vector, payload }),
        (None, true) if payload.is_empty() => None,
        _ => return Err(WireError::ControlMismatch),
    };
    Ok(Frame {
        field,
        generation,
        header: PiggybackHeader { sender, rank, low_index, lifetime, is_control },
        body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(is_control: bool) -> PiggybackHeader {
        PiggybackHeader { sender: 3, rank: 17, low_index: 9, lifetime: Duration::from_secs(2), is_control }
    }

    #[test]
    fn control_frame_layout() {
        let f = Frame { field: Field::Gf2, generation: 200, header: header(true), body: None };
        let bytes = encode(&f).unwrap();
        assert_eq!(bytes.len(), VECTOR_PREAMBLE_LEN + HEADER_LEN);
        assert_eq!(bytes.len(), wire_len(&f));
        assert_eq!(&bytes[..7], &[1, 200, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[7..9], &3u16.to_le_bytes());
        assert_eq!(&bytes[13..17], &2000u32.to_le_bytes());
        assert_eq!(bytes[17], 1);
        assert_eq!(decode(&bytes).unwrap(), f);
    }

    #[test]
    fn gf2_window_is_bit_packed() {
        let v = EncodingVector::from_coefficients(Field::Gf2, 20, [(3, 1), (5, 1), (7, 1), (8, 1)]).unwrap();
        let f = Frame {
            field: Field::Gf2,
            generation: 20,
            header: header(false),
            body: Some(CodedPacket { vector: v, payload: vec![0xAB; 4] }),
        };
        let bytes = encode(&f).unwrap();
        // window 3..=8, six coefficients 1,0,1,0,1,1 -> 0b110101
        assert_eq!(&bytes[3..7], &[3, 0, 6, 0]);
        assert_eq!(bytes[7], 0b11_0101);
        assert_eq!(bytes.len(), VECTOR_PREAMBLE_LEN + 1 + HEADER_LEN + 4);
        assert_eq!(overhead_len(&f), VECTOR_PREAMBLE_LEN + 1 + HEADER_LEN);
        assert_eq!(decode(&bytes).unwrap(), f);
    }

    #[test]
    fn truncated_and_garbage_frames_fail() {
        assert!(matches!(decode(&[1, 0]), Err(WireError::Truncated { .. })));
        assert_eq!(decode(&[3, 0, 0, 0, 0, 0, 0]), Err(WireError::SymbolWidth(3)));
        assert!(matches!(decode(&[1, 4, 0, 3, 0, 5, 0, 0xff]), Err(WireError::Window { .. })));
    }

    proptest! {
        #[test]
        fn round_trip(gf256 in any::<bool>(), coeffs in prop::collection::vec(any::<u8>(), 1..60), payload in prop::collection::vec(any::<u8>(), 0..40), rank in 0usize..60) {
            let field = if gf256 { Field::Gf256 } else { Field::Gf2 };
            let generation = coeffs.len();
            let pairs = coeffs.iter().enumerate().map(|(i, &c)| (i + 1, if gf256 { c } else { c & 1 }));
            let vector = EncodingVector::from_coefficients(field, generation, pairs).unwrap();
            prop_assume!(!vector.is_zero());
            let f = Frame {
                field,
                generation,
                header: PiggybackHeader { sender: 1, rank, low_index: rank / 2, lifetime: Duration::from_millis(1500), is_control: false },
                body: Some(CodedPacket { vector, payload }),
            };
            let bytes = encode(&f).unwrap();
            prop_assert_eq!(bytes.len(), wire_len(&f));
            prop_assert_eq!(decode(&bytes).unwrap(), f);
        }
    }
}
