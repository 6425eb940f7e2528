//! Finite-field arithmetic for coding coefficients.
//!
//! Two fields are supported: GF(2), where addition is XOR and multiplication
//! is AND, and GF(2^8) reduced by x^8 + x^4 + x^3 + x^2 + 1 (0x11D). Both have
//! characteristic 2, so addition is always bitwise XOR.
//!
//! Elements are carried as `u8`. The [`FieldElement`] wrapper checks field
//! membership; the raw methods on [`Field`] and the slice kernels skip the
//! checks and are what the decoder uses on hot paths.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Full reduction polynomial for GF(256), including the x^8 term.
pub const GF256_POLY: u16 = 0x11D;

const GF256_GENERATOR: u8 = 0x02;

static EXP: [u8; 512] = build_tables().0;
static LOG: [u8; 256] = build_tables().1;

const fn build_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x = gf256_mul_slow(x as u8, GF256_GENERATOR) as u16;
        i += 1;
    }
    // Doubled so `EXP[log a + log b]` never needs a modulo.
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    (exp, log)
}

/// Shift-and-add multiplication, used only to seed the tables.
const fn gf256_mul_slow(a: u8, b: u8) -> u8 {
    let mut a = a as u16;
    let mut b = b;
    let mut acc: u16 = 0;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a <<= 1;
        if a & 0x100 != 0 {
            a ^= GF256_POLY;
        }
        b >>= 1;
    }
    acc as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("field mismatch: {left} vs {right}")]
    Mismatch { left: Field, right: Field },
    #[error("value {value} is not an element of {field}")]
    OutOfRange { field: Field, value: u8 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("unsupported field order {0} (expected 2 or 256)")]
    UnsupportedOrder(u32),
}

/// A coefficient field. Only orders 2 and 256 exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Field {
    Gf2,
    Gf256,
}

impl Field {
    pub fn from_order(order: u32) -> Result<Self, FieldError> {
        match order {
            2 => Ok(Field::Gf2),
            256 => Ok(Field::Gf256),
            other => Err(FieldError::UnsupportedOrder(other)),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Field::Gf2 => 2,
            Field::Gf256 => 256,
        }
    }

    /// Reduction polynomial, `None` for the prime field GF(2).
    pub fn polynomial(self) -> Option<u16> {
        match self {
            Field::Gf2 => None,
            Field::Gf256 => Some(GF256_POLY),
        }
    }

    pub fn contains(self, value: u8) -> bool {
        match self {
            Field::Gf2 => value < 2,
            Field::Gf256 => true,
        }
    }

    pub fn element(self, value: u8) -> Result<FieldElement, FieldError> {
        FieldElement::new(self, value)
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        match self {
            Field::Gf2 => a & b,
            Field::Gf256 => {
                if a == 0 || b == 0 {
                    0
                } else {
                    EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
                }
            }
        }
    }

    #[inline]
    pub fn inv(self, a: u8) -> Option<u8> {
        match (self, a) {
            (_, 0) => None,
            (Field::Gf2, _) => Some(1),
            (Field::Gf256, _) => Some(EXP[255 - LOG[a as usize] as usize]),
        }
    }

    /// `dst[i] += c * src[i]` for every byte, each byte being one field
    /// symbol. Over GF(2) a byte holds eight independent bit symbols, so the
    /// same kernel serves bit-packed data.
    pub fn mul_add_slice(self, dst: &mut [u8], src: &[u8], c: u8) {
        debug_assert_eq!(dst.len(), src.len());
        match (self, c) {
            (_, 0) => {}
            (_, 1) => xor_slice(dst, src),
            (Field::Gf2, _) => unreachable!("GF(2) coefficient {c}"),
            (Field::Gf256, _) => {
                let log_c = LOG[c as usize] as usize;
                for (d, &s) in dst.iter_mut().zip(src) {
                    if s != 0 {
                        *d ^= EXP[log_c + LOG[s as usize] as usize];
                    }
                }
            }
        }
    }

    /// `dst[i] *= c` for every symbol.
    pub fn scale_slice(self, dst: &mut [u8], c: u8) {
        match (self, c) {
            (_, 1) => {}
            (_, 0) => dst.fill(0),
            (Field::Gf2, _) => unreachable!("GF(2) coefficient {c}"),
            (Field::Gf256, _) => {
                let log_c = LOG[c as usize] as usize;
                for d in dst.iter_mut() {
                    if *d != 0 {
                        *d = EXP[log_c + LOG[*d as usize] as usize];
                    }
                }
            }
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Gf2 => write!(f, "GF(2)"),
            Field::Gf256 => write!(f, "GF(256)"),
        }
    }
}

impl TryFrom<u32> for Field {
    type Error = FieldError;
    fn try_from(order: u32) -> Result<Self, Self::Error> {
        Field::from_order(order)
    }
}

impl From<Field> for u32 {
    fn from(field: Field) -> u32 {
        field.order()
    }
}

fn xor_slice(dst: &mut [u8], src: &[u8]) {
    let mut d_chunks = dst.chunks_exact_mut(8);
    let mut s_chunks = src.chunks_exact(8);
    for (d, s) in (&mut d_chunks).zip(&mut s_chunks) {
        let x = u64::from_ne_bytes(d.try_into().unwrap()) ^ u64::from_ne_bytes(s.try_into().unwrap());
        d.copy_from_slice(&x.to_ne_bytes());
    }
    for (d, s) in d_chunks.into_remainder().iter_mut().zip(s_chunks.remainder()) {
        *d ^= s;
    }
}

/// A value tagged with the field it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    field: Field,
    value: u8,
}

impl FieldElement {
    pub fn new(field: Field, value: u8) -> Result<Self, FieldError> {
        if field.contains(value) {
            Ok(FieldElement { field, value })
        } else {
            Err(FieldError::OutOfRange { field, value })
        }
    }

    pub fn zero(field: Field) -> Self {
        FieldElement { field, value: 0 }
    }

    pub fn one(field: Field) -> Self {
        FieldElement { field, value: 1 }
    }

    pub fn field(self) -> Field {
        self.field
    }

    pub fn value(self) -> u8 {
        self.value
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: Self) -> Result<Field, FieldError> {
        if self.field == other.field {
            Ok(self.field)
        } else {
            Err(FieldError::Mismatch { left: self.field, right: other.field })
        }
    }

    // Fallible across fields, so not `std::ops`.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Self) -> Result<Self, FieldError> {
        let field = self.same_field(other)?;
        Ok(FieldElement { field, value: field.add(self.value, other.value) })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Self) -> Result<Self, FieldError> {
        let field = self.same_field(other)?;
        Ok(FieldElement { field, value: field.mul(self.value, other.value) })
    }

    pub fn inv(self) -> Result<Self, FieldError> {
        self.field
            .inv(self.value)
            .map(|value| FieldElement { field: self.field, value })
            .ok_or(FieldError::ZeroInverse)
    }
}

pub fn add(a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
    a.add(b)
}

pub fn mul(a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
    a.mul(b)
}

pub fn inv(a: FieldElement) -> Result<FieldElement, FieldError> {
    a.inv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Schoolbook carry-less product followed by long division by 0x11D.
    fn poly_mul_mod(a: u8, b: u8) -> u8 {
        let mut prod: u32 = 0;
        for i in 0..8 {
            if b >> i & 1 == 1 {
                prod ^= (a as u32) << i;
            }
        }
        for bit in (8..16).rev() {
            if prod >> bit & 1 == 1 {
                prod ^= (GF256_POLY as u32) << (bit - 8);
            }
        }
        prod as u8
    }

    fn el(field: Field, v: u8) -> FieldElement {
        FieldElement::new(field, v).unwrap()
    }

    #[test]
    fn gf2_small_identities() {
        let f = Field::Gf2;
        assert_eq!(add(el(f, 1), el(f, 1)).unwrap().value(), 0);
        assert_eq!(add(el(f, 1), el(f, 0)).unwrap().value(), 1);
        assert_eq!(mul(el(f, 1), el(f, 1)).unwrap().value(), 1);
        assert_eq!(inv(el(f, 1)).unwrap().value(), 1);
        assert_eq!(inv(el(f, 0)), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn gf2_rejects_out_of_range() {
        assert!(FieldElement::new(Field::Gf2, 2).is_err());
    }

    #[test]
    fn gf256_add_self_is_zero_and_mul_one_is_identity() {
        let f = Field::Gf256;
        for a in 0..=255u8 {
            assert!(add(el(f, a), el(f, a)).unwrap().is_zero());
            assert_eq!(mul(el(f, a), FieldElement::one(f)).unwrap().value(), a);
        }
    }

    #[test]
    fn gf256_mul_matches_polynomial_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (a, b): (u8, u8) = (rng.random(), rng.random());
            assert_eq!(Field::Gf256.mul(a, b), poly_mul_mod(a, b), "{a} * {b}");
        }
    }

    #[test]
    fn gf256_every_nonzero_element_has_inverse() {
        let f = Field::Gf256;
        for a in 1..=255u8 {
            let ai = inv(el(f, a)).unwrap();
            assert_eq!(mul(el(f, a), ai).unwrap().value(), 1);
        }
        assert_eq!(inv(FieldElement::zero(f)), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let a = el(Field::Gf2, 1);
        let b = el(Field::Gf256, 1);
        assert!(matches!(add(a, b), Err(FieldError::Mismatch { .. })));
        assert!(matches!(mul(a, b), Err(FieldError::Mismatch { .. })));
    }

    #[test]
    fn order_round_trip() {
        assert_eq!(Field::from_order(2).unwrap(), Field::Gf2);
        assert_eq!(Field::from_order(256).unwrap().order(), 256);
        assert!(Field::from_order(3).is_err());
    }

    #[test]
    fn slice_kernels_agree_with_scalar_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src: Vec<u8> = (0..37).map(|_| rng.random()).collect();
        let base: Vec<u8> = (0..37).map(|_| rng.random()).collect();
        for c in [0u8, 1, 2, 0x53, 0xff] {
            let mut dst = base.clone();
            Field::Gf256.mul_add_slice(&mut dst, &src, c);
            for i in 0..dst.len() {
                assert_eq!(dst[i], base[i] ^ Field::Gf256.mul(c, src[i]));
            }
            let mut scaled = base.clone();
            Field::Gf256.scale_slice(&mut scaled, c);
            for i in 0..scaled.len() {
                assert_eq!(scaled[i], Field::Gf256.mul(c, base[i]));
            }
        }
        let mut dst = base.clone();
        Field::Gf2.mul_add_slice(&mut dst, &src, 1);
        assert!(dst.iter().zip(&base).zip(&src).all(|((d, b), s)| *d == b ^ s));
    }
}
