//! Independent reference implementations used as test oracles. Nothing
//! here touches the library's field tables or decoder.

#![allow(dead_code)]

use dragoncast::coding::{CodedPacket, EncodingVector};
use dragoncast::Field;
use rand::Rng;

/// Carry-less multiply reduced by x^8 + x^4 + x^3 + x^2 + 1, bit by bit.
pub fn gf256_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= 0x1D;
        }
        b >>= 1;
    }
    acc
}

/// `a^254`, the inverse of a nonzero element.
pub fn gf256_inv(a: u8) -> u8 {
    let mut result = 1u8;
    for _ in 0..254 {
        result = gf256_mul(result, a);
    }
    result
}

pub fn mul(field: Field, a: u8, b: u8) -> u8 {
    match field {
        Field::Gf2 => a & b,
        Field::Gf256 => gf256_mul(a, b),
    }
}

/// Coefficient times one payload byte. Over GF(2) a byte is eight
/// independent symbols, so the coefficient either keeps or clears it.
pub fn scale_byte(field: Field, c: u8, byte: u8) -> u8 {
    match field {
        Field::Gf2 => if c != 0 { byte } else { 0 },
        Field::Gf256 => gf256_mul(c, byte),
    }
}

pub fn inv(field: Field, a: u8) -> u8 {
    assert_ne!(a, 0);
    match field {
        Field::Gf2 => 1,
        Field::Gf256 => gf256_inv(a),
    }
}

/// Plain Gaussian elimination over dense rows, pivoting on the lowest
/// nonzero column (the opposite convention to the library's decoder).
pub struct DenseRank {
    field: Field,
    rows: Vec<(usize, Vec<u8>)>,
}

impl DenseRank {
    pub fn new(field: Field) -> Self {
        DenseRank { field, rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Inserts a row; true if the rank grew.
    pub fn insert(&mut self, mut v: Vec<u8>) -> bool {
        for (pivot, row) in &self.rows {
            let c = v[*pivot];
            if c != 0 {
                for (x, &r) in v.iter_mut().zip(row) {
                    *x ^= mul(self.field, c, r);
                }
            }
        }
        let Some(pivot) = v.iter().position(|&x| x != 0) else { return false };
        let scale = inv(self.field, v[pivot]);
        for x in v.iter_mut() {
            *x = mul(self.field, *x, scale);
        }
        self.rows.push((pivot, v));
        true
    }
}

pub fn dense(v: &EncodingVector) -> Vec<u8> {
    (1..=v.generation()).map(|i| v.get(i)).collect()
}

pub fn random_payloads<R: Rng>(rng: &mut R, generation: usize, size: usize) -> Vec<Vec<u8>> {
    (0..generation).map(|_| (0..size).map(|_| rng.random()).collect()).collect()
}

/// Combination of source packets with the given coefficients, payload
/// computed with the reference arithmetic.
pub fn combine(field: Field, sources: &[Vec<u8>], coeffs: &[(usize, u8)]) -> CodedPacket {
    let generation = sources.len();
    let size = sources.first().map_or(0, Vec::len);
    let mut payload = vec![0u8; size];
    for &(i, c) in coeffs {
        for (p, &s) in payload.iter_mut().zip(&sources[i - 1]) {
            *p ^= scale_byte(field, c, s);
        }
    }
    let vector = EncodingVector::from_coefficients(field, generation, coeffs.iter().copied()).expect("indices in range");
    CodedPacket { vector, payload }
}

/// Uniform random coefficients over `lo..=hi` (possibly all zero).
pub fn random_window<R: Rng>(rng: &mut R, field: Field, lo: usize, hi: usize) -> Vec<(usize, u8)> {
    (lo..=hi)
        .map(|i| {
            let c = match field {
                Field::Gf2 => rng.random::<bool>() as u8,
                Field::Gf256 => rng.random(),
            };
            (i, c)
        })
        .filter(|&(_, c)| c != 0)
        .collect()
}

/// A random reception sequence: sliding and full-range windows, systematic
/// packets, duplicates, drops and local reordering.
pub fn random_trace<R: Rng>(rng: &mut R, field: Field, sources: &[Vec<u8>]) -> Vec<CodedPacket> {
    let d = sources.len();
    let k = rng.random_range(1..=d);
    let mut out: Vec<CodedPacket> = Vec::new();
    let steps = d + rng.random_range(0..=d);
    for step in 0..steps {
        let front = ((step + 1) * d / steps).max(1);
        let pkt = match rng.random_range(0..10) {
            0 => {
                let i = rng.random_range(1..=d);
                combine(field, sources, &[(i, 1)])
            }
            1 => {
                let lo = rng.random_range(1..=d);
                let hi = rng.random_range(lo..=d);
                combine(field, sources, &random_window(rng, field, lo, hi))
            }
            2 if !out.is_empty() => {
                let j = rng.random_range(0..out.len());
                out[j].clone()
            }
            _ => {
                let lo = front.saturating_sub(k - 1).max(1);
                combine(field, sources, &random_window(rng, field, lo, front))
            }
        };
        if pkt.vector.is_zero() || rng.random_bool(0.15) {
            continue;
        }
        out.push(pkt);
    }
    // Local reordering.
    for i in 0..out.len() {
        if rng.random_bool(0.2) {
            let j = (i + rng.random_range(0..4)).min(out.len() - 1);
            out.swap(i, j);
        }
    }
    out
}
