mod support;

use dragoncast::Field;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{gf256_inv, gf256_mul};

fn axioms_hold(f: Field, a: u8, b: u8, c: u8) -> bool {
    f.add(a, b) == f.add(b, a)
        && f.mul(a, b) == f.mul(b, a)
        && f.add(f.add(a, b), c) == f.add(a, f.add(b, c))
        && f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
        && f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
        && f.add(a, 0) == a
        && f.mul(a, 1) == a
        && f.mul(a, 0) == 0
        && f.add(a, a) == 0
        && f.add(f.add(a, b), b) == a
}

#[test]
fn gf2_axioms_exhaustively() {
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                assert!(axioms_hold(Field::Gf2, a, b, c), "({a}, {b}, {c})");
            }
        }
    }
    assert_eq!(Field::Gf2.inv(1), Some(1));
    assert_eq!(Field::Gf2.inv(0), None);
}

#[test]
fn gf256_axioms_on_sampled_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(256);
    for _ in 0..20_000 {
        let (a, b, c) = (rng.random(), rng.random(), rng.random());
        assert!(axioms_hold(Field::Gf256, a, b, c), "({a}, {b}, {c})");
    }
}

#[test]
fn gf256_products_match_bitwise_multiplication() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let (a, b) = (rng.random(), rng.random());
        assert_eq!(Field::Gf256.mul(a, b), gf256_mul(a, b), "{a} × {b}");
    }
}

#[test]
fn gf256_inverses_are_exhaustively_correct() {
    for a in 1..=255u8 {
        let i = Field::Gf256.inv(a).unwrap();
        assert_eq!(Field::Gf256.mul(a, i), 1);
        assert_eq!(i, gf256_inv(a));
    }
    assert_eq!(Field::Gf256.inv(0), None);
}

proptest! {
    #[test]
    fn gf256_field_axioms(a: u8, b: u8, c: u8) {
        prop_assert!(axioms_hold(Field::Gf256, a, b, c));
    }

    #[test]
    fn gf256_division_undoes_multiplication(a: u8, b in 1u8..) {
        let f = Field::Gf256;
        prop_assert_eq!(f.mul(f.mul(a, b), f.inv(b).unwrap()), a);
    }

    #[test]
    fn slice_kernels_match_scalar_ops(src in proptest::collection::vec(any::<u8>(), 0..64), c: u8) {
        let f = Field::Gf256;
        let mut dst: Vec<u8> = src.iter().map(|x| x.rotate_left(3)).collect();
        let expect: Vec<u8> = dst.iter().zip(&src).map(|(&d, &s)| d ^ gf256_mul(c, s)).collect();
        f.mul_add_slice(&mut dst, &src, c);
        prop_assert_eq!(dst, expect);
    }
}
