use std::sync::OnceLock;

use medclaim_ckks::{
    keygen, Ciphertext, CkksContext, HeError, HeParams, KeyBundle, OddCubic, Plaintext,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Fixture {
    ctx: CkksContext,
    keys: KeyBundle,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let params = HeParams::default();
        let keys = keygen(&params, Some(42)).unwrap();
        let ctx = CkksContext::new(params).unwrap();
        Fixture { ctx, keys }
    })
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

fn max_err(got: &[f64], want: &[f64]) -> f64 {
    want.iter()
        .zip(got)
        .map(|(w, g)| (w - g).abs())
        .fold(0.0, f64::max)
}

fn enc(f: &Fixture, v: &[f64]) -> Ciphertext {
    let pt = f.ctx.encode_default(v).unwrap();
    f.ctx.encrypt_fresh(&pt, &f.keys.public_key).unwrap()
}

fn dec(f: &Fixture, ct: &Ciphertext) -> Vec<f64> {
    f.ctx.decode(&f.ctx.decrypt(ct, &f.keys.secret_key).unwrap())
}

#[test]
fn secret_key_histogram_is_uniform_ternary() {
    let f = fixture();
    let coeffs = f.keys.secret_key.ternary_coefficients(&f.ctx);
    assert_eq!(coeffs.len(), 8192);
    let mut counts = [0usize; 3];
    for c in &coeffs {
        match c {
            -1 => counts[0] += 1,
            0 => counts[1] += 1,
            1 => counts[2] += 1,
            other => panic!("non-ternary coefficient {other}"),
        }
    }
    let expected = coeffs.len() as f64 / 3.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // Two degrees of freedom: the survival function is exp(-x/2).
    let critical = -2.0 * 0.001f64.ln();
    assert!(stat < critical, "chi-square {stat} >= {critical}, counts {counts:?}");
}

#[test]
fn keygen_is_deterministic_under_seed() {
    let params = HeParams::generate(2048, 50, &[30, 30], 51, 30);
    let a = keygen(&params, Some(9)).unwrap().to_bytes();
    let b = keygen(&params, Some(9)).unwrap().to_bytes();
    let c = keygen(&params, Some(10)).unwrap().to_bytes();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn keygen_rejects_non_power_of_two_dimension() {
    let mut params = HeParams::default();
    params.ring_dimension = 3000;
    assert!(matches!(keygen(&params, Some(1)), Err(HeError::InvalidParams(_))));
}

#[test]
fn encode_zeros_gives_zero_polynomial() {
    let f = fixture();
    let pt = f.ctx.encode_default(&vec![0.0; 4096]).unwrap();
    assert!(pt.is_zero());
    assert!(dec_pt(f, &pt).iter().all(|&x| x == 0.0));
}

fn dec_pt(f: &Fixture, pt: &Plaintext) -> Vec<f64> {
    f.ctx.decode(pt)
}

#[test]
fn encode_decode_roundtrip_full_slots() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let v = random_vec(&mut rng, 4096, 10.0);
        let out = dec_pt(f, &f.ctx.encode_default(&v).unwrap());
        assert_eq!(out.len(), 4096);
        assert!(max_err(&out, &v) <= 1e-6);
    }
}

#[test]
fn encode_rejects_overflow_and_non_finite() {
    let f = fixture();
    assert!(matches!(
        f.ctx.encode_default(&vec![1.0; 4097]),
        Err(HeError::SlotOverflow { len: 4097, slots: 4096 })
    ));
    assert!(matches!(
        f.ctx.encode_default(&[1.0, f64::NAN]),
        Err(HeError::NonFiniteInput { index: 1 })
    ));
}

#[test]
fn decode_preserves_slot_order() {
    let f = fixture();
    let mut e3 = vec![0.0; 8];
    e3[3] = 1.0;
    let out = dec_pt(f, &f.ctx.encode_default(&e3).unwrap());
    for (i, x) in out.iter().enumerate() {
        let want = if i == 3 { 1.0 } else { 0.0 };
        assert!((x - want).abs() < 1e-9, "slot {i}: {x}");
    }
}

#[test]
fn encrypt_decrypt_roundtrip() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let v = random_vec(&mut rng, 4096, 10.0);
        let out = dec(f, &enc(f, &v));
        assert!(max_err(&out, &v) <= 1e-4);
    }
    let zero = dec(f, &enc(f, &[0.0; 16]));
    assert!(zero.iter().all(|x| x.abs() <= 1e-4));
}

#[test]
fn encryption_is_randomized() {
    let f = fixture();
    let pt = f.ctx.encode_default(&[1.5, -2.0]).unwrap();
    let a = f.ctx.encrypt_fresh(&pt, &f.keys.public_key).unwrap();
    let b = f.ctx.encrypt_fresh(&pt, &f.keys.public_key).unwrap();
    assert_ne!(a.to_bytes(), b.to_bytes());
    let (da, db) = (dec(f, &a), dec(f, &b));
    assert!(max_err(&da, &db) <= 2e-4);
}

#[test]
fn foreign_public_key_is_rejected() {
    let f = fixture();
    let other = HeParams::generate(2048, 50, &[30, 30], 51, 30);
    let other_keys = keygen(&other, Some(3)).unwrap();
    let pt = f.ctx.encode_default(&[1.0]).unwrap();
    assert!(matches!(
        f.ctx.encrypt_fresh(&pt, &other_keys.public_key),
        Err(HeError::KeyParamsMismatch)
    ));
    let ct = enc(f, &[1.0]);
    assert!(matches!(
        f.ctx.decrypt(&ct, &other_keys.secret_key),
        Err(HeError::KeyParamsMismatch)
    ));
}

#[test]
fn wrong_secret_key_yields_garbage() {
    let f = fixture();
    let stranger = keygen(&HeParams::default(), Some(43)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_vec(&mut rng, 4096, 1.0);
    let ct = enc(f, &v);
    let out = f.ctx.decode(&f.ctx.decrypt(&ct, &stranger.secret_key).unwrap());
    assert!(max_err(&out, &v) >= 1.0);
}

#[test]
fn add_matches_plaintext_sum() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = random_vec(&mut rng, 4096, 1.0);
    let w = random_vec(&mut rng, 4096, 1.0);
    let sum = f.ctx.add(&enc(f, &v), &enc(f, &w)).unwrap();
    let want: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
    assert!(max_err(&dec(f, &sum), &want) <= 2e-4);

    let with_zero = f.ctx.add(&enc(f, &v), &enc(f, &[])).unwrap();
    assert!(max_err(&dec(f, &with_zero), &v) <= 2e-4);
}

#[test]
fn add_rejects_mismatched_level_and_scale() {
    let f = fixture();
    let a = enc(f, &[1.0]);
    let b = f.ctx.mod_drop(&a, 2).unwrap();
    assert!(matches!(
        f.ctx.add(&a, &b),
        Err(HeError::LevelMismatch { left: 4, right: 2 })
    ));
    let pt = f.ctx.encode(&[1.0], 4, 2f64.powi(30)).unwrap();
    let c = f.ctx.encrypt_fresh(&pt, &f.keys.public_key).unwrap();
    assert!(matches!(f.ctx.add(&a, &c), Err(HeError::ScaleMismatch { .. })));
}

#[test]
fn mul_matches_hadamard_product() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v = random_vec(&mut rng, 4096, 1.0);
    let w = random_vec(&mut rng, 4096, 1.0);
    let prod = f.ctx.mul(&enc(f, &v), &enc(f, &w), &f.keys.eval_keys).unwrap();
    assert_eq!(prod.level(), 3);
    let delta = f.ctx.default_scale();
    assert!(prod.scale() > delta / 2.0 && prod.scale() < delta * 2.0);
    let want: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a * b).collect();
    assert!(max_err(&dec(f, &prod), &want) <= 1e-2);

    let ones = enc(f, &vec![1.0; 4096]);
    let same = f.ctx.mul(&enc(f, &v), &ones, &f.keys.eval_keys).unwrap();
    assert!(max_err(&dec(f, &same), &v) <= 1e-2);
}

#[test]
fn level_accounting_and_exhaustion() {
    let f = fixture();
    let keys = &f.keys.eval_keys;
    let mut ct = enc(f, &[0.5, -0.25]);
    for expected in (0..4).rev() {
        ct = f.ctx.mul(&ct, &ct, keys).unwrap();
        assert_eq!(ct.level(), expected);
    }
    assert!(matches!(
        f.ctx.mul(&ct, &ct, keys),
        Err(HeError::NoLevelsRemaining { .. })
    ));
    let pt = f.ctx.encode(&[1.0], 0, ct.scale()).unwrap();
    assert!(matches!(
        f.ctx.mul_plain(&ct, &pt),
        Err(HeError::NoLevelsRemaining { .. })
    ));
    // The failed operations left the operand usable.
    let out = dec(f, &ct);
    assert!((out[0] - 0.5f64.powi(16)).abs() < 1e-2);
}

#[test]
fn mul_plain_scales_slots() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let v = random_vec(&mut rng, 4096, 1.0);
    let c = random_vec(&mut rng, 4096, 1.0);
    let ct = enc(f, &v);
    let prod = f.ctx.mul_plain(&ct, &f.ctx.encode_default(&c).unwrap()).unwrap();
    assert_eq!(prod.level(), 3);
    let want: Vec<f64> = v.iter().zip(&c).map(|(a, b)| a * b).collect();
    assert!(max_err(&dec(f, &prod), &want) <= 1e-2);

    let ident = f
        .ctx
        .mul_plain(&ct, &f.ctx.encode_default(&vec![1.0; 4096]).unwrap())
        .unwrap();
    assert!(max_err(&dec(f, &ident), &v) <= 1e-2);
}

fn shifted_left(v: &[f64], k: usize) -> Vec<f64> {
    (0..v.len()).map(|i| v[(i + k) % v.len()]).collect()
}

#[test]
fn rotate_shifts_left() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let v = random_vec(&mut rng, 4096, 1.0);
    let ct = enc(f, &v);
    let r1 = f.ctx.rotate(&ct, 1, &f.keys.eval_keys).unwrap();
    assert!(max_err(&dec(f, &r1), &shifted_left(&v, 1)) <= 2e-4);
    let r0 = f.ctx.rotate(&ct, 0, &f.keys.eval_keys).unwrap();
    assert_eq!(r0, ct);
    let neg = f.ctx.rotate(&ct, -3, &f.keys.eval_keys).unwrap();
    assert!(max_err(&dec(f, &neg), &shifted_left(&v, 4096 - 3)) <= 2e-4);
}

#[test]
fn rotation_composition() {
    let f = fixture();
    let keys = &f.keys.eval_keys;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let v = random_vec(&mut rng, 4096, 1.0);
    let ct = enc(f, &v);
    for (k1, k2) in [(3usize, 5usize), (100, 4000), (2047, 2049)] {
        let twice = f.ctx.rotate(&f.ctx.rotate(&ct, k1 as i64, keys).unwrap(), k2 as i64, keys).unwrap();
        let once = f.ctx.rotate(&ct, ((k1 + k2) % 4096) as i64, keys).unwrap();
        assert!(max_err(&dec(f, &twice), &dec(f, &once)) <= 4e-4);
        assert!(max_err(&dec(f, &twice), &shifted_left(&v, (k1 + k2) % 4096)) <= 4e-4);
    }
    for k in [1usize, 77, 2048] {
        let there = f.ctx.rotate(&ct, k as i64, keys).unwrap();
        let back = f.ctx.rotate(&there, (4096 - k) as i64, keys).unwrap();
        assert!(max_err(&dec(f, &back), &v) <= 4e-4);
    }
}

#[test]
fn rotate_without_key_fails() {
    let f = fixture();
    let mut keys = f.keys.eval_keys.clone();
    keys.retain_rotations(|step| step != 4);
    let ct = enc(f, &[1.0]);
    assert!(matches!(
        f.ctx.rotate(&ct, 4, &keys),
        Err(HeError::MissingRotationKey(4))
    ));
    assert!(matches!(
        f.ctx.rotate(&ct, 6, &keys),
        Err(HeError::MissingRotationKey(4))
    ));
}

#[test]
fn inner_product_cases() {
    let f = fixture();
    let keys = &f.keys.eval_keys;
    let x = enc(f, &[1.0, 2.0, 3.0]);
    let w = enc(f, &[4.0, 5.0, 6.0]);
    let ip = f.ctx.inner_product(&x, &w, 3, keys).unwrap();
    let oracle: f64 = [1.0, 2.0, 3.0].iter().zip([4.0, 5.0, 6.0]).map(|(a, b)| a * b).sum();
    assert!((dec(f, &ip)[0] - oracle).abs() <= 1e-2);

    let zero = f.ctx.inner_product(&x, &enc(f, &[0.0; 3]), 3, keys).unwrap();
    assert!(dec(f, &zero)[0].abs() <= 1e-2);

    let weights = [0.7, -1.3, 2.2, 0.1, -0.4, 1.9, -2.5];
    let w = enc(f, &weights);
    for (i, wi) in weights.iter().enumerate() {
        let mut e = [0.0; 7];
        e[i] = 1.0;
        let ip = f.ctx.inner_product(&enc(f, &e), &w, 7, keys).unwrap();
        assert!((dec(f, &ip)[0] - wi).abs() <= 1e-2, "basis {i}");
    }

    let wp = f.ctx.encode_default(&[4.0, 5.0, 6.0]).unwrap();
    let ipp = f.ctx.inner_product_plain(&x, &wp, 3, keys).unwrap();
    assert!((dec(f, &ipp)[0] - 32.0).abs() <= 1e-2);
}

#[test]
fn odd_cubic_evaluation() {
    let f = fixture();
    let keys = &f.keys.eval_keys;
    let poly = OddCubic { c0: 0.5, c1: 0.197, c3: -0.004 };
    let at_zero = f.ctx.eval_poly_odd(&enc(f, &[0.0; 8]), &poly, keys).unwrap();
    assert_eq!(at_zero.level(), 2);
    assert!(dec(f, &at_zero)[..8].iter().all(|y| (y - 0.5).abs() <= 1e-3));

    let at_two = f.ctx.eval_poly_odd(&enc(f, &[2.0; 8]), &poly, keys).unwrap();
    let want = 0.5 + 0.197 * 2.0 - 0.004 * 8.0;
    assert!(dec(f, &at_two)[..8].iter().all(|y| (y - want).abs() <= 1e-2));

    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let z = random_vec(&mut rng, 4096, 5.0);
    let out = dec(f, &f.ctx.eval_poly_odd(&enc(f, &z), &poly, keys).unwrap());
    let want: Vec<f64> = z.iter().map(|&x| poly.eval(x)).collect();
    assert!(max_err(&out, &want) <= 1e-2);
}

#[test]
fn odd_cubic_needs_two_levels() {
    let params = HeParams::generate(2048, 50, &[30], 51, 30);
    let keys = keygen(&params, Some(4)).unwrap();
    let ctx = CkksContext::new(params).unwrap();
    let pt = ctx.encode_default(&[1.0]).unwrap();
    let ct = ctx.encrypt_fresh(&pt, &keys.public_key).unwrap();
    let poly = OddCubic { c0: 0.5, c1: 0.2, c3: -0.004 };
    assert!(matches!(
        ctx.eval_poly_odd(&ct, &poly, &keys.eval_keys),
        Err(HeError::NoLevelsRemaining { needed: 2, available: 1 })
    ));
}

#[test]
fn serialization_roundtrips() {
    let f = fixture();
    let ct = enc(f, &[1.0, 2.0]);
    let bytes = ct.to_bytes();
    assert_eq!(&bytes[..4], b"HEC1");
    let back = Ciphertext::from_bytes(&bytes, &f.ctx).unwrap();
    assert_eq!(back, ct);
    assert_eq!(back.to_bytes(), bytes);

    let pt = f.ctx.encode(&[3.0], 2, 2f64.powi(35)).unwrap();
    let back = Plaintext::from_bytes(&pt.to_bytes(), &f.ctx).unwrap();
    assert_eq!(back, pt);

    let bundle_bytes = f.keys.to_bytes();
    let bundle = KeyBundle::from_bytes(&bundle_bytes).unwrap();
    assert_eq!(bundle, f.keys);
    assert_eq!(bundle.to_bytes(), bundle_bytes);

    let public = f.keys.public_context();
    let public_bytes = public.to_bytes();
    assert!(public_bytes.len() < bundle_bytes.len());
    assert_eq!(medclaim_ckks::PublicContext::from_bytes(&public_bytes).unwrap(), public);
}

#[test]
fn corrupt_ciphertext_bytes_are_rejected() {
    let f = fixture();
    let bytes = enc(f, &[1.0]).to_bytes();
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(Ciphertext::from_bytes(&bad_magic, &f.ctx), Err(HeError::Format(_))));
    assert!(Ciphertext::from_bytes(&bytes[..bytes.len() - 1], &f.ctx).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(Ciphertext::from_bytes(&trailing, &f.ctx).is_err());
}

#[test]
fn align_brings_operands_together() {
    let f = fixture();
    let keys = &f.keys.eval_keys;
    let a = enc(f, &[0.5]);
    let sq = f.ctx.mul(&a, &a, keys).unwrap();
    let b = enc(f, &[0.25]);
    let aligned = f.ctx.align(&b, sq.level(), sq.scale()).unwrap();
    assert_eq!(aligned.level(), sq.level());
    assert_eq!(aligned.scale(), sq.scale());
    let sum = f.ctx.add(&sq, &aligned).unwrap();
    assert!((dec(f, &sum)[0] - 0.5).abs() < 1e-3);
    let shifted = f.ctx.add_const(&sum, 1.25).unwrap();
    assert!((dec(f, &shifted)[0] - 1.75).abs() < 1e-3);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn small() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let params = HeParams::generate(2048, 50, &[35, 35], 51, 35);
            let keys = keygen(&params, Some(77)).unwrap();
            let ctx = CkksContext::new(params).unwrap();
            Fixture { ctx, keys }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ciphertext_bytes_roundtrip(v in prop::collection::vec(-10.0f64..10.0, 1..64)) {
            let f = small();
            let ct = enc(f, &v);
            let bytes = ct.to_bytes();
            let back = Ciphertext::from_bytes(&bytes, &f.ctx).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            prop_assert_eq!(back, ct);
        }

        #[test]
        fn plaintext_bytes_roundtrip(v in prop::collection::vec(-10.0f64..10.0, 0..64), level in 0usize..=2) {
            let f = small();
            let pt = f.ctx.encode(&v, level, f.ctx.default_scale()).unwrap();
            let back = Plaintext::from_bytes(&pt.to_bytes(), &f.ctx).unwrap();
            prop_assert_eq!(back, pt);
        }

        #[test]
        fn addition_is_homomorphic(
            v in prop::collection::vec(-1.0f64..1.0, 32),
            w in prop::collection::vec(-1.0f64..1.0, 32),
        ) {
            let f = small();
            let out = dec(f, &f.ctx.add(&enc(f, &v), &enc(f, &w)).unwrap());
            let want: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
            prop_assert!(max_err(&out[..32], &want) <= 2e-4);
        }

        #[test]
        fn rotation_inverse_recovers_input(v in prop::collection::vec(-1.0f64..1.0, 1024), k in 1usize..1024) {
            let f = small();
            let keys = &f.keys.eval_keys;
            let ct = enc(f, &v);
            let there = f.ctx.rotate(&ct, k as i64, keys).unwrap();
            let back = f.ctx.rotate(&there, (1024 - k) as i64, keys).unwrap();
            prop_assert!(max_err(&dec(f, &back), &v) <= 4e-4);
        }

        #[test]
        fn every_product_drops_one_level(v in prop::collection::vec(-1.0f64..1.0, 8)) {
            let f = small();
            let ct = enc(f, &v);
            let once = f.ctx.mul(&ct, &ct, &f.keys.eval_keys).unwrap();
            prop_assert_eq!(once.level(), ct.level() - 1);
            let pt = f.ctx.encode(&v, once.level(), f.ctx.default_scale()).unwrap();
            let twice = f.ctx.mul_plain(&once, &pt).unwrap();
            prop_assert_eq!(twice.level(), 0);
            let is_exhausted = matches!(
                f.ctx.mul(&twice, &twice, &f.keys.eval_keys),
                Err(HeError::NoLevelsRemaining { .. })
            );
            prop_assert!(is_exhausted);
        }
    }
}
