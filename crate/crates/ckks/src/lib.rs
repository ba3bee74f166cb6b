//! Leveled CKKS-style homomorphic encryption over `Z_q[X]/(X^N + 1)`.
//!
//! Polynomials are kept in residue-number-system form over a chain of
//! word-size NTT-friendly primes. Real vectors are encoded into `N/2` slots
//! through the canonical embedding; ciphertexts support addition,
//! multiplication with immediate rescaling, and slot rotation through
//! Galois automorphisms.
//!
//! ```no_run
//! use medclaim_ckks::{keygen, CkksContext, HeParams};
//!
//! let params = HeParams::default();
//! let keys = keygen(&params, Some(7)).unwrap();
//! let ctx = CkksContext::new(params).unwrap();
//! let pt = ctx.encode_default(&[1.0, 2.0, 3.0]).unwrap();
//! let ct = ctx.encrypt_fresh(&pt, &keys.public_key).unwrap();
//! let sq = ctx.mul(&ct, &ct, &keys.eval_keys).unwrap();
//! let out = ctx.decode(&ctx.decrypt(&sq, &keys.secret_key).unwrap());
//! assert!((out[2] - 9.0).abs() < 1e-3);
//! ```

pub mod arith;
mod ciphertext;
pub mod encoding;
mod error;
mod eval;
mod keys;
pub mod ntt;
mod par;
mod params;
mod poly;
mod sampling;
mod serial;

pub use ciphertext::{Ciphertext, Plaintext};
pub use error::{HeError, Result};
pub use eval::OddCubic;
pub use keys::{
    keygen, keygen_with_rng, rotation_steps, EvalKeys, KeyBundle, KeySwitchKey, PublicContext,
    PublicKey, SecretKey,
};
pub use params::{CkksContext, HeParams, ParamsId, MIN_RING_DIMENSION};
pub use sampling::CBD_ETA;
pub use serial::{MAGIC, VERSION};
