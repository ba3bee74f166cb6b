use std::fmt;
use std::str::FromStr;

use medclaim_ckks::{Ciphertext, CkksContext, EvalKeys, HeError, OddCubic, Plaintext, PublicKey};
use serde::{Deserialize, Serialize};

use super::{ModelError, ModelWeights};
use crate::record::FEATURE_COUNT;

/// Multiplicative depth of the scoring circuit: one for the dot product,
/// two for the cubic.
pub const CIRCUIT_DEPTH: usize = 3;

const MAGIC: &[u8; 4] = b"EMD1";
const VERSION: u16 = 1;

/// Whether the server holds the weights encrypted or merely encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeightMode {
    #[default]
    #[serde(rename = "ct-ct")]
    CtCt,
    #[serde(rename = "ct-pt")]
    CtPt,
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightMode::CtCt => "ct-ct",
            WeightMode::CtPt => "ct-pt",
        })
    }
}

impl FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ct-ct" => Ok(WeightMode::CtCt),
            "ct-pt" => Ok(WeightMode::CtPt),
            other => Err(format!("unknown weight mode {other:?} (expected ct-ct or ct-pt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Weights {
    Cipher { beta: Ciphertext, intercept: Ciphertext },
    Plain { beta: Plaintext, intercept: f64 },
}

/// Server-side model: packed weights plus the public circuit constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedModel {
    weights: Weights,
    pub sigmoid: OddCubic,
    pub fit_interval: f64,
}

impl EncryptedModel {
    pub fn mode(&self) -> WeightMode {
        match self.weights {
            Weights::Cipher { .. } => WeightMode::CtCt,
            Weights::Plain { .. } => WeightMode::CtPt,
        }
    }

    pub fn beta_ciphertext(&self) -> Option<&Ciphertext> {
        match &self.weights {
            Weights::Cipher { beta, .. } => Some(beta),
            Weights::Plain { .. } => None,
        }
    }

    pub fn beta_plaintext(&self) -> Option<&Plaintext> {
        match &self.weights {
            Weights::Plain { beta, .. } => Some(beta),
            Weights::Cipher { .. } => None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.mode() {
            WeightMode::CtCt => 0,
            WeightMode::CtPt => 1,
        });
        for v in [self.sigmoid.c0, self.sigmoid.c1, self.sigmoid.c3, self.fit_interval] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut blob = |bytes: Vec<u8>| {
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        };
        match &self.weights {
            Weights::Cipher { beta, intercept } => {
                blob(beta.to_bytes());
                blob(intercept.to_bytes());
            }
            Weights::Plain { beta, intercept } => {
                blob(beta.to_bytes());
                blob(intercept.to_le_bytes().to_vec());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], ctx: &CkksContext) -> Result<Self, ModelError> {
        let bad = |msg: &str| ModelError::Format(format!("encrypted model: {msg}"));
        let mut rest = bytes;
        let mut take = |n: usize| -> Result<&[u8], ModelError> {
            if rest.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mode = take(1)?[0];
        let mut f = [0.0; 4];
        for v in f.iter_mut() {
            *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        let mut blob = || -> Result<&[u8], ModelError> {
            let len = u64::from_le_bytes(take(8)?.try_into().unwrap());
            take(usize::try_from(len).map_err(|_| bad("length overflow"))?)
        };
        let weights = match mode {
            0 => Weights::Cipher {
                beta: Ciphertext::from_bytes(blob()?, ctx)?,
                intercept: Ciphertext::from_bytes(blob()?, ctx)?,
            },
            1 => {
                let beta = Plaintext::from_bytes(blob()?, ctx)?;
                let raw: [u8; 8] = blob()?.try_into().map_err(|_| bad("intercept width"))?;
                Weights::Plain {
                    beta,
                    intercept: f64::from_le_bytes(raw),
                }
            }
            m => return Err(bad(&format!("unknown mode {m}"))),
        };
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            weights,
            sigmoid: OddCubic {
                c0: f[0],
                c1: f[1],
                c3: f[2],
            },
            fit_interval: f[3],
        })
    }
}

/// Packs `beta` into slots `0..7` (the feature layout) and the intercept
/// into slot 0, at the top of the modulus chain.
pub fn encrypt_model(
    weights: &ModelWeights,
    ctx: &CkksContext,
    pk: &PublicKey,
    mode: WeightMode,
) -> Result<EncryptedModel, ModelError> {
    ctx.params().require_depth(CIRCUIT_DEPTH)?;
    if pk.params_id() != ctx.id() {
        return Err(HeError::KeyParamsMismatch.into());
    }
    let beta = ctx.encode_default(&weights.beta)?;
    let weights_enc = match mode {
        WeightMode::CtCt => {
            let intercept = ctx.encode_default(&[weights.intercept])?;
            Weights::Cipher {
                beta: ctx.encrypt_fresh(&beta, pk)?,
                intercept: ctx.encrypt_fresh(&intercept, pk)?,
            }
        }
        WeightMode::CtPt => Weights::Plain {
            beta,
            intercept: weights.intercept,
        },
    };
    Ok(EncryptedModel {
        weights: weights_enc,
        sigmoid: weights.sigmoid.cubic(),
        fit_interval: weights.sigmoid.interval,
    })
}

/// Scores an encrypted, standardized feature vector. Slot 0 of the result
/// decrypts to `c0 + c1*z + c3*z^3` with `z = beta . x + b`.
///
/// Takes only public evaluation material: there is no way to pass a secret
/// key here.
pub fn predict_encrypted(
    ctx: &CkksContext,
    enc_x: &Ciphertext,
    model: &EncryptedModel,
    keys: &EvalKeys,
) -> Result<Ciphertext, ModelError> {
    if enc_x.level() < CIRCUIT_DEPTH {
        return Err(HeError::NoLevelsRemaining {
            needed: CIRCUIT_DEPTH,
            available: enc_x.level(),
        }
        .into());
    }
    let score = match &model.weights {
        Weights::Cipher { beta, intercept } => {
            let beta = if beta.level() > enc_x.level() {
                ctx.mod_drop(beta, enc_x.level())?
            } else {
                beta.clone()
            };
            let dot = ctx.inner_product(enc_x, &beta, FEATURE_COUNT, keys)?;
            let b = ctx.align(intercept, dot.level(), dot.scale())?;
            ctx.add(&dot, &b)?
        }
        Weights::Plain { beta, intercept } => {
            let dot = ctx.inner_product_plain(enc_x, beta, FEATURE_COUNT, keys)?;
            ctx.add_const(&dot, *intercept)?
        }
    };
    Ok(ctx.eval_poly_odd(&score, &model.sigmoid, keys)?)
}

/// [`predict_encrypted`] over many claims; runs across threads when the
/// `parallel` feature is on. Results keep input order.
pub fn predict_encrypted_batch(
    ctx: &CkksContext,
    batch: &[Ciphertext],
    model: &EncryptedModel,
    keys: &EvalKeys,
) -> Vec<Result<Ciphertext, ModelError>> {
    crate::par::map_slice(batch, |x| predict_encrypted(ctx, x, model, keys))
}
