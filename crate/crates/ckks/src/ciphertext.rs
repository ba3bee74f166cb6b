use crate::error::{HeError, Result};
use crate::params::{CkksContext, ParamsId};
use crate::poly::RnsPoly;
use crate::serial::{Kind, Reader, Writer};

/// Encoded message: coefficient-form polynomial over the chain prefix
/// `0..=level`, tagged with the scale it was encoded at.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaintext {
    pub(crate) params_id: ParamsId,
    pub(crate) poly: RnsPoly,
    pub(crate) level: usize,
    pub(crate) scale: f64,
}

/// RLWE ciphertext `(c0, c1)` with `c0 + c1*s ≈ m`, coefficient form over the
/// chain prefix `0..=level`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) params_id: ParamsId,
    pub(crate) c0: RnsPoly,
    pub(crate) c1: RnsPoly,
    pub(crate) level: usize,
    pub(crate) scale: f64,
}

impl Plaintext {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn params_id(&self) -> ParamsId {
        self.params_id
    }

    /// Whether every residue is zero.
    pub fn is_zero(&self) -> bool {
        self.poly.limbs.iter().all(|l| l.iter().all(|&x| x == 0))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Plaintext);
        w.put_bytes(&self.params_id.0);
        w.put_u32(self.level as u32);
        w.put_f64(self.scale);
        w.put_poly(&self.poly);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8], ctx: &CkksContext) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Plaintext)?;
        let params_id = read_id(&mut r, ctx)?;
        let level = r.get_u32()? as usize;
        let scale = read_scale(&mut r)?;
        ctx.check_level(level).map_err(|e| HeError::Format(e.to_string()))?;
        let poly = r.get_poly()?;
        poly.check_shape(ctx, &ctx.level_basis(level))?;
        r.finish()?;
        Ok(Self {
            params_id,
            poly,
            level,
            scale,
        })
    }
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn params_id(&self) -> ParamsId {
        self.params_id
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Ciphertext);
        w.put_bytes(&self.params_id.0);
        w.put_u32(self.level as u32);
        w.put_f64(self.scale);
        w.put_poly(&self.c0);
        w.put_poly(&self.c1);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8], ctx: &CkksContext) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Ciphertext)?;
        let params_id = read_id(&mut r, ctx)?;
        let level = r.get_u32()? as usize;
        let scale = read_scale(&mut r)?;
        ctx.check_level(level).map_err(|e| HeError::Format(e.to_string()))?;
        let basis = ctx.level_basis(level);
        let c0 = r.get_poly()?;
        c0.check_shape(ctx, &basis)?;
        let c1 = r.get_poly()?;
        c1.check_shape(ctx, &basis)?;
        r.finish()?;
        Ok(Self {
            params_id,
            c0,
            c1,
            level,
            scale,
        })
    }
}

fn read_id(r: &mut Reader<'_>, ctx: &CkksContext) -> Result<ParamsId> {
    let mut id = [0u8; 8];
    id.copy_from_slice(r.get_bytes(8)?);
    if ParamsId(id) != ctx.id() {
        return Err(HeError::KeyParamsMismatch);
    }
    Ok(ParamsId(id))
}

fn read_scale(r: &mut Reader<'_>) -> Result<f64> {
    let scale = r.get_f64()?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(HeError::Format(format!("invalid scale {scale}")));
    }
    Ok(scale)
}
