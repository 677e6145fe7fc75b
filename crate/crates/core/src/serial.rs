//! File formats: binary key serialization and the token-sequence text
//! format.
//!
//! Key format (all integers little-endian):
//!
//! ```text
//! magic "TMWK" | u16 version=1
//! u32 n | u32 block_len | u64 max_len | u32 vocab_size | u32 growth_factor
//! u32 num_hash_seeds | num_hash_seeds x (u128 seed, u32 block_index)
//! code key blob:
//!   u8 variant (0 = oracle, 1 = ldpc) | u32 code_len | f64 alpha
//!   calibration: f64 achieved_fpr | u64 trials | u64 seed | u8 analytic
//!   oracle: u32 num_codewords | u32 tau_sub
//!           u8 has_align [f64 del_rate | f64 err_rate | f64 tau_llr(NaN=unset)
//!                         | u64 len_lo | u64 len_hi]
//!           codewords as ceil(code_len/64) u64 words each
//!   ldpc:   u32 row_weight | u32 num_rows | u32 tau_satisfied
//!           rows as num_rows x row_weight u32 column indices
//! ```
//!
//! Token sequences are text: a header line `vocab_size max_len block_len`
//! followed by one token id per line.

use std::io::{Read, Write};

use crate::bits::BitVec;
use crate::hash::BlockHash;
use crate::prc::align::AlignModel;
use crate::prc::oracle::AlignState;
use crate::prc::{CalibrationInfo, LdpcKey, OracleKey, PrcKey};
use crate::token::Token;
use crate::watermark::{WatermarkKey, WmParams};
use crate::{Error, Result};

const KEY_MAGIC: &[u8; 4] = b"TMWK";
const KEY_VERSION: u16 = 1;

pub fn write_key<W: Write>(w: &mut W, key: &WatermarkKey) -> Result<()> {
    w.write_all(KEY_MAGIC)?;
    w.write_all(&KEY_VERSION.to_le_bytes())?;
    w.write_all(&key.params.n.to_le_bytes())?;
    w.write_all(&key.params.block_len.to_le_bytes())?;
    w.write_all(&key.params.max_len.to_le_bytes())?;
    w.write_all(&key.params.vocab_size.to_le_bytes())?;
    w.write_all(&key.params.growth_factor.to_le_bytes())?;
    w.write_all(&(key.hash_seeds.len() as u32).to_le_bytes())?;
    for h in &key.hash_seeds {
        w.write_all(&h.seed.to_le_bytes())?;
        w.write_all(&h.block_index.to_le_bytes())?;
    }
    write_prc(w, &key.prc)
}

fn write_prc<W: Write>(w: &mut W, prc: &PrcKey) -> Result<()> {
    match prc {
        PrcKey::Oracle(k) => {
            w.write_all(&[0u8])?;
            w.write_all(&(k.code_len as u32).to_le_bytes())?;
            w.write_all(&k.alpha.to_le_bytes())?;
            write_calib(w, &k.calib)?;
            w.write_all(&(k.codewords.len() as u32).to_le_bytes())?;
            w.write_all(&(k.tau_sub as u32).to_le_bytes())?;
            match &k.align {
                None => w.write_all(&[0u8])?,
                Some(a) => {
                    w.write_all(&[1u8])?;
                    w.write_all(&a.model.del_rate.to_le_bytes())?;
                    w.write_all(&a.model.err_rate.to_le_bytes())?;
                    w.write_all(&a.tau_llr.unwrap_or(f64::NAN).to_le_bytes())?;
                    w.write_all(&(a.len_range.0 as u64).to_le_bytes())?;
                    w.write_all(&(a.len_range.1 as u64).to_le_bytes())?;
                }
            }
            for cw in &k.codewords {
                for word in cw.words() {
                    w.write_all(&word.to_le_bytes())?;
                }
            }
            Ok(())
        }
        PrcKey::Ldpc(k) => {
            w.write_all(&[1u8])?;
            w.write_all(&(k.code_len as u32).to_le_bytes())?;
            w.write_all(&k.alpha.to_le_bytes())?;
            write_calib(w, &k.calib)?;
            w.write_all(&(k.row_weight as u32).to_le_bytes())?;
            w.write_all(&(k.rows.len() as u32).to_le_bytes())?;
            w.write_all(&(k.tau_satisfied as u32).to_le_bytes())?;
            for row in &k.rows {
                for &c in row {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            Ok(())
        }
    }
}

fn write_calib<W: Write>(w: &mut W, c: &CalibrationInfo) -> Result<()> {
    w.write_all(&c.alpha.to_le_bytes())?;
    w.write_all(&c.achieved_fpr.to_le_bytes())?;
    w.write_all(&c.trials.to_le_bytes())?;
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&[u8::from(c.analytic)])?;
    Ok(())
}

pub fn read_key<R: Read>(r: &mut R) -> Result<WatermarkKey> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != KEY_MAGIC {
        return Err(Error::Malformed("bad key magic".into()));
    }
    if read_u16(r)? != KEY_VERSION {
        return Err(Error::Malformed("unsupported key version".into()));
    }
    let params = WmParams {
        n: read_u32(r)?,
        block_len: read_u32(r)?,
        max_len: read_u64(r)?,
        vocab_size: read_u32(r)?,
        growth_factor: read_u32(r)?,
    };
    let num_seeds = read_u32(r)? as usize;
    let mut hash_seeds = Vec::with_capacity(num_seeds);
    for _ in 0..num_seeds {
        hash_seeds.push(BlockHash {
            seed: read_u128(r)?,
            block_index: read_u32(r)?,
        });
    }
    let prc = read_prc(r)?;
    Ok(WatermarkKey {
        params,
        prc,
        hash_seeds,
    })
}

fn read_prc<R: Read>(r: &mut R) -> Result<PrcKey> {
    let variant = read_u8(r)?;
    let code_len = read_u32(r)? as usize;
    let alpha = read_f64(r)?;
    let calib = CalibrationInfo {
        alpha: read_f64(r)?,
        achieved_fpr: read_f64(r)?,
        trials: read_u64(r)?,
        seed: read_u64(r)?,
        analytic: read_u8(r)? != 0,
    };
    match variant {
        0 => {
            let num_cw = read_u32(r)? as usize;
            let tau_sub = read_u32(r)? as usize;
            let align = if read_u8(r)? != 0 {
                let model = AlignModel {
                    del_rate: read_f64(r)?,
                    err_rate: read_f64(r)?,
                };
                let tau = read_f64(r)?;
                let lo = read_u64(r)? as usize;
                let hi = read_u64(r)? as usize;
                Some(AlignState {
                    model,
                    tau_llr: if tau.is_nan() { None } else { Some(tau) },
                    len_range: (lo, hi),
                })
            } else {
                None
            };
            let words_per = code_len.div_ceil(64);
            let mut codewords = Vec::with_capacity(num_cw);
            for _ in 0..num_cw {
                let mut words = Vec::with_capacity(words_per);
                for _ in 0..words_per {
                    words.push(read_u64(r)?);
                }
                codewords.push(BitVec::from_words(words, code_len));
            }
            Ok(PrcKey::Oracle(OracleKey {
                code_len,
                alpha,
                codewords,
                tau_sub,
                align,
                calib,
            }))
        }
        1 => {
            let row_weight = read_u32(r)? as usize;
            let num_rows = read_u32(r)? as usize;
            let tau_satisfied = read_u32(r)? as usize;
            let mut rows = Vec::with_capacity(num_rows);
            for _ in 0..num_rows {
                let mut row = Vec::with_capacity(row_weight);
                for _ in 0..row_weight {
                    let c = read_u32(r)?;
                    if c as usize >= code_len {
                        return Err(Error::Malformed("parity column out of range".into()));
                    }
                    row.push(c);
                }
                rows.push(row);
            }
            let mut key = LdpcKey {
                code_len,
                alpha,
                row_weight,
                rows,
                tau_satisfied,
                calib,
                solver: None,
            };
            key.ensure_solver();
            Ok(PrcKey::Ldpc(key))
        }
        v => Err(Error::Malformed(format!("unknown code variant {v}"))),
    }
}

pub fn write_tokens<W: Write>(
    w: &mut W,
    tokens: &[Token],
    vocab_size: u32,
    max_len: u64,
    block_len: u32,
) -> Result<()> {
    writeln!(w, "{vocab_size} {max_len} {block_len}")?;
    for t in tokens {
        writeln!(w, "{}", t.id())?;
    }
    Ok(())
}

/// Header of a token-sequence file: `(vocab_size, max_len, block_len)`.
pub type TokenHeader = (u32, u64, u32);

pub fn read_tokens<R: Read>(r: &mut R) -> Result<(Vec<Token>, TokenHeader)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty token file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Malformed(
            "header must be `vocab_size max_len block_len`".into(),
        ));
    }
    let vocab_size: u32 = fields[0]
        .parse()
        .map_err(|_| Error::Malformed("bad vocab_size".into()))?;
    let max_len: u64 = fields[1]
        .parse()
        .map_err(|_| Error::Malformed("bad max_len".into()))?;
    let block_len: u32 = fields[2]
        .parse()
        .map_err(|_| Error::Malformed("bad block_len".into()))?;
    let mut tokens = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let id: u32 = line
            .parse()
            .map_err(|_| Error::Malformed(format!("bad token id `{line}`")))?;
        if id >= vocab_size {
            return Err(Error::Malformed(format!(
                "token id {id} outside vocab of size {vocab_size}"
            )));
        }
        tokens.push(Token(id));
    }
    Ok((tokens, (vocab_size, max_len, block_len)))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u128<R: Read>(r: &mut R) -> Result<u128> {
    let mut b = [0u8; 16];
    r.read_exact(&mut b)?;
    Ok(u128::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prc::PrcVariant;
    use crate::watermark::wm_gen;

    #[test]
    fn oracle_key_roundtrip() {
        let params = WmParams::new(2, 64, 512, 5);
        let key = wm_gen(
            params,
            1e-2,
            PrcVariant::Oracle {
                num_codewords: 3,
                align: Some(AlignModel {
                    del_rate: 0.25,
                    err_rate: 0.3,
                }),
            },
            13,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_key(&mut buf, &key).unwrap();
        let back = read_key(&mut buf.as_slice()).unwrap();
        assert_eq!(back, key);
    }

    #[test]
    fn ldpc_key_roundtrip_restores_solver() {
        let params = WmParams::new(2, 128, 512, 5);
        let key = wm_gen(
            params,
            1e-2,
            PrcVariant::Ldpc {
                row_weight: 3,
                num_rows: 64,
            },
            14,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_key(&mut buf, &key).unwrap();
        let back = read_key(&mut buf.as_slice()).unwrap();
        assert_eq!(back, key);
        let PrcKey::Ldpc(k) = &back.prc else {
            unreachable!()
        };
        let mut rng = crate::rng::derive_rng(99, &[]);
        let cw = k.encode(&mut rng);
        assert_eq!(k.satisfied_count(&cw), 64);
    }

    #[test]
    fn token_file_roundtrip() {
        let tokens = vec![Token(0), Token(3), Token(2)];
        let mut buf = Vec::new();
        write_tokens(&mut buf, &tokens, 4, 16, 8).unwrap();
        let (back, header) = read_tokens(&mut buf.as_slice()).unwrap();
        assert_eq!(back, tokens);
        assert_eq!(header, (4, 16, 8));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_tokens(&mut "".as_bytes()).is_err());
        assert!(read_tokens(&mut "4 16".as_bytes()).is_err());
        assert!(read_tokens(&mut "4 16 8\n9\n".as_bytes()).is_err());
        assert!(read_key(&mut b"XXXX".as_slice()).is_err());
    }
}
