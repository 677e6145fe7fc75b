//! Stored-codeword zero-bit code.
//!
//! The key holds a handful of independently drawn codewords; encoding picks
//! one uniformly, decoding reports a hit when any stored codeword agrees
//! with the input beyond a calibrated threshold. For shortened inputs the
//! marginalized alignment score takes over. Maximally robust against
//! substitutions, which is what lets the embedding layer be validated
//! against its exact hypotheses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::prc::align::{llr_score, AlignModel};
use crate::prc::{CalibrationInfo, Detection};
use crate::{Error, Result};

/// Alignment decoding state; `tau_llr` stays unset until calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignState {
    pub model: AlignModel,
    pub tau_llr: Option<f64>,
    /// Window lengths the alignment path accepts (inclusive bounds).
    pub len_range: (usize, usize),
}

impl AlignState {
    pub fn new(code_len: usize, model: AlignModel) -> Self {
        let expected = ((1.0 - model.del_rate) * code_len as f64).round() as usize;
        let lo = ((expected as f64) * 0.6).floor().max(8.0) as usize;
        let hi = (((expected as f64) * 1.4).ceil() as usize).min(code_len - 1);
        AlignState {
            model,
            tau_llr: None,
            len_range: (lo.min(hi), hi),
        }
    }

    /// The grid of window lengths used for null calibration.
    pub fn calibration_lengths(&self) -> Vec<usize> {
        let (lo, hi) = self.len_range;
        let mut v: Vec<usize> = (0..5)
            .map(|i| lo + (hi - lo) * i / 4)
            .collect();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleKey {
    pub code_len: usize,
    pub alpha: f64,
    pub codewords: Vec<BitVec>,
    /// Agreement-count threshold for equal-length inputs.
    pub tau_sub: usize,
    pub align: Option<AlignState>,
    pub calib: CalibrationInfo,
}

impl OracleKey {
    pub fn generate<R: Rng + ?Sized>(
        code_len: usize,
        num_codewords: usize,
        align: Option<AlignModel>,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if num_codewords == 0 {
            return Err(Error::InvalidParams("need at least one codeword".into()));
        }
        let codewords = (0..num_codewords)
            .map(|_| BitVec::random(rng, code_len))
            .collect();
        let tau_sub = crate::prc::num::invert_binom_threshold(code_len, num_codewords, alpha)
            .ok_or(Error::CodeTooShort)?;
        Ok(OracleKey {
            code_len,
            alpha,
            codewords,
            tau_sub,
            align: align.map(|m| AlignState::new(code_len, m)),
            calib: CalibrationInfo::analytic(alpha),
        })
    }

    pub fn encode<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        let idx = rng.random_range(0..self.codewords.len());
        self.codewords[idx].clone()
    }

    pub fn decode(&self, bits: &BitVec) -> Result<Option<Detection>> {
        if bits.is_empty() {
            return Err(Error::EmptyInput);
        }
        if bits.len() > self.code_len {
            return Err(Error::OverlongBlock {
                input: bits.len(),
                code_len: self.code_len,
            });
        }
        if bits.len() == self.code_len {
            let (mut best, mut best_idx) = (0usize, 0usize);
            for (i, cw) in self.codewords.iter().enumerate() {
                let a = bits.agreement(cw);
                if a > best {
                    best = a;
                    best_idx = i;
                }
            }
            if best >= self.tau_sub {
                return Ok(Some(Detection {
                    score: best as f64,
                    codeword_index: best_idx,
                }));
            }
            return Ok(None);
        }
        // Shortened input: alignment path, when configured and calibrated.
        let Some(align) = &self.align else {
            return Ok(None);
        };
        let Some(tau) = align.tau_llr else {
            return Ok(None);
        };
        let (lo, hi) = align.len_range;
        if bits.len() < lo || bits.len() > hi {
            return Ok(None);
        }
        let (mut best, mut best_idx) = (f64::NEG_INFINITY, 0usize);
        for (i, cw) in self.codewords.iter().enumerate() {
            let s = llr_score(bits, cw, &align.model);
            if s > best {
                best = s;
                best_idx = i;
            }
        }
        if best >= tau {
            Ok(Some(Detection {
                score: best,
                codeword_index: best_idx,
            }))
        } else {
            Ok(None)
        }
    }

    /// Null score of one uniform probe at the given window length.
    pub fn null_align_score<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> f64 {
        let align = self.align.as_ref().expect("alignment not configured");
        let w = BitVec::random(rng, len);
        self.codewords
            .iter()
            .map(|cw| llr_score(&w, cw, &align.model))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn shape_and_determinism() {
        let mut rng = derive_rng(1, &[]);
        let k = OracleKey::generate(256, 4, None, 1e-3, &mut rng).unwrap();
        assert_eq!(k.codewords.len(), 4);
        assert!(k.codewords.iter().all(|c| c.len() == 256));
        let mut rng2 = derive_rng(1, &[]);
        let k2 = OracleKey::generate(256, 4, None, 1e-3, &mut rng2).unwrap();
        assert_eq!(k, k2);
    }

    #[test]
    fn zero_noise_roundtrip() {
        let mut rng = derive_rng(2, &[]);
        let k = OracleKey::generate(128, 3, None, 1e-2, &mut rng).unwrap();
        for _ in 0..20 {
            let c = k.encode(&mut rng);
            assert!(k.decode(&c).unwrap().is_some());
        }
    }

    #[test]
    fn rejects_overlong_and_empty() {
        let mut rng = derive_rng(3, &[]);
        let k = OracleKey::generate(64, 1, None, 0.5, &mut rng).unwrap();
        let long = BitVec::zeros(65);
        assert!(matches!(
            k.decode(&long),
            Err(Error::OverlongBlock { .. })
        ));
        assert!(matches!(k.decode(&BitVec::zeros(0)), Err(Error::EmptyInput)));
    }

    #[test]
    fn shorter_input_without_alignment_is_bottom() {
        let mut rng = derive_rng(4, &[]);
        let k = OracleKey::generate(64, 1, None, 0.5, &mut rng).unwrap();
        assert!(k.decode(&BitVec::zeros(32)).unwrap().is_none());
    }
}
