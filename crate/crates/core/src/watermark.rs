//! The watermarking protocol: key generation, embedding via paired samples,
//! and window-scanning detection.
//!
//! Embedding never biases the output: each step draws two independent
//! candidates from the model's next-token distribution and emits one of
//! them. When their block-hash bits differ, the emitted candidate is the one
//! matching the current codeword bit (a "success" step, which pins the hash
//! of the output to the code); when they agree, a fair coin picks (a
//! "failure" step, which matches the codeword bit only by chance).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::hash::{hash_sample, BlockHash};
use crate::model::{ModelSpec, StepRecord, Transcript};
use crate::prc::{prc_decode, prc_encode, PrcKey, PrcParams, PrcVariant};
use crate::rng::{derive_rng, tag_str};
use crate::token::Token;
use crate::{Error, Result};

/// Watermark-layer parameters. `max_len >= growth_factor * n * block_len`
/// keeps enough complete blocks inside any half-length substring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmParams {
    pub n: u32,
    pub block_len: u32,
    pub max_len: u64,
    pub vocab_size: u32,
    pub growth_factor: u32,
}

impl WmParams {
    pub fn new(n: u32, block_len: u32, max_len: u64, vocab_size: u32) -> Self {
        WmParams {
            n,
            block_len,
            max_len,
            vocab_size,
            growth_factor: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.growth_factor < 2 {
            return Err(Error::InvalidParams("growth_factor must be >= 2".into()));
        }
        let need = u64::from(self.growth_factor) * u64::from(self.n) * u64::from(self.block_len);
        if self.max_len < need {
            return Err(Error::InvalidParams(format!(
                "max_len {} below growth_factor*n*block_len = {need}",
                self.max_len
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidParams("vocab_size must be >= 2".into()));
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> u32 {
        self.max_len.div_ceil(u64::from(self.block_len)) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkKey {
    pub params: WmParams,
    pub prc: PrcKey,
    pub hash_seeds: Vec<BlockHash>,
}

/// Generate the secret state: a code key plus one hash per block.
pub fn wm_gen(
    params: WmParams,
    alpha: f64,
    variant: PrcVariant,
    master_seed: u64,
) -> Result<WatermarkKey> {
    params.validate()?;
    let prc_params = PrcParams {
        n: params.n,
        code_len: params.block_len,
        alpha,
        variant,
    };
    let prc = crate::prc::prc_gen(&prc_params, master_seed ^ tag_str("prc"))?;
    let hash_seeds = (0..params.num_blocks())
        .map(|i| hash_sample(master_seed, i))
        .collect();
    Ok(WatermarkKey {
        params,
        prc,
        hash_seeds,
    })
}

/// Which codeword bits drive the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbedMode {
    /// Codewords drawn from the key's code.
    Standard,
    /// Fresh uniform bits per block; the ideal-world reference used by the
    /// undetectability experiments.
    IdealCodeword,
}

/// Watermarked generation. Output length is exactly `max_len`; steps after
/// the terminator keep flowing through the embedding loop as zero-entropy
/// failure steps, which realizes End-padding.
pub fn wm_generate(
    key: &WatermarkKey,
    model: &ModelSpec,
    prompt: &str,
    seed: u64,
) -> Result<(Vec<Token>, Transcript)> {
    wm_generate_with(key, model, prompt, seed, EmbedMode::Standard)
}

pub fn wm_generate_with(
    key: &WatermarkKey,
    model: &ModelSpec,
    prompt: &str,
    seed: u64,
    mode: EmbedMode,
) -> Result<(Vec<Token>, Transcript)> {
    if model.vocab.size() != key.params.vocab_size {
        return Err(Error::VocabMismatch(format!(
            "model vocab {} vs key vocab {}",
            model.vocab.size(),
            key.params.vocab_size
        )));
    }
    if model.max_len != key.params.max_len {
        return Err(Error::VocabMismatch(format!(
            "model max_len {} vs key max_len {}",
            model.max_len, key.params.max_len
        )));
    }
    let block_len = key.params.block_len as usize;
    let m = key.params.max_len as usize;
    let mut rng = derive_rng(seed, &[tag_str("wm-generate"), tag_str(prompt)]);
    let mut tokens = Vec::with_capacity(m);
    let mut transcript = Transcript::default();

    let mut block = 0u32;
    let mut codeword = next_codeword(key, mode, &mut rng);
    let mut hash = key.hash_seeds[0];
    for pos in 0..m {
        let i = pos % block_len;
        if pos > 0 && i == 0 {
            block += 1;
            codeword = next_codeword(key, mode, &mut rng);
            hash = key.hash_seeds[block as usize];
        }
        let dist = model.next_dist(prompt, &tokens)?;
        let t0 = dist.sample(&mut rng);
        let t1 = dist.sample(&mut rng);
        let (b0, b1) = (hash.eval(t0), hash.eval(t1));
        let ci = codeword.get(i);
        let (t, success) = if b0 != b1 {
            (if b0 == ci { t0 } else { t1 }, true)
        } else {
            (if rng.random_bool(0.5) { t1 } else { t0 }, false)
        };
        transcript.steps.push(StepRecord {
            position: pos as u64,
            token: t,
            entropy_bits: dist.empirical_entropy(t)?,
            block_index: Some(block),
            pair: Some((t0, t1)),
            success: Some(success),
            prc_bit: Some(ci),
            hash_bit: Some(hash.eval(t)),
        });
        tokens.push(t);
    }
    Ok((tokens, transcript))
}

fn next_codeword(key: &WatermarkKey, mode: EmbedMode, rng: &mut impl Rng) -> BitVec {
    match mode {
        EmbedMode::Standard => prc_encode(&key.prc, rng).0,
        EmbedMode::IdealCodeword => BitVec::random(rng, key.params.block_len as usize),
    }
}

/// Diagnostic embedding with a fresh hash and a fresh uniform codeword bit
/// at every step. Exists solely to measure the per-step success constants;
/// it has no detection counterpart (reusing a hash per block is what makes
/// shortened-window detection possible at all). Returns the master seed the
/// per-step hashes derive from, so callers can re-evaluate hashes after a
/// position-preserving channel.
pub fn wm_generate_fresh_hash(
    model: &ModelSpec,
    prompt: &str,
    seed: u64,
) -> Result<(Vec<Token>, Transcript, u64)> {
    let m = model.max_len as usize;
    let mut rng = derive_rng(seed, &[tag_str("wm-fresh-hash"), tag_str(prompt)]);
    let hash_master = rng.random::<u64>();
    let mut tokens = Vec::with_capacity(m);
    let mut transcript = Transcript::default();
    for pos in 0..m {
        let hash = hash_sample(hash_master, pos as u32);
        let ci = rng.random_bool(0.5);
        let dist = model.next_dist(prompt, &tokens)?;
        let t0 = dist.sample(&mut rng);
        let t1 = dist.sample(&mut rng);
        let (b0, b1) = (hash.eval(t0), hash.eval(t1));
        let (t, success) = if b0 != b1 {
            (if b0 == ci { t0 } else { t1 }, true)
        } else {
            (if rng.random_bool(0.5) { t1 } else { t0 }, false)
        };
        transcript.steps.push(StepRecord {
            position: pos as u64,
            token: t,
            entropy_bits: dist.empirical_entropy(t)?,
            block_index: None,
            pair: Some((t0, t1)),
            success: Some(success),
            prc_bit: Some(ci),
            hash_bit: Some(hash.eval(t)),
        });
        tokens.push(t);
    }
    Ok((tokens, transcript, hash_master))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectMode {
    /// The full window scan: every start, every end within `block_len`,
    /// every hash index.
    Exhaustive,
    /// Block-aligned windows with a small hash band; hits are a subset of
    /// the exhaustive scan's.
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectHit {
    /// Half-open token window that decoded.
    pub start: usize,
    pub end: usize,
    pub hash_index: usize,
    pub score: f64,
    pub codeword_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub detected: bool,
    pub hit: Option<DetectHit>,
    pub decode_calls: u64,
    pub mode: DetectMode,
}

/// Scan a token sequence for the watermark.
pub fn wm_detect(key: &WatermarkKey, tokens: &[Token], mode: DetectMode) -> Result<DetectReport> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    match mode {
        DetectMode::Exhaustive => detect_exhaustive(key, tokens),
        DetectMode::Fast => detect_fast(key, tokens),
    }
}

fn detect_exhaustive(key: &WatermarkKey, tokens: &[Token]) -> Result<DetectReport> {
    let len = tokens.len().min(key.params.max_len as usize);
    let block_len = key.params.block_len as usize;
    let num_hashes = key.hash_seeds.len();
    // Hash the whole text under every hash once; windows reuse the bits.
    let hashed: Vec<BitVec> = key
        .hash_seeds
        .iter()
        .map(|h| BitVec::from_bools(&tokens[..len].iter().map(|&t| h.eval(t)).collect::<Vec<_>>()))
        .collect();
    let mut calls = 0u64;
    for start in 0..len {
        let mut windows: Vec<BitVec> = vec![BitVec::zeros(0); num_hashes];
        let end_max = (start + block_len).min(len);
        for end in start..end_max {
            for (k, win) in windows.iter_mut().enumerate() {
                win.push(hashed[k].get(end));
                calls += 1;
                if let Some(d) = prc_decode(&key.prc, win)? {
                    return Ok(DetectReport {
                        detected: true,
                        hit: Some(DetectHit {
                            start,
                            end: end + 1,
                            hash_index: k,
                            score: d.score,
                            codeword_index: d.codeword_index,
                        }),
                        decode_calls: calls,
                        mode: DetectMode::Exhaustive,
                    });
                }
            }
        }
    }
    Ok(DetectReport {
        detected: false,
        hit: None,
        decode_calls: calls,
        mode: DetectMode::Exhaustive,
    })
}

fn detect_fast(key: &WatermarkKey, tokens: &[Token]) -> Result<DetectReport> {
    let len = tokens.len().min(key.params.max_len as usize);
    let block_len = key.params.block_len as usize;
    let num_hashes = key.hash_seeds.len();
    // Position-preserving keys scan block-aligned full-length windows. Keys
    // that expect shortened inputs aim one window at each block's estimated
    // survivor span (block j's survivors sit near j/K of the remaining
    // text), sized at 80% of the expected span so the window stays strictly
    // inside the block's survivors; the alignment band absorbs the
    // estimate's drift.
    let candidates: Vec<(usize, usize)> = match key.prc.align_model() {
        Some(m) if key.prc.supports_shortened() => {
            let wl = ((0.8 * (1.0 - m.del_rate) * block_len as f64).round() as usize).max(8);
            (0..num_hashes)
                .map(|j| (j * len / num_hashes, wl))
                .filter(|&(start, _)| start < len)
                .collect()
        }
        _ => (0..len.div_ceil(block_len))
            .map(|j| (j * block_len, block_len))
            .collect(),
    };
    let band = if key.prc.supports_shortened() { 1usize } else { 0 };
    let mut calls = 0u64;
    for (start, window_len) in candidates {
        let end = (start + window_len).min(len);
        let center = if band > 0 {
            ((start as u64 * num_hashes as u64) / len as u64) as usize
        } else {
            start / block_len
        };
        let k_lo = center.saturating_sub(band);
        let k_hi = (center + band).min(num_hashes - 1);
        for k in k_lo..=k_hi {
            let bits = BitVec::from_bools(
                &tokens[start..end]
                    .iter()
                    .map(|&t| key.hash_seeds[k].eval(t))
                    .collect::<Vec<_>>(),
            );
            calls += 1;
            if let Some(d) = prc_decode(&key.prc, &bits)? {
                return Ok(DetectReport {
                    detected: true,
                    hit: Some(DetectHit {
                        start,
                        end,
                        hash_index: k,
                        score: d.score,
                        codeword_index: d.codeword_index,
                    }),
                    decode_calls: calls,
                    mode: DetectMode::Fast,
                });
            }
        }
    }
    Ok(DetectReport {
        detected: false,
        hit: None,
        decode_calls: calls,
        mode: DetectMode::Fast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::token::Vocab;

    fn small_key(seed: u64) -> WatermarkKey {
        let params = WmParams::new(1, 64, 256, 3);
        wm_gen(
            params,
            1e-3,
            PrcVariant::Oracle {
                num_codewords: 4,
                align: None,
            },
            seed,
        )
        .unwrap()
    }

    fn pair_model(m: u64) -> ModelSpec {
        ModelSpec::new(ModelKind::UniformPair, Vocab::new(3).unwrap(), m).unwrap()
    }

    #[test]
    fn key_shape_follows_params() {
        let params = WmParams::new(8, 128, 2048, 6);
        let key = wm_gen(
            params,
            1e-3,
            PrcVariant::Oracle {
                num_codewords: 2,
                align: None,
            },
            7,
        )
        .unwrap();
        assert_eq!(key.hash_seeds.len(), 16);
    }

    #[test]
    fn keygen_is_deterministic() {
        assert_eq!(small_key(9), small_key(9));
    }

    #[test]
    fn undersized_max_len_is_rejected() {
        let params = WmParams::new(8, 128, 100, 6);
        let err = wm_gen(
            params,
            1e-3,
            PrcVariant::Oracle {
                num_codewords: 2,
                align: None,
            },
            7,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
    }

    #[test]
    fn vocab_mismatch_is_rejected() {
        let key = small_key(1);
        let model = ModelSpec::new(ModelKind::UniformPair, Vocab::new(4).unwrap(), 256).unwrap();
        assert!(matches!(
            wm_generate(&key, &model, "p", 0),
            Err(Error::VocabMismatch(_))
        ));
    }

    #[test]
    fn success_steps_always_embed_correctly() {
        let key = small_key(2);
        let model = pair_model(256);
        let (_, tr) = wm_generate(&key, &model, "p", 3).unwrap();
        assert_eq!(tr.len(), 256);
        for s in &tr.steps {
            let (t0, t1) = s.pair.unwrap();
            let h = key.hash_seeds[s.block_index.unwrap() as usize];
            assert_eq!(s.success.unwrap(), h.eval(t0) != h.eval(t1));
            if s.success.unwrap() {
                assert_eq!(s.hash_bit.unwrap(), s.prc_bit.unwrap());
            }
        }
    }

    #[test]
    fn generation_pads_to_max_len_with_end() {
        let vocab = Vocab::new(2).unwrap();
        let model = ModelSpec::new(ModelKind::PointMass { token: 0 }, vocab, 256).unwrap();
        let params = WmParams::new(1, 64, 256, 2);
        let key = wm_gen(
            params,
            1e-2,
            PrcVariant::Oracle {
                num_codewords: 1,
                align: None,
            },
            4,
        )
        .unwrap();
        let (tokens, tr) = wm_generate(&key, &model, "p", 5).unwrap();
        assert_eq!(tokens.len(), 256);
        assert_eq!(tokens[255], model.vocab.end());
        // padding steps are zero-entropy failure steps
        let last = &tr.steps[255];
        assert_eq!(last.entropy_bits, 0.0);
        assert_eq!(last.success, Some(false));
    }

    #[test]
    fn watermarked_output_detects_fast_and_exhaustive() {
        let key = small_key(6);
        let model = pair_model(256);
        let (tokens, _) = wm_generate(&key, &model, "p", 7).unwrap();
        let fast = wm_detect(&key, &tokens, DetectMode::Fast).unwrap();
        assert!(fast.detected, "fast mode missed the watermark");
        let ex = wm_detect(&key, &tokens, DetectMode::Exhaustive).unwrap();
        assert!(ex.detected);
        assert!(ex.decode_calls > 0);
    }

    #[test]
    fn single_token_input_reports_without_detecting() {
        let key = small_key(8);
        let report = wm_detect(&key, &[Token(0)], DetectMode::Fast).unwrap();
        assert!(!report.detected);
        assert!(report.hit.is_none());
        assert!(report.decode_calls >= 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        let key = small_key(8);
        assert!(matches!(
            wm_detect(&key, &[], DetectMode::Fast),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn detection_requires_the_right_key() {
        let key = small_key(10);
        let other = small_key(11);
        let model = pair_model(256);
        let (tokens, _) = wm_generate(&key, &model, "p", 12).unwrap();
        let report = wm_detect(&other, &tokens, DetectMode::Fast).unwrap();
        assert!(!report.detected);
    }
}
