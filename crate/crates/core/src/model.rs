//! Simulated generative models with controllable entropy profiles.
//!
//! The zoo spans the regimes the experiments need: `UniformPair` (every step
//! carries exactly one bit), `LowEntropyMix` (a tunable fraction of one-bit
//! steps), `Emoji` (a deterministic token interleaved after every real
//! token), `Markov` (correlated tokens) and `PointMass` (degenerate). A model
//! is a pure function of (prompt, prefix); all bounds here are over the
//! distributions it induces, never over prompt text.

use serde::{Deserialize, Serialize};

use crate::dist::TokenDist;
use crate::rng::{derive_rng, mix64, tag_str};
use crate::token::{Token, Vocab};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Uniform over tokens {0, 1} at every step.
    UniformPair,
    /// Always emits `token`.
    PointMass { token: u32 },
    /// First-order chain over the non-End tokens; row `i` is the next-token
    /// distribution after token `i`, `init` is used on the empty prefix.
    Markov {
        init: Vec<f64>,
        transitions: Vec<Vec<f64>>,
    },
    /// Each step is a uniform pair with probability `entropy_fraction`
    /// (deterministically pseudorandom in the position) and a point mass on
    /// token 0 otherwise.
    LowEntropyMix { entropy_fraction: f64 },
    /// A deterministic `emoji` token after every real (uniform-pair) token.
    Emoji { emoji: u32 },
}

/// A generative model over `vocab` with maximum output length `max_len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub vocab: Vocab,
    pub max_len: u64,
    /// Salts the pseudorandom entropy pattern of `LowEntropyMix`.
    #[serde(default)]
    pub model_seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, vocab: Vocab, max_len: u64) -> Result<Self> {
        let spec = ModelSpec {
            kind,
            vocab,
            max_len,
            model_seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 {
            return Err(Error::InvalidParams("max_len must be positive".into()));
        }
        let v = self.vocab.size();
        match &self.kind {
            ModelKind::UniformPair => {
                if v < 3 {
                    return Err(Error::InvalidParams(
                        "uniform_pair needs tokens {0,1} plus End".into(),
                    ));
                }
            }
            ModelKind::PointMass { token } => {
                if *token >= v {
                    return Err(Error::InvalidParams(format!(
                        "point_mass token {token} outside vocab of size {v}"
                    )));
                }
            }
            ModelKind::Markov { init, transitions } => {
                let states = v as usize - 1; // End excluded
                if init.len() != states || transitions.len() != states {
                    return Err(Error::InvalidParams(format!(
                        "markov needs {states} states, got init={} rows={}",
                        init.len(),
                        transitions.len()
                    )));
                }
                row_dist(init, states)?;
                for row in transitions {
                    row_dist(row, states)?;
                }
            }
            ModelKind::LowEntropyMix { entropy_fraction } => {
                if !(0.0..=1.0).contains(entropy_fraction) {
                    return Err(Error::InvalidParams(
                        "entropy_fraction must be in [0,1]".into(),
                    ));
                }
                if v < 3 {
                    return Err(Error::InvalidParams(
                        "low_entropy_mix needs tokens {0,1} plus End".into(),
                    ));
                }
            }
            ModelKind::Emoji { emoji } => {
                if *emoji >= v - 1 || *emoji < 2 {
                    return Err(Error::InvalidParams(
                        "emoji token must be a non-End token outside {0,1}".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The next-token distribution after `prefix`. Deterministic in
    /// (model, prompt, prefix). `End` is absorbing, so termination is read
    /// off the last token.
    pub fn next_dist(&self, prompt: &str, prefix: &[Token]) -> Result<TokenDist> {
        if prefix.len() as u64 >= self.max_len {
            return Err(Error::OutputLengthExceeded);
        }
        let end = self.vocab.end();
        // Forced termination and End-absorption.
        if prefix.len() as u64 == self.max_len - 1 || prefix.last() == Some(&end) {
            return Ok(TokenDist::point_mass(end));
        }
        match &self.kind {
            ModelKind::UniformPair => TokenDist::uniform(&[Token(0), Token(1)]),
            ModelKind::PointMass { token } => Ok(TokenDist::point_mass(Token(*token))),
            ModelKind::Markov { init, transitions } => {
                let row = match prefix.last() {
                    None => init,
                    Some(t) => &transitions[t.id() as usize],
                };
                TokenDist::new(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(i, &p)| (Token(i as u32), p))
                        .collect(),
                )
            }
            ModelKind::LowEntropyMix { entropy_fraction } => {
                let pos = prefix.len() as u64;
                let u = mix64(self.model_seed ^ tag_str(prompt) ^ mix64(pos)) as f64
                    / u64::MAX as f64;
                if u < *entropy_fraction {
                    TokenDist::uniform(&[Token(0), Token(1)])
                } else {
                    Ok(TokenDist::point_mass(Token(0)))
                }
            }
            ModelKind::Emoji { emoji } => match prefix.last() {
                Some(t) if t.id() != *emoji => Ok(TokenDist::point_mass(Token(*emoji))),
                _ => TokenDist::uniform(&[Token(0), Token(1)]),
            },
        }
    }
}

fn row_dist(row: &[f64], states: usize) -> Result<()> {
    if row.len() != states {
        return Err(Error::InvalidParams(format!(
            "markov row has {} entries, expected {states}",
            row.len()
        )));
    }
    let support: Vec<_> = row
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (Token(i as u32), p))
        .collect();
    TokenDist::new(support).map(|_| ())
}

/// One generation step as recorded by the harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub position: u64,
    pub token: Token,
    pub entropy_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_index: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<(Token, Token)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prc_bit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hash_bit: Option<bool>,
}

/// Per-step trace of one generated output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.steps.iter().map(|s| s.token).collect()
    }
}

/// Draw a complete unwatermarked output of length exactly `max_len`,
/// End-padding after the terminator is drawn.
pub fn generate_plain(
    model: &ModelSpec,
    prompt: &str,
    seed: u64,
) -> Result<(Vec<Token>, Transcript)> {
    let mut rng = derive_rng(seed, &[tag_str("plain"), tag_str(prompt)]);
    let mut tokens = Vec::with_capacity(model.max_len as usize);
    let mut transcript = Transcript::default();
    for pos in 0..model.max_len {
        let dist = model.next_dist(prompt, &tokens)?;
        let t = dist.sample(&mut rng);
        transcript.steps.push(StepRecord {
            position: pos,
            token: t,
            entropy_bits: dist.empirical_entropy(t)?,
            block_index: None,
            pair: None,
            success: None,
            prc_bit: None,
            hash_bit: None,
        });
        tokens.push(t);
    }
    Ok((tokens, transcript))
}

/// Entropy profile of a transcript: the window of length >= `window_len`
/// maximizing the fraction of steps with empirical entropy >= `threshold`.
///
/// Returns the half-open window `(start, end)` and that fraction. Binary
/// search over the answer with a prefix-min sweep, O(n log n).
pub fn entropy_profile(
    transcript: &Transcript,
    window_len: usize,
    threshold: f64,
) -> Result<((usize, usize), f64)> {
    let n = transcript.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if window_len == 0 || window_len > n {
        return Err(Error::InvalidParams(format!(
            "window_len {window_len} out of range for transcript of length {n}"
        )));
    }
    let hits: Vec<f64> = transcript
        .steps
        .iter()
        .map(|s| if s.entropy_bits >= threshold { 1.0 } else { 0.0 })
        .collect();

    // Feasibility check: is there a window of length >= window_len with mean >= x?
    // Track the best window while checking.
    let check = |x: f64| -> Option<(usize, usize)> {
        let mut prefix = vec![0.0; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] + hits[i] - x;
        }
        let mut best: Option<(usize, usize)> = None;
        let mut min_idx = 0usize;
        for end in window_len..=n {
            let cand = end - window_len;
            if prefix[cand] < prefix[min_idx] {
                min_idx = cand;
            }
            if prefix[end] - prefix[min_idx] >= -1e-12 && best.is_none() {
                best = Some((min_idx, end));
            }
        }
        best
    };

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = check(0.0).expect("zero threshold is always feasible");
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        match check(mid) {
            Some(w) => {
                best = w;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    let (s, e) = best;
    let frac = hits[s..e].iter().sum::<f64>() / (e - s) as f64;
    Ok(((s, e), frac))
}
