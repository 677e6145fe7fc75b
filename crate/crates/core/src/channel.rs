//! Token-level attack channels: random substitution with per-token
//! replacement distributions, random deletion, and bounded edit adversaries.
//!
//! A substitution map assigns every token a replacement distribution that
//! depends on the token identity only, never on position or context. A
//! position where the replacement draw returns the original token still
//! counts as substituted.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::TokenDist;
use crate::hash::BlockHash;
use crate::rng::{derive_rng, tag_str};
use crate::token::Token;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubstitutionMap {
    /// Token id -> id + 1 (mod vocab size); point-mass replacement.
    CyclicShift { vocab_size: u32 },
    /// Ids are grouped into consecutive clusters; replacement is uniform
    /// within the cluster (a crude paraphrase surrogate).
    SynonymClusters { vocab_size: u32, cluster_size: u32 },
    /// Explicit per-token replacement distributions.
    Custom {
        vocab_size: u32,
        table: Vec<TokenDist>,
    },
    /// White-box worst case for one block hash: replace with the nearest id
    /// whose hash bit differs. A test tool, not an attack-model claim.
    HashFlip { vocab_size: u32, hash: BlockHash },
}

impl SubstitutionMap {
    pub fn vocab_size(&self) -> u32 {
        match self {
            SubstitutionMap::CyclicShift { vocab_size }
            | SubstitutionMap::SynonymClusters { vocab_size, .. }
            | SubstitutionMap::Custom { vocab_size, .. }
            | SubstitutionMap::HashFlip { vocab_size, .. } => *vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SubstitutionMap::SynonymClusters { cluster_size, .. } if *cluster_size == 0 => Err(
                Error::InvalidParams("cluster_size must be positive".into()),
            ),
            SubstitutionMap::Custom { vocab_size, table } => {
                if table.len() != *vocab_size as usize {
                    return Err(Error::InvalidParams(format!(
                        "custom map needs {} rows, got {}",
                        vocab_size,
                        table.len()
                    )));
                }
                for d in table {
                    if d.max_token().id() >= *vocab_size {
                        return Err(Error::InvalidParams(
                            "custom map row targets a token outside the vocabulary".into(),
                        ));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn replacement<R: Rng + ?Sized>(&self, t: Token, rng: &mut R) -> Token {
        match self {
            SubstitutionMap::CyclicShift { vocab_size } => Token((t.id() + 1) % vocab_size),
            SubstitutionMap::SynonymClusters {
                vocab_size,
                cluster_size,
            } => {
                let lo = (t.id() / cluster_size) * cluster_size;
                let hi = (lo + cluster_size).min(*vocab_size);
                Token(rng.random_range(lo..hi))
            }
            SubstitutionMap::Custom { table, .. } => table[t.id() as usize].sample(rng),
            SubstitutionMap::HashFlip { vocab_size, hash } => {
                let want = !hash.eval(t);
                for step in 1..*vocab_size {
                    let cand = Token((t.id() + step) % vocab_size);
                    if hash.eval(cand) == want {
                        return cand;
                    }
                }
                t
            }
        }
    }
}

/// Replace each position independently with probability `p` by a draw from
/// the map; length is preserved.
pub fn apply_substitution<R: Rng + ?Sized>(
    tokens: &[Token],
    map: &SubstitutionMap,
    p: f64,
    rng: &mut R,
) -> Result<Vec<Token>> {
    check_rate(p)?;
    map.validate()?;
    Ok(tokens
        .iter()
        .map(|&t| {
            if rng.random_bool(p) {
                map.replacement(t, rng)
            } else {
                t
            }
        })
        .collect())
}

/// Keep each token independently with probability `1 - p`, order preserved.
pub fn apply_deletion<R: Rng + ?Sized>(tokens: &[Token], p: f64, rng: &mut R) -> Result<Vec<Token>> {
    check_rate(p)?;
    Ok(tokens
        .iter()
        .copied()
        .filter(|_| !rng.random_bool(p))
        .collect())
}

/// White-box helper for worst-case substitution experiments: applies a
/// per-block `HashFlip` map built from each block's own hash. The per-block
/// maps are position-independent within their block; the block structure is
/// side information of the tester.
pub fn apply_hash_flip_per_block<R: Rng + ?Sized>(
    tokens: &[Token],
    hashes: &[BlockHash],
    block_len: usize,
    vocab_size: u32,
    p: f64,
    rng: &mut R,
) -> Result<Vec<Token>> {
    check_rate(p)?;
    let mut out = Vec::with_capacity(tokens.len());
    for (b, chunk) in tokens.chunks(block_len).enumerate() {
        let map = SubstitutionMap::HashFlip {
            vocab_size,
            hash: hashes[b.min(hashes.len() - 1)],
        };
        out.extend(apply_substitution(chunk, &map, p, rng)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditStrategy {
    /// Insertions and deletions scattered uniformly.
    UniformRandomEdits,
    /// White-box: spend the budget as deletions concentrated on the listed
    /// blocks (in order), `per_block` deletions each.
    BlockTargeting {
        block_len: usize,
        targets: Vec<usize>,
        per_block: usize,
    },
}

/// Apply at most `floor(budget_fraction * len)` insertions/deletions.
pub fn apply_edit_adversary<R: Rng + ?Sized>(
    tokens: &[Token],
    budget_fraction: f64,
    strategy: &EditStrategy,
    vocab_size: u32,
    rng: &mut R,
) -> Result<Vec<Token>> {
    check_rate(budget_fraction)?;
    let budget = (budget_fraction * tokens.len() as f64).floor() as usize;
    match strategy {
        EditStrategy::UniformRandomEdits => {
            let mut out: Vec<Token> = tokens.to_vec();
            for _ in 0..budget {
                if out.is_empty() || rng.random_bool(0.5) {
                    let pos = rng.random_range(0..=out.len());
                    out.insert(pos, Token(rng.random_range(0..vocab_size)));
                } else {
                    let pos = rng.random_range(0..out.len());
                    out.remove(pos);
                }
            }
            Ok(out)
        }
        EditStrategy::BlockTargeting {
            block_len,
            targets,
            per_block,
        } => {
            let mut delete = vec![false; tokens.len()];
            let mut spent = 0usize;
            'outer: for &b in targets {
                let lo = b * block_len;
                let hi = (lo + block_len).min(tokens.len());
                for pos in lo..hi.min(lo + *per_block) {
                    if spent == budget {
                        break 'outer;
                    }
                    delete[pos] = true;
                    spent += 1;
                }
            }
            Ok(tokens
                .iter()
                .zip(&delete)
                .filter(|(_, &d)| !d)
                .map(|(&t, _)| t)
                .collect())
        }
    }
}

/// One stage of a composed attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum ChannelStage {
    Sub { map: SubstitutionMap, p: f64 },
    Del { p: f64 },
    Edit { budget: f64, strategy: EditStrategy },
}

/// An ordered pipeline of token-level channels; stage `k` draws its
/// randomness from an independent stream derived from the master seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub stages: Vec<ChannelStage>,
}

impl ChannelSpec {
    pub fn apply(&self, tokens: &[Token], vocab_size: u32, master_seed: u64) -> Result<Vec<Token>> {
        let mut cur = tokens.to_vec();
        for (idx, stage) in self.stages.iter().enumerate() {
            let mut rng = derive_rng(master_seed, &[tag_str("channel-stage"), idx as u64]);
            cur = match stage {
                ChannelStage::Sub { map, p } => apply_substitution(&cur, map, *p, &mut rng)?,
                ChannelStage::Del { p } => apply_deletion(&cur, *p, &mut rng)?,
                ChannelStage::Edit { budget, strategy } => {
                    apply_edit_adversary(&cur, *budget, strategy, vocab_size, &mut rng)?
                }
            };
        }
        Ok(cur)
    }
}

/// Insertion/deletion edit distance (no substitutions), used to check the
/// edit adversary's budget contract.
pub fn indel_distance(a: &[Token], b: &[Token]) -> usize {
    // D = |a| + |b| - 2 LCS(a, b)
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![0usize; m + 1];
    for i in 1..=n {
        let mut cur = vec![0usize; m + 1];
        for j in 1..=m {
            cur[j] = if a[i - 1] == b[j - 1] {
                prev[j - 1] + 1
            } else {
                prev[j].max(cur[j - 1])
            };
        }
        prev = cur;
    }
    n + m - 2 * prev[m]
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("rate {p} outside [0,1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::hash_sample;

    fn toks(ids: &[u32]) -> Vec<Token> {
        ids.iter().map(|&i| Token(i)).collect()
    }

    #[test]
    fn substitution_p0_is_identity() {
        let mut rng = derive_rng(1, &[]);
        let input = toks(&[0, 1, 2, 3]);
        let map = SubstitutionMap::CyclicShift { vocab_size: 4 };
        assert_eq!(apply_substitution(&input, &map, 0.0, &mut rng).unwrap(), input);
    }

    #[test]
    fn substitution_p1_cyclic_shift_increments_ids() {
        let mut rng = derive_rng(2, &[]);
        let input = toks(&[0, 1, 2, 3]);
        let map = SubstitutionMap::CyclicShift { vocab_size: 4 };
        let out = apply_substitution(&input, &map, 1.0, &mut rng).unwrap();
        assert_eq!(out, toks(&[1, 2, 3, 0]));
    }

    #[test]
    fn substitution_rate_concentrates() {
        let mut rng = derive_rng(3, &[]);
        let input = vec![Token(0); 100_000];
        let map = SubstitutionMap::CyclicShift { vocab_size: 5 };
        let out = apply_substitution(&input, &map, 0.3, &mut rng).unwrap();
        assert_eq!(out.len(), input.len());
        let changed = out.iter().filter(|t| t.id() != 0).count() as f64 / 1e5;
        assert!((changed - 0.3).abs() < 0.005, "changed fraction {changed}");
    }

    #[test]
    fn deletion_extremes() {
        let mut rng = derive_rng(4, &[]);
        let input = toks(&[5, 6, 7]);
        assert_eq!(apply_deletion(&input, 0.0, &mut rng).unwrap(), input);
        assert!(apply_deletion(&input, 1.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn deletion_preserves_order_and_rate() {
        let mut rng = derive_rng(5, &[]);
        let input: Vec<Token> = (0..100_000).map(Token).collect();
        let out = apply_deletion(&input, 0.5, &mut rng).unwrap();
        assert!(out.windows(2).all(|w| w[0].id() < w[1].id()));
        let survived = out.len() as f64;
        assert!((survived - 50_000.0).abs() < 500.0, "survivors {survived}");
    }

    #[test]
    fn hash_flip_always_flips_the_bit_when_possible() {
        let hash = hash_sample(11, 0);
        let map = SubstitutionMap::HashFlip {
            vocab_size: 16,
            hash,
        };
        let mut rng = derive_rng(6, &[]);
        for id in 0..16 {
            let t = Token(id);
            let r = map.replacement(t, &mut rng);
            assert_ne!(hash.eval(t), hash.eval(r), "token {id} kept its hash");
        }
    }

    #[test]
    fn custom_map_validates_shape() {
        let bad = SubstitutionMap::Custom {
            vocab_size: 3,
            table: vec![TokenDist::point_mass(Token(0))],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn edit_budget_zero_is_identity() {
        let mut rng = derive_rng(7, &[]);
        let input = toks(&[1, 2, 3, 4]);
        let out = apply_edit_adversary(
            &input,
            0.0,
            &EditStrategy::UniformRandomEdits,
            8,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn edit_distance_stays_within_budget() {
        let mut rng = derive_rng(8, &[]);
        let input: Vec<Token> = (0..500).map(|i| Token(i % 7)).collect();
        for &b in &[0.01, 0.1, 0.3] {
            let out = apply_edit_adversary(
                &input,
                b,
                &EditStrategy::UniformRandomEdits,
                7,
                &mut rng,
            )
            .unwrap();
            let budget = (b * input.len() as f64).floor() as usize;
            assert!(
                indel_distance(&input, &out) <= budget,
                "distance exceeded budget {budget}"
            );
        }
    }

    #[test]
    fn block_targeting_concentrates_deletions() {
        let mut rng = derive_rng(9, &[]);
        let input: Vec<Token> = (0..400).map(Token).collect();
        let strategy = EditStrategy::BlockTargeting {
            block_len: 100,
            targets: vec![1, 3],
            per_block: 20,
        };
        let out = apply_edit_adversary(&input, 0.1, &strategy, 400, &mut rng).unwrap();
        assert_eq!(out.len(), 360);
        // block 0 untouched
        assert_eq!(&out[..100], &input[..100]);
        // block 1 lost its first 20 tokens
        assert_eq!(out[100], Token(120));
    }

    #[test]
    fn indel_distance_reference_cases() {
        assert_eq!(indel_distance(&toks(&[1, 2, 3]), &toks(&[1, 2, 3])), 0);
        assert_eq!(indel_distance(&toks(&[1, 2, 3]), &toks(&[1, 3])), 1);
        assert_eq!(indel_distance(&toks(&[1, 2]), &toks(&[2, 1])), 2);
        assert_eq!(indel_distance(&toks(&[]), &toks(&[4, 4])), 2);
    }

    #[test]
    fn stages_apply_left_to_right() {
        let spec = ChannelSpec {
            stages: vec![
                ChannelStage::Sub {
                    map: SubstitutionMap::CyclicShift { vocab_size: 4 },
                    p: 1.0,
                },
                ChannelStage::Del { p: 1.0 },
            ],
        };
        let out = spec.apply(&toks(&[0, 1]), 4, 0).unwrap();
        assert!(out.is_empty());
    }
}
