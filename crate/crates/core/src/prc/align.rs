//! Order-preserving alignment scores for decoding shortened blocks.
//!
//! A window `w` of length `L <= l` is modelled as the survivors of a
//! contiguous stretch of a codeword `c` under an iid deletion channel (rate
//! `d`) followed by an iid bit-flip channel (rate `e`). Deletions are
//! memoryless, so successive survivor positions have geometric gaps and the
//! window likelihood marginalizes over every increasing embedding `q` with a
//! free start and a free tail:
//!
//!   score(w, c) = log2 sum_q prod_i e(w_i, c_{q_i})
//!                        * prod_{i>1} (1-d) d^(q_i - q_{i-1} - 1)   + L
//!
//! with `e = 1-err` on a match and `err` on a mismatch; the `+L` references
//! the uniform-window null. The forward pass runs in a band around the
//! expected survivor diagonal (slope `1/(1-d)`), wide enough to absorb both
//! the geometric-gap fluctuation and the placement error of a detector that
//! can only estimate where a block's survivors start; embeddings outside the
//! band carry negligible mass and are dropped identically in calibration and
//! decoding.
//!
//! The marginalized score is the default because the best-single-path
//! variant ([`best_path_score`]) carries no information once deletions are
//! frequent: a uniform window of length l/2 embeds into a random codeword
//! with ~L matches regardless of whether it is a true survivor window, so
//! max-score separation collapses (see `tests::best_path_is_blind_at_half_deletion`).

use serde::{Deserialize, Serialize};

use crate::bits::BitVec;

/// Channel model the alignment score assumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignModel {
    /// Assumed iid deletion rate of the channel being decoded against.
    pub del_rate: f64,
    /// Assumed post-embedding bit error rate on surviving positions.
    pub err_rate: f64,
}

impl AlignModel {
    /// Band half-width: ~4.5 sigma of the geometric-gap walk plus l/8 of
    /// window-placement slack, floored for short windows.
    pub fn band_halfwidth(&self, code_len: usize, window_len: usize) -> usize {
        let l = code_len as f64;
        let k = window_len.max(1) as f64;
        let d = self.del_rate.clamp(0.01, 0.95);
        let walk_sigma = (k * d).sqrt() / (1.0 - d);
        (4.5 * walk_sigma + l / 8.0).ceil().max(128.0) as usize
    }
}

/// Marginalized alignment log-likelihood ratio in bits.
///
/// Returns `f64::NEG_INFINITY` when the window cannot embed (longer than the
/// codeword or empty).
pub fn llr_score(window: &BitVec, codeword: &BitVec, model: &AlignModel) -> f64 {
    let big_l = codeword.len();
    let small_l = window.len();
    if small_l == 0 || small_l > big_l {
        return f64::NEG_INFINITY;
    }
    let err = model.err_rate.clamp(1e-9, 0.5);
    let (e_match, e_mis) = (1.0 - err, err);
    let d = model.del_rate.clamp(1e-9, 0.95);
    let keep = 1.0 - d;
    let slope = 1.0 / keep;
    let band = model.band_halfwidth(big_l, small_l);

    let row_bounds = |i: usize| -> (usize, usize) {
        let center = ((i + 1) as f64 * slope) as usize;
        let lo = center.saturating_sub(band).max(i);
        let hi = (center + band + 1).min(big_l - (small_l - 1 - i));
        (lo, hi.max(lo))
    };

    // Row 0: free start, unit prior on every in-band position.
    let (mut lo_prev, hi0) = row_bounds(0);
    let mut prev: Vec<f64> = (lo_prev..hi0)
        .map(|j| {
            if codeword.get(j) == window.get(0) {
                e_match
            } else {
                e_mis
            }
        })
        .collect();
    if prev.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut log_off = 0.0f64;

    let mut cur: Vec<f64> = Vec::new();
    for i in 1..small_l {
        let (lo, hi) = row_bounds(i);
        if hi <= lo {
            return f64::NEG_INFINITY;
        }
        cur.clear();
        cur.resize(hi - lo, 0.0);
        // g(j) = sum_{j' < j} prev[j'] * d^(j - j' - 1), advanced with the
        // one-step decay g(j) = d g(j-1) + prev[j-1].
        let mut g = 0.0f64;
        let mut row_max = 0.0f64;
        let sweep_from = lo_prev.min(lo.saturating_sub(1)) + 1;
        for j in sweep_from..hi {
            let from_prev = if j >= lo_prev + 1 && j - 1 - lo_prev < prev.len() {
                prev[j - 1 - lo_prev]
            } else {
                0.0
            };
            g = d * g + from_prev;
            if j >= lo {
                let e = if codeword.get(j) == window.get(i) {
                    e_match
                } else {
                    e_mis
                };
                let v = e * keep * g;
                cur[j - lo] = v;
                if v > row_max {
                    row_max = v;
                }
            }
        }
        if row_max <= 0.0 {
            return f64::NEG_INFINITY;
        }
        for v in cur.iter_mut() {
            *v /= row_max;
        }
        log_off += row_max.log2();
        std::mem::swap(&mut prev, &mut cur);
        lo_prev = lo;
    }
    let total: f64 = prev.iter().sum();
    if total <= 0.0 {
        return f64::NEG_INFINITY;
    }
    total.log2() + log_off + small_l as f64
}

/// Best-single-path alignment score: `matches - mismatch_penalty * mismatches
/// - gap_penalty * internal_gaps`, end gaps free.
pub fn best_path_score(
    window: &BitVec,
    codeword: &BitVec,
    mismatch_penalty: f64,
    gap_penalty: f64,
) -> f64 {
    let big_l = codeword.len();
    let small_l = window.len();
    if small_l == 0 || small_l > big_l {
        return f64::NEG_INFINITY;
    }
    // v[j] = best score of embedding w[..=i] with last position j.
    // Transition maximizes v_prev[j'] - gap_penalty*(j - j' - 1) over j' < j,
    // tracked as a running max of v_prev[j'] + gap_penalty*(j'+1).
    let mut prev = vec![0.0f64; big_l];
    for (i, w_bit) in window.iter().enumerate() {
        let mut cur = vec![f64::NEG_INFINITY; big_l];
        let mut best_from = f64::NEG_INFINITY;
        for j in 0..big_l {
            if i > 0 && j > 0 {
                let cand = prev[j - 1] + gap_penalty * (j as f64);
                if cand > best_from {
                    best_from = cand;
                }
            }
            let local = if codeword.get(j) == w_bit {
                1.0
            } else {
                -mismatch_penalty
            };
            cur[j] = if i == 0 {
                local
            } else if best_from > f64::NEG_INFINITY {
                local + best_from - gap_penalty * (j as f64)
            } else {
                f64::NEG_INFINITY
            };
        }
        prev = cur;
    }
    prev.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}
