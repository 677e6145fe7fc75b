//! Small numeric kernels for threshold calibration and alignment scoring.

/// ln(k!) for k in 0..=n, by direct accumulation.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    v.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        v.push(acc);
    }
    v
}

/// log2 of the binomial coefficient C(n, k).
pub fn log2_choose(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    let lf = ln_factorials(n);
    (lf[n] - lf[k] - lf[n - k]) / std::f64::consts::LN_2
}

/// P(Bin(n, 1/2) >= k), exactly (up to f64 rounding), stable for tails.
pub fn binom_half_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let lf = ln_factorials(n);
    let ln2 = std::f64::consts::LN_2;
    // Largest term is at j = max(k, n/2); for tail thresholds k > n/2 it is j = k.
    let ln_term = |j: usize| lf[n] - lf[j] - lf[n - j] - n as f64 * ln2;
    let peak = ln_term(k.max(n / 2));
    let mut sum = 0.0f64;
    for j in k..=n {
        let t = ln_term(j) - peak;
        if t < -745.0 {
            if j > n / 2 {
                break;
            }
            continue;
        }
        sum += t.exp();
    }
    (sum.ln() + peak).exp()
}

/// Smallest threshold `tau` with `groups * P(Bin(n,1/2) >= tau) <= alpha`,
/// or `None` when even `tau = n` cannot meet the target.
pub fn invert_binom_threshold(n: usize, groups: usize, alpha: f64) -> Option<usize> {
    if alpha >= 1.0 {
        return Some(0);
    }
    let bound = alpha / groups as f64;
    // Tail is decreasing in tau; binary search the crossing.
    if groups as f64 * binom_half_tail(n, n) > alpha {
        return None;
    }
    let (mut lo, mut hi) = (0usize, n); // tail(hi) <= bound
    if binom_half_tail(n, lo) <= bound {
        return Some(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binom_half_tail(n, mid) <= bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_matches_direct_sums() {
        // n=10: P(X >= 8) = (45 + 10 + 1)/1024
        let expect = 56.0 / 1024.0;
        assert!((binom_half_tail(10, 8) - expect).abs() < 1e-12);
        assert_eq!(binom_half_tail(10, 0), 1.0);
        assert_eq!(binom_half_tail(10, 11), 0.0);
    }

    #[test]
    fn tail_handles_deep_tails() {
        // ~12 sigma out (sigma = 32 at n = 4096); normal approximation puts
        // this near 1.8e-33, the exact value somewhat below.
        let t = binom_half_tail(4096, 2048 + 12 * 32);
        assert!(t > 0.0 && t < 1e-25, "tail {t}");
    }

    #[test]
    fn inversion_is_conservative_and_tight() {
        let n = 4096;
        let alpha = 1e-3;
        let tau = invert_binom_threshold(n, 1, alpha).unwrap();
        assert!(binom_half_tail(n, tau) <= alpha);
        assert!(binom_half_tail(n, tau - 1) > alpha);
        // Hoeffding-form estimate: n/2 + sqrt(n ln(1/alpha) / 2), within 10%
        let hoeffding = n as f64 / 2.0 + (n as f64 * (1.0 / alpha).ln() / 2.0).sqrt();
        let rel = (tau as f64 - hoeffding).abs() / hoeffding;
        assert!(rel < 0.10, "tau {tau} vs hoeffding {hoeffding}");
    }

    #[test]
    fn inversion_degenerate_alpha_one() {
        assert_eq!(invert_binom_threshold(64, 4, 1.0), Some(0));
    }

    #[test]
    fn inversion_detects_unreachable_targets() {
        // 2^-8 = 0.0039; one group cannot reach 1e-3 at n=8
        assert_eq!(invert_binom_threshold(8, 1, 1e-3), None);
        assert!(invert_binom_threshold(64, 1, 1e-3).is_some());
    }
}
