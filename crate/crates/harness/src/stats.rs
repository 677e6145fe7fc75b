//! Statistical tests used by the experiment verdicts.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided normal p-value for a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    2.0 * (1.0 - n.cdf(z.abs()))
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(df).unwrap();
    1.0 - d.cdf(stat.max(0.0))
}

/// Pearson goodness-of-fit statistic against expected counts; categories
/// with expectation below `min_expected` are pooled into their neighbour.
pub fn chi2_gof(observed: &[f64], expected: &[f64], min_expected: f64) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let mut obs_p = Vec::new();
    let mut exp_p = Vec::new();
    let (mut acc_o, mut acc_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= min_expected {
            obs_p.push(acc_o);
            exp_p.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs_p.last_mut(), exp_p.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs_p.push(acc_o);
            exp_p.push(acc_e);
        }
    }
    let stat: f64 = obs_p
        .iter()
        .zip(&exp_p)
        .map(|(&o, &e)| (o - e) * (o - e) / e)
        .sum();
    (stat, (obs_p.len().max(2) - 1) as f64)
}

/// Two-sample homogeneity chi-square over category counts.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let pooled = (ca + cb) as f64;
        if pooled == 0.0 {
            continue;
        }
        let ea = pooled * na as f64 / n;
        let eb = pooled * nb as f64 / n;
        stat += (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb;
        df += 1;
    }
    (stat, (df.max(2) - 1) as f64)
}

/// Kolmogorov-Smirnov distance of a sample against Uniform[0,1].
pub fn ks_distance_uniform(pvalues: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = pvalues.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &p) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - p;
        let lo = p - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Wald-Wolfowitz runs test z statistic on a binary sequence.
pub fn runs_test_z(bits: &[bool]) -> f64 {
    let n = bits.len() as f64;
    let n1 = bits.iter().filter(|&&b| b).count() as f64;
    let n0 = n - n1;
    if n1 == 0.0 || n0 == 0.0 {
        return 0.0;
    }
    let runs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let mean = 1.0 + 2.0 * n1 * n0 / n;
    let var = 2.0 * n1 * n0 * (2.0 * n1 * n0 - n) / (n * n * (n - 1.0));
    (runs as f64 - mean) / var.sqrt()
}

/// z statistic for the lag-1 autocorrelation of a binary sequence.
pub fn lag1_autocorr_z(bits: &[bool]) -> f64 {
    let n = bits.len();
    if n < 3 {
        return 0.0;
    }
    let xs: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let r1 = cov / var;
    r1 * (n as f64).sqrt()
}

/// One named test inside a Bonferroni family.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub name: String,
    pub p_value: f64,
}

/// Accept iff every test clears the Bonferroni-corrected level.
pub fn family_accepts(tests: &[TestOutcome], level: f64) -> bool {
    let per_test = level / tests.len() as f64;
    tests.iter().all(|t| t.p_value >= per_test)
}

/// Normal-approximation confidence half-width for a rate estimate.
pub fn rate_ci_half(rate: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (rate * (1.0 - rate) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_sf_reference_values() {
        // P(Chi2_1 > 3.841) ~ 0.05, P(Chi2_2 > 5.991) ~ 0.05
        assert!((chi2_sf(3.841, 1.0) - 0.05).abs() < 2e-3);
        assert!((chi2_sf(5.991, 2.0) - 0.05).abs() < 2e-3);
    }

    #[test]
    fn two_sample_chi2_is_small_for_identical_counts() {
        let a = [100u64, 200, 300];
        let b = [100u64, 200, 300];
        let (stat, df) = chi2_two_sample(&a, &b);
        assert_eq!(stat, 0.0);
        assert_eq!(df, 2.0);
    }

    #[test]
    fn ks_distance_of_a_uniform_grid_is_small() {
        let pv: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance_uniform(&pv) < 0.002);
    }

    #[test]
    fn runs_test_flags_alternating_sequences() {
        let alternating: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        assert!(runs_test_z(&alternating) > 10.0);
        let constant_blocks: Vec<bool> = (0..1000).map(|i| i < 500).collect();
        assert!(runs_test_z(&constant_blocks) < -10.0);
    }

    #[test]
    fn lag1_flags_sticky_sequences() {
        let sticky: Vec<bool> = (0..1000).map(|i| (i / 10) % 2 == 0).collect();
        assert!(lag1_autocorr_z(&sticky) > 5.0);
    }

    #[test]
    fn bonferroni_family() {
        let tests = vec![
            TestOutcome {
                name: "a".into(),
                p_value: 0.006,
            },
            TestOutcome {
                name: "b".into(),
                p_value: 0.9,
            },
        ];
        assert!(family_accepts(&tests, 0.01)); // per-test level 0.005
        assert!(!family_accepts(&tests, 0.02)); // per-test level 0.01 > 0.006
    }
}
