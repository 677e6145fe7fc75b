//! Next-token probability distributions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::token::Token;
use crate::{Error, Result};

/// Normalization slack absorbed when validating a distribution.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// A probability distribution over a finite token vocabulary.
///
/// Only tokens with strictly positive mass are stored; the support is kept
/// sorted by token id so construction order never leaks into sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDist {
    support: Vec<(Token, f64)>,
}

impl TokenDist {
    pub fn new(mut support: Vec<(Token, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        support.sort_by_key(|(t, _)| *t);
        for w in support.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate token {}",
                    w[0].0.id()
                )));
            }
        }
        let mut total = 0.0;
        for &(t, p) in &support {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "token {} has non-positive probability {p}",
                    t.id()
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(TokenDist { support })
    }

    pub fn point_mass(t: Token) -> Self {
        TokenDist {
            support: vec![(t, 1.0)],
        }
    }

    pub fn uniform(tokens: &[Token]) -> Result<Self> {
        let p = 1.0 / tokens.len() as f64;
        TokenDist::new(tokens.iter().map(|&t| (t, p)).collect())
    }

    pub fn support(&self) -> &[(Token, f64)] {
        &self.support
    }

    /// Probability of `t`; zero when outside the stored support.
    pub fn prob(&self, t: Token) -> f64 {
        self.support
            .binary_search_by_key(&t, |(tok, _)| *tok)
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    /// Empirical entropy of drawing `t` from this distribution, in bits.
    pub fn empirical_entropy(&self, t: Token) -> Result<f64> {
        let p = self.prob(t);
        if p == 0.0 {
            return Err(Error::ZeroProbabilityToken);
        }
        Ok(-p.log2())
    }

    /// Draw a token by inverse CDF over the sorted support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Token {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(t, p) in &self.support {
            acc += p;
            if u < acc {
                return t;
            }
        }
        // Renormalization slack can leave u just past the accumulated mass.
        self.support.last().unwrap().0
    }

    /// Largest token id in the support.
    pub fn max_token(&self) -> Token {
        self.support.last().unwrap().0
    }
}
