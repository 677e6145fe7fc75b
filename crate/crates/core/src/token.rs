//! Tokens and vocabularies.
//!
//! Token ids are dense integers; the scheme only needs equality and hashing,
//! so a vocabulary is just its size plus optional human-readable labels. The
//! highest id is reserved as the terminator every model must eventually emit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A token id, `0 <= id < vocab_size` for the vocabulary in scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Token(pub u32);

impl Token {
    pub fn id(self) -> u32 {
        self.0
    }
}

/// A finite token vocabulary. The last id is the `End` terminator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    size: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    labels: Vec<String>,
}

impl Vocab {
    /// A vocabulary needs at least one ordinary token plus `End`.
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidParams(format!(
                "vocab size must be at least 2, got {size}"
            )));
        }
        Ok(Vocab {
            size,
            labels: Vec::new(),
        })
    }

    pub fn with_labels(size: u32, labels: Vec<String>) -> Result<Self> {
        if labels.len() != size as usize {
            return Err(Error::InvalidParams(format!(
                "expected {} labels, got {}",
                size,
                labels.len()
            )));
        }
        let mut v = Vocab::new(size)?;
        v.labels = labels;
        Ok(v)
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    /// The distinguished terminator token.
    pub fn end(&self) -> Token {
        Token(self.size - 1)
    }

    pub fn contains(&self, t: Token) -> bool {
        t.0 < self.size
    }

    pub fn label(&self, t: Token) -> Option<&str> {
        self.labels.get(t.0 as usize).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> {
        (0..self.size).map(Token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_is_last_id() {
        let v = Vocab::new(4).unwrap();
        assert_eq!(v.end(), Token(3));
        assert!(v.contains(Token(3)));
        assert!(!v.contains(Token(4)));
    }

    #[test]
    fn too_small_vocab_rejected() {
        assert!(Vocab::new(1).is_err());
    }

    #[test]
    fn label_lookup() {
        let v =
            Vocab::with_labels(3, vec!["a".into(), "b".into(), "<end>".into()]).unwrap();
        assert_eq!(v.label(Token(1)), Some("b"));
        assert_eq!(v.label(v.end()), Some("<end>"));
    }
}
