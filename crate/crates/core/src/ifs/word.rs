use serde::{Deserialize, Serialize};
use std::fmt;

/// A finite word over the branch alphabet. Symbols are 0-based indices
/// into the system's branch list; the empty word is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<u32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(symbols: Vec<u32>) -> Self {
        Word(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    pub fn push(&mut self, s: u32) {
        self.0.push(s);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// First `t` symbols of the periodic word `self^infinity`.
    pub fn periodic_prefix(&self, t: usize) -> Word {
        assert!(!self.is_empty(), "periodic prefix of the empty word");
        Word((0..t).map(|j| self.0[j % self.0.len()]).collect())
    }
}

impl From<&[u32]> for Word {
    fn from(s: &[u32]) -> Self {
        Word(s.to_vec())
    }
}

impl<const N: usize> From<[u32; N]> for Word {
    fn from(s: [u32; N]) -> Self {
        Word(s.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_prefix_wraps() {
        let w = Word::from([0, 1]);
        assert_eq!(w.periodic_prefix(5), Word::from([0, 1, 0, 1, 0]));
        assert_eq!(w.periodic_prefix(0), Word::empty());
    }

    #[test]
    fn lexicographic_order_matches_symbol_order() {
        assert!(Word::from([0, 1]) < Word::from([1, 0]));
        assert!(Word::from([0]) < Word::from([0, 0]));
    }
}
