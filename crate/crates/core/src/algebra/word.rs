use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CubatureError, Result};

/// A multi-index over the letters `0..=d`.
///
/// Letter `0` is the time-like generator and carries weight two in
/// [`Word::degree`]; letters `1..=d` carry weight one.
///
/// Words order graded-lexicographically: by degree first, then by letters.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(i: usize) -> Self {
        Word(vec![i as u8])
    }

    /// Builds a word, checking every letter against `0..=d`.
    pub fn new(letters: &[usize], d: usize) -> Result<Self> {
        for &l in letters {
            if l > d {
                return Err(CubatureError::InvalidWord { letter: l, d });
            }
        }
        Ok(Word(letters.iter().map(|&l| l as u8).collect()))
    }

    pub(crate) fn from_raw(letters: Vec<u8>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.0.iter().map(|&l| l as usize)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Length plus the number of zero letters.
    pub fn degree(&self) -> usize {
        self.0.len() + self.0.iter().filter(|&&l| l == 0).count()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.0.iter().max().map(|&l| l as usize)
    }

    /// Number of letters different from `0`.
    pub fn space_letters(&self) -> usize {
        self.0.iter().filter(|&&l| l != 0).count()
    }
}

/// Degree of a word given as raw letters, validated against `0..=d`.
pub fn word_degree(letters: &[usize], d: usize) -> Result<usize> {
    Word::new(letters, d).map(|w| w.degree())
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        write!(f, "(")?;
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}
