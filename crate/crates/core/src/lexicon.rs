//! English word list used to filter candidate words.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// The built-in word list: common English words plus 100 decoys.
pub const BUNDLED: &str = include_str!("../data/lexicon.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("lexicon contains no valid words")]
    EmptyLexicon,
}

/// A set of lowercase `[a-z]+` words indexed by length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    words: BTreeSet<String>,
    by_length: BTreeMap<usize, BTreeSet<String>>,
    dropped: usize,
    sha256: String,
}

impl Lexicon {
    /// Builds a lexicon from text with one word per line.
    ///
    /// Entries are trimmed and lowercased. Blank lines and lines starting
    /// with `#` are skipped; lines containing anything other than letters are
    /// dropped and counted.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut words = BTreeSet::new();
        let mut dropped = 0;
        for line in text.lines() {
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            if entry.chars().all(|c| c.is_ascii_alphabetic()) {
                words.insert(entry.to_ascii_lowercase());
            } else {
                dropped += 1;
            }
        }
        if words.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        let mut by_length: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for w in &words {
            by_length.entry(w.len()).or_default().insert(w.clone());
        }
        Ok(Self {
            words,
            by_length,
            dropped,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled lexicon is valid")
    }

    pub fn from_words<I, S>(words: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text: String = words
            .into_iter()
            .map(|w| format!("{}\n", w.as_ref()))
            .collect();
        Self::parse(&text)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word) || self.words.contains(&word.to_ascii_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn with_length(&self, len: usize) -> impl Iterator<Item = &str> {
        self.by_length
            .get(&len)
            .into_iter()
            .flat_map(|set| set.iter().map(String::as_str))
    }

    pub fn lengths(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.by_length.iter().map(|(len, set)| (*len, set.len()))
    }

    /// Lines rejected for containing non-letters.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Hex SHA-256 of the source text.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let lexicon = Lexicon::parse(&text)?;
    if lexicon.dropped > 0 {
        log::info!(
            "{}: dropped {} line(s) with non-letter characters",
            path.display(),
            lexicon.dropped
        );
    }
    Ok(lexicon)
}
