//! Letter keys and ordered key pairs.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A lowercase letter key `a`..=`z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(u8);

impl Letter {
    pub const ALL: [Letter; 26] = {
        let mut all = [Letter(b'a'); 26];
        let mut i = 0;
        while i < 26 {
            all[i] = Letter(b'a' + i as u8);
            i += 1;
        }
        all
    };

    /// Accepts either case; anything outside ASCII letters is `None`.
    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_alphabetic()
            .then(|| Letter(c.to_ascii_lowercase() as u8))
    }

    pub fn as_char(self) -> char {
        self.0 as char
    }

    pub fn index(self) -> usize {
        (self.0 - b'a') as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < 26).then(|| Letter(b'a' + i as u8))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for Letter {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_char(self.as_char())
    }
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_lowercase() => Ok(Letter(c as u8)),
            _ => Err(serde::de::Error::custom(format!(
                "expected a single lowercase letter, got {s:?}"
            ))),
        }
    }
}

/// Parses a word into letters; `None` if any character is not a letter.
pub fn letters_of(word: &str) -> Option<Vec<Letter>> {
    word.chars().map(Letter::new).collect()
}

/// A set of letters stored as a 26-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct LetterSet(u32);

impl LetterSet {
    pub const EMPTY: LetterSet = LetterSet(0);
    pub const ALL: LetterSet = LetterSet((1 << 26) - 1);

    pub fn insert(&mut self, l: Letter) {
        self.0 |= 1 << l.index();
    }

    pub fn contains(self, l: Letter) -> bool {
        self.0 & (1 << l.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Letter> {
        Letter::ALL.into_iter().filter(move |l| self.contains(*l))
    }
}

impl FromIterator<Letter> for LetterSet {
    fn from_iter<I: IntoIterator<Item = Letter>>(iter: I) -> Self {
        let mut set = LetterSet::EMPTY;
        for l in iter {
            set.insert(l);
        }
        set
    }
}

/// An ordered pair of consecutively typed letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyPair {
    pub first: Letter,
    pub second: Letter,
}

impl KeyPair {
    pub fn new(first: Letter, second: Letter) -> Self {
        Self { first, second }
    }

    /// Parses a two-letter string such as `"to"`.
    pub fn parse(s: &str) -> Option<Self> {
        match letters_of(s)?.as_slice() {
            [a, b] => Some(Self::new(*a, *b)),
            _ => None,
        }
    }

    /// Adjacent pairs of a word, in order.
    pub fn of_word(word: &str) -> Option<Vec<KeyPair>> {
        let letters = letters_of(word)?;
        Some(
            letters
                .windows(2)
                .map(|w| KeyPair::new(w[0], w[1]))
                .collect(),
        )
    }
}

impl fmt::Display for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.first, self.second)
    }
}
