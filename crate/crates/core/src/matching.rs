//! Tokens, n-gram sets and containment.
//!
//! Tokens are maximal `[a-z0-9_]+` runs or single punctuation characters;
//! normalized text has no whitespace or uppercase left, so that grammar
//! segments it deterministically. Grams are taken over the whole unit (all
//! added lines of a hunk, or a whole snippet), so they may span lines.

use std::collections::HashSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::normalize::NormalizedLines;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("gram sizes differ: snippet n={snippet}, hunk n={hunk}")]
    MismatchedGramSize { snippet: usize, hunk: usize },
    #[error("containment of an empty gram set is undefined")]
    EmptyReference,
    #[error("gram size must be at least 1")]
    ZeroGramSize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Self {
        Token(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_word(b: u8) -> bool {
    b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'
}

/// Splits one normalized line into tokens.
pub fn tokenize_line(line: &str) -> Vec<Token> {
    let bytes = line.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        if is_word(bytes[i]) {
            while i < bytes.len() && is_word(bytes[i]) {
                i += 1;
            }
        } else {
            // one character, which may be multi-byte if the caller skipped normalization
            i += line[i..].chars().next().map_or(1, char::len_utf8);
        }
        tokens.push(Token(line[start..i].to_string()));
    }
    tokens
}

/// Token sequence of a normalized unit, lines concatenated in order.
pub fn tokenize(normalized: &NormalizedLines) -> Vec<Token> {
    normalized.lines.iter().flat_map(|l| tokenize_line(l)).collect()
}

pub type Gram = Vec<Token>;

/// Distinct n-grams of one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramSet {
    n: usize,
    grams: HashSet<Gram>,
}

impl NGramSet {
    pub fn empty(n: usize) -> Self {
        NGramSet {
            n,
            grams: HashSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grams(&self) -> &HashSet<Gram> {
        &self.grams
    }

    pub fn total_grams(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn contains(&self, gram: &[Token]) -> bool {
        self.grams.contains(gram)
    }

    pub fn intersection_count(&self, other: &NGramSet) -> usize {
        let (small, large) = if self.grams.len() <= other.grams.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.grams.iter().filter(|g| large.grams.contains(*g)).count()
    }

    /// Adds every gram of `other`. Both sets must share `n`.
    pub fn extend_from(&mut self, other: &NGramSet) -> Result<(), MatchError> {
        if self.n != other.n {
            return Err(MatchError::MismatchedGramSize {
                snippet: self.n,
                hunk: other.n,
            });
        }
        self.grams.extend(other.grams.iter().cloned());
        Ok(())
    }

    pub fn insert(&mut self, gram: Gram) -> Result<bool, MatchError> {
        if gram.len() != self.n {
            return Err(MatchError::MismatchedGramSize {
                snippet: self.n,
                hunk: gram.len(),
            });
        }
        Ok(self.grams.insert(gram))
    }

    /// Grams in sorted order, for stable output.
    pub fn sorted(&self) -> Vec<&Gram> {
        let mut v: Vec<&Gram> = self.grams.iter().collect();
        v.sort();
        v
    }
}

/// All windows of `n` consecutive tokens, deduplicated.
pub fn build_ngrams(tokens: &[Token], n: usize) -> Result<NGramSet, MatchError> {
    if n == 0 {
        return Err(MatchError::ZeroGramSize);
    }
    let grams = tokens.windows(n).map(<[Token]>::to_vec).collect();
    Ok(NGramSet { n, grams })
}

/// A percentage kept as an exact fraction; displayed with one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percentage(Ratio<u64>);

impl Percentage {
    pub const ZERO: Percentage = Percentage(Ratio::new_raw(0, 1));
    pub const HUNDRED: Percentage = Percentage(Ratio::new_raw(100, 1));

    /// `part / whole × 100`. `whole` must be non-zero.
    pub fn of(part: u64, whole: u64) -> Self {
        Percentage(Ratio::new(part * 100, whole))
    }

    pub fn from_ratio(r: Ratio<u64>) -> Self {
        Percentage(r)
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    /// Rounded to tenths, half away from zero.
    pub fn tenths(&self) -> u64 {
        let (n, d) = (*self.0.numer() as u128, *self.0.denom() as u128);
        ((20 * n + d) / (2 * d)) as u64
    }

    /// The value rounded to one decimal, as an exact fraction.
    pub fn rounded(&self) -> Self {
        Percentage(Ratio::new(self.tenths(), 10))
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Percentage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tenths();
        write!(f, "{}.{}", t / 10, t % 10)
    }
}

impl Serialize for Percentage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.tenths() as f64 / 10.0)
    }
}

impl<'de> Deserialize<'de> for Percentage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom(format!("percentage out of range: {v}")));
        }
        Ok(Percentage(Ratio::new((v * 10.0).round() as u64, 10)))
    }
}

/// `|x ∩ y| / |x| × 100`, with `x` the snippet side.
pub fn containment(t_x: &NGramSet, t_y: &NGramSet) -> Result<Percentage, MatchError> {
    if t_x.n != t_y.n {
        return Err(MatchError::MismatchedGramSize {
            snippet: t_x.n,
            hunk: t_y.n,
        });
    }
    if t_x.is_empty() {
        return Err(MatchError::EmptyReference);
    }
    Ok(Percentage::of(
        t_x.intersection_count(t_y) as u64,
        t_x.total_grams() as u64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: bool,
    pub matched_gram_count: usize,
    pub snippet_gram_count: usize,
    /// Zero when the snippet has no grams at this `n`.
    pub containment_pct: Percentage,
}

pub fn match_snippet_against_hunk(
    snippet_grams: &NGramSet,
    hunk_grams: &NGramSet,
    threshold: usize,
) -> Result<MatchResult, MatchError> {
    if snippet_grams.n != hunk_grams.n {
        return Err(MatchError::MismatchedGramSize {
            snippet: snippet_grams.n,
            hunk: hunk_grams.n,
        });
    }
    let matched_gram_count = snippet_grams.intersection_count(hunk_grams);
    let containment_pct = match containment(snippet_grams, hunk_grams) {
        Ok(p) => p,
        Err(MatchError::EmptyReference) => Percentage::ZERO,
        Err(e) => return Err(e),
    };
    Ok(MatchResult {
        matched: matched_gram_count >= threshold,
        matched_gram_count,
        snippet_gram_count: snippet_grams.total_grams(),
        containment_pct,
    })
}
