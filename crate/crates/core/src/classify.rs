//! Hunk and pull-request labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffmodel::{Hunk, HunkHeader};
use crate::matching::{
    build_ngrams, containment, match_snippet_against_hunk, tokenize, MatchError, MatchResult,
    NGramSet, Percentage,
};
use crate::normalize::{normalize_lines, FileTypeProfile};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown label {0:?}")]
pub struct UnknownLabel(pub String);

/// Hunk-level outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HunkLabel {
    /// Snippet code appears in the hunk's added lines.
    PA,
    /// Snippets exist but none matched.
    PN,
    /// The conversation had no code.
    NE,
    /// File type not supported.
    CC,
    /// Processing failed.
    EE,
}

/// Pull-request-level outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrLabel {
    PA,
    PN,
    NE,
    /// Closed without merging.
    CL,
}

impl HunkLabel {
    pub const ALL: [HunkLabel; 5] = [HunkLabel::PA, HunkLabel::PN, HunkLabel::NE, HunkLabel::CC, HunkLabel::EE];

    pub fn as_str(self) -> &'static str {
        match self {
            HunkLabel::PA => "PA",
            HunkLabel::PN => "PN",
            HunkLabel::NE => "NE",
            HunkLabel::CC => "CC",
            HunkLabel::EE => "EE",
        }
    }
}

impl PrLabel {
    pub const ALL: [PrLabel; 4] = [PrLabel::PA, PrLabel::PN, PrLabel::NE, PrLabel::CL];

    pub fn as_str(self) -> &'static str {
        match self {
            PrLabel::PA => "PA",
            PrLabel::PN => "PN",
            PrLabel::NE => "NE",
            PrLabel::CL => "CL",
        }
    }
}

impl fmt::Display for HunkLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for PrLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PrLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl FromStr for HunkLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HunkLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SnippetRef {
    pub conversation_id: String,
    pub block_index: usize,
}

/// A snippet's grams, ready to match against many hunks.
#[derive(Debug, Clone)]
pub struct SnippetGrams {
    pub snippet: SnippetRef,
    pub grams: NGramSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkVerdict {
    pub label: HunkLabel,
    pub file: String,
    pub header: HunkHeader,
    pub best_match: Option<MatchResult>,
    pub matched_snippet: Option<SnippetRef>,
    pub failure_note: Option<String>,
}

impl HunkVerdict {
    fn bare(label: HunkLabel, file: &str, header: HunkHeader) -> Self {
        HunkVerdict {
            label,
            file: file.to_string(),
            header,
            best_match: None,
            matched_snippet: None,
            failure_note: None,
        }
    }

    pub fn unsupported(file: &str, header: HunkHeader) -> Self {
        HunkVerdict::bare(HunkLabel::CC, file, header)
    }

    pub fn failed(file: &str, header: HunkHeader, note: impl Into<String>) -> Self {
        HunkVerdict {
            failure_note: Some(note.into()),
            ..HunkVerdict::bare(HunkLabel::EE, file, header)
        }
    }
}

/// Normalizes, tokenizes and grams a unit of code.
pub fn unit_grams<S: AsRef<str>>(
    lines: &[S],
    profile: &FileTypeProfile,
    n: usize,
) -> Result<NGramSet, String> {
    let normalized = normalize_lines(lines, profile).map_err(|e| e.to_string())?;
    build_ngrams(&tokenize(&normalized), n).map_err(|e| e.to_string())
}

/// Grams of a hunk's added lines.
pub fn hunk_grams(hunk: &Hunk, profile: &FileTypeProfile, n: usize) -> Result<NGramSet, String> {
    let added: Vec<&str> = hunk.added_lines().collect();
    unit_grams(&added, profile, n)
}

/// Labels one hunk against every snippet of its pull request.
///
/// The best match is the snippet with the most shared grams; ties go to the
/// lowest block index, then the smallest conversation id.
pub fn classify_hunk(
    snippets: &[SnippetGrams],
    hunk: &Hunk,
    file: &str,
    profile: &FileTypeProfile,
    n: usize,
    threshold: usize,
) -> HunkVerdict {
    if !profile.supported {
        return HunkVerdict::unsupported(file, hunk.header);
    }
    if snippets.is_empty() {
        return HunkVerdict::bare(HunkLabel::NE, file, hunk.header);
    }
    let hunk_set = match hunk_grams(hunk, profile, n) {
        Ok(g) => g,
        Err(note) => return HunkVerdict::failed(file, hunk.header, note),
    };

    let mut best: Option<(&SnippetRef, MatchResult)> = None;
    for s in snippets {
        let result = match match_snippet_against_hunk(&s.grams, &hunk_set, threshold) {
            Ok(r) => r,
            Err(e) => return HunkVerdict::failed(file, hunk.header, e.to_string()),
        };
        let better = match &best {
            None => true,
            Some((r, m)) => {
                result.matched_gram_count > m.matched_gram_count
                    || (result.matched_gram_count == m.matched_gram_count
                        && (s.snippet.block_index, &s.snippet.conversation_id)
                            < (r.block_index, &r.conversation_id))
            }
        };
        if better {
            best = Some((&s.snippet, result));
        }
    }
    let (snippet, result) = best.expect("snippets is non-empty");
    HunkVerdict {
        label: if result.matched { HunkLabel::PA } else { HunkLabel::PN },
        file: file.to_string(),
        header: hunk.header,
        best_match: Some(result),
        matched_snippet: result.matched.then(|| snippet.clone()),
        failure_note: None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkCounts {
    pub pa: usize,
    pub pn: usize,
    pub ne: usize,
    pub cc: usize,
    pub ee: usize,
}

impl HunkCounts {
    pub fn tally<'a>(labels: impl IntoIterator<Item = &'a HunkLabel>) -> Self {
        let mut c = HunkCounts::default();
        for l in labels {
            *c.get_mut(*l) += 1;
        }
        c
    }

    pub fn get(&self, label: HunkLabel) -> usize {
        match label {
            HunkLabel::PA => self.pa,
            HunkLabel::PN => self.pn,
            HunkLabel::NE => self.ne,
            HunkLabel::CC => self.cc,
            HunkLabel::EE => self.ee,
        }
    }

    fn get_mut(&mut self, label: HunkLabel) -> &mut usize {
        match label {
            HunkLabel::PA => &mut self.pa,
            HunkLabel::PN => &mut self.pn,
            HunkLabel::NE => &mut self.ne,
            HunkLabel::CC => &mut self.cc,
            HunkLabel::EE => &mut self.ee,
        }
    }

    pub fn total(&self) -> usize {
        self.pa + self.pn + self.ne + self.cc + self.ee
    }

    pub fn add(&mut self, other: &HunkCounts) {
        for l in HunkLabel::ALL {
            *self.get_mut(l) += other.get(l);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequestVerdict {
    pub label: PrLabel,
    pub counts: HunkCounts,
    /// Present for PA pull requests.
    pub integration_pct: Option<Percentage>,
    pub merged: bool,
    pub snippet_count: usize,
}

/// Aggregates hunk labels into a pull-request label.
///
/// Closed-unmerged always yields CL. Otherwise any PA makes the PR PA, then
/// any PN makes it PN, else NE; CC and EE are counted but never decide.
/// A merged PR without any hunks is PN when the conversation had snippets.
pub fn classify_pull_request(
    hunk_verdicts: &[HunkVerdict],
    merged: bool,
    snippet_count: usize,
) -> PullRequestVerdict {
    let counts = HunkCounts::tally(hunk_verdicts.iter().map(|v| &v.label));
    let label = if !merged {
        PrLabel::CL
    } else if counts.pa > 0 {
        PrLabel::PA
    } else if counts.pn > 0 || (hunk_verdicts.is_empty() && snippet_count > 0) {
        PrLabel::PN
    } else {
        PrLabel::NE
    };
    PullRequestVerdict {
        label,
        counts,
        integration_pct: None,
        merged,
        snippet_count,
    }
}

/// Containment of the union of snippet grams in the PR's added grams.
pub fn aggregate_integration(
    snippet_grams: &[SnippetGrams],
    pr_added_grams: &NGramSet,
) -> Result<Percentage, MatchError> {
    let mut union = NGramSet::empty(pr_added_grams.n());
    for s in snippet_grams {
        union.extend_from(&s.grams)?;
    }
    containment(&union, pr_added_grams)
}
