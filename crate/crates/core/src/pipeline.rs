//! Classification of whole pull requests and corpora.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    aggregate_integration, classify_hunk, classify_pull_request, hunk_grams, unit_grams,
    HunkVerdict, PrLabel, PullRequestVerdict, SnippetGrams, SnippetRef,
};
use crate::conversation::CodeSnippet;
use crate::diffmodel::{HunkHeader, PullRequestDiff};
use crate::matching::NGramSet;
use crate::normalize::{FileTypeProfile, Registry};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrId {
    pub owner: String,
    pub repo: String,
    pub number: u64,
}

impl PrId {
    pub fn new(owner: &str, repo: &str, number: u64) -> Self {
        PrId {
            owner: owner.to_string(),
            repo: repo.to_string(),
            number,
        }
    }

    /// Directory name in the dataset layout: `owner__repo__number`.
    pub fn dir_name(&self) -> String {
        format!("{}__{}__{}", self.owner, self.repo, self.number)
    }

    pub fn from_dir_name(name: &str) -> Option<Self> {
        let mut parts = name.rsplitn(3, "__");
        let number = parts.next()?.parse().ok()?;
        let repo = parts.next()?;
        let owner = parts.next()?;
        (!owner.is_empty() && !repo.is_empty()).then(|| PrId::new(owner, repo, number))
    }
}

impl fmt::Display for PrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.owner, self.repo, self.number)
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub ngram: usize,
    pub match_threshold: usize,
    pub registry: Registry,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            ngram: 1,
            match_threshold: 1,
            registry: Registry::builtin(),
        }
    }
}

/// One conversation of a PR: its snippets, or why they could not be read.
#[derive(Debug, Clone)]
pub struct ConversationInput {
    pub conversation_id: String,
    pub snippets: Result<Vec<CodeSnippet>, String>,
}

#[derive(Debug, Clone)]
pub struct PullRequestInput {
    pub id: PrId,
    pub merged: bool,
    pub diff: PullRequestDiff,
    pub conversations: Vec<ConversationInput>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrOutcome {
    pub id: PrId,
    pub verdict: PullRequestVerdict,
    pub hunks: Vec<HunkVerdict>,
    pub truncated: bool,
}

impl PrOutcome {
    pub fn has_failures(&self) -> bool {
        self.verdict.counts.ee > 0
    }

    /// Outcome for a PR whose inputs could not be loaded at all.
    pub fn failed(id: PrId, note: impl Into<String>) -> Self {
        let hunks = vec![HunkVerdict::failed("", HunkHeader::default(), note)];
        PrOutcome {
            id,
            verdict: classify_pull_request(&hunks, true, 0),
            hunks,
            truncated: false,
        }
    }
}

/// Profile used for a snippet's own normalization: its fence hint when the
/// registry knows it, else the first supported file type in the diff.
fn snippet_profile<'a>(
    snippet: &CodeSnippet,
    registry: &'a Registry,
    fallback: &'a FileTypeProfile,
) -> &'a FileTypeProfile {
    snippet
        .language_hint
        .as_deref()
        .and_then(|h| registry.for_hint(h))
        .unwrap_or(fallback)
}

fn plain_profile() -> FileTypeProfile {
    FileTypeProfile {
        name: "plain".into(),
        extensions: vec![".txt".into()],
        supported: true,
        ..FileTypeProfile::unsupported()
    }
}

/// Classifies every hunk of one pull request and aggregates the result.
pub fn classify_pr(input: &PullRequestInput, settings: &Settings) -> PrOutcome {
    let n = settings.ngram;
    let registry = &settings.registry;
    let profiles: Vec<FileTypeProfile> = input
        .diff
        .files
        .iter()
        .map(|f| registry.detect(f.path()))
        .collect();
    let fallback = profiles
        .iter()
        .find(|p| p.supported)
        .cloned()
        .unwrap_or_else(plain_profile);

    let mut failure: Option<String> = None;
    let mut snippets: Vec<SnippetGrams> = Vec::new();
    let mut snippet_count = 0;
    for conv in &input.conversations {
        match &conv.snippets {
            Ok(list) => {
                for s in list {
                    snippet_count += 1;
                    let profile = snippet_profile(s, registry, &fallback);
                    match unit_grams(&s.raw_text.lines().collect::<Vec<_>>(), profile, n) {
                        Ok(grams) => snippets.push(SnippetGrams {
                            snippet: SnippetRef {
                                conversation_id: s.conversation_id.clone(),
                                block_index: s.block_index,
                            },
                            grams,
                        }),
                        Err(e) => {
                            failure.get_or_insert(format!("conversation {}: {e}", conv.conversation_id));
                        }
                    }
                }
            }
            Err(e) => {
                failure.get_or_insert(format!("conversation {}: {e}", conv.conversation_id));
            }
        }
    }

    let mut hunks = Vec::new();
    let mut pr_added = NGramSet::empty(n.max(1));
    for (file, profile) in input.diff.files.iter().zip(&profiles) {
        let path = file.path();
        if file.is_binary {
            hunks.push(HunkVerdict::unsupported(path, HunkHeader::default()));
            continue;
        }
        for hunk in &file.hunks {
            let verdict = match (&failure, profile.supported) {
                (Some(note), true) => HunkVerdict::failed(path, hunk.header, note.clone()),
                _ => classify_hunk(&snippets, hunk, path, profile, n, settings.match_threshold),
            };
            if profile.supported && failure.is_none() {
                if let Ok(g) = hunk_grams(hunk, profile, n) {
                    let _ = pr_added.extend_from(&g);
                }
            }
            hunks.push(verdict);
        }
        if let Some(err) = &file.malformed {
            hunks.push(HunkVerdict::failed(path, HunkHeader::default(), err.clone()));
        }
    }

    let mut verdict = classify_pull_request(&hunks, input.merged, snippet_count);
    if verdict.label == PrLabel::PA {
        verdict.integration_pct = aggregate_integration(&snippets, &pr_added).ok();
    }
    PrOutcome {
        id: input.id.clone(),
        verdict,
        hunks,
        truncated: input.diff.truncated,
    }
}

/// Classifies a corpus on up to `parallelism` threads. Results are sorted
/// by (owner, repo, number) whatever the thread count.
pub fn classify_corpus(
    inputs: &[PullRequestInput],
    settings: &Settings,
    parallelism: usize,
) -> Vec<PrOutcome> {
    let mut outcomes: Vec<PrOutcome> = if parallelism <= 1 {
        inputs.iter().map(|i| classify_pr(i, settings)).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
            Ok(pool) => pool.install(|| inputs.par_iter().map(|i| classify_pr(i, settings)).collect()),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); classifying sequentially");
                inputs.iter().map(|i| classify_pr(i, settings)).collect()
            }
        }
    };
    outcomes.sort_by(|a, b| a.id.cmp(&b.id));
    outcomes
}
