//! Seeded synthetic corpora and diffs, for benchmarks, property tests and
//! the examples. The same seed always yields the same corpus.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conversation::CodeSnippet;
use crate::diffmodel::{DiffLine, FileDiff, Hunk, LineKind, PullRequestDiff};
use crate::pipeline::{ConversationInput, PrId, PullRequestInput};

const IDENTS: &[&str] = &[
    "value", "count", "items", "result", "config", "path", "user", "name", "data", "index", "buffer",
    "total", "offset", "limit", "parser", "token", "client", "server", "request", "response",
    "handler", "cache", "key", "entry", "node", "tree", "queue", "width", "height", "row", "col",
    "score", "label", "model", "batch", "width2", "frame", "logger", "session", "retry",
];

const FILES: &[(&str, u32)] = &[
    ("src/main.py", 30),
    ("lib/util.js", 15),
    ("app/models.py", 15),
    ("core/io.c", 10),
    ("web/app.ts", 10),
    ("README.md", 6),
    ("Cargo.lock", 4),
    ("assets/logo.png", 4),
    ("scripts/build.sh", 6),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub pull_requests: usize,
    /// Total code blocks across all conversations.
    pub snippets: usize,
    /// Total hunks across all diffs.
    pub hunks: usize,
}

impl CorpusSpec {
    pub fn new(seed: u64, pull_requests: usize, snippets: usize, hunks: usize) -> Self {
        CorpusSpec {
            seed,
            pull_requests,
            snippets,
            hunks,
        }
    }
}

fn ident(rng: &mut impl Rng) -> &'static str {
    IDENTS.choose(rng).expect("non-empty")
}

/// One line of plausible code.
pub fn random_code_line(rng: &mut impl Rng) -> String {
    let (a, b, c) = (ident(rng), ident(rng), ident(rng));
    let k: u32 = rng.random_range(0..100);
    match rng.random_range(0..9) {
        0 => format!("{a} = {b}({c}, {k})"),
        1 => format!("def {a}({b}, {c}):"),
        2 => format!("    return {a} + {b} * {k}"),
        3 => format!("if {a} > {k}:"),
        4 => format!("for {a} in {b}.{c}():"),
        5 => format!("    {a}.append({b}[{k}])"),
        6 => format!("{a}[\"{b}\"] = {c}  # {k}"),
        7 => format!("while not {a}.{b}:"),
        _ => format!("print(f\"{{{a}}} {b}\")"),
    }
}

fn code_lines(rng: &mut impl Rng, lo: usize, hi: usize) -> Vec<String> {
    (0..rng.random_range(lo..=hi)).map(|_| random_code_line(rng)).collect()
}

fn weighted_file(rng: &mut impl Rng) -> &'static str {
    let total: u32 = FILES.iter().map(|f| f.1).sum();
    let mut pick = rng.random_range(0..total);
    for (name, w) in FILES {
        if pick < *w {
            return name;
        }
        pick -= w;
    }
    FILES[0].0
}

/// Splits `total` into `parts` counts, each at least `min` when possible.
fn spread(rng: &mut impl Rng, total: usize, parts: usize, min: usize) -> Vec<usize> {
    if parts == 0 {
        return vec![];
    }
    let base = min.min(total / parts);
    let mut out = vec![base; parts];
    for _ in 0..total - base * parts {
        out[rng.random_range(0..parts)] += 1;
    }
    out
}

fn hunk_from(rng: &mut impl Rng, added: Vec<String>, old_start: u32) -> Hunk {
    let mut lines = Vec::new();
    if rng.random_bool(0.6) {
        lines.push(DiffLine::new(LineKind::Context, random_code_line(rng)));
    }
    for _ in 0..rng.random_range(0..3) {
        lines.push(DiffLine::new(LineKind::Removed, random_code_line(rng)));
    }
    lines.extend(added.into_iter().map(|t| DiffLine::new(LineKind::Added, t)));
    if rng.random_bool(0.5) {
        lines.push(DiffLine::new(LineKind::Context, random_code_line(rng)));
    }
    Hunk::from_lines(old_start, old_start, lines)
}

/// A corpus shaped like a mined dataset: about a tenth of PRs closed
/// unmerged, some PRs with no code in their conversations, and hunks that
/// copy, partly copy, or ignore the shared snippets.
pub fn synthetic_corpus(spec: &CorpusSpec) -> Vec<PullRequestInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prs = spec.pull_requests;
    let with_code: Vec<bool> = (0..prs).map(|_| rng.random_bool(0.85)).collect();
    let coded = with_code.iter().filter(|b| **b).count();
    let mut snippet_counts = spread(&mut rng, spec.snippets, coded, 1).into_iter();
    let hunk_counts = spread(&mut rng, spec.hunks, prs, 1);

    let mut out = Vec::with_capacity(prs);
    for (i, has_code) in with_code.into_iter().enumerate() {
        let id = PrId::new(&format!("owner{}", i % 37), &format!("repo{}", i % 11), i as u64 + 1);
        let n_snippets = if has_code { snippet_counts.next().unwrap_or(0) } else { 0 };
        let conv_id = format!("{:08x}-0000-4000-8000-{:012x}", spec.seed as u32, i);
        let snippets: Vec<CodeSnippet> = (0..n_snippets)
            .map(|b| {
                let lines = code_lines(&mut rng, 2, 12);
                CodeSnippet {
                    conversation_id: conv_id.clone(),
                    block_index: b,
                    language_hint: ["python", "py", ""].choose(&mut rng).filter(|h| !h.is_empty()).map(|h| h.to_string()),
                    line_count: lines.len(),
                    raw_text: lines.join("\n"),
                }
            })
            .collect();
        let conversations = vec![ConversationInput {
            conversation_id: conv_id,
            snippets: Ok(snippets.clone()),
        }];

        let mut files: Vec<FileDiff> = Vec::new();
        for h in 0..hunk_counts[i] {
            let mut path = weighted_file(&mut rng);
            while path.ends_with(".png") {
                let mut f = FileDiff::new(path, path);
                f.is_binary = true;
                files.push(f);
                path = weighted_file(&mut rng);
            }
            if files.last().is_none_or(|f| f.new_path != path || rng.random_bool(0.3)) {
                let mut f = FileDiff::new(path, path);
                f.extended_headers.push(format!("index {:07x}..{:07x} 100644", rng.random::<u32>() >> 4, rng.random::<u32>() >> 4));
                files.push(f);
            }
            let file = files.last_mut().expect("pushed above");
            let added = match (snippets.choose(&mut rng), rng.random_range(0..10)) {
                (Some(s), 0..=3) => {
                    let lines: Vec<&str> = s.raw_text.lines().collect();
                    let start = rng.random_range(0..lines.len());
                    let end = rng.random_range(start + 1..=lines.len());
                    lines[start..end].iter().map(|l| l.to_string()).collect()
                }
                (Some(s), 4..=5) => s
                    .raw_text
                    .lines()
                    .take(3)
                    .map(|l| format!("{} = {l}", ident(&mut rng)))
                    .collect(),
                _ => code_lines(&mut rng, 1, 8),
            };
            file.hunks.push(hunk_from(&mut rng, added, 10 * h as u32 + 1));
        }
        out.push(PullRequestInput {
            id,
            merged: rng.random_bool(0.9),
            diff: PullRequestDiff {
                files,
                ..PullRequestDiff::default()
            },
            conversations,
        });
    }
    out
}

/// A random multi-file diff whose serialized form round-trips through the
/// parser: text files with several hunks, created and deleted files,
/// renames and binary files.
pub fn random_diff(rng: &mut impl Rng) -> PullRequestDiff {
    let mut files = Vec::new();
    for i in 0..rng.random_range(1..6) {
        let name = format!("dir{}/{}_{i}.py", rng.random_range(0..3), ident(rng));
        let kind = rng.random_range(0..10);
        let mut f = match kind {
            0 => FileDiff::new("/dev/null", name.clone()),
            1 => FileDiff::new(name.clone(), "/dev/null"),
            2 => {
                let mut f = FileDiff::new(format!("old/{name}"), name.clone());
                f.is_rename = true;
                f.extended_headers.push("similarity index 90%".into());
                f.extended_headers.push(format!("rename from old/{name}"));
                f.extended_headers.push(format!("rename to {name}"));
                f
            }
            _ => FileDiff::new(name.clone(), name.clone()),
        };
        if kind == 3 {
            f.is_binary = true;
            f.extended_headers.push("index 0000001..0000002 100644".into());
            files.push(f);
            continue;
        }
        let mut old_start = 1;
        let mut new_start = 1;
        for _ in 0..rng.random_range(1..4) {
            let mut lines = Vec::new();
            for _ in 0..rng.random_range(1..8) {
                let k = match kind {
                    0 => LineKind::Added,
                    1 => LineKind::Removed,
                    _ => *[LineKind::Context, LineKind::Added, LineKind::Removed].choose(rng).expect("non-empty"),
                };
                let text = if rng.random_bool(0.1) { String::new() } else { random_code_line(rng) };
                lines.push(DiffLine::new(k, text));
            }
            let hunk = Hunk::from_lines(
                if kind == 0 { 0 } else { old_start },
                if kind == 1 { 0 } else { new_start },
                lines,
            );
            old_start += hunk.header.old_len + rng.random_range(1..20);
            new_start += hunk.header.new_len + rng.random_range(1..20);
            f.hunks.push(hunk);
            if kind <= 1 {
                break;
            }
        }
        files.push(f);
    }
    PullRequestDiff {
        files,
        ..PullRequestDiff::default()
    }
}
