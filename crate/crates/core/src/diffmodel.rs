//! Unified diff model.
//!
//! Parses the text produced by `git diff` (or the code host's `.diff` media
//! type) into files and hunks, and writes it back out. Hunk bodies are read
//! by counting against the `@@` header, so content lines that happen to look
//! like file headers (`--- x`) are still attributed to the right hunk.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEV_NULL: &str = "/dev/null";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffError {
    #[error("malformed hunk header: {0:?}")]
    MalformedHeader(String),
}

/// Coordinates from a `@@ -s,n +s,n @@` line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HunkHeader {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
}

impl HunkHeader {
    pub fn new(old_start: u32, old_len: u32, new_start: u32, new_len: u32) -> Self {
        HunkHeader {
            old_start,
            old_len,
            new_start,
            new_len,
        }
    }

    /// Parses the range portion of a header line, e.g. `@@ -1,3 +1,4 @@ fn main`.
    /// Returns the header and the trailing section heading, if any.
    pub fn parse(line: &str) -> Result<(HunkHeader, Option<String>), DiffError> {
        let bad = || DiffError::MalformedHeader(line.to_string());
        let rest = line.strip_prefix("@@ ").ok_or_else(bad)?;
        let end = rest.find(" @@").ok_or_else(bad)?;
        let ranges = &rest[..end];
        let heading = rest[end + 3..].strip_prefix(' ').unwrap_or(&rest[end + 3..]);

        let mut parts = ranges.split(' ');
        let old = parts.next().and_then(|p| p.strip_prefix('-')).ok_or_else(bad)?;
        let new = parts.next().and_then(|p| p.strip_prefix('+')).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let (old_start, old_len) = parse_range(old).ok_or_else(bad)?;
        let (new_start, new_len) = parse_range(new).ok_or_else(bad)?;
        let heading = (!heading.is_empty()).then(|| heading.to_string());
        Ok((HunkHeader::new(old_start, old_len, new_start, new_len), heading))
    }
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    match s.split_once(',') {
        Some((start, len)) if digits(start) && digits(len) => {
            Some((start.parse().ok()?, len.parse().ok()?))
        }
        None if digits(s) => Some((s.parse().ok()?, 1)),
        _ => None,
    }
}

fn fmt_range(f: &mut impl fmt::Write, marker: char, start: u32, len: u32) -> fmt::Result {
    // git omits the length when it is exactly one
    if len == 1 {
        write!(f, "{marker}{start}")
    } else {
        write!(f, "{marker}{start},{len}")
    }
}

impl fmt::Display for HunkHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("@@ ")?;
        fmt_range(f, '-', self.old_start, self.old_len)?;
        f.write_char(' ')?;
        fmt_range(f, '+', self.new_start, self.new_len)?;
        f.write_str(" @@")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineKind {
    Context,
    Added,
    Removed,
}

impl LineKind {
    fn marker(self) -> char {
        match self {
            LineKind::Context => ' ',
            LineKind::Added => '+',
            LineKind::Removed => '-',
        }
    }
}

/// One body line of a hunk. `text` never includes the marker character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffLine {
    pub kind: LineKind,
    pub text: String,
}

impl DiffLine {
    pub fn new(kind: LineKind, text: impl Into<String>) -> Self {
        DiffLine {
            kind,
            text: text.into(),
        }
    }
}

/// A contiguous change block. Lines are kept in diff order; the per-kind
/// views are exposed through [`Hunk::added_lines`] and friends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub header: HunkHeader,
    /// Text after the closing `@@`, usually the enclosing function.
    pub heading: Option<String>,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    /// Builds a hunk whose header lengths are derived from `lines`.
    pub fn from_lines(old_start: u32, new_start: u32, lines: Vec<DiffLine>) -> Self {
        let old_len = lines.iter().filter(|l| l.kind != LineKind::Added).count() as u32;
        let new_len = lines.iter().filter(|l| l.kind != LineKind::Removed).count() as u32;
        Hunk {
            header: HunkHeader::new(old_start, old_len, new_start, new_len),
            heading: None,
            lines,
        }
    }

    /// An add-only hunk as found in newly created files.
    pub fn added(lines: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let lines: Vec<DiffLine> = lines
            .into_iter()
            .map(|t| DiffLine::new(LineKind::Added, t))
            .collect();
        let new_start = if lines.is_empty() { 0 } else { 1 };
        Hunk::from_lines(0, new_start, lines)
    }

    fn of_kind(&self, kind: LineKind) -> impl Iterator<Item = &str> {
        self.lines
            .iter()
            .filter(move |l| l.kind == kind)
            .map(|l| l.text.as_str())
    }

    pub fn added_lines(&self) -> impl Iterator<Item = &str> {
        self.of_kind(LineKind::Added)
    }

    pub fn removed_lines(&self) -> impl Iterator<Item = &str> {
        self.of_kind(LineKind::Removed)
    }

    pub fn context_lines(&self) -> impl Iterator<Item = &str> {
        self.of_kind(LineKind::Context)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    /// Path on the old side, without the `a/` prefix. `/dev/null` for created files.
    pub old_path: String,
    /// Path on the new side, without the `b/` prefix. `/dev/null` for deleted files.
    pub new_path: String,
    /// True when the section began with a `diff --git` line.
    pub git: bool,
    /// Extended header lines (`index ..`, `new file mode ..`, `rename from ..`), verbatim.
    pub extended_headers: Vec<String>,
    pub hunks: Vec<Hunk>,
    pub is_rename: bool,
    pub is_binary: bool,
    /// Set when a hunk header in this file failed to parse. Hunks before the
    /// bad header are kept; the remainder of the file is skipped.
    pub malformed: Option<String>,
}

impl FileDiff {
    pub fn new(old_path: impl Into<String>, new_path: impl Into<String>) -> Self {
        FileDiff {
            old_path: old_path.into(),
            new_path: new_path.into(),
            git: true,
            extended_headers: Vec::new(),
            hunks: Vec::new(),
            is_rename: false,
            is_binary: false,
            malformed: None,
        }
    }

    /// The path the change lands on: the new path, unless the file was deleted.
    pub fn path(&self) -> &str {
        if self.new_path == DEV_NULL {
            &self.old_path
        } else {
            &self.new_path
        }
    }
}

/// Where a diff came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffSource {
    #[default]
    Inline,
    Url(String),
    Path(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequestDiff {
    pub files: Vec<FileDiff>,
    pub source: DiffSource,
    /// The host only returned a partial representation of the change.
    pub truncated: bool,
}

impl PullRequestDiff {
    pub fn hunk_count(&self) -> usize {
        self.files.iter().map(|f| f.hunks.len()).sum()
    }
}

fn strip_side(path: &str, prefix: &str) -> String {
    // `--- a/foo.c\t2024-01-01 ...` from plain diff -u carries a timestamp
    let path = path.split('\t').next().unwrap_or(path);
    if path == DEV_NULL {
        return path.to_string();
    }
    path.strip_prefix(prefix).unwrap_or(path).to_string()
}

fn parse_git_line(rest: &str) -> (String, String) {
    // `a/<old> b/<new>`; with spaces in paths prefer the split where both halves agree
    let candidates: Vec<usize> = rest.match_indices(" b/").map(|(i, _)| i).collect();
    let split = candidates
        .iter()
        .copied()
        .find(|&i| rest[..i].strip_prefix("a/") == Some(&rest[i + 3..]))
        .or_else(|| candidates.first().copied());
    match split {
        Some(i) => (
            rest[..i].strip_prefix("a/").unwrap_or(&rest[..i]).to_string(),
            rest[i + 3..].to_string(),
        ),
        None => (rest.to_string(), rest.to_string()),
    }
}

fn parse_binary_line(line: &str) -> Option<(String, String)> {
    let body = line.strip_prefix("Binary files ")?.strip_suffix(" differ")?;
    let (old, new) = body.split_once(" and ")?;
    Some((strip_side(old, "a/"), strip_side(new, "b/")))
}

fn is_file_header_pair(lines: &[&str], i: usize) -> bool {
    lines[i].starts_with("--- ")
        && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ "))
}

/// Parses unified diff text. Never fails outright: a bad hunk header marks
/// the enclosing file as malformed and parsing resumes at the next file.
pub fn parse_unified_diff(text: &str) -> PullRequestDiff {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }

    let mut files: Vec<FileDiff> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(rest) = line.strip_prefix("diff --git ") {
            let (old, new) = parse_git_line(rest);
            let mut file = FileDiff::new(old, new);
            i = parse_file_body(&lines, i + 1, &mut file);
            files.push(file);
        } else if is_file_header_pair(&lines, i) {
            let mut file = FileDiff::new(String::new(), String::new());
            file.git = false;
            i = parse_file_body(&lines, i, &mut file);
            files.push(file);
        } else {
            // preamble (commit message, `index` lines of plain diffs, ...)
            i += 1;
        }
    }

    PullRequestDiff {
        files,
        source: DiffSource::Inline,
        truncated: false,
    }
}

/// Consumes one file section starting at `i`; returns the index of the first
/// line that belongs to the next file.
fn parse_file_body(lines: &[&str], mut i: usize, file: &mut FileDiff) -> usize {
    // extended headers
    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("diff --git ") || line.starts_with("@@") {
            break;
        }
        if is_file_header_pair(lines, i) {
            file.old_path = strip_side(&lines[i][4..], "a/");
            file.new_path = strip_side(&lines[i + 1][4..], "b/");
            i += 2;
            break;
        }
        if let Some((old, new)) = parse_binary_line(line) {
            file.old_path = old;
            file.new_path = new;
            file.is_binary = true;
            return i + 1;
        }
        if !file.git {
            break;
        }
        if let Some(p) = line.strip_prefix("rename from ") {
            file.old_path = p.to_string();
            file.is_rename = true;
        } else if let Some(p) = line.strip_prefix("rename to ") {
            file.new_path = p.to_string();
            file.is_rename = true;
        }
        file.extended_headers.push(line.to_string());
        i += 1;
    }

    // hunks
    while i < lines.len() {
        let line = lines[i];
        if !line.starts_with("@@") {
            break;
        }
        match HunkHeader::parse(line) {
            Ok((header, heading)) => {
                let (hunk, next) = parse_hunk_body(lines, i + 1, header, heading);
                file.hunks.push(hunk);
                i = next;
            }
            Err(err) => {
                log::warn!("{err}; skipping rest of {}", file.path());
                file.malformed = Some(err.to_string());
                i += 1;
                while i < lines.len()
                    && !lines[i].starts_with("diff --git ")
                    && !is_file_header_pair(lines, i)
                {
                    i += 1;
                }
                return i;
            }
        }
    }
    i
}

fn parse_hunk_body(
    lines: &[&str],
    mut i: usize,
    header: HunkHeader,
    heading: Option<String>,
) -> (Hunk, usize) {
    let mut old_left = header.old_len;
    let mut new_left = header.new_len;
    let mut body = Vec::new();

    while i < lines.len() && (old_left > 0 || new_left > 0) {
        let line = lines[i];
        let (kind, text) = match line.as_bytes().first() {
            Some(b'+') if new_left > 0 => (LineKind::Added, &line[1..]),
            Some(b'-') if old_left > 0 => (LineKind::Removed, &line[1..]),
            Some(b' ') if old_left > 0 && new_left > 0 => (LineKind::Context, &line[1..]),
            // editors that strip trailing whitespace turn " " into ""
            None if old_left > 0 && new_left > 0 => (LineKind::Context, ""),
            Some(b'\\') => {
                i += 1;
                continue;
            }
            // a short hunk, as in truncated diffs
            _ => break,
        };
        match kind {
            LineKind::Added => new_left -= 1,
            LineKind::Removed => old_left -= 1,
            LineKind::Context => {
                old_left -= 1;
                new_left -= 1;
            }
        }
        body.push(DiffLine::new(kind, text));
        i += 1;
    }
    // trailing "\ No newline at end of file"
    while i < lines.len() && lines[i].starts_with('\\') {
        i += 1;
    }
    (
        Hunk {
            header,
            heading,
            lines: body,
        },
        i,
    )
}

fn side(path: &str, prefix: &str) -> String {
    if path == DEV_NULL {
        path.to_string()
    } else {
        format!("{prefix}{path}")
    }
}

/// Writes a diff back to unified-diff text.
pub fn serialize_diff(diff: &PullRequestDiff) -> String {
    let mut out = String::new();
    for file in &diff.files {
        write_file(&mut out, file);
    }
    out
}

fn write_file(out: &mut String, file: &FileDiff) {
    if file.git {
        let old = if file.old_path == DEV_NULL { &file.new_path } else { &file.old_path };
        let new = if file.new_path == DEV_NULL { &file.old_path } else { &file.new_path };
        let _ = writeln!(out, "diff --git a/{old} b/{new}");
        for h in &file.extended_headers {
            out.push_str(h);
            out.push('\n');
        }
    }
    if file.is_binary {
        let _ = writeln!(
            out,
            "Binary files {} and {} differ",
            side(&file.old_path, "a/"),
            side(&file.new_path, "b/")
        );
        return;
    }
    if !file.hunks.is_empty() || !file.git {
        let _ = writeln!(out, "--- {}", side(&file.old_path, "a/"));
        let _ = writeln!(out, "+++ {}", side(&file.new_path, "b/"));
    }
    for hunk in &file.hunks {
        let _ = write!(out, "{}", hunk.header);
        if let Some(h) = &hunk.heading {
            let _ = write!(out, " {h}");
        }
        out.push('\n');
        for line in &hunk.lines {
            out.push(line.kind.marker());
            out.push_str(&line.text);
            out.push('\n');
        }
    }
}
