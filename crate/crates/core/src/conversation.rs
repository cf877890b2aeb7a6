//! Share links and code snippets from saved conversation exports.
//!
//! Only standalone blocks count as snippets: fenced blocks in markdown and
//! `<pre>` regions in HTML. Inline code spans are ignored. Nothing here
//! touches the network; exports are read from local files by the caller.

use std::collections::HashSet;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SHARE_ID_LEN: usize = 36;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConversationError {
    #[error("unsupported export format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed export: {0}")]
    MalformedDocument(String),
    #[error("invalid link pattern {pattern:?}: {message}")]
    BadPattern { pattern: String, message: String },
}

/// Where in a pull request a link was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkSource {
    Description,
    CommitMessage,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareLink {
    pub url: String,
    pub conversation_id: String,
    pub found_in: LinkSource,
    /// Character (not byte) offset of the url in the scanned text.
    pub offset: usize,
}

/// A share-link URL prefix followed by a fixed-length id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkPattern {
    pub name: String,
    pub prefix: String,
    #[serde(default = "default_id_len")]
    pub id_len: usize,
}

fn default_id_len() -> usize {
    SHARE_ID_LEN
}

impl LinkPattern {
    pub fn new(name: &str, prefix: &str) -> Self {
        LinkPattern {
            name: name.to_string(),
            prefix: prefix.to_string(),
            id_len: SHARE_ID_LEN,
        }
    }

    /// `https://chat.openai.com/share/<36 chars>`.
    pub fn legacy() -> Self {
        LinkPattern::new("chat.openai.com", "https://chat.openai.com/share/")
    }

    /// The newer share domain, off by default.
    pub fn current() -> Self {
        LinkPattern::new("chatgpt.com", "https://chatgpt.com/share/")
    }
}

/// Compiled set of link patterns.
#[derive(Debug, Clone)]
pub struct LinkMatcher {
    patterns: Vec<(LinkPattern, Regex)>,
}

impl Default for LinkMatcher {
    fn default() -> Self {
        LinkMatcher::new(vec![LinkPattern::legacy()]).expect("built-in pattern compiles")
    }
}

impl LinkMatcher {
    pub fn new(patterns: Vec<LinkPattern>) -> Result<Self, ConversationError> {
        let patterns = patterns
            .into_iter()
            .map(|p| {
                // the id run is matched greedily and its length checked after,
                // so 37 valid characters is a rejection rather than a 36-char prefix match
                let re = Regex::new(&format!("{}([A-Za-z0-9-]+)", regex::escape(&p.prefix)))
                    .map_err(|e| ConversationError::BadPattern {
                        pattern: p.prefix.clone(),
                        message: e.to_string(),
                    })?;
                Ok((p, re))
            })
            .collect::<Result<_, _>>()?;
        Ok(LinkMatcher { patterns })
    }

    pub fn with_current_domain(enabled: bool) -> Self {
        let mut patterns = vec![LinkPattern::legacy()];
        if enabled {
            patterns.push(LinkPattern::current());
        }
        LinkMatcher::new(patterns).expect("built-in patterns compile")
    }

    pub fn patterns(&self) -> impl Iterator<Item = &LinkPattern> {
        self.patterns.iter().map(|(p, _)| p)
    }

    /// Finds share links in `text`, in order of appearance, keeping the
    /// first occurrence of each conversation id.
    pub fn extract(&self, text: &str, found_in: LinkSource) -> Vec<ShareLink> {
        let mut hits: Vec<(usize, ShareLink)> = Vec::new();
        for (pattern, re) in &self.patterns {
            for caps in re.captures_iter(text) {
                let whole = caps.get(0).expect("group 0");
                let id = caps.get(1).expect("id group").as_str();
                if id.len() != pattern.id_len {
                    continue;
                }
                hits.push((
                    whole.start(),
                    ShareLink {
                        url: whole.as_str().to_string(),
                        conversation_id: id.to_string(),
                        found_in,
                        offset: text[..whole.start()].chars().count(),
                    },
                ));
            }
        }
        hits.sort_by_key(|(start, _)| *start);
        let mut seen = HashSet::new();
        hits.into_iter()
            .map(|(_, link)| link)
            .filter(|link| seen.insert(link.conversation_id.clone()))
            .collect()
    }
}

/// Convenience wrapper over [`LinkMatcher::extract`].
pub fn extract_share_links(text: &str, matcher: &LinkMatcher, found_in: LinkSource) -> Vec<ShareLink> {
    matcher.extract(text, found_in)
}

/// Merges link lists, keeping the first occurrence of each id.
pub fn dedup_links(links: impl IntoIterator<Item = ShareLink>) -> Vec<ShareLink> {
    let mut seen = HashSet::new();
    links
        .into_iter()
        .filter(|l| seen.insert(l.conversation_id.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSnippet {
    pub conversation_id: String,
    pub block_index: usize,
    pub language_hint: Option<String>,
    pub raw_text: String,
    pub line_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Html,
    Markdown,
}

impl ExportFormat {
    pub fn from_path(path: &Path) -> Result<Self, ConversationError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "html" | "htm" => Ok(ExportFormat::Html),
            "md" | "markdown" => Ok(ExportFormat::Markdown),
            _ => Err(ConversationError::UnsupportedFormat(path.display().to_string())),
        }
    }
}

struct RawBlock {
    hint: Option<String>,
    text: String,
}

/// Extracts the standalone code blocks of one conversation, in document order.
pub fn parse_conversation_export(
    conversation_id: &str,
    document: &str,
    format: ExportFormat,
) -> Result<Vec<CodeSnippet>, ConversationError> {
    let blocks = match format {
        ExportFormat::Markdown => markdown_blocks(document),
        ExportFormat::Html => html_blocks(document)?,
    };
    let snippets = blocks
        .into_iter()
        .filter(|b| !b.text.trim().is_empty())
        .enumerate()
        .map(|(block_index, b)| {
            let raw_text = b.text.strip_suffix('\n').unwrap_or(&b.text).to_string();
            CodeSnippet {
                conversation_id: conversation_id.to_string(),
                block_index,
                language_hint: b.hint,
                line_count: raw_text.lines().count(),
                raw_text,
            }
        })
        .collect();
    Ok(snippets)
}

fn markdown_blocks(doc: &str) -> Vec<RawBlock> {
    let mut blocks = Vec::new();
    let mut lines = doc.lines();
    while let Some(line) = lines.next() {
        let Some((fence_char, fence_len, indent, info)) = opening_fence(line) else {
            continue;
        };
        let mut text = String::new();
        // an unclosed fence runs to the end of the document
        for body in lines.by_ref() {
            if is_closing_fence(body, fence_char, fence_len) {
                break;
            }
            text.push_str(strip_indent(body, indent));
            text.push('\n');
        }
        let hint = info.split_whitespace().next().map(str::to_string);
        blocks.push(RawBlock { hint, text });
    }
    blocks
}

fn leading_spaces(line: &str) -> usize {
    line.bytes().take_while(|&b| b == b' ').count()
}

fn opening_fence(line: &str) -> Option<(char, usize, usize, &str)> {
    let indent = leading_spaces(line);
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let fence_char = rest.chars().next().filter(|c| *c == '`' || *c == '~')?;
    let fence_len = rest.chars().take_while(|c| *c == fence_char).count();
    if fence_len < 3 {
        return None;
    }
    let info = rest[fence_len..].trim();
    if fence_char == '`' && info.contains('`') {
        return None;
    }
    Some((fence_char, fence_len, indent, info))
}

fn is_closing_fence(line: &str, fence_char: char, fence_len: usize) -> bool {
    let indent = leading_spaces(line);
    if indent > 3 {
        return false;
    }
    let rest = line[indent..].trim_end();
    rest.len() >= fence_len && rest.chars().all(|c| c == fence_char)
}

fn strip_indent(line: &str, indent: usize) -> &str {
    let n = leading_spaces(line).min(indent);
    &line[n..]
}

/// Finds `<pre>` regions. Inside a region, the first `<code>` element wins
/// when present, since chat exports put toolbar text ("Copy code") inside
/// the `<pre>` next to the code itself.
fn html_blocks(doc: &str) -> Result<Vec<RawBlock>, ConversationError> {
    let lower = doc.to_ascii_lowercase();
    let mut blocks = Vec::new();
    let mut pos = 0;
    while let Some(start) = find_open_tag(&lower, "pre", pos) {
        let open_end = tag_end(&lower, start)?;
        let close = lower[open_end..]
            .find("</pre")
            .map(|i| i + open_end)
            .ok_or_else(|| ConversationError::MalformedDocument(format!("unterminated <pre> at byte {start}")))?;
        let inner = &doc[open_end..close];
        let inner_lower = &lower[open_end..close];
        blocks.push(pre_region(inner, inner_lower, &doc[start..open_end])?);
        pos = tag_end(&lower, close)?;
    }
    Ok(blocks)
}

/// Position of the next `<name` tag (followed by `>`, whitespace or `/`).
fn find_open_tag(lower: &str, name: &str, from: usize) -> Option<usize> {
    let needle = format!("<{name}");
    let mut at = from;
    while let Some(i) = lower[at..].find(&needle) {
        let i = at + i;
        match lower.as_bytes().get(i + needle.len()) {
            Some(b'>') | Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r') | Some(b'/') => {
                return Some(i)
            }
            _ => at = i + needle.len(),
        }
    }
    None
}

fn tag_end(lower: &str, start: usize) -> Result<usize, ConversationError> {
    lower[start..]
        .find('>')
        .map(|i| start + i + 1)
        .ok_or_else(|| ConversationError::MalformedDocument(format!("unterminated tag at byte {start}")))
}

fn pre_region(inner: &str, inner_lower: &str, pre_tag: &str) -> Result<RawBlock, ConversationError> {
    if let Some(code_start) = find_open_tag(inner_lower, "code", 0) {
        let code_end = tag_end(inner_lower, code_start)?;
        let close = inner_lower[code_end..]
            .find("</code")
            .map(|i| i + code_end)
            .unwrap_or(inner.len());
        let hint = language_class(&inner[code_start..code_end]);
        return Ok(RawBlock {
            hint,
            text: html_text(&inner[code_end..close]),
        });
    }
    Ok(RawBlock {
        hint: language_class(pre_tag),
        text: html_text(inner),
    })
}

fn language_class(tag: &str) -> Option<String> {
    let lower = tag.to_ascii_lowercase();
    let i = lower.find("language-").or_else(|| lower.find("lang-"))?;
    let rest = &tag[i..];
    let rest = &rest[rest.find('-')? + 1..];
    let end = rest
        .find(|c: char| c.is_whitespace() || c == '"' || c == '\'' || c == '>')
        .unwrap_or(rest.len());
    let hint = &rest[..end];
    (!hint.is_empty()).then(|| hint.to_string())
}

/// Drops tags, turns `<br>` into newlines and decodes entities.
fn html_text(fragment: &str) -> String {
    let mut out = String::with_capacity(fragment.len());
    let mut rest = fragment;
    while let Some(lt) = rest.find('<') {
        out.push_str(&decode_entities(&rest[..lt]));
        let after = &rest[lt..];
        let Some(gt) = after.find('>') else {
            out.push_str(&decode_entities(after));
            return out;
        };
        let tag = after[1..gt].trim().to_ascii_lowercase();
        if tag == "br" || tag.starts_with("br ") || tag.starts_with("br/") {
            out.push('\n');
        }
        rest = &after[gt + 1..];
    }
    out.push_str(&decode_entities(rest));
    out
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp..];
        let decoded = after.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let name = &after[1..semi];
            let ch = match name {
                "lt" => Some('<'),
                "gt" => Some('>'),
                "amp" => Some('&'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ => name.strip_prefix('#').and_then(|num| {
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok(),
                        None => num.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            ch.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &after[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: &str = "0123456789abcdefABCDEF-0123456789abc";

    #[test]
    fn id_fixture_is_36_chars() {
        assert_eq!(ID.len(), 36);
    }

    #[test]
    fn finds_one_link() {
        let text = format!("I asked https://chat.openai.com/share/{ID} about it");
        let links = LinkMatcher::default().extract(&text, LinkSource::Description);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].conversation_id, ID);
        assert_eq!(links[0].offset, 8);
        assert_eq!(links[0].found_in, LinkSource::Description);
    }

    #[test]
    fn rejects_short_and_long_ids() {
        let m = LinkMatcher::default();
        let short = format!("https://chat.openai.com/share/{} done", &ID[..35]);
        let long = format!("https://chat.openai.com/share/{ID}x done");
        assert!(m.extract(&short, LinkSource::Comment).is_empty());
        assert!(m.extract(&long, LinkSource::Comment).is_empty());
    }

    #[test]
    fn deduplicates_by_id() {
        let other = "ffffffff-ffff-ffff-ffff-ffffffffffff";
        let text = format!(
            "see https://chat.openai.com/share/{ID}, and https://chat.openai.com/share/{other}. again: https://chat.openai.com/share/{ID}"
        );
        let links = LinkMatcher::default().extract(&text, LinkSource::Comment);
        let ids: Vec<_> = links.iter().map(|l| l.conversation_id.as_str()).collect();
        assert_eq!(ids, [ID, other]);
        assert_eq!(links[0].offset, 4);
    }

    #[test]
    fn newer_domain_is_opt_in() {
        let text = format!("https://chatgpt.com/share/{ID}");
        assert!(LinkMatcher::default().extract(&text, LinkSource::Comment).is_empty());
        assert_eq!(LinkMatcher::with_current_domain(true).extract(&text, LinkSource::Comment).len(), 1);
    }

    #[test]
    fn offset_counts_characters() {
        let text = format!("é ü https://chat.openai.com/share/{ID}");
        let links = LinkMatcher::default().extract(&text, LinkSource::Comment);
        assert_eq!(links[0].offset, 4);
    }

    #[test]
    fn markdown_single_block() {
        let doc = "Here you go:\n\n```python\nimport os\nprint(os.getcwd())\nx = 1\n```\n\nHope that helps.";
        let s = parse_conversation_export("c", doc, ExportFormat::Markdown).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].line_count, 3);
        assert_eq!(s[0].language_hint.as_deref(), Some("python"));
        assert_eq!(s[0].raw_text, "import os\nprint(os.getcwd())\nx = 1");
    }

    #[test]
    fn markdown_inline_spans_are_not_snippets() {
        let doc = "Use `let x = 1;` or ``vec![]`` inline.\nAlso `foo()`.";
        assert!(parse_conversation_export("c", doc, ExportFormat::Markdown).unwrap().is_empty());
    }

    #[test]
    fn markdown_tilde_and_longer_fences() {
        let doc = "~~~\na\n~~~\n````rust\n```\nnested\n````\n";
        let s = parse_conversation_export("c", doc, ExportFormat::Markdown).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].raw_text, "```\nnested");
        assert_eq!(s[1].block_index, 1);
    }

    #[test]
    fn whitespace_only_blocks_are_dropped() {
        let doc = "```\n   \n\n```\n```\nreal\n```\n";
        let s = parse_conversation_export("c", doc, ExportFormat::Markdown).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].block_index, 0);
    }

    #[test]
    fn html_two_blocks_among_prose() {
        let doc = r#"<html><body>
<p>SENTINEL-PROSE one. Try <code>inline()</code>.</p>
<pre><div class="bar"><span>python</span><button>Copy code</button></div><div><code class="hljs language-python">def f(a):
    return a &lt; 2
</code></div></pre>
<p>SENTINEL-PROSE two.</p>
<PRE class="lang-js">const s = "&amp;&#39;&#x41;";<br>go();</PRE>
<p>SENTINEL-PROSE three.</p>
</body></html>"#;
        let s = parse_conversation_export("c", doc, ExportFormat::Html).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].block_index, s[1].block_index), (0, 1));
        assert_eq!(s[0].language_hint.as_deref(), Some("python"));
        assert_eq!(s[0].raw_text, "def f(a):\n    return a < 2");
        assert_eq!(s[1].language_hint.as_deref(), Some("js"));
        assert_eq!(s[1].raw_text, "const s = \"&'A\";\ngo();");
        assert!(s.iter().all(|b| !b.raw_text.contains("SENTINEL") && !b.raw_text.contains("Copy code")));
    }

    #[test]
    fn html_unterminated_pre_is_malformed() {
        let doc = "<p>x</p><pre><code>fn main() {}";
        assert!(matches!(
            parse_conversation_export("c", doc, ExportFormat::Html),
            Err(ConversationError::MalformedDocument(_))
        ));
    }

    #[test]
    fn preface_tag_is_not_pre() {
        let doc = "<preface>not code</preface><pre>x</pre>";
        let s = parse_conversation_export("c", doc, ExportFormat::Html).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].raw_text, "x");
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ExportFormat::from_path(Path::new("a/b.HTML")).unwrap(), ExportFormat::Html);
        assert_eq!(ExportFormat::from_path(Path::new("b.md")).unwrap(), ExportFormat::Markdown);
        assert!(ExportFormat::from_path(Path::new("b.pdf")).is_err());
    }
}
