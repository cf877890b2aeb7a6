//! File-type detection and line normalization.
//!
//! Normalization runs in a fixed order on every line: comments are stripped
//! (with block-comment state carried across lines), then non-ASCII
//! characters are dropped, the rest is lowercased, all whitespace is
//! removed, and lines left empty are discarded.
//!
//! There is no lexer: comment markers inside string literals are treated as
//! comments. The same rule applies on both sides of a comparison.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version tag of the built-in registry; bump when profiles change.
pub const REGISTRY_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("file type {0:?} is not supported")]
    UnsupportedProfile(String),
    #[error("bad file-type registry: {0}")]
    BadRegistry(String),
    #[error("reading registry: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileTypeProfile {
    pub name: String,
    /// Path suffixes including the dot, matched case-insensitively.
    #[serde(default)]
    pub extensions: Vec<String>,
    /// Exact file names such as `Makefile`; checked before suffixes.
    #[serde(default)]
    pub basenames: Vec<String>,
    /// Fence info strings that select this profile for snippets.
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub line_comment: Option<String>,
    #[serde(default)]
    pub block_comment: Option<(String, String)>,
    #[serde(default = "yes")]
    pub supported: bool,
}

fn yes() -> bool {
    true
}

impl FileTypeProfile {
    pub fn unsupported() -> Self {
        FileTypeProfile {
            name: "unsupported".into(),
            extensions: vec![],
            basenames: vec![],
            aliases: vec![],
            line_comment: None,
            block_comment: None,
            supported: false,
        }
    }

    fn validate(&self) -> Result<(), NormalizeError> {
        let bad = |m: &str| Err(NormalizeError::BadRegistry(format!("{}: {m}", self.name)));
        if self.name.is_empty() {
            return bad("empty name");
        }
        if self.supported && self.extensions.is_empty() && self.basenames.is_empty() {
            return bad("supported profile without extensions");
        }
        if self.line_comment.as_deref() == Some("") {
            return bad("empty line comment marker");
        }
        if let Some((open, close)) = &self.block_comment {
            if open.is_empty() || close.is_empty() {
                return bad("empty block comment marker");
            }
        }
        Ok(())
    }
}

struct Spec {
    name: &'static str,
    exts: &'static [&'static str],
    basenames: &'static [&'static str],
    aliases: &'static [&'static str],
    line: Option<&'static str>,
    block: Option<(&'static str, &'static str)>,
}

const C_BLOCK: Option<(&str, &str)> = Some(("/*", "*/"));
const XML_BLOCK: Option<(&str, &str)> = Some(("<!--", "-->"));

macro_rules! spec {
    ($name:expr, [$($e:expr),*], [$($b:expr),*], [$($a:expr),*], $line:expr, $block:expr) => {
        Spec { name: $name, exts: &[$($e),*], basenames: &[$($b),*], aliases: &[$($a),*], line: $line, block: $block }
    };
}

const BUILTIN: &[Spec] = &[
    spec!("c", [".c", ".h"], [], ["c"], Some("//"), C_BLOCK),
    spec!("cpp", [".cpp", ".cc", ".cxx", ".hpp", ".hh", ".hxx", ".ino"], [], ["cpp", "c++", "cxx"], Some("//"), C_BLOCK),
    spec!("csharp", [".cs"], [], ["csharp", "cs", "c#"], Some("//"), C_BLOCK),
    spec!("java", [".java"], [], ["java"], Some("//"), C_BLOCK),
    spec!("kotlin", [".kt", ".kts"], [], ["kotlin", "kt"], Some("//"), C_BLOCK),
    spec!("scala", [".scala", ".sc"], [], ["scala"], Some("//"), C_BLOCK),
    spec!("swift", [".swift"], [], ["swift"], Some("//"), C_BLOCK),
    spec!("go", [".go"], [], ["go", "golang"], Some("//"), C_BLOCK),
    spec!("rust", [".rs"], [], ["rust", "rs"], Some("//"), C_BLOCK),
    spec!("javascript", [".js", ".mjs", ".cjs", ".jsx"], [], ["javascript", "js", "jsx", "node"], Some("//"), C_BLOCK),
    spec!("typescript", [".ts", ".tsx", ".mts", ".cts"], [], ["typescript", "ts", "tsx"], Some("//"), C_BLOCK),
    spec!("dart", [".dart"], [], ["dart"], Some("//"), C_BLOCK),
    spec!("php", [".php"], [], ["php"], Some("//"), C_BLOCK),
    spec!("objectivec", [".m", ".mm"], [], ["objectivec", "objc", "objective-c"], Some("//"), C_BLOCK),
    spec!("groovy", [".groovy", ".gradle"], ["Jenkinsfile"], ["groovy", "gradle"], Some("//"), C_BLOCK),
    spec!("solidity", [".sol"], [], ["solidity", "sol"], Some("//"), C_BLOCK),
    spec!("zig", [".zig"], [], ["zig"], Some("//"), None),
    spec!("protobuf", [".proto"], [], ["protobuf", "proto"], Some("//"), C_BLOCK),
    spec!("css", [".css"], [], ["css"], None, C_BLOCK),
    spec!("scss", [".scss", ".less"], [], ["scss", "less", "sass"], Some("//"), C_BLOCK),
    spec!("python", [".py", ".pyi", ".pyw"], [], ["python", "py", "python3"], Some("#"), None),
    spec!("ruby", [".rb", ".rake", ".gemspec"], ["Gemfile", "Rakefile"], ["ruby", "rb"], Some("#"), None),
    spec!("perl", [".pl", ".pm"], [], ["perl", "pl"], Some("#"), None),
    spec!("shell", [".sh", ".bash", ".zsh", ".ksh"], [".bashrc", ".zshrc", ".profile"], ["shell", "sh", "bash", "zsh", "console", "shellscript"], Some("#"), None),
    spec!("powershell", [".ps1", ".psm1"], [], ["powershell", "ps1", "pwsh"], Some("#"), Some(("<#", "#>"))),
    spec!("r", [".r"], [], ["r"], Some("#"), None),
    spec!("julia", [".jl"], [], ["julia", "jl"], Some("#"), Some(("#=", "=#"))),
    spec!("elixir", [".ex", ".exs"], [], ["elixir", "ex"], Some("#"), None),
    spec!("yaml", [".yml", ".yaml"], [], ["yaml", "yml"], Some("#"), None),
    spec!("toml", [".toml"], ["Pipfile"], ["toml"], Some("#"), None),
    spec!("ini", [".ini", ".cfg", ".conf", ".properties"], [".editorconfig"], ["ini", "cfg", "properties"], Some(";"), None),
    spec!("dockerfile", [".dockerfile"], ["Dockerfile", "Containerfile"], ["dockerfile", "docker"], Some("#"), None),
    spec!("makefile", [".mk", ".mak"], ["Makefile", "makefile", "GNUmakefile"], ["makefile", "make", "mk"], Some("#"), None),
    spec!("cmake", [".cmake"], ["CMakeLists.txt"], ["cmake"], Some("#"), None),
    spec!("terraform", [".tf", ".tfvars", ".hcl"], [], ["terraform", "hcl", "tf"], Some("#"), C_BLOCK),
    spec!("graphql", [".graphql", ".gql"], [], ["graphql", "gql"], Some("#"), None),
    spec!("sql", [".sql"], [], ["sql", "mysql", "postgresql", "psql", "sqlite"], Some("--"), C_BLOCK),
    spec!("lua", [".lua"], [], ["lua"], Some("--"), Some(("--[[", "]]"))),
    spec!("haskell", [".hs", ".lhs"], [], ["haskell", "hs"], Some("--"), Some(("{-", "-}"))),
    spec!("erlang", [".erl", ".hrl"], [], ["erlang", "erl"], Some("%"), None),
    spec!("clojure", [".clj", ".cljs", ".cljc", ".edn"], [], ["clojure", "clj"], Some(";"), None),
    spec!("lisp", [".lisp", ".el", ".scm"], [], ["lisp", "elisp", "scheme"], Some(";"), None),
    spec!("html", [".html", ".htm", ".xhtml"], [], ["html", "xhtml"], None, XML_BLOCK),
    spec!("xml", [".xml", ".xsd", ".xsl", ".plist", ".csproj"], [], ["xml"], None, XML_BLOCK),
    spec!("vue", [".vue", ".svelte"], [], ["vue", "svelte"], None, XML_BLOCK),
    spec!("markdown", [".md", ".markdown", ".mdx"], [], ["markdown", "md"], None, XML_BLOCK),
    spec!("json", [".json", ".jsonc"], [], ["json", "jsonc"], None, None),
    spec!("batch", [".bat", ".cmd"], [], ["batch", "bat", "cmd"], Some("::"), None),
    spec!("text", [".txt"], [], ["text", "txt", "plaintext"], None, None),
];

/// An ordered list of profiles. Earlier profiles win ties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Registry {
    #[serde(rename = "profile", default)]
    profiles: Vec<FileTypeProfile>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::builtin()
    }
}

impl Registry {
    pub fn builtin() -> Self {
        let profiles = BUILTIN
            .iter()
            .map(|s| FileTypeProfile {
                name: s.name.into(),
                extensions: s.exts.iter().map(|e| e.to_string()).collect(),
                basenames: s.basenames.iter().map(|e| e.to_string()).collect(),
                aliases: s.aliases.iter().map(|e| e.to_string()).collect(),
                line_comment: s.line.map(str::to_string),
                block_comment: s.block.map(|(o, c)| (o.to_string(), c.to_string())),
                supported: true,
            })
            .collect();
        Registry { profiles }
    }

    pub fn new(profiles: Vec<FileTypeProfile>) -> Result<Self, NormalizeError> {
        if profiles.is_empty() {
            return Err(NormalizeError::BadRegistry("empty registry".into()));
        }
        for p in &profiles {
            p.validate()?;
        }
        Ok(Registry { profiles })
    }

    /// Parses a TOML registry (`[[profile]]` tables) and layers it over the
    /// built-in one: same-named profiles are replaced, new ones take priority.
    pub fn with_overrides_toml(text: &str) -> Result<Self, NormalizeError> {
        let extra: Registry =
            toml::from_str(text).map_err(|e| NormalizeError::BadRegistry(e.to_string()))?;
        for p in &extra.profiles {
            p.validate()?;
        }
        let mut profiles = extra.profiles.clone();
        profiles.extend(
            Registry::builtin()
                .profiles
                .into_iter()
                .filter(|b| !extra.profiles.iter().any(|p| p.name == b.name)),
        );
        Registry::new(profiles)
    }

    pub fn load_overrides(path: &Path) -> Result<Self, NormalizeError> {
        Registry::with_overrides_toml(&std::fs::read_to_string(path)?)
    }

    pub fn profiles(&self) -> &[FileTypeProfile] {
        &self.profiles
    }

    pub fn by_name(&self, name: &str) -> Option<&FileTypeProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    pub fn detect(&self, path: &str) -> FileTypeProfile {
        detect_file_type(path, &self.profiles)
    }

    /// Looks up a snippet's fence hint (`python`, `js`, `c++`, ...).
    pub fn for_hint(&self, hint: &str) -> Option<&FileTypeProfile> {
        let hint = hint.trim().to_ascii_lowercase();
        if hint.is_empty() {
            return None;
        }
        let dotted = format!(".{hint}");
        self.profiles
            .iter()
            .filter(|p| p.supported)
            .find(|p| p.name == hint || p.aliases.contains(&hint))
            .or_else(|| {
                self.profiles
                    .iter()
                    .filter(|p| p.supported)
                    .find(|p| p.extensions.iter().any(|e| e.eq_ignore_ascii_case(&dotted)))
            })
    }
}

/// Picks the profile for a repository path: an exact basename rule first,
/// then the longest matching suffix, else the unsupported profile.
pub fn detect_file_type(path: &str, registry: &[FileTypeProfile]) -> FileTypeProfile {
    let basename = path.rsplit('/').next().unwrap_or(path);
    if let Some(p) = registry.iter().find(|p| p.basenames.iter().any(|b| b == basename)) {
        return p.clone();
    }
    let lower = basename.to_ascii_lowercase();
    let mut best: Option<(&FileTypeProfile, usize)> = None;
    for p in registry {
        for ext in &p.extensions {
            let ext_len = ext.len();
            if lower.len() > ext_len
                && lower.ends_with(&ext.to_ascii_lowercase())
                && best.is_none_or(|(_, len)| ext_len > len)
            {
                best = Some((p, ext_len));
            }
        }
    }
    best.map(|(p, _)| p.clone())
        .unwrap_or_else(FileTypeProfile::unsupported)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedLines {
    pub lines: Vec<String>,
    pub dropped_count: usize,
    pub profile: FileTypeProfile,
}

/// Normalizes a unit of code (one hunk's added lines, or one snippet).
///
/// The pass is repeated until it no longer changes the output: removing
/// whitespace can join `/ /` into a marker, and a second pass strips it.
pub fn normalize_lines<S: AsRef<str>>(
    lines: &[S],
    profile: &FileTypeProfile,
) -> Result<NormalizedLines, NormalizeError> {
    if !profile.supported {
        return Err(NormalizeError::UnsupportedProfile(profile.name.clone()));
    }
    let mut current = normalize_pass(lines.iter().map(AsRef::as_ref), profile);
    loop {
        let next = normalize_pass(current.iter().map(String::as_str), profile);
        if next == current {
            break;
        }
        current = next;
    }
    Ok(NormalizedLines {
        dropped_count: lines.len() - current.len(),
        lines: current,
        profile: profile.clone(),
    })
}

fn normalize_pass<'a>(lines: impl Iterator<Item = &'a str>, profile: &FileTypeProfile) -> Vec<String> {
    let mut in_block = false;
    lines
        .filter_map(|line| {
            let code = strip_comments(line, profile, &mut in_block);
            let out: String = code
                .chars()
                .filter(|c| c.is_ascii() && !c.is_ascii_whitespace())
                .map(|c| c.to_ascii_lowercase())
                .collect();
            (!out.is_empty()).then_some(out)
        })
        .collect()
}

/// Removes comment text from one line. `in_block` carries an open block
/// comment into the next line.
fn strip_comments(line: &str, profile: &FileTypeProfile, in_block: &mut bool) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    loop {
        if *in_block {
            let close = &profile.block_comment.as_ref().expect("in_block implies markers").1;
            match rest.find(close.as_str()) {
                Some(i) => {
                    rest = &rest[i + close.len()..];
                    *in_block = false;
                }
                None => return out,
            }
        }
        let line_at = profile.line_comment.as_deref().and_then(|m| rest.find(m));
        let block_at = profile
            .block_comment
            .as_ref()
            .and_then(|(open, _)| rest.find(open.as_str()).map(|i| (i, open.len())));
        match (line_at, block_at) {
            // `--[[` starts with `--`: the block marker wins when both begin together
            (Some(l), Some((b, len))) if b <= l => {
                out.push_str(&rest[..b]);
                rest = &rest[b + len..];
                *in_block = true;
            }
            (Some(l), _) => {
                out.push_str(&rest[..l]);
                return out;
            }
            (None, Some((b, len))) => {
                out.push_str(&rest[..b]);
                rest = &rest[b + len..];
                *in_block = true;
            }
            (None, None) => {
                out.push_str(rest);
                return out;
            }
        }
    }
}
