//! On-disk dataset layout.
//!
//! ```text
//! root/
//!   manifest.json
//!   owner__repo__number/
//!     record.json
//!     pr.diff
//!     conversations/<conversation id>.html | .md
//! ```
//!
//! Conversation exports are saved into `conversations/` by hand; nothing in
//! this crate downloads them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquire::{PrState, PullRequestRecord};
use crate::conversation::{parse_conversation_export, ExportFormat};
use crate::diffmodel::{parse_unified_diff, PullRequestDiff};
use crate::pipeline::{ConversationInput, PrId, PullRequestInput};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORD_FILE: &str = "record.json";
pub const DIFF_FILE: &str = "pr.diff";
pub const CONVERSATIONS_DIR: &str = "conversations";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset not found: {0}")]
    MissingDataset(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub owner: String,
    pub repo: String,
    pub number: u64,
    pub state: PrState,
}

impl ManifestEntry {
    pub fn id(&self) -> PrId {
        PrId::new(&self.owner, &self.repo, self.number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            schema_version: MANIFEST_VERSION,
            entries: Vec::new(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
}

impl Dataset {
    /// Opens an existing dataset directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(DatasetError::MissingDataset(root));
        }
        Ok(Dataset { root })
    }

    /// Opens or creates the dataset directory.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Dataset { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn pr_dir(&self, id: &PrId) -> PathBuf {
        self.root.join(id.dir_name())
    }

    /// The manifest, or an empty one if none was written.
    pub fn manifest(&self) -> Result<Manifest, DatasetError> {
        let path = self.root.join(MANIFEST_FILE);
        if path.exists() {
            read_json(&path)
        } else {
            Ok(Manifest::default())
        }
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> Result<(), DatasetError> {
        write_json(&self.root.join(MANIFEST_FILE), manifest)
    }

    /// PR ids listed in the manifest, or found by scanning the directory
    /// when the manifest is empty. Sorted.
    pub fn pr_ids(&self) -> Result<Vec<PrId>, DatasetError> {
        let manifest = self.manifest()?;
        let mut ids: Vec<PrId> = if manifest.entries.is_empty() {
            let mut found = Vec::new();
            for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
                let entry = entry.map_err(io_err(&self.root))?;
                if entry.path().join(RECORD_FILE).is_file() {
                    if let Some(id) = entry.file_name().to_str().and_then(PrId::from_dir_name) {
                        found.push(id);
                    }
                }
            }
            found
        } else {
            manifest.entries.iter().map(ManifestEntry::id).collect()
        };
        ids.sort();
        ids.dedup();
        Ok(ids)
    }

    /// Writes record and diff and registers the PR in the manifest.
    pub fn save_pull_request(&self, record: &PullRequestRecord, diff_text: &str) -> Result<(), DatasetError> {
        let dir = self.pr_dir(&record.id());
        let conv = dir.join(CONVERSATIONS_DIR);
        fs::create_dir_all(&conv).map_err(io_err(&conv))?;
        write_json(&dir.join(RECORD_FILE), record)?;
        let diff = dir.join(&record.diff_path);
        fs::write(&diff, diff_text).map_err(io_err(&diff))?;

        let mut manifest = self.manifest()?;
        let entry = ManifestEntry {
            owner: record.owner.clone(),
            repo: record.repo.clone(),
            number: record.number,
            state: record.state,
        };
        match manifest.entries.iter_mut().find(|e| e.id() == entry.id()) {
            Some(e) => *e = entry,
            None => manifest.entries.push(entry),
        }
        manifest.entries.sort_by_key(ManifestEntry::id);
        self.save_manifest(&manifest)
    }

    pub fn load_record(&self, id: &PrId) -> Result<PullRequestRecord, DatasetError> {
        read_json(&self.pr_dir(id).join(RECORD_FILE))
    }

    pub fn load_diff(&self, id: &PrId, record: &PullRequestRecord) -> Result<PullRequestDiff, DatasetError> {
        let path = self.pr_dir(id).join(&record.diff_path);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let mut diff = parse_unified_diff(&String::from_utf8_lossy(&bytes));
        diff.truncated |= record.truncated;
        Ok(diff)
    }

    /// Parsed snippets of each conversation in `conversations/`, plus a
    /// failed entry for every linked conversation with no saved export.
    pub fn load_conversations(&self, id: &PrId, record: &PullRequestRecord) -> Vec<ConversationInput> {
        let dir = self.pr_dir(id).join(CONVERSATIONS_DIR);
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect())
            .unwrap_or_default();
        files.sort();

        let mut out: Vec<ConversationInput> = files
            .iter()
            .map(|path| {
                let conversation_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let snippets = ExportFormat::from_path(path)
                    .map_err(|e| e.to_string())
                    .and_then(|format| {
                        let bytes = fs::read(path).map_err(|e| e.to_string())?;
                        parse_conversation_export(&conversation_id, &String::from_utf8_lossy(&bytes), format)
                            .map_err(|e| e.to_string())
                    });
                ConversationInput {
                    conversation_id,
                    snippets,
                }
            })
            .collect();

        for link in &record.share_links {
            if !out.iter().any(|c| c.conversation_id == link.conversation_id) {
                out.push(ConversationInput {
                    conversation_id: link.conversation_id.clone(),
                    snippets: Err("no saved export for linked conversation".into()),
                });
            }
        }
        out
    }

    /// Everything the classifier needs for one PR.
    pub fn load_input(&self, id: &PrId) -> Result<PullRequestInput, DatasetError> {
        let record = self.load_record(id)?;
        let diff = self.load_diff(id, &record)?;
        Ok(PullRequestInput {
            id: id.clone(),
            merged: record.merged(),
            conversations: self.load_conversations(id, &record),
            diff,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(number: u64) -> PullRequestRecord {
        PullRequestRecord {
            owner: "o".into(),
            repo: "r".into(),
            number,
            state: PrState::Merged,
            merged_at: None,
            title: String::new(),
            body: String::new(),
            comment_texts: vec![],
            commit_messages: vec![],
            diff_path: DIFF_FILE.into(),
            truncated: false,
            share_links: vec![],
        }
    }

    #[test]
    fn save_and_load() {
        let tmp = tempfile::tempdir().unwrap();
        let ds = Dataset::create(tmp.path()).unwrap();
        ds.save_pull_request(&record(2), "").unwrap();
        ds.save_pull_request(&record(1), "").unwrap();
        ds.save_pull_request(&record(2), "").unwrap();
        assert_eq!(ds.manifest().unwrap().entries.len(), 2);
        assert_eq!(ds.pr_ids().unwrap(), [PrId::new("o", "r", 1), PrId::new("o", "r", 2)]);

        let id = PrId::new("o", "r", 1);
        fs::write(ds.pr_dir(&id).join("conversations/c1.md"), "```py\nx = 1\n```\n").unwrap();
        fs::write(ds.pr_dir(&id).join("conversations/c2.pdf"), "").unwrap();
        let input = ds.load_input(&id).unwrap();
        assert!(input.merged);
        assert_eq!(input.conversations.len(), 2);
        assert_eq!(input.conversations[0].snippets.as_ref().unwrap().len(), 1);
        assert!(input.conversations[1].snippets.is_err());
    }

    #[test]
    fn scan_without_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let ds = Dataset::create(tmp.path()).unwrap();
        ds.save_pull_request(&record(3), "").unwrap();
        fs::remove_file(tmp.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(ds.pr_ids().unwrap(), [PrId::new("o", "r", 3)]);
    }

    #[test]
    fn missing_dataset() {
        assert!(matches!(Dataset::open("/nonexistent/x"), Err(DatasetError::MissingDataset(_))));
    }
}
