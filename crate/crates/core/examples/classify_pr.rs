//! Classifies one in-memory pull request against one conversation.

use patchprov::conversation::{parse_conversation_export, ExportFormat};
use patchprov::diffmodel::parse_unified_diff;
use patchprov::pipeline::{classify_pr, ConversationInput, PrId, PullRequestInput, Settings};

const DIFF: &str = "diff --git a/util.py b/util.py
--- a/util.py
+++ b/util.py
@@ -1,2 +1,5 @@
 import json
+def load(path):
+    with open(path) as f:
+        return json.load(f)
 
diff --git a/docs/notes.md b/docs/notes.md
--- a/docs/notes.md
+++ b/docs/notes.md
@@ -1 +1,2 @@
 # Notes
+Loader added
";

const EXPORT: &str = "```python
def load(path):
    with open(path) as f:
        return json.load(f)
```
";

fn main() {
    let input = PullRequestInput {
        id: PrId::new("octo", "demo", 1),
        merged: true,
        diff: parse_unified_diff(DIFF),
        conversations: vec![ConversationInput {
            conversation_id: "c1".into(),
            snippets: parse_conversation_export("c1", EXPORT, ExportFormat::Markdown).map_err(|e| e.to_string()),
        }],
    };
    let out = classify_pr(&input, &Settings::default());
    for h in &out.hunks {
        let pct = h.best_match.map(|m| m.containment_pct.to_string()).unwrap_or_else(|| "-".into());
        println!("{} {} {} containment {pct}", h.file, h.header, h.label);
    }
    println!("{}: {} integration {:?}", out.id, out.verdict.label, out.verdict.integration_pct.map(|p| p.to_string()));
}
