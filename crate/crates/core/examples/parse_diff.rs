//! Parses a unified diff and prints its files and hunks.
//!
//! `cargo run --example parse_diff [path/to/pr.diff]`

use patchprov::diffmodel::{parse_unified_diff, serialize_diff};

const SAMPLE: &str = "diff --git a/app.py b/app.py
--- a/app.py
+++ b/app.py
@@ -1,3 +1,4 @@ def main():
 import os
-print(os.getcwd())
+cwd = os.getcwd()
+print(cwd)
 main()
diff --git a/logo.png b/logo.png
Binary files a/logo.png and b/logo.png differ
";

fn main() -> std::io::Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    let diff = parse_unified_diff(&text);
    for file in &diff.files {
        println!("{} (binary: {})", file.path(), file.is_binary);
        for hunk in &file.hunks {
            println!("  {}  +{} -{}", hunk.header, hunk.added_lines().count(), hunk.removed_lines().count());
        }
    }
    println!("round trip exact: {}", serialize_diff(&diff) == text);
    Ok(())
}
