//! Shows how lines are canonicalized and tokenized per file type.

use patchprov::matching::tokenize;
use patchprov::normalize::{normalize_lines, Registry};

fn main() {
    let registry = Registry::builtin();
    let samples: [(&str, &[&str]); 3] = [
        ("src/main.rs", &["let   Total = a + b; // sum", "/* note */", "println!(\"{}\", total);"]),
        ("tool.py", &["def Run(x):  # entry", "    return x * 2"]),
        ("README.md", &["# Usage", "Run it."]),
    ];
    for (path, lines) in samples {
        let profile = registry.detect(path);
        match normalize_lines(lines, &profile) {
            Ok(norm) => {
                let tokens: Vec<String> = tokenize(&norm).iter().map(|t| t.as_str().to_string()).collect();
                println!("{path} [{}]: {:?}", profile.name, norm.lines);
                println!("  tokens: {tokens:?}");
            }
            Err(e) => println!("{path}: {e}"),
        }
    }
}
