#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use patchprov::acquire::{HttpRequest, HttpResponse, ReplayTransport, Transport, TransportError};
use patchprov::cli::Environment;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden() -> PathBuf {
    fixtures().join("golden")
}

pub fn copy_dir(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dst.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &to);
        } else {
            std::fs::copy(entry.path(), &to).unwrap();
        }
    }
}

/// Distinct windows of `n` tokens, found by linear search.
pub fn naive_grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for i in 0..=tokens.len() - n {
        let g = tokens[i..i + n].to_vec();
        let mut seen = false;
        for o in &out {
            if *o == g {
                seen = true;
            }
        }
        if !seen {
            out.push(g);
        }
    }
    out
}

/// Grams of `x` that also occur in `y`, by nested loops.
pub fn naive_shared(x: &[Vec<String>], y: &[Vec<String>]) -> usize {
    let mut shared = 0;
    for a in x {
        for b in y {
            if a == b {
                shared += 1;
                break;
            }
        }
    }
    shared
}

/// Containment of `x` in `y` in tenths of a percent, rounded half up.
pub fn naive_containment_tenths(x: &[Vec<String>], y: &[Vec<String>]) -> Option<u64> {
    if x.is_empty() {
        return None;
    }
    let shared = naive_shared(x, y) as u64;
    let total = x.len() as u64;
    Some((shared * 2000 + total) / (2 * total))
}

/// Records every request that reaches it, answering from an optional
/// replay script and with 404 otherwise.
#[derive(Default)]
pub struct Spy {
    pub seen: Mutex<Vec<HttpRequest>>,
    pub replay: Option<ReplayTransport>,
}

impl Spy {
    pub fn new(replay: Option<ReplayTransport>) -> Arc<Self> {
        Arc::new(Spy {
            seen: Mutex::new(Vec::new()),
            replay,
        })
    }

    pub fn hosts(&self) -> Vec<String> {
        self.seen.lock().unwrap().iter().filter_map(|r| r.host()).collect()
    }

    pub fn count(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl Transport for Spy {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.seen.lock().unwrap().push(request.clone());
        match &self.replay {
            Some(r) => r.send(request).or_else(|_| Ok(HttpResponse::new(404, "{}"))),
            None => Ok(HttpResponse::new(404, "{}")),
        }
    }
}

pub fn replay(name: &str) -> ReplayTransport {
    ReplayTransport::load(&fixtures().join("replay").join(name)).unwrap()
}

pub fn env_with(transport: Option<Arc<dyn Transport>>) -> Environment {
    Environment {
        vars: BTreeMap::new(),
        transport,
    }
}

pub fn run(args: &[&str], env: &Environment) -> i32 {
    let mut full = vec!["patchprov"];
    full.extend_from_slice(args);
    patchprov::cli::run_with(full, env)
}
